#pragma once

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "turbforward/core.hpp"
#include "turbforward/psf.hpp"
#include "turbforward/turbulence.hpp"

namespace turbforward {

// Dense N x N operator: row i is the response at output coordinate i,
// column j the weight on input coordinate j. Brute-force oracle scale only.
struct OperatorMatrix {
  enum class Tag { tilt, blur, full };

  int n = 0;
  Tag tag = Tag::blur;
  std::vector<double> a;

  OperatorMatrix() = default;
  OperatorMatrix(int size, Tag t) : n(size), tag(t) {
    if (size < 1 || size > 4096)
      throw std::invalid_argument("matrix size must be in [1, 4096]");
    a.assign(static_cast<std::size_t>(size) * size, 0.0);
  }

  double at(int i, int j) const {
    return a[static_cast<std::size_t>(i) * n + j];
  }
  double& at(int i, int j) { return a[static_cast<std::size_t>(i) * n + j]; }
};

inline OperatorMatrix matmul(const OperatorMatrix& lhs,
                             const OperatorMatrix& rhs) {
  if (lhs.n != rhs.n) throw std::invalid_argument("matrix size mismatch");
  OperatorMatrix out(lhs.n, OperatorMatrix::Tag::full);
  for (int i = 0; i < lhs.n; ++i)
    for (int k = 0; k < lhs.n; ++k) {
      const double v = lhs.at(i, k);
      if (v == 0.0) continue;
      for (int j = 0; j < lhs.n; ++j) out.at(i, j) += v * rhs.at(k, j);
    }
  return out;
}

inline std::vector<double> matvec(const OperatorMatrix& m,
                                  const std::vector<double>& x) {
  if (static_cast<int>(x.size()) != m.n)
    throw std::invalid_argument("vector size mismatch");
  std::vector<double> y(static_cast<std::size_t>(m.n), 0.0);
  for (int i = 0; i < m.n; ++i) {
    double acc = 0.0;
    for (int j = 0; j < m.n; ++j) acc += m.at(i, j) * x[j];
    y[static_cast<std::size_t>(i)] = acc;
  }
  return y;
}

inline double max_abs_diff(const OperatorMatrix& x, const OperatorMatrix& y) {
  if (x.n != y.n) throw std::invalid_argument("matrix size mismatch");
  return max_abs_diff(x.a, y.a);
}

inline double frobenius_norm(const OperatorMatrix& m) {
  double s = 0.0;
  for (double v : m.a) s += v * v;
  return std::sqrt(s);
}

namespace detail {

inline int require_integer_tilt(double t) {
  const double r = std::round(t);
  if (std::abs(t - r) > 1e-9)
    throw std::invalid_argument("matrix backend requires integer tilts");
  return static_cast<int>(r);
}

}  // namespace detail

// [T]_{ij} = 1 iff source j relocates onto output i. Sources leaving the
// frame give zero columns; outputs nobody lands on give zero rows.
inline OperatorMatrix build_tilt_matrix(const std::vector<int>& tilts) {
  const int n = static_cast<int>(tilts.size());
  OperatorMatrix t(n, OperatorMatrix::Tag::tilt);
  for (int j = 0; j < n; ++j) {
    const int i = j + tilts[static_cast<std::size_t>(j)];
    if (i >= 0 && i < n) t.at(i, j) = 1.0;
  }
  return t;
}

inline OperatorMatrix build_tilt_matrix(const TiltField& tilts) {
  const int n = tilts.rows * tilts.cols;
  OperatorMatrix t(n, OperatorMatrix::Tag::tilt);
  for (int r = 0; r < tilts.rows; ++r)
    for (int c = 0; c < tilts.cols; ++c) {
      const Vec2 v = tilts.at(r, c);
      const int rr = r + detail::require_integer_tilt(v.y);
      const int cc = c + detail::require_integer_tilt(v.x);
      if (rr < 0 || rr >= tilts.rows || cc < 0 || cc >= tilts.cols) continue;
      t.at(rr * tilts.cols + cc, r * tilts.cols + c) = 1.0;
    }
  return t;
}

// 1-D blur rows from an odd-length kernel per output sample (or one shared
// kernel); row i holds the kernel written in input coordinates, zero-padded
// at the boundary so interior rows sum to 1 and edge rows to less.
inline OperatorMatrix build_blur_matrix(
    int n, const std::vector<std::vector<double>>& kernel_rows) {
  OperatorMatrix b(n, OperatorMatrix::Tag::blur);
  for (int i = 0; i < n; ++i) {
    const auto& g = kernel_rows.size() == 1
                        ? kernel_rows[0]
                        : kernel_rows[static_cast<std::size_t>(i)];
    if (g.empty() || g.size() % 2 == 0)
      throw std::invalid_argument("blur kernel length must be odd");
    const int half = static_cast<int>(g.size() - 1) / 2;
    for (int d = -half; d <= half; ++d) {
      const int j = i - d;
      if (j < 0 || j >= n) continue;
      b.at(i, j) = g[static_cast<std::size_t>(d + half)];
    }
  }
  return b;
}

// 2-D blur rows from a kernel field over a rows x cols lattice flattened
// row-major; row index(r,c) holds that output pixel's kernel.
inline OperatorMatrix build_blur_matrix(const PsfField& field) {
  const int rows = field.image_rows, cols = field.image_cols;
  const int n = rows * cols;
  OperatorMatrix b(n, OperatorMatrix::Tag::blur);
  const int half = (field.kernel_size - 1) / 2;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const Psf k = field.kernel_at(r, c);
      for (int dr = -half; dr <= half; ++dr)
        for (int dc = -half; dc <= half; ++dc) {
          const int ur = r - dr, uc = c - dc;
          if (ur < 0 || ur >= rows || uc < 0 || uc >= cols) continue;
          b.at(r * cols + c, ur * cols + uc) = k.at(dr + half, dc + half);
        }
    }
  return b;
}

// [H]_{ij} = b_{x_i}(u_j + t_j): the blur row evaluated at the relocated
// source. Structurally equal to B.T for any integer tilt assignment.
inline OperatorMatrix build_full_matrix(const PsfField& field,
                                        const TiltField& tilts) {
  const int rows = field.image_rows, cols = field.image_cols;
  if (tilts.rows != rows || tilts.cols != cols)
    throw std::invalid_argument("tilt field size mismatch");
  const int n = rows * cols;
  OperatorMatrix h(n, OperatorMatrix::Tag::full);
  const int half = (field.kernel_size - 1) / 2;
  for (int ur = 0; ur < rows; ++ur)
    for (int uc = 0; uc < cols; ++uc) {
      const Vec2 v = tilts.at(ur, uc);
      const int dr0 = ur + detail::require_integer_tilt(v.y);
      const int dc0 = uc + detail::require_integer_tilt(v.x);
      if (dr0 < 0 || dr0 >= rows || dc0 < 0 || dc0 >= cols) continue;
      const int j = ur * cols + uc;
      for (int i = 0; i < n; ++i) {
        const int xr = i / cols, xc = i % cols;
        const int dr = xr - dr0, dc = xc - dc0;
        if (dr < -half || dr > half || dc < -half || dc > half) continue;
        const Psf k = field.kernel_at(xr, xc);
        h.at(i, j) = k.at(dr + half, dc + half);
      }
    }
  return h;
}

struct CommutatorReport {
  double max_abs = 0.0;
  double frobenius = 0.0;
  // Entrywise-verified structure for the tilt encoded in T:
  // (TB) row i equals the sum of B rows relocating onto i;
  // (BT) column j equals B's column at j's destination (zero if dropped).
  bool tb_relocates_rows = false;
  bool bt_relocates_columns = false;
};

// Products of a 0/1 relocation matrix with a generic blur matrix, verified
// entrywise against the relocation map extracted from T's columns.
inline CommutatorReport commutator_report(const OperatorMatrix& t,
                                          const OperatorMatrix& b) {
  if (t.n != b.n) throw std::invalid_argument("matrix size mismatch");
  const int n = t.n;

  // destination of each source column; -1 when the source is dropped
  std::vector<int> dest(static_cast<std::size_t>(n), -1);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      if (t.at(i, j) != 0.0) {
        dest[static_cast<std::size_t>(j)] = i;
        break;
      }

  const OperatorMatrix tb = matmul(t, b);
  const OperatorMatrix bt = matmul(b, t);

  bool rows_ok = true;
  for (int i = 0; i < n && rows_ok; ++i)
    for (int j = 0; j < n; ++j) {
      double expect = 0.0;
      for (int k = 0; k < n; ++k)
        if (dest[static_cast<std::size_t>(k)] == i) expect += b.at(k, j);
      if (std::abs(tb.at(i, j) - expect) > 0.0) {
        rows_ok = false;
        break;
      }
    }

  bool cols_ok = true;
  for (int j = 0; j < n && cols_ok; ++j) {
    const int d = dest[static_cast<std::size_t>(j)];
    for (int i = 0; i < n; ++i) {
      const double expect = d < 0 ? 0.0 : b.at(i, d);
      if (std::abs(bt.at(i, j) - expect) > 0.0) {
        cols_ok = false;
        break;
      }
    }
  }

  CommutatorReport rep;
  rep.tb_relocates_rows = rows_ok;
  rep.bt_relocates_columns = cols_ok;
  OperatorMatrix diff(n, OperatorMatrix::Tag::full);
  for (std::size_t i = 0; i < diff.a.size(); ++i)
    diff.a[i] = tb.a[i] - bt.a[i];
  rep.max_abs = max_abs(diff.a);
  rep.frobenius = frobenius_norm(diff);
  return rep;
}

// Plain-text dense export, one row per line.
inline void write_matrix_text(const std::string& path,
                              const OperatorMatrix& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write matrix: " + path);
  out.precision(17);
  for (int i = 0; i < m.n; ++i) {
    for (int j = 0; j < m.n; ++j) {
      if (j) out << ' ';
      out << m.at(i, j);
    }
    out << '\n';
  }
}

}  // namespace turbforward
