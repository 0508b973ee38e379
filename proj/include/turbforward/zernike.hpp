#pragma once
// Noll-ordered Zernike basis on the discretized pupil. Mode 1 is piston,
// modes 2-3 are the x/y tilts, mode 4 defocus. Normalization is unit RMS
// over the unit disk: sqrt(n+1) for m=0 and sqrt(2(n+1)) otherwise, so the
// continuum inner product (1/pi) * integral(Z_i Z_j) is the identity.
//
// Projection onto a mode subset is least-squares against the discrete
// planes (Gram system), which absorbs disk-edge pixelation: reassembling a
// projected linear combination recovers its coefficients to solver accuracy.

#include <vector>

#include "turbforward/core.hpp"
#include "turbforward/pupil.hpp"

namespace turbforward {

/// Noll single index -> radial order n and signed azimuthal order m.
/// Negative m denotes the sine term, positive the cosine term.
inline void noll_to_nm(int j, int& n, int& m) {
  n = 0;
  int len = 1;
  for (int k = 1; len < j; ++k) len += (n = k) + 1;
  const int dl = n + 1 - len + j;
  m = 2 * ((dl + (n % 2)) / 2) + !(n % 2) - 1;
  m *= (j % 2) ? -1 : 1;
}

namespace detail {
inline double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

inline double radial_poly(int n, int m, double rho) {
  double s = 0.0;
  for (int k = 0; k <= (n - m) / 2; ++k) {
    const double num = ((k % 2) ? -1.0 : 1.0) * factorial(n - k);
    const double den = factorial(k) * factorial((n + m) / 2 - k) * factorial((n - m) / 2 - k);
    s += num / den * std::pow(rho, n - 2 * k);
  }
  return s;
}
}  // namespace detail

/// Closed-form Noll polynomial evaluated at a normalized pupil coordinate.
inline double zernike_eval(int j, double rho_x, double rho_y) {
  if (j < 1) throw std::invalid_argument("zernike_eval: Noll index starts at 1");
  int n, m;
  noll_to_nm(j, n, m);
  const int ma = std::abs(m);
  const double rho = std::sqrt(rho_x * rho_x + rho_y * rho_y);
  const double radial = detail::radial_poly(n, ma, rho);
  if (m == 0) return std::sqrt(n + 1.0) * radial;
  const double theta = std::atan2(rho_y, rho_x);
  const double ang = (m > 0) ? std::cos(ma * theta) : std::sin(ma * theta);
  return std::sqrt(2.0 * (n + 1.0)) * radial * ang;
}

struct ZernikeStack {
  int resolution = 0;
  int modes = 0;
  std::vector<double> planes;  // modes * P * P, plane-major, zero outside disk
  std::vector<double> gram;    // modes * modes discrete inner products over the disk

  const double* plane(int j) const {  // j is the 1-based Noll index
    return planes.data() + static_cast<size_t>(j - 1) * resolution * resolution;
  }
  double gram_at(int a, int b) const {  // 1-based
    return gram[static_cast<size_t>(a - 1) * modes + (b - 1)];
  }
};

inline ZernikeStack build_zernike_stack(const PupilGrid& grid, int modes) {
  if (modes < 3) throw std::invalid_argument("build_zernike_stack: modes must be >= 3");
  ZernikeStack st;
  const int p = grid.resolution;
  st.resolution = p;
  st.modes = modes;
  st.planes.assign(static_cast<size_t>(modes) * p * p, 0.0);

  for (int j = 1; j <= modes; ++j) {
    double* out = st.planes.data() + static_cast<size_t>(j - 1) * p * p;
    for (int idx : grid.disk) out[idx] = zernike_eval(j, grid.rho_x[idx], grid.rho_y[idx]);
  }

  st.gram.assign(static_cast<size_t>(modes) * modes, 0.0);
  for (int a = 0; a < modes; ++a) {
    const double* pa = st.planes.data() + static_cast<size_t>(a) * p * p;
    for (int b = a; b < modes; ++b) {
      const double* pb = st.planes.data() + static_cast<size_t>(b) * p * p;
      double s = 0.0;
      for (int idx : grid.disk) s += pa[idx] * pb[idx];
      st.gram[static_cast<size_t>(a) * modes + b] = s;
      st.gram[static_cast<size_t>(b) * modes + a] = s;
    }
  }
  return st;
}

namespace detail {
/// In-place Cholesky solve of the SPD system A x = b (A row-major n x n).
inline void cholesky_solve(std::vector<double> a, std::vector<double>& b, int n) {
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = a[static_cast<size_t>(i) * n + j];
      for (int k = 0; k < j; ++k) s -= a[static_cast<size_t>(i) * n + k] * a[static_cast<size_t>(j) * n + k];
      if (i == j) {
        if (s <= 0.0) throw std::runtime_error("cholesky_solve: matrix not positive definite");
        a[static_cast<size_t>(i) * n + i] = std::sqrt(s);
      } else {
        a[static_cast<size_t>(i) * n + j] = s / a[static_cast<size_t>(j) * n + j];
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    double s = b[i];
    for (int k = 0; k < i; ++k) s -= a[static_cast<size_t>(i) * n + k] * b[k];
    b[i] = s / a[static_cast<size_t>(i) * n + i];
  }
  for (int i = n - 1; i >= 0; --i) {
    double s = b[i];
    for (int k = i + 1; k < n; ++k) s -= a[static_cast<size_t>(k) * n + i] * b[k];
    b[i] = s / a[static_cast<size_t>(i) * n + i];
  }
}
}  // namespace detail

/// Least-squares coefficients of `phase` against the selected Noll modes,
/// minimized over the disk samples. `modes` holds 1-based Noll indices.
inline std::vector<double> project_onto_modes(const std::vector<double>& phase, const PupilGrid& grid,
                                              const ZernikeStack& stack, const std::vector<int>& modes) {
  if (modes.empty()) throw std::invalid_argument("project_onto_modes: empty mode set");
  if (phase.size() != static_cast<size_t>(grid.resolution) * grid.resolution)
    throw std::invalid_argument("project_onto_modes: phase size mismatch");
  for (int j : modes)
    if (j < 1 || j > stack.modes) throw std::invalid_argument("project_onto_modes: mode out of range");

  const int k = static_cast<int>(modes.size());
  std::vector<double> gram(static_cast<size_t>(k) * k);
  std::vector<double> rhs(k, 0.0);
  for (int a = 0; a < k; ++a) {
    for (int b = 0; b < k; ++b) gram[static_cast<size_t>(a) * k + b] = stack.gram_at(modes[a], modes[b]);
    const double* pa = stack.plane(modes[a]);
    double s = 0.0;
    for (int idx : grid.disk) s += pa[idx] * phase[idx];
    rhs[a] = s;
  }
  detail::cholesky_solve(std::move(gram), rhs, k);
  return rhs;
}

/// Linear combination of stack planes; zero outside the disk.
inline std::vector<double> assemble_phase(const ZernikeStack& stack, const std::vector<double>& coeffs) {
  if (coeffs.size() > static_cast<size_t>(stack.modes))
    throw std::invalid_argument("assemble_phase: more coefficients than stack modes");
  const int p = stack.resolution;
  std::vector<double> phase(static_cast<size_t>(p) * p, 0.0);
  for (size_t j = 0; j < coeffs.size(); ++j) {
    if (coeffs[j] == 0.0) continue;
    const double* pl = stack.plane(static_cast<int>(j) + 1);
    for (size_t i = 0; i < phase.size(); ++i) phase[i] += coeffs[j] * pl[i];
  }
  return phase;
}

}  // namespace turbforward
