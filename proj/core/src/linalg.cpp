// Copyright 2026 The eras Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "eras/linalg.hpp"

#include <algorithm>
#include <cmath>

#include "eras/common.hpp"

namespace eras {
namespace linalg {

bool cholesky_solve_hermitian(std::vector<cd> a, int n, std::vector<cd> b,
                              std::vector<cd>& x) {
  // In-place lower Cholesky: A = L L^H.
  for (int j = 0; j < n; ++j) {
    double diag = a[j * n + j].real();
    for (int k = 0; k < j; ++k) diag -= std::norm(a[j * n + k]);
    if (!(diag > 0.0) || !std::isfinite(diag)) return false;
    const double ljj = std::sqrt(diag);
    a[j * n + j] = ljj;
    for (int i = j + 1; i < n; ++i) {
      cd s = a[i * n + j];
      for (int k = 0; k < j; ++k) s -= a[i * n + k] * std::conj(a[j * n + k]);
      a[i * n + j] = s / ljj;
    }
  }
  // Forward then back substitution: L y = b, L^H x = y.
  for (int i = 0; i < n; ++i) {
    cd s = b[i];
    for (int k = 0; k < i; ++k) s -= a[i * n + k] * b[k];
    b[i] = s / a[i * n + i].real();
  }
  for (int i = n - 1; i >= 0; --i) {
    cd s = b[i];
    for (int k = i + 1; k < n; ++k) s -= std::conj(a[k * n + i]) * b[k];
    b[i] = s / a[i * n + i].real();
  }
  x = std::move(b);
  return true;
}

namespace {

// Cyclic Jacobi for Hermitian matrices. a is overwritten with the
// diagonalized matrix; v accumulates the unitary transform (A = V D V^H).
void jacobi_hermitian(std::vector<cd>& a, int n, std::vector<cd>& v) {
  v.assign(static_cast<std::size_t>(n) * n, cd(0.0, 0.0));
  for (int i = 0; i < n; ++i) v[i * n + i] = 1.0;
  const int max_sweeps = 60;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0, total = 0.0;
    for (int p = 0; p < n; ++p) {
      for (int q = 0; q < n; ++q) {
        const double m = std::norm(a[p * n + q]);
        total += m;
        if (q > p) off += m;
      }
    }
    if (off <= 1e-28 * total || total == 0.0) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const cd apq = a[p * n + q];
        if (std::abs(apq) < 1e-300) continue;
        const double app = a[p * n + p].real();
        const double aqq = a[q * n + q].real();
        // Unitary 2x2 rotation zeroing a_pq: diagonalize [[app, apq],[apq*, aqq]].
        const double tau = (aqq - app) / (2.0 * std::abs(apq));
        const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const cd phase = apq / std::abs(apq);
        const cd s = phase * (t * c);
        for (int k = 0; k < n; ++k) {
          const cd akp = a[k * n + p];
          const cd akq = a[k * n + q];
          a[k * n + p] = c * akp - std::conj(s) * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const cd apk = a[p * n + k];
          const cd aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = std::conj(s) * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const cd vkp = v[k * n + p];
          const cd vkq = v[k * n + q];
          v[k * n + p] = c * vkp - std::conj(s) * vkq;
          v[k * n + q] = s * vkp + c * vkq;
        }
      }
    }
  }
}

}  // namespace

void pinv_solve_hermitian(const std::vector<cd>& a, int n, const std::vector<cd>& b,
                          std::vector<cd>& x, double tol) {
  std::vector<cd> d = a;
  std::vector<cd> v;
  jacobi_hermitian(d, n, v);
  double max_eig = 0.0;
  for (int i = 0; i < n; ++i) max_eig = std::max(max_eig, std::abs(d[i * n + i].real()));
  x.assign(static_cast<std::size_t>(n), cd(0.0, 0.0));
  // x = V diag(1/lambda) V^H b over the kept spectrum
  for (int i = 0; i < n; ++i) {
    const double lambda = d[i * n + i].real();
    if (std::abs(lambda) <= tol * max_eig || lambda == 0.0) continue;
    cd proj(0.0, 0.0);
    for (int k = 0; k < n; ++k) proj += std::conj(v[k * n + i]) * b[k];
    proj /= lambda;
    for (int k = 0; k < n; ++k) x[k] += v[k * n + i] * proj;
  }
}

bool cholesky_solve_spd(std::vector<double> a, int n, std::vector<double> b,
                        std::vector<double>& x) {
  for (int j = 0; j < n; ++j) {
    double diag = a[j * n + j];
    for (int k = 0; k < j; ++k) diag -= a[j * n + k] * a[j * n + k];
    if (!(diag > 0.0) || !std::isfinite(diag)) return false;
    const double ljj = std::sqrt(diag);
    a[j * n + j] = ljj;
    for (int i = j + 1; i < n; ++i) {
      double s = a[i * n + j];
      for (int k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
      a[i * n + j] = s / ljj;
    }
  }
  for (int i = 0; i < n; ++i) {
    double s = b[i];
    for (int k = 0; k < i; ++k) s -= a[i * n + k] * b[k];
    b[i] = s / a[i * n + i];
  }
  for (int i = n - 1; i >= 0; --i) {
    double s = b[i];
    for (int k = i + 1; k < n; ++k) s -= a[k * n + i] * b[k];
    b[i] = s / a[i * n + i];
  }
  x = std::move(b);
  return true;
}

void pinv_solve_symmetric(const std::vector<double>& a, int n,
                          const std::vector<double>& b, std::vector<double>& x,
                          double tol) {
  std::vector<cd> ac(static_cast<std::size_t>(n) * n);
  std::vector<cd> bc(static_cast<std::size_t>(n));
  for (int i = 0; i < n * n; ++i) ac[i] = a[i];
  for (int i = 0; i < n; ++i) bc[i] = b[i];
  std::vector<cd> xc;
  pinv_solve_hermitian(ac, n, bc, xc, tol);
  x.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) x[i] = xc[i].real();
}

LuFactors lu_factor(std::vector<double> a, int n) {
  LuFactors f;
  f.n = n;
  f.perm.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) f.perm[i] = i;
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    double best = std::abs(a[col * n + col]);
    for (int r = col + 1; r < n; ++r) {
      const double v = std::abs(a[r * n + col]);
      if (v > best) {
        best = v;
        pivot = r;
      }
    }
    if (!(best > 0.0) || !std::isfinite(best))
      throw NumericalError("linear solve: singular matrix");
    if (pivot != col) {
      for (int k = 0; k < n; ++k) std::swap(a[col * n + k], a[pivot * n + k]);
      std::swap(f.perm[col], f.perm[pivot]);
    }
    const double inv = 1.0 / a[col * n + col];
    for (int r = col + 1; r < n; ++r) {
      const double l = a[r * n + col] * inv;
      a[r * n + col] = l;
      for (int k = col + 1; k < n; ++k) a[r * n + k] -= l * a[col * n + k];
    }
  }
  f.lu = std::move(a);
  return f;
}

std::vector<double> lu_solve(const LuFactors& f, std::vector<double> b,
                             bool transpose) {
  const int n = f.n;
  std::vector<double> x(static_cast<std::size_t>(n));
  if (!transpose) {
    // P A = L U;  solve L y = P b, then U x = y.
    for (int i = 0; i < n; ++i) x[i] = b[f.perm[i]];
    for (int i = 0; i < n; ++i) {
      double s = x[i];
      for (int k = 0; k < i; ++k) s -= f.lu[i * n + k] * x[k];
      x[i] = s;
    }
    for (int i = n - 1; i >= 0; --i) {
      double s = x[i];
      for (int k = i + 1; k < n; ++k) s -= f.lu[i * n + k] * x[k];
      x[i] = s / f.lu[i * n + i];
    }
    return x;
  }
  // A^T x = b  <=>  U^T L^T P x = b: solve U^T y = b, L^T z = y, x = P^T z.
  std::vector<double> y = std::move(b);
  for (int i = 0; i < n; ++i) {
    double s = y[i];
    for (int k = 0; k < i; ++k) s -= f.lu[k * n + i] * y[k];
    y[i] = s / f.lu[i * n + i];
  }
  for (int i = n - 1; i >= 0; --i) {
    double s = y[i];
    for (int k = i + 1; k < n; ++k) s -= f.lu[k * n + i] * y[k];
    y[i] = s;
  }
  for (int i = 0; i < n; ++i) x[f.perm[i]] = y[i];
  return x;
}

}  // namespace linalg
}  // namespace eras
