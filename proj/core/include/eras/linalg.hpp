// Copyright 2026 The eras Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <complex>
#include <vector>

namespace eras {
namespace linalg {

using cd = std::complex<double>;

// Dense row-major square matrices; sizes here are tiny (K <= ~21 for FCP,
// <= 512 for the time-domain Wiener solve).

// Solves A x = b for Hermitian positive definite A via LL^H Cholesky.
// Returns false when a pivot is not strictly positive.
bool cholesky_solve_hermitian(std::vector<cd> a, int n, std::vector<cd> b,
                              std::vector<cd>& x);

// Hermitian eigendecomposition by cyclic Jacobi; used as the pseudo-inverse
// fallback when Cholesky fails. Eigenvalues below tol * max|eig| are
// treated as zero.
void pinv_solve_hermitian(const std::vector<cd>& a, int n, const std::vector<cd>& b,
                          std::vector<cd>& x, double tol = 1e-12);

// Solves A x = b for symmetric positive definite real A (LL^T). Returns
// false when a pivot is not strictly positive.
bool cholesky_solve_spd(std::vector<double> a, int n, std::vector<double> b,
                        std::vector<double>& x);

// Symmetric eigendecomposition fallback mirroring the complex one.
void pinv_solve_symmetric(const std::vector<double>& a, int n,
                          const std::vector<double>& b, std::vector<double>& x,
                          double tol = 1e-12);

// General square solve by partially pivoted LU. Throws NumericalError on
// exact singularity. With `transpose` set it solves A^T x = b using the
// same factorization (used by the linear-solve adjoint).
struct LuFactors {
  std::vector<double> lu;
  std::vector<int> perm;
  int n = 0;
};
LuFactors lu_factor(std::vector<double> a, int n);
std::vector<double> lu_solve(const LuFactors& f, std::vector<double> b,
                             bool transpose = false);

}  // namespace linalg
}  // namespace eras
