#pragma once

#include <vector>

#include "layerwave/profile.hpp"

namespace lw::oracle {

/// Conservative second-order discretization of the fiber operator
/// c(y) mu^2 - d/dy(c d/dy) on N interior points of a uniform grid, with
/// homogeneous Dirichlet conditions.  Flux coefficients are exact harmonic
/// cell averages for step-type profiles and midpoint values otherwise.
struct FdDiscretization {
  int n = 0;
  double h = 0;
  std::vector<double> diag;      // size n
  std::vector<double> offdiag;   // size n-1
  double norm_inf() const;
  /// Number of eigenvalues strictly below x (Sturm sequence count).
  int count_below(double x) const;
};

FdDiscretization discretize(const Profile& profile, double mu, int n);

/// Smallest num_eigs eigenvalues by Sturm-sequence bisection, to an absolute
/// tolerance of 1e-10 * ||T||_inf.
std::vector<double> fd_spectrum(const Profile& profile, double mu,
                                int num_eigs, int n);

/// Inverse-iteration eigenvector for an isolated eigenvalue, normalized in
/// the discrete L2 inner product (weight h), first component positive.
std::vector<double> fd_eigenvector(const Profile& profile, double mu,
                                   double lambda_hat, int n);

struct CompareReport {
  bool pass = true;
  int worst_index = -1;           // 0-based; -1 when lists are empty
  double worst_rel_error = 0;
  std::vector<double> rel_errors;
};

CompareReport compare(const std::vector<double>& solver_lambdas,
                      const std::vector<double>& oracle_lambdas,
                      double rel_tol);

}  // namespace lw::oracle
