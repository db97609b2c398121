#include "layerwave/oracle.hpp"

#include <algorithm>
#include <cmath>

namespace lw::oracle {

namespace {

// Solves (T - shift I) x = rhs in place.  Tridiagonal LU with partial
// pivoting; row swaps create fill-in on a second superdiagonal only.
void solve_shifted(const FdDiscretization& t, double shift,
                   std::vector<double>& x) {
  const int n = t.n;
  std::vector<double> d(static_cast<size_t>(n));
  std::vector<double> dl(n > 1 ? size_t(n) - 1 : 0);
  std::vector<double> du(n > 1 ? size_t(n) - 1 : 0);
  std::vector<double> du2(n > 2 ? size_t(n) - 2 : 0, 0.0);
  std::vector<char> swapped(n > 1 ? size_t(n) - 1 : 0, 0);
  for (int i = 0; i < n; ++i) d[size_t(i)] = t.diag[size_t(i)] - shift;
  for (int i = 0; i + 1 < n; ++i) dl[size_t(i)] = du[size_t(i)] = t.offdiag[size_t(i)];

  for (int i = 0; i + 1 < n; ++i) {
    if (std::fabs(d[size_t(i)]) >= std::fabs(dl[size_t(i)])) {
      if (d[size_t(i)] == 0.0) d[size_t(i)] = 1e-300;
      const double fact = dl[size_t(i)] / d[size_t(i)];
      dl[size_t(i)] = fact;
      d[size_t(i) + 1] -= fact * du[size_t(i)];
    } else {
      const double fact = d[size_t(i)] / dl[size_t(i)];
      d[size_t(i)] = dl[size_t(i)];
      dl[size_t(i)] = fact;
      const double temp = du[size_t(i)];
      du[size_t(i)] = d[size_t(i) + 1];
      d[size_t(i) + 1] = temp - fact * d[size_t(i) + 1];
      if (i + 2 < n) {
        du2[size_t(i)] = du[size_t(i) + 1];
        du[size_t(i) + 1] = -fact * du[size_t(i) + 1];
      }
      swapped[size_t(i)] = 1;
    }
  }
  if (d[size_t(n) - 1] == 0.0) d[size_t(n) - 1] = 1e-300;

  for (int i = 0; i + 1 < n; ++i) {
    if (swapped[size_t(i)]) {
      const double temp = x[size_t(i)];
      x[size_t(i)] = x[size_t(i) + 1];
      x[size_t(i) + 1] = temp - dl[size_t(i)] * x[size_t(i)];
    } else {
      x[size_t(i) + 1] -= dl[size_t(i)] * x[size_t(i)];
    }
  }
  x[size_t(n) - 1] /= d[size_t(n) - 1];
  if (n >= 2)
    x[size_t(n) - 2] =
        (x[size_t(n) - 2] - du[size_t(n) - 2] * x[size_t(n) - 1]) / d[size_t(n) - 2];
  for (int i = n - 3; i >= 0; --i)
    x[size_t(i)] = (x[size_t(i)] - du[size_t(i)] * x[size_t(i) + 1] -
                    du2[size_t(i)] * x[size_t(i) + 2]) / d[size_t(i)];
}

}  // namespace

double FdDiscretization::norm_inf() const {
  double m = 0;
  for (int i = 0; i < n; ++i) {
    double row = std::fabs(diag[i]);
    if (i > 0) row += std::fabs(offdiag[i - 1]);
    if (i + 1 < n) row += std::fabs(offdiag[i]);
    m = std::max(m, row);
  }
  return m;
}

int FdDiscretization::count_below(double x) const {
  int count = 0;
  double d = 1.0;
  for (int i = 0; i < n; ++i) {
    const double off = i > 0 ? offdiag[i - 1] * offdiag[i - 1] : 0.0;
    d = diag[i] - x - off / d;
    if (d == 0.0) d = -1e-300;
    if (d < 0) ++count;
  }
  return count;
}

FdDiscretization discretize(const Profile& profile, double mu, int n) {
  if (n < 1) throw_error(ErrorCode::InvalidArgument, "need at least one interior point");
  FdDiscretization t;
  t.n = n;
  const double H = profile.height();
  const double h = H / double(n + 1);
  t.h = h;
  const bool step_type = profile.as_piecewise_constant() != nullptr;
  std::vector<double> chalf(size_t(n) + 1);  // c_{i+1/2}, i = 0..n
  for (int i = 0; i <= n; ++i) {
    const double y0 = h * double(i);
    const double y1 = std::min(h * double(i + 1), H);
    if (step_type) {
      // Exact harmonic average over the cell, via the travel-time integral.
      chalf[size_t(i)] = (y1 - y0) / (profile.travel_time(y1) - profile.travel_time(y0));
    } else {
      chalf[size_t(i)] = profile.value(0.5 * (y0 + y1));
    }
  }
  t.diag.resize(size_t(n));
  t.offdiag.resize(size_t(n) - 1);
  const double mu2 = mu * mu;
  for (int i = 0; i < n; ++i) {
    const double yi = h * double(i + 1);
    t.diag[size_t(i)] = (chalf[size_t(i)] + chalf[size_t(i) + 1]) / (h * h) +
                        profile.value(yi) * mu2;
    if (i + 1 < n) t.offdiag[size_t(i)] = -chalf[size_t(i) + 1] / (h * h);
  }
  return t;
}

std::vector<double> fd_spectrum(const Profile& profile, double mu,
                                int num_eigs, int n) {
  if (num_eigs > n)
    throw_error(ErrorCode::TooManyRequested, "more eigenvalues than matrix order");
  if (num_eigs < 1) return {};
  const FdDiscretization t = discretize(profile, mu, n);
  double lo = t.diag[0], hi = t.diag[0];
  for (int i = 0; i < t.n; ++i) {
    double r = 0;
    if (i > 0) r += std::fabs(t.offdiag[size_t(i) - 1]);
    if (i + 1 < t.n) r += std::fabs(t.offdiag[size_t(i)]);
    lo = std::min(lo, t.diag[size_t(i)] - r);
    hi = std::max(hi, t.diag[size_t(i)] + r);
  }
  const double tol = 1e-10 * t.norm_inf();
  std::vector<double> out(static_cast<size_t>(num_eigs));
  for (int j = 1; j <= num_eigs; ++j) {
    double a = lo, b = hi;
    while (b - a > tol) {
      const double mid = 0.5 * (a + b);
      if (t.count_below(mid) >= j) b = mid; else a = mid;
      if (mid == a || mid == b) break;  // hit floating-point resolution
    }
    out[size_t(j) - 1] = 0.5 * (a + b);
  }
  return out;
}

std::vector<double> fd_eigenvector(const Profile& profile, double mu,
                                   double lambda_hat, int n) {
  const FdDiscretization t = discretize(profile, mu, n);
  const double gap = 1e-8 * std::max(1.0, std::fabs(lambda_hat));
  if (t.count_below(lambda_hat + gap) - t.count_below(lambda_hat - gap) != 1)
    throw_error(ErrorCode::ClusterUnresolved,
                "eigenvalue not isolated at the requested gap");
  std::vector<double> v(size_t(n), 1.0);
  auto normalize = [&]() {
    double s = 0;
    for (double x : v) s += x * x;
    s = std::sqrt(s * t.h);
    for (double& x : v) x /= s;
  };
  normalize();
  for (int iter = 0; iter < 4; ++iter) {
    solve_shifted(t, lambda_hat, v);
    normalize();
  }
  if (v[0] < 0)
    for (double& x : v) x = -x;
  return v;
}

CompareReport compare(const std::vector<double>& solver_lambdas,
                      const std::vector<double>& oracle_lambdas,
                      double rel_tol) {
  if (solver_lambdas.size() != oracle_lambdas.size())
    throw_error(ErrorCode::LengthMismatch, "eigenvalue lists differ in length");
  CompareReport rep;
  rep.rel_errors.resize(solver_lambdas.size());
  for (size_t i = 0; i < solver_lambdas.size(); ++i) {
    const double denom = std::max(std::fabs(oracle_lambdas[i]), 1e-300);
    const double err = std::fabs(solver_lambdas[i] - oracle_lambdas[i]) / denom;
    rep.rel_errors[i] = err;
    if (err > rep.worst_rel_error) {
      rep.worst_rel_error = err;
      rep.worst_index = int(i);
    }
  }
  rep.pass = rep.worst_rel_error <= rel_tol;
  return rep;
}

}  // namespace lw::oracle
