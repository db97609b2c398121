#pragma once

#include <array>
#include <utility>
#include <vector>

#include "layerwave/profile.hpp"

namespace lw::fiber {

/// 2x2 map propagating the state (u, c u') across one constant-c piece.
/// The flow of the canonical first-order system is area preserving, so
/// det = 1 up to rounding.
struct TransferMatrix {
  double m00 = 1, m01 = 0, m10 = 0, m11 = 1;
  double det() const { return m00 * m11 - m01 * m10; }
  std::array<double, 2> apply(const std::array<double, 2>& s) const {
    return {m00 * s[0] + m01 * s[1], m10 * s[0] + m11 * s[1]};
  }
};

TransferMatrix piece_matrix(double c, double mu, double lambda, double length);

struct PcPropagation {
  std::vector<std::array<double, 2>> states;  // (u, cu') at each breakpoint
  std::vector<TransferMatrix> pieces;
};

/// Exact propagation of (u, cu') across all pieces of a piecewise-constant
/// profile, starting from the given state at y = 0.
PcPropagation propagate_pc(const Profile& profile, double mu, double lambda,
                           double u0, double f0);

/// Summary of one shot across [0, H] from u(0) = 0, (cu')(0) = 1 (raw,
/// unnormalized scale).  Produced exactly for piecewise-constant profiles and
/// by adaptive Runge-Kutta integration of the phase/amplitude system
/// otherwise.
struct FiberScan {
  double theta_H = 0;   // total phase; eigenvalues satisfy theta_H = ell*pi
  double mass = 0;      // integral of u^2 over [0, H]
  double u_H = 0, f_H = 0;
  double min_r2 = 0;    // min over y of u^2 + (cu')^2
  std::vector<double> zeros;          // interior zeros of u, increasing
  std::vector<double> arch_y;         // positions of the flux zeros
  std::vector<double> arch_u;         // |u| at arch_y
  std::vector<double> flux_at_knots;  // |cu'| at 0, each zero, and H
};

FiberScan scan(const Profile& profile, double mu, double lambda);

/// theta(H; lambda).  Continuous and strictly increasing in lambda.
double phase_at_H(const Profile& profile, double mu, double lambda);

/// Prufer shot: integrates the phase/amplitude equations regardless of the
/// profile representation.  trace holds (y, theta, log r) samples.
struct PrueferShot {
  double theta_H = 0;
  double logr_H = 0;
  double mass = 0;
  std::vector<double> zeros;
  std::vector<std::array<double, 3>> trace;
};
PrueferShot shoot_pruefer(const Profile& profile, double mu, double lambda,
                          bool want_trace = false);

enum class Method { Auto, TransferMatrix, Pruefer };

/// The unique lambda with theta(H; lambda) = ell*pi, bracketed by the
/// constant-coefficient comparison bounds and bisected until the bracket
/// width is below max(1e-10*lambda, 1e-12).
double eigenvalue(const Profile& profile, double mu, int ell,
                  Method method = Method::Auto);

struct Eigenpair {
  double mu = 0;
  int ell = 0;
  double lambda = 0;
  std::vector<double> grid;
  std::vector<double> u;     // normalized: integral of u^2 over [0,H] is 1
  std::vector<double> flux;  // c(y) u'(y) at the same samples
};

/// Samples the normalized eigenfunction on the given grid (must start at 0
/// and end at H; piecewise-constant breakpoints are inserted automatically).
/// Sign convention u'(0) > 0.
Eigenpair eigenfunction(const Profile& profile, double mu, double lambda,
                        std::vector<double> grid);
/// Same, on a uniform grid of the given number of samples.
Eigenpair eigenfunction(const Profile& profile, double mu, int ell,
                        int samples = 1025);

std::vector<double> uniform_grid(const Profile& profile, int samples);

/// All eigenvalues in (lambda_lo, lambda_hi] with their indices.
std::vector<std::pair<int, double>> spectrum_in_range(const Profile& profile,
                                                      double mu,
                                                      double lambda_lo,
                                                      double lambda_hi);

/// Integral of the *normalized* eigenfunction squared over (a, b).
double layer_mass(const Profile& profile, double mu, double lambda, double a,
                  double b);

/// Per-eigenpair amplitude data in the normalized scale.
struct AmplitudeSummary {
  std::vector<double> zeros;    // includes 0 and H
  std::vector<double> arch_y;
  std::vector<double> arch_u;   // |u| at the arch extrema
  std::vector<double> flux_at_zeros;  // |cu'| at every entry of zeros
  double min_r2 = 0;
  double max_gap = 0;
};
AmplitudeSummary amplitude_summary(const Profile& profile, double mu,
                                   double lambda);

struct LiouvilleResult {
  std::vector<double> xi;     // transformed coordinate at the eigenpair grid
  std::vector<double> eta;    // transformed eigenfunction
  double alpha = 0;           // least-squares amplitude of sin(mu * xi)
  double residual_sup = 0;    // sup |eta - alpha sin(mu xi)|
  double xi_H = 0;
  double r1 = 0, r2 = 0;      // |alpha| bracket from the normalization
};

/// Transforms a smooth-profile eigenpair to near-sinusoidal coordinates.
/// Requires an analytic preset profile and lambda inside
/// [(c_max+eps) mu^2, (c_max+Lambda) mu^2].
LiouvilleResult liouville_transform(const Profile& profile,
                                    const Eigenpair& pair, double eps,
                                    double Lambda);

}  // namespace lw::fiber
