#include "layerwave/fiber.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lw::fiber {

namespace {

constexpr double kPi = 3.14159265358979323846;

double sgn(double x) { return x < 0 ? -1.0 : 1.0; }

// ---------------------------------------------------------------------------
// Exact piece arithmetic.  Within a piece of constant value c the state
// (u, f = c u') evolves with u'' = -q u, q = (lambda - c mu^2)/c.
// ---------------------------------------------------------------------------

struct Piece {
  double c = 0;
  double q = 0;
  double w = 0;  // sqrt(|q|), 0 when q == 0
};

Piece make_piece(double c, double mu, double lambda) {
  Piece p;
  p.c = c;
  p.q = (lambda - c * mu * mu) / c;
  p.w = std::sqrt(std::fabs(p.q));
  return p;
}

std::array<double, 2> piece_state(const Piece& p, double u0, double f0,
                                  double d) {
  if (p.q > 0) {
    const double s = std::sin(p.w * d), co = std::cos(p.w * d);
    return {u0 * co + f0 * s / (p.c * p.w),
            -p.c * p.w * u0 * s + f0 * co};
  }
  if (p.q < 0) {
    const double sh = std::sinh(p.w * d), ch = std::cosh(p.w * d);
    return {u0 * ch + f0 * sh / (p.c * p.w),
            p.c * p.w * u0 * sh + f0 * ch};
  }
  return {u0 + f0 * d / p.c, f0};
}

double piece_mass(const Piece& p, double u0, double f0, double d) {
  if (p.q > 0) {
    const double g0 = f0 / (p.c * p.w);
    const double s2 = std::sin(2 * p.w * d);
    const double sd = std::sin(p.w * d);
    return u0 * u0 * (0.5 * d + s2 / (4 * p.w)) +
           g0 * g0 * (0.5 * d - s2 / (4 * p.w)) + u0 * g0 * sd * sd / p.w;
  }
  if (p.q < 0) {
    const double g0 = f0 / (p.c * p.w);
    const double sh2 = std::sinh(2 * p.w * d);
    const double shd = std::sinh(p.w * d);
    return u0 * u0 * (0.5 * d + sh2 / (4 * p.w)) +
           g0 * g0 * (sh2 / (4 * p.w) - 0.5 * d) + u0 * g0 * shd * shd / p.w;
  }
  const double g0 = f0 / p.c;
  return u0 * u0 * d + u0 * g0 * d * d + g0 * g0 * d * d * d / 3.0;
}

// ---------------------------------------------------------------------------
// Exact scan across a piecewise-constant profile from the state (0, 1).
// Tracks zero crossings, flux-zero (arch) points, the pointwise minimum of
// r^2 = u^2 + f^2, and the accumulated mass.
// ---------------------------------------------------------------------------

struct RawScan {
  double theta_end = 0;
  double mass = 0;
  double u_end = 0, f_end = 0;
  double min_r2 = std::numeric_limits<double>::infinity();
  std::vector<double> zeros;
  std::vector<double> arch_y, arch_u;
  std::vector<double> flux_at_zeros;  // |f| at 0, interior zeros, y_end
};

RawScan pc_scan(const PiecewiseConstantData& pc, double mu, double lambda,
                double y_end) {
  RawScan out;
  double u = 0, f = 1;
  long long crossings = 0;
  std::vector<double> flux_interior;
  out.min_r2 = 1.0;  // r^2 at y = 0

  for (size_t j = 0; j < pc.values.size(); ++j) {
    const double y0 = pc.breakpoints[j];
    if (y0 >= y_end) break;
    const double y1 = std::min(pc.breakpoints[j + 1], y_end);
    const double d = y1 - y0;
    if (d <= 0) continue;
    const Piece p = make_piece(pc.values[j], mu, lambda);
    const double u0 = u, f0 = f;

    if (p.q > 0) {
      const double cw = p.c * p.w;
      const double beta = std::hypot(u0, f0 / cw);
      const double phi0 = std::atan2(cw * u0, f0);
      const double phi1 = phi0 + p.w * d;
      // Zeros: phase crossing multiples of pi in (phi0, phi1].
      const long long m_lo = (long long)std::floor(phi0 / kPi) + 1;
      const long long m_hi = (long long)std::floor(phi1 / kPi);
      for (long long m = m_lo; m <= m_hi; ++m) {
        double pos = (double(m) * kPi - phi0) / p.w;
        pos = std::clamp(pos, 0.0, d);
        out.zeros.push_back(y0 + pos);
        flux_interior.push_back(cw * beta);
        ++crossings;
      }
      // Arch extrema: phase crossing pi/2 + multiples of pi.
      const long long a_lo = (long long)std::floor((phi0 - 0.5 * kPi) / kPi) + 1;
      const long long a_hi = (long long)std::floor((phi1 - 0.5 * kPi) / kPi);
      for (long long a = a_lo; a <= a_hi; ++a) {
        double pos = ((double(a) + 0.5) * kPi - phi0) / p.w;
        pos = std::clamp(pos, 0.0, d);
        out.arch_y.push_back(y0 + pos);
        out.arch_u.push_back(beta);
      }
      // min of r^2 = beta^2 (sin^2 + K cos^2) over the traversed phase range.
      const double K = cw * cw;
      double mn = std::numeric_limits<double>::infinity();
      if (a_hi >= a_lo) mn = std::min(mn, beta * beta);        // hits cos = 0
      if (m_hi >= m_lo) mn = std::min(mn, beta * beta * K);    // hits sin = 0
      const double s0 = std::sin(phi0), s1 = std::sin(phi1);
      mn = std::min(mn, beta * beta * (K + (1 - K) * s0 * s0));
      mn = std::min(mn, beta * beta * (K + (1 - K) * s1 * s1));
      out.min_r2 = std::min(out.min_r2, mn);
    } else {
      // Hyperbolic or linear piece: at most one zero of u and one of f.
      const auto consider = [&](double pos, bool is_zero) {
        if (!(pos > 0.0) || pos > d) return;
        const auto st = piece_state(p, u0, f0, pos);
        if (is_zero) {
          out.zeros.push_back(y0 + pos);
          flux_interior.push_back(std::fabs(st[1]));
          ++crossings;
        } else {
          out.arch_y.push_back(y0 + pos);
          out.arch_u.push_back(std::fabs(st[0]));
        }
        out.min_r2 = std::min(out.min_r2, st[0] * st[0] + st[1] * st[1]);
      };
      if (p.q < 0) {
        const double g0 = f0 / (p.c * p.w);
        if (g0 != 0.0 && std::fabs(u0 / g0) < 1.0)
          consider(std::atanh(-u0 / g0) / p.w, true);
        if (u0 != 0.0 && std::fabs(g0 / u0) < 1.0)
          consider(std::atanh(-g0 / u0) / p.w, false);
      } else {
        if (f0 != 0.0) consider(-u0 * p.c / f0, true);
      }
    }

    const auto st = piece_state(p, u0, f0, d);
    u = st[0];
    f = st[1];
    out.min_r2 = std::min(out.min_r2, u * u + f * f);
    out.mass += piece_mass(p, u0, f0, d);
  }

  out.u_end = u;
  out.f_end = f;

  // Residual angle in [0, pi) and a parity repair: after Z upward crossings
  // the sign of u must be (-1)^Z; rounding at a piece edge can put the
  // crossing count off by one.
  double residual = 0;
  if (u != 0.0) {
    residual = std::fmod(std::atan2(u, f), kPi);
    if (residual < 0) residual += kPi;
    const bool want_negative = (crossings % 2) != 0;
    if ((u < 0) != want_negative) {
      if (residual > 0.5 * kPi) {
        crossings -= 1;
        if (!out.zeros.empty()) {
          out.zeros.pop_back();
          flux_interior.pop_back();
        }
      } else {
        crossings += 1;
        out.zeros.push_back(y_end);
        flux_interior.push_back(std::fabs(f));
      }
    }
  }
  if (crossings < 0) crossings = 0;
  out.theta_end = kPi * double(crossings) + residual;

  out.flux_at_zeros.clear();
  out.flux_at_zeros.push_back(1.0);
  for (double v : flux_interior) out.flux_at_zeros.push_back(v);
  out.flux_at_zeros.push_back(std::fabs(f));
  return out;
}

std::array<double, 2> pc_state_at(const PiecewiseConstantData& pc, double mu,
                                  double lambda, double y) {
  double u = 0, f = 1;
  for (size_t j = 0; j < pc.values.size(); ++j) {
    const double y0 = pc.breakpoints[j];
    if (y0 >= y) break;
    const double y1 = std::min(pc.breakpoints[j + 1], y);
    const Piece p = make_piece(pc.values[j], mu, lambda);
    const auto st = piece_state(p, u, f, y1 - y0);
    u = st[0];
    f = st[1];
  }
  return {u, f};
}

double pc_mass_to(const PiecewiseConstantData& pc, double mu, double lambda,
                  double y) {
  double u = 0, f = 1, mass = 0;
  for (size_t j = 0; j < pc.values.size(); ++j) {
    const double y0 = pc.breakpoints[j];
    if (y0 >= y) break;
    const double y1 = std::min(pc.breakpoints[j + 1], y);
    const Piece p = make_piece(pc.values[j], mu, lambda);
    mass += piece_mass(p, u, f, y1 - y0);
    const auto st = piece_state(p, u, f, y1 - y0);
    u = st[0];
    f = st[1];
  }
  return mass;
}

// ---------------------------------------------------------------------------
// Adaptive Dormand-Prince integration of the phase/amplitude system
//   theta' = cos^2(theta)/c + (lambda - c mu^2) sin^2(theta)
//   rho'   = (1/c - (lambda - c mu^2)) sin(theta) cos(theta)
//   m'     = exp(2 rho) sin^2(theta)
// with u = e^rho sin(theta), f = c u' = e^rho cos(theta).
// ---------------------------------------------------------------------------

using State = std::array<double, 3>;

struct RkRecorded {
  double y = 0;
  double theta = 0, rho = 0, mass = 0;
};

struct RkScan {
  RawScan raw;
  double logr_end = 0;
  std::vector<RkRecorded> recorded;
  std::vector<std::array<double, 3>> trace;  // (y, theta, rho)
};

struct Rhs {
  const Profile* profile;
  double mu, lambda;
  State operator()(double y, const State& s) const {
    const double c = profile->value(y);
    const double sn = std::sin(s[0]), cs = std::cos(s[0]);
    const double a = lambda - c * mu * mu;
    return {cs * cs / c + a * sn * sn,
            (1.0 / c - a) * sn * cs,
            std::exp(2.0 * s[1]) * sn * sn};
  }
};

double hermite(double v0, double d0, double v1, double d1, double h, double s) {
  const double s2 = s * s, s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * v0 + (s3 - 2 * s2 + s) * h * d0 +
         (-2 * s3 + 3 * s2) * v1 + (s3 - s2) * h * d1;
}

// Smallest root of the Hermite interpolant minus level in (lo, 1], or -1.
double hermite_root(double v0, double d0, double v1, double d1, double h,
                    double level, double lo) {
  const int kProbe = 24;
  double sa = lo, fa = hermite(v0, d0, v1, d1, h, sa) - level;
  for (int i = 1; i <= kProbe; ++i) {
    const double sb = lo + (1.0 - lo) * double(i) / kProbe;
    const double fb = hermite(v0, d0, v1, d1, h, sb) - level;
    if (fa == 0.0) return sa;
    if ((fa < 0) != (fb < 0)) {
      double a = sa, b = sb, va = fa;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (a + b);
        const double vm = hermite(v0, d0, v1, d1, h, mid) - level;
        if ((va < 0) == (vm < 0)) { a = mid; va = vm; } else { b = mid; }
      }
      return 0.5 * (a + b);
    }
    sa = sb;
    fa = fb;
  }
  return -1.0;
}

RkScan rk_pruefer(const Profile& profile, double mu, double lambda,
                  double y_end, const std::vector<double>& record_points,
                  bool want_trace) {
  const Rhs rhs{&profile, mu, lambda};
  const double H = profile.height();

  // Knots where the coefficient may lose smoothness, plus requested points.
  std::vector<double> knots;
  if (const auto* pc = profile.as_piecewise_constant())
    knots = pc->breakpoints;
  else if (const auto* g = profile.grid_data())
    knots = g->ys;
  else
    knots = {0.0, H};
  knots.insert(knots.end(), record_points.begin(), record_points.end());
  knots.push_back(0.0);
  knots.push_back(y_end);
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
  knots.erase(std::remove_if(knots.begin(), knots.end(),
                             [&](double k) { return k < 0 || k > y_end; }),
              knots.end());

  // Dormand-Prince 5(4) coefficients.
  static const double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static const double a21 = 1.0 / 5;
  static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                      a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                      a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                      a65 = -5103.0 / 18656;
  static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                      b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static const double e1 = 35.0 / 384 - 5179.0 / 57600,
                      e3 = 500.0 / 1113 - 7571.0 / 16695,
                      e4 = 125.0 / 192 - 393.0 / 640,
                      e5 = -2187.0 / 6784 + 92097.0 / 339200,
                      e6 = 11.0 / 84 - 187.0 / 2100, e7 = -1.0 / 40;

  const double rtol = 1e-11, atol = 1e-12;

  RkScan out;
  State s{0.0, 0.0, 0.0};
  out.raw.min_r2 = 1.0;
  double min_rho = 0.0;
  long long next_zero = 1;          // next multiple of pi expected
  double last_arch_y = -1.0;
  std::vector<double> flux_interior;

  size_t rec_idx = 0;
  auto record_if_needed = [&](double y) {
    while (rec_idx < record_points.size() &&
           std::fabs(record_points[rec_idx] - y) <= 1e-13 * std::max(1.0, H)) {
      out.recorded.push_back({record_points[rec_idx], s[0], s[1], s[2]});
      ++rec_idx;
    }
  };
  if (want_trace) out.trace.push_back({0.0, s[0], s[1]});
  record_if_needed(0.0);

  for (size_t seg = 0; seg + 1 < knots.size(); ++seg) {
    double y = knots[seg];
    const double yb = knots[seg + 1];
    if (yb <= y) { record_if_needed(yb); continue; }
    const double omega =
        std::sqrt((std::fabs(lambda) + profile.c_max() * mu * mu) / profile.c_min());
    double h = std::min(yb - y, 0.5 / (1.0 + omega));
    State k1 = rhs(y, s);
    while (y < yb) {
      h = std::min(h, yb - y);
      if (h < 1e-14 * std::max(1.0, H))
        throw_error(ErrorCode::StepSizeUnderflow, "integration step collapsed");
      State s2, s3, s4, s5, s6, s7;
      State k2, k3, k4, k5, k6, k7;
      for (int i = 0; i < 3; ++i) s2[i] = s[i] + h * a21 * k1[i];
      k2 = rhs(y + c2 * h, s2);
      for (int i = 0; i < 3; ++i) s3[i] = s[i] + h * (a31 * k1[i] + a32 * k2[i]);
      k3 = rhs(y + c3 * h, s3);
      for (int i = 0; i < 3; ++i)
        s4[i] = s[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
      k4 = rhs(y + c4 * h, s4);
      for (int i = 0; i < 3; ++i)
        s5[i] = s[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
      k5 = rhs(y + c5 * h, s5);
      for (int i = 0; i < 3; ++i)
        s6[i] = s[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] +
                            a64 * k4[i] + a65 * k5[i]);
      k6 = rhs(y + h, s6);
      for (int i = 0; i < 3; ++i)
        s7[i] = s[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] +
                            b6 * k6[i]);
      k7 = rhs(y + h, s7);
      double err = 0;
      for (int i = 0; i < 3; ++i) {
        const double e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] +
                              e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
        const double sc = atol + rtol * std::max(std::fabs(s[i]), std::fabs(s7[i]));
        err = std::max(err, std::fabs(e) / sc);
      }
      if (err <= 1.0) {
        // Accepted: locate phase events inside the step.
        const double th0 = s[0], th1 = s7[0];
        const double dth0 = k1[0], dth1 = k7[0];
        const double rho0 = s[1], rho1 = s7[1];
        const double drho0 = k1[1], drho1 = k7[1];
        // Interior dip/overshoot allowance for a non-monotone phase.
        const double slack =
            0.25 * h * (std::fabs(dth0) + std::fabs(dth1)) + 1e-12;
        const double lo_th = std::min(th0, th1) - slack;
        const double hi_th = std::max(th0, th1) + slack;
        // Upward zero crossings (levels n*pi, strictly increasing).
        while (double(next_zero) * kPi <= hi_th + 1e-12) {
          const double level = double(next_zero) * kPi;
          const double sr = hermite_root(th0, dth0, th1, dth1, h, level, 0.0);
          if (sr < 0) break;
          const double zy = y + sr * h;
          const double zr = hermite(rho0, drho0, rho1, drho1, h, sr);
          out.raw.zeros.push_back(zy);
          flux_interior.push_back(std::exp(zr));
          min_rho = std::min(min_rho, zr);
          ++next_zero;
        }
        // Flux zeros (levels (n + 1/2)*pi, either direction).
        {
          const long long a_lo =
              (long long)std::floor((lo_th - 0.5 * kPi) / kPi) + 1;
          const long long a_hi =
              (long long)std::floor((hi_th - 0.5 * kPi) / kPi);
          for (long long a = a_lo; a <= a_hi; ++a) {
            const double level = (double(a) + 0.5) * kPi;
            double from = 0.0;
            while (true) {
              const double sr =
                  hermite_root(th0, dth0, th1, dth1, h, level, from);
              if (sr < 0) break;
              const double ay = y + sr * h;
              if (ay > last_arch_y + 1e-12 * std::max(1.0, H)) {
                const double ar = hermite(rho0, drho0, rho1, drho1, h, sr);
                out.raw.arch_y.push_back(ay);
                out.raw.arch_u.push_back(std::exp(ar));
                min_rho = std::min(min_rho, ar);
                last_arch_y = ay;
              }
              from = sr + 1e-6;
              if (from >= 1.0) break;
            }
          }
        }
        // Interior minima of rho along the step.
        {
          // d/ds of the cubic Hermite is quadratic; check its roots.
          const double A = 6 * rho0 + 3 * h * drho0 - 6 * rho1 + 3 * h * drho1;
          const double B = -6 * rho0 - 4 * h * drho0 + 6 * rho1 - 2 * h * drho1;
          const double C = h * drho0;
          const double disc = B * B - 4 * A * C;
          if (disc >= 0 && A != 0) {
            for (double root : {(-B + std::sqrt(disc)) / (2 * A),
                                (-B - std::sqrt(disc)) / (2 * A)}) {
              if (root > 0 && root < 1)
                min_rho = std::min(
                    min_rho, hermite(rho0, drho0, rho1, drho1, h, root));
            }
          }
        }
        y += h;
        s = s7;
        k1 = k7;
        min_rho = std::min(min_rho, s[1]);
        if (want_trace) out.trace.push_back({y, s[0], s[1]});
        const double grow = 0.9 * std::pow(std::max(err, 1e-12), -0.2);
        h *= std::clamp(grow, 0.2, 5.0);
      } else {
        h *= std::clamp(0.9 * std::pow(err, -0.2), 0.1, 0.9);
      }
    }
    record_if_needed(yb);
  }

  out.raw.theta_end = s[0];
  out.logr_end = s[1];
  out.raw.mass = s[2];
  out.raw.u_end = std::exp(s[1]) * std::sin(s[0]);
  out.raw.f_end = std::exp(s[1]) * std::cos(s[0]);
  out.raw.min_r2 = std::exp(2.0 * min_rho);
  // Arch events from different half-levels can interleave when the phase is
  // not monotone; keep the list ordered in y.
  if (!std::is_sorted(out.raw.arch_y.begin(), out.raw.arch_y.end())) {
    std::vector<std::pair<double, double>> tmp(out.raw.arch_y.size());
    for (size_t i = 0; i < tmp.size(); ++i)
      tmp[i] = {out.raw.arch_y[i], out.raw.arch_u[i]};
    std::sort(tmp.begin(), tmp.end());
    for (size_t i = 0; i < tmp.size(); ++i) {
      out.raw.arch_y[i] = tmp[i].first;
      out.raw.arch_u[i] = tmp[i].second;
    }
  }
  out.raw.flux_at_zeros.clear();
  out.raw.flux_at_zeros.push_back(1.0);
  for (double v : flux_interior) out.raw.flux_at_zeros.push_back(v);
  out.raw.flux_at_zeros.push_back(std::fabs(out.raw.f_end));
  return out;
}

RawScan raw_scan(const Profile& profile, double mu, double lambda,
                 double y_end) {
  if (const auto* pc = profile.as_piecewise_constant())
    return pc_scan(*pc, mu, lambda, y_end);
  return rk_pruefer(profile, mu, lambda, y_end, {}, false).raw;
}

// Drops a trailing zero that is actually the boundary zero at y = H.
void merge_boundary_zero(RawScan& scan, double H) {
  const double guard = 1e-9 * std::max(1.0, H);
  while (!scan.zeros.empty() && scan.zeros.back() >= H - guard) {
    scan.zeros.pop_back();
    if (scan.flux_at_zeros.size() >= 2)
      scan.flux_at_zeros.erase(scan.flux_at_zeros.end() - 2);
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Public surface.
// ---------------------------------------------------------------------------

TransferMatrix piece_matrix(double c, double mu, double lambda, double length) {
  const Piece p = make_piece(c, mu, lambda);
  TransferMatrix m;
  if (p.q > 0) {
    const double s = std::sin(p.w * length), co = std::cos(p.w * length);
    m = {co, s / (p.c * p.w), -p.c * p.w * s, co};
  } else if (p.q < 0) {
    const double sh = std::sinh(p.w * length), ch = std::cosh(p.w * length);
    m = {ch, sh / (p.c * p.w), p.c * p.w * sh, ch};
  } else {
    m = {1.0, length / p.c, 0.0, 1.0};
  }
  return m;
}

PcPropagation propagate_pc(const Profile& profile, double mu, double lambda,
                           double u0, double f0) {
  const auto* pc = profile.as_piecewise_constant();
  if (!pc)
    throw_error(ErrorCode::NotPiecewiseConstant,
                "transfer-matrix propagation needs a piecewise-constant profile");
  if (u0 == 0.0 && f0 == 0.0)
    throw_error(ErrorCode::InvalidArgument, "initial state must be nonzero");
  PcPropagation out;
  std::array<double, 2> st{u0, f0};
  out.states.push_back(st);
  for (size_t j = 0; j < pc->values.size(); ++j) {
    const TransferMatrix m = piece_matrix(
        pc->values[j], mu, lambda, pc->breakpoints[j + 1] - pc->breakpoints[j]);
    out.pieces.push_back(m);
    st = m.apply(st);
    out.states.push_back(st);
  }
  return out;
}

FiberScan scan(const Profile& profile, double mu, double lambda) {
  RawScan raw = raw_scan(profile, mu, lambda, profile.height());
  FiberScan s;
  s.theta_H = raw.theta_end;
  s.mass = raw.mass;
  s.u_H = raw.u_end;
  s.f_H = raw.f_end;
  s.min_r2 = raw.min_r2;
  s.zeros = std::move(raw.zeros);
  s.arch_y = std::move(raw.arch_y);
  s.arch_u = std::move(raw.arch_u);
  s.flux_at_knots = std::move(raw.flux_at_zeros);
  return s;
}

double phase_at_H(const Profile& profile, double mu, double lambda) {
  return raw_scan(profile, mu, lambda, profile.height()).theta_end;
}

PrueferShot shoot_pruefer(const Profile& profile, double mu, double lambda,
                          bool want_trace) {
  if (!(mu > 0)) throw_error(ErrorCode::InvalidArgument, "mu must be positive");
  RkScan rk = rk_pruefer(profile, mu, lambda, profile.height(), {}, want_trace);
  PrueferShot shot;
  shot.theta_H = rk.raw.theta_end;
  shot.logr_H = rk.logr_end;
  shot.mass = rk.raw.mass;
  shot.zeros = std::move(rk.raw.zeros);
  shot.trace = std::move(rk.trace);
  return shot;
}

namespace {

double phase_by_method(const Profile& profile, double mu, double lambda,
                       Method method) {
  switch (method) {
    case Method::Auto:
      return phase_at_H(profile, mu, lambda);
    case Method::TransferMatrix: {
      const auto* pc = profile.as_piecewise_constant();
      if (!pc)
        throw_error(ErrorCode::NotPiecewiseConstant,
                    "transfer-matrix method needs a piecewise-constant profile");
      return pc_scan(*pc, mu, lambda, profile.height()).theta_end;
    }
    case Method::Pruefer:
      return rk_pruefer(profile, mu, lambda, profile.height(), {}, false)
          .raw.theta_end;
  }
  return 0;
}

}  // namespace

double eigenvalue(const Profile& profile, double mu, int ell, Method method) {
  if (ell < 1) throw_error(ErrorCode::InvalidArgument, "ell must be >= 1");
  const double H = profile.height();
  const double base = mu * mu + (double(ell) * kPi / H) * (double(ell) * kPi / H);
  double lo = profile.c_min() * base;
  double hi = profile.c_max() * base;
  const double target = double(ell) * kPi;
  if (lo == hi) return lo;

  double th_lo = phase_by_method(profile, mu, lo, method);
  double th_hi = phase_by_method(profile, mu, hi, method);
  const double slack = 1e-6;
  if (th_lo > target + slack || th_hi < target - slack)
    throw_error(ErrorCode::BracketFailure,
                "phase bracket does not enclose the requested index");
  if (th_lo >= target) return lo;
  if (th_hi <= target) return hi;

  double last_theta = th_lo;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (!(mid > lo && mid < hi)) break;  // hit floating-point resolution
    last_theta = phase_by_method(profile, mu, mid, method);
    if (last_theta < target) lo = mid; else hi = mid;
    const double width = hi - lo;
    if (width <= std::max(1e-12 * mid, 1e-13)) {
      // Keep polishing while the phase is a steep function of lambda (deep
      // barrier states); stop once the phase itself is pinned.
      if (std::fabs(last_theta - target) <= 5e-10) break;
      if (width <= 8 * std::numeric_limits<double>::epsilon() * mid) break;
    }
  }
  return 0.5 * (lo + hi);
}

std::vector<double> uniform_grid(const Profile& profile, int samples) {
  if (samples < 2) throw_error(ErrorCode::InvalidArgument, "need >= 2 samples");
  const double H = profile.height();
  std::vector<double> grid(static_cast<size_t>(samples));
  for (int i = 0; i < samples; ++i)
    grid[size_t(i)] = H * double(i) / double(samples - 1);
  grid.back() = H;
  return grid;
}

namespace {

// A solved fiber problem.  For states with a classically forbidden region the
// one-sided shot loses the decaying tail to rounding, so quantities are
// stitched from a forward and a backward (reflected) solve matched inside the
// oscillatory region.
class Solution {
 public:
  Solution(const Profile& profile, double mu, double lambda)
      : profile_(profile), mu_(mu), lambda_(lambda), H_(profile.height()) {
    fwd_ = raw_scan(profile_, mu_, lambda_, H_);
    stitched_ = lambda_ < profile_.c_max() * mu_ * mu_ * (1.0 - 1e-12);
    if (stitched_ && !fwd_.arch_y.empty()) {
      size_t best = 0;
      for (size_t i = 1; i < fwd_.arch_y.size(); ++i)
        if (fwd_.arch_u[i] > fwd_.arch_u[best]) best = i;
      match_y_ = fwd_.arch_y[best];
      reflected_ = profile_.reflected();
      bwd_ = raw_scan(*reflected_, mu_, lambda_, H_);
      // Scale factor between the two frames from r^2 at the matching point.
      const double rf2 = r2_at_fwd(match_y_);
      const double rb2 = r2_at_bwd(H_ - match_y_);
      sigma2_ = rf2 / rb2;
      fwd_part_ = mass_fwd_to(match_y_);
      bwd_part_ = mass_bwd_to(H_ - match_y_);
      total_ = fwd_part_ + sigma2_ * bwd_part_;
    } else {
      stitched_ = false;
      total_ = fwd_.mass;
    }
  }

  double theta_H() const { return fwd_.theta_end; }
  double total_mass() const { return total_; }
  bool stitched() const { return stitched_; }
  double match_y() const { return match_y_; }
  double sigma2() const { return sigma2_; }

  // Integral of the normalized eigenfunction squared over (a, b).
  double mass(double a, double b) const {
    a = std::clamp(a, 0.0, H_);
    b = std::clamp(b, 0.0, H_);
    if (b <= a) return 0.0;
    if (!stitched_)
      return (mass_fwd_to(b) - mass_fwd_to(a)) / total_;
    double m = 0;
    if (a < match_y_)
      m += mass_fwd_to(std::min(b, match_y_)) - mass_fwd_to(a);
    if (b > match_y_)
      m += sigma2_ * (mass_bwd_to(H_ - std::max(a, match_y_)) -
                      mass_bwd_to(H_ - b));
    return m / total_;
  }

  // Raw state (forward frame scale) at y.
  std::array<double, 2> state(double y) const {
    if (!stitched_ || y <= match_y_) return state_fwd(y);
    auto st = state_bwd(H_ - y);
    // Map from the reflected frame: u(y) = tau * u_r(H - y),
    // f(y) = -tau * f_r(H - y).
    return {tau() * st[0], -tau() * st[1]};
  }

  AmplitudeSummary amplitude() const {
    AmplitudeSummary out;
    RawScan fw = fwd_;
    merge_boundary_zero(fw, H_);
    if (!stitched_) {
      out.zeros.push_back(0.0);
      out.zeros.insert(out.zeros.end(), fw.zeros.begin(), fw.zeros.end());
      out.zeros.push_back(H_);
      out.arch_y = fw.arch_y;
      out.arch_u = fw.arch_u;
      for (double& v : out.arch_u) v /= std::sqrt(total_);
      out.flux_at_zeros = fw.flux_at_zeros;
      for (double& v : out.flux_at_zeros) v /= std::sqrt(total_);
      out.min_r2 = fw.min_r2 / total_;
    } else {
      RawScan fpart = raw_scan(profile_, mu_, lambda_, match_y_);
      RawScan bpart = raw_scan(*reflected_, mu_, lambda_, H_ - match_y_);
      merge_boundary_zero(bpart, H_ - match_y_);  // avoid duplicating y*
      const double sf = 1.0 / std::sqrt(total_);
      const double sb = std::sqrt(sigma2_) / std::sqrt(total_);
      out.zeros.push_back(0.0);
      out.zeros.insert(out.zeros.end(), fpart.zeros.begin(), fpart.zeros.end());
      std::vector<double> right;
      for (double z : bpart.zeros) right.push_back(H_ - z);
      std::sort(right.begin(), right.end());
      out.zeros.insert(out.zeros.end(), right.begin(), right.end());
      out.zeros.push_back(H_);
      for (size_t i = 0; i < fpart.arch_y.size(); ++i) {
        out.arch_y.push_back(fpart.arch_y[i]);
        out.arch_u.push_back(fpart.arch_u[i] * sf);
      }
      std::vector<std::pair<double, double>> rarch;
      for (size_t i = 0; i < bpart.arch_y.size(); ++i)
        rarch.push_back({H_ - bpart.arch_y[i], bpart.arch_u[i] * sb});
      std::sort(rarch.begin(), rarch.end());
      for (auto& [ay, au] : rarch) {
        if (!out.arch_y.empty() &&
            ay <= out.arch_y.back() + 1e-12 * std::max(1.0, H_))
          continue;
        out.arch_y.push_back(ay);
        out.arch_u.push_back(au);
      }
      out.flux_at_zeros.push_back(fpart.flux_at_zeros.front() * sf);
      for (size_t i = 0; i + 2 < fpart.flux_at_zeros.size(); ++i)
        out.flux_at_zeros.push_back(fpart.flux_at_zeros[i + 1] * sf);
      std::vector<double> rflux;
      for (size_t i = 0; i + 2 < bpart.flux_at_zeros.size(); ++i)
        rflux.push_back(bpart.flux_at_zeros[i + 1] * sb);
      std::reverse(rflux.begin(), rflux.end());
      for (double v : rflux) out.flux_at_zeros.push_back(v);
      out.flux_at_zeros.push_back(bpart.flux_at_zeros.front() * sb);
      out.min_r2 =
          std::min(fpart.min_r2, sigma2_ * bpart.min_r2) / total_;
    }
    out.max_gap = 0;
    for (size_t i = 0; i + 1 < out.zeros.size(); ++i)
      out.max_gap = std::max(out.max_gap, out.zeros[i + 1] - out.zeros[i]);
    return out;
  }

  // Samples at the grid points (forward frame scale, unnormalized).
  void sample(const std::vector<double>& grid, std::vector<double>& u,
              std::vector<double>& f) const {
    u.resize(grid.size());
    f.resize(grid.size());
    if (profile_.as_piecewise_constant()) {
      for (size_t i = 0; i < grid.size(); ++i) {
        const auto st = state(grid[i]);
        u[i] = st[0];
        f[i] = st[1];
      }
      return;
    }
    // One integration per side, recording at the requested points.
    std::vector<double> left, right;
    for (double y : grid)
      (stitched_ && y > match_y_ ? right : left).push_back(y);
    std::sort(left.begin(), left.end());
    RkScan lf = rk_pruefer(profile_, mu_, lambda_,
                           stitched_ ? match_y_ : H_, left, false);
    std::vector<std::pair<double, std::array<double, 2>>> samples;
    for (const auto& r : lf.recorded)
      samples.push_back({r.y, {std::exp(r.rho) * std::sin(r.theta),
                               std::exp(r.rho) * std::cos(r.theta)}});
    if (stitched_) {
      std::vector<double> rrefl;
      for (double y : right) rrefl.push_back(H_ - y);
      std::sort(rrefl.begin(), rrefl.end());
      RkScan rb = rk_pruefer(*reflected_, mu_, lambda_, H_ - match_y_,
                             rrefl, false);
      const double t = tau();
      for (const auto& r : rb.recorded)
        samples.push_back({H_ - r.y,
                           {t * std::exp(r.rho) * std::sin(r.theta),
                            -t * std::exp(r.rho) * std::cos(r.theta)}});
    }
    std::sort(samples.begin(), samples.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (size_t i = 0; i < grid.size(); ++i) {
      // Grids are sorted, so the k-th recorded sample matches.
      u[i] = samples[i].second[0];
      f[i] = samples[i].second[1];
    }
  }

 private:
  double tau() const {
    const auto sf = state_fwd(match_y_);
    const auto sb = state_bwd(H_ - match_y_);
    const double mag = std::sqrt(sigma2_);
    return (sgn(sf[0]) == sgn(sb[0])) ? mag : -mag;
  }

  std::array<double, 2> state_fwd(double y) const {
    if (const auto* pc = profile_.as_piecewise_constant())
      return pc_state_at(*pc, mu_, lambda_, y);
    RkScan rk = rk_pruefer(profile_, mu_, lambda_, y, {y}, false);
    return {std::exp(rk.logr_end) * std::sin(rk.raw.theta_end),
            std::exp(rk.logr_end) * std::cos(rk.raw.theta_end)};
  }
  std::array<double, 2> state_bwd(double yr) const {
    if (const auto* pc = reflected_->as_piecewise_constant())
      return pc_state_at(*pc, mu_, lambda_, yr);
    RkScan rk = rk_pruefer(*reflected_, mu_, lambda_, yr, {yr}, false);
    return {std::exp(rk.logr_end) * std::sin(rk.raw.theta_end),
            std::exp(rk.logr_end) * std::cos(rk.raw.theta_end)};
  }
  double r2_at_fwd(double y) const {
    const auto st = state_fwd(y);
    return st[0] * st[0] + st[1] * st[1];
  }
  double r2_at_bwd(double yr) const {
    const auto st = state_bwd(yr);
    return st[0] * st[0] + st[1] * st[1];
  }
  double mass_fwd_to(double y) const {
    if (const auto* pc = profile_.as_piecewise_constant())
      return pc_mass_to(*pc, mu_, lambda_, y);
    return rk_pruefer(profile_, mu_, lambda_, y, {}, false).raw.mass;
  }
  double mass_bwd_to(double yr) const {
    if (const auto* pc = reflected_->as_piecewise_constant())
      return pc_mass_to(*pc, mu_, lambda_, yr);
    return rk_pruefer(*reflected_, mu_, lambda_, yr, {}, false).raw.mass;
  }

  const Profile& profile_;
  double mu_, lambda_, H_;
  RawScan fwd_;
  RawScan bwd_;
  std::optional<Profile> reflected_;
  bool stitched_ = false;
  double match_y_ = 0;
  double sigma2_ = 1.0;
  double fwd_part_ = 0, bwd_part_ = 0;
  double total_ = 0;
};

}  // namespace

Eigenpair eigenfunction(const Profile& profile, double mu, double lambda,
                        std::vector<double> grid) {
  const double H = profile.height();
  if (grid.size() < 2 || std::fabs(grid.front()) > 1e-12 * H ||
      std::fabs(grid.back() - H) > 1e-12 * H)
    throw_error(ErrorCode::InvalidArgument, "grid must span [0, H]");
  if (const auto* pc = profile.as_piecewise_constant())
    grid.insert(grid.end(), pc->breakpoints.begin(), pc->breakpoints.end());
  else if (const auto* g = profile.grid_data())
    grid.insert(grid.end(), g->ys.begin(), g->ys.end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end(),
                         [&](double a, double b) {
                           return std::fabs(a - b) <= 1e-13 * std::max(1.0, H);
                         }),
             grid.end());
  grid.front() = 0.0;
  grid.back() = H;

  const double theta = phase_at_H(profile, mu, lambda);
  const double ell_f = theta / kPi;
  const int ell = int(std::lround(ell_f));
  if (ell < 1 || std::fabs(ell_f - double(ell)) > 1e-6)
    throw_error(ErrorCode::NotAnEigenvalue,
                "lambda does not satisfy the boundary condition");

  Solution sol(profile, mu, lambda);
  Eigenpair pair;
  pair.mu = mu;
  pair.ell = ell;
  pair.lambda = lambda;
  pair.grid = grid;
  sol.sample(grid, pair.u, pair.flux);
  const double scale = 1.0 / std::sqrt(sol.total_mass());
  for (double& v : pair.u) v *= scale;
  for (double& v : pair.flux) v *= scale;
  pair.u.front() = 0.0;
  pair.u.back() = 0.0;
  return pair;
}

Eigenpair eigenfunction(const Profile& profile, double mu, int ell,
                        int samples) {
  const double lambda = eigenvalue(profile, mu, ell);
  return eigenfunction(profile, mu, lambda, uniform_grid(profile, samples));
}

std::vector<std::pair<int, double>> spectrum_in_range(const Profile& profile,
                                                      double mu,
                                                      double lambda_lo,
                                                      double lambda_hi) {
  if (!(lambda_lo < lambda_hi))
    throw_error(ErrorCode::InvalidArgument, "empty window");
  const double th_lo = lambda_lo <= 0 ? 0.0 : phase_at_H(profile, mu, lambda_lo);
  const double th_hi = phase_at_H(profile, mu, lambda_hi);
  const int n_lo = int(std::floor(th_lo / kPi));
  const int n_hi = int(std::floor(th_hi / kPi));
  std::vector<std::pair<int, double>> out;
  for (int ell = n_lo + 1; ell <= n_hi; ++ell)
    out.push_back({ell, eigenvalue(profile, mu, ell)});
  return out;
}

double layer_mass(const Profile& profile, double mu, double lambda, double a,
                  double b) {
  if (!(a < b) || a < -1e-12 || b > profile.height() * (1 + 1e-12))
    throw_error(ErrorCode::BadLayer, "layer must satisfy 0 <= a < b <= H");
  Solution sol(profile, mu, lambda);
  return sol.mass(a, b);
}

AmplitudeSummary amplitude_summary(const Profile& profile, double mu,
                                   double lambda) {
  Solution sol(profile, mu, lambda);
  return sol.amplitude();
}

LiouvilleResult liouville_transform(const Profile& profile,
                                    const Eigenpair& pair, double eps,
                                    double Lambda) {
  if (!profile.is_smooth())
    throw_error(ErrorCode::NotSmoothProfile,
                "transform requires an analytic preset profile");
  const double mu2 = pair.mu * pair.mu;
  if (pair.lambda < (profile.c_max() + eps) * mu2 ||
      pair.lambda > (profile.c_max() + Lambda) * mu2)
    throw_error(ErrorCode::OutOfSector,
                "lambda outside [(c_max+eps) mu^2, (c_max+Lambda) mu^2]");

  LiouvilleResult out;
  const size_t n = pair.grid.size();
  out.xi.resize(n);
  out.eta.resize(n);
  auto integrand = [&](double y) {
    const double c = profile.value(y);
    return std::sqrt((pair.lambda / mu2 - c) / c);
  };
  // xi(y) = integral of sqrt(p/c) dy, via per-interval 5-point Gauss.
  static const double gx[5] = {0.0, 0.5384693101056831, -0.5384693101056831,
                               0.9061798459386640, -0.9061798459386640};
  static const double gw[5] = {0.5688888888888889, 0.4786286704993665,
                               0.4786286704993665, 0.2369268850561891,
                               0.2369268850561891};
  out.xi[0] = 0;
  for (size_t i = 0; i + 1 < n; ++i) {
    const double a = pair.grid[i], b = pair.grid[i + 1];
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    double s = 0;
    for (int k = 0; k < 5; ++k) s += gw[k] * integrand(mid + half * gx[k]);
    out.xi[i + 1] = out.xi[i] + s * half;
  }
  out.xi_H = out.xi.back();
  for (size_t i = 0; i < n; ++i) {
    const double c = profile.value(pair.grid[i]);
    const double ptilde = c * (pair.lambda / mu2 - c);
    out.eta[i] = std::pow(ptilde, 0.25) * pair.u[i];
  }
  // Least-squares amplitude of sin(mu xi) and the sup residual.
  double num = 0, den = 0;
  for (size_t i = 0; i < n; ++i) {
    const double s = std::sin(pair.mu * out.xi[i]);
    num += out.eta[i] * s;
    den += s * s;
  }
  out.alpha = den > 0 ? num / den : 0.0;
  for (size_t i = 0; i < n; ++i)
    out.residual_sup = std::max(
        out.residual_sup,
        std::fabs(out.eta[i] - out.alpha * std::sin(pair.mu * out.xi[i])));
  // |alpha| bracket implied by the normalization: the squared L2 norm of eta
  // in d(xi) equals the integral of p u^2 dy.
  double eta2 = 0;
  for (size_t i = 0; i + 1 < n; ++i) {
    const double pa = pair.lambda / mu2 - profile.value(pair.grid[i]);
    const double pb = pair.lambda / mu2 - profile.value(pair.grid[i + 1]);
    eta2 += 0.5 * (pa * pair.u[i] * pair.u[i] + pb * pair.u[i + 1] * pair.u[i + 1]) *
            (pair.grid[i + 1] - pair.grid[i]);
  }
  const double S = 0.5 * out.xi_H -
                   std::sin(2 * pair.mu * out.xi_H) / (4 * pair.mu);
  const double rough = std::sqrt(std::max(eta2, 0.0));
  const double spill = out.residual_sup * std::sqrt(out.xi_H);
  out.r1 = std::max(0.0, (rough - spill)) / std::sqrt(S);
  out.r2 = (rough + spill) / std::sqrt(S);
  return out;
}

}  // namespace lw::fiber
