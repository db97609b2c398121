#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "layerwave/error.hpp"

namespace lw {

enum class Interp { Step, Linear };
enum class PresetKind { Constant, LinearRamp, SineBump, SmoothWell };

/// N pieces: piece j occupies (breakpoints[j], breakpoints[j+1]) with value
/// values[j].  Evaluation is right-continuous at interior breakpoints.
struct PiecewiseConstantData {
  std::vector<double> breakpoints;  // size N+1, breakpoints[0] = 0, back() = H
  std::vector<double> values;       // size N, all > 0
};

struct SampledGridData {
  std::vector<double> ys;  // strictly increasing, ys[0] = 0, back() = H
  std::vector<double> cs;  // same size, all > 0
  Interp interp = Interp::Step;
};

struct PresetData {
  PresetKind kind = PresetKind::Constant;
  double height = 1.0;
  // Parameter layout:
  //   constant:    {c}
  //   linear-ramp: {c_start, c_end}
  //   sine-bump:   {base, amp}            c(y) = base + amp*sin(pi*y/H)
  //   smooth-well: {c_out, depth, center, width}
  //                c(y) = c_out - depth*exp(-((y-center)/width)^2)
  std::vector<double> params;
};

struct ProfileSummary {
  double c_min = 0;
  double c_max = 0;
  double total_variation = 0;
  double height = 0;
};

struct WellInterval {
  double alpha = 0;
  double beta = 0;
  double c1 = 0;
};

/// A celerity profile c(y) on [0, H].  Immutable after construction; all
/// queries are pure, so instances can be shared freely across threads.
class Profile {
 public:
  static Profile piecewise_constant(std::vector<double> breakpoints,
                                    std::vector<double> values);
  static Profile sampled_grid(std::vector<double> ys, std::vector<double> cs,
                              Interp interp);
  static Profile preset(PresetKind kind, double height,
                        std::vector<double> params);
  static Profile constant(double c, double height);

  /// Parses the key/value profile text format (see README).
  static Profile parse(const std::string& text);
  static Profile load(const std::string& path);

  double height() const { return height_; }
  double c_min() const { return c_min_; }
  double c_max() const { return c_max_; }
  double total_variation() const { return tv_; }

  /// Re-checks positivity on a dense sample and returns the cached summary.
  ProfileSummary validate() const;

  /// c(y) for y in [0, H]; right-continuous at step discontinuities.
  double value(double y) const;
  double operator()(double y) const { return value(y); }

  /// t(y) = integral of 1/c over [0, y].
  double travel_time(double y) const;
  /// Inverse of travel_time on [0, t(H)].
  double inverse_travel_time(double t) const;

  /// Smallest interval (alpha, beta) outside of which c >= c1, or nullopt if
  /// the sublevel set {c < c1} is empty or has more than one component.
  std::optional<WellInterval> find_well(double c1) const;

  /// Non-null when the profile is exactly representable as piecewise
  /// constant (pc / step grid / constant preset).
  const PiecewiseConstantData* as_piecewise_constant() const;

  /// True for analytic presets (twice continuously differentiable).
  bool is_smooth() const;

  /// The profile reflected about the midpoint: c_r(y) = c(H - y).
  Profile reflected() const;

  const PiecewiseConstantData* pc_data() const {
    return std::get_if<PiecewiseConstantData>(&rep_);
  }
  const SampledGridData* grid_data() const {
    return std::get_if<SampledGridData>(&rep_);
  }
  const PresetData* preset_data() const {
    return std::get_if<PresetData>(&rep_);
  }

 private:
  using Rep = std::variant<PiecewiseConstantData, SampledGridData, PresetData>;

  explicit Profile(Rep rep);
  void finish_construction();

  Rep rep_;
  double height_ = 0;
  double c_min_ = 0;
  double c_max_ = 0;
  double tv_ = 0;
  std::optional<PiecewiseConstantData> pc_view_;  // set for step grids etc.
  std::vector<double> cum_time_;  // cumulative travel time at knots
  std::vector<double> knots_;     // knots matching cum_time_
};

}  // namespace lw
