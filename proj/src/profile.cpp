#include "layerwave/profile.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

namespace lw {

namespace {

constexpr double kPi = 3.14159265358979323846;

// 5-point Gauss-Legendre rule on [-1, 1].
constexpr double kGx[5] = {0.0, 0.5384693101056831, -0.5384693101056831,
                           0.9061798459386640, -0.9061798459386640};
constexpr double kGw[5] = {0.5688888888888889, 0.4786286704993665,
                           0.4786286704993665, 0.2369268850561891,
                           0.2369268850561891};

template <typename F>
double gauss5(const F& f, double a, double b) {
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double s = 0;
  for (int i = 0; i < 5; ++i) s += kGw[i] * f(mid + half * kGx[i]);
  return s * half;
}

double preset_value(const PresetData& p, double y) {
  switch (p.kind) {
    case PresetKind::Constant:
      return p.params[0];
    case PresetKind::LinearRamp:
      return p.params[0] + (p.params[1] - p.params[0]) * (y / p.height);
    case PresetKind::SineBump:
      return p.params[0] + p.params[1] * std::sin(kPi * y / p.height);
    case PresetKind::SmoothWell: {
      const double s = (y - p.params[2]) / p.params[3];
      return p.params[0] - p.params[1] * std::exp(-s * s);
    }
  }
  return 0;  // unreachable
}

size_t piece_index(const std::vector<double>& breakpoints, double y) {
  auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), y);
  size_t idx = static_cast<size_t>(it - breakpoints.begin());
  if (idx == 0) return 0;
  idx -= 1;
  const size_t pieces = breakpoints.size() - 1;
  return std::min(idx, pieces - 1);
}

}  // namespace

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::Io: return "Io";
    case ErrorCode::Parse: return "Parse";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NonPositiveValue: return "NonPositiveValue";
    case ErrorCode::UnsortedBreakpoints: return "UnsortedBreakpoints";
    case ErrorCode::EmptyProfile: return "EmptyProfile";
    case ErrorCode::OutOfDomain: return "OutOfDomain";
    case ErrorCode::ThresholdOutOfRange: return "ThresholdOutOfRange";
    case ErrorCode::BracketFailure: return "BracketFailure";
    case ErrorCode::NotAnEigenvalue: return "NotAnEigenvalue";
    case ErrorCode::UnsupportedCrossSection: return "UnsupportedCrossSection";
    case ErrorCode::BadLayer: return "BadLayer";
    case ErrorCode::NotPiecewiseConstant: return "NotPiecewiseConstant";
    case ErrorCode::NotInSector: return "NotInSector";
    case ErrorCode::LayerIntersectsWell: return "LayerIntersectsWell";
    case ErrorCode::EmptyFamily: return "EmptyFamily";
    case ErrorCode::NotSmoothProfile: return "NotSmoothProfile";
    case ErrorCode::OutOfSector: return "OutOfSector";
    case ErrorCode::TooManyRequested: return "TooManyRequested";
    case ErrorCode::ClusterUnresolved: return "ClusterUnresolved";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::StepSizeUnderflow: return "StepSizeUnderflow";
    case ErrorCode::Numerical: return "Numerical";
  }
  return "Unknown";
}

bool is_usage_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::Io:
    case ErrorCode::Parse:
    case ErrorCode::InvalidArgument:
    case ErrorCode::NonPositiveValue:
    case ErrorCode::UnsortedBreakpoints:
    case ErrorCode::EmptyProfile:
    case ErrorCode::OutOfDomain:
    case ErrorCode::ThresholdOutOfRange:
    case ErrorCode::UnsupportedCrossSection:
    case ErrorCode::BadLayer:
    case ErrorCode::NotPiecewiseConstant:
    case ErrorCode::NotInSector:
    case ErrorCode::LayerIntersectsWell:
    case ErrorCode::EmptyFamily:
    case ErrorCode::NotSmoothProfile:
    case ErrorCode::OutOfSector:
    case ErrorCode::TooManyRequested:
    case ErrorCode::LengthMismatch:
      return true;
    default:
      return false;
  }
}

Profile::Profile(Rep rep) : rep_(std::move(rep)) { finish_construction(); }

Profile Profile::piecewise_constant(std::vector<double> breakpoints,
                                    std::vector<double> values) {
  return Profile(PiecewiseConstantData{std::move(breakpoints), std::move(values)});
}

Profile Profile::sampled_grid(std::vector<double> ys, std::vector<double> cs,
                              Interp interp) {
  return Profile(SampledGridData{std::move(ys), std::move(cs), interp});
}

Profile Profile::preset(PresetKind kind, double height,
                        std::vector<double> params) {
  return Profile(PresetData{kind, height, std::move(params)});
}

Profile Profile::constant(double c, double height) {
  return preset(PresetKind::Constant, height, {c});
}

void Profile::finish_construction() {
  if (const auto* pc = pc_data()) {
    if (pc->values.empty()) throw_error(ErrorCode::EmptyProfile, "profile has no pieces");
    if (pc->breakpoints.size() != pc->values.size() + 1)
      throw_error(ErrorCode::Parse, "breakpoints must have one more entry than values");
    if (pc->breakpoints.front() != 0.0)
      throw_error(ErrorCode::UnsortedBreakpoints, "first breakpoint must be 0");
    for (size_t i = 0; i + 1 < pc->breakpoints.size(); ++i)
      if (!(pc->breakpoints[i] < pc->breakpoints[i + 1]))
        throw_error(ErrorCode::UnsortedBreakpoints, "breakpoints must be strictly increasing");
    for (double v : pc->values)
      if (!(v > 0.0) || !std::isfinite(v))
        throw_error(ErrorCode::NonPositiveValue, "piece values must be positive");
    height_ = pc->breakpoints.back();
    c_min_ = *std::min_element(pc->values.begin(), pc->values.end());
    c_max_ = *std::max_element(pc->values.begin(), pc->values.end());
    tv_ = 0;
    for (size_t j = 0; j + 1 < pc->values.size(); ++j)
      tv_ += std::fabs(pc->values[j + 1] - pc->values[j]);
    knots_ = pc->breakpoints;
  } else if (const auto* g = grid_data()) {
    if (g->ys.size() < 2) throw_error(ErrorCode::EmptyProfile, "grid needs at least two samples");
    if (g->ys.size() != g->cs.size())
      throw_error(ErrorCode::Parse, "ys and cs must have the same length");
    if (g->ys.front() != 0.0)
      throw_error(ErrorCode::UnsortedBreakpoints, "first grid point must be 0");
    for (size_t i = 0; i + 1 < g->ys.size(); ++i)
      if (!(g->ys[i] < g->ys[i + 1]))
        throw_error(ErrorCode::UnsortedBreakpoints, "grid points must be strictly increasing");
    for (double v : g->cs)
      if (!(v > 0.0) || !std::isfinite(v))
        throw_error(ErrorCode::NonPositiveValue, "grid values must be positive");
    height_ = g->ys.back();
    c_min_ = *std::min_element(g->cs.begin(), g->cs.end());
    c_max_ = *std::max_element(g->cs.begin(), g->cs.end());
    tv_ = 0;
    for (size_t i = 0; i + 1 < g->cs.size(); ++i)
      tv_ += std::fabs(g->cs[i + 1] - g->cs[i]);
    if (g->interp == Interp::Step) {
      // A step grid is a piecewise constant profile; the final sample only
      // pins c(H).
      PiecewiseConstantData view;
      view.breakpoints = g->ys;
      view.values.assign(g->cs.begin(), g->cs.end() - 1);
      pc_view_ = std::move(view);
    }
    knots_ = g->ys;
  } else {
    const auto& p = std::get<PresetData>(rep_);
    if (!(p.height > 0) || !std::isfinite(p.height))
      throw_error(ErrorCode::NonPositiveValue, "H must be positive");
    size_t want = 0;
    switch (p.kind) {
      case PresetKind::Constant: want = 1; break;
      case PresetKind::LinearRamp: want = 2; break;
      case PresetKind::SineBump: want = 2; break;
      case PresetKind::SmoothWell: want = 4; break;
    }
    if (p.params.size() != want)
      throw_error(ErrorCode::Parse, "wrong number of preset parameters");
    height_ = p.height;
    switch (p.kind) {
      case PresetKind::Constant:
        c_min_ = c_max_ = p.params[0];
        tv_ = 0;
        break;
      case PresetKind::LinearRamp:
        c_min_ = std::min(p.params[0], p.params[1]);
        c_max_ = std::max(p.params[0], p.params[1]);
        break;
      case PresetKind::SineBump:
        c_min_ = std::min(p.params[0], p.params[0] + p.params[1]);
        c_max_ = std::max(p.params[0], p.params[0] + p.params[1]);
        break;
      case PresetKind::SmoothWell: {
        const double at_center = preset_value(p, std::clamp(p.params[2], 0.0, height_));
        const double at0 = preset_value(p, 0.0);
        const double atH = preset_value(p, height_);
        c_min_ = std::min({at_center, at0, atH});
        c_max_ = std::max({at_center, at0, atH});
        break;
      }
    }
    if (!(c_min_ > 0.0))
      throw_error(ErrorCode::NonPositiveValue, "preset takes non-positive values");
    if (p.kind == PresetKind::Constant)
      pc_view_ = PiecewiseConstantData{{0.0, height_}, {p.params[0]}};
    if (p.kind != PresetKind::Constant) {
      // Total variation by sampling, doubling until the increments settle.
      if (p.kind == PresetKind::LinearRamp) {
        tv_ = std::fabs(p.params[1] - p.params[0]);
      } else {
        double prev = -1.0;
        for (size_t n = 64; n <= (1u << 22); n *= 2) {
          double tv = 0;
          double last = preset_value(p, 0.0);
          for (size_t i = 1; i <= n; ++i) {
            const double cur = preset_value(p, height_ * double(i) / double(n));
            tv += std::fabs(cur - last);
            last = cur;
          }
          if (prev >= 0 && std::fabs(tv - prev) <= 1e-8) { prev = tv; break; }
          prev = tv;
        }
        tv_ = prev;
      }
    }
    if (pc_view_) {
      knots_ = pc_view_->breakpoints;
    } else {
      // Travel-time checkpoints on a fine uniform grid.
      const size_t n = 4096;
      knots_.resize(n + 1);
      for (size_t i = 0; i <= n; ++i) knots_[i] = height_ * double(i) / double(n);
      knots_.back() = height_;
    }
  }

  // Cumulative travel time at the knots.
  cum_time_.assign(knots_.size(), 0.0);
  if (const auto* pc = as_piecewise_constant()) {
    // cum_time_ indexes pc breakpoints here (knots_ == pc->breakpoints).
    for (size_t j = 0; j + 1 < knots_.size(); ++j)
      cum_time_[j + 1] = cum_time_[j] + (knots_[j + 1] - knots_[j]) / pc->values[j];
  } else if (const auto* g = grid_data()) {
    for (size_t i = 0; i + 1 < g->ys.size(); ++i) {
      const double dy = g->ys[i + 1] - g->ys[i];
      const double dc = g->cs[i + 1] - g->cs[i];
      const double dt = (std::fabs(dc) > 1e-14 * std::fabs(g->cs[i]))
                            ? dy / dc * std::log(g->cs[i + 1] / g->cs[i])
                            : dy / g->cs[i];
      cum_time_[i + 1] = cum_time_[i] + dt;
    }
  } else {
    const auto& p = std::get<PresetData>(rep_);
    auto inv = [&](double y) { return 1.0 / preset_value(p, y); };
    for (size_t i = 0; i + 1 < knots_.size(); ++i)
      cum_time_[i + 1] = cum_time_[i] + gauss5(inv, knots_[i], knots_[i + 1]);
  }
}

ProfileSummary Profile::validate() const {
  for (int i = 0; i <= 1000; ++i) {
    const double y = height_ * double(i) / 1000.0;
    const double c = value(y);
    if (!(c > 0.0) || !std::isfinite(c))
      throw_error(ErrorCode::NonPositiveValue, "profile takes a non-positive value");
    if (c < c_min_ - 1e-12 * c_min_ || c > c_max_ + 1e-12 * c_max_)
      throw_error(ErrorCode::Numerical, "cached bounds inconsistent with evaluation");
  }
  return ProfileSummary{c_min_, c_max_, tv_, height_};
}

double Profile::value(double y) const {
  if (y < 0.0 || y > height_)
    throw_error(ErrorCode::OutOfDomain, "y outside [0, H]");
  if (const auto* pc = as_piecewise_constant())
    return pc->values[piece_index(pc->breakpoints, y)];
  if (const auto* g = grid_data()) {
    // Linear interpolation (step grids use the piecewise-constant view).
    auto it = std::upper_bound(g->ys.begin(), g->ys.end(), y);
    size_t i = static_cast<size_t>(it - g->ys.begin());
    if (i == 0) return g->cs.front();
    if (i >= g->ys.size()) return g->cs.back();
    i -= 1;
    const double t = (y - g->ys[i]) / (g->ys[i + 1] - g->ys[i]);
    return g->cs[i] + t * (g->cs[i + 1] - g->cs[i]);
  }
  return preset_value(std::get<PresetData>(rep_), y);
}

double Profile::travel_time(double y) const {
  if (y < 0.0 || y > height_)
    throw_error(ErrorCode::OutOfDomain, "y outside [0, H]");
  auto it = std::upper_bound(knots_.begin(), knots_.end(), y);
  size_t i = static_cast<size_t>(it - knots_.begin());
  if (i > 0) i -= 1;
  if (i + 1 >= knots_.size()) i = knots_.size() - 2;
  if (const auto* pc = as_piecewise_constant())
    return cum_time_[i] + (y - knots_[i]) / pc->values[i];
  if (const auto* g = grid_data()) {
    const double c0 = g->cs[i];
    const double cy = value(y);
    const double dy = y - g->ys[i];
    const double slope = (g->cs[i + 1] - g->cs[i]) / (g->ys[i + 1] - g->ys[i]);
    const double dt = (std::fabs(slope) > 1e-14)
                          ? std::log(cy / c0) / slope
                          : dy / c0;
    return cum_time_[i] + dt;
  }
  const auto& p = std::get<PresetData>(rep_);
  auto inv = [&](double s) { return 1.0 / preset_value(p, s); };
  return cum_time_[i] + gauss5(inv, knots_[i], y);
}

double Profile::inverse_travel_time(double t) const {
  const double tH = cum_time_.back() +
      (knots_.back() < height_ ? 0.0 : 0.0);  // cum_time_ ends at H by construction
  const double t_total = travel_time(height_);
  if (t < -1e-12 || t > t_total * (1 + 1e-12))
    throw_error(ErrorCode::OutOfDomain, "t outside [0, t(H)]");
  (void)tH;
  double lo = 0.0, hi = height_;
  for (int it = 0; it < 100 && hi - lo > 1e-15 * height_; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (travel_time(mid) < t) lo = mid; else hi = mid;
  }
  double y = 0.5 * (lo + hi);
  for (int it = 0; it < 3; ++it) {
    const double r = travel_time(y) - t;
    y = std::clamp(y - r * value(y), 0.0, height_);
  }
  return y;
}

std::optional<WellInterval> Profile::find_well(double c1) const {
  if (!(c1 > c_min_ && c1 <= c_max_))
    throw_error(ErrorCode::ThresholdOutOfRange,
                "well threshold must satisfy c_min < c1 <= c_max");
  if (const auto* pc = as_piecewise_constant()) {
    // Runs of consecutive pieces with value below the threshold.
    int first = -1, last = -1;
    int runs = 0;
    bool in_run = false;
    for (size_t j = 0; j < pc->values.size(); ++j) {
      if (pc->values[j] < c1) {
        if (!in_run) { ++runs; in_run = true; if (runs == 1) first = int(j); }
        if (runs == 1) last = int(j);
      } else {
        in_run = false;
      }
    }
    if (runs != 1) return std::nullopt;
    return WellInterval{pc->breakpoints[size_t(first)],
                        pc->breakpoints[size_t(last) + 1], c1};
  }
  const size_t n = std::max<size_t>(10000, 10 * knots_.size());
  int first = -1, last = -1, runs = 0;
  bool in_run = false;
  for (size_t i = 0; i <= n; ++i) {
    const double y = height_ * double(i) / double(n);
    if (value(y) < c1) {
      if (!in_run) { ++runs; in_run = true; if (runs == 1) first = int(i); }
      if (runs == 1) last = int(i);
    } else {
      in_run = false;
    }
  }
  if (runs != 1) return std::nullopt;
  const double alpha = first > 0 ? height_ * double(first - 1) / double(n) : 0.0;
  const double beta = size_t(last) < n ? height_ * double(last + 1) / double(n) : height_;
  return WellInterval{alpha, beta, c1};
}

const PiecewiseConstantData* Profile::as_piecewise_constant() const {
  if (const auto* pc = pc_data()) return pc;
  if (pc_view_) return &*pc_view_;
  return nullptr;
}

bool Profile::is_smooth() const { return preset_data() != nullptr; }

Profile Profile::reflected() const {
  if (const auto* pc = pc_data()) {
    std::vector<double> bp(pc->breakpoints.size());
    std::vector<double> vals(pc->values.rbegin(), pc->values.rend());
    for (size_t i = 0; i < bp.size(); ++i)
      bp[i] = height_ - pc->breakpoints[bp.size() - 1 - i];
    bp.front() = 0.0;
    bp.back() = height_;
    return piecewise_constant(std::move(bp), std::move(vals));
  }
  if (const auto* g = grid_data()) {
    std::vector<double> ys(g->ys.size());
    std::vector<double> cs(g->cs.rbegin(), g->cs.rend());
    for (size_t i = 0; i < ys.size(); ++i)
      ys[i] = height_ - g->ys[ys.size() - 1 - i];
    ys.front() = 0.0;
    ys.back() = height_;
    return sampled_grid(std::move(ys), std::move(cs), g->interp);
  }
  const auto& p = std::get<PresetData>(rep_);
  PresetData r = p;
  switch (p.kind) {
    case PresetKind::Constant:
    case PresetKind::SineBump:
      break;
    case PresetKind::LinearRamp:
      std::swap(r.params[0], r.params[1]);
      break;
    case PresetKind::SmoothWell:
      r.params[2] = height_ - p.params[2];
      break;
  }
  return preset(r.kind, r.height, std::move(r.params));
}

namespace {

std::vector<double> parse_numbers(const std::vector<std::string>& tokens,
                                  const std::string& key) {
  std::vector<double> out;
  out.reserve(tokens.size());
  for (const auto& tok : tokens) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0')
      throw_error(ErrorCode::Parse, "bad number '" + tok + "' in field '" + key + "'");
    out.push_back(v);
  }
  return out;
}

}  // namespace

Profile Profile::parse(const std::string& text) {
  std::map<std::string, std::vector<std::string>> fields;
  std::istringstream stream(text);
  std::string line;
  while (std::getline(stream, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    std::vector<std::string> toks;
    std::string tok;
    while (ls >> tok) toks.push_back(tok);
    if (fields.count(key))
      throw_error(ErrorCode::Parse, "duplicate field '" + key + "'");
    fields[key] = std::move(toks);
  }

  auto need = [&](const std::string& key) -> const std::vector<std::string>& {
    auto it = fields.find(key);
    if (it == fields.end() || it->second.empty())
      throw_error(ErrorCode::Parse, "missing field '" + key + "'");
    return it->second;
  };
  auto scalar = [&](const std::string& key) {
    const auto nums = parse_numbers(need(key), key);
    if (nums.size() != 1)
      throw_error(ErrorCode::Parse, "field '" + key + "' must be a single number");
    return nums[0];
  };

  const std::string type = need("type").at(0);
  const double H = scalar("H");
  if (!(H > 0)) throw_error(ErrorCode::NonPositiveValue, "H must be positive");

  auto check_height = [&](double back, const char* what) {
    if (std::fabs(back - H) > 1e-12 * std::max(1.0, H))
      throw_error(ErrorCode::Parse, std::string("last ") + what + " must equal H");
  };

  if (type == "pc") {
    auto bp = parse_numbers(need("breakpoints"), "breakpoints");
    auto vals = parse_numbers(need("values"), "values");
    if (bp.empty()) throw_error(ErrorCode::EmptyProfile, "no breakpoints");
    check_height(bp.back(), "breakpoint");
    return piecewise_constant(std::move(bp), std::move(vals));
  }
  if (type == "grid") {
    auto ys = parse_numbers(need("ys"), "ys");
    auto cs = parse_numbers(need("cs"), "cs");
    if (ys.empty()) throw_error(ErrorCode::EmptyProfile, "no grid points");
    check_height(ys.back(), "grid point");
    Interp interp = Interp::Step;
    if (fields.count("interp")) {
      const std::string& m = fields["interp"].at(0);
      if (m == "step") interp = Interp::Step;
      else if (m == "linear") interp = Interp::Linear;
      else throw_error(ErrorCode::Parse, "interp must be 'step' or 'linear'");
    }
    return sampled_grid(std::move(ys), std::move(cs), interp);
  }
  if (type == "preset") {
    const std::string& name = need("preset").at(0);
    PresetKind kind;
    if (name == "constant") kind = PresetKind::Constant;
    else if (name == "linear-ramp") kind = PresetKind::LinearRamp;
    else if (name == "sine-bump") kind = PresetKind::SineBump;
    else if (name == "smooth-well") kind = PresetKind::SmoothWell;
    else throw_error(ErrorCode::Parse, "unknown preset '" + name + "'");
    auto params = parse_numbers(need("params"), "params");
    return preset(kind, H, std::move(params));
  }
  throw_error(ErrorCode::Parse, "unknown profile type '" + type + "'");
}

Profile Profile::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_error(ErrorCode::Io, "cannot open profile file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

}  // namespace lw
