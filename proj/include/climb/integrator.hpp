#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "climb/dual.hpp"

namespace climb {

struct IntegratorSettings {
  double rel_tol = 1e-12;
  double abs_tol = 1e-12;
  double max_step = std::numeric_limits<double>::infinity();
  bool dense_output = false;
  int max_steps = 200000;

  void validate() const {
    if (!(rel_tol >= 1e-14 && rel_tol <= 1e-3 && abs_tol >= 1e-14 && abs_tol <= 1e-3)) {
      throw std::invalid_argument("integrator tolerances must lie in [1e-14, 1e-3]");
    }
  }

  static IntegratorSettings shooting() { return {}; }
  static IntegratorSettings sweep() {
    IntegratorSettings s;
    s.rel_tol = s.abs_tol = 1e-10;
    return s;
  }
};

class StepFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Piecewise quartic dense output of an accepted Dormand-Prince run.
template <std::size_t N>
class Trajectory {
 public:
  using Point = std::array<double, N>;

  struct Segment {
    double t0;
    double h;
    std::array<Point, 5> coeff;
  };

  Trajectory() = default;
  Trajectory(double t0, const Point& y0) : t_{t0}, y_{y0} {}

  void push(double t1, const Point& y1, const Segment& seg) {
    t_.push_back(t1);
    y_.push_back(y1);
    segments_.push_back(seg);
  }

  [[nodiscard]] const std::vector<double>& times() const { return t_; }
  [[nodiscard]] const std::vector<Point>& nodes() const { return y_; }
  [[nodiscard]] double t_begin() const { return t_.front(); }
  [[nodiscard]] double t_end() const { return t_.back(); }
  [[nodiscard]] bool empty() const { return t_.empty(); }

  /// Interpolated value; t outside the span is clamped to the end points.
  [[nodiscard]] Point operator()(double t) const {
    if (segments_.empty()) return y_.front();
    const bool forward = t_.back() >= t_.front();
    auto before = [forward](double a, double b) { return forward ? a < b : a > b; };
    if (!before(t_.front(), t)) return y_.front();
    if (!before(t, t_.back())) return y_.back();
    // Binary search over monotone (possibly decreasing) nodes.
    std::size_t lo = 0;
    std::size_t hi = t_.size() - 1;
    while (hi - lo > 1) {
      const std::size_t mid = (lo + hi) / 2;
      if (before(t, t_[mid])) {
        hi = mid;
      } else {
        lo = mid;
      }
    }
    const Segment& s = segments_[lo];
    const double th = (t - s.t0) / s.h;
    const double th1 = 1.0 - th;
    Point out;
    for (std::size_t i = 0; i < N; ++i) {
      out[i] = s.coeff[0][i] +
               th * (s.coeff[1][i] +
                     th1 * (s.coeff[2][i] + th * (s.coeff[3][i] + th1 * s.coeff[4][i])));
    }
    return out;
  }

 private:
  std::vector<double> t_;
  std::vector<Point> y_;
  std::vector<Segment> segments_;
};

namespace dp5 {
inline constexpr double s2 = 1.0 / 5, s3 = 3.0 / 10, s4 = 4.0 / 5, s5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                        a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                        a64 = 49.0 / 176, a65 = -5103.0 / 18656;
inline constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                        a75 = -2187.0 / 6784, a76 = 11.0 / 84;
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                        e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
inline constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                        d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                        d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
}  // namespace dp5

/// Adaptive Dormand-Prince 5(4) with PI step control.
///
/// T may be a dual number: step sizes are then chosen from the value parts
/// only, so tangents are exact derivatives of the discrete flow map.
/// `rhs(t, y)` returns dy/dt; `observer(t, y)` (optional) sees every accepted
/// node including the initial one.
template <typename T, std::size_t N, typename Rhs, typename Observer>
std::array<T, N> integrate(const Rhs& rhs, std::array<T, N> y, double t0, double t1,
                           const IntegratorSettings& settings, Trajectory<N>* dense,
                           Observer&& observer) {
  using Vec = std::array<T, N>;
  using namespace dp5;
  if (dense) {
    std::array<double, N> y0v;
    for (std::size_t i = 0; i < N; ++i) y0v[i] = value(y[i]);
    *dense = Trajectory<N>(t0, y0v);
  }
  observer(t0, y);
  if (t1 == t0) return y;

  const double span = t1 - t0;
  const double dir = span > 0 ? 1.0 : -1.0;
  const double rtol = settings.rel_tol;
  const double atol = settings.abs_tol;

  auto axpy = [](const Vec& base, double h, std::initializer_list<std::pair<double, const Vec*>> terms) {
    Vec out = base;
    for (const auto& [c, k] : terms) {
      if (c == 0.0) continue;
      for (std::size_t i = 0; i < N; ++i) out[i] += (h * c) * (*k)[i];
    }
    return out;
  };

  Vec k1 = rhs(t0, y);

  // Initial step guess (Hairer & Wanner, HINIT).
  double h;
  {
    double dnf = 0.0, dny = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double sk = atol + rtol * std::abs(value(y[i]));
      dnf += std::pow(value(k1[i]) / sk, 2);
      dny += std::pow(value(y[i]) / sk, 2);
    }
    h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : std::sqrt(dny / dnf) * 0.01;
    h = std::min({h, settings.max_step, std::abs(span)});
    Vec y1 = axpy(y, dir * h, {{1.0, &k1}});
    Vec k2 = rhs(t0 + dir * h, y1);
    double der2 = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double sk = atol + rtol * std::abs(value(y[i]));
      der2 += std::pow((value(k2[i]) - value(k1[i])) / sk, 2);
    }
    der2 = std::sqrt(der2) / h;
    const double der12 = std::max(std::abs(der2), std::sqrt(dnf));
    const double h1 = der12 <= 1e-15 ? std::max(1e-6, h * 1e-3) : std::pow(0.01 / der12, 1.0 / 5.0);
    h = std::min({100.0 * h, h1, settings.max_step, std::abs(span)});
  }

  const double beta = 0.04;
  const double expo1 = 0.2 - beta * 0.75;
  double facold = 1e-4;
  double t = t0;
  bool last_rejected = false;
  int steps = 0;
  const double min_step = 1e-14 * std::max(1.0, std::abs(t0) + std::abs(t1));

  while (dir * (t1 - t) > 0.0) {
    if (++steps > settings.max_steps) {
      throw StepFailure("maximum number of integration steps exceeded");
    }
    bool last = false;
    if (h >= std::abs(t1 - t) * (1.0 - 1e-12)) {
      h = std::abs(t1 - t);
      last = true;
    }
    if (h < min_step) {
      throw StepFailure("step size underflow at t = " + std::to_string(t));
    }
    const double hs = dir * h;
    const Vec k2 = rhs(t + s2 * hs, axpy(y, hs, {{a21, &k1}}));
    const Vec k3 = rhs(t + s3 * hs, axpy(y, hs, {{a31, &k1}, {a32, &k2}}));
    const Vec k4 = rhs(t + s4 * hs, axpy(y, hs, {{a41, &k1}, {a42, &k2}, {a43, &k3}}));
    const Vec k5 = rhs(t + s5 * hs, axpy(y, hs, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}));
    const Vec k6 =
        rhs(t + hs, axpy(y, hs, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}));
    const Vec ynew =
        axpy(y, hs, {{a71, &k1}, {a73, &k3}, {a74, &k4}, {a75, &k5}, {a76, &k6}});
    const double tnew = last ? t1 : t + hs;
    const Vec k7 = rhs(tnew, ynew);

    double err = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double ei = value(hs * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] +
                                    e6 * k6[i] + e7 * k7[i]));
      const double sk =
          atol + rtol * std::max(std::abs(value(y[i])), std::abs(value(ynew[i])));
      err += (ei / sk) * (ei / sk);
    }
    err = std::sqrt(err / N);
    if (!std::isfinite(err)) {
      h *= 0.1;
      last_rejected = true;
      continue;
    }
    const double fac11 = std::pow(err, expo1);
    double fac = fac11 / std::pow(facold, beta);
    fac = std::clamp(fac / 0.9, 1.0 / 10.0, 1.0 / 0.2);
    double hnew = h / fac;

    if (err <= 1.0) {
      facold = std::max(err, 1e-4);
      if (dense) {
        typename Trajectory<N>::Segment seg;
        seg.t0 = t;
        seg.h = hs;
        for (std::size_t i = 0; i < N; ++i) {
          const double y0v = value(y[i]);
          const double ydiff = value(ynew[i]) - y0v;
          const double bspl = hs * value(k1[i]) - ydiff;
          seg.coeff[0][i] = y0v;
          seg.coeff[1][i] = ydiff;
          seg.coeff[2][i] = bspl;
          seg.coeff[3][i] = ydiff - hs * value(k7[i]) - bspl;
          seg.coeff[4][i] = hs * (d1 * value(k1[i]) + d3 * value(k3[i]) + d4 * value(k4[i]) +
                                  d5 * value(k5[i]) + d6 * value(k6[i]) + d7 * value(k7[i]));
        }
        std::array<double, N> yv;
        for (std::size_t i = 0; i < N; ++i) yv[i] = value(ynew[i]);
        dense->push(tnew, yv, seg);
      }
      y = ynew;
      k1 = k7;
      t = tnew;
      observer(t, y);
      if (last_rejected) hnew = std::min(hnew, h);
      last_rejected = false;
      h = std::min(hnew, settings.max_step);
    } else {
      hnew = h / std::min(1.0 / 0.2, fac11 / 0.9);
      last_rejected = true;
      h = hnew;
    }
  }
  return y;
}

template <typename T, std::size_t N, typename Rhs>
std::array<T, N> integrate(const Rhs& rhs, const std::array<T, N>& y, double t0, double t1,
                           const IntegratorSettings& settings, Trajectory<N>* dense = nullptr) {
  return integrate(rhs, y, t0, t1, settings, dense, [](double, const std::array<T, N>&) {});
}

}  // namespace climb
