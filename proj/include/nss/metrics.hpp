#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "nss/perceptron.hpp"

namespace nss {

inline constexpr double kZ99 = 2.5758293035489004;

// Fraction of positions where the two vectors agree.
template <class A, class B>
double overlap(std::span<const A> x, std::span<const B> y) {
  if (x.size() != y.size()) throw std::invalid_argument("overlap: size mismatch");
  if (x.empty()) return 0.0;
  std::size_t same = 0;
  for (std::size_t i = 0; i < x.size(); ++i) same += x[i] == y[i] ? 1 : 0;
  return static_cast<double>(same) / static_cast<double>(x.size());
}

inline double overlap(const std::vector<int>& x, const std::vector<int>& y) {
  return overlap<int, int>(std::span<const int>(x), std::span<const int>(y));
}

inline double mean_overlap_from_marginals(std::span<const BinaryDistribution> chi) {
  if (chi.empty()) return 0.0;
  double s = 0.0;
  for (const auto& c : chi) s += std::max(c.plus, c.minus);
  return s / static_cast<double>(chi.size());
}

// (O - O_rnd) / (1 - O_rnd). A baseline that is already perfect leaves
// nothing to rescale: 1 if O is perfect too, 0 otherwise.
inline double rescaled_overlap(double o, double o_rnd) {
  if (o_rnd >= 1.0) return o >= 1.0 ? 1.0 : 0.0;
  return (o - o_rnd) / (1.0 - o_rnd);
}

struct SquaredErrors {
  double se = 0.0;
  double mse = 0.0;
  double r_se = std::numeric_limits<double>::quiet_NaN();
  double r_mse = std::numeric_limits<double>::quiet_NaN();
};

inline double squared_error(std::span<const double> t_hat, std::span<const int> t_true) {
  if (t_hat.size() != t_true.size()) throw std::invalid_argument("squared_error: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < t_hat.size(); ++i) {
    const double d = t_hat[i] - t_true[i];
    s += d * d;
  }
  return t_hat.empty() ? 0.0 : s / static_cast<double>(t_hat.size());
}

// Posterior expected squared error of t_hat under beliefs (N x K, index t+1).
inline double posterior_squared_error(std::span<const double> t_hat, std::span<const double> beliefs, int K) {
  const std::size_t n = t_hat.size();
  if (beliefs.size() != n * static_cast<std::size_t>(K)) throw std::invalid_argument("mse: belief size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (int k = 0; k < K; ++k) {
      const double d = t_hat[i] - (k - 1);
      s += beliefs[i * K + k] * d * d;
    }
  return n ? s / static_cast<double>(n) : 0.0;
}

// 1 - E/E_rnd. For SE, E_rnd is the no-observation estimator against the
// truth; for MSE it is that estimator under the same posterior beliefs.
inline double rescaled_error(double e, double e_rnd) {
  if (e_rnd <= 0.0) return e <= 0.0 ? 1.0 : 0.0;
  return 1.0 - e / e_rnd;
}

inline SquaredErrors squared_error_metrics(std::span<const double> t_hat, std::span<const int> t_true,
                                           std::span<const double> beliefs, int K,
                                           std::span<const double> t_hat_rnd = {}) {
  SquaredErrors out;
  out.se = squared_error(t_hat, t_true);
  out.mse = posterior_squared_error(t_hat, beliefs, K);
  if (!t_hat_rnd.empty()) {
    out.r_se = rescaled_error(out.se, squared_error(t_hat_rnd, t_true));
    out.r_mse = rescaled_error(out.mse, posterior_squared_error(t_hat_rnd, beliefs, K));
  }
  return out;
}

// Mean, standard error and normal 99% half-width over seeds.
struct SampleStats {
  std::size_t count = 0;
  double mean = std::numeric_limits<double>::quiet_NaN();
  double sd = std::numeric_limits<double>::quiet_NaN();
  double se = std::numeric_limits<double>::quiet_NaN();
  double ci99 = std::numeric_limits<double>::quiet_NaN();

  double lo() const { return mean - ci99; }
  double hi() const { return mean + ci99; }
};

inline SampleStats sample_stats(std::span<const double> xs) {
  SampleStats s;
  std::vector<double> v;
  v.reserve(xs.size());
  for (double x : xs)
    if (std::isfinite(x)) v.push_back(x);
  s.count = v.size();
  if (v.empty()) return s;
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  if (v.size() < 2) {
    s.sd = s.se = s.ci99 = 0.0;
    return s;
  }
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  s.se = s.sd / std::sqrt(static_cast<double>(v.size()));
  s.ci99 = kZ99 * s.se;
  return s;
}

inline bool intervals_overlap(const SampleStats& a, const SampleStats& b) {
  return a.lo() <= b.hi() && b.lo() <= a.hi();
}

// O - MO across seeds.
inline SampleStats nishimori_gap(std::span<const double> o, std::span<const double> mo) {
  if (o.size() != mo.size()) throw std::invalid_argument("nishimori_gap: size mismatch");
  std::vector<double> d(o.size());
  for (std::size_t k = 0; k < o.size(); ++k) d[k] = o[k] - mo[k];
  return sample_stats(d);
}

// Runs where the posterior claims certainty but the estimate is wrong
// somewhere.
inline bool is_atypical(double o, double mo, double eps = 1e-6) { return mo > 1.0 - eps && o < 1.0; }

}  // namespace nss
