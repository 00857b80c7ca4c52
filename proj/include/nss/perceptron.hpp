#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nss/common.hpp"

namespace nss {

enum class WeightPrior { Gaussian, Rademacher };

inline std::string to_string(WeightPrior w) { return w == WeightPrior::Gaussian ? "gaussian" : "rademacher"; }

inline WeightPrior parse_weight_prior(const std::string& s) {
  if (s == "gaussian" || s == "Gaussian") return WeightPrior::Gaussian;
  if (s == "rademacher" || s == "Rademacher") return WeightPrior::Rademacher;
  throw std::invalid_argument("unknown weight prior '" + s + "'");
}

// Dense row-major N x M matrix of node covariates.
class Covariates {
 public:
  Covariates() = default;
  Covariates(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  double operator()(std::size_t i, std::size_t a) const { return data_[i * cols_ + a]; }
  double& operator()(std::size_t i, std::size_t a) { return data_[i * cols_ + a]; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  // out = F x
  void multiply(std::span<const double> x, std::span<double> out) const {
    for (std::size_t i = 0; i < rows_; ++i) {
      const double* r = data_.data() + i * cols_;
      double s = 0.0;
      for (std::size_t a = 0; a < cols_; ++a) s += r[a] * x[a];
      out[i] = s;
    }
  }

  // out = F^T y
  void multiply_transposed(std::span<const double> y, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < rows_; ++i) {
      const double* r = data_.data() + i * cols_;
      const double yi = y[i];
      if (yi == 0.0) continue;
      for (std::size_t a = 0; a < cols_; ++a) out[a] += r[a] * yi;
    }
  }

  // Same products with every entry squared.
  void multiply_squared(std::span<const double> x, std::span<double> out) const {
    for (std::size_t i = 0; i < rows_; ++i) {
      const double* r = data_.data() + i * cols_;
      double s = 0.0;
      for (std::size_t a = 0; a < cols_; ++a) s += r[a] * r[a] * x[a];
      out[i] = s;
    }
  }

  void multiply_transposed_squared(std::span<const double> y, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < rows_; ++i) {
      const double* r = data_.data() + i * cols_;
      const double yi = y[i];
      if (yi == 0.0) continue;
      for (std::size_t a = 0; a < cols_; ++a) out[a] += r[a] * r[a] * yi;
    }
  }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

struct PerceptronPrior {
  Covariates F;
  std::vector<double> u;  // teacher weights, hidden from inference
  double kappa = 0.0;
  WeightPrior weights = WeightPrior::Gaussian;
  std::uint64_t seed = 0;

  std::size_t n() const noexcept { return F.rows(); }
  std::size_t m() const noexcept { return F.cols(); }
  double alpha() const noexcept { return static_cast<double>(n()) / static_cast<double>(m()); }
};

inline Covariates sample_covariates(std::size_t n, std::size_t m, std::uint64_t seed) {
  Covariates F(n, m);
  rng_t rng = make_rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(m)));
  for (double& x : F.data()) x = gauss(rng);
  return F;
}

inline std::vector<double> sample_weights(std::size_t m, WeightPrior prior, std::uint64_t seed) {
  rng_t rng = make_rng(seed);
  std::vector<double> u(m);
  if (prior == WeightPrior::Gaussian) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (double& x : u) x = gauss(rng);
  } else {
    std::bernoulli_distribution coin(0.5);
    for (double& x : u) x = coin(rng) ? 1.0 : -1.0;
  }
  return u;
}

inline PerceptronPrior make_perceptron_prior(std::size_t n, std::size_t m, double kappa, WeightPrior weights,
                                             std::uint64_t seed) {
  if (n == 0 || m == 0) throw std::invalid_argument("perceptron dimensions must be positive");
  PerceptronPrior p;
  p.F = sample_covariates(n, m, mix_seed(seed, 1));
  p.u = sample_weights(m, weights, mix_seed(seed, 2));
  p.kappa = kappa;
  p.weights = weights;
  p.seed = seed;
  return p;
}

// x0_i = sign(F_i . u - kappa), with sign(0) = +1. -1 marks a source.
inline std::vector<int> sample_sources(const Covariates& F, std::span<const double> u, double kappa) {
  std::vector<double> z(F.rows());
  F.multiply(u, z);
  std::vector<int> x0(F.rows());
  for (std::size_t i = 0; i < z.size(); ++i) x0[i] = z[i] - kappa >= 0.0 ? +1 : -1;
  return x0;
}

inline std::vector<int> sample_sources(const PerceptronPrior& p) { return sample_sources(p.F, p.u, p.kappa); }

// Probability that a node is a source when its preactivation is N(0, 1).
inline double source_density(double kappa) { return 0.5 * std::erfc(-kappa / std::numbers::sqrt2); }

struct BinaryDistribution {
  double plus = 0.5;   // probability of x0 = +1
  double minus = 0.5;  // probability of x0 = -1
};

inline constexpr double kVarianceFloor = 1e-12;
inline constexpr double kBeliefClamp = 1e-12;
inline constexpr double kProbabilityFloor = 1e-300;

// Output channel field: probability of sign(z - kappa) for z ~ N(omega, V).
inline BinaryDistribution eta_field(double omega, double V, double kappa) {
  if (!(V > 0.0)) throw std::invalid_argument("eta_field: V must be positive");
  const double w = (omega - kappa) / std::sqrt(2.0 * V);
  BinaryDistribution eta{0.5 * std::erfc(-w), 0.5 * std::erfc(w)};
  eta.plus = std::max(eta.plus, kProbabilityFloor);
  eta.minus = std::max(eta.minus, kProbabilityFloor);
  return eta;
}

// Output denoiser for the sign channel with the belief nu_plus = P(x0 = +1)
// acting as likelihood.
inline double g_out(double omega, double nu_plus, double V, double kappa) {
  if (!(V > 0.0)) throw std::invalid_argument("g_out: V must be positive");
  const double nu = std::clamp(nu_plus, kBeliefClamp, 1.0 - kBeliefClamp);
  const double w = (omega - kappa) / std::sqrt(2.0 * V);
  // 1 + (2 nu - 1) erf(w), written with complementary error functions
  const double denom = std::max(nu * std::erfc(-w) + (1.0 - nu) * std::erfc(w), 1e-300);
  const double num = 2.0 * (2.0 * nu - 1.0) * std::exp(-w * w) / std::sqrt(2.0 * std::numbers::pi * V);
  return num / denom;
}

struct InputEstimate {
  double mean = 0.0;
  double variance = 1.0;
};

// Posterior mean and variance of a weight under prior * exp(-A u^2 / 2 + B u).
inline InputEstimate f_in(double A, double B, WeightPrior prior) {
  if (prior == WeightPrior::Gaussian) return {B / (A + 1.0), 1.0 / (A + 1.0)};
  const double th = std::tanh(B);
  const double ch = std::cosh(B);
  return {th, std::isfinite(ch) ? 1.0 / (ch * ch) : 0.0};
}

// log of the integral of prior * exp(-A u^2 / 2 + B u).
inline double log_partition_in(double A, double B, WeightPrior prior) {
  if (prior == WeightPrior::Gaussian) return -0.5 * std::log1p(A) + B * B / (2.0 * (1.0 + A));
  return -0.5 * A + log_cosh(B);
}

// E_u log P(u) for the weight prior.
inline double expected_log_prior(WeightPrior prior) {
  if (prior == WeightPrior::Rademacher) return -std::numbers::ln2;
  return -0.5 - 0.5 * std::log(2.0 * std::numbers::pi);
}

// Covariates: text header "N M seed\n" followed by N*M row-major doubles.
inline void write_covariates(std::ostream& os, const Covariates& F, std::uint64_t seed) {
  os << F.rows() << ' ' << F.cols() << ' ' << seed << '\n';
  os.write(reinterpret_cast<const char*>(F.data().data()), static_cast<std::streamsize>(F.data().size() * sizeof(double)));
}

inline Covariates read_covariates(std::istream& is, std::uint64_t* seed = nullptr) {
  std::size_t n = 0, m = 0;
  std::uint64_t s = 0;
  if (!(is >> n >> m >> s)) throw std::runtime_error("covariates: bad header");
  is.get();
  Covariates F(n, m);
  is.read(reinterpret_cast<char*>(F.data().data()), static_cast<std::streamsize>(n * m * sizeof(double)));
  if (!is) throw std::runtime_error("covariates: truncated payload");
  if (seed) *seed = s;
  return F;
}

// Weights: text header "M seed\n" followed by M doubles.
inline void write_weights(std::ostream& os, std::span<const double> u, std::uint64_t seed) {
  os << u.size() << ' ' << seed << '\n';
  os.write(reinterpret_cast<const char*>(u.data()), static_cast<std::streamsize>(u.size() * sizeof(double)));
}

inline std::vector<double> read_weights(std::istream& is) {
  std::size_t m = 0;
  std::uint64_t s = 0;
  if (!(is >> m >> s)) throw std::runtime_error("weights: bad header");
  is.get();
  std::vector<double> u(m);
  is.read(reinterpret_cast<char*>(u.data()), static_cast<std::streamsize>(m * sizeof(double)));
  if (!is) throw std::runtime_error("weights: truncated payload");
  return u;
}

}  // namespace nss
