#pragma once
// Helpers shared by the unit tests and the acceptance runner.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "symrel/encoder.hpp"
#include "symrel/metric.hpp"
#include "symrel/random.hpp"

namespace symrel::testing {

inline ComplexVector random_complex(Rng& rng, std::size_t d, double lo = -1.0, double hi = 1.0) {
  std::vector<Complex> v(d);
  for (auto& c : v) c = {rng.uniform(lo, hi), rng.uniform(lo, hi)};
  return ComplexVector(std::move(v));
}

// Components bounded away from zero modulus.
inline ComplexVector random_nonzero(Rng& rng, std::size_t d) {
  std::vector<Complex> v(d);
  for (auto& c : v) c = std::polar(rng.uniform(0.2, 2.0), rng.uniform(-kPi, kPi));
  return ComplexVector(std::move(v));
}

inline PhaseVector random_phases(Rng& rng, std::size_t d) {
  std::vector<double> t(d);
  for (auto& x : t) x = rng.uniform(-kPi, kPi);
  return PhaseVector(std::move(t));
}

inline std::vector<TokenId> random_tokens(Rng& rng, std::size_t n, std::size_t vocab) {
  std::vector<TokenId> t(n);
  for (auto& x : t) x = static_cast<TokenId>(2 + rng.below(vocab - 2));  // no specials
  return t;
}

// Relative error with a floor so near-zero gradients compare absolutely.
inline double rel_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Central finite differences of f over every entry of the given tensors,
// compared with the analytic gradients. Returns the worst relative error.
inline double worst_fd_error(const std::vector<std::span<double>>& params,
                             const std::vector<std::span<const double>>& analytic,
                             const std::function<double()>& f, double step = 1e-5) {
  double worst = 0.0;
  for (std::size_t t = 0; t < params.size(); ++t) {
    for (std::size_t i = 0; i < params[t].size(); ++i) {
      const double saved = params[t][i];
      params[t][i] = saved + step;
      const double up = f();
      params[t][i] = saved - step;
      const double down = f();
      params[t][i] = saved;
      worst = std::max(worst, rel_error((up - down) / (2 * step), analytic[t][i]));
    }
  }
  return worst;
}

}  // namespace symrel::testing
