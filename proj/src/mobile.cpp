#include "fogpop/mobile.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fogpop/dcnn.hpp"
#include "fogpop/errors.hpp"
#include "fogpop/rng.hpp"

namespace fogpop {

namespace {

double sigmoid(double s) {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

void run_passes(FtrlState& state, std::vector<double>& weights,
                std::span<const MobileSample> samples, const FtrlConfig& config,
                std::uint64_t seed) {
  std::vector<std::size_t> order(samples.size());
  for (std::size_t pass = 0; pass < config.passes; ++pass) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, "ftrl-pass", pass));
    rng.shuffle(std::span<std::size_t>(order));
    for (const auto k : order) ftrl_update(state, weights, samples[k].zeta, samples[k].y, config);
  }
}

}  // namespace

void FtrlConfig::validate() const {
  if (!(alpha > 0.0) || !(beta > 0.0)) throw ConfigError("FTRL alpha and beta must be positive");
  if (!(l1 >= 0.0) || !(l2 >= 0.0)) throw ConfigError("FTRL regularizers must be non-negative");
}

double predict_preference(std::span<const double> preference, std::span<const double> zeta) {
  if (preference.size() != zeta.size()) throw ValidationError("preference dimension mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < zeta.size(); ++k) s += preference[k] * zeta[k];
  return sigmoid(s);
}

double preference_nll(std::span<const double> preference, std::span<const MobileSample> samples) {
  if (samples.empty()) return 0.0;
  double total = 0.0;
  for (const auto& s : samples) total += bce_loss(predict_preference(preference, s.zeta), s.y);
  return total / static_cast<double>(samples.size());
}

void ftrl_update(FtrlState& state, std::vector<double>& weights, std::span<const double> zeta,
                 int y, const FtrlConfig& config) {
  const std::size_t dim = zeta.size();
  if (weights.size() != dim || state.z.size() != dim || state.n.size() != dim) {
    throw ValidationError("FTRL state dimension mismatch");
  }
  const double residual = predict_preference(weights, zeta) - static_cast<double>(y);
  for (std::size_t i = 0; i < dim; ++i) {
    if (zeta[i] == 0.0) continue;
    const double g = residual * zeta[i];
    const double n_new = state.n[i] + g * g;
    const double sigma = (std::sqrt(n_new) - std::sqrt(state.n[i])) / config.alpha;
    state.z[i] += g - sigma * weights[i];
    state.n[i] = n_new;
    const double z = state.z[i];
    if (std::abs(z) <= config.l1) {
      weights[i] = 0.0;
    } else {
      const double sign = z < 0.0 ? -1.0 : 1.0;
      weights[i] = -(z - sign * config.l1) /
                   ((config.beta + std::sqrt(state.n[i])) / config.alpha + config.l2);
    }
  }
}

PreferenceVector train_preference(std::span<const MobileSample> samples, const FtrlConfig& config,
                                  std::uint64_t seed) {
  config.validate();
  if (samples.empty()) throw ValidationError("cannot learn a preference from no samples");
  const std::size_t dim = samples.front().zeta.size();
  FtrlState state(dim);
  PreferenceVector weights(dim, 0.0);
  run_passes(state, weights, samples, config, seed);
  return weights;
}

PreferenceVector retrain_if_stale(const PreferenceVector& preference,
                                  std::span<const MobileSample> recent, double threshold,
                                  const FtrlConfig& config, std::uint64_t seed) {
  if (recent.empty() || !(preference_nll(preference, recent) > threshold)) return preference;
  config.validate();
  // Warm start: with n = 0, choose z so the closed-form weight equals a_u.
  FtrlState state(preference.size());
  const double c = config.beta / config.alpha + config.l2;
  for (std::size_t i = 0; i < preference.size(); ++i) {
    const double w = preference[i];
    if (w != 0.0) state.z[i] = -w * c - (w < 0.0 ? -1.0 : 1.0) * config.l1;
  }
  PreferenceVector weights = preference;
  run_passes(state, weights, recent, config, seed);
  return weights;
}

std::vector<MobileSample> build_mobile_samples(std::span<const std::size_t> requested,
                                               const Library& library,
                                               std::size_t negative_ratio, std::uint64_t seed) {
  std::vector<char> mark(library.size(), 0);
  std::vector<MobileSample> out;
  for (const auto i : requested) {
    if (mark[i]) continue;
    mark[i] = 1;
    const auto zeta = library.info(i);
    out.push_back({{zeta.begin(), zeta.end()}, 1});
  }
  const std::size_t positives = out.size();
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < library.size(); ++i) {
    if (!mark[i]) pool.push_back(i);
  }
  const std::size_t want = std::min(pool.size(), negative_ratio * positives);
  Rng rng(derive_seed(seed, "mobile-negatives"));
  for (std::size_t k = 0; k < want; ++k) {
    const auto j = k + static_cast<std::size_t>(rng.index(pool.size() - k));
    std::swap(pool[k], pool[j]);
    const auto zeta = library.info(pool[k]);
    out.push_back({{zeta.begin(), zeta.end()}, 0});
  }
  return out;
}

MobileReport make_report(std::size_t fap, std::size_t window, UserId user,
                         const PreferenceVector& preference, const Library& library) {
  MobileReport r{fap, window, user, std::vector<double>(library.size())};
  for (std::size_t i = 0; i < library.size(); ++i) {
    r.q_hat[i] = predict_preference(preference, library.info(i));
  }
  return r;
}

MobilePopularity mobile_popularity(std::span<const MobileReport> reports,
                                   std::size_t library_size) {
  MobilePopularity out{std::vector<double>(library_size, 0.0), !reports.empty()};
  if (reports.empty()) return out;
  for (const auto& r : reports) {
    if (r.q_hat.size() != library_size) throw ValidationError("mobile report length mismatch");
    for (std::size_t i = 0; i < library_size; ++i) out.values[i] += r.q_hat[i];
  }
  const double scale = 1.0 / static_cast<double>(reports.size());
  for (auto& v : out.values) v *= scale;
  return out;
}

}  // namespace fogpop
