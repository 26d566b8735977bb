#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fogpop/dataset.hpp"

namespace fogpop {

// Preference vector a_u over content-information dimensions.
using PreferenceVector = std::vector<double>;

struct FtrlConfig {
  double alpha = 0.1;
  double beta = 1.0;
  double l1 = 1e-3;
  double l2 = 1e-3;
  std::size_t passes = 1;

  void validate() const;
};

struct FtrlState {
  std::vector<double> z;
  std::vector<double> n;  // non-decreasing

  explicit FtrlState(std::size_t dim = 0) : z(dim, 0.0), n(dim, 0.0) {}
};

struct MobileSample {
  std::vector<double> zeta;
  int y = 0;
};

// sigmoid(a_u . zeta).
double predict_preference(std::span<const double> preference, std::span<const double> zeta);

// Mean negative log-likelihood, probabilities clamped as in bce_loss.
double preference_nll(std::span<const double> preference, std::span<const MobileSample> samples);

// One FTRL-Proximal step on (zeta, y). Coordinates with zeta_i = 0 are untouched.
void ftrl_update(FtrlState& state, std::vector<double>& weights, std::span<const double> zeta,
                 int y, const FtrlConfig& config);

// Shuffled FTRL passes over the samples, starting from zero state.
PreferenceVector train_preference(std::span<const MobileSample> samples, const FtrlConfig& config,
                                  std::uint64_t seed);

// Retrains (warm-started at `preference`) iff the NLL on `recent` exceeds `threshold`.
PreferenceVector retrain_if_stale(const PreferenceVector& preference,
                                  std::span<const MobileSample> recent, double threshold,
                                  const FtrlConfig& config, std::uint64_t seed);

// Positives for each requested library index plus `negative_ratio` negatives
// per positive drawn without replacement from the rest of the library.
std::vector<MobileSample> build_mobile_samples(std::span<const std::size_t> requested,
                                               const Library& library,
                                               std::size_t negative_ratio, std::uint64_t seed);

// The only record a mobile user sends to an F-AP: predicted request
// probabilities over the library.
struct MobileReport {
  std::size_t fap = 0;
  std::size_t window = 0;
  UserId user{};
  std::vector<double> q_hat;
};

MobileReport make_report(std::size_t fap, std::size_t window, UserId user,
                         const PreferenceVector& preference, const Library& library);

struct MobilePopularity {
  std::vector<double> values;
  bool defined = false;  // false when no mobile user is associated
};

// Mean of the reported probabilities; all-zero and undefined for no reports.
MobilePopularity mobile_popularity(std::span<const MobileReport> reports,
                                   std::size_t library_size);

}  // namespace fogpop
