#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "fogpop/features.hpp"

namespace fogpop {

// Layer widths of both channels, input first, latent dimension H last.
struct ShapeSpec {
  std::vector<std::size_t> user_layers;
  std::vector<std::size_t> item_layers;

  std::size_t parameter_count() const;
  friend bool operator==(const ShapeSpec&, const ShapeSpec&) = default;
};

ShapeSpec make_shape(std::size_t d_user, std::size_t d_item, std::span<const std::size_t> hidden,
                     std::size_t latent);

enum class Channel { user, item };

// Dual-channel network: two MLPs (ReLU hidden layers, identity output) whose
// H-dimensional outputs meet in a sigmoid inner product. Parameters live in one
// flat vector in canonical order: user channel layers, then item channel
// layers; within a layer the weight matrix (row-major, out x in) then bias.
class DcnnModel {
 public:
  struct Layer {
    std::size_t in;
    std::size_t out;
    std::size_t offset;  // of the weight matrix; bias follows at offset + in * out
  };

  explicit DcnnModel(ShapeSpec shape);

  const ShapeSpec& shape() const { return shape_; }
  std::span<const double> parameters() const { return theta_; }
  std::span<double> parameters() { return theta_; }
  std::span<const Layer> layers(Channel channel) const {
    return channel == Channel::user ? std::span<const Layer>(user_layers_)
                                    : std::span<const Layer>(item_layers_);
  }

  friend bool operator==(const DcnnModel& a, const DcnnModel& b) {
    return a.shape_ == b.shape_ && a.theta_ == b.theta_;
  }

 private:
  ShapeSpec shape_;
  std::vector<Layer> user_layers_;
  std::vector<Layer> item_layers_;
  std::vector<double> theta_;
};

// Glorot-uniform weights, zero biases.
DcnnModel init_model(std::size_t d_user, std::size_t d_item, std::span<const std::size_t> hidden,
                     std::size_t latent, std::uint64_t seed);

std::vector<double> flatten(const DcnnModel& model);
DcnnModel unflatten(std::span<const double> theta, const ShapeSpec& shape);

// Latent feature of one channel.
std::vector<double> transform(const DcnnModel& model, Channel channel,
                              std::span<const double> input);

// sigmoid(F_U(x) . F_I(chi)).
double predict(const DcnnModel& model, std::span<const double> x, std::span<const double> chi);

// sigmoid of the inner product of two precomputed latent features; equals
// predict() on the inputs they were transformed from.
double latent_probability(std::span<const double> user_latent,
                          std::span<const double> item_latent);

inline constexpr double kProbabilityClamp = 1e-7;

double bce_loss(double p, int y);

struct TrainingSample {
  std::vector<double> x;
  std::vector<double> chi;
  int y = 0;
};

// Gradient of bce_loss(predict(model, x, chi), y) with respect to the flat
// parameter vector.
std::vector<double> backprop(const DcnnModel& model, std::span<const double> x,
                             std::span<const double> chi, int y);

// Mean gradient over a batch.
std::vector<double> batch_gradient(const DcnnModel& model, std::span<const TrainingSample> batch);

enum class Optimizer { adam, sgd };

struct TrainConfig {
  Optimizer optimizer = Optimizer::adam;
  double learning_rate = 1e-3;
  double decay = 0.97;  // per epoch
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t epochs = 1;
  std::size_t batch_size = 64;
  std::size_t negative_ratio = 4;
  std::uint64_t seed = 0;

  void validate() const;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
};

// One bias-corrected Adam update with the given (already decayed) learning rate.
void adam_step(std::span<double> params, std::span<const double> gradient, AdamState& state,
               double learning_rate, const TrainConfig& config);

// Compact training set: samples reference rows of the owned feature matrices.
struct TrainingSet {
  struct Sample {
    std::uint32_t user;
    std::uint32_t content;
    std::uint8_t label;
  };

  FeatureMatrix user_features;
  FeatureMatrix content_features;
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
};

// One positive per distinct (user, content) request and `negative_ratio`
// negatives per positive, drawn without replacement from the user's
// non-requested contents.
TrainingSet build_training_set(const FapRequests& scope, const FapFeatures& features,
                               std::size_t negative_ratio, std::uint64_t seed);

double mean_loss(const DcnnModel& model, const TrainingSet& set);

struct LocalTrainResult {
  DcnnModel model;
  std::vector<double> delta;  // model = start + delta, exactly
};

// `epochs` shuffled mini-batch passes. Epoch e of this call uses learning rate
// lr * decay^(epoch_offset + e); optimizer state starts fresh on every call.
LocalTrainResult local_train(const DcnnModel& model, const TrainingSet& set,
                             const TrainConfig& config, std::size_t epoch_offset = 0);

// Text checkpoint: header, both layer lists and hexadecimal floats, so a
// write/read round trip is lossless.
void write_checkpoint(std::ostream& out, const DcnnModel& model);
DcnnModel read_checkpoint(std::istream& in);

}  // namespace fogpop
