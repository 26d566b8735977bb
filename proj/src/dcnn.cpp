#include "fogpop/dcnn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "fogpop/errors.hpp"
#include "fogpop/rng.hpp"

namespace fogpop {

namespace {

double sigmoid(double s) {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

struct ChannelCache {
  std::vector<std::vector<double>> act;  // act[0] = input, act[k] = output of layer k
  std::vector<double> delta;
  std::vector<double> delta_prev;
};

struct Workspace {
  ChannelCache user;
  ChannelCache item;
};

void forward(const DcnnModel& model, Channel channel, std::span<const double> input,
             ChannelCache& cache) {
  const auto layers = model.layers(channel);
  if (input.size() != layers.front().in) {
    throw ValidationError("input dimension " + std::to_string(input.size()) + " != channel input " +
                          std::to_string(layers.front().in));
  }
  const auto theta = model.parameters();
  cache.act.resize(layers.size() + 1);
  cache.act[0].assign(input.begin(), input.end());
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& L = layers[k];
    const double* w = theta.data() + L.offset;
    const double* b = w + L.in * L.out;
    const double* a = cache.act[k].data();
    auto& z = cache.act[k + 1];
    z.resize(L.out);
    const bool hidden = k + 1 < layers.size();
    for (std::size_t o = 0; o < L.out; ++o) {
      const double* row = w + o * L.in;
      double s = b[o];
      for (std::size_t i = 0; i < L.in; ++i) s += row[i] * a[i];
      z[o] = hidden ? std::max(s, 0.0) : s;
    }
  }
}

// Adds d(loss)/d(theta) for one channel given d(loss)/d(output) in cache.delta.
void backward(const DcnnModel& model, Channel channel, ChannelCache& cache, double* grad) {
  const auto layers = model.layers(channel);
  const auto theta = model.parameters();
  for (std::size_t k = layers.size(); k-- > 0;) {
    const auto& L = layers[k];
    const double* w = theta.data() + L.offset;
    double* gw = grad + L.offset;
    double* gb = gw + L.in * L.out;
    const double* a = cache.act[k].data();
    const double* z = cache.act[k + 1].data();
    if (k + 1 < layers.size()) {
      for (std::size_t o = 0; o < L.out; ++o) {
        if (!(z[o] > 0.0)) cache.delta[o] = 0.0;
      }
    }
    for (std::size_t o = 0; o < L.out; ++o) {
      const double d = cache.delta[o];
      if (d == 0.0) continue;
      double* grow = gw + o * L.in;
      for (std::size_t i = 0; i < L.in; ++i) grow[i] += d * a[i];
      gb[o] += d;
    }
    if (k == 0) break;
    cache.delta_prev.assign(L.in, 0.0);
    for (std::size_t o = 0; o < L.out; ++o) {
      const double d = cache.delta[o];
      if (d == 0.0) continue;
      const double* row = w + o * L.in;
      for (std::size_t i = 0; i < L.in; ++i) cache.delta_prev[i] += row[i] * d;
    }
    std::swap(cache.delta, cache.delta_prev);
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

// Forward + backward for one sample; adds the gradient to `grad` and returns the loss.
double accumulate(const DcnnModel& model, std::span<const double> x, std::span<const double> chi,
                  int y, double* grad, Workspace& ws) {
  forward(model, Channel::user, x, ws.user);
  forward(model, Channel::item, chi, ws.item);
  const auto& a = ws.user.act.back();
  const auto& b = ws.item.act.back();
  const double p = sigmoid(dot(a, b));
  const double g = p - static_cast<double>(y);
  ws.user.delta.resize(a.size());
  ws.item.delta.resize(b.size());
  for (std::size_t h = 0; h < a.size(); ++h) {
    ws.user.delta[h] = g * b[h];
    ws.item.delta[h] = g * a[h];
  }
  backward(model, Channel::user, ws.user, grad);
  backward(model, Channel::item, ws.item, grad);
  return bce_loss(p, y);
}

void check_finite(std::span<const double> v, const char* what) {
  for (const double x : v) {
    if (!std::isfinite(x)) throw NumericError(std::string("non-finite value in ") + what);
  }
}

}  // namespace

std::size_t ShapeSpec::parameter_count() const {
  std::size_t n = 0;
  for (const auto* dims : {&user_layers, &item_layers}) {
    for (std::size_t k = 1; k < dims->size(); ++k) n += ((*dims)[k - 1] + 1) * (*dims)[k];
  }
  return n;
}

ShapeSpec make_shape(std::size_t d_user, std::size_t d_item, std::span<const std::size_t> hidden,
                     std::size_t latent) {
  if (latent == 0) throw ConfigError("latent dimension H must be positive");
  if (hidden.empty()) throw ConfigError("at least one hidden layer is required");
  if (d_user == 0 || d_item == 0) throw ConfigError("input dimensions must be positive");
  ShapeSpec s;
  s.user_layers.push_back(d_user);
  s.item_layers.push_back(d_item);
  for (const auto h : hidden) {
    if (h == 0) throw ConfigError("hidden layer width must be positive");
    s.user_layers.push_back(h);
    s.item_layers.push_back(h);
  }
  s.user_layers.push_back(latent);
  s.item_layers.push_back(latent);
  return s;
}

DcnnModel::DcnnModel(ShapeSpec shape) : shape_(std::move(shape)) {
  if (shape_.user_layers.size() < 2 || shape_.item_layers.size() < 2) {
    throw ValidationError("each channel needs at least one layer");
  }
  if (shape_.user_layers.back() != shape_.item_layers.back()) {
    throw ValidationError("channels must share the latent dimension");
  }
  std::size_t offset = 0;
  for (auto [dims, out] : {std::pair{&shape_.user_layers, &user_layers_},
                           std::pair{&shape_.item_layers, &item_layers_}}) {
    for (std::size_t k = 1; k < dims->size(); ++k) {
      const std::size_t in = (*dims)[k - 1];
      const std::size_t o = (*dims)[k];
      if (in == 0 || o == 0) throw ValidationError("layer widths must be positive");
      out->push_back({in, o, offset});
      offset += (in + 1) * o;
    }
  }
  theta_.assign(offset, 0.0);
}

DcnnModel init_model(std::size_t d_user, std::size_t d_item, std::span<const std::size_t> hidden,
                     std::size_t latent, std::uint64_t seed) {
  DcnnModel model(make_shape(d_user, d_item, hidden, latent));
  Rng rng(derive_seed(seed, "init"));
  auto theta = model.parameters();
  for (const auto channel : {Channel::user, Channel::item}) {
    for (const auto& L : model.layers(channel)) {
      const double limit = std::sqrt(6.0 / static_cast<double>(L.in + L.out));
      for (std::size_t k = 0; k < L.in * L.out; ++k) {
        theta[L.offset + k] = rng.uniform(-limit, limit);
      }
    }
  }
  return model;
}

std::vector<double> flatten(const DcnnModel& model) {
  const auto p = model.parameters();
  return {p.begin(), p.end()};
}

DcnnModel unflatten(std::span<const double> theta, const ShapeSpec& shape) {
  DcnnModel model(shape);
  if (theta.size() != model.parameters().size()) {
    throw ValidationError("parameter vector length " + std::to_string(theta.size()) +
                          " != expected " + std::to_string(model.parameters().size()));
  }
  std::copy(theta.begin(), theta.end(), model.parameters().begin());
  return model;
}

std::vector<double> transform(const DcnnModel& model, Channel channel,
                              std::span<const double> input) {
  ChannelCache cache;
  forward(model, channel, input, cache);
  return cache.act.back();
}

double predict(const DcnnModel& model, std::span<const double> x, std::span<const double> chi) {
  const auto a = transform(model, Channel::user, x);
  const auto b = transform(model, Channel::item, chi);
  return sigmoid(dot(a, b));
}

double latent_probability(std::span<const double> user_latent,
                          std::span<const double> item_latent) {
  return sigmoid(dot(user_latent, item_latent));
}

double bce_loss(double p, int y) {
  const double q = std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
  return y ? -std::log(q) : -std::log(1.0 - q);
}

std::vector<double> backprop(const DcnnModel& model, std::span<const double> x,
                             std::span<const double> chi, int y) {
  std::vector<double> grad(model.parameters().size(), 0.0);
  Workspace ws;
  accumulate(model, x, chi, y, grad.data(), ws);
  return grad;
}

std::vector<double> batch_gradient(const DcnnModel& model, std::span<const TrainingSample> batch) {
  std::vector<double> grad(model.parameters().size(), 0.0);
  if (batch.empty()) return grad;
  Workspace ws;
  for (const auto& s : batch) accumulate(model, s.x, s.chi, s.y, grad.data(), ws);
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (auto& g : grad) g *= scale;
  return grad;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(decay > 0.0 && decay <= 1.0)) throw ConfigError("decay must lie in (0, 1]");
  if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0) || !(adam_beta2 > 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in (0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("Adam epsilon must be positive");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
}

void adam_step(std::span<double> params, std::span<const double> gradient, AdamState& state,
               double learning_rate, const TrainConfig& config) {
  if (params.size() != gradient.size()) throw ValidationError("gradient shape mismatch");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  ++state.step;
  const double b1 = config.adam_beta1;
  const double b2 = config.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double g = gradient[k];
    state.m[k] = b1 * state.m[k] + (1.0 - b1) * g;
    state.v[k] = b2 * state.v[k] + (1.0 - b2) * g * g;
    const double m_hat = state.m[k] / c1;
    const double v_hat = state.v[k] / c2;
    params[k] -= learning_rate * m_hat / (std::sqrt(v_hat) + config.adam_eps);
  }
}

TrainingSet build_training_set(const FapRequests& scope, const FapFeatures& features,
                               std::size_t negative_ratio, std::uint64_t seed) {
  TrainingSet set;
  set.user_features = features.user_features;
  set.content_features = features.content_features;
  const std::size_t n_items = scope.library_size();
  std::vector<char> requested(n_items, 0);
  std::vector<std::uint32_t> pool;
  for (std::size_t u = 0; u < scope.user_count(); ++u) {
    const auto ratings = scope.user_ratings(u);
    for (const auto& e : ratings) {
      requested[e.index] = 1;
      set.samples.push_back({static_cast<std::uint32_t>(u), e.index, 1});
    }
    if (negative_ratio > 0) {
      pool.clear();
      for (std::uint32_t i = 0; i < n_items; ++i) {
        if (!requested[i]) pool.push_back(i);
      }
      const std::size_t want = std::min(pool.size(), negative_ratio * ratings.size());
      Rng rng(derive_seed(seed, "negatives", u));
      // Partial Fisher-Yates: the first `want` slots form a uniform sample.
      for (std::size_t k = 0; k < want; ++k) {
        const auto j = k + static_cast<std::size_t>(rng.index(pool.size() - k));
        std::swap(pool[k], pool[j]);
        set.samples.push_back({static_cast<std::uint32_t>(u), pool[k], 0});
      }
    }
    for (const auto& e : ratings) requested[e.index] = 0;
  }
  return set;
}

double mean_loss(const DcnnModel& model, const TrainingSet& set) {
  if (set.samples.empty()) return 0.0;
  // Latent features are computed once per row rather than once per sample.
  std::vector<std::vector<double>> user_latent(set.user_features.rows);
  std::vector<std::vector<double>> item_latent(set.content_features.rows);
  double total = 0.0;
  for (const auto& s : set.samples) {
    auto& a = user_latent[s.user];
    if (a.empty()) a = transform(model, Channel::user, set.user_features.row(s.user));
    auto& b = item_latent[s.content];
    if (b.empty()) b = transform(model, Channel::item, set.content_features.row(s.content));
    total += bce_loss(sigmoid(dot(a, b)), s.label);
  }
  return total / static_cast<double>(set.samples.size());
}

LocalTrainResult local_train(const DcnnModel& model, const TrainingSet& set,
                             const TrainConfig& config, std::size_t epoch_offset) {
  config.validate();
  if (set.samples.empty()) throw ValidationError("cannot train on an empty sample set");
  DcnnModel current = model;
  auto params = current.parameters();
  std::vector<double> grad(params.size());
  AdamState state;
  Workspace ws;
  std::vector<std::uint32_t> order(set.samples.size());
  for (std::size_t e = 0; e < config.epochs; ++e) {
    const std::size_t epoch = epoch_offset + e;
    const double lr = config.learning_rate * std::pow(config.decay, static_cast<double>(epoch));
    std::iota(order.begin(), order.end(), 0u);
    Rng rng(derive_seed(config.seed, "epoch", epoch));
    rng.shuffle(std::span<std::uint32_t>(order));
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t k = start; k < end; ++k) {
        const auto& s = set.samples[order[k]];
        accumulate(current, set.user_features.row(s.user), set.content_features.row(s.content),
                   s.label, grad.data(), ws);
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      for (auto& g : grad) g *= scale;
      if (config.optimizer == Optimizer::adam) {
        adam_step(params, grad, state, lr, config);
      } else {
        for (std::size_t k = 0; k < params.size(); ++k) params[k] -= lr * grad[k];
      }
    }
  }
  check_finite(params, "local training parameters");

  const auto start = model.parameters();
  LocalTrainResult result{model, std::vector<double>(params.size())};
  auto out = result.model.parameters();
  for (std::size_t k = 0; k < params.size(); ++k) {
    result.delta[k] = params[k] - start[k];
    out[k] = start[k] + result.delta[k];
  }
  return result;
}

void write_checkpoint(std::ostream& out, const DcnnModel& model) {
  out << "fogpop-dcnn 1\nuser_layers";
  for (const auto d : model.shape().user_layers) out << ' ' << d;
  out << "\nitem_layers";
  for (const auto d : model.shape().item_layers) out << ' ' << d;
  out << "\nparameters " << model.parameters().size() << '\n';
  char buf[64];
  for (const double x : model.parameters()) {
    std::snprintf(buf, sizeof buf, "%a\n", x);
    out << buf;
  }
}

DcnnModel read_checkpoint(std::istream& in) {
  std::string line;
  const auto next_line = [&](const char* what) {
    if (!std::getline(in, line)) throw ValidationError(std::string("checkpoint truncated at ") + what);
  };
  next_line("header");
  if (line != "fogpop-dcnn 1") throw ValidationError("unsupported checkpoint header '" + line + "'");
  const auto read_dims = [&](const char* key) {
    next_line(key);
    std::istringstream ss(line);
    std::string k;
    ss >> k;
    if (k != key) throw ValidationError(std::string("checkpoint expected ") + key);
    std::vector<std::size_t> dims;
    for (std::size_t d; ss >> d;) dims.push_back(d);
    return dims;
  };
  ShapeSpec shape;
  shape.user_layers = read_dims("user_layers");
  shape.item_layers = read_dims("item_layers");
  next_line("parameters");
  std::size_t count = 0;
  if (std::sscanf(line.c_str(), "parameters %zu", &count) != 1) {
    throw ValidationError("checkpoint expected parameter count");
  }
  std::vector<double> theta;
  theta.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    next_line("parameter");
    char* end = nullptr;
    const double x = std::strtod(line.c_str(), &end);
    if (end == line.c_str()) throw ValidationError("checkpoint has a malformed parameter");
    theta.push_back(x);
  }
  return unflatten(theta, shape);
}

}  // namespace fogpop
