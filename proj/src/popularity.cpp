#include "fogpop/popularity.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

#include "fogpop/errors.hpp"

namespace fogpop {

ActivityProfile activity_levels(const FapRequests& scope) {
  ActivityProfile out;
  out.users.assign(scope.users().begin(), scope.users().end());
  out.request_counts.resize(scope.user_count());
  std::size_t total = 0;
  for (std::size_t u = 0; u < scope.user_count(); ++u) {
    out.request_counts[u] = scope.request_count(u);
    total += out.request_counts[u];
  }
  if (total == 0) throw ValidationError("F-AP has no training requests");
  out.levels.resize(out.users.size());
  const double inv = 1.0 / static_cast<double>(total);
  for (std::size_t u = 0; u < out.users.size(); ++u) {
    out.levels[u] = static_cast<double>(out.request_counts[u]) * inv;
  }
  return out;
}

std::vector<double> local_popularity(const DcnnModel& model, const FapFeatures& features,
                                     const ActivityProfile& activity) {
  if (activity.users != features.users) {
    throw ValidationError("activity profile and features cover different users");
  }
  const std::size_t contents = features.content_features.rows;
  std::vector<std::vector<double>> item_latent(contents);
  for (std::size_t i = 0; i < contents; ++i) {
    item_latent[i] = transform(model, Channel::item, features.content_features.row(i));
  }
  std::vector<double> p(contents, 0.0);
  for (std::size_t u = 0; u < activity.users.size(); ++u) {
    const double s = activity.levels[u];
    if (s == 0.0) continue;
    const auto a = transform(model, Channel::user, features.user_features.row(u));
    for (std::size_t i = 0; i < contents; ++i) p[i] += s * latent_probability(a, item_latent[i]);
  }
  return p;
}

Distribution normalize(std::span<const double> values) {
  Distribution out{{values.begin(), values.end()}, false};
  double sum = 0.0;
  for (const double v : values) {
    if (v < 0.0) throw ValidationError("cannot normalize negative scores");
    sum += v;
  }
  if (sum > 0.0) {
    out.defined = true;
    for (auto& v : out.values) v /= sum;
  } else {
    std::fill(out.values.begin(), out.values.end(), 0.0);
  }
  return out;
}

std::vector<double> integrate(const Distribution& local, const Distribution& mobile,
                              double mobile_weight) {
  if (!(mobile_weight >= 0.0 && mobile_weight <= 1.0)) {
    throw ValidationError("mobile weight outside [0, 1]");
  }
  if (!local.defined && !mobile.defined) throw ValidationError("F-AP has no popularity signal");
  if (!mobile.defined) return local.values;
  if (!local.defined) return mobile.values;
  if (local.values.size() != mobile.values.size()) {
    throw ValidationError("popularity length mismatch");
  }
  if (mobile_weight == 0.0) return local.values;
  if (mobile_weight == 1.0) return mobile.values;
  std::vector<double> out(local.values.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (1.0 - mobile_weight) * local.values[i] + mobile_weight * mobile.values[i];
  }
  return out;
}

double mobile_weight(std::size_t mobile_count, std::size_t local_count) {
  const std::size_t total = mobile_count + local_count;
  return total == 0 ? 0.0 : static_cast<double>(mobile_count) / static_cast<double>(total);
}

CacheDecision select_cache(std::span<const double> scores, std::size_t capacity) {
  CacheDecision out;
  out.psi.assign(scores.size(), 0);
  const std::size_t k = std::min(capacity, scores.size());
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
                    });
  out.cached.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(out.cached.begin(), out.cached.end());
  for (const auto i : out.cached) out.psi[i] = 1;
  return out;
}

PopularityTable build_popularity_table(std::size_t fap, std::size_t window,
                                       std::span<const double> local_raw,
                                       const MobilePopularity& mobile, std::size_t mobile_count,
                                       std::size_t local_count) {
  PopularityTable t;
  t.fap = fap;
  t.window = window;
  const auto local = normalize(local_raw);
  Distribution mob{mobile.values, false};
  if (mobile.defined) mob = normalize(mobile.values);
  t.w = mobile_weight(mobile_count, local_count);
  t.integrated = integrate(local, mob, t.w);
  t.local = local.values;
  t.mobile = mob.values;
  t.local_defined = local.defined;
  t.mobile_defined = mob.defined;
  return t;
}

void write_popularity_header(std::ostream& out) {
  out << "fap,window,content,local,mobile,integrated,cached\n";
}

void write_popularity_rows(std::ostream& out, const PopularityTable& table,
                           const CacheDecision& cache, const Library& library) {
  for (std::size_t i = 0; i < table.integrated.size(); ++i) {
    out << table.fap + 1 << ',' << table.window + 1 << ',' << raw(library.id(i)) << ','
        << table.local[i] << ',' << table.mobile[i] << ',' << table.integrated[i] << ','
        << (cache.psi[i] ? "true" : "false") << '\n';
  }
}

}  // namespace fogpop
