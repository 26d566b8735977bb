#include "fogpop/dataset.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "fogpop/errors.hpp"

namespace fogpop {

namespace {

constexpr std::array<int, 7> kAgeCodes{1, 18, 25, 35, 45, 50, 56};

constexpr std::array<std::string_view, kContentInfoDim> kGenres{
    "Action",  "Adventure", "Animation", "Children's", "Comedy",  "Crime",
    "Documentary", "Drama", "Fantasy",   "Film-Noir",  "Horror",  "Musical",
    "Mystery", "Romance",   "Sci-Fi",    "Thriller",   "War",     "Western"};

// Calls fn(line_number, line) for every non-blank line; strips a trailing '\r'.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) fn(line_no, line);
    pos = end + 1;
  }
}

std::vector<std::string_view> split_fields(std::string_view line, std::string_view sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t at = line.find(sep, pos);
    if (at == std::string_view::npos) {
      out.push_back(line.substr(pos));
      return out;
    }
    out.push_back(line.substr(pos, at - pos));
    pos = at + sep.size();
  }
}

template <typename Int>
Int parse_int(std::size_t line_no, std::string_view field, std::string_view what) {
  Int value{};
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (field.empty() || ec != std::errc{} || ptr != last) {
    throw ParseError(line_no, "invalid " + std::string(what) + " '" + std::string(field) + "'");
  }
  return value;
}

std::uint32_t parse_id(std::size_t line_no, std::string_view field, std::string_view what) {
  const auto id = parse_int<std::uint32_t>(line_no, field, what);
  if (id == 0) throw ParseError(line_no, std::string(what) + " must be nonzero");
  return id;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::span<const int> movielens_age_codes() { return kAgeCodes; }
std::span<const std::string_view> movielens_genres() { return kGenres; }

InfoVector encode_user_info(std::string_view gender, int age_code, int occupation) {
  InfoVector v(kUserInfoDim, 0.0);
  if (gender == "M") {
    v[0] = 1.0;
  } else if (gender == "F") {
    v[1] = 1.0;
  } else {
    throw ValidationError("unknown gender code '" + std::string(gender) + "'");
  }
  const auto age = std::find(kAgeCodes.begin(), kAgeCodes.end(), age_code);
  if (age == kAgeCodes.end()) {
    throw ValidationError("unknown age code " + std::to_string(age_code));
  }
  v[2 + static_cast<std::size_t>(age - kAgeCodes.begin())] = 1.0;
  if (occupation < 0 || occupation >= kOccupationCount) {
    throw ValidationError("unknown occupation code " + std::to_string(occupation));
  }
  v[2 + kAgeCodes.size() + static_cast<std::size_t>(occupation)] = 1.0;
  return v;
}

InfoVector encode_content_info(std::span<const std::string> genres) {
  if (genres.empty()) throw ValidationError("content must list at least one genre");
  InfoVector v(kContentInfoDim, 0.0);
  for (const auto& g : genres) {
    const auto it = std::find(kGenres.begin(), kGenres.end(), g);
    if (it == kGenres.end()) throw ValidationError("unknown genre '" + g + "'");
    const auto slot = static_cast<std::size_t>(it - kGenres.begin());
    if (v[slot] != 0.0) throw ValidationError("duplicate genre '" + g + "'");
    v[slot] = 1.0;
  }
  return v;
}

void Dataset::validate() const {
  for (const auto& r : requests) {
    if (r.rating < 1 || r.rating > 5) {
      throw ValidationError("rating " + std::to_string(r.rating) + " outside [1,5]");
    }
    if (!users.contains(r.user)) {
      throw ValidationError("request references unknown user " + std::to_string(raw(r.user)));
    }
    if (!contents.contains(r.content)) {
      throw ValidationError("request references unknown content " +
                            std::to_string(raw(r.content)));
    }
  }
}

std::vector<RequestRecord> parse_ratings(std::string_view text) {
  std::vector<RequestRecord> out;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    const auto f = split_fields(line, "::");
    if (f.size() != 4) throw ParseError(line_no, "expected UserID::MovieID::Rating::Timestamp");
    RequestRecord r;
    r.user = UserId{parse_id(line_no, f[0], "user id")};
    r.content = ContentId{parse_id(line_no, f[1], "movie id")};
    r.rating = parse_int<int>(line_no, f[2], "rating");
    r.timestamp = parse_int<std::int64_t>(line_no, f[3], "timestamp");
    if (r.rating < 1 || r.rating > 5) {
      throw ValidationError("line " + std::to_string(line_no) + ": rating " +
                            std::to_string(r.rating) + " outside [1,5]");
    }
    if (r.timestamp < 0) throw ParseError(line_no, "negative timestamp");
    out.push_back(r);
  });
  return out;
}

Dataset parse_movielens(std::string_view ratings_text, std::string_view users_text,
                        std::string_view movies_text) {
  Dataset ds;
  for_each_line(users_text, [&](std::size_t line_no, std::string_view line) {
    const auto f = split_fields(line, "::");
    if (f.size() != 5) throw ParseError(line_no, "expected UserID::Gender::Age::Occupation::Zip");
    UserInfo u;
    const UserId id{parse_id(line_no, f[0], "user id")};
    u.gender = std::string(f[1]);
    u.age = parse_int<int>(line_no, f[2], "age");
    u.occupation = parse_int<int>(line_no, f[3], "occupation");
    u.zip = std::string(f[4]);
    try {
      u.info = encode_user_info(u.gender, u.age, u.occupation);
    } catch (const ValidationError& e) {
      throw ValidationError("users line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!ds.users.emplace(id, std::move(u)).second) {
      throw ValidationError("users line " + std::to_string(line_no) + ": duplicate user id");
    }
  });
  for_each_line(movies_text, [&](std::size_t line_no, std::string_view line) {
    const auto f = split_fields(line, "::");
    if (f.size() < 3) throw ParseError(line_no, "expected MovieID::Title::Genres");
    ContentInfo c;
    const ContentId id{parse_id(line_no, f[0], "movie id")};
    // A title containing "::" would split into extra fields; rejoin them.
    std::string title(f[1]);
    for (std::size_t k = 2; k + 1 < f.size(); ++k) title += "::" + std::string(f[k]);
    c.title = std::move(title);
    for (const auto g : split_fields(f.back(), "|")) c.genres.emplace_back(g);
    try {
      c.info = encode_content_info(c.genres);
    } catch (const ValidationError& e) {
      throw ValidationError("movies line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!ds.contents.emplace(id, std::move(c)).second) {
      throw ValidationError("movies line " + std::to_string(line_no) + ": duplicate movie id");
    }
  });
  ds.requests = parse_ratings(ratings_text);
  ds.validate();
  return ds;
}

Dataset load_movielens(const std::filesystem::path& dir) {
  return parse_movielens(read_file(dir / "ratings.dat"), read_file(dir / "users.dat"),
                         read_file(dir / "movies.dat"));
}

std::string format_ratings(std::span<const RequestRecord> requests) {
  std::string out;
  out.reserve(requests.size() * 24);
  for (const auto& r : requests) {
    out += std::to_string(raw(r.user));
    out += "::";
    out += std::to_string(raw(r.content));
    out += "::";
    out += std::to_string(r.rating);
    out += "::";
    out += std::to_string(r.timestamp);
    out += '\n';
  }
  return out;
}

std::string format_users(const Dataset& dataset) {
  std::string out;
  for (const auto& [id, u] : dataset.users) {
    out += std::to_string(raw(id)) + "::" + u.gender + "::" + std::to_string(u.age) +
           "::" + std::to_string(u.occupation) + "::" + u.zip + "\n";
  }
  return out;
}

std::string format_movies(const Dataset& dataset) {
  std::string out;
  for (const auto& [id, c] : dataset.contents) {
    out += std::to_string(raw(id)) + "::" + c.title + "::";
    for (std::size_t k = 0; k < c.genres.size(); ++k) {
      if (k) out += '|';
      out += c.genres[k];
    }
    out += '\n';
  }
  return out;
}

void write_movielens(const Dataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto write = [&](const char* name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + (dir / name).string());
    out << text;
  };
  write("ratings.dat", format_ratings(dataset.requests));
  write("users.dat", format_users(dataset));
  write("movies.dat", format_movies(dataset));
}

TrainTestSplit split_train_test(const Dataset& dataset, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train fraction must lie in (0, 1)");
  }
  std::unordered_map<std::uint32_t, std::vector<std::size_t>> by_user;
  for (std::size_t k = 0; k < dataset.requests.size(); ++k) {
    by_user[raw(dataset.requests[k].user)].push_back(k);
  }
  std::vector<char> in_train(dataset.requests.size(), 1);
  for (auto& [user, idx] : by_user) {
    if (idx.size() < 2) continue;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return dataset.requests[a].timestamp < dataset.requests[b].timestamp;
    });
    // The small offset keeps products like 0.7 * 10 from rounding up past 7.
    const double want = std::ceil(train_fraction * static_cast<double>(idx.size()) - 1e-9);
    const auto n_train = std::min(idx.size(), static_cast<std::size_t>(want));
    for (std::size_t k = n_train; k < idx.size(); ++k) in_train[idx[k]] = 0;
  }
  TrainTestSplit split;
  split.train.users = split.test.users = dataset.users;
  split.train.contents = split.test.contents = dataset.contents;
  for (std::size_t k = 0; k < dataset.requests.size(); ++k) {
    (in_train[k] ? split.train : split.test).requests.push_back(dataset.requests[k]);
  }
  return split;
}

Dataset subset_top(const Dataset& dataset, std::size_t user_count, std::size_t content_count) {
  std::map<UserId, std::size_t> user_counts;
  std::map<ContentId, std::size_t> content_counts;
  for (const auto& r : dataset.requests) {
    ++user_counts[r.user];
    ++content_counts[r.content];
  }
  const auto top = [](const auto& counts, std::size_t n) {
    using Key = typename std::decay_t<decltype(counts)>::key_type;
    std::vector<std::pair<Key, std::size_t>> v(counts.begin(), counts.end());
    std::stable_sort(v.begin(), v.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    if (v.size() > n) v.resize(n);
    std::map<Key, bool> keep;
    for (const auto& [k, c] : v) keep[k] = true;
    return keep;
  };
  const auto keep_users = top(user_counts, user_count);
  const auto keep_contents = top(content_counts, content_count);

  Dataset out;
  for (const auto& r : dataset.requests) {
    if (keep_users.contains(r.user) && keep_contents.contains(r.content)) {
      out.requests.push_back(r);
      if (!out.users.contains(r.user)) out.users.emplace(r.user, dataset.users.at(r.user));
    }
  }
  for (const auto& [id, keep] : keep_contents) out.contents.emplace(id, dataset.contents.at(id));
  return out;
}

Library::Library(const Dataset& dataset) {
  dim_ = dataset.contents.empty() ? 0 : dataset.contents.begin()->second.info.size();
  ids_.reserve(dataset.contents.size());
  info_.reserve(dataset.contents.size() * dim_);
  for (const auto& [id, c] : dataset.contents) {
    if (c.info.size() != dim_) throw ValidationError("content info dimension mismatch");
    ids_.push_back(id);
    info_.insert(info_.end(), c.info.begin(), c.info.end());
  }
}

std::size_t Library::index(ContentId id) const {
  const auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
  if (it == ids_.end() || *it != id) {
    throw ValidationError("content " + std::to_string(raw(id)) + " not in library");
  }
  return static_cast<std::size_t>(it - ids_.begin());
}

}  // namespace fogpop
