#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fogpop {

enum class UserId : std::uint32_t {};
enum class ContentId : std::uint32_t {};

constexpr std::uint32_t raw(UserId id) { return static_cast<std::uint32_t>(id); }
constexpr std::uint32_t raw(ContentId id) { return static_cast<std::uint32_t>(id); }

// One user -> content request event. Every rating line is treated as a request.
struct RequestRecord {
  UserId user{};
  ContentId content{};
  int rating = 0;
  std::int64_t timestamp = 0;

  friend bool operator==(const RequestRecord&, const RequestRecord&) = default;
};

// Information vector with every component in [0, 1].
using InfoVector = std::vector<double>;

struct UserInfo {
  std::string gender;
  int age = 0;
  int occupation = 0;
  std::string zip;
  InfoVector info;
};

struct ContentInfo {
  std::string title;
  std::vector<std::string> genres;
  InfoVector info;
};

struct Dataset {
  std::vector<RequestRecord> requests;
  std::map<UserId, UserInfo> users;
  std::map<ContentId, ContentInfo> contents;

  std::size_t library_size() const { return contents.size(); }

  // Throws ValidationError if a request references an unknown user or content
  // or carries a rating outside [1, 5].
  void validate() const;
};

// MovieLens 1M code tables.
inline constexpr std::size_t kUserInfoDim = 30;     // 2 genders + 7 age bins + 21 occupations
inline constexpr std::size_t kContentInfoDim = 18;  // genres
std::span<const int> movielens_age_codes();
std::span<const std::string_view> movielens_genres();
inline constexpr int kOccupationCount = 21;

InfoVector encode_user_info(std::string_view gender, int age_code, int occupation);
InfoVector encode_content_info(std::span<const std::string> genres);

// Parsers for the `::`-delimited MovieLens 1M files. Bytes outside ASCII are
// passed through untouched so ISO-8859-1 titles survive.
std::vector<RequestRecord> parse_ratings(std::string_view text);
Dataset parse_movielens(std::string_view ratings_text, std::string_view users_text,
                        std::string_view movies_text);
Dataset load_movielens(const std::filesystem::path& dir);

std::string format_ratings(std::span<const RequestRecord> requests);
std::string format_users(const Dataset& dataset);
std::string format_movies(const Dataset& dataset);
void write_movielens(const Dataset& dataset, const std::filesystem::path& dir);

struct TrainTestSplit {
  Dataset train;
  Dataset test;
};

// Per-user chronological split: the earliest ceil(fraction * n_u) requests of
// each user are training data. Users with fewer than two requests keep all of
// them in train. Request order within each half follows the input order.
TrainTestSplit split_train_test(const Dataset& dataset, double train_fraction);

// Restricts to the `user_count` most active users and the `content_count` most
// requested contents (ties by lower id). Contents outside the subset are
// dropped from the library; users left without requests are dropped as well.
Dataset subset_top(const Dataset& dataset, std::size_t user_count, std::size_t content_count);

// Dense view of the content library, ordered by content id.
class Library {
 public:
  Library() = default;
  explicit Library(const Dataset& dataset);

  std::size_t size() const { return ids_.size(); }
  std::size_t dim() const { return dim_; }
  ContentId id(std::size_t index) const { return ids_[index]; }
  std::size_t index(ContentId id) const;
  std::span<const double> info(std::size_t index) const {
    return {info_.data() + index * dim_, dim_};
  }

 private:
  std::vector<ContentId> ids_;
  std::vector<double> info_;
  std::size_t dim_ = 0;
};

}  // namespace fogpop
