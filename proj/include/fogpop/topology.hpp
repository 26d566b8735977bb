#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "fogpop/dataset.hpp"

namespace fogpop {

// Users currently associated with each F-AP, indexed by F-AP (0-based).
using Associations = std::vector<std::vector<UserId>>;

// Assignment of users to F-APs. F-APs are addressed by 0-based index; they are
// printed as 1..M in every output file.
struct Topology {
  std::size_t fap_count = 0;
  std::vector<std::vector<UserId>> local_users;  // per F-AP, sorted
  std::vector<UserId> mobile_users;              // sorted
  std::vector<Associations> associations;        // per evaluation window

  // F-AP of a local user, or nullopt for mobile/unknown users.
  std::optional<std::size_t> home_of(UserId user) const;
  bool is_mobile(UserId user) const;

  // Checks disjointness and coverage against the dataset's user table.
  void validate(const Dataset& dataset) const;
};

enum class SkewMode { uniform, genre };

SkewMode parse_skew_mode(std::string_view name);

// Designates floor(mobile_ratio * users) mobile users uniformly at random and
// places the rest on F-APs. Home F-APs are drawn for all users before mobiles
// are removed, so a user's home does not depend on the mobile ratio.
//   uniform: users are round-robined over F-APs in a seeded random order.
//   genre:   users are grouped by their most-requested genre (ties to the lower
//            genre index); users are laid out group by group and dealt to
//            F-APs in contiguous runs of equal size.
// Throws ConfigError if an F-AP ends up with no local user.
Topology build_topology(const Dataset& dataset, std::size_t fap_count, double mobile_ratio,
                        SkewMode skew_mode, std::uint64_t seed);

// Same mobile designation applied to a fixed home assignment (e.g. a planted
// synthetic topology with every user local).
Topology designate_mobiles(const Topology& all_local, double mobile_ratio, std::uint64_t seed);

}  // namespace fogpop
