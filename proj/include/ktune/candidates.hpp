#ifndef KTUNE_CANDIDATES_HPP
#define KTUNE_CANDIDATES_HPP

#include <cstdint>
#include <unordered_set>
#include <vector>

#include "ktune/design_space.hpp"

namespace ktune {

/// A configuration scored by the cost model during exploration.
struct Candidate {
  Configuration config;
  std::uint64_t id = 0;
  double predicted_fitness = 0.0;
};

/// The explored set of one iteration, deduplicated by ordinal id and ranked
/// by predicted fitness (descending, ties by lower id).
struct CandidateSet {
  std::vector<Candidate> items;

  bool empty() const { return items.empty(); }
  std::size_t size() const { return items.size(); }
};

/// Deduplicates (first occurrence wins) and ranks.
CandidateSet make_candidate_set(std::vector<Candidate> raw);

/// Ordinal ids of configurations already measured this run.
using VisitedSet = std::unordered_set<std::uint64_t>;

}  // namespace ktune

#endif  // KTUNE_CANDIDATES_HPP
