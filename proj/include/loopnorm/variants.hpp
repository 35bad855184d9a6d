#pragma once

// Random semantically equivalent rewrites of a kernel: legal band
// permutations, legal fusion or distribution of sibling nests, and renaming.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "loopnorm/ir.hpp"

namespace loopnorm {

struct Variant {
  Program program;
  // variant array name -> origin array name, for renamed arrays only
  std::map<std::string, std::string, std::less<>> array_map;
  std::vector<std::string> moves;
};

/// `count` variants, each built from 1-5 random moves whose legality is
/// checked against the dependence graph. Deterministic in (program, seed).
std::vector<Variant> generate(const Program& program, std::uint64_t seed, std::size_t count);

/// Fuses the adjacent sibling loops at `body_path` + [first] and [first+1]
/// (an empty `body_path` means the top level) when the bounds agree and no
/// dependence would run from the second nest back into the first within one
/// iteration of the enclosing loops. nullopt otherwise.
std::optional<Program> fuse_siblings(const Program& program, const NodePath& body_path, std::size_t first);

}  // namespace loopnorm
