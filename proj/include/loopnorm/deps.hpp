#pragma once

// Affine dependence analysis.
//
// Every edge points from the access that executes first (src) to the one
// that executes later (dst). Entries cover the loops enclosing both
// computations, outermost first; an entry's distance is the dst iteration
// minus the src iteration, so every edge vector is lexicographically
// non-negative.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "loopnorm/ir.hpp"

namespace loopnorm {

enum class DepKind { Flow, Anti, Output };
enum class Direction { Lt, Eq, Gt, Star };

const char* to_string(DepKind k);
const char* to_string(Direction d);

struct DepEntry {
  std::string iter;
  std::optional<std::int64_t> distance;
  Direction direction = Direction::Star;

  bool operator==(const DepEntry&) const = default;
};

struct DependenceEdge {
  std::string src;
  std::string dst;
  DepKind kind = DepKind::Flow;
  std::string array;
  std::size_t src_access = 0;  // 0 = write, k = reads[k-1]
  std::size_t dst_access = 0;
  std::vector<DepEntry> entries;
  std::optional<std::size_t> carried_at;  // first entry that is not '='
  bool concrete_exact = false;

  bool operator==(const DependenceEdge&) const = default;
};

struct DependenceGraph {
  std::vector<std::string> nodes;  // computation ids, preorder
  std::vector<DependenceEdge> edges;
};

struct AnalysisOptions {
  /// Bindings for the concrete upgrade; parameter defaults fill the rest.
  /// The upgrade is skipped when some parameter stays unbound.
  Bindings bindings;
  bool concrete_upgrade = true;
  std::uint64_t concrete_cap = 1'000'000;
};

/// Static subscript analysis (ZIV, strong SIV, GCD; MIV and coupled
/// subscripts give '*'). Access pairs left with '*' entries are replaced by
/// exact brute-force edges, flagged concrete_exact, when the iteration space
/// is concrete and within the cap.
DependenceGraph analyze(const Program& program, const AnalysisOptions& options = {});

/// Same, restricted to one body (typically a single top-level nest).
DependenceGraph analyze(const Program& program, const Body& body, const AnalysisOptions& options = {});

enum class OracleScope {
  /// Flow from the latest earlier write, anti to the next write by another
  /// instance, output between consecutive writes. Every conflicting pair is ordered by a chain
  /// of these, so they decide legality exactly.
  Direct,
  /// Every pair of conflicting dynamic accesses.
  AllPairs,
};

/// Exact dependences by enumerating the dynamic accesses of every cell. One
/// edge per (src access, dst access, kind, direction vector); an entry's
/// distance is set when it is constant over the edge's pairs. Throws
/// IterationCapExceeded beyond `cap` instances or `pair_cap` pairs.
DependenceGraph brute_force_oracle(const Program& program, const Bindings& bindings,
                                   std::uint64_t cap = 1'000'000, std::uint64_t pair_cap = 50'000'000,
                                   OracleScope scope = OracleScope::Direct);
DependenceGraph brute_force_oracle(const Program& program, const Body& body, const Bindings& bindings,
                                   std::uint64_t cap = 1'000'000, std::uint64_t pair_cap = 50'000'000,
                                   OracleScope scope = OracleScope::Direct);

/// True when `general` admits every dependence instance of `specific`: same
/// endpoints, kind and accesses; each entry is '*' or agrees in direction and,
/// where `general` fixes a distance, in distance.
bool covers(const DependenceEdge& general, const DependenceEdge& specific);

/// Whether a direction vector, entrywise, could be lexicographically
/// negative ('*' counts as possibly '>').
bool may_be_lex_negative(std::span<const Direction> dirs);

/// A perfectly nested chain of loops: each loop's body is exactly the next
/// loop, and the innermost body holds only computations.
struct Band {
  NodePath root;   // path of the outermost band loop
  std::size_t depth = 0;  // loops enclosing the band root
  std::size_t size = 0;   // number of loops in the band
};

/// Maximal perfect bands of a program, outermost first. A loop chain that
/// ends in a mixed body is not a band; bands are searched again below it.
std::vector<Band> perfect_bands(const Body& body);

/// Loops of a band, outermost first.
std::vector<const Loop*> band_loops(const Body& body, const Band& band);

/// Reorders the band so that position p holds original loop perm[p].
/// Throws InvalidProgram if perm is not a permutation of 0..size-1.
Body permute_band(const Body& body, const Band& band, const std::vector<std::size_t>& perm);

/// Every loop would still be nested inside each loop its bounds refer to.
bool is_permutation_feasible(const Body& body, const Band& band, const std::vector<std::size_t>& perm);

/// Lexicographic legality of the permuted direction vectors of all edges
/// inside the band, plus bound feasibility. `graph` must cover the band.
/// Throws InvalidProgram if `band` is not a perfect band.
bool is_permutation_legal(const Body& body, const Band& band, const std::vector<std::size_t>& perm,
                          const DependenceGraph& graph);

/// Partitions the children of the loop at `loop_path` into atomic groups:
/// strongly connected components of the edges that may be carried by that
/// loop or are loop-independent, ordered topologically with ties broken by
/// original position. Each group lists child indices in original order.
std::vector<std::vector<std::size_t>> fission_partition(const Body& body, const NodePath& loop_path,
                                                        const DependenceGraph& graph);

/// True when some edge among computations under the loop at `loop_path` may
/// be carried by that loop.
bool carries_dependence(const Body& body, const NodePath& loop_path, const DependenceGraph& graph);

/// Computation ids under a node, preorder.
std::vector<std::string> computation_ids(const Node& node);

}  // namespace loopnorm
