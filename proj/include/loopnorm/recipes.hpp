#pragma once

// Loop transformations, recipes keyed by canonical fingerprint, and a
// persistent recipe database.
//
// Loop paths in transforms are relative to the nest they apply to: the empty
// path is the nest's root loop, {0} the first child of its body, and so on.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "loopnorm/canonical.hpp"
#include "loopnorm/ir.hpp"

namespace loopnorm {

struct Transform {
  enum class Kind { Interchange, Tile, MarkParallel, MarkVectorize, FuseProducerConsumer, ReplaceIdiom };

  Kind kind = Kind::Interchange;
  NodePath loop;                  // Interchange (band root), Tile, Mark*
  std::vector<std::size_t> perm;  // Interchange
  std::int64_t size = 0;          // Tile
  std::string selector = "next";  // FuseProducerConsumer: "next" or "all"
  std::string idiom;              // ReplaceIdiom

  static Transform interchange(NodePath band, std::vector<std::size_t> perm);
  static Transform tile(NodePath loop, std::int64_t size);
  static Transform parallel(NodePath loop);
  static Transform vectorize(NodePath loop);
  static Transform fuse(std::string selector = "next");
  static Transform replace_idiom(std::string idiom);

  std::string describe() const;
  bool operator==(const Transform&) const = default;
};

const char* to_string(Transform::Kind k);

struct Recipe {
  std::uint64_t key = 0;
  KeyMode mode = KeyMode::Exact;
  std::vector<Transform> steps;
  std::string provenance;

  bool operator==(const Recipe&) const = default;
};

nlohmann::ordered_json to_json(const Transform& t);
Transform transform_from_json(const nlohmann::ordered_json& j, const std::string& where);

// ---------------------------------------------------------------------------
// single transforms on program nests

/// Strip-mines the loop at `loop` (relative to top-level node `nest`) by
/// `size`, then moves the new tile loop outward past enclosing loops while
/// that is legal and no bound refers to the passed loop. Returns the program;
/// throws IllegalStep with index `step`.
Program tile(const Program& program, std::size_t nest, const NodePath& loop, std::int64_t size,
             std::size_t step = 0);

/// Structural fusion: walks both loop chains while bounds agree (after
/// renaming the second chain's iterators to the first's) and appends the
/// second body at the deepest agreeing level. Parallel/vector marks survive
/// only if both loops carry them. nullopt when the outer bounds differ.
std::optional<Loop> fuse_loops(const Loop& first, const Loop& second);

/// Merges top-level nodes `first` and `first + 1` when their loop chains have
/// identical bounds and the only dependences between them are
/// loop-independent flows whose producer write indices equal the consumer
/// read indices. Returns nullopt (with `why` set) otherwise.
std::optional<Program> fuse_producer_consumer(const Program& program, std::size_t first, std::string* why = nullptr);

/// Repeatedly fuses adjacent fusable top-level nests until none remain.
Program fuse_all(const Program& program);

/// Idiom of a nest: "gemm", "gemv", "dot", "axpy", "syrk" or nullopt.
std::optional<std::string> detect_idiom(const Node& nest);

/// Applies a recipe to top-level node `nest`. Throws KeyMismatch when the
/// nest's key differs, IllegalStep when a step is not legal.
Program apply(const Recipe& recipe, const Program& program, std::size_t nest);

/// Applies a step list without key checking.
Program apply_steps(const std::vector<Transform>& steps, const Program& program, std::size_t nest);

// ---------------------------------------------------------------------------
// database

class RecipeDatabase {
 public:
  /// Inserts a recipe. Re-inserting an identical recipe is a no-op; a
  /// different recipe under an existing (key, mode) throws DuplicateKey.
  void insert(Recipe recipe);

  /// Keys every top-level loop nest of a normalized program and inserts its
  /// default_steps() recipe. Returns the number of new entries.
  std::size_t seed(const Program& normalized, KeyMode mode, const std::string& provenance);

  const Recipe* find(std::uint64_t key, KeyMode mode) const;
  /// Exact key first, then shape-insensitive.
  const Recipe* lookup(const Program& context, const Node& nest) const;

  const std::vector<Recipe>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  nlohmann::ordered_json to_json() const;
  static RecipeDatabase from_json(const nlohmann::ordered_json& j);
  std::string dump() const;
  static RecipeDatabase parse(std::string_view text);
  void save(const std::string& path) const;
  static RecipeDatabase load(const std::string& path);

 private:
  std::vector<Recipe> entries_;
};

/// The stand-in for schedule search: idiom replacement for recognized
/// nests, otherwise Tile(root, 8) for nests at least two deep, MarkParallel
/// on the root and MarkVectorize on the innermost loop, each kept only when
/// legal. Returns nullopt for nodes that are not loops.
std::optional<std::vector<Transform>> default_steps(const Program& normalized, std::size_t nest);

struct ApplyOutcome {
  Program program;
  std::size_t hits = 0;
  std::size_t misses = 0;
  std::vector<std::string> log;
};

/// Looks up and applies a recipe for each top-level loop nest in order.
ApplyOutcome apply_database(const RecipeDatabase& db, const Program& normalized);

// ---------------------------------------------------------------------------

/// Deterministic C99 rendering with OpenMP pragmas for marked loops and
/// cblas-style stubs for idiom calls.
std::string emit_c(const Program& program, const std::string& function_name = "kernel");

}  // namespace loopnorm
