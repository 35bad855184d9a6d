#include "loopnorm/variants.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "loopnorm/deps.hpp"
#include "loopnorm/normalize.hpp"
#include "loopnorm/recipes.hpp"

namespace loopnorm {

namespace {

Body& body_at(Program& p, const NodePath& path) {
  return path.empty() ? p.body : node_at(p.body, path).loop().body;
}

const Body& body_at(const Program& p, const NodePath& path) {
  return path.empty() ? p.body : node_at(p.body, path).loop().body;
}

struct SiblingPair {
  NodePath parent;
  std::size_t first;
};

void collect_pairs(const Body& body, const NodePath& parent, std::vector<SiblingPair>& out) {
  for (std::size_t k = 0; k < body.size(); ++k) {
    if (!body[k].is_loop()) continue;
    if (k + 1 < body.size() && body[k + 1].is_loop()) out.push_back({parent, k});
    NodePath child = parent;
    child.push_back(k);
    collect_pairs(body[k].loop().body, child, out);
  }
}

class Generator {
 public:
  Generator(const Program& origin, std::uint64_t seed) : rng_(seed) { variant_.program = origin; }

  Variant run() {
    enum Kind { Permute, Fuse, Distribute, RenameIterator, RenameArray };
    // Structural moves dominate; a fusion right after a distribution (or the
    // reverse) would mostly undo it and is skipped.
    std::discrete_distribution<int> weighted({3, 1, 2, 1, 1});
    std::uniform_int_distribution<int> length(1, 5);
    int moves = length(rng_);
    int last = -1;
    for (int m = 0; m < moves; ++m) {
      std::vector<int> order{weighted(rng_)};
      std::vector<int> rest{Permute, Fuse, Distribute, RenameIterator, RenameArray};
      std::shuffle(rest.begin(), rest.end(), rng_);
      for (int k : rest)
        if (k != order.front()) order.push_back(k);
      for (int kind : order) {
        if ((kind == Fuse && last == Distribute) || (kind == Distribute && last == Fuse)) continue;
        bool done = kind == Permute      ? permute()
                    : kind == Fuse       ? fuse()
                    : kind == Distribute ? distribute_loop()
                    : kind == RenameIterator ? rename_iterator()
                                             : rename_array();
        if (done) {
          last = kind;
          break;
        }
      }
    }
    return std::move(variant_);
  }

 private:
  Program& program() { return variant_.program; }

  bool permute() {
    auto bands = perfect_bands(program().body);
    std::erase_if(bands, [](const Band& b) { return b.size < 2; });
    if (bands.empty()) return false;
    std::uniform_int_distribution<std::size_t> pick(0, bands.size() - 1);
    const Band band = bands[pick(rng_)];
    DependenceGraph graph = analyze(program());
    std::vector<std::size_t> perm(band.size);
    for (int attempt = 0; attempt < 12; ++attempt) {
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng_);
      if (std::is_sorted(perm.begin(), perm.end())) continue;
      if (!is_permutation_legal(program().body, band, perm, graph)) continue;
      program().body = permute_band(program().body, band, perm);
      std::string text = "permute";
      for (std::size_t p : perm) text += " " + std::to_string(p);
      variant_.moves.push_back(text);
      return true;
    }
    return false;
  }

  bool fuse() {
    std::vector<SiblingPair> pairs;
    collect_pairs(program().body, {}, pairs);
    std::shuffle(pairs.begin(), pairs.end(), rng_);
    for (const auto& pr : pairs) {
      if (auto fused = fuse_siblings(program(), pr.parent, pr.first)) {
        program() = std::move(*fused);
        variant_.moves.push_back("fuse " + std::to_string(pr.first));
        return true;
      }
    }
    return false;
  }

  bool distribute_loop() {
    std::vector<NodePath> paths;
    for_each_loop(program().body, [&](const Loop& l, const NodePath& p) {
      if (l.body.size() > 1) paths.push_back(p);
    });
    std::shuffle(paths.begin(), paths.end(), rng_);
    for (const auto& path : paths) {
      if (auto split = distribute(program(), path)) {
        program() = std::move(*split);
        variant_.moves.push_back("distribute " + node_at(program().body, path).loop().iter);
        return true;
      }
    }
    return false;
  }

  bool rename_iterator() {
    std::vector<std::string> iters;
    for_each_loop(program().body, [&](const Loop& l, const NodePath&) {
      if (std::find(iters.begin(), iters.end(), l.iter) == iters.end()) iters.push_back(l.iter);
    });
    if (iters.empty()) return false;
    std::uniform_int_distribution<std::size_t> pick(0, iters.size() - 1);
    const std::string old = iters[pick(rng_)];
    std::vector<std::string> taken = all_names(program());
    std::string fresh = fresh_name("v" + std::to_string(counter_++), taken);
    rename_in_body(program().body, {{old, fresh}}, {});
    variant_.moves.push_back("rename " + old + " -> " + fresh);
    return true;
  }

  bool rename_array() {
    if (program().arrays.empty()) return false;
    std::uniform_int_distribution<std::size_t> pick(0, program().arrays.size() - 1);
    ArrayDecl& decl = program().arrays[pick(rng_)];
    std::vector<std::string> taken = all_names(program());
    std::string fresh = fresh_name("arr" + std::to_string(counter_++), taken);
    std::string old = decl.name;
    decl.name = fresh;
    rename_in_body(program().body, {}, {{old, fresh}});
    auto it = variant_.array_map.find(old);
    std::string origin = it == variant_.array_map.end() ? old : it->second;
    if (it != variant_.array_map.end()) variant_.array_map.erase(it);
    variant_.array_map[fresh] = origin;
    variant_.moves.push_back("rename " + old + " -> " + fresh);
    return true;
  }

  std::mt19937_64 rng_;
  Variant variant_;
  int counter_ = 0;
};

}  // namespace

std::optional<Program> fuse_siblings(const Program& program, const NodePath& body_path, std::size_t first) {
  const Body& parent = body_at(program, body_path);
  if (first + 1 >= parent.size() || !parent[first].is_loop() || !parent[first + 1].is_loop()) return std::nullopt;
  auto fused = fuse_loops(parent[first].loop(), parent[first + 1].loop());
  if (!fused) return std::nullopt;

  auto ids_a = computation_ids(parent[first]);
  auto ids_b = computation_ids(parent[first + 1]);
  std::set<std::string> in_a(ids_a.begin(), ids_a.end()), in_b(ids_b.begin(), ids_b.end());

  Program out = program;
  Body& body = body_at(out, body_path);
  body[first] = Node(std::move(*fused));
  body.erase(body.begin() + static_cast<std::ptrdiff_t>(first) + 1);
  if (!validate(out).empty()) return std::nullopt;

  std::size_t outer = body_path.size();
  DependenceGraph graph = analyze(out);
  for (const auto& e : graph.edges) {
    if (!in_b.contains(e.src) || !in_a.contains(e.dst)) continue;
    bool same_outer = true;
    for (std::size_t k = 0; k < outer && k < e.entries.size(); ++k)
      if (e.entries[k].direction != Direction::Eq && e.entries[k].direction != Direction::Star) same_outer = false;
    if (same_outer) return std::nullopt;
  }
  return out;
}

std::vector<Variant> generate(const Program& program, std::uint64_t seed, std::size_t count) {
  std::vector<Variant> out;
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  std::mt19937_64 master(seq);
  for (std::size_t k = 0; k < count; ++k) out.push_back(Generator(program, master()).run());
  return out;
}

}  // namespace loopnorm
