#include "loopnorm/recipes.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "loopnorm/deps.hpp"
#include "loopnorm/hash.hpp"
#include "loopnorm/normalize.hpp"
#include "loopnorm/serialize.hpp"

namespace loopnorm {

// ---------------------------------------------------------------------------
// Transform

Transform Transform::interchange(NodePath band, std::vector<std::size_t> perm) {
  Transform t;
  t.kind = Kind::Interchange;
  t.loop = std::move(band);
  t.perm = std::move(perm);
  return t;
}

Transform Transform::tile(NodePath loop, std::int64_t size) {
  Transform t;
  t.kind = Kind::Tile;
  t.loop = std::move(loop);
  t.size = size;
  return t;
}

Transform Transform::parallel(NodePath loop) {
  Transform t;
  t.kind = Kind::MarkParallel;
  t.loop = std::move(loop);
  return t;
}

Transform Transform::vectorize(NodePath loop) {
  Transform t;
  t.kind = Kind::MarkVectorize;
  t.loop = std::move(loop);
  return t;
}

Transform Transform::fuse(std::string selector) {
  Transform t;
  t.kind = Kind::FuseProducerConsumer;
  t.selector = std::move(selector);
  return t;
}

Transform Transform::replace_idiom(std::string idiom) {
  Transform t;
  t.kind = Kind::ReplaceIdiom;
  t.idiom = std::move(idiom);
  return t;
}

const char* to_string(Transform::Kind k) {
  switch (k) {
    case Transform::Kind::Interchange: return "interchange";
    case Transform::Kind::Tile: return "tile";
    case Transform::Kind::MarkParallel: return "parallel";
    case Transform::Kind::MarkVectorize: return "vectorize";
    case Transform::Kind::FuseProducerConsumer: return "fuse";
    case Transform::Kind::ReplaceIdiom: return "idiom";
  }
  return "?";
}

namespace {

std::string path_text(const NodePath& p) {
  std::string s = "[";
  for (std::size_t k = 0; k < p.size(); ++k) s += (k ? "," : "") + std::to_string(p[k]);
  return s + "]";
}

}  // namespace

std::string Transform::describe() const {
  std::string s = to_string(kind);
  switch (kind) {
    case Kind::Interchange: {
      s += "(" + path_text(loop) + ", perm=[";
      for (std::size_t k = 0; k < perm.size(); ++k) s += (k ? "," : "") + std::to_string(perm[k]);
      return s + "])";
    }
    case Kind::Tile: return s + "(" + path_text(loop) + ", " + std::to_string(size) + ")";
    case Kind::MarkParallel:
    case Kind::MarkVectorize: return s + "(" + path_text(loop) + ")";
    case Kind::FuseProducerConsumer: return s + "(" + selector + ")";
    case Kind::ReplaceIdiom: return s + "(" + idiom + ")";
  }
  return s;
}

nlohmann::ordered_json to_json(const Transform& t) {
  nlohmann::ordered_json j;
  j["op"] = to_string(t.kind);
  switch (t.kind) {
    case Transform::Kind::Interchange:
      j["path"] = t.loop;
      j["perm"] = t.perm;
      break;
    case Transform::Kind::Tile:
      j["path"] = t.loop;
      j["size"] = t.size;
      break;
    case Transform::Kind::MarkParallel:
    case Transform::Kind::MarkVectorize:
      j["path"] = t.loop;
      break;
    case Transform::Kind::FuseProducerConsumer:
      j["selector"] = t.selector;
      break;
    case Transform::Kind::ReplaceIdiom:
      j["idiom"] = t.idiom;
      break;
  }
  return j;
}

namespace {

template <typename T>
T field(const nlohmann::ordered_json& j, const char* name, const std::string& where) {
  if (!j.contains(name)) throw FormatError(where + ": missing field '" + name + "'", 0);
  try {
    return j.at(name).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw FormatError(where + "." + name + ": wrong type", 0);
  }
}

}  // namespace

Transform transform_from_json(const nlohmann::ordered_json& j, const std::string& where) {
  if (!j.is_object()) throw FormatError(where + ": expected an object", 0);
  auto op = field<std::string>(j, "op", where);
  Transform t;
  if (op == "interchange") {
    expect_fields(j, {"op", "path", "perm"}, where);
    t = Transform::interchange(field<NodePath>(j, "path", where), field<std::vector<std::size_t>>(j, "perm", where));
  } else if (op == "tile") {
    expect_fields(j, {"op", "path", "size"}, where);
    t = Transform::tile(field<NodePath>(j, "path", where), field<std::int64_t>(j, "size", where));
  } else if (op == "parallel") {
    expect_fields(j, {"op", "path"}, where);
    t = Transform::parallel(field<NodePath>(j, "path", where));
  } else if (op == "vectorize") {
    expect_fields(j, {"op", "path"}, where);
    t = Transform::vectorize(field<NodePath>(j, "path", where));
  } else if (op == "fuse") {
    expect_fields(j, {"op", "selector"}, where);
    t = Transform::fuse(field<std::string>(j, "selector", where));
    if (t.selector != "next" && t.selector != "all")
      throw FormatError(where + ".selector: expected \"next\" or \"all\"", 0);
  } else if (op == "idiom") {
    expect_fields(j, {"op", "idiom"}, where);
    t = Transform::replace_idiom(field<std::string>(j, "idiom", where));
  } else {
    throw FormatError(where + ".op: unknown transform '" + op + "'", 0);
  }
  return t;
}

// ---------------------------------------------------------------------------
// helpers

namespace {

NodePath rooted(const NodePath& rel) {
  NodePath p{0};
  p.insert(p.end(), rel.begin(), rel.end());
  return p;
}

Body nest_body(const Program& program, std::size_t nest) {
  Body b;
  b.push_back(program.body.at(nest));
  return b;
}

DependenceGraph nest_graph(const Program& program, const Body& sub) {
  return analyze(program, sub, AnalysisOptions{});
}

bool bounds_mention(const Loop& l, const std::string& name) { return l.bounds_mention(name); }

bool subtree_bounds_mention(const Body& body, const std::string& name) {
  bool found = false;
  for_each_loop(body, [&](const Loop& l, const NodePath&) {
    if (bounds_mention(l, name)) found = true;
  });
  return found;
}

// Swapping the loop at `outer` with its only child loop keeps every edge
// among the computations below lexicographically non-negative.
bool swap_legal(const Body& sub, const NodePath& outer, const DependenceGraph& graph) {
  std::size_t level = outer.size() - 1;
  auto ids = computation_ids(node_at(sub, outer));
  std::set<std::string> inside(ids.begin(), ids.end());
  std::vector<Direction> dirs;
  for (const auto& e : graph.edges) {
    if (!inside.contains(e.src) || !inside.contains(e.dst)) continue;
    if (e.entries.size() < level + 2) continue;
    dirs.clear();
    for (const auto& en : e.entries) dirs.push_back(en.direction);
    std::swap(dirs[level], dirs[level + 1]);
    if (may_be_lex_negative(dirs)) return false;
  }
  return true;
}

Loop& loop_at(Body& sub, const NodePath& path, std::size_t step) {
  Node* n = nullptr;
  try {
    n = &node_at(sub, path);
  } catch (const std::exception&) {
    throw IllegalStep(step, "no node at path " + path_text(NodePath(path.begin() + 1, path.end())));
  }
  if (!n->is_loop()) throw IllegalStep(step, "node at path " + path_text(NodePath(path.begin() + 1, path.end())) + " is not a loop");
  return n->loop();
}

}  // namespace

// ---------------------------------------------------------------------------
// tiling

Program tile(const Program& program, std::size_t nest, const NodePath& loop, std::int64_t size, std::size_t step) {
  if (size < 2) throw IllegalStep(step, "tile size must be >= 2");
  if (nest >= program.body.size() || !program.body[nest].is_loop()) throw IllegalStep(step, "nest is not a loop");
  Program out = program;
  Body sub = nest_body(program, nest);
  NodePath path = rooted(loop);
  Loop original = loop_at(sub, path, step);

  std::vector<std::string> taken = all_names(program);
  std::string tname = fresh_name(original.iter + "_t", taken);

  Loop tile_loop;
  tile_loop.iter = tname;
  tile_loop.lower = AffineExpr(0);
  for (const auto& t : original.upper)
    tile_loop.upper.push_back(BoundTerm{t.expr - original.lower * t.divisor, t.divisor * size});

  Loop point = original;
  point.lower = original.lower + AffineExpr::variable(tname, size);
  point.upper.clear();
  point.upper.push_back(BoundTerm{point.lower + AffineExpr(size), 1});
  for (const auto& t : original.upper) point.upper.push_back(t);
  point.span.reset();
  tile_loop.body.push_back(Node(std::move(point)));
  node_at(sub, path) = Node(std::move(tile_loop));

  // Move the tile loop outward.
  while (path.size() > 1) {
    NodePath up(path.begin(), path.end() - 1);
    Node& parent_node = node_at(sub, up);
    if (!parent_node.is_loop()) break;
    Loop& parent = parent_node.loop();
    if (parent.body.size() != 1) break;
    const Loop& tl = parent.body[0].loop();
    if (bounds_mention(tl, parent.iter) || subtree_bounds_mention(tl.body, parent.iter)) break;
    Program ctx = out;
    ctx.body[nest] = sub.front();
    if (!swap_legal(sub, up, nest_graph(ctx, sub))) break;
    Loop moved = tl;
    Loop outer = parent;
    outer.body = moved.body;
    moved.body.clear();
    moved.body.push_back(Node(std::move(outer)));
    parent_node = Node(std::move(moved));
    path = up;
  }
  out.body[nest] = std::move(sub.front());
  return out;
}

// ---------------------------------------------------------------------------
// fusion

std::optional<Loop> fuse_loops(const Loop& first, const Loop& second) {
  Loop fused = first;
  std::map<std::string, std::string, std::less<>> rename;
  auto same_bounds = [&](const Loop& a, const Loop& b) {
    if (a.lower != b.lower.renamed(rename) || a.upper.size() != b.upper.size()) return false;
    for (std::size_t k = 0; k < a.upper.size(); ++k)
      if (a.upper[k].divisor != b.upper[k].divisor || a.upper[k].expr != b.upper[k].expr.renamed(rename))
        return false;
    return true;
  };
  if (!same_bounds(fused, second)) return std::nullopt;

  Loop* a = &fused;
  const Loop* b = &second;
  while (true) {
    rename[b->iter] = a->iter;
    a->parallel = a->parallel && b->parallel;
    a->vectorize = a->vectorize && b->vectorize;
    bool deeper = a->body.size() == 1 && a->body[0].is_loop() && b->body.size() == 1 && b->body[0].is_loop() &&
                  same_bounds(a->body[0].loop(), b->body[0].loop());
    if (!deeper) break;
    a = &a->body[0].loop();
    b = &b->body[0].loop();
  }
  Body tail = b->body;
  rename_in_body(tail, rename, {});
  for (auto& n : tail) a->body.push_back(std::move(n));
  return fused;
}

std::optional<Program> fuse_producer_consumer(const Program& program, std::size_t first, std::string* why) {
  auto refuse = [&](std::string reason) -> std::optional<Program> {
    if (why) *why = std::move(reason);
    return std::nullopt;
  };
  if (first + 1 >= program.body.size()) return refuse("no following nest");
  if (!program.body[first].is_loop() || !program.body[first + 1].is_loop()) return refuse("both nodes must be loops");
  auto fused = fuse_loops(program.body[first].loop(), program.body[first + 1].loop());
  if (!fused) return refuse("iteration domains differ");

  Program out = program;
  out.body[first] = Node(std::move(*fused));
  out.body.erase(out.body.begin() + static_cast<std::ptrdiff_t>(first) + 1);
  if (!validate(out).empty()) return refuse("fused nest would reuse an iterator name");

  auto ids_a = computation_ids(program.body[first]);
  auto ids_b = computation_ids(program.body[first + 1]);
  std::set<std::string> in_a(ids_a.begin(), ids_a.end()), in_b(ids_b.begin(), ids_b.end());
  Body sub = nest_body(out, first);
  DependenceGraph graph = nest_graph(out, sub);

  std::map<std::string, const Computation*, std::less<>> comps;
  for_each_computation(sub, [&](const Computation& c, auto) { comps[c.id] = &c; });

  std::size_t flows = 0;
  for (const auto& e : graph.edges) {
    bool cross = (in_a.contains(e.src) && in_b.contains(e.dst)) || (in_b.contains(e.src) && in_a.contains(e.dst));
    if (!cross) continue;
    if (!in_a.contains(e.src)) return refuse("dependence from consumer " + e.src + " back to " + e.dst);
    if (e.kind != DepKind::Flow) return refuse(std::string(to_string(e.kind)) + " dependence " + e.src + " -> " + e.dst);
    bool independent = std::all_of(e.entries.begin(), e.entries.end(),
                                   [](const DepEntry& en) { return en.direction == Direction::Eq; });
    if (!independent) return refuse("loop-carried flow " + e.src + " -> " + e.dst + " on " + e.array);
    const Computation& prod = *comps.at(e.src);
    const Computation& cons = *comps.at(e.dst);
    if (e.src_access != 0 || e.dst_access == 0) return refuse("unexpected access roles");
    if (cons.reads[e.dst_access - 1].indices != prod.write.indices)
      return refuse("flow " + e.src + " -> " + e.dst + " on " + e.array + " is not one-to-one");
    ++flows;
  }
  if (flows == 0) return refuse("no producer-consumer relation");
  return out;
}

Program fuse_all(const Program& program) {
  Program cur = program;
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t t = 0; t + 1 < cur.body.size(); ++t) {
      if (auto f = fuse_producer_consumer(cur, t)) {
        cur = std::move(*f);
        changed = true;
        break;
      }
    }
  }
  return cur;
}

// ---------------------------------------------------------------------------
// idioms

namespace {

struct Product {
  std::vector<std::size_t> reads;
  std::size_t literals = 0;
};

bool flatten_product(const Expr& e, Product& out) {
  switch (e.op) {
    case Expr::Op::Mul: return flatten_product(e.args[0], out) && flatten_product(e.args[1], out);
    case Expr::Op::Read: out.reads.push_back(e.read); return true;
    case Expr::Op::Int:
    case Expr::Op::Float: ++out.literals; return true;
    default: return false;
  }
}

std::optional<std::string> plain_iter(const AffineExpr& e, const std::vector<std::string>& iters) {
  if (e.constant() != 0 || e.terms().size() != 1) return std::nullopt;
  const auto& [name, c] = *e.terms().begin();
  if (c != 1 || std::find(iters.begin(), iters.end(), name) == iters.end()) return std::nullopt;
  return name;
}

// Index roles of an access: the plain iterator per dimension, or nullopt.
std::optional<std::vector<std::string>> roles(const Access& a, const std::vector<std::string>& iters) {
  std::vector<std::string> out;
  for (const auto& ix : a.indices) {
    auto it = plain_iter(ix, iters);
    if (!it) return std::nullopt;
    out.push_back(*it);
  }
  return out;
}

struct IdiomMatch {
  std::string name;
  std::vector<std::string> args;
};

std::optional<IdiomMatch> match_idiom(const Node& nest) {
  if (!nest.is_loop()) return std::nullopt;
  std::vector<const Loop*> chain{&nest.loop()};
  while (chain.back()->body.size() == 1 && chain.back()->body[0].is_loop()) chain.push_back(&chain.back()->body[0].loop());
  const Body& leaf = chain.back()->body;
  if (leaf.size() != 1 || !leaf[0].is_computation()) return std::nullopt;
  const Computation& c = leaf[0].computation();

  std::vector<std::string> iters;
  for (const Loop* l : chain) iters.push_back(l->iter);
  bool triangular = false;
  for (const Loop* l : chain)
    for (const auto& it : iters)
      if (l->bounds_mention(it)) triangular = true;

  if (c.expr.op != Expr::Op::Add) return std::nullopt;
  const Expr* acc = &c.expr.args[0];
  const Expr* prod = &c.expr.args[1];
  if (acc->op != Expr::Op::Read) std::swap(acc, prod);
  if (acc->op != Expr::Op::Read) return std::nullopt;
  const Access& self = c.reads[acc->read];
  if (self.array != c.write.array || self.indices != c.write.indices) return std::nullopt;
  Product p;
  if (!flatten_product(*prod, p)) return std::nullopt;
  std::vector<const Access*> factors;
  for (std::size_t r : p.reads) factors.push_back(&c.reads[r]);
  for (const Access* f : factors)
    if (f->array == c.write.array) return std::nullopt;

  auto w = roles(c.write, iters);
  const std::string& out = c.write.array;
  std::size_t n = iters.size();

  if (n == 3 && factors.size() == 2 && w && w->size() == 2 && (*w)[0] != (*w)[1]) {
    auto r1 = roles(*factors[0], iters), r2 = roles(*factors[1], iters);
    if (!r1 || !r2 || r1->size() != 2 || r2->size() != 2) return std::nullopt;
    const std::string& a = (*w)[0];
    const std::string& b = (*w)[1];
    std::string k;
    for (const auto& it : iters)
      if (it != a && it != b) k = it;
    if (!triangular) {
      if (*r1 == std::vector<std::string>{a, k} && *r2 == std::vector<std::string>{k, b})
        return IdiomMatch{"gemm", {out, factors[0]->array, factors[1]->array}};
      if (*r2 == std::vector<std::string>{a, k} && *r1 == std::vector<std::string>{k, b})
        return IdiomMatch{"gemm", {out, factors[1]->array, factors[0]->array}};
    } else if (factors[0]->array == factors[1]->array) {
      bool ab = *r1 == std::vector<std::string>{a, k} && *r2 == std::vector<std::string>{b, k};
      bool ba = *r2 == std::vector<std::string>{a, k} && *r1 == std::vector<std::string>{b, k};
      if (ab || ba) return IdiomMatch{"syrk", {out, factors[0]->array}};
    }
    return std::nullopt;
  }
  if (triangular) return std::nullopt;
  if (n == 2 && factors.size() == 2 && w && w->size() == 1) {
    const std::string& a = (*w)[0];
    const std::string& b = iters[0] == a ? iters[1] : iters[0];
    for (int swap = 0; swap < 2; ++swap) {
      const Access* m = factors[swap];
      const Access* x = factors[1 - swap];
      auto rm = roles(*m, iters), rx = roles(*x, iters);
      if (rm && rx && *rm == std::vector<std::string>{a, b} && *rx == std::vector<std::string>{b})
        return IdiomMatch{"gemv", {out, m->array, x->array}};
    }
    return std::nullopt;
  }
  if (n == 1) {
    const std::string& i = iters[0];
    if (factors.size() == 2 && std::all_of(c.write.indices.begin(), c.write.indices.end(),
                                           [](const AffineExpr& e) { return e.is_constant(); })) {
      auto r1 = roles(*factors[0], iters), r2 = roles(*factors[1], iters);
      std::vector<std::string> vi{i};
      if (r1 && r2 && *r1 == vi && *r2 == vi) return IdiomMatch{"dot", {out, factors[0]->array, factors[1]->array}};
    }
    // y[i] += alpha * x[i], alpha a literal or a loop-invariant scalar
    if (w && *w == std::vector<std::string>{i} && !factors.empty() && factors.size() <= 2) {
      const Access* x = nullptr;
      std::size_t scalars = 0;
      for (const Access* f : factors) {
        bool invariant = std::none_of(f->indices.begin(), f->indices.end(), [&](const AffineExpr& e) { return e.mentions(i); });
        auto r = roles(*f, iters);
        if (invariant) ++scalars;
        else if (r && *r == std::vector<std::string>{i}) x = f;
      }
      if (x && scalars + 1 == factors.size()) return IdiomMatch{"axpy", {out, x->array}};
    }
  }
  return std::nullopt;
}

}  // namespace

std::optional<std::string> detect_idiom(const Node& nest) {
  if (auto m = match_idiom(nest)) return m->name;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// apply

Program apply_steps(const std::vector<Transform>& steps, const Program& program, std::size_t nest) {
  Program cur = program;
  for (std::size_t k = 0; k < steps.size(); ++k) {
    const Transform& t = steps[k];
    if (nest >= cur.body.size()) throw IllegalStep(k, "nest index out of range");
    using Kind = Transform::Kind;
    if (t.kind == Kind::FuseProducerConsumer) {
      if (t.selector == "all") {
        cur = fuse_all(cur);
      } else {
        std::string why;
        auto f = fuse_producer_consumer(cur, nest, &why);
        if (!f) throw IllegalStep(k, "cannot fuse: " + why);
        cur = std::move(*f);
      }
      continue;
    }
    if (t.kind == Kind::ReplaceIdiom) {
      auto m = match_idiom(cur.body[nest]);
      if (!m || m->name != t.idiom) throw IllegalStep(k, "nest does not match idiom '" + t.idiom + "'");
      Call call;
      call.idiom = m->name;
      call.args = m->args;
      call.reference.push_back(cur.body[nest]);
      cur.body[nest] = Node(std::move(call));
      continue;
    }
    if (!cur.body[nest].is_loop()) throw IllegalStep(k, "nest is not a loop");
    if (t.kind == Kind::Tile) {
      cur = tile(cur, nest, t.loop, t.size, k);
      continue;
    }
    Body sub = nest_body(cur, nest);
    NodePath path = rooted(t.loop);
    Loop& target = loop_at(sub, path, k);
    if (t.kind == Kind::Interchange) {
      auto bands = perfect_bands(sub);
      auto it = std::find_if(bands.begin(), bands.end(), [&](const Band& b) { return b.root == path; });
      if (it == bands.end()) throw IllegalStep(k, "no perfect band at " + path_text(t.loop));
      if (t.perm.size() != it->size) throw IllegalStep(k, "permutation size differs from band size");
      std::vector<std::size_t> sorted = t.perm;
      std::sort(sorted.begin(), sorted.end());
      for (std::size_t p = 0; p < sorted.size(); ++p)
        if (sorted[p] != p) throw IllegalStep(k, "not a permutation");
      if (!is_permutation_legal(sub, *it, t.perm, nest_graph(cur, sub)))
        throw IllegalStep(k, "permutation violates a dependence or a loop bound");
      sub = permute_band(sub, *it, t.perm);
    } else {
      if (t.kind == Kind::MarkVectorize &&
          std::any_of(target.body.begin(), target.body.end(), [](const Node& n) { return !n.is_computation(); }))
        throw IllegalStep(k, "vectorized loop must be innermost");
      if (carries_dependence(sub, path, nest_graph(cur, sub))) throw IllegalStep(k, "carried dependence");
      if (t.kind == Kind::MarkParallel) target.parallel = true;
      else target.vectorize = true;
    }
    cur.body[nest] = std::move(sub.front());
  }
  require_valid(cur);
  return cur;
}

Program apply(const Recipe& recipe, const Program& program, std::size_t nest) {
  if (nest >= program.body.size()) throw KeyMismatch("no top-level node " + std::to_string(nest));
  std::uint64_t key = match_key(program, program.body[nest], recipe.mode);
  if (key != recipe.key)
    throw KeyMismatch("nest key " + hex64(key) + " does not match recipe key " + hex64(recipe.key) + " (" +
                      to_string(recipe.mode) + ")");
  return apply_steps(recipe.steps, program, nest);
}

std::optional<std::vector<Transform>> default_steps(const Program& normalized, std::size_t nest) {
  if (nest >= normalized.body.size() || !normalized.body[nest].is_loop()) return std::nullopt;
  if (auto idiom = detect_idiom(normalized.body[nest])) return std::vector<Transform>{Transform::replace_idiom(*idiom)};

  std::vector<Transform> steps;
  Program cur = normalized;
  auto attempt = [&](const Transform& t) {
    try {
      cur = apply_steps({t}, cur, nest);
      steps.push_back(t);
    } catch (const IllegalStep&) {
    }
  };
  auto chain_depth = [&](const Node& n) {
    std::size_t depth = 1;
    const Loop* l = &n.loop();
    while (l->body.size() == 1 && l->body[0].is_loop()) {
      l = &l->body[0].loop();
      ++depth;
    }
    return depth;
  };
  if (chain_depth(cur.body[nest]) >= 2) attempt(Transform::tile({}, 8));
  attempt(Transform::parallel({}));
  NodePath inner;
  const Loop* l = &cur.body[nest].loop();
  while (l->body.size() == 1 && l->body[0].is_loop()) {
    inner.push_back(0);
    l = &l->body[0].loop();
  }
  attempt(Transform::vectorize(inner));
  return steps;
}

// ---------------------------------------------------------------------------
// database

void RecipeDatabase::insert(Recipe recipe) {
  for (const auto& e : entries_) {
    if (e.key != recipe.key || e.mode != recipe.mode) continue;
    if (e.steps == recipe.steps) return;
    throw DuplicateKey("key " + hex64(recipe.key) + " (" + to_string(recipe.mode) +
                       ") already holds a different recipe");
  }
  entries_.push_back(std::move(recipe));
}

std::size_t RecipeDatabase::seed(const Program& normalized, KeyMode mode, const std::string& provenance) {
  std::size_t before = entries_.size();
  for (std::size_t t = 0; t < normalized.body.size(); ++t) {
    auto steps = default_steps(normalized, t);
    if (!steps) continue;
    insert(Recipe{match_key(normalized, normalized.body[t], mode), mode, std::move(*steps), provenance});
  }
  return entries_.size() - before;
}

const Recipe* RecipeDatabase::find(std::uint64_t key, KeyMode mode) const {
  for (const auto& e : entries_)
    if (e.key == key && e.mode == mode) return &e;
  return nullptr;
}

const Recipe* RecipeDatabase::lookup(const Program& context, const Node& nest) const {
  if (const Recipe* r = find(match_key(context, nest, KeyMode::Exact), KeyMode::Exact)) return r;
  return find(match_key(context, nest, KeyMode::ShapeInsensitive), KeyMode::ShapeInsensitive);
}

nlohmann::ordered_json RecipeDatabase::to_json() const {
  nlohmann::ordered_json j;
  j["version"] = kFormatVersion;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& e : entries_) {
    nlohmann::ordered_json r;
    r["key_hex"] = hex64(e.key);
    r["mode"] = to_string(e.mode);
    auto steps = nlohmann::ordered_json::array();
    for (const auto& s : e.steps) steps.push_back(loopnorm::to_json(s));
    r["steps"] = steps;
    r["provenance"] = e.provenance;
    arr.push_back(std::move(r));
  }
  j["entries"] = arr;
  return j;
}

RecipeDatabase RecipeDatabase::from_json(const nlohmann::ordered_json& j) {
  expect_fields(j, {"version", "entries"}, "$");
  if (field<int>(j, "version", "$") != kFormatVersion) throw FormatError("$.version: unsupported version", 0);
  const auto& entries = j.at("entries");
  if (!entries.is_array()) throw FormatError("$.entries: expected an array", 0);
  RecipeDatabase db;
  for (std::size_t k = 0; k < entries.size(); ++k) {
    std::string where = "$.entries[" + std::to_string(k) + "]";
    const auto& e = entries[k];
    expect_fields(e, {"key_hex", "mode", "steps", "provenance"}, where);
    Recipe r;
    auto hex = field<std::string>(e, "key_hex", where);
    auto [p, ec] = std::from_chars(hex.data(), hex.data() + hex.size(), r.key, 16);
    if (ec != std::errc() || p != hex.data() + hex.size() || hex.size() != 16)
      throw FormatError(where + ".key_hex: expected 16 hex digits", 0);
    try {
      r.mode = key_mode_from_string(field<std::string>(e, "mode", where));
    } catch (const FormatError&) {
      throw;
    } catch (const Error& err) {
      throw FormatError(where + ".mode: " + err.what(), 0);
    }
    const auto& steps = e.at("steps");
    if (!steps.is_array()) throw FormatError(where + ".steps: expected an array", 0);
    for (std::size_t s = 0; s < steps.size(); ++s)
      r.steps.push_back(transform_from_json(steps[s], where + ".steps[" + std::to_string(s) + "]"));
    r.provenance = field<std::string>(e, "provenance", where);
    db.insert(std::move(r));
  }
  return db;
}

std::string RecipeDatabase::dump() const { return to_json().dump(2) + "\n"; }

RecipeDatabase RecipeDatabase::parse(std::string_view text) { return from_json(parse_json(text)); }

void RecipeDatabase::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << dump();
}

RecipeDatabase RecipeDatabase::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

ApplyOutcome apply_database(const RecipeDatabase& db, const Program& normalized) {
  ApplyOutcome out{normalized, 0, 0, {}};
  for (std::size_t t = 0; t < out.program.body.size(); ++t) {
    if (!out.program.body[t].is_loop()) continue;
    const Recipe* r = db.lookup(out.program, out.program.body[t]);
    std::string head = "nest " + std::to_string(t) + " (" + out.program.body[t].loop().iter + ")";
    if (!r) {
      ++out.misses;
      out.log.push_back(head + ": no recipe");
      continue;
    }
    out.program = apply(*r, out.program, t);
    ++out.hits;
    std::string steps;
    for (const auto& s : r->steps) steps += (steps.empty() ? "" : ", ") + s.describe();
    out.log.push_back(head + ": " + hex64(r->key) + " [" + steps + "]");
  }
  return out;
}

// ---------------------------------------------------------------------------
// C emission

namespace {

class CEmitter {
 public:
  explicit CEmitter(const Program& p) : program_(p) {}

  std::string run(const std::string& name) {
    std::set<std::string> idioms;
    collect_idioms(program_.body, idioms);
    os_ << "#include <math.h>\n#include <stdint.h>\n\n";
    os_ << "static inline long ln_min(long a, long b) { return a < b ? a : b; }\n";
    os_ << "static inline long ln_max(long a, long b) { return a > b ? a : b; }\n";
    os_ << "static inline long ln_ceildiv(long a, long b) { return a >= 0 ? (a + b - 1) / b : -((-a) / b); }\n";
    for (const auto& id : idioms) {
      os_ << "\n/* " << prototype(id) << " */\n";
      os_ << "void cblas_" << id << "_stub();\n";
    }
    os_ << "\nvoid " << name << "(";
    bool first = true;
    for (const auto& p : program_.params) {
      os_ << (first ? "" : ", ") << "long " << p.name;
      first = false;
    }
    for (const auto& a : program_.arrays) {
      os_ << (first ? "" : ", ") << ctype(a.kind) << " " << a.name << "[restrict ";
      for (std::size_t d = 0; d < a.dims.size(); ++d) os_ << (d ? "][" : "") << a.dims[d].to_string();
      os_ << "]";
      first = false;
    }
    if (first) os_ << "void";
    os_ << ") {\n";
    body(program_.body, 1);
    os_ << "}\n";
    return os_.str();
  }

 private:
  static const char* ctype(ElementKind k) { return k == ElementKind::Int ? "int64_t" : "double"; }

  static std::string prototype(const std::string& idiom) {
    if (idiom == "gemm")
      return "cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, M, N, K, alpha, A, lda, B, ldb, beta, C, ldc)";
    if (idiom == "syrk") return "cblas_dsyrk(CblasRowMajor, CblasLower, CblasNoTrans, N, K, alpha, A, lda, beta, C, ldc)";
    if (idiom == "gemv") return "cblas_dgemv(CblasRowMajor, CblasNoTrans, M, N, alpha, A, lda, x, incx, beta, y, incy)";
    if (idiom == "dot") return "cblas_ddot(N, x, incx, y, incy)";
    if (idiom == "axpy") return "cblas_daxpy(N, alpha, x, incx, y, incy)";
    return "cblas_" + idiom + "(...)";
  }

  static void collect_idioms(const Body& b, std::set<std::string>& out) {
    for (const auto& n : b) {
      if (n.is_call()) out.insert(n.call().idiom);
      else if (n.is_loop()) collect_idioms(n.loop().body, out);
    }
  }

  void indent(int depth) {
    for (int k = 0; k < depth; ++k) os_ << "  ";
  }

  static std::string term(const BoundTerm& t) {
    if (t.divisor == 1) return t.expr.to_string();
    return "ln_ceildiv(" + t.expr.to_string() + ", " + std::to_string(t.divisor) + ")";
  }

  static std::string upper(const std::vector<BoundTerm>& terms, std::size_t from = 0) {
    if (from + 1 == terms.size()) return term(terms[from]);
    return "ln_min(" + term(terms[from]) + ", " + upper(terms, from + 1) + ")";
  }

  static std::string access(const Access& a) {
    std::string s = a.array;
    for (const auto& ix : a.indices) s += "[" + ix.to_string() + "]";
    return s;
  }

  std::string expr(const Computation& c, const Expr& e, bool fp) const {
    using Op = Expr::Op;
    switch (e.op) {
      case Op::Int: return std::to_string(e.int_value);
      case Op::Float: {
        std::ostringstream s;
        s.precision(17);
        s << e.float_value;
        std::string t = s.str();
        if (t.find_first_of(".eEn") == std::string::npos) t += ".0";
        return t;
      }
      case Op::Read: return access(c.reads[e.read]);
      case Op::Index: return "(" + e.index.to_string() + ")";
      case Op::Neg: return "(-" + expr(c, e.args[0], fp) + ")";
      case Op::Min:
      case Op::Max: {
        std::string fn = fp ? (e.op == Op::Min ? "fmin" : "fmax") : (e.op == Op::Min ? "ln_min" : "ln_max");
        return fn + "(" + expr(c, e.args[0], fp) + ", " + expr(c, e.args[1], fp) + ")";
      }
      default:
        return "(" + expr(c, e.args[0], fp) + " " + op_symbol(e.op) + " " + expr(c, e.args[1], fp) + ")";
    }
  }

  void body(const Body& b, int depth) {
    for (const auto& n : b) {
      if (n.is_loop()) {
        const Loop& l = n.loop();
        if (l.parallel || l.vectorize) {
          indent(depth);
          os_ << "#pragma omp " << (l.parallel ? (l.vectorize ? "parallel for simd" : "parallel for") : "simd")
              << "\n";
        }
        indent(depth);
        os_ << "for (long " << l.iter << " = " << l.lower.to_string() << "; " << l.iter << " < " << upper(l.upper)
            << "; ++" << l.iter << ") {\n";
        body(l.body, depth + 1);
        indent(depth);
        os_ << "}\n";
      } else if (n.is_call()) {
        const Call& c = n.call();
        indent(depth);
        os_ << "cblas_" << c.idiom << "_stub(";
        for (std::size_t k = 0; k < c.args.size(); ++k) os_ << (k ? ", " : "") << c.args[k];
        os_ << ");\n";
      } else {
        const Computation& c = n.computation();
        const ArrayDecl* decl = program_.find_array(c.write.array);
        bool fp = decl && decl->kind == ElementKind::Float;
        std::string rhs = expr(c, c.expr, fp);
        if (rhs.size() > 1 && rhs.front() == '(' && rhs.back() == ')' && c.expr.args.size() == 2) rhs = rhs.substr(1, rhs.size() - 2);
        indent(depth);
        os_ << access(c.write) << " = " << rhs << ";\n";
      }
    }
  }

  const Program& program_;
  std::ostringstream os_;
};

}  // namespace

std::string emit_c(const Program& program, const std::string& function_name) {
  return CEmitter(program).run(function_name);
}

}  // namespace loopnorm
