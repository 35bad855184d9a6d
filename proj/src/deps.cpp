#include "loopnorm/deps.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include "loopnorm/lower.hpp"

namespace loopnorm {

const char* to_string(DepKind k) {
  switch (k) {
    case DepKind::Flow: return "flow";
    case DepKind::Anti: return "anti";
    case DepKind::Output: return "output";
  }
  return "?";
}

const char* to_string(Direction d) {
  switch (d) {
    case Direction::Lt: return "<";
    case Direction::Eq: return "=";
    case Direction::Gt: return ">";
    case Direction::Star: return "*";
  }
  return "?";
}

namespace {

Direction sign_direction(std::int64_t d) {
  return d > 0 ? Direction::Lt : d < 0 ? Direction::Gt : Direction::Eq;
}

DepKind kind_of(bool src_is_write, bool dst_is_write) {
  if (src_is_write && dst_is_write) return DepKind::Output;
  return src_is_write ? DepKind::Flow : DepKind::Anti;
}

std::optional<std::size_t> first_non_eq(const std::vector<DepEntry>& entries) {
  for (std::size_t k = 0; k < entries.size(); ++k)
    if (entries[k].direction != Direction::Eq) return k;
  return std::nullopt;
}

struct CompInfo {
  const Computation* comp = nullptr;
  std::vector<const Loop*> loops;
  std::size_t ordinal = 0;

  const Access& access(std::size_t k) const { return k == 0 ? comp->write : comp->reads[k - 1]; }
  std::size_t access_count() const { return comp->reads.size() + 1; }
};

std::vector<CompInfo> collect(const Body& body) {
  std::vector<CompInfo> out;
  for_each_computation(body, [&](const Computation& c, std::span<const Loop* const> loops) {
    out.push_back(CompInfo{&c, std::vector<const Loop*>(loops.begin(), loops.end()), out.size()});
  });
  return out;
}

std::size_t common_depth(const CompInfo& a, const CompInfo& b) {
  std::size_t c = 0;
  while (c < a.loops.size() && c < b.loops.size() && a.loops[c] == b.loops[c]) ++c;
  return c;
}

// Working entry during direction splitting.
struct Work {
  Direction dir = Direction::Star;
  std::optional<std::int64_t> dist;
};

class StaticAnalyzer {
 public:
  StaticAnalyzer(const std::vector<CompInfo>& comps) : comps_(comps) {}

  // Edges for one access pair; sets `inconclusive` when some subscript
  // could not be decided and the vector kept a '*'.
  std::vector<DependenceEdge> pair(const CompInfo& s, std::size_t a, const CompInfo& t, std::size_t b,
                                   bool& inconclusive) {
    inconclusive = false;
    const Access& as = s.access(a);
    const Access& at = t.access(b);
    std::size_t c = common_depth(s, t);
    std::vector<Work> vec(c);
    std::vector<bool> mentioned(c, false);
    bool undecided = false;

    for (std::size_t d = 0; d < as.indices.size(); ++d) {
      const AffineExpr& fs = as.indices[d];
      const AffineExpr& ft = at.indices[d];
      std::vector<std::int64_t> cs(s.loops.size()), ct(t.loops.size());
      AffineExpr ps(fs.constant()), pt(ft.constant());
      split_terms(fs, s, cs, ps);
      split_terms(ft, t, ct, pt);
      for (std::size_t l = 0; l < c; ++l)
        if (cs[l] != 0 || ct[l] != 0) mentioned[l] = true;
      AffineExpr pdiff = ps;
      pdiff -= pt;
      if (!pdiff.is_constant()) {
        undecided = true;
        continue;
      }
      // sum(cs*xs) - sum(ct*xt) = rhs
      std::int64_t rhs = -pdiff.constant();
      std::int64_t g = 0;
      std::vector<std::size_t> used_s, used_t;
      for (std::size_t l = 0; l < cs.size(); ++l)
        if (cs[l]) {
          g = std::gcd(g, cs[l]);
          used_s.push_back(l);
        }
      for (std::size_t l = 0; l < ct.size(); ++l)
        if (ct[l]) {
          g = std::gcd(g, ct[l]);
          used_t.push_back(l);
        }
      if (g == 0) {
        if (rhs != 0) return {};
        continue;
      }
      if (rhs % g != 0) return {};
      bool strong = used_s.size() == 1 && used_t.size() == 1 && used_s[0] == used_t[0] && used_s[0] < c &&
                    cs[used_s[0]] == ct[used_t[0]];
      if (!strong) {
        undecided = true;
        continue;
      }
      std::size_t l = used_s[0];
      std::int64_t coef = cs[l];
      if (rhs % coef != 0) return {};
      std::int64_t dist = -rhs / coef;
      if (vec[l].dist && *vec[l].dist != dist) return {};
      vec[l].dist = dist;
      vec[l].dir = sign_direction(dist);
    }

    refine_tiles(s, c, vec, mentioned);
    bool has_star = std::any_of(vec.begin(), vec.end(), [](const Work& w) { return w.dir == Direction::Star; });
    inconclusive = undecided && has_star;

    std::vector<DependenceEdge> out;
    split(s, a, t, b, vec, 0, out);
    return out;
  }

 private:
  static void split_terms(const AffineExpr& f, const CompInfo& ci, std::vector<std::int64_t>& coeffs,
                          AffineExpr& params) {
    for (const auto& [name, k] : f.terms()) {
      bool iter = false;
      for (std::size_t l = ci.loops.size(); l-- > 0;) {
        if (ci.loops[l]->iter == name) {
          coeffs[l] += k;
          iter = true;
          break;
        }
      }
      if (!iter) params.add_term(name, k);
    }
  }

  // A loop t that no subscript mentions is pinned by an inner point loop p
  // spanning exactly one tile of t (lower X + s*t, an upper term X + s*t + s):
  // equal p values imply equal t values.
  static void refine_tiles(const CompInfo& s, std::size_t c, std::vector<Work>& vec,
                           const std::vector<bool>& mentioned) {
    for (std::size_t t = 0; t < c; ++t) {
      if (vec[t].dir != Direction::Star || mentioned[t]) continue;
      const std::string& tname = s.loops[t]->iter;
      for (std::size_t p = t + 1; p < c; ++p) {
        if (!vec[p].dist || *vec[p].dist != 0) continue;
        const Loop& pl = *s.loops[p];
        std::int64_t step = pl.lower.coeff(tname);
        if (step <= 0) continue;
        AffineExpr tile_end = pl.lower + AffineExpr(step);
        bool pinned = std::any_of(pl.upper.begin(), pl.upper.end(),
                                  [&](const BoundTerm& b) { return b.divisor == 1 && b.expr == tile_end; });
        if (pinned) {
          vec[t].dist = 0;
          vec[t].dir = Direction::Eq;
          break;
        }
      }
    }
  }

  void edge(const CompInfo& src, std::size_t sa, const CompInfo& dst, std::size_t da, const std::vector<Work>& vec,
            bool negate, std::vector<DependenceEdge>& out) const {
    DependenceEdge e;
    e.src = src.comp->id;
    e.dst = dst.comp->id;
    e.array = src.access(sa).array;
    e.src_access = sa;
    e.dst_access = da;
    e.kind = kind_of(sa == 0, da == 0);
    for (std::size_t l = 0; l < vec.size(); ++l) {
      DepEntry en;
      en.iter = src.loops[l]->iter;
      Work w = vec[l];
      if (negate) {
        if (w.dist) w.dist = -*w.dist;
        if (w.dir == Direction::Lt) w.dir = Direction::Gt;
        else if (w.dir == Direction::Gt) w.dir = Direction::Lt;
      }
      en.distance = w.dist;
      en.direction = w.dir;
      e.entries.push_back(std::move(en));
    }
    e.carried_at = first_non_eq(e.entries);
    out.push_back(std::move(e));
  }

  void split(const CompInfo& s, std::size_t a, const CompInfo& t, std::size_t b, std::vector<Work> vec,
             std::size_t from, std::vector<DependenceEdge>& out) const {
    std::size_t k = from;
    while (k < vec.size() && vec[k].dir == Direction::Eq) ++k;
    if (k == vec.size()) {
      if (s.ordinal < t.ordinal) edge(s, a, t, b, vec, false, out);
      else if (t.ordinal < s.ordinal) edge(t, b, s, a, vec, true, out);
      return;
    }
    switch (vec[k].dir) {
      case Direction::Lt: edge(s, a, t, b, vec, false, out); return;
      case Direction::Gt: edge(t, b, s, a, vec, true, out); return;
      default: break;
    }
    std::vector<Work> lt = vec, gt = vec;
    lt[k].dir = Direction::Lt;
    gt[k].dir = Direction::Gt;
    edge(s, a, t, b, lt, false, out);
    edge(t, b, s, a, gt, true, out);
    vec[k].dir = Direction::Eq;
    vec[k].dist = 0;
    split(s, a, t, b, std::move(vec), k + 1, out);
  }

  const std::vector<CompInfo>& comps_;
};

void dedupe(std::vector<DependenceEdge>& edges) {
  std::vector<DependenceEdge> out;
  for (auto& e : edges)
    if (std::find(out.begin(), out.end(), e) == out.end()) out.push_back(std::move(e));
  edges = std::move(out);
}

using SitePair = std::tuple<std::string, std::size_t, std::string, std::size_t>;

SitePair unordered_sites(const std::string& c1, std::size_t a1, const std::string& c2, std::size_t a2) {
  if (std::tie(c1, a1) <= std::tie(c2, a2)) return {c1, a1, c2, a2};
  return {c2, a2, c1, a1};
}

DependenceGraph oracle_impl(const Program& program, const Body& body, const Bindings& bindings, std::uint64_t cap,
                            std::uint64_t pair_cap, OracleScope scope) {
  ExecutionPlan plan = lower(program, body, bindings);
  if (count_instances(plan, cap) > cap)
    throw IterationCapExceeded("brute-force oracle: more than " + std::to_string(cap) + " instances");

  std::vector<bool> written(plan.arrays.size(), false);
  for (const auto& c : plan.comps) written[c.write.array] = true;

  // Events per cell, in execution order. Reads of an instance precede its write.
  struct Event {
    std::uint32_t comp;
    std::uint32_t access;
    std::uint64_t instance;
  };
  std::vector<std::vector<std::vector<Event>>> cells(plan.arrays.size());
  for (std::size_t k = 0; k < plan.arrays.size(); ++k)
    if (written[k]) cells[k].resize(static_cast<std::size_t>(plan.arrays[k].size));
  std::vector<std::int64_t> iter_store;
  std::vector<std::uint64_t> iter_offset;

  auto flat = [&](const PlanAccess& a, std::span<const std::int64_t> it) {
    const PlanArray& arr = plan.arrays[a.array];
    std::int64_t f = 0;
    for (std::size_t d = 0; d < a.indices.size(); ++d) {
      std::int64_t v = a.indices[d].eval(it);
      if (v < 0 || v >= arr.extents[d]) throw InterpError("out-of-bounds access to '" + arr.name + "'");
      f = f * arr.extents[d] + v;
    }
    return static_cast<std::size_t>(f);
  };

  std::uint64_t instance = 0;
  enumerate(
      plan,
      [&](std::size_t ci, std::span<const std::int64_t> it) {
        const PlanComp& c = plan.comps[ci];
        iter_offset.push_back(iter_store.size());
        iter_store.insert(iter_store.end(), it.begin(), it.end());
        for (std::size_t r = 0; r < c.reads.size(); ++r) {
          const PlanAccess& a = c.reads[r];
          if (!written[a.array]) continue;
          cells[a.array][flat(a, it)].push_back(
              Event{static_cast<std::uint32_t>(ci), static_cast<std::uint32_t>(r + 1), instance});
        }
        cells[c.write.array][flat(c.write, it)].push_back(Event{static_cast<std::uint32_t>(ci), 0, instance});
        ++instance;
      },
      cap);

  struct Agg {
    std::vector<std::int64_t> first;
    std::vector<bool> constant;
  };
  std::map<std::vector<std::int64_t>, Agg> groups;
  std::uint64_t pairs = 0;
  std::vector<std::int64_t> key;
  std::vector<std::int64_t> dist;
  auto record = [&](const Event& e1, const Event& e2) {
    if (e1.instance == e2.instance) return;
    if (++pairs > pair_cap)
      throw IterationCapExceeded("brute-force oracle: more than " + std::to_string(pair_cap) + " access pairs");
    const PlanComp& c1 = plan.comps[e1.comp];
    const PlanComp& c2 = plan.comps[e2.comp];
    std::size_t common = 0;
    while (common < c1.loop_ids.size() && common < c2.loop_ids.size() && c1.loop_ids[common] == c2.loop_ids[common])
      ++common;
    const std::int64_t* i1 = iter_store.data() + iter_offset[e1.instance];
    const std::int64_t* i2 = iter_store.data() + iter_offset[e2.instance];
    key.assign({static_cast<std::int64_t>(e1.comp), static_cast<std::int64_t>(e1.access),
                static_cast<std::int64_t>(e2.comp), static_cast<std::int64_t>(e2.access)});
    dist.resize(common);
    for (std::size_t l = 0; l < common; ++l) {
      dist[l] = i2[l] - i1[l];
      key.push_back(dist[l] > 0 ? 1 : dist[l] < 0 ? -1 : 0);
    }
    auto [it, fresh] = groups.try_emplace(key);
    if (fresh) {
      it->second.first = dist;
      it->second.constant.assign(common, true);
    } else {
      for (std::size_t l = 0; l < common; ++l)
        if (it->second.first[l] != dist[l]) it->second.constant[l] = false;
    }
  };

  std::vector<const Event*> reads_since;
  for (const auto& arr : cells) {
    for (const auto& events : arr) {
      if (scope == OracleScope::AllPairs) {
        for (std::size_t x = 0; x < events.size(); ++x)
          for (std::size_t y = x + 1; y < events.size(); ++y)
            if (events[x].access == 0 || events[y].access == 0) record(events[x], events[y]);
        continue;
      }
      const Event* last_write = nullptr;
      reads_since.clear();
      for (const Event& e : events) {
        if (e.access != 0) {
          if (last_write) record(*last_write, e);
          reads_since.push_back(&e);
          continue;
        }
        if (last_write) record(*last_write, e);
        // a read answers to the next write of another instance
        std::erase_if(reads_since, [&](const Event* r) {
          if (r->instance == e.instance) return false;
          record(*r, e);
          return true;
        });
        last_write = &e;
      }
    }
  }

  DependenceGraph g;
  for (const auto& c : plan.comps) g.nodes.push_back(c.id);
  for (const auto& [k, agg] : groups) {
    const PlanComp& c1 = plan.comps[static_cast<std::size_t>(k[0])];
    const PlanComp& c2 = plan.comps[static_cast<std::size_t>(k[2])];
    DependenceEdge e;
    e.src = c1.id;
    e.dst = c2.id;
    e.src_access = static_cast<std::size_t>(k[1]);
    e.dst_access = static_cast<std::size_t>(k[3]);
    e.kind = kind_of(e.src_access == 0, e.dst_access == 0);
    const PlanAccess& acc = e.src_access == 0 ? c1.write : c1.reads[e.src_access - 1];
    e.array = plan.arrays[acc.array].name;
    for (std::size_t l = 0; l < agg.first.size(); ++l) {
      DepEntry en;
      en.iter = c1.iters[l];
      en.direction = sign_direction(k[4 + l]);
      if (agg.constant[l]) en.distance = agg.first[l];
      e.entries.push_back(std::move(en));
    }
    e.carried_at = first_non_eq(e.entries);
    e.concrete_exact = true;
    g.edges.push_back(std::move(e));
  }
  return g;
}

bool could_bind(const Program& program, const Bindings& bindings) {
  for (const auto& p : program.params)
    if (!p.default_value && !bindings.contains(p.name)) return false;
  return true;
}

}  // namespace

DependenceGraph analyze(const Program& program, const AnalysisOptions& options) {
  return analyze(program, program.body, options);
}

DependenceGraph analyze(const Program& program, const Body& body, const AnalysisOptions& options) {
  std::vector<CompInfo> comps = collect(body);
  StaticAnalyzer sa(comps);
  DependenceGraph g;
  for (const auto& c : comps) g.nodes.push_back(c.comp->id);

  std::set<SitePair> inconclusive;
  for (std::size_t x = 0; x < comps.size(); ++x) {
    for (std::size_t y = x; y < comps.size(); ++y) {
      const CompInfo& s = comps[x];
      const CompInfo& t = comps[y];
      for (std::size_t a = 0; a < s.access_count(); ++a) {
        for (std::size_t b = (x == y ? a : 0); b < t.access_count(); ++b) {
          if (a != 0 && b != 0) continue;
          if (s.access(a).array != t.access(b).array) continue;
          bool unsure = false;
          auto edges = sa.pair(s, a, t, b, unsure);
          if (unsure && !edges.empty()) inconclusive.insert(unordered_sites(s.comp->id, a, t.comp->id, b));
          for (auto& e : edges) g.edges.push_back(std::move(e));
        }
      }
    }
  }
  dedupe(g.edges);

  if (!inconclusive.empty() && options.concrete_upgrade && could_bind(program, options.bindings)) {
    try {
      DependenceGraph exact = oracle_impl(program, body, options.bindings, options.concrete_cap, 50'000'000, OracleScope::Direct);
      auto site_of = [](const DependenceEdge& e) {
        return unordered_sites(e.src, e.src_access, e.dst, e.dst_access);
      };
      std::erase_if(g.edges, [&](const DependenceEdge& e) { return inconclusive.contains(site_of(e)); });
      for (auto& e : exact.edges)
        if (inconclusive.contains(site_of(e))) g.edges.push_back(std::move(e));
    } catch (const Error&) {
      // Iteration space too large or not executable: keep the static answer.
    }
  }
  return g;
}

DependenceGraph brute_force_oracle(const Program& program, const Bindings& bindings, std::uint64_t cap,
                                   std::uint64_t pair_cap, OracleScope scope) {
  return oracle_impl(program, program.body, bindings, cap, pair_cap, scope);
}

DependenceGraph brute_force_oracle(const Program& program, const Body& body, const Bindings& bindings,
                                   std::uint64_t cap, std::uint64_t pair_cap, OracleScope scope) {
  return oracle_impl(program, body, bindings, cap, pair_cap, scope);
}

bool covers(const DependenceEdge& general, const DependenceEdge& specific) {
  if (general.src != specific.src || general.dst != specific.dst || general.kind != specific.kind ||
      general.src_access != specific.src_access || general.dst_access != specific.dst_access ||
      general.entries.size() != specific.entries.size())
    return false;
  for (std::size_t k = 0; k < general.entries.size(); ++k) {
    const DepEntry& g = general.entries[k];
    const DepEntry& s = specific.entries[k];
    if (g.direction == Direction::Star) continue;
    if (s.direction == Direction::Star || g.direction != s.direction) return false;
    if (g.distance && s.distance != g.distance) return false;
  }
  return true;
}

bool may_be_lex_negative(std::span<const Direction> dirs) {
  for (Direction d : dirs) {
    if (d == Direction::Eq) continue;
    return d != Direction::Lt;
  }
  return false;
}

// ---------------------------------------------------------------------------
// bands

namespace {

void find_bands(const Body& body, NodePath& path, std::size_t depth, std::vector<Band>& out) {
  for (std::size_t k = 0; k < body.size(); ++k) {
    if (!body[k].is_loop()) continue;
    path.push_back(k);
    NodePath root = path;
    const Loop* cur = &body[k].loop();
    std::size_t size = 1;
    std::size_t pushed = 0;
    while (cur->body.size() == 1 && cur->body[0].is_loop()) {
      path.push_back(0);
      ++pushed;
      cur = &cur->body[0].loop();
      ++size;
    }
    bool leaf = !cur->body.empty() &&
                std::all_of(cur->body.begin(), cur->body.end(), [](const Node& n) { return n.is_computation(); });
    if (leaf) out.push_back(Band{root, depth, size});
    else find_bands(cur->body, path, depth + size, out);
    for (std::size_t p = 0; p < pushed; ++p) path.pop_back();
    path.pop_back();
  }
}

std::size_t loop_depth_of(const Body& body, const NodePath& path) {
  std::size_t depth = 0;
  const Body* cur = &body;
  for (std::size_t k : path) {
    const Node& n = (*cur)[k];
    if (n.is_loop()) {
      ++depth;
      cur = &n.loop().body;
    } else if (n.is_call()) {
      cur = &n.call().reference;
    }
  }
  return depth;
}

void check_perm(const std::vector<std::size_t>& perm, std::size_t size) {
  std::vector<std::size_t> sorted = perm;
  std::sort(sorted.begin(), sorted.end());
  bool ok = sorted.size() == size;
  for (std::size_t k = 0; ok && k < size; ++k) ok = sorted[k] == k;
  if (!ok) throw InvalidProgram("not a permutation of the band's " + std::to_string(size) + " loops");
}

void check_band(const Body& body, const Band& band) {
  auto bands = perfect_bands(body);
  bool found = std::any_of(bands.begin(), bands.end(), [&](const Band& b) {
    return b.root == band.root && b.size == band.size;
  });
  if (!found) throw InvalidProgram("permutation touches loops outside a perfectly nested band");
}

}  // namespace

std::vector<Band> perfect_bands(const Body& body) {
  std::vector<Band> out;
  NodePath path;
  find_bands(body, path, 0, out);
  return out;
}

std::vector<const Loop*> band_loops(const Body& body, const Band& band) {
  std::vector<const Loop*> out;
  const Loop* cur = &node_at(body, band.root).loop();
  out.push_back(cur);
  for (std::size_t k = 1; k < band.size; ++k) {
    cur = &cur->body.at(0).loop();
    out.push_back(cur);
  }
  return out;
}

Body permute_band(const Body& body, const Band& band, const std::vector<std::size_t>& perm) {
  check_perm(perm, band.size);
  Body out = body;
  std::vector<const Loop*> loops = band_loops(body, band);
  Body inner = loops.back()->body;
  for (std::size_t p = band.size; p-- > 0;) {
    Loop l = *loops[perm[p]];
    l.body = std::move(inner);
    inner = Body{};
    inner.push_back(Node(std::move(l)));
  }
  node_at(out, band.root) = std::move(inner.front());
  return out;
}

bool is_permutation_feasible(const Body& body, const Band& band, const std::vector<std::size_t>& perm) {
  check_perm(perm, band.size);
  std::vector<const Loop*> loops = band_loops(body, band);
  for (std::size_t p = 0; p < perm.size(); ++p) {
    const Loop& l = *loops[perm[p]];
    for (std::size_t q = p + 1; q < perm.size(); ++q)
      if (l.bounds_mention(loops[perm[q]]->iter)) return false;
  }
  return true;
}

bool is_permutation_legal(const Body& body, const Band& band, const std::vector<std::size_t>& perm,
                          const DependenceGraph& graph) {
  check_band(body, band);
  if (!is_permutation_feasible(body, band, perm)) return false;
  auto ids = computation_ids(node_at(body, band.root));
  std::set<std::string> inside(ids.begin(), ids.end());
  std::vector<Direction> dirs;
  for (const auto& e : graph.edges) {
    if (!inside.contains(e.src) || !inside.contains(e.dst)) continue;
    if (e.entries.size() < band.depth + band.size) continue;
    dirs.clear();
    for (const auto& en : e.entries) dirs.push_back(en.direction);
    for (std::size_t p = 0; p < band.size; ++p) dirs[band.depth + p] = e.entries[band.depth + perm[p]].direction;
    if (may_be_lex_negative(dirs)) return false;
  }
  return true;
}

std::vector<std::string> computation_ids(const Node& node) {
  std::vector<std::string> out;
  Body tmp;
  tmp.push_back(node);
  for_each_computation(tmp, [&](const Computation& c, auto) { out.push_back(c.id); });
  return out;
}

namespace {

// Edge may be carried at entry `level` or be independent of it, within one
// iteration of every loop outside `level`.
bool within_outer_iteration(const DependenceEdge& e, std::size_t level) {
  if (e.entries.size() <= level) return false;
  for (std::size_t k = 0; k < level; ++k) {
    Direction d = e.entries[k].direction;
    if (d != Direction::Eq && d != Direction::Star) return false;
  }
  return true;
}

}  // namespace

std::vector<std::vector<std::size_t>> fission_partition(const Body& body, const NodePath& loop_path,
                                                        const DependenceGraph& graph) {
  const Loop& loop = node_at(body, loop_path).loop();
  std::size_t level = loop_depth_of(body, loop_path) - 1;
  std::size_t n = loop.body.size();
  std::map<std::string, std::size_t, std::less<>> owner;
  for (std::size_t k = 0; k < n; ++k)
    for (auto& id : computation_ids(loop.body[k])) owner[id] = k;

  std::vector<std::set<std::size_t>> succ(n);
  for (const auto& e : graph.edges) {
    auto s = owner.find(e.src);
    auto d = owner.find(e.dst);
    if (s == owner.end() || d == owner.end() || s->second == d->second) continue;
    if (!within_outer_iteration(e, level)) continue;
    succ[s->second].insert(d->second);
  }

  // Tarjan.
  std::vector<int> index(n, -1), low(n, 0), comp(n, -1);
  std::vector<bool> on_stack(n, false);
  std::vector<std::size_t> stack;
  int counter = 0, ncomp = 0;
  std::function<void(std::size_t)> strong = [&](std::size_t v) {
    index[v] = low[v] = counter++;
    stack.push_back(v);
    on_stack[v] = true;
    for (std::size_t w : succ[v]) {
      if (index[w] < 0) {
        strong(w);
        low[v] = std::min(low[v], low[w]);
      } else if (on_stack[w]) {
        low[v] = std::min(low[v], index[w]);
      }
    }
    if (low[v] == index[v]) {
      while (true) {
        std::size_t w = stack.back();
        stack.pop_back();
        on_stack[w] = false;
        comp[w] = ncomp;
        if (w == v) break;
      }
      ++ncomp;
    }
  };
  for (std::size_t v = 0; v < n; ++v)
    if (index[v] < 0) strong(v);

  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(ncomp));
  for (std::size_t v = 0; v < n; ++v) members[static_cast<std::size_t>(comp[v])].push_back(v);
  std::vector<std::set<std::size_t>> csucc(members.size());
  std::vector<std::size_t> indeg(members.size(), 0);
  for (std::size_t v = 0; v < n; ++v)
    for (std::size_t w : succ[v]) {
      auto cv = static_cast<std::size_t>(comp[v]), cw = static_cast<std::size_t>(comp[w]);
      if (cv != cw && csucc[cv].insert(cw).second) ++indeg[cw];
    }

  // Kahn, smallest original child index first.
  std::set<std::pair<std::size_t, std::size_t>> ready;
  for (std::size_t c = 0; c < members.size(); ++c)
    if (indeg[c] == 0) ready.insert({members[c].front(), c});
  std::vector<std::vector<std::size_t>> out;
  while (!ready.empty()) {
    auto [first, c] = *ready.begin();
    ready.erase(ready.begin());
    out.push_back(members[c]);
    for (std::size_t w : csucc[c])
      if (--indeg[w] == 0) ready.insert({members[w].front(), w});
  }
  return out;
}

bool carries_dependence(const Body& body, const NodePath& loop_path, const DependenceGraph& graph) {
  std::size_t level = loop_depth_of(body, loop_path) - 1;
  auto ids = computation_ids(node_at(body, loop_path));
  std::set<std::string> inside(ids.begin(), ids.end());
  for (const auto& e : graph.edges) {
    if (!inside.contains(e.src) || !inside.contains(e.dst)) continue;
    if (!within_outer_iteration(e, level)) continue;
    if (e.entries[level].direction != Direction::Eq) return true;
  }
  return false;
}

}  // namespace loopnorm
