#include "loopnorm/normalize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "loopnorm/canonical.hpp"
#include "loopnorm/lower.hpp"

namespace loopnorm {

const char* to_string(MetricMode m) { return m == MetricMode::TotalDistance ? "distance" : "ooo"; }

MetricMode metric_mode_from_string(std::string_view s) {
  if (s == "distance") return MetricMode::TotalDistance;
  if (s == "ooo") return MetricMode::OutOfOrder;
  throw Error("unknown metric '" + std::string(s) + "' (expected distance or ooo)");
}

AnalysisOptions analysis_options(const Bindings& bindings) {
  AnalysisOptions o;
  o.bindings = bindings;
  return o;
}

std::string scope_text(const Body& body, const NodePath& path) {
  std::string out = "body";
  const Body* cur = &body;
  for (std::size_t k : path) {
    out += "[" + std::to_string(k) + "]";
    const Node& n = (*cur)[k];
    if (n.is_loop()) {
      out += "/loop " + n.loop().iter + "/body";
      cur = &n.loop().body;
    } else if (n.is_call()) {
      out += "/call " + n.call().idiom + "/body";
      cur = &n.call().reference;
    } else {
      out += "/comp " + n.computation().id;
    }
  }
  if (out.size() >= 5 && out.ends_with("/body")) out.resize(out.size() - 5);
  return out;
}

// ---------------------------------------------------------------------------
// stride

Bindings shrink_bindings(const Program& context, const Body& body, const Bindings& requested, std::uint64_t cap,
                         bool* scaled) {
  Bindings base = resolve_bindings(context, requested);
  if (scaled) *scaled = false;
  std::uint64_t count = count_instances(lower(context, body, base), cap);
  if (count <= cap) return base;
  double factor = 1.0;
  Bindings cur = base;
  while (count > cap) {
    factor *= 0.8;
    bool moved = false;
    for (auto& [name, v] : cur) {
      auto nv = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(static_cast<double>(base.at(name)) * factor)));
      if (nv != v) moved = true;
      v = nv;
    }
    if (!moved && factor < 1e-9) break;
    count = count_instances(lower(context, body, cur), cap);
  }
  if (count > cap) throw IterationCapExceeded("stride: iteration space exceeds the cap even with minimal bindings");
  if (scaled) *scaled = true;
  return cur;
}

std::uint64_t out_of_order_count(const Node& nest) {
  Body b;
  b.push_back(nest);
  std::uint64_t total = 0;
  for_each_computation(b, [&](const Computation& c, std::span<const Loop* const> loops) {
    auto count_access = [&](const Access& a) {
      for (std::size_t o = 0; o < loops.size(); ++o) {
        for (std::size_t n = o + 1; n < loops.size(); ++n) {
          bool out = false;
          for (std::size_t dout = 0; dout < a.indices.size() && !out; ++dout) {
            if (!a.indices[dout].mentions(loops[o]->iter)) continue;
            for (std::size_t din = 0; din < dout; ++din)
              if (a.indices[din].mentions(loops[n]->iter)) out = true;
          }
          if (out) ++total;
        }
      }
    };
    count_access(c.write);
    for (const auto& r : c.reads) count_access(r);
  });
  return total;
}

StrideValue stride(const Program& context, const Node& nest, const StrideMetric& metric) {
  StrideValue out;
  if (metric.mode == MetricMode::OutOfOrder) {
    out.value = out_of_order_count(nest);
    return out;
  }
  Body body;
  body.push_back(nest);
  out.bindings = shrink_bindings(context, body, metric.bindings, metric.cap, &out.scaled);
  ExecutionPlan plan = lower(context, body, out.bindings);
  std::vector<std::vector<std::int64_t>> last(plan.comps.size());
  std::vector<std::vector<bool>> seen(plan.comps.size());
  for (std::size_t k = 0; k < plan.comps.size(); ++k) {
    last[k].assign(plan.comps[k].reads.size() + 1, 0);
    seen[k].assign(plan.comps[k].reads.size() + 1, false);
  }
  std::uint64_t total = 0;
  enumerate(
      plan,
      [&](std::size_t ci, std::span<const std::int64_t> it) {
        const PlanComp& c = plan.comps[ci];
        for (std::size_t a = 0; a <= c.reads.size(); ++a) {
          const PlanAccess& acc = a == 0 ? c.write : c.reads[a - 1];
          std::int64_t addr = acc.address.eval(it);
          if (seen[ci][a]) total += static_cast<std::uint64_t>(std::llabs(addr - last[ci][a]));
          seen[ci][a] = true;
          last[ci][a] = addr;
        }
      },
      metric.cap);
  out.value = total;
  return out;
}

// ---------------------------------------------------------------------------
// fission

namespace {

Body& parent_body(Body& root, const NodePath& path) {
  if (path.size() == 1) return root;
  Node& parent = node_at(root, std::span<const std::size_t>(path.data(), path.size() - 1));
  return parent.is_loop() ? parent.loop().body : parent.call().reference;
}

// Replaces the loop at `path` by one copy per group; copies after the first
// get fresh iterator names.
void split_at(Body& sub, const NodePath& path, const std::vector<std::vector<std::size_t>>& groups,
              std::vector<std::string>& taken) {
  const Loop original = node_at(sub, path).loop();
  std::vector<Node> pieces;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    Loop piece = original;
    piece.body.clear();
    for (std::size_t child : groups[g]) piece.body.push_back(original.body[child]);
    if (g > 0) {
      std::string fresh = fresh_name(original.iter, taken);
      Body wrapped;
      wrapped.push_back(Node(std::move(piece)));
      rename_in_body(wrapped, {{original.iter, fresh}}, {});
      piece = std::move(wrapped.front().loop());
    }
    pieces.push_back(Node(std::move(piece)));
  }
  Body& parent = parent_body(sub, path);
  std::size_t at = path.back();
  parent.erase(parent.begin() + static_cast<std::ptrdiff_t>(at));
  parent.insert(parent.begin() + static_cast<std::ptrdiff_t>(at), pieces.begin(), pieces.end());
}

// Splits the first fissionable loop (preorder) of `sub`. Returns true when
// something was split.
bool split_first(const Program& program, Body& sub, const AnalysisOptions& options, std::vector<std::string>& taken,
                 std::size_t top_index, std::vector<FissionStep>* steps) {
  DependenceGraph graph = analyze(program, sub, options);
  std::vector<NodePath> paths;
  for_each_loop(sub, [&](const Loop&, const NodePath& p) { paths.push_back(p); });
  for (const auto& path : paths) {
    auto groups = fission_partition(sub, path, graph);
    if (groups.size() <= 1) continue;
    if (steps) {
      std::string text = scope_text(sub, path);
      text.replace(0, std::string("body[0]").size(), "body[" + std::to_string(top_index) + "]");
      steps->push_back(FissionStep{text, groups.size()});
    }
    split_at(sub, path, groups, taken);
    return true;
  }
  return false;
}

}  // namespace

Program max_fission(const Program& program, const AnalysisOptions& options, std::vector<FissionStep>* steps) {
  Program cur = program;
  std::vector<std::string> taken = all_names(cur);
  for (std::size_t t = 0; t < cur.body.size(); ++t) {
    if (!cur.body[t].is_loop()) continue;
    Body sub;
    sub.push_back(cur.body[t]);
    while (split_first(cur, sub, options, taken, t, steps)) {
    }
    cur.body.erase(cur.body.begin() + static_cast<std::ptrdiff_t>(t));
    cur.body.insert(cur.body.begin() + static_cast<std::ptrdiff_t>(t), sub.begin(), sub.end());
    t += sub.size() - 1;
  }
  return cur;
}

std::optional<Program> distribute(const Program& program, const NodePath& path, const AnalysisOptions& options) {
  const Node& target = node_at(program.body, path);
  if (!target.is_loop()) return std::nullopt;
  DependenceGraph graph = analyze(program, options);
  auto groups = fission_partition(program.body, path, graph);
  if (groups.size() <= 1) return std::nullopt;
  Program out = program;
  std::vector<std::string> taken = all_names(out);
  split_at(out.body, path, groups, taken);
  return out;
}

// ---------------------------------------------------------------------------
// stride minimization

namespace {

// Sort key per band loop: the most significant array dimension it indexes
// (0 = slowest varying); loops indexing nothing sort first.
std::vector<std::size_t> grouped_order(const Body& sub, const Band& band) {
  auto loops = band_loops(sub, band);
  constexpr long kNone = std::numeric_limits<long>::max();
  std::vector<long> key(loops.size(), kNone);
  for_each_computation(loops.back()->body, [&](const Computation& c, auto) {
    auto visit = [&](const Access& a) {
      for (std::size_t l = 0; l < loops.size(); ++l)
        for (std::size_t d = 0; d < a.indices.size(); ++d)
          if (a.indices[d].mentions(loops[l]->iter)) key[l] = std::min(key[l], static_cast<long>(d));
    };
    visit(c.write);
    for (const auto& r : c.reads) visit(r);
  });
  for (auto& k : key)
    if (k == kNone) k = -1;
  std::vector<std::size_t> perm(loops.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::stable_sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });
  return perm;
}

std::vector<std::string> order_names(const std::vector<const Loop*>& loops, const std::vector<std::size_t>& perm) {
  std::vector<std::string> out;
  for (std::size_t p : perm) out.push_back(loops[p]->iter);
  return out;
}

}  // namespace

Program minimize_strides(const Program& program, const StrideMetric& metric, std::vector<BandReport>* reports) {
  Program cur = program;
  AnalysisOptions options = analysis_options(metric.bindings);
  for (std::size_t t = 0; t < cur.body.size(); ++t) {
    if (!cur.body[t].is_loop()) continue;
    Body sub;
    sub.push_back(cur.body[t]);
    for (const Band& band : perfect_bands(sub)) {
      if (band.size < 2) continue;
      DependenceGraph graph = analyze(cur, sub, options);
      auto loops = band_loops(sub, band);
      BandReport rep;
      std::string scope = scope_text(sub, band.root);
      rep.scope = scope.replace(0, std::string("body[0]").size(), "body[" + std::to_string(t) + "]");
      std::vector<std::size_t> identity(band.size);
      std::iota(identity.begin(), identity.end(), 0);
      rep.original_order = order_names(loops, identity);

      std::vector<std::size_t> best = identity;
      if (band.size > kPermCap) {
        rep.approximated = true;
        auto perm = grouped_order(sub, band);
        rep.considered = 1;
        if (is_permutation_legal(sub, band, perm, graph)) {
          rep.legal = 1;
          best = perm;
        }
        Body chosen = permute_band(sub, band, best);
        StrideValue sv = stride(cur, chosen.front(), metric);
        rep.stride = sv.value;
        rep.scaled = sv.scaled;
        rep.bindings = sv.bindings;
      } else {
        struct Candidate {
          std::vector<std::size_t> perm;
          Body body;
          StrideValue value;
        };
        std::vector<Candidate> legal;
        std::vector<std::size_t> perm = identity;
        do {
          ++rep.considered;
          if (!is_permutation_legal(sub, band, perm, graph)) continue;
          Body candidate = permute_band(sub, band, perm);
          StrideValue sv = stride(cur, candidate.front(), metric);
          rep.candidates.emplace_back(order_names(loops, perm), sv.value);
          legal.push_back(Candidate{perm, std::move(candidate), std::move(sv)});
        } while (std::next_permutation(perm.begin(), perm.end()));
        rep.legal = legal.size();
        std::uint64_t min_value = legal.front().value.value;
        for (const auto& c : legal) min_value = std::min(min_value, c.value.value);
        const Candidate* pick = nullptr;
        std::string pick_text;
        for (const auto& c : legal) {
          if (c.value.value != min_value) continue;
          std::string text = canonicalize(cur, c.body.front()).text;
          if (!pick || text < pick_text) {
            pick = &c;
            pick_text = std::move(text);
          }
        }
        best = pick->perm;
        rep.stride = pick->value.value;
        rep.scaled = pick->value.scaled;
        rep.bindings = pick->value.bindings;
      }
      rep.chosen_order = order_names(loops, best);
      sub = permute_band(sub, band, best);
      if (reports) reports->push_back(std::move(rep));
    }
    cur.body[t] = std::move(sub.front());
  }
  return cur;
}

Normalized normalize_program(const Program& program, const StrideMetric& metric) {
  require_valid(program);
  Normalized out;
  out.report.mode = metric.mode;
  AnalysisOptions options = analysis_options(metric.bindings);
  Program cur = program;
  for (int round = 0; round < 16; ++round) {
    std::vector<FissionStep> steps;
    std::vector<BandReport> bands;
    Program next = max_fission(cur, options, &steps);
    next = minimize_strides(next, metric, &bands);
    if (round == 0) out.report.bands = std::move(bands);
    for (auto& s : steps) out.report.fission_steps.push_back(std::move(s));
    ++out.report.rounds;
    if (next == cur) break;
    cur = std::move(next);
  }
  require_valid(cur);
  out.program = std::move(cur);
  return out;
}

nlohmann::ordered_json NormalizationReport::to_json() const {
  using J = nlohmann::ordered_json;
  J j;
  j["metric"] = loopnorm::to_string(mode);
  j["rounds"] = rounds;
  J fs = J::array();
  for (const auto& s : fission_steps) fs.push_back({{"scope", s.scope}, {"groups", s.groups}});
  j["fission_steps"] = {{"count", fission_steps.size()}, {"steps", fs}};
  J bs = J::array();
  for (const auto& b : bands) {
    J e;
    e["scope"] = b.scope;
    e["original_order"] = b.original_order;
    e["chosen_order"] = b.chosen_order;
    e["permutations_considered"] = b.considered;
    e["permutations_legal"] = b.legal;
    e["stride"] = b.stride;
    e["approximated"] = b.approximated;
    if (b.scaled) {
      J bind = J::object();
      for (const auto& [k, v] : b.bindings) bind[k] = v;
      e["scaled_bindings"] = bind;
    }
    J cands = J::array();
    for (const auto& [order, value] : b.candidates) cands.push_back({{"order", order}, {"stride", value}});
    e["candidates"] = cands;
    bs.push_back(std::move(e));
  }
  j["bands"] = bs;
  return j;
}

}  // namespace loopnorm
