// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit when any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include "loopnorm/canonical.hpp"
#include "loopnorm/deps.hpp"
#include "loopnorm/frontend.hpp"
#include "loopnorm/interp.hpp"
#include "loopnorm/normalize.hpp"
#include "loopnorm/recipes.hpp"
#include "loopnorm/variants.hpp"
#include "stride_oracle.hpp"
#include "test_util.hpp"

using namespace loopnorm;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Records the first failure; later ones only bump the count.
class Failures {
 public:
  void add(const std::string& what) {
    if (first_.empty()) first_ = what;
    ++count_;
  }
  Outcome outcome(const std::string& ok_detail) const {
    if (count_ == 0) return {true, ok_detail};
    return {false, std::to_string(count_) + " failure(s); first: " + first_};
  }

 private:
  std::string first_;
  std::size_t count_ = 0;
};

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

std::uint64_t fingerprint_of(const Program& p) { return canonicalize_program(p).fingerprint; }

std::vector<std::vector<std::size_t>> all_perms(std::size_t n) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  std::vector<std::vector<std::size_t>> out;
  do out.push_back(p);
  while (std::next_permutation(p.begin(), p.end()));
  return out;
}

std::size_t loop_count(const Node& n) {
  std::size_t c = 0;
  for_each_loop(Body{n}, [&](const Loop&, const NodePath&) { ++c; });
  return c;
}

// ---------------------------------------------------------------------------

Outcome convergence() {
  Failures f;
  std::size_t total = 0;
  for (const auto& name : testutil::corpus_names()) {
    Program origin = testutil::corpus(name);
    std::uint64_t expected = fingerprint_of(normalize_program(origin).program);
    for (std::uint64_t seed : {1, 2}) {
      auto vs = generate(origin, seed, 5);
      if (vs.size() < 5) f.add(name + ": only " + std::to_string(vs.size()) + " variants");
      for (std::size_t k = 0; k < vs.size(); ++k, ++total) {
        std::uint64_t got = fingerprint_of(normalize_program(vs[k].program).program);
        if (got != expected)
          f.add(name + " seed " + std::to_string(seed) + " variant " + std::to_string(k) + ": " + hex(got) +
                " != " + hex(expected));
      }
    }
  }
  return f.outcome(std::to_string(total) + " variants of 15 kernels, one fingerprint per kernel");
}

Outcome semantics() {
  Failures f;
  std::size_t runs = 0;
  auto configs = testutil::int_configs({1, 2, 3});
  for (const auto& name : testutil::corpus_names()) {
    Program origin = testutil::corpus(name);
    for (const auto& a : origin.arrays)
      for (const auto& d : a.dims) {
        std::int64_t e = d.is_symbolic() ? *origin.find_param(d.param)->default_value : d.size;
        if (e > 16) f.add(name + ": extent " + std::to_string(e) + " above 16");
      }
    Program norm = normalize_program(origin).program;
    RecipeDatabase db;
    db.seed(norm, KeyMode::Exact, name);
    Program tuned = apply_database(db, norm).program;
    Memory ref[3];
    for (std::size_t c = 0; c < configs.size(); ++c) {
      ref[c] = run(origin, configs[c]);
      for (const Program* p : {&norm, &tuned}) {
        ++runs;
        Verdict v = compare(ref[c], run(*p, configs[c]), Mode::Integer);
        if (!v) f.add(name + " seed " + std::to_string(configs[c].seed) + ": " + v.detail);
      }
    }
  }
  return f.outcome(std::to_string(runs) + " bit-identical comparisons (normalized and recipe-applied)");
}

Outcome idempotence() {
  Failures f;
  for (const auto& name : testutil::corpus_names()) {
    Program once = normalize_program(testutil::corpus(name)).program;
    Program twice = normalize_program(once).program;
    if (canonicalize_program(once).text != canonicalize_program(twice).text) f.add(name);
  }
  return f.outcome("15 kernels");
}

Outcome stride_minimality() {
  Failures f;
  std::size_t nests = 0, candidates = 0;
  for (const auto& name : testutil::corpus_names()) {
    Program norm = normalize_program(testutil::corpus(name)).program;
    DependenceGraph g = analyze(norm);
    testutil::StrideOracle oracle(norm, {});
    for (std::size_t t = 0; t < norm.body.size(); ++t) {
      if (!norm.body[t].is_loop() || loop_count(norm.body[t]) > 5) continue;
      ++nests;
      std::uint64_t base = oracle(norm.body[t]);
      for (const Band& band : perfect_bands(norm.body)) {
        if (band.root.front() != t || band.size < 2) continue;
        for (const auto& perm : all_perms(band.size)) {
          if (!is_permutation_legal(norm.body, band, perm, g)) continue;
          ++candidates;
          std::uint64_t v = oracle(permute_band(norm.body, band, perm)[t]);
          if (v < base)
            f.add(name + " nest " + std::to_string(t) + ": " + std::to_string(v) + " < " + std::to_string(base));
        }
      }
    }
  }
  return f.outcome(std::to_string(nests) + " nests, " + std::to_string(candidates) +
                   " legal permutations re-enumerated");
}

Outcome atomicity() {
  Failures f;
  std::size_t loops = 0;
  for (const auto& name : testutil::corpus_names()) {
    Program norm = normalize_program(testutil::corpus(name)).program;
    DependenceGraph g = analyze(norm);
    for_each_loop(norm.body, [&](const Loop&, const NodePath& path) {
      ++loops;
      auto groups = fission_partition(norm.body, path, g);
      if (groups.size() != 1)
        f.add(name + " " + scope_text(norm.body, path) + ": " + std::to_string(groups.size()) + " groups");
    });
  }
  return f.outcome(std::to_string(loops) + " loops, each a single atomic group");
}

Outcome gemm_convergence() {
  Failures f;
  std::set<std::uint64_t> fingerprints;
  for (const char* o : {"ijk", "ikj", "jik", "jki", "kij", "kji"}) {
    Program n = normalize_program(testutil::fixture(std::string("gemm_") + o + ".loop")).program;
    fingerprints.insert(fingerprint_of(n));
    if (n.body.size() != 1 || detect_idiom(n.body[0]) != "gemm") f.add(std::string(o) + ": no gemm idiom");
  }
  Program fused = normalize_program(testutil::fixture("gemm_init_fused.loop")).program;
  Program split = normalize_program(testutil::fixture("gemm_init.loop")).program;
  if (fused.body.size() != 2) {
    f.add("fused-init variant did not split into init and update nests");
  } else {
    fingerprints.insert(match_key(fused, fused.body[1], KeyMode::Exact));
    if (detect_idiom(fused.body[1]) != "gemm") f.add("fused-init update nest: no gemm idiom");
  }
  if (fingerprint_of(fused) != fingerprint_of(split)) f.add("fused-init and split-init programs differ");
  if (fingerprints.size() != 1) f.add(std::to_string(fingerprints.size()) + " distinct GEMM fingerprints");
  return f.outcome("6 orders + fused init -> " + (fingerprints.empty() ? "" : hex(*fingerprints.begin())) +
                   ", idiom gemm");
}

Outcome dependence_soundness() {
  Failures f;
  std::size_t edges = 0;
  for (const auto& name : testutil::corpus_names()) {
    Program p = testutil::corpus(name);
    Bindings small;
    for (const auto& prm : p.params) small[prm.name] = std::min<std::int64_t>(*prm.default_value, 8);
    AnalysisOptions static_only;
    static_only.concrete_upgrade = false;
    static_only.bindings = small;
    DependenceGraph g = analyze(p, static_only);
    for (OracleScope scope : {OracleScope::Direct, OracleScope::AllPairs}) {
      DependenceGraph oracle = brute_force_oracle(p, small, 1'000'000, 50'000'000, scope);
      for (const auto& o : oracle.edges) {
        ++edges;
        bool ok = std::any_of(g.edges.begin(), g.edges.end(), [&](const DependenceEdge& e) { return covers(e, o); });
        if (!ok) f.add(name + ": " + o.src + "->" + o.dst + " " + to_string(o.kind) + " on " + o.array);
      }
    }
  }
  return f.outcome(std::to_string(edges) + " oracle edges covered by static edges");
}

// Multiset of the values the original iterator takes at the computation.
std::vector<std::int64_t> visited(const Program& p, const std::string& iter) {
  std::vector<std::int64_t> out;
  std::map<std::string, std::int64_t, std::less<>> env;
  for (const auto& prm : p.params) env[prm.name] = *prm.default_value;
  auto value = [&](const AffineExpr& e) { return e.evaluate([&](std::string_view n) { return env.at(std::string(n)); }); };
  std::function<void(const Node&)> walk = [&](const Node& n) {
    if (n.is_computation()) {
      out.push_back(env.at(iter));
      return;
    }
    const Loop& l = n.loop();
    std::int64_t hi = INT64_MAX;
    for (const auto& t : l.upper) hi = std::min(hi, ceil_div(value(t.expr), t.divisor));
    for (std::int64_t v = value(l.lower); v < hi; ++v) {
      env[l.iter] = v;
      for (const auto& c : l.body) walk(c);
    }
    env.erase(l.iter);
  };
  for (const auto& n : p.body) walk(n);
  std::sort(out.begin(), out.end());
  return out;
}

Outcome tiling() {
  Failures f;
  std::size_t cases = 0;
  for (int e = 1; e <= 33; ++e)
    for (int lo : {0, 3})
      for (std::int64_t s = 2; s <= 8; ++s, ++cases) {
        Program p = parse("param E = " + std::to_string(e) + ";\narray A[40] : int;\nfor i in " + std::to_string(lo) +
                          "..E+" + std::to_string(lo) + " { A[i] = 1; }\n");
        Program t = tile(p, 0, {}, s);
        if (visited(p, "i") != visited(t, "i"))
          f.add("extent " + std::to_string(e) + " lower " + std::to_string(lo) + " size " + std::to_string(s));
      }
  return f.outcome(std::to_string(cases) + " (extent, lower, size) cases");
}

Outcome producer_consumer() {
  Failures f;
  Program in = testutil::fixture("cloud_erosion.loop");
  Program fissioned = max_fission(in);
  if (fissioned.body.size() != 4) f.add("max_fission gave " + std::to_string(fissioned.body.size()) + " nests");
  Program fused = apply_steps({Transform::fuse("all")}, fissioned, 0);
  std::vector<std::size_t> shape;
  for (const auto& n : fused.body) shape.push_back(n.is_loop() ? n.loop().body.size() : 0);
  if (shape != std::vector<std::size_t>{2, 2}) {
    std::string s;
    for (auto x : shape) s += std::to_string(x) + " ";
    f.add("nest sizes " + s);
  }
  Verdict v = equivalent(in, fused, testutil::int_configs());
  if (!v) f.add("not equivalent: " + v.detail);
  return f.outcome("4 singletons -> 2 fused pairs, interp-equivalent");
}

Outcome transfer() {
  Failures f;
  std::size_t lookups = 0, hits = 0;
  RecipeDatabase db;
  std::map<std::string, std::vector<Variant>> b_variants;
  for (const auto& name : testutil::corpus_names()) {
    Program origin = testutil::corpus(name);
    for (const auto& a : generate(origin, 101, 5)) db.seed(normalize_program(a.program).program, KeyMode::Exact, name);
  }
  for (const auto& name : testutil::corpus_names()) {
    Program origin = testutil::corpus(name);
    for (const auto& b : generate(origin, 202, 5)) {
      Program norm = normalize_program(b.program).program;
      for (const auto& n : norm.body) {
        if (!n.is_loop()) continue;
        ++lookups;
        if (db.lookup(norm, n)) ++hits;
        else f.add(name + ": no recipe for a nest");
      }
      try {
        ApplyOutcome out = apply_database(db, norm);
        Verdict v = equivalent(origin, out.program, testutil::int_configs(), b.array_map);
        if (!v) f.add(name + ": " + v.detail);
      } catch (const Error& e) {
        f.add(name + ": " + e.what());
      }
    }
  }
  return f.outcome(std::to_string(hits) + "/" + std::to_string(lookups) + " lookups hit; all applied programs equivalent");
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"convergence", 60, convergence},
      {"semantics preservation", 120, semantics},
      {"idempotence", 30, idempotence},
      {"stride minimality", 60, stride_minimality},
      {"fission atomicity", 60, atomicity},
      {"GEMM idiom convergence", 60, gemm_convergence},
      {"dependence soundness", 60, dependence_soundness},
      {"tiling set-equality", 10, tiling},
      {"producer-consumer fusion", 60, producer_consumer},
      {"database transfer", 120, transfer},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const auto& c = criteria[k];
    auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (o.pass && secs > c.budget_s) {
      o.pass = false;
      o.detail += " (over the " + std::to_string(static_cast<int>(c.budget_s)) + " s budget)";
    }
    std::ostringstream time;
    time.precision(2);
    time << std::fixed << secs;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << (k + 1) << ". " << c.name << ": " << o.detail << " ["
              << time.str() << " s]" << std::endl;
    if (!o.pass) ++failed;
  }
  std::cout << (failed ? "FAILED " : "ALL PASSED ") << criteria.size() - static_cast<std::size_t>(failed) << "/"
            << criteria.size() << std::endl;
  return failed ? 1 : 0;
}
