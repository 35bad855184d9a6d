#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "loopnorm/deps.hpp"
#include "loopnorm/error.hpp"
#include "loopnorm/frontend.hpp"
#include "loopnorm/interp.hpp"
#include "loopnorm/normalize.hpp"
#include "random_program.hpp"
#include "test_util.hpp"

using namespace loopnorm;

namespace {

const char* kGemm4 =
    "param N = 4;\narray A[N, N] : int;\narray B[N, N] : int;\narray C[N, N] : int;\n"
    "for i in 0..N { for j in 0..N { for k in 0..N { C[i, j] += A[i, k] * B[k, j]; } } }\n";

AnalysisOptions static_only() {
  AnalysisOptions o;
  o.concrete_upgrade = false;
  return o;
}

std::vector<const DependenceEdge*> edges_on(const DependenceGraph& g, const std::string& array) {
  std::vector<const DependenceEdge*> out;
  for (const auto& e : g.edges)
    if (e.array == array) out.push_back(&e);
  return out;
}

// Every dynamic dependence found by enumeration must be admitted by some
// statically derived edge.
std::string uncovered(const DependenceGraph& oracle, const DependenceGraph& graph) {
  for (const auto& o : oracle.edges) {
    bool ok = std::any_of(graph.edges.begin(), graph.edges.end(), [&](const DependenceEdge& e) { return covers(e, o); });
    if (!ok) return o.src + "->" + o.dst + " " + to_string(o.kind) + " on " + o.array;
  }
  return {};
}

std::vector<std::vector<std::size_t>> all_perms(std::size_t n) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  std::vector<std::vector<std::size_t>> out;
  do out.push_back(p);
  while (std::next_permutation(p.begin(), p.end()));
  return out;
}

Program replace_body(const Program& p, Body body) {
  Program q = p;
  q.body = std::move(body);
  return q;
}

}  // namespace

TEST(Analyze, CarriedFlowDistanceOne) {
  Program p = parse("array A[8] : int;\nfor i in 1..8 { A[i] = A[i-1] + 1; }");
  auto g = analyze(p, static_only());
  auto flows = std::count_if(g.edges.begin(), g.edges.end(), [](const DependenceEdge& e) { return e.kind == DepKind::Flow; });
  ASSERT_EQ(flows, 1);
  const auto& e = *std::find_if(g.edges.begin(), g.edges.end(), [](const DependenceEdge& e) { return e.kind == DepKind::Flow; });
  ASSERT_EQ(e.entries.size(), 1u);
  EXPECT_EQ(e.entries[0].distance, 1);
  EXPECT_EQ(e.entries[0].direction, Direction::Lt);
  EXPECT_EQ(e.carried_at, 0u);
}

TEST(Analyze, GcdTestProvesIndependence) {
  Program p = parse("array A[16] : int;\nfor i in 0..7 { A[2*i] = A[2*i+1] + 1; }");
  EXPECT_TRUE(analyze(p, static_only()).edges.empty());
}

TEST(Analyze, GemmReductionEdgesOnC) {
  Program p = parse(kGemm4);
  auto oracle = brute_force_oracle(p, {});
  auto on_c = edges_on(oracle, "C");
  std::set<DepKind> kinds;
  for (const auto* e : on_c) {
    kinds.insert(e->kind);
    if (e->kind == DepKind::Flow) {
      ASSERT_EQ(e->entries.size(), 3u);
      EXPECT_EQ(e->entries[0].distance, 0);
      EXPECT_EQ(e->entries[1].distance, 0);
      EXPECT_EQ(e->entries[2].distance, 1);
    }
  }
  EXPECT_EQ(kinds, (std::set<DepKind>{DepKind::Flow, DepKind::Anti, DepKind::Output}));
  EXPECT_TRUE(edges_on(oracle, "A").empty());
  EXPECT_TRUE(edges_on(oracle, "B").empty());
  EXPECT_EQ(uncovered(oracle, analyze(p, static_only())), "");
}

TEST(Analyze, EdgesAreLexicographicallyNonNegative) {
  for (const auto& name : testutil::corpus_names()) {
    Program p = testutil::corpus(name);
    for (const auto& e : analyze(p).edges) {
      std::vector<Direction> d;
      for (const auto& x : e.entries) d.push_back(x.direction);
      // '*' may still hide a '>' but a definite leading '>' is never allowed
      for (const auto& x : e.entries) {
        if (x.direction == Direction::Eq) continue;
        EXPECT_NE(x.direction, Direction::Gt) << name << " " << e.src << "->" << e.dst;
        break;
      }
    }
  }
}

TEST(Analyze, MayBeLexNegative) {
  using D = Direction;
  EXPECT_FALSE(may_be_lex_negative(std::vector<D>{D::Eq, D::Lt, D::Gt}));
  EXPECT_TRUE(may_be_lex_negative(std::vector<D>{D::Eq, D::Gt, D::Lt}));
  EXPECT_TRUE(may_be_lex_negative(std::vector<D>{D::Star, D::Lt}));
  EXPECT_FALSE(may_be_lex_negative(std::vector<D>{D::Eq, D::Eq}));
}

TEST(Soundness, OracleEdgesAreCoveredOnCorpus) {
  for (const auto& name : testutil::corpus_names()) {
    Program p = testutil::corpus(name);
    auto oracle = brute_force_oracle(p, {});
    EXPECT_EQ(uncovered(oracle, analyze(p, static_only())), "") << name;
    EXPECT_EQ(uncovered(oracle, analyze(p)), "") << name;
  }
}

TEST(Soundness, OracleEdgesAreCoveredOnRandomPrograms) {
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    std::string text = testutil::RandomProgram(seed).text();
    Program p = parse(text);
    auto oracle = brute_force_oracle(p, {});
    ASSERT_EQ(uncovered(oracle, analyze(p, static_only())), "") << text;
    ASSERT_EQ(uncovered(oracle, analyze(p)), "") << text;
    auto all = brute_force_oracle(p, {}, 1'000'000, 50'000'000, OracleScope::AllPairs);
    ASSERT_EQ(uncovered(all, analyze(p, static_only())), "") << text;
  }
}

TEST(Oracle, DirectEdgesAreASubsetOfAllPairs) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Program p = parse(testutil::RandomProgram(seed).text());
    auto all = brute_force_oracle(p, {}, 1'000'000, 50'000'000, OracleScope::AllPairs);
    EXPECT_EQ(uncovered(brute_force_oracle(p, {}), all), "") << seed;
  }
}

TEST(Legality, AllGemmOrdersAreLegal) {
  Program p = parse(kGemm4);
  auto g = analyze(p);
  auto bands = perfect_bands(p.body);
  ASSERT_EQ(bands.size(), 1u);
  ASSERT_EQ(bands[0].size, 3u);
  for (const auto& perm : all_perms(3)) EXPECT_TRUE(is_permutation_legal(p.body, bands[0], perm, g));
}

TEST(Legality, StencilInterchangeIsLegal) {
  Program p = parse(
      "param N = 8;\narray A[N, N] : int;\narray B[N, N] : int;\n"
      "for i in 1..N-1 { for j in 1..N-1 { B[i, j] = A[i-1, j] + A[i+1, j] + A[i, j-1] + A[i, j+1]; } }");
  auto bands = perfect_bands(p.body);
  EXPECT_TRUE(is_permutation_legal(p.body, bands[0], {1, 0}, analyze(p)));
}

TEST(Legality, SkewedDependenceForbidsInterchange) {
  Program p = parse(
      "param N = 8;\narray A[N, N] : int;\n"
      "for i in 1..N { for j in 0..N-1 { A[i, j] = A[i-1, j+1] + 1; } }");
  auto bands = perfect_bands(p.body);
  EXPECT_FALSE(is_permutation_legal(p.body, bands[0], {1, 0}, analyze(p)));
  EXPECT_TRUE(is_permutation_legal(p.body, bands[0], {0, 1}, analyze(p)));
}

TEST(Legality, TriangularBoundsRestrictFeasibility) {
  Program p = testutil::corpus("syrk");
  for (const auto& band : perfect_bands(p.body)) {
    auto loops = band_loops(p.body, band);
    if (band.size < 2) continue;
    for (const auto& perm : all_perms(band.size)) {
      bool feasible = is_permutation_feasible(p.body, band, perm);
      if (!feasible) EXPECT_FALSE(is_permutation_legal(p.body, band, perm, analyze(p)));
    }
  }
}

TEST(Legality, PermuteBandRejectsNonPermutations) {
  Program p = parse(kGemm4);
  auto band = perfect_bands(p.body)[0];
  EXPECT_THROW(permute_band(p.body, band, {0, 0, 1}), InvalidProgram);
  EXPECT_THROW(permute_band(p.body, band, {0, 1}), InvalidProgram);
}

// Whatever the analysis calls legal must leave the results unchanged.
TEST(Legality, LegalPermutationsPreserveSemanticsOnRandomPrograms) {
  std::size_t checked = 0, rejected = 0;
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    std::string text = testutil::RandomProgram(seed).text();
    Program p = parse(text);
    auto g = analyze(p);
    for (const auto& band : perfect_bands(p.body)) {
      if (band.size < 2) continue;
      for (const auto& perm : all_perms(band.size)) {
        if (!is_permutation_legal(p.body, band, perm, g)) {
          ++rejected;
          continue;
        }
        Program q = replace_body(p, permute_band(p.body, band, perm));
        ASSERT_TRUE(validate(q).empty()) << text;
        ASSERT_TRUE(equivalent(p, q, testutil::int_configs({1, 2}))) << text;
        ++checked;
      }
    }
  }
  EXPECT_GT(checked, 50u);
  EXPECT_GT(rejected, 0u);
}

TEST(Fission, IndependentComputationsSplit) {
  Program p = testutil::fixture("two_accesses.loop");
  auto g = analyze(p);
  EXPECT_EQ(fission_partition(p.body, NodePath{0}, g).size(), 1u);
  EXPECT_EQ(fission_partition(p.body, NodePath{0, 0}, g).size(), 2u);
}

TEST(Fission, ProducerPrecedesConsumer) {
  Program p = parse(
      "param N = 8;\narray A[N] : int;\narray B[N] : int;\narray C[N] : int;\n"
      "for i in 0..N { B[i] = C[i] * 2; A[i] = B[i] + 1; }");
  auto groups = fission_partition(p.body, NodePath{0}, analyze(p));
  ASSERT_EQ(groups.size(), 2u);
  EXPECT_EQ(groups[0], std::vector<std::size_t>{0});
  EXPECT_EQ(groups[1], std::vector<std::size_t>{1});
}

TEST(Fission, BackwardCarriedCycleStaysTogether) {
  Program p = parse(
      "param N = 8;\narray A[N] : int;\narray B[N] : int;\n"
      "for i in 1..N { A[i] = B[i-1] + 1; B[i] = A[i] * 2; }");
  auto groups = fission_partition(p.body, NodePath{0}, analyze(p));
  EXPECT_EQ(groups.size(), 1u);
}

TEST(Fission, BackwardCarriedEdgeReordersGroups) {
  // the second computation feeds the first in the next iteration only
  Program p = parse(
      "param N = 8;\narray A[N] : int;\narray B[N] : int;\n"
      "for i in 1..N { A[i] = B[i-1] + 1; B[i] = idx(i); }");
  auto groups = fission_partition(p.body, NodePath{0}, analyze(p));
  ASSERT_EQ(groups.size(), 2u);
  EXPECT_EQ(groups[0], std::vector<std::size_t>{1});
  auto d = distribute(p, NodePath{0});
  ASSERT_TRUE(d.has_value());
  EXPECT_TRUE(equivalent(p, *d, testutil::int_configs()));
}

TEST(Fission, DistributionPreservesSemanticsOnRandomPrograms) {
  std::size_t split = 0;
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    std::string text = testutil::RandomProgram(seed).text();
    Program p = parse(text);
    Program q = max_fission(p);
    ASSERT_TRUE(validate(q).empty()) << text;
    ASSERT_TRUE(equivalent(p, q, testutil::int_configs({1, 2}))) << text << "\n---\n" << pretty_print(q);
    if (!structurally_equal(p, q, false)) ++split;
  }
  EXPECT_GT(split, 20u);
}

TEST(CarriesDependence, GemmLoops) {
  Program p = parse(kGemm4);
  auto g = analyze(p);
  EXPECT_FALSE(carries_dependence(p.body, NodePath{0}, g));
  EXPECT_FALSE(carries_dependence(p.body, NodePath{0, 0}, g));
  EXPECT_TRUE(carries_dependence(p.body, NodePath{0, 0, 0}, g));
}

TEST(Bands, MixedBodyEndsBand) {
  Program p = parse(
      "param N = 4;\narray A[N] : int;\narray B[N, N] : int;\n"
      "for i in 0..N { A[i] = 1; for j in 0..N { for k in 0..N { B[j, k] = B[j, k] + idx(i); } } }");
  auto bands = perfect_bands(p.body);
  ASSERT_EQ(bands.size(), 1u);
  EXPECT_EQ(bands[0].root, (NodePath{0, 1}));
  EXPECT_EQ(bands[0].depth, 1u);
  EXPECT_EQ(bands[0].size, 2u);
}

TEST(Oracle, CapIsEnforced) {
  Program p = parse(kGemm4);
  EXPECT_THROW(brute_force_oracle(p, {}, 10), IterationCapExceeded);
}
