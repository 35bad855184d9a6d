#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "loopnorm/canonical.hpp"
#include "loopnorm/deps.hpp"
#include "loopnorm/error.hpp"
#include "loopnorm/frontend.hpp"
#include "loopnorm/interp.hpp"
#include "loopnorm/normalize.hpp"
#include "random_program.hpp"
#include "stride_oracle.hpp"
#include "test_util.hpp"

using namespace loopnorm;

namespace {

const char* kOrders[] = {"ijk", "ikj", "jik", "jki", "kij", "kji"};

std::vector<std::string> nest_order(const Program& p, std::size_t nest) {
  return iterators_in_order(p.body[nest].loop());
}

std::vector<std::string> loop_chain(const Loop& l) {
  std::vector<std::string> out{l.iter};
  const Loop* cur = &l;
  while (cur->body.size() == 1 && cur->body[0].is_loop()) {
    cur = &cur->body[0].loop();
    out.push_back(cur->iter);
  }
  return out;
}

// The iterator each loop of the chain was called in the source: the array
// subscripts identify it independently of renaming.
std::string gemm_order_by_role(const Program& p, std::size_t nest) {
  const Loop& root = p.body[nest].loop();
  auto chain = loop_chain(root);
  const Loop* cur = &root;
  while (cur->body[0].is_loop()) cur = &cur->body[0].loop();
  const Computation& c = cur->body[0].computation();
  // C[i, j] += A[i, k] * B[k, j]
  std::string i = c.write.indices[0].terms().begin()->first;
  std::string j = c.write.indices[1].terms().begin()->first;
  std::string out;
  for (const auto& it : chain) out += it == i ? 'i' : it == j ? 'j' : 'k';
  return out;
}

std::vector<std::vector<std::size_t>> all_perms(std::size_t n) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  std::vector<std::vector<std::size_t>> out;
  do out.push_back(p);
  while (std::next_permutation(p.begin(), p.end()));
  return out;
}

}  // namespace

TEST(Stride, SingleContiguousLoop) {
  Program p = parse("array A[4] : int;\nfor i in 0..4 { A[i] = 0; }");
  EXPECT_EQ(testutil::StrideOracle(p, {})(p.body[0]), 3u);
  EXPECT_EQ(stride(p, p.body[0], {}).value, 3u);
}

TEST(Stride, TransposedAccessAndInterchange) {
  Program p = parse("array B[4, 4] : int;\nfor i in 0..4 { for j in 0..4 { B[j, i] = 0; } }");
  Program q = parse("array B[4, 4] : int;\nfor j in 0..4 { for i in 0..4 { B[j, i] = 0; } }");
  EXPECT_EQ(testutil::StrideOracle(p, {})(p.body[0]), 81u);
  EXPECT_EQ(testutil::StrideOracle(q, {})(q.body[0]), 15u);
  EXPECT_EQ(stride(p, p.body[0], {}).value, 81u);
  EXPECT_EQ(stride(q, q.body[0], {}).value, 15u);
}

TEST(Stride, OutOfOrderCount) {
  Program p = parse("array B[4, 4] : int;\nfor i in 0..4 { for j in 0..4 { B[j, i] = 0; } }");
  Program q = parse("array B[4, 4] : int;\nfor j in 0..4 { for i in 0..4 { B[j, i] = 0; } }");
  EXPECT_EQ(out_of_order_count(p.body[0]), 1u);
  EXPECT_EQ(out_of_order_count(q.body[0]), 0u);
  StrideMetric m;
  m.mode = MetricMode::OutOfOrder;
  EXPECT_EQ(stride(p, p.body[0], m).value, 1u);
}

TEST(Stride, GemmIkjIsTheUniqueMinimum) {
  std::map<std::string, std::uint64_t> values;
  for (const char* o : kOrders) {
    Program p = testutil::fixture(std::string("gemm_") + o + ".loop");
    Bindings b{{"N", 4}};
    values[o] = testutil::StrideOracle(p, b)(p.body[0]);
    StrideMetric m;
    m.bindings = b;
    EXPECT_EQ(stride(p, p.body[0], m).value, values[o]) << o;
  }
  for (const auto& [o, v] : values)
    if (o != "ikj") EXPECT_LT(values["ikj"], v) << o;
}

TEST(Stride, AgreesWithOracleOnCorpus) {
  for (const auto& name : testutil::corpus_names()) {
    Program p = testutil::corpus(name);
    testutil::StrideOracle oracle(p, {});
    for (const auto& n : p.body) EXPECT_EQ(stride(p, n, {}).value, oracle(n)) << name;
  }
}

TEST(Stride, ShrinksBindingsAboveTheCap) {
  Program p = testutil::fixture("gemm_ijk.loop");
  StrideMetric m;
  m.bindings = {{"N", 1000}};
  m.cap = 10'000;
  StrideValue v = stride(p, p.body[0], m);
  EXPECT_TRUE(v.scaled);
  ASSERT_TRUE(v.bindings.contains("N"));
  EXPECT_LE(v.bindings.at("N") * v.bindings.at("N") * v.bindings.at("N"), 10'000);
  EXPECT_EQ(v.value, testutil::StrideOracle(p, v.bindings)(p.body[0]));
}

TEST(Normalize, AllGemmOrdersBecomeIkj) {
  for (const char* o : kOrders) {
    Normalized n = normalize_program(testutil::fixture(std::string("gemm_") + o + ".loop"));
    ASSERT_EQ(n.program.body.size(), 1u) << o;
    EXPECT_EQ(gemm_order_by_role(n.program, 0), "ikj") << o;
  }
}

TEST(Normalize, SplitsIndependentAccessesAndInterchangesTheStridedOne) {
  Program in = testutil::fixture("two_accesses.loop");
  Program expected = testutil::fixture("two_accesses_normalized.loop");
  Normalized n = normalize_program(in);
  EXPECT_TRUE(structurally_equal(n.program, expected, true)) << pretty_print(n.program);
  EXPECT_TRUE(equivalent(in, n.program, testutil::int_configs()));
  EXPECT_FALSE(n.report.fission_steps.empty());
}

TEST(Normalize, CloudErosionBecomesFourSingletons) {
  Program in = testutil::fixture("cloud_erosion.loop");
  Normalized n = normalize_program(in);
  ASSERT_EQ(n.program.body.size(), 4u) << pretty_print(n.program);
  for (const auto& node : n.program.body) {
    ASSERT_TRUE(node.is_loop());
    EXPECT_EQ(node.loop().body.size(), 1u);
  }
  EXPECT_TRUE(equivalent(in, n.program, testutil::int_configs()));
}

TEST(Normalize, FusedInitIsSplitAndUpdateReordered) {
  Program in = testutil::fixture("gemm_init_fused.loop");
  Normalized n = normalize_program(in);
  ASSERT_EQ(n.program.body.size(), 2u) << pretty_print(n.program);
  EXPECT_EQ(nest_order(n.program, 0).size(), 2u);
  EXPECT_EQ(gemm_order_by_role(n.program, 1), "ikj");
  EXPECT_TRUE(equivalent(in, n.program, testutil::int_configs()));
  EXPECT_EQ(canonicalize_program(n.program).fingerprint,
            canonicalize_program(normalize_program(testutil::fixture("gemm_init.loop")).program).fingerprint);
}

TEST(Normalize, EmptyProgram) {
  Program p = parse("param N = 4;\narray A[N];\n");
  Normalized n = normalize_program(p);
  EXPECT_TRUE(n.program.body.empty());
  EXPECT_TRUE(n.report.bands.empty());
}

TEST(Normalize, IdempotentOnCorpus) {
  for (const auto& name : testutil::corpus_names()) {
    Program once = normalize_program(testutil::corpus(name)).program;
    Program twice = normalize_program(once).program;
    EXPECT_TRUE(structurally_equal(once, twice, false)) << name;
  }
}

TEST(Normalize, PreservesSemanticsAndIsIdempotentOnRandomPrograms) {
  for (std::uint64_t seed = 0; seed < 150; ++seed) {
    std::string text = testutil::RandomProgram(seed).text();
    Program p = parse(text);
    Program once = normalize_program(p).program;
    ASSERT_TRUE(validate(once).empty()) << text;
    ASSERT_TRUE(equivalent(p, once, testutil::int_configs({1, 2}))) << text << "\n---\n" << pretty_print(once);
    ASSERT_TRUE(structurally_equal(once, normalize_program(once).program, false)) << text;
  }
}

// No legal reordering of any perfect band of a normalized program may lower
// the independently enumerated stride.
TEST(Normalize, ResultIsStrideMinimalOnRandomPrograms) {
  for (std::uint64_t seed = 0; seed < 150; ++seed) {
    std::string text = testutil::RandomProgram(seed).text();
    Program norm = normalize_program(parse(text)).program;
    auto g = analyze(norm);
    testutil::StrideOracle oracle(norm, {});
    for (const auto& band : perfect_bands(norm.body)) {
      if (band.size < 2) continue;
      std::size_t top = band.root.front();
      std::uint64_t base = oracle(norm.body[top]);
      for (const auto& perm : all_perms(band.size)) {
        if (!is_permutation_legal(norm.body, band, perm, g)) continue;
        Body permuted = permute_band(norm.body, band, perm);
        ASSERT_GE(oracle(permuted[top]), base) << text << "\n---\n" << pretty_print(norm);
      }
    }
  }
}

TEST(Normalize, ResultIsStrideMinimalOnCorpus) {
  for (const auto& name : testutil::corpus_names()) {
    Program norm = normalize_program(testutil::corpus(name)).program;
    auto g = analyze(norm);
    testutil::StrideOracle oracle(norm, {});
    for (const auto& band : perfect_bands(norm.body)) {
      if (band.size < 2 || band.size > 5) continue;
      std::size_t top = band.root.front();
      std::uint64_t base = oracle(norm.body[top]);
      for (const auto& perm : all_perms(band.size)) {
        if (!is_permutation_legal(norm.body, band, perm, g)) continue;
        EXPECT_GE(oracle(permute_band(norm.body, band, perm)[top]), base) << name;
      }
    }
  }
}

TEST(Normalize, ConvergesAcrossLoopOrders) {
  std::uint64_t fp = 0;
  for (const char* o : kOrders) {
    auto f = canonicalize_program(normalize_program(testutil::fixture(std::string("gemm_") + o + ".loop")).program).fingerprint;
    if (fp == 0) fp = f;
    EXPECT_EQ(f, fp) << o;
  }
}

TEST(Normalize, OutOfOrderMetricAlsoPicksRowMajorOrder) {
  StrideMetric m;
  m.mode = MetricMode::OutOfOrder;
  Program p = parse("array B[4, 4] : int;\nfor i in 0..4 { for j in 0..4 { B[j, i] = 0; } }");
  Normalized n = normalize_program(p, m);
  EXPECT_EQ(out_of_order_count(n.program.body[0]), 0u);
  EXPECT_EQ(n.report.mode, MetricMode::OutOfOrder);
}

TEST(Report, RecordsBandsAndCandidates) {
  Normalized n = normalize_program(testutil::fixture("gemm_jki.loop"));
  ASSERT_EQ(n.report.bands.size(), 1u);
  const BandReport& b = n.report.bands[0];
  EXPECT_EQ(b.considered, 6u);
  EXPECT_EQ(b.legal, 6u);
  EXPECT_EQ(b.candidates.size(), 6u);
  EXPECT_FALSE(b.approximated);
  auto best = std::min_element(b.candidates.begin(), b.candidates.end(),
                               [](const auto& x, const auto& y) { return x.second < y.second; });
  EXPECT_EQ(best->second, b.stride);
  auto j = n.report.to_json();
  for (const char* key : {"metric", "fission_steps", "bands", "rounds"}) EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j["bands"][0]["candidates"].size(), 6u);
}

TEST(Report, DeepBandsAreApproximated) {
  std::string text = "param N = 2;\narray A[N, N, N, N, N, N, N] : int;\n";
  const char* its = "abcdefg";
  std::string idx;
  for (int d = 0; d < 7; ++d) {
    text += std::string("for ") + its[6 - d] + " in 0..N { ";
    idx += std::string(d ? ", " : "") + its[d];
  }
  text += "A[" + idx + "] = 1;" + std::string(7, '}');
  Normalized n = normalize_program(parse(text));
  ASSERT_EQ(n.report.bands.size(), 1u);
  EXPECT_TRUE(n.report.bands[0].approximated);
  EXPECT_EQ(nest_order(n.program, 0), (std::vector<std::string>{"a", "b", "c", "d", "e", "f", "g"}));
}

TEST(MetricMode, ParsesNames) {
  EXPECT_EQ(metric_mode_from_string("distance"), MetricMode::TotalDistance);
  EXPECT_EQ(metric_mode_from_string("ooo"), MetricMode::OutOfOrder);
  EXPECT_THROW(metric_mode_from_string("fast"), Error);
}
