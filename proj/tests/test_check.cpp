#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "loopnorm/check.hpp"
#include "loopnorm/frontend.hpp"
#include "test_util.hpp"

using namespace loopnorm;

namespace {

CheckOptions quick() {
  CheckOptions o;
  o.seeds = {1};
  o.count = 3;
  o.interp_seeds = {1, 2};
  return o;
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("loopnorm_check_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST(Check, EmptyDirectoryPasses) {
  auto dir = scratch("empty");
  CheckReport r = check_corpus(dir.string(), quick());
  EXPECT_TRUE(r.kernels.empty());
  EXPECT_TRUE(r.pass());
  std::filesystem::remove_all(dir);
}

TEST(Check, CorpusKernelPassesEveryProperty) {
  KernelReport k = check_kernel("gemm", testutil::corpus("gemm"), {}, quick());
  EXPECT_TRUE(k.pass()) << (k.first_failure() ? k.first_failure()->detail : "");
  EXPECT_EQ(k.variants, 3u);
  std::set<std::string> names;
  for (const auto& p : k.properties) names.insert(p.name);
  for (const char* n : {"convergence", "equivalence", "idempotence", "stride_minimality", "atomicity", "recipes"})
    EXPECT_TRUE(names.contains(n)) << n;
}

TEST(Check, IllegalHandVariantIsCaught) {
  CheckReport r = check_corpus(testutil::fixture_dir() + "/bad_corpus", quick());
  ASSERT_EQ(r.kernels.size(), 1u);
  EXPECT_FALSE(r.pass());
  const PropertyResult* f = r.kernels[0].first_failure();
  ASSERT_NE(f, nullptr);
  bool equivalence_failed = false;
  for (const auto& p : r.kernels[0].properties)
    if (p.name == "equivalence") equivalence_failed = !p.pass;
  EXPECT_TRUE(equivalence_failed);
}

TEST(Check, ParseErrorsAreReportedPerKernel) {
  auto dir = scratch("parse");
  std::ofstream(dir / "broken.loop") << "array A[4];\nfor i in 0..4 { A[i*i] = 0; }\n";
  std::ofstream(dir / "fine.loop") << "array A[4] : int;\nfor i in 0..4 { A[i] = 1; }\n";
  CheckReport r = check_corpus(dir.string(), quick());
  ASSERT_EQ(r.kernels.size(), 2u);
  EXPECT_EQ(r.kernels[0].name, "broken");
  EXPECT_FALSE(r.kernels[0].pass());
  EXPECT_TRUE(r.kernels[1].pass());
  std::filesystem::remove_all(dir);
}

TEST(Check, ReportFormats) {
  auto dir = scratch("formats");
  std::filesystem::copy_file(testutil::corpus_dir() + "/atax.loop", dir / "atax.loop");
  CheckReport r = check_corpus(dir.string(), quick());
  auto j = r.to_json();
  EXPECT_EQ(j["pass"], true);
  ASSERT_EQ(j["kernels"].size(), 1u);
  const auto& k = j["kernels"][0];
  for (const char* key : {"name", "fingerprint", "variants", "properties"}) EXPECT_TRUE(k.contains(key)) << key;
  EXPECT_EQ(k["fingerprint"].get<std::string>().size(), 16u);
  EXPECT_NE(r.to_text().find("atax"), std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST(StrideCounterexample, DetectsNonMinimalOrder) {
  Program bad = parse("array B[4, 4] : int;\nfor i in 0..4 { for j in 0..4 { B[j, i] = 0; } }");
  EXPECT_FALSE(stride_counterexample(bad, {}, 5).empty());
  Program good = parse("array B[4, 4] : int;\nfor j in 0..4 { for i in 0..4 { B[j, i] = 0; } }");
  EXPECT_TRUE(stride_counterexample(good, {}, 5).empty());
}
