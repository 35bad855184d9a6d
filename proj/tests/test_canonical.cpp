#include <gtest/gtest.h>

#include "loopnorm/canonical.hpp"
#include "loopnorm/error.hpp"
#include "loopnorm/frontend.hpp"
#include "loopnorm/hash.hpp"
#include "loopnorm/normalize.hpp"
#include "test_util.hpp"

using namespace loopnorm;

namespace {

std::string gemm(int n, const char* a = "A", const char* b = "B", const char* c = "C", const char* i = "i",
                 const char* j = "j", const char* k = "k") {
  std::string s = "param N = " + std::to_string(n) + ";\n";
  for (const char* x : {a, b, c}) s += std::string("array ") + x + "[N, N];\n";
  s += std::string("for ") + i + " in 0..N { for " + j + " in 0..N { for " + k + " in 0..N { " + c + "[" + i + ", " +
       j + "] += " + a + "[" + i + ", " + k + "] * " + b + "[" + k + ", " + j + "]; } } }\n";
  return s;
}

std::uint64_t fp(const std::string& text, KeyMode mode = KeyMode::Exact) {
  return canonicalize_program(parse(text), mode).fingerprint;
}

}  // namespace

TEST(Canonical, RenamingDoesNotChangeTheFingerprint) {
  EXPECT_EQ(fp(gemm(8)), fp(gemm(8, "X", "Y", "Z", "p", "q", "r")));
  std::string renamed_param = gemm(8);
  for (std::size_t pos; (pos = renamed_param.find('N')) != std::string::npos;) renamed_param[pos] = 'M';
  EXPECT_EQ(fp(gemm(8)), fp(renamed_param));
}

TEST(Canonical, DistinguishesKernels) {
  Program gemm_p = normalize_program(testutil::corpus("gemm")).program;
  Program syrk_p = normalize_program(testutil::corpus("syrk")).program;
  EXPECT_NE(canonicalize_program(gemm_p).fingerprint, canonicalize_program(syrk_p).fingerprint);
  std::string gemv =
      "param N = 8;\narray A[N, N];\narray x[N];\narray y[N];\n"
      "for i in 0..N { for j in 0..N { y[i] += A[i, j] * x[j]; } }\n";
  EXPECT_NE(fp(gemm(8)), fp(gemv));
}

TEST(Canonical, AllCorpusKernelsAreDistinct) {
  std::map<std::uint64_t, std::string> seen;
  for (const auto& name : testutil::corpus_names()) {
    auto f = canonicalize_program(normalize_program(testutil::corpus(name)).program).fingerprint;
    auto [it, fresh] = seen.emplace(f, name);
    EXPECT_TRUE(fresh) << name << " collides with " << it->second;
  }
}

TEST(Canonical, LoopOrderMatters) {
  Program ijk = testutil::fixture("gemm_ijk.loop");
  Program ikj = testutil::fixture("gemm_ikj.loop");
  EXPECT_NE(canonicalize_program(ijk).fingerprint, canonicalize_program(ikj).fingerprint);
}

TEST(Canonical, ShapeInsensitiveKeysIgnoreExtents) {
  Program small = parse(gemm(256));
  Program large = parse(gemm(1024));
  EXPECT_EQ(match_key(small, small.body[0], KeyMode::ShapeInsensitive),
            match_key(large, large.body[0], KeyMode::ShapeInsensitive));
  EXPECT_NE(match_key(small, small.body[0], KeyMode::Exact), match_key(large, large.body[0], KeyMode::Exact));
}

TEST(Canonical, TextUsesPositionalNames) {
  CanonicalForm f = canonicalize_program(parse(gemm(8, "X", "Y", "Z", "p", "q", "r")));
  for (const char* name : {"L0", "L1", "L2", "A0", "A1", "A2", "P0"})
    EXPECT_NE(f.text.find(name), std::string::npos) << name << "\n" << f.text;
  for (const char* name : {"X[", "Y[", "Z[", " p ", " q ", " r "})
    EXPECT_EQ(f.text.find(name), std::string::npos) << name << "\n" << f.text;
  // the written array is named first
  EXPECT_EQ(f.arrays.at("Z"), "A0");
  EXPECT_EQ(f.params.at("N"), "P0");
  EXPECT_EQ(f.fingerprint, fnv1a64(f.text));
}

TEST(Canonical, TextReparsesToAnEquivalentProgram) {
  for (const auto& name : testutil::corpus_names()) {
    Program norm = normalize_program(testutil::corpus(name)).program;
    CanonicalForm f = canonicalize_program(norm);
    Program back = parse(f.text);
    EXPECT_EQ(canonicalize_program(back).fingerprint, f.fingerprint) << name << "\n" << f.text;
  }
}

TEST(Canonical, NestKeysAndProgramFingerprints) {
  Program p = normalize_program(testutil::fixture("gemm_init.loop")).program;
  ASSERT_EQ(p.body.size(), 2u);
  Program alone = normalize_program(testutil::fixture("gemm_ikj.loop")).program;
  EXPECT_EQ(match_key(p, p.body[1], KeyMode::Exact), match_key(alone, alone.body[0], KeyMode::Exact));
  EXPECT_NE(match_key(p, p.body[0], KeyMode::Exact), match_key(p, p.body[1], KeyMode::Exact));
}

TEST(Canonical, LiteralsAreKept) {
  EXPECT_NE(fp("array A[4] : int;\nfor i in 0..4 { A[i] = 1; }"), fp("array A[4] : int;\nfor i in 0..4 { A[i] = 2; }"));
}

TEST(KeyMode, ParsesNames) {
  EXPECT_EQ(key_mode_from_string("exact"), KeyMode::Exact);
  EXPECT_EQ(key_mode_from_string("shape-insensitive"), KeyMode::ShapeInsensitive);
  EXPECT_THROW(key_mode_from_string("fuzzy"), Error);
}
