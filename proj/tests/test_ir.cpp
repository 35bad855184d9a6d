#include <gtest/gtest.h>

#include <cmath>

#include "loopnorm/frontend.hpp"
#include "loopnorm/ir.hpp"
#include "loopnorm/lower.hpp"
#include "loopnorm/serialize.hpp"
#include "test_util.hpp"

using namespace loopnorm;

namespace {

const char* kGemm =
    "param N = 4;\narray A[N, N] : int;\narray B[N, N] : int;\narray C[N, N] : int;\n"
    "for i in 0..N { for j in 0..N { for k in 0..N { C[i, j] += A[i, k] * B[k, j]; } } }\n";

bool has_message(const std::vector<Diagnostic>& d, const std::string& needle) {
  for (const auto& x : d)
    if (x.message.find(needle) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST(Affine, NormalizedTermsDropZeroCoefficients) {
  AffineExpr a = AffineExpr::variable("i", 2) + AffineExpr::variable("N") + 3;
  AffineExpr b = a - AffineExpr::variable("N");
  EXPECT_FALSE(b.mentions("N"));
  EXPECT_EQ(b.terms().size(), 1u);
  EXPECT_EQ(b, AffineExpr::variable("i", 2) + 3);
  EXPECT_EQ(AffineExpr::variable("i", 0), AffineExpr(0));
}

TEST(Affine, FloorAndCeilDivisionAgreeWithRealDivision) {
  for (std::int64_t a = -40; a <= 40; ++a)
    for (std::int64_t b = 1; b <= 9; ++b) {
      double q = static_cast<double>(a) / static_cast<double>(b);
      EXPECT_EQ(floor_div(a, b), static_cast<std::int64_t>(std::floor(q))) << a << "/" << b;
      EXPECT_EQ(ceil_div(a, b), static_cast<std::int64_t>(std::ceil(q))) << a << "/" << b;
    }
}

TEST(Affine, SubstituteAndRename) {
  AffineExpr e = AffineExpr::variable("i", 3) + AffineExpr::variable("j") - 1;
  EXPECT_EQ(e.substitute("i", AffineExpr::variable("t", 2) + 1), AffineExpr::variable("t", 6) + AffineExpr::variable("j") + 2);
  EXPECT_EQ(e.renamed({{"j", "x"}}), AffineExpr::variable("i", 3) + AffineExpr::variable("x") - 1);
}

TEST(Validate, WellFormedGemmHasNoDiagnostics) { EXPECT_TRUE(validate(parse(kGemm)).empty()); }

TEST(Validate, ReadMarkedAsWriteIsMultipleWrites) {
  Program p = parse(kGemm);
  Computation& c = node_at(p.body, NodePath{0, 0, 0, 0}).computation();
  c.reads[1].kind = AccessKind::Write;
  auto d = validate(p);
  ASSERT_FALSE(d.empty());
  EXPECT_TRUE(has_message(d, "multiple writes"));
  EXPECT_NE(d.front().path.find("body"), std::string::npos);
}

TEST(Validate, RankMismatch) {
  Program p = parse(kGemm);
  Computation& c = node_at(p.body, NodePath{0, 0, 0, 0}).computation();
  c.write.indices.pop_back();
  EXPECT_TRUE(has_message(validate(p), "rank mismatch"));
}

TEST(Validate, UnboundIteratorAndShadowing) {
  Program p = parse(kGemm);
  Loop& k = node_at(p.body, NodePath{0, 0, 0}).loop();
  k.iter = "i";
  auto d = validate(p);
  EXPECT_TRUE(has_message(d, "shadows"));
  Program q = parse(kGemm);
  node_at(q.body, NodePath{0, 0, 0}).loop().iter = "kk";
  EXPECT_TRUE(has_message(validate(q), "unbound variable 'k'"));
}

TEST(Validate, DuplicateNamesAndUndeclaredExtent) {
  Program p = parse(kGemm);
  p.arrays[1].name = "A";
  EXPECT_TRUE(has_message(validate(p), "duplicate name"));
  Program q = parse(kGemm);
  q.arrays[0].dims[0] = Extent::symbolic("M");
  EXPECT_TRUE(has_message(validate(q), "undeclared parameter"));
}

TEST(Validate, ReadsMustBeUsedInOrder) {
  Program p = parse(kGemm);
  Computation& c = node_at(p.body, NodePath{0, 0, 0, 0}).computation();
  std::swap(c.reads[1], c.reads[2]);
  EXPECT_TRUE(validate(p).empty());
  c.expr = Expr::binary(Expr::Op::Add, Expr::read_of(0), Expr::binary(Expr::Op::Mul, Expr::read_of(2), Expr::read_of(1)));
  EXPECT_TRUE(has_message(validate(p), "expression order"));
}

TEST(Validate, ValidProgramsLowerWithoutRepresentationErrors) {
  for (const auto& name : testutil::corpus_names()) {
    Program p = testutil::corpus(name);
    ASSERT_TRUE(validate(p).empty()) << name;
    EXPECT_NO_THROW(lower(p, {})) << name;
  }
}

TEST(IteratorsInOrder, Examples) {
  Program mixed = parse("array A[4];\narray B[4, 4];\nfor i in 0..4 { A[i] = 1.0; for j in 0..4 { B[i, j] = 2.0; } }");
  EXPECT_EQ(iterators_in_order(mixed.body[0].loop()), (std::vector<std::string>{"i", "j"}));
  Program single = parse("array A[4];\nfor i in 0..4 { A[i] = 1.0; }");
  EXPECT_EQ(iterators_in_order(single.body[0].loop()), (std::vector<std::string>{"i"}));
  EXPECT_EQ(iterators_in_order(parse(kGemm).body[0].loop()), (std::vector<std::string>{"i", "j", "k"}));
}

TEST(IteratorsInOrder, EnclosingIteratorsComeFirst) {
  for (const auto& name : testutil::corpus_names()) {
    Program p = testutil::corpus(name);
    for (const auto& top : p.body) {
      if (!top.is_loop()) continue;
      auto order = iterators_in_order(top.loop());
      for_each_computation(Body{top}, [&](const Computation&, std::span<const Loop* const> loops) {
        std::size_t prev = 0;
        for (std::size_t k = 0; k < loops.size(); ++k) {
          auto pos = static_cast<std::size_t>(std::find(order.begin() + static_cast<std::ptrdiff_t>(prev), order.end(), loops[k]->iter) - order.begin());
          ASSERT_LT(pos, order.size()) << name;
          prev = pos;
        }
      });
    }
  }
}

TEST(StructurallyEqual, ReflexiveAndAlphaRenaming) {
  Program p = parse(kGemm);
  EXPECT_TRUE(structurally_equal(p, p, false));
  Program q = p;
  rename_in_body(q.body, {{"i", "t"}}, {});
  EXPECT_FALSE(structurally_equal(p, q, false));
  EXPECT_TRUE(structurally_equal(p, q, true));
  Program r = q;
  r.arrays[2].name = "Z";
  rename_in_body(r.body, {}, {{"C", "Z"}});
  EXPECT_TRUE(structurally_equal(p, r, true));
}

TEST(StructurallyEqual, DifferentLoopOrdersDiffer) {
  Program ijk = testutil::fixture("gemm_ijk.loop");
  Program ikj = testutil::fixture("gemm_ikj.loop");
  EXPECT_FALSE(structurally_equal(ijk, ikj, true));
  EXPECT_NE(serialize(ijk), serialize(ikj));
}

TEST(StructurallyEqual, RenamingMustBeBijective) {
  Program p = parse("array A[4];\narray B[4];\nfor i in 0..4 { A[i] = 1.0; B[i] = 2.0; }");
  Program q = parse("array A[4];\narray B[4];\nfor i in 0..4 { A[i] = 1.0; A[i] = 2.0; }");
  EXPECT_FALSE(structurally_equal(p, q, true));
}

TEST(Serialize, CorpusRoundTrips) {
  for (const auto& name : testutil::corpus_names()) {
    Program p = testutil::corpus(name);
    EXPECT_TRUE(structurally_equal(deserialize(serialize(p)), p, false)) << name;
  }
}

TEST(Serialize, DocumentShape) {
  auto j = parse_json(serialize(parse(kGemm)));
  EXPECT_EQ(j["version"], 1);
  for (const char* key : {"parameters", "arrays", "body"}) EXPECT_TRUE(j.contains(key)) << key;
  const auto& loop = j["body"][0]["loop"];
  for (const char* key : {"iter", "lo", "hi", "body"}) EXPECT_TRUE(loop.contains(key)) << key;
  EXPECT_TRUE(loop["lo"].contains("terms"));
  EXPECT_TRUE(loop["lo"].contains("const"));
  EXPECT_TRUE(loop["body"][0]["loop"]["body"][0]["loop"]["body"][0].contains("comp"));
}

TEST(Serialize, FieldOrderIsIrrelevant) {
  std::string text = serialize(parse(kGemm));
  auto j = nlohmann::json::parse(text);  // unordered: keys re-sorted alphabetically
  EXPECT_TRUE(structurally_equal(deserialize(j.dump()), parse(kGemm), false));
}

TEST(Serialize, TruncatedDocumentReportsOffset) {
  std::string text = serialize(parse(kGemm));
  std::string cut = text.substr(0, text.size() / 2);
  try {
    deserialize(cut);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_LE(e.offset(), cut.size());
    EXPECT_NE(std::string(e.what()).find("byte"), std::string::npos);
  }
}

TEST(Serialize, UnknownFieldIsNamed) {
  auto j = parse_json(serialize(parse(kGemm)));
  j["body"][0]["loop"]["unroll"] = 4;
  try {
    deserialize(j.dump());
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("unroll"), std::string::npos);
  }
}

TEST(Names, FreshNameAvoidsTaken) {
  std::vector<std::string> taken{"i", "i_1", "N"};
  EXPECT_EQ(fresh_name("i", taken), "i_2");
  EXPECT_EQ(fresh_name("j", taken), "j");
  EXPECT_EQ(fresh_name("j", taken), "j_1");
}

TEST(Layout, RowMajorAddressesMatchEnumeration) {
  // Each cell written once with its own flat address; the buffer must read 0..size-1.
  Program p = parse(
      "param N = 3;\nparam M = 4;\narray A[N, M, 5] : int;\n"
      "for a in 0..N { for b in 0..M { for c in 0..5 { A[a, b, c] = idx(20*a + 5*b + c); } } }");
  Memory m = run(p, {});
  const auto& v = m.at("A").ints;
  ASSERT_EQ(v.size(), 60u);
  for (std::size_t k = 0; k < v.size(); ++k) EXPECT_EQ(v[k], static_cast<std::int64_t>(k));
}
