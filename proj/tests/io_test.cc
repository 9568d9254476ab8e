#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "hoigen/archive.h"
#include "hoigen/error.h"
#include "hoigen/geometry.h"
#include "hoigen/kvdoc.h"
#include "hoigen/matrix.h"
#include "hoigen/rng.h"
#include "json.hpp"
#include "test_util.h"

namespace hoigen {
namespace {

TEST(KvDocTest, ParseSkipsCommentsAndTrims) {
  const KvDoc doc = KvDoc::Parse("# header\n\n  a = 1 \nb=two words\n");
  EXPECT_EQ(doc.GetInt("a"), 1);
  EXPECT_EQ(doc.GetString("b"), "two words");
  EXPECT_FALSE(doc.Has("header"));
  EXPECT_EQ(doc.GetOr("c", "x"), "x");
}

TEST(KvDocTest, SetReplacesInPlace) {
  KvDoc doc;
  doc.Set("a", 1);
  doc.Set("b", 2);
  doc.Set("a", 3);
  EXPECT_EQ(doc.ToString(), "a = 3\nb = 2\n");
}

TEST(KvDocTest, ErrorsAreTyped) {
  EXPECT_THROW(KvDoc::Parse("no equals sign"), ParseError);
  EXPECT_THROW(KvDoc::Parse("= value"), ParseError);
  const KvDoc doc = KvDoc::Parse("x = abc\ny = 1.5");
  EXPECT_THROW(doc.GetDouble("x"), ParseError);
  EXPECT_THROW(doc.GetInt("y"), ParseError);
  EXPECT_THROW(doc.GetString("z"), ParseError);
  EXPECT_THROW(KvDoc::Load("/nonexistent/file"), ParseError);
  KvDoc bad;
  EXPECT_THROW(bad.Set("a=b", "c"), ValidationError);
}

TEST(KvDocTest, DoublesRoundTrip) {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.Normal() * std::pow(10.0, rng.Uniform(-20, 20));
    EXPECT_EQ(std::strtod(FormatDouble(v).c_str(), nullptr), v);
  }
  EXPECT_EQ(FormatDouble(0.5), "0.5");
  EXPECT_EQ(FormatDouble(0.1 + 0.2), "0.30000000000000004");
}

TEST(KvDocTest, SaveLoadRoundTrip) {
  const auto dir = testing::ScratchDir("kvdoc");
  KvDoc doc;
  doc.Set("pi", 3.141592653589793);
  doc.Set("name", "value with spaces");
  doc.Save(dir / "sub" / "doc.txt");
  const KvDoc back = KvDoc::Load(dir / "sub" / "doc.txt");
  EXPECT_EQ(back.entries(), doc.entries());
  EXPECT_EQ(back.GetDouble("pi"), 3.141592653589793);
}

TEST(ArchiveTest, RoundTripFloat64IsExact) {
  const auto dir = testing::ScratchDir("archive64");
  Archive a;
  a.Put("weights", Matrix(2, 3, Vec{1.0 / 3, -2, 1e-300, 4, 5, 6}), "", ElementType::kFloat64);
  a.Put("empty", Matrix(0, 4), "union", ElementType::kFloat64);
  a.metadata()["seed"] = "42";
  a.Save(dir);
  const Archive b = Archive::Load(dir);
  EXPECT_EQ(b.Get("weights"), a.Get("weights"));
  EXPECT_EQ(b.Get("empty").rows(), 0u);
  EXPECT_EQ(b.Get("empty").cols(), 4u);
  EXPECT_EQ(b.Entry("empty").branch, "union");
  EXPECT_EQ(b.Meta("seed"), "42");
  EXPECT_THROW(b.Meta("missing"), ParseError);
  EXPECT_THROW(b.Get("missing"), ParseError);
}

TEST(ArchiveTest, Float32StoresSinglePrecision) {
  const auto dir = testing::ScratchDir("archive32");
  Archive a;
  a.Put("x", Matrix(1, 2, Vec{0.1, 1e10}), "human");
  a.Save(dir);
  const Archive b = Archive::Load(dir);
  EXPECT_EQ(b.Get("x")(0, 0), static_cast<double>(0.1f));
  EXPECT_EQ(b.Get("x")(0, 1), static_cast<double>(1e10f));
  EXPECT_EQ(b.Entry("x").type, ElementType::kFloat32);
  const auto manifest = nlohmann::json::parse(std::ifstream(dir / "manifest.json"));
  EXPECT_EQ(manifest["arrays"][0]["name"], "x");
}

TEST(ArchiveTest, PutReplacesExistingName) {
  Archive a;
  a.Put("x", Matrix(1, 1, 1.0));
  a.Put("x", Matrix(1, 1, 2.0));
  EXPECT_EQ(a.entries().size(), 1u);
  EXPECT_EQ(a.Get("x")(0, 0), 2.0);
}

TEST(ArchiveTest, TruncatedPayloadIsParseError) {
  const auto dir = testing::ScratchDir("archive_trunc");
  Archive a;
  a.Put("x", Matrix(4, 4, 1.0), "", ElementType::kFloat64);
  a.Save(dir);
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().filename() != "manifest.json") std::filesystem::resize_file(entry.path(), 8);
  }
  EXPECT_THROW(Archive::Load(dir), ParseError);
  EXPECT_THROW(Archive::Load(dir / "nope"), ParseError);
}

TEST(RngTest, SeededSequencesRepeat) {
  Rng a(5), b(5);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.Normal(), b.Normal());
  EXPECT_NE(Rng(5).Uniform(), Rng(6).Uniform());
}

TEST(RngTest, NormalMoments) {
  Rng rng(9);
  const int n = 200000;
  double sum = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.Normal(2.0, 3.0);
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  EXPECT_NEAR(mean, 2.0, 0.03);
  EXPECT_NEAR(sq / n - mean * mean, 9.0, 0.1);
}

TEST(RngTest, SampleWithoutReplacementIsDistinct) {
  Rng rng(1);
  const auto s = rng.SampleWithoutReplacement(50, 20);
  EXPECT_EQ(s.size(), 20u);
  EXPECT_EQ(std::set<std::size_t>(s.begin(), s.end()).size(), 20u);
  for (auto v : s) EXPECT_LT(v, 50u);
}

TEST(RngTest, DerivedSeedsDiffer) {
  EXPECT_NE(DeriveSeed(1, 0), DeriveSeed(1, 1));
  EXPECT_NE(DeriveSeed(1, "a"), DeriveSeed(1, "b"));
  EXPECT_EQ(DeriveSeed(7, "x"), DeriveSeed(7, "x"));
  EXPECT_EQ(Fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(Fnv1a("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(MatrixTest, ShapeChecksAndHelpers) {
  EXPECT_THROW(Matrix(2, 2, Vec{1, 2, 3}), ShapeError);
  const Matrix m = Matrix::FromRows({{1, 2, 3}, {4, 5, 6}});
  EXPECT_EQ(m(1, 2), 6);
  const Matrix t = m.Transposed();
  EXPECT_EQ(t.rows(), 3u);
  EXPECT_EQ(t(2, 1), 6);
  Matrix a(0, 3);
  a.AppendRow(Vec{7, 8, 9});
  EXPECT_EQ(a.rows(), 1u);
  EXPECT_EQ(Dot(Vec{1, 2}, Vec{3, 4}), 11);
  EXPECT_EQ(Norm(Vec{3, 4}), 5);
  EXPECT_EQ(Normalized(Vec{0, 0}), Vec({0, 0}));
  EXPECT_NEAR(Cosine(Vec{1, 0}, Vec{1, 1}), std::sqrt(0.5), 1e-15);
  EXPECT_FALSE(AllFinite(Vec{1, NAN}));
}

TEST(GeometryTest, IouAndUnion) {
  const Box a{0, 0, 2, 2}, b{1, 0, 3, 2};
  EXPECT_NEAR(Iou(a, b), 1.0 / 3.0, 1e-15);
  EXPECT_EQ(Iou(a, Box{5, 5, 6, 6}), 0.0);
  EXPECT_EQ(Iou(a, Box{1, 1, 1, 1}), 0.0);
  EXPECT_EQ(UnionBox(a, b), (Box{0, 0, 3, 2}));
}

}  // namespace
}  // namespace hoigen
