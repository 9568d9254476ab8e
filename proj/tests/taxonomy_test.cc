#include <gtest/gtest.h>

#include <algorithm>

#include "hoigen/error.h"
#include "hoigen/taxonomy.h"
#include "test_util.h"

namespace hoigen {
namespace {

using testing::ToyTaxonomy;

TEST(TaxonomyTest, HicoFileHasFullLabelSpace) {
  const HoiTaxonomy tax = LoadTaxonomy(std::string(HOIGEN_DATA_DIR) + "/hico_det_taxonomy.txt");
  EXPECT_EQ(tax.num_hois(), 600);
  EXPECT_EQ(tax.num_objects(), 80);
  EXPECT_EQ(tax.num_verbs(), 117);
  EXPECT_FALSE(tax.has_counts());
}

TEST(TaxonomyTest, ToyRoundTripsThroughText) {
  const HoiTaxonomy tax = ToyTaxonomy();
  const HoiTaxonomy back = ParseTaxonomy(FormatTaxonomy(tax));
  EXPECT_EQ(back.num_hois(), 9);
  EXPECT_EQ(back.hois, tax.hois);
  EXPECT_EQ(back.train_instance_counts, tax.train_instance_counts);
}

TEST(TaxonomyTest, DuplicatePairIsRejected) {
  EXPECT_THROW(ParseTaxonomy("#objects\na\n#verbs\nv\n#hois\n0 0 1\n0 0 2\n"), ValidationError);
}

TEST(TaxonomyTest, DanglingIdsAndBadLinesAreRejected) {
  EXPECT_THROW(ParseTaxonomy("#objects\na\n#verbs\nv\n#hois\n1 0 1\n"), ValidationError);
  EXPECT_THROW(ParseTaxonomy("#objects\na\n#verbs\nv\n#hois\n0 0\n"), ParseError);
  EXPECT_THROW(ParseTaxonomy("a\n"), ParseError);
}

TEST(RarityTest, BoundaryAtTen) {
  HoiTaxonomy tax = ToyTaxonomy();
  tax.hois.resize(3);
  tax.train_instance_counts = {9, 10, 11};
  const RarityPartition part = PartitionByRarity(tax);
  EXPECT_EQ(part.rare, std::vector<int>({0}));
  EXPECT_EQ(part.nonrare, std::vector<int>({1, 2}));
}

TEST(RarityTest, AllZeroCountsAreRare) {
  HoiTaxonomy tax = ToyTaxonomy();
  tax.train_instance_counts.assign(9, 0);
  EXPECT_EQ(PartitionByRarity(tax).rare.size(), 9u);
}

TEST(RarityTest, UnknownCountsRaise) {
  const HoiTaxonomy tax = LoadTaxonomy(std::string(HOIGEN_DATA_DIR) + "/hico_det_taxonomy.txt");
  EXPECT_THROW(PartitionByRarity(tax), MissingCounts);
}

TEST(SplitTest, UcKeepsEveryVerbAndObjectSeen) {
  const HoiTaxonomy tax = ToyTaxonomy();
  const ZeroShotSplit split = BuildSplit(tax, SplitSetting::kUC, 2, 7);
  EXPECT_EQ(split.unseen_hois.size(), 2u);
  EXPECT_EQ(split.seen_verbs.size(), 3u);
  EXPECT_EQ(split.seen_objects.size(), 3u);
  EXPECT_TRUE(CheckSplit(tax, split).empty());
}

TEST(SplitTest, UcExhaustiveOverSeeds) {
  // Every seed must give a split satisfying the invariants; the 9-pair
  // universe is small enough to cover many draws.
  const HoiTaxonomy tax = ToyTaxonomy();
  for (int count = 1; count <= 6; ++count) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const ZeroShotSplit split = BuildSplit(tax, SplitSetting::kUC, count, seed);
      ASSERT_EQ(static_cast<int>(split.unseen_hois.size()), count);
      ASSERT_TRUE(CheckSplit(tax, split).empty()) << count << " " << seed;
    }
  }
  EXPECT_THROW(BuildSplit(tax, SplitSetting::kUC, 7, 0), InfeasibleSplit);
}

TEST(SplitTest, RareFirstTakesLowestCounts) {
  HoiTaxonomy tax = ToyTaxonomy();
  tax.train_instance_counts = {1, 4, 7, 5, 2, 8, 9, 6, 3};
  const ZeroShotSplit split = BuildSplit(tax, SplitSetting::kRfUc, 3, 0);
  EXPECT_EQ(split.unseen_hois, std::vector<int>({0, 4, 8}));
}

TEST(SplitTest, NonRareFirstTakesHighestCounts) {
  HoiTaxonomy tax = ToyTaxonomy();
  tax.train_instance_counts = {1, 4, 7, 5, 2, 8, 9, 6, 3};
  const ZeroShotSplit split = BuildSplit(tax, SplitSetting::kNfUc, 2, 0);
  EXPECT_EQ(split.unseen_hois, std::vector<int>({5, 6}));
}

TEST(SplitTest, CountOrderedSkipsCandidatesThatOrphanAVerb) {
  // Counts 1..9 in verb-major order: the three rarest share verb 0, so the
  // third is skipped to keep that verb seen.
  const HoiTaxonomy tax = ToyTaxonomy();
  const ZeroShotSplit split = BuildSplit(tax, SplitSetting::kRfUc, 3, 0);
  EXPECT_EQ(split.unseen_hois, std::vector<int>({0, 1, 3}));
  EXPECT_TRUE(CheckSplit(tax, split).empty());
}

TEST(SplitTest, UnseenObjectHoldsOutWholeColumn) {
  const HoiTaxonomy tax = ToyTaxonomy();
  const ZeroShotSplit split = BuildSplit(tax, SplitSetting::kUO, 1, 3);
  ASSERT_EQ(split.unseen_hois.size(), 3u);
  const int object = tax.hois[split.unseen_hois[0]].object;
  for (int h : split.unseen_hois) EXPECT_EQ(tax.hois[h].object, object);
  EXPECT_EQ(split.seen_objects.count(object), 0u);
  EXPECT_TRUE(CheckSplit(tax, split).empty());
}

TEST(SplitTest, UnseenVerbHoldsOutWholeRow) {
  const HoiTaxonomy tax = ToyTaxonomy();
  const ZeroShotSplit split = BuildSplit(tax, SplitSetting::kUV, 1, 3);
  ASSERT_EQ(split.unseen_hois.size(), 3u);
  for (int h : split.unseen_hois) EXPECT_EQ(split.seen_verbs.count(tax.hois[h].verb), 0u);
  EXPECT_TRUE(CheckSplit(tax, split).empty());
}

TEST(SplitTest, PartitionAndReproducibility) {
  const HoiTaxonomy tax = ToyTaxonomy();
  for (SplitSetting s : AllSettings()) {
    const int count = (s == SplitSetting::kUO || s == SplitSetting::kUV) ? 1 : 3;
    const ZeroShotSplit a = BuildSplit(tax, s, count, 11);
    const ZeroShotSplit b = BuildSplit(tax, s, count, 11);
    EXPECT_EQ(a.unseen_hois, b.unseen_hois);
    std::vector<int> all = a.seen_hois;
    all.insert(all.end(), a.unseen_hois.begin(), a.unseen_hois.end());
    std::sort(all.begin(), all.end());
    ASSERT_EQ(all.size(), 9u);
    for (int h = 0; h < 9; ++h) EXPECT_EQ(all[h], h);
  }
}

TEST(SplitTest, SaveLoadRoundTrip) {
  const HoiTaxonomy tax = ToyTaxonomy();
  const ZeroShotSplit split = BuildSplit(tax, SplitSetting::kUC, 3, 5);
  const auto path = testing::ScratchDir("split") / "split.txt";
  SaveSplit(split, path);
  const ZeroShotSplit back = LoadSplit(tax, path);
  EXPECT_EQ(back.unseen_hois, split.unseen_hois);
  EXPECT_EQ(back.setting, split.setting);
  EXPECT_EQ(back.seed, split.seed);
}

TEST(SplitTest, HicoCountFreeSettings) {
  const HoiTaxonomy tax = LoadTaxonomy(std::string(HOIGEN_DATA_DIR) + "/hico_det_taxonomy.txt");
  EXPECT_TRUE(CheckSplit(tax, BuildSplit(tax, SplitSetting::kUC, 120, 0)).empty());
  EXPECT_TRUE(CheckSplit(tax, BuildSplit(tax, SplitSetting::kUO, 12, 0)).empty());
  EXPECT_TRUE(CheckSplit(tax, BuildSplit(tax, SplitSetting::kUV, 20, 0)).empty());
  EXPECT_THROW(BuildSplit(tax, SplitSetting::kRfUc, 120, 0), MissingCounts);
}

TEST(MultiHotTest, Definition) {
  EXPECT_EQ(MultiHot({0, 2}, 4), Vec({1, 0, 1, 0}));
  EXPECT_EQ(MultiHot({}, 3), Vec({0, 0, 0}));
  EXPECT_THROW(MultiHot({5}, 4), IndexError);
}

}  // namespace
}  // namespace hoigen
