#include <gtest/gtest.h>

#include "calfweight/segeval.hpp"
#include "support.hpp"

using namespace calfweight;
using calfweight::testing::filled_rect;
using calfweight::testing::kind_of;
using calfweight::testing::random_blobs;

TEST(ScoreMasks, Examples) {
  const auto a = filled_rect(8, 8, 1, 1, 4, 4);
  EXPECT_EQ(score_masks(a, a), (SegScores{1, 1, 1}));

  const auto left = filled_rect(8, 8, 0, 0, 4, 8);
  const auto top = filled_rect(8, 8, 0, 0, 8, 4);
  const auto s = score_masks(left, top);
  EXPECT_DOUBLE_EQ(s.iou, 1.0 / 3);
  EXPECT_DOUBLE_EQ(s.dice, 0.5);
  EXPECT_DOUBLE_EQ(s.pixel_accuracy, 0.5);

  const auto d = score_masks(filled_rect(10, 10, 0, 0, 10, 1), filled_rect(10, 10, 0, 5, 10, 1));
  EXPECT_EQ(d, (SegScores{0, 0, 0.8}));

  EXPECT_EQ(score_masks(BinaryMask(4, 4), BinaryMask(4, 4)), (SegScores{1, 1, 1}));
  EXPECT_EQ(kind_of([] { (void)score_masks(BinaryMask(4, 4), BinaryMask(4, 5)); }), ErrorKind::ShapeError);
}

TEST(ScoreMasks, AlgebraOnRandomPairs) {
  Rng rng(51);
  for (int t = 0; t < 1000; ++t) {
    const int w = 8 + static_cast<int>(rng.below(40)), h = 8 + static_cast<int>(rng.below(40));
    const auto p = random_blobs(rng, w, h, 1 + static_cast<int>(rng.below(4)));
    const auto q = random_blobs(rng, w, h, 1 + static_cast<int>(rng.below(4)));
    const auto s = score_masks(p, q);
    const auto r = score_masks(q, p);
    EXPECT_NEAR(s.dice, 2 * s.iou / (1 + s.iou), 1e-12);
    EXPECT_LE(s.iou, s.dice);
    EXPECT_LE(s.dice, 1.0);
    EXPECT_GE(s.pixel_accuracy, 0.0);
    EXPECT_LE(s.pixel_accuracy, 1.0);
    EXPECT_EQ(s.iou, r.iou);
    EXPECT_EQ(s.dice, r.dice);
  }
}

TEST(ScoreMasks, GrowingOverlapNeverLowersScores) {
  // |P| and |T| fixed at 16; P slides onto T one column at a time.
  const auto truth = filled_rect(24, 4, 8, 0, 4, 4);
  SegScores prev{-1, -1, -1};
  for (int x = 0; x <= 8; ++x) {
    const auto s = score_masks(filled_rect(24, 4, x, 0, 4, 4), truth);
    EXPECT_GE(s.iou, prev.iou);
    EXPECT_GE(s.dice, prev.dice);
    EXPECT_GE(s.pixel_accuracy, prev.pixel_accuracy);
    prev = s;
  }
}

namespace {

MethodScores method(std::string name, std::vector<double> iou, std::size_t attempted = 0) {
  MethodScores m{std::move(name), {}, attempted};
  for (double v : iou) m.scores.push_back({v, 2 * v / (1 + v), 0.5 + v / 2});
  return m;
}

}  // namespace

TEST(CompareMethods, IdenticalMethodsShareALetter) {
  const auto c = compare_methods({method("x", {0.8, 0.9, 0.85}), method("y", {0.8, 0.9, 0.85})});
  for (const auto& m : c.metrics) {
    ASSERT_TRUE(m.anova);
    EXPECT_EQ(m.anova->f, 0);
    EXPECT_EQ(m.eta2, 0);
    EXPECT_EQ(m.letters, (std::vector<std::string>{"a", "a"}));
  }
}

TEST(CompareMethods, SeparatedMethodsDiffer) {
  const auto c = compare_methods({method("A", {0.9, 0.91, 0.89}, 5), method("B", {0.5, 0.51, 0.49})});
  EXPECT_EQ(c.metrics[0].letters, (std::vector<std::string>{"a", "b"}));
  EXPECT_LT(c.metrics[0].p, 1e-4);
  EXPECT_DOUBLE_EQ(c.metrics[0].p_adj, std::min(1.0, 3 * c.metrics[0].p));
  EXPECT_GT(c.metrics[0].eta2, 0.99);
  EXPECT_DOUBLE_EQ(c.success_pct[0], 60.0);
  EXPECT_DOUBLE_EQ(c.success_pct[1], 100.0);
  const auto csv = format_segeval_report(c);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "method,n,success_pct,iou_mean,iou_sd,iou_letters,iou_p,iou_p_adj,iou_eta2,dice_mean,dice_sd,dice_letters,"
            "dice_p,dice_p_adj,dice_eta2,pixel_accuracy_mean,pixel_accuracy_sd,pixel_accuracy_letters,"
            "pixel_accuracy_p,pixel_accuracy_p_adj,pixel_accuracy_eta2");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

TEST(CompareMethods, NeedsTwoMethods) {
  EXPECT_EQ(kind_of([] { (void)compare_methods({method("only", {0.9, 0.8})}); }), ErrorKind::InsufficientGroups);
  const auto perfect = compare_methods({method("p", {1, 1}), method("q", {1, 1})});
  EXPECT_EQ(perfect.metrics[0].p, 1.0);
  EXPECT_EQ(perfect.metrics[0].letters[1], "a");
}
