#include <gtest/gtest.h>

#include <algorithm>

#include "calfweight/bodymetrics.hpp"
#include "support.hpp"

using namespace calfweight;
using calfweight::testing::filled_rect;
using calfweight::testing::kind_of;
using calfweight::testing::random_blobs;

namespace {

DepthGrid uniform_depth(int w, int h, float mm) {
  return DepthGrid{w, h, std::vector<float>(static_cast<std::size_t>(w) * h, mm)};
}

}  // namespace

TEST(Metrics, UniformBlock) {
  const auto mask = filled_rect(20, 10, 3, 2, 10, 4);
  const auto m = extract_metrics(mask, uniform_depth(20, 10, 1010), 1510);
  EXPECT_EQ(m.contour_area_px2, 40);
  EXPECT_EQ(m.avg_height_mm, 500);
  EXPECT_EQ(m.volume_mm_px2, 20'000);
  EXPECT_EQ(m.length_px, 10);
  EXPECT_EQ(m.width_px, 4);
}

TEST(Metrics, MissingDepthImputedWithMeanHeight) {
  const auto mask = filled_rect(20, 10, 3, 2, 10, 4);
  auto depth = uniform_depth(20, 10, 1010);
  for (int k = 0; k < 8; ++k) depth.at(3 + k, 2 + (k % 4)) = 0.0f;
  const auto m = extract_metrics(mask, depth, 1510);
  EXPECT_EQ(m, extract_metrics(mask, uniform_depth(20, 10, 1010), 1510));
}

TEST(Metrics, Errors) {
  const auto mask = filled_rect(20, 10, 3, 2, 10, 4);
  EXPECT_EQ(kind_of([&] { (void)extract_metrics(mask, uniform_depth(20, 10, 0), 1510); }), ErrorKind::NoValidDepth);
  EXPECT_EQ(kind_of([&] { (void)extract_metrics(BinaryMask(20, 10), uniform_depth(20, 10, 1), 1510); }),
            ErrorKind::EmptyMask);
  EXPECT_EQ(kind_of([&] { (void)extract_metrics(mask, uniform_depth(21, 10, 1), 1510); }), ErrorKind::PairMismatch);
}

TEST(Metrics, HeightClampsAndRawMode) {
  const auto mask = filled_rect(4, 4, 0, 0, 2, 1);
  auto depth = uniform_depth(4, 4, 1000);
  depth.at(1, 0) = 2000;  // below the floor
  const auto h = extract_metrics(mask, depth, 1500);
  EXPECT_EQ(h.volume_mm_px2, 500);
  const auto raw = extract_metrics(mask, depth, 1500, VolumeMode::RawDepthSum);
  EXPECT_EQ(raw.volume_mm_px2, 3000);
  EXPECT_EQ(raw.avg_height_mm, 1500);
  EXPECT_EQ(parse_volume_mode("raw_depth_sum"), VolumeMode::RawDepthSum);
  EXPECT_EQ(kind_of([] { (void)parse_volume_mode("sum"); }), ErrorKind::ConfigError);
}

TEST(MetricsProperty, HeightScalingTranslationAndArea) {
  Rng rng(31);
  for (int trial = 0; trial < 40; ++trial) {
    const int w = 48, h = 40;
    BinaryMask mask = fill_holes(random_blobs(rng, w / 2, h / 2, 2 + static_cast<int>(rng.below(3))));
    BinaryMask placed(w, h);
    for (int y = 0; y < h / 2; ++y)
      for (int x = 0; x < w / 2; ++x)
        if (mask.test(x, y)) placed.set(x, y);
    if (placed.empty()) continue;
    std::vector<double> heights(static_cast<std::size_t>(w) * h);
    for (auto& v : heights) v = static_cast<double>(rng.between(1, 64)) * 4;
    auto depth_for = [&](double scale, int dx, int dy) {
      DepthGrid d = uniform_depth(w, h, 1500);
      for (int y = 0; y < h / 2; ++y)
        for (int x = 0; x < w / 2; ++x) d.at(x + dx, y + dy) = static_cast<float>(1500 - scale * heights[y * w + x]);
      return d;
    };
    const auto base = extract_metrics(placed, depth_for(1, 0, 0), 1500);
    // Powers of two keep the scaled sums exact.
    const auto scaled = extract_metrics(placed, depth_for(2, 0, 0), 1500);
    EXPECT_EQ(scaled.volume_mm_px2, 2 * base.volume_mm_px2);
    EXPECT_EQ(scaled.avg_height_mm, 2 * base.avg_height_mm);
    EXPECT_EQ(scaled.contour_area_px2, base.contour_area_px2);
    EXPECT_EQ(scaled.width_px, base.width_px);

    const int dx = static_cast<int>(rng.below(w / 2)), dy = static_cast<int>(rng.below(h / 2));
    BinaryMask moved(w, h);
    for (int y = 0; y < h / 2; ++y)
      for (int x = 0; x < w / 2; ++x)
        if (placed.test(x, y)) moved.set(x + dx, y + dy);
    EXPECT_EQ(extract_metrics(moved, depth_for(1, dx, dy), 1500), base);

    EXPECT_NEAR(base.avg_height_mm * base.contour_area_px2, base.volume_mm_px2, 1e-6 * base.volume_mm_px2);
    const auto contours = trace_contours(placed);
    if (contours.size() == 1) {
      EXPECT_EQ(base.contour_area_px2, contour_area(contours[0]));
    }
  }
}

TEST(Median, OddEvenSingle) {
  const Date d = *Date::parse("2023-03-01");
  auto row = [&](double width, double volume) {
    MetricsRecord r{"c1", d, 30, 120.0, {}};
    r.metrics.width_px = width;
    r.metrics.volume_mm_px2 = volume;
    return r;
  };
  const auto odd = aggregate_median({row(3, 1), row(9, 2), row(5, 3)});
  ASSERT_EQ(odd.size(), 1u);
  EXPECT_EQ(odd[0].metrics.width_px, 5);
  EXPECT_EQ(aggregate_median({row(1, 100), row(1, 300)})[0].metrics.volume_mm_px2, 200);
  EXPECT_EQ(aggregate_median({row(7, 8)})[0], row(7, 8));
}

TEST(Median, GroupsByCalfDateAndIgnoresFrameOrder) {
  Rng rng(32);
  std::vector<MetricsRecord> rows;
  const Date d0 = *Date::parse("2023-03-01");
  for (int c = 0; c < 3; ++c)
    for (int k = 0; k < 4; ++k)
      for (int f = 0; f < 1 + static_cast<int>(rng.below(5)); ++f) {
        MetricsRecord r{"c" + std::to_string(c), d0.plus_days(3 * k), 20 + 3 * k, 100.0 + k, {}};
        r.metrics = {rng.uniform(300, 400), rng.uniform(400, 600), rng.uniform(8e4, 2e5), rng.uniform(600, 900),
                     rng.uniform(5e7, 2e8)};
        rows.push_back(r);
      }
  const auto agg = aggregate_median(rows);
  EXPECT_EQ(agg.size(), 12u);
  auto key = [](const MetricsRecord& r) { return std::make_pair(r.calf_id, r.obs_date); };
  auto sorted = [&](std::vector<MetricsRecord> v) {
    std::sort(v.begin(), v.end(), [&](const auto& a, const auto& b) { return key(a) < key(b); });
    return v;
  };
  for (int trial = 0; trial < 10; ++trial) {
    auto shuffled = rows;
    rng.shuffle(shuffled);
    auto a = sorted(aggregate_median(shuffled));
    auto b = sorted(agg);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].metrics, b[i].metrics);
  }
}

TEST(MetricsCsv, RoundTripAndErrors) {
  Rng rng(33);
  std::vector<MetricsRecord> rows;
  for (int i = 0; i < 20; ++i) {
    MetricsRecord r{"calf" + std::to_string(i % 4), Date::parse("2023-01-01")->plus_days(i), 21 + i, std::nullopt, {}};
    if (i % 3) r.body_weight_lb = rng.uniform(80, 250);
    r.metrics = {rng.uniform(300, 400), rng.uniform(400, 600), rng.uniform(8e4, 2e5), rng.uniform(600, 900),
                 rng.uniform(5e7, 2e8)};
    rows.push_back(r);
  }
  EXPECT_EQ(parse_metrics_csv("# note\n" + format_metrics_csv(rows)), rows);
  EXPECT_EQ(kind_of([] { (void)parse_metrics_csv("calf_id,obs_date\n"); }), ErrorKind::SchemaError);
  std::string bad(kMetricsHeader);
  bad += "\nc,2023-01-01,3,1,1,1,x,1,\n";
  EXPECT_EQ(kind_of([&] { (void)parse_metrics_csv(bad); }), ErrorKind::ParseError);
}
