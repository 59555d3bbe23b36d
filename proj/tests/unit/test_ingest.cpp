#include <gtest/gtest.h>

#include <filesystem>

#include "calfweight/ingest.hpp"
#include "calfweight/png_io.hpp"
#include "calfweight/rng.hpp"

using namespace calfweight;

namespace {

template <typename F>
Error capture(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e;
  }
  ADD_FAILURE() << "expected an Error";
  return Error(ErrorKind::UsageError, "none");
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "calfweight_test_ingest";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(Manifest, TwoWellFormedRows) {
  const std::string csv =
      "calf_id,obs_date,age_days,body_weight_lb,frame_id\n"
      "c1,2023-01-10,21,98.5,c1_a\n"
      "c1,2023-01-13,24,101,c1_b\n";
  const auto obs = parse_manifest(csv);
  ASSERT_EQ(obs.size(), 2u);
  EXPECT_EQ(obs[0].calf_id, "c1");
  EXPECT_EQ(obs[0].obs_date.iso(), "2023-01-10");
  EXPECT_EQ(obs[0].age_days, 21);
  EXPECT_DOUBLE_EQ(*obs[0].body_weight_lb, 98.5);
  EXPECT_EQ(obs[1].frame_ids, std::vector<std::string>{"c1_b"});
}

TEST(Manifest, BlankWeightIsAbsentAndCrlfAccepted) {
  const std::string csv =
      "calf_id,obs_date,age_days,body_weight_lb,frame_id\r\n"
      "c9,2023-05-01,30,,f1\r\n";
  const auto obs = parse_manifest(csv);
  ASSERT_EQ(obs.size(), 1u);
  EXPECT_FALSE(obs[0].body_weight_lb.has_value());
}

TEST(Manifest, FramesGroupIntoObservationsSortedByDate) {
  const std::string csv =
      "frame_id,calf_id,obs_date,age_days,body_weight_lb\n"
      "b2,b,2023-01-12,40,150\n"
      "a1,a,2023-01-09,21,90\n"
      "b1,b,2023-01-09,37,140\n"
      "b3,b,2023-01-12,40,150\n";
  const auto obs = parse_manifest(csv);
  ASSERT_EQ(obs.size(), 3u);
  EXPECT_EQ(obs[0].calf_id, "b");
  EXPECT_EQ(obs[0].obs_date.iso(), "2023-01-09");
  EXPECT_EQ(obs[1].frame_ids, (std::vector<std::string>{"b2", "b3"}));
  EXPECT_EQ(obs[2].calf_id, "a");
}

TEST(Manifest, AgeInversionIsInconsistent) {
  const std::string csv =
      "calf_id,obs_date,age_days,body_weight_lb,frame_id\n"
      "c1,2023-01-10,30,100,f1\n"
      "c1,2023-01-17,20,110,f2\n";
  const auto e = capture([&] { (void)parse_manifest(csv); });
  EXPECT_EQ(e.kind(), ErrorKind::ConsistencyError);
  EXPECT_EQ(e.subject(), "c1");
}

TEST(Manifest, DefectsAreTypedAndLocated) {
  EXPECT_EQ(capture([] { (void)parse_manifest("calf_id,obs_date,age_days,frame_id\nc,2023-01-01,3,f\n"); }).subject(),
            "body_weight_lb");
  const auto bad_date = capture([] {
    (void)parse_manifest("calf_id,obs_date,age_days,body_weight_lb,frame_id\nc,2023-02-30,3,1,f\n", "m.csv");
  });
  EXPECT_EQ(bad_date.kind(), ErrorKind::ParseError);
  EXPECT_EQ(bad_date.subject(), "m.csv:2");
  EXPECT_EQ(capture([] {
              (void)parse_manifest("calf_id,obs_date,age_days,body_weight_lb,frame_id\nc,2023-01-01,x,1,f\n");
            }).kind(),
            ErrorKind::ParseError);
  EXPECT_EQ(capture([] {
              (void)parse_manifest(
                  "calf_id,obs_date,age_days,body_weight_lb,frame_id\nc,2023-01-01,3,1,f\nc,2023-01-01,3,1,f\n");
            }).kind(),
            ErrorKind::DuplicateRecord);
  EXPECT_EQ(capture([] { (void)parse_manifest(""); }).kind(), ErrorKind::SchemaError);
}

TEST(Manifest, WriteReadRoundTrip) {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<CalfObservation> obs;
    const int calves = 1 + static_cast<int>(rng.below(6));
    for (int c = 0; c < calves; ++c) {
      Date d = *Date::parse("2023-01-02");
      d = d.plus_days(static_cast<int>(rng.below(30)));
      int age = static_cast<int>(rng.between(0, 40));
      const int n = 1 + static_cast<int>(rng.below(8));
      for (int k = 0; k < n; ++k) {
        CalfObservation o;
        o.calf_id = "calf" + std::to_string(c);
        o.obs_date = d;
        o.age_days = age;
        if (rng.uniform() < 0.8) o.body_weight_lb = rng.uniform(50.0, 250.0);
        const int frames = 1 + static_cast<int>(rng.below(3));
        for (int f = 0; f < frames; ++f) o.frame_ids.push_back(o.calf_id + "_" + std::to_string(k) + "_" + std::to_string(f));
        obs.push_back(o);
        const int step = 1 + static_cast<int>(rng.below(4));
        d = d.plus_days(step);
        age += step;
      }
    }
    EXPECT_EQ(parse_manifest(format_manifest(obs)), obs);
  }
}

TEST(DepthCsv, ParsesGridAndPreservesZeros) {
  const auto g = parse_depth_csv("1,2\n3,4\n", 2, 2);
  EXPECT_EQ(g.mm, (std::vector<float>{1, 2, 3, 4}));
  const auto z = parse_depth_csv("0,0,0\n0,0,0\n", 3, 2);
  EXPECT_EQ(z.mm, std::vector<float>(6, 0.0f));
}

TEST(DepthCsv, RaggedAndMismatchedShapes) {
  const auto ragged = capture([] { (void)parse_depth_csv("1,2\n3,4,5\n", 2, 2, "d.csv"); });
  EXPECT_EQ(ragged.kind(), ErrorKind::ShapeError);
  EXPECT_EQ(ragged.subject(), "d.csv:2");
  EXPECT_EQ(capture([] { (void)parse_depth_csv("1,2\n3,4\n", 3, 2); }).kind(), ErrorKind::PairMismatch);
  EXPECT_EQ(capture([] { (void)parse_depth_csv("1,2\n", 2, 2); }).kind(), ErrorKind::PairMismatch);
  EXPECT_EQ(capture([] { (void)parse_depth_csv("1,x\n", 2, 1); }).kind(), ErrorKind::ParseError);
  EXPECT_EQ(capture([] { (void)parse_depth_csv("1,-2\n", 2, 1); }).kind(), ErrorKind::ParseError);
}

TEST(DepthCsv, FileRoundTrip) {
  DepthGrid g{3, 2, {1510.0f, 0.0f, 1009.5f, 12.25f, 1.0f, 700.0f}};
  const auto path = scratch("grid.csv");
  write_depth_csv(path, g);
  EXPECT_EQ(load_depth_csv(path, 3, 2), g);
}

TEST(MaskLabels, TriangleEmptyAndErrors) {
  const auto one = parse_mask_labels("{\"frame_id\": \"f1\", \"polygon\": [0,0, 10,0, 0,10]}\n");
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].polygon.size(), 3u);
  EXPECT_TRUE(parse_mask_labels("").empty());
  EXPECT_EQ(capture([] { (void)parse_mask_labels("{\"frame_id\": \"f\", \"polygon\": [0,0,\"a\",0,0,10]}"); }).kind(),
            ErrorKind::ParseError);
  const auto degenerate = capture([] { (void)parse_mask_labels("{\"frame_id\": \"f2\", \"polygon\": [0,0,1,1]}"); });
  EXPECT_EQ(degenerate.kind(), ErrorKind::DegeneratePolygon);
  EXPECT_EQ(degenerate.subject(), "f2");
  EXPECT_EQ(capture([] { (void)parse_mask_labels("{not json}", "l.jsonl"); }).subject(), "l.jsonl:1");
}

TEST(MaskLabels, WriteReadRoundTrip) {
  Rng rng(22);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<MaskLabel> labels;
    const int n = static_cast<int>(rng.below(5));
    for (int i = 0; i < n; ++i) {
      MaskLabel l{"frame_" + std::to_string(i), {}};
      const int v = 3 + static_cast<int>(rng.below(10));
      for (int k = 0; k < v; ++k) {
        const double x = rng.uniform() < 0.5 ? static_cast<double>(rng.below(1280)) : rng.uniform(0, 1280);
        l.polygon.push_back({x, rng.uniform(0, 720)});
      }
      labels.push_back(std::move(l));
    }
    EXPECT_EQ(parse_mask_labels(format_mask_labels(labels)), labels);
  }
}

TEST(DepthFrame, PairValidation) {
  Raster8 color(4, 3, 3);
  EXPECT_NO_THROW((void)make_depth_frame("f", color, DepthGrid{4, 3, std::vector<float>(12, 1.0f)}, 1510.0));
  EXPECT_EQ(capture([&] { (void)make_depth_frame("f", color, DepthGrid{3, 3, std::vector<float>(9)}, 1510.0); }).kind(),
            ErrorKind::PairMismatch);
}

TEST(Png, RgbAndMaskRoundTrip) {
  Raster8 img(5, 4, 3);
  Rng rng(23);
  for (auto& v : img.data()) v = static_cast<std::uint8_t>(rng.below(256));
  const auto path = scratch("img.png");
  write_png(path, img);
  EXPECT_EQ(read_png(path), img);

  BinaryMask m(7, 6);
  m.set(1, 2);
  m.set(6, 5);
  write_mask_png(scratch("mask.png"), m);
  EXPECT_EQ(read_mask_png(scratch("mask.png")), m);
  EXPECT_EQ(capture([] { (void)read_png("/nonexistent/x.png"); }).kind(), ErrorKind::IoError);
}
