#include <doctest.h>

#include <cmath>

#include "mvf/objects.hpp"

using namespace mvf;

namespace {

const Intrinsics kObjK{100, 100, 31.5, 23.5, 64, 48};

Image<uint8_t> rect_mask(int w, int h, int x0, int y0, int x1, int y1) {
  Image<uint8_t> m(w, h, 0);
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) m.at(x, y) = 1;
  }
  return m;
}

Detection box_detection(const std::string& label, int x0 = 8, int y0 = 4,
                        int x1 = 58, int y1 = 44) {
  return Detection{rect_mask(kObjK.width, kObjK.height, x0, y0, x1, y1), label,
                   0.9};
}

ObjectModel stub_object(int id) {
  return ObjectModel{id, TsdfVolume(Vec3::Zero(), Eigen::Vector3i(8, 8, 8), 0.1),
                     Pose::identity(), "thing"};
}

}  // namespace

TEST_SUITE("objects") {

TEST_CASE("mask iou basics") {
  const auto a = rect_mask(32, 32, 0, 0, 10, 10);
  const auto b = rect_mask(32, 32, 5, 0, 15, 10);  // half overlap
  CHECK(mask_iou(a, a) == doctest::Approx(1.0));
  CHECK(mask_iou(a, b) == doctest::Approx(50.0 / 150.0));
  const auto c = rect_mask(32, 32, 20, 20, 30, 30);
  CHECK(mask_iou(a, c) == 0.0);
  const Image<uint8_t> empty_mask(32, 32, 0);
  CHECK(mask_iou(empty_mask, empty_mask) == 0.0);
  CHECK_THROWS_AS(mask_iou(a, rect_mask(16, 16, 0, 0, 4, 4)),
                  std::invalid_argument);
}

TEST_CASE("matching threshold sits exactly at the configured iou") {
  // 60 + 60 px masks with 20 shared -> iou 20/100 = 0.2
  const auto render = rect_mask(64, 48, 0, 0, 60, 1);
  std::vector<std::pair<int, const Image<uint8_t>*>> rendered = {{4, &render}};
  // shared columns 40..59 on row 0, plus 40 own px on row 1
  Detection at_thr{rect_mask(64, 48, 40, 0, 60, 1), "x", 1.0};
  for (int x = 20; x < 60; ++x) at_thr.mask.at(x, 1) = 1;
  CHECK(mask_iou(at_thr.mask, render) == doctest::Approx(0.2));
  MatchResult hit = match_detections({at_thr}, rendered, 0.2);
  REQUIRE(hit.pairs.size() == 1);
  CHECK(hit.pairs[0] == std::pair<int, int>{0, 4});

  // drop one shared pixel: 19/101 < 0.2
  Detection below = at_thr;
  below.mask.at(40, 0) = 0;
  below.mask.at(0, 2) = 1;
  CHECK(mask_iou(below.mask, render) < 0.2);
  MatchResult miss = match_detections({below}, rendered, 0.2);
  CHECK(miss.pairs.empty());
  CHECK(miss.unmatched_detections == std::vector<int>{0});
}

TEST_CASE("greedy matching takes pairs in descending iou") {
  const auto r0 = rect_mask(64, 48, 0, 0, 20, 20);
  const auto r1 = rect_mask(64, 48, 30, 0, 50, 20);
  const Detection d0{rect_mask(64, 48, 0, 0, 20, 18), "a", 1.0};   // strong r0
  const Detection d1{rect_mask(64, 48, 12, 0, 36, 20), "b", 1.0};  // touches both
  std::vector<std::pair<int, const Image<uint8_t>*>> rendered = {{7, &r0},
                                                                 {9, &r1}};
  const MatchResult m = match_detections({d0, d1}, rendered, 0.05);
  REQUIRE(m.pairs.size() == 2);
  CHECK(m.pairs[0] == std::pair<int, int>{0, 7});
  CHECK(m.pairs[1] == std::pair<int, int>{1, 9});
  CHECK(m.matched_object_ids == std::vector<int>{7, 9});
  CHECK(m.unmatched_detections.empty());
}

TEST_CASE("equal scores resolve by detection order") {
  const auto r = rect_mask(64, 48, 0, 0, 20, 20);
  const Detection twin{rect_mask(64, 48, 0, 0, 20, 20), "a", 1.0};
  std::vector<std::pair<int, const Image<uint8_t>*>> rendered = {{3, &r}};
  const MatchResult m = match_detections({twin, twin}, rendered, 0.2);
  REQUIRE(m.pairs.size() == 1);
  CHECK(m.pairs[0] == std::pair<int, int>{0, 3});
  CHECK(m.unmatched_detections == std::vector<int>{1});
}

TEST_CASE("nearest rank percentile") {
  const std::vector<double> v = {70, 10, 50, 30, 90, 20, 100, 40, 80, 60};
  CHECK(percentile_nearest_rank(v, 0.10) == 10);
  CHECK(percentile_nearest_rank(v, 0.90) == 90);
  CHECK(percentile_nearest_rank(v, 0.95) == 100);
  CHECK(percentile_nearest_rank(v, 0.0) == 10);
  CHECK(percentile_nearest_rank(v, 1.0) == 100);
  CHECK(percentile_nearest_rank({42.0}, 0.5) == 42);
  CHECK_THROWS_AS(percentile_nearest_rank({}, 0.5), std::invalid_argument);
}

TEST_CASE("creation carves a padded cube around the percentile box") {
  const Detection det = box_detection("monitor");
  Image<float> depth(kObjK.width, kObjK.height, 2.0f);
  const CreationOutcome out = create_object(det, depth, kObjK,
                                            Pose::identity(), {},
                                            CreationConfig{}, 11);
  REQUIRE(out.object.has_value());
  CHECK(out.reject == CreationReject::None);
  const ObjectModel& obj = *out.object;
  CHECK(obj.id == 11);
  CHECK_FALSE(obj.hidden_class);
  CHECK(obj.p_ex() == 1.0);
  CHECK(obj.volume.resolution() == Eigen::Vector3i(64, 64, 64));
  // mask columns 8..57 at depth 2: 10th/90th percentile x-extent is
  // (52-12)*0.02 = 0.8, padded by 2 -> cube of 1.6, voxel 0.025
  CHECK(obj.volume.voxel_size() == doctest::Approx(0.025).epsilon(1e-12));
  const Aabb box = obj.world_aabb(Pose::identity());
  CHECK(box.min.z() == doctest::Approx(2.0 - 0.8).epsilon(1e-9));
  CHECK(box.max.z() == doctest::Approx(2.0 + 0.8).epsilon(1e-9));
  CHECK(box.min.x() == doctest::Approx(0.01 - 0.8).epsilon(1e-6));
  // model frame sits at the cube center with world axes
  const Vec3 p_world(0.01, -0.01, 2.0);
  const Vec3 p_model = obj.vol_from_cam * p_world;  // cam == world here
  CHECK(p_model.norm() < 1e-9);
}

TEST_CASE("excluded furniture classes never spawn objects") {
  Image<float> depth(kObjK.width, kObjK.height, 2.0f);
  for (const char* label : {"dining table", "bed", "refrigerator", "couch"}) {
    const CreationOutcome out = create_object(box_detection(label), depth,
                                              kObjK, Pose::identity(), {},
                                              CreationConfig{}, 1);
    CHECK_FALSE(out.object.has_value());
    CHECK(out.reject == CreationReject::ExcludedClass);
    CHECK(creation_reject_name(out.reject) == std::string("excluded-class"));
  }
}

TEST_CASE("person models are created but flagged hidden") {
  Image<float> depth(kObjK.width, kObjK.height, 2.0f);
  const CreationOutcome out = create_object(box_detection("person"), depth,
                                            kObjK, Pose::identity(), {},
                                            CreationConfig{}, 2);
  REQUIRE(out.object.has_value());
  CHECK(out.object->hidden_class);
}

TEST_CASE("pixel floor is inclusive at the configured count") {
  // 40x40 mask = exactly 1600 valid points
  const Detection det = box_detection("monitor", 12, 4, 52, 44);
  Image<float> depth(kObjK.width, kObjK.height, 2.0f);
  const CreationOutcome ok = create_object(det, depth, kObjK, Pose::identity(),
                                           {}, CreationConfig{}, 1);
  CHECK(ok.object.has_value());
  // knock one pixel out via invalid depth -> 1599
  depth.at(20, 20) = 0.f;
  const CreationOutcome short_one = create_object(det, depth, kObjK,
                                                  Pose::identity(), {},
                                                  CreationConfig{}, 1);
  CHECK_FALSE(short_one.object.has_value());
  CHECK(short_one.reject == CreationReject::TooFewPoints);
}

TEST_CASE("distance cut straddles the box center range") {
  const Detection det = box_detection("monitor");
  Image<float> depth(kObjK.width, kObjK.height, 2.0f);
  // center lands at (0.01, 0, 2), 2.000025 m out
  CreationConfig near_cfg;
  near_cfg.max_distance = 2.001;
  CHECK(create_object(det, depth, kObjK, Pose::identity(), {}, near_cfg, 1)
            .object.has_value());
  CreationConfig far_cfg;
  far_cfg.max_distance = 1.999;
  const CreationOutcome rejected =
      create_object(det, depth, kObjK, Pose::identity(), {}, far_cfg, 1);
  CHECK_FALSE(rejected.object.has_value());
  CHECK(rejected.reject == CreationReject::TooFar);
}

TEST_CASE("volume overlap cut straddles the half iou default") {
  const Detection det = box_detection("monitor");
  Image<float> depth(kObjK.width, kObjK.height, 2.0f);
  const Aabb own = create_object(det, depth, kObjK, Pose::identity(), {},
                                 CreationConfig{}, 1)
                       .object->world_aabb(Pose::identity());
  // cube side 1.6; shifting a copy by s gives iou (1.6-s)/(1.6+s)
  auto shifted = [&](double s) {
    Aabb b = own;
    b.min.x() += s;
    b.max.x() += s;
    return b;
  };
  const CreationOutcome collide = create_object(
      det, depth, kObjK, Pose::identity(), {shifted(0.53)}, CreationConfig{}, 1);
  CHECK_FALSE(collide.object.has_value());
  CHECK(collide.reject == CreationReject::Overlapping);
  const CreationOutcome clear = create_object(
      det, depth, kObjK, Pose::identity(), {shifted(0.54)}, CreationConfig{}, 1);
  CHECK(clear.object.has_value());
}

TEST_CASE("far outliers cannot blow up the box") {
  const Detection det = box_detection("monitor");
  Image<float> depth(kObjK.width, kObjK.height, 2.0f);
  const double clean = create_object(det, depth, kObjK, Pose::identity(), {},
                                     CreationConfig{}, 1)
                           .object->volume.voxel_size();
  // corrupt 5% of the mask rows with far readings; a min/max box would grow
  // ~3.7x, the percentile box barely moves
  for (int x = 8; x < 58; ++x) {
    depth.at(x, 4) = 6.0f;
    depth.at(x, 5) = 6.0f;
  }
  const CreationOutcome out = create_object(det, depth, kObjK,
                                            Pose::identity(), {},
                                            CreationConfig{}, 1);
  REQUIRE(out.object.has_value());
  CHECK(out.object->volume.voxel_size() < clean * 1.1);
  CHECK(out.object->volume.voxel_size() >= clean);
}

TEST_CASE("existence flips at one-in-eleven") {
  std::vector<ObjectModel> objects;
  objects.push_back(stub_object(5));
  // nine misses: p_ex = 1/10 = 0.1, not below the cut
  for (int i = 0; i < 9; ++i) {
    const ExistenceUpdate u = update_existence(objects, {});
    CHECK(u.deleted_ids.empty());
  }
  REQUIRE(objects.size() == 1);
  CHECK(objects[0].p_ex() == doctest::Approx(0.1));
  // tenth miss: 1/11 < 0.1 -> gone
  const ExistenceUpdate u = update_existence(objects, {});
  CHECK(u.deleted_ids == std::vector<int>{5});
  CHECK(objects.empty());
}

TEST_CASE("matches feed the positive count") {
  std::vector<ObjectModel> objects;
  objects.push_back(stub_object(1));
  objects.push_back(stub_object(2));
  update_existence(objects, {1});
  CHECK(objects[0].ex_count == 2.0);
  CHECK(objects[0].nonex_count == 0.0);
  CHECK(objects[1].ex_count == 1.0);
  CHECK(objects[1].nonex_count == 1.0);
  CHECK(objects[0].p_ex() == 1.0);
  CHECK(objects[1].p_ex() == 0.5);
}

TEST_CASE("deletion keeps the survivors in order") {
  std::vector<ObjectModel> objects;
  for (int id : {1, 2, 3}) {
    objects.push_back(stub_object(id));
    objects.back().ex_count = 1;
    objects.back().nonex_count = id == 2 ? 20 : 0;
  }
  const ExistenceUpdate u = update_existence(objects, {1, 3});
  CHECK(u.deleted_ids == std::vector<int>{2});
  REQUIRE(objects.size() == 2);
  CHECK(objects[0].id == 1);
  CHECK(objects[1].id == 3);
}

TEST_CASE("visibility needs enough pixels inside the border") {
  Image<uint8_t> mask(160, 120, 0);
  // 40x40 block fully inside the 20 px frame
  for (int y = 30; y < 70; ++y) {
    for (int x = 30; x < 70; ++x) mask.at(x, y) = 1;
  }
  CHECK(visibility_check(mask, 1600, 20));
  mask.at(30, 30) = 0;  // 1599
  CHECK_FALSE(visibility_check(mask, 1600, 20));
  // border pixels never count
  for (int y = 0; y < 20; ++y) {
    for (int x = 0; x < 160; ++x) mask.at(x, y) = 1;
  }
  CHECK_FALSE(visibility_check(mask, 1600, 20));
  mask.at(30, 30) = 1;
  CHECK(visibility_check(mask, 1600, 20));
}

TEST_CASE("occlusion map admits own and empty pixels only") {
  RenderResult r;
  r.model_id = Image<int32_t>(8, 4, -1);
  r.depth = Image<float>(8, 4, 0.f);
  r.model_id.at(1, 1) = 3;
  r.model_id.at(2, 1) = 9;
  const Image<uint8_t> ok = occlusion_ok_map(r, 3);
  CHECK(ok.at(0, 0) == 1);  // empty
  CHECK(ok.at(1, 1) == 1);  // own surface
  CHECK(ok.at(2, 1) == 0);  // someone else in front
}

}  // TEST_SUITE
