#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mvf/geometry.hpp"
#include "mvf/image.hpp"
#include "mvf/raycast.hpp"
#include "mvf/tsdf.hpp"

namespace mvf {

struct Detection {
  Image<uint8_t> mask;
  std::string class_label;
  double score = 1.0;
};

struct ObjectModel {
  int id = 0;
  TsdfVolume volume;
  Pose vol_from_cam;  // xi_i, camera-to-model
  std::string class_label;
  double ex_count = 1.0;
  double nonex_count = 0.0;
  bool visible = true;
  bool hidden_class = false;

  double p_ex() const {
    const double s = ex_count + nonex_count;
    return s > 0 ? ex_count / s : 1.0;
  }
  Aabb world_aabb(const Pose& world_from_cam) const {
    return aabb_transformed(volume.local_aabb(),
                            world_from_cam * vol_from_cam.inverse());
  }
};

double mask_iou(const Image<uint8_t>& a, const Image<uint8_t>& b);

struct MatchResult {
  std::vector<std::pair<int, int>> pairs;  // (detection index, object id)
  std::vector<int> unmatched_detections;
  std::vector<int> matched_object_ids;
};

// Greedy matching in descending IoU order; each detection and object used at
// most once; pairs with IoU below the threshold stay unmatched.
MatchResult match_detections(
    const std::vector<Detection>& detections,
    const std::vector<std::pair<int, const Image<uint8_t>*>>& rendered_masks,
    double iou_threshold = 0.2);

struct CreationConfig {
  int min_mask_pixels = 1600;
  double padding = 2.0;
  int resolution = 64;
  double max_distance = 5.0;
  double max_volume_iou = 0.5;
  double weight_cap = 64.0;
  std::vector<std::string> exclude_classes = {"dining table", "bed",
                                              "refrigerator", "couch"};
  std::vector<std::string> hidden_classes = {"person"};
};

enum class CreationReject {
  None,
  ExcludedClass,
  TooFewPoints,
  TooFar,
  Overlapping,
};

const char* creation_reject_name(CreationReject r);

struct CreationOutcome {
  std::optional<ObjectModel> object;
  CreationReject reject = CreationReject::None;
};

// Back-projects masked pixels, takes per-axis 10th/90th percentiles, pads the
// max extent by the padding factor into a cube, and rejects candidates that
// are excluded by class, too sparse, beyond max_distance, or overlapping an
// existing volume (axis-aligned world boxes, IoU >= max_volume_iou).
CreationOutcome create_object(const Detection& det, const Image<float>& depth,
                              const Intrinsics& k, const Pose& world_from_cam,
                              const std::vector<Aabb>& existing_world_boxes,
                              const CreationConfig& cfg, int new_id);

// Per-axis nearest-rank percentile (q in [0,1]) of an unsorted sample.
double percentile_nearest_rank(std::vector<double> values, double q);

struct ExistenceUpdate {
  std::vector<int> deleted_ids;
};

// Detection-frame bookkeeping: matched objects gain Ex, all others NonEx;
// objects whose p_ex drops below delete_below are removed from the registry.
ExistenceUpdate update_existence(std::vector<ObjectModel>& objects,
                                 const std::vector<int>& matched_ids,
                                 double delete_below = 0.1);

bool visibility_check(const Image<uint8_t>& rendered_mask, int min_pixels = 1600,
                      int border = 20);

// Pixels where this object may fuse segmentation evidence: nothing else
// renders in front there (the per-pixel nearest model is this object or none).
Image<uint8_t> occlusion_ok_map(const RenderResult& objects_render, int object_id);

}  // namespace mvf
