#include "mvf/objects.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mvf {

double mask_iou(const Image<uint8_t>& a, const Image<uint8_t>& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw std::invalid_argument("mask_iou: size mismatch");
  }
  size_t inter = 0, uni = 0;
  const uint8_t* pa = a.data();
  const uint8_t* pb = b.data();
  for (size_t i = 0; i < a.size(); ++i) {
    const bool xa = pa[i] != 0, xb = pb[i] != 0;
    inter += xa && xb;
    uni += xa || xb;
  }
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

MatchResult match_detections(
    const std::vector<Detection>& detections,
    const std::vector<std::pair<int, const Image<uint8_t>*>>& rendered_masks,
    double iou_threshold) {
  struct Cand {
    double iou;
    int det;
    int obj_idx;
  };
  std::vector<Cand> cands;
  for (size_t d = 0; d < detections.size(); ++d) {
    for (size_t o = 0; o < rendered_masks.size(); ++o) {
      const double iou = mask_iou(detections[d].mask, *rendered_masks[o].second);
      if (iou >= iou_threshold) {
        cands.push_back({iou, static_cast<int>(d), static_cast<int>(o)});
      }
    }
  }
  std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (a.det != b.det) return a.det < b.det;
    return a.obj_idx < b.obj_idx;
  });
  MatchResult out;
  std::vector<bool> det_used(detections.size(), false);
  std::vector<bool> obj_used(rendered_masks.size(), false);
  for (const Cand& c : cands) {
    if (det_used[c.det] || obj_used[c.obj_idx]) continue;
    det_used[c.det] = true;
    obj_used[c.obj_idx] = true;
    out.pairs.emplace_back(c.det, rendered_masks[c.obj_idx].first);
    out.matched_object_ids.push_back(rendered_masks[c.obj_idx].first);
  }
  for (size_t d = 0; d < detections.size(); ++d) {
    if (!det_used[d]) out.unmatched_detections.push_back(static_cast<int>(d));
  }
  return out;
}

double percentile_nearest_rank(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile of empty sample");
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  size_t rank = static_cast<size_t>(std::ceil(q * n));
  if (rank < 1) rank = 1;
  if (rank > n) rank = n;
  return values[rank - 1];
}

CreationOutcome create_object(const Detection& det, const Image<float>& depth,
                              const Intrinsics& k, const Pose& world_from_cam,
                              const std::vector<Aabb>& existing_world_boxes,
                              const CreationConfig& cfg, int new_id) {
  CreationOutcome out;
  for (const std::string& ex : cfg.exclude_classes) {
    if (det.class_label == ex) {
      out.reject = CreationReject::ExcludedClass;
      return out;
    }
  }
  if (!depth.same_size(det.mask.width(), det.mask.height())) {
    throw std::invalid_argument("create_object: mask/depth size mismatch");
  }
  std::vector<double> xs, ys, zs;
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      if (!det.mask.at(x, y)) continue;
      const double d = depth.at(x, y);
      if (!(d > 0)) continue;
      const Vec3 p = world_from_cam *
                     Vec3((x - k.cx) / k.fx * d, (y - k.cy) / k.fy * d, d);
      xs.push_back(p.x());
      ys.push_back(p.y());
      zs.push_back(p.z());
    }
  }
  if (static_cast<int>(xs.size()) < cfg.min_mask_pixels) {
    out.reject = CreationReject::TooFewPoints;
    return out;
  }
  const Vec3 lo(percentile_nearest_rank(xs, 0.10),
                percentile_nearest_rank(ys, 0.10),
                percentile_nearest_rank(zs, 0.10));
  const Vec3 hi(percentile_nearest_rank(xs, 0.90),
                percentile_nearest_rank(ys, 0.90),
                percentile_nearest_rank(zs, 0.90));
  const Vec3 center = 0.5 * (lo + hi);
  const double size = cfg.padding * (hi - lo).maxCoeff();
  if (!(size > 0)) {
    out.reject = CreationReject::TooFewPoints;
    return out;
  }
  if ((center - world_from_cam.translation()).norm() > cfg.max_distance) {
    out.reject = CreationReject::TooFar;
    return out;
  }
  const Aabb world_box{center - Vec3::Constant(0.5 * size),
                       center + Vec3::Constant(0.5 * size)};
  for (const Aabb& other : existing_world_boxes) {
    if (aabb_iou(world_box, other) >= cfg.max_volume_iou) {
      out.reject = CreationReject::Overlapping;
      return out;
    }
  }

  const double voxel = size / cfg.resolution;
  ObjectModel obj{new_id,
                  TsdfVolume(Vec3::Zero(),
                             Eigen::Vector3i::Constant(cfg.resolution), voxel,
                             cfg.weight_cap),
                  // model frame: world axes, origin at the volume center
                  Pose(Mat3::Identity(), -center) * world_from_cam,
                  det.class_label};
  obj.hidden_class =
      std::find(cfg.hidden_classes.begin(), cfg.hidden_classes.end(),
                det.class_label) != cfg.hidden_classes.end();
  out.object = std::move(obj);
  return out;
}

const char* creation_reject_name(CreationReject r) {
  switch (r) {
    case CreationReject::ExcludedClass:
      return "excluded-class";
    case CreationReject::TooFewPoints:
      return "too-few-points";
    case CreationReject::TooFar:
      return "too-far";
    case CreationReject::Overlapping:
      return "overlapping";
    default:
      return "none";
  }
}

ExistenceUpdate update_existence(std::vector<ObjectModel>& objects,
                                 const std::vector<int>& matched_ids,
                                 double delete_below) {
  ExistenceUpdate out;
  for (ObjectModel& obj : objects) {
    const bool matched = std::find(matched_ids.begin(), matched_ids.end(),
                                   obj.id) != matched_ids.end();
    if (matched) {
      obj.ex_count += 1.0;
    } else {
      obj.nonex_count += 1.0;
    }
  }
  objects.erase(std::remove_if(objects.begin(), objects.end(),
                               [&](const ObjectModel& o) {
                                 if (o.p_ex() < delete_below) {
                                   out.deleted_ids.push_back(o.id);
                                   return true;
                                 }
                                 return false;
                               }),
                objects.end());
  return out;
}

bool visibility_check(const Image<uint8_t>& rendered_mask, int min_pixels,
                      int border) {
  int count = 0;
  const int w = rendered_mask.width(), h = rendered_mask.height();
  for (int y = border; y < h - border; ++y) {
    for (int x = border; x < w - border; ++x) {
      if (rendered_mask.at(x, y)) ++count;
    }
  }
  return count >= min_pixels;
}

Image<uint8_t> occlusion_ok_map(const RenderResult& objects_render,
                                int object_id) {
  const Image<int32_t>& ids = objects_render.model_id;
  Image<uint8_t> ok(ids.width(), ids.height(), 0);
  for (int y = 0; y < ids.height(); ++y) {
    for (int x = 0; x < ids.width(); ++x) {
      const int32_t v = ids.at(x, y);
      ok.at(x, y) = (v == -1 || v == object_id) ? 1 : 0;
    }
  }
  return ok;
}

}  // namespace mvf
