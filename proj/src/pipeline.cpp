#include "mvf/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "mvf/errors.hpp"
#include "mvf/tracking.hpp"

namespace mvf {
namespace {

constexpr int kBackgroundId = 0;
constexpr int kResizePadVoxels = 8;

int count_valid(const Image<float>& depth) {
  int n = 0;
  for (size_t i = 0; i < depth.size(); ++i) {
    const float d = depth.data()[i];
    if (d > 0 && std::isfinite(d)) ++n;
  }
  return n;
}

Image<uint8_t> instance_mask(const Image<uint16_t>& map, uint16_t id) {
  Image<uint8_t> out(map.width(), map.height());
  for (size_t i = 0; i < map.size(); ++i) {
    out.data()[i] = map.data()[i] == id ? 1 : 0;
  }
  return out;
}

}  // namespace

Engine::Engine(const PipelineConfig& cfg, const Intrinsics& k)
    : cfg_(cfg), k_(k) {
  if (cfg_.camera_fx > 0) {
    k_.fx = cfg_.camera_fx;
    k_.fy = cfg_.camera_fy;
    k_.cx = cfg_.camera_cx;
    k_.cy = cfg_.camera_cy;
  }
  if (!k_.valid()) throw std::invalid_argument("engine: invalid intrinsics");
  if (cfg_.threads > 1) pool_ = std::make_unique<ThreadPool>(cfg_.threads);

  const double size = cfg_.background.size;
  const int res = cfg_.background.resolution;
  // camera starts at the center of the near face, looking along +z
  bg_.emplace(Vec3(0, 0, size / 2), Eigen::Vector3i(res, res, res),
              size / res, cfg_.background.weight_cap);
}

std::vector<ModelView> Engine::model_views() const {
  std::vector<ModelView> views;
  views.push_back({kBackgroundId, &*bg_, world_from_cam_});
  for (const ObjectModel& obj : objects_) {
    views.push_back({obj.id, &obj.volume, obj.vol_from_cam});
  }
  return views;
}

std::vector<RenderModel> Engine::object_render_models(
    bool include_hidden) const {
  std::vector<RenderModel> models;
  for (const ObjectModel& obj : objects_) {
    if (obj.hidden_class && !include_hidden) continue;
    models.push_back({obj.id, &obj.volume, obj.vol_from_cam, true});
  }
  return models;
}

RenderResult Engine::render_scene(bool shaded) const {
  std::vector<RenderModel> models;
  models.push_back({kBackgroundId, &*bg_, world_from_cam_, false});
  for (const RenderModel& m : object_render_models(false)) models.push_back(m);
  RaycastOptions opts;
  opts.normals = shaded;
  return raycast(models, k_, opts, pool_.get());
}

void Engine::bootstrap_object(ObjectModel& obj, const Image<uint8_t>& mask,
                              const Image<float>& depth,
                              const Image<int32_t>& rendered_ids) {
  Image<float> q(mask.width(), mask.height());
  for (size_t i = 0; i < mask.size(); ++i) {
    q.data()[i] = mask.data()[i] ? 1.0f : 0.0f;
  }
  obj.volume.integrate_depth(depth, k_, obj.vol_from_cam, &q, pool_.get());

  // only pixels where no prior object renders may seed segmentation counts
  Image<uint8_t> eligible(mask.width(), mask.height());
  for (size_t i = 0; i < mask.size(); ++i) {
    eligible.data()[i] = rendered_ids.data()[i] == -1 ? 1 : 0;
  }
  obj.volume.integrate_counts(mask, eligible, k_, obj.vol_from_cam,
                              pool_.get());
}

void Engine::detection_step(const Frame& frame, const Image<float>& depth,
                            FrameReport& rep) {
  const MaskSet& ms = *frame.masks;
  if (!ms.instance_map.same_size(depth.width(), depth.height())) {
    throw std::invalid_argument("mask size does not match depth");
  }
  std::vector<MaskInstanceMeta> meta = ms.meta;
  std::sort(meta.begin(), meta.end(),
            [](const MaskInstanceMeta& a, const MaskInstanceMeta& b) {
              return a.id < b.id;
            });
  std::vector<Detection> dets;
  for (const MaskInstanceMeta& m : meta) {
    dets.push_back(
        {instance_mask(ms.instance_map, m.id), m.label, m.score});
  }

  RaycastOptions opts;
  RenderResult rendered = raycast(object_render_models(true), k_, opts,
                                  pool_.get());

  std::vector<Image<uint8_t>> masks_store;
  std::vector<std::pair<int, const Image<uint8_t>*>> rendered_masks;
  masks_store.reserve(objects_.size());
  for (const ObjectModel& obj : objects_) {
    masks_store.push_back(model_mask(rendered, obj.id));
    rendered_masks.push_back({obj.id, &masks_store.back()});
  }

  const MatchResult match =
      match_detections(dets, rendered_masks, cfg_.match_iou);
  rep.matched_ids = match.matched_object_ids;

  for (const auto& [det_idx, obj_id] : match.pairs) {
    auto it = std::find_if(objects_.begin(), objects_.end(),
                           [obj_id](const ObjectModel& o) {
                             return o.id == obj_id;
                           });
    ObjectModel& obj = *it;
    const Detection& det = dets[det_idx];

    Aabb box;
    bool any = false;
    for (int y = 0; y < depth.height(); ++y) {
      const uint8_t* mrow = det.mask.row(y);
      const float* drow = depth.row(y);
      for (int x = 0; x < depth.width(); ++x) {
        if (!mrow[x] || !(drow[x] > 0)) continue;
        const Vec3 p =
            obj.vol_from_cam * backproject(Vec2(x, y), drow[x], k_);
        if (!any) {
          box.min = box.max = p;
          any = true;
        } else {
          box.min = box.min.cwiseMin(p);
          box.max = box.max.cwiseMax(p);
        }
      }
    }
    if (any) obj.volume.resize_to_fit(box, kResizePadVoxels);

    const Image<uint8_t> eligible = occlusion_ok_map(rendered, obj.id);
    obj.volume.integrate_counts(det.mask, eligible, k_, obj.vol_from_cam,
                                pool_.get());
  }

  const ExistenceUpdate upd = update_existence(
      objects_, match.matched_object_ids, cfg_.delete_below);
  for (int id : upd.deleted_ids) rep.deleted_ids.push_back(id);

  std::vector<Aabb> world_boxes;
  for (const ObjectModel& obj : objects_) {
    world_boxes.push_back(obj.world_aabb(world_from_cam_));
  }
  for (int det_idx : match.unmatched_detections) {
    const Detection& det = dets[det_idx];
    CreationOutcome outcome =
        create_object(det, depth, k_, world_from_cam_, world_boxes,
                      cfg_.creation, next_object_id_);
    if (outcome.object) {
      ObjectModel obj = std::move(*outcome.object);
      bootstrap_object(obj, det.mask, depth, rendered.model_id);
      world_boxes.push_back(obj.world_aabb(world_from_cam_));
      rep.created_ids.push_back(obj.id);
      objects_.push_back(std::move(obj));
      ++next_object_id_;
    } else if (outcome.reject != CreationReject::None) {
      rep.creation_rejects.push_back(det.class_label + ": " +
                                     creation_reject_name(outcome.reject));
    }
  }
}

void Engine::visibility_step(const std::vector<int>& skip_ids,
                             FrameReport& rep) {
  if (objects_.empty()) return;
  RaycastOptions opts;
  const RenderResult rendered =
      raycast(object_render_models(true), k_, opts, pool_.get());

  std::map<int, int> counts;
  for (const ObjectModel& obj : objects_) counts[obj.id] = 0;
  const int border = cfg_.visibility_border;
  for (int y = border; y < rendered.model_id.height() - border; ++y) {
    const int32_t* row = rendered.model_id.row(y);
    for (int x = border; x < rendered.model_id.width() - border; ++x) {
      auto it = counts.find(row[x]);
      if (it != counts.end()) ++it->second;
    }
  }

  for (auto it = objects_.begin(); it != objects_.end();) {
    it->visible = counts[it->id] >= cfg_.visibility_min_pixels;
    const bool skip = std::find(skip_ids.begin(), skip_ids.end(), it->id) !=
                      skip_ids.end();
    if (!it->visible && !skip) {
      rep.deleted_ids.push_back(it->id);
      it = objects_.erase(it);
    } else {
      ++it;
    }
  }
  visible_counts_ = std::move(counts);
}

FrameReport Engine::process_frame(const Frame& frame) {
  const auto t0 = std::chrono::steady_clock::now();
  FrameReport rep;
  rep.index = frame_index_;
  rep.timestamp = frame.timestamp;
  rep.detection_frame = frame.masks.has_value();

  if (frame.depth.width() != k_.width || frame.depth.height() != k_.height) {
    throw std::invalid_argument("frame size does not match intrinsics");
  }
  if (count_valid(frame.depth) == 0) {
    rep.skipped = true;
    rep.warning = "all depth invalid";
    rep.world_from_cam = world_from_cam_;
    ++frame_index_;
    return rep;
  }

  // radius 0 = smoothing disabled
  const Image<float> depth =
      cfg_.bilateral.radius < 1
          ? frame.depth
          : bilateral_filter(frame.depth, cfg_.bilateral.spatial_sigma,
                             cfg_.bilateral.range_sigma, cfg_.bilateral.radius,
                             pool_.get());

  auto finish = [&]() {
    rep.world_from_cam = world_from_cam_;
    for (const ObjectModel& obj : objects_) {
      ObjectFrameReport orep;
      orep.id = obj.id;
      orep.label = obj.class_label;
      orep.world_from_obj = world_from_cam_ * obj.vol_from_cam.inverse();
      orep.p_ex = obj.p_ex();
      auto vc = visible_counts_.find(obj.id);
      orep.visible_pixels = vc == visible_counts_.end() ? -1 : vc->second;
      auto tr = track_info_.find(obj.id);
      if (tr != track_info_.end()) {
        orep.tracked = std::get<0>(tr->second);
        orep.iterations = std::get<1>(tr->second);
        orep.energy = std::get<2>(tr->second);
      }
      rep.objects.push_back(std::move(orep));
    }
    ++frame_index_;
    rep.runtime_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
  };

  track_info_.clear();

  if (!initialized_) {
    rep.bootstrap = true;
    world_from_cam_ = Pose::identity();
    bg_->integrate_depth(depth, k_, world_from_cam_, nullptr, pool_.get());
    initialized_ = true;
    if (frame.masks) detection_step(frame, depth, rep);
    visibility_step(rep.created_ids, rep);
    finish();
    return rep;
  }

  // E-step with last frame's poses, then camera M-step against the background
  AssociationField assoc =
      compute_association(depth, k_, model_views(), cfg_.likelihood,
                          pool_.get());
  const Pose old_cam = world_from_cam_;
  try {
    TrackingResult res =
        track(*bg_, depth, k_, world_from_cam_,
              &assoc.plane(kBackgroundId), cfg_.tracking, pool_.get());
    world_from_cam_ = res.pose;
    rep.camera_tracked = true;
    rep.camera_iterations = res.iterations;
    rep.camera_energy = res.energy;
  } catch (const TrackingUnreliableError& e) {
    rep.warning = std::string("camera: ") + e.what();
  } catch (const DegenerateGeometryError& e) {
    rep.warning = std::string("camera: ") + e.what();
  }
  if (!rep.camera_tracked) {
    // carry the last pose; leave maps and objects untouched this frame
    finish();
    return rep;
  }

  // objects assumed static in world while the camera moved
  const Pose cam_motion = old_cam.inverse() * world_from_cam_;
  for (ObjectModel& obj : objects_) {
    obj.vol_from_cam = obj.vol_from_cam * cam_motion;
  }

  // E-step with the new camera pose, then per-object M-steps
  assoc = compute_association(depth, k_, model_views(), cfg_.likelihood,
                              pool_.get());
  for (ObjectModel& obj : objects_) {
    try {
      TrackingResult res =
          track(obj.volume, depth, k_, obj.vol_from_cam,
                &assoc.plane(obj.id), cfg_.tracking, pool_.get());
      obj.vol_from_cam = res.pose;
      track_info_[obj.id] = {true, res.iterations, res.energy};
    } catch (const TrackingUnreliableError& e) {
      track_info_[obj.id] = {false, 0, 0.0};
      rep.warning += (rep.warning.empty() ? "" : "; ") + std::string("object ") +
                     std::to_string(obj.id) + ": " + e.what();
    } catch (const DegenerateGeometryError& e) {
      track_info_[obj.id] = {false, 0, 0.0};
      rep.warning += (rep.warning.empty() ? "" : "; ") + std::string("object ") +
                     std::to_string(obj.id) + ": " + e.what();
    }
  }

  // final E-step so fusion weights see every updated pose
  assoc = compute_association(depth, k_, model_views(), cfg_.likelihood,
                              pool_.get());
  bg_->integrate_depth(depth, k_, world_from_cam_,
                       &assoc.plane(kBackgroundId), pool_.get());
  for (ObjectModel& obj : objects_) {
    obj.volume.integrate_depth(depth, k_, obj.vol_from_cam,
                               &assoc.plane(obj.id), pool_.get());
  }
  last_assoc_ = std::move(assoc);

  if (frame.masks) detection_step(frame, depth, rep);
  visibility_step(rep.created_ids, rep);
  finish();
  return rep;
}

SequenceResult run_sequence(
    const TumSequence& seq, const PipelineConfig& cfg,
    const std::function<void(const Engine&, const FrameReport&)>& on_frame) {
  SequenceResult out;
  if (seq.size() == 0) return out;
  Engine engine(cfg, seq.intrinsics());
  for (size_t i = 0; i < seq.size(); ++i) {
    const Frame frame = seq.frame(i);
    FrameReport rep = engine.process_frame(frame);
    if (!rep.skipped) {
      out.camera.append(rep.timestamp, rep.world_from_cam);
      const Pose cam_from_world = rep.world_from_cam.inverse();
      for (const ObjectFrameReport& orep : rep.objects) {
        out.objects[orep.id].append(rep.timestamp,
                                    cam_from_world * orep.world_from_obj);
        out.object_labels[orep.id] = orep.label;
      }
    }
    if (on_frame) on_frame(engine, rep);
    out.reports.push_back(std::move(rep));
  }
  return out;
}

}  // namespace mvf
