#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "mvf/association.hpp"
#include "mvf/config.hpp"
#include "mvf/image.hpp"
#include "mvf/io_tum.hpp"
#include "mvf/objects.hpp"
#include "mvf/parallel.hpp"
#include "mvf/raycast.hpp"
#include "mvf/trajectory.hpp"
#include "mvf/tsdf.hpp"

namespace mvf {

struct ObjectFrameReport {
  int id = 0;
  std::string label;
  Pose world_from_obj;
  double p_ex = 1.0;
  int visible_pixels = 0;
  bool tracked = false;
  int iterations = 0;
  double energy = 0.0;
};

struct FrameReport {
  int index = -1;
  double timestamp = 0.0;
  Pose world_from_cam;

  bool skipped = false;    // all depth invalid; state untouched, no pose emitted
  bool bootstrap = false;  // first frame: integrate at identity, no tracking
  bool camera_tracked = false;
  std::string warning;
  int camera_iterations = 0;
  double camera_energy = 0.0;

  bool detection_frame = false;
  std::vector<int> matched_ids;
  std::vector<int> created_ids;
  std::vector<int> deleted_ids;
  std::vector<std::string> creation_rejects;  // "label: reason"

  std::vector<ObjectFrameReport> objects;
  double runtime_ms = 0.0;
};

// Full per-frame loop: filter, three association passes, camera tracking
// against the background, per-object tracking, weighted fusion, then (on
// frames with masks) detection matching, creation, segmentation counts,
// existence bookkeeping, and visibility-based deletion.
class Engine {
 public:
  Engine(const PipelineConfig& cfg, const Intrinsics& k);

  FrameReport process_frame(const Frame& frame);

  const Pose& world_from_cam() const { return world_from_cam_; }
  const TsdfVolume& background() const { return *bg_; }
  TsdfVolume& background() { return *bg_; }
  const std::vector<ObjectModel>& objects() const { return objects_; }
  const PipelineConfig& config() const { return cfg_; }
  const Intrinsics& intrinsics() const { return k_; }

  // Step-6 association field of the most recent frame, for diagnostics dumps.
  const AssociationField& last_association() const { return last_assoc_; }
  // Shaded render of background + objects (hidden classes skipped).
  RenderResult render_scene(bool shaded = true) const;

 private:
  std::vector<ModelView> model_views() const;
  std::vector<RenderModel> object_render_models(bool include_hidden) const;
  void detection_step(const Frame& frame, const Image<float>& depth,
                      FrameReport& rep);
  void visibility_step(const std::vector<int>& skip_ids, FrameReport& rep);
  void bootstrap_object(ObjectModel& obj, const Image<uint8_t>& mask,
                        const Image<float>& depth,
                        const Image<int32_t>& rendered_ids);

  PipelineConfig cfg_;
  Intrinsics k_;
  std::unique_ptr<ThreadPool> pool_;
  std::optional<TsdfVolume> bg_;
  std::vector<ObjectModel> objects_;
  Pose world_from_cam_;
  AssociationField last_assoc_;
  std::map<int, int> visible_counts_;
  std::map<int, std::tuple<bool, int, double>> track_info_;
  int frame_index_ = 0;
  int next_object_id_ = 1;
  bool initialized_ = false;
};

struct SequenceResult {
  Trajectory camera;
  std::map<int, Trajectory> objects;  // object pose in the camera frame
  std::map<int, std::string> object_labels;
  std::vector<FrameReport> reports;
};

// Folds process_frame over the dataset. Object trajectories are kept after
// deletion. on_frame (optional) observes each report as it is produced.
SequenceResult run_sequence(
    const TumSequence& seq, const PipelineConfig& cfg,
    const std::function<void(const Engine&, const FrameReport&)>& on_frame = {});

}  // namespace mvf
