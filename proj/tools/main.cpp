#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <string>
#include <vector>

#include "mvf/config.hpp"
#include "mvf/errors.hpp"
#include "mvf/io_tum.hpp"
#include "mvf/kernels.hpp"
#include "mvf/pipeline.hpp"
#include "mvf/png_io.hpp"
#include "mvf/synth.hpp"
#include "mvf/trajectory.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

struct TimingStats {
  int count = 0;
  double mean = 0, p50 = 0, p90 = 0, max = 0;
};

TimingStats timing_stats(std::vector<double> ms) {
  TimingStats s;
  s.count = static_cast<int>(ms.size());
  if (ms.empty()) return s;
  std::sort(ms.begin(), ms.end());
  double sum = 0;
  for (double v : ms) sum += v;
  s.mean = sum / ms.size();
  auto rank = [&](double q) {
    const size_t i = std::min(ms.size() - 1,
                              static_cast<size_t>(q * (ms.size() - 1) + 0.5));
    return ms[i];
  };
  s.p50 = rank(0.5);
  s.p90 = rank(0.9);
  s.max = ms.back();
  return s;
}

nlohmann::json timing_json(const TimingStats& s) {
  return {{"count", s.count}, {"mean_ms", s.mean}, {"p50_ms", s.p50},
          {"p90_ms", s.p90},  {"max_ms", s.max}};
}

void write_manifest(const std::filesystem::path& path,
                    const nlohmann::json& j) {
  std::ofstream os(path);
  if (!os) throw mvf::IoError("cannot write " + path.string());
  os << j.dump(2) << "\n";
}

void dump_association(const mvf::Engine& engine, const mvf::FrameReport& rep,
                      const std::filesystem::path& dir) {
  const mvf::AssociationField& f = engine.last_association();
  if (f.width == 0) return;
  char stem[64];
  for (size_t s = 0; s < f.model_ids.size(); ++s) {
    std::snprintf(stem, sizeof(stem), "frame_%05d_model_%d.png", rep.index,
                  f.model_ids[s]);
    mvf::Image<uint16_t> img(f.width, f.height);
    for (size_t i = 0; i < img.size(); ++i) {
      const float q = f.q[s].data()[i];
      img.data()[i] = static_cast<uint16_t>(
          std::lround(std::clamp(q, 0.0f, 1.0f) * 65535.0f));
    }
    mvf::write_png16(dir / stem, img);
  }
}

void dump_render(const mvf::Engine& engine, const mvf::FrameReport& rep,
                 const std::filesystem::path& dir) {
  const mvf::RenderResult render = engine.render_scene(true);
  char name[64];
  std::snprintf(name, sizeof(name), "frame_%05d.png", rep.index);
  mvf::write_png_rgb(dir / name, render.shaded);
}

int cmd_run(const std::string& dataset_dir, const std::string& config_file,
            const std::string& out_dir, int threads_flag, bool deterministic,
            bool dump_assoc, bool dump_rend) {
  namespace fs = std::filesystem;
  mvf::PipelineConfig cfg;
  if (!config_file.empty()) cfg = mvf::load_config(config_file);
  if (threads_flag > 0) cfg.threads = threads_flag;
  if (deterministic) cfg.deterministic = true;
  mvf::kernels::set_backend(
      mvf::kernels::backend_from_name(cfg.kernel_backend.c_str()));

  mvf::TumSequence seq(dataset_dir);
  fs::create_directories(out_dir);
  if (dump_assoc) fs::create_directories(fs::path(out_dir) / "association");
  if (dump_rend) fs::create_directories(fs::path(out_dir) / "render");

  const fs::path manifest_path = fs::path(out_dir) / "manifest.json";
  nlohmann::json manifest;
  manifest["tool"] = "mvfusion";
  manifest["version"] = kVersion;
  manifest["dataset"] = dataset_dir;
  manifest["output"] = out_dir;
  manifest["kernel_backend"] = mvf::kernels::active().name;
  manifest["config"] = mvf::serialize_config(cfg);
  manifest["status"] = "running";
  write_manifest(manifest_path, manifest);

  std::ofstream log(fs::path(out_dir) / "objects_log.txt");
  log << "# frame timestamp object_id label p_ex visible_pixels tx ty tz qx qy "
         "qz qw\n";

  auto on_frame = [&](const mvf::Engine& engine, const mvf::FrameReport& rep) {
    if (!rep.warning.empty()) {
      std::cerr << "frame " << rep.index << ": " << rep.warning << "\n";
    }
    for (const mvf::ObjectFrameReport& o : rep.objects) {
      const Eigen::Quaterniond q = o.world_from_obj.quaternion();
      const mvf::Vec3& t = o.world_from_obj.translation();
      char line[256];
      std::snprintf(line, sizeof(line),
                    "%d %.6f %d %s %.4f %d %.6f %.6f %.6f %.6f %.6f %.6f %.6f\n",
                    rep.index, rep.timestamp, o.id, o.label.c_str(), o.p_ex,
                    o.visible_pixels, t.x(), t.y(), t.z(), q.x(), q.y(), q.z(),
                    q.w());
      log << line;
    }
    if (dump_assoc) {
      dump_association(engine, rep, fs::path(out_dir) / "association");
    }
    if (dump_rend) dump_render(engine, rep, fs::path(out_dir) / "render");
  };

  const mvf::SequenceResult result = mvf::run_sequence(seq, cfg, on_frame);
  log.close();

  std::vector<double> det_ms, trk_ms;
  int warnings = 0;
  for (const mvf::FrameReport& rep : result.reports) {
    if (rep.skipped) continue;
    (rep.detection_frame ? det_ms : trk_ms).push_back(rep.runtime_ms);
    if (!rep.warning.empty()) ++warnings;
  }
  manifest["status"] = "ok";
  manifest["frames"] = result.reports.size();
  manifest["warnings"] = warnings;
  manifest["runtime"] = {
      {"detection_frames", timing_json(timing_stats(det_ms))},
      {"tracking_frames", timing_json(timing_stats(trk_ms))}};
  std::vector<int> live_ids;
  if (!result.reports.empty()) {
    for (const mvf::ObjectFrameReport& o : result.reports.back().objects) {
      live_ids.push_back(o.id);
    }
  }
  nlohmann::json objs = nlohmann::json::array();
  for (const auto& [id, traj] : result.objects) {
    const bool live =
        std::find(live_ids.begin(), live_ids.end(), id) != live_ids.end();
    objs.push_back({{"id", id},
                    {"label", result.object_labels.at(id)},
                    {"poses", traj.size()},
                    {"live", live}});
  }
  manifest["objects"] = objs;
  write_manifest(manifest_path, manifest);

  mvf::write_trajectory(result.camera, fs::path(out_dir) / "trajectory.txt",
                        "camera trajectory (world_from_cam)");
  for (const auto& [id, traj] : result.objects) {
    mvf::write_trajectory(
        traj, fs::path(out_dir) / ("object_" + std::to_string(id) + ".txt"),
        "object pose in camera frame");
  }
  std::cout << "frames: " << result.reports.size()
            << "  objects: " << result.objects.size() << "\n";
  return 0;
}

int cmd_eval(const std::string& est_file, const std::string& gt_file,
             double delta) {
  const mvf::Trajectory est = mvf::read_trajectory(est_file);
  const mvf::Trajectory gt = mvf::read_trajectory(gt_file);
  const double ate_cm = mvf::ate_rmse(est, gt) * 100.0;
  std::printf("ATE-RMSE (cm): %.2f\n", ate_cm);
  try {
    const double rpe_cm = mvf::rpe_rmse(est, gt, delta) * 100.0;
    std::printf("RPE-RMSE (cm/s): %.2f\n", rpe_cm);
  } catch (const mvf::TooFewPairsError& e) {
    std::fprintf(stderr, "RPE skipped: %s\n", e.what());
  }
  return 0;
}

int cmd_synth(const std::string& scene_file, const std::string& out_dir,
              int threads) {
  const mvf::SceneScript script = mvf::load_scene(scene_file);
  std::unique_ptr<mvf::ThreadPool> pool;
  if (threads > 1) pool = std::make_unique<mvf::ThreadPool>(threads);
  mvf::materialize_scene(script, out_dir, pool.get());
  std::cout << "wrote " << script.frame_count << " frames to " << out_dir
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dense RGB-D SLAM with per-object TSDF volumes"};
  app.require_subcommand(0, 1);
  bool print_default = false;
  app.add_flag("--print-default-config", print_default,
               "Print the default configuration and exit");

  auto* run = app.add_subcommand("run", "Track and map a dataset");
  std::string dataset, config_file, out_dir = "out";
  int threads = 0;
  bool deterministic = false, dump_assoc = false, dump_rend = false;
  run->add_option("dataset", dataset, "Dataset directory")->required();
  run->add_option("--config", config_file, "Configuration file");
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--threads", threads, "Worker thread count (0 = config)");
  run->add_flag("--deterministic", deterministic,
                "Force reproducible reductions");
  run->add_flag("--dump-association", dump_assoc,
                "Write per-model association weight images");
  run->add_flag("--dump-render", dump_rend, "Write shaded scene renders");

  auto* eval = app.add_subcommand("eval", "Evaluate a trajectory against gt");
  std::string est_file, gt_file;
  double delta = 1.0;
  eval->add_option("estimate", est_file, "Estimated trajectory")->required();
  eval->add_option("groundtruth", gt_file, "Ground-truth trajectory")
      ->required();
  eval->add_option("--delta", delta, "RPE interval in seconds");

  auto* synth = app.add_subcommand("synth", "Materialize a synthetic scene");
  std::string scene_file, synth_out = "synth_out";
  int synth_threads = 0;
  synth->add_option("scene", scene_file, "Scene description file")->required();
  synth->add_option("--out", synth_out, "Output dataset directory");
  synth->add_option("--threads", synth_threads, "Worker thread count");

  CLI11_PARSE(app, argc, argv);

  try {
    if (print_default) {
      std::cout << mvf::serialize_config(mvf::PipelineConfig{});
      return 0;
    }
    if (run->parsed()) {
      return cmd_run(dataset, config_file, out_dir, threads, deterministic,
                     dump_assoc, dump_rend);
    }
    if (eval->parsed()) return cmd_eval(est_file, gt_file, delta);
    if (synth->parsed()) return cmd_synth(scene_file, synth_out, synth_threads);
    std::cerr << app.help();
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
