#include "mvf/io_tum.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "mvf/errors.hpp"
#include "mvf/png_io.hpp"

namespace mvf {

std::vector<IndexEntry> read_index_file(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw IoError("cannot open index file: " + file.string());
  std::vector<IndexEntry> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    IndexEntry e;
    if (!(ss >> e.stamp >> e.path)) {
      throw IoError(file.string() + ":" + std::to_string(lineno) +
                    ": expected 'timestamp path'");
    }
    try {
      e.t = std::stod(e.stamp);
    } catch (const std::exception&) {
      throw IoError(file.string() + ":" + std::to_string(lineno) +
                    ": bad timestamp '" + e.stamp + "'");
    }
    out.push_back(std::move(e));
  }
  std::sort(out.begin(), out.end(),
            [](const IndexEntry& a, const IndexEntry& b) { return a.t < b.t; });
  return out;
}

TumSequence::TumSequence(const std::filesystem::path& dir) : dir_(dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw IoError("dataset directory not found: " + dir.string());
  }
  depth_ = read_index_file(dir / "depth.txt");
  if (std::filesystem::exists(dir / "rgb.txt")) {
    rgb_ = read_index_file(dir / "rgb.txt");
  }
  k_.fx = 525.0;
  k_.fy = 525.0;
  k_.cx = 319.5;
  k_.cy = 239.5;
  k_.depth_scale = kDepthScale;
  if (std::filesystem::exists(dir / "calibration.txt")) {
    std::ifstream cs(dir / "calibration.txt");
    double fx, fy, cx, cy;
    if (cs >> fx >> fy >> cx >> cy) {
      k_.fx = fx;
      k_.fy = fy;
      k_.cx = cx;
      k_.cy = cy;
    } else {
      throw IoError("calibration.txt: expected 'fx fy cx cy'");
    }
  }
  if (!depth_.empty()) {
    const Image<uint16_t> probe = read_png16(dir / depth_[0].path);
    k_.width = probe.width();
    k_.height = probe.height();
  }
  if (std::filesystem::exists(dir / "groundtruth.txt")) {
    groundtruth_ = read_trajectory(dir / "groundtruth.txt");
  }
}

Frame TumSequence::frame(size_t i) const {
  if (i >= depth_.size()) throw std::out_of_range("TumSequence::frame");
  const IndexEntry& e = depth_[i];
  Frame f;
  f.timestamp = e.t;
  const Image<uint16_t> raw = read_png16(dir_ / e.path);
  f.depth = Image<float>(raw.width(), raw.height());
  const double inv = 1.0 / k_.depth_scale;
  for (size_t p = 0; p < raw.size(); ++p) {
    f.depth.data()[p] = static_cast<float>(raw.data()[p] * inv);
  }

  if (!rgb_.empty()) {
    size_t best = rgb_.size();
    double best_dt = kAssociationWindow;
    for (size_t r = 0; r < rgb_.size(); ++r) {
      const double dt = std::abs(rgb_[r].t - e.t);
      if (dt <= best_dt) {
        best_dt = dt;
        best = r;
      }
    }
    if (best < rgb_.size()) {
      f.color = read_png_rgb(dir_ / rgb_[best].path);
    }
  }

  const std::filesystem::path mask_png = dir_ / "masks" / (e.stamp + ".png");
  const std::filesystem::path mask_json = dir_ / "masks" / (e.stamp + ".json");
  if (std::filesystem::exists(mask_png)) {
    f.masks = read_mask_set(mask_png, mask_json);
  }
  return f;
}

MaskSet read_mask_set(const std::filesystem::path& png_path,
                      const std::filesystem::path& json_path) {
  MaskSet out;
  out.instance_map = read_png16(png_path);
  std::ifstream js(json_path);
  if (!js) throw IoError("mask meta missing: " + json_path.string());
  nlohmann::json j;
  try {
    js >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(json_path.string() + ": " + e.what());
  }
  if (!j.contains("instances") || !j["instances"].is_array()) {
    throw IoError(json_path.string() + ": missing 'instances' array");
  }
  for (const auto& inst : j["instances"]) {
    MaskInstanceMeta m;
    m.id = static_cast<uint16_t>(inst.at("id").get<int>());
    m.label = inst.at("label").get<std::string>();
    m.score = inst.value("score", 1.0);
    out.meta.push_back(std::move(m));
  }
  // every nonzero id must appear in meta exactly once
  for (size_t p = 0; p < out.instance_map.size(); ++p) {
    const uint16_t id = out.instance_map.data()[p];
    if (id == 0) continue;
    int hits = 0;
    for (const auto& m : out.meta) hits += (m.id == id);
    if (hits != 1) {
      throw IoError(png_path.string() + ": instance id " + std::to_string(id) +
                    " appears " + std::to_string(hits) + " times in meta");
    }
  }
  return out;
}

void write_mask_set(const MaskSet& masks, const std::filesystem::path& png_path,
                    const std::filesystem::path& json_path) {
  write_png16(png_path, masks.instance_map);
  nlohmann::json j;
  j["instances"] = nlohmann::json::array();
  for (const auto& m : masks.meta) {
    j["instances"].push_back(
        {{"id", m.id}, {"label", m.label}, {"score", m.score}});
  }
  std::ofstream os(json_path);
  if (!os) throw IoError("cannot write mask meta: " + json_path.string());
  os << j.dump(2) << "\n";
}

}  // namespace mvf
