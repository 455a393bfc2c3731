#include "mvf/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "mvf/errors.hpp"

namespace mvf {
namespace {

std::string fmt_double(double v) {
  // shortest representation that round-trips
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  double back;
  for (int prec = 1; prec <= 16; ++prec) {
    char t[64];
    std::snprintf(t, sizeof(t), "%.*g", prec, v);
    std::sscanf(t, "%lf", &back);
    if (back == v) return t;
  }
  return buf;
}

std::string join_list(const std::vector<std::string>& items) {
  std::string out;
  for (size_t i = 0; i < items.size(); ++i) {
    if (i) out += ",";
    out += items[i];
  }
  return out;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(s);
  while (std::getline(ss, cur, ',')) {
    const size_t a = cur.find_first_not_of(" \t");
    if (a == std::string::npos) continue;
    const size_t b = cur.find_last_not_of(" \t");
    out.push_back(cur.substr(a, b - a + 1));
  }
  return out;
}

struct Binder {
  std::function<std::string()> get;
  std::function<void(const std::string&)> set;
};

std::map<std::string, Binder> bind_keys(PipelineConfig& c) {
  auto num = [](double& ref) {
    return Binder{[&ref] { return fmt_double(ref); },
                  [&ref](const std::string& v) {
                    size_t used = 0;
                    ref = std::stod(v, &used);
                    if (used != v.size()) throw std::invalid_argument(v);
                  }};
  };
  auto integer = [](int& ref) {
    return Binder{[&ref] { return std::to_string(ref); },
                  [&ref](const std::string& v) {
                    size_t used = 0;
                    ref = std::stoi(v, &used);
                    if (used != v.size()) throw std::invalid_argument(v);
                  }};
  };
  auto boolean = [](bool& ref) {
    return Binder{[&ref] { return std::string(ref ? "true" : "false"); },
                  [&ref](const std::string& v) {
                    if (v == "true" || v == "1") ref = true;
                    else if (v == "false" || v == "0") ref = false;
                    else throw std::invalid_argument(v);
                  }};
  };
  auto text = [](std::string& ref) {
    return Binder{[&ref] { return ref; },
                  [&ref](const std::string& v) { ref = v; }};
  };
  auto list = [](std::vector<std::string>& ref) {
    return Binder{[&ref] { return join_list(ref); },
                  [&ref](const std::string& v) { ref = split_list(v); }};
  };

  std::map<std::string, Binder> m;
  m["threads"] = integer(c.threads);
  m["deterministic"] = boolean(c.deterministic);
  m["kernel_backend"] = text(c.kernel_backend);
  m["detection_interval"] = integer(c.detection_interval);
  m["camera.fx"] = num(c.camera_fx);
  m["camera.fy"] = num(c.camera_fy);
  m["camera.cx"] = num(c.camera_cx);
  m["camera.cy"] = num(c.camera_cy);
  m["bilateral.spatial_sigma"] = num(c.bilateral.spatial_sigma);
  m["bilateral.range_sigma"] = num(c.bilateral.range_sigma);
  m["bilateral.radius"] = integer(c.bilateral.radius);
  m["background.resolution"] = integer(c.background.resolution);
  m["background.size"] = num(c.background.size);
  m["background.weight_cap"] = num(c.background.weight_cap);
  m["likelihood.sigma"] = num(c.likelihood.sigma);
  m["likelihood.alpha"] = num(c.likelihood.alpha);
  m["likelihood.uniform_density"] = num(c.likelihood.uniform_density);
  m["tracking.huber_delta"] = num(c.tracking.huber_delta);
  m["tracking.max_iterations"] = integer(c.tracking.max_iterations);
  m["tracking.lambda_init"] = num(c.tracking.lambda_init);
  m["tracking.lambda_factor"] = num(c.tracking.lambda_factor);
  m["tracking.convergence_norm"] = num(c.tracking.convergence_norm);
  m["tracking.min_valid_pixels"] = integer(c.tracking.min_valid_pixels);
  m["creation.min_mask_pixels"] = integer(c.creation.min_mask_pixels);
  m["creation.padding"] = num(c.creation.padding);
  m["creation.resolution"] = integer(c.creation.resolution);
  m["creation.max_distance"] = num(c.creation.max_distance);
  m["creation.max_volume_iou"] = num(c.creation.max_volume_iou);
  m["creation.weight_cap"] = num(c.creation.weight_cap);
  m["creation.exclude_classes"] = list(c.creation.exclude_classes);
  m["creation.hidden_classes"] = list(c.creation.hidden_classes);
  m["objects.match_iou"] = num(c.match_iou);
  m["objects.delete_below"] = num(c.delete_below);
  m["objects.visibility_min_pixels"] = integer(c.visibility_min_pixels);
  m["objects.visibility_border"] = integer(c.visibility_border);
  return m;
}

void validate(const PipelineConfig& c) {
  auto fail = [](const std::string& what) {
    throw std::invalid_argument("config: " + what);
  };
  if (c.threads < 1) fail("threads must be >= 1");
  if (c.kernel_backend != "auto" && c.kernel_backend != "scalar" &&
      c.kernel_backend != "avx2") {
    fail("kernel_backend must be auto|scalar|avx2");
  }
  if (c.detection_interval < 1) fail("detection_interval must be >= 1");
  if (c.bilateral.radius < 0) fail("bilateral.radius must be >= 0");
  if (c.bilateral.spatial_sigma <= 0) fail("bilateral.spatial_sigma must be > 0");
  if (c.bilateral.range_sigma <= 0) fail("bilateral.range_sigma must be > 0");
  if (c.background.resolution < 8) fail("background.resolution must be >= 8");
  if (c.background.size <= 0) fail("background.size must be > 0");
  if (c.background.weight_cap <= 0) fail("background.weight_cap must be > 0");
  if (c.likelihood.sigma <= 0) fail("likelihood.sigma must be > 0");
  if (c.likelihood.alpha < 0 || c.likelihood.alpha > 1) {
    fail("likelihood.alpha must be in [0,1]");
  }
  if (c.tracking.max_iterations < 1) fail("tracking.max_iterations must be >= 1");
  if (c.creation.resolution < 8) fail("creation.resolution must be >= 8");
  if (c.creation.padding <= 0) fail("creation.padding must be > 0");
  if (c.match_iou < 0 || c.match_iou > 1) fail("objects.match_iou must be in [0,1]");
  if (c.delete_below < 0 || c.delete_below > 1) {
    fail("objects.delete_below must be in [0,1]");
  }
  if (c.visibility_border < 0) fail("objects.visibility_border must be >= 0");
}

}  // namespace

std::string serialize_config(const PipelineConfig& cfg) {
  PipelineConfig copy = cfg;
  auto keys = bind_keys(copy);
  std::ostringstream os;
  os << "# pipeline configuration; camera.* = 0 means take the dataset "
        "calibration\n";
  std::string section;
  for (const auto& [key, binder] : keys) {
    const size_t dot = key.find('.');
    const std::string sec = dot == std::string::npos ? "" : key.substr(0, dot);
    if (sec != section) {
      os << "\n";
      section = sec;
    }
    os << key << " = " << binder.get() << "\n";
  }
  return os.str();
}

PipelineConfig parse_config(const std::string& text,
                            const std::string& origin) {
  PipelineConfig cfg;
  auto keys = bind_keys(cfg);
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const size_t eq = line.find('=');
    auto where = [&] { return origin + ":" + std::to_string(lineno); };
    if (eq == std::string::npos) {
      throw IoError(where() + ": expected 'key = value'");
    }
    auto trim = [](std::string s) {
      const size_t a = s.find_first_not_of(" \t\r");
      if (a == std::string::npos) return std::string();
      const size_t b = s.find_last_not_of(" \t\r");
      return s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto it = keys.find(key);
    if (it == keys.end()) {
      throw IoError(where() + ": unknown key '" + key + "'");
    }
    try {
      it->second.set(value);
    } catch (const std::exception&) {
      throw IoError(where() + ": bad value '" + value + "' for " + key);
    }
  }
  validate(cfg);
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw IoError("cannot open config file: " + file.string());
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_config(buf.str(), file.string());
}

}  // namespace mvf
