#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mvf {

template <typename T>
class Image {
 public:
  Image() = default;
  Image(int width, int height, T fill = T{})
      : width_(width), height_(height), data_(static_cast<size_t>(width) * height, fill) {
    if (width < 0 || height < 0) throw std::invalid_argument("negative image size");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }
  size_t size() const { return data_.size(); }

  T& at(int x, int y) { return data_[static_cast<size_t>(y) * width_ + x]; }
  const T& at(int x, int y) const { return data_[static_cast<size_t>(y) * width_ + x]; }

  T* row(int y) { return data_.data() + static_cast<size_t>(y) * width_; }
  const T* row(int y) const { return data_.data() + static_cast<size_t>(y) * width_; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  bool in_bounds(int x, int y) const {
    return x >= 0 && x < width_ && y >= 0 && y < height_;
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_size(int w, int h) const { return width_ == w && height_ == h; }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

struct Rgb8 {
  uint8_t r = 0, g = 0, b = 0;
};

struct MaskInstanceMeta {
  uint16_t id = 0;
  std::string label;
  double score = 1.0;
};

struct MaskSet {
  Image<uint16_t> instance_map;
  std::vector<MaskInstanceMeta> meta;
};

struct Frame {
  double timestamp = 0.0;
  Image<float> depth;
  std::optional<Image<Rgb8>> color;
  std::optional<MaskSet> masks;
};

}  // namespace mvf
