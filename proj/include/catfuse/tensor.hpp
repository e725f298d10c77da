#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace catfuse {

/// Validation failures (bad arguments, malformed files, shape mismatches).
/// The CLI maps these to exit code 1.
class ValidationError : public std::runtime_error {
public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Filesystem failures (missing files, short reads, write errors).
/// The CLI maps these to exit code 2.
class IoError : public std::runtime_error {
public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

/// C x H x W single-precision raster, row-major in (channel, row, column)
/// order. Values are nominally in [0, 1] after normalization but are not
/// clamped. Immutable-by-convention once handed to another component;
/// sharing across workers is safe as long as nobody writes.
struct RasterTensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;

  RasterTensor() = default;
  RasterTensor(int c, int h, int w, float fill = 0.0f)
      : channels(c), height(h), width(w),
        data(static_cast<size_t>(c) * h * w, fill) {
    if (c <= 0 || h <= 0 || w <= 0)
      throw ValidationError("RasterTensor: non-positive dimension");
  }

  size_t size() const { return data.size(); }
  size_t plane() const { return static_cast<size_t>(height) * width; }

  float* band(int c) { return data.data() + static_cast<size_t>(c) * plane(); }
  const float* band(int c) const {
    return data.data() + static_cast<size_t>(c) * plane();
  }

  float& at(int c, int y, int x) {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
  float at(int c, int y, int x) const {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }

  bool same_shape(const RasterTensor& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
  std::string shape_str() const {
    return std::to_string(channels) + "x" + std::to_string(height) + "x" +
           std::to_string(width);
  }
};

/// Throws ValidationError if any value is NaN or Inf. `what` names the
/// tensor in the message.
void require_finite(const RasterTensor& t, const std::string& what);

/// True if every value is finite.
bool all_finite(const RasterTensor& t);

} // namespace catfuse
