#include "catfuse/tensor_io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace catfuse::io {

namespace {

constexpr char kMagic[4] = {'C', 'A', 'T', 'T'};
constexpr uint8_t kVersion = 1;
constexpr uint8_t kDtypeF32 = 0x01;

void put_u32le(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v & 0xFF));
  out.push_back(static_cast<uint8_t>((v >> 8) & 0xFF));
  out.push_back(static_cast<uint8_t>((v >> 16) & 0xFF));
  out.push_back(static_cast<uint8_t>((v >> 24) & 0xFF));
}

uint32_t get_u32le(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) |
         (static_cast<uint32_t>(p[3]) << 24);
}

void put_f32le(std::vector<uint8_t>& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32le(out, bits);
}

float get_f32le(const uint8_t* p) {
  uint32_t bits = get_u32le(p);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

} // namespace

std::vector<uint8_t> container_to_bytes(const Container& c) {
  if (c.dims.empty() || c.dims.size() > kMaxNdim)
    throw ValidationError("container: ndim must be in [1, " +
                          std::to_string(kMaxNdim) + "]");
  size_t count = 1;
  for (uint32_t d : c.dims) {
    if (d == 0) throw ValidationError("container: zero dimension");
    count *= d;
  }
  if (count != c.data.size())
    throw ValidationError("container: payload length " +
                          std::to_string(c.data.size()) +
                          " does not match dims product " +
                          std::to_string(count));
  std::vector<uint8_t> out;
  out.reserve(7 + 4 * c.dims.size() + 4 * c.data.size());
  out.insert(out.end(), kMagic, kMagic + 4);
  out.push_back(kVersion);
  out.push_back(kDtypeF32);
  out.push_back(static_cast<uint8_t>(c.dims.size()));
  for (uint32_t d : c.dims) put_u32le(out, d);
  for (float v : c.data) put_f32le(out, v);
  return out;
}

Container container_from_bytes(const uint8_t* bytes, size_t len) {
  if (len < 7) throw ValidationError("container format error: header truncated");
  if (std::memcmp(bytes, kMagic, 4) != 0)
    throw ValidationError("container format error: magic");
  if (bytes[4] != kVersion)
    throw ValidationError("container format error: version " +
                          std::to_string(bytes[4]));
  if (bytes[5] != kDtypeF32)
    throw ValidationError("container format error: dtype " +
                          std::to_string(bytes[5]));
  const int ndim = bytes[6];
  if (ndim < 1 || ndim > kMaxNdim)
    throw ValidationError("container format error: ndim " +
                          std::to_string(ndim));
  size_t off = 7;
  if (len < off + 4 * static_cast<size_t>(ndim))
    throw ValidationError("container format error: dims truncated");
  Container c;
  size_t count = 1;
  for (int i = 0; i < ndim; ++i) {
    uint32_t d = get_u32le(bytes + off);
    off += 4;
    if (d == 0) throw ValidationError("container format error: zero dim");
    if (count > std::numeric_limits<size_t>::max() / d)
      throw ValidationError("container format error: dims overflow");
    count *= d;
    c.dims.push_back(d);
  }
  if (len != off + 4 * count)
    throw ValidationError("container format error: payload length (header "
                          "declares " +
                          std::to_string(count) + " values, file holds " +
                          std::to_string((len - off) / 4) + ")");
  c.data.resize(count);
  for (size_t i = 0; i < count; ++i) c.data[i] = get_f32le(bytes + off + 4 * i);
  return c;
}

void write_file_bytes(const std::string& path,
                      const std::vector<uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed: " + path);
}

std::vector<uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw IoError("cannot open: " + path);
  const std::streamsize n = f.tellg();
  f.seekg(0);
  std::vector<uint8_t> bytes(static_cast<size_t>(n));
  f.read(reinterpret_cast<char*>(bytes.data()), n);
  if (!f) throw IoError("read failed: " + path);
  return bytes;
}

void write_container(const std::string& path, const Container& c) {
  write_file_bytes(path, container_to_bytes(c));
}

Container read_container(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return container_from_bytes(bytes.data(), bytes.size());
  } catch (const ValidationError& e) {
    throw ValidationError(std::string(e.what()) + " [" + path + "]");
  }
}

void tensor_write(const RasterTensor& t, const std::string& path) {
  require_finite(t, "tensor_write(" + path + ")");
  Container c;
  c.dims = {static_cast<uint32_t>(t.channels), static_cast<uint32_t>(t.height),
            static_cast<uint32_t>(t.width)};
  c.data = t.data;
  write_container(path, c);
}

RasterTensor tensor_read(const std::string& path) {
  Container c = read_container(path);
  if (c.dims.size() != 3)
    throw ValidationError("container format error: expected 3-D raster, got " +
                          std::to_string(c.dims.size()) + "-D [" + path + "]");
  RasterTensor t(static_cast<int>(c.dims[0]), static_cast<int>(c.dims[1]),
                 static_cast<int>(c.dims[2]));
  t.data = std::move(c.data);
  require_finite(t, "tensor_read(" + path + ")");
  return t;
}

void export_preview(const RasterTensor& t, const std::array<int, 3>& bands,
                    const std::string& path) {
  for (int b : bands)
    if (b < 0 || b >= t.channels)
      throw ValidationError("export_preview: band index " + std::to_string(b) +
                            " out of range for " + std::to_string(t.channels) +
                            " channels");
  // Per-band min-max stretch; constant band maps to 0.
  std::array<float, 3> lo{}, hi{};
  for (int i = 0; i < 3; ++i) {
    const float* p = t.band(bands[i]);
    float mn = p[0], mx = p[0];
    for (size_t k = 1; k < t.plane(); ++k) {
      mn = std::min(mn, p[k]);
      mx = std::max(mx, p[k]);
    }
    lo[i] = mn;
    hi[i] = mx;
  }
  std::vector<uint8_t> out;
  const std::string header = "P6\n" + std::to_string(t.width) + " " +
                             std::to_string(t.height) + "\n255\n";
  out.insert(out.end(), header.begin(), header.end());
  out.reserve(out.size() + 3 * t.plane());
  for (size_t k = 0; k < t.plane(); ++k) {
    for (int i = 0; i < 3; ++i) {
      const float v = t.band(bands[i])[k];
      long byte = 0;
      if (hi[i] > lo[i]) {
        const double s = (static_cast<double>(v) - lo[i]) /
                         (static_cast<double>(hi[i]) - lo[i]) * 255.0;
        byte = std::lround(s); // rounds halves away from zero
        byte = std::min(255L, std::max(0L, byte));
      }
      out.push_back(static_cast<uint8_t>(byte));
    }
  }
  write_file_bytes(path, out);
}

} // namespace catfuse::io
