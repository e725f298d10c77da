#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "catfuse/tensor.hpp"

namespace catfuse::io {

/// Binary tensor container:
///   magic "CATT" | version u8 = 1 | dtype u8 = 0x01 (f32 LE) | ndim u8 |
///   ndim x u32 LE dims | payload (row-major f32 LE).
/// Reading then writing any valid container reproduces the bytes exactly.
struct Container {
  std::vector<uint32_t> dims;
  std::vector<float> data;
};

constexpr int kMaxNdim = 8;

/// Serialize/deserialize the container to an in-memory byte buffer.
std::vector<uint8_t> container_to_bytes(const Container& c);
Container container_from_bytes(const uint8_t* bytes, size_t len);

void write_container(const std::string& path, const Container& c);
Container read_container(const std::string& path);

/// Writes a RasterTensor as a 3-D container. Rejects non-finite values
/// before touching the filesystem.
void tensor_write(const RasterTensor& t, const std::string& path);

/// Reads a 3-D container into a RasterTensor. Containers of any other rank
/// are a format error.
RasterTensor tensor_read(const std::string& path);

/// Binary PPM (P6, maxval 255) preview of three bands. Each selected band
/// is min-max stretched to [0, 255] independently, rounding half away from
/// zero; a constant band (min == max) maps to 0.
void export_preview(const RasterTensor& t, const std::array<int, 3>& bands,
                    const std::string& path);

void write_file_bytes(const std::string& path, const std::vector<uint8_t>& b);
std::vector<uint8_t> read_file_bytes(const std::string& path);

} // namespace catfuse::io
