#include "catfuse/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "catfuse/tensor_io.hpp"

namespace catfuse::diff {

namespace {

void put_u16le(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v & 0xFF));
  out.push_back(static_cast<uint8_t>((v >> 8) & 0xFF));
}

void put_u32le(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i)
    out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xFF));
}

uint16_t get_u16le(const uint8_t* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

uint32_t get_u32le(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) |
         (static_cast<uint32_t>(p[3]) << 24);
}

/// Total byte length of the container starting at p (header + payload).
size_t container_span(const uint8_t* p, size_t remaining) {
  if (remaining < 7)
    throw ValidationError("weight file: container header truncated");
  const int ndim = p[6];
  if (ndim < 1 || ndim > io::kMaxNdim)
    throw ValidationError("weight file: bad container ndim " +
                          std::to_string(ndim));
  if (remaining < 7 + 4 * static_cast<size_t>(ndim))
    throw ValidationError("weight file: container dims truncated");
  size_t count = 1;
  for (int i = 0; i < ndim; ++i) count *= get_u32le(p + 7 + 4 * i);
  const size_t span = 7 + 4 * static_cast<size_t>(ndim) + 4 * count;
  if (remaining < span)
    throw ValidationError("weight file: container payload truncated");
  return span;
}

} // namespace

void save_params(const ParamStore& store, const std::string& path) {
  std::vector<const Param*> params = store.all();
  std::sort(params.begin(), params.end(),
            [](const Param* a, const Param* b) { return a->name < b->name; });
  std::vector<uint8_t> out;
  put_u32le(out, static_cast<uint32_t>(params.size()));
  for (const Param* p : params) {
    if (p->name.empty() || p->name.size() > 0xFFFF)
      throw ValidationError("parameter name length out of range: " + p->name);
    for (float v : p->value)
      if (!std::isfinite(v))
        throw ValidationError("non-finite value in parameter " + p->name);
    put_u16le(out, static_cast<uint16_t>(p->name.size()));
    out.insert(out.end(), p->name.begin(), p->name.end());
    io::Container c;
    for (int d : p->shape) c.dims.push_back(static_cast<uint32_t>(d));
    c.data = p->value;
    const auto body = io::container_to_bytes(c);
    out.insert(out.end(), body.begin(), body.end());
  }
  io::write_file_bytes(path, out);
}

void load_params(ParamStore& store, const std::string& path) {
  const auto bytes = io::read_file_bytes(path);
  if (bytes.size() < 4) throw ValidationError("weight file: truncated count");
  const uint32_t count = get_u32le(bytes.data());
  size_t off = 4;
  std::vector<std::pair<std::string, io::Container>> loaded;
  for (uint32_t i = 0; i < count; ++i) {
    if (bytes.size() < off + 2)
      throw ValidationError("weight file: truncated name length");
    const uint16_t nlen = get_u16le(bytes.data() + off);
    off += 2;
    if (bytes.size() < off + nlen)
      throw ValidationError("weight file: truncated name");
    std::string name(reinterpret_cast<const char*>(bytes.data() + off), nlen);
    off += nlen;
    const size_t span = container_span(bytes.data() + off, bytes.size() - off);
    io::Container c = io::container_from_bytes(bytes.data() + off, span);
    off += span;
    loaded.emplace_back(std::move(name), std::move(c));
  }
  if (off != bytes.size())
    throw ValidationError("weight file: trailing bytes after last tensor");

  for (auto& [name, c] : loaded) {
    Param* p = store.find(name);
    if (!p)
      throw ValidationError("weight file: unexpected tensor \"" + name +
                            "\" for this model configuration");
    std::vector<int> shape;
    for (uint32_t d : c.dims) shape.push_back(static_cast<int>(d));
    if (shape != p->shape) {
      std::string want, got;
      for (int d : p->shape) want += (want.empty() ? "" : "x") + std::to_string(d);
      for (int d : shape) got += (got.empty() ? "" : "x") + std::to_string(d);
      throw ValidationError("weight file: tensor \"" + name + "\" has shape " +
                            got + ", model expects " + want);
    }
    for (float v : c.data)
      if (!std::isfinite(v))
        throw ValidationError("weight file: non-finite value in tensor \"" +
                              name + "\"");
    p->value = std::move(c.data);
  }
  for (const Param* p : store.all()) {
    bool found = false;
    for (auto& [name, c] : loaded)
      if (name == p->name) {
        found = true;
        break;
      }
    if (!found)
      throw ValidationError("weight file: missing tensor \"" + p->name + "\"");
  }
}

} // namespace catfuse::diff
