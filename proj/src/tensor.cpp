#include "catfuse/tensor.hpp"

#include <cmath>

namespace catfuse {

bool all_finite(const RasterTensor& t) {
  for (float v : t.data)
    if (!std::isfinite(v)) return false;
  return true;
}

void require_finite(const RasterTensor& t, const std::string& what) {
  for (size_t i = 0; i < t.data.size(); ++i) {
    if (!std::isfinite(t.data[i]))
      throw ValidationError(what + ": non-finite value at flat index " +
                            std::to_string(i));
  }
}

} // namespace catfuse
