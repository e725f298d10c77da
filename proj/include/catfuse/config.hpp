#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "catfuse/backbone.hpp"
#include "catfuse/cat.hpp"
#include "catfuse/resample.hpp"

namespace catfuse {

/// Fully resolved run configuration. Parsed from flat `key = value` text
/// with `[sensor]`, `[backbone]`, `[adapt]`, and `[run]` sections; `#`
/// starts a full-line comment. Unknown sections or keys are hard errors,
/// except the report sections `[results]`, `[timing]`, and `[trace]`,
/// which are skipped so a report file can be reused as a config file.
struct RunConfig {
  SensorDescriptor sensor = SensorDescriptor::defaults(4, 4);
  BackboneConfig backbone;  // bands/ratio mirror the sensor after parsing
  AdaptConfig adapt;
  std::string preset = "real_world";  // real_world | simulated | custom

  // [run]
  std::uint64_t seed = 0;
  int workers = 1;
  int size = 256;  // synthetic scene side (PAN scale) for sweep/bench
  std::string data_dir = "data";
  std::string weights;  // backbone weights path ("" = unset)
  std::string out;      // default output path ("" = unset)
  int pretrain_epochs = 200;
  double pretrain_lr = 5e-4;
  double pretrain_weight_decay = 0.0;
};

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

/// Comma-separated doubles; whitespace around items is ignored.
std::vector<double> parse_double_list(const std::string& text,
                                      const std::string& what);

RunConfig parse_config_text(const std::string& text);

/// Reads and parses a config file; the empty path yields the defaults.
RunConfig load_config(const std::string& path);

/// Emits every key of every section with its resolved value; parsing the
/// result reproduces `cfg` exactly.
std::string render_config(const RunConfig& cfg);

} // namespace catfuse
