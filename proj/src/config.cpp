#include "catfuse/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "catfuse/tensor_io.hpp"

namespace catfuse {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size())
    throw ValidationError("config: " + what + " is not a number: '" + t + "'");
  return v;
}

long long parse_int(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  long long v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size())
    throw ValidationError("config: " + what + " is not an integer: '" + t +
                          "'");
  return v;
}

std::uint64_t parse_u64(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size())
    throw ValidationError("config: " + what +
                          " is not an unsigned integer: '" + t + "'");
  return v;
}

struct Entry {
  std::string section, key, value;
  int line = 0;
};

std::string list_str(const std::vector<double>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += format_double(v[i]);
  }
  return out;
}

} // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

std::vector<double> parse_double_list(const std::string& text,
                                      const std::string& what) {
  std::vector<double> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) out.push_back(parse_double(item, what));
  if (out.empty())
    throw ValidationError("config: " + what + " must contain a value");
  return out;
}

RunConfig parse_config_text(const std::string& text) {
  // Pass 1: scan lines into (section, key, value) entries, validating
  // section names. Report-only sections are skipped wholesale.
  static const std::vector<std::string> kSections = {"sensor", "backbone",
                                                     "adapt", "run"};
  static const std::vector<std::string> kSkipped = {"results", "timing",
                                                    "trace"};
  std::vector<Entry> entries;
  std::string section;
  bool skipping = false;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      skipping = false;
      for (const auto& s : kSkipped)
        if (section == s) skipping = true;
      if (!skipping) {
        bool known = false;
        for (const auto& s : kSections)
          if (section == s) known = true;
        if (!known)
          throw ValidationError("config: unknown section [" + section +
                                "] at line " + std::to_string(line_no));
      }
      continue;
    }
    if (skipping) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError("config: line " + std::to_string(line_no) +
                            " is not 'key = value': '" + line + "'");
    if (section.empty())
      throw ValidationError("config: key before any [section] at line " +
                            std::to_string(line_no));
    entries.push_back(Entry{section, trim(line.substr(0, eq)),
                            trim(line.substr(eq + 1)), line_no});
  }

  RunConfig cfg;

  // Pass 2a: sensor resolves bands/ratio first so list keys can be checked
  // against them regardless of key order.
  int bands = 4, ratio = 4;
  for (const auto& e : entries) {
    if (e.section != "sensor") continue;
    if (e.key == "bands") bands = int(parse_int(e.value, "sensor.bands"));
    if (e.key == "ratio") ratio = int(parse_int(e.value, "sensor.ratio"));
  }
  if (bands < 1)
    throw ValidationError("config: sensor.bands must be >= 1");
  if (ratio < 2)
    throw ValidationError("config: sensor.ratio must be >= 2");
  cfg.sensor = SensorDescriptor::defaults(bands, ratio);

  // Pass 2b: the adapt preset applies before individual eta overrides, so
  // the two cannot fight over file order.
  for (const auto& e : entries) {
    if (e.section == "adapt" && e.key == "preset") {
      cfg.preset = e.value;
      if (e.value == "real_world")
        cfg.adapt.eta = AdaptConfig::preset_real_world();
      else if (e.value == "simulated")
        cfg.adapt.eta = AdaptConfig::preset_simulated();
      else if (e.value != "custom")
        throw ValidationError(
            "config: adapt.preset must be real_world, simulated, or custom, "
            "got '" +
            e.value + "'");
    }
  }

  for (const auto& e : entries) {
    const std::string where = e.section + "." + e.key;
    if (e.section == "sensor") {
      if (e.key == "bands" || e.key == "ratio") continue;  // resolved above
      if (e.key == "name") cfg.sensor.name = e.value;
      else if (e.key == "mtf_gain") {
        auto v = parse_double_list(e.value, where);
        if (v.size() == 1) v.assign(size_t(bands), v[0]);
        if (int(v.size()) != bands)
          throw ValidationError(
              "config: sensor.mtf_gain needs 1 or bands values, got " +
              std::to_string(v.size()));
        cfg.sensor.mtf_gain = v;
      } else if (e.key == "pan_mtf_gain")
        cfg.sensor.pan_mtf_gain = parse_double(e.value, where);
      else if (e.key == "pan_weights") {
        auto v = parse_double_list(e.value, where);
        if (int(v.size()) != bands)
          throw ValidationError(
              "config: sensor.pan_weights needs bands values, got " +
              std::to_string(v.size()));
        cfg.sensor.pan_weights = v;
      } else if (e.key == "radiometric_gamma")
        cfg.sensor.radiometric_gamma = parse_double(e.value, where);
      else if (e.key == "kernel_size")
        cfg.sensor.kernel_size = int(parse_int(e.value, where));
      else
        throw ValidationError("config: unknown key '" + e.key +
                              "' in [sensor] at line " +
                              std::to_string(e.line));
    } else if (e.section == "backbone") {
      if (e.key == "latent") cfg.backbone.latent = int(parse_int(e.value, where));
      else if (e.key == "blocks") cfg.backbone.blocks = int(parse_int(e.value, where));
      else if (e.key == "kernel") cfg.backbone.kernel = int(parse_int(e.value, where));
      else
        throw ValidationError("config: unknown key '" + e.key +
                              "' in [backbone] at line " +
                              std::to_string(e.line));
    } else if (e.section == "adapt") {
      if (e.key == "preset") continue;  // resolved above
      if (e.key == "n_patches") cfg.adapt.n_patches = int(parse_int(e.value, where));
      else if (e.key == "patch_size") cfg.adapt.patch_size = int(parse_int(e.value, where));
      else if (e.key == "epochs") cfg.adapt.epochs = int(parse_int(e.value, where));
      else if (e.key == "lr") cfg.adapt.lr = parse_double(e.value, where);
      else if (e.key == "weight_decay") cfg.adapt.weight_decay = parse_double(e.value, where);
      else if (e.key == "seed") cfg.adapt.seed = parse_u64(e.value, where);
      else if (e.key == "eps_div") cfg.adapt.eps_div = parse_double(e.value, where);
      else if (e.key == "eta_spe") cfg.adapt.eta[0] = parse_double(e.value, where);
      else if (e.key == "eta_spa") cfg.adapt.eta[1] = parse_double(e.value, where);
      else if (e.key == "eta_ori") cfg.adapt.eta[2] = parse_double(e.value, where);
      else
        throw ValidationError("config: unknown key '" + e.key +
                              "' in [adapt] at line " +
                              std::to_string(e.line));
    } else {  // run
      if (e.key == "seed") cfg.seed = parse_u64(e.value, where);
      else if (e.key == "workers") cfg.workers = int(parse_int(e.value, where));
      else if (e.key == "size") cfg.size = int(parse_int(e.value, where));
      else if (e.key == "data_dir") cfg.data_dir = e.value;
      else if (e.key == "weights") cfg.weights = e.value;
      else if (e.key == "out") cfg.out = e.value;
      else if (e.key == "pretrain_epochs") cfg.pretrain_epochs = int(parse_int(e.value, where));
      else if (e.key == "pretrain_lr") cfg.pretrain_lr = parse_double(e.value, where);
      else if (e.key == "pretrain_weight_decay") cfg.pretrain_weight_decay = parse_double(e.value, where);
      else
        throw ValidationError("config: unknown key '" + e.key +
                              "' in [run] at line " + std::to_string(e.line));
    }
  }

  cfg.backbone.bands = cfg.sensor.bands();
  cfg.backbone.ratio = cfg.sensor.ratio;
  cfg.sensor.validate();
  cfg.backbone.validate();
  cfg.adapt.validate(cfg.sensor.ratio);
  if (cfg.workers < 1)
    throw ValidationError("config: run.workers must be >= 1");
  if (cfg.size < 1)
    throw ValidationError("config: run.size must be >= 1");
  if (cfg.pretrain_epochs < 0)
    throw ValidationError("config: run.pretrain_epochs must be >= 0");
  if (!(cfg.pretrain_lr > 0.0))
    throw ValidationError("config: run.pretrain_lr must be > 0");
  if (cfg.pretrain_weight_decay < 0.0)
    throw ValidationError("config: run.pretrain_weight_decay must be >= 0");
  return cfg;
}

RunConfig load_config(const std::string& path) {
  if (path.empty()) return RunConfig{};
  const auto bytes = io::read_file_bytes(path);
  return parse_config_text(
      std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

std::string render_config(const RunConfig& cfg) {
  std::ostringstream out;
  out << "[sensor]\n";
  out << "name = " << cfg.sensor.name << "\n";
  out << "ratio = " << cfg.sensor.ratio << "\n";
  out << "bands = " << cfg.sensor.bands() << "\n";
  out << "mtf_gain = " << list_str(cfg.sensor.mtf_gain) << "\n";
  out << "pan_mtf_gain = " << format_double(cfg.sensor.pan_mtf_gain) << "\n";
  out << "pan_weights = " << list_str(cfg.sensor.pan_weights) << "\n";
  out << "radiometric_gamma = " << format_double(cfg.sensor.radiometric_gamma)
      << "\n";
  out << "kernel_size = " << cfg.sensor.kernel_size << "\n";
  out << "\n[backbone]\n";
  out << "latent = " << cfg.backbone.latent << "\n";
  out << "blocks = " << cfg.backbone.blocks << "\n";
  out << "kernel = " << cfg.backbone.kernel << "\n";
  out << "\n[adapt]\n";
  out << "preset = " << cfg.preset << "\n";
  out << "n_patches = " << cfg.adapt.n_patches << "\n";
  out << "patch_size = " << cfg.adapt.patch_size << "\n";
  out << "epochs = " << cfg.adapt.epochs << "\n";
  out << "lr = " << format_double(cfg.adapt.lr) << "\n";
  out << "weight_decay = " << format_double(cfg.adapt.weight_decay) << "\n";
  out << "seed = " << cfg.adapt.seed << "\n";
  out << "eps_div = " << format_double(cfg.adapt.eps_div) << "\n";
  out << "eta_spe = " << format_double(cfg.adapt.eta[0]) << "\n";
  out << "eta_spa = " << format_double(cfg.adapt.eta[1]) << "\n";
  out << "eta_ori = " << format_double(cfg.adapt.eta[2]) << "\n";
  out << "\n[run]\n";
  out << "seed = " << cfg.seed << "\n";
  out << "workers = " << cfg.workers << "\n";
  out << "size = " << cfg.size << "\n";
  out << "data_dir = " << cfg.data_dir << "\n";
  out << "weights = " << cfg.weights << "\n";
  out << "out = " << cfg.out << "\n";
  out << "pretrain_epochs = " << cfg.pretrain_epochs << "\n";
  out << "pretrain_lr = " << format_double(cfg.pretrain_lr) << "\n";
  out << "pretrain_weight_decay = "
      << format_double(cfg.pretrain_weight_decay) << "\n";
  return out.str();
}

} // namespace catfuse
