#include "catfuse/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <new>
#include <sstream>

#include "catfuse/pipeline.hpp"
#include "catfuse/report.hpp"
#include "catfuse/tensor_io.hpp"

namespace fs = std::filesystem;

namespace catfuse {

namespace {

std::string scene_stem(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%04d", index);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  io::write_file_bytes(path, std::vector<uint8_t>(text.begin(), text.end()));
}

std::string read_text(const std::string& path) {
  const auto bytes = io::read_file_bytes(path);
  return std::string(reinterpret_cast<const char*>(bytes.data()),
                     bytes.size());
}

struct ManifestScene {
  std::uint64_t seed = 0;
  std::string gt, lrms, pan;
};

std::vector<ManifestScene> parse_manifest(const std::string& text,
                                          const std::string& path) {
  std::vector<ManifestScene> scenes;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("scene ", 0) != 0) continue;
    std::istringstream ls(line);
    std::string w_scene, w_seed, w_files;
    int index = 0;
    ManifestScene s;
    ls >> w_scene >> index >> w_seed >> s.seed >> w_files >> s.gt >> s.lrms >>
        s.pan;
    if (!ls || w_seed != "seed" || w_files != "files")
      throw ValidationError("manifest: malformed scene line in " + path +
                            ": '" + line + "'");
    scenes.push_back(std::move(s));
  }
  return scenes;
}

/// Largest top-left sub-images whose PAN sides are patch multiples.
std::pair<RasterTensor, RasterTensor> crop_to_patch_multiple(
    const RasterTensor& y, const RasterTensor& p, int patch, int r) {
  const int ph = p.height - p.height % patch;
  const int pw = p.width - p.width % patch;
  if (ph < patch || pw < patch)
    throw ValidationError(
        "adapt: input smaller than one patch even after cropping (PAN " +
        p.shape_str() + ", patch " + std::to_string(patch) + ")");
  if (ph == p.height && pw == p.width) return {y, p};
  RasterTensor pc(1, ph, pw);
  for (int yy = 0; yy < ph; ++yy)
    std::copy_n(p.data.data() + size_t(yy) * p.width, pw,
                pc.data.data() + size_t(yy) * pw);
  const int yh = ph / r, yw = pw / r;
  RasterTensor yc(y.channels, yh, yw);
  for (int b = 0; b < y.channels; ++b)
    for (int yy = 0; yy < yh; ++yy)
      std::copy_n(y.band(b) + size_t(yy) * y.width, yw,
                  yc.data.data() + (size_t(b) * yh + yy) * yw);
  return {std::move(yc), std::move(pc)};
}

std::array<int, 3> preview_bands(int channels) {
  auto clampc = [&](int b) { return std::min(b, channels - 1); };
  return {clampc(2), clampc(1), 0};
}

std::string csv_num(double v) {
  std::ostringstream s;
  s.precision(6);
  s << std::fixed << v;
  return s.str();
}

} // namespace

void cmd_synth(const SynthArgs& args) {
  RunConfig cfg = load_config(args.config_path);
  const int size = args.size > 0 ? args.size : cfg.size;
  if (args.count < 1)
    throw ValidationError("synth: count must be >= 1, got " +
                          std::to_string(args.count));
  if (args.out_dir.empty())
    throw ValidationError("synth: an output directory is required");

  const fs::path dir(args.out_dir);
  std::error_code ec;
  if (fs::exists(dir, ec) && !fs::is_empty(dir, ec) && !args.force)
    throw ValidationError("synth: output directory '" + args.out_dir +
                          "' is not empty; pass --force to overwrite");
  fs::create_directories(dir, ec);
  if (ec)
    throw IoError("synth: cannot create directory '" + args.out_dir +
                  "': " + ec.message());

  std::ostringstream manifest;
  manifest << "# synthetic scene manifest\n";
  manifest << "count = " << args.count << "\n";
  manifest << "size = " << size << "\n";
  manifest << "ratio = " << cfg.sensor.ratio << "\n";
  manifest << "bands = " << cfg.sensor.bands() << "\n";
  for (int i = 0; i < args.count; ++i) {
    const std::uint64_t seed = args.seed + std::uint64_t(i);
    const SceneBundle scene = synth_scene(seed, cfg.sensor, size, size);
    const std::string stem = scene_stem(i);
    io::tensor_write(scene.gt, (dir / (stem + "_gt.catt")).string());
    io::tensor_write(scene.lrms, (dir / (stem + "_lrms.catt")).string());
    io::tensor_write(scene.pan, (dir / (stem + "_pan.catt")).string());
    manifest << "scene " << i << " seed " << seed << " files " << stem
             << "_gt.catt " << stem << "_lrms.catt " << stem << "_pan.catt\n";
  }
  write_text((dir / "manifest.txt").string(), manifest.str());
  std::cout << "synth: wrote " << args.count << " scene(s) to "
            << args.out_dir << "\n";
}

void cmd_pretrain(const PretrainArgs& args) {
  RunConfig cfg = load_config(args.config_path);
  const std::string data_dir =
      args.data_dir.empty() ? cfg.data_dir : args.data_dir;
  const std::string out =
      args.out_path.empty() ? cfg.weights : args.out_path;
  if (out.empty())
    throw ValidationError(
        "pretrain: no weights output path (--out or [run] weights)");

  const std::string manifest_path =
      (fs::path(data_dir) / "manifest.txt").string();
  const auto scenes = parse_manifest(read_text(manifest_path), manifest_path);
  if (scenes.empty())
    throw ValidationError("pretrain: no scenes listed in " + manifest_path);

  std::vector<SceneBundle> reduced;
  reduced.reserve(scenes.size());
  for (const auto& m : scenes) {
    SceneBundle b;
    b.gt = io::tensor_read((fs::path(data_dir) / m.gt).string());
    b.lrms = io::tensor_read((fs::path(data_dir) / m.lrms).string());
    b.pan = io::tensor_read((fs::path(data_dir) / m.pan).string());
    b.sensor = cfg.sensor;
    b.seed = m.seed;
    reduced.push_back(wald_reduce(b));
  }

  PretrainConfig pcfg;
  pcfg.epochs = cfg.pretrain_epochs;
  pcfg.lr = cfg.pretrain_lr;
  pcfg.weight_decay = cfg.pretrain_weight_decay;
  pcfg.seed = cfg.seed;
  std::vector<double> trace;
  Backbone bb = pretrain(reduced, cfg.backbone, pcfg, &trace);
  save_backbone(bb, out);

  RunReport rep;
  rep.config = cfg;
  rep.config.weights = out;
  rep.config.data_dir = data_dir;
  rep.pretrain_trace = trace;
  const std::string report_path =
      args.report_path.empty() ? out + ".report.txt" : args.report_path;
  write_report(report_path, rep);
  std::cout << "pretrain: " << scenes.size() << " scene(s), "
            << cfg.pretrain_epochs << " epoch(s)";
  if (!trace.empty())
    std::cout << ", loss " << trace.front() << " -> " << trace.back();
  std::cout << "\npretrain: weights " << out << ", report " << report_path
            << "\n";
}

void cmd_adapt(const AdaptArgs& args) {
  RunConfig cfg = load_config(args.config_path);
  const std::string wpath =
      args.weights_path.empty() ? cfg.weights : args.weights_path;
  if (wpath.empty())
    throw ValidationError(
        "adapt: no backbone weights path (--weights or [run] weights)");
  const std::string out = args.out_path.empty() ? cfg.out : args.out_path;
  if (out.empty())
    throw ValidationError("adapt: no output path (--out or [run] out)");
  const int workers = args.workers > 0 ? args.workers : cfg.workers;

  RasterTensor y = io::tensor_read(args.lrms_path);
  RasterTensor p = io::tensor_read(args.pan_path);
  if (args.crop) {
    auto cropped =
        crop_to_patch_multiple(y, p, cfg.adapt.patch_size, cfg.sensor.ratio);
    y = std::move(cropped.first);
    p = std::move(cropped.second);
  }
  Backbone bb = load_backbone(cfg.backbone, wpath);

  PipelineResult result =
      run_pipeline(y, p, bb, cfg.sensor, cfg.adapt, workers, !args.no_cat);
  io::tensor_write(result.fused, out);
  if (!args.preview_path.empty())
    io::export_preview(result.fused, preview_bands(result.fused.channels),
                       args.preview_path);

  RunReport rep;
  rep.config = cfg;
  rep.config.workers = workers;
  rep.config.weights = wpath;
  rep.config.out = out;
  rep.adapt_seconds = result.adapt_seconds;
  rep.infer_seconds = result.infer_seconds;
  rep.total_seconds = result.total_seconds;
  rep.adapt_trace = result.trace;
  try {
    rep.quality = evaluate_quality(result.fused, y, p, cfg.sensor);
  } catch (const ValidationError& e) {
    // Quality is best-effort here (tiny scenes cannot fill a Q block);
    // cmd_eval is the strict path.
    std::cout << "adapt: quality skipped (" << e.what() << ")\n";
  }
  if (!args.report_path.empty()) write_report(args.report_path, rep);

  std::cout << "adapt: fused " << result.fused.shape_str() << " -> " << out
            << "\n";
  if (rep.quality)
    std::cout << "adapt: hqnr = " << format_double(rep.quality->hqnr) << "\n";
  std::cout << "adapt: adapt_seconds = " << csv_num(result.adapt_seconds)
            << ", infer_seconds = " << csv_num(result.infer_seconds)
            << ", total_seconds = " << csv_num(result.total_seconds) << "\n";
}

QualityReport cmd_eval(const EvalArgs& args) {
  RunConfig cfg = load_config(args.config_path);
  const RasterTensor fused = io::tensor_read(args.fused_path);
  const RasterTensor lrms = io::tensor_read(args.lrms_path);
  const RasterTensor pan = io::tensor_read(args.pan_path);
  RasterTensor gt;
  const bool has_gt = !args.gt_path.empty();
  if (has_gt) gt = io::tensor_read(args.gt_path);

  const QualityReport q = evaluate_quality(fused, lrms, pan, cfg.sensor,
                                           has_gt ? &gt : nullptr);
  std::cout << "eval: d_lambda = " << format_double(q.d_lambda) << "\n";
  std::cout << "eval: d_s = " << format_double(q.d_s) << "\n";
  std::cout << "eval: hqnr = " << format_double(q.hqnr) << "\n";
  if (q.sam) std::cout << "eval: sam = " << format_double(*q.sam) << "\n";
  if (q.ergas)
    std::cout << "eval: ergas = " << format_double(*q.ergas) << "\n";

  if (!args.report_path.empty()) {
    RunReport rep;
    rep.config = cfg;
    rep.quality = q;
    write_report(args.report_path, rep);
  }
  return q;
}

void cmd_sweep(const SweepArgs& args) {
  RunConfig cfg = load_config(args.config_path);
  if (args.param != "n_patches" && args.param != "patch_size")
    throw ValidationError("sweep: param must be n_patches or patch_size, "
                          "got '" +
                          args.param + "'");
  if (args.values.empty())
    throw ValidationError("sweep: at least one value is required");
  if (args.out_csv.empty())
    throw ValidationError("sweep: an output CSV path is required");
  if (cfg.weights.empty())
    throw ValidationError(
        "sweep: [run] weights must point to pretrained backbone weights");

  const SceneBundle scene =
      synth_scene(cfg.seed, cfg.sensor, cfg.size, cfg.size);
  Backbone bb = load_backbone(cfg.backbone, cfg.weights);

  std::ostringstream csv;
  csv << "value,hqnr,adapt_seconds\n";
  for (int v : args.values) {
    AdaptConfig ac = cfg.adapt;
    if (args.param == "n_patches")
      ac.n_patches = v;
    else
      ac.patch_size = v;
    PipelineResult result = run_pipeline(scene.lrms, scene.pan, bb,
                                         cfg.sensor, ac, cfg.workers, true);
    const QualityReport q =
        evaluate_quality(result.fused, scene.lrms, scene.pan, cfg.sensor);
    csv << v << "," << format_double(q.hqnr) << ","
        << csv_num(result.adapt_seconds) << "\n";
    std::cout << "sweep: " << args.param << " = " << v
              << ", hqnr = " << format_double(q.hqnr) << ", adapt_seconds = "
              << csv_num(result.adapt_seconds) << "\n";
  }
  write_text(args.out_csv, csv.str());
  std::cout << "sweep: wrote " << args.out_csv << "\n";
}

void cmd_bench(const BenchArgs& args) {
  RunConfig cfg = load_config(args.config_path);
  if (args.sizes.empty())
    throw ValidationError("bench: at least one size is required");
  if (args.workers.empty())
    throw ValidationError("bench: at least one worker count is required");
  if (args.out_csv.empty())
    throw ValidationError("bench: an output CSV path is required");

  Backbone bb;
  if (!cfg.weights.empty()) {
    bb = load_backbone(cfg.backbone, cfg.weights);
  } else {
    Rng rng(cfg.seed);
    bb = Backbone::init(cfg.backbone, rng, false);
  }

  std::ostringstream csv;
  csv << "size,workers,adapt_s,infer_s,total_s\n";
  for (int size : args.sizes) {
    for (int w : args.workers) {
      try {
        const SceneBundle scene =
            synth_scene(cfg.seed, cfg.sensor, size, size);
        PipelineResult result = run_pipeline(scene.lrms, scene.pan, bb,
                                             cfg.sensor, cfg.adapt, w, true);
        csv << size << "," << w << "," << csv_num(result.adapt_seconds)
            << "," << csv_num(result.infer_seconds) << ","
            << csv_num(result.total_seconds) << "\n";
      } catch (const std::bad_alloc&) {
        csv << size << "," << w << ",OOM,OOM,OOM\n";
      }
      std::cout << "bench: size " << size << ", workers " << w << " done\n";
    }
  }
  write_text(args.out_csv, csv.str());
  std::cout << "bench: wrote " << args.out_csv << "\n";
}

} // namespace catfuse
