#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "catfuse/metrics.hpp"

namespace catfuse {

/// Command entry points used by the CLI binary and callable as library
/// functions. All of them throw ValidationError for bad inputs and IoError
/// for filesystem failures; the binary maps those to exit codes 1 and 2.

struct SynthArgs {
  std::string config_path;  // "" = defaults
  std::string out_dir;
  std::uint64_t seed = 0;
  int count = 1;
  int size = 0;  // 0 = [run] size from the config
  bool force = false;
};
/// Writes gt/lrms/pan tensors per scene plus manifest.txt; deterministic,
/// so two runs with the same arguments produce byte-identical directories.
void cmd_synth(const SynthArgs& args);

struct PretrainArgs {
  std::string data_dir;     // "" = [run] data_dir
  std::string config_path;  // "" = defaults
  std::string out_path;     // weights; "" = [run] weights
  std::string report_path;  // "" = out_path + ".report.txt"
};
/// Reduces every scene one resolution step, pretrains the backbone on the
/// reduced pairs, writes the weights and a report with the loss trace.
void cmd_pretrain(const PretrainArgs& args);

struct AdaptArgs {
  std::string lrms_path;
  std::string pan_path;
  std::string weights_path;  // "" = [run] weights
  std::string config_path;   // "" = defaults
  std::string out_path;      // fused tensor; "" = [run] out
  std::string report_path;   // "" = no report file
  std::string preview_path;  // "" = no preview PPM
  int workers = 0;           // 0 = [run] workers
  bool no_cat = false;       // backbone-only inference
  bool crop = false;         // crop inputs down to a patch-size multiple
};
/// Runs the full pipeline (or backbone-only under --no-cat) and writes the
/// stitched fusion, optional preview, and optional report.
void cmd_adapt(const AdaptArgs& args);

struct EvalArgs {
  std::string fused_path;
  std::string lrms_path;
  std::string pan_path;
  std::string gt_path;      // "" = no-reference only
  std::string config_path;  // sensor description; "" = defaults
  std::string report_path;  // "" = stdout only
};
/// No-reference quality metrics, plus SAM/ERGAS when ground truth is given.
QualityReport cmd_eval(const EvalArgs& args);

struct SweepArgs {
  std::string param;  // n_patches | patch_size
  std::vector<int> values;
  std::string config_path;
  std::string out_csv;
};
/// One pipeline run per value on one seeded synthetic scene; CSV rows
/// `value,hqnr,adapt_seconds`. Requires [run] weights.
void cmd_sweep(const SweepArgs& args);

struct BenchArgs {
  std::string config_path;  // "" = defaults
  std::vector<int> sizes;
  std::vector<int> workers;
  std::string out_csv;
};
/// Times adaptation and inference per (size, workers) pair; CSV header
/// `size,workers,adapt_s,infer_s,total_s`. Out-of-memory marks the row OOM
/// and the run continues.
void cmd_bench(const BenchArgs& args);

} // namespace catfuse
