#include <iostream>

#include "CLI11.hpp"
#include "catfuse/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "catfuse: pansharpening with test-time residual adaptation.\n"
      "Fuses a low-resolution multispectral image with a panchromatic image\n"
      "via a pretrained backbone plus a small adapter trained per scene."};
  app.require_subcommand(1);

  catfuse::SynthArgs synth_args;
  CLI::App* synth = app.add_subcommand(
      "synth", "Generate synthetic scene bundles (gt/lrms/pan + manifest)");
  synth->add_option("--seed", synth_args.seed, "Base seed; scene i uses seed+i");
  synth->add_option("--count", synth_args.count, "Number of scenes")
      ->capture_default_str();
  synth->add_option("--size", synth_args.size,
                    "Scene side at PAN scale (0 = [run] size)");
  synth->add_option("--sensor-config,--config", synth_args.config_path,
                    "Config file (defaults when omitted)");
  synth->add_option("--out-dir", synth_args.out_dir, "Output directory")
      ->required();
  synth->add_flag("--force", synth_args.force,
                  "Write into a non-empty directory");

  catfuse::PretrainArgs pre_args;
  CLI::App* pre = app.add_subcommand(
      "pretrain", "Pretrain the backbone on reduced-resolution scene pairs");
  pre->add_option("--data-dir", pre_args.data_dir,
                  "Scene directory ('' = [run] data_dir)");
  pre->add_option("--config", pre_args.config_path, "Config file");
  pre->add_option("--out", pre_args.out_path,
                  "Weights output path ('' = [run] weights)");
  pre->add_option("--report", pre_args.report_path,
                  "Report path ('' = <out>.report.txt)");

  catfuse::AdaptArgs adapt_args;
  CLI::App* adapt = app.add_subcommand(
      "adapt", "Adapt to one scene and write the fused image");
  adapt->add_option("--lrms", adapt_args.lrms_path, "LRMS tensor (.catt)")
      ->required();
  adapt->add_option("--pan", adapt_args.pan_path, "PAN tensor (.catt)")
      ->required();
  adapt->add_option("--weights", adapt_args.weights_path,
                    "Backbone weights (.catw; '' = [run] weights)");
  adapt->add_option("--config", adapt_args.config_path, "Config file");
  adapt->add_option("--out", adapt_args.out_path,
                    "Fused tensor output ('' = [run] out)");
  adapt->add_option("--report", adapt_args.report_path, "Report path");
  adapt->add_option("--preview", adapt_args.preview_path,
                    "Preview PPM path");
  adapt->add_option("--workers", adapt_args.workers,
                    "Inference workers (0 = [run] workers)");
  adapt->add_flag("--no-cat", adapt_args.no_cat,
                  "Skip adaptation; backbone-only inference");
  adapt->add_flag("--crop", adapt_args.crop,
                  "Crop inputs down to a patch-size multiple");

  catfuse::EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand(
      "eval", "Quality metrics for a fused image");
  eval->add_option("--fused", eval_args.fused_path, "Fused tensor")
      ->required();
  eval->add_option("--lrms", eval_args.lrms_path, "LRMS tensor")->required();
  eval->add_option("--pan", eval_args.pan_path, "PAN tensor")->required();
  eval->add_option("--gt", eval_args.gt_path,
                   "Ground truth tensor (adds SAM/ERGAS)");
  eval->add_option("--sensor-config,--config", eval_args.config_path,
                   "Config file for the sensor description");
  eval->add_option("--report", eval_args.report_path, "Report path");

  catfuse::SweepArgs sweep_args;
  CLI::App* sweep = app.add_subcommand(
      "sweep", "Sweep one adaptation parameter on a seeded synthetic scene");
  sweep->add_option("--param", sweep_args.param,
                    "Parameter: n_patches | patch_size")
      ->required();
  sweep->add_option("--values", sweep_args.values, "Values to sweep")
      ->required()
      ->delimiter(',');
  sweep->add_option("--config", sweep_args.config_path, "Config file");
  sweep->add_option("--out", sweep_args.out_csv, "CSV output path")
      ->required();

  catfuse::BenchArgs bench_args;
  CLI::App* bench = app.add_subcommand(
      "bench", "Time adaptation and inference across sizes and workers");
  bench->add_option("--config", bench_args.config_path, "Config file");
  bench->add_option("--sizes", bench_args.sizes, "Scene sides (PAN scale)")
      ->required()
      ->delimiter(',');
  bench->add_option("--workers", bench_args.workers, "Worker counts")
      ->required()
      ->delimiter(',');
  bench->add_option("--out", bench_args.out_csv, "CSV output path")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (synth->parsed()) catfuse::cmd_synth(synth_args);
    else if (pre->parsed()) catfuse::cmd_pretrain(pre_args);
    else if (adapt->parsed()) catfuse::cmd_adapt(adapt_args);
    else if (eval->parsed()) catfuse::cmd_eval(eval_args);
    else if (sweep->parsed()) catfuse::cmd_sweep(sweep_args);
    else if (bench->parsed()) catfuse::cmd_bench(bench_args);
    return 0;
  } catch (const catfuse::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 2;
  } catch (const catfuse::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
