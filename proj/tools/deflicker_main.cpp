// Copyright (c) 2026 Deflicker Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <CLI11.hpp>

#include "deflicker/cli/commands.hpp"

int main(int argc, char** argv) {
  using namespace deflicker;

  CLI::App app{"deflicker - blind video temporal-consistency post-processing"};
  app.set_version_flag("--version", std::string(version()));
  app.require_subcommand(1);

  // synth
  std::string synth_spec, synth_out;
  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic video tree");
  synth->add_option("spec_file", synth_spec, "JSON spec with scene + flicker")->required();
  synth->add_option("out_dir", synth_out, "Output directory")->required();

  // train — explicit flags beat the config file, which beats built-in defaults
  cli::TrainArgs train_args;
  bool no_clip = false;
  int t_epochs = 0, t_batches = 0, t_batch_size = 0, t_window = 0, t_base = 0;
  long t_ckpt_every = 0;
  double t_lr = 0, t_lambda_sp = 0;
  std::uint64_t t_seed = 0;
  CLI::App* train = app.add_subcommand("train", "Train the consistency network");
  train->add_option("--data", train_args.data_dir, "Directory of video subdirectories")
      ->required();
  train->add_option("--out", train_args.run_dir, "Run directory for logs and checkpoints")
      ->required();
  train->add_option("--config", train_args.config_file, "JSON config file");
  train->add_option("--resume", train_args.resume, "Checkpoint to resume from");
  train->add_option("--steps", train_args.steps, "Total optimizer steps (overrides epochs)");
  train->add_option("--epochs", t_epochs, "Epochs (default 100)");
  train->add_option("--batches", t_batches, "Batches per epoch (default 1000)");
  train->add_option("--batch-size", t_batch_size, "Windows per batch (default 4)");
  train->add_option("--window", t_window, "Frames per training window (default 5)");
  train->add_option("--lr", t_lr, "Adam learning rate (default 1e-4)");
  train->add_option("--seed", t_seed, "Training seed");
  train->add_option("--base-channels", t_base, "Encoder base channels (default 32)");
  train->add_option("--lambda-sp", t_lambda_sp, "Style-preserving weight (default 10)");
  train->add_option("--checkpoint-every", t_ckpt_every, "Checkpoint period in steps (default 1000)");
  train->add_flag("--no-clip", no_clip, "Disable gradient clipping");

  // infer
  std::string infer_ckpt, infer_raw, infer_processed, infer_out;
  CLI::App* infer = app.add_subcommand("infer", "Apply a trained model to a video");
  infer->add_option("checkpoint", infer_ckpt, "Model checkpoint")->required();
  infer->add_option("raw_dir", infer_raw, "Raw (unprocessed) frame folder")->required();
  infer->add_option("processed_dir", infer_processed, "Per-frame processed folder")->required();
  infer->add_option("out_dir", infer_out, "Output frame folder")->required();

  // eval
  cli::EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "Score a processed/output pair");
  eval->add_option("--raw", eval_args.raw_dir, "Raw frame folder")->required();
  eval->add_option("--processed", eval_args.processed_dir, "Processed frame folder")->required();
  eval->add_option("--output", eval_args.output_dir, "Output frame folder to score")->required();
  eval->add_option("--flows", eval_args.flows_dir, "Directory of .flo files");
  eval->add_option("--gt-manifest", eval_args.gt_manifest,
                   "Synthetic manifest for ground-truth flows");
  eval->add_option("--csv", eval_args.csv_path, "CSV output path")->required();
  eval->add_option("--json", eval_args.json_path, "JSON summary output path");
  eval->add_option("--video-id", eval_args.video_id, "Row identifier (default 'video')");
  eval->add_option("--task", eval_args.task, "Task label for grouping (default 'default')");
  eval->add_option("--embedder-seed", eval_args.embedder_seed,
                   "Seed of the fixed_random perceptual embedder");
  eval->add_flag("--append", eval_args.append, "Append to an existing CSV");

  // report
  cli::ReportArgs report_args;
  CLI::App* report = app.add_subcommand("report", "Render scatter plot + Markdown table");
  report->add_option("csvs", report_args.csv_paths, "Eval CSVs, one per model/config")
      ->required();
  report->add_option("--out", report_args.out_dir, "Output directory (default '.')");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;  // usage/validation
  }

  if (app.got_subcommand(synth)) return cli::run_synth(synth_spec, synth_out);
  if (app.got_subcommand(train)) {
    nlohmann::json& ov = train_args.overrides;
    if (train->count("--epochs")) ov["epochs"] = t_epochs;
    if (train->count("--batches")) ov["batches_per_epoch"] = t_batches;
    if (train->count("--batch-size")) ov["batch_size"] = t_batch_size;
    if (train->count("--window")) ov["window_frames"] = t_window;
    if (train->count("--lr")) ov["learning_rate"] = t_lr;
    if (train->count("--seed")) ov["seed"] = t_seed;
    if (train->count("--base-channels")) ov["net"]["base_channels"] = t_base;
    if (train->count("--lambda-sp")) ov["weights"]["lambda_SP"] = t_lambda_sp;
    if (train->count("--checkpoint-every")) ov["checkpoint_every"] = t_ckpt_every;
    if (no_clip) ov["clip_norm"] = 0.0;
    return cli::run_train(train_args);
  }
  if (app.got_subcommand(infer))
    return cli::run_infer(infer_ckpt, infer_raw, infer_processed, infer_out);
  if (app.got_subcommand(eval)) return cli::run_eval(eval_args);
  if (app.got_subcommand(report)) return cli::run_report(report_args);
  return 2;
}
