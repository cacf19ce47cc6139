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

#pragma once

#include <algorithm>
#include <ctime>
#include <iostream>
#include <sstream>

#include "deflicker/metrics/metrics.hpp"
#include "deflicker/synth/synth.hpp"
#include "deflicker/train/trainer.hpp"

namespace deflicker {
namespace cli {

// Exit-code contract: 0 ok, 2 usage/validation, 3 I/O, 4 numerical failure.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const NonFiniteLossError*>(&e)) return 4;
  if (dynamic_cast<const IoError*>(&e)) return 3;
  if (dynamic_cast<const CheckpointError*>(&e)) return 3;
  if (dynamic_cast<const MissingFlowError*>(&e)) return 3;
  if (dynamic_cast<const Error*>(&e)) return 2;  // validation/spec errors
  return 1;
}

template <typename F>
int guarded(F&& f, std::ostream& err = std::cerr) {
  try {
    return f();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

/// Reproducibility header written into every command's output directory:
/// config hash, seed, library version (plus a timestamp, the one field
/// allowed to differ between identical runs).
inline void write_run_info(const std::string& dir, const std::string& command,
                           const nlohmann::json& args) {
  nlohmann::json info;
  info["command"] = command;
  info["version"] = version();
  info["args"] = args;
  char hash[32];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(fnv1a(command + args.dump())));
  info["config_hash"] = hash;
  info["threads"] = threads_from_env();
  char stamp[64];
  const std::time_t now = std::time(nullptr);
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  info["timestamp"] = stamp;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
  const std::string path = (std::filesystem::path(dir) / "run_info.json").string();
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << info.dump(2) << "\n";
}

// ---- synth ----

/// Spec file: JSON {"scene": {...}, "flicker": {...}} (an exported
/// manifest.json also works — extra keys are ignored).
inline std::pair<SceneSpec, FlickerSpec> read_synth_spec(const std::string& spec_file) {
  std::ifstream in(spec_file);
  if (!in) throw IoError("cannot read spec file: " + spec_file);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SpecError("malformed spec " + spec_file + ": " + e.what());
  }
  if (!j.contains("scene") || !j.contains("flicker"))
    throw SpecError("spec must contain \"scene\" and \"flicker\" objects: " + spec_file);
  try {
    return {scene_from_json(j.at("scene")), flicker_from_json(j.at("flicker"))};
  } catch (const nlohmann::json::exception& e) {
    throw SpecError("malformed spec " + spec_file + ": " + e.what());
  }
}

inline int run_synth(const std::string& spec_file, const std::string& out_dir) {
  return guarded([&] {
    auto [scene, flicker] = read_synth_spec(spec_file);
    const SynthVideo<float> video = generate<float>(scene, flicker);
    export_video(video, out_dir);
    write_run_info(out_dir, "synth",
                   {{"spec_file", spec_file},
                    {"out_dir", out_dir},
                    {"scene", scene_to_json(scene)},
                    {"flicker", flicker_to_json(flicker)}});
    return 0;
  });
}

// ---- infer ----

inline int run_infer(const std::string& checkpoint_path, const std::string& raw_dir,
                     const std::string& processed_dir, const std::string& out_dir) {
  return guarded([&] {
    const Checkpoint<float> ck = load_checkpoint<float>(checkpoint_path);
    const ConsistencyNet<float> net = net_from_checkpoint(ck);
    const FrameSequence<float> I = load_frame_folder<float>(raw_dir);
    const FrameSequence<float> P = load_frame_folder<float>(processed_dir);
    if (I.size() != P.size())
      throw DimensionMismatchError("raw has " + std::to_string(I.size()) +
                                   " frames, processed has " + std::to_string(P.size()));
    FrameSequence<float> O = net.rollout(I, P);
    for (auto& f : O.frames) f.data = f.data.min(1.0f).max(0.0f);  // clamp at export only
    save_frame_folder(O, out_dir);
    write_run_info(out_dir, "infer",
                   {{"checkpoint", checkpoint_path},
                    {"raw_dir", raw_dir},
                    {"processed_dir", processed_dir},
                    {"out_dir", out_dir},
                    {"frames", O.size()},
                    {"step", ck.step}});
    return 0;
  });
}

// ---- train ----

struct TrainArgs {
  std::string data_dir;        // directory of video subdirectories
  std::string run_dir;         // outputs: metrics.jsonl, checkpoints, run_info
  std::string config_file;     // optional JSON mirror of TrainConfig
  std::string resume;          // optional checkpoint to resume from
  long steps = -1;             // optional override: total steps
  TrainConfig config;          // base config (in-process callers may pre-populate)
  nlohmann::json overrides;    // explicit flags, applied after the config file
};

inline TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig cfg) {
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.batches_per_epoch = j.value("batches_per_epoch", cfg.batches_per_epoch);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.window_frames = j.value("window_frames", cfg.window_frames);
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.beta1 = j.value("beta1", cfg.beta1);
  cfg.beta2 = j.value("beta2", cfg.beta2);
  cfg.clip_norm = j.value("clip_norm", cfg.clip_norm);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.checkpoint_every = j.value("checkpoint_every", cfg.checkpoint_every);
  if (j.contains("weights")) {
    const auto& w = j["weights"];
    cfg.weights.lambda_p = w.value("lambda_p", cfg.weights.lambda_p);
    cfg.weights.lambda_SP = w.value("lambda_SP", cfg.weights.lambda_SP);
    cfg.weights.lambda_st = w.value("lambda_st", cfg.weights.lambda_st);
    cfg.weights.lambda_lt = w.value("lambda_lt", cfg.weights.lambda_lt);
    cfg.weights.lambda_rank = w.value("lambda_rank", cfg.weights.lambda_rank);
    cfg.weights.lambda_PP = w.value("lambda_PP", cfg.weights.lambda_PP);
  }
  if (j.contains("net")) {
    const auto& n = j["net"];
    cfg.net.base_channels = n.value("base_channels", cfg.net.base_channels);
    cfg.net.residual_blocks = n.value("residual_blocks", cfg.net.residual_blocks);
    cfg.net.lstm_hidden_channels = n.value("lstm_hidden_channels", cfg.net.lstm_hidden_channels);
    cfg.net.zero_init_output = n.value("zero_init_output", cfg.net.zero_init_output);
  }
  return cfg;
}

/// Loads one training video from a subdirectory: an exported synth tree
/// (manifest.json — replayed for exact frames and ground-truth flows) or a
/// plain tree with I/, P/, and flows/ (.flo files).
template <typename S>
TrainVideo<S> load_train_video(const std::filesystem::path& dir) {
  TrainVideo<S> tv;
  tv.id = dir.filename().string();
  const auto manifest = dir / "manifest.json";
  if (std::filesystem::exists(manifest)) {
    SynthVideo<S> sv = replay_manifest<S>(manifest.string());
    tv.triplet = std::move(sv.triplet);
    tv.flows = std::make_shared<GroundTruthFlowSource<S>>(sv.scene.height, sv.scene.width,
                                                          sv.offsets);
    return tv;
  }
  tv.triplet.raw = load_frame_folder<S>((dir / "I").string());
  tv.triplet.processed = load_frame_folder<S>((dir / "P").string());
  if (!std::filesystem::is_directory(dir / "flows"))
    throw MissingFlowError("no flows/ directory (and no manifest.json) in " + dir.string());
  tv.flows = std::make_shared<FileFlowSource<S>>((dir / "flows").string());
  return tv;
}

template <typename S>
TrainDataset<S> load_train_dataset(const std::string& data_dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(data_dir)) throw IoError("not a directory: " + data_dir);
  std::vector<std::string> subdirs;
  for (const auto& entry : fs::directory_iterator(data_dir))
    if (entry.is_directory()) subdirs.push_back(entry.path().string());
  std::sort(subdirs.begin(), subdirs.end());
  TrainDataset<S> ds;
  for (const auto& sub : subdirs) ds.push_back(load_train_video<S>(fs::path(sub)));
  if (ds.empty()) throw SpecError("no video subdirectories in " + data_dir);
  return ds;
}

inline int run_train(const TrainArgs& args) {
  return guarded([&] {
    TrainConfig cfg = args.config;
    if (!args.config_file.empty()) {
      std::ifstream in(args.config_file);
      if (!in) throw IoError("cannot read config: " + args.config_file);
      nlohmann::json j;
      try {
        in >> j;
      } catch (const nlohmann::json::exception& e) {
        throw SpecError("malformed config " + args.config_file + ": " + e.what());
      }
      cfg = train_config_from_json(j, cfg);
    }
    if (!args.overrides.empty()) cfg = train_config_from_json(args.overrides, cfg);
    if (args.steps >= 0) {  // step-count override for desk-scale runs
      cfg.epochs = 1;
      cfg.batches_per_epoch = int(args.steps);
    }
    cfg.validate();
    if (args.run_dir.empty()) throw SpecError("train needs an output run directory");
    const TrainDataset<float> dataset = load_train_dataset<float>(args.data_dir);
    const ConvFeatureNet<float> fnet = ConvFeatureNet<float>::fixed_random(cfg.seed);
    write_run_info(args.run_dir, "train",
                   {{"data_dir", args.data_dir},
                    {"run_dir", args.run_dir},
                    {"seed", cfg.seed},
                    {"epochs", cfg.epochs},
                    {"batches_per_epoch", cfg.batches_per_epoch},
                    {"batch_size", cfg.batch_size},
                    {"window_frames", cfg.window_frames},
                    {"videos", dataset.size()}});
    std::optional<TrainState<float>> initial;
    if (!args.resume.empty())
      initial = from_checkpoint(load_checkpoint<float>(args.resume));
    FitOptions opt;
    opt.run_dir = args.run_dir;
    fit(dataset, cfg, fnet, opt, std::move(initial));
    return 0;
  });
}

// ---- eval ----

struct EvalArgs {
  std::string raw_dir, processed_dir, output_dir;
  std::string flows_dir;     // .flo files; exclusive with gt_manifest
  std::string gt_manifest;   // synthetic manifest for ground-truth flows
  std::string csv_path;      // required
  std::string json_path;     // optional JSON summary
  std::string video_id = "video";
  std::string task = "default";
  std::uint64_t embedder_seed = 9001;
  bool append = false;  // append a row to an existing CSV
};

struct EvalRow {
  std::string video_id, task;
  double warping_error = 0, perceptual_distance = 0;
  long frames_counted = 0, skipped_pairs = 0;
};

inline const char* kEvalCsvHeader =
    "video_id,task,warping_error,perceptual_distance,frames_counted,skipped_pairs";

inline std::vector<EvalRow> read_eval_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read CSV: " + path);
  std::string line;
  if (!std::getline(in, line)) throw SpecError("empty CSV: " + path);
  auto strip = [](std::string s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
    return s;
  };
  if (strip(line) != kEvalCsvHeader)
    throw DecodeError("unexpected CSV header in " + path + ": " + line);
  std::vector<EvalRow> rows;
  while (std::getline(in, line)) {
    line = strip(line);
    if (line.empty()) continue;
    std::stringstream ss(line);
    EvalRow r;
    std::string field;
    try {
      if (!std::getline(ss, r.video_id, ',') || !std::getline(ss, r.task, ','))
        throw DecodeError("");
      if (!std::getline(ss, field, ',')) throw DecodeError("");
      r.warping_error = std::stod(field);
      if (!std::getline(ss, field, ',')) throw DecodeError("");
      r.perceptual_distance = std::stod(field);
      if (!std::getline(ss, field, ',')) throw DecodeError("");
      r.frames_counted = std::stol(field);
      if (!std::getline(ss, field, ',')) throw DecodeError("");
      r.skipped_pairs = std::stol(field);
    } catch (const std::exception&) {
      throw DecodeError("corrupt CSV row in " + path + ": " + line);
    }
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw SpecError("CSV has no data rows: " + path);
  return rows;
}

inline void write_eval_csv(const std::string& path, const std::vector<EvalRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write CSV: " + path);
  out << kEvalCsvHeader << "\n";
  char buf[64];
  for (const auto& r : rows) {
    out << r.video_id << "," << r.task << ",";
    std::snprintf(buf, sizeof(buf), "%.17g", r.warping_error);
    out << buf << ",";
    std::snprintf(buf, sizeof(buf), "%.17g", r.perceptual_distance);
    out << buf << "," << r.frames_counted << "," << r.skipped_pairs << "\n";
  }
  if (!out.good()) throw IoError("write failed: " + path);
}

/// Per-task means plus the overall mean-of-task-means "Average" row.
inline nlohmann::json eval_summary(const std::vector<EvalRow>& rows) {
  std::map<std::string, std::pair<double, double>> sums;
  std::map<std::string, long> counts;
  for (const auto& r : rows) {
    sums[r.task].first += r.warping_error;
    sums[r.task].second += r.perceptual_distance;
    counts[r.task] += 1;
  }
  nlohmann::json tasks = nlohmann::json::object();
  double aw = 0, ad = 0;
  for (const auto& [task, s] : sums) {
    const double w = s.first / counts[task], d = s.second / counts[task];
    tasks[task] = {{"warping_error", w}, {"perceptual_distance", d}, {"videos", counts[task]}};
    aw += w;
    ad += d;
  }
  return {{"tasks", tasks},
          {"average",
           {{"warping_error", aw / double(sums.size())},
            {"perceptual_distance", ad / double(sums.size())}}}};
}

inline int run_eval(const EvalArgs& args) {
  return guarded([&] {
    namespace fs = std::filesystem;
    for (const auto& [label, dir] : {std::pair<const char*, const std::string&>{"raw", args.raw_dir},
                                     {"processed", args.processed_dir},
                                     {"output", args.output_dir}})
      if (!fs::is_directory(dir))
        throw SpecError(std::string("missing ") + label + " tree: " + dir);
    if (args.csv_path.empty()) throw SpecError("eval needs --csv");
    if (!args.flows_dir.empty() && !args.gt_manifest.empty())
      throw SpecError("--flows and --gt-manifest are mutually exclusive");

    VideoTriplet<float> triplet;
    triplet.raw = load_frame_folder<float>(args.raw_dir);
    triplet.processed = load_frame_folder<float>(args.processed_dir);
    triplet.output = load_frame_folder<float>(args.output_dir);

    std::shared_ptr<FlowPairSource<float>> flows;
    std::string flow_kind;
    if (!args.flows_dir.empty()) {
      flows = std::make_shared<FileFlowSource<float>>(args.flows_dir);
      flow_kind = "files:" + args.flows_dir;
    } else if (!args.gt_manifest.empty()) {
      SynthVideo<float> sv = replay_manifest<float>(args.gt_manifest);
      flows = std::make_shared<GroundTruthFlowSource<float>>(sv.scene.height, sv.scene.width,
                                                             sv.offsets);
      flow_kind = "ground_truth:" + args.gt_manifest;
    } else {
      auto provider = std::make_shared<ZeroFlowProvider<float>>();
      flows = std::make_shared<ProviderFlowSource<float>>(provider, &triplet.raw);
      flow_kind = "zero";
    }

    const FeatureDistanceEmbedder<float> embedder =
        FeatureDistanceEmbedder<float>::fixed_random(args.embedder_seed);
    const VideoScore score = score_video(triplet, *flows, embedder);

    EvalRow row;
    row.video_id = args.video_id;
    row.task = args.task;
    row.warping_error = score.warping_error;
    row.perceptual_distance = score.perceptual_distance;
    row.frames_counted = score.frames_counted;
    row.skipped_pairs = score.skipped_pairs;

    std::vector<EvalRow> rows;
    if (args.append && fs::exists(args.csv_path)) rows = read_eval_csv(args.csv_path);
    rows.push_back(row);
    write_eval_csv(args.csv_path, rows);
    if (!args.json_path.empty()) {
      std::ofstream out(args.json_path);
      if (!out) throw IoError("cannot write JSON summary: " + args.json_path);
      out << eval_summary(rows).dump(2) << "\n";
    }
    const std::string info_dir = fs::path(args.csv_path).parent_path().string();
    write_run_info(info_dir.empty() ? "." : info_dir, "eval",
                   {{"raw_dir", args.raw_dir},
                    {"processed_dir", args.processed_dir},
                    {"output_dir", args.output_dir},
                    {"flows", flow_kind},
                    {"embedder", embedder.descriptor()},
                    {"embedder_seed", args.embedder_seed},
                    {"resolution", std::to_string(triplet.raw.width()) + "x" +
                                       std::to_string(triplet.raw.height())},
                    {"video_id", args.video_id},
                    {"task", args.task}});
    return 0;
  });
}

// ---- report ----

struct ReportArgs {
  std::vector<std::string> csv_paths;
  std::string out_dir = ".";
};

/// One model/config per CSV: its label is the file stem, its point the mean
/// (warping error, perceptual distance) over the CSV's rows.
struct ModelSummary {
  std::string label;
  double warping_error = 0, perceptual_distance = 0;
  std::map<std::string, std::pair<double, double>> task_means;  // task -> (w, d)
};

inline ModelSummary summarize_model(const std::string& csv_path) {
  ModelSummary m;
  m.label = std::filesystem::path(csv_path).stem().string();
  const auto rows = read_eval_csv(csv_path);
  const nlohmann::json summary = eval_summary(rows);
  for (const auto& [task, v] : summary.at("tasks").items())
    m.task_means[task] = {v.at("warping_error").get<double>(),
                          v.at("perceptual_distance").get<double>()};
  m.warping_error = summary.at("average").at("warping_error").get<double>();
  m.perceptual_distance = summary.at("average").at("perceptual_distance").get<double>();
  return m;
}

inline std::string render_scatter_svg(const std::vector<ModelSummary>& models) {
  const int W = 640, H = 480, ml = 70, mr = 30, mt = 40, mb = 60;
  double max_w = 0, max_d = 0;
  for (const auto& m : models) {
    max_w = std::max(max_w, m.warping_error);
    max_d = std::max(max_d, m.perceptual_distance);
  }
  if (max_w <= 0) max_w = 1;
  if (max_d <= 0) max_d = 1;
  max_w *= 1.15;
  max_d *= 1.15;
  const auto X = [&](double w) { return ml + w / max_w * (W - ml - mr); };
  const auto Y = [&](double d) { return H - mb - d / max_d * (H - mt - mb); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                 "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" viewBox=\"0 0 " << W << " " << H << "\">\n"
    << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n"
    << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr << "\" y2=\""
    << H - mb << "\" stroke=\"black\"/>\n"
    << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << H - mb
    << "\" stroke=\"black\"/>\n"
    << "<text x=\"" << (ml + W - mr) / 2 << "\" y=\"" << H - 15
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">warping error"
    << "</text>\n"
    << "<text x=\"18\" y=\"" << (mt + H - mb) / 2
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\" transform=\""
    << "rotate(-90 18 " << (mt + H - mb) / 2 << ")\">perceptual distance</text>\n";
  for (int i = 0; i <= 4; ++i) {
    const double w = max_w * i / 4, d = max_d * i / 4;
    s << "<text x=\"" << X(w) << "\" y=\"" << H - mb + 18
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << std::fixed;
    s.precision(3);
    s << w << "</text>\n";
    s << "<text x=\"" << ml - 8 << "\" y=\"" << Y(d) + 4
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << d
      << "</text>\n";
    s.unsetf(std::ios_base::floatfield);
  }
  for (std::size_t i = 0; i < models.size(); ++i) {
    const auto& m = models[i];
    const char* color = colors[i % 8];
    s << "<circle cx=\"" << X(m.warping_error) << "\" cy=\"" << Y(m.perceptual_distance)
      << "\" r=\"6\" fill=\"" << color << "\"/>\n"
      << "<text x=\"" << X(m.warping_error) + 10 << "\" y=\"" << Y(m.perceptual_distance) + 4
      << "\" font-family=\"sans-serif\" font-size=\"13\" fill=\"" << color << "\">" << m.label
      << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

/// Markdown table grouped by task, one (omega, D) column pair per model,
/// closing with the mean-of-task-means Average row.
inline std::string render_report_table(const std::vector<ModelSummary>& models) {
  std::set<std::string> tasks;
  for (const auto& m : models)
    for (const auto& [task, v] : m.task_means) tasks.insert(task);
  std::ostringstream md;
  md << "| Task |";
  for (const auto& m : models) md << " " << m.label << " omega | " << m.label << " D |";
  md << "\n|---|";
  for (std::size_t i = 0; i < models.size(); ++i) md << "---|---|";
  md << "\n";
  char buf[64];
  const auto cell = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return std::string(buf);
  };
  for (const auto& task : tasks) {
    md << "| " << task << " |";
    for (const auto& m : models) {
      const auto it = m.task_means.find(task);
      if (it == m.task_means.end())
        md << " - | - |";
      else
        md << " " << cell(it->second.first) << " | " << cell(it->second.second) << " |";
    }
    md << "\n";
  }
  md << "| Average |";
  for (const auto& m : models)
    md << " " << cell(m.warping_error) << " | " << cell(m.perceptual_distance) << " |";
  md << "\n";
  return md.str();
}

inline int run_report(const ReportArgs& args) {
  return guarded([&] {
    if (args.csv_paths.empty()) throw SpecError("report needs at least one CSV");
    std::vector<ModelSummary> models;
    for (const auto& path : args.csv_paths) models.push_back(summarize_model(path));
    std::filesystem::create_directories(args.out_dir);
    const auto svg_path = std::filesystem::path(args.out_dir) / "report.svg";
    const auto md_path = std::filesystem::path(args.out_dir) / "report.md";
    {
      std::ofstream out(svg_path);
      if (!out) throw IoError("cannot write " + svg_path.string());
      out << render_scatter_svg(models);
    }
    {
      std::ofstream out(md_path);
      if (!out) throw IoError("cannot write " + md_path.string());
      out << "# Temporal consistency report\n\n" << render_report_table(models) << "\n";
    }
    nlohmann::json inputs = nlohmann::json::array();
    for (const auto& p : args.csv_paths) inputs.push_back(p);
    write_run_info(args.out_dir, "report", {{"csvs", inputs}, {"out_dir", args.out_dir}});
    return 0;
  });
}

}  // namespace cli
}  // namespace deflicker
