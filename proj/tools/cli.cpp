#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "experiments.hpp"
#include "mmot/io.hpp"
#include "mmot/metrics.hpp"
#include "mmot/simlab.hpp"
#include "mmot/tracker.hpp"
#include "mmot/training.hpp"

namespace mmot::app {

namespace fs = std::filesystem;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

io::RunConfig load_config(const std::string& path) {
  if (path.empty()) return io::RunConfig{};
  return io::parse_run_config(io::read_text(path));
}

NoiseSuite resolve_noise(const io::RunConfig& cfg, const std::string& noise_path) {
  if (!noise_path.empty()) return io::parse_noise(io::read_text(noise_path));
  if (cfg.noise.entries().empty()) {
    throw ConfigError("no noise suite: pass --noise or set 'noise' in the config");
  }
  return cfg.noise;
}

std::optional<std::set<ClassId>> parse_classes(const std::string& text) {
  if (text.empty()) return std::nullopt;
  std::set<ClassId> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.insert(v);
    } catch (const std::exception&) {
      throw UsageError("--classes expects a comma-separated list of integers, got '" + text + "'");
    }
  }
  return out;
}

// ---- simulate ----

struct SimulateArgs {
  std::string config, out;
  std::uint64_t seed = 0;
  bool crossing = false;
  int sequences = 1;
  int parallel = 1;
};

int simulate(const SimulateArgs& a, std::ostream& out) {
  const io::RunConfig cfg = load_config(a.config);
  if (a.sequences < 1) throw UsageError("--sequences must be >= 1");
  parallel_for(a.sequences, a.parallel, [&](int k) {
    const std::uint64_t seed = a.seed + static_cast<std::uint64_t>(k);
    Scenario sc;
    if (a.crossing) {
      sc = crossing_benchmark(seed);
    } else {
      ScenarioConfig sconf = cfg.scenario;
      sconf.seed = seed;
      sc = generate(sconf);
    }
    fs::path dir = a.out;
    if (a.sequences > 1) {
      std::ostringstream name;
      name << "seq_" << std::setw(4) << std::setfill('0') << k;
      dir /= name.str();
    }
    io::write_scenario(dir, sc);
  });
  out << "wrote " << a.sequences << " scenario(s) to " << a.out << "\n";
  return kOk;
}

// ---- estimate-noise ----

int estimate_noise_cmd(const std::vector<std::string>& dirs, const std::string& out_path,
                       std::ostream& out) {
  NoiseSamples samples;
  for (const auto& d : dirs) {
    const LabeledSequence seq = io::read_sequence(d);
    merge_samples(samples, collect_noise_samples(seq.truth, seq.detections));
  }
  const NoiseSuite noise = estimate_noise(samples);
  const std::string text = io::dump_noise(noise);
  io::write_atomic(out_path, [&](std::ostream& f) { f << text; });
  out << "estimated noise for " << noise.entries().size() << " class(es) from " << dirs.size()
      << " sequence(s)\n";
  return kOk;
}

// ---- train ----

struct TrainArgs {
  std::vector<std::string> dirs;
  std::string stage = "all", config, noise, checkpoints, out;
  std::uint64_t seed = 0;
  int parallel = 1;
};

int train(const TrainArgs& a, std::ostream& out) {
  const io::RunConfig cfg = load_config(a.config);
  TrackerConfig baseline = cfg.tracker();
  baseline.noise = resolve_noise(cfg, a.noise);
  baseline.policy.init_mode = InitMode::Always;

  std::vector<TrainStage> stages;
  if (a.stage == "all") {
    stages = {TrainStage::Distance, TrainStage::Coefficients, TrainStage::Init};
  } else {
    try {
      stages = {parse_stage(a.stage)};
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  std::string start = a.checkpoints.empty() ? cfg.checkpoints.value_or("") : a.checkpoints;
  if (start.empty() && stages.front() != TrainStage::Distance) {
    throw UsageError("stage " + a.stage + " continues from stage 1: pass --checkpoints");
  }
  LearnedModels models = start.empty() ? LearnedModels::create(cfg.dims, a.seed)
                                       : io::load_models(start, cfg.dims.features);

  std::vector<LabeledSequence> seqs(a.dirs.size());
  parallel_for(static_cast<int>(a.dirs.size()), a.parallel,
               [&](int k) { seqs[k] = io::read_sequence(a.dirs[k]); });
  std::vector<TrainingSet> parts(seqs.size());
  parallel_for(static_cast<int>(seqs.size()), a.parallel, [&](int k) {
    parts[k] = build_training_set(std::span(seqs).subspan(k, 1), baseline, models.dims.features);
  });
  TrainingSet set;
  for (auto& p : parts) {
    for (auto& s : p.pairs) set.pairs.push_back(std::move(s));
    for (auto& s : p.inits) set.inits.push_back(std::move(s));
  }

  TrainConfig tc = cfg.training(a.seed);
  tc.dims = models.dims;
  const fs::path dir = a.out;
  auto on_epoch = [&](const EpochRecord& r, const LearnedModels& m) {
    io::save_models(dir / "epochs" / (std::string(to_string(r.stage)) + "-" + std::to_string(r.epoch)), m);
    out << "stage " << to_string(r.stage) << " epoch " << r.epoch << " loss " << r.loss
        << " metric " << r.metric << "\n";
  };
  std::vector<EpochRecord> records;
  for (TrainStage s : stages) {
    auto h = train_stage(models, set, s, tc, on_epoch);
    records.insert(records.end(), h.begin(), h.end());
  }
  io::save_models(dir, models);
  io::write_atomic(dir / "telemetry.tsv", [&](std::ostream& f) { io::write_telemetry(f, records); });
  out << "trained on " << set.pairs.size() << " pair samples and " << set.inits.size()
      << " init samples; checkpoints in " << a.out << "\n";
  return kOk;
}

// ---- track ----

struct TrackArgs {
  std::string detections, config, noise, checkpoints, policy, classes, out;
  std::optional<double> gate;
};

int track(const TrackArgs& a, std::ostream& out) {
  io::RunConfig cfg = load_config(a.config);
  TrackerConfig tc = cfg.tracker();
  tc.noise = resolve_noise(cfg, a.noise);
  if (!a.policy.empty()) {
    try {
      tc.policy.init_mode = parse_init_mode(a.policy, &tc.policy);
    } catch (const ConfigError& e) {
      throw UsageError(e.what());
    }
  }
  if (a.gate) {
    if (!(*a.gate > 0.0)) throw UsageError("--gate must be positive");
    tc.gate = *a.gate;
  }
  std::istringstream in(io::read_text(a.detections));
  io::DetectionStream ds = io::read_detections(in);
  if (const auto keep = parse_classes(a.classes)) {
    for (auto& frame : ds.frames) {
      std::erase_if(frame, [&](const Detection& d) { return !keep->count(d.class_id); });
    }
  }
  const std::string ckpt = a.checkpoints.empty() ? cfg.checkpoints.value_or("") : a.checkpoints;
  std::shared_ptr<const LearnedModels> models;
  if (!ckpt.empty()) models = std::make_shared<LearnedModels>(io::load_models(ckpt, ds.features));

  io::TrackStream ts;
  ts.num_frames = static_cast<int>(ds.frames.size());
  ts.tracks = run_sequence(tc, models, ds.frames);
  io::write_atomic(a.out, [&](std::ostream& f) { io::write_tracks(f, ts); });
  std::set<int> ids;
  for (const auto& t : ts.tracks) ids.insert(t.id);
  out << "tracked " << ts.num_frames << " frames: " << ids.size() << " tracks"
      << (models ? " (learned distance)" : " (mahalanobis)") << "\n";
  return kOk;
}

// ---- evaluate ----

int evaluate_cmd(const std::string& tracks_path, const std::string& truth_path,
                 const std::string& classes, const std::string& out_path, std::ostream& out) {
  std::istringstream tin(io::read_text(tracks_path));
  std::istringstream gin(io::read_text(truth_path));
  const io::TrackStream ts = io::read_tracks(tin);
  const io::TruthStream gt = io::read_truth(gin);
  if (ts.num_frames != static_cast<int>(gt.frames.size())) {
    throw ConfigError("track file covers " + std::to_string(ts.num_frames) +
                      " frames, ground truth " + std::to_string(gt.frames.size()));
  }
  EvalOptions opt;
  opt.classes = parse_classes(classes);
  const MetricsReport report = evaluate(gt.frames, ts.tracks, ts.num_frames, opt);
  const std::string text = io::dump_metrics(report);
  if (out_path.empty()) {
    out << text;
  } else {
    io::write_atomic(out_path, [&](std::ostream& f) { f << text; });
  }
  out << "AMOTA " << report.amota << "  MOTA " << report.mota << "  IDS " << report.id_switches
      << "  false tracks " << report.false_tracks << "\n";
  return kOk;
}

// ---- report ----

std::string track_color(int id) {
  // Golden-angle hue walk keeps neighbouring ids apart.
  const double hue = std::fmod(static_cast<double>(id) * 137.508, 360.0);
  std::ostringstream s;
  s << "hsl(" << std::fixed << std::setprecision(1) << hue << ",70%,45%)";
  return s.str();
}

int report(const std::string& tracks_path, const std::string& truth_path,
           const std::string& metrics_path, const std::string& out_path, std::ostream& out) {
  std::istringstream tin(io::read_text(tracks_path));
  const io::TrackStream ts = io::read_tracks(tin);
  std::vector<GroundTruthFrame> truth;
  if (!truth_path.empty()) {
    std::istringstream gin(io::read_text(truth_path));
    truth = io::read_truth(gin).frames;
  }
  std::string caption;
  if (!metrics_path.empty()) {
    try {
      const auto j = nlohmann::json::parse(io::read_text(metrics_path));
      std::ostringstream s;
      s << std::fixed << std::setprecision(3) << "AMOTA " << j.at("amota").get<double>()
        << "  IDS " << j.at("id_switches").get<int>() << "  false tracks "
        << j.at("false_tracks").get<int>();
      caption = s.str();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(0, metrics_path + ": " + e.what());
    }
  }

  std::map<int, std::vector<std::pair<double, double>>> paths, gt_paths;
  for (const auto& t : ts.tracks) paths[t.id].emplace_back(t.state.x, t.state.y);
  for (const auto& f : truth) {
    for (const auto& g : f) gt_paths[g.identity].emplace_back(g.state.x, g.state.y);
  }
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto* group : {&paths, &gt_paths}) {
    for (const auto& [_, p] : *group) {
      for (const auto& [x, y] : p) {
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
      }
    }
  }
  if (x0 > x1) x0 = y0 = -1.0, x1 = y1 = 1.0;
  const double pad = 5.0, size = 800.0;
  const double span = std::max(x1 - x0, y1 - y0) + 2 * pad;
  auto px = [&](double x) { return (x - x0 + pad) / span * size; };
  auto py = [&](double y) { return size - (y - y0 + pad) / span * size; };  // north up

  std::ostringstream svg;
  svg << std::fixed << std::setprecision(2);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\""
      << size + 30 << "\" viewBox=\"0 0 " << size << ' ' << size + 30 << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  auto polyline = [&](const std::vector<std::pair<double, double>>& p, const std::string& stroke,
                      double width, const char* extra) {
    svg << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"" << width << "\" "
        << extra << " points=\"";
    for (const auto& [x, y] : p) svg << px(x) << ',' << py(y) << ' ';
    svg << "\"/>\n";
  };
  for (const auto& [id, p] : gt_paths) polyline(p, "#bbbbbb", 6.0, "stroke-linecap=\"round\"");
  for (const auto& [id, p] : paths) {
    polyline(p, track_color(id), 1.8, "");
    svg << "<text x=\"" << px(p.back().first) + 3 << "\" y=\"" << py(p.back().second) - 3
        << "\" font-size=\"10\" fill=\"" << track_color(id) << "\">" << id << "</text>\n";
  }
  svg << "<text x=\"8\" y=\"" << size + 20 << "\" font-size=\"14\" font-family=\"monospace\">"
      << paths.size() << " tracks" << (caption.empty() ? "" : "  ") << caption << "</text>\n"
      << "</svg>\n";
  const std::string text = svg.str();
  io::write_atomic(out_path, [&](std::ostream& f) { f << text; });
  out << "wrote " << out_path << "\n";
  return kOk;
}

// ---- benchmark ----

struct BenchArgs {
  std::string study = "crossing", out;
  int seeds = 20;
  int train_seeds = -1;
  std::uint64_t seed = 0;
  int parallel = 1;
};

int benchmark(const BenchArgs& a, std::ostream& out) {
  StudyOptions o = a.study == "clutter" ? clutter_defaults() : StudyOptions{};
  if (a.study != "clutter" && a.study != "crossing") {
    throw UsageError("--study must be 'crossing' or 'clutter'");
  }
  o.eval_seeds = a.seeds;
  if (a.train_seeds > 0) o.train_seeds = a.train_seeds;
  o.model_seed = a.seed;
  o.threads = a.parallel;
  const Study s = a.study == "clutter" ? clutter_study(o) : crossing_study(o);
  const char* left = a.study == "clutter" ? "always_init" : "baseline";
  const char* right = a.study == "clutter" ? "learned_init" : "learned";

  std::ostringstream table;
  table << "seed\t" << left << "_ids\t" << right << "_ids\t" << left << "_amota\t" << right
        << "_amota\t" << left << "_false_tracks\t" << right << "_false_tracks\n";
  for (const auto& r : s.rows) {
    table << r.seed << '\t' << r.baseline_ids << '\t' << r.learned_ids << '\t' << r.baseline_amota
          << '\t' << r.learned_amota << '\t' << r.baseline_false_tracks << '\t'
          << r.learned_false_tracks << '\n';
  }
  table << "total\t" << s.baseline_ids() << '\t' << s.learned_ids() << '\t' << s.baseline_amota()
        << '\t' << s.learned_amota() << '\t' << s.baseline_false_tracks() << '\t'
        << s.learned_false_tracks() << '\n';
  if (a.out.empty()) {
    out << table.str();
  } else {
    io::write_atomic(a.out, [&](std::ostream& f) { f << table.str(); });
  }
  out << a.study << ": " << right << " not worse on " << s.learned_not_worse() << "/"
      << s.rows.size() << " seeds; " << s.total_seconds << " s\n";
  return kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Tracking-by-detection toolkit with learned association and track initialization",
               "mmot"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Generate synthetic scenarios");
  c_sim->add_option("--config", sim.config, "Run config (JSON)");
  c_sim->add_option("--seed", sim.seed, "Scenario seed");
  c_sim->add_option("--out", sim.out, "Output directory")->required();
  c_sim->add_flag("--crossing", sim.crossing, "Generate the crossing benchmark");
  c_sim->add_option("--sequences", sim.sequences, "Number of sequences (seeds seed, seed+1, ...)");
  c_sim->add_option("--parallel", sim.parallel, "Worker threads");

  std::vector<std::string> noise_dirs;
  std::string noise_out;
  auto* c_noise = app.add_subcommand("estimate-noise", "Estimate per-class Q and R");
  c_noise->add_option("scenarios", noise_dirs, "Scenario directories")->required();
  c_noise->add_option("--out", noise_out, "Noise suite file (JSON)")->required();

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train the learned modules");
  c_train->add_option("scenarios", tr.dirs, "Scenario directories")->required();
  c_train->add_option("--stage", tr.stage, "1, 2, init or all");
  c_train->add_option("--config", tr.config, "Run config (JSON)");
  c_train->add_option("--noise", tr.noise, "Noise suite file; overrides the config");
  c_train->add_option("--checkpoints", tr.checkpoints, "Model directory to continue from");
  c_train->add_option("--seed", tr.seed, "Initialization and shuffling seed");
  c_train->add_option("--out", tr.out, "Output model directory")->required();
  c_train->add_option("--parallel", tr.parallel, "Worker threads for data preparation");

  TrackArgs tk;
  auto* c_track = app.add_subcommand("track", "Track one detection file");
  c_track->add_option("--detections", tk.detections, "Detection file")->required();
  c_track->add_option("--config", tk.config, "Run config (JSON)");
  c_track->add_option("--noise", tk.noise, "Noise suite file; overrides the config");
  c_track->add_option("--checkpoints", tk.checkpoints, "Model directory; omit for Mahalanobis only");
  c_track->add_option("--policy", tk.policy, "always, count, count:K or learned");
  c_track->add_option("--gate", tk.gate, "Association gate");
  c_track->add_option("--classes", tk.classes, "Comma-separated classes to track");
  c_track->add_option("--out", tk.out, "Track file")->required();

  std::string ev_tracks, ev_truth, ev_classes, ev_out;
  auto* c_eval = app.add_subcommand("evaluate", "Score a track file against ground truth");
  c_eval->add_option("--tracks", ev_tracks, "Track file")->required();
  c_eval->add_option("--truth", ev_truth, "Ground-truth file")->required();
  c_eval->add_option("--classes", ev_classes, "Comma-separated classes to score");
  c_eval->add_option("--out", ev_out, "Metrics report (JSON); stdout when omitted");

  std::string rp_tracks, rp_truth, rp_metrics, rp_out;
  auto* c_report = app.add_subcommand("report", "Bird's-eye-view SVG of the trajectories");
  c_report->add_option("--tracks", rp_tracks, "Track file")->required();
  c_report->add_option("--truth", rp_truth, "Ground-truth file, drawn underneath");
  c_report->add_option("--metrics", rp_metrics, "Metrics report for the caption");
  c_report->add_option("--out", rp_out, "SVG file")->required();

  BenchArgs bn;
  auto* c_bench = app.add_subcommand("benchmark", "Baseline against learned over many seeds");
  c_bench->add_option("--study", bn.study, "crossing or clutter");
  c_bench->add_option("--seeds", bn.seeds, "Evaluation seeds");
  c_bench->add_option("--train-seeds", bn.train_seeds, "Training seeds");
  c_bench->add_option("--seed", bn.seed, "Model seed");
  c_bench->add_option("--parallel", bn.parallel, "Worker threads");
  c_bench->add_option("--out", bn.out, "Summary table (TSV); stdout when omitted");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*c_sim) return simulate(sim, out);
    if (*c_noise) return estimate_noise_cmd(noise_dirs, noise_out, out);
    if (*c_train) return train(tr, out);
    if (*c_track) return track(tk, out);
    if (*c_eval) return evaluate_cmd(ev_tracks, ev_truth, ev_classes, ev_out, out);
    if (*c_report) return report(rp_tracks, rp_truth, rp_metrics, rp_out, out);
    if (*c_bench) return benchmark(bn, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const FileAccessError& e) {
    err << "file error: " << e.what() << "\n";
    return kFileAccess;
  } catch (const FormatError& e) {
    err << "input error: " << e.what() << "\n";
    return kInputFormat;
  } catch (const DimensionMismatch& e) {
    err << "dimension mismatch: " << e.what() << "\n";
    return kDimensionMismatch;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kNumerical;
  } catch (const fs::filesystem_error& e) {
    err << "file error: " << e.what() << "\n";
    return kFileAccess;
  } catch (const std::invalid_argument& e) {
    err << "input error: " << e.what() << "\n";
    return kInputFormat;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return kUsage;
}

}  // namespace mmot::app
