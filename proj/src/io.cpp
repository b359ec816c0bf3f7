#include "mmot/io.hpp"

#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <unistd.h>

#include <json.hpp>

#include "number_text.hpp"

namespace mmot::io {

using detail::format_double;
using json = nlohmann::json;

namespace {

constexpr const char* kDetectionMagic = "mmot-detections";
constexpr const char* kTruthMagic = "mmot-truth";
constexpr const char* kTrackMagic = "mmot-tracks";
constexpr int kFormatVersion = 1;

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  // Next non-blank line, split on whitespace; false at end of input.
  bool next(std::vector<std::string_view>& tokens) {
    while (std::getline(in_, text_)) {
      ++line_;
      tokens = detail::split_ws(text_);
      if (!tokens.empty()) return true;
    }
    return false;
  }
  std::size_t line() const { return line_; }

  [[noreturn]] void fail(const std::string& what) const { throw FormatError(line_, what); }

  double number(std::string_view tok, const char* field) const {
    auto v = detail::parse_double(tok);
    if (!v) fail(std::string("bad number for ") + field + ": '" + std::string(tok) + "'");
    return *v;
  }
  long long integer(std::string_view tok, const char* field) const {
    auto v = detail::parse_int(tok);
    if (!v) fail(std::string("bad integer for ") + field + ": '" + std::string(tok) + "'");
    return *v;
  }

 private:
  std::istream& in_;
  std::string text_;
  std::size_t line_ = 0;
};

using Header = std::map<std::string, std::string>;

Header read_header(LineReader& r, const char* magic, const std::set<std::string>& required) {
  std::vector<std::string_view> tok;
  if (!r.next(tok)) throw FormatError(r.line(), std::string("empty file, expected '") + magic + "'");
  if (tok.size() != 2 || tok[0] != magic) r.fail(std::string("expected header '") + magic + " 1'");
  if (r.integer(tok[1], "format version") != kFormatVersion) {
    r.fail("unsupported format version " + std::string(tok[1]));
  }
  Header h;
  while (true) {
    if (!r.next(tok)) throw FormatError(r.line(), "missing end_header");
    if (tok.size() == 1 && tok[0] == "end_header") break;
    if (tok.size() != 2) r.fail("header lines are 'key value'");
    const std::string key(tok[0]);
    if (!required.count(key)) r.fail("unknown header key '" + key + "'");
    if (!h.emplace(key, std::string(tok[1])).second) r.fail("duplicate header key '" + key + "'");
  }
  for (const auto& k : required) {
    if (!h.count(k)) r.fail("header lacks '" + k + "'");
  }
  return h;
}

template <typename Vec>
void write_values(std::ostream& out, const Vec& v) {
  for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(v.size()); ++k) {
    out << ' ' << format_double(v[k]);
  }
}

int frame_count(LineReader& r, const Header& h) {
  const long long n = r.integer(h.at("num_frames"), "num_frames");
  if (n < 0) r.fail("num_frames must be >= 0");
  return static_cast<int>(n);
}

double frame_interval(LineReader& r, const Header& h) {
  const double dt = r.number(h.at("frame_interval"), "frame_interval");
  if (!(dt > 0.0)) r.fail("frame_interval must be positive");
  return dt;
}

// Frame index of a record: within [0, num_frames) and not below `last`.
int record_frame(LineReader& r, std::string_view tok, int num_frames, int& last) {
  const long long f = r.integer(tok, "frame");
  if (f < 0 || f >= num_frames) {
    r.fail("frame " + std::to_string(f) + " outside [0, " + std::to_string(num_frames) + ")");
  }
  if (f < last) r.fail("frames must be nondecreasing");
  last = static_cast<int>(f);
  return last;
}

}  // namespace

void write_detections(std::ostream& out, const DetectionStream& s) {
  out << kDetectionMagic << ' ' << kFormatVersion << '\n'
      << "frame_interval " << format_double(s.frame_interval) << '\n'
      << "num_frames " << s.frames.size() << '\n'
      << "feat2d " << s.features.feat2d << '\n'
      << "feat3d_channels " << s.features.feat3d_channels << '\n'
      << "end_header\n";
  for (std::size_t f = 0; f < s.frames.size(); ++f) {
    for (const auto& d : s.frames[f]) {
      if (static_cast<int>(d.feat2d.size()) != s.features.feat2d ||
          static_cast<int>(d.feat3d.size()) != s.features.feat3d_size()) {
        throw ConfigError("write_detections: feature widths disagree with the header");
      }
      out << f << ' ' << d.class_id;
      write_values(out, d.obs.vector());
      out << ' ' << format_double(d.confidence);
      write_values(out, d.feat2d);
      write_values(out, d.feat3d);
      out << '\n';
    }
  }
}

DetectionStream read_detections(std::istream& in) {
  LineReader r(in);
  const Header h =
      read_header(r, kDetectionMagic, {"frame_interval", "num_frames", "feat2d", "feat3d_channels"});
  DetectionStream s;
  s.frame_interval = frame_interval(r, h);
  const long long f2 = r.integer(h.at("feat2d"), "feat2d");
  const long long c3 = r.integer(h.at("feat3d_channels"), "feat3d_channels");
  if (f2 < 1 || c3 < 1) r.fail("feature dims must be positive");
  s.features = FeatureDims{static_cast<int>(f2), static_cast<int>(c3)};
  const int n = frame_count(r, h);
  s.frames.resize(n);

  const std::size_t width = 2 + kObsDim + 1 + s.features.feat2d + s.features.feat3d_size();
  std::vector<std::string_view> tok;
  int last = 0;
  while (r.next(tok)) {
    if (tok.size() != width) {
      r.fail("expected " + std::to_string(width) + " values, found " + std::to_string(tok.size()));
    }
    Detection d;
    d.frame = record_frame(r, tok[0], n, last);
    d.class_id = static_cast<ClassId>(r.integer(tok[1], "class"));
    ObsVector o;
    for (int k = 0; k < kObsDim; ++k) o[k] = r.number(tok[2 + k], "observation");
    d.obs = Observation::from_vector(o);
    std::size_t p = 2 + kObsDim;
    d.confidence = r.number(tok[p++], "confidence");
    d.feat2d.resize(s.features.feat2d);
    for (auto& v : d.feat2d) v = r.number(tok[p++], "feat2d");
    d.feat3d.resize(s.features.feat3d_size());
    for (auto& v : d.feat3d) v = r.number(tok[p++], "feat3d");
    s.frames[d.frame].push_back(std::move(d));
  }
  return s;
}

void write_truth(std::ostream& out, const TruthStream& s) {
  out << kTruthMagic << ' ' << kFormatVersion << '\n'
      << "frame_interval " << format_double(s.frame_interval) << '\n'
      << "num_frames " << s.frames.size() << '\n'
      << "end_header\n";
  for (std::size_t f = 0; f < s.frames.size(); ++f) {
    for (const auto& g : s.frames[f]) {
      out << f << ' ' << g.identity << ' ' << g.class_id;
      write_values(out, g.state.vector());
      out << '\n';
    }
  }
}

TruthStream read_truth(std::istream& in) {
  LineReader r(in);
  const Header h = read_header(r, kTruthMagic, {"frame_interval", "num_frames"});
  TruthStream s;
  s.frame_interval = frame_interval(r, h);
  const int n = frame_count(r, h);
  s.frames.resize(n);
  std::vector<std::set<int>> seen(n);
  std::vector<std::string_view> tok;
  int last = 0;
  while (r.next(tok)) {
    if (tok.size() != 3 + kStateDim) {
      r.fail("expected " + std::to_string(3 + kStateDim) + " values, found " +
             std::to_string(tok.size()));
    }
    const int f = record_frame(r, tok[0], n, last);
    GroundTruthBox g;
    g.identity = static_cast<int>(r.integer(tok[1], "identity"));
    g.class_id = static_cast<ClassId>(r.integer(tok[2], "class"));
    StateVector v;
    for (int k = 0; k < kStateDim; ++k) v[k] = r.number(tok[3 + k], "state");
    g.state = BoxState::from_vector(v);
    if (!seen[f].insert(g.identity).second) r.fail("identity repeated within a frame");
    s.frames[f].push_back(g);
  }
  return s;
}

void write_tracks(std::ostream& out, const TrackStream& s) {
  out << kTrackMagic << ' ' << kFormatVersion << '\n'
      << "num_frames " << s.num_frames << '\n'
      << "end_header\n";
  for (const auto& t : s.tracks) {
    out << t.frame << ' ' << t.id << ' ' << t.class_id;
    write_values(out, t.state.vector());
    out << ' ' << format_double(t.score) << '\n';
  }
}

TrackStream read_tracks(std::istream& in) {
  LineReader r(in);
  const Header h = read_header(r, kTrackMagic, {"num_frames"});
  TrackStream s;
  s.num_frames = frame_count(r, h);
  std::set<std::pair<int, int>> seen;
  std::vector<std::string_view> tok;
  int last = 0;
  while (r.next(tok)) {
    if (tok.size() != 4 + kStateDim) {
      r.fail("expected " + std::to_string(4 + kStateDim) + " values, found " +
             std::to_string(tok.size()));
    }
    ReportedTrack t;
    t.frame = record_frame(r, tok[0], s.num_frames, last);
    t.id = static_cast<int>(r.integer(tok[1], "track id"));
    t.class_id = static_cast<ClassId>(r.integer(tok[2], "class"));
    StateVector v;
    for (int k = 0; k < kStateDim; ++k) v[k] = r.number(tok[3 + k], "state");
    t.state = BoxState::from_vector(v);
    t.score = r.number(tok[3 + kStateDim], "score");
    if (!seen.emplace(t.frame, t.id).second) r.fail("(frame, id) repeated");
    s.tracks.push_back(t);
  }
  return s;
}

// ---- JSON ----

namespace {

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [k, _] : j.items()) {
    if (!allowed.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
  }
}

template <typename T>
void get_if(const json& j, const char* key, T& into) {
  if (j.contains(key)) into = j.at(key).get<T>();
}

json noise_json(const NoiseSuite& noise) {
  json out = json::object();
  for (const auto& [cls, n] : noise.entries()) {
    out[std::to_string(cls)] = {
        {"q", std::vector<double>(n.process_var.data(), n.process_var.data() + kStateDim)},
        {"r", std::vector<double>(n.observation_var.data(), n.observation_var.data() + kObsDim)},
        {"rate", {n.rate_var[0], n.rate_var[1]}}};
  }
  return out;
}

NoiseSuite noise_from(const json& j) {
  if (!j.is_object()) throw ConfigError("noise: expected an object keyed by class id");
  NoiseSuite suite;
  for (const auto& [key, entry] : j.items()) {
    auto cls = detail::parse_int(key);
    if (!cls) throw ConfigError("noise: class key '" + key + "' is not an integer");
    check_keys(entry, "noise." + key, {"q", "r", "rate"});
    const auto q = entry.at("q").get<std::vector<double>>();
    const auto r = entry.at("r").get<std::vector<double>>();
    if (q.size() != kStateDim || r.size() != kObsDim) {
      throw ConfigError("noise." + key + ": need 11 process and 9 observation variances");
    }
    ClassNoise n;
    for (int k = 0; k < kStateDim; ++k) n.process_var[k] = q[k];
    for (int k = 0; k < kObsDim; ++k) n.observation_var[k] = r[k];
    if (entry.contains("rate")) {
      const auto rate = entry.at("rate").get<std::vector<double>>();
      if (rate.size() != 2) throw ConfigError("noise." + key + ": 'rate' holds the (dz, da) variances");
      n.rate_var = {rate[0], rate[1]};
    }
    if ((n.process_var.array() < 0.0).any() || (n.observation_var.array() <= 0.0).any() ||
        (n.rate_var.array() < 0.0).any()) {
      throw ConfigError("noise." + key + ": variances must be positive");
    }
    suite.set(static_cast<ClassId>(*cls), n);
  }
  return suite;
}

json scenario_json(const ScenarioConfig& s) {
  json classes = json::array();
  for (const auto& c : s.classes) {
    classes.push_back({{"id", c.class_id}, {"count", c.count}, {"length", c.length},
                       {"width", c.width}, {"height", c.height}, {"max_speed", c.max_speed}});
  }
  return {{"classes", classes},
          {"motion",
           {{"constant_velocity", s.motion.constant_velocity},
            {"turning", s.motion.turning},
            {"stationary", s.motion.stationary}}},
          {"frames", s.frames},
          {"frame_interval", s.frame_interval},
          {"detection_noise_std",
           std::vector<double>(s.detection_noise_std.data(), s.detection_noise_std.data() + kObsDim)},
          {"miss_probability", s.miss_probability},
          {"clutter_rate", s.clutter_rate},
          {"feature_noise_std", s.feature_noise_std},
          {"identity_spread", s.identity_spread},
          {"objectness_offset", s.objectness_offset},
          {"scene_size", s.scene_size},
          {"max_turn_rate", s.max_turn_rate},
          {"birth_window", s.birth_window},
          {"seed", s.seed}};
}

void scenario_from(const json& j, ScenarioConfig& s) {
  check_keys(j, "scenario",
             {"classes", "motion", "frames", "frame_interval", "detection_noise_std",
              "miss_probability", "clutter_rate", "feature_noise_std", "identity_spread",
              "objectness_offset", "scene_size", "max_turn_rate", "birth_window", "seed"});
  if (j.contains("classes")) {
    s.classes.clear();
    for (const auto& c : j.at("classes")) {
      check_keys(c, "scenario.classes", {"id", "count", "length", "width", "height", "max_speed"});
      ClassSpec spec;
      get_if(c, "id", spec.class_id);
      get_if(c, "count", spec.count);
      get_if(c, "length", spec.length);
      get_if(c, "width", spec.width);
      get_if(c, "height", spec.height);
      get_if(c, "max_speed", spec.max_speed);
      s.classes.push_back(spec);
    }
  }
  if (j.contains("motion")) {
    const json& m = j.at("motion");
    check_keys(m, "scenario.motion", {"constant_velocity", "turning", "stationary"});
    get_if(m, "constant_velocity", s.motion.constant_velocity);
    get_if(m, "turning", s.motion.turning);
    get_if(m, "stationary", s.motion.stationary);
  }
  get_if(j, "frames", s.frames);
  get_if(j, "frame_interval", s.frame_interval);
  if (j.contains("detection_noise_std")) {
    const auto v = j.at("detection_noise_std").get<std::vector<double>>();
    if (v.size() != kObsDim) throw ConfigError("scenario.detection_noise_std: need 9 values");
    for (int k = 0; k < kObsDim; ++k) s.detection_noise_std[k] = v[k];
  }
  get_if(j, "miss_probability", s.miss_probability);
  get_if(j, "clutter_rate", s.clutter_rate);
  get_if(j, "feature_noise_std", s.feature_noise_std);
  get_if(j, "identity_spread", s.identity_spread);
  get_if(j, "objectness_offset", s.objectness_offset);
  get_if(j, "scene_size", s.scene_size);
  get_if(j, "max_turn_rate", s.max_turn_rate);
  get_if(j, "birth_window", s.birth_window);
  get_if(j, "seed", s.seed);
}

template <typename F>
auto json_guard(const char* what, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ConfigError(std::string(what) + ": " + e.what());
  }
}

}  // namespace

TrackerConfig RunConfig::tracker() const {
  TrackerConfig t;
  t.noise = noise;
  t.policy = policy;
  t.gate = gate;
  t.confidence_floor = confidence_floor;
  return t;
}

TrainConfig RunConfig::training(std::uint64_t seed) const {
  TrainConfig t;
  t.dims = dims;
  t.loss = loss;
  t.adam = adam;
  t.epochs = epochs;
  t.seed = seed;
  return t;
}

void RunConfig::validate() const {
  if (!(gate > 0.0)) throw ConfigError("gate must be positive");
  if (!(loss.gate > 0.0 && loss.contrastive_margin > 0.0 && loss.positive_margin > 0.0 &&
        loss.negative_margin > 0.0)) {
    throw ConfigError("loss constants must be positive");
  }
  if (!(adam.lr > 0.0) || !(adam.eps > 0.0) || adam.beta1 < 0.0 || adam.beta1 >= 1.0 ||
      adam.beta2 < 0.0 || adam.beta2 >= 1.0) {
    throw ConfigError("optimizer settings out of range");
  }
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (dims.features.feat2d < 1 || dims.features.feat3d_channels < 1 || dims.fusion_hidden < 1 ||
      dims.conv_channels < 1 || dims.mlp_hidden < 1) {
    throw ConfigError("network dims must be positive");
  }
  if (confidence_floor < 0.0 || confidence_floor > 1.0) {
    throw ConfigError("confidence_floor outside [0, 1]");
  }
  policy.validate();
  scenario.validate();
  if (!(scenario.features == dims.features)) {
    throw ConfigError("scenario feature dims differ from the network feature dims");
  }
}

RunConfig parse_run_config(const std::string& text) {
  return json_guard("config", [&] {
    const json j = json::parse(text);
    check_keys(j, "config",
               {"gate", "confidence_floor", "loss", "optimizer", "features", "nets", "lifecycle",
                "noise", "checkpoints", "scenario"});
    RunConfig c;
    get_if(j, "gate", c.gate);
    get_if(j, "confidence_floor", c.confidence_floor);
    if (j.contains("loss")) {
      const json& l = j.at("loss");
      check_keys(l, "loss", {"gate", "contrastive_margin", "positive_margin", "negative_margin"});
      get_if(l, "gate", c.loss.gate);
      get_if(l, "contrastive_margin", c.loss.contrastive_margin);
      get_if(l, "positive_margin", c.loss.positive_margin);
      get_if(l, "negative_margin", c.loss.negative_margin);
    }
    if (j.contains("optimizer")) {
      const json& o = j.at("optimizer");
      check_keys(o, "optimizer", {"lr", "beta1", "beta2", "eps", "epochs"});
      get_if(o, "lr", c.adam.lr);
      get_if(o, "beta1", c.adam.beta1);
      get_if(o, "beta2", c.adam.beta2);
      get_if(o, "eps", c.adam.eps);
      get_if(o, "epochs", c.epochs);
    }
    if (j.contains("features")) {
      const json& f = j.at("features");
      check_keys(f, "features", {"feat2d", "feat3d_channels"});
      get_if(f, "feat2d", c.dims.features.feat2d);
      get_if(f, "feat3d_channels", c.dims.features.feat3d_channels);
    }
    c.scenario.features = c.dims.features;
    if (j.contains("nets")) {
      const json& n = j.at("nets");
      check_keys(n, "nets", {"fusion_hidden", "conv_channels", "mlp_hidden"});
      get_if(n, "fusion_hidden", c.dims.fusion_hidden);
      get_if(n, "conv_channels", c.dims.conv_channels);
      get_if(n, "mlp_hidden", c.dims.mlp_hidden);
    }
    if (j.contains("lifecycle")) {
      const json& l = j.at("lifecycle");
      check_keys(l, "lifecycle", {"init", "confirm_hits", "threshold", "max_misses"});
      get_if(l, "confirm_hits", c.policy.confirm_hits);
      get_if(l, "threshold", c.policy.threshold);
      get_if(l, "max_misses", c.policy.max_consecutive_misses);
      if (l.contains("init")) {
        try {
          c.policy.init_mode = parse_init_mode(l.at("init").get<std::string>(), &c.policy);
        } catch (const std::invalid_argument& e) {
          throw ConfigError(std::string("lifecycle.init: ") + e.what());
        }
      }
    }
    if (j.contains("noise")) c.noise = noise_from(j.at("noise"));
    if (j.contains("checkpoints")) c.checkpoints = j.at("checkpoints").get<std::string>();
    if (j.contains("scenario")) scenario_from(j.at("scenario"), c.scenario);
    c.validate();
    return c;
  });
}

std::string dump_run_config(const RunConfig& c) {
  json j = {
      {"gate", c.gate},
      {"confidence_floor", c.confidence_floor},
      {"loss",
       {{"gate", c.loss.gate},
        {"contrastive_margin", c.loss.contrastive_margin},
        {"positive_margin", c.loss.positive_margin},
        {"negative_margin", c.loss.negative_margin}}},
      {"optimizer",
       {{"lr", c.adam.lr},
        {"beta1", c.adam.beta1},
        {"beta2", c.adam.beta2},
        {"eps", c.adam.eps},
        {"epochs", c.epochs}}},
      {"features",
       {{"feat2d", c.dims.features.feat2d}, {"feat3d_channels", c.dims.features.feat3d_channels}}},
      {"nets",
       {{"fusion_hidden", c.dims.fusion_hidden},
        {"conv_channels", c.dims.conv_channels},
        {"mlp_hidden", c.dims.mlp_hidden}}},
      {"lifecycle",
       {{"init", to_string(c.policy.init_mode)},
        {"confirm_hits", c.policy.confirm_hits},
        {"threshold", c.policy.threshold},
        {"max_misses", c.policy.max_consecutive_misses}}},
      {"noise", noise_json(c.noise)},
      {"scenario", scenario_json(c.scenario)},
  };
  if (c.checkpoints) j["checkpoints"] = *c.checkpoints;
  return j.dump(2) + "\n";
}

std::string dump_noise(const NoiseSuite& noise) { return noise_json(noise).dump(2) + "\n"; }

NoiseSuite parse_noise(const std::string& text) {
  return json_guard("noise", [&] { return noise_from(json::parse(text)); });
}

std::string dump_metrics(const MetricsReport& report) {
  auto finite = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  json classes = json::array();
  for (const auto& c : report.classes) {
    const auto& r = c.result;
    json points = json::array();
    for (const auto& p : r.points) {
      points.push_back({{"target", p.target},
                        {"reachable", p.reachable},
                        {"threshold", p.threshold},
                        {"recall", p.recall},
                        {"motar", p.motar}});
    }
    classes.push_back({{"class", c.class_id},
                       {"amota", r.amota},
                       {"mota", finite(r.mota)},
                       {"tp", r.all_counts.tp},
                       {"fp", r.all_counts.fp},
                       {"fn", r.all_counts.fn},
                       {"id_switches", r.all_counts.ids},
                       {"gt_positives", r.all_counts.gt_positives},
                       {"hypothesis_tracks", r.hypothesis_tracks},
                       {"false_tracks", r.false_tracks},
                       {"points", points}});
  }
  json j = {{"amota", report.amota},
            {"mota", finite(report.mota)},
            {"id_switches", report.id_switches},
            {"false_tracks", report.false_tracks},
            {"classes", classes}};
  return j.dump(2) + "\n";
}

void write_telemetry(std::ostream& out, const std::vector<EpochRecord>& records) {
  out << "stage\tepoch\tloss\tmetric\n";
  for (const auto& r : records) {
    out << to_string(r.stage) << '\t' << r.epoch << '\t' << format_double(r.loss) << '\t'
        << format_double(r.metric) << '\n';
  }
}

// ---- files ----

void write_atomic(const std::filesystem::path& path,
                  const std::function<void(std::ostream&)>& writer) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FileAccessError("cannot write " + tmp.string());
    writer(out);
    out.flush();
    if (!out) {
      std::filesystem::remove(tmp);
      throw FileAccessError("write failed: " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileAccessError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

const char* const kNetFiles[] = {"g1.ckpt", "g2.ckpt", "g3.ckpt", "g4.ckpt"};

std::map<std::string, std::string> dims_metadata(const NetDims& d) {
  return {{"feat2d", std::to_string(d.features.feat2d)},
          {"feat3d_channels", std::to_string(d.features.feat3d_channels)},
          {"fusion_hidden", std::to_string(d.fusion_hidden)},
          {"conv_channels", std::to_string(d.conv_channels)},
          {"mlp_hidden", std::to_string(d.mlp_hidden)}};
}

NetDims dims_from(const std::map<std::string, std::string>& meta, const std::string& file) {
  auto get = [&](const char* key) {
    auto it = meta.find(key);
    if (it == meta.end()) throw ConfigError(file + ": checkpoint lacks '" + key + "'");
    auto v = detail::parse_int(it->second);
    if (!v || *v < 1) throw ConfigError(file + ": bad value for '" + key + "'");
    return static_cast<int>(*v);
  };
  NetDims d;
  d.features = FeatureDims{get("feat2d"), get("feat3d_channels")};
  d.fusion_hidden = get("fusion_hidden");
  d.conv_channels = get("conv_channels");
  d.mlp_hidden = get("mlp_hidden");
  return d;
}

}  // namespace

void save_models(const std::filesystem::path& dir, const LearnedModels& m) {
  const auto meta = dims_metadata(m.dims);
  const std::pair<const nn::Network*, const nn::ParamStore*> nets[] = {
      {&m.fusion, &m.fusion_params},
      {&m.feature_distance, &m.feature_distance_params},
      {&m.coefficients, &m.coefficient_params},
      {&m.init, &m.init_params}};
  for (int k = 0; k < 4; ++k) {
    write_atomic(dir / kNetFiles[k], [&](std::ostream& out) {
      nn::save_checkpoint(out, nets[k].first->name(), meta, *nets[k].second);
    });
  }
}

LearnedModels load_models(const std::filesystem::path& dir,
                          const std::optional<FeatureDims>& expected) {
  std::vector<nn::Checkpoint> cks;
  std::optional<NetDims> dims;
  for (const char* file : kNetFiles) {
    std::istringstream in(read_text(dir / file));
    cks.push_back(nn::load_checkpoint(in));
    const NetDims d = dims_from(cks.back().metadata, file);
    if (dims && !(*dims == d)) throw DimensionMismatch(std::string(file) + ": dims differ from g1.ckpt");
    dims = d;
  }
  if (expected && !(dims->features == *expected)) {
    throw DimensionMismatch("checkpoint feature dims (" + std::to_string(dims->features.feat2d) + ", " +
                      std::to_string(dims->features.feat3d_channels) +
                      ") do not match input (" + std::to_string(expected->feat2d) + ", " +
                      std::to_string(expected->feat3d_channels) + ")");
  }
  LearnedModels m;
  m.dims = *dims;
  m.fusion = make_fusion_net(m.dims);
  m.feature_distance = make_feature_distance_net(m.dims);
  m.coefficients = make_coefficient_net(m.dims);
  m.init = make_init_net(m.dims);
  const nn::Network* nets[] = {&m.fusion, &m.feature_distance, &m.coefficients, &m.init};
  nn::ParamStore* stores[] = {&m.fusion_params, &m.feature_distance_params, &m.coefficient_params,
                              &m.init_params};
  for (int k = 0; k < 4; ++k) {
    if (cks[k].net_name != nets[k]->name()) {
      throw ConfigError(std::string(kNetFiles[k]) + ": holds net '" + cks[k].net_name + "'");
    }
    nets[k]->check_params(cks[k].params);
    *stores[k] = std::move(cks[k].params);
  }
  return m;
}

void write_scenario(const std::filesystem::path& dir, const Scenario& sc) {
  DetectionStream ds{sc.config.frame_interval, sc.config.features, sc.detections};
  TruthStream ts{sc.config.frame_interval, sc.truth};
  write_atomic(dir / "detections.txt", [&](std::ostream& out) { write_detections(out, ds); });
  write_atomic(dir / "truth.txt", [&](std::ostream& out) { write_truth(out, ts); });
}

LabeledSequence read_sequence(const std::filesystem::path& dir) {
  std::istringstream din(read_text(dir / "detections.txt"));
  std::istringstream tin(read_text(dir / "truth.txt"));
  DetectionStream ds = read_detections(din);
  TruthStream ts = read_truth(tin);
  if (ds.frames.size() != ts.frames.size()) {
    throw FormatError(0, dir.string() + ": detection and truth frame counts differ");
  }
  return {std::move(ts.frames), std::move(ds.frames)};
}

}  // namespace mmot::io
