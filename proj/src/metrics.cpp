#include "mmot/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <tuple>

namespace mmot {

FrameCounts& FrameCounts::operator+=(const FrameCounts& o) {
  tp += o.tp;
  fp += o.fp;
  fn += o.fn;
  ids += o.ids;
  gt_positives += o.gt_positives;
  return *this;
}

FrameCounts ClearMotMatcher::match_frame(std::span<const GroundTruthBox> truth,
                                         std::span<const HypothesisBox> hypotheses,
                                         std::vector<std::pair<int, int>>* matched) {
  const std::size_t ng = truth.size(), nh = hypotheses.size();
  auto dist = [&](std::size_t g, std::size_t h) {
    return std::hypot(truth[g].state.x - hypotheses[h].x, truth[g].state.y - hypotheses[h].y);
  };
  std::vector<int> gt_match(ng, -1);
  std::vector<bool> hyp_used(nh, false);

  for (std::size_t g = 0; g < ng; ++g) {
    auto it = last_track_.find(truth[g].identity);
    if (it == last_track_.end()) continue;
    for (std::size_t h = 0; h < nh; ++h) {
      if (!hyp_used[h] && hypotheses[h].id == it->second && dist(g, h) <= gate_) {
        gt_match[g] = static_cast<int>(h);
        hyp_used[h] = true;
        break;
      }
    }
  }

  std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
  for (std::size_t g = 0; g < ng; ++g) {
    if (gt_match[g] >= 0) continue;
    for (std::size_t h = 0; h < nh; ++h) {
      if (hyp_used[h]) continue;
      const double d = dist(g, h);
      if (d <= gate_) pairs.emplace_back(d, g, h);
    }
  }
  std::sort(pairs.begin(), pairs.end());
  for (const auto& [d, g, h] : pairs) {
    if (gt_match[g] >= 0 || hyp_used[h]) continue;
    gt_match[g] = static_cast<int>(h);
    hyp_used[h] = true;
  }

  FrameCounts c;
  c.gt_positives = static_cast<int>(ng);
  for (std::size_t g = 0; g < ng; ++g) {
    if (gt_match[g] < 0) {
      ++c.fn;
      continue;
    }
    ++c.tp;
    const int track = hypotheses[gt_match[g]].id;
    auto [it, inserted] = last_track_.try_emplace(truth[g].identity, track);
    if (!inserted && it->second != track) {
      ++c.ids;
      it->second = track;
    }
    if (matched) matched->emplace_back(truth[g].identity, track);
  }
  c.fp = static_cast<int>(nh) - c.tp;
  return c;
}

double mota(const FrameCounts& c) {
  if (c.gt_positives <= 0) throw std::invalid_argument("mota: no ground-truth positives");
  return 1.0 - static_cast<double>(c.ids + c.fp + c.fn) / c.gt_positives;
}

double motar(const FrameCounts& c, double recall) {
  if (!(recall > 0.0 && recall <= 1.0)) throw std::invalid_argument("motar: recall outside (0, 1]");
  if (c.gt_positives <= 0) throw std::invalid_argument("motar: no ground-truth positives");
  const double p = c.gt_positives;
  const double err = c.ids + c.fp + c.fn - (1.0 - recall) * p;
  return std::max(0.0, 1.0 - err / (recall * p));
}

FrameCounts count_sequence(std::span<const GroundTruthFrame> truth,
                           std::span<const std::vector<HypothesisBox>> hypotheses,
                           double threshold, double gate, std::set<int>* matched_tracks) {
  ClearMotMatcher matcher(gate);
  FrameCounts total;
  std::vector<HypothesisBox> kept;
  std::vector<std::pair<int, int>> pairs;
  for (std::size_t f = 0; f < truth.size(); ++f) {
    kept.clear();
    if (f < hypotheses.size()) {
      for (const auto& h : hypotheses[f]) {
        if (h.score >= threshold) kept.push_back(h);
      }
    }
    pairs.clear();
    total += matcher.match_frame(truth[f], kept, matched_tracks ? &pairs : nullptr);
    if (matched_tracks) {
      for (const auto& [gid, tid] : pairs) matched_tracks->insert(tid);
    }
  }
  return total;
}

AmotaResult amota(std::span<const GroundTruthFrame> truth,
                  std::span<const std::vector<HypothesisBox>> hypotheses, int sample_points,
                  double gate) {
  if (sample_points < 2) throw std::invalid_argument("amota: need at least 2 sample points");
  int positives = 0;
  for (const auto& f : truth) positives += static_cast<int>(f.size());
  if (positives == 0) throw std::invalid_argument("amota: empty ground truth");

  std::vector<double> thresholds;
  std::set<int> ids;
  for (const auto& frame : hypotheses) {
    for (const auto& h : frame) {
      thresholds.push_back(h.score);
      ids.insert(h.id);
    }
  }
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  AmotaResult out;
  const int levels = sample_points - 1;
  out.points.resize(static_cast<std::size_t>(levels));
  for (int k = 0; k < levels; ++k) out.points[k].target = static_cast<double>(k + 1) / levels;

  int assigned = 0;
  for (double th : thresholds) {
    if (assigned == levels) break;
    const FrameCounts c = count_sequence(truth, hypotheses, th, gate);
    const double recall = static_cast<double>(c.tp) / positives;
    for (auto& p : out.points) {
      if (p.reachable || recall < p.target - 1e-12) continue;
      p.reachable = true;
      p.threshold = th;
      p.recall = recall;
      p.counts = c;
      p.motar = motar(c, recall);
      ++assigned;
    }
  }

  double sum = 0.0;
  out.mota = thresholds.empty() ? mota(FrameCounts{0, 0, positives, 0, positives})
                                : -std::numeric_limits<double>::infinity();
  for (const auto& p : out.points) {
    sum += p.motar;
    if (p.reachable) out.mota = std::max(out.mota, mota(p.counts));
  }
  out.amota = sum / levels;

  std::set<int> matched;
  const double lowest = thresholds.empty() ? 0.0 : thresholds.back();
  out.all_counts = count_sequence(truth, hypotheses, lowest, gate, &matched);
  if (!std::isfinite(out.mota)) out.mota = mota(out.all_counts);
  out.hypothesis_tracks = static_cast<int>(ids.size());
  for (int id : ids) {
    if (!matched.count(id)) ++out.false_tracks;
  }
  return out;
}

MetricsReport evaluate(std::span<const GroundTruthFrame> truth,
                       std::span<const ReportedTrack> tracks, int num_frames,
                       const EvalOptions& options) {
  if (num_frames < 0) throw std::invalid_argument("evaluate: negative frame count");
  std::set<ClassId> classes;
  for (const auto& f : truth) {
    for (const auto& g : f) {
      if (!options.classes || options.classes->count(g.class_id)) classes.insert(g.class_id);
    }
  }
  if (classes.empty()) throw std::invalid_argument("evaluate: empty ground truth");

  MetricsReport report;
  for (ClassId c : classes) {
    std::vector<GroundTruthFrame> gt(static_cast<std::size_t>(num_frames));
    std::vector<std::vector<HypothesisBox>> hyp(static_cast<std::size_t>(num_frames));
    for (std::size_t f = 0; f < truth.size() && f < gt.size(); ++f) {
      for (const auto& g : truth[f]) {
        if (g.class_id == c) gt[f].push_back(g);
      }
    }
    for (const auto& t : tracks) {
      if (t.class_id != c || t.frame < 0 || t.frame >= num_frames) continue;
      hyp[t.frame].push_back({t.id, t.state.x, t.state.y, t.score});
    }
    ClassMetrics cm;
    cm.class_id = c;
    cm.result = amota(gt, hyp, options.sample_points, options.gate);
    report.amota += cm.result.amota;
    report.mota += cm.result.mota;
    report.id_switches += cm.result.all_counts.ids;
    report.false_tracks += cm.result.false_tracks;
    report.classes.push_back(std::move(cm));
  }
  report.amota /= static_cast<double>(report.classes.size());
  report.mota /= static_cast<double>(report.classes.size());
  return report;
}

}  // namespace mmot
