#include <gtest/gtest.h>

#include "mmot/metrics.hpp"
#include "support.hpp"

using namespace mmot;

namespace {

GroundTruthBox gt(int id, double x, double y = 0.0) {
  GroundTruthBox g;
  g.identity = id;
  g.class_id = 1;
  g.state.x = x;
  g.state.y = y;
  return g;
}

FrameCounts counts(int tp, int fp, int fn, int ids, int p) { return {tp, fp, fn, ids, p}; }

}  // namespace

TEST(ClearMot, PerfectHypotheses) {
  ClearMotMatcher m;
  const std::vector<GroundTruthBox> truth{gt(1, 0), gt(2, 10)};
  const std::vector<HypothesisBox> hyp{{5, 0.1, 0, 1}, {6, 10.1, 0, 1}};
  for (int f = 0; f < 3; ++f) EXPECT_EQ(m.match_frame(truth, hyp), counts(2, 0, 0, 0, 2));
}

TEST(ClearMot, MissedObject) {
  ClearMotMatcher m;
  const std::vector<GroundTruthBox> truth{gt(1, 0)};
  EXPECT_EQ(m.match_frame(truth, {}), counts(0, 0, 1, 0, 1));
}

TEST(ClearMot, GateIsTwoMeters) {
  ClearMotMatcher m;
  const std::vector<GroundTruthBox> truth{gt(1, 0)};
  const std::vector<HypothesisBox> far{{5, 2.01, 0, 1}};
  EXPECT_EQ(m.match_frame(truth, far), counts(0, 1, 1, 0, 1));
  const std::vector<HypothesisBox> near{{5, 1.99, 0, 1}};
  EXPECT_EQ(m.match_frame(truth, near), counts(1, 0, 0, 0, 1));
}

TEST(ClearMot, CrossingSwapCountsTwoSwitches) {
  ClearMotMatcher m;
  const std::vector<GroundTruthBox> truth{gt(1, 0, 0), gt(2, 0, 10)};
  const std::vector<HypothesisBox> before{{7, 0, 0, 1}, {8, 0, 10, 1}};
  const std::vector<HypothesisBox> after{{7, 0, 10, 1}, {8, 0, 0, 1}};
  FrameCounts total;
  total += m.match_frame(truth, before);
  total += m.match_frame(truth, after);
  total += m.match_frame(truth, after);
  EXPECT_EQ(total.ids, 2);
  EXPECT_EQ(total.tp, 6);
}

TEST(ClearMot, ContinuationBeatsCloserHypothesis) {
  ClearMotMatcher m;
  const std::vector<GroundTruthBox> truth{gt(1, 0)};
  const std::vector<HypothesisBox> f0{{7, 0.0, 0, 1}};
  m.match_frame(truth, f0);
  const std::vector<HypothesisBox> f1{{8, 0.1, 0, 1}, {7, 1.5, 0, 1}};
  std::vector<std::pair<int, int>> matched;
  const FrameCounts c = m.match_frame(truth, f1, &matched);
  EXPECT_EQ(c.ids, 0);
  EXPECT_EQ(c.fp, 1);
  ASSERT_EQ(matched.size(), 1u);
  EXPECT_EQ(matched[0].second, 7);
}

TEST(Mota, Formula) {
  EXPECT_DOUBLE_EQ(mota(counts(0, 2, 3, 1, 20)), 0.7);
  EXPECT_DOUBLE_EQ(mota(counts(20, 0, 0, 0, 20)), 1.0);
  EXPECT_DOUBLE_EQ(mota(counts(0, 0, 20, 0, 20)), 0.0);
  EXPECT_THROW(mota(counts(0, 0, 0, 0, 0)), std::invalid_argument);
}

TEST(Motar, Formula) {
  EXPECT_DOUBLE_EQ(motar(counts(5, 0, 5, 0, 10), 0.5), 1.0);
  EXPECT_DOUBLE_EQ(motar(counts(5, 2, 5, 0, 10), 0.5), 0.6);
  EXPECT_DOUBLE_EQ(motar(counts(5, 20, 5, 0, 10), 0.5), 0.0);
  EXPECT_THROW(motar(counts(5, 0, 5, 0, 10), 0.0), std::invalid_argument);
}

TEST(Amota, PerfectTrackingIsOne) {
  std::vector<GroundTruthFrame> truth;
  std::vector<std::vector<HypothesisBox>> hyp;
  for (int f = 0; f < 5; ++f) {
    truth.push_back({gt(1, f), gt(2, 20 + f)});
    hyp.push_back({{1, f + 0.1, 0, 0.9}, {2, 20.0 + f, 0, 0.8}});
  }
  const AmotaResult r = amota(truth, hyp);
  EXPECT_DOUBLE_EQ(r.amota, 1.0);
  EXPECT_DOUBLE_EQ(r.mota, 1.0);
  EXPECT_EQ(r.points.size(), 39u);
  EXPECT_EQ(r.false_tracks, 0);
}

TEST(Amota, NoHypothesesIsZero) {
  std::vector<GroundTruthFrame> truth{{gt(1, 0)}, {gt(1, 1)}};
  std::vector<std::vector<HypothesisBox>> hyp(2);
  const AmotaResult r = amota(truth, hyp);
  EXPECT_DOUBLE_EQ(r.amota, 0.0);
  EXPECT_DOUBLE_EQ(r.mota, 0.0);
}

TEST(Amota, EmptyTruthThrows) {
  std::vector<GroundTruthFrame> truth(3);
  std::vector<std::vector<HypothesisBox>> hyp(3);
  EXPECT_THROW(amota(truth, hyp), std::invalid_argument);
}

TEST(Amota, ScriptedSweepIsExact) {
  const auto s = support::scripted_sequence();
  const MetricsReport r = evaluate(s.truth, s.tracks, s.kFrames);
  ASSERT_EQ(r.classes.size(), 1u);
  EXPECT_DOUBLE_EQ(r.amota, support::ScriptedSequence::kAmota);
  EXPECT_DOUBLE_EQ(r.mota, support::ScriptedSequence::kMota);
  EXPECT_EQ(r.id_switches, support::ScriptedSequence::kIds);
  EXPECT_EQ(r.false_tracks, support::ScriptedSequence::kFalseTracks);

  const auto& pts = r.classes[0].result.points;
  EXPECT_DOUBLE_EQ(pts[12].threshold, 0.9);
  EXPECT_DOUBLE_EQ(pts[13].threshold, 0.8);
  EXPECT_DOUBLE_EQ(pts[25].threshold, 0.5);
  EXPECT_DOUBLE_EQ(pts[25].motar, 0.875);
  EXPECT_FALSE(pts[26].reachable);
  EXPECT_EQ(pts[38].motar, 0.0);
}

TEST(Amota, LowScoreFalsePositivesLeaveItUnchanged) {
  auto s = support::scripted_sequence();
  const double before = evaluate(s.truth, s.tracks, s.kFrames).amota;
  for (int f = 0; f < s.kFrames; ++f) {
    BoxState far;
    far.x = -80.0;
    far.y = 3.0 * f;
    s.tracks.push_back({f, 99, 1, far, 0.05});
  }
  EXPECT_EQ(evaluate(s.truth, s.tracks, s.kFrames).amota, before);
}

TEST(Evaluate, ClassMeanAndFilter) {
  std::vector<GroundTruthFrame> truth(2);
  std::vector<ReportedTrack> tracks;
  for (int f = 0; f < 2; ++f) {
    GroundTruthBox a = gt(1, 0), b = gt(2, 30);
    b.class_id = 2;
    truth[f] = {a, b};
    BoxState s;
    s.x = 0.0;
    tracks.push_back({f, 1, 1, s, 0.9});  // class 2 is never hypothesized
  }
  const MetricsReport both = evaluate(truth, tracks, 2);
  ASSERT_EQ(both.classes.size(), 2u);
  EXPECT_DOUBLE_EQ(both.amota, 0.5);
  EvalOptions only;
  only.classes = std::set<ClassId>{1};
  EXPECT_DOUBLE_EQ(evaluate(truth, tracks, 2, only).amota, 1.0);
}
