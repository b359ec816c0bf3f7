#include <gtest/gtest.h>

#include "mmot/lifecycle.hpp"

using namespace mmot;

TEST(InitMode, Parse) {
  LifecyclePolicy p;
  EXPECT_EQ(parse_init_mode("always"), InitMode::Always);
  EXPECT_EQ(parse_init_mode("learned"), InitMode::Learned);
  EXPECT_EQ(parse_init_mode("count:4", &p), InitMode::CountBased);
  EXPECT_EQ(p.confirm_hits, 4);
  EXPECT_THROW(parse_init_mode("count:0"), ConfigError);
  EXPECT_THROW(parse_init_mode("count:2x"), ConfigError);
  EXPECT_THROW(parse_init_mode("sometimes"), ConfigError);
  EXPECT_EQ(to_string(InitMode::CountBased), "count");
}

TEST(Policy, Validate) {
  LifecyclePolicy p;
  EXPECT_NO_THROW(p.validate());
  p.threshold = 1.0;
  EXPECT_THROW(p.validate(), ConfigError);
  p.threshold = 0.5;
  p.confirm_hits = 0;
  EXPECT_THROW(p.validate(), ConfigError);
  p.confirm_hits = 1;
  p.max_consecutive_misses = -1;
  EXPECT_THROW(p.validate(), ConfigError);
}

TEST(DecideInit, AlwaysStartsEverything) {
  EXPECT_EQ(decide_init(3, std::nullopt, LifecyclePolicy{}), (std::vector<int>{0, 1, 2}));
  EXPECT_TRUE(decide_init(0, std::nullopt, LifecyclePolicy{}).empty());
}

TEST(DecideInit, LearnedUsesThreshold) {
  LifecyclePolicy p;
  p.init_mode = InitMode::Learned;
  const std::vector<double> scores{0.9, 0.4};
  EXPECT_EQ(decide_init(2, std::span<const double>(scores), p), (std::vector<int>{0}));
  const std::vector<double> at{0.5};
  EXPECT_TRUE(decide_init(1, std::span<const double>(at), p).empty());
}

TEST(DecideInit, LearnedWithoutScoresIsError) {
  LifecyclePolicy p;
  p.init_mode = InitMode::Learned;
  EXPECT_THROW(decide_init(2, std::nullopt, p), ConfigError);
  const std::vector<double> one{0.9};
  EXPECT_THROW(decide_init(2, std::span<const double>(one), p), std::invalid_argument);
}

TEST(DecideInit, CountBasedStartsProvisional) {
  LifecyclePolicy p;
  p.init_mode = InitMode::CountBased;
  p.confirm_hits = 2;
  EXPECT_EQ(decide_init(2, std::nullopt, p).size(), 2u);
  EXPECT_FALSE(starts_confirmed(p));
  p.confirm_hits = 1;
  EXPECT_TRUE(starts_confirmed(p));
  EXPECT_TRUE(starts_confirmed(LifecyclePolicy{}));
}

TEST(CountBased, PromotedAfterConsecutiveHits) {
  LifecyclePolicy p;
  p.init_mode = InitMode::CountBased;
  p.confirm_hits = 3;
  Track t;
  t.confirmed = starts_confirmed(p);
  record_hit(t, 0.8, p);
  EXPECT_FALSE(t.confirmed);
  record_miss(t);
  record_hit(t, 0.8, p);
  record_hit(t, 0.8, p);
  EXPECT_FALSE(t.confirmed);  // streak broken by the miss
  record_hit(t, 0.8, p);
  EXPECT_TRUE(t.confirmed);
}

TEST(Terminate, DroppedAfterExceedingBudget) {
  LifecyclePolicy p;
  std::vector<Track> tracks(2);
  for (int k = 0; k < 4; ++k) record_miss(tracks[0]);
  for (int k = 0; k < 3; ++k) record_miss(tracks[1]);
  EXPECT_EQ(decide_terminate(tracks, p), (std::vector<int>{0}));
}

TEST(Terminate, RematchResetsCounter) {
  LifecyclePolicy p;
  Track t;
  for (int k = 0; k < 3; ++k) record_miss(t);
  record_hit(t, 0.9, p);
  EXPECT_EQ(t.consecutive_misses, 0);
  const std::vector<Track> tracks{t};
  EXPECT_TRUE(decide_terminate(tracks, p).empty());
}

TEST(Score, ExponentialAverageAndDecay) {
  LifecyclePolicy p;
  Track t;
  t.score = 0.5;
  record_hit(t, 1.0, p);
  EXPECT_DOUBLE_EQ(t.score, 0.7 + 0.3 * 0.5);
  const double before = t.score;
  record_miss(t);
  EXPECT_DOUBLE_EQ(t.score, 0.9 * before);
}
