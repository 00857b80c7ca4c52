#include <gtest/gtest.h>

#include <sstream>

#include "nss/observation.hpp"

using namespace nss;

namespace {

Trajectory line_trajectory(std::size_t n, int T) {
  Trajectory tr;
  tr.T = T;
  for (std::size_t i = 0; i < n; ++i) tr.t.push_back(static_cast<int>(i % (T + 2)) - 1);
  return tr;
}

}  // namespace

TEST(Sensors, EmptyAndFull) {
  const auto tr = line_trajectory(50, 4);
  const auto none = make_sensors(tr, 0.0, 1);
  EXPECT_EQ(none.n_sensors(), 0u);
  for (std::size_t i = 0; i < 50; ++i)
    for (int t = -1; t <= 4; ++t) EXPECT_EQ(obs_likelihood(none, i, t), 1.0);
  const auto all = make_sensors(tr, 1.0, 1);
  EXPECT_EQ(all.n_sensors(), 50u);
  for (std::size_t i = 0; i < 50; ++i)
    for (int t = -1; t <= 4; ++t) EXPECT_EQ(obs_likelihood(all, i, t), t == tr.t[i] ? 1.0 : 0.0);
}

TEST(Sensors, CountUsesHalfEvenRounding) {
  EXPECT_EQ(make_sensors(line_trajectory(1000, 3), 0.2, 3).n_sensors(), 200u);
  EXPECT_EQ(make_sensors(line_trajectory(5, 3), 0.5, 3).n_sensors(), 2u);  // 2.5 -> 2
  EXPECT_EQ(make_sensors(line_trajectory(7, 3), 0.5, 3).n_sensors(), 4u);  // 3.5 -> 4
  EXPECT_THROW(make_sensors(line_trajectory(5, 3), 1.5, 3), std::invalid_argument);
}

TEST(Sensors, NestedAcrossRho) {
  const auto tr = line_trajectory(200, 5);
  const auto small = make_sensors(tr, 0.1, 9), large = make_sensors(tr, 0.4, 9);
  for (std::size_t i = 0; i < 200; ++i)
    if (small.sensor_t[i]) {
      EXPECT_TRUE(large.sensor_t[i].has_value());
    }
}

TEST(Sensors, LikelihoodExample) {
  Trajectory tr{{2, 0}, 4};
  const auto o = make_sensors(tr, 1.0, 1);
  EXPECT_EQ(obs_likelihood(o, 0, 2), 1.0);
  EXPECT_EQ(obs_likelihood(o, 0, 3), 0.0);
  EXPECT_EQ(o.known_x0(0), +1);
  Trajectory src{{-1}, 2};
  EXPECT_EQ(make_sensors(src, 1.0, 1).known_x0(0), -1);
}

TEST(Sensors, TruthHasUnitLikelihood) {
  const auto tr = line_trajectory(100, 6);
  const auto o = make_sensors(tr, 0.37, 4);
  for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(obs_likelihood(o, i, tr.t[i]), 1.0);
}

TEST(Snapshot, SpecExamples) {
  SpreadParams si;
  Trajectory never{{5}, 5};
  EXPECT_EQ(make_snapshot(never, 3, si).state[0], Compartment::S);
  SpreadParams sir;
  sir.model = SpreadModel::dSIR;
  sir.delta_rec = 1;
  Trajectory early{{0}, 5};
  EXPECT_EQ(make_snapshot(early, 3, sir).state[0], Compartment::R);
  Trajectory source{{-1}, 2};
  EXPECT_EQ(make_snapshot(source, 0, si).state[0], Compartment::I);
}

TEST(Snapshot, SiBounds) {
  ObservationSet o;
  o.kind = ObservationKind::Snapshot;
  o.n_nodes = 2;
  o.t_obs = 3;
  o.state = {Compartment::S, Compartment::I};
  o.node_delta = {kNoRecovery, kNoRecovery};
  EXPECT_EQ(obs_likelihood(o, 0, 3), 1.0);
  EXPECT_EQ(obs_likelihood(o, 0, 2), 0.0);
  EXPECT_EQ(obs_likelihood(o, 1, 3), 0.0);
  EXPECT_EQ(obs_likelihood(o, 1, 2), 1.0);
  EXPECT_EQ(obs_likelihood(o, 1, -1), 1.0);
}

// Exactly one compartment is consistent with any (t, delta, t_obs).
TEST(Snapshot, CompartmentsPartition) {
  for (int delta : {1, 2, 3, kNoRecovery})
    for (int t_obs = 0; t_obs <= 6; ++t_obs)
      for (int t = -1; t <= 6; ++t) {
        int hits = 0;
        for (auto c : {Compartment::S, Compartment::I, Compartment::R}) {
          ObservationSet o;
          o.kind = ObservationKind::Snapshot;
          o.n_nodes = 1;
          o.t_obs = t_obs;
          o.state = {c};
          o.node_delta = {delta};
          hits += obs_likelihood(o, 0, t) == 1.0 ? 1 : 0;
        }
        EXPECT_EQ(hits, 1) << "t=" << t << " t_obs=" << t_obs << " delta=" << delta;
      }
}

TEST(Snapshot, TruthHasUnitLikelihood) {
  SpreadParams p;
  p.model = SpreadModel::dSIR;
  p.delta_rec = 2;
  const auto tr = line_trajectory(40, 6);
  for (int t_obs = 0; t_obs <= 6; ++t_obs) {
    const auto o = make_snapshot(tr, t_obs, p);
    for (std::size_t i = 0; i < 40; ++i) EXPECT_EQ(obs_likelihood(o, i, tr.t[i]), 1.0);
  }
}

TEST(RevealedSources, PinInitialState) {
  auto o = ObservationSet::none(2);
  o.revealed_x0 = {-1, +1};
  EXPECT_EQ(obs_likelihood(o, 0, -1), 1.0);
  EXPECT_EQ(obs_likelihood(o, 0, 0), 0.0);
  EXPECT_EQ(obs_likelihood(o, 1, -1), 0.0);
  EXPECT_EQ(obs_likelihood(o, 1, 2), 1.0);
  EXPECT_EQ(o.known_x0(0), -1);
}

TEST(ObservationIo, RoundTrip) {
  SpreadParams p;
  p.model = SpreadModel::dSIR;
  p.delta_rec = 2;
  const auto tr = line_trajectory(30, 5);
  for (const auto& o : {make_sensors(tr, 0.3, 2), make_snapshot(tr, 3, p)}) {
    std::stringstream ss;
    write_observations(ss, o);
    const auto back = read_observations(ss, p);
    EXPECT_EQ(back.kind, o.kind);
    for (std::size_t i = 0; i < 30; ++i)
      for (int t = -1; t <= 5; ++t) EXPECT_EQ(obs_likelihood(back, i, t), obs_likelihood(o, i, t));
  }
}
