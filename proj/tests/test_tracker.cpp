#include "geosim/tracker.hpp"

#include <gtest/gtest.h>

#include <random>

#include "geosim/hungarian.hpp"

namespace geosim {
namespace {

Contact contact_at(const Vec3& position, const Mat3& cov, double t,
                   ObjectClass cls = ObjectClass::person) {
  Contact c;
  c.position_utm = position;
  c.covariance_utm = cov;
  c.class_label = cls;
  c.timestamp = t;
  return c;
}

Track track_at(const Vec3& mean, const Mat3& cov, int id = 1,
               ObjectClass cls = ObjectClass::person) {
  Track t;
  t.track_id = id;
  t.mean_utm = mean;
  t.covariance = cov;
  t.class_label = cls;
  t.match_times = {0.0};
  return t;
}

Mat3 random_spd(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Mat3 a;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) a(i, j) = u(rng);
  }
  return a * a.transpose() + 0.05 * Mat3::Identity();
}

TEST(Predict, IdentityForAnyDt) {
  const Track t = track_at(Vec3(1, 2, 3), 2.5 * Mat3::Identity());
  const Track after = predict(t, 5.0);
  EXPECT_EQ(after.mean_utm, t.mean_utm);
  EXPECT_EQ(after.covariance, t.covariance);

  const Track zero = predict(t, 0.0);
  EXPECT_EQ(zero.mean_utm, t.mean_utm);

  Track chained = t;
  for (int i = 0; i < 100; ++i) chained = predict(chained, 0.37);
  EXPECT_EQ(chained.mean_utm, t.mean_utm);
  EXPECT_EQ(chained.covariance, t.covariance);
}

TEST(Predict, NegativeDtThrows) {
  const Track t = track_at(Vec3::Zero(), Mat3::Identity());
  EXPECT_THROW(predict(t, -0.1), std::invalid_argument);
}

TEST(Update, SymmetricCaseHalvesCovariance) {
  const Track t = track_at(Vec3::Zero(), 4.0 * Mat3::Identity());
  const Contact z = contact_at(Vec3(2, 0, 0), 4.0 * Mat3::Identity(), 1.0);
  const Track after = update(t, z);
  EXPECT_NEAR((after.mean_utm - Vec3(1, 0, 0)).norm(), 0.0, 1e-12);
  EXPECT_NEAR((after.covariance - 2.0 * Mat3::Identity()).norm(), 0.0, 1e-12);
  ASSERT_EQ(after.match_times.size(), 2u);
  EXPECT_DOUBLE_EQ(after.match_times.back(), 1.0);
  EXPECT_DOUBLE_EQ(after.last_update, 1.0);
}

TEST(Update, UninformativeMeasurementLeavesMean) {
  const Track t = track_at(Vec3(1, 1, 1), Mat3::Identity());
  const Contact z = contact_at(Vec3(100, -50, 3), 1e12 * Mat3::Identity(), 1.0);
  const Track after = update(t, z);
  EXPECT_NEAR((after.mean_utm - t.mean_utm).norm(), 0.0, 1e-6);
  EXPECT_NEAR((after.covariance - t.covariance).norm(), 0.0, 1e-6);
}

TEST(Update, MatchesDenseMatrixOracle) {
  // Anisotropic R from the range-aligned covariance law at r = 100.
  std::mt19937_64 rng(5);
  const Track t = track_at(Vec3(100, 0, 0), 2.0 * Mat3::Identity());
  const Vec3 bearing = Vec3(1, 0.2, 0.1).normalized();
  const Vec3 c2 = bearing.cross(Vec3::UnitZ()).normalized();
  const Vec3 c3 = bearing.cross(c2);
  Mat3 rot;
  rot.col(0) = bearing;
  rot.col(1) = c2;
  rot.col(2) = c3;
  Vec3 diag(4e-3 * 1e4, 1e-4 * 1e4, 1e-4 * 1e4);
  const Mat3 r_cov = rot * diag.asDiagonal() * rot.transpose();
  const Contact z = contact_at(Vec3(101, 1, 0.5), r_cov, 2.0);

  const Track after = update(t, z);

  // Generic textbook implementation with a plain inverse.
  const Mat3 gain = t.covariance * (t.covariance + r_cov).inverse();
  const Vec3 mean = t.mean_utm + gain * (z.position_utm - t.mean_utm);
  const Mat3 cov = (Mat3::Identity() - gain) * t.covariance;
  EXPECT_NEAR((after.mean_utm - mean).norm(), 0.0, 1e-9);
  EXPECT_NEAR((after.covariance - cov).norm(), 0.0, 1e-9);

  // Posterior shrinks most along the bearing-orthogonal axes, where the
  // measurement is tight.
  const double along = bearing.dot(after.covariance * bearing);
  const double across = c2.dot(after.covariance * c2);
  EXPECT_LT(across, along);
}

TEST(Update, SingularInnovationCovarianceThrows) {
  const Track t = track_at(Vec3::Zero(), Mat3::Zero());
  const Contact z = contact_at(Vec3(1, 0, 0), Mat3::Zero(), 1.0);
  EXPECT_THROW(update(t, z), std::runtime_error);
}

TEST(Update, InformationFormOracleOnRandomSpd) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int i = 0; i < 1000; ++i) {
    const Mat3 p = random_spd(rng);
    const Mat3 r = random_spd(rng);
    const Track t = track_at(Vec3(u(rng), u(rng), u(rng)), p);
    const Contact z = contact_at(Vec3(u(rng), u(rng), u(rng)), r, 1.0);
    const Track after = update(t, z);

    const Mat3 info_expected = p.inverse() + r.inverse();
    const Mat3 info_actual = after.covariance.inverse();
    EXPECT_NEAR((info_actual - info_expected).norm(), 0.0,
                info_expected.norm() * 1e-6);

    // Symmetric PSD and contraction in trace.
    EXPECT_NEAR((after.covariance - after.covariance.transpose()).norm(), 0.0,
                1e-9);
    Eigen::SelfAdjointEigenSolver<Mat3> eig(after.covariance);
    EXPECT_GT(eig.eigenvalues().minCoeff(), -1e-12);
    EXPECT_LT(after.covariance.trace(), p.trace());
  }
}

TEST(Hungarian, MatchesBruteForceOnRandomMatrices) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(u(rng)) % 5;
    std::vector<std::vector<double>> cost(n, std::vector<double>(n));
    for (auto& row : cost) {
      for (double& c : row) c = u(rng);
    }
    const std::vector<int> assignment = solve_assignment(cost);

    double actual = 0.0;
    for (int i = 0; i < n; ++i) actual += cost[i][assignment[i]];

    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    double best = 1e18;
    do {
      double total = 0.0;
      for (int i = 0; i < n; ++i) total += cost[i][perm[i]];
      best = std::min(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    EXPECT_NEAR(actual, best, 1e-9);
  }
}

TEST(Associate, SameClassSamePositionMatches) {
  const std::vector<Track> tracks = {track_at(Vec3::Zero(), Mat3::Identity())};
  const std::vector<Contact> contacts = {
      contact_at(Vec3::Zero(), Mat3::Identity(), 1.0)};
  const Association a = associate(tracks, contacts, LifecycleParams{});
  ASSERT_EQ(a.matches.size(), 1u);
  EXPECT_TRUE(a.unmatched_tracks.empty());
  EXPECT_TRUE(a.unmatched_contacts.empty());
}

TEST(Associate, GateRejectsDistantContact) {
  const std::vector<Track> tracks = {track_at(Vec3::Zero(), Mat3::Identity())};
  const std::vector<Contact> contacts = {
      contact_at(Vec3(1000, 0, 0), Mat3::Identity(), 1.0)};
  const Association a = associate(tracks, contacts, LifecycleParams{});
  EXPECT_TRUE(a.matches.empty());
  EXPECT_EQ(a.unmatched_tracks, std::vector<int>{0});
  EXPECT_EQ(a.unmatched_contacts, std::vector<int>{0});
}

TEST(Associate, ClassMismatchNeverPairs) {
  const std::vector<Track> tracks = {
      track_at(Vec3::Zero(), Mat3::Identity(), 1, ObjectClass::person)};
  const std::vector<Contact> contacts = {
      contact_at(Vec3::Zero(), Mat3::Identity(), 1.0, ObjectClass::e_gator)};
  const Association a = associate(tracks, contacts, LifecycleParams{});
  EXPECT_TRUE(a.matches.empty());
}

TEST(Associate, CrossedPairMinimizesTotalDistance) {
  // Two tracks and two contacts arranged so the greedy nearest choice is
  // not jointly optimal; verify against the enumeration of both assignments.
  const Mat3 eye = Mat3::Identity();
  const std::vector<Track> tracks = {track_at(Vec3(0, 0, 0), eye, 1),
                                     track_at(Vec3(2.0, 0, 0), eye, 2)};
  const std::vector<Contact> contacts = {
      contact_at(Vec3(0.9, 0, 0), eye, 1.0),
      contact_at(Vec3(-0.9, 0, 0), eye, 1.0)};
  const LifecycleParams params;

  auto d2 = [&](const Track& t, const Contact& c) {
    const Vec3 innovation = c.position_utm - t.mean_utm;
    return innovation.dot((t.covariance + c.covariance_utm).inverse() * innovation);
  };
  const double straight = d2(tracks[0], contacts[0]) + d2(tracks[1], contacts[1]);
  const double crossed = d2(tracks[0], contacts[1]) + d2(tracks[1], contacts[0]);

  const Association a = associate(tracks, contacts, params);
  double total = 0.0;
  int within_gate = 0;
  for (const auto& [ti, ci] : a.matches) {
    total += d2(tracks[ti], contacts[ci]);
    within_gate += d2(tracks[ti], contacts[ci]) <= params.gate_threshold;
  }
  EXPECT_EQ(within_gate, static_cast<int>(a.matches.size()));
  // Both full assignments are gated here; the solver must pick the cheaper.
  EXPECT_NEAR(total, std::min(straight, crossed), 1e-9);
  ASSERT_EQ(a.matches.size(), 2u);
}

LifecycleParams default_params() {
  LifecycleParams p;
  p.n_confirm = 3;
  p.max_gap = 30.0;
  p.death_timeout = 120.0;
  return p;
}

std::vector<TrackEvent> feed(TrackDatabase& db, const Vec3& position, double t) {
  const Mat3 eye = Mat3::Identity();
  return lifecycle_step(db, {contact_at(position, eye, t)}, t);
}

bool has_event(const std::vector<TrackEvent>& events, TrackEventType type,
               double time) {
  for (const TrackEvent& e : events) {
    if (e.type == type && e.time == time) return true;
  }
  return false;
}

TEST(Lifecycle, ConfirmAfterThreeTimelyMatches) {
  TrackDatabase db;
  db.params = default_params();
  auto e0 = feed(db, Vec3::Zero(), 0.0);
  EXPECT_TRUE(has_event(e0, TrackEventType::birth, 0.0));
  auto e1 = feed(db, Vec3::Zero(), 10.0);
  EXPECT_FALSE(has_event(e1, TrackEventType::confirm, 10.0));
  auto e2 = feed(db, Vec3::Zero(), 20.0);
  EXPECT_TRUE(has_event(e2, TrackEventType::confirm, 20.0));
  EXPECT_EQ(db.tracks.at(1).status, TrackStatus::confirmed);
}

TEST(Lifecycle, LongGapRestartsTheChain) {
  TrackDatabase db;
  db.params = default_params();
  feed(db, Vec3::Zero(), 0.0);
  auto e40 = feed(db, Vec3::Zero(), 40.0);  // 40 s gap > 30 s: chain restarts
  EXPECT_FALSE(has_event(e40, TrackEventType::confirm, 40.0));
  auto e50 = feed(db, Vec3::Zero(), 50.0);
  EXPECT_FALSE(has_event(e50, TrackEventType::confirm, 50.0));
  auto e60 = feed(db, Vec3::Zero(), 60.0);
  EXPECT_TRUE(has_event(e60, TrackEventType::confirm, 60.0));
}

TEST(Lifecycle, DeathAfterTimeout) {
  TrackDatabase db;
  db.params = default_params();
  feed(db, Vec3::Zero(), 0.0);
  feed(db, Vec3::Zero(), 10.0);
  feed(db, Vec3::Zero(), 20.0);
  ASSERT_EQ(db.tracks.at(1).status, TrackStatus::confirmed);

  const auto events = lifecycle_step(db, {}, 140.0);  // 120 s after last update
  EXPECT_TRUE(has_event(events, TrackEventType::death, 140.0));
  EXPECT_EQ(db.tracks.at(1).status, TrackStatus::dead);
}

TEST(Lifecycle, UnmatchedContactSpawnsCandidate) {
  TrackDatabase db;
  db.params = default_params();
  feed(db, Vec3::Zero(), 0.0);
  feed(db, Vec3(500, 0, 0), 1.0);
  EXPECT_EQ(db.tracks.size(), 2u);
  EXPECT_EQ(db.tracks.at(2).status, TrackStatus::candidate);
}

TEST(Lifecycle, BatchEqualsIncrementalProcessing) {
  const Mat3 eye = Mat3::Identity();
  std::vector<Contact> stream;
  for (int i = 0; i < 8; ++i) {
    stream.push_back(contact_at(Vec3(0.1 * i, 0, 0), eye, 5.0 * i));
    stream.push_back(
        contact_at(Vec3(300 + 0.1 * i, 0, 0), eye, 5.0 * i, ObjectClass::e_gator));
  }

  TrackDatabase batch;
  batch.params = default_params();
  lifecycle_step(batch, stream, 35.0);

  TrackDatabase incremental;
  incremental.params = default_params();
  for (int i = 0; i < 8; ++i) {
    std::vector<Contact> group = {stream[2 * i], stream[2 * i + 1]};
    lifecycle_step(incremental, group, 5.0 * i);
  }
  lifecycle_step(incremental, {}, 35.0);

  ASSERT_EQ(batch.tracks.size(), incremental.tracks.size());
  for (const auto& [id, track] : batch.tracks) {
    const Track& other = incremental.tracks.at(id);
    EXPECT_EQ(track.status, other.status);
    EXPECT_EQ(track.match_times, other.match_times);
    EXPECT_NEAR((track.mean_utm - other.mean_utm).norm(), 0.0, 1e-15);
    EXPECT_NEAR((track.covariance - other.covariance).norm(), 0.0, 1e-15);
  }
}

TEST(Lifecycle, AssociationExclusivityProperty) {
  // Two well-separated objects; every contact gates to exactly one track.
  TrackDatabase db;
  db.params = default_params();
  const Mat3 eye = Mat3::Identity();
  std::mt19937_64 rng(31);
  std::normal_distribution<double> jitter(0.0, 0.2);
  for (int i = 0; i < 10; ++i) {
    std::vector<Contact> contacts = {
        contact_at(Vec3(jitter(rng), jitter(rng), 0), eye, 3.0 * i),
        contact_at(Vec3(200 + jitter(rng), jitter(rng), 0), eye, 3.0 * i)};
    lifecycle_step(db, contacts, 3.0 * i);
  }

  std::vector<Track> confirmed = db.confirmed();
  ASSERT_EQ(confirmed.size(), 2u);
  for (std::size_t i = 0; i < confirmed.size(); ++i) {
    for (std::size_t j = i + 1; j < confirmed.size(); ++j) {
      if (confirmed[i].class_label != confirmed[j].class_label) continue;
      const Mat3 s = confirmed[i].covariance + confirmed[j].covariance;
      const Vec3 d = confirmed[i].mean_utm - confirmed[j].mean_utm;
      EXPECT_GT(d.dot(s.inverse() * d), db.params.gate_threshold);
    }
  }
}

TEST(Lifecycle, ImmediateConfirmWhenNIsOne) {
  TrackDatabase db;
  db.params = default_params();
  db.params.n_confirm = 1;
  const auto events = feed(db, Vec3::Zero(), 0.0);
  EXPECT_TRUE(has_event(events, TrackEventType::birth, 0.0));
  EXPECT_TRUE(has_event(events, TrackEventType::confirm, 0.0));
}

}  // namespace
}  // namespace geosim
