#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "geosim/fusion.hpp"

namespace geosim {

enum class TrackStatus : std::uint8_t { candidate, confirmed, dead };

/// Static-object track. The filter is constant-position with zero process
/// noise, so predict never changes the state.
struct Track {
  int track_id = 0;
  Vec3 mean_utm{0.0, 0.0, 0.0};
  Mat3 covariance = Mat3::Identity();
  ObjectClass class_label = ObjectClass::person;
  TrackStatus status = TrackStatus::candidate;
  std::vector<double> match_times;
  double last_update = 0.0;
  // Length of the current qualifying chain of matches whose consecutive gaps
  // all stayed within max_gap. Restarts from 1 when a gap is exceeded.
  int chain_length = 1;
  int update_count = 1;
};

struct LifecycleParams {
  int n_confirm = 3;
  double max_gap = 30.0;
  double death_timeout = 120.0;
  // Squared-Mahalanobis gate, chi-square 99.7% at 3 DOF.
  double gate_threshold = 14.16;
};

enum class TrackEventType : std::uint8_t { birth, confirm, death };

struct TrackEvent {
  TrackEventType type;
  int track_id;
  double time;
};

struct Association {
  std::vector<std::pair<int, int>> matches;  // (track index, contact index)
  std::vector<int> unmatched_tracks;
  std::vector<int> unmatched_contacts;
};

/// Constant-position prediction: identity on mean and covariance.
/// Throws std::invalid_argument for negative dt.
Track predict(const Track& track, double dt);

/// Linear Kalman update with H = I. Joseph-form covariance for symmetry.
/// Throws std::runtime_error when P + R is numerically singular.
Track update(const Track& track, const Contact& contact);

/// One-to-one matching: class-exact, gated on squared Mahalanobis distance
/// (z-m)^T (P+R)^-1 (z-m) <= gate, minimum total distance with an
/// unmatched penalty of one gate per item.
Association associate(const std::vector<Track>& tracks,
                      const std::vector<Contact>& contacts,
                      const LifecycleParams& params);

struct TrackDatabase {
  std::map<int, Track> tracks;
  int next_id = 1;
  LifecycleParams params;

  std::vector<Track> alive() const;
  std::vector<Track> confirmed() const;
};

/// Associates a batch of contacts taken at t_now, updates matched tracks,
/// births candidates from unmatched contacts, applies the confirm chain rule
/// and the death timeout. Returns lifecycle events in deterministic order.
std::vector<TrackEvent> lifecycle_step(TrackDatabase& db,
                                       const std::vector<Contact>& contacts,
                                       double t_now);

}  // namespace geosim
