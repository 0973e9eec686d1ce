#include "geosim/tracker.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "geosim/hungarian.hpp"

namespace geosim {
namespace {

constexpr double kForbidden = 1e12;

double squared_mahalanobis(const Track& track, const Contact& contact) {
  const Mat3 s = track.covariance + contact.covariance_utm;
  const Eigen::LLT<Mat3> llt(s);
  if (llt.info() != Eigen::Success) return kForbidden;
  const Vec3 innovation = contact.position_utm - track.mean_utm;
  return innovation.dot(llt.solve(innovation));
}

}  // namespace

Track predict(const Track& track, double dt) {
  if (dt < 0.0) throw std::invalid_argument("predict: dt must be non-negative");
  // Constant position, zero process noise: the state is untouched.
  return track;
}

Track update(const Track& track, const Contact& contact) {
  const Mat3 s = track.covariance + contact.covariance_utm;
  const Eigen::LLT<Mat3> llt(s);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("update: P + R is numerically singular");
  }
  const Mat3 gain = llt.solve(track.covariance).transpose();  // P (P+R)^-1

  Track out = track;
  out.mean_utm = track.mean_utm + gain * (contact.position_utm - track.mean_utm);
  const Mat3 i_k = Mat3::Identity() - gain;
  Mat3 p = i_k * track.covariance * i_k.transpose() +
           gain * contact.covariance_utm * gain.transpose();
  out.covariance = (p + p.transpose()) / 2.0;
  out.match_times.push_back(contact.timestamp);
  out.last_update = std::max(track.last_update, contact.timestamp);
  out.update_count = track.update_count + 1;
  return out;
}

Association associate(const std::vector<Track>& tracks,
                      const std::vector<Contact>& contacts,
                      const LifecycleParams& params) {
  const int nt = static_cast<int>(tracks.size());
  const int nc = static_cast<int>(contacts.size());
  Association out;
  if (nt == 0 || nc == 0) {
    for (int i = 0; i < nt; ++i) out.unmatched_tracks.push_back(i);
    for (int j = 0; j < nc; ++j) out.unmatched_contacts.push_back(j);
    return out;
  }

  // Square (nt+nc) matrix: the off blocks let any item stay unmatched at a
  // cost of one gate, so matching wins exactly when it is within the gate.
  const int n = nt + nc;
  std::vector<std::vector<double>> cost(n, std::vector<double>(n, kForbidden));
  for (int i = 0; i < nt; ++i) {
    for (int j = 0; j < nc; ++j) {
      if (tracks[i].class_label != contacts[j].class_label) continue;
      const double d2 = squared_mahalanobis(tracks[i], contacts[j]);
      if (d2 <= params.gate_threshold) cost[i][j] = d2;
    }
    cost[i][nc + i] = params.gate_threshold;
  }
  for (int j = 0; j < nc; ++j) cost[nt + j][j] = params.gate_threshold;
  for (int i = nt; i < n; ++i) {
    for (int j = nc; j < n; ++j) cost[i][j] = 0.0;
  }

  const std::vector<int> row_to_col = solve_assignment(cost);
  std::vector<char> contact_matched(nc, false);
  for (int i = 0; i < nt; ++i) {
    const int j = row_to_col[i];
    if (j < nc && cost[i][j] < kForbidden) {
      out.matches.emplace_back(i, j);
      contact_matched[j] = true;
    } else {
      out.unmatched_tracks.push_back(i);
    }
  }
  for (int j = 0; j < nc; ++j) {
    if (!contact_matched[j]) out.unmatched_contacts.push_back(j);
  }
  return out;
}

std::vector<Track> TrackDatabase::alive() const {
  std::vector<Track> out;
  for (const auto& [id, track] : tracks) {
    if (track.status != TrackStatus::dead) out.push_back(track);
  }
  return out;
}

std::vector<Track> TrackDatabase::confirmed() const {
  std::vector<Track> out;
  for (const auto& [id, track] : tracks) {
    if (track.status == TrackStatus::confirmed) out.push_back(track);
  }
  return out;
}

namespace {

void process_group(TrackDatabase& db, const std::vector<Contact>& group,
                   double t_group, std::vector<TrackEvent>& events) {
  std::vector<Track> alive = db.alive();
  const Association assoc = associate(alive, group, db.params);

  for (const auto& [ti, ci] : assoc.matches) {
    Track& stored = db.tracks.at(alive[ti].track_id);
    const Contact& contact = group[ci];
    const double prev_match = stored.match_times.empty()
                                  ? contact.timestamp
                                  : stored.match_times.back();
    Track updated = update(stored, contact);
    const double gap = contact.timestamp - prev_match;
    updated.chain_length = gap <= db.params.max_gap ? stored.chain_length + 1 : 1;
    if (updated.status == TrackStatus::candidate &&
        updated.chain_length >= db.params.n_confirm) {
      updated.status = TrackStatus::confirmed;
      events.push_back({TrackEventType::confirm, updated.track_id,
                        contact.timestamp});
    }
    stored = updated;
  }

  for (int ci : assoc.unmatched_contacts) {
    const Contact& contact = group[ci];
    Track track;
    track.track_id = db.next_id++;
    track.mean_utm = contact.position_utm;
    track.covariance = contact.covariance_utm;
    track.class_label = contact.class_label;
    track.status = TrackStatus::candidate;
    track.match_times = {contact.timestamp};
    track.last_update = contact.timestamp;
    track.chain_length = 1;
    track.update_count = 1;
    events.push_back({TrackEventType::birth, track.track_id, contact.timestamp});
    if (track.chain_length >= db.params.n_confirm) {
      track.status = TrackStatus::confirmed;
      events.push_back({TrackEventType::confirm, track.track_id,
                        contact.timestamp});
    }
    db.tracks.emplace(track.track_id, track);
  }

  for (auto& [id, track] : db.tracks) {
    if (track.status == TrackStatus::dead) continue;
    if (t_group - track.last_update >= db.params.death_timeout) {
      track.status = TrackStatus::dead;
      events.push_back({TrackEventType::death, id, t_group});
    }
  }
}

}  // namespace

std::vector<TrackEvent> lifecycle_step(TrackDatabase& db,
                                       const std::vector<Contact>& contacts,
                                       double t_now) {
  std::vector<TrackEvent> events;

  // Group by timestamp and process in time order so that a batched stream
  // and a per-timestamp stream land in identical states.
  std::vector<double> times;
  for (const Contact& c : contacts) times.push_back(c.timestamp);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());

  for (double t : times) {
    std::vector<Contact> group;
    for (const Contact& c : contacts) {
      if (c.timestamp == t) group.push_back(c);
    }
    process_group(db, group, t, events);
  }

  for (auto& [id, track] : db.tracks) {
    if (track.status == TrackStatus::dead) continue;
    if (t_now - track.last_update >= db.params.death_timeout) {
      track.status = TrackStatus::dead;
      events.push_back({TrackEventType::death, id, t_now});
    }
  }
  return events;
}

}  // namespace geosim
