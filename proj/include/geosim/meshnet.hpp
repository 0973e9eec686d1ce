#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "geosim/fusion.hpp"

namespace geosim {

/// Wire message carrying one track estimate plus a thumbnail payload size.
struct TrackReport {
  std::uint32_t robot_id = 0;
  std::uint32_t track_id = 0;
  ObjectClass class_label = ObjectClass::person;
  Vec3 position_utm{0.0, 0.0, 0.0};
  Vec3 covariance_diag{1.0, 1.0, 1.0};
  float confidence = 1.0f;
  double timestamp = 0.0;
  std::uint32_t payload_bytes = 65536;
};

/// Fixed little-endian record: u32 length, u32 robot, u32 track, u8 class,
/// 3xf64 position, 3xf64 covariance diagonal, f32 confidence, f64 timestamp,
/// u32 payload_bytes. Length counts the bytes after the length field (73).
std::vector<std::uint8_t> encode_report(const TrackReport& report);
TrackReport decode_report(const std::vector<std::uint8_t>& buffer);

struct LinkModel {
  double latency_base = 0.05;
  double latency_jitter = 0.0;  // uniform half-width
  double loss_prob = 0.0;
  double bandwidth = 125000.0;  // bytes/s
  std::uint64_t rng_seed = 1;
};

struct DeliveryEvent {
  bool dropped = false;
  double t_send = 0.0;
  double t_deliver = 0.0;  // meaningful only when delivered
  TrackReport report;
};

/// One lossy FIFO link. Messages queue behind earlier transmissions at the
/// link bandwidth; deliveries are clamped monotone so jitter cannot reorder
/// them.
class Link {
 public:
  explicit Link(const LinkModel& model)
      : model_(model), rng_(model.rng_seed) {}

  DeliveryEvent send(const TrackReport& report, double t_send);

  const LinkModel& model() const { return model_; }

 private:
  LinkModel model_;
  std::mt19937_64 rng_;
  double busy_until_ = 0.0;
  double last_delivery_ = 0.0;
};

struct CopContributor {
  std::uint32_t robot_id = 0;
  std::uint32_t track_id = 0;
  Vec3 position_utm{0.0, 0.0, 0.0};
  double cov_trace = 1.0;
  double timestamp = 0.0;
};

struct CopObject {
  int id = 0;
  ObjectClass class_label = ObjectClass::person;
  Vec3 position_utm{0.0, 0.0, 0.0};
  std::vector<CopContributor> contributors;
  double last_seen = 0.0;
};

struct CopState {
  std::vector<CopObject> objects;
  std::map<std::uint32_t, double> last_report_times;
  int next_object_id = 1;
};

/// Folds a delivered report into the picture. A known (robot, track)
/// contributor is refreshed in place (latest report wins); a new contributor
/// joins the nearest same-class object within merge_radius or founds a new
/// object. Object position is the inverse-covariance-trace weighted mean of
/// the contributors' latest positions.
void cop_ingest(CopState& state, const TrackReport& report, double t,
                double merge_radius);

struct SendRequest {
  TrackReport report;
  double t_send = 0.0;
};

struct NetworkResult {
  CopState cop;
  std::vector<DeliveryEvent> log;  // chronological: sends interleaved by outcome
  std::uint64_t sent = 0;
  std::uint64_t delivered = 0;
  std::uint64_t dropped = 0;
};

/// Discrete-event run over a star of per-robot links. Events must be ordered
/// by send time. Deterministic for fixed link seeds.
NetworkResult run_network(const std::vector<SendRequest>& events,
                          std::map<std::uint32_t, Link>& links,
                          double merge_radius);

/// Line-delimited log format shared by the simulator and the replay command.
std::string delivery_log_line(const DeliveryEvent& event);
/// Parses one log line. Throws ConfigError on malformed input.
DeliveryEvent parse_delivery_log_line(const std::string& line);

/// GeoJSON FeatureCollection of COP objects (Point features).
std::string cop_to_geojson(const CopState& cop);

}  // namespace geosim
