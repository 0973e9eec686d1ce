#include "geosim/meshnet.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <sstream>

#include "geosim/errors.hpp"

namespace geosim {

namespace {

template <typename T>
void put(std::vector<std::uint8_t>& buf, const T& value) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
  buf.insert(buf.end(), p, p + sizeof(T));
}

template <typename T>
T take(const std::vector<std::uint8_t>& buf, std::size_t& offset) {
  T value;
  std::memcpy(&value, buf.data() + offset, sizeof(T));
  offset += sizeof(T);
  return value;
}

constexpr std::uint32_t kReportBodyBytes = 4 + 4 + 1 + 24 + 24 + 4 + 8 + 4;

}  // namespace

std::vector<std::uint8_t> encode_report(const TrackReport& report) {
  std::vector<std::uint8_t> buf;
  buf.reserve(4 + kReportBodyBytes);
  put(buf, kReportBodyBytes);
  put(buf, report.robot_id);
  put(buf, report.track_id);
  put(buf, static_cast<std::uint8_t>(report.class_label));
  for (int i = 0; i < 3; ++i) put(buf, report.position_utm[i]);
  for (int i = 0; i < 3; ++i) put(buf, report.covariance_diag[i]);
  put(buf, report.confidence);
  put(buf, report.timestamp);
  put(buf, report.payload_bytes);
  return buf;
}

TrackReport decode_report(const std::vector<std::uint8_t>& buffer) {
  if (buffer.size() < 4 + kReportBodyBytes) {
    throw ConfigError("track report record truncated");
  }
  std::size_t off = 0;
  const auto length = take<std::uint32_t>(buffer, off);
  if (length != kReportBodyBytes) {
    throw ConfigError("track report record has unexpected length");
  }
  TrackReport r;
  r.robot_id = take<std::uint32_t>(buffer, off);
  r.track_id = take<std::uint32_t>(buffer, off);
  r.class_label = static_cast<ObjectClass>(take<std::uint8_t>(buffer, off));
  for (int i = 0; i < 3; ++i) r.position_utm[i] = take<double>(buffer, off);
  for (int i = 0; i < 3; ++i) r.covariance_diag[i] = take<double>(buffer, off);
  r.confidence = take<float>(buffer, off);
  r.timestamp = take<double>(buffer, off);
  r.payload_bytes = take<std::uint32_t>(buffer, off);
  return r;
}

DeliveryEvent Link::send(const TrackReport& report, double t_send) {
  DeliveryEvent event;
  event.t_send = t_send;
  event.report = report;

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (unit(rng_) < model_.loss_prob) {
    event.dropped = true;
    return event;
  }

  const double start = std::max(t_send, busy_until_);
  busy_until_ = start + report.payload_bytes / model_.bandwidth;
  double t_deliver = busy_until_ + model_.latency_base;
  if (model_.latency_jitter > 0.0) {
    std::uniform_real_distribution<double> jitter(-model_.latency_jitter,
                                                  model_.latency_jitter);
    t_deliver += jitter(rng_);
  }
  event.t_deliver = std::max(t_deliver, last_delivery_);  // FIFO clamp
  last_delivery_ = event.t_deliver;
  return event;
}

void cop_ingest(CopState& state, const TrackReport& report, double t,
                double merge_radius) {
  auto& last = state.last_report_times[report.robot_id];
  last = std::max(last, t);

  for (CopObject& obj : state.objects) {
    for (CopContributor& contrib : obj.contributors) {
      if (contrib.robot_id == report.robot_id &&
          contrib.track_id == report.track_id) {
        if (report.timestamp >= contrib.timestamp) {
          contrib.position_utm = report.position_utm;
          contrib.cov_trace = report.covariance_diag.sum();
          contrib.timestamp = report.timestamp;
        }
        Vec3 weighted = Vec3::Zero();
        double total = 0.0;
        for (const CopContributor& c : obj.contributors) {
          const double w = 1.0 / c.cov_trace;
          weighted += w * c.position_utm;
          total += w;
        }
        obj.position_utm = weighted / total;
        obj.last_seen = std::max(obj.last_seen, t);
        return;
      }
    }
  }

  // New contributor: join the nearest same-class object inside the merge
  // radius, otherwise found a new one.
  CopObject* target = nullptr;
  double best = merge_radius;
  for (CopObject& obj : state.objects) {
    if (obj.class_label != report.class_label) continue;
    const double d = (obj.position_utm - report.position_utm).norm();
    if (d <= best) {
      best = d;
      target = &obj;
    }
  }
  if (target == nullptr) {
    CopObject obj;
    obj.id = state.next_object_id++;
    obj.class_label = report.class_label;
    obj.position_utm = report.position_utm;
    state.objects.push_back(obj);
    target = &state.objects.back();
  }

  CopContributor contrib;
  contrib.robot_id = report.robot_id;
  contrib.track_id = report.track_id;
  contrib.position_utm = report.position_utm;
  contrib.cov_trace = report.covariance_diag.sum();
  contrib.timestamp = report.timestamp;
  target->contributors.push_back(contrib);

  Vec3 weighted = Vec3::Zero();
  double total = 0.0;
  for (const CopContributor& c : target->contributors) {
    const double w = 1.0 / c.cov_trace;
    weighted += w * c.position_utm;
    total += w;
  }
  target->position_utm = weighted / total;
  target->last_seen = std::max(target->last_seen, t);
}

NetworkResult run_network(const std::vector<SendRequest>& events,
                          std::map<std::uint32_t, Link>& links,
                          double merge_radius) {
  NetworkResult result;
  for (std::size_t i = 1; i < events.size(); ++i) {
    if (events[i].t_send < events[i - 1].t_send) {
      throw ConfigError("network events must be ordered by send time");
    }
  }

  std::vector<DeliveryEvent> deliveries;
  for (const SendRequest& req : events) {
    auto it = links.find(req.report.robot_id);
    if (it == links.end()) {
      throw ConfigError("no link configured for robot " +
                        std::to_string(req.report.robot_id));
    }
    DeliveryEvent event = it->second.send(req.report, req.t_send);
    result.sent += 1;
    if (event.dropped) {
      result.dropped += 1;
    } else {
      result.delivered += 1;
      deliveries.push_back(event);
    }
    result.log.push_back(event);
  }

  // Ingest in delivery-time order; stable sort keeps equal-time FIFO order.
  std::stable_sort(deliveries.begin(), deliveries.end(),
                   [](const DeliveryEvent& a, const DeliveryEvent& b) {
                     return a.t_deliver < b.t_deliver;
                   });
  for (const DeliveryEvent& event : deliveries) {
    cop_ingest(result.cop, event.report, event.t_deliver, merge_radius);
  }

  // The log is replayed in file order: emit it sorted by event time.
  std::stable_sort(result.log.begin(), result.log.end(),
                   [](const DeliveryEvent& a, const DeliveryEvent& b) {
                     const double ta = a.dropped ? a.t_send : a.t_deliver;
                     const double tb = b.dropped ? b.t_send : b.t_deliver;
                     return ta < tb;
                   });
  return result;
}

std::string delivery_log_line(const DeliveryEvent& event) {
  char buf[512];
  const TrackReport& r = event.report;
  if (event.dropped) {
    std::snprintf(buf, sizeof(buf),
                  "DROP %.17g %u %u %s %.17g %.17g %.17g %.17g %.17g %.17g %.9g "
                  "%.17g %u",
                  event.t_send, r.robot_id, r.track_id, to_string(r.class_label),
                  r.position_utm.x(), r.position_utm.y(), r.position_utm.z(),
                  r.covariance_diag.x(), r.covariance_diag.y(),
                  r.covariance_diag.z(), static_cast<double>(r.confidence),
                  r.timestamp, r.payload_bytes);
  } else {
    std::snprintf(buf, sizeof(buf),
                  "DELIVER %.17g %.17g %u %u %s %.17g %.17g %.17g %.17g %.17g "
                  "%.17g %.9g %.17g %u",
                  event.t_deliver, event.t_send, r.robot_id, r.track_id,
                  to_string(r.class_label), r.position_utm.x(),
                  r.position_utm.y(), r.position_utm.z(), r.covariance_diag.x(),
                  r.covariance_diag.y(), r.covariance_diag.z(),
                  static_cast<double>(r.confidence), r.timestamp,
                  r.payload_bytes);
  }
  return buf;
}

DeliveryEvent parse_delivery_log_line(const std::string& line) {
  std::istringstream in(line);
  std::string kind;
  if (!(in >> kind)) throw ConfigError("empty log record");

  DeliveryEvent event;
  TrackReport& r = event.report;
  std::string class_name;
  double conf = 0.0;

  if (kind == "DROP") {
    event.dropped = true;
    if (!(in >> event.t_send >> r.robot_id >> r.track_id >> class_name >>
          r.position_utm.x() >> r.position_utm.y() >> r.position_utm.z() >>
          r.covariance_diag.x() >> r.covariance_diag.y() >>
          r.covariance_diag.z() >> conf >> r.timestamp >> r.payload_bytes)) {
      throw ConfigError("malformed DROP record");
    }
  } else if (kind == "DELIVER") {
    if (!(in >> event.t_deliver >> event.t_send >> r.robot_id >> r.track_id >>
          class_name >> r.position_utm.x() >> r.position_utm.y() >>
          r.position_utm.z() >> r.covariance_diag.x() >> r.covariance_diag.y() >>
          r.covariance_diag.z() >> conf >> r.timestamp >> r.payload_bytes)) {
      throw ConfigError("malformed DELIVER record");
    }
  } else {
    throw ConfigError("unknown log record kind: " + kind);
  }
  r.class_label = object_class_from_string(class_name);
  r.confidence = static_cast<float>(conf);
  return event;
}

std::string cop_to_geojson(const CopState& cop) {
  std::string out = "{\"type\":\"FeatureCollection\",\"features\":[";
  char buf[256];
  bool first = true;
  for (const CopObject& obj : cop.objects) {
    if (!first) out += ",";
    first = false;
    out += "{\"type\":\"Feature\",\"properties\":{\"id\":";
    std::snprintf(buf, sizeof(buf), "%d,\"class\":\"%s\",\"contributors\":%zu",
                  obj.id, to_string(obj.class_label), obj.contributors.size());
    out += buf;
    std::snprintf(buf, sizeof(buf), ",\"last_seen\":%.6f},", obj.last_seen);
    out += buf;
    std::snprintf(buf, sizeof(buf),
                  "\"geometry\":{\"type\":\"Point\",\"coordinates\":[%.6f,%.6f,%."
                  "6f]}}",
                  obj.position_utm.x(), obj.position_utm.y(),
                  obj.position_utm.z());
    out += buf;
  }
  out += "]}";
  return out;
}

}  // namespace geosim
