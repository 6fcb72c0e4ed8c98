#include "eprb/dataset.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>

#include "eprb/error.hpp"
#include "eprb/io.hpp"

namespace eprb {
namespace {

constexpr std::string_view kMagic = "EPRB1";
constexpr std::string_view kTextColumns = "time_tag\tsetting\toutcome";

std::uint8_t encode_outcome(std::int8_t outcome) {
  return outcome == 1 ? std::uint8_t{0x01} : std::uint8_t{0xFF};
}

double parse_double(const std::string& key, const std::string& text) {
  double value = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end || !std::isfinite(value)) {
    fail(ErrorKind::format, "malformed header: bad value for " + key + ": '" + text + "'");
  }
  return value;
}

std::uint64_t parse_u64(const std::string& key, const std::string& text) {
  std::uint64_t value = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end || text.empty()) {
    fail(ErrorKind::format, "malformed header: bad value for " + key + ": '" + text + "'");
  }
  return value;
}

void write_header(const StationDataset& ds, std::ostream& sink) {
  sink << kMagic << '\n'
       << "station=" << ds.station_id << '\n'
       << "tau_ns=" << format_double(ds.tau_ns) << '\n'
       << "base_angle_rad=" << format_double(ds.base_angle) << '\n'
       << "angle_increment_rad=" << format_double(ds.angle_increment) << '\n'
       << "events=" << ds.events.size() << '\n'
       << "provenance=" << ds.provenance << '\n'
       << '\n';
}

void check_monotone(const std::vector<EventRecord>& events) {
  for (std::size_t n = 1; n < events.size(); ++n) {
    if (events[n].time_tag < events[n - 1].time_tag) {
      fail(ErrorKind::format, "non-monotone time tags at record " + std::to_string(n) + " (" +
                                  std::to_string(events[n - 1].time_tag) + " then " +
                                  std::to_string(events[n].time_tag) + ")");
    }
  }
}

}  // namespace

std::string format_double(double value) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), ptr);
}

void validate(const StationDataset& ds) {
  if (ds.station_id != 1 && ds.station_id != 2) {
    fail(ErrorKind::format, "station id must be 1 or 2");
  }
  if (!(ds.tau_ns > 0.0) || !std::isfinite(ds.tau_ns)) {
    fail(ErrorKind::format, "tau_ns must be positive");
  }
  if (!std::isfinite(ds.base_angle) || !std::isfinite(ds.angle_increment)) {
    fail(ErrorKind::format, "angles must be finite");
  }
  if (ds.provenance.find('\n') != std::string::npos) {
    fail(ErrorKind::format, "provenance must be a single line");
  }
  for (std::size_t n = 0; n < ds.events.size(); ++n) {
    const auto& e = ds.events[n];
    if (e.setting > 1) {
      fail(ErrorKind::format, "setting outside {0,1} at record " + std::to_string(n));
    }
    if (e.outcome != 1 && e.outcome != -1) {
      fail(ErrorKind::format, "outcome outside {+1,-1} at record " + std::to_string(n));
    }
  }
  check_monotone(ds.events);
}

void write_station_data(const StationDataset& ds, std::ostream& sink, DataEncoding encoding) {
  validate(ds);
  if (ds.origin_ticks != 0) {
    fail(ErrorKind::format, "re-based dataset (origin_ticks != 0) has no canonical encoding");
  }
  write_header(ds, sink);
  if (encoding == DataEncoding::text) {
    sink << kTextColumns << '\n';
    for (const auto& e : ds.events) {
      sink << e.time_tag << '\t' << int{e.setting} << '\t' << int{e.outcome} << '\n';
    }
  } else {
    std::array<char, kRecordBytes> rec{};
    for (const auto& e : ds.events) {
      rec.fill(0);
      for (int b = 0; b < 8; ++b) {
        rec[b] = static_cast<char>((e.time_tag >> (8 * b)) & 0xFFu);
      }
      rec[8] = static_cast<char>(e.setting);
      rec[9] = static_cast<char>(encode_outcome(e.outcome));
      sink.write(rec.data(), rec.size());
    }
  }
  if (!sink) fail(ErrorKind::io, "write failed");
}

DatasetHeader read_header(std::istream& source) {
  std::string line;
  if (!std::getline(source, line) || line != kMagic) {
    fail(ErrorKind::format, "malformed header: missing EPRB1 magic line");
  }
  std::map<std::string, std::string> fields;
  while (true) {
    if (!std::getline(source, line)) {
      fail(ErrorKind::format, "malformed header: missing blank line after header");
    }
    if (line.empty()) break;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorKind::format, "malformed header line: '" + line + "'");
    }
    auto key = line.substr(0, eq);
    if (!fields.emplace(key, line.substr(eq + 1)).second) {
      fail(ErrorKind::format, "malformed header: duplicate key " + key);
    }
  }
  const auto take = [&](const std::string& key) {
    auto it = fields.find(key);
    if (it == fields.end()) fail(ErrorKind::format, "malformed header: missing " + key);
    auto value = it->second;
    fields.erase(it);
    return value;
  };

  DatasetHeader h;
  h.format_version = kFormatVersion;
  const auto station = parse_u64("station", take("station"));
  if (station != 1 && station != 2) fail(ErrorKind::format, "malformed header: station must be 1 or 2");
  h.station_id = static_cast<int>(station);
  h.tau_ns = parse_double("tau_ns", take("tau_ns"));
  if (!(h.tau_ns > 0.0)) fail(ErrorKind::format, "malformed header: tau_ns must be positive");
  h.base_angle = parse_double("base_angle_rad", take("base_angle_rad"));
  h.angle_increment = parse_double("angle_increment_rad", take("angle_increment_rad"));
  h.event_count = parse_u64("events", take("events"));
  h.provenance = take("provenance");
  if (!fields.empty()) {
    fail(ErrorKind::format, "malformed header: unknown key " + fields.begin()->first);
  }
  return h;
}

StationDataset read_station_data(std::istream& source, DataEncoding encoding) {
  const auto h = read_header(source);
  StationDataset ds;
  ds.station_id = h.station_id;
  ds.tau_ns = h.tau_ns;
  ds.base_angle = h.base_angle;
  ds.angle_increment = h.angle_increment;
  ds.provenance = h.provenance;

  if (encoding == DataEncoding::text) {
    std::string line;
    if (!std::getline(source, line) || line != kTextColumns) {
      fail(ErrorKind::format, "malformed text records: expected column header");
    }
    while (std::getline(source, line)) {
      if (line.empty()) continue;
      std::istringstream row(line);
      long long t = -1;
      int setting = -1;
      int outcome = 0;
      if (!(row >> t >> setting >> outcome) || t < 0) {
        fail(ErrorKind::format, "malformed text record: '" + line + "'");
      }
      if (setting != 0 && setting != 1) fail(ErrorKind::format, "setting outside {0,1}: '" + line + "'");
      if (outcome != 1 && outcome != -1) fail(ErrorKind::format, "outcome outside {+1,-1}: '" + line + "'");
      ds.events.push_back({static_cast<std::uint64_t>(t), static_cast<std::uint8_t>(setting),
                           static_cast<std::int8_t>(outcome)});
    }
    if (ds.events.size() != h.event_count) {
      fail(ErrorKind::format, "count mismatch: header declares " + std::to_string(h.event_count) +
                                  " events, found " + std::to_string(ds.events.size()));
    }
  } else {
    ds.events.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(h.event_count, 1u << 24)));
    std::array<unsigned char, kRecordBytes> rec{};
    for (std::uint64_t n = 0; n < h.event_count; ++n) {
      source.read(reinterpret_cast<char*>(rec.data()), rec.size());
      if (source.gcount() != static_cast<std::streamsize>(rec.size())) {
        fail(ErrorKind::format, "count mismatch: header declares " + std::to_string(h.event_count) +
                                    " events, payload holds " + std::to_string(n));
      }
      EventRecord e;
      for (int b = 7; b >= 0; --b) e.time_tag = (e.time_tag << 8) | rec[b];
      if (rec[8] > 1) fail(ErrorKind::format, "setting byte outside {0,1} at record " + std::to_string(n));
      e.setting = rec[8];
      if (rec[9] == 0x01) {
        e.outcome = 1;
      } else if (rec[9] == 0xFF) {
        e.outcome = -1;
      } else {
        fail(ErrorKind::format, "outcome byte outside {0x01,0xFF} at record " + std::to_string(n));
      }
      for (std::size_t b = 10; b < kRecordBytes; ++b) {
        if (rec[b] != 0) fail(ErrorKind::format, "nonzero reserved byte at record " + std::to_string(n));
      }
      ds.events.push_back(e);
    }
    if (source.peek() != std::char_traits<char>::eof()) {
      fail(ErrorKind::format, "count mismatch: trailing bytes after " + std::to_string(h.event_count) + " records");
    }
  }
  check_monotone(ds.events);
  return ds;
}

void save_station_file(const StationDataset& ds, const std::string& path, DataEncoding encoding) {
  std::ostringstream out(std::ios::binary);
  write_station_data(ds, out, encoding);
  write_file_atomic(path, out.str());
}

StationDataset load_station_file(const std::string& path, DataEncoding encoding) {
  std::istringstream in(read_file(path), std::ios::binary);
  return read_station_data(in, encoding);
}

double setting_angle(const StationDataset& ds, int setting) {
  const double theta = ds.base_angle + setting * ds.angle_increment;
  double reduced = std::fmod(theta, std::numbers::pi);
  if (reduced < 0.0) reduced += std::numbers::pi;
  if (reduced >= std::numbers::pi) reduced = 0.0;
  return reduced;
}

double angle_of(const EventRecord& record, const StationDataset& ds) {
  return setting_angle(ds, record.setting);
}

}  // namespace eprb
