#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace eprb {

/// Time tags are integer multiples of the station resolution tau.
using Ticks = std::int64_t;

inline constexpr double kDefaultTauNs = 0.5;
inline constexpr int kFormatVersion = 1;
inline constexpr std::size_t kRecordBytes = 16;

/// One detection event: which detector fired (outcome = +1/-1), the binary
/// EOM setting that was active, and the station clock reading.
struct EventRecord {
  std::uint64_t time_tag = 0;
  std::uint8_t setting = 0;
  std::int8_t outcome = 1;

  friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

/// All events recorded at one observation station.
///
/// The rotation angle of event n is `base_angle + setting * angle_increment`.
/// `origin_ticks` is nonzero only after apply_offset had to re-base the tags
/// to keep them nonnegative; the effective time of an event is
/// `time_tag + origin_ticks`.
struct StationDataset {
  int station_id = 1;
  double tau_ns = kDefaultTauNs;
  double base_angle = 0.0;
  double angle_increment = 0.0;
  std::string provenance = "external";
  Ticks origin_ticks = 0;
  std::vector<EventRecord> events;

  [[nodiscard]] std::size_t size() const noexcept { return events.size(); }
  [[nodiscard]] Ticks time_of(std::size_t n) const noexcept {
    return static_cast<Ticks>(events[n].time_tag) + origin_ticks;
  }

  friend bool operator==(const StationDataset&, const StationDataset&) = default;
};

/// Parsed text header of a canonical station file.
struct DatasetHeader {
  int format_version = kFormatVersion;
  int station_id = 1;
  double tau_ns = kDefaultTauNs;
  double base_angle = 0.0;
  double angle_increment = 0.0;
  std::uint64_t event_count = 0;
  std::string provenance;
};

enum class DataEncoding { binary, text };

/// Throws Error(format) if `ds` violates a dataset invariant.
void validate(const StationDataset& ds);

/// Serializes `ds` in the canonical format. Validation happens before any
/// byte reaches `sink`.
void write_station_data(const StationDataset& ds, std::ostream& sink,
                        DataEncoding encoding = DataEncoding::binary);

StationDataset read_station_data(std::istream& source,
                                 DataEncoding encoding = DataEncoding::binary);

DatasetHeader read_header(std::istream& source);

/// File helpers. Writing goes through a temporary file and a rename.
void save_station_file(const StationDataset& ds, const std::string& path,
                       DataEncoding encoding = DataEncoding::binary);
StationDataset load_station_file(const std::string& path,
                                 DataEncoding encoding = DataEncoding::binary);

/// Polarizer rotation angle of `record`, reduced to [0, pi).
double angle_of(const EventRecord& record, const StationDataset& ds);

/// Angle for a setting value without an event at hand.
double setting_angle(const StationDataset& ds, int setting);

/// Shortest decimal string that parses back to exactly `value`.
std::string format_double(double value);

}  // namespace eprb
