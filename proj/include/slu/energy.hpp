#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace slu {

// Grams of CO2 per kWh applied to every run.
inline constexpr double kGramsCo2PerKwh = 51.0;

// One training run as it appears in the ledger and in the report.
struct RunRecord {
  std::string run_id;
  std::string strategy;
  std::string feature_family;
  double kwh = 0.0;
  double wall_time_s = 0.0;
  // Percentages; values above 100 are legal.
  double dev_cer = 0.0;
  double test_cer = 0.0;

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

struct MeterReading {
  double kwh = 0.0;
  double wall_time_s = 0.0;
};

// Either converts measured wall time at a fixed power draw, or passes through a value
// read from an external measurement tool.
class EnergyMeter {
 public:
  static EnergyMeter simulated(double power_watts);
  static EnergyMeter recorded(double kwh);
  // "simulated:WATTS" or "recorded:KWH".
  static EnergyMeter parse(const std::string& text);

  bool is_simulated() const noexcept { return simulated_; }
  double power_watts() const noexcept { return power_watts_; }
  double recorded_kwh() const noexcept { return recorded_kwh_; }
  std::string to_string() const;

  // Runs `work` and reports its energy.
  MeterReading session(const std::function<void()>& work) const;
  // Energy attributed to a session of the given length.
  double kwh_for(double wall_time_s) const;

 private:
  EnergyMeter(bool simulated, double watts, double kwh)
      : simulated_(simulated), power_watts_(watts), recorded_kwh_(kwh) {}

  bool simulated_;
  double power_watts_;
  double recorded_kwh_;
};

double simulated_kwh(double wall_time_s, double power_watts);

// round(51 * kwh). Throws DomainError for negative input.
long kwh_to_gco2(double kwh);

// Cheapest run of a family; ties go to the lower test CER, then the smaller run_id.
// Throws NotFoundError when the family has no run.
RunRecord select_baseline(const std::vector<RunRecord>& records, const std::string& family);

// kWh spent per point of test CER gained over a cheaper baseline. Infinite when the
// compared run is not better than the baseline.
class KwhPerPoint {
 public:
  static KwhPerPoint infinite() { return KwhPerPoint(true, 0.0); }
  static KwhPerPoint finite(double value) { return KwhPerPoint(false, value); }

  bool is_infinite() const noexcept { return infinite_; }
  // Only meaningful when finite.
  double value() const noexcept { return value_; }
  // "inf" or the value with three decimals.
  std::string to_string() const;

  friend bool operator==(const KwhPerPoint&, const KwhPerPoint&) = default;

 private:
  KwhPerPoint(bool infinite, double value) : infinite_(infinite), value_(value) {}
  bool infinite_;
  double value_;
};

// Throws ConstraintError when compared.kwh < baseline.kwh.
KwhPerPoint kwh_per_point(const RunRecord& compared, const RunRecord& baseline);

struct ReportRow {
  RunRecord record;
  long gco2 = 0;
  bool baseline = false;
  // Empty for baseline rows.
  std::optional<KwhPerPoint> kwh_per_point;
};

struct EnergyReport {
  std::vector<ReportRow> rows;
};

// Rows keep the input order; each is compared with the baseline of its feature family.
EnergyReport build_report(const std::vector<RunRecord>& records);

// "36h14'" for runs of an hour or more, "3'07\"" below.
std::string format_duration(double seconds);

// Columns: Strategy | Input | kWh (gCO2) | kWh/p | Time | DEV | TEST.
std::string render_table(const EnergyReport& report);
// One JSON object per row.
std::string render_records(const EnergyReport& report);

std::string record_to_line(const RunRecord& record);
RunRecord record_from_line(const std::string& line, std::size_t line_number);

// Throws NotFoundError when the file does not exist.
std::vector<RunRecord> load_ledger(const std::filesystem::path& path);
// Rewrites the ledger through a temporary file and a rename; creates it if needed.
void append_ledger(const std::filesystem::path& path, const RunRecord& record);

}  // namespace slu
