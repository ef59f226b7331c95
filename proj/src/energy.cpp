#include "slu/energy.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <tuple>
#include <unistd.h>

#include "json.hpp"
#include "slu/errors.hpp"

namespace slu {

using nlohmann::json;

EnergyMeter EnergyMeter::simulated(double power_watts) {
  if (!(power_watts > 0.0) || !std::isfinite(power_watts)) {
    throw DomainError("simulated meter needs a positive power draw");
  }
  return EnergyMeter(true, power_watts, 0.0);
}

EnergyMeter EnergyMeter::recorded(double kwh) {
  if (!(kwh >= 0.0) || !std::isfinite(kwh)) throw DomainError("recorded energy must be >= 0");
  return EnergyMeter(false, 0.0, kwh);
}

EnergyMeter EnergyMeter::parse(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) {
    throw DomainError("meter must be simulated:WATTS or recorded:KWH, got '" + text + "'");
  }
  const std::string mode = text.substr(0, colon);
  const std::string number = text.substr(colon + 1);
  double value = 0.0;
  try {
    std::size_t used = 0;
    value = std::stod(number, &used);
    if (used != number.size()) throw std::invalid_argument(number);
  } catch (const std::exception&) {
    throw DomainError("meter value '" + number + "' is not a number");
  }
  if (mode == "simulated") return simulated(value);
  if (mode == "recorded") return recorded(value);
  throw DomainError("unknown meter mode '" + mode + "'");
}

std::string EnergyMeter::to_string() const {
  std::ostringstream out;
  out.precision(15);
  out << (simulated_ ? "simulated:" : "recorded:") << (simulated_ ? power_watts_ : recorded_kwh_);
  return out.str();
}

double simulated_kwh(double wall_time_s, double power_watts) {
  return wall_time_s * power_watts / 3.6e6;
}

double EnergyMeter::kwh_for(double wall_time_s) const {
  return simulated_ ? simulated_kwh(wall_time_s, power_watts_) : recorded_kwh_;
}

MeterReading EnergyMeter::session(const std::function<void()>& work) const {
  const auto start = std::chrono::steady_clock::now();
  work();
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  return {kwh_for(elapsed.count()), elapsed.count()};
}

long kwh_to_gco2(double kwh) {
  if (!(kwh >= 0.0)) throw DomainError("energy must be non-negative");
  return std::lround(kGramsCo2PerKwh * kwh);
}

RunRecord select_baseline(const std::vector<RunRecord>& records, const std::string& family) {
  const RunRecord* best = nullptr;
  for (const auto& r : records) {
    if (r.feature_family != family) continue;
    if (best == nullptr ||
        std::tie(r.kwh, r.test_cer, r.run_id) < std::tie(best->kwh, best->test_cer, best->run_id)) {
      best = &r;
    }
  }
  if (best == nullptr) throw NotFoundError("no run with feature family '" + family + "'");
  return *best;
}

std::string KwhPerPoint::to_string() const {
  if (infinite_) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", value_);
  return buf;
}

KwhPerPoint kwh_per_point(const RunRecord& compared, const RunRecord& baseline) {
  if (compared.kwh < baseline.kwh) {
    throw ConstraintError("run '" + compared.run_id + "' is cheaper than its baseline '" +
                          baseline.run_id + "'");
  }
  const double extra_kwh = compared.kwh - baseline.kwh;
  const double gained = baseline.test_cer - compared.test_cer;
  if (extra_kwh == 0.0 && gained == 0.0) return KwhPerPoint::finite(0.0);
  if (gained <= 0.0) return KwhPerPoint::infinite();
  return KwhPerPoint::finite(extra_kwh / gained);
}

EnergyReport build_report(const std::vector<RunRecord>& records) {
  EnergyReport report;
  for (const auto& r : records) {
    const RunRecord base = select_baseline(records, r.feature_family);
    ReportRow row;
    row.record = r;
    row.gco2 = kwh_to_gco2(r.kwh);
    row.baseline = base.run_id == r.run_id && base == r;
    if (!row.baseline) row.kwh_per_point = kwh_per_point(r, base);
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string format_duration(double seconds) {
  const auto total = static_cast<long>(std::lround(std::max(0.0, seconds)));
  char buf[48];
  if (total >= 3600) {
    std::snprintf(buf, sizeof buf, "%ldh%02ld'", total / 3600, (total % 3600) / 60);
  } else {
    std::snprintf(buf, sizeof buf, "%ld'%02ld\"", total / 60, total % 60);
  }
  return buf;
}

std::string render_table(const EnergyReport& report) {
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-14s | %-14s | %-16s | %-7s | %-9s | %7s | %7s\n", "Strategy",
                "Input", "kWh (gCO2)", "kWh/p", "Time", "DEV", "TEST");
  out << buf;
  for (const auto& row : report.rows) {
    char energy[64];
    std::snprintf(energy, sizeof energy, "%.3f (%ld)", row.record.kwh, row.gco2);
    const std::string per_point = row.baseline ? "Me" : row.kwh_per_point->to_string();
    std::snprintf(buf, sizeof buf, "%-14s | %-14s | %-16s | %-7s | %-9s | %7.2f | %7.2f\n",
                  row.record.strategy.c_str(), row.record.feature_family.c_str(), energy,
                  per_point.c_str(), format_duration(row.record.wall_time_s).c_str(),
                  row.record.dev_cer, row.record.test_cer);
    out << buf;
  }
  return out.str();
}

namespace {

json record_json(const RunRecord& r) {
  return {{"run_id", r.run_id},           {"strategy", r.strategy},
          {"feature_family", r.feature_family}, {"kwh", r.kwh},
          {"wall_time_s", r.wall_time_s}, {"dev_cer", r.dev_cer},
          {"test_cer", r.test_cer}};
}

}  // namespace

std::string render_records(const EnergyReport& report) {
  std::string out;
  for (const auto& row : report.rows) {
    json j = record_json(row.record);
    j["gco2"] = row.gco2;
    j["baseline"] = row.baseline;
    if (row.baseline) {
      j["kwh_per_point"] = nullptr;
    } else if (row.kwh_per_point->is_infinite()) {
      j["kwh_per_point"] = "inf";
    } else {
      j["kwh_per_point"] = row.kwh_per_point->value();
    }
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::string record_to_line(const RunRecord& record) { return record_json(record).dump(); }

RunRecord record_from_line(const std::string& line, std::size_t line_number) {
  try {
    const json j = json::parse(line);
    RunRecord r;
    r.run_id = j.at("run_id").get<std::string>();
    r.strategy = j.at("strategy").get<std::string>();
    r.feature_family = j.at("feature_family").get<std::string>();
    r.kwh = j.at("kwh").get<double>();
    r.wall_time_s = j.at("wall_time_s").get<double>();
    r.dev_cer = j.at("dev_cer").get<double>();
    r.test_cer = j.at("test_cer").get<double>();
    if (r.kwh < 0.0) throw ParseError(line_number, "negative kwh");
    if (r.dev_cer < 0.0 || r.test_cer < 0.0) throw ParseError(line_number, "negative CER");
    return r;
  } catch (const json::exception& e) {
    throw ParseError(line_number, std::string("invalid run record: ") + e.what());
  }
}

std::vector<RunRecord> load_ledger(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open ledger " + path.string());
  std::vector<RunRecord> records;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    records.push_back(record_from_line(line, line_number));
  }
  return records;
}

void append_ledger(const std::filesystem::path& path, const RunRecord& record) {
  std::string existing;
  if (std::filesystem::exists(path)) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    existing = buf.str();
    if (!existing.empty() && existing.back() != '\n') existing += '\n';
  }
  const std::filesystem::path tmp =
      path.string() + ".tmp." + std::to_string(static_cast<long>(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write ledger " + tmp.string());
    out << existing << record_to_line(record) << '\n';
    out.flush();
    if (!out) throw Error("failed writing ledger " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error("cannot replace ledger " + path.string() + ": " + ec.message());
}

}  // namespace slu
