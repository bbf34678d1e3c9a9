#pragma once

#include <string>

#include <json.hpp>

#include "ibm2/episodes.hpp"

namespace ibm2 {

inline constexpr const char* kArtifactVersion = "0.1.0";
inline constexpr int kConfigVersion = 1;
inline constexpr int kReportVersion = 1;

nlohmann::ordered_json config_to_json(const RunConfig& config);
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config_file(const std::string& path);

nlohmann::ordered_json report_to_json(const ExperimentReport& report);

// Serializer used for every artifact JSON: doubles printed with 17
// significant digits (lossless float64 round-trip), insertion order
// preserved, so identical documents give identical bytes.
std::string dump_json(const nlohmann::ordered_json& j, int indent = 2);

// Views over a report document (pure functions of the JSON).
std::string report_to_text(const nlohmann::json& report);
std::string report_to_csv(const nlohmann::json& report);

} // namespace ibm2
