#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "harness.hpp"

namespace pnsaf {

/// Parsed experiment configuration plus the notices emitted while defaulting
/// absent keys. Unknown keys are rejected outright.
struct ParsedConfig {
  ExperimentSpec spec;
  std::vector<std::string> notices;
};

ParsedConfig parse_config_text(const std::string& json_text);
ParsedConfig parse_config_file(const std::filesystem::path& path);

/// Serializes a spec back to the config schema; parse(serialize(spec)) is an
/// identity.
std::string config_to_json(const ExperimentSpec& spec, int indent = 2);

/// Applies a "key.path=value" assignment to raw config text and returns the
/// updated text. The value is parsed as JSON when possible, as a string
/// otherwise.
std::string apply_override(const std::string& json_text,
                           const std::string& assignment);

/// Writes manifest.json next to the exported CSVs: the full spec (re-runnable
/// as a config), seed lineage per trial, and the CSV file map.
void write_manifest(
    const EnsembleResult& result,
    const std::vector<std::pair<std::string, std::string>>& files,
    const std::filesystem::path& out_dir);

}  // namespace pnsaf
