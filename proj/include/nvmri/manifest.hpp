#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace nvmri {

inline constexpr const char* kArtifactVersion = "0.1.0";

std::string sha256File(const std::string& path);
std::string sha256String(const std::string& data);

struct ManifestEntry {
    std::string path;  // relative to the output directory
    std::string sha256;
    std::uintmax_t bytes = 0;
};

struct RunManifest {
    std::string command;
    nlohmann::ordered_json config;
    std::uint64_t seed = 0;
    int workers = 1;
    double wallSeconds = 0.0;
    std::vector<ManifestEntry> inputs;   // absolute or config-relative paths
    std::vector<ManifestEntry> outputs;
};

ManifestEntry hashEntry(const std::string& dir, const std::string& relPath);
void writeManifest(const std::string& dir, const RunManifest& m);
RunManifest readManifest(const std::string& dir);

struct DriftReport {
    std::vector<std::string> changed;
    std::vector<std::string> missing;
    std::vector<std::string> extra;
    bool ok() const { return changed.empty() && missing.empty() && extra.empty(); }
};

/// Compares the checksums of `entries` against the files in `dir`.
DriftReport compareEntries(const std::vector<ManifestEntry>& expected, const std::string& dir);
/// Compares two output lists by path and checksum.
DriftReport compareOutputs(const std::vector<ManifestEntry>& expected,
                           const std::vector<ManifestEntry>& actual);

}  // namespace nvmri
