// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fama/conversation.hpp"
#include "fama/failure_analysis.hpp"
#include "fama/json_util.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace fama
{

/// Writes one compact, key-sorted JSON document per line.
void writeJsonl(const std::filesystem::path& path, const std::vector<Json>& records);

/// Reads a JSONL file; blank lines are skipped. Parse errors carry file:line:col.
[[nodiscard]] std::vector<Json> readJsonl(const std::filesystem::path& path);

template <typename T>
void writeRecords(const std::filesystem::path& path, const std::vector<T>& records)
{
    std::vector<Json> docs;
    docs.reserve(records.size());
    for (const auto& r: records)
        docs.emplace_back(r);
    writeJsonl(path, docs);
}

template <typename T>
[[nodiscard]] std::vector<T> readRecords(const std::filesystem::path& path)
{
    std::vector<T> out;
    for (const auto& doc: readJsonl(path))
        out.push_back(doc.get<T>());
    return out;
}

/// Reads trajectories and reports how many messages lacked a token count
/// (those get an estimate).
[[nodiscard]] std::vector<Trajectory> readTrajectories(const std::filesystem::path& path,
                                                       std::size_t* estimatedMessages = nullptr);

/// Provenance of a set of artifacts.
struct RunManifest
{
    std::string command;
    Json config = Json::object();
    /// Asset label -> git-style blob hash of its content.
    std::map<std::string, std::string> assetHashes;
    std::string createdAt;
    std::string toolVersion;

    /// sha256 over the config snapshot and asset hashes; timestamps and the
    /// command name are excluded so equal inputs give equal fingerprints.
    [[nodiscard]] std::string fingerprint() const;
};

void to_json(Json& j, const RunManifest& manifest);
void from_json(const Json& j, RunManifest& manifest);

inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kToolVersion = "fama 0.1.0";

/// UTC time in ISO-8601. FAMA_FIXED_TIME in the environment overrides it,
/// which keeps manifests byte-stable in tests.
[[nodiscard]] std::string currentTimestamp();

void writeManifest(const std::filesystem::path& dir, const RunManifest& manifest);
[[nodiscard]] RunManifest readManifest(const std::filesystem::path& dir);

/// Throws ConfigError unless every directory carries a manifest with the same fingerprint.
void requireConsistentManifests(const std::vector<std::filesystem::path>& dirs);

} // namespace fama
