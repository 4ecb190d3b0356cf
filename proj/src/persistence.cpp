// SPDX-License-Identifier: Apache-2.0
#include "fama/persistence.hpp"

#include "fama/errors.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>

namespace fama
{

void writeJsonl(const std::filesystem::path& path, const std::vector<Json>& records)
{
    std::string text;
    for (const auto& r: records)
    {
        text += canonicalDump(r);
        text += '\n';
    }
    writeFile(path, text);
}

std::vector<Json> readJsonl(const std::filesystem::path& path)
{
    if (!std::filesystem::exists(path))
        throw MissingArtifacts("missing artifact " + path.string());
    std::istringstream in(readFile(path));
    std::vector<Json> out;
    std::size_t lineNo = 0;
    for (std::string line; std::getline(in, line);)
    {
        ++lineNo;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        auto doc = Json::parse(line, nullptr, false);
        if (doc.is_discarded())
        {
            // Re-parse through the positional reporter to get the column, then relabel the line.
            try
            {
                (void)parseJsonDocument(line, "");
            }
            catch (const ConfigError& e)
            {
                std::string what = e.what();
                auto const col = what.substr(what.find(':', 1) + 1);
                throw ConfigError(path.string() + ":" + std::to_string(lineNo) + ":" + col);
            }
        }
        out.push_back(std::move(doc));
    }
    return out;
}

std::vector<Trajectory> readTrajectories(const std::filesystem::path& path, std::size_t* estimatedMessages)
{
    std::vector<Trajectory> out;
    std::size_t estimated = 0;
    for (const auto& doc: readJsonl(path))
    {
        for (const auto& m: doc.value("messages", Json::array()))
            if (!m.contains("token_count"))
                ++estimated;
        try
        {
            out.push_back(doc.get<Trajectory>());
        }
        catch (const Json::exception& e)
        {
            throw ConfigError(path.string() + ": bad trajectory record: " + e.what());
        }
    }
    if (estimatedMessages)
        *estimatedMessages = estimated;
    return out;
}

std::string RunManifest::fingerprint() const
{
    Json material = {{"config", config}, {"assets", assetHashes}};
    return sha256Hex(canonicalDump(material));
}

void to_json(Json& j, const RunManifest& m)
{
    j = Json{{"command", m.command},      {"config", m.config},           {"asset_hashes", m.assetHashes},
             {"created_at", m.createdAt}, {"tool_version", m.toolVersion}, {"fingerprint", m.fingerprint()}};
}

void from_json(const Json& j, RunManifest& m)
{
    m.command = j.value("command", "");
    m.config = j.value("config", Json::object());
    m.assetHashes = j.value("asset_hashes", std::map<std::string, std::string>{});
    m.createdAt = j.value("created_at", "");
    m.toolVersion = j.value("tool_version", "");
}

std::string currentTimestamp()
{
    if (const char* fixed = std::getenv("FAMA_FIXED_TIME"))
        return fixed;
    auto const now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm utc{};
    gmtime_r(&now, &utc);
    char buffer[32];
    std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &utc);
    return buffer;
}

void writeManifest(const std::filesystem::path& dir, const RunManifest& manifest)
{
    writeFile(dir / kManifestFile, Json(manifest).dump(2) + "\n");
}

RunManifest readManifest(const std::filesystem::path& dir)
{
    auto const path = dir / kManifestFile;
    if (!std::filesystem::exists(path))
        throw MissingArtifacts("no manifest in " + dir.string());
    return loadJsonFile(path).get<RunManifest>();
}

void requireConsistentManifests(const std::vector<std::filesystem::path>& dirs)
{
    std::string expected;
    for (const auto& dir: dirs)
    {
        auto const fp = readManifest(dir).fingerprint();
        if (expected.empty())
            expected = fp;
        else if (fp != expected)
            throw ConfigError("artifacts in " + dir.string() + " come from a different run configuration");
    }
}

} // namespace fama
