// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fama/conversation.hpp"
#include "fama/helpers.hpp"
#include "fama/json_util.hpp"
#include "fama/runner.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fama
{

struct EndpointConfig
{
    /// "scripted" (offline, reads a reply script) or "openai" (HTTP chat completions).
    std::string kind = "scripted";
    std::filesystem::path script;
    std::string baseUrl;
    std::string model = "default";
    std::string apiKeyEnv;
    std::optional<std::int64_t> maxContextTokens;
    int maxRetries = 3;
    int initialBackoffMs = 250;
    int timeoutSeconds = 120;
};

/// Everything a CLI invocation needs, resolved from one config document.
struct AppConfig
{
    RunConfig run;
    std::map<std::string, EndpointConfig> endpoints;
    std::vector<std::filesystem::path> domainFiles;
    std::vector<std::filesystem::path> taskFiles;
    std::optional<std::filesystem::path> promptsDir;
    std::optional<std::filesystem::path> causesDir;
    std::vector<ExtensionAgent> extensions;
    /// The document as written (before ${ENV} expansion), kept for manifests.
    Json snapshot = Json::object();
};

/// Expands ${NAME} and ${NAME:-fallback} from the environment. An unset
/// variable without a fallback throws ConfigError.
[[nodiscard]] std::string interpolateEnv(const std::string& text);

/// Builds a config from a JSON document; relative paths resolve against `baseDir`.
[[nodiscard]] AppConfig parseConfig(const Json& document, const std::filesystem::path& baseDir);
[[nodiscard]] AppConfig loadConfig(const std::filesystem::path& path);

[[nodiscard]] Json runConfigToJson(const RunConfig& config);

/// Instantiates a gateway per configured endpoint.
[[nodiscard]] EndpointRegistry buildEndpoints(const AppConfig& config);

} // namespace fama
