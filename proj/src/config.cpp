// SPDX-License-Identifier: Apache-2.0
#include "fama/config.hpp"

#include "fama/errors.hpp"
#include "fama/http_backend.hpp"
#include "fama/scripted_backend.hpp"

#include <cstdlib>
#include <regex>
#include <set>

namespace fama
{

std::string interpolateEnv(const std::string& text)
{
    static const std::regex pattern(R"(\$\{([A-Za-z_][A-Za-z0-9_]*)(:-([^}]*))?\})");
    std::string out;
    auto begin = std::sregex_iterator(text.begin(), text.end(), pattern);
    std::size_t last = 0;
    for (auto it = begin; it != std::sregex_iterator(); ++it)
    {
        const auto& match = *it;
        out.append(text, last, static_cast<std::size_t>(match.position()) - last);
        auto const name = match[1].str();
        if (const char* value = std::getenv(name.c_str()))
            out += value;
        else if (match[2].matched)
            out += match[3].str();
        else
            throw ConfigError("environment variable " + name + " is not set");
        last = static_cast<std::size_t>(match.position() + match.length());
    }
    out.append(text, last);
    return out;
}

namespace
{

Json interpolateTree(const Json& node)
{
    if (node.is_string())
        return interpolateEnv(node.get<std::string>());
    if (node.is_array())
    {
        Json out = Json::array();
        for (const auto& v: node)
            out.push_back(interpolateTree(v));
        return out;
    }
    if (node.is_object())
    {
        Json out = Json::object();
        for (const auto& [k, v]: node.items())
            out[k] = interpolateTree(v);
        return out;
    }
    return node;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value)
{
    std::filesystem::path p(value);
    return p.is_absolute() ? p : base / p;
}

std::vector<std::filesystem::path> pathList(const Json& doc, const char* key, const std::filesystem::path& base)
{
    std::vector<std::filesystem::path> out;
    if (!doc.contains(key))
        return out;
    const auto& v = doc[key];
    if (v.is_string())
        out.push_back(resolve(base, v.get<std::string>()));
    else
        for (const auto& item: v)
            out.push_back(resolve(base, item.get<std::string>()));
    return out;
}

const std::set<std::string> kKnownKeys = {
    "method",      "fama_base",         "n_trials",     "max_turns",           "max_context_tokens",
    "memory_k",    "seed",              "temperature",  "top_p",               "max_tokens",
    "aggregation_threshold", "sweep_memory_k", "memory_k_sweep", "workers", "tor_threshold_tokens",
    "endpoints",   "domains",           "tasks",        "prompts_dir",         "causes_dir",
    "extensions",  "tool_endpoint",     "user_endpoint", "judge_endpoint"};

} // namespace

Json runConfigToJson(const RunConfig& c)
{
    Json j = {{"method", toString(c.method)},
              {"fama_base", toString(c.famaBase)},
              {"tool_endpoint", c.toolAgentEndpoint},
              {"user_endpoint", c.userAgentEndpoint},
              {"judge_endpoint", c.judgeEndpoint},
              {"n_trials", c.nTrials},
              {"max_turns", c.maxTurns},
              {"max_context_tokens", c.maxContextTokens},
              {"memory_k", c.memoryK},
              {"seed", c.seed},
              {"temperature", c.sampling.temperature},
              {"top_p", c.sampling.topP},
              {"aggregation_threshold", c.aggregationThreshold},
              {"sweep_memory_k", c.sweepMemoryK},
              {"memory_k_sweep", c.memoryKSweep},
              {"workers", c.workers},
              {"tor_threshold_tokens", c.torThresholdTokens}};
    if (c.sampling.maxTokens)
        j["max_tokens"] = *c.sampling.maxTokens;
    return j;
}

AppConfig parseConfig(const Json& document, const std::filesystem::path& baseDir)
{
    if (!document.is_object())
        throw ConfigError("config must be a JSON object");
    for (const auto& [key, _]: document.items())
        if (!kKnownKeys.count(key))
            throw ConfigError("unknown config key '" + key + "'");

    AppConfig config;
    config.snapshot = document;
    auto const doc = interpolateTree(document);
    auto& run = config.run;
    try
    {
        if (doc.contains("method"))
            run.method = methodFromString(doc["method"].get<std::string>());
        if (doc.contains("fama_base"))
            run.famaBase = methodFromString(doc["fama_base"].get<std::string>());
        run.toolAgentEndpoint = doc.value("tool_endpoint", run.toolAgentEndpoint);
        run.userAgentEndpoint = doc.value("user_endpoint", run.userAgentEndpoint);
        run.judgeEndpoint = doc.value("judge_endpoint", run.judgeEndpoint);
        run.nTrials = doc.value("n_trials", run.nTrials);
        run.maxTurns = doc.value("max_turns", run.maxTurns);
        run.maxContextTokens = doc.value("max_context_tokens", run.maxContextTokens);
        run.memoryK = doc.value("memory_k", run.memoryK);
        run.seed = doc.value("seed", run.seed);
        run.sampling.temperature = doc.value("temperature", run.sampling.temperature);
        run.sampling.topP = doc.value("top_p", run.sampling.topP);
        if (doc.contains("max_tokens"))
            run.sampling.maxTokens = doc["max_tokens"].get<std::int64_t>();
        run.aggregationThreshold = doc.value("aggregation_threshold", run.aggregationThreshold);
        run.sweepMemoryK = doc.value("sweep_memory_k", run.sweepMemoryK);
        run.memoryKSweep = doc.value("memory_k_sweep", run.memoryKSweep);
        run.workers = doc.value("workers", run.workers);
        run.torThresholdTokens = doc.value("tor_threshold_tokens", run.torThresholdTokens);

        auto const endpointsSpec = doc.value("endpoints", Json::object());
        for (const auto& [name, ep]: endpointsSpec.items())
        {
            EndpointConfig e;
            e.kind = ep.value("kind", e.kind);
            if (e.kind != "scripted" && e.kind != "openai")
                throw ConfigError("endpoint '" + name + "': kind must be scripted or openai");
            if (ep.contains("script"))
                e.script = resolve(baseDir, ep["script"].get<std::string>());
            if (e.kind == "scripted" && e.script.empty())
                throw ConfigError("endpoint '" + name + "': scripted endpoints need a script");
            e.baseUrl = ep.value("base_url", "");
            if (e.kind == "openai" && e.baseUrl.empty())
                throw ConfigError("endpoint '" + name + "': openai endpoints need base_url");
            e.model = ep.value("model", e.model);
            e.apiKeyEnv = ep.value("api_key_env", "");
            if (ep.contains("max_context_tokens"))
                e.maxContextTokens = ep["max_context_tokens"].get<std::int64_t>();
            e.maxRetries = ep.value("max_retries", e.maxRetries);
            e.initialBackoffMs = ep.value("initial_backoff_ms", e.initialBackoffMs);
            e.timeoutSeconds = ep.value("timeout_s", e.timeoutSeconds);
            config.endpoints.emplace(name, std::move(e));
        }

        config.domainFiles = pathList(doc, "domains", baseDir);
        config.taskFiles = pathList(doc, "tasks", baseDir);
        if (doc.contains("prompts_dir"))
            config.promptsDir = resolve(baseDir, doc["prompts_dir"].get<std::string>());
        if (doc.contains("causes_dir"))
            config.causesDir = resolve(baseDir, doc["causes_dir"].get<std::string>());
        for (const auto& ext: doc.value("extensions", Json::array()))
            config.extensions.push_back(
                {ext.at("name").get<std::string>(), ext.at("template").get<std::string>(), ext.value("rank", 60)});
    }
    catch (const Json::exception& e)
    {
        throw ConfigError(std::string("config: ") + e.what());
    }

    if (run.nTrials < 1)
        throw ConfigError("n_trials must be at least 1");
    if (run.memoryK < 0)
        throw ConfigError("memory_k must be non-negative");
    if (run.aggregationThreshold < 0.0 || run.aggregationThreshold > 1.0)
        throw ConfigError("aggregation_threshold must lie in [0, 1]");
    return config;
}

AppConfig loadConfig(const std::filesystem::path& path)
{
    auto const doc = loadJsonFile(path);
    return parseConfig(doc, std::filesystem::absolute(path).parent_path());
}

EndpointRegistry buildEndpoints(const AppConfig& config)
{
    EndpointRegistry registry;
    for (const auto& [name, e]: config.endpoints)
    {
        std::shared_ptr<ChatBackend> backend;
        if (e.kind == "scripted")
            backend = ScriptedBackend::fromJson(loadJsonFile(e.script));
        else
            backend = std::make_shared<HttpBackend>(
                HttpEndpoint{e.baseUrl, e.apiKeyEnv, std::chrono::seconds(e.timeoutSeconds)});
        GatewayOptions options;
        options.model = e.model;
        options.maxContextTokens = e.maxContextTokens.value_or(config.run.maxContextTokens);
        options.maxRetries = e.maxRetries;
        options.initialBackoff = std::chrono::milliseconds(e.initialBackoffMs);
        registry.add(name, std::make_shared<Gateway>(std::move(backend), options));
    }
    return registry;
}

} // namespace fama
