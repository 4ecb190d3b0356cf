// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fama/config.hpp"
#include "fama/conversation.hpp"
#include "fama/environment.hpp"
#include "fama/failure_analysis.hpp"
#include "fama/gateway.hpp"
#include "fama/json_util.hpp"
#include "fama/prompts.hpp"
#include "fama/runner.hpp"
#include "fama/scripted_backend.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <memory>
#include <string>

namespace fama::test
{

inline std::filesystem::path assetDir()
{
    return defaultAssetDir();
}

inline std::filesystem::path fixtureDir()
{
    return FAMA_TEST_FIXTURES;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir
{
public:
    TempDir()
    {
        static std::atomic<int> counter{0};
        auto const stamp = std::chrono::steady_clock::now().time_since_epoch().count();
        _path = std::filesystem::temp_directory_path()
                / ("fama_test_" + std::to_string(stamp) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(_path);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(_path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const std::filesystem::path& path() const { return _path; }
    [[nodiscard]] std::filesystem::path operator/(const std::string& name) const { return _path / name; }

private:
    std::filesystem::path _path;
};

inline std::shared_ptr<Gateway> scriptedGateway(std::shared_ptr<ScriptedBackend> backend,
                                                std::int64_t maxContextTokens = 32768)
{
    GatewayOptions options;
    options.maxContextTokens = maxContextTokens;
    options.initialBackoff = std::chrono::milliseconds(0);
    return std::make_shared<Gateway>(std::move(backend), options);
}

inline std::shared_ptr<ScriptedBackend> scriptFromFile(const std::filesystem::path& path)
{
    return ScriptedBackend::fromJson(loadJsonFile(path));
}

/// Everything needed to drive a MethodRunner from one of the shipped configs.
struct Suite
{
    explicit Suite(const std::string& configName)
        : config(loadConfig(assetDir() / "configs" / configName)), endpoints(buildEndpoints(config)),
          prompts(PromptLibrary::load(assetDir() / "prompts")), catalog(CauseCatalog::load(assetDir() / "causes"))
    {
        for (const auto& path: config.domainFiles)
        {
            auto domain = loadDomain(path);
            domains.emplace(domain.id, std::move(domain));
        }
        for (const auto& path: config.taskFiles)
            for (auto& task: parseTasks(loadJsonFile(path)))
                tasks.push_back(std::move(task));
    }

    [[nodiscard]] MethodRunner runner() const { return runner(config.run); }
    [[nodiscard]] MethodRunner runner(const RunConfig& run) const { return MethodRunner(run, endpoints, prompts); }

    [[nodiscard]] const Task& task(const std::string& id) const
    {
        for (const auto& t: tasks)
            if (t.id == id)
                return t;
        throw std::out_of_range("no task " + id);
    }

    AppConfig config;
    EndpointRegistry endpoints;
    PromptLibrary prompts;
    CauseCatalog catalog;
    DomainSet domains;
    std::vector<Task> tasks;
};

} // namespace fama::test
