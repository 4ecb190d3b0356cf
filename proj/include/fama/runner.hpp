// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fama/conversation.hpp"
#include "fama/environment.hpp"
#include "fama/failure_analysis.hpp"
#include "fama/gateway.hpp"
#include "fama/helpers.hpp"
#include "fama/metrics.hpp"
#include "fama/prompts.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace fama
{

using DomainSet = std::map<std::string, Domain>;

/// Named gateways; RunConfig refers to endpoints by name.
class EndpointRegistry
{
public:
    void add(std::string name, std::shared_ptr<Gateway> gateway);
    [[nodiscard]] const Gateway& get(const std::string& name) const;
    [[nodiscard]] const Gateway* find(const std::string& name) const;

private:
    std::map<std::string, std::shared_ptr<Gateway>> _gateways;
};

/// One parsed step of the ReAct text protocol. Lines starting with
/// "Thought:" are stripped; an "Action:" line carries
/// {"name": ..., "arguments": {...}}, where name "respond" replies to the user
/// with arguments.content. Text without an Action line is a reply.
struct ReActStep
{
    std::string thought;
    std::optional<ToolCall> call;
    std::string reply;
};

/// nullopt when an Action line is present but its JSON does not parse.
[[nodiscard]] std::optional<ReActStep> parseReAct(const std::string& text);

inline constexpr std::string_view kReActFormatNudge =
    "Your last output did not follow the required format. Reply with optional 'Thought:' lines followed by "
    "exactly one line 'Action: {\"name\": <tool or respond>, \"arguments\": {...}}'.";

struct EpisodeResult
{
    Trajectory trajectory;
    std::string domainId;
    Json finalDb;
    Json expectedDb;
    int matchedSteps = 0;
    int idealSteps = 0;
    bool providerUnreachable = false;
};

struct Stage1Result
{
    std::vector<EpisodeResult> episodes;
    /// Indices into `episodes` with reward 0.
    std::vector<std::size_t> failures;
};

struct MemorySweepRow
{
    std::string domainId;
    int k = 0;
    double passHat1 = 0.0;
};

struct FamaResult
{
    Stage1Result stage1;
    std::vector<ErrorAnalysisReport> reports;
    std::vector<FailureAttribution> attributions;
    std::vector<Recommendation> recommendations;
    std::map<std::string, AgentSubset> domainSubsets;
    std::vector<EpisodeResult> stage3;
    std::vector<MemorySweepRow> memorySweep;
    MetricsReport stage1Metrics;
    MetricsReport stage3Metrics;
};

struct AblationRow
{
    int k = 0;
    std::vector<EpisodeResult> episodes;
    MetricsReport metrics;
};

/// Metrics for a batch of episodes, including end-to-end and process accuracy.
[[nodiscard]] MetricsReport summarize(const std::string& label, const std::vector<EpisodeResult>& episodes, int maxK = 5);
[[nodiscard]] std::vector<Trajectory> trajectoriesOf(const std::vector<EpisodeResult>& episodes);

/// Runs episodes under a method and drives the full failure-aware pipeline.
class MethodRunner
{
public:
    MethodRunner(RunConfig config, const EndpointRegistry& endpoints, const PromptLibrary& prompts,
                 std::vector<ExtensionAgent> extensions = {});

    /// One episode. `protocol` selects how the tool agent decides (FC/Base
    /// native calls, ReAct text, SelfReflection critique-and-revise);
    /// `subset` selects the helper agents; `label` is recorded as the method.
    [[nodiscard]] EpisodeResult runEpisode(const Domain& domain, const Task& task, const AgentSubset& subset, int trial,
                                           Method protocol, const std::string& label) const;

    /// Every task for n_trials under a non-FAMA method (IRMA uses the full catalog).
    [[nodiscard]] std::vector<EpisodeResult> runMethod(Method method, const DomainSet& domains,
                                                       const std::vector<Task>& tasks) const;

    /// Baseline pass collecting every failed trial.
    [[nodiscard]] Stage1Result runStage1(const DomainSet& domains, const std::vector<Task>& tasks) const;

    /// Stage 1, failure analysis, per-domain aggregation, and a Stage 3 re-run of all tasks.
    [[nodiscard]] FamaResult runFama(const DomainSet& domains, const std::vector<Task>& tasks,
                                     const CauseCatalog& catalog) const;

    /// Re-runs all tasks with `subset` for each memory window k.
    [[nodiscard]] std::vector<AblationRow> runMemoryAblation(const DomainSet& domains, const std::vector<Task>& tasks,
                                                             const std::vector<int>& kValues, AgentSubset subset) const;

    [[nodiscard]] const RunConfig& config() const { return _config; }

private:
    [[nodiscard]] std::vector<EpisodeResult> runAll(const DomainSet& domains, const std::vector<Task>& tasks,
                                                    const std::function<AgentSubset(const Task&)>& subsetFor,
                                                    Method protocol, const std::string& label) const;

    RunConfig _config;
    const EndpointRegistry& _endpoints;
    const PromptLibrary& _prompts;
    std::vector<ExtensionAgent> _extensions;
};

/// Runs fn(0..count-1) on up to `workers` threads; results keep index order.
template <typename T>
[[nodiscard]] std::vector<T> parallelMap(std::size_t count, int workers, const std::function<T(std::size_t)>& fn)
{
    std::vector<std::optional<T>> slots(count);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failureMutex;

    auto work = [&] {
        for (auto i = next++; i < count; i = next++)
        {
            try
            {
                slots[i] = fn(i);
            }
            catch (...)
            {
                std::lock_guard lock(failureMutex);
                if (!failure)
                    failure = std::current_exception();
            }
        }
    };

    auto const threads = static_cast<std::size_t>(std::max(1, workers));
    if (threads == 1 || count <= 1)
    {
        work();
    }
    else
    {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < std::min(threads, count); ++t)
            pool.emplace_back(work);
    }
    if (failure)
        std::rethrow_exception(failure);

    std::vector<T> out;
    out.reserve(count);
    for (auto& slot: slots)
        out.push_back(std::move(*slot));
    return out;
}

} // namespace fama
