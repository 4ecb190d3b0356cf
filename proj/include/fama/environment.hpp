// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fama/conversation.hpp"
#include "fama/gateway.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace fama
{

/// A tool in a domain registry. The handler is declarative so that every
/// handler is total over schema-valid arguments:
///   {"op": "get",    "table": T, "key": ARG}
///   {"op": "find",   "table": T, "match": {FIELD: ARG, ...}}
///   {"op": "list",   "table": T}
///   {"op": "update", "table": T, "key": ARG, "set": {FIELD: VALUE|"$ARG"},
///                    "require": {FIELD: [ALLOWED...]}, "require_contains": {FIELD: "$ARG"}}
///   {"op": "const",  "result": JSON}
struct ToolDefinition
{
    std::string name;
    std::string description;
    Json parameters = Json::object();
    bool write = false;
    Json handler = Json::object();
};

struct Domain
{
    std::string id;
    std::string policyText;
    std::vector<ToolDefinition> tools;
    Json initialDb = Json::object();
    /// Tools whose execution ends the episode (e.g. a transfer to a human).
    std::vector<std::string> terminalTools;

    [[nodiscard]] const ToolDefinition* findTool(std::string_view name) const;
    [[nodiscard]] std::vector<ToolSpec> toolSpecs() const;
    [[nodiscard]] bool isTerminal(std::string_view toolName) const;
};

[[nodiscard]] Domain parseDomain(const Json& document);
[[nodiscard]] Domain loadDomain(const std::filesystem::path& path);

struct ExecutedCall
{
    ToolCall call;
    Json result;
    bool error = false;
};

struct EnvState
{
    Json db;
    std::vector<ExecutedCall> executedCalls;

    [[nodiscard]] std::string dbHash() const;
};

[[nodiscard]] EnvState reset(const Domain& domain, const Task& task);

/// Executes one tool call. Unknown tools, schema violations and handler
/// precondition failures come back in-band as {"error": ...} tool messages
/// and leave the database unchanged.
[[nodiscard]] Message step(const Domain& domain, EnvState& state, const ToolCall& call);

/// Database produced by replaying the task's ideal actions from the initial state.
[[nodiscard]] Json replayIdealState(const Domain& domain, const Task& task);
/// Database produced by replaying a trajectory's tool calls from the initial state.
[[nodiscard]] Json replayTrajectoryState(const Domain& domain, const Task& task, const Trajectory& trajectory);

/// 1 iff the end state matches the ideal replay (when the task constrains
/// state) and every expected output occurs in some assistant message.
[[nodiscard]] int computeReward(const Domain& domain, const EnvState& state, const Trajectory& trajectory, const Task& task);
[[nodiscard]] int computeReward(const Domain& domain, const Json& finalDb, const std::vector<Message>& messages, const Task& task);

/// Length of the longest prefix of the ideal action list that occurs as an
/// in-order subsequence of the executed tool calls.
[[nodiscard]] int alignProcess(const std::vector<Message>& messages, const Task& task);
[[nodiscard]] int alignProcess(const Trajectory& trajectory, const Task& task);

inline constexpr std::string_view kUserStopToken = "###STOP###";

class PromptLibrary;

/// Produces user turns either from the task's canned script or from an
/// LLM endpoint prompted with the persona and scenario.
class UserSimulator
{
public:
    UserSimulator(const Task& task, const Gateway* gateway, const PromptLibrary* prompts);

    /// Next user message, or nullopt for Stop.
    [[nodiscard]] std::optional<Message> next(const std::vector<Message>& transcript,
                                              std::optional<std::uint64_t> seed = std::nullopt) const;

    /// Latency of the last endpoint call, zero for scripted turns.
    [[nodiscard]] double lastLatency() const { return _lastLatency; }

private:
    const Task& _task;
    const Gateway* _gateway;
    const PromptLibrary* _prompts;
    mutable double _lastLatency = 0.0;
};

} // namespace fama
