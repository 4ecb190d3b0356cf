// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fama/json_util.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fama
{

enum class Role
{
    System,
    User,
    Assistant,
    Tool,
};

[[nodiscard]] std::string_view toString(Role role);
[[nodiscard]] Role roleFromString(std::string_view text);

struct ToolCall
{
    std::string id;
    std::string name;
    Json arguments = Json::object();

    bool operator==(const ToolCall&) const = default;
};

struct Message
{
    Role role = Role::User;
    std::string content;
    std::vector<ToolCall> toolCalls;
    std::optional<std::string> toolCallId;
    std::int64_t tokenCount = 0;

    bool operator==(const Message&) const = default;

    [[nodiscard]] static Message system(std::string text);
    [[nodiscard]] static Message user(std::string text);
    [[nodiscard]] static Message assistant(std::string text, std::vector<ToolCall> calls = {});
    [[nodiscard]] static Message tool(std::string callId, std::string text);
};

enum class Termination
{
    Completed,
    MaxTurns,
    ContextOverflow,
    ProviderError,
};

[[nodiscard]] std::string_view toString(Termination termination);
[[nodiscard]] Termination terminationFromString(std::string_view text);

enum class Method
{
    FC,
    ReAct,
    IRMA,
    FAMA,
    SelfReflection,
    Base,
};

[[nodiscard]] std::string_view toString(Method method);
[[nodiscard]] Method methodFromString(std::string_view text);

struct Trajectory
{
    std::string taskId;
    std::string method;
    int trial = 0;
    std::vector<Message> messages;
    int reward = 0;
    Termination termination = Termination::Completed;
    std::int64_t assistantTokens = 0;
    std::int64_t overheadTokens = 0;
    double wallTimeSeconds = 0.0;
    /// Time spent in primary tool-agent calls only.
    double assistantTimeSeconds = 0.0;

    bool operator==(const Trajectory&) const = default;
};

struct IdealAction
{
    std::string name;
    Json arguments = Json::object();
};

struct Task
{
    std::string id;
    std::string domainId;
    std::string scenario;
    std::vector<IdealAction> idealActions;
    int idealStepCount = 0;
    std::vector<std::string> expectedOutputs;
    std::optional<std::string> expectedState;
    /// Optional canned user turns; when present the user simulator replays
    /// them instead of calling an endpoint.
    std::vector<std::string> userScript;
    std::string persona;
};

struct SamplingParams
{
    double temperature = 0.0;
    double topP = 1.0;
    std::optional<std::int64_t> maxTokens;

    bool operator==(const SamplingParams&) const = default;
};

struct RunConfig
{
    Method method = Method::FC;
    /// Tool-agent protocol used inside FAMA stages (FC or ReAct).
    Method famaBase = Method::FC;
    std::string toolAgentEndpoint = "tool";
    std::string userAgentEndpoint = "user";
    std::string judgeEndpoint = "judge";
    int nTrials = 1;
    int maxTurns = 30;
    std::int64_t maxContextTokens = 32768;
    int memoryK = 0;
    SamplingParams sampling;
    std::uint64_t seed = 0;
    double aggregationThreshold = 0.5;
    bool sweepMemoryK = false;
    std::vector<int> memoryKSweep = {0, 2, 4, 6};
    int workers = 1;
    int torThresholdTokens = 200;
};

/// Canonical comparison used for ideal actions: keys sorted, strings trimmed
/// and case-folded, numbers compared exactly.
[[nodiscard]] Json canonicalArguments(const Json& arguments);
[[nodiscard]] bool argumentsMatch(const Json& lhs, const Json& rhs);

struct Violation
{
    std::size_t index = 0;
    std::string description;

    bool operator==(const Violation&) const = default;
};

[[nodiscard]] std::vector<Violation> validateTrajectory(const Trajectory& trajectory);

[[nodiscard]] std::size_t countUserTurns(const Trajectory& trajectory);
[[nodiscard]] std::size_t countUserTurns(const std::vector<Message>& messages);

/// Tool calls issued by the assistant, in order.
[[nodiscard]] std::vector<ToolCall> executedToolCalls(const std::vector<Message>& messages);

void to_json(Json& j, const ToolCall& call);
void from_json(const Json& j, ToolCall& call);
void to_json(Json& j, const Message& message);
void from_json(const Json& j, Message& message);
void to_json(Json& j, const Trajectory& trajectory);
void from_json(const Json& j, Trajectory& trajectory);
void to_json(Json& j, const IdealAction& action);
void from_json(const Json& j, IdealAction& action);
void to_json(Json& j, const Task& task);
void from_json(const Json& j, Task& task);

[[nodiscard]] std::vector<Task> parseTasks(const Json& document);

} // namespace fama

namespace fama
{

/// Plain-text rendering of a transcript for judge and helper prompts:
/// one "role: content" block per message, tool calls as "-> name {args}".
[[nodiscard]] std::string renderTranscript(const std::vector<Message>& messages);

} // namespace fama
