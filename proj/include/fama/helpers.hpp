// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fama/conversation.hpp"
#include "fama/gateway.hpp"
#include "fama/prompts.hpp"

#include <array>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace fama
{

enum class AgentKind
{
    DCE,
    TSA,
    TOR,
    Planner,
    Verifier,
    Memory,
};

inline constexpr std::array<AgentKind, 6> kAgentCatalog = {
    AgentKind::DCE, AgentKind::TSA, AgentKind::TOR, AgentKind::Planner, AgentKind::Verifier, AgentKind::Memory,
};

[[nodiscard]] std::string_view toString(AgentKind kind);
/// Accepts the short names, case-insensitively, and "Memory(k=N)".
[[nodiscard]] std::optional<AgentKind> agentKindFromString(std::string_view text);
/// One-paragraph functional description, used by the mitigation agent.
[[nodiscard]] std::string_view describe(AgentKind kind);

/// A set of helper agents. Memory carries its window size k.
struct AgentSubset
{
    std::set<AgentKind> members;
    int memoryK = 0;

    [[nodiscard]] bool contains(AgentKind kind) const { return members.count(kind) > 0; }
    [[nodiscard]] bool empty() const { return members.empty(); }
    [[nodiscard]] std::string label() const;

    [[nodiscard]] static AgentSubset full(int memoryK);

    bool operator==(const AgentSubset&) const = default;
};

void to_json(Json& j, const AgentSubset& subset);
void from_json(const Json& j, AgentSubset& subset);

struct ContextFragment
{
    std::string source;
    std::string text;
    std::int64_t tokenCount = 0;
    /// Non-empty for Memory fragments: the retained user messages in order.
    std::vector<std::string> items;
    double latencySeconds = 0.0;
    /// True when the text came from a judge call; only generated fragments count as overhead.
    bool generated = false;
};

struct VerifierVerdict
{
    enum class Status
    {
        Pass,
        Recheck,
    };

    Status status = Status::Pass;
    std::string rationale;
    std::optional<std::string> suggestedFix;
    std::int64_t completionTokens = 0;
    double latencySeconds = 0.0;
};

/// Parses "PASS; rationale" / "RECHECK; rationale; fix: ..." or a JSON
/// object {"status", "rationale", "fix"}. Returns nullopt when neither fits.
[[nodiscard]] std::optional<VerifierVerdict> parseVerdict(const std::string& text);

/// First balanced {...} block in `text` that parses as a JSON object.
[[nodiscard]] std::optional<Json> extractJsonObject(const std::string& text);

struct HelperOptions
{
    /// Tool outputs at or below this many tokens pass through TOR verbatim.
    std::int64_t torThresholdTokens = 200;
    std::size_t maxSuggestedTools = 5;
    SamplingParams sampling;
};

/// The helper-agent catalog. Every agent except Memory is one judge call.
class HelperAgents
{
public:
    HelperAgents(const Gateway& judge, const PromptLibrary& prompts, HelperOptions options = {});

    [[nodiscard]] ContextFragment extractDomainConstraints(const std::string& policyText,
                                                           const std::vector<Message>& transcript) const;
    [[nodiscard]] ContextFragment suggestTools(const std::vector<Message>& transcript,
                                               const std::vector<ToolSpec>& registry) const;
    [[nodiscard]] ContextFragment reformulateToolOutput(const Message& rawToolMessage, const std::string& currentGoal) const;
    [[nodiscard]] ContextFragment plan(const std::vector<Message>& transcript) const;
    [[nodiscard]] VerifierVerdict verify(const Message& proposedAction, const ContextFragment* planFragment,
                                         const std::vector<Message>& transcript) const;
    [[nodiscard]] ContextFragment runExtension(const std::string& name, const std::string& templateName,
                                               const std::vector<Message>& transcript) const;

    [[nodiscard]] const HelperOptions& options() const { return _options; }

private:
    ChatResponse ask(const std::string& prompt) const;

    const Gateway& _judge;
    const PromptLibrary& _prompts;
    HelperOptions _options;
};

/// Memory module: the min(k, U) most recent user messages, verbatim and in order.
[[nodiscard]] ContextFragment memoryWindow(const std::vector<Message>& transcript, int k);

/// A registered extension agent: its prompt template receives {{transcript}}
/// and its fragment is placed by `rank` among the built-ins
/// (Memory 10, DCE 20, TSA 30, TOR 40, Planner 50).
struct ExtensionAgent
{
    std::string name;
    std::string templateName;
    int rank = 60;
};

struct ComposedContext
{
    std::vector<ContextFragment> fragments;
    /// Tokens of fragments produced by this call (a cached plan counts once).
    std::int64_t overheadTokens = 0;
    double latencySeconds = 0.0;
};

/// Per-episode context builder. Invokes exactly the agents in the subset in
/// the fixed order Memory, DCE, TSA, TOR, Planner. The plan is regenerated
/// only when a new user message has arrived.
class ContextComposer
{
public:
    ContextComposer(const HelperAgents& agents, AgentSubset subset, std::string policyText,
                    std::vector<ToolSpec> registry, std::vector<ExtensionAgent> extensions = {});

    [[nodiscard]] ComposedContext compose(const std::vector<Message>& transcript);

    [[nodiscard]] const ContextFragment* currentPlan() const { return _plan ? &*_plan : nullptr; }
    [[nodiscard]] const AgentSubset& subset() const { return _subset; }

private:
    const HelperAgents& _agents;
    AgentSubset _subset;
    std::string _policy;
    std::vector<ToolSpec> _registry;
    std::vector<ExtensionAgent> _extensions;
    std::optional<ContextFragment> _plan;
    std::size_t _planUserTurns = 0;
};

/// Text of the system-adjacent context message, empty when nothing to inject.
[[nodiscard]] std::string renderFragments(const std::vector<ContextFragment>& fragments);

} // namespace fama
