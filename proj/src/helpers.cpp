// SPDX-License-Identifier: Apache-2.0
#include "fama/helpers.hpp"

#include "fama/errors.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <functional>
#include <sstream>

namespace fama
{

std::string_view toString(AgentKind kind)
{
    switch (kind)
    {
        case AgentKind::DCE: return "DCE";
        case AgentKind::TSA: return "TSA";
        case AgentKind::TOR: return "TOR";
        case AgentKind::Planner: return "Planner";
        case AgentKind::Verifier: return "Verifier";
        case AgentKind::Memory: return "Memory";
    }
    return "DCE";
}

namespace
{

std::string lowerCopy(std::string_view text)
{
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string trim(std::string_view text)
{
    auto begin = text.find_first_not_of(" \t\r\n");
    if (begin == std::string_view::npos)
        return {};
    auto end = text.find_last_not_of(" \t\r\n");
    return std::string(text.substr(begin, end - begin + 1));
}

std::vector<std::string> nonEmptyLines(const std::string& text)
{
    std::vector<std::string> lines;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);)
        if (auto t = trim(line); !t.empty())
            lines.push_back(std::move(t));
    return lines;
}

// Strips "1.", "2)", "-", "*" style list markers.
std::string stripListMarker(const std::string& line)
{
    std::size_t i = 0;
    while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i])))
        ++i;
    if (i > 0 && i < line.size() && (line[i] == '.' || line[i] == ')'))
        return trim(std::string_view(line).substr(i + 1));
    if (!line.empty() && (line[0] == '-' || line[0] == '*'))
        return trim(std::string_view(line).substr(1));
    return line;
}

std::optional<int> parseMemoryK(std::string_view text)
{
    auto const lower = lowerCopy(text);
    auto pos = lower.find("k=");
    if (pos == std::string::npos)
        return std::nullopt;
    pos += 2;
    int value = 0;
    bool any = false;
    while (pos < lower.size() && std::isdigit(static_cast<unsigned char>(lower[pos])))
    {
        value = value * 10 + (lower[pos++] - '0');
        any = true;
    }
    return any ? std::optional<int>(value) : std::nullopt;
}

} // namespace

std::optional<AgentKind> agentKindFromString(std::string_view text)
{
    auto name = lowerCopy(trim(text));
    if (auto paren = name.find('('); paren != std::string::npos)
        name = trim(name.substr(0, paren));
    if (name == "dce" || name == "domain constraints extractor")
        return AgentKind::DCE;
    if (name == "tsa" || name == "tool suggestion agent")
        return AgentKind::TSA;
    if (name == "tor" || name == "tool output reformulator")
        return AgentKind::TOR;
    if (name == "planner")
        return AgentKind::Planner;
    if (name == "verifier" || name == "decision verifier")
        return AgentKind::Verifier;
    if (name == "memory" || name == "user context manager")
        return AgentKind::Memory;
    return std::nullopt;
}

std::string_view describe(AgentKind kind)
{
    switch (kind)
    {
        case AgentKind::DCE:
            return "Reads the domain policy and the conversation and lists the policy rules that apply to the "
                   "user's current request, so the assistant checks preconditions before acting.";
        case AgentKind::TSA:
            return "Proposes a short list of registry tools that fit the user's current request.";
        case AgentKind::TOR:
            return "Condenses a long tool output into the facts needed for the current goal, so values are "
                   "read from the right entity.";
        case AgentKind::Planner:
            return "Writes a numbered step plan for the current user request and refreshes it when the user "
                   "asks for something new.";
        case AgentKind::Verifier:
            return "Checks each proposed assistant action against the plan and conversation; replies PASS or "
                   "RECHECK with a suggested fix that triggers one re-decision.";
        case AgentKind::Memory:
            return "Keeps the k most recent user queries verbatim in the assistant context so earlier "
                   "requests and constraints are not lost.";
    }
    return "";
}

std::string AgentSubset::label() const
{
    std::string out = "{";
    bool first = true;
    for (auto kind: kAgentCatalog)
    {
        if (!contains(kind))
            continue;
        if (!first)
            out += ", ";
        first = false;
        out += toString(kind);
        if (kind == AgentKind::Memory)
            out += "(k=" + std::to_string(memoryK) + ")";
    }
    return out + "}";
}

AgentSubset AgentSubset::full(int memoryK)
{
    AgentSubset subset;
    subset.members.insert(kAgentCatalog.begin(), kAgentCatalog.end());
    subset.memoryK = memoryK;
    return subset;
}

void to_json(Json& j, const AgentSubset& subset)
{
    Json agents = Json::array();
    for (auto kind: kAgentCatalog)
        if (subset.contains(kind))
            agents.push_back(toString(kind));
    j = Json{{"agents", agents}, {"memory_k", subset.contains(AgentKind::Memory) ? subset.memoryK : 0}};
}

void from_json(const Json& j, AgentSubset& subset)
{
    subset = {};
    for (const auto& name: j.value("agents", Json::array()))
    {
        if (!name.is_string())
            continue;
        if (auto kind = agentKindFromString(name.get<std::string>()))
        {
            subset.members.insert(*kind);
            if (*kind == AgentKind::Memory)
                if (auto k = parseMemoryK(name.get<std::string>()))
                    subset.memoryK = *k;
        }
    }
    if (j.contains("memory_k") && j["memory_k"].is_number_integer() && subset.contains(AgentKind::Memory))
        subset.memoryK = j["memory_k"].get<int>();
}

std::optional<Json> extractJsonObject(const std::string& text)
{
    for (std::size_t start = text.find('{'); start != std::string::npos; start = text.find('{', start + 1))
    {
        int depth = 0;
        bool inString = false;
        bool escaped = false;
        for (std::size_t i = start; i < text.size(); ++i)
        {
            char c = text[i];
            if (inString)
            {
                if (escaped)
                    escaped = false;
                else if (c == '\\')
                    escaped = true;
                else if (c == '"')
                    inString = false;
                continue;
            }
            if (c == '"')
                inString = true;
            else if (c == '{')
                ++depth;
            else if (c == '}' && --depth == 0)
            {
                auto parsed = Json::parse(text.substr(start, i - start + 1), nullptr, false);
                if (!parsed.is_discarded() && parsed.is_object())
                    return parsed;
                break;
            }
        }
    }
    return std::nullopt;
}

std::optional<VerifierVerdict> parseVerdict(const std::string& text)
{
    VerifierVerdict verdict;
    if (auto json = extractJsonObject(text); json && json->contains("status"))
    {
        auto const status = lowerCopy(json->value("status", ""));
        if (status != "pass" && status != "recheck")
            return std::nullopt;
        verdict.status = status == "pass" ? VerifierVerdict::Status::Pass : VerifierVerdict::Status::Recheck;
        verdict.rationale = json->value("rationale", "");
        if (json->contains("fix") && (*json)["fix"].is_string() && !(*json)["fix"].get<std::string>().empty())
            verdict.suggestedFix = (*json)["fix"].get<std::string>();
    }
    else
    {
        auto const body = trim(text);
        auto const lower = lowerCopy(body);
        std::string rest;
        if (lower.rfind("pass", 0) == 0)
        {
            verdict.status = VerifierVerdict::Status::Pass;
            rest = body.substr(4);
        }
        else if (lower.rfind("recheck", 0) == 0)
        {
            verdict.status = VerifierVerdict::Status::Recheck;
            rest = body.substr(7);
        }
        else
        {
            return std::nullopt;
        }
        rest = trim(rest);
        if (!rest.empty() && (rest.front() == ';' || rest.front() == ':'))
            rest = trim(rest.substr(1));
        auto const fixPos = lowerCopy(rest).find("fix:");
        if (fixPos != std::string::npos)
        {
            verdict.suggestedFix = trim(rest.substr(fixPos + 4));
            rest = trim(rest.substr(0, fixPos));
            while (!rest.empty() && rest.back() == ';')
                rest.pop_back();
        }
        verdict.rationale = trim(rest);
    }
    if (verdict.status == VerifierVerdict::Status::Recheck && (!verdict.suggestedFix || verdict.suggestedFix->empty()))
        verdict.suggestedFix = verdict.rationale.empty() ? "Re-check the proposed action." : verdict.rationale;
    return verdict;
}

HelperAgents::HelperAgents(const Gateway& judge, const PromptLibrary& prompts, HelperOptions options)
    : _judge(judge), _prompts(prompts), _options(options)
{
}

ChatResponse HelperAgents::ask(const std::string& prompt) const
{
    ChatRequest request;
    request.sampling = _options.sampling;
    request.messages.push_back(Message::user(prompt));
    return _judge.chat(request);
}

ContextFragment HelperAgents::extractDomainConstraints(const std::string& policyText,
                                                       const std::vector<Message>& transcript) const
{
    if (trim(policyText).empty())
        throw ConfigError("DCE requires a non-empty policy");

    ContextFragment fragment{"DCE", "", 0, {}};
    if (countUserTurns(transcript) == 0)
    {
        std::string digest = "Policy digest:\n";
        int n = 0;
        for (const auto& clause: nonEmptyLines(policyText))
            digest += std::to_string(++n) + ". " + stripListMarker(clause) + "\n";
        fragment.text = digest;
        fragment.tokenCount = approxTokens(digest);
        return fragment;
    }

    auto response = ask(_prompts.render("dce", {{"policy", policyText}, {"transcript", renderTranscript(transcript)}}));
    fragment.text = response.message.content;
    fragment.tokenCount = response.completionTokens;
    fragment.latencySeconds = response.latencySeconds;
    fragment.generated = true;
    return fragment;
}

ContextFragment HelperAgents::suggestTools(const std::vector<Message>& transcript,
                                           const std::vector<ToolSpec>& registry) const
{
    if (registry.empty())
        throw ConfigError("TSA requires a non-empty tool registry");

    std::string toolList;
    for (const auto& tool: registry)
        toolList += "- " + tool.name + ": " + tool.description + "\n";
    auto response = ask(_prompts.render("tsa", {{"tools", toolList},
                                                {"transcript", renderTranscript(transcript)},
                                                {"max_tools", std::to_string(_options.maxSuggestedTools)}}));

    std::vector<std::string> proposed;
    if (auto json = extractJsonObject(response.message.content); json && (*json)["tools"].is_array())
    {
        for (const auto& name: (*json)["tools"])
            if (name.is_string())
                proposed.push_back(trim(name.get<std::string>()));
    }
    else
    {
        std::string text = response.message.content;
        std::replace(text.begin(), text.end(), ',', '\n');
        for (const auto& line: nonEmptyLines(text))
            proposed.push_back(stripListMarker(line));
    }

    std::vector<std::string> kept;
    for (const auto& name: proposed)
    {
        bool known = std::any_of(registry.begin(), registry.end(), [&](const ToolSpec& t) { return t.name == name; });
        if (!known)
        {
            spdlog::debug("TSA proposed unknown tool '{}', dropped", name);
            continue;
        }
        if (std::find(kept.begin(), kept.end(), name) == kept.end())
            kept.push_back(name);
        if (kept.size() == _options.maxSuggestedTools)
            break;
    }

    ContextFragment fragment{"TSA", "", response.completionTokens, {}};
    fragment.latencySeconds = response.latencySeconds;
    fragment.generated = true;
    fragment.items = kept;
    if (!kept.empty())
    {
        fragment.text = "Suggested tools: ";
        for (std::size_t i = 0; i < kept.size(); ++i)
            fragment.text += (i ? ", " : "") + kept[i];
    }
    return fragment;
}

ContextFragment HelperAgents::reformulateToolOutput(const Message& rawToolMessage, const std::string& currentGoal) const
{
    if (rawToolMessage.role != Role::Tool)
        throw ConfigError("TOR expects a tool message");

    ContextFragment fragment{"TOR", "", 0, {}};
    if (rawToolMessage.tokenCount <= _options.torThresholdTokens)
    {
        fragment.text = rawToolMessage.content;
        fragment.tokenCount = rawToolMessage.tokenCount;
        return fragment;
    }

    auto response = ask(_prompts.render("tor", {{"goal", currentGoal}, {"tool_output", rawToolMessage.content}}));
    fragment.text = response.message.content;
    fragment.tokenCount = response.completionTokens;
    fragment.latencySeconds = response.latencySeconds;
    fragment.generated = true;
    if (fragment.tokenCount >= rawToolMessage.tokenCount)
    {
        // Keep the distilled fragment strictly smaller than its source.
        std::istringstream words(fragment.text);
        std::string word;
        std::string clipped;
        std::int64_t n = 0;
        while (n < _options.torThresholdTokens && words >> word)
        {
            clipped += (n++ ? " " : "") + word;
        }
        fragment.text = clipped;
        fragment.tokenCount = n;
    }
    return fragment;
}

ContextFragment HelperAgents::plan(const std::vector<Message>& transcript) const
{
    auto response = ask(_prompts.render("planner", {{"transcript", renderTranscript(transcript)}}));
    ContextFragment fragment{"Planner", "", response.completionTokens, {}};
    fragment.latencySeconds = response.latencySeconds;
    fragment.generated = true;
    int n = 0;
    for (const auto& line: nonEmptyLines(response.message.content))
    {
        auto step = stripListMarker(line);
        fragment.items.push_back(step);
        fragment.text += std::to_string(++n) + ". " + step + "\n";
    }
    return fragment;
}

namespace
{

std::string renderAction(const Message& action)
{
    if (action.toolCalls.empty())
        return "reply to user: " + action.content;
    std::string out;
    for (const auto& call: action.toolCalls)
        out += (out.empty() ? "" : "\n") + std::string("tool call: ") + call.name + "(" + canonicalDump(call.arguments) + ")";
    return out;
}

} // namespace

VerifierVerdict HelperAgents::verify(const Message& proposedAction, const ContextFragment* planFragment,
                                     const std::vector<Message>& transcript) const
{
    try
    {
        auto response = ask(_prompts.render("verifier", {{"plan", planFragment ? planFragment->text : "(no plan)"},
                                                         {"transcript", renderTranscript(transcript)},
                                                         {"action", renderAction(proposedAction)}}));
        auto verdict = parseVerdict(response.message.content);
        if (!verdict)
        {
            spdlog::warn("verifier output unparseable, defaulting to PASS");
            verdict = VerifierVerdict{};
            verdict->rationale = "unparseable verifier output";
        }
        verdict->completionTokens = response.completionTokens;
        verdict->latencySeconds = response.latencySeconds;
        return *verdict;
    }
    catch (const Error& e)
    {
        spdlog::warn("verifier call failed, defaulting to PASS: {}", e.what());
        VerifierVerdict verdict;
        verdict.rationale = std::string("verifier unavailable: ") + e.what();
        return verdict;
    }
}

ContextFragment HelperAgents::runExtension(const std::string& name, const std::string& templateName,
                                           const std::vector<Message>& transcript) const
{
    auto response = ask(_prompts.render(templateName, {{"transcript", renderTranscript(transcript)}}));
    ContextFragment fragment{name, response.message.content, response.completionTokens, {}};
    fragment.latencySeconds = response.latencySeconds;
    fragment.generated = true;
    return fragment;
}

ContextFragment memoryWindow(const std::vector<Message>& transcript, int k)
{
    if (k < 0)
        throw ConfigError("memory window k must be non-negative");
    ContextFragment fragment{"Memory", "", 0, {}};
    if (k == 0)
        return fragment;

    for (auto it = transcript.rbegin(); it != transcript.rend() && fragment.items.size() < static_cast<std::size_t>(k); ++it)
        if (it->role == Role::User)
            fragment.items.push_back(it->content);
    std::reverse(fragment.items.begin(), fragment.items.end());
    if (fragment.items.empty())
        return fragment;

    fragment.text = "Recent user queries (oldest first):\n";
    for (std::size_t i = 0; i < fragment.items.size(); ++i)
        fragment.text += std::to_string(i + 1) + ". " + fragment.items[i] + "\n";
    fragment.tokenCount = approxTokens(fragment.text);
    return fragment;
}

ContextComposer::ContextComposer(const HelperAgents& agents, AgentSubset subset, std::string policyText,
                                 std::vector<ToolSpec> registry, std::vector<ExtensionAgent> extensions)
    : _agents(agents), _subset(std::move(subset)), _policy(std::move(policyText)), _registry(std::move(registry)),
      _extensions(std::move(extensions))
{
}

ComposedContext ContextComposer::compose(const std::vector<Message>& transcript)
{
    struct Slot
    {
        int rank;
        std::string name;
        std::function<std::optional<ContextFragment>()> produce;
    };
    std::vector<Slot> slots;
    ComposedContext out;

    if (_subset.contains(AgentKind::Memory))
        slots.push_back({10, "Memory", [&] { return std::optional(memoryWindow(transcript, _subset.memoryK)); }});
    if (_subset.contains(AgentKind::DCE))
        slots.push_back({20, "DCE", [&] { return std::optional(_agents.extractDomainConstraints(_policy, transcript)); }});
    if (_subset.contains(AgentKind::TSA))
        slots.push_back({30, "TSA", [&] { return std::optional(_agents.suggestTools(transcript, _registry)); }});
    if (_subset.contains(AgentKind::TOR))
    {
        slots.push_back({40, "TOR", [&]() -> std::optional<ContextFragment> {
                             if (transcript.empty() || transcript.back().role != Role::Tool)
                                 return std::nullopt;
                             std::string goal;
                             for (auto it = transcript.rbegin(); it != transcript.rend(); ++it)
                                 if (it->role == Role::User)
                                 {
                                     goal = it->content;
                                     break;
                                 }
                             return _agents.reformulateToolOutput(transcript.back(), goal);
                         }});
    }
    if (_subset.contains(AgentKind::Planner))
    {
        slots.push_back({50, "Planner", [&]() -> std::optional<ContextFragment> {
                             auto const turns = countUserTurns(transcript);
                             if (_plan && turns == _planUserTurns)
                             {
                                 auto cached = *_plan;
                                 cached.generated = false;
                                 cached.latencySeconds = 0.0;
                                 return cached;
                             }
                             _plan = _agents.plan(transcript);
                             _planUserTurns = turns;
                             return _plan;
                         }});
    }
    for (const auto& ext: _extensions)
        slots.push_back({ext.rank, ext.name, [&] { return std::optional(_agents.runExtension(ext.name, ext.templateName, transcript)); }});

    std::stable_sort(slots.begin(), slots.end(), [](const Slot& a, const Slot& b) { return a.rank < b.rank; });

    for (auto& slot: slots)
    {
        try
        {
            auto fragment = slot.produce();
            if (!fragment)
                continue;
            if (fragment->generated)
                out.overheadTokens += fragment->tokenCount;
            out.latencySeconds += fragment->latencySeconds;
            out.fragments.push_back(std::move(*fragment));
        }
        catch (const Error& e)
        {
            spdlog::warn("helper agent {} failed, fragment skipped: {}", slot.name, e.what());
        }
    }
    return out;
}

std::string renderFragments(const std::vector<ContextFragment>& fragments)
{
    std::string out;
    for (const auto& f: fragments)
    {
        if (f.text.empty())
            continue;
        if (out.empty())
            out = "Context from helper agents:\n";
        out += "\n[" + f.source + "]\n" + f.text;
        if (f.text.back() != '\n')
            out += "\n";
    }
    return out;
}

} // namespace fama
