// SPDX-License-Identifier: Apache-2.0
#include "fama/environment.hpp"

#include "fama/errors.hpp"
#include "fama/prompts.hpp"
#include "fama/schema.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <set>

namespace fama
{

const ToolDefinition* Domain::findTool(std::string_view name) const
{
    auto it = std::find_if(tools.begin(), tools.end(), [&](const ToolDefinition& t) { return t.name == name; });
    return it == tools.end() ? nullptr : &*it;
}

std::vector<ToolSpec> Domain::toolSpecs() const
{
    std::vector<ToolSpec> specs;
    specs.reserve(tools.size());
    for (const auto& tool: tools)
        specs.push_back({tool.name, tool.description, tool.parameters});
    return specs;
}

bool Domain::isTerminal(std::string_view toolName) const
{
    return std::find(terminalTools.begin(), terminalTools.end(), toolName) != terminalTools.end();
}

Domain parseDomain(const Json& document)
{
    Domain domain;
    try
    {
        domain.id = document.at("id").get<std::string>();
        const auto& policy = document.at("policy");
        if (policy.is_array())
        {
            for (const auto& line: policy)
                domain.policyText += line.get<std::string>() + "\n";
        }
        else
        {
            domain.policyText = policy.get<std::string>();
        }
        domain.initialDb = document.value("db", Json::object());
        domain.terminalTools = document.value("terminal_tools", std::vector<std::string>{});

        std::set<std::string> names;
        for (const auto& t: document.at("tools"))
        {
            ToolDefinition tool;
            tool.name = t.at("name").get<std::string>();
            tool.description = t.value("description", "");
            tool.parameters = t.value("parameters", Json{{"type", "object"}, {"properties", Json::object()}});
            tool.write = t.value("write", false);
            tool.handler = t.at("handler");
            if (!names.insert(tool.name).second)
                throw ConfigError("domain '" + domain.id + "': duplicate tool '" + tool.name + "'");
            auto const op = tool.handler.value("op", "");
            static const std::set<std::string> kOps = {"get", "find", "list", "update", "const"};
            if (!kOps.count(op))
                throw ConfigError("domain '" + domain.id + "': tool '" + tool.name + "' has unknown handler op '" + op + "'");
            if ((op == "update") != tool.write)
                throw ConfigError("domain '" + domain.id + "': tool '" + tool.name + "' write flag disagrees with handler");
            domain.tools.push_back(std::move(tool));
        }
    }
    catch (const Json::exception& e)
    {
        throw ConfigError(std::string("domain file: ") + e.what());
    }
    if (domain.policyText.empty())
        throw ConfigError("domain '" + domain.id + "': empty policy");
    return domain;
}

Domain loadDomain(const std::filesystem::path& path)
{
    return parseDomain(loadJsonFile(path));
}

std::string EnvState::dbHash() const
{
    return fnv1aHex(canonicalDump(db));
}

EnvState reset(const Domain& domain, const Task& task)
{
    if (task.domainId != domain.id)
        throw UnknownDomain("task '" + task.id + "' belongs to domain '" + task.domainId + "', not '" + domain.id + "'");
    EnvState state;
    state.db = domain.initialDb;
    return state;
}

namespace
{

Json errorPayload(std::string message)
{
    return Json{{"error", std::move(message)}};
}

std::string argumentText(const Json& value)
{
    return value.is_string() ? value.get<std::string>() : value.dump();
}

Json resolveValue(const Json& spec, const Json& args)
{
    if (spec.is_string())
    {
        auto const text = spec.get<std::string>();
        if (!text.empty() && text.front() == '$')
            return args.value(text.substr(1), Json());
    }
    return spec;
}

/// Returns {result, isError}. Mutates db only on success.
std::pair<Json, bool> runHandler(const ToolDefinition& tool, Json& db, const Json& args)
{
    const auto& h = tool.handler;
    auto const op = h.value("op", "");
    auto const tableName = h.value("table", "");

    if (op == "const")
        return {h.value("result", Json::object()), false};

    if (!db.contains(tableName) || !db[tableName].is_object())
        return {errorPayload("table '" + tableName + "' not available"), true};
    auto& table = db[tableName];

    if (op == "list")
        return {table, false};

    if (op == "find")
    {
        Json ids = Json::array();
        for (auto it = table.begin(); it != table.end(); ++it)
        {
            bool all = true;
            auto const matchSpec = h.value("match", Json::object());
            for (const auto& [field, argName]: matchSpec.items())
            {
                auto const wanted = canonicalArguments(args.value(argName.get<std::string>(), Json()));
                if (!it.value().contains(field) || canonicalArguments(it.value()[field]) != wanted)
                {
                    all = false;
                    break;
                }
            }
            if (all)
                ids.push_back(it.key());
        }
        if (ids.empty())
            return {errorPayload("no matching record in " + tableName), true};
        return {Json{{"ids", ids}}, false};
    }

    auto const key = argumentText(args.value(h.value("key", ""), Json()));
    if (!table.contains(key))
        return {errorPayload(tableName + " '" + key + "' not found"), true};

    if (op == "get")
        return {table[key], false};

    // update
    Json record = table[key];
    auto const requireSpec = h.value("require", Json::object());
    for (const auto& [field, allowed]: requireSpec.items())
    {
        auto const current = record.value(field, Json());
        if (std::find(allowed.begin(), allowed.end(), current) == allowed.end())
            return {errorPayload(tableName + " '" + key + "' cannot be modified: " + field + " is "
                                 + argumentText(current)),
                    true};
    }
    auto const requireContainsSpec = h.value("require_contains", Json::object());
    for (const auto& [field, argSpec]: requireContainsSpec.items())
    {
        auto const needle = resolveValue(argSpec, args);
        auto const& haystack = record.value(field, Json::array());
        bool found = haystack.is_array() && std::find(haystack.begin(), haystack.end(), needle) != haystack.end();
        if (!found && haystack.is_object())
            found = needle.is_string() && haystack.contains(needle.get<std::string>());
        if (!found)
            return {errorPayload(argumentText(needle) + " is not part of " + tableName + " '" + key + "'"), true};
    }
    auto const setSpec = h.value("set", Json::object());
    for (const auto& [field, valueSpec]: setSpec.items())
        record[field] = resolveValue(valueSpec, args);
    table[key] = record;
    return {record, false};
}

} // namespace

Message step(const Domain& domain, EnvState& state, const ToolCall& call)
{
    ExecutedCall logged{call, Json(), true};
    const auto* tool = domain.findTool(call.name);
    if (!tool)
    {
        spdlog::debug("unknown tool '{}'", call.name);
        logged.result = errorPayload("unknown tool '" + call.name + "'");
    }
    else if (auto violations = validateSchema(call.arguments, tool->parameters); !violations.empty())
    {
        logged.result = errorPayload("invalid arguments for " + call.name + ": " + violations.front());
    }
    else
    {
        Json scratch = tool->write ? state.db : Json();
        auto [result, isError] = runHandler(*tool, tool->write ? scratch : state.db, call.arguments);
        if (tool->write && !isError)
            state.db = std::move(scratch);
        logged.result = std::move(result);
        logged.error = isError;
    }

    auto message = Message::tool(call.id, canonicalDump(logged.result));
    state.executedCalls.push_back(std::move(logged));
    return message;
}

Json replayIdealState(const Domain& domain, const Task& task)
{
    auto state = reset(domain, task);
    int n = 0;
    for (const auto& action: task.idealActions)
        (void) step(domain, state, ToolCall{"ideal_" + std::to_string(++n), action.name, action.arguments});
    return state.db;
}

Json replayTrajectoryState(const Domain& domain, const Task& task, const Trajectory& trajectory)
{
    auto state = reset(domain, task);
    for (const auto& call: executedToolCalls(trajectory.messages))
        (void) step(domain, state, call);
    return state.db;
}

namespace
{

std::string lower(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

} // namespace

int computeReward(const Domain& domain, const Json& finalDb, const std::vector<Message>& messages, const Task& task)
{
    if (task.expectedState && canonicalDump(finalDb) != canonicalDump(replayIdealState(domain, task)))
        return 0;
    for (const auto& expected: task.expectedOutputs)
    {
        auto const needle = lower(expected);
        bool found = std::any_of(messages.begin(), messages.end(), [&](const Message& m) {
            return m.role == Role::Assistant && lower(m.content).find(needle) != std::string::npos;
        });
        if (!found)
            return 0;
    }
    return 1;
}

int computeReward(const Domain& domain, const EnvState& state, const Trajectory& trajectory, const Task& task)
{
    return computeReward(domain, state.db, trajectory.messages, task);
}

int alignProcess(const std::vector<Message>& messages, const Task& task)
{
    std::size_t matched = 0;
    for (const auto& call: executedToolCalls(messages))
    {
        if (matched == task.idealActions.size())
            break;
        const auto& ideal = task.idealActions[matched];
        if (call.name == ideal.name && argumentsMatch(call.arguments, ideal.arguments))
            ++matched;
    }
    return static_cast<int>(matched);
}

int alignProcess(const Trajectory& trajectory, const Task& task)
{
    return alignProcess(trajectory.messages, task);
}

UserSimulator::UserSimulator(const Task& task, const Gateway* gateway, const PromptLibrary* prompts)
    : _task(task), _gateway(gateway), _prompts(prompts)
{
}

std::optional<Message> UserSimulator::next(const std::vector<Message>& transcript,
                                           std::optional<std::uint64_t> seed) const
{
    _lastLatency = 0.0;
    if (!_task.userScript.empty())
    {
        auto const turn = countUserTurns(transcript);
        if (turn >= _task.userScript.size())
            return std::nullopt;
        return Message::user(_task.userScript[turn]);
    }

    if (!_gateway || !_prompts)
        throw ConfigError("task '" + _task.id + "' has no user script and no user endpoint is configured");

    // The simulator sees the dialogue from the other side: assistant turns
    // become its inputs and its own past turns become assistant turns.
    ChatRequest request;
    request.seed = seed;
    request.messages.push_back(Message::system(_prompts->render(
        "user_simulator", {{"persona", _task.persona.empty() ? "a typical customer" : _task.persona},
                           {"scenario", _task.scenario},
                           {"stop_token", std::string(kUserStopToken)}})));
    if (transcript.empty())
        request.messages.push_back(Message::user("Hi! How can I help you today?"));
    for (const auto& m: transcript)
    {
        if (m.role == Role::Assistant && !m.content.empty() && m.toolCalls.empty())
            request.messages.push_back(Message::user(m.content));
        else if (m.role == Role::User)
            request.messages.push_back(Message::assistant(m.content));
    }

    auto response = _gateway->chat(request);
    _lastLatency = response.latencySeconds;
    auto const& text = response.message.content;
    if (text.find(kUserStopToken) != std::string::npos)
        return std::nullopt;
    auto message = Message::user(text);
    message.tokenCount = response.completionTokens;
    return message;
}

} // namespace fama
