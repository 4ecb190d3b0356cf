// SPDX-License-Identifier: Apache-2.0
#include "fama/conversation.hpp"

#include "fama/errors.hpp"

#include <algorithm>
#include <cctype>
#include <map>

namespace fama
{

std::string_view toString(Role role)
{
    switch (role)
    {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
        case Role::Tool: return "tool";
    }
    return "user";
}

Role roleFromString(std::string_view text)
{
    if (text == "system")
        return Role::System;
    if (text == "user")
        return Role::User;
    if (text == "assistant")
        return Role::Assistant;
    if (text == "tool")
        return Role::Tool;
    throw ConfigError("unknown role '" + std::string(text) + "'");
}

Message Message::system(std::string text)
{
    Message m;
    m.role = Role::System;
    m.tokenCount = approxTokens(text);
    m.content = std::move(text);
    return m;
}

Message Message::user(std::string text)
{
    Message m;
    m.role = Role::User;
    m.tokenCount = approxTokens(text);
    m.content = std::move(text);
    return m;
}

Message Message::assistant(std::string text, std::vector<ToolCall> calls)
{
    Message m;
    m.role = Role::Assistant;
    m.tokenCount = approxTokens(text);
    m.content = std::move(text);
    m.toolCalls = std::move(calls);
    return m;
}

Message Message::tool(std::string callId, std::string text)
{
    Message m;
    m.role = Role::Tool;
    m.tokenCount = approxTokens(text);
    m.content = std::move(text);
    m.toolCallId = std::move(callId);
    return m;
}

std::string_view toString(Termination termination)
{
    switch (termination)
    {
        case Termination::Completed: return "completed";
        case Termination::MaxTurns: return "max_turns";
        case Termination::ContextOverflow: return "context_overflow";
        case Termination::ProviderError: return "provider_error";
    }
    return "completed";
}

Termination terminationFromString(std::string_view text)
{
    if (text == "completed")
        return Termination::Completed;
    if (text == "max_turns")
        return Termination::MaxTurns;
    if (text == "context_overflow")
        return Termination::ContextOverflow;
    if (text == "provider_error")
        return Termination::ProviderError;
    throw ConfigError("unknown termination '" + std::string(text) + "'");
}

std::string_view toString(Method method)
{
    switch (method)
    {
        case Method::FC: return "FC";
        case Method::ReAct: return "ReAct";
        case Method::IRMA: return "IRMA";
        case Method::FAMA: return "FAMA";
        case Method::SelfReflection: return "SelfReflection";
        case Method::Base: return "Base";
    }
    return "FC";
}

Method methodFromString(std::string_view text)
{
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "fc")
        return Method::FC;
    if (lower == "react")
        return Method::ReAct;
    if (lower == "irma")
        return Method::IRMA;
    if (lower == "fama")
        return Method::FAMA;
    if (lower == "selfreflection" || lower == "self-reflection" || lower == "sr")
        return Method::SelfReflection;
    if (lower == "base")
        return Method::Base;
    throw ConfigError("unknown method '" + std::string(text) + "'");
}

namespace
{

std::string foldString(const std::string& s)
{
    auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos)
        return {};
    auto end = s.find_last_not_of(" \t\r\n");
    std::string out = s.substr(begin, end - begin + 1);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

} // namespace

Json canonicalArguments(const Json& arguments)
{
    if (arguments.is_string())
        return foldString(arguments.get<std::string>());
    if (arguments.is_object())
    {
        Json out = Json::object();
        for (auto it = arguments.begin(); it != arguments.end(); ++it)
            out[it.key()] = canonicalArguments(it.value());
        return out;
    }
    if (arguments.is_array())
    {
        Json out = Json::array();
        for (const auto& item: arguments)
            out.push_back(canonicalArguments(item));
        return out;
    }
    return arguments;
}

bool argumentsMatch(const Json& lhs, const Json& rhs)
{
    auto const a = canonicalArguments(lhs.is_null() ? Json::object() : lhs);
    auto const b = canonicalArguments(rhs.is_null() ? Json::object() : rhs);
    // Json equality treats 1 and 1.0 as equal, which is exact numeric comparison.
    return a == b;
}

std::vector<Violation> validateTrajectory(const Trajectory& trajectory)
{
    std::vector<Violation> violations;
    std::vector<std::string> pending;
    std::map<std::string, std::size_t> seenIds;

    for (std::size_t i = 0; i < trajectory.messages.size(); ++i)
    {
        const auto& m = trajectory.messages[i];
        if (m.tokenCount < 0)
            violations.push_back({i, "negative token_count"});

        if (!m.toolCalls.empty() && m.role != Role::Assistant)
            violations.push_back({i, "tool_calls on non-assistant message"});
        if (m.role == Role::Tool && !m.toolCallId)
            violations.push_back({i, "tool message without tool_call_id"});
        if (m.role != Role::Tool && m.toolCallId)
            violations.push_back({i, "tool_call_id on non-tool message"});

        if (m.role == Role::Tool)
        {
            if (pending.empty())
            {
                violations.push_back({i, "tool message with no pending call"});
            }
            else if (m.toolCallId)
            {
                auto it = std::find(pending.begin(), pending.end(), *m.toolCallId);
                if (it == pending.end())
                    violations.push_back({i, "tool message resolves unknown call '" + *m.toolCallId + "'"});
                else
                    pending.erase(it);
            }
            continue;
        }

        if (!pending.empty())
        {
            violations.push_back({i, "unresolved tool call(s) before non-tool message"});
            pending.clear();
        }

        for (const auto& call: m.toolCalls)
        {
            if (auto [it, inserted] = seenIds.emplace(call.id, i); !inserted)
                violations.push_back({i, "duplicate tool call id '" + call.id + "'"});
            pending.push_back(call.id);
        }
    }

    if (trajectory.reward != 0 && trajectory.reward != 1)
        violations.push_back({trajectory.messages.size(), "reward outside {0,1}"});
    if (trajectory.termination == Termination::ContextOverflow && trajectory.reward != 0)
        violations.push_back({trajectory.messages.size(), "context_overflow with nonzero reward"});
    if (trajectory.assistantTokens < 0 || trajectory.overheadTokens < 0)
        violations.push_back({trajectory.messages.size(), "negative token totals"});

    return violations;
}

std::size_t countUserTurns(const std::vector<Message>& messages)
{
    return static_cast<std::size_t>(
        std::count_if(messages.begin(), messages.end(), [](const Message& m) { return m.role == Role::User; }));
}

std::size_t countUserTurns(const Trajectory& trajectory)
{
    return countUserTurns(trajectory.messages);
}

std::vector<ToolCall> executedToolCalls(const std::vector<Message>& messages)
{
    std::vector<ToolCall> calls;
    for (const auto& m: messages)
        if (m.role == Role::Assistant)
            calls.insert(calls.end(), m.toolCalls.begin(), m.toolCalls.end());
    return calls;
}

void to_json(Json& j, const ToolCall& call)
{
    j = Json{{"id", call.id}, {"name", call.name}, {"arguments", call.arguments}};
}

void from_json(const Json& j, ToolCall& call)
{
    call.id = j.value("id", "");
    call.name = j.at("name").get<std::string>();
    call.arguments = j.value("arguments", Json::object());
}

void to_json(Json& j, const Message& message)
{
    j = Json{{"role", toString(message.role)}, {"content", message.content}, {"token_count", message.tokenCount}};
    if (!message.toolCalls.empty())
        j["tool_calls"] = message.toolCalls;
    if (message.toolCallId)
        j["tool_call_id"] = *message.toolCallId;
}

void from_json(const Json& j, Message& message)
{
    message.role = roleFromString(j.at("role").get<std::string>());
    message.content = j.contains("content") && j["content"].is_string() ? j["content"].get<std::string>() : "";
    message.toolCalls = j.value("tool_calls", std::vector<ToolCall>{});
    if (j.contains("tool_call_id") && j["tool_call_id"].is_string())
        message.toolCallId = j["tool_call_id"].get<std::string>();
    else
        message.toolCallId.reset();
    if (j.contains("token_count") && j["token_count"].is_number_integer())
        message.tokenCount = j["token_count"].get<std::int64_t>();
    else
        message.tokenCount = approxTokens(message.content);
}

void to_json(Json& j, const Trajectory& t)
{
    j = Json{
        {"task_id", t.taskId},
        {"method", t.method},
        {"trial", t.trial},
        {"messages", t.messages},
        {"reward", t.reward},
        {"termination", toString(t.termination)},
        {"assistant_tokens", t.assistantTokens},
        {"overhead_tokens", t.overheadTokens},
        {"wall_time_s", t.wallTimeSeconds},
        {"assistant_time_s", t.assistantTimeSeconds},
    };
}

void from_json(const Json& j, Trajectory& t)
{
    t.taskId = j.at("task_id").get<std::string>();
    t.method = j.value("method", "");
    t.trial = j.value("trial", 0);
    t.messages = j.value("messages", std::vector<Message>{});
    t.reward = j.value("reward", 0);
    t.termination = terminationFromString(j.value("termination", "completed"));
    std::int64_t estimated = 0;
    for (const auto& m: t.messages)
        if (m.role == Role::Assistant)
            estimated += m.tokenCount;
    t.assistantTokens = j.value("assistant_tokens", estimated);
    t.overheadTokens = j.value("overhead_tokens", std::int64_t{0});
    t.wallTimeSeconds = j.value("wall_time_s", 0.0);
    t.assistantTimeSeconds = j.value("assistant_time_s", 0.0);
}

void to_json(Json& j, const IdealAction& action)
{
    j = Json{{"name", action.name}, {"arguments", action.arguments}};
}

void from_json(const Json& j, IdealAction& action)
{
    action.name = j.at("name").get<std::string>();
    if (j.contains("arguments"))
        action.arguments = j["arguments"];
    else
        action.arguments = j.value("kwargs", Json::object());
}

void to_json(Json& j, const Task& task)
{
    j = Json{
        {"id", task.id},
        {"domain_id", task.domainId},
        {"scenario", task.scenario},
        {"ideal_actions", task.idealActions},
        {"ideal_step_count", task.idealStepCount},
        {"expected_outputs", task.expectedOutputs},
    };
    if (task.expectedState)
        j["expected_state"] = *task.expectedState;
    if (!task.userScript.empty())
        j["user_script"] = task.userScript;
    if (!task.persona.empty())
        j["persona"] = task.persona;
}

void from_json(const Json& j, Task& task)
{
    task.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
    task.domainId = j.at("domain_id").get<std::string>();
    task.scenario = j.value("scenario", "");
    task.idealActions = j.value("ideal_actions", std::vector<IdealAction>{});
    task.idealStepCount = j.value("ideal_step_count", static_cast<int>(task.idealActions.size()));
    task.expectedOutputs = j.value("expected_outputs", std::vector<std::string>{});
    if (j.contains("expected_state") && j["expected_state"].is_string())
        task.expectedState = j["expected_state"].get<std::string>();
    task.userScript = j.value("user_script", std::vector<std::string>{});
    task.persona = j.value("persona", "");
}

namespace
{

// tau-bench style record: {user_id, instruction, actions: [{name, kwargs}], outputs}
Task fromBenchmarkRecord(const Json& j, std::size_t index, const std::string& domainId)
{
    Task task;
    task.id = j.contains("id") ? (j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump())
                               : domainId + "-" + std::to_string(index);
    task.domainId = j.value("domain_id", domainId);
    task.scenario = j.value("instruction", "");
    task.idealActions = j.value("actions", std::vector<IdealAction>{});
    task.idealStepCount = static_cast<int>(task.idealActions.size());
    for (const auto& out: j.value("outputs", Json::array()))
        task.expectedOutputs.push_back(out.is_string() ? out.get<std::string>() : out.dump());
    task.expectedState = "replay of ideal actions";
    return task;
}

} // namespace

std::vector<Task> parseTasks(const Json& document)
{
    const Json* list = &document;
    std::string defaultDomain;
    if (document.is_object())
    {
        defaultDomain = document.value("domain_id", "");
        if (!document.contains("tasks"))
            throw ConfigError("task file: expected an array or an object with 'tasks'");
        list = &document["tasks"];
    }
    if (!list->is_array())
        throw ConfigError("task file: 'tasks' must be an array");

    std::vector<Task> tasks;
    for (std::size_t i = 0; i < list->size(); ++i)
    {
        const auto& record = (*list)[i];
        Task task;
        try
        {
            if (record.contains("actions") && !record.contains("ideal_actions"))
                task = fromBenchmarkRecord(record, i, defaultDomain);
            else
            {
                Json copy = record;
                if (!copy.contains("domain_id") && !defaultDomain.empty())
                    copy["domain_id"] = defaultDomain;
                task = copy.get<Task>();
            }
        }
        catch (const Json::exception& e)
        {
            throw ConfigError("task file: record " + std::to_string(i) + ": " + e.what());
        }
        if (task.idealStepCount != static_cast<int>(task.idealActions.size()))
            throw ConfigError("task '" + task.id + "': ideal_step_count does not match ideal_actions");
        tasks.push_back(std::move(task));
    }
    return tasks;
}

} // namespace fama

namespace fama
{

std::string renderTranscript(const std::vector<Message>& messages)
{
    std::string out;
    for (const auto& m: messages)
    {
        if (m.role == Role::System)
            continue;
        out.append(toString(m.role));
        if (m.toolCallId)
            out += "[" + *m.toolCallId + "]";
        out += ": ";
        out += m.content;
        for (const auto& call: m.toolCalls)
            out += "\n  -> " + call.name + " " + canonicalDump(call.arguments);
        out += "\n";
    }
    return out;
}

} // namespace fama
