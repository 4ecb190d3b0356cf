// SPDX-License-Identifier: Apache-2.0
#include "fama/scripted_backend.hpp"

#include "fama/errors.hpp"

#include <algorithm>

namespace fama
{

ScriptedReply ScriptedReply::text(std::string content)
{
    ScriptedReply reply;
    reply.content = std::move(content);
    return reply;
}

ScriptedReply ScriptedReply::call(std::string name, Json arguments, std::string content)
{
    ScriptedReply reply;
    reply.content = std::move(content);
    reply.toolCalls.push_back({std::move(name), canonicalDump(arguments)});
    return reply;
}

void from_json(const Json& j, ScriptedReply& reply)
{
    if (j.is_string())
    {
        reply = ScriptedReply::text(j.get<std::string>());
        return;
    }
    reply.content = j.value("content", "");
    reply.toolCalls.clear();
    for (const auto& call: j.value("tool_calls", Json::array()))
    {
        ScriptedReply::Call c;
        c.name = call.at("name").get<std::string>();
        if (call.contains("arguments"))
            c.arguments = call["arguments"].is_string() ? call["arguments"].get<std::string>()
                                                         : canonicalDump(call["arguments"]);
        reply.toolCalls.push_back(std::move(c));
    }
    if (j.contains("prompt_tokens"))
        reply.promptTokens = j["prompt_tokens"].get<std::int64_t>();
    if (j.contains("completion_tokens"))
        reply.completionTokens = j["completion_tokens"].get<std::int64_t>();
    reply.latencySeconds = j.value("latency_s", 0.0);
    reply.failure = j.value("failure", "");
}

std::string requestFingerprint(const ChatRequest& request)
{
    std::string material;
    for (const auto& m: request.messages)
    {
        material.append(toString(m.role));
        material.push_back('\x1f');
        material.append(m.content);
        material.push_back('\x1e');
    }
    return fnv1aHex(material);
}

Json toWireResponse(const ScriptedReply& reply)
{
    Json message = {{"role", "assistant"}, {"content", reply.content}};
    if (!reply.toolCalls.empty())
    {
        Json calls = Json::array();
        for (std::size_t i = 0; i < reply.toolCalls.size(); ++i)
        {
            calls.push_back({
                {"id", "call_" + std::to_string(i + 1)},
                {"type", "function"},
                {"function", {{"name", reply.toolCalls[i].name}, {"arguments", reply.toolCalls[i].arguments}}},
            });
        }
        message["tool_calls"] = std::move(calls);
    }
    Json body = {
        {"object", "chat.completion"},
        {"choices", Json::array({{{"index", 0}, {"message", message},
                                  {"finish_reason", reply.toolCalls.empty() ? "stop" : "tool_calls"}}})},
    };
    if (reply.promptTokens || reply.completionTokens)
    {
        body["usage"] = Json::object();
        if (reply.promptTokens)
            body["usage"]["prompt_tokens"] = *reply.promptTokens;
        if (reply.completionTokens)
            body["usage"]["completion_tokens"] = *reply.completionTokens;
    }
    return body;
}

ScriptedBackend::ScriptedBackend(std::uint64_t seed) : _seed(seed) {}

void ScriptedBackend::onFingerprint(std::string fingerprint, ScriptedReply reply)
{
    std::lock_guard lock(_mutex);
    _byFingerprint.insert_or_assign(std::move(fingerprint), std::move(reply));
}

void ScriptedBackend::when(Responder responder)
{
    std::lock_guard lock(_mutex);
    _rules.push_back(std::move(responder));
}

void ScriptedBackend::whenAny(std::function<bool(const ChatRequest&)> predicate,
                              std::vector<ScriptedReply> alternatives)
{
    if (alternatives.empty())
        throw ConfigError("whenAny requires at least one alternative");
    auto const seed = _seed;
    when([predicate = std::move(predicate), alternatives = std::move(alternatives),
          seed](const ChatRequest& request) -> std::optional<ScriptedReply> {
        if (!predicate(request))
            return std::nullopt;
        auto const key = std::to_string(seed) + ":" + std::to_string(request.seed.value_or(0)) + ":"
                         + requestFingerprint(request);
        auto const index = std::stoull(fnv1aHex(key), nullptr, 16) % alternatives.size();
        return alternatives[index];
    });
}

void ScriptedBackend::enqueue(ScriptedReply reply)
{
    std::lock_guard lock(_mutex);
    _queue.push_back(std::move(reply));
}

std::optional<ScriptedReply> ScriptedBackend::lookup(const ChatRequest& request)
{
    if (auto it = _byFingerprint.find(requestFingerprint(request)); it != _byFingerprint.end())
        return it->second;
    for (const auto& rule: _rules)
        if (auto reply = rule(request))
            return reply;
    if (_position < _queue.size())
        return _queue[_position++];
    return std::nullopt;
}

BackendReply ScriptedBackend::send(const ChatRequest& request, const Json& wireBody)
{
    std::optional<ScriptedReply> reply;
    {
        std::lock_guard lock(_mutex);
        _log.push_back(wireBody);
        reply = lookup(request);
    }
    if (!reply)
        throw ProviderError("scripted backend has no reply for request " + requestFingerprint(request));
    if (reply->failure == "transient")
        throw TransientError("scripted transient failure");
    if (reply->failure == "fatal")
        throw ProviderError("scripted fatal failure");
    return {toWireResponse(*reply), reply->latencySeconds};
}

std::vector<Json> ScriptedBackend::requestLog() const
{
    std::lock_guard lock(_mutex);
    return _log;
}

std::size_t ScriptedBackend::requestCount() const
{
    std::lock_guard lock(_mutex);
    return _log.size();
}

namespace
{

bool contentContains(const Message& m, const std::string& needle)
{
    return m.content.find(needle) != std::string::npos;
}

// Matcher keys: last_role, last_contains, any_contains, none_contains,
// system_contains, user_turns, request_seed.
std::function<bool(const ChatRequest&)> compileMatcher(const Json& match)
{
    return [match](const ChatRequest& request) {
        const auto& messages = request.messages;
        if (match.contains("last_role"))
        {
            if (messages.empty() || toString(messages.back().role) != match["last_role"].get<std::string>())
                return false;
        }
        auto asList = [](const Json& v) {
            return v.is_array() ? v.get<std::vector<std::string>>() : std::vector<std::string>{v.get<std::string>()};
        };
        if (match.contains("last_contains"))
        {
            for (const auto& needle: asList(match["last_contains"]))
                if (messages.empty() || !contentContains(messages.back(), needle))
                    return false;
        }
        if (match.contains("any_contains"))
        {
            for (const auto& needle: asList(match["any_contains"]))
                if (std::none_of(messages.begin(), messages.end(),
                                 [&](const Message& m) { return contentContains(m, needle); }))
                    return false;
        }
        if (match.contains("none_contains"))
        {
            for (const auto& needle: asList(match["none_contains"]))
                if (std::any_of(messages.begin(), messages.end(),
                                [&](const Message& m) { return contentContains(m, needle); }))
                    return false;
        }
        if (match.contains("system_contains"))
        {
            for (const auto& needle: asList(match["system_contains"]))
                if (std::none_of(messages.begin(), messages.end(), [&](const Message& m) {
                        return m.role == Role::System && contentContains(m, needle);
                    }))
                    return false;
        }
        if (match.contains("user_turns")
            && countUserTurns(messages) != match["user_turns"].get<std::size_t>())
            return false;
        if (match.contains("request_seed") && request.seed != match["request_seed"].get<std::uint64_t>())
            return false;
        return true;
    };
}

} // namespace

std::shared_ptr<ScriptedBackend> ScriptedBackend::fromJson(const Json& script)
{
    auto backend = std::make_shared<ScriptedBackend>(script.value("seed", std::uint64_t{0}));
    try
    {
        if (script.contains("fingerprints"))
            for (const auto& [fp, reply]: script["fingerprints"].items())
                backend->onFingerprint(fp, reply.get<ScriptedReply>());
        for (const auto& rule: script.value("rules", Json::array()))
        {
            auto matcher = compileMatcher(rule.value("match", Json::object()));
            if (rule.contains("replies"))
                backend->whenAny(matcher, rule["replies"].get<std::vector<ScriptedReply>>());
            else
                backend->whenAny(matcher, {rule.at("reply").get<ScriptedReply>()});
        }
        for (const auto& reply: script.value("sequence", Json::array()))
            backend->enqueue(reply.get<ScriptedReply>());
    }
    catch (const Json::exception& e)
    {
        throw ConfigError(std::string("script: ") + e.what());
    }
    return backend;
}

} // namespace fama
