// SPDX-License-Identifier: Apache-2.0
#include "fama/gateway.hpp"

#include "fama/errors.hpp"

#include <spdlog/spdlog.h>

#include <thread>

namespace fama
{

std::string_view toString(FinishReason reason)
{
    switch (reason)
    {
        case FinishReason::Stop: return "stop";
        case FinishReason::ToolCalls: return "tool_calls";
        case FinishReason::Length: return "length";
    }
    return "stop";
}

std::int64_t estimateTokens(const Message& message)
{
    auto total = approxTokens(message.content);
    for (const auto& call: message.toolCalls)
        total += approxTokens(call.name) + approxTokens(canonicalDump(call.arguments));
    return total;
}

std::int64_t estimateTokens(const std::vector<Message>& messages)
{
    std::int64_t total = 0;
    for (const auto& m: messages)
        total += estimateTokens(m);
    return total;
}

std::int64_t estimatePromptTokens(const ChatRequest& request)
{
    auto total = estimateTokens(request.messages);
    for (const auto& tool: request.tools)
        total += approxTokens(tool.name) + approxTokens(tool.description) + approxTokens(canonicalDump(tool.parameters));
    return total;
}

Json toWireMessage(const Message& message)
{
    Json j = {{"role", toString(message.role)}, {"content", message.content}};
    if (!message.toolCalls.empty())
    {
        Json calls = Json::array();
        for (const auto& call: message.toolCalls)
        {
            calls.push_back({
                {"id", call.id},
                {"type", "function"},
                {"function", {{"name", call.name}, {"arguments", canonicalDump(call.arguments)}}},
            });
        }
        j["tool_calls"] = std::move(calls);
    }
    if (message.toolCallId)
        j["tool_call_id"] = *message.toolCallId;
    return j;
}

Json toWireRequest(const ChatRequest& request, const std::string& model)
{
    Json messages = Json::array();
    for (const auto& m: request.messages)
        messages.push_back(toWireMessage(m));

    Json body = {
        {"model", model},
        {"messages", std::move(messages)},
        {"temperature", request.sampling.temperature},
        {"top_p", request.sampling.topP},
    };
    if (request.sampling.maxTokens)
        body["max_tokens"] = *request.sampling.maxTokens;
    if (request.seed)
        body["seed"] = *request.seed;
    if (!request.tools.empty())
    {
        Json tools = Json::array();
        for (const auto& tool: request.tools)
        {
            tools.push_back({
                {"type", "function"},
                {"function", {{"name", tool.name}, {"description", tool.description}, {"parameters", tool.parameters}}},
            });
        }
        body["tools"] = std::move(tools);
        body["tool_choice"] = "auto";
    }
    return body;
}

WireChoice parseWireResponse(const Json& body)
{
    if (!body.is_object() || !body.contains("choices") || !body["choices"].is_array() || body["choices"].empty())
        throw ProviderError("malformed response body: missing choices");
    const auto& choice = body["choices"][0];
    if (!choice.contains("message") || !choice["message"].is_object())
        throw ProviderError("malformed response body: missing message");
    const auto& message = choice["message"];

    WireChoice out;
    if (message.contains("content") && message["content"].is_string())
        out.content = message["content"].get<std::string>();
    if (message.contains("tool_calls") && message["tool_calls"].is_array())
    {
        for (const auto& call: message["tool_calls"])
        {
            if (!call.contains("function") || !call["function"].is_object())
                throw ProviderError("malformed response body: tool call without function");
            const auto& fn = call["function"];
            WireChoice::RawCall raw;
            raw.id = call.value("id", "");
            raw.name = fn.value("name", "");
            if (fn.contains("arguments"))
                raw.arguments = fn["arguments"].is_string() ? fn["arguments"].get<std::string>() : fn["arguments"].dump();
            out.toolCalls.push_back(std::move(raw));
        }
    }
    if (choice.contains("finish_reason") && choice["finish_reason"].is_string())
        out.finishReason = choice["finish_reason"].get<std::string>();
    if (body.contains("usage") && body["usage"].is_object())
    {
        const auto& usage = body["usage"];
        if (usage.contains("prompt_tokens") && usage["prompt_tokens"].is_number_integer())
            out.promptTokens = usage["prompt_tokens"].get<std::int64_t>();
        if (usage.contains("completion_tokens") && usage["completion_tokens"].is_number_integer())
            out.completionTokens = usage["completion_tokens"].get<std::int64_t>();
    }
    return out;
}

std::optional<std::vector<ToolCall>> decodeToolCalls(const std::vector<WireChoice::RawCall>& calls)
{
    std::vector<ToolCall> decoded;
    for (const auto& raw: calls)
    {
        if (raw.name.empty())
            return std::nullopt;
        ToolCall call;
        call.id = raw.id;
        call.name = raw.name;
        if (raw.arguments.empty())
        {
            call.arguments = Json::object();
        }
        else
        {
            auto parsed = Json::parse(raw.arguments, nullptr, false);
            if (parsed.is_discarded() || !parsed.is_object())
                return std::nullopt;
            call.arguments = std::move(parsed);
        }
        decoded.push_back(std::move(call));
    }
    return decoded;
}

Gateway::Gateway(std::shared_ptr<ChatBackend> backend, GatewayOptions options)
    : _backend(std::move(backend)), _options(std::move(options))
{
}

BackendReply Gateway::sendWithRetry(const ChatRequest& request) const
{
    auto const estimate = estimatePromptTokens(request);
    if (estimate > _options.maxContextTokens)
        throw ContextOverflow(estimate, _options.maxContextTokens);

    auto const body = toWireRequest(request, _options.model);
    auto backoff = _options.initialBackoff;
    for (int attempt = 0;; ++attempt)
    {
        try
        {
            return _backend->send(request, body);
        }
        catch (const TransientError& e)
        {
            if (attempt >= _options.maxRetries)
                throw ProviderUnreachable(std::string("giving up after retries: ") + e.what());
            spdlog::warn("transient provider failure (attempt {}): {}", attempt + 1, e.what());
            if (backoff.count() > 0)
                std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
    }
}

ChatResponse Gateway::chat(const ChatRequest& request) const
{
    if (request.messages.empty())
        throw ProviderError("chat request without messages");

    ChatRequest current = request;
    ChatResponse response;
    for (int ask = 0; ask < 2; ++ask)
    {
        auto reply = sendWithRetry(current);
        auto choice = parseWireResponse(reply.body);

        response.latencySeconds += reply.latencySeconds;
        response.promptTokens += choice.promptTokens.value_or(estimatePromptTokens(current));

        auto calls = decodeToolCalls(choice.toolCalls);
        Message message = Message::assistant(choice.content);
        if (calls)
            message.toolCalls = std::move(*calls);
        auto const completion = choice.completionTokens.value_or(estimateTokens(message));
        response.completionTokens += completion;

        if (!calls)
        {
            if (ask == 1)
                throw MalformedToolCall("tool call arguments failed to parse after re-ask");
            spdlog::warn("malformed tool call arguments, re-asking once");
            Message rejected = Message::assistant(choice.content);
            for (const auto& raw: choice.toolCalls)
                rejected.content += (rejected.content.empty() ? "" : "\n") + raw.name + " " + raw.arguments;
            current.messages.push_back(std::move(rejected));
            current.messages.push_back(Message::system(std::string(kMalformedToolCallNudge)));
            continue;
        }

        message.tokenCount = completion;
        if (!message.toolCalls.empty())
            response.finishReason = FinishReason::ToolCalls;
        else if (choice.finishReason == "length")
            response.finishReason = FinishReason::Length;
        else
            response.finishReason = FinishReason::Stop;
        response.message = std::move(message);
        return response;
    }
    throw MalformedToolCall("unreachable");
}

} // namespace fama
