// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fama/conversation.hpp"

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace fama
{

/// A function tool exposed to the model. `parameters` is a JSON Schema
/// (draft-07 subset) describing the argument object.
struct ToolSpec
{
    std::string name;
    std::string description;
    Json parameters = Json::object();
};

struct ChatRequest
{
    std::vector<Message> messages;
    std::vector<ToolSpec> tools;
    SamplingParams sampling;
    std::optional<std::uint64_t> seed;
};

enum class FinishReason
{
    Stop,
    ToolCalls,
    Length,
};

[[nodiscard]] std::string_view toString(FinishReason reason);

struct ChatResponse
{
    Message message;
    std::int64_t promptTokens = 0;
    std::int64_t completionTokens = 0;
    FinishReason finishReason = FinishReason::Stop;
    double latencySeconds = 0.0;
};

/// Sum of per-message token estimates. Monotone under appending messages.
[[nodiscard]] std::int64_t estimateTokens(const std::vector<Message>& messages);
[[nodiscard]] std::int64_t estimateTokens(const Message& message);
/// Message estimate plus the word count of every tool schema.
[[nodiscard]] std::int64_t estimatePromptTokens(const ChatRequest& request);

/// Chat-completions request body. Keys serialize in canonical order.
[[nodiscard]] Json toWireRequest(const ChatRequest& request, const std::string& model);
[[nodiscard]] Json toWireMessage(const Message& message);

/// Parsed response body. Tool-call arguments stay raw so the gateway can
/// detect malformed JSON and re-ask.
struct WireChoice
{
    std::string content;
    struct RawCall
    {
        std::string id;
        std::string name;
        std::string arguments;
    };
    std::vector<RawCall> toolCalls;
    std::string finishReason;
    std::optional<std::int64_t> promptTokens;
    std::optional<std::int64_t> completionTokens;
};

/// Throws ProviderError when the body does not have the chat-completions shape.
[[nodiscard]] WireChoice parseWireResponse(const Json& body);

/// Converts raw calls into ToolCalls; returns nullopt if any argument string
/// is not a JSON object.
[[nodiscard]] std::optional<std::vector<ToolCall>> decodeToolCalls(const std::vector<WireChoice::RawCall>& calls);

struct BackendReply
{
    Json body;
    double latencySeconds = 0.0;
};

class ChatBackend
{
public:
    virtual ~ChatBackend() = default;

    /// Sends one request. Throws TransientError for retryable transport
    /// failures and ProviderError for everything else.
    virtual BackendReply send(const ChatRequest& request, const Json& wireBody) = 0;
};

struct GatewayOptions
{
    std::string model = "default";
    std::int64_t maxContextTokens = 32768;
    int maxRetries = 3;
    std::chrono::milliseconds initialBackoff{250};
};

inline constexpr std::string_view kMalformedToolCallNudge =
    "Your previous tool call had arguments that were not a valid JSON object. "
    "Re-issue the tool call with arguments encoded as a single valid JSON object.";

/// Uniform chat interface: budget check, retry with exponential backoff,
/// and one corrective re-ask for malformed tool-call arguments.
/// Safe for concurrent use as long as the backend is.
class Gateway
{
public:
    Gateway(std::shared_ptr<ChatBackend> backend, GatewayOptions options);

    [[nodiscard]] ChatResponse chat(const ChatRequest& request) const;

    [[nodiscard]] const GatewayOptions& options() const { return _options; }

private:
    BackendReply sendWithRetry(const ChatRequest& request) const;

    std::shared_ptr<ChatBackend> _backend;
    GatewayOptions _options;
};

} // namespace fama
