// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fama/gateway.hpp"

#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace fama
{

struct ScriptedReply
{
    struct Call
    {
        std::string name;
        /// Raw argument text exactly as a model would emit it.
        std::string arguments = "{}";
    };

    std::string content;
    std::vector<Call> toolCalls;
    std::optional<std::int64_t> promptTokens;
    std::optional<std::int64_t> completionTokens;
    double latencySeconds = 0.0;
    /// Simulated transport behavior: "transient" or "fatal" raise instead of replying.
    std::string failure;

    [[nodiscard]] static ScriptedReply text(std::string content);
    [[nodiscard]] static ScriptedReply call(std::string name, Json arguments, std::string content = {});
};

void from_json(const Json& j, ScriptedReply& reply);

/// Hash of the role sequence and message contents of a request.
[[nodiscard]] std::string requestFingerprint(const ChatRequest& request);

using Responder = std::function<std::optional<ScriptedReply>(const ChatRequest&)>;

/// Deterministic offline backend. Lookup order per request: exact
/// fingerprint, then rules in registration order, then the positional queue.
class ScriptedBackend : public ChatBackend
{
public:
    explicit ScriptedBackend(std::uint64_t seed = 0);

    /// Script document: {"seed", "fingerprints": {fp: reply}, "rules": [...], "sequence": [...]}.
    [[nodiscard]] static std::shared_ptr<ScriptedBackend> fromJson(const Json& script);

    void onFingerprint(std::string fingerprint, ScriptedReply reply);
    void when(Responder responder);
    /// Picks one of `alternatives` from a hash of the seed, the request seed and the fingerprint.
    void whenAny(std::function<bool(const ChatRequest&)> predicate, std::vector<ScriptedReply> alternatives);
    void enqueue(ScriptedReply reply);

    BackendReply send(const ChatRequest& request, const Json& wireBody) override;

    [[nodiscard]] std::vector<Json> requestLog() const;
    [[nodiscard]] std::size_t requestCount() const;

private:
    std::optional<ScriptedReply> lookup(const ChatRequest& request);

    std::uint64_t _seed;
    std::unordered_map<std::string, ScriptedReply> _byFingerprint;
    std::vector<Responder> _rules;
    std::vector<ScriptedReply> _queue;
    std::size_t _position = 0;
    mutable std::mutex _mutex;
    std::vector<Json> _log;
};

[[nodiscard]] Json toWireResponse(const ScriptedReply& reply);

} // namespace fama
