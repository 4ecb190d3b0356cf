// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fama/gateway.hpp"

#include <chrono>
#include <string>

namespace fama
{

struct HttpEndpoint
{
    /// e.g. "http://localhost:8000" or "https://api.example.com/v1".
    std::string baseUrl;
    /// Name of the environment variable holding the bearer token; may be empty.
    std::string apiKeyEnv;
    std::chrono::seconds timeout{120};
};

/// POSTs to <base>/v1/chat/completions. 408, 429 and 5xx responses and
/// connection failures are transient; other non-2xx statuses are fatal.
class HttpBackend : public ChatBackend
{
public:
    explicit HttpBackend(HttpEndpoint endpoint);

    BackendReply send(const ChatRequest& request, const Json& wireBody) override;

    [[nodiscard]] const std::string& host() const { return _host; }
    [[nodiscard]] const std::string& path() const { return _path; }

private:
    HttpEndpoint _endpoint;
    std::string _host;
    std::string _path;
};

} // namespace fama
