// SPDX-License-Identifier: Apache-2.0
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "fama/http_backend.hpp"

#include "fama/errors.hpp"

#include <httplib.h>

#include <chrono>
#include <cstdlib>

namespace fama
{

HttpBackend::HttpBackend(HttpEndpoint endpoint) : _endpoint(std::move(endpoint))
{
    auto const& url = _endpoint.baseUrl;
    auto const scheme = url.find("://");
    if (scheme == std::string::npos)
        throw ConfigError("endpoint base_url must include a scheme: " + url);
    auto const pathStart = url.find('/', scheme + 3);
    _host = url.substr(0, pathStart);
    std::string prefix = pathStart == std::string::npos ? "" : url.substr(pathStart);
    while (!prefix.empty() && prefix.back() == '/')
        prefix.pop_back();
    if (prefix.size() < 3 || prefix.compare(prefix.size() - 3, 3, "/v1") != 0)
        prefix += "/v1";
    _path = prefix + "/chat/completions";
}

BackendReply HttpBackend::send(const ChatRequest&, const Json& wireBody)
{
    httplib::Client client(_host);
    client.set_connection_timeout(_endpoint.timeout);
    client.set_read_timeout(_endpoint.timeout);

    httplib::Headers headers;
    if (!_endpoint.apiKeyEnv.empty())
    {
        if (const char* key = std::getenv(_endpoint.apiKeyEnv.c_str()); key && *key)
            headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    auto const started = std::chrono::steady_clock::now();
    auto result = client.Post(_path, headers, canonicalDump(wireBody), "application/json");
    auto const elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    if (!result)
        throw TransientError("POST " + _host + _path + " failed: " + httplib::to_string(result.error()));
    auto const status = result->status;
    if (status == 408 || status == 429 || status >= 500)
        throw TransientError("HTTP " + std::to_string(status) + " from " + _host);
    if (status < 200 || status >= 300)
        throw ProviderError("HTTP " + std::to_string(status) + " from " + _host + ": " + result->body);

    auto body = Json::parse(result->body, nullptr, false);
    if (body.is_discarded())
        throw ProviderError("response body is not JSON");
    return {std::move(body), elapsed};
}

} // namespace fama
