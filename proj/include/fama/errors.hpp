// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace fama
{

class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Bad configuration or input file. Maps to CLI exit code 2.
class ConfigError : public Error
{
public:
    using Error::Error;
};

/// The prompt estimate exceeds the context budget. Never recovered by truncation.
class ContextOverflow : public Error
{
public:
    ContextOverflow(std::int64_t estimate, std::int64_t budget)
        : Error("prompt estimate " + std::to_string(estimate) + " exceeds context budget "
                + std::to_string(budget)),
          estimate(estimate), budget(budget)
    {
    }

    std::int64_t estimate;
    std::int64_t budget;
};

/// Non-retryable provider failure (bad status, malformed body, no script entry).
class ProviderError : public Error
{
public:
    using Error::Error;
};

/// Transport failure that may succeed on retry.
class TransientError : public ProviderError
{
public:
    using ProviderError::ProviderError;
};

/// Endpoint could not be reached at all after retries. Maps to CLI exit code 3.
class ProviderUnreachable : public ProviderError
{
public:
    using ProviderError::ProviderError;
};

class MalformedToolCall : public Error
{
public:
    using Error::Error;
};

class UnknownDomain : public Error
{
public:
    using Error::Error;
};

class KMismatch : public Error
{
public:
    using Error::Error;
};

class ZeroTotal : public Error
{
public:
    using Error::Error;
};

class EmptyInput : public Error
{
public:
    using Error::Error;
};

class MissingArtifacts : public Error
{
public:
    using Error::Error;
};

} // namespace fama
