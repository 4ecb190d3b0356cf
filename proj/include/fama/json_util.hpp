// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace fama
{

using Json = nlohmann::json;

/// Compact serialization with keys in lexicographic order and raw UTF-8.
/// Used for everything that is hashed or compared byte-for-byte.
[[nodiscard]] std::string canonicalDump(const Json& value);

/// 64-bit FNV-1a, rendered as 16 lowercase hex digits.
[[nodiscard]] std::string fnv1aHex(std::string_view bytes);

[[nodiscard]] std::string sha256Hex(std::string_view bytes);

/// SHA-1 over "blob <size>\0<content>", i.e. the object id git assigns a file.
[[nodiscard]] std::string gitBlobHash(std::string_view content);

[[nodiscard]] std::string readFile(const std::filesystem::path& path);
void writeFile(const std::filesystem::path& path, std::string_view content);

struct TextPosition
{
    std::size_t line = 1;
    std::size_t column = 1;
};

[[nodiscard]] TextPosition positionOfOffset(std::string_view text, std::size_t byteOffset);

/// Parses a JSON document, rethrowing parse errors as ConfigError with a
/// "<label>:<line>:<column>: <reason>" message.
[[nodiscard]] Json parseJsonDocument(std::string_view text, std::string_view label);
[[nodiscard]] Json loadJsonFile(const std::filesystem::path& path);

/// Whitespace-delimited word count; the offline token approximation.
[[nodiscard]] std::int64_t approxTokens(std::string_view text);

} // namespace fama
