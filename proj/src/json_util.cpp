// SPDX-License-Identifier: Apache-2.0
#include "fama/json_util.hpp"

#include "fama/errors.hpp"

#include <openssl/evp.h>

#include <cctype>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace fama
{

namespace
{

std::string digestHex(const EVP_MD* md, std::string_view bytes)
{
    unsigned char out[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, md, nullptr);
    EVP_DigestUpdate(ctx, bytes.data(), bytes.size());
    EVP_DigestFinal_ex(ctx, out, &len);
    EVP_MD_CTX_free(ctx);

    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i)
        hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(out[i]);
    return hex.str();
}

} // namespace

std::string canonicalDump(const Json& value)
{
    // nlohmann::json objects are std::map backed, so keys are already sorted.
    return value.dump(-1, ' ', false, Json::error_handler_t::replace);
}

std::string fnv1aHex(std::string_view bytes)
{
    std::uint64_t hash = 14695981039346656037ull;
    for (unsigned char c: bytes)
    {
        hash ^= c;
        hash *= 1099511628211ull;
    }
    std::ostringstream hex;
    hex << std::hex << std::setw(16) << std::setfill('0') << hash;
    return hex.str();
}

std::string sha256Hex(std::string_view bytes)
{
    return digestHex(EVP_sha256(), bytes);
}

std::string gitBlobHash(std::string_view content)
{
    std::string blob = "blob " + std::to_string(content.size());
    blob.push_back('\0');
    blob.append(content);
    return digestHex(EVP_sha1(), blob);
}

std::string readFile(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void writeFile(const std::filesystem::path& path, std::string_view content)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw ConfigError("cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

TextPosition positionOfOffset(std::string_view text, std::size_t byteOffset)
{
    TextPosition pos;
    auto const end = std::min(byteOffset, text.size());
    for (std::size_t i = 0; i < end; ++i)
    {
        if (text[i] == '\n')
        {
            ++pos.line;
            pos.column = 1;
        }
        else
        {
            ++pos.column;
        }
    }
    return pos;
}

Json parseJsonDocument(std::string_view text, std::string_view label)
{
    try
    {
        return Json::parse(text);
    }
    catch (const Json::parse_error& e)
    {
        // nlohmann reports the offset one past the offending byte.
        auto const offset = e.byte > 0 ? e.byte - 1 : 0;
        auto const pos = positionOfOffset(text, offset);
        std::string reason = e.what();
        if (auto colon = reason.rfind(": "); colon != std::string::npos)
            reason = reason.substr(colon + 2);
        throw ConfigError(std::string(label) + ":" + std::to_string(pos.line) + ":"
                          + std::to_string(pos.column) + ": " + reason);
    }
}

Json loadJsonFile(const std::filesystem::path& path)
{
    return parseJsonDocument(readFile(path), path.string());
}

std::int64_t approxTokens(std::string_view text)
{
    std::int64_t count = 0;
    bool inWord = false;
    for (unsigned char c: text)
    {
        if (std::isspace(c))
        {
            inWord = false;
        }
        else if (!inWord)
        {
            inWord = true;
            ++count;
        }
    }
    return count;
}

} // namespace fama
