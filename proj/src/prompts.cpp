// SPDX-License-Identifier: Apache-2.0
#include "fama/prompts.hpp"

#include "fama/errors.hpp"
#include "fama/json_util.hpp"

#include <cstdlib>

namespace fama
{

std::filesystem::path defaultAssetDir()
{
    if (const char* env = std::getenv("FAMA_ASSET_DIR"); env && *env)
        return env;
    return FAMA_ASSET_DIR;
}

std::string renderTemplate(const std::string& text, const std::map<std::string, std::string>& values)
{
    std::string out;
    out.reserve(text.size());
    std::size_t pos = 0;
    while (pos < text.size())
    {
        auto open = text.find("{{", pos);
        if (open == std::string::npos)
        {
            out.append(text, pos, std::string::npos);
            break;
        }
        auto close = text.find("}}", open + 2);
        if (close == std::string::npos)
            throw ConfigError("unterminated placeholder in template");
        out.append(text, pos, open - pos);
        auto const key = text.substr(open + 2, close - open - 2);
        auto it = values.find(key);
        if (it == values.end())
            throw ConfigError("template placeholder '{{" + key + "}}' has no value");
        out += it->second;
        pos = close + 2;
    }
    return out;
}

PromptLibrary PromptLibrary::load(const std::filesystem::path& defaults,
                                  const std::optional<std::filesystem::path>& overrides)
{
    PromptLibrary library;
    auto loadDir = [&library](const std::filesystem::path& dir) {
        if (!std::filesystem::is_directory(dir))
            throw ConfigError("prompt directory not found: " + dir.string());
        for (const auto& entry: std::filesystem::directory_iterator(dir))
            if (entry.is_regular_file() && entry.path().extension() == ".txt")
                library.set(entry.path().stem().string(), readFile(entry.path()));
    };
    loadDir(defaults);
    if (overrides)
        loadDir(*overrides);
    return library;
}

PromptLibrary PromptLibrary::builtin()
{
    return load(defaultAssetDir() / "prompts");
}

void PromptLibrary::set(std::string name, std::string text)
{
    _templates.insert_or_assign(std::move(name), std::move(text));
}

bool PromptLibrary::contains(const std::string& name) const
{
    return _templates.count(name) > 0;
}

const std::string& PromptLibrary::raw(const std::string& name) const
{
    auto it = _templates.find(name);
    if (it == _templates.end())
        throw ConfigError("missing prompt template '" + name + "'");
    return it->second;
}

std::string PromptLibrary::render(const std::string& name, const std::map<std::string, std::string>& values) const
{
    return renderTemplate(raw(name), values);
}

std::vector<std::string> PromptLibrary::names() const
{
    std::vector<std::string> out;
    for (const auto& [name, _]: _templates)
        out.push_back(name);
    return out;
}

std::string PromptLibrary::contentHash() const
{
    std::string material;
    for (const auto& [name, text]: _templates)
        material += name + "\n" + gitBlobHash(text) + "\n";
    return sha256Hex(material);
}

} // namespace fama
