// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fama
{

/// Root of the shipped assets (domains, tasks, prompts, cause catalogs,
/// schemas). FAMA_ASSET_DIR in the environment overrides the built-in path.
[[nodiscard]] std::filesystem::path defaultAssetDir();

/// Replaces every {{name}} with values[name]. Throws ConfigError when a
/// placeholder has no value.
[[nodiscard]] std::string renderTemplate(const std::string& text, const std::map<std::string, std::string>& values);

/// Named plain-text prompt templates loaded from `<dir>/*.txt`.
class PromptLibrary
{
public:
    PromptLibrary() = default;

    /// Loads the defaults, then lets files in `overrides` replace them by name.
    [[nodiscard]] static PromptLibrary load(const std::filesystem::path& defaults,
                                            const std::optional<std::filesystem::path>& overrides = std::nullopt);
    [[nodiscard]] static PromptLibrary builtin();

    void set(std::string name, std::string text);
    [[nodiscard]] bool contains(const std::string& name) const;
    [[nodiscard]] const std::string& raw(const std::string& name) const;
    [[nodiscard]] std::string render(const std::string& name, const std::map<std::string, std::string>& values) const;
    [[nodiscard]] std::vector<std::string> names() const;
    [[nodiscard]] std::string contentHash() const;

private:
    std::map<std::string, std::string> _templates;
};

} // namespace fama
