// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fama/conversation.hpp"
#include "fama/gateway.hpp"
#include "fama/helpers.hpp"
#include "fama/prompts.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fama
{

enum class ErrorCategory
{
    DPV, ///< Domain Policy Violation
    IRC, ///< Incorrect Retrieval from Complex Tool Outputs
    CMH, ///< Contextual Misinterpretation and Hallucination
    IFS, ///< Incomplete Fulfillment or Early Stopping
};

inline constexpr std::array<ErrorCategory, 4> kErrorCategories = {
    ErrorCategory::DPV, ErrorCategory::IRC, ErrorCategory::CMH, ErrorCategory::IFS,
};

[[nodiscard]] std::string_view toString(ErrorCategory category);
/// Accepts the code ("DPV") or the full name, case-insensitively.
[[nodiscard]] std::optional<ErrorCategory> errorCategoryFromString(std::string_view text);

struct CategoryInfo
{
    ErrorCategory id = ErrorCategory::DPV;
    std::string name;
    std::string definition;
    std::vector<std::string> causes;
};

/// Cause lists loaded from `<asset dir>/causes/<code>.txt`: the first line is
/// the category name, then a definition paragraph, a blank line, and one
/// numbered cause per line.
class CauseCatalog
{
public:
    [[nodiscard]] static CauseCatalog load(const std::filesystem::path& dir);
    [[nodiscard]] static CauseCatalog builtin();

    [[nodiscard]] const CategoryInfo& get(ErrorCategory category) const;
    [[nodiscard]] std::string contentHash() const { return _hash; }

private:
    std::map<ErrorCategory, CategoryInfo> _categories;
    std::string _hash;
};

struct ErrorAnalysisReport
{
    std::string taskId;
    int trial = 0;
    ErrorCategory category = ErrorCategory::DPV;
    bool detected = false;
    /// 1-based indices into the category's cause list.
    std::vector<int> causeIds;
    std::string rationale;

    bool operator==(const ErrorAnalysisReport&) const = default;
};

struct FailureAttribution
{
    std::string taskId;
    int trial = 0;
    std::string domainId;
    std::vector<ErrorCategory> mainErrors;
    std::string rationale;

    bool operator==(const FailureAttribution&) const = default;
};

struct Recommendation
{
    std::string taskId;
    int trial = 0;
    std::string domainId;
    AgentSubset subset;

    bool operator==(const Recommendation&) const = default;
};

void to_json(Json& j, const ErrorAnalysisReport& report);
void from_json(const Json& j, ErrorAnalysisReport& report);
void to_json(Json& j, const FailureAttribution& attribution);
void from_json(const Json& j, FailureAttribution& attribution);
void to_json(Json& j, const Recommendation& recommendation);
void from_json(const Json& j, Recommendation& recommendation);

/// Static map used when the mitigation agent's output cannot be parsed.
[[nodiscard]] AgentSubset fallbackMitigation(const std::vector<ErrorCategory>& mainErrors, int memoryK);

struct AnalyzerOptions
{
    /// Memory window used when the mitigation agent picks Memory without a k.
    int defaultMemoryK = 2;
    /// Attribution used when nothing was detected and the orchestrator is unparseable.
    ErrorCategory defaultCategory = ErrorCategory::CMH;
    SamplingParams sampling;
};

/// Error-analysis agents, orchestrator and mitigation agent over one judge endpoint.
class FailureAnalyzer
{
public:
    FailureAnalyzer(const Gateway& judge, const PromptLibrary& prompts, const CauseCatalog& catalog,
                    AnalyzerOptions options = {});

    /// The prompt sent to the analysis agent for `category`.
    [[nodiscard]] std::string analysisPrompt(const Trajectory& trajectory, ErrorCategory category) const;

    [[nodiscard]] ErrorAnalysisReport analyzeError(const Trajectory& trajectory, ErrorCategory category) const;
    /// One report per category, computed concurrently, returned in category order.
    [[nodiscard]] std::vector<ErrorAnalysisReport> analyzeAll(const Trajectory& trajectory) const;
    [[nodiscard]] FailureAttribution orchestrate(const std::vector<ErrorAnalysisReport>& reports,
                                                 const Trajectory& trajectory) const;
    [[nodiscard]] AgentSubset mitigate(const FailureAttribution& attribution) const;

    struct Outcome
    {
        std::vector<ErrorAnalysisReport> reports;
        FailureAttribution attribution;
        AgentSubset subset;
    };

    [[nodiscard]] Outcome analyzeFailure(const Trajectory& trajectory, const std::string& domainId) const;

private:
    std::optional<Json> askJson(const std::string& prompt) const;

    const Gateway& _judge;
    const PromptLibrary& _prompts;
    const CauseCatalog& _catalog;
    AnalyzerOptions _options;
};

/// Agents recommended for at least theta of the subsets. Memory's k is the
/// modal k among subsets that include Memory, ties to the larger k. When no
/// agent reaches theta, the single most frequent agent is returned.
[[nodiscard]] AgentSubset aggregateRecommendations(const std::vector<AgentSubset>& perTaskSubsets, double theta);

/// Percentage of attributed (task, trial, category) incidences per category.
[[nodiscard]] std::map<ErrorCategory, double> errorDistribution(const std::vector<FailureAttribution>& attributions);

} // namespace fama
