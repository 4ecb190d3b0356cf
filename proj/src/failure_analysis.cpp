// SPDX-License-Identifier: Apache-2.0
#include "fama/failure_analysis.hpp"

#include "fama/errors.hpp"
#include "fama/json_util.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <future>
#include <sstream>

namespace fama
{

std::string_view toString(ErrorCategory category)
{
    switch (category)
    {
        case ErrorCategory::DPV: return "DPV";
        case ErrorCategory::IRC: return "IRC";
        case ErrorCategory::CMH: return "CMH";
        case ErrorCategory::IFS: return "IFS";
    }
    return "DPV";
}

namespace
{

std::string lowerCopy(std::string_view text)
{
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string trim(const std::string& text)
{
    auto begin = text.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos)
        return {};
    auto end = text.find_last_not_of(" \t\r\n");
    return text.substr(begin, end - begin + 1);
}

std::string renderTrajectory(const Trajectory& t)
{
    return "Task: " + t.taskId + " (trial " + std::to_string(t.trial) + ")\n" + renderTranscript(t.messages)
           + "Outcome: reward=" + std::to_string(t.reward) + ", termination=" + std::string(toString(t.termination))
           + "\n";
}

} // namespace

std::optional<ErrorCategory> errorCategoryFromString(std::string_view text)
{
    auto const name = lowerCopy(trim(std::string(text)));
    if (name == "dpv" || name == "domain policy violation" || name == "dcv")
        return ErrorCategory::DPV;
    if (name == "irc" || name == "incorrect retrieval from complex tool outputs")
        return ErrorCategory::IRC;
    if (name == "cmh" || name == "contextual misinterpretation and hallucination" || name == "cm")
        return ErrorCategory::CMH;
    if (name == "ifs" || name == "incomplete fulfillment or early stopping" || name == "ifu")
        return ErrorCategory::IFS;
    return std::nullopt;
}

CauseCatalog CauseCatalog::load(const std::filesystem::path& dir)
{
    CauseCatalog catalog;
    std::string material;
    for (auto category: kErrorCategories)
    {
        auto const path = dir / (lowerCopy(toString(category)) + ".txt");
        auto const text = readFile(path);
        material += gitBlobHash(text);

        CategoryInfo info;
        info.id = category;
        std::istringstream in(text);
        std::string line;
        std::getline(in, info.name);
        info.name = trim(info.name);
        bool inCauses = false;
        while (std::getline(in, line))
        {
            auto const t = trim(line);
            if (!inCauses)
            {
                if (t.empty() && !info.definition.empty())
                    inCauses = true;
                else if (!t.empty())
                    info.definition += (info.definition.empty() ? "" : " ") + t;
                continue;
            }
            if (t.empty())
                continue;
            auto const dot = t.find(". ");
            if (dot == std::string::npos || dot == 0
                || !std::all_of(t.begin(), t.begin() + static_cast<long>(dot), [](unsigned char c) { return std::isdigit(c); }))
                throw ConfigError(path.string() + ": cause lines must look like 'N. text'");
            info.causes.push_back(t.substr(dot + 2));
        }
        if (info.name.empty() || info.causes.empty())
            throw ConfigError(path.string() + ": missing name or causes");
        catalog._categories.emplace(category, std::move(info));
    }
    catalog._hash = sha256Hex(material);
    return catalog;
}

CauseCatalog CauseCatalog::builtin()
{
    return load(defaultAssetDir() / "causes");
}

const CategoryInfo& CauseCatalog::get(ErrorCategory category) const
{
    return _categories.at(category);
}

void to_json(Json& j, const ErrorAnalysisReport& r)
{
    j = Json{{"task_id", r.taskId}, {"trial", r.trial},         {"category", toString(r.category)},
             {"detected", r.detected}, {"cause_ids", r.causeIds}, {"rationale", r.rationale}};
}

void from_json(const Json& j, ErrorAnalysisReport& r)
{
    r.taskId = j.at("task_id").get<std::string>();
    r.trial = j.value("trial", 0);
    auto category = errorCategoryFromString(j.at("category").get<std::string>());
    if (!category)
        throw ConfigError("unknown error category " + j.at("category").dump());
    r.category = *category;
    r.detected = j.value("detected", false);
    r.causeIds = j.value("cause_ids", std::vector<int>{});
    r.rationale = j.value("rationale", "");
}

void to_json(Json& j, const FailureAttribution& a)
{
    Json errors = Json::array();
    for (auto e: a.mainErrors)
        errors.push_back(toString(e));
    j = Json{{"task_id", a.taskId}, {"trial", a.trial}, {"domain_id", a.domainId}, {"main_errors", errors}, {"rationale", a.rationale}};
}

void from_json(const Json& j, FailureAttribution& a)
{
    a.taskId = j.at("task_id").get<std::string>();
    a.trial = j.value("trial", 0);
    a.domainId = j.value("domain_id", "");
    a.mainErrors.clear();
    for (const auto& e: j.value("main_errors", Json::array()))
        if (auto category = errorCategoryFromString(e.get<std::string>()))
            a.mainErrors.push_back(*category);
    a.rationale = j.value("rationale", "");
}

void to_json(Json& j, const Recommendation& r)
{
    j = Json{{"task_id", r.taskId}, {"trial", r.trial}, {"domain_id", r.domainId}, {"subset", r.subset}};
}

void from_json(const Json& j, Recommendation& r)
{
    r.taskId = j.value("task_id", "");
    r.trial = j.value("trial", 0);
    r.domainId = j.value("domain_id", "");
    r.subset = j.at("subset").get<AgentSubset>();
}

AgentSubset fallbackMitigation(const std::vector<ErrorCategory>& mainErrors, int memoryK)
{
    AgentSubset subset;
    for (auto e: mainErrors)
    {
        switch (e)
        {
            case ErrorCategory::DPV: subset.members.insert(AgentKind::DCE); break;
            case ErrorCategory::IRC: subset.members.insert(AgentKind::TOR); break;
            case ErrorCategory::CMH: subset.members.insert(AgentKind::Memory); break;
            case ErrorCategory::IFS:
                subset.members.insert(AgentKind::Memory);
                subset.members.insert(AgentKind::Planner);
                break;
        }
    }
    if (subset.contains(AgentKind::Memory))
        subset.memoryK = memoryK;
    return subset;
}

FailureAnalyzer::FailureAnalyzer(const Gateway& judge, const PromptLibrary& prompts, const CauseCatalog& catalog,
                                 AnalyzerOptions options)
    : _judge(judge), _prompts(prompts), _catalog(catalog), _options(options)
{
}

std::optional<Json> FailureAnalyzer::askJson(const std::string& prompt) const
{
    ChatRequest request;
    request.sampling = _options.sampling;
    request.messages.push_back(Message::user(prompt));
    for (int attempt = 0; attempt < 2; ++attempt)
    {
        auto response = _judge.chat(request);
        if (auto json = extractJsonObject(response.message.content))
            return json;
        spdlog::warn("judge output unparseable (attempt {})", attempt + 1);
        request.messages.push_back(response.message);
        request.messages.push_back(Message::user("Respond with a single JSON object only, following the requested schema."));
    }
    return std::nullopt;
}

std::string FailureAnalyzer::analysisPrompt(const Trajectory& trajectory, ErrorCategory category) const
{
    const auto& info = _catalog.get(category);
    std::string causes;
    for (std::size_t i = 0; i < info.causes.size(); ++i)
        causes += std::to_string(i + 1) + ". " + info.causes[i] + "\n";
    return _prompts.render("analyze_error", {{"category_name", info.name},
                                             {"category_definition", info.definition},
                                             {"causes", causes},
                                             {"trajectory", renderTrajectory(trajectory)}});
}

ErrorAnalysisReport FailureAnalyzer::analyzeError(const Trajectory& trajectory, ErrorCategory category) const
{
    if (trajectory.reward != 0)
        throw ConfigError("error analysis requires a failed trajectory (task " + trajectory.taskId + ")");

    ErrorAnalysisReport report;
    report.taskId = trajectory.taskId;
    report.trial = trajectory.trial;
    report.category = category;

    auto json = askJson(analysisPrompt(trajectory, category));
    if (!json || !json->contains("detected") || !(*json)["detected"].is_boolean())
    {
        report.rationale = "unparseable";
        return report;
    }
    report.detected = (*json)["detected"].get<bool>();
    report.rationale = json->value("rationale", "");
    if (report.detected)
    {
        auto const count = static_cast<int>(_catalog.get(category).causes.size());
        for (const auto& id: json->value("cause_ids", Json::array()))
            if (id.is_number_integer() && id.get<int>() >= 1 && id.get<int>() <= count)
                report.causeIds.push_back(id.get<int>());
        std::sort(report.causeIds.begin(), report.causeIds.end());
        report.causeIds.erase(std::unique(report.causeIds.begin(), report.causeIds.end()), report.causeIds.end());
    }
    return report;
}

std::vector<ErrorAnalysisReport> FailureAnalyzer::analyzeAll(const Trajectory& trajectory) const
{
    std::vector<std::future<ErrorAnalysisReport>> pending;
    for (auto category: kErrorCategories)
        pending.push_back(std::async(std::launch::async, [this, &trajectory, category] {
            return analyzeError(trajectory, category);
        }));
    std::vector<ErrorAnalysisReport> reports;
    for (auto& f: pending)
        reports.push_back(f.get());
    return reports;
}

FailureAttribution FailureAnalyzer::orchestrate(const std::vector<ErrorAnalysisReport>& reports,
                                                const Trajectory& trajectory) const
{
    if (reports.size() != kErrorCategories.size())
        throw ConfigError("orchestrate expects one report per error category");

    FailureAttribution attribution;
    attribution.taskId = trajectory.taskId;
    attribution.trial = trajectory.trial;

    std::vector<ErrorCategory> detected;
    for (const auto& r: reports)
        if (r.detected)
            detected.push_back(r.category);

    if (detected.size() == 1)
    {
        attribution.mainErrors = detected;
        auto it = std::find_if(reports.begin(), reports.end(), [](const auto& r) { return r.detected; });
        attribution.rationale = it->rationale;
        return attribution;
    }

    std::string reportText;
    for (const auto& r: reports)
    {
        reportText += "[" + std::string(toString(r.category)) + " - " + _catalog.get(r.category).name + "] detected="
                      + (r.detected ? "yes" : "no");
        if (!r.causeIds.empty())
        {
            reportText += " causes=";
            for (std::size_t i = 0; i < r.causeIds.size(); ++i)
                reportText += (i ? "," : "") + std::to_string(r.causeIds[i]);
        }
        reportText += "\nrationale: " + r.rationale + "\n";
    }
    std::string categories;
    for (auto c: kErrorCategories)
        categories += std::string(toString(c)) + ": " + _catalog.get(c).name + "\n";

    auto json = askJson(_prompts.render("orchestrator", {{"categories", categories},
                                                          {"reports", reportText},
                                                          {"trajectory", renderTrajectory(trajectory)}}));
    std::vector<ErrorCategory> chosen;
    std::string rationale;
    if (json && (*json)["main_errors"].is_array())
    {
        rationale = json->value("rationale", "");
        for (const auto& e: (*json)["main_errors"])
        {
            if (!e.is_string())
                continue;
            auto category = errorCategoryFromString(e.get<std::string>());
            if (!category || std::find(chosen.begin(), chosen.end(), *category) != chosen.end())
                continue;
            bool const wasDetected = std::find(detected.begin(), detected.end(), *category) != detected.end();
            // Attributing an undetected category needs an explicit justification.
            if (wasDetected || !rationale.empty())
                chosen.push_back(*category);
        }
    }

    if (chosen.empty())
    {
        chosen = detected.empty() ? std::vector<ErrorCategory>{_options.defaultCategory} : detected;
        rationale = "fallback: orchestrator output unparseable";
    }
    std::sort(chosen.begin(), chosen.end());
    attribution.mainErrors = std::move(chosen);
    attribution.rationale = rationale;
    return attribution;
}

AgentSubset FailureAnalyzer::mitigate(const FailureAttribution& attribution) const
{
    if (attribution.mainErrors.empty())
        throw ConfigError("mitigate requires at least one main error");

    std::string mainErrors = "MAIN_ERRORS: ";
    std::string named;
    auto sorted = attribution.mainErrors;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i)
    {
        mainErrors += (i ? ", " : "") + std::string(toString(sorted[i]));
        named += std::string(toString(sorted[i])) + " = " + _catalog.get(sorted[i]).name + "\n";
    }
    std::string agents;
    for (auto kind: kAgentCatalog)
        agents += "- " + std::string(toString(kind)) + ": " + std::string(describe(kind)) + "\n";

    auto json = askJson(_prompts.render("mitigation", {{"main_errors", mainErrors + "\n" + named}, {"agents", agents}}));
    AgentSubset subset;
    if (json && (*json)["agents"].is_array())
    {
        subset = json->get<AgentSubset>();
        for (const auto& name: (*json)["agents"])
            if (name.is_string() && !agentKindFromString(name.get<std::string>()))
                spdlog::debug("mitigation agent proposed unknown agent '{}', dropped", name.get<std::string>());
        if (subset.contains(AgentKind::Memory) && !(json->contains("memory_k") && (*json)["memory_k"].is_number_integer()))
        {
            bool inlineK = false;
            for (const auto& name: (*json)["agents"])
                if (name.is_string() && name.get<std::string>().find("k=") != std::string::npos)
                    inlineK = true;
            if (!inlineK)
                subset.memoryK = _options.defaultMemoryK;
        }
    }
    if (subset.empty())
        subset = fallbackMitigation(sorted, _options.defaultMemoryK);
    return subset;
}

FailureAnalyzer::Outcome FailureAnalyzer::analyzeFailure(const Trajectory& trajectory, const std::string& domainId) const
{
    Outcome outcome;
    outcome.reports = analyzeAll(trajectory);
    outcome.attribution = orchestrate(outcome.reports, trajectory);
    outcome.attribution.domainId = domainId;
    outcome.subset = mitigate(outcome.attribution);
    return outcome;
}

AgentSubset aggregateRecommendations(const std::vector<AgentSubset>& perTaskSubsets, double theta)
{
    if (perTaskSubsets.empty())
        throw ConfigError("aggregate_recommendations needs at least one subset");
    if (!(theta > 0.0 && theta <= 1.0))
        throw ConfigError("aggregation threshold must lie in (0, 1]");

    std::map<AgentKind, std::size_t> frequency;
    std::map<int, std::size_t> memoryKVotes;
    for (const auto& s: perTaskSubsets)
    {
        for (auto kind: s.members)
            ++frequency[kind];
        if (s.contains(AgentKind::Memory))
            ++memoryKVotes[s.memoryK];
    }

    // count >= theta * N, with a tolerance for theta values like 0.1 that are inexact in binary.
    auto const required = theta * static_cast<double>(perTaskSubsets.size()) - 1e-9;
    AgentSubset result;
    for (auto kind: kAgentCatalog)
        if (frequency[kind] > 0 && static_cast<double>(frequency[kind]) >= required)
            result.members.insert(kind);

    if (result.empty())
    {
        std::size_t best = 0;
        for (auto kind: kAgentCatalog)
        {
            if (frequency[kind] > best)
            {
                best = frequency[kind];
                result.members = {kind};
            }
        }
    }

    if (result.contains(AgentKind::Memory))
    {
        std::size_t bestVotes = 0;
        for (const auto& [k, votes]: memoryKVotes)
        {
            if (votes >= bestVotes)
            {
                bestVotes = votes;
                result.memoryK = k;
            }
        }
    }
    return result;
}

std::map<ErrorCategory, double> errorDistribution(const std::vector<FailureAttribution>& attributions)
{
    std::map<ErrorCategory, double> histogram;
    for (auto c: kErrorCategories)
        histogram[c] = 0.0;
    std::size_t total = 0;
    for (const auto& a: attributions)
    {
        for (auto e: a.mainErrors)
        {
            histogram[e] += 1.0;
            ++total;
        }
    }
    if (total == 0)
        return histogram;
    for (auto& [category, value]: histogram)
        value = 100.0 * value / static_cast<double>(total);
    return histogram;
}

} // namespace fama
