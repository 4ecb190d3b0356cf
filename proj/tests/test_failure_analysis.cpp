// SPDX-License-Identifier: Apache-2.0
#include "fama/errors.hpp"
#include "fama/failure_analysis.hpp"
#include "fama/scripted_backend.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace fama;

namespace
{

AgentSubset subsetOf(std::initializer_list<AgentKind> kinds, int k = 0)
{
    AgentSubset s;
    s.members = kinds;
    s.memoryK = k;
    return s;
}

Trajectory failed(const std::string& id)
{
    Trajectory t;
    t.taskId = id;
    t.method = "FC";
    t.messages = {Message::user("cancel O3"), Message::assistant("Cancelled.")};
    return t;
}

/// Judge whose replies are chosen by a substring of the prompt.
struct RuleJudge
{
    std::shared_ptr<ScriptedBackend> backend = std::make_shared<ScriptedBackend>();
    std::shared_ptr<Gateway> gateway = test::scriptedGateway(backend);

    void on(std::vector<std::string> needles, std::string reply)
    {
        backend->when([needles, reply](const ChatRequest& r) -> std::optional<ScriptedReply> {
            auto const& text = r.messages.front().content;
            for (const auto& n: needles)
                if (text.find(n) == std::string::npos)
                    return std::nullopt;
            return ScriptedReply::text(reply);
        });
    }
};

struct Fixture
{
    CauseCatalog catalog = CauseCatalog::load(test::assetDir() / "causes");
    PromptLibrary prompts = PromptLibrary::load(test::assetDir() / "prompts");
    RuleJudge judge;
};

} // namespace

TEST(CauseCatalog, LoadsAllCategories)
{
    auto const catalog = CauseCatalog::load(test::assetDir() / "causes");
    EXPECT_EQ(catalog.get(ErrorCategory::DPV).name, "Domain Policy Violation");
    EXPECT_EQ(catalog.get(ErrorCategory::IRC).name, "Incorrect Retrieval from Complex Tool Outputs");
    EXPECT_EQ(catalog.get(ErrorCategory::CMH).name, "Contextual Misinterpretation and Hallucination");
    EXPECT_EQ(catalog.get(ErrorCategory::IFS).name, "Incomplete Fulfillment or Early Stopping");
    for (auto c: kErrorCategories)
    {
        EXPECT_FALSE(catalog.get(c).definition.empty());
        EXPECT_FALSE(catalog.get(c).causes.empty());
    }
    EXPECT_EQ(catalog.contentHash().size(), 64u);
}

TEST(CauseCatalog, RejectsMalformedCauseLines)
{
    test::TempDir dir;
    for (auto const* code: {"dpv", "irc", "cmh", "ifs"})
        writeFile(dir / (std::string(code) + ".txt"), "Name\nDefinition.\n\n1. a cause\n");
    EXPECT_NO_THROW((void)CauseCatalog::load(dir.path()));
    writeFile(dir / "cmh.txt", "Name\nDefinition.\n\nnot numbered\n");
    EXPECT_THROW((void)CauseCatalog::load(dir.path()), ConfigError);
}

TEST(ErrorCategory, ParsesCodesAndNames)
{
    EXPECT_EQ(errorCategoryFromString("irc"), ErrorCategory::IRC);
    EXPECT_EQ(errorCategoryFromString(" Domain Policy Violation "), ErrorCategory::DPV);
    EXPECT_FALSE(errorCategoryFromString("XYZ"));
}

TEST(Records, JsonRoundTrip)
{
    ErrorAnalysisReport report{"F4", 1, ErrorCategory::IRC, true, {1, 3}, "why"};
    EXPECT_EQ(Json(report).get<ErrorAnalysisReport>(), report);
    FailureAttribution attribution{"F6", 0, "retail", {ErrorCategory::DPV, ErrorCategory::CMH}, "both"};
    EXPECT_EQ(Json(attribution).get<FailureAttribution>(), attribution);
    Recommendation recommendation{"F6", 0, "retail", subsetOf({AgentKind::DCE, AgentKind::Memory}, 2)};
    EXPECT_EQ(Json(recommendation).get<Recommendation>(), recommendation);
}

TEST(FailureAnalyzer, AnalysisPromptCarriesNumberedCauses)
{
    Fixture f;
    FailureAnalyzer analyzer(*f.judge.gateway, f.prompts, f.catalog);
    auto const prompt = analyzer.analysisPrompt(failed("F4"), ErrorCategory::DPV);
    auto const& info = f.catalog.get(ErrorCategory::DPV);
    EXPECT_NE(prompt.find("Category: " + info.name), std::string::npos);
    for (std::size_t i = 0; i < info.causes.size(); ++i)
        EXPECT_NE(prompt.find(std::to_string(i + 1) + ". " + info.causes[i]), std::string::npos);
    EXPECT_NE(prompt.find("cancel O3"), std::string::npos);
}

TEST(FailureAnalyzer, ReportParsingFiltersCauseIds)
{
    Fixture f;
    f.judge.on({"Domain Policy Violation"}, R"(Sure: {"detected": true, "cause_ids": [2, 99, 1, 2, "x"], "rationale": "r"})");
    f.judge.on({"[Error analysis]"}, "no json here");
    FailureAnalyzer analyzer(*f.judge.gateway, f.prompts, f.catalog);

    auto const dpv = analyzer.analyzeError(failed("F4"), ErrorCategory::DPV);
    EXPECT_TRUE(dpv.detected);
    EXPECT_EQ(dpv.causeIds, (std::vector<int>{1, 2}));

    auto const irc = analyzer.analyzeError(failed("F4"), ErrorCategory::IRC);
    EXPECT_FALSE(irc.detected);
    EXPECT_EQ(irc.rationale, "unparseable");

    auto success = failed("F1");
    success.reward = 1;
    EXPECT_THROW((void)analyzer.analyzeError(success, ErrorCategory::DPV), ConfigError);
}

TEST(FailureAnalyzer, SingleDetectionSkipsOrchestrator)
{
    Fixture f;
    FailureAnalyzer analyzer(*f.judge.gateway, f.prompts, f.catalog);
    std::vector<ErrorAnalysisReport> reports;
    for (auto c: kErrorCategories)
        reports.push_back({"F4", 0, c, c == ErrorCategory::DPV, {}, c == ErrorCategory::DPV ? "shipped" : ""});
    auto const attribution = analyzer.orchestrate(reports, failed("F4"));
    EXPECT_EQ(attribution.mainErrors, std::vector<ErrorCategory>{ErrorCategory::DPV});
    EXPECT_EQ(attribution.rationale, "shipped");
    EXPECT_EQ(f.judge.backend->requestCount(), 0u);
}

TEST(FailureAnalyzer, OrchestratorNeedsRationaleForUndetected)
{
    Fixture f;
    std::vector<ErrorAnalysisReport> reports;
    for (auto c: kErrorCategories)
        reports.push_back({"F", 0, c, c == ErrorCategory::DPV || c == ErrorCategory::CMH, {}, ""});

    f.judge.on({"[Orchestrator]"}, R"({"main_errors": ["CMH", "IFS", "DPV", "CMH"]})");
    FailureAnalyzer analyzer(*f.judge.gateway, f.prompts, f.catalog);
    EXPECT_EQ(analyzer.orchestrate(reports, failed("F")).mainErrors,
              (std::vector<ErrorCategory>{ErrorCategory::DPV, ErrorCategory::CMH}));

    Fixture g;
    g.judge.on({"[Orchestrator]"}, R"({"main_errors": ["IFS"], "rationale": "it stopped early"})");
    FailureAnalyzer justified(*g.judge.gateway, g.prompts, g.catalog);
    EXPECT_EQ(justified.orchestrate(reports, failed("F")).mainErrors, std::vector<ErrorCategory>{ErrorCategory::IFS});
}

TEST(FailureAnalyzer, OrchestratorFallbacks)
{
    Fixture f;
    f.judge.on({"[Orchestrator]"}, "I cannot decide");
    FailureAnalyzer analyzer(*f.judge.gateway, f.prompts, f.catalog);

    std::vector<ErrorAnalysisReport> two, none;
    for (auto c: kErrorCategories)
    {
        two.push_back({"F", 0, c, c == ErrorCategory::IRC || c == ErrorCategory::IFS, {}, ""});
        none.push_back({"F", 0, c, false, {}, ""});
    }
    EXPECT_EQ(analyzer.orchestrate(two, failed("F")).mainErrors,
              (std::vector<ErrorCategory>{ErrorCategory::IRC, ErrorCategory::IFS}));
    EXPECT_EQ(analyzer.orchestrate(none, failed("F")).mainErrors, std::vector<ErrorCategory>{ErrorCategory::CMH});
    // Unparseable output is re-asked once per call.
    EXPECT_EQ(f.judge.backend->requestCount(), 4u);
    EXPECT_THROW((void)analyzer.orchestrate({}, failed("F")), ConfigError);
}

TEST(FailureAnalyzer, MitigationParsesAgentsAndDefaultsK)
{
    Fixture f;
    f.judge.on({"MAIN_ERRORS: DPV, CMH\n"}, R"({"agents": ["DCE", "Memory", "Oracle"]})");
    f.judge.on({"MAIN_ERRORS: CMH\n"}, R"j({"agents": ["Memory(k=4)"]})j");
    f.judge.on({"MAIN_ERRORS: IRC\n"}, R"({"agents": ["TOR"], "memory_k": 6})");
    f.judge.on({"[Mitigation]"}, "nothing useful");
    AnalyzerOptions options;
    options.defaultMemoryK = 3;
    FailureAnalyzer analyzer(*f.judge.gateway, f.prompts, f.catalog, options);

    auto attribution = [](std::vector<ErrorCategory> e) { return FailureAttribution{"F", 0, "retail", e, ""}; };
    EXPECT_EQ(analyzer.mitigate(attribution({ErrorCategory::CMH, ErrorCategory::DPV})),
              subsetOf({AgentKind::DCE, AgentKind::Memory}, 3));
    EXPECT_EQ(analyzer.mitigate(attribution({ErrorCategory::CMH})), subsetOf({AgentKind::Memory}, 4));
    EXPECT_EQ(analyzer.mitigate(attribution({ErrorCategory::IRC})), subsetOf({AgentKind::TOR}));
    EXPECT_EQ(analyzer.mitigate(attribution({ErrorCategory::IFS})), subsetOf({AgentKind::Memory, AgentKind::Planner}, 3));
    EXPECT_THROW((void)analyzer.mitigate(attribution({})), ConfigError);
}

TEST(FallbackMitigation, StaticMap)
{
    EXPECT_EQ(fallbackMitigation({ErrorCategory::DPV}, 2), subsetOf({AgentKind::DCE}));
    EXPECT_EQ(fallbackMitigation({ErrorCategory::IRC}, 2), subsetOf({AgentKind::TOR}));
    EXPECT_EQ(fallbackMitigation({ErrorCategory::CMH}, 2), subsetOf({AgentKind::Memory}, 2));
    EXPECT_EQ(fallbackMitigation({ErrorCategory::IFS}, 4), subsetOf({AgentKind::Memory, AgentKind::Planner}, 4));
    EXPECT_TRUE(fallbackMitigation({}, 2).empty());
}

TEST(Aggregation, ThresholdKeepsFrequentAgents)
{
    std::vector<AgentSubset> subsets = {
        subsetOf({AgentKind::DCE}),
        subsetOf({AgentKind::Memory}, 2),
        subsetOf({AgentKind::DCE, AgentKind::Memory}, 2),
    };
    EXPECT_EQ(aggregateRecommendations(subsets, 0.5), subsetOf({AgentKind::DCE, AgentKind::Memory}, 2));
    EXPECT_EQ(aggregateRecommendations(subsets, 1.0), subsetOf({AgentKind::DCE}));
}

TEST(Aggregation, ModalMemoryKWithTiesToLarger)
{
    std::vector<AgentSubset> subsets = {
        subsetOf({AgentKind::Memory}, 2),
        subsetOf({AgentKind::Memory}, 6),
        subsetOf({AgentKind::Memory}, 2),
        subsetOf({AgentKind::Memory}, 6),
        subsetOf({AgentKind::Memory}, 4),
    };
    EXPECT_EQ(aggregateRecommendations(subsets, 0.5).memoryK, 6);
    subsets.push_back(subsetOf({AgentKind::Memory}, 2));
    EXPECT_EQ(aggregateRecommendations(subsets, 0.5).memoryK, 2);
}

TEST(Aggregation, ExactThresholdBoundary)
{
    // 1 of 10 at theta = 0.1 must be kept despite 0.1 being inexact in binary.
    std::vector<AgentSubset> subsets(9, subsetOf({AgentKind::DCE}));
    subsets.push_back(subsetOf({AgentKind::TOR}));
    EXPECT_TRUE(aggregateRecommendations(subsets, 0.1).contains(AgentKind::TOR));
    EXPECT_FALSE(aggregateRecommendations(subsets, 0.2).contains(AgentKind::TOR));
}

TEST(Aggregation, FallsBackToMostFrequent)
{
    std::vector<AgentSubset> subsets = {
        subsetOf({AgentKind::DCE}), subsetOf({AgentKind::TOR}), subsetOf({AgentKind::TOR}), subsetOf({AgentKind::TSA}),
    };
    EXPECT_EQ(aggregateRecommendations(subsets, 0.75), subsetOf({AgentKind::TOR}));
}

TEST(Aggregation, InvalidInputs)
{
    EXPECT_THROW((void)aggregateRecommendations({}, 0.5), ConfigError);
    EXPECT_THROW((void)aggregateRecommendations({subsetOf({AgentKind::DCE})}, 0.0), ConfigError);
    EXPECT_THROW((void)aggregateRecommendations({subsetOf({AgentKind::DCE})}, 1.5), ConfigError);
}

TEST(Aggregation, RandomSubsetsMatchCountingOracleAndAreMonotone)
{
    std::mt19937 rng(7);
    std::uniform_int_distribution<int> size(1, 12);
    std::bernoulli_distribution member(0.4);
    for (int trial = 0; trial < 300; ++trial)
    {
        std::vector<AgentSubset> subsets(static_cast<std::size_t>(size(rng)));
        std::map<AgentKind, int> count;
        for (auto& s: subsets)
            for (auto kind: kAgentCatalog)
                if (member(rng))
                {
                    s.members.insert(kind);
                    ++count[kind];
                }
        auto const n = static_cast<int>(subsets.size());
        AgentSubset previous = AgentSubset::full(0);
        for (int tenths = 1; tenths <= 10; ++tenths)
        {
            auto const result = aggregateRecommendations(subsets, tenths / 10.0);
            std::set<AgentKind> expected;
            for (auto kind: kAgentCatalog)
                if (count[kind] > 0 && count[kind] * 10 >= tenths * n)
                    expected.insert(kind);
            if (!expected.empty())
                ASSERT_EQ(result.members, expected) << "theta=" << tenths / 10.0;
            else
                ASSERT_LE(result.members.size(), 1u);
            for (auto kind: result.members)
                ASSERT_TRUE(previous.contains(kind) || previous.members.size() <= 1);
            previous = result;
        }
    }
}

TEST(ErrorDistribution, CountsIncidences)
{
    std::vector<FailureAttribution> attributions;
    for (int i = 0; i < 4; ++i)
        attributions.push_back({"D" + std::to_string(i), 0, "retail", {ErrorCategory::DPV}, ""});
    for (int i = 0; i < 4; ++i)
        attributions.push_back({"C" + std::to_string(i), 0, "retail", {ErrorCategory::CMH}, ""});
    for (int i = 0; i < 2; ++i)
        attributions.push_back({"I" + std::to_string(i), 0, "retail", {ErrorCategory::IFS}, ""});
    auto const histogram = errorDistribution(attributions);
    EXPECT_DOUBLE_EQ(histogram.at(ErrorCategory::DPV), 40.0);
    EXPECT_DOUBLE_EQ(histogram.at(ErrorCategory::CMH), 40.0);
    EXPECT_DOUBLE_EQ(histogram.at(ErrorCategory::IFS), 20.0);
    EXPECT_DOUBLE_EQ(histogram.at(ErrorCategory::IRC), 0.0);
    EXPECT_EQ(errorDistribution({}).size(), 4u);
}
