// SPDX-License-Identifier: Apache-2.0
// Prints one PASS/FAIL line per acceptance criterion; exits non-zero on any FAIL.
#include "fama/environment.hpp"
#include "fama/gateway.hpp"
#include "fama/helpers.hpp"
#include "fama/metrics.hpp"
#include "fama/runner.hpp"

#include "support.hpp"

#include <spdlog/spdlog.h>

#include <bit>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

using namespace fama;

namespace
{

struct Check
{
    std::string name;
    std::function<std::string()> body; // empty string on success, otherwise the reason
};

using Clock = std::chrono::steady_clock;

double secondsSince(Clock::time_point start)
{
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string passHatOracle()
{
    auto const start = Clock::now();
    std::mt19937 rng(7);
    for (int n = 1; n <= 8; ++n)
        for (int c = 0; c <= n; ++c)
        {
            std::vector<TrialOutcomes> one{{"t", n, c}};
            // Random placement of the c successes among n trials.
            std::vector<bool> trials(static_cast<std::size_t>(n), false);
            std::fill(trials.begin(), trials.begin() + c, true);
            std::shuffle(trials.begin(), trials.end(), rng);
            for (int k = 1; k <= n; ++k)
            {
                std::uint64_t good = 0, total = 0;
                for (std::uint32_t mask = 0; mask < (1u << n); ++mask)
                {
                    if (std::popcount(mask) != k)
                        continue;
                    ++total;
                    bool ok = true;
                    for (int i = 0; i < n; ++i)
                        if ((mask >> i & 1u) && !trials[static_cast<std::size_t>(i)])
                            ok = false;
                    good += ok;
                }
                if (!(passHatKExact(one, k) == Fraction{good, total}))
                    return "mismatch at n=" + std::to_string(n) + " c=" + std::to_string(c) + " k=" + std::to_string(k);
            }
            if (!(passHatKExact(one, 1) == Fraction{static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(n)}))
                return "pass^1 != c/n";
            if (!(passHatKExact(one, n) == Fraction{c == n ? 1u : 0u, 1u}))
                return "pass^n != [c=n]";
        }
    auto const elapsed = secondsSince(start);
    return elapsed < 1.0 ? "" : "took " + std::to_string(elapsed) + " s";
}

std::string tokenOverhead()
{
    auto near = [](double a, double b) { return std::abs(a - b) <= 0.1 + 1e-9; };
    if (!near(tokenOverheadPct(1822.1, 795.3), 30.4))
        return "airline row";
    if (!near(tokenOverheadPct(1714.6, 725.4), 29.7))
        return "retail row";
    if (std::lround(tokenOverheadPct(1822.1, 795.3)) != 30)
        return "integer rounding";
    if (tokenOverheadPct(1149.0, 0.0) != 0.0 || tokenOverheadPct(1013.0, 0.0) != 0.0)
        return "no-helper rows";
    return "";
}

std::string flagship()
{
    auto const start = Clock::now();
    test::Suite suite("flagship.json");
    auto const r = suite.runner().runFama(suite.domains, suite.tasks, suite.catalog);
    if (r.stage1.episodes.size() != 6)
        return "expected 6 tasks";
    std::vector<std::string> failed;
    for (auto i: r.stage1.failures)
        failed.push_back(r.stage1.episodes[i].trajectory.taskId);
    if (failed != std::vector<std::string>{"F4", "F5", "F6"})
        return "stage 1 failures differ";
    using E = ErrorCategory;
    if (r.attributions.size() != 3 || r.attributions[0].mainErrors != std::vector<E>{E::DPV}
        || r.attributions[1].mainErrors != std::vector<E>{E::CMH}
        || r.attributions[2].mainErrors != std::vector<E>{E::DPV, E::CMH})
        return "attributions differ";
    AgentSubset expected;
    expected.members = {AgentKind::DCE, AgentKind::Memory};
    expected.memoryK = 2;
    if (r.domainSubsets.at("retail") != expected)
        return "aggregated subset is " + r.domainSubsets.at("retail").label();
    if (r.stage1Metrics.passHat.at(1) != 0.5 || r.stage3Metrics.passHat.at(1) != 1.0)
        return "pass^1 not 50% -> 100%";
    auto const elapsed = secondsSince(start);
    return elapsed < 5.0 ? "" : "took " + std::to_string(elapsed) + " s";
}

std::string memoryWindowProperty()
{
    std::mt19937 rng(3);
    std::uniform_int_distribution<int> userTurns(0, 20);
    for (int trial = 0; trial < 300; ++trial)
    {
        std::vector<Message> transcript{Message::system("policy")};
        std::vector<std::string> users;
        for (int u = userTurns(rng); u > 0; --u)
        {
            users.push_back("turn " + std::to_string(users.size()) + "\n verbatim ");
            transcript.push_back(Message::user(users.back()));
            transcript.push_back(Message::assistant("ack"));
        }
        for (int k: {0, 2, 4, 6})
        {
            auto const keep = std::min<std::size_t>(static_cast<std::size_t>(k), users.size());
            std::vector<std::string> want(users.end() - static_cast<std::ptrdiff_t>(keep), users.end());
            auto const fragment = memoryWindow(transcript, k);
            if (fragment.items != want)
                return "window mismatch at k=" + std::to_string(k);
            if (k == 0 && !fragment.text.empty())
                return "k=0 not empty";
        }
    }
    return "";
}

std::string overflow()
{
    test::Suite suite("flagship.json");
    suite.config.endpoints.at("tool").maxContextTokens = 40;
    suite.endpoints = buildEndpoints(suite.config);
    auto const episodes = suite.runner().runMethod(Method::FC, suite.domains, suite.tasks);
    for (const auto& e: episodes)
        if (e.trajectory.termination != Termination::ContextOverflow || e.trajectory.reward != 0)
            return "episode " + e.trajectory.taskId + " not an overflow failure";
    auto const report = summarize("FC", episodes);
    if (report.overflowCount != static_cast<int>(episodes.size()))
        return "overflow_count " + std::to_string(report.overflowCount);
    return "";
}

std::string processAlignment()
{
    const std::vector<IdealAction> ideal = {
        {"find_user", {{"name", "Ben Ito"}}},
        {"get_user", {{"user_id", "U2"}}},
        {"get_order", {{"order_id", "O2"}}},
        {"list_products", Json::object()},
        {"exchange_item", {{"order_id", "O2"}, {"item_id", "P1"}, {"new_item_id", "P2"}}},
    };
    Task task;
    task.id = "T";
    task.domainId = "retail";
    task.idealActions = ideal;
    task.idealStepCount = 5;
    auto transcript = [](const std::vector<IdealAction>& calls) {
        std::vector<Message> messages{Message::user("hi")};
        int n = 0;
        for (const auto& c: calls)
        {
            auto const id = "call_" + std::to_string(++n);
            messages.push_back(Message::assistant("", {ToolCall{id, c.name, c.arguments}}));
            messages.push_back(Message::tool(id, "{}"));
        }
        return messages;
    };
    if (alignProcess(transcript(ideal), task) != 5)
        return "exact replay";
    if (alignProcess(transcript({ideal.begin(), ideal.begin() + 3}), task) != 3)
        return "3-step prefix";
    std::vector<IdealAction> interleaved;
    for (const auto& a: ideal)
    {
        interleaved.push_back({"get_order", {{"order_id", "O3"}}});
        interleaved.push_back(a);
    }
    if (alignProcess(transcript(interleaved), task) != 5)
        return "interleaved reads";
    auto const avg = processAccuracy({{5, 5}, {3, 5}, {2, 3}});
    if (std::abs(avg - (1.0 + 0.6 + 2.0 / 3.0) / 3.0) > 5e-5)
        return "average accuracy";
    if (std::abs(processAccuracy(2, 3) - 0.6667) > 5e-5)
        return "n/m to 4 decimals";
    return "";
}

std::string stripped(const std::string& name)
{
    auto text = readFile(test::fixtureDir() / "wire" / name);
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r'))
        text.pop_back();
    return text;
}

std::string wire()
{
    ChatRequest request;
    request.messages = {
        Message::system("You are helpful."),
        Message::user("Cancel order O1"),
        Message::assistant("", {ToolCall{"call_1", "cancel_order", {{"order_id", "O1"}}}}),
        Message::tool("call_1", R"({"status":"cancelled"})"),
    };
    request.tools = {ToolSpec{"cancel_order", "Cancel an order.",
                              Json::parse(R"({"type": "object", "properties": {"order_id": {"type": "string"}},
                                              "required": ["order_id"]})")}};
    request.sampling.maxTokens = 256;
    request.seed = 7;
    if (canonicalDump(toWireRequest(request, "m1")) != stripped("request_tool_roundtrip.json"))
        return "tool round-trip request differs from golden";

    ChatRequest plain;
    plain.messages = {Message::user("Say hi.")};
    plain.sampling.temperature = 0.7;
    plain.sampling.topP = 0.9;
    if (canonicalDump(toWireRequest(plain, "m1")) != stripped("request_plain.json"))
        return "plain request differs from golden";

    for (auto const* name: {"response_tool_call.json", "response_text.json"})
    {
        auto const choice = parseWireResponse(Json::parse(stripped(name)));
        if ((choice.finishReason == "tool_calls") != !choice.toolCalls.empty())
            return std::string("finish_reason invariant broken in ") + name;
    }
    return "";
}

std::string fingerprint(const FamaResult& r)
{
    std::string out;
    for (const auto& e: r.stage1.episodes)
        out += canonicalDump(Json(e.trajectory));
    for (const auto& e: r.stage3)
        out += canonicalDump(Json(e.trajectory));
    for (const auto& a: r.attributions)
        out += canonicalDump(Json(a));
    out += canonicalDump(Json(r.domainSubsets));
    for (const auto& rep: r.reports)
        out += canonicalDump(Json(rep));
    return out + canonicalDump(Json(r.stage1Metrics)) + canonicalDump(Json(r.stage3Metrics));
}

std::string determinism()
{
    auto once = [] {
        test::Suite suite("flagship.json");
        return fingerprint(suite.runner().runFama(suite.domains, suite.tasks, suite.catalog));
    };
    return once() == once() ? "" : "two runs differ";
}

std::string parity()
{
    test::Suite suite("flagship.json");
    auto run = suite.config.run;
    run.memoryK = 2;
    auto const runner = suite.runner(run);
    auto const irma = runner.runMethod(Method::IRMA, suite.domains, suite.tasks);
    auto const base = runner.runMethod(Method::Base, suite.domains, suite.tasks);
    for (std::size_t i = 0; i < suite.tasks.size(); ++i)
    {
        const auto& task = suite.tasks[i];
        const auto& domain = suite.domains.at(task.domainId);
        auto const full = runner.runEpisode(domain, task, AgentSubset::full(2), 0, Method::FC, "IRMA");
        if (canonicalDump(Json(irma[i].trajectory)) != canonicalDump(Json(full.trajectory)))
            return "IRMA differs on " + task.id;
        auto const empty = runner.runEpisode(domain, task, {}, 0, Method::FC, "FAMA");
        if (canonicalDump(Json(base[i].trajectory.messages)) != canonicalDump(Json(empty.trajectory.messages)))
            return "Base differs on " + task.id;
    }
    return "";
}

} // namespace

int main()
{
    spdlog::set_level(spdlog::level::off);
    const std::vector<Check> checks = {
        {"pass^k matches brute-force oracle", passHatOracle},
        {"token overhead percentages", tokenOverhead},
        {"flagship failure-aware pipeline", flagship},
        {"memory window keeps recent user turns", memoryWindowProperty},
        {"context overflow is a scored failure", overflow},
        {"process alignment", processAlignment},
        {"wire format golden fixtures", wire},
        {"deterministic replay", determinism},
        {"IRMA and Base parity", parity},
    };
    int failures = 0;
    for (const auto& check: checks)
    {
        std::string reason;
        try
        {
            reason = check.body();
        }
        catch (const std::exception& e)
        {
            reason = std::string("exception: ") + e.what();
        }
        if (reason.empty())
            std::cout << "PASS " << check.name << "\n";
        else
        {
            ++failures;
            std::cout << "FAIL " << check.name << ": " << reason << "\n";
        }
    }
    return failures == 0 ? 0 : 1;
}
