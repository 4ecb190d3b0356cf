// SPDX-License-Identifier: Apache-2.0
#include "fama/environment.hpp"
#include "fama/errors.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace fama;

namespace
{

const Domain& retail()
{
    static const Domain domain = loadDomain(test::assetDir() / "domains" / "retail.json");
    return domain;
}

Task taskWith(std::vector<IdealAction> actions, std::optional<std::string> expectedState = std::nullopt)
{
    Task task;
    task.id = "T";
    task.domainId = "retail";
    task.idealActions = std::move(actions);
    task.idealStepCount = static_cast<int>(task.idealActions.size());
    task.expectedState = std::move(expectedState);
    return task;
}

Json resultOf(const Message& m)
{
    return Json::parse(m.content);
}

/// Assistant/tool message pairs for the given calls, as a tool agent would produce them.
std::vector<Message> transcriptOf(const std::vector<IdealAction>& calls)
{
    std::vector<Message> messages{Message::user("hi")};
    int n = 0;
    for (const auto& c: calls)
    {
        auto const id = "call_" + std::to_string(++n);
        messages.push_back(Message::assistant("", {ToolCall{id, c.name, c.arguments}}));
        messages.push_back(Message::tool(id, "{}"));
    }
    return messages;
}

/// Largest p such that ideal[0, p) is an in-order subsequence of `executed`.
int alignmentOracle(const std::vector<IdealAction>& ideal, const std::vector<IdealAction>& executed)
{
    auto same = [](const IdealAction& a, const IdealAction& b) {
        return a.name == b.name && canonicalDump(a.arguments) == canonicalDump(b.arguments);
    };
    int best = 0;
    for (std::size_t p = 1; p <= ideal.size(); ++p)
    {
        std::size_t i = 0;
        for (const auto& e: executed)
            if (i < p && same(ideal[i], e))
                ++i;
        if (i == p)
            best = static_cast<int>(p);
    }
    return best;
}

const std::vector<IdealAction> kFiveSteps = {
    {"find_user", {{"name", "Ben Ito"}}},
    {"get_user", {{"user_id", "U2"}}},
    {"get_order", {{"order_id", "O2"}}},
    {"list_products", Json::object()},
    {"exchange_item", {{"order_id", "O2"}, {"item_id", "P1"}, {"new_item_id", "P2"}}},
};

} // namespace

TEST(Environment, ReadToolsReturnRecords)
{
    auto state = reset(retail(), taskWith({}));
    auto const order = resultOf(step(retail(), state, {"c1", "get_order", {{"order_id", "O2"}}}));
    EXPECT_EQ(order["status"], "delivered");
    auto const found = resultOf(step(retail(), state, {"c2", "find_user", {{"name", "Cy Rowe"}}}));
    EXPECT_EQ(found["ids"], Json::array({"U3"}));
    auto const products = resultOf(step(retail(), state, {"c3", "list_products", Json::object()}));
    EXPECT_EQ(products.size(), 4u);
    EXPECT_EQ(state.executedCalls.size(), 3u);
    EXPECT_EQ(state.db, retail().initialDb);
}

TEST(Environment, ErrorsAreInBandAndLeaveDbUnchanged)
{
    auto state = reset(retail(), taskWith({}));
    auto const before = state.dbHash();

    auto const unknown = step(retail(), state, {"c1", "teleport", Json::object()});
    EXPECT_EQ(unknown.role, Role::Tool);
    EXPECT_EQ(unknown.toolCallId, "c1");
    EXPECT_TRUE(resultOf(unknown).contains("error"));

    EXPECT_TRUE(resultOf(step(retail(), state, {"c2", "get_order", {{"order_id", 3}}})).contains("error"));
    EXPECT_TRUE(resultOf(step(retail(), state, {"c3", "get_order", Json::object()})).contains("error"));
    EXPECT_TRUE(resultOf(step(retail(), state, {"c4", "get_order", {{"order_id", "O9"}}})).contains("error"));
    EXPECT_TRUE(resultOf(step(retail(), state, {"c5", "cancel_order", {{"order_id", "O3"}}})).contains("error"));
    EXPECT_TRUE(resultOf(step(retail(), state,
                              {"c6", "exchange_item", {{"order_id", "O2"}, {"item_id", "P4"}, {"new_item_id", "P2"}}}))
                    .contains("error"));
    EXPECT_TRUE(resultOf(step(retail(), state, {"c7", "update_address", {{"user_id", "U1"}, {"address", ""}}}))
                    .contains("error"));

    EXPECT_EQ(state.dbHash(), before);
    for (const auto& executed: state.executedCalls)
        EXPECT_TRUE(executed.error) << executed.call.id;
}

TEST(Environment, WriteToolsApplyPreconditionsAndSets)
{
    auto state = reset(retail(), taskWith({}));
    (void)step(retail(), state, {"c1", "cancel_order", {{"order_id", "O1"}}});
    EXPECT_EQ(state.db["orders"]["O1"]["status"], "cancelled");
    // Cancelling twice fails: the order is no longer pending.
    EXPECT_TRUE(resultOf(step(retail(), state, {"c2", "cancel_order", {{"order_id", "O1"}}})).contains("error"));

    (void)step(retail(), state, {"c3", "exchange_item", {{"order_id", "O2"}, {"item_id", "P1"}, {"new_item_id", "P2"}}});
    EXPECT_EQ(state.db["orders"]["O2"]["status"], "exchange requested");
    EXPECT_EQ(state.db["orders"]["O2"]["exchange_from"], "P1");
    EXPECT_EQ(state.db["orders"]["O2"]["exchange_to"], "P2");
}

TEST(Environment, TerminalToolsAndSpecs)
{
    EXPECT_TRUE(retail().isTerminal("transfer_to_human_agents"));
    EXPECT_FALSE(retail().isTerminal("get_order"));
    EXPECT_EQ(retail().toolSpecs().size(), retail().tools.size());
    EXPECT_EQ(retail().findTool("nope"), nullptr);
}

TEST(Environment, ResetRejectsForeignTask)
{
    auto task = taskWith({});
    task.domainId = "airline";
    EXPECT_THROW((void)reset(retail(), task), UnknownDomain);
}

TEST(Environment, RewardIsConjunctive)
{
    auto task = taskWith({{"cancel_order", {{"order_id", "O1"}}}}, "O1 cancelled");
    task.expectedOutputs = {"Has Been Cancelled"};

    auto state = reset(retail(), task);
    (void)step(retail(), state, {"c1", "cancel_order", {{"order_id", "O1"}}});
    std::vector<Message> good{Message::assistant("Your order has been cancelled.")};
    std::vector<Message> silent{Message::assistant("Done.")};
    EXPECT_EQ(computeReward(retail(), state.db, good, task), 1);
    EXPECT_EQ(computeReward(retail(), state.db, silent, task), 0);
    EXPECT_EQ(computeReward(retail(), retail().initialDb, good, task), 0);

    // Outputs spoken by the user do not count.
    std::vector<Message> echoed{Message::user("has been cancelled")};
    EXPECT_EQ(computeReward(retail(), state.db, echoed, task), 0);
}

TEST(Environment, ReplayMatchesStepwiseExecution)
{
    auto const task = taskWith(kFiveSteps, "exchange");
    auto const expected = replayIdealState(retail(), task);
    EXPECT_EQ(expected["orders"]["O2"]["status"], "exchange requested");

    Trajectory trajectory;
    trajectory.messages = transcriptOf(kFiveSteps);
    EXPECT_EQ(replayTrajectoryState(retail(), task, trajectory), expected);
}

TEST(ProcessAlignment, ExactReplayMatchesAll)
{
    EXPECT_EQ(alignProcess(transcriptOf(kFiveSteps), taskWith(kFiveSteps)), 5);
}

TEST(ProcessAlignment, PrefixOfThree)
{
    std::vector<IdealAction> prefix(kFiveSteps.begin(), kFiveSteps.begin() + 3);
    EXPECT_EQ(alignProcess(transcriptOf(prefix), taskWith(kFiveSteps)), 3);
}

TEST(ProcessAlignment, InterleavedReadsAreIgnored)
{
    std::vector<IdealAction> executed;
    for (const auto& action: kFiveSteps)
    {
        executed.push_back({"get_order", {{"order_id", "O3"}}});
        executed.push_back(action);
        executed.push_back({"list_products", Json::object()});
    }
    EXPECT_EQ(alignProcess(transcriptOf(executed), taskWith(kFiveSteps)), 5);
}

TEST(ProcessAlignment, OutOfOrderStopsAtFirstGap)
{
    std::vector<IdealAction> executed = {kFiveSteps[0], kFiveSteps[2], kFiveSteps[3], kFiveSteps[4]};
    EXPECT_EQ(alignProcess(transcriptOf(executed), taskWith(kFiveSteps)), 1);
}

TEST(ProcessAlignment, ArgumentKeyOrderIsIrrelevant)
{
    std::vector<IdealAction> executed = {
        {"exchange_item", Json::parse(R"({"new_item_id": "P2", "order_id": "O2", "item_id": "P1"})")}};
    EXPECT_EQ(alignProcess(transcriptOf(executed), taskWith({kFiveSteps[4]})), 1);
}

TEST(ProcessAlignment, RandomTranscriptsAgreeWithBruteForce)
{
    std::vector<IdealAction> pool = kFiveSteps;
    pool.push_back({"get_order", {{"order_id", "O1"}}});
    pool.push_back({"get_user", {{"user_id", "U4"}}});
    std::mt19937 rng(99);
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    std::uniform_int_distribution<int> length(0, 14);
    for (int trial = 0; trial < 500; ++trial)
    {
        std::vector<IdealAction> executed;
        for (int i = length(rng); i > 0; --i)
            executed.push_back(pool[pick(rng)]);
        ASSERT_EQ(alignProcess(transcriptOf(executed), taskWith(kFiveSteps)), alignmentOracle(kFiveSteps, executed));
    }
}

TEST(UserSimulator, ReplaysScriptThenStops)
{
    auto task = taskWith({});
    task.userScript = {"first", "second"};
    UserSimulator user(task, nullptr, nullptr);
    std::vector<Message> transcript;
    auto first = user.next(transcript);
    ASSERT_TRUE(first);
    EXPECT_EQ(first->content, "first");
    transcript.push_back(*first);
    transcript.push_back(Message::assistant("ok"));
    auto second = user.next(transcript);
    ASSERT_TRUE(second);
    EXPECT_EQ(second->content, "second");
    transcript.push_back(*second);
    EXPECT_FALSE(user.next(transcript));
}

TEST(UserSimulator, ScriptlessTaskNeedsEndpoint)
{
    UserSimulator user(taskWith({}), nullptr, nullptr);
    EXPECT_THROW((void)user.next({}), ConfigError);
}
