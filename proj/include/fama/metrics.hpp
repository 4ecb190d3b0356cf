// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fama/conversation.hpp"
#include "fama/failure_analysis.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fama
{

struct TrialOutcomes
{
    std::string taskId;
    int n = 0;
    int c = 0;
};

/// Exact non-negative rational.
struct Fraction
{
    std::uint64_t numerator = 0;
    std::uint64_t denominator = 1;

    [[nodiscard]] double value() const { return static_cast<double>(numerator) / static_cast<double>(denominator); }
    [[nodiscard]] Fraction reduced() const;
    /// Cross-multiplied comparison, exact.
    bool operator==(const Fraction& other) const;
};

[[nodiscard]] std::uint64_t binomial(int n, int k);

/// Mean over tasks of C(c,k)/C(n,k). All tasks must share n; throws
/// KMismatch when k > n or k < 1.
[[nodiscard]] Fraction passHatKExact(const std::vector<TrialOutcomes>& outcomes, int k);
[[nodiscard]] double passHatK(const std::vector<TrialOutcomes>& outcomes, int k);

/// Groups trajectories by task id; a task's n is its number of trials.
[[nodiscard]] std::vector<TrialOutcomes> outcomesFromTrajectories(const std::vector<Trajectory>& trajectories);

struct AttributeResult
{
    Json predicted;
    Json expected;
};

/// Fraction of results whose predicted attributes all equal the expected ones.
[[nodiscard]] double endToEndAccuracy(const std::vector<AttributeResult>& results);

struct ProcessResult
{
    int matched = 0;
    int ideal = 0;
};

[[nodiscard]] double processAccuracy(int matched, int ideal);
[[nodiscard]] double processAccuracy(const std::vector<ProcessResult>& results);

/// 100 * overhead / (assistant + overhead), rounded to one decimal.
[[nodiscard]] double tokenOverheadPct(double assistantTokens, double overheadTokens);

struct TokenStats
{
    double min = 0;
    double max = 0;
    double median = 0;
    double avg = 0;
    double assistantAvg = 0;
    double overheadAvg = 0;
    double overheadPct = 0;
};

[[nodiscard]] TokenStats tokenStats(const std::vector<Trajectory>& trajectories);

struct LatencyStats
{
    double wallAvg = 0;
    double assistantAvg = 0;
};

[[nodiscard]] LatencyStats latencyStats(const std::vector<Trajectory>& trajectories);

[[nodiscard]] int overflowCount(const std::vector<Trajectory>& trajectories);
[[nodiscard]] int providerErrorCount(const std::vector<Trajectory>& trajectories);

struct MetricsReport
{
    std::string method;
    int tasks = 0;
    int trials = 0;
    std::map<int, double> passHat;
    std::optional<double> endToEndAccuracy;
    std::optional<double> processAccuracy;
    TokenStats tokens;
    LatencyStats latency;
    int overflowCount = 0;
    int providerErrorCount = 0;
    std::map<std::string, double> errorHistogram;
};

/// pass^k for k = 1..min(maxK, n), token/latency/overflow statistics.
[[nodiscard]] MetricsReport buildReport(const std::string& method, const std::vector<Trajectory>& trajectories,
                                        int maxK = 5);

void to_json(Json& j, const MetricsReport& report);
void from_json(const Json& j, MetricsReport& report);

/// Methods x pass^1..pass^maxK, in percent with two decimals.
[[nodiscard]] std::string renderPassHatTable(const std::vector<MetricsReport>& reports, int maxK = 5);
/// Methods x token and latency columns.
[[nodiscard]] std::string renderTokenTable(const std::vector<MetricsReport>& reports);

} // namespace fama
