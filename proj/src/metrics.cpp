// SPDX-License-Identifier: Apache-2.0
#include "fama/metrics.hpp"

#include "fama/errors.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace fama
{

Fraction Fraction::reduced() const
{
    auto const g = std::gcd(numerator, denominator);
    return g == 0 ? *this : Fraction{numerator / g, denominator / g};
}

bool Fraction::operator==(const Fraction& other) const
{
    auto const a = reduced();
    auto const b = other.reduced();
    return a.numerator == b.numerator && a.denominator == b.denominator;
}

std::uint64_t binomial(int n, int k)
{
    if (k < 0 || n < 0 || k > n)
        return 0;
    k = std::min(k, n - k);
    std::uint64_t result = 1;
    for (int i = 1; i <= k; ++i)
        result = result * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
    return result;
}

Fraction passHatKExact(const std::vector<TrialOutcomes>& outcomes, int k)
{
    if (outcomes.empty())
        throw EmptyInput("pass^k needs at least one task");
    auto const n = outcomes.front().n;
    for (const auto& o: outcomes)
    {
        if (o.n != n)
            throw KMismatch("all tasks must share the same number of trials");
        if (o.c < 0 || o.c > o.n)
            throw KMismatch("task " + o.taskId + ": successes outside [0, n]");
    }
    if (k < 1 || k > n)
        throw KMismatch("k=" + std::to_string(k) + " outside [1, n=" + std::to_string(n) + "]");

    // All tasks share C(n,k), so the mean is one integer ratio.
    std::uint64_t numerator = 0;
    for (const auto& o: outcomes)
        numerator += binomial(o.c, k);
    return Fraction{numerator, binomial(n, k) * outcomes.size()}.reduced();
}

double passHatK(const std::vector<TrialOutcomes>& outcomes, int k)
{
    return passHatKExact(outcomes, k).value();
}

std::vector<TrialOutcomes> outcomesFromTrajectories(const std::vector<Trajectory>& trajectories)
{
    std::vector<TrialOutcomes> out;
    std::map<std::string, std::size_t> index;
    for (const auto& t: trajectories)
    {
        auto [it, inserted] = index.emplace(t.taskId, out.size());
        if (inserted)
            out.push_back({t.taskId, 0, 0});
        auto& o = out[it->second];
        ++o.n;
        // Provider errors count as failures.
        if (t.reward == 1 && t.termination == Termination::Completed)
            ++o.c;
    }
    return out;
}

double endToEndAccuracy(const std::vector<AttributeResult>& results)
{
    if (results.empty())
        return 0.0;
    auto const perfect = std::count_if(results.begin(), results.end(), [](const AttributeResult& r) {
        return canonicalDump(r.predicted) == canonicalDump(r.expected);
    });
    return static_cast<double>(perfect) / static_cast<double>(results.size());
}

double processAccuracy(int matched, int ideal)
{
    if (ideal < 1 || matched < 0 || matched > ideal)
        throw ConfigError("process accuracy needs 0 <= n <= m and m >= 1");
    return static_cast<double>(matched) / static_cast<double>(ideal);
}

double processAccuracy(const std::vector<ProcessResult>& results)
{
    if (results.empty())
        return 0.0;
    double total = 0.0;
    for (const auto& r: results)
        total += processAccuracy(r.matched, r.ideal);
    return total / static_cast<double>(results.size());
}

double tokenOverheadPct(double assistantTokens, double overheadTokens)
{
    if (assistantTokens < 0 || overheadTokens < 0)
        throw ZeroTotal("token counts must be non-negative");
    auto const total = assistantTokens + overheadTokens;
    if (total <= 0)
        throw ZeroTotal("assistant + overhead tokens is zero");
    return std::round(1000.0 * overheadTokens / total) / 10.0;
}

TokenStats tokenStats(const std::vector<Trajectory>& trajectories)
{
    if (trajectories.empty())
        throw EmptyInput("token statistics need at least one trajectory");
    std::vector<double> totals;
    double assistant = 0;
    double overhead = 0;
    for (const auto& t: trajectories)
    {
        totals.push_back(static_cast<double>(t.assistantTokens + t.overheadTokens));
        assistant += static_cast<double>(t.assistantTokens);
        overhead += static_cast<double>(t.overheadTokens);
    }
    std::sort(totals.begin(), totals.end());
    auto const n = static_cast<double>(totals.size());

    TokenStats stats;
    stats.min = totals.front();
    stats.max = totals.back();
    auto const mid = totals.size() / 2;
    stats.median = totals.size() % 2 ? totals[mid] : (totals[mid - 1] + totals[mid]) / 2.0;
    stats.avg = std::accumulate(totals.begin(), totals.end(), 0.0) / n;
    stats.assistantAvg = assistant / n;
    stats.overheadAvg = overhead / n;
    stats.overheadPct = assistant + overhead > 0 ? tokenOverheadPct(stats.assistantAvg, stats.overheadAvg) : 0.0;
    return stats;
}

LatencyStats latencyStats(const std::vector<Trajectory>& trajectories)
{
    LatencyStats stats;
    if (trajectories.empty())
        return stats;
    for (const auto& t: trajectories)
    {
        stats.wallAvg += t.wallTimeSeconds;
        stats.assistantAvg += t.assistantTimeSeconds;
    }
    stats.wallAvg /= static_cast<double>(trajectories.size());
    stats.assistantAvg /= static_cast<double>(trajectories.size());
    return stats;
}

int overflowCount(const std::vector<Trajectory>& trajectories)
{
    return static_cast<int>(std::count_if(trajectories.begin(), trajectories.end(),
                                          [](const Trajectory& t) { return t.termination == Termination::ContextOverflow; }));
}

int providerErrorCount(const std::vector<Trajectory>& trajectories)
{
    return static_cast<int>(std::count_if(trajectories.begin(), trajectories.end(),
                                          [](const Trajectory& t) { return t.termination == Termination::ProviderError; }));
}

MetricsReport buildReport(const std::string& method, const std::vector<Trajectory>& trajectories, int maxK)
{
    MetricsReport report;
    report.method = method;
    if (trajectories.empty())
        return report;

    auto const outcomes = outcomesFromTrajectories(trajectories);
    report.tasks = static_cast<int>(outcomes.size());
    auto const n = outcomes.front().n;
    bool const uniform = std::all_of(outcomes.begin(), outcomes.end(), [n](const auto& o) { return o.n == n; });
    report.trials = uniform ? n : 0;
    if (uniform)
        for (int k = 1; k <= std::min(maxK, n); ++k)
            report.passHat[k] = passHatK(outcomes, k);

    report.tokens = tokenStats(trajectories);
    report.latency = latencyStats(trajectories);
    report.overflowCount = overflowCount(trajectories);
    report.providerErrorCount = providerErrorCount(trajectories);
    return report;
}

void to_json(Json& j, const MetricsReport& r)
{
    Json passHat = Json::object();
    for (const auto& [k, v]: r.passHat)
        passHat[std::to_string(k)] = v;
    j = Json{
        {"method", r.method},
        {"tasks", r.tasks},
        {"trials", r.trials},
        {"pass_hat", passHat},
        {"end_to_end_accuracy", r.endToEndAccuracy ? Json(*r.endToEndAccuracy) : Json()},
        {"process_accuracy", r.processAccuracy ? Json(*r.processAccuracy) : Json()},
        {"tokens",
         {{"min", r.tokens.min},
          {"max", r.tokens.max},
          {"median", r.tokens.median},
          {"avg", r.tokens.avg},
          {"assistant", r.tokens.assistantAvg},
          {"overhead", r.tokens.overheadAvg},
          {"overhead_pct", r.tokens.overheadPct}}},
        {"latency_s", {{"wall_avg", r.latency.wallAvg}, {"assistant_avg", r.latency.assistantAvg}}},
        {"overflow_count", r.overflowCount},
        {"provider_error_count", r.providerErrorCount},
        {"error_histogram", r.errorHistogram},
    };
}

void from_json(const Json& j, MetricsReport& r)
{
    r.method = j.value("method", "");
    r.tasks = j.value("tasks", 0);
    r.trials = j.value("trials", 0);
    r.passHat.clear();
    auto const passHatSpec = j.value("pass_hat", Json::object());
    for (const auto& [k, v]: passHatSpec.items())
        r.passHat[std::stoi(k)] = v.get<double>();
    if (j.contains("end_to_end_accuracy") && j["end_to_end_accuracy"].is_number())
        r.endToEndAccuracy = j["end_to_end_accuracy"].get<double>();
    if (j.contains("process_accuracy") && j["process_accuracy"].is_number())
        r.processAccuracy = j["process_accuracy"].get<double>();
    auto const tokens = j.value("tokens", Json::object());
    r.tokens.min = tokens.value("min", 0.0);
    r.tokens.max = tokens.value("max", 0.0);
    r.tokens.median = tokens.value("median", 0.0);
    r.tokens.avg = tokens.value("avg", 0.0);
    r.tokens.assistantAvg = tokens.value("assistant", 0.0);
    r.tokens.overheadAvg = tokens.value("overhead", 0.0);
    r.tokens.overheadPct = tokens.value("overhead_pct", 0.0);
    auto const latency = j.value("latency_s", Json::object());
    r.latency.wallAvg = latency.value("wall_avg", 0.0);
    r.latency.assistantAvg = latency.value("assistant_avg", 0.0);
    r.overflowCount = j.value("overflow_count", 0);
    r.providerErrorCount = j.value("provider_error_count", 0);
    r.errorHistogram = j.value("error_histogram", std::map<std::string, double>{});
}

namespace
{

std::string fixed(double value, int decimals)
{
    std::ostringstream out;
    out << std::fixed << std::setprecision(decimals) << value;
    return out.str();
}

} // namespace

std::string renderPassHatTable(const std::vector<MetricsReport>& reports, int maxK)
{
    std::size_t width = 6;
    for (const auto& r: reports)
        width = std::max(width, r.method.size());

    std::ostringstream out;
    out << std::left << std::setw(static_cast<int>(width)) << "Method";
    for (int k = 1; k <= maxK; ++k)
        out << std::right << std::setw(9) << ("pass^" + std::to_string(k));
    out << "\n";
    for (const auto& r: reports)
    {
        out << std::left << std::setw(static_cast<int>(width)) << r.method;
        for (int k = 1; k <= maxK; ++k)
        {
            auto it = r.passHat.find(k);
            out << std::right << std::setw(9) << (it == r.passHat.end() ? "-" : fixed(100.0 * it->second, 2));
        }
        out << "\n";
    }
    return out.str();
}

std::string renderTokenTable(const std::vector<MetricsReport>& reports)
{
    std::size_t width = 6;
    for (const auto& r: reports)
        width = std::max(width, r.method.size());
    std::ostringstream out;
    out << std::left << std::setw(static_cast<int>(width)) << "Method";
    for (const char* column: {"Min", "Max", "Median", "Avg", "Assistant", "Overhead", "Ovh(%)", "Latency", "Overflow"})
        out << std::right << std::setw(11) << column;
    out << "\n";
    for (const auto& r: reports)
    {
        out << std::left << std::setw(static_cast<int>(width)) << r.method << std::right << std::setw(11)
            << fixed(r.tokens.min, 0) << std::setw(11) << fixed(r.tokens.max, 0) << std::setw(11)
            << fixed(r.tokens.median, 1) << std::setw(11) << fixed(r.tokens.avg, 1) << std::setw(11)
            << fixed(r.tokens.assistantAvg, 1) << std::setw(11) << fixed(r.tokens.overheadAvg, 1) << std::setw(11)
            << fixed(r.tokens.overheadPct, 1) << std::setw(11) << fixed(r.latency.wallAvg, 2) << std::setw(11)
            << r.overflowCount << "\n";
    }
    return out.str();
}

} // namespace fama
