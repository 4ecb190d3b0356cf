// SPDX-License-Identifier: Apache-2.0
#include "fama/cli.hpp"

#include "fama/config.hpp"
#include "fama/errors.hpp"
#include "fama/persistence.hpp"
#include "fama/runner.hpp"
#include "fama/schema.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

namespace fama
{

namespace
{

namespace fs = std::filesystem;

/// Options shared by the commands that execute episodes.
struct RunOptions
{
    fs::path config;
    fs::path out;
    std::vector<fs::path> domains;
    std::vector<fs::path> tasks;
    std::string method;
    std::string famaBase;
    std::optional<int> nTrials;
    std::optional<std::uint64_t> seed;
    std::optional<int> maxTurns;
    std::optional<std::int64_t> maxContextTokens;
    std::optional<int> memoryK;
    std::optional<int> workers;
    std::optional<double> threshold;
    bool sweepMemoryK = false;
    std::optional<fs::path> promptsDir;
};

void addRunFlags(CLI::App& cmd, RunOptions& o, bool withMethod)
{
    cmd.add_option("--config", o.config, "Run configuration (JSON)")->required();
    cmd.add_option("--out", o.out, "Artifact directory")->required();
    cmd.add_option("--domain", o.domains, "Domain file (repeatable; overrides the config)");
    cmd.add_option("--tasks", o.tasks, "Tasks file (repeatable; overrides the config)");
    if (withMethod)
    {
        cmd.add_option("--method", o.method, "fc, react, irma, fama, self-reflection or base");
        cmd.add_flag("--sweep-memory-k", o.sweepMemoryK, "Tune Memory k per domain before the re-run");
        cmd.add_option("--threshold", o.threshold, "Aggregation threshold theta");
    }
    cmd.add_option("--fama-base", o.famaBase, "Tool-agent protocol used inside the pipeline");
    cmd.add_option("--n-trials", o.nTrials);
    cmd.add_option("--seed", o.seed);
    cmd.add_option("--max-turns", o.maxTurns);
    cmd.add_option("--max-context-tokens", o.maxContextTokens);
    cmd.add_option("--memory-k", o.memoryK);
    cmd.add_option("--workers", o.workers);
    cmd.add_option("--prompts-dir", o.promptsDir, "Directory of prompt overrides");
}

/// Loaded inputs for one invocation.
struct Workspace
{
    AppConfig config;
    PromptLibrary prompts;
    CauseCatalog catalog;
    DomainSet domains;
    std::vector<Task> tasks;
    std::map<std::string, std::string> assetHashes;
};

Json loadSchema(const std::string& name)
{
    return loadJsonFile(defaultAssetDir() / "schemas" / (name + ".schema.json"));
}

void requireSchema(const Json& doc, const std::string& schemaName, const fs::path& source)
{
    auto const problems = validateSchema(doc, loadSchema(schemaName));
    if (!problems.empty())
        throw ConfigError(source.string() + ": " + problems.front());
}

std::string assetLabel(const std::string& kind, const fs::path& path)
{
    return kind + ":" + path.filename().string();
}

void loadInputs(Workspace& ws)
{
    for (const auto& path: ws.config.domainFiles)
    {
        auto const text = readFile(path);
        auto const doc = parseJsonDocument(text, path.string());
        requireSchema(doc, "domain", path);
        auto domain = parseDomain(doc);
        ws.assetHashes[assetLabel("domain", path)] = gitBlobHash(text);
        auto const id = domain.id;
        if (!ws.domains.emplace(id, std::move(domain)).second)
            throw ConfigError(path.string() + ": duplicate domain id '" + id + "'");
    }
    for (const auto& path: ws.config.taskFiles)
    {
        auto const text = readFile(path);
        auto const doc = parseJsonDocument(text, path.string());
        requireSchema(doc, "tasks", path);
        auto tasks = parseTasks(doc);
        ws.assetHashes[assetLabel("tasks", path)] = gitBlobHash(text);
        ws.tasks.insert(ws.tasks.end(), tasks.begin(), tasks.end());
    }
    for (const auto& task: ws.tasks)
        if (!ws.domains.count(task.domainId))
            throw UnknownDomain("task '" + task.id + "' references unknown domain '" + task.domainId + "'");
}

Workspace prepare(const RunOptions& o, bool needInputs)
{
    Workspace ws;
    ws.config = loadConfig(o.config);
    auto& run = ws.config.run;
    if (!o.method.empty())
        run.method = methodFromString(o.method);
    if (!o.famaBase.empty())
        run.famaBase = methodFromString(o.famaBase);
    if (o.nTrials)
        run.nTrials = *o.nTrials;
    if (o.seed)
        run.seed = *o.seed;
    if (o.maxTurns)
        run.maxTurns = *o.maxTurns;
    if (o.maxContextTokens)
        run.maxContextTokens = *o.maxContextTokens;
    if (o.memoryK)
        run.memoryK = *o.memoryK;
    if (o.workers)
        run.workers = *o.workers;
    if (o.threshold)
        run.aggregationThreshold = *o.threshold;
    if (o.sweepMemoryK)
        run.sweepMemoryK = true;
    if (!o.domains.empty())
        ws.config.domainFiles = o.domains;
    if (!o.tasks.empty())
        ws.config.taskFiles = o.tasks;
    if (o.promptsDir)
        ws.config.promptsDir = o.promptsDir;

    ws.prompts = PromptLibrary::load(defaultAssetDir() / "prompts", ws.config.promptsDir);
    ws.catalog = ws.config.causesDir ? CauseCatalog::load(*ws.config.causesDir) : CauseCatalog::builtin();
    ws.assetHashes["prompts"] = ws.prompts.contentHash();
    ws.assetHashes["causes"] = ws.catalog.contentHash();
    for (const auto& [name, endpoint]: ws.config.endpoints)
        if (endpoint.kind == "scripted")
            ws.assetHashes["script:" + name] = gitBlobHash(readFile(endpoint.script));

    if (needInputs)
    {
        if (ws.config.domainFiles.empty() || ws.config.taskFiles.empty())
            throw ConfigError("no domain or tasks files given");
        loadInputs(ws);
    }
    return ws;
}

Json configSnapshot(const Workspace& ws)
{
    Json endpoints = Json::object();
    for (const auto& [name, e]: ws.config.endpoints)
        endpoints[name] = {{"kind", e.kind}, {"model", e.model}, {"base_url", e.baseUrl}};
    return {{"run", runConfigToJson(ws.config.run)}, {"endpoints", endpoints}};
}

RunManifest makeManifest(const std::string& command, const Workspace& ws)
{
    RunManifest m;
    m.command = command;
    m.config = configSnapshot(ws);
    m.assetHashes = ws.assetHashes;
    m.createdAt = currentTimestamp();
    m.toolVersion = kToolVersion;
    return m;
}

std::string percent(double value)
{
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.2f", 100.0 * value);
    return buffer;
}

std::string fixed(double value, int decimals)
{
    char buffer[48];
    std::snprintf(buffer, sizeof buffer, "%.*f", decimals, value);
    return buffer;
}

std::string passHatCsv(const std::vector<MetricsReport>& reports, int maxK = 5)
{
    std::string csv = "method,tasks,trials";
    for (int k = 1; k <= maxK; ++k)
        csv += ",pass^" + std::to_string(k);
    csv += ",overflow,provider_errors\n";
    for (const auto& r: reports)
    {
        csv += r.method + "," + std::to_string(r.tasks) + "," + std::to_string(r.trials);
        for (int k = 1; k <= maxK; ++k)
        {
            auto it = r.passHat.find(k);
            csv += "," + (it == r.passHat.end() ? std::string() : percent(it->second));
        }
        csv += "," + std::to_string(r.overflowCount) + "," + std::to_string(r.providerErrorCount) + "\n";
    }
    return csv;
}

std::string tokensCsv(const std::vector<MetricsReport>& reports)
{
    std::string csv = "method,assistant_avg,overhead_avg,total_avg,overhead_pct,min,max,median,wall_time_avg_s,"
                      "assistant_time_avg_s\n";
    for (const auto& r: reports)
    {
        const auto& t = r.tokens;
        csv += r.method + "," + fixed(t.assistantAvg, 1) + "," + fixed(t.overheadAvg, 1) + "," + fixed(t.avg, 1) + ","
               + fixed(t.overheadPct, 1) + "," + fixed(t.min, 0) + "," + fixed(t.max, 0) + "," + fixed(t.median, 1)
               + "," + fixed(r.latency.wallAvg, 3) + "," + fixed(r.latency.assistantAvg, 3) + "\n";
    }
    return csv;
}

std::string histogramCsv(const std::vector<FailureAttribution>& attributions)
{
    std::map<ErrorCategory, int> counts;
    for (const auto& a: attributions)
        for (auto c: a.mainErrors)
            ++counts[c];
    auto const distribution = errorDistribution(attributions);
    std::string csv = "category,count,percent\n";
    for (auto c: kErrorCategories)
    {
        auto it = distribution.find(c);
        csv += std::string(toString(c)) + "," + std::to_string(counts[c]) + ","
               + fixed(it == distribution.end() ? 0.0 : it->second, 1) + "\n";
    }
    return csv;
}

std::string recommendationsCsv(const std::vector<Recommendation>& recommendations)
{
    std::map<std::string, int> counts;
    for (const auto& r: recommendations)
        for (auto kind: r.subset.members)
            ++counts[kind == AgentKind::Memory ? "Memory(k=" + std::to_string(r.subset.memoryK) + ")"
                                               : std::string(toString(kind))];
    std::string csv = "agent,count,percent\n";
    auto const total = static_cast<double>(recommendations.size());
    for (const auto& [agent, count]: counts)
        csv += agent + "," + std::to_string(count) + "," + fixed(100.0 * count / total, 1) + "\n";
    return csv;
}

Json reportsJson(const std::vector<MetricsReport>& reports)
{
    Json arr = Json::array();
    for (const auto& r: reports)
        arr.push_back(r);
    return {{"reports", arr}};
}

std::string reportText(const std::vector<MetricsReport>& reports)
{
    return "pass^k (%)\n" + renderPassHatTable(reports) + "\nTokens and latency\n" + renderTokenTable(reports);
}

void writeMetrics(const fs::path& dir, const std::vector<MetricsReport>& reports)
{
    writeFile(dir / "metrics.json", reportsJson(reports).dump(2) + "\n");
    writeFile(dir / "report.txt", reportText(reports));
}

bool anyUnreachable(const std::vector<EpisodeResult>& episodes)
{
    return std::any_of(episodes.begin(), episodes.end(), [](const EpisodeResult& e) { return e.providerUnreachable; });
}

Json subsetsByDomain(const std::map<std::string, AgentSubset>& subsets)
{
    Json j = Json::object();
    for (const auto& [domain, subset]: subsets)
        j[domain] = subset;
    return j;
}

int cmdRun(const RunOptions& o, std::ostream& out)
{
    auto ws = prepare(o, true);
    auto const endpoints = buildEndpoints(ws.config);
    MethodRunner runner(ws.config.run, endpoints, ws.prompts, ws.config.extensions);
    fs::create_directories(o.out);

    bool unreachable = false;
    std::vector<MetricsReport> reports;
    if (ws.config.run.method == Method::FAMA)
    {
        auto result = runner.runFama(ws.domains, ws.tasks, ws.catalog);
        writeRecords(o.out / "stage1_trajectories.jsonl", trajectoriesOf(result.stage1.episodes));
        writeRecords(o.out / "stage3_trajectories.jsonl", trajectoriesOf(result.stage3));
        writeRecords(o.out / "reports.jsonl", result.reports);
        writeRecords(o.out / "attributions.jsonl", result.attributions);
        writeRecords(o.out / "subsets.jsonl", result.recommendations);
        writeFile(o.out / "aggregated_subsets.json", subsetsByDomain(result.domainSubsets).dump(2) + "\n");
        if (!result.memorySweep.empty())
        {
            std::string csv = "domain,k,pass^1\n";
            for (const auto& row: result.memorySweep)
                csv += row.domainId + "," + std::to_string(row.k) + "," + percent(row.passHat1) + "\n";
            writeFile(o.out / "memory_sweep.csv", csv);
        }
        reports = {result.stage1Metrics, result.stage3Metrics};
        unreachable = anyUnreachable(result.stage1.episodes) || anyUnreachable(result.stage3);
        out << "failures: " << result.stage1.failures.size() << "\n";
        for (const auto& [domain, subset]: result.domainSubsets)
            out << "subset[" << domain << "]: " << subset.label() << "\n";
    }
    else
    {
        auto episodes = runner.runMethod(ws.config.run.method, ws.domains, ws.tasks);
        writeRecords(o.out / "trajectories.jsonl", trajectoriesOf(episodes));
        auto const label = episodes.empty() ? std::string(toString(ws.config.run.method))
                                            : episodes.front().trajectory.method;
        reports = {summarize(label, episodes)};
        unreachable = anyUnreachable(episodes);
    }
    writeMetrics(o.out, reports);
    writeManifest(o.out, makeManifest("run", ws));
    out << reportText(reports);
    if (unreachable)
    {
        spdlog::error("at least one episode could not reach its provider");
        return kExitProvider;
    }
    return kExitOk;
}

struct AnalyzeOptions
{
    fs::path config;
    fs::path trajectories;
    fs::path out;
    std::vector<fs::path> tasks;
    std::string domainId = "default";
};

int cmdAnalyze(const AnalyzeOptions& o, std::ostream& out)
{
    RunOptions ro;
    ro.config = o.config;
    ro.tasks = o.tasks;
    auto ws = prepare(ro, false);

    std::map<std::string, std::string> domainOf;
    for (const auto& path: ws.config.taskFiles)
        for (const auto& task: parseTasks(loadJsonFile(path)))
            domainOf[task.id] = task.domainId;

    std::size_t estimated = 0;
    auto const trajectories = readTrajectories(o.trajectories, &estimated);
    if (estimated > 0)
        spdlog::warn("{} messages had no token count; estimated from text", estimated);
    ws.assetHashes["trajectories"] = gitBlobHash(readFile(o.trajectories));

    std::vector<Trajectory> failures;
    std::copy_if(trajectories.begin(), trajectories.end(), std::back_inserter(failures),
                 [](const Trajectory& t) { return t.reward == 0; });

    std::vector<ErrorAnalysisReport> reports;
    std::vector<FailureAttribution> attributions;
    std::vector<Recommendation> recommendations;
    if (failures.empty())
    {
        out << "no failures\n";
    }
    else
    {
        auto const endpoints = buildEndpoints(ws.config);
        AnalyzerOptions options;
        options.defaultMemoryK = ws.config.run.memoryK > 0 ? ws.config.run.memoryK : 2;
        options.sampling = ws.config.run.sampling;
        FailureAnalyzer analyzer(endpoints.get(ws.config.run.judgeEndpoint), ws.prompts, ws.catalog, options);
        for (const auto& t: failures)
        {
            auto it = domainOf.find(t.taskId);
            auto const domain = it == domainOf.end() ? o.domainId : it->second;
            auto outcome = analyzer.analyzeFailure(t, domain);
            reports.insert(reports.end(), outcome.reports.begin(), outcome.reports.end());
            attributions.push_back(outcome.attribution);
            recommendations.push_back({t.taskId, t.trial, domain, outcome.subset});
        }
        out << "analyzed " << failures.size() << " failures\n";
    }
    fs::create_directories(o.out);
    writeRecords(o.out / "reports.jsonl", reports);
    writeRecords(o.out / "attributions.jsonl", attributions);
    writeRecords(o.out / "subsets.jsonl", recommendations);
    writeManifest(o.out, makeManifest("analyze", ws));
    return kExitOk;
}

int cmdMitigate(const fs::path& dir, double threshold, std::ostream& out)
{
    auto const recommendations = readRecords<Recommendation>(dir / "subsets.jsonl");
    std::map<std::string, std::vector<AgentSubset>> perDomain;
    for (const auto& r: recommendations)
        perDomain[r.domainId].push_back(r.subset);
    std::map<std::string, AgentSubset> aggregated;
    for (const auto& [domain, subsets]: perDomain)
    {
        aggregated[domain] = aggregateRecommendations(subsets, threshold);
        out << "subset[" << domain << "]: " << aggregated[domain].label() << "\n";
    }
    if (recommendations.empty())
        out << "no recommendations\n";
    writeFile(dir / "aggregated_subsets.json", subsetsByDomain(aggregated).dump(2) + "\n");
    return kExitOk;
}

int cmdReport(const std::vector<fs::path>& dirs, std::optional<fs::path> outDir, std::ostream& out)
{
    requireConsistentManifests(dirs);

    std::vector<std::string> order;
    std::map<std::string, std::vector<Trajectory>> byMethod;
    std::vector<FailureAttribution> attributions;
    std::vector<Recommendation> recommendations;
    for (const auto& dir: dirs)
    {
        std::vector<fs::path> files;
        for (const char* name: {"trajectories.jsonl", "stage1_trajectories.jsonl", "stage3_trajectories.jsonl",
                                "ablation_trajectories.jsonl"})
            if (fs::exists(dir / name))
                files.push_back(dir / name);
        for (const auto& file: files)
            for (auto& t: readTrajectories(file))
            {
                if (!byMethod.count(t.method))
                    order.push_back(t.method);
                byMethod[t.method].push_back(std::move(t));
            }
        if (fs::exists(dir / "attributions.jsonl"))
            for (auto& a: readRecords<FailureAttribution>(dir / "attributions.jsonl"))
                attributions.push_back(std::move(a));
        if (fs::exists(dir / "subsets.jsonl"))
            for (auto& r: readRecords<Recommendation>(dir / "subsets.jsonl"))
                recommendations.push_back(std::move(r));
    }
    if (order.empty())
        throw MissingArtifacts("no trajectory files found");

    std::vector<MetricsReport> reports;
    for (const auto& method: order)
        reports.push_back(buildReport(method, byMethod[method]));

    auto const target = outDir.value_or(dirs.front());
    fs::create_directories(target);
    writeFile(target / "pass_hat.csv", passHatCsv(reports));
    writeFile(target / "tokens.csv", tokensCsv(reports));
    writeFile(target / "error_histogram.csv", histogramCsv(attributions));
    writeFile(target / "recommendations.csv", recommendationsCsv(recommendations));
    writeMetrics(target, reports);
    if (!fs::exists(target / kManifestFile))
        writeManifest(target, readManifest(dirs.front()));
    out << reportText(reports);
    return kExitOk;
}

int cmdAblate(const RunOptions& o, const std::vector<int>& kValues, const std::vector<std::string>& agents,
              std::ostream& out)
{
    auto ws = prepare(o, true);
    auto const endpoints = buildEndpoints(ws.config);
    MethodRunner runner(ws.config.run, endpoints, ws.prompts, ws.config.extensions);

    AgentSubset base;
    for (const auto& name: agents)
    {
        auto kind = agentKindFromString(name);
        if (!kind)
            throw ConfigError("unknown helper agent '" + name + "'");
        base.members.insert(*kind);
    }
    auto rows = runner.runMemoryAblation(ws.domains, ws.tasks, kValues, base);

    fs::create_directories(o.out);
    std::vector<Trajectory> all;
    std::vector<MetricsReport> reports;
    std::string csv = "k,pass^1,overhead_pct\n";
    bool unreachable = false;
    for (const auto& row: rows)
    {
        for (auto& t: trajectoriesOf(row.episodes))
            all.push_back(std::move(t));
        reports.push_back(row.metrics);
        csv += std::to_string(row.k) + "," + percent(row.metrics.passHat.at(1)) + ","
               + fixed(row.metrics.tokens.overheadPct, 1) + "\n";
        unreachable = unreachable || anyUnreachable(row.episodes);
    }
    writeRecords(o.out / "ablation_trajectories.jsonl", all);
    writeFile(o.out / "ablation.csv", csv);
    writeMetrics(o.out, reports);
    writeManifest(o.out, makeManifest("ablate-memory", ws));
    out << csv;
    return unreachable ? kExitProvider : kExitOk;
}

int cmdValidate(const std::vector<fs::path>& domains, const std::vector<fs::path>& tasks,
                const std::vector<fs::path>& trajectories, const std::optional<fs::path>& config, std::ostream& out)
{
    std::size_t checked = 0;
    for (const auto& path: domains)
    {
        auto const doc = loadJsonFile(path);
        requireSchema(doc, "domain", path);
        (void)parseDomain(doc);
        ++checked;
    }
    for (const auto& path: tasks)
    {
        auto const doc = loadJsonFile(path);
        requireSchema(doc, "tasks", path);
        (void)parseTasks(doc);
        ++checked;
    }
    auto const trajectorySchema = trajectories.empty() ? Json() : loadSchema("trajectory");
    for (const auto& path: trajectories)
    {
        std::size_t line = 0;
        for (const auto& doc: readJsonl(path))
        {
            ++line;
            auto const problems = validateSchema(doc, trajectorySchema);
            if (!problems.empty())
                throw ConfigError(path.string() + ":" + std::to_string(line) + ": " + problems.front());
            auto const violations = validateTrajectory(doc.get<Trajectory>());
            if (!violations.empty())
                throw ConfigError(path.string() + ":" + std::to_string(line) + ": message "
                                  + std::to_string(violations.front().index) + ": "
                                  + violations.front().description);
        }
        ++checked;
    }
    if (config)
    {
        (void)loadConfig(*config);
        ++checked;
    }
    out << "ok: " << checked << " file(s) valid\n";
    return kExitOk;
}

void configureLogging(std::ostream& err, bool verbose)
{
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
    auto logger = std::make_shared<spdlog::logger>("fama", sink);
    logger->set_pattern("[%l] %v");
    logger->set_level(verbose ? spdlog::level::info : spdlog::level::warn);
    spdlog::set_default_logger(logger);
}

} // namespace

int runCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Failure-aware helper-agent orchestration and benchmark harness", "fama"};
    app.require_subcommand(1);
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "Log progress");

    RunOptions runOpts;
    auto* run = app.add_subcommand("run", "Run a method over a task set");
    addRunFlags(*run, runOpts, true);

    AnalyzeOptions analyzeOpts;
    auto* analyze = app.add_subcommand("analyze", "Diagnose failed trajectories and recommend helper agents");
    analyze->add_option("--config", analyzeOpts.config, "Configuration with a judge endpoint")->required();
    analyze->add_option("--trajectories", analyzeOpts.trajectories)->required();
    analyze->add_option("--out", analyzeOpts.out)->required();
    analyze->add_option("--tasks", analyzeOpts.tasks, "Tasks files used to map task ids to domains");
    analyze->add_option("--domain-id", analyzeOpts.domainId, "Domain for tasks not found in any tasks file");

    fs::path mitigateDir;
    double mitigateTheta = 0.5;
    auto* mitigate = app.add_subcommand("mitigate", "Aggregate per-task recommendations per domain");
    mitigate->add_option("--dir", mitigateDir, "Directory holding subsets.jsonl")->required();
    mitigate->add_option("--threshold", mitigateTheta)->check(CLI::Range(0.0, 1.0));

    std::vector<fs::path> reportDirs;
    std::optional<fs::path> reportOut;
    auto* report = app.add_subcommand("report", "Emit tables and plot data from artifacts");
    report->add_option("--dir", reportDirs, "Artifact directory (repeatable)")->required();
    report->add_option("--out", reportOut);

    RunOptions ablateOpts;
    std::vector<int> kValues = {0, 2, 4, 6};
    std::vector<std::string> ablateAgents;
    auto* ablate = app.add_subcommand("ablate-memory", "Sweep the Memory window size");
    addRunFlags(*ablate, ablateOpts, false);
    ablate->add_option("--k", kValues, "Window sizes")->delimiter(',');
    ablate->add_option("--agents", ablateAgents, "Additional helper agents")->delimiter(',');

    std::vector<fs::path> vDomains, vTasks, vTrajectories;
    std::optional<fs::path> vConfig;
    auto* validate = app.add_subcommand("validate", "Check files against the shipped schemas");
    validate->add_option("--domain", vDomains);
    validate->add_option("--tasks", vTasks);
    validate->add_option("--trajectories", vTrajectories);
    validate->add_option("--config", vConfig);

    std::vector<std::string> argv = {"fama"};
    argv.insert(argv.end(), args.begin(), args.end());
    std::vector<const char*> raw;
    for (const auto& a: argv)
        raw.push_back(a.c_str());
    try
    {
        app.parse(static_cast<int>(raw.size()), raw.data());
    }
    catch (const CLI::CallForHelp& e)
    {
        return app.exit(e, out, err);
    }
    catch (const CLI::ParseError& e)
    {
        (void)app.exit(e, out, err);
        return kExitConfig;
    }

    configureLogging(err, verbose);
    try
    {
        if (*run)
            return cmdRun(runOpts, out);
        if (*analyze)
            return cmdAnalyze(analyzeOpts, out);
        if (*mitigate)
            return cmdMitigate(mitigateDir, mitigateTheta, out);
        if (*report)
            return cmdReport(reportDirs, reportOut, out);
        if (*ablate)
            return cmdAblate(ablateOpts, kValues, ablateAgents, out);
        if (*validate)
            return cmdValidate(vDomains, vTasks, vTrajectories, vConfig, out);
    }
    catch (const ProviderUnreachable& e)
    {
        err << "provider unreachable: " << e.what() << "\n";
        return kExitProvider;
    }
    catch (const ConfigError& e)
    {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
    catch (const UnknownDomain& e)
    {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
    catch (const MissingArtifacts& e)
    {
        err << "missing artifacts: " << e.what() << "\n";
        return kExitConfig;
    }
    catch (const Error& e)
    {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitFailure;
}

} // namespace fama
