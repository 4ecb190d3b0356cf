// SPDX-License-Identifier: Apache-2.0
#include "fama/runner.hpp"

#include "fama/errors.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <sstream>

namespace fama
{

void EndpointRegistry::add(std::string name, std::shared_ptr<Gateway> gateway)
{
    _gateways.insert_or_assign(std::move(name), std::move(gateway));
}

const Gateway* EndpointRegistry::find(const std::string& name) const
{
    auto it = _gateways.find(name);
    return it == _gateways.end() ? nullptr : it->second.get();
}

const Gateway& EndpointRegistry::get(const std::string& name) const
{
    if (const auto* g = find(name))
        return *g;
    throw ConfigError("endpoint '" + name + "' is not configured");
}

namespace
{

std::string trim(const std::string& text)
{
    auto begin = text.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos)
        return {};
    auto end = text.find_last_not_of(" \t\r\n");
    return text.substr(begin, end - begin + 1);
}

bool startsWithCaseless(const std::string& text, std::string_view prefix)
{
    if (text.size() < prefix.size())
        return false;
    for (std::size_t i = 0; i < prefix.size(); ++i)
        if (std::tolower(static_cast<unsigned char>(text[i])) != std::tolower(static_cast<unsigned char>(prefix[i])))
            return false;
    return true;
}

} // namespace

std::optional<ReActStep> parseReAct(const std::string& text)
{
    ReActStep step;
    std::istringstream in(text);
    std::vector<std::string> replyLines;
    std::string actionText;
    bool inAction = false;
    for (std::string line; std::getline(in, line);)
    {
        auto const t = trim(line);
        if (inAction)
        {
            actionText += "\n" + line;
            continue;
        }
        if (startsWithCaseless(t, "thought:"))
        {
            step.thought += (step.thought.empty() ? "" : "\n") + trim(t.substr(8));
        }
        else if (startsWithCaseless(t, "action:"))
        {
            inAction = true;
            actionText = t.substr(7);
        }
        else if (!t.empty())
        {
            replyLines.push_back(t);
        }
    }

    if (!inAction)
    {
        std::string reply;
        for (const auto& l: replyLines)
            reply += (reply.empty() ? "" : "\n") + l;
        for (std::string_view prefix: {"final answer:", "response:"})
            if (startsWithCaseless(reply, prefix))
                reply = trim(reply.substr(prefix.size()));
        step.reply = reply;
        return step;
    }

    auto action = extractJsonObject(actionText);
    if (!action || !(*action).contains("name") || !(*action)["name"].is_string())
        return std::nullopt;
    auto const name = (*action)["name"].get<std::string>();
    auto arguments = action->value("arguments", Json::object());
    if (!arguments.is_object())
        return std::nullopt;
    if (name == "respond")
    {
        step.reply = arguments.value("content", "");
        return step;
    }
    step.call = ToolCall{"", name, arguments};
    return step;
}

std::vector<Trajectory> trajectoriesOf(const std::vector<EpisodeResult>& episodes)
{
    std::vector<Trajectory> out;
    out.reserve(episodes.size());
    for (const auto& e: episodes)
        out.push_back(e.trajectory);
    return out;
}

MetricsReport summarize(const std::string& label, const std::vector<EpisodeResult>& episodes, int maxK)
{
    auto report = buildReport(label, trajectoriesOf(episodes), maxK);
    if (episodes.empty())
        return report;

    std::vector<AttributeResult> attributes;
    std::vector<ProcessResult> process;
    for (const auto& e: episodes)
    {
        attributes.push_back({e.finalDb, e.expectedDb});
        if (e.idealSteps > 0)
            process.push_back({e.matchedSteps, e.idealSteps});
    }
    report.endToEndAccuracy = endToEndAccuracy(attributes);
    if (!process.empty())
        report.processAccuracy = processAccuracy(process);
    return report;
}

MethodRunner::MethodRunner(RunConfig config, const EndpointRegistry& endpoints, const PromptLibrary& prompts,
                           std::vector<ExtensionAgent> extensions)
    : _config(std::move(config)), _endpoints(endpoints), _prompts(prompts), _extensions(std::move(extensions))
{
    if (_config.nTrials < 1)
        throw ConfigError("n_trials must be at least 1");
    if (_config.maxTurns < 1)
        throw ConfigError("max_turns must be at least 1");
}

namespace
{

struct Decision
{
    Message message;
    std::int64_t completionTokens = 0;
    double latency = 0.0;
};

/// Everything one episode needs to ask the tool agent for its next action.
class ToolAgent
{
public:
    ToolAgent(const Gateway& gateway, const PromptLibrary& prompts, const Domain& domain, Method protocol,
              const RunConfig& config, std::uint64_t seed)
        : _gateway(gateway), _prompts(prompts), _domain(domain), _protocol(protocol), _config(config), _seed(seed)
    {
        if (_protocol == Method::ReAct)
        {
            std::string tools;
            for (const auto& t: _domain.tools)
                tools += "- " + t.name + ": " + t.description + " Parameters: " + canonicalDump(t.parameters) + "\n";
            _system = _prompts.render("react_system", {{"policy", _domain.policyText}, {"tools", tools}});
        }
        else
        {
            _system = _prompts.render("tool_agent_system", {{"policy", _domain.policyText}});
        }
    }

    ChatRequest request(const std::vector<Message>& transcript, const std::string& context,
                        const std::vector<Message>& extra) const
    {
        ChatRequest req;
        req.sampling = _config.sampling;
        req.seed = _seed;
        req.messages.push_back(Message::system(_system));
        if (!context.empty())
            req.messages.push_back(Message::system(context));
        for (const auto& m: transcript)
        {
            if (_protocol == Method::ReAct)
            {
                // Text protocol: no native tool messages on the wire.
                if (m.role == Role::Tool)
                    req.messages.push_back(Message::user("Observation: " + m.content));
                else if (m.role == Role::Assistant)
                    req.messages.push_back(Message::assistant(m.content));
                else
                    req.messages.push_back(m);
            }
            else
            {
                req.messages.push_back(m);
            }
        }
        req.messages.insert(req.messages.end(), extra.begin(), extra.end());
        if (_protocol != Method::ReAct)
            req.tools = _domain.toolSpecs();
        return req;
    }

    Decision decide(const std::vector<Message>& transcript, const std::string& context, std::vector<Message> extra) const
    {
        if (_protocol == Method::ReAct)
            return decideReAct(transcript, context, std::move(extra));
        auto decision = decideNative(transcript, context, extra);
        if (_protocol == Method::SelfReflection)
            return reflect(transcript, context, std::move(extra), std::move(decision));
        return decision;
    }

private:
    Decision decideNative(const std::vector<Message>& transcript, const std::string& context,
                          const std::vector<Message>& extra) const
    {
        auto response = _gateway.chat(request(transcript, context, extra));
        return {response.message, response.completionTokens, response.latencySeconds};
    }

    Decision decideReAct(const std::vector<Message>& transcript, const std::string& context,
                         std::vector<Message> extra) const
    {
        Decision total;
        for (int ask = 0; ask < 2; ++ask)
        {
            auto response = _gateway.chat(request(transcript, context, extra));
            total.completionTokens += response.completionTokens;
            total.latency += response.latencySeconds;
            auto const& raw = response.message.content;
            auto parsed = parseReAct(raw);
            if (!parsed)
            {
                if (ask == 1)
                    throw MalformedToolCall("ReAct action failed to parse after re-ask");
                extra.push_back(Message::assistant(raw));
                extra.push_back(Message::system(std::string(kReActFormatNudge)));
                continue;
            }
            if (parsed->call)
                total.message = Message::assistant(raw, {*parsed->call});
            else
                total.message = Message::assistant(parsed->reply);
            // Thoughts are part of what the tool agent generated.
            total.message.tokenCount = response.completionTokens;
            return total;
        }
        throw MalformedToolCall("unreachable");
    }

    static std::string describeAction(const Message& m)
    {
        if (m.toolCalls.empty())
            return "reply to user: " + m.content;
        std::string out;
        for (const auto& c: m.toolCalls)
            out += (out.empty() ? "" : "\n") + std::string("tool call: ") + c.name + "(" + canonicalDump(c.arguments) + ")";
        return out;
    }

    Decision reflect(const std::vector<Message>& transcript, const std::string& context, std::vector<Message> extra,
                     Decision first) const
    {
        ChatRequest critique;
        critique.sampling = _config.sampling;
        critique.seed = _seed;
        critique.messages.push_back(Message::user(_prompts.render(
            "self_reflection_critique", {{"policy", _domain.policyText},
                                         {"transcript", renderTranscript(transcript)},
                                         {"action", describeAction(first.message)}})));
        auto review = _gateway.chat(critique);
        first.completionTokens += review.completionTokens;
        first.latency += review.latencySeconds;

        auto const verdict = trim(review.message.content);
        if (startsWithCaseless(verdict, "ok"))
            return first;

        extra.push_back(Message::system(_prompts.render("self_reflection_revise", {{"critique", verdict}})));
        auto revised = decideNative(transcript, context, extra);
        revised.completionTokens += first.completionTokens;
        revised.latency += first.latency;
        return revised;
    }

    const Gateway& _gateway;
    const PromptLibrary& _prompts;
    const Domain& _domain;
    Method _protocol;
    const RunConfig& _config;
    std::uint64_t _seed;
    std::string _system;
};

} // namespace

EpisodeResult MethodRunner::runEpisode(const Domain& domain, const Task& task, const AgentSubset& subset, int trial,
                                       Method protocol, const std::string& label) const
{
    EpisodeResult result;
    result.domainId = domain.id;
    auto& trajectory = result.trajectory;
    trajectory.taskId = task.id;
    trajectory.method = label;
    trajectory.trial = trial;

    auto state = reset(domain, task);
    auto const seed = _config.seed + static_cast<std::uint64_t>(trial);
    std::vector<Message> transcript;

    const auto& toolGateway = _endpoints.get(_config.toolAgentEndpoint);
    const Gateway* userGateway = _endpoints.find(_config.userAgentEndpoint);
    const Gateway* judgeGateway = _endpoints.find(_config.judgeEndpoint);
    bool const needsJudge = std::any_of(subset.members.begin(), subset.members.end(),
                                        [](AgentKind k) { return k != AgentKind::Memory; })
                            || !_extensions.empty();
    if (needsJudge && !judgeGateway)
        throw ConfigError("helper agents need the judge endpoint '" + _config.judgeEndpoint + "'");

    HelperOptions helperOptions;
    helperOptions.torThresholdTokens = _config.torThresholdTokens;
    helperOptions.sampling = _config.sampling;
    std::optional<HelperAgents> helpers;
    if (judgeGateway)
        helpers.emplace(*judgeGateway, _prompts, helperOptions);
    // Memory-only subsets never call the judge; bind to the tool gateway as an inert placeholder.
    if (!helpers)
        helpers.emplace(toolGateway, _prompts, helperOptions);
    ContextComposer composer(*helpers, subset, domain.policyText, domain.toolSpecs(),
                             subset.empty() ? std::vector<ExtensionAgent>{} : _extensions);

    UserSimulator user(task, userGateway, &_prompts);
    ToolAgent agent(toolGateway, _prompts, domain, protocol, _config, seed);

    int decisions = 0;
    int callCounter = 0;
    bool finished = false;
    auto termination = Termination::Completed;

    try
    {
        while (!finished)
        {
            auto userMessage = user.next(transcript, seed);
            trajectory.wallTimeSeconds += user.lastLatency();
            if (!userMessage)
                break;
            transcript.push_back(std::move(*userMessage));

            bool handBack = false;
            while (!handBack && !finished)
            {
                if (decisions >= _config.maxTurns)
                {
                    termination = Termination::MaxTurns;
                    finished = true;
                    break;
                }
                ++decisions;

                auto composed = composer.compose(transcript);
                trajectory.overheadTokens += composed.overheadTokens;
                trajectory.wallTimeSeconds += composed.latencySeconds;
                auto const context = renderFragments(composed.fragments);

                auto decision = agent.decide(transcript, context, {});
                trajectory.assistantTokens += decision.completionTokens;
                trajectory.assistantTimeSeconds += decision.latency;
                trajectory.wallTimeSeconds += decision.latency;

                if (subset.contains(AgentKind::Verifier))
                {
                    auto verdict = helpers->verify(decision.message, composer.currentPlan(), transcript);
                    trajectory.overheadTokens += verdict.completionTokens;
                    trajectory.wallTimeSeconds += verdict.latencySeconds;
                    if (verdict.status == VerifierVerdict::Status::Recheck)
                    {
                        std::vector<Message> feedback = {Message::system(_prompts.render(
                            "verifier_feedback",
                            {{"rationale", verdict.rationale}, {"fix", verdict.suggestedFix.value_or("")}}))};
                        auto retry = agent.decide(transcript, context, feedback);
                        trajectory.assistantTokens += retry.completionTokens;
                        trajectory.assistantTimeSeconds += retry.latency;
                        trajectory.wallTimeSeconds += retry.latency;
                        // One re-decision per turn: a second RECHECK is recorded but not acted on.
                        auto second = helpers->verify(retry.message, composer.currentPlan(), transcript);
                        trajectory.overheadTokens += second.completionTokens;
                        trajectory.wallTimeSeconds += second.latencySeconds;
                        decision = std::move(retry);
                    }
                }

                auto message = std::move(decision.message);
                for (auto& call: message.toolCalls)
                    call.id = "call_" + std::to_string(++callCounter);
                transcript.push_back(message);

                if (message.toolCalls.empty())
                {
                    handBack = true;
                    continue;
                }
                for (const auto& call: message.toolCalls)
                {
                    transcript.push_back(step(domain, state, call));
                    if (domain.isTerminal(call.name))
                        finished = true;
                }
            }
        }
    }
    catch (const ContextOverflow& e)
    {
        spdlog::info("task {} trial {}: {}", task.id, trial, e.what());
        termination = Termination::ContextOverflow;
    }
    catch (const ProviderUnreachable& e)
    {
        spdlog::error("task {} trial {}: {}", task.id, trial, e.what());
        termination = Termination::ProviderError;
        result.providerUnreachable = true;
    }
    catch (const ProviderError& e)
    {
        spdlog::error("task {} trial {}: {}", task.id, trial, e.what());
        termination = Termination::ProviderError;
    }
    catch (const MalformedToolCall& e)
    {
        spdlog::warn("task {} trial {}: {}", task.id, trial, e.what());
        termination = Termination::ProviderError;
    }

    trajectory.messages = std::move(transcript);
    trajectory.termination = termination;
    trajectory.reward = termination == Termination::Completed ? computeReward(domain, state, trajectory, task) : 0;

    result.finalDb = state.db;
    result.expectedDb = replayIdealState(domain, task);
    result.matchedSteps = alignProcess(trajectory, task);
    result.idealSteps = task.idealStepCount;
    return result;
}

std::vector<EpisodeResult> MethodRunner::runAll(const DomainSet& domains, const std::vector<Task>& tasks,
                                                const std::function<AgentSubset(const Task&)>& subsetFor,
                                                Method protocol, const std::string& label) const
{
    for (const auto& task: tasks)
        if (!domains.count(task.domainId))
            throw UnknownDomain("task '" + task.id + "' references unknown domain '" + task.domainId + "'");

    auto const trials = static_cast<std::size_t>(_config.nTrials);
    std::function<EpisodeResult(std::size_t)> job = [&](std::size_t index) {
        const auto& task = tasks[index / trials];
        auto const trial = static_cast<int>(index % trials);
        return runEpisode(domains.at(task.domainId), task, subsetFor(task), trial, protocol, label);
    };
    return parallelMap<EpisodeResult>(tasks.size() * trials, _config.workers, job);
}

std::vector<EpisodeResult> MethodRunner::runMethod(Method method, const DomainSet& domains,
                                                   const std::vector<Task>& tasks) const
{
    switch (method)
    {
        case Method::IRMA: {
            auto const full = AgentSubset::full(_config.memoryK);
            return runAll(domains, tasks, [&](const Task&) { return full; }, Method::FC, "IRMA");
        }
        case Method::FAMA:
            throw ConfigError("FAMA runs through runFama");
        default:
            return runAll(domains, tasks, [](const Task&) { return AgentSubset{}; }, method,
                          std::string(toString(method)));
    }
}

Stage1Result MethodRunner::runStage1(const DomainSet& domains, const std::vector<Task>& tasks) const
{
    auto const base = _config.famaBase;
    if (base == Method::FAMA || base == Method::IRMA)
        throw ConfigError("the FAMA base method must be a baseline protocol");

    Stage1Result stage;
    stage.episodes = runAll(domains, tasks, [](const Task&) { return AgentSubset{}; }, base,
                            std::string(toString(base)));
    for (std::size_t i = 0; i < stage.episodes.size(); ++i)
        if (stage.episodes[i].trajectory.reward == 0)
            stage.failures.push_back(i);
    return stage;
}

FamaResult MethodRunner::runFama(const DomainSet& domains, const std::vector<Task>& tasks,
                                 const CauseCatalog& catalog) const
{
    FamaResult result;
    result.stage1 = runStage1(domains, tasks);
    result.stage1Metrics = summarize(std::string(toString(_config.famaBase)), result.stage1.episodes);

    if (!result.stage1.failures.empty())
    {
        AnalyzerOptions options;
        options.defaultMemoryK = _config.memoryK > 0 ? _config.memoryK : 2;
        options.sampling = _config.sampling;
        FailureAnalyzer analyzer(_endpoints.get(_config.judgeEndpoint), _prompts, catalog, options);

        using MaybeOutcome = std::optional<FailureAnalyzer::Outcome>;
        std::function<MaybeOutcome(std::size_t)> analyze = [&](std::size_t i) -> MaybeOutcome {
            const auto& episode = result.stage1.episodes[result.stage1.failures[i]];
            try
            {
                return analyzer.analyzeFailure(episode.trajectory, episode.domainId);
            }
            catch (const Error& e)
            {
                spdlog::error("analysis of task {} trial {} failed, excluded: {}", episode.trajectory.taskId,
                              episode.trajectory.trial, e.what());
                return std::nullopt;
            }
        };
        auto outcomes = parallelMap<MaybeOutcome>(result.stage1.failures.size(), _config.workers, analyze);

        for (std::size_t i = 0; i < outcomes.size(); ++i)
        {
            if (!outcomes[i])
                continue;
            const auto& episode = result.stage1.episodes[result.stage1.failures[i]];
            auto& outcome = *outcomes[i];
            result.reports.insert(result.reports.end(), outcome.reports.begin(), outcome.reports.end());
            result.attributions.push_back(outcome.attribution);
            result.recommendations.push_back(
                {episode.trajectory.taskId, episode.trajectory.trial, episode.domainId, outcome.subset});
        }
    }

    for (const auto& [domainId, _]: domains)
    {
        std::vector<AgentSubset> perTask;
        for (const auto& rec: result.recommendations)
            if (rec.domainId == domainId)
                perTask.push_back(rec.subset);
        result.domainSubsets[domainId] = perTask.empty()
                                             ? AgentSubset{}
                                             : aggregateRecommendations(perTask, _config.aggregationThreshold);
    }

    auto subsets = result.domainSubsets;
    if (_config.sweepMemoryK)
    {
        for (auto& [domainId, subset]: subsets)
        {
            if (!subset.contains(AgentKind::Memory))
                continue;
            std::vector<Task> domainTasks;
            std::copy_if(tasks.begin(), tasks.end(), std::back_inserter(domainTasks),
                         [&, id = domainId](const Task& t) { return t.domainId == id; });
            if (domainTasks.empty())
                continue;
            double best = -1.0;
            int bestK = subset.memoryK;
            for (int k: _config.memoryKSweep)
            {
                auto candidate = subset;
                candidate.memoryK = k;
                auto episodes = runAll(domains, domainTasks, [&](const Task&) { return candidate; }, _config.famaBase, "FAMA");
                auto const pass1 = passHatK(outcomesFromTrajectories(trajectoriesOf(episodes)), 1);
                result.memorySweep.push_back({domainId, k, pass1});
                if (pass1 > best)
                {
                    best = pass1;
                    bestK = k;
                }
            }
            subset.memoryK = bestK;
            result.domainSubsets[domainId].memoryK = bestK;
        }
    }

    result.stage3 = runAll(domains, tasks, [&](const Task& t) { return subsets.at(t.domainId); }, _config.famaBase, "FAMA");
    result.stage3Metrics = summarize("FAMA", result.stage3);
    result.stage3Metrics.errorHistogram.clear();
    for (const auto& [category, pct]: errorDistribution(result.attributions))
        result.stage1Metrics.errorHistogram[std::string(toString(category))] = pct;
    return result;
}

std::vector<AblationRow> MethodRunner::runMemoryAblation(const DomainSet& domains, const std::vector<Task>& tasks,
                                                         const std::vector<int>& kValues, AgentSubset subset) const
{
    if (kValues.empty())
        throw ConfigError("memory ablation needs at least one k");
    subset.members.insert(AgentKind::Memory);
    std::vector<AblationRow> rows;
    for (int k: kValues)
    {
        if (k < 0)
            throw ConfigError("memory window k must be non-negative");
        auto candidate = subset;
        candidate.memoryK = k;
        AblationRow row;
        row.k = k;
        row.episodes = runAll(domains, tasks, [&](const Task&) { return candidate; }, _config.famaBase,
                              "Memory(k=" + std::to_string(k) + ")");
        row.metrics = summarize("k=" + std::to_string(k), row.episodes);
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace fama
