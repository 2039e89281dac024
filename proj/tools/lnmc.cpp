// Copyright 2026 the lnmc contributors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0

// Command-line front end: loads a scenario, dispatches to the requested
// engine, prints a report, writes trace/state files, and maps the verdict
// to the documented exit codes (0 ok, 1 violation, 2 budget, 3 internal).

#include "lnmc/lnmc.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>

namespace
{

lnmc::ProtocolRules
activeRules()
{
#if defined(LNMC_ENABLE_FLAW_INJECTION) && defined(LNMC_FLAW_CLTV)
    return lnmc::ProtocolRules::withoutCltvCheck();
#elif defined(LNMC_ENABLE_FLAW_INJECTION) && defined(LNMC_FLAW_FOLDED)
    return lnmc::ProtocolRules::withFoldedHtlcOutputs();
#else
    return lnmc::ProtocolRules{};
#endif
}

int
workersFromEnv()
{
    char const* env = std::getenv("LNMC_WORKERS");
    if (env != nullptr)
    {
        int v = std::atoi(env);
        if (v >= 1)
        {
            return v;
        }
    }
    return 1;
}

bool
writeFile(std::string const& path, std::string const& content)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
    {
        return false;
    }
    out << content;
    return out.good();
}

std::vector<std::string>
userNamesOf(lnmc::Scenario const& scenario)
{
    std::vector<std::string> names;
    for (auto const& u : scenario.users)
    {
        names.push_back(u.name);
    }
    return names;
}

void
printReport(std::string const& command, std::string const& scenarioPath,
            lnmc::CheckResult const& res)
{
    std::cout << "command: " << command << "\n";
    std::cout << "scenario: " << scenarioPath << "\n";
    std::cout << "states_explored: " << res.statesExplored << "\n";
    std::cout << "distinct_states: " << res.distinctStates << "\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f", res.durationSeconds);
    std::cout << "duration_seconds: " << buf << "\n";
    for (auto const& [k, v] : res.counters)
    {
        std::cout << "counter." << k << ": " << v << "\n";
    }
    if (!res.message.empty())
    {
        std::cout << "message: " << res.message << "\n";
    }
    if (!res.trace.empty())
    {
        std::cout << "trace_steps: " << res.trace.size() << "\n";
    }
    std::cout << "verdict: " << lnmc::verdictName(res.verdict) << std::endl;
}

} // namespace

int
main(int argc, char** argv)
{
    CLI::App app{"lnmc: payment-channel protocol model checker"};
    app.require_subcommand(1);

    std::string scenarioPath;
    std::string timeMode = "skip";
    int workers = workersFromEnv();
    int64_t maxStates = 10000000;
    uint64_t seed = 1;
    int64_t runs = 100;
    int64_t depth = 400;
    std::string traceOut;
    std::string dumpStatesPath;
    bool stripGracePoints = false;

    auto addCommon = [&](CLI::App* cmd, bool withExplore, bool withSim)
    {
        cmd->add_option("scenario", scenarioPath, "scenario file (TOML/JSON)")
            ->required();
        cmd->add_option("--time-mode", timeMode,
                        "time abstraction: naive or skip")
            ->check(CLI::IsMember({"naive", "skip"}));
        cmd->add_option("--trace-out", traceOut,
                        "write the counterexample trace (JSON lines) here");
        if (withExplore)
        {
            cmd->add_option("--workers", workers,
                            "worker threads (env LNMC_WORKERS as fallback)")
                ->check(CLI::PositiveNumber);
            cmd->add_option("--max-states", maxStates,
                            "distinct-state budget")
                ->check(CLI::PositiveNumber);
            cmd->add_option("--dump-states", dumpStatesPath,
                            "write every reachable external view (JSON "
                            "lines) here");
        }
        if (withSim)
        {
            cmd->add_option("--seed", seed, "base random seed");
            cmd->add_option("--runs", runs, "number of random walks")
                ->check(CLI::PositiveNumber);
            cmd->add_option("--depth", depth, "maximum steps per walk")
                ->check(CLI::PositiveNumber);
        }
    };

    auto* cmdCheck = app.add_subcommand(
        "check", "exhaustive exploration with invariant checking");
    addCommon(cmdCheck, true, false);
    auto* cmdRefine = app.add_subcommand(
        "refine",
        "exhaustive exploration plus ideal-payment-network containment");
    addCommon(cmdRefine, true, false);
    auto* cmdSimulate =
        app.add_subcommand("simulate", "seeded random walks");
    addCommon(cmdSimulate, false, true);
    auto* cmdDifftime = app.add_subcommand(
        "difftime", "compare naive and skip time modes on a micro-model");
    addCommon(cmdDifftime, true, false);
    cmdDifftime->add_flag(
        "--strip-grace-points", stripGracePoints,
        "mutation: drop reaction-deadline points from the relevant set");

    CLI11_PARSE(app, argc, argv);

    lnmc::Scenario scenario;
    try
    {
        scenario = lnmc::loadScenario(scenarioPath);
    }
    catch (std::exception const& e)
    {
        std::cerr << "error: " << e.what() << std::endl;
        return 3;
    }

    lnmc::TimeOptions topt;
    topt.mode = timeMode == "naive" ? lnmc::TimeOptions::Mode::NAIVE
                                    : lnmc::TimeOptions::Mode::SKIP;

    std::string command;
    lnmc::CheckResult res;
    if (cmdCheck->parsed() || cmdRefine->parsed())
    {
        command = cmdCheck->parsed() ? "check" : "refine";
        lnmc::Spec spec = lnmc::makeSpec(scenario, activeRules(), topt);
        lnmc::CheckOptions opt;
        opt.workers = workers;
        opt.maxStates = maxStates;
        opt.refinement = cmdRefine->parsed();
        opt.dumpStates = !dumpStatesPath.empty();
        res = lnmc::runCheck(spec, opt);
        if (!dumpStatesPath.empty() &&
            !writeFile(dumpStatesPath,
                       lnmc::dumpedStatesToJsonLines(userNamesOf(scenario),
                                                     res.dumpedStates)))
        {
            std::cerr << "error: cannot write " << dumpStatesPath
                      << std::endl;
            return 3;
        }
    }
    else if (cmdSimulate->parsed())
    {
        command = "simulate";
        lnmc::Spec spec = lnmc::makeSpec(scenario, activeRules(), topt);
        lnmc::SimulateOptions opt;
        opt.seed = seed;
        opt.runs = runs;
        opt.depth = depth;
        res = lnmc::runSimulate(spec, opt);
    }
    else
    {
        command = "difftime";
        lnmc::Spec spec = lnmc::makeSpec(scenario, activeRules(), topt);
        lnmc::DifftimeOptions opt;
        opt.stripGracePoints = stripGracePoints;
        opt.maxStates = maxStates;
        res = lnmc::runDifftime(spec.ctx, opt);
    }

    if (!traceOut.empty())
    {
        if (!writeFile(traceOut, lnmc::traceToJsonLines(
                                     userNamesOf(scenario), res.trace)))
        {
            std::cerr << "error: cannot write " << traceOut << std::endl;
            return 3;
        }
    }
    printReport(command, scenarioPath, res);
    return lnmc::exitCodeFor(res.verdict);
}
