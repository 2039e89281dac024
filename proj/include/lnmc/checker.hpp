// Copyright 2026 the lnmc contributors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0
#pragma once

#include "lnmc/spec.hpp"

#include <atomic>
#include <chrono>
#include <map>
#include <mutex>
#include <random>
#include <thread>
#include <unordered_map>
#include <unordered_set>

// Exploration engines: exhaustive level-synchronous breadth-first search
// with invariant and refinement checking, random simulation, and the
// differential oracle comparing the two time modes. All engines return a
// CheckResult whose counterexample trace, if any, replays deterministically.
namespace lnmc
{

enum class Verdict
{
    OK,
    OK_BUDGET, // exploration hit the state budget before finishing
    INVARIANT_VIOLATION,
    REFINEMENT_VIOLATION,
    DEADLOCK_VIOLATION,
    LIVENESS_VIOLATION,
    INTERNAL_ERROR,
};

inline char const*
verdictName(Verdict v)
{
    switch (v)
    {
    case Verdict::OK:
        return "ok";
    case Verdict::OK_BUDGET:
        return "ok_budget";
    case Verdict::INVARIANT_VIOLATION:
        return "invariant_violation";
    case Verdict::REFINEMENT_VIOLATION:
        return "refinement_violation";
    case Verdict::DEADLOCK_VIOLATION:
        return "deadlock_violation";
    case Verdict::LIVENESS_VIOLATION:
        return "liveness_violation";
    case Verdict::INTERNAL_ERROR:
        return "internal_error";
    }
    return "?";
}

inline int
exitCodeFor(Verdict v)
{
    switch (v)
    {
    case Verdict::OK:
        return 0;
    case Verdict::OK_BUDGET:
        return 2;
    case Verdict::INTERNAL_ERROR:
        return 3;
    default:
        return 1;
    }
}

struct TraceStep
{
    std::string action; // "init" for the first entry
    ExternalView external;
    Fingerprint fp;
};

struct CheckResult
{
    Verdict verdict = Verdict::OK;
    std::string message;
    int64_t statesExplored = 0; // initial states + successor generations
    int64_t distinctStates = 0;
    double durationSeconds = 0.0;
    std::vector<TraceStep> trace; // nonempty iff verdict is a violation
    std::map<std::string, int64_t> counters;

    // Filled only on request (--dump-states / recorded simulation walks).
    std::vector<std::pair<Fingerprint, ExternalView>> dumpedStates;
    std::vector<std::vector<std::string>> walks;
};

struct CheckOptions
{
    int workers = 1;
    int64_t maxStates = 10000000;
    bool refinement = false; // additionally check ideal-network containment
    bool dumpStates = false;
    bool checkLiveness = true;
    // Full canonical serializations are kept for this many states to turn
    // fingerprint collisions into hard errors on small models. With 128-bit
    // fingerprints an actual collision is vanishingly unlikely, so the store
    // is a cheap tripwire, not a correctness requirement; the cap keeps its
    // memory footprint bounded on models with millions of states.
    int64_t collisionStoreCap = 100000;
    // Backward-reachability edge budget; beyond it the liveness pass is
    // skipped (reported in counters, verdict unaffected).
    int64_t livenessEdgeCap = 20000000;
};

namespace detail
{

struct NodeInfo
{
    Fingerprint parent;
    int32_t level = 0;
    bool initial = false;
    bool quiescent = false;
};

int constexpr VISITED_SHARDS = 64; // power of two

struct VisitedShard
{
    std::mutex mtx;
    std::unordered_map<Fingerprint, NodeInfo, FingerprintHasher> nodes;
    std::unordered_map<Fingerprint, std::string, FingerprintHasher> bytes;
};

inline size_t
shardOf(Fingerprint const& fp)
{
    return static_cast<size_t>(fp.lo) & (VISITED_SHARDS - 1);
}

// A candidate counterexample collected during a level. After the level
// completes, the least candidate under a deterministic order is reported,
// which keeps the result independent of worker count and scheduling.
struct Candidate
{
    int32_t level = 0;
    std::string fpHex;
    std::string label;
    std::string parentHex;
    Verdict kind = Verdict::INVARIANT_VIOLATION;
    std::string message;
    Fingerprint fp;
    Fingerprint parentFp;
    bool viaEdge = false; // trace must end with `label` from parentFp

    bool
    operator<(Candidate const& o) const
    {
        return std::tie(level, fpHex, label, parentHex) <
               std::tie(o.level, o.fpHex, o.label, o.parentHex);
    }
};

struct WorkerLocal
{
    // Frontier entries hold the canonical encoding, not the decoded state:
    // a BFS level of a large model holds hundreds of thousands of states at
    // once, and the encoding is several times smaller than the in-memory
    // form. States are rehydrated one at a time during expansion.
    std::vector<std::pair<std::string, Fingerprint>> nextFrontier;
    std::vector<std::pair<Fingerprint, Fingerprint>> edges; // child, parent
    std::vector<Candidate> candidates;
    std::vector<std::pair<Fingerprint, ExternalView>> dumped;
    TerminalStats stats;
    int64_t generated = 0;
    int64_t deadEnds = 0;
    int64_t quiescentSeen = 0;
    std::string error; // set if the worker threw
};

// Walks parent pointers from `fp` back to an initial state and returns the
// fingerprint chain in execution order.
inline std::vector<Fingerprint>
parentChain(std::vector<VisitedShard> const& shards, Fingerprint fp)
{
    std::vector<Fingerprint> chain;
    for (;;)
    {
        chain.push_back(fp);
        auto const& shard = shards[shardOf(fp)];
        auto it = shard.nodes.find(fp);
        if (it == shard.nodes.end() || it->second.initial)
        {
            break;
        }
        fp = it->second.parent;
    }
    std::reverse(chain.begin(), chain.end());
    return chain;
}

// Re-executes a fingerprint chain from the matching initial state, picking
// at each step the least action label that reaches the next fingerprint.
// The final step's label can be forced (for violations tied to a specific
// edge rather than a state).
template <class SpecT>
std::optional<std::vector<TraceStep>>
executeChain(SpecT const& spec, std::vector<Fingerprint> const& chain,
             std::optional<std::string> const& forcedLast)
{
    std::optional<SystemState> cur;
    for (auto const& init : spec.initials())
    {
        if (init.fingerprint() == chain.front())
        {
            cur = init;
        }
    }
    if (!cur)
    {
        return std::nullopt;
    }
    std::vector<TraceStep> trace;
    trace.push_back({"init", spec.project(*cur), chain.front()});
    for (size_t i = 1; i < chain.size(); ++i)
    {
        auto succs = spec.next(*cur);
        SystemState const* nextState = nullptr;
        std::string bestLabel;
        for (auto const& [label, st] : succs)
        {
            if (st.fingerprint() != chain[i])
            {
                continue;
            }
            if (i + 1 == chain.size() && forcedLast && label != *forcedLast)
            {
                continue;
            }
            if (nextState == nullptr || label < bestLabel)
            {
                nextState = &st;
                bestLabel = label;
            }
        }
        if (nextState == nullptr)
        {
            return std::nullopt;
        }
        SystemState stepped = *nextState;
        trace.push_back({bestLabel, spec.project(stepped), chain[i]});
        cur = std::move(stepped);
    }
    return trace;
}

} // namespace detail

// Replays a previously produced trace against the spec: every recorded
// action must be enabled in sequence and reproduce the recorded fingerprint.
// Returns a diagnosis on the first mismatch.
template <class SpecT>
std::optional<std::string>
verifyTraceReplay(SpecT const& spec, std::vector<TraceStep> const& trace)
{
    if (trace.empty())
    {
        return std::string("empty trace");
    }
    std::optional<SystemState> cur;
    for (auto const& init : spec.initials())
    {
        if (init.fingerprint() == trace.front().fp)
        {
            cur = init;
        }
    }
    if (!cur)
    {
        return std::string("trace does not start in an initial state");
    }
    for (size_t i = 1; i < trace.size(); ++i)
    {
        auto succs = spec.next(*cur);
        std::optional<SystemState> next;
        for (auto& [label, st] : succs)
        {
            if (label == trace[i].action && st.fingerprint() == trace[i].fp)
            {
                next = std::move(st);
                break;
            }
        }
        if (!next)
        {
            return "step " + std::to_string(i) + " (" + trace[i].action +
                   ") does not replay";
        }
        cur = std::move(*next);
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Exhaustive exploration.

template <class SpecT>
CheckResult
runCheck(SpecT const& spec, CheckOptions const& opt)
{
    using namespace detail;
    auto t0 = std::chrono::steady_clock::now();
    CheckResult res;
    auto finish = [&]()
    {
        res.durationSeconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                          t0)
                .count();
        return res;
    };

    std::vector<VisitedShard> shards(VISITED_SHARDS);
    std::atomic<int64_t> distinct{0};
    std::atomic<int64_t> bytesStored{0};
    std::atomic<bool> collision{false};
    std::mutex collisionMtx;
    std::string collisionMsg;

    std::vector<std::pair<Fingerprint, Fingerprint>> edges;
    bool edgesOverflowed = false;
    std::vector<Fingerprint> quiescentSeeds;

    // Inserts a state; returns true if it was new. Handles the collision
    // store and the deterministic min-parent rule for equal-level parents.
    auto insertState = [&](SystemState const& st, std::string const& bytes,
                           Fingerprint fp, Fingerprint parent, int32_t level,
                           bool initial) -> bool
    {
        auto& shard = shards[shardOf(fp)];
        std::lock_guard<std::mutex> lock(shard.mtx);
        auto it = shard.nodes.find(fp);
        if (it != shard.nodes.end())
        {
            auto stored = shard.bytes.find(fp);
            if (stored != shard.bytes.end() && stored->second != bytes)
            {
                if (!collision.exchange(true))
                {
                    std::lock_guard<std::mutex> l2(collisionMtx);
                    collisionMsg = "fingerprint collision detected at " +
                                   fp.hex() +
                                   "; results would be unsound";
                }
            }
            // Keep the least same-level parent so traces do not depend on
            // scheduling.
            if (!initial && !it->second.initial &&
                it->second.level == level && parent < it->second.parent)
            {
                it->second.parent = parent;
            }
            return false;
        }
        NodeInfo info;
        info.parent = parent;
        info.level = level;
        info.initial = initial;
        info.quiescent = spec.quiescent(st);
        shard.nodes.emplace(fp, info);
        if (bytesStored.fetch_add(1) < opt.collisionStoreCap)
        {
            shard.bytes.emplace(fp, bytes);
        }
        else
        {
            bytesStored.fetch_sub(1);
        }
        distinct.fetch_add(1);
        return true;
    };

    std::vector<std::pair<std::string, Fingerprint>> frontier;
    std::vector<Candidate> pending;

    try
    {
        for (auto const& init : spec.initials())
        {
            std::string bytes = init.canonicalBytes();
            Fingerprint fp = fingerprintBytes(bytes);
            if (!insertState(init, bytes, fp, fp, 0, true))
            {
                continue;
            }
            res.statesExplored += 1;
            if (auto err = spec.checkState(init))
            {
                pending.push_back({0, fp.hex(), "(init)", "",
                                   Verdict::INVARIANT_VIOLATION, *err, fp, fp,
                                   false});
            }
            if (opt.refinement)
            {
                if (auto err = spec.validInitialView(spec.project(init)))
                {
                    pending.push_back({0, fp.hex(), "(init)", "",
                                       Verdict::REFINEMENT_VIOLATION, *err,
                                       fp, fp, false});
                }
            }
            if (opt.dumpStates)
            {
                res.dumpedStates.push_back({fp, spec.project(init)});
            }
            frontier.push_back({std::move(bytes), fp});
        }
    }
    catch (std::exception const& e)
    {
        res.verdict = Verdict::INTERNAL_ERROR;
        res.message = e.what();
        return finish();
    }

    int workers = std::max(1, opt.workers);
    int32_t level = 0;
    TerminalStats stats;
    int64_t deadEnds = 0;
    int64_t quiescentCount = 0;

    auto reportCandidate = [&](Candidate const& cand)
    {
        res.verdict = cand.kind;
        res.message = cand.message;
        std::vector<Fingerprint> chain;
        if (cand.viaEdge)
        {
            chain = parentChain(shards, cand.parentFp);
            chain.push_back(cand.fp);
        }
        else
        {
            chain = parentChain(shards, cand.fp);
        }
        auto trace = executeChain(
            spec, chain,
            cand.viaEdge ? std::optional<std::string>(cand.label)
                         : std::nullopt);
        if (!trace)
        {
            res.verdict = Verdict::INTERNAL_ERROR;
            res.message = "failed to reconstruct the counterexample trace "
                          "for: " +
                          cand.message;
            return;
        }
        res.trace = std::move(*trace);
    };

    while (!frontier.empty())
    {
        if (!pending.empty())
        {
            break;
        }
        std::vector<WorkerLocal> locals(static_cast<size_t>(workers));

        auto body = [&](int w)
        {
            auto& local = locals[static_cast<size_t>(w)];
            try
            {
                for (auto const& [stateBytes, fp] : frontier)
                {
                    if (static_cast<int>(static_cast<uint64_t>(fp.lo) %
                                         static_cast<uint64_t>(workers)) != w)
                    {
                        continue;
                    }
                    SystemState state =
                        SystemState::fromCanonicalBytes(stateBytes);
                    auto succs = spec.next(state);
                    local.generated += static_cast<int64_t>(succs.size());
                    if (succs.empty())
                    {
                        local.deadEnds += 1;
                        if (spec.quiescent(state))
                        {
                            local.quiescentSeen += 1;
                            if (auto err = spec.checkTerminal(state, local.stats))
                            {
                                local.candidates.push_back(
                                    {level, fp.hex(), "(terminal)", "",
                                     Verdict::INVARIANT_VIOLATION, *err, fp,
                                     fp, false});
                            }
                        }
                        else
                        {
                            local.candidates.push_back(
                                {level, fp.hex(), "(deadlock)", "",
                                 Verdict::DEADLOCK_VIOLATION,
                                 "no action is enabled before the time "
                                 "horizon",
                                 fp, fp, false});
                        }
                        continue;
                    }
                    ExternalView preView;
                    if (opt.refinement)
                    {
                        preView = spec.project(state);
                    }
                    for (auto const& [label, child] : succs)
                    {
                        std::string bytes = child.canonicalBytes();
                        Fingerprint cfp = fingerprintBytes(bytes);
                        if (auto err = spec.checkStep(state, label, child))
                        {
                            local.candidates.push_back(
                                {level + 1, cfp.hex(), label, fp.hex(),
                                 Verdict::INVARIANT_VIOLATION, *err, cfp, fp,
                                 true});
                        }
                        if (opt.refinement)
                        {
                            auto postView = spec.project(child);
                            if (auto err = spec.containsStepView(preView, postView))
                            {
                                local.candidates.push_back(
                                    {level + 1, cfp.hex(), label, fp.hex(),
                                     Verdict::REFINEMENT_VIOLATION, *err,
                                     cfp, fp, true});
                            }
                        }
                        local.edges.push_back({cfp, fp});
                        if (insertState(child, bytes, cfp, fp, level + 1,
                                        false))
                        {
                            if (auto err =
                                    spec.checkState(child))
                            {
                                local.candidates.push_back(
                                    {level + 1, cfp.hex(), label, fp.hex(),
                                     Verdict::INVARIANT_VIOLATION, *err, cfp,
                                     fp, true});
                            }
                            if (opt.dumpStates)
                            {
                                local.dumped.push_back(
                                    {cfp, spec.project(child)});
                            }
                            local.nextFrontier.push_back(
                                {std::move(bytes), cfp});
                        }
                    }
                }
            }
            catch (std::exception const& e)
            {
                local.error = e.what();
            }
        };

        if (workers == 1)
        {
            body(0);
        }
        else
        {
            std::vector<std::thread> pool;
            for (int w = 0; w < workers; ++w)
            {
                pool.emplace_back(body, w);
            }
            for (auto& t : pool)
            {
                t.join();
            }
        }

        std::vector<std::pair<std::string, Fingerprint>> next;
        for (auto& local : locals)
        {
            if (!local.error.empty())
            {
                res.verdict = Verdict::INTERNAL_ERROR;
                res.message = local.error;
                return finish();
            }
            res.statesExplored += local.generated;
            deadEnds += local.deadEnds;
            quiescentCount += local.quiescentSeen;
            stats.terminalStatesSeen += local.stats.terminalStatesSeen;
            stats.floorChecksPerformed += local.stats.floorChecksPerformed;
            pending.insert(pending.end(), local.candidates.begin(),
                           local.candidates.end());
            if (opt.checkLiveness && !edgesOverflowed)
            {
                if (static_cast<int64_t>(edges.size() + local.edges.size()) >
                    opt.livenessEdgeCap)
                {
                    edgesOverflowed = true;
                    edges.clear();
                    edges.shrink_to_fit();
                }
                else
                {
                    edges.insert(edges.end(), local.edges.begin(),
                                 local.edges.end());
                }
            }
            for (auto& d : local.dumped)
            {
                res.dumpedStates.push_back(std::move(d));
            }
            for (auto& f : local.nextFrontier)
            {
                next.push_back(std::move(f));
            }
        }

        if (collision.load())
        {
            res.verdict = Verdict::INTERNAL_ERROR;
            std::lock_guard<std::mutex> l2(collisionMtx);
            res.message = collisionMsg;
            return finish();
        }
        frontier = std::move(next);
        level += 1;
        if (pending.empty() && distinct.load() > opt.maxStates)
        {
            res.verdict = Verdict::OK_BUDGET;
            res.message = "state budget exhausted after " +
                          std::to_string(distinct.load()) +
                          " distinct states; the result is not exhaustive";
            break;
        }
    }

    res.distinctStates = distinct.load();
    res.counters["levels"] = level;
    res.counters["deadEnds"] = deadEnds;
    res.counters["quiescentStates"] = quiescentCount;
    res.counters["terminalStatesSeen"] = stats.terminalStatesSeen;
    res.counters["floorChecksPerformed"] = stats.floorChecksPerformed;
    res.counters["edges"] = static_cast<int64_t>(edges.size());

    if (!pending.empty())
    {
        Candidate best = *std::min_element(pending.begin(), pending.end());
        reportCandidate(best);
        if (opt.dumpStates)
        {
            std::sort(res.dumpedStates.begin(), res.dumpedStates.end(),
                      [](auto const& a, auto const& b)
                      { return a.first < b.first; });
        }
        return finish();
    }

    // Liveness: the time horizon must be reachable from every state (the
    // bounds never pin the clock forever). Realized as a backward
    // reachability pass from the quiescent states over the recorded edges.
    if (res.verdict == Verdict::OK && opt.checkLiveness)
    {
        if (edgesOverflowed)
        {
            res.counters["livenessSkipped"] = 1;
        }
        else
        {
            for (auto& shard : shards)
            {
                for (auto const& [fp, info] : shard.nodes)
                {
                    if (info.quiescent)
                    {
                        quiescentSeeds.push_back(fp);
                    }
                }
            }
            std::sort(edges.begin(), edges.end());
            std::unordered_set<Fingerprint, FingerprintHasher> coReach;
            std::vector<Fingerprint> stack = quiescentSeeds;
            for (auto const& fp : quiescentSeeds)
            {
                coReach.insert(fp);
            }
            while (!stack.empty())
            {
                Fingerprint x = stack.back();
                stack.pop_back();
                auto lo = std::lower_bound(
                    edges.begin(), edges.end(), x,
                    [](std::pair<Fingerprint, Fingerprint> const& e,
                       Fingerprint const& v) { return e.first < v; });
                for (auto it = lo; it != edges.end() && it->first == x; ++it)
                {
                    if (coReach.insert(it->second).second)
                    {
                        stack.push_back(it->second);
                    }
                }
            }
            std::optional<Candidate> worst;
            for (auto& shard : shards)
            {
                for (auto const& [fp, info] : shard.nodes)
                {
                    if (coReach.count(fp) != 0)
                    {
                        continue;
                    }
                    Candidate cand{info.level,
                                   fp.hex(),
                                   "(livelock)",
                                   "",
                                   Verdict::LIVENESS_VIOLATION,
                                   "state cannot reach the time horizon",
                                   fp,
                                   fp,
                                   false};
                    if (!worst || cand < *worst)
                    {
                        worst = cand;
                    }
                }
            }
            if (worst)
            {
                reportCandidate(*worst);
            }
        }
    }

    if (opt.dumpStates)
    {
        std::sort(res.dumpedStates.begin(), res.dumpedStates.end(),
                  [](auto const& a, auto const& b)
                  { return a.first < b.first; });
    }
    return finish();
}

// ---------------------------------------------------------------------------
// Random simulation.

struct SimulateOptions
{
    uint64_t seed = 1;
    int64_t runs = 100;
    int64_t depth = 400;
    bool recordWalks = false;
    bool refinement = false;
};

template <class SpecT>
CheckResult
runSimulate(SpecT const& spec, SimulateOptions const& opt)
{
    auto t0 = std::chrono::steady_clock::now();
    CheckResult res;
    auto finish = [&]()
    {
        res.durationSeconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                          t0)
                .count();
        return res;
    };
    std::vector<SystemState> initials;
    try
    {
        initials = spec.initials();
        for (auto const& init : initials)
        {
            if (auto err = spec.checkState(init))
            {
                res.verdict = Verdict::INVARIANT_VIOLATION;
                res.message = *err;
                res.trace.push_back(
                    {"init", spec.project(init), init.fingerprint()});
                return finish();
            }
        }
    }
    catch (std::exception const& e)
    {
        res.verdict = Verdict::INTERNAL_ERROR;
        res.message = e.what();
        return finish();
    }

    TerminalStats stats;
    res.statesExplored = static_cast<int64_t>(initials.size());

    // One walk; records the full trace only when asked to (for reporting a
    // violation or a requested walk log) since serializing every state of
    // every run would dominate the runtime.
    auto walk = [&](int64_t runIndex, bool record,
                    std::vector<TraceStep>* traceOut,
                    std::vector<std::string>* labelsOut)
        -> std::optional<std::pair<Verdict, std::string>>
    {
        std::mt19937_64 rng(opt.seed + static_cast<uint64_t>(runIndex));
        SystemState cur =
            initials[rng() % static_cast<uint64_t>(initials.size())];
        ExternalView curView = spec.project(cur);
        if (record)
        {
            traceOut->push_back({"init", curView, cur.fingerprint()});
        }
        for (int64_t step = 0; step < opt.depth; ++step)
        {
            std::vector<Successor> succs;
            try
            {
                succs = spec.next(cur);
            }
            catch (std::exception const& e)
            {
                return std::make_pair(Verdict::INTERNAL_ERROR,
                                      std::string(e.what()));
            }
            if (succs.empty())
            {
                if (!spec.quiescent(cur))
                {
                    return std::make_pair(
                        Verdict::DEADLOCK_VIOLATION,
                        std::string("no action is enabled before the time "
                                    "horizon"));
                }
                if (auto err = spec.checkTerminal(cur, stats))
                {
                    return std::make_pair(Verdict::INVARIANT_VIOLATION,
                                          *err);
                }
                return std::nullopt;
            }
            auto const& [label, child] =
                succs[rng() % static_cast<uint64_t>(succs.size())];
            res.statesExplored += 1;
            if (auto err = spec.checkStep(cur, label, child))
            {
                if (record)
                {
                    traceOut->push_back(
                        {label, spec.project(child), child.fingerprint()});
                }
                return std::make_pair(Verdict::INVARIANT_VIOLATION, *err);
            }
            ExternalView childView;
            if (opt.refinement || record)
            {
                childView = spec.project(child);
            }
            if (opt.refinement)
            {
                if (auto err =
                        spec.containsStepView(curView, childView))
                {
                    if (record)
                    {
                        traceOut->push_back(
                            {label, childView, child.fingerprint()});
                    }
                    return std::make_pair(Verdict::REFINEMENT_VIOLATION,
                                          *err);
                }
            }
            if (auto err = spec.checkState(child))
            {
                if (record)
                {
                    traceOut->push_back(
                        {label, childView, child.fingerprint()});
                }
                return std::make_pair(Verdict::INVARIANT_VIOLATION, *err);
            }
            if (record)
            {
                traceOut->push_back({label, childView, child.fingerprint()});
                labelsOut->push_back(label);
            }
            cur = child;
            curView = std::move(childView);
        }
        return std::nullopt;
    };

    for (int64_t r = 0; r < opt.runs; ++r)
    {
        std::vector<TraceStep> trace;
        std::vector<std::string> labels;
        bool record = opt.recordWalks;
        auto outcome = walk(r, record, &trace, &labels);
        if (outcome && !record)
        {
            // Deterministic per-run generator: replay this run with full
            // recording to produce the counterexample trace.
            trace.clear();
            labels.clear();
            auto replayed = walk(r, true, &trace, &labels);
            (void)replayed;
        }
        if (record)
        {
            res.walks.push_back(std::move(labels));
        }
        if (outcome)
        {
            res.verdict = outcome->first;
            res.message = outcome->second;
            res.trace = std::move(trace);
            res.counters["violatingRun"] = r;
            break;
        }
    }
    res.counters["terminalStatesSeen"] = stats.terminalStatesSeen;
    res.counters["floorChecksPerformed"] = stats.floorChecksPerformed;
    res.counters["runs"] = opt.runs;
    return finish();
}

// ---------------------------------------------------------------------------
// Differential comparison of the two time modes.

struct DifftimeOptions
{
    bool stripGracePoints = false;
    int64_t maxStates = 10000000;
};

inline CheckResult
runDifftime(ModelContext const& ctx, DifftimeOptions const& opt)
{
    using namespace detail;
    auto t0 = std::chrono::steady_clock::now();
    CheckResult res;
    auto finish = [&]()
    {
        res.durationSeconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                          t0)
                .count();
        return res;
    };

    TimeOptions naiveOpt{TimeOptions::Mode::NAIVE, opt.stripGracePoints};
    TimeOptions skipOpt{TimeOptions::Mode::SKIP, opt.stripGracePoints};
    Spec naiveSpec = makeSpec(ctx.scenario, ctx.rules, naiveOpt);
    Spec skipSpec = makeSpec(ctx.scenario, ctx.rules, skipOpt);

    auto isTimeLabel = [](std::string const& label)
    {
        return label.rfind("AdvanceTime(", 0) == 0 ||
               label.rfind("AdvanceTxAge(", 0) == 0;
    };
    auto nonTimeLabels = [&](std::vector<Successor> const& succs)
    {
        std::set<std::string> labels;
        for (auto const& [label, st] : succs)
        {
            if (!isTimeLabel(label))
            {
                labels.insert(label);
            }
        }
        return labels;
    };

    // Pass 1: exhaust the skip mode, collecting its external views.
    std::set<std::string> skipViews;
    {
        std::unordered_set<Fingerprint, FingerprintHasher> visited;
        std::vector<SystemState> frontier;
        try
        {
            for (auto const& init : skipSpec.initials())
            {
                if (visited.insert(init.fingerprint()).second)
                {
                    skipViews.insert(
                        skipSpec.project(init).canonicalBytes());
                    frontier.push_back(init);
                }
            }
            while (!frontier.empty())
            {
                std::vector<SystemState> next;
                for (auto const& st : frontier)
                {
                    for (auto& [label, child] : skipSpec.next(st))
                    {
                        res.statesExplored += 1;
                        if (visited.insert(child.fingerprint()).second)
                        {
                            skipViews.insert(
                                skipSpec.project(child).canonicalBytes());
                            next.push_back(std::move(child));
                        }
                    }
                }
                frontier = std::move(next);
                if (static_cast<int64_t>(visited.size()) > opt.maxStates)
                {
                    res.verdict = Verdict::OK_BUDGET;
                    res.message = "state budget exhausted in skip mode";
                    return finish();
                }
            }
        }
        catch (std::exception const& e)
        {
            res.verdict = Verdict::INTERNAL_ERROR;
            res.message = e.what();
            return finish();
        }
        res.counters["skipStates"] =
            static_cast<int64_t>(visited.size());
    }
    res.counters["skipViews"] = static_cast<int64_t>(skipViews.size());

    // Pass 2: exhaust the naive mode, checking per state that its view is
    // reachable in skip mode and per time step that newly enabled behavior
    // only appears at declared relevant time points.
    std::vector<VisitedShard> shards(VISITED_SHARDS);
    std::set<std::string> naiveViews;
    std::vector<Candidate> pending;
    int64_t naiveDistinct = 0;
    int64_t advanceEdges = 0;
    std::vector<std::pair<SystemState, Fingerprint>> frontier;

    auto insertNode = [&](Fingerprint fp, Fingerprint parent, int32_t level,
                          bool initial) -> bool
    {
        auto& shard = shards[shardOf(fp)];
        auto it = shard.nodes.find(fp);
        if (it != shard.nodes.end())
        {
            if (!initial && !it->second.initial &&
                it->second.level == level && parent < it->second.parent)
            {
                it->second.parent = parent;
            }
            return false;
        }
        NodeInfo info;
        info.parent = parent;
        info.level = level;
        info.initial = initial;
        shard.nodes.emplace(fp, info);
        naiveDistinct += 1;
        return true;
    };

    try
    {
        int32_t level = 0;
        for (auto const& init : naiveSpec.initials())
        {
            Fingerprint fp = init.fingerprint();
            if (!insertNode(fp, fp, 0, true))
            {
                continue;
            }
            std::string view = naiveSpec.project(init).canonicalBytes();
            naiveViews.insert(view);
            if (skipViews.count(view) == 0)
            {
                pending.push_back({0, fp.hex(), "(init)", "",
                                   Verdict::REFINEMENT_VIOLATION,
                                   "initial naive-mode view is unreachable "
                                   "in skip mode",
                                   fp, fp, false});
            }
            frontier.push_back({init, fp});
        }
        while (!frontier.empty() && pending.empty())
        {
            std::vector<std::pair<SystemState, Fingerprint>> next;
            for (auto const& [state, fp] : frontier)
            {
                auto succs = naiveSpec.next(state);
                std::optional<std::set<std::string>> preLabels;
                for (auto const& [label, child] : succs)
                {
                    res.statesExplored += 1;
                    Fingerprint cfp = child.fingerprint();
                    bool isNew =
                        insertNode(cfp, fp, level + 1, false);
                    if (isNew)
                    {
                        std::string view =
                            naiveSpec.project(child).canonicalBytes();
                        naiveViews.insert(view);
                        if (skipViews.count(view) == 0)
                        {
                            pending.push_back(
                                {level + 1, cfp.hex(), label, fp.hex(),
                                 Verdict::REFINEMENT_VIOLATION,
                                 "naive-mode view after '" + label +
                                     "' is unreachable in skip mode",
                                 cfp, fp, true});
                        }
                        next.push_back({child, cfp});
                    }
                    if (label.rfind("AdvanceTime(", 0) == 0 &&
                        child.now > state.now)
                    {
                        // Does advancing the clock alone (ages untouched)
                        // enable any new protocol action?
                        advanceEdges += 1;
                        if (!preLabels)
                        {
                            preLabels = nonTimeLabels(succs);
                        }
                        SystemState nowOnly = state;
                        nowOnly.now = child.now;
                        auto after = nonTimeLabels(naiveSpec.next(nowOnly));
                        bool newlyEnabled = false;
                        for (auto const& l : after)
                        {
                            newlyEnabled =
                                newlyEnabled || preLabels->count(l) == 0;
                        }
                        if (newlyEnabled)
                        {
                            auto pts = computeRelevantTimePoints(
                                ctx, state, naiveOpt);
                            if (pts.count(child.now) == 0)
                            {
                                pending.push_back(
                                    {level + 1, cfp.hex(), label, fp.hex(),
                                     Verdict::REFINEMENT_VIOLATION,
                                     "time point " +
                                         std::to_string(child.now) +
                                         " newly enables actions but is "
                                         "not a declared relevant time "
                                         "point",
                                     cfp, fp, true});
                            }
                        }
                    }
                }
            }
            frontier = std::move(next);
            level += 1;
            if (naiveDistinct > opt.maxStates)
            {
                res.verdict = Verdict::OK_BUDGET;
                res.message = "state budget exhausted in naive mode";
                return finish();
            }
        }
        if (!pending.empty())
        {
            Candidate best =
                *std::min_element(pending.begin(), pending.end());
            res.verdict = best.kind;
            res.message = best.message;
            auto chain = best.viaEdge ? parentChain(shards, best.parentFp)
                                      : parentChain(shards, best.fp);
            if (best.viaEdge)
            {
                chain.push_back(best.fp);
            }
            auto trace = executeChain(
                naiveSpec, chain,
                best.viaEdge ? std::optional<std::string>(best.label)
                             : std::nullopt);
            if (trace)
            {
                res.trace = std::move(*trace);
            }
            else
            {
                res.verdict = Verdict::INTERNAL_ERROR;
                res.message =
                    "failed to reconstruct the counterexample trace for: " +
                    best.message;
            }
        }
    }
    catch (std::exception const& e)
    {
        res.verdict = Verdict::INTERNAL_ERROR;
        res.message = e.what();
        return finish();
    }

    res.distinctStates = naiveDistinct;
    res.counters["naiveStates"] = naiveDistinct;
    res.counters["naiveViews"] = static_cast<int64_t>(naiveViews.size());
    res.counters["advanceEdgesChecked"] = advanceEdges;
    bool subset = true;
    for (auto const& v : naiveViews)
    {
        subset = subset && skipViews.count(v) != 0;
    }
    res.counters["viewsEqual"] =
        subset && naiveViews.size() == skipViews.size() ? 1 : 0;
    return finish();
}

} // namespace lnmc
