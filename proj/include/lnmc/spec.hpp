// Copyright 2026 the lnmc contributors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0
#pragma once

#include "lnmc/ideal.hpp"
#include "lnmc/invariants.hpp"
#include "lnmc/protocol.hpp"

// The checkable-specification bundle handed to the exploration engines: a
// finite set of initial states, a successor relation over named guarded
// actions, a weak-fairness declaration, and the projection to the externally
// visible variables.
namespace lnmc
{

struct Spec
{
    ModelContext ctx;
    TimeOptions time;

    // Weak fairness is not enforced by a separate scheduler: the duty
    // actions below are made unavoidable by the time bounds (the clock
    // cannot pass the point where an honest user must have acted), so every
    // complete run contains them. The list documents which labels carry
    // that obligation.
    std::vector<std::string> fairness = {
        "SendHTLCPreimage", "SendHTLCFail",      "RedeemHTLCAfterClose",
        "SweepOwnOutput",   "Punish",            "CloseChannel",
    };

    std::vector<SystemState>
    initials() const
    {
        return initialStates(ctx);
    }

    std::vector<Successor>
    next(SystemState const& s) const
    {
        return successors(ctx, s, time);
    }

    ExternalView
    project(SystemState const& s) const
    {
        return projectExternal(ctx, s);
    }

    bool
    quiescent(SystemState const& s) const
    {
        return s.now == ctx.scenario.constants.maxTime;
    }

    // Property hooks consulted by the exploration engines. They can be
    // shadowed by alternative spec bundles (the engines are templates), but
    // the protocol spec always checks the full battery.
    std::optional<std::string>
    checkState(SystemState const& s) const
    {
        return checkStateInvariants(ctx, s);
    }

    std::optional<std::string>
    checkStep(SystemState const& pre, std::string const& label,
              SystemState const& post) const
    {
        return checkStepInvariants(ctx, pre, label, post);
    }

    std::optional<std::string>
    checkTerminal(SystemState const& s, TerminalStats& stats) const
    {
        return checkTerminalState(ctx, s, stats);
    }

    std::optional<std::string>
    validInitialView(ExternalView const& view) const
    {
        return idealValidInitial(ctx, view);
    }

    std::optional<std::string>
    containsStepView(ExternalView const& pre, ExternalView const& post) const
    {
        std::vector<std::string> names;
        names.reserve(ctx.scenario.users.size());
        for (auto const& u : ctx.scenario.users)
        {
            names.push_back(u.name);
        }
        return idealContainsStep(names, pre, post);
    }
};

inline Spec
makeSpec(Scenario scenario, ProtocolRules rules = {}, TimeOptions time = {})
{
    Spec spec;
    spec.ctx.scenario = std::move(scenario);
    spec.ctx.rules = rules;
    spec.time = time;
    return spec;
}

} // namespace lnmc
