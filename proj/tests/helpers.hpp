// Copyright 2026 the lnmc contributors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0
#pragma once

#include "lnmc/lnmc.hpp"

namespace lnmc::test
{

inline std::string
scenarioPath(std::string const& file)
{
    return std::string(LNMC_SCENARIO_DIR) + "/" + file;
}

inline Spec
specFor(std::string const& file, ProtocolRules rules = {},
        TimeOptions time = {})
{
    return makeSpec(loadScenario(scenarioPath(file)), rules, time);
}

inline bool
hasLabelPrefix(std::vector<Successor> const& succs, std::string const& prefix)
{
    for (auto const& [label, st] : succs)
    {
        if (label.rfind(prefix, 0) == 0)
        {
            return true;
        }
    }
    return false;
}

// Applies the lexicographically first successor whose label starts with the
// prefix. Returns the full label, or nullopt when no successor matches.
inline std::optional<std::string>
applyFirst(Spec const& spec, SystemState& s, std::string const& prefix)
{
    for (auto& [label, st] : spec.next(s))
    {
        if (label.rfind(prefix, 0) == 0)
        {
            s = std::move(st);
            return label;
        }
    }
    return std::nullopt;
}

// Applies a script of label prefixes in order; returns the first prefix that
// had no matching successor, or nullopt when the whole script ran.
inline std::optional<std::string>
runScript(Spec const& spec, SystemState& s,
          std::vector<std::string> const& prefixes)
{
    for (auto const& p : prefixes)
    {
        if (!applyFirst(spec, s, p))
        {
            return p;
        }
    }
    return std::nullopt;
}

// Greedy driver: repeatedly applies the first successor whose label does not
// start with any avoided prefix (falling back to the first successor at all)
// until the predicate holds or the step budget runs out. Returns true when
// the predicate was reached.
inline bool
driveUntil(Spec const& spec, SystemState& s,
           std::function<bool(SystemState const&)> const& done,
           std::vector<std::string> const& avoid, int maxSteps)
{
    for (int i = 0; i < maxSteps; ++i)
    {
        if (done(s))
        {
            return true;
        }
        auto succs = spec.next(s);
        if (succs.empty())
        {
            return done(s);
        }
        Successor* pick = nullptr;
        for (auto& succ : succs)
        {
            bool avoided = false;
            for (auto const& a : avoid)
            {
                avoided = avoided || succ.first.rfind(a, 0) == 0;
            }
            if (!avoided)
            {
                pick = &succ;
                break;
            }
        }
        if (pick == nullptr)
        {
            pick = &succs.front();
        }
        s = std::move(pick->second);
    }
    return done(s);
}

// Label scripts driving the two-user scenario "c1" through its cooperative
// phases. Each entry is a prefix for applyFirst/runScript.
inline std::vector<std::string> const&
c1FundScript()
{
    static std::vector<std::string> const steps = {
        "SendOpenChannel(",
        "SendAcceptChannel(",
        "SendSignedFirstCommitTransaction(",
        "SendFundingSigned(",
        "PublishFundingTransaction(",
        "SendNewRevocationKey(a,A",
        "SendNewRevocationKey(a,B",
        "ReceiveNewRevocationKey(a,A",
        "ReceiveNewRevocationKey(a,B",
    };
    return steps;
}

inline std::vector<std::string> const&
c1AddScript()
{
    static std::vector<std::string> const steps = {
        "RequestInvoice(",
        "GenerateAndSendPaymentHash(",
        "ReceivePaymentHash(",
        "AddAndSendOutgoingHTLC(",
        "ReceiveUpdateAddHTLC(",
        "SendSignedCommitment(a,A",
        "ReceiveSignedCommitment(a,B",
        "SendRevocationKey(a,B",
        "ReceiveRevocationKey(a,A",
        "SendSignedCommitment(a,B",
        "ReceiveSignedCommitment(a,A",
        "SendRevocationKey(a,A",
        "ReceiveRevocationKey(a,B",
    };
    return steps;
}

inline std::vector<std::string> const&
c1SettleScript()
{
    static std::vector<std::string> const steps = {
        "SendHTLCPreimage(",
        "ReceiveHTLCPreimage(",
        "SendSignedCommitment(a,B",
        "ReceiveSignedCommitment(a,A",
        "SendRevocationKey(a,A",
        "ReceiveRevocationKey(a,B",
        "SendSignedCommitment(a,A",
        "ReceiveSignedCommitment(a,B",
        "SendRevocationKey(a,B",
        "ReceiveRevocationKey(a,A",
    };
    return steps;
}

inline std::vector<std::string>
concatScripts(std::initializer_list<std::vector<std::string>> parts)
{
    std::vector<std::string> out;
    for (auto const& p : parts)
    {
        out.insert(out.end(), p.begin(), p.end());
    }
    return out;
}

} // namespace lnmc::test
