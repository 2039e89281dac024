// Copyright 2026 the lnmc contributors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0
#pragma once

#include "lnmc/channel_txs.hpp"
#include "lnmc/state.hpp"

#include <limits>
#include <set>

namespace lnmc
{

// Time is abstracted as one ledger clock plus one age clock per transaction
// that still carries an unspent relative-timelocked output. Two modes
// advance them:
//
//   naive: one action moves every non-saturated clock forward by one, the
//          direct unrolling of real block arrival.
//   skip:  the ledger clock jumps to the next *relevant* time point and each
//          age clock jumps straight to its saturation value, as independent
//          actions. Relevant points are the times at which some guard or
//          validation outcome can change.
//
// Weak fairness for honest users is encoded as bounds: while an honest user
// has a pending obligation (fulfil an HTLC it can still safely fulfil, react
// to an expired HTLC, punish a revoked commitment before its outputs
// mature), no advance may move the governing clock past the bound, forcing
// the obligated action to interleave first. Bounds already in the past are
// vacuous: the obligation window has closed and time must keep flowing.
struct TimeOptions
{
    enum class Mode
    {
        NAIVE,
        SKIP
    };

    Mode mode = Mode::SKIP;
    // Test mutation: drop the reaction-deadline points (timelock + grace + 1)
    // from the relevant set. Used to demonstrate that the difference checks
    // catch an under-approximated point set.
    bool stripGracePoints = false;
};

struct TimeBounds
{
    static constexpr TimePoint NO_BOUND =
        std::numeric_limits<TimePoint>::max();

    TimePoint ledgerBound = NO_BOUND;
    // Per-transaction age caps (bound = to_self_delay - 1 while a punishable
    // revoked output is unspent and its victim holds the revocation key).
    std::vector<std::pair<TxId, TimePoint>> ageBounds; // sorted by tx id

    TimePoint
    ageBoundOf(TxId id) const
    {
        for (auto const& [t, b] : ageBounds)
        {
            if (t == id)
            {
                return b;
            }
        }
        return NO_BOUND;
    }
};

namespace detail
{

// True when some unspent output of `tx` carries a condition spendable via a
// revocation key of `owner` at an index in `revealed`.
inline bool
hasPunishableOutput(Ledger const& ledger, Transaction const& tx, UserId owner,
                    ChannelId chan, std::vector<int32_t> const& revealed)
{
    for (size_t i = 0; i < tx.outputs.size(); ++i)
    {
        if (ledger.isSpent({tx.id, static_cast<int32_t>(i)}))
        {
            continue;
        }
        for (auto const& cond : tx.outputs[i].conditions)
        {
            for (auto const& k : cond.keys)
            {
                if (k.kind == Key::Kind::REVOCATION && k.owner == owner &&
                    k.channel == chan &&
                    std::binary_search(revealed.begin(), revealed.end(),
                                       k.index))
                {
                    return true;
                }
            }
        }
    }
    return false;
}

} // namespace detail

inline TimeBounds
computeTimeBounds(ModelContext const& ctx, SystemState const& s)
{
    TimeBounds b;
    TimePoint grace = ctx.scenario.constants.grace;
    TimePoint tsd = ctx.scenario.constants.toSelfDelay;

    auto pinLedger = [&](TimePoint bound)
    {
        if (bound >= s.now)
        {
            b.ledgerBound = std::min(b.ledgerBound, bound);
        }
    };

    for (size_t ci = 0; ci < s.channels.size(); ++ci)
    {
        auto const& cs = s.channels[ci];
        for (int32_t side = 0; side < 2; ++side)
        {
            UserId u = ctx.sideUser(static_cast<ChannelId>(ci), side);
            if (!s.users[u].honest)
            {
                continue;
            }
            auto const& vars = cs.side[side];

            // A record mid-handshake carries the same obligations as a
            // committed one: from the moment the first signature for a
            // commitment carrying the output leaves its signer, the
            // counterparty may hold a publishable commitment with the HTLC
            // on it, whether or not anything has reached the chain yet.
            // NEW records are exempt: nothing signed carries them, and an
            // expired one is never admitted into a snapshot.
            auto halfCommitted = [](HtlcState st)
            {
                return st == HtlcState::SENT_COMMIT ||
                       st == HtlcState::RECV_COMMIT ||
                       st == HtlcState::PENDING_COMMIT;
            };

            // An incoming HTLC whose preimage the user holds must be
            // fulfilled (or claimed on-chain) before its timelock expires:
            // time may not pass T-1 while it is unresolved.
            for (auto const& h : vars.incoming)
            {
                if ((h.state == HtlcState::COMMITTED ||
                     h.state == HtlcState::FULFILLED ||
                     halfCommitted(h.state)) &&
                    s.users[u].preimages.count(h.hash) != 0)
                {
                    pinLedger(h.timelock - 1);
                }
            }

            // An expired outgoing HTLC must be removed from the commitments
            // off-chain or reclaimed on-chain within the grace window after
            // its timelock. The off-chain fail handshake alone does not
            // lift the pin: until the removal round completes, the HTLC is
            // still spendable from the latest commitment, and the receiver
            // could take it by preimage arbitrarily late otherwise.
            for (auto const& h : vars.outgoing)
            {
                if (h.state == HtlcState::COMMITTED ||
                    h.state == HtlcState::OFF_TIMEDOUT ||
                    halfCommitted(h.state))
                {
                    pinLedger(h.timelock + grace);
                }
            }

            // A revoked commitment (or one of its second-stage spends) on
            // the ledger pins the age of every transaction whose punishable
            // outputs are still unspent: the cheater's sweep needs maturity,
            // the victim's punishment does not, so the victim always wins
            // the race while the bound holds.
            UserId peer = ctx.sideUser(static_cast<ChannelId>(ci), 1 - side);
            for (auto const& snap : vars.peerSnapshots)
            {
                if (!std::binary_search(vars.peerRevocations.begin(),
                                        vars.peerRevocations.end(),
                                        snap.index))
                {
                    continue;
                }
                std::vector<TxId> candidates{snap.txId};
                for (auto const& sh : snap.htlcs)
                {
                    candidates.push_back(sh.secondStageTxId);
                }
                for (TxId id : candidates)
                {
                    auto const* tx = s.ledger.findTx(id);
                    if (tx != nullptr &&
                        detail::hasPunishableOutput(
                            s.ledger, *tx, peer, static_cast<ChannelId>(ci),
                            vars.peerRevocations) &&
                        s.ledger.tracksAge(id) &&
                        s.ledger.ageOf(id) <= tsd - 1)
                    {
                        b.ageBounds.emplace_back(id, tsd - 1);
                    }
                }
            }
        }
    }
    std::sort(b.ageBounds.begin(), b.ageBounds.end());
    b.ageBounds.erase(std::unique(b.ageBounds.begin(), b.ageBounds.end()),
                      b.ageBounds.end());
    return b;
}

// The set of ledger time points (in (now, max_time]) at which some guard or
// validation predicate can flip: HTLC timelocks of every hop of every
// payment (future hops are predictable from the scenario), the reaction
// deadlines timelock + grace + 1, absolute timelocks appearing on ledger
// output conditions, the resumption points just past each active fairness
// bound, and the horizon itself. Age clocks have a single relevant target,
// saturation at to_self_delay.
inline std::set<TimePoint>
computeRelevantTimePoints(ModelContext const& ctx, SystemState const& s,
                          TimeOptions const& opt)
{
    std::set<TimePoint> pts;
    TimePoint maxTime = ctx.scenario.constants.maxTime;
    TimePoint grace = ctx.scenario.constants.grace;
    auto add = [&](TimePoint p)
    {
        if (p > s.now && p <= maxTime)
        {
            pts.insert(p);
        }
    };

    for (auto const& p : ctx.scenario.payments)
    {
        for (TimePoint t : ctx.scenario.hopTimelocks(p))
        {
            add(t);
            if (!opt.stripGracePoints)
            {
                add(t + grace + 1);
            }
        }
    }
    for (auto const& tx : s.ledger.txs)
    {
        for (auto const& o : tx.outputs)
        {
            for (auto const& c : o.conditions)
            {
                if (c.absTimelock > 0)
                {
                    add(c.absTimelock);
                }
            }
        }
    }
    TimeBounds b = computeTimeBounds(ctx, s);
    if (b.ledgerBound != TimeBounds::NO_BOUND)
    {
        add(b.ledgerBound + 1);
    }
    add(maxTime);
    return pts;
}

// Appends the enabled time-advance successors of `s` to `out` as
// (label, state) pairs. Kept separate from the protocol actions so the
// difference checks can reason about time steps in isolation.
inline void
timeSuccessors(ModelContext const& ctx, SystemState const& s,
               TimeOptions const& opt,
               std::vector<std::pair<std::string, SystemState>>& out)
{
    TimePoint maxTime = ctx.scenario.constants.maxTime;
    TimePoint tsd = ctx.scenario.constants.toSelfDelay;
    TimeBounds bounds = computeTimeBounds(ctx, s);

    if (opt.mode == TimeOptions::Mode::NAIVE)
    {
        bool ledgerMoves = s.now < maxTime;
        if (ledgerMoves && s.now + 1 > bounds.ledgerBound)
        {
            return; // the ledger clock is pinned; nothing may advance
        }
        bool anyAge = false;
        for (auto const& [id, age] : s.ledger.ages)
        {
            if (age < tsd)
            {
                TimePoint ab = bounds.ageBoundOf(id);
                if (age + 1 > ab)
                {
                    return; // a pinned age clock freezes the lock-step
                }
                anyAge = true;
            }
        }
        if (!ledgerMoves && !anyAge)
        {
            return;
        }
        SystemState next = s;
        if (ledgerMoves)
        {
            next.now = s.now + 1;
        }
        for (auto& [id, age] : next.ledger.ages)
        {
            if (age < tsd)
            {
                age = age + 1;
            }
        }
        out.emplace_back("AdvanceTime(to=" + std::to_string(next.now) + ")",
                         std::move(next));
        return;
    }

    auto pts = computeRelevantTimePoints(ctx, s, opt);
    auto it = pts.upper_bound(s.now);
    if (it != pts.end() && *it <= bounds.ledgerBound)
    {
        SystemState next = s;
        next.now = *it;
        out.emplace_back("AdvanceTime(to=" + std::to_string(next.now) + ")",
                         std::move(next));
    }
    for (auto const& [id, age] : s.ledger.ages)
    {
        if (age < tsd && tsd <= bounds.ageBoundOf(id))
        {
            SystemState next = s;
            for (auto& [nid, nage] : next.ledger.ages)
            {
                if (nid == id)
                {
                    nage = tsd;
                }
            }
            out.emplace_back("AdvanceTxAge(tx=" + std::to_string(id) +
                                 ",to=" + std::to_string(tsd) + ")",
                             std::move(next));
        }
    }
}

} // namespace lnmc
