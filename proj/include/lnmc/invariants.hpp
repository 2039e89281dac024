// Copyright 2026 the lnmc contributors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0
#pragma once

#include "lnmc/protocol.hpp"

#include <sstream>

// Safety properties checked during exploration. Each check returns an empty
// optional when satisfied and a human-readable diagnosis otherwise; the
// checker turns a diagnosis into an invariant-violation verdict with a
// counterexample trace.
namespace lnmc
{

namespace detail
{

inline Amount
initialTotal(Scenario const& sc)
{
    Amount total = 0;
    for (auto const& u : sc.users)
    {
        total += u.initialBalance;
    }
    return total;
}

inline std::optional<std::string>
checkSnapshotShape(Scenario const& sc, ChannelId c, CommitSnapshot const& snap,
                   char const* what)
{
    Amount inFlight = 0;
    for (auto const& h : snap.htlcs)
    {
        inFlight += h.amount;
    }
    if (snap.balanceOwner < 0 || snap.balancePeer < 0 ||
        snap.balanceOwner + snap.balancePeer + inFlight !=
            sc.channels[c].capacity)
    {
        std::ostringstream os;
        os << "commitment version " << snap.index << " (" << what
           << ") of channel '" << sc.channels[c].name
           << "' does not split the capacity: owner " << snap.balanceOwner
           << ", peer " << snap.balancePeer << ", in flight " << inFlight;
        return os.str();
    }
    return std::nullopt;
}

} // namespace detail

// Properties of a single reachable state.
inline std::optional<std::string>
checkStateInvariants(ModelContext const& ctx, SystemState const& s)
{
    auto const& sc = ctx.scenario;

    // Value is neither created nor destroyed on the ledger.
    Amount total = s.ledger.totalUnspentValue();
    if (total != detail::initialTotal(sc))
    {
        std::ostringstream os;
        os << "ledger holds " << total << " in unspent outputs, expected "
           << detail::initialTotal(sc);
        return os.str();
    }

    for (size_t ci = 0; ci < s.channels.size(); ++ci)
    {
        ChannelId c = static_cast<ChannelId>(ci);
        auto const& cs = s.channels[ci];
        for (int32_t side = 0; side < 2; ++side)
        {
            auto const& vars = cs.side[side];
            std::string who = detail::chanUser(ctx, c, ctx.sideUser(c, side));
            if (vars.balance < 0)
            {
                return "negative off-chain balance at " + who;
            }
            if (vars.stake < 0)
            {
                return "negative channel stake at " + who;
            }
            for (auto const& snap : vars.mySnapshots)
            {
                if (auto err =
                        detail::checkSnapshotShape(sc, c, snap, "own"))
                {
                    return err;
                }
            }
            for (auto const& snap : vars.peerSnapshots)
            {
                if (auto err =
                        detail::checkSnapshotShape(sc, c, snap, "peer"))
                {
                    return err;
                }
            }
            if (vars.myPending)
            {
                if (auto err = detail::checkSnapshotShape(
                        sc, c, *vars.myPending, "own pending"))
                {
                    return err;
                }
            }
            if (vars.peerPending)
            {
                if (auto err = detail::checkSnapshotShape(
                        sc, c, *vars.peerPending, "peer pending"))
                {
                    return err;
                }
            }
            // Revocations the peer handed over must refer to versions the
            // peer actually built.
            if (!vars.peerRevocations.empty())
            {
                auto const& other = cs.side[1 - side];
                int32_t maxBuilt = -1;
                if (!other.mySnapshots.empty())
                {
                    maxBuilt = other.mySnapshots.back().index;
                }
                if (other.myPending)
                {
                    maxBuilt = std::max(maxBuilt, other.myPending->index);
                }
                if (vars.peerRevocations.front() < 0 ||
                    vars.peerRevocations.back() > maxBuilt)
                {
                    return "revocation key outside the built version range "
                           "held at " +
                           who;
                }
            }
        }
    }

    // An intermediary's outgoing hop must leave a full safety margin below
    // its incoming hop.
    for (size_t u = 0; u < s.users.size(); ++u)
    {
        for (size_t ci = 0; ci < s.channels.size(); ++ci)
        {
            int32_t side =
                ctx.sideOf(static_cast<ChannelId>(ci), static_cast<UserId>(u));
            if (side < 0)
            {
                continue;
            }
            for (auto const& out : s.channels[ci].side[side].outgoing)
            {
                for (size_t cj = 0; cj < s.channels.size(); ++cj)
                {
                    int32_t sj = ctx.sideOf(static_cast<ChannelId>(cj),
                                            static_cast<UserId>(u));
                    if (sj < 0 || cj == ci)
                    {
                        continue;
                    }
                    auto const* in =
                        s.channels[cj].side[sj].findIncoming(out.id);
                    if (in != nullptr &&
                        out.timelock !=
                            in->timelock - sc.constants.cltvDelta)
                    {
                        std::ostringstream os;
                        os << "forwarded payment " << out.id << " at user '"
                           << sc.users[u].name
                           << "' does not step its timelock down by "
                           << sc.constants.cltvDelta;
                        return os.str();
                    }
                }
            }
        }
        auto const& user = s.users[u];
        for (HashVal h : user.latePreimages)
        {
            if (user.preimages.count(h) == 0)
            {
                return "late preimage not recorded as known at user '" +
                       sc.users[u].name + "'";
            }
        }
    }
    return std::nullopt;
}

// Properties of a single transition. `label` is only used for diagnoses.
inline std::optional<std::string>
checkStepInvariants(ModelContext const& ctx, SystemState const& pre,
                    std::string const& label, SystemState const& post)
{
    auto const& sc = ctx.scenario;
    if (post.now < pre.now)
    {
        return "time moved backwards on " + label;
    }
    for (auto const& [tx, age] : pre.ledger.ages)
    {
        TimePoint after = post.ledger.ageOf(tx);
        if (post.ledger.tracksAge(tx) && after < age)
        {
            return "confirmation age moved backwards on " + label;
        }
    }
    for (size_t u = 0; u < pre.users.size(); ++u)
    {
        if (pre.users[u].honest != post.users[u].honest)
        {
            return "honesty flag changed on " + label;
        }
        // Legs are fixed at initialization and only harden.
        auto const& lp = pre.users[u].legs;
        auto const& lq = post.users[u].legs;
        if (lp.size() != lq.size())
        {
            return "payment leg set changed on " + label;
        }
        for (size_t i = 0; i < lp.size(); ++i)
        {
            if (lp[i].id != lq[i].id || lp[i].sender != lq[i].sender ||
                lp[i].receiver != lq[i].receiver ||
                lp[i].amount != lq[i].amount)
            {
                return "payment leg identity changed on " + label;
            }
            bool ok = lp[i].state == lq[i].state ||
                      (lp[i].state == LegState::NEW &&
                       (lq[i].state == LegState::PROCESSED ||
                        lq[i].state == LegState::ABORTED));
            if (!ok)
            {
                std::ostringstream os;
                os << "leg of payment " << lp[i].id << " at user '"
                   << sc.users[u].name << "' left its terminal state on "
                   << label;
                return os.str();
            }
        }
    }

    auto transitionOk = [](HtlcState a, HtlcState b)
    {
        if (a == b)
        {
            return true;
        }
        switch (a)
        {
        case HtlcState::NEW:
            return b == HtlcState::SENT_COMMIT ||
                   b == HtlcState::RECV_COMMIT || b == HtlcState::ABORTED;
        case HtlcState::SENT_COMMIT:
            return b == HtlcState::PENDING_COMMIT ||
                   b == HtlcState::COMMITTED || b == HtlcState::ABORTED;
        case HtlcState::RECV_COMMIT:
            return b == HtlcState::PENDING_COMMIT ||
                   b == HtlcState::COMMITTED || b == HtlcState::ABORTED;
        case HtlcState::PENDING_COMMIT:
            return b == HtlcState::SENT_COMMIT ||
                   b == HtlcState::RECV_COMMIT ||
                   b == HtlcState::COMMITTED || b == HtlcState::ABORTED;
        case HtlcState::COMMITTED:
            return b == HtlcState::FULFILLED ||
                   b == HtlcState::OFF_TIMEDOUT ||
                   b == HtlcState::PERSISTED || b == HtlcState::TIMEDOUT ||
                   b == HtlcState::ABORTED;
        case HtlcState::FULFILLED:
            return b == HtlcState::PERSISTED || b == HtlcState::TIMEDOUT;
        case HtlcState::OFF_TIMEDOUT:
            // PERSISTED: the counterparty collected the still-live output
            // by preimage on-chain after the off-chain fail handshake.
            return b == HtlcState::TIMEDOUT || b == HtlcState::PERSISTED;
        case HtlcState::PERSISTED:
        case HtlcState::TIMEDOUT:
        case HtlcState::ABORTED:
            return false;
        }
        return false;
    };

    for (size_t ci = 0; ci < pre.channels.size(); ++ci)
    {
        for (int32_t side = 0; side < 2; ++side)
        {
            auto const& vp = pre.channels[ci].side[side];
            auto const& vq = post.channels[ci].side[side];
            auto checkList = [&](std::vector<Htlc> const& before,
                                 std::vector<Htlc> const& after)
                -> std::optional<std::string>
            {
                for (auto const& h : after)
                {
                    Htlc const* old = nullptr;
                    for (auto const& x : before)
                    {
                        if (x.id == h.id)
                        {
                            old = &x;
                        }
                    }
                    if (old == nullptr)
                    {
                        if (h.state != HtlcState::NEW)
                        {
                            std::ostringstream os;
                            os << "HTLC " << h.id << " appeared in state "
                               << htlcStateName(h.state) << " on " << label;
                            return os.str();
                        }
                        continue;
                    }
                    if (!transitionOk(old->state, h.state))
                    {
                        std::ostringstream os;
                        os << "HTLC " << h.id << " moved "
                           << htlcStateName(old->state) << " -> "
                           << htlcStateName(h.state) << " on " << label;
                        return os.str();
                    }
                }
                return std::nullopt;
            };
            if (auto err = checkList(vp.incoming, vq.incoming))
            {
                return err;
            }
            if (auto err = checkList(vp.outgoing, vq.outgoing))
            {
                return err;
            }
        }
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Terminal-state checks. A run of the system is complete when no action is
// enabled and the clock has reached the horizon; at that point every honest
// user must hold at least the balance the completed payments entitle it to.

struct TerminalStats
{
    int64_t terminalStatesSeen = 0;
    int64_t floorChecksPerformed = 0;
};

inline Amount
expectedFinalBalance(ModelContext const& ctx, SystemState const& s, UserId u)
{
    Amount expected = ctx.scenario.users[u].initialBalance;
    for (auto const& leg : s.users[u].legs)
    {
        if (leg.state != LegState::PROCESSED)
        {
            continue;
        }
        if (leg.sender == u)
        {
            expected -= leg.amount;
        }
        else if (leg.receiver == u)
        {
            expected += leg.amount;
        }
    }
    return expected;
}

inline std::optional<std::string>
checkTerminalState(ModelContext const& ctx, SystemState const& s,
                   TerminalStats& stats)
{
    auto const& sc = ctx.scenario;
    stats.terminalStatesSeen += 1;

    for (size_t u = 0; u < s.users.size(); ++u)
    {
        if (!s.users[u].honest)
        {
            continue;
        }
        Amount actual = onchainBalance(s.ledger, static_cast<UserId>(u));
        Amount expected = expectedFinalBalance(ctx, s, static_cast<UserId>(u));
        if (actual < expected)
        {
            std::ostringstream os;
            os << "honest user '" << sc.users[u].name << "' finished with "
               << actual << " on-chain but is entitled to " << expected;
            return os.str();
        }
        // Everything honest users held in channels must have settled.
        Amount residual = 0;
        for (size_t ci = 0; ci < s.channels.size(); ++ci)
        {
            int32_t side =
                ctx.sideOf(static_cast<ChannelId>(ci), static_cast<UserId>(u));
            if (side >= 0)
            {
                residual += s.channels[ci].side[side].stake;
            }
        }
        if (residual != 0)
        {
            std::ostringstream os;
            os << "honest user '" << sc.users[u].name << "' still carries "
               << residual << " of unsettled channel stake at the horizon";
            return os.str();
        }
    }

    // Punishment floor, stated for single-channel scenarios: when a cheater
    // published a commitment the victim could already punish (the victim
    // held its revocation key at publication time), the honest victim ends
    // with at least its whole outside balance plus the entire channel
    // capacity, net of the payments it completed towards the cheater.
    // A key that was still in flight at publication does not arm the floor:
    // until it arrives the victim treats the close as honest, and the
    // delayed outputs may legitimately mature and be swept meanwhile.
    if (sc.channels.size() == 1)
    {
        ChannelId c = 0;
        auto pc = detail::publishedCommitment(ctx, s, c);
        if (pc && s.channels[c].punishableAtPublication)
        {
            int32_t cheaterSide = pc->ownerSide;
            UserId p = ctx.sideUser(c, cheaterSide);
            UserId q = ctx.sideUser(c, 1 - cheaterSide);
            if (!s.users[p].honest && s.users[q].honest)
            {
                stats.floorChecksPerformed += 1;
                Amount funded = sc.channels[c].funder == q
                                    ? sc.channels[c].capacity
                                    : 0;
                Amount sentToCheater = 0;
                for (auto const& leg : s.users[q].legs)
                {
                    if (leg.state == LegState::PROCESSED &&
                        leg.sender == q && leg.receiver == p)
                    {
                        sentToCheater += leg.amount;
                    }
                }
                Amount floor = (sc.users[q].initialBalance - funded) +
                               sc.channels[c].capacity - sentToCheater;
                Amount actual = onchainBalance(s.ledger, q);
                if (actual < floor)
                {
                    std::ostringstream os;
                    os << "punishment floor broken: honest user '"
                       << sc.users[q].name << "' holds " << actual
                       << " on-chain, below the guaranteed " << floor;
                    return os.str();
                }
            }
        }
    }
    return std::nullopt;
}

} // namespace lnmc
