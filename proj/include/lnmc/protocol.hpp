// Copyright 2026 the lnmc contributors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0
#pragma once

#include "lnmc/channel_txs.hpp"
#include "lnmc/time.hpp"

#include <stdexcept>

// The payment-channel protocol as a transition system: initialStates()
// yields one starting state per honesty assignment and successors() yields
// every enabled (label, next-state) pair. Honest users follow the protocol
// rules, including the duty rules enforced through time bounds; dishonest
// users additionally get the Cheat family of deviations (publishing revoked
// commitments, redeeming HTLC outputs they are not entitled to) but never
// forge messages, since every message is signature-checked by its receiver.
namespace lnmc
{

using Successor = std::pair<std::string, SystemState>;

namespace detail
{

// Deterministic transaction-id slots. Every logical transaction a channel
// can ever produce has a fixed id within the channel's id range, so
// interleavings that create the same transactions in a different order reach
// identical states instead of splitting on allocation order.
//
// Layout, offset from the range's low end (P = number of payments in the
// scenario, a commitment's slot block holds the commitment itself plus one
// second-stage id per potential HTLC):
//   +0                               funding transaction
//   +1 + (2*index + side)*(1+P)      commitment (owner side, update index)
//     ... +1 + rank(payment)         its per-HTLC second-stage transaction
//   after TX_SLOT_UPDATES updates per side, the claims region:
//   +0, +1                           punishment sweeps (first free slot)
//   +2 + outputIndex                 single-signer claim of a published
//                                    commitment output
//   +2 + (2+P) + rank(payment)       single-signer claim of a second-stage
//                                    output
inline constexpr int32_t TX_SLOT_UPDATES = 10;

inline int32_t
paymentRank(ModelContext const& ctx, PaymentId id)
{
    auto const& ps = ctx.scenario.payments;
    for (size_t i = 0; i < ps.size(); ++i)
    {
        if (ps[i].id == id)
        {
            return static_cast<int32_t>(i);
        }
    }
    throw std::runtime_error("unknown payment id " + std::to_string(id));
}

inline TxId
txSlot(ModelContext const& ctx, ChannelId c, int32_t offset)
{
    auto const& sc = ctx.scenario.channels[c];
    TxId id = sc.txIdLo + offset;
    if (id > sc.txIdHi)
    {
        throw std::runtime_error("transaction id range of channel '" +
                                 sc.name + "' exhausted");
    }
    return id;
}

inline TxId
fundingTxSlot(ModelContext const& ctx, ChannelId c)
{
    return txSlot(ctx, c, 0);
}

inline TxId
commitmentTxSlot(ModelContext const& ctx, ChannelId c, int32_t ownerSide,
                 int32_t index)
{
    if (index >= TX_SLOT_UPDATES)
    {
        throw std::runtime_error("commitment update count exceeds slots");
    }
    int32_t block = 1 + static_cast<int32_t>(ctx.scenario.payments.size());
    return txSlot(ctx, c, 1 + (2 * index + ownerSide) * block);
}

inline TxId
secondStageTxSlot(ModelContext const& ctx, ChannelId c, int32_t ownerSide,
                  int32_t index, PaymentId pid)
{
    return commitmentTxSlot(ctx, c, ownerSide, index) + 1 +
           paymentRank(ctx, pid);
}

inline int32_t
claimRegionOffset(ModelContext const& ctx)
{
    int32_t block = 1 + static_cast<int32_t>(ctx.scenario.payments.size());
    return 1 + 2 * TX_SLOT_UPDATES * block;
}

inline TxId
punishTxSlot(ModelContext const& ctx, ChannelId c, Ledger const& lg)
{
    TxId first = txSlot(ctx, c, claimRegionOffset(ctx));
    return lg.findTx(first) == nullptr ? first
                                       : txSlot(ctx, c,
                                                claimRegionOffset(ctx) + 1);
}

inline TxId
commitmentClaimTxSlot(ModelContext const& ctx, ChannelId c,
                      size_t outputIndex)
{
    return txSlot(ctx, c, claimRegionOffset(ctx) + 2 +
                              static_cast<int32_t>(outputIndex));
}

inline TxId
secondStageClaimTxSlot(ModelContext const& ctx, ChannelId c, PaymentId pid)
{
    int32_t p = static_cast<int32_t>(ctx.scenario.payments.size());
    return txSlot(ctx, c, claimRegionOffset(ctx) + 2 + (2 + p) +
                              paymentRank(ctx, pid));
}

inline std::string
chanUser(ModelContext const& ctx, ChannelId c, UserId u)
{
    return ctx.scenario.channels[c].name + "," + ctx.scenario.users[u].name;
}

inline void
eraseQueueMessage(ChannelState& cs, size_t idx)
{
    cs.queue.erase(cs.queue.begin() + static_cast<ptrdiff_t>(idx));
}

inline void
insertSortedById(std::vector<Htlc>& list, Htlc h)
{
    auto pos = std::partition_point(list.begin(), list.end(),
                                    [&](Htlc const& x)
                                    { return x.id < h.id; });
    list.insert(pos, std::move(h));
}

inline void
insertInvoiceMsg(SystemState& st, InvoiceMsg m)
{
    auto pos = std::lower_bound(st.invoiceMsgs.begin(), st.invoiceMsgs.end(),
                                m);
    if (pos == st.invoiceMsgs.end() || !(*pos == m))
    {
        st.invoiceMsgs.insert(pos, std::move(m));
    }
}

inline void
markLeg(UserState& u, PaymentId id, UserId sender, UserId receiver,
        LegState to)
{
    auto* leg = u.findLeg(id, sender, receiver);
    if (leg != nullptr && leg->state == LegState::NEW)
    {
        leg->state = to;
    }
}

inline Amount
availableBalance(ChannelUserVars const& v)
{
    Amount r = v.balance;
    for (auto const& h : v.outgoing)
    {
        if (h.state == HtlcState::NEW)
        {
            r -= h.amount;
        }
    }
    return r;
}

inline bool
unresolvedActive(HtlcState st)
{
    return st == HtlcState::COMMITTED || st == HtlcState::FULFILLED;
}

// Like unresolvedActive, but also covers an HTLC whose off-chain fail
// handshake ran without the removal round completing: the commitment that
// reached the chain still carries its output, so on-chain it is exactly as
// live as a committed one and its fate must still be observed and booked.
// Claim-entitlement guards stay on the narrower predicates on purpose: a
// user that already failed a payment off-chain must not also collect it.
inline bool
unresolvedOnChain(HtlcState st)
{
    return unresolvedActive(st) || st == HtlcState::OFF_TIMEDOUT;
}

// ---------------------------------------------------------------------------
// Commitment snapshot construction. Both the sender of commitment_signed and
// its receiver derive the next version of the same commitment from their own
// HTLC records; the receiver accepts the message only if the contents agree
// (transaction ids are picked by the sender and adopted as received, since
// they are what the sender actually signed).

struct SnapshotPlan
{
    CommitSnapshot snap;
    std::vector<PaymentId> addedNew;     // entered from state NEW
    std::vector<PaymentId> addedPending; // entered from state PENDING-COMMIT
    bool anyChange = false;
};

// Derives version base+1 of the commitment owned by `ownerSide`, as computed
// by `perspective` from its own records: HTLCs freshly added by either side
// join, HTLCs the perspective has seen fulfilled or timed out off-chain
// leave and settle their value. New HTLCs are only admitted while their
// timelock is still in the future; HTLCs completing their second commitment
// (state PENDING-COMMIT) always mirror over so both commitments converge.
inline SnapshotPlan
planNextSnapshot(ModelContext const& ctx, SystemState const& s, ChannelId c,
                 int32_t ownerSide, int32_t perspective)
{
    (void)ctx;
    auto const& vars = s.channels[c].side[perspective];
    bool mine = perspective == ownerSide;
    CommitSnapshot const& base =
        mine ? vars.mySnapshots.back() : vars.peerSnapshots.back();

    SnapshotPlan plan;
    plan.snap.index = base.index + 1;
    plan.snap.txId = NO_TX;
    plan.snap.balanceOwner = base.balanceOwner;
    plan.snap.balancePeer = base.balancePeer;

    for (auto const& h : base.htlcs)
    {
        Htlc const* rec = vars.findIncoming(h.id);
        if (rec == nullptr)
        {
            rec = vars.findOutgoing(h.id);
        }
        bool removed = rec != nullptr && (rec->state == HtlcState::FULFILLED ||
                                          rec->state == HtlcState::OFF_TIMEDOUT);
        if (!removed)
        {
            SnapHtlc kept = h;
            kept.secondStageTxId = NO_TX;
            plan.snap.htlcs.push_back(kept);
            continue;
        }
        plan.anyChange = true;
        if (rec->state == HtlcState::FULFILLED)
        {
            // Value settles to the receiving (non-offering) side.
            (h.offeredByOwner ? plan.snap.balancePeer
                              : plan.snap.balanceOwner) += h.amount;
        }
        else
        {
            // Timed out off-chain: refund the offerer.
            (h.offeredByOwner ? plan.snap.balanceOwner
                              : plan.snap.balancePeer) += h.amount;
        }
    }

    auto addOne = [&](Htlc const& h, bool offeredByOwner, bool fromNew)
    {
        if (base.findHtlc(h.id) != nullptr)
        {
            return;
        }
        SnapHtlc sh;
        sh.id = h.id;
        sh.amount = h.amount;
        sh.hash = h.hash;
        sh.timelock = h.timelock;
        sh.offeredByOwner = offeredByOwner;
        sh.secondStageTxId = NO_TX;
        auto pos = std::partition_point(plan.snap.htlcs.begin(),
                                        plan.snap.htlcs.end(),
                                        [&](SnapHtlc const& x)
                                        { return x.id < sh.id; });
        plan.snap.htlcs.insert(pos, sh);
        (offeredByOwner ? plan.snap.balanceOwner
                        : plan.snap.balancePeer) -= h.amount;
        (fromNew ? plan.addedNew : plan.addedPending).push_back(h.id);
        plan.anyChange = true;
    };

    // Fresh additions: offered by the side that is *not* the owner when they
    // come from the perspective's point of view as stated below.
    for (auto const& h : (mine ? vars.incoming : vars.outgoing))
    {
        if (h.state == HtlcState::NEW && h.timelock > s.now)
        {
            addOne(h, /*offeredByOwner=*/false, /*fromNew=*/true);
        }
    }
    for (auto const& h : (mine ? vars.outgoing : vars.incoming))
    {
        if (h.state == HtlcState::PENDING_COMMIT)
        {
            addOne(h, /*offeredByOwner=*/true, /*fromNew=*/false);
        }
    }
    return plan;
}

// Structural equality of two snapshot versions, ignoring transaction ids
// (the receiver adopts the sender's ids after checking everything else).
inline bool
snapshotContentEqual(CommitSnapshot const& a, CommitSnapshot const& b)
{
    if (a.index != b.index || a.balanceOwner != b.balanceOwner ||
        a.balancePeer != b.balancePeer || a.htlcs.size() != b.htlcs.size())
    {
        return false;
    }
    for (size_t i = 0; i < a.htlcs.size(); ++i)
    {
        auto const& x = a.htlcs[i];
        auto const& y = b.htlcs[i];
        if (x.id != y.id || x.amount != y.amount || x.hash != y.hash ||
            x.timelock != y.timelock || x.offeredByOwner != y.offeredByOwner)
        {
            return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// Shared effect helpers.

// Settles every HTLC that has left both commitments (and any pending
// versions) after an off-chain fulfil or fail: the removal is final, so the
// record moves to its terminal off-chain state and a failed outgoing HTLC
// refunds the off-chain balance it reserved.
inline void
finalizeRemovals(ModelContext const& ctx, SystemState& st, ChannelId c,
                 int32_t side)
{
    auto& cs = st.channels[c];
    auto& vars = cs.side[side];
    UserId me = ctx.sideUser(c, side);
    UserId peer = ctx.sideUser(c, 1 - side);
    auto& user = st.users[me];

    auto stillReferenced = [&](PaymentId id)
    {
        if (vars.mySnapshots.back().findHtlc(id) != nullptr ||
            vars.peerSnapshots.back().findHtlc(id) != nullptr)
        {
            return true;
        }
        if (vars.myPending && vars.myPending->findHtlc(id) != nullptr)
        {
            return true;
        }
        if (vars.peerPending && vars.peerPending->findHtlc(id) != nullptr)
        {
            return true;
        }
        return false;
    };

    for (auto& h : vars.incoming)
    {
        if ((h.state == HtlcState::FULFILLED ||
             h.state == HtlcState::OFF_TIMEDOUT) &&
            !stillReferenced(h.id))
        {
            if (h.state == HtlcState::FULFILLED)
            {
                h.state = HtlcState::PERSISTED;
            }
            else
            {
                h.state = HtlcState::TIMEDOUT;
                // A dishonest receiver that knows the preimage has not
                // really given the payment up: a revoked commitment that
                // still carries the output can reach the chain and be
                // collected, so its copy of the payment stays undecided
                // until it actually collects (or never does — which is
                // equally consistent). An honest receiver's fail is final
                // the moment the removal is.
                if (user.honest || user.preimages.count(h.hash) == 0)
                {
                    markLeg(user, h.id, peer, me, LegState::ABORTED);
                }
            }
        }
    }
    for (auto& h : vars.outgoing)
    {
        if ((h.state == HtlcState::FULFILLED ||
             h.state == HtlcState::OFF_TIMEDOUT) &&
            !stillReferenced(h.id))
        {
            if (h.state == HtlcState::FULFILLED)
            {
                h.state = HtlcState::PERSISTED;
            }
            else
            {
                h.state = HtlcState::TIMEDOUT;
                vars.balance += h.amount; // reservation flows back
                markLeg(user, h.id, me, peer, LegState::ABORTED);
            }
        }
    }
}

// Reconciles one side's HTLC records against the commitment that actually
// reached the ledger: present mid-handshake entries become COMMITTED (the
// output exists, on-chain resolution applies), absent ones settle to their
// terminal state as if their removal or abandonment had completed.
inline void
applyCloseMarking(ModelContext const& ctx, SystemState& st, ChannelId c,
                  int32_t side, CommitSnapshot const& published)
{
    auto& vars = st.channels[c].side[side];
    UserId me = ctx.sideUser(c, side);
    UserId peer = ctx.sideUser(c, 1 - side);
    auto& user = st.users[me];

    auto preCommitted = [](HtlcState s)
    {
        return s == HtlcState::NEW || s == HtlcState::SENT_COMMIT ||
               s == HtlcState::RECV_COMMIT || s == HtlcState::PENDING_COMMIT;
    };

    auto markOne = [&](Htlc& h, bool outgoing)
    {
        UserId sender = outgoing ? me : peer;
        UserId receiver = outgoing ? peer : me;
        bool present = published.findHtlc(h.id) != nullptr;
        if (present)
        {
            if (preCommitted(h.state))
            {
                h.state = HtlcState::COMMITTED;
            }
            return;
        }
        if (preCommitted(h.state) || h.state == HtlcState::COMMITTED)
        {
            h.state = HtlcState::ABORTED;
            markLeg(user, h.id, sender, receiver, LegState::ABORTED);
        }
        else if (h.state == HtlcState::FULFILLED)
        {
            h.state = HtlcState::PERSISTED;
        }
        else if (h.state == HtlcState::OFF_TIMEDOUT)
        {
            h.state = HtlcState::TIMEDOUT;
            if (outgoing)
            {
                vars.balance += h.amount;
            }
            markLeg(user, h.id, sender, receiver, LegState::ABORTED);
        }
    };

    for (auto& h : vars.incoming)
    {
        markOne(h, false);
    }
    for (auto& h : vars.outgoing)
    {
        markOne(h, true);
    }
}

inline KeyRing
keyRingOf(ModelContext const& ctx, SystemState const& s, UserId u)
{
    KeyRing ring;
    ring.self = u;
    for (size_t c = 0; c < s.channels.size(); ++c)
    {
        int32_t side = ctx.sideOf(static_cast<ChannelId>(c), u);
        if (side < 0)
        {
            continue;
        }
        UserId peer = ctx.sideUser(static_cast<ChannelId>(c), 1 - side);
        for (int32_t idx : s.channels[c].side[side].peerRevocations)
        {
            ring.revocationKeys.insert(
                {peer, static_cast<ChannelId>(c), idx});
        }
    }
    return ring;
}

inline bool
conditionMentionsRevocation(Condition const& cond)
{
    for (auto const& k : cond.keys)
    {
        if (k.kind == Key::Kind::REVOCATION)
        {
            return true;
        }
    }
    return false;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Initial states: one per honesty assignment. Channels are unopened, the
// ledger holds one coinbase per user, and every payment exists as NEW legs
// at both endpoints of each hop plus a pending-send entry at its origin.

inline std::vector<SystemState>
initialStates(ModelContext const& ctx)
{
    auto const& sc = ctx.scenario;
    std::vector<SystemState> result;
    for (auto const& assignment : sc.honestyAssignments())
    {
        SystemState st;
        st.now = 0;

        std::vector<std::pair<TxId, std::pair<UserId, Amount>>> coinbases;
        for (size_t u = 0; u < sc.users.size(); ++u)
        {
            coinbases.push_back({sc.genesisTxId(static_cast<UserId>(u)),
                                 {static_cast<UserId>(u),
                                  sc.users[u].initialBalance}});
        }
        st.ledger = genesisLedger(coinbases);

        st.users.resize(sc.users.size());
        for (size_t u = 0; u < sc.users.size(); ++u)
        {
            st.users[u].honest = assignment[u];
        }

        for (auto const& p : sc.payments)
        {
            for (size_t i = 0; i + 1 < p.path.size(); ++i)
            {
                PaymentLeg leg;
                leg.id = p.id;
                leg.amount = p.amount;
                leg.sender = p.path[i];
                leg.receiver = p.path[i + 1];
                leg.state = LegState::NEW;
                st.users[leg.sender].legs.push_back(leg);
                st.users[leg.receiver].legs.push_back(leg);
            }
            auto timelocks = sc.hopTimelocks(p);
            PendingSend entry;
            entry.id = p.id;
            entry.amount = p.amount;
            entry.timelock = timelocks[0];
            entry.nextHop = p.path[1];
            entry.onwardPath.assign(p.path.begin() + 2, p.path.end());
            entry.finalReceiver = p.path.back();
            st.users[p.path[0]].pendingSends.push_back(entry);
        }
        for (auto& u : st.users)
        {
            std::sort(u.legs.begin(), u.legs.end(),
                      [](PaymentLeg const& a, PaymentLeg const& b)
                      {
                          return std::tie(a.id, a.sender, a.receiver) <
                                 std::tie(b.id, b.sender, b.receiver);
                      });
            std::sort(u.pendingSends.begin(), u.pendingSends.end(),
                      [](PendingSend const& a, PendingSend const& b)
                      { return a.id < b.id; });
        }

        st.channels.resize(sc.channels.size());
        result.push_back(std::move(st));
    }
    return result;
}

// ---------------------------------------------------------------------------
// Successor generation.

inline std::vector<Successor>
successors(ModelContext const& ctx, SystemState const& s,
           TimeOptions const& topt)
{
    using namespace detail;
    std::vector<Successor> out;
    auto const& sc = ctx.scenario;
    TimePoint grace = sc.constants.grace;
    TimePoint delta = sc.constants.cltvDelta;
    auto emit = [&](std::string label, SystemState st)
    { out.emplace_back(std::move(label), std::move(st)); };

    // ---- invoice handling (off-band message pool) -------------------------
    for (size_t ui = 0; ui < s.users.size(); ++ui)
    {
        UserId u = static_cast<UserId>(ui);
        auto const& user = s.users[ui];
        for (auto const& e : user.pendingSends)
        {
            if (!e.haveHash && !e.invoiceRequested)
            {
                SystemState n = s;
                n.users[ui].findPendingSend(e.id)->invoiceRequested = true;
                InvoiceMsg m;
                m.kind = InvoiceMsg::Kind::REQUEST;
                m.from = u;
                m.to = e.finalReceiver;
                m.payment = e.id;
                insertInvoiceMsg(n, m);
                emit("RequestInvoice(" + sc.users[ui].name +
                         ",p=" + std::to_string(e.id) + ")",
                     std::move(n));
            }
        }
    }
    for (size_t mi = 0; mi < s.invoiceMsgs.size(); ++mi)
    {
        auto const& m = s.invoiceMsgs[mi];
        if (m.to < 0 || static_cast<size_t>(m.to) >= s.users.size())
        {
            continue;
        }
        std::string uname = sc.users[m.to].name;
        if (m.kind == InvoiceMsg::Kind::REQUEST)
        {
            HashVal pre = sc.preimageFor(m.payment);
            if (s.users[m.to].preimages.count(pre) == 0)
            {
                SystemState n = s;
                n.invoiceMsgs.erase(n.invoiceMsgs.begin() +
                                    static_cast<ptrdiff_t>(mi));
                auto& me = n.users[m.to];
                me.preimages.insert(pre);
                HashVal secret = sc.secretFor(m.payment);
                auto pos = std::lower_bound(
                    me.secretsIssued.begin(), me.secretsIssued.end(),
                    std::make_pair(pre, secret));
                me.secretsIssued.insert(pos, {pre, secret});
                InvoiceMsg reply;
                reply.kind = InvoiceMsg::Kind::PAYMENT_HASH;
                reply.from = m.to;
                reply.to = m.from;
                reply.payment = m.payment;
                reply.hash = pre;
                reply.secret = secret;
                insertInvoiceMsg(n, reply);
                emit("GenerateAndSendPaymentHash(" + uname +
                         ",p=" + std::to_string(m.payment) + ")",
                     std::move(n));
            }
            {
                SystemState n = s;
                n.invoiceMsgs.erase(n.invoiceMsgs.begin() +
                                    static_cast<ptrdiff_t>(mi));
                emit("IgnoreInvoiceRequest(" + uname +
                         ",p=" + std::to_string(m.payment) + ")",
                     std::move(n));
            }
        }
        else // PAYMENT_HASH
        {
            auto const* entry = [&]() -> PendingSend const*
            {
                for (auto const& e : s.users[m.to].pendingSends)
                {
                    if (e.id == m.payment)
                    {
                        return &e;
                    }
                }
                return nullptr;
            }();
            if (entry != nullptr && !entry->haveHash)
            {
                SystemState n = s;
                n.invoiceMsgs.erase(n.invoiceMsgs.begin() +
                                    static_cast<ptrdiff_t>(mi));
                auto* e = n.users[m.to].findPendingSend(m.payment);
                e->hash = m.hash;
                e->secret = m.secret;
                e->haveHash = true;
                emit("ReceivePaymentHash(" + uname +
                         ",p=" + std::to_string(m.payment) + ")",
                     std::move(n));
            }
        }
    }

    // ---- per-channel protocol actions --------------------------------------
    for (size_t ci = 0; ci < s.channels.size(); ++ci)
    {
        ChannelId c = static_cast<ChannelId>(ci);
        auto const& cs = s.channels[ci];
        auto const& chanDef = sc.channels[ci];
        int32_t funderSide = ctx.sideOf(c, chanDef.funder);

        for (int32_t side = 0; side < 2; ++side)
        {
            UserId me = ctx.sideUser(c, side);
            UserId peer = ctx.sideUser(c, 1 - side);
            auto const& vars = cs.side[side];
            std::string cu = chanUser(ctx, c, me);
            bool honest = s.users[me].honest;
            auto firstMsg = cs.firstMessageFor(side);

            // -- channel opening handshake --
            if (vars.state == ChanState::INIT && side == funderSide)
            {
                SystemState n = s;
                auto& ncs = n.channels[ci];
                ncs.side[side].state = ChanState::OPEN_SENT_OPEN_CHANNEL;
                ChannelMessage m;
                m.type = MsgType::OPEN_CHANNEL;
                m.senderSide = side;
                ncs.queue.push_back(m);
                emit("SendOpenChannel(" + cu + ")", std::move(n));
            }
            if (vars.state == ChanState::INIT && side != funderSide &&
                firstMsg &&
                cs.queue[*firstMsg].type == MsgType::OPEN_CHANNEL)
            {
                SystemState n = s;
                auto& ncs = n.channels[ci];
                eraseQueueMessage(ncs, *firstMsg);
                ncs.side[side].state = ChanState::OPEN_SENT_ACCEPT;
                ChannelMessage m;
                m.type = MsgType::ACCEPT_CHANNEL;
                m.senderSide = side;
                ncs.queue.push_back(m);
                emit("SendAcceptChannel(" + cu + ")", std::move(n));
            }
            if (vars.state == ChanState::OPEN_SENT_OPEN_CHANNEL && firstMsg &&
                cs.queue[*firstMsg].type == MsgType::ACCEPT_CHANNEL)
            {
                // The funder locks the funding transaction id and signs
                // version 0 of the fundee's commitment: all value to the
                // funder-side, i.e. balanceOwner (the fundee) zero.
                SystemState n = s;
                auto& ncs = n.channels[ci];
                eraseQueueMessage(ncs, *firstMsg);
                ncs.fundingTxId = fundingTxSlot(ctx, c);
                CommitSnapshot v0;
                v0.index = 0;
                v0.txId = commitmentTxSlot(ctx, c, 1 - side, 0);
                v0.balanceOwner = 0;
                v0.balancePeer = chanDef.capacity;
                auto& my = ncs.side[side];
                my.peerSnapshots = {v0};
                my.balance = chanDef.capacity;
                my.state = ChanState::OPEN_SENT_FIRST_COMMIT;
                ChannelMessage m;
                m.type = MsgType::FUNDING_CREATED;
                m.senderSide = side;
                m.snapshot = v0;
                ncs.queue.push_back(m);
                emit("SendSignedFirstCommitTransaction(" + cu + ")",
                     std::move(n));
            }
            if (vars.state == ChanState::OPEN_SENT_ACCEPT && firstMsg &&
                cs.queue[*firstMsg].type == MsgType::FUNDING_CREATED)
            {
                auto const& m = cs.queue[*firstMsg];
                bool wellFormed = m.snapshot && m.snapshot->index == 0 &&
                                  m.snapshot->balanceOwner == 0 &&
                                  m.snapshot->balancePeer ==
                                      chanDef.capacity &&
                                  m.snapshot->htlcs.empty();
                if (wellFormed)
                {
                    SystemState n = s;
                    auto& ncs = n.channels[ci];
                    ChannelMessage msg = ncs.queue[*firstMsg];
                    eraseQueueMessage(ncs, *firstMsg);
                    auto& my = ncs.side[side];
                    my.mySnapshots = {*msg.snapshot};
                    my.balance = 0;
                    CommitSnapshot funderV0;
                    funderV0.index = 0;
                    funderV0.txId = commitmentTxSlot(ctx, c, 1 - side, 0);
                    funderV0.balanceOwner = chanDef.capacity;
                    funderV0.balancePeer = 0;
                    my.peerSnapshots = {funderV0};
                    my.state = ChanState::OPEN_SENT_FUNDING_SIGNED;
                    ChannelMessage reply;
                    reply.type = MsgType::FUNDING_SIGNED;
                    reply.senderSide = side;
                    reply.snapshot = funderV0;
                    ncs.queue.push_back(reply);
                    emit("SendFundingSigned(" + cu + ")", std::move(n));
                }
            }
            if (vars.state == ChanState::OPEN_SENT_FIRST_COMMIT && firstMsg &&
                cs.queue[*firstMsg].type == MsgType::FUNDING_SIGNED)
            {
                auto const& m = cs.queue[*firstMsg];
                bool wellFormed = m.snapshot && m.snapshot->index == 0 &&
                                  m.snapshot->balanceOwner ==
                                      chanDef.capacity &&
                                  m.snapshot->balancePeer == 0 &&
                                  m.snapshot->htlcs.empty();
                auto funding = buildFundingTx(ctx, c, s.ledger);
                if (wellFormed && funding &&
                    validateTransaction(s.ledger, *funding, s.now,
                                        ctx.rules) == TxError::OK)
                {
                    SystemState n = s;
                    auto& ncs = n.channels[ci];
                    ChannelMessage msg = ncs.queue[*firstMsg];
                    eraseQueueMessage(ncs, *firstMsg);
                    auto& my = ncs.side[side];
                    my.mySnapshots = {*msg.snapshot};
                    publishTransaction(n.ledger, *funding, n.now, ctx.rules);
                    my.stake += chanDef.capacity;
                    my.state = ChanState::OPEN_FUNDING_PUB;
                    emit("PublishFundingTransaction(" + cu + ")",
                         std::move(n));
                }
            }
            // The update dance progresses only while the channel is alive
            // on-chain. A spent funding output ends it for both sides at
            // once, even for a side that has not noticed the close yet:
            // no further off-chain commitment can be enforced, so crediting
            // balances or releasing preimages against one would record
            // entitlements that no longer have on-chain backing. Reading
            // the chain here is sound because a confirmed close is public.
            bool fundingOnLedger = cs.fundingTxId != NO_TX &&
                                   s.ledger.findTx(cs.fundingTxId) != nullptr;
            bool fundingUnspent =
                fundingOnLedger && !s.ledger.isSpent({cs.fundingTxId, 0});
            {
                bool canSendReady =
                    vars.state == ChanState::OPEN_FUNDING_PUB ||
                    (vars.state == ChanState::OPEN_SENT_FUNDING_SIGNED &&
                     fundingOnLedger) ||
                    vars.state == ChanState::OPEN_NEW_KEY_RECEIVED;
                if (canSendReady && fundingUnspent)
                {
                    SystemState n = s;
                    auto& ncs = n.channels[ci];
                    auto& my = ncs.side[side];
                    my.state = vars.state == ChanState::OPEN_NEW_KEY_RECEIVED
                                   ? ChanState::REV_KEYS_EXCHANGED
                                   : ChanState::OPEN_NEW_KEY_SENT;
                    ChannelMessage m;
                    m.type = MsgType::CHANNEL_READY;
                    m.senderSide = side;
                    ncs.queue.push_back(m);
                    emit("SendNewRevocationKey(" + cu + ")", std::move(n));
                }
            }
            if (firstMsg && fundingUnspent &&
                cs.queue[*firstMsg].type == MsgType::CHANNEL_READY &&
                (vars.state == ChanState::OPEN_FUNDING_PUB ||
                 vars.state == ChanState::OPEN_SENT_FUNDING_SIGNED ||
                 vars.state == ChanState::OPEN_NEW_KEY_SENT))
            {
                SystemState n = s;
                auto& ncs = n.channels[ci];
                eraseQueueMessage(ncs, *firstMsg);
                auto& my = ncs.side[side];
                my.state = vars.state == ChanState::OPEN_NEW_KEY_SENT
                               ? ChanState::REV_KEYS_EXCHANGED
                               : ChanState::OPEN_NEW_KEY_RECEIVED;
                emit("ReceiveNewRevocationKey(" + cu + ")", std::move(n));
            }

            bool open =
                vars.state == ChanState::REV_KEYS_EXCHANGED && fundingUnspent;

            // -- commitment update round --
            if (open && !vars.peerPending)
            {
                auto plan = planNextSnapshot(ctx, s, c, 1 - side, side);
                if (plan.anyChange)
                {
                    SystemState n = s;
                    auto& ncs = n.channels[ci];
                    auto& my = ncs.side[side];
                    plan.snap.txId =
                        commitmentTxSlot(ctx, c, 1 - side, plan.snap.index);
                    for (auto& sh : plan.snap.htlcs)
                    {
                        sh.secondStageTxId = secondStageTxSlot(
                            ctx, c, 1 - side, plan.snap.index, sh.id);
                    }
                    for (PaymentId id : plan.addedNew)
                    {
                        auto* h = my.findHtlc(my.outgoing, id);
                        h->state = HtlcState::SENT_COMMIT;
                        my.balance -= h->amount;
                    }
                    for (PaymentId id : plan.addedPending)
                    {
                        my.findHtlc(my.incoming, id)->state =
                            HtlcState::SENT_COMMIT;
                    }
                    my.peerPending = plan.snap;
                    ChannelMessage m;
                    m.type = MsgType::COMMITMENT_SIGNED;
                    m.senderSide = side;
                    m.snapshot = plan.snap;
                    ncs.queue.push_back(m);
                    emit("SendSignedCommitment(" + cu + ")", std::move(n));
                }
            }
            if (open && !vars.myPending && firstMsg &&
                cs.queue[*firstMsg].type == MsgType::COMMITMENT_SIGNED)
            {
                auto const& m = cs.queue[*firstMsg];
                auto plan = planNextSnapshot(ctx, s, c, side, side);
                if (m.snapshot && snapshotContentEqual(plan.snap, *m.snapshot))
                {
                    SystemState n = s;
                    auto& ncs = n.channels[ci];
                    ChannelMessage msg = ncs.queue[*firstMsg];
                    eraseQueueMessage(ncs, *firstMsg);
                    auto& my = ncs.side[side];
                    my.myPending = *msg.snapshot;
                    for (PaymentId id : plan.addedNew)
                    {
                        my.findHtlc(my.incoming, id)->state =
                            HtlcState::RECV_COMMIT;
                    }
                    for (PaymentId id : plan.addedPending)
                    {
                        my.findHtlc(my.outgoing, id)->state =
                            HtlcState::RECV_COMMIT;
                    }
                    emit("ReceiveSignedCommitment(" + cu + ")", std::move(n));
                }
            }
            if (open && vars.myPending)
            {
                SystemState n = s;
                auto& ncs = n.channels[ci];
                auto& my = ncs.side[side];
                int32_t revealed = my.mySnapshots.back().index;
                my.mySnapshots.push_back(*my.myPending);
                my.myPending.reset();
                for (auto& h : my.incoming)
                {
                    if (h.state == HtlcState::RECV_COMMIT)
                    {
                        h.state = HtlcState::PENDING_COMMIT;
                    }
                }
                for (auto& h : my.outgoing)
                {
                    if (h.state == HtlcState::RECV_COMMIT)
                    {
                        h.state = HtlcState::COMMITTED;
                    }
                }
                finalizeRemovals(ctx, n, c, side);
                ChannelMessage m;
                m.type = MsgType::REVOKE_AND_ACK;
                m.senderSide = side;
                m.revokedIndex = revealed;
                ncs.queue.push_back(m);
                emit("SendRevocationKey(" + cu + ")", std::move(n));
            }
            if (firstMsg &&
                cs.queue[*firstMsg].type == MsgType::REVOKE_AND_ACK &&
                (open || vars.state == ChanState::CLOSING))
            {
                bool rotates = open && vars.peerPending.has_value();
                if (rotates || vars.state == ChanState::CLOSING)
                {
                    SystemState n = s;
                    auto& ncs = n.channels[ci];
                    ChannelMessage msg = ncs.queue[*firstMsg];
                    eraseQueueMessage(ncs, *firstMsg);
                    auto& my = ncs.side[side];
                    auto pos = std::lower_bound(my.peerRevocations.begin(),
                                                my.peerRevocations.end(),
                                                msg.revokedIndex);
                    if (pos == my.peerRevocations.end() ||
                        *pos != msg.revokedIndex)
                    {
                        my.peerRevocations.insert(pos, msg.revokedIndex);
                    }
                    if (rotates)
                    {
                        my.peerSnapshots.push_back(*my.peerPending);
                        my.peerPending.reset();
                        for (auto& h : my.outgoing)
                        {
                            if (h.state == HtlcState::SENT_COMMIT)
                            {
                                h.state = HtlcState::PENDING_COMMIT;
                            }
                        }
                        for (auto& h : my.incoming)
                        {
                            if (h.state == HtlcState::SENT_COMMIT &&
                                h.timelock > s.now)
                            {
                                h.state = HtlcState::COMMITTED;
                            }
                        }
                        finalizeRemovals(ctx, n, c, side);
                    }
                    emit("ReceiveRevocationKey(" + cu + ")", std::move(n));
                }
            }

            // -- HTLC lifecycle messages --
            if (open && firstMsg &&
                cs.queue[*firstMsg].type == MsgType::UPDATE_ADD_HTLC)
            {
                Htlc h = cs.queue[*firstMsg].htlc;
                bool accept = vars.findIncoming(h.id) == nullptr;
                if (accept && h.onwardPath.empty())
                {
                    auto const* leg =
                        findLegConst(s.users[me], h.id, peer, me);
                    accept = leg != nullptr && leg->amount == h.amount &&
                             h.secret == sc.secretFor(h.id) &&
                             s.users[me].preimages.count(
                                 sc.preimageFor(h.id)) != 0;
                }
                else if (accept)
                {
                    accept = s.users[me].findPendingSend(h.id) == nullptr;
                }
                if (accept)
                {
                    SystemState n = s;
                    auto& ncs = n.channels[ci];
                    eraseQueueMessage(ncs, *firstMsg);
                    auto& my = ncs.side[side];
                    h.state = HtlcState::NEW;
                    insertSortedById(my.incoming, h);
                    if (!h.onwardPath.empty())
                    {
                        PendingSend e;
                        e.id = h.id;
                        e.amount = h.amount;
                        e.timelock = h.timelock - delta;
                        e.nextHop = h.onwardPath[0];
                        e.onwardPath.assign(h.onwardPath.begin() + 1,
                                            h.onwardPath.end());
                        e.finalReceiver = h.onwardPath.back();
                        e.haveHash = true;
                        e.invoiceRequested = true;
                        e.hash = h.hash;
                        e.secret = h.secret;
                        auto& sends = n.users[me].pendingSends;
                        auto pos = std::partition_point(
                            sends.begin(), sends.end(),
                            [&](PendingSend const& x)
                            { return x.id < e.id; });
                        sends.insert(pos, e);
                    }
                    emit("ReceiveUpdateAddHTLC(" + cu +
                             ",p=" + std::to_string(h.id) + ")",
                         std::move(n));
                }
            }
            if (open)
            {
                for (auto const& h : vars.incoming)
                {
                    if (h.state != HtlcState::COMMITTED)
                    {
                        continue;
                    }
                    bool knows = s.users[me].preimages.count(h.hash) != 0;
                    if (knows && s.now < h.timelock + grace)
                    {
                        SystemState n = s;
                        auto& my = n.channels[ci].side[side];
                        auto* nh = my.findHtlc(my.incoming, h.id);
                        nh->state = HtlcState::FULFILLED;
                        my.balance += h.amount;
                        my.stake += h.amount;
                        markLeg(n.users[me], h.id, peer, me,
                                LegState::PROCESSED);
                        if (s.now >= h.timelock)
                        {
                            auto pos = std::lower_bound(
                                my.fulfilledAfterTimeout.begin(),
                                my.fulfilledAfterTimeout.end(), h.hash);
                            if (pos == my.fulfilledAfterTimeout.end() ||
                                *pos != h.hash)
                            {
                                my.fulfilledAfterTimeout.insert(pos, h.hash);
                            }
                        }
                        ChannelMessage m;
                        m.type = MsgType::UPDATE_FULFILL_HTLC;
                        m.senderSide = side;
                        m.payment = h.id;
                        m.preimage = h.hash;
                        n.channels[ci].queue.push_back(m);
                        emit("SendHTLCPreimage(" + cu +
                                 ",p=" + std::to_string(h.id) + ")",
                             std::move(n));
                    }
                    // An honest intermediary reports failure upstream only
                    // once its forwarded copy of the payment is conclusively
                    // dead: a downstream HTLC that is merely in flight could
                    // still be collected by preimage, and failing upstream
                    // now would leave this hop paying out of pocket. A
                    // dishonest user is free to self-harm this way.
                    bool downstreamLive = false;
                    for (size_t cj = 0; cj < s.channels.size(); ++cj)
                    {
                        if (cj == static_cast<size_t>(ci))
                        {
                            continue;
                        }
                        int32_t sj =
                            ctx.sideOf(static_cast<ChannelId>(cj), me);
                        if (sj < 0)
                        {
                            continue;
                        }
                        auto const* fwd =
                            s.channels[cj].side[sj].findOutgoing(h.id);
                        if (fwd != nullptr &&
                            fwd->state != HtlcState::TIMEDOUT &&
                            fwd->state != HtlcState::ABORTED)
                        {
                            downstreamLive = true;
                        }
                    }
                    if (h.timelock <= s.now && (!honest || !downstreamLive))
                    {
                        SystemState n = s;
                        auto& my = n.channels[ci].side[side];
                        my.findHtlc(my.incoming, h.id)->state =
                            HtlcState::OFF_TIMEDOUT;
                        ChannelMessage m;
                        m.type = MsgType::UPDATE_FAIL_HTLC;
                        m.senderSide = side;
                        m.payment = h.id;
                        n.channels[ci].queue.push_back(m);
                        emit("SendHTLCFail(" + cu +
                                 ",p=" + std::to_string(h.id) + ")",
                             std::move(n));
                    }
                }
            }
            if (open && firstMsg &&
                cs.queue[*firstMsg].type == MsgType::UPDATE_FULFILL_HTLC)
            {
                auto const& m = cs.queue[*firstMsg];
                auto const* h = vars.findOutgoing(m.payment);
                if (h != nullptr && h->state == HtlcState::COMMITTED)
                {
                    bool late = s.now > h->timelock + grace;
                    SystemState n = s;
                    auto& ncs = n.channels[ci];
                    ChannelMessage msg = ncs.queue[*firstMsg];
                    eraseQueueMessage(ncs, *firstMsg);
                    auto& my = ncs.side[side];
                    n.users[me].preimages.insert(msg.preimage);
                    if (late)
                    {
                        // Too late to honor off-chain: remember the preimage
                        // but leave the HTLC to its timeout resolution.
                        n.users[me].latePreimages.insert(msg.preimage);
                        emit("ReceiveHTLCPreimage(" + cu +
                                 ",p=" + std::to_string(msg.payment) +
                                 ",late)",
                             std::move(n));
                    }
                    else
                    {
                        auto* nh = my.findHtlc(my.outgoing, msg.payment);
                        nh->state = HtlcState::FULFILLED;
                        my.stake -= std::min(my.stake, nh->amount);
                        markLeg(n.users[me], msg.payment, me, peer,
                                LegState::PROCESSED);
                        emit("ReceiveHTLCPreimage(" + cu +
                                 ",p=" + std::to_string(msg.payment) + ")",
                             std::move(n));
                    }
                }
            }
            if (open && firstMsg &&
                cs.queue[*firstMsg].type == MsgType::UPDATE_FAIL_HTLC)
            {
                auto const& m = cs.queue[*firstMsg];
                auto const* h = vars.findOutgoing(m.payment);
                if (h != nullptr && h->state == HtlcState::COMMITTED)
                {
                    SystemState n = s;
                    auto& ncs = n.channels[ci];
                    PaymentId pid = m.payment;
                    eraseQueueMessage(ncs, *firstMsg);
                    auto& my = ncs.side[side];
                    my.findHtlc(my.outgoing, pid)->state =
                        HtlcState::OFF_TIMEDOUT;
                    emit("ReceiveHTLCFail(" + cu +
                             ",p=" + std::to_string(pid) + ")",
                         std::move(n));
                }
            }

            // -- unilateral close --
            if (fundingUnspent && vars.state != ChanState::CLOSING &&
                !vars.mySnapshots.empty())
            {
                std::vector<CommitSnapshot const*> candidates;
                candidates.push_back(&vars.mySnapshots.back());
                if (vars.myPending)
                {
                    bool risky = false;
                    for (auto const& sh : vars.myPending->htlcs)
                    {
                        auto const* rec = vars.findIncoming(sh.id);
                        risky = risky ||
                                (rec != nullptr &&
                                 rec->state == HtlcState::RECV_COMMIT &&
                                 rec->timelock <= s.now);
                    }
                    if (!risky)
                    {
                        candidates.push_back(&*vars.myPending);
                    }
                }
                for (auto const* cand : candidates)
                {
                    SystemState n = s;
                    auto& ncs = n.channels[ci];
                    Transaction tx =
                        buildCommitmentTx(ctx, c, side, ncs, *cand);
                    if (validateTransaction(n.ledger, tx, n.now, ctx.rules) !=
                        TxError::OK)
                    {
                        continue;
                    }
                    publishTransaction(n.ledger, tx, n.now, ctx.rules);
                    auto& my = ncs.side[side];
                    my.state = ChanState::CLOSING;
                    applyCloseMarking(ctx, n, c, side, *cand);
                    auto& other = ncs.side[1 - side];
                    other.stake -= std::min(other.stake, cand->balancePeer);
                    emit("CloseChannel(" + cu +
                             ",tx=" + std::to_string(cand->txId) + ")",
                         std::move(n));
                }
            }

            // -- dishonest: publish a revoked own commitment --
            if (!honest && fundingUnspent && vars.mySnapshots.size() > 1)
            {
                for (size_t k = 0; k + 1 < vars.mySnapshots.size(); ++k)
                {
                    auto const& cand = vars.mySnapshots[k];
                    SystemState n = s;
                    auto& ncs = n.channels[ci];
                    Transaction tx =
                        buildCommitmentTx(ctx, c, side, ncs, cand);
                    if (validateTransaction(n.ledger, tx, n.now, ctx.rules) !=
                        TxError::OK)
                    {
                        continue;
                    }
                    publishTransaction(n.ledger, tx, n.now, ctx.rules);
                    auto& my = ncs.side[side];
                    my.state = ChanState::CLOSING;
                    applyCloseMarking(ctx, n, c, side, cand);
                    auto& other = ncs.side[1 - side];
                    other.stake -= std::min(other.stake, cand.balancePeer);
                    ncs.punishableAtPublication =
                        std::binary_search(other.peerRevocations.begin(),
                                           other.peerRevocations.end(),
                                           cand.index);
                    emit("Cheat(" + cu + ",tx=" + std::to_string(cand.txId) +
                             ")",
                         std::move(n));
                }
            }

            // -- noticing the peer's close --
            auto pc = publishedCommitment(ctx, s, c);
            if (pc && pc->ownerSide != side &&
                vars.state != ChanState::CLOSING)
            {
                bool revoked = std::binary_search(vars.peerRevocations.begin(),
                                                  vars.peerRevocations.end(),
                                                  pc->snap.index);
                SystemState n = s;
                n.channels[ci].side[side].state = ChanState::CLOSING;
                applyCloseMarking(ctx, n, c, side, pc->snap);
                emit((revoked ? "NoteThatOtherPartyCheated("
                              : "NoteThatOtherPartyClosedHonestly(") +
                         cu + ")",
                     std::move(n));
            }

            // -- punishment of a revoked published commitment --
            if (pc && pc->ownerSide != side &&
                std::binary_search(vars.peerRevocations.begin(),
                                   vars.peerRevocations.end(),
                                   pc->snap.index))
            {
                // Sweep every still-unspent output (of the commitment and of
                // any published second-stage transactions) that carries a
                // revocation condition we can satisfy, in one transaction.
                struct Target
                {
                    OutputRef ref;
                    Amount value = 0;
                    Key revKey;
                    PaymentId payment = 0; // 0 = plain balance output
                };
                std::vector<Target> targets;
                auto scanTx = [&](TxId id, PaymentId payment)
                {
                    auto const* tx = s.ledger.findTx(id);
                    if (tx == nullptr)
                    {
                        return;
                    }
                    for (size_t i = 0; i < tx->outputs.size(); ++i)
                    {
                        OutputRef ref{id, static_cast<int32_t>(i)};
                        if (s.ledger.isSpent(ref))
                        {
                            continue;
                        }
                        for (auto const& cond : tx->outputs[i].conditions)
                        {
                            auto revKey = [&]() -> std::optional<Key>
                            {
                                for (auto const& k : cond.keys)
                                {
                                    if (k.kind == Key::Kind::REVOCATION &&
                                        k.owner == peer && k.channel == c &&
                                        std::binary_search(
                                            vars.peerRevocations.begin(),
                                            vars.peerRevocations.end(),
                                            k.index))
                                    {
                                        return k;
                                    }
                                }
                                return std::nullopt;
                            }();
                            if (revKey)
                            {
                                PaymentId pid = payment;
                                if (id == pc->txId)
                                {
                                    for (auto const& sh : pc->snap.htlcs)
                                    {
                                        if (commitmentHtlcOutputIndex(
                                                pc->snap, sh.id) == ref.index)
                                        {
                                            pid = sh.id;
                                        }
                                    }
                                }
                                targets.push_back({ref,
                                                   tx->outputs[i].value,
                                                   *revKey, pid});
                                break;
                            }
                        }
                    }
                };
                scanTx(pc->txId, 0);
                for (auto const& sh : pc->snap.htlcs)
                {
                    scanTx(sh.secondStageTxId, sh.id);
                }
                if (!targets.empty())
                {
                    SystemState n = s;
                    auto& ncs = n.channels[ci];
                    Transaction tx;
                    tx.id = punishTxSlot(ctx, c, n.ledger);
                    tx.absLocktime = 0;
                    Amount total = 0;
                    for (auto const& t : targets)
                    {
                        Input in;
                        in.prev = t.ref;
                        in.witness.keys = {t.revKey, userKey(me)};
                        std::sort(in.witness.keys.begin(),
                                  in.witness.keys.end());
                        tx.inputs.push_back(in);
                        total += t.value;
                    }
                    Output o;
                    o.value = total;
                    o.conditions.push_back(
                        Condition{Condition::Kind::SINGLE_SIGNATURE,
                                  {userKey(me)}, 0, 0, 0});
                    tx.outputs.push_back(o);
                    if (validateTransaction(n.ledger, tx, n.now, ctx.rules) ==
                        TxError::OK)
                    {
                        publishTransaction(n.ledger, tx, n.now, ctx.rules);
                        auto& my = ncs.side[side];
                        if (my.state != ChanState::CLOSING)
                        {
                            my.state = ChanState::CLOSING;
                            applyCloseMarking(ctx, n, c, side, pc->snap);
                        }
                        Amount credit = 0;
                        for (auto const& t : targets)
                        {
                            if (t.payment == 0)
                            {
                                continue;
                            }
                            auto* in = my.findHtlc(my.incoming, t.payment);
                            auto* ou = my.findHtlc(my.outgoing, t.payment);
                            if (in != nullptr &&
                                unresolvedOnChain(in->state))
                            {
                                // A payment I already failed off-chain stays
                                // failed: sweeping its output is punishment
                                // revenue, not a completed payment.
                                if (n.users[me].preimages.count(in->hash) !=
                                        0 &&
                                    in->state != HtlcState::OFF_TIMEDOUT)
                                {
                                    if (in->state == HtlcState::COMMITTED)
                                    {
                                        credit += in->amount;
                                    }
                                    in->state = HtlcState::PERSISTED;
                                    markLeg(n.users[me], t.payment, peer, me,
                                            LegState::PROCESSED);
                                }
                                else
                                {
                                    in->state = HtlcState::TIMEDOUT;
                                    markLeg(n.users[me], t.payment, peer, me,
                                            LegState::ABORTED);
                                }
                            }
                            if (ou != nullptr &&
                                unresolvedOnChain(ou->state))
                            {
                                ou->state = HtlcState::TIMEDOUT;
                                markLeg(n.users[me], t.payment, me, peer,
                                        LegState::ABORTED);
                            }
                        }
                        my.stake = std::max<Amount>(
                            my.stake + credit - total, 0);
                        emit("Punish(" + cu +
                                 ",tx=" + std::to_string(pc->txId) + ")",
                             std::move(n));
                    }
                }
            }

            // -- second-stage HTLC transactions on my own published
            //    commitment (two-stage mode only) --
            if (pc && pc->ownerSide == side && ctx.rules.twoStageHtlc)
            {
                for (auto const& sh : pc->snap.htlcs)
                {
                    OutputRef ref{pc->txId,
                                  commitmentHtlcOutputIndex(pc->snap, sh.id)};
                    if (s.ledger.isSpent(ref))
                    {
                        continue;
                    }
                    bool knows = s.users[me].preimages.count(sh.hash) != 0;
                    std::string pidArg = ",p=" + std::to_string(sh.id);
                    if (!sh.offeredByOwner)
                    {
                        // My incoming HTLC: the success path needs the
                        // preimage and a record whose output is still live
                        // in the published commitment (an uncommitted
                        // off-chain fail does not forfeit the claim).
                        auto const* rec = vars.findIncoming(sh.id);
                        bool activeRec =
                            rec != nullptr && unresolvedOnChain(rec->state);
                        if (knows && activeRec)
                        {
                            Transaction tx = buildSecondStageTx(
                                ctx, c, side, pc->snap, sh, true, sh.hash);
                            if (validateTransaction(s.ledger, tx, s.now,
                                                    ctx.rules) == TxError::OK)
                            {
                                SystemState n = s;
                                publishTransaction(n.ledger, tx, n.now,
                                                   ctx.rules);
                                auto& my = n.channels[ci].side[side];
                                auto* nh = my.findHtlc(my.incoming, sh.id);
                                if (nh->state == HtlcState::COMMITTED ||
                                    nh->state == HtlcState::OFF_TIMEDOUT)
                                {
                                    my.stake += sh.amount;
                                }
                                nh->state = HtlcState::PERSISTED;
                                markLeg(n.users[me], sh.id, peer, me,
                                        LegState::PROCESSED);
                                emit("RedeemHTLCAfterClose(" + cu + pidArg +
                                         ")",
                                     std::move(n));
                            }
                        }
                        else if (!honest && knows)
                        {
                            // Cheat: collect with the preimage although my
                            // own record already settled off-chain.
                            Transaction tx = buildSecondStageTx(
                                ctx, c, side, pc->snap, sh, true,
                                std::optional<HashVal>(sh.hash));
                            if (validateTransaction(s.ledger, tx, s.now,
                                                    ctx.rules) == TxError::OK)
                            {
                                SystemState n = s;
                                publishTransaction(n.ledger, tx, n.now,
                                                   ctx.rules);
                                // Publishing the success transaction with
                                // the preimage collects the payment in fact,
                                // even though the record never reached a
                                // committed state.
                                markLeg(n.users[me], sh.id, peer, me,
                                        LegState::PROCESSED);
                                emit("Cheat(" + cu + pidArg + ",success)",
                                     std::move(n));
                            }
                        }
                        if (!honest)
                        {
                            // Cheat: publish the pre-signed success
                            // transaction with the preimage left out of the
                            // witness. The hash clause then fails, so the
                            // transaction only validates where a broken
                            // locktime check lets it ride the counterparty's
                            // timeout clause once the deadline has passed.
                            // The output is taken without the preimage ever
                            // appearing on chain, so the payment stays dead:
                            // plain theft of the refund.
                            Transaction tx = buildSecondStageTx(
                                ctx, c, side, pc->snap, sh, true,
                                std::nullopt);
                            if (validateTransaction(s.ledger, tx, s.now,
                                                    ctx.rules) == TxError::OK)
                            {
                                SystemState n = s;
                                publishTransaction(n.ledger, tx, n.now,
                                                   ctx.rules);
                                auto& my = n.channels[ci].side[side];
                                auto* nh = my.findHtlc(my.incoming, sh.id);
                                if (nh != nullptr &&
                                    unresolvedOnChain(nh->state))
                                {
                                    nh->state = HtlcState::TIMEDOUT;
                                    markLeg(n.users[me], sh.id, peer, me,
                                            LegState::ABORTED);
                                }
                                emit("Cheat(" + cu + pidArg +
                                         ",success-nopreimage)",
                                     std::move(n));
                            }
                        }
                    }
                    else
                    {
                        // My outgoing HTLC: the timeout path is honest only
                        // without the preimage and with a record whose value
                        // is still locked in the published commitment. That
                        // includes a payment failed off-chain whose removal
                        // round never completed: reclaiming it merely
                        // realizes the refund the fail already promised.
                        auto const* rec = vars.findOutgoing(sh.id);
                        bool activeRec =
                            rec != nullptr &&
                            (rec->state == HtlcState::COMMITTED ||
                             rec->state == HtlcState::OFF_TIMEDOUT);
                        Transaction tx = buildSecondStageTx(
                            ctx, c, side, pc->snap, sh, false, std::nullopt);
                        if (validateTransaction(s.ledger, tx, s.now,
                                                ctx.rules) != TxError::OK)
                        {
                            continue;
                        }
                        if (!knows && activeRec)
                        {
                            SystemState n = s;
                            publishTransaction(n.ledger, tx, n.now,
                                               ctx.rules);
                            auto& my = n.channels[ci].side[side];
                            auto* nh = my.findHtlc(my.outgoing, sh.id);
                            nh->state = HtlcState::TIMEDOUT;
                            markLeg(n.users[me], sh.id, me, peer,
                                    LegState::ABORTED);
                            emit("RedeemHTLCAfterClose(" + cu + pidArg + ")",
                                 std::move(n));
                        }
                        else if (!honest)
                        {
                            SystemState n = s;
                            publishTransaction(n.ledger, tx, n.now,
                                               ctx.rules);
                            auto& my = n.channels[ci].side[side];
                            auto* nh = my.findHtlc(my.outgoing, sh.id);
                            if (nh != nullptr && unresolvedOnChain(nh->state))
                            {
                                nh->state = HtlcState::TIMEDOUT;
                                markLeg(n.users[me], sh.id, me, peer,
                                        LegState::ABORTED);
                            }
                            emit("Cheat(" + cu + pidArg + ",timeout)",
                                 std::move(n));
                        }
                    }
                }
            }

            // -- on-chain notice of HTLC outputs spent by the counterparty --
            if (pc)
            {
                auto noteSpent = [&](Htlc const& h, bool outgoing)
                {
                    if (!unresolvedOnChain(h.state))
                    {
                        return;
                    }
                    auto const* sh = pc->snap.findHtlc(h.id);
                    if (sh == nullptr)
                    {
                        return;
                    }
                    OutputRef ref{pc->txId,
                                  commitmentHtlcOutputIndex(pc->snap, h.id)};
                    if (!s.ledger.isSpent(ref))
                    {
                        return;
                    }
                    Transaction const* spender = findSpender(s.ledger, ref);
                    bool withPreimage = false;
                    for (auto const& in : spender->inputs)
                    {
                        if (in.prev == ref)
                        {
                            withPreimage = in.witness.hasPreimage(h.hash);
                        }
                    }
                    std::string pidArg = ",p=" + std::to_string(h.id);
                    if (withPreimage)
                    {
                        if (!outgoing)
                        {
                            return; // own incoming is only claimed by me
                        }
                        SystemState n = s;
                        auto& my = n.channels[ci].side[side];
                        auto* nh = my.findHtlc(my.outgoing, h.id);
                        if (n.users[me].preimages.insert(h.hash).second &&
                            s.now > h.timelock + grace)
                        {
                            n.users[me].latePreimages.insert(h.hash);
                        }
                        if (nh->state == HtlcState::COMMITTED ||
                            nh->state == HtlcState::OFF_TIMEDOUT)
                        {
                            my.stake -= std::min(my.stake, nh->amount);
                        }
                        nh->state = HtlcState::PERSISTED;
                        markLeg(n.users[me], h.id, me, peer,
                                LegState::PROCESSED);
                        emit("NoteThatHTLCFulfilledOnChainByOtherUser(" + cu +
                                 pidArg + ")",
                             std::move(n));
                    }
                    else
                    {
                        SystemState n = s;
                        auto& my = n.channels[ci].side[side];
                        auto* nh = my.findHtlc(
                            outgoing ? my.outgoing : my.incoming, h.id);
                        if (outgoing && (nh->state == HtlcState::COMMITTED ||
                                         nh->state == HtlcState::OFF_TIMEDOUT))
                        {
                            my.stake -= std::min(my.stake, nh->amount);
                        }
                        nh->state = HtlcState::TIMEDOUT;
                        markLeg(n.users[me], h.id, outgoing ? me : peer,
                                outgoing ? peer : me, LegState::ABORTED);
                        emit("NoteThatHTLCTimedOutOnChainByOtherUser(" + cu +
                                 pidArg + ")",
                             std::move(n));
                    }
                };
                for (auto const& h : vars.incoming)
                {
                    noteSpent(h, false);
                }
                for (auto const& h : vars.outgoing)
                {
                    noteSpent(h, true);
                }
            }
        }
    }

    // ---- outgoing HTLC creation (one deterministic candidate per user) ----
    for (size_t ui = 0; ui < s.users.size(); ++ui)
    {
        UserId u = static_cast<UserId>(ui);
        PendingSend const* best = nullptr;
        ChannelId bestChan = -1;
        for (auto const& e : s.users[ui].pendingSends)
        {
            if (!e.haveHash || e.timelock <= s.now)
            {
                continue;
            }
            ChannelId c = ctx.channelBetween(u, e.nextHop);
            if (c < 0)
            {
                continue;
            }
            int32_t side = ctx.sideOf(c, u);
            auto const& vars = s.channels[c].side[side];
            if (vars.state != ChanState::REV_KEYS_EXCHANGED)
            {
                continue;
            }
            TxId fund = s.channels[c].fundingTxId;
            bool alive = fund != NO_TX && s.ledger.findTx(fund) != nullptr &&
                         !s.ledger.isSpent({fund, 0});
            if (!alive)
            {
                // Same chain-read rule as the update dance: a channel whose
                // funding output is spent can carry no new HTLC.
                continue;
            }
            if (detail::availableBalance(vars) < e.amount)
            {
                continue;
            }
            bool dup = false;
            for (auto const& h : vars.incoming)
            {
                dup = dup || h.hash == e.hash;
            }
            for (auto const& h : vars.outgoing)
            {
                dup = dup || h.hash == e.hash;
            }
            if (dup)
            {
                continue;
            }
            // Forwarding requires the upstream HTLC to be locked in first.
            bool upstreamOk = true;
            for (size_t c2 = 0; c2 < s.channels.size(); ++c2)
            {
                int32_t s2 = ctx.sideOf(static_cast<ChannelId>(c2), u);
                if (s2 < 0 || static_cast<ChannelId>(c2) == c)
                {
                    continue;
                }
                auto const* up = s.channels[c2].side[s2].findIncoming(e.id);
                if (up != nullptr)
                {
                    upstreamOk = up->state == HtlcState::COMMITTED;
                }
            }
            if (!upstreamOk)
            {
                continue;
            }
            if (best == nullptr ||
                std::make_pair(e.timelock, e.id) <
                    std::make_pair(best->timelock, best->id))
            {
                best = &e;
                bestChan = c;
            }
        }
        if (best != nullptr)
        {
            // Among the concurrently eligible entries only the one with the
            // smallest (timelock, id) fires: honest ordering is
            // deterministic and the rest follow in subsequent steps.
            SystemState n = s;
            int32_t side = ctx.sideOf(bestChan, u);
            auto& my = n.channels[bestChan].side[side];
            Htlc h;
            h.id = best->id;
            h.amount = best->amount;
            h.hash = best->hash;
            h.timelock = best->timelock;
            h.state = HtlcState::NEW;
            h.onwardPath = best->onwardPath;
            h.secret = best->secret;
            insertSortedById(my.outgoing, h);
            auto& sends = n.users[ui].pendingSends;
            for (auto it = sends.begin(); it != sends.end(); ++it)
            {
                if (it->id == best->id)
                {
                    sends.erase(it);
                    break;
                }
            }
            ChannelMessage m;
            m.type = MsgType::UPDATE_ADD_HTLC;
            m.senderSide = side;
            m.htlc = h;
            n.channels[bestChan].queue.push_back(m);
            emit("AddAndSendOutgoingHTLC(" +
                     detail::chanUser(ctx, bestChan, u) +
                     ",p=" + std::to_string(h.id) + ")",
                 std::move(n));
        }
    }

    // ---- fresh single-signer claims of channel outputs --------------------
    for (size_t ui = 0; ui < s.users.size(); ++ui)
    {
        UserId u = static_cast<UserId>(ui);
        bool honest = s.users[ui].honest;
        KeyRing ring = detail::keyRingOf(ctx, s, u);
        for (auto const& sp :
             spendableOutputs(s.ledger, ring, s.users[ui].preimages, s.now))
        {
            ChannelId c = ctx.channelOfTx(sp.ref.tx);
            if (c < 0)
            {
                continue;
            }
            auto const* srcTx = s.ledger.findTx(sp.ref.tx);
            auto const& output = srcTx->outputs[sp.ref.index];
            auto const& cond = output.conditions[sp.conditionIndex];
            if (cleanOutput(output) ||
                detail::conditionMentionsRevocation(cond))
            {
                continue; // settled value / punishment handles revocations
            }
            int32_t side = ctx.sideOf(c, u);
            if (side < 0)
            {
                continue;
            }
            auto pc = detail::publishedCommitment(ctx, s, c);
            if (!pc)
            {
                continue;
            }
            UserId peer = ctx.sideUser(c, 1 - side);
            auto const& vars = s.channels[c].side[side];
            std::string cu = detail::chanUser(ctx, c, u);

            // Identify what this output is.
            SnapHtlc const* sh = nullptr;
            bool secondStage = false;
            if (sp.ref.tx == pc->txId)
            {
                for (auto const& x : pc->snap.htlcs)
                {
                    if (commitmentHtlcOutputIndex(pc->snap, x.id) ==
                        sp.ref.index)
                    {
                        sh = &x;
                    }
                }
            }
            else
            {
                for (auto const& x : pc->snap.htlcs)
                {
                    if (x.secondStageTxId == sp.ref.tx)
                    {
                        sh = &x;
                        secondStage = true;
                    }
                }
            }

            auto buildClaim = [&](SystemState& n) -> bool
            {
                if (sp.ref.tx != pc->txId && sh == nullptr)
                {
                    return false; // not an output this model claims
                }
                Transaction tx;
                tx.id = sp.ref.tx == pc->txId
                            ? detail::commitmentClaimTxSlot(ctx, c,
                                                            sp.ref.index)
                            : detail::secondStageClaimTxSlot(ctx, c, sh->id);
                tx.absLocktime = cond.absTimelock > 0 ? s.now : 0;
                Input in;
                in.prev = sp.ref;
                in.witness.keys = cond.keys;
                if (cond.hashLocked())
                {
                    in.witness.preimages = {cond.hash};
                }
                tx.inputs.push_back(in);
                Output o;
                o.value = sp.value;
                o.conditions.push_back(
                    Condition{Condition::Kind::SINGLE_SIGNATURE,
                              {userKey(u)}, 0, 0, 0});
                tx.outputs.push_back(o);
                if (validateTransaction(n.ledger, tx, n.now, ctx.rules) !=
                    TxError::OK)
                {
                    return false;
                }
                publishTransaction(n.ledger, tx, n.now, ctx.rules);
                return true;
            };

            if (sh == nullptr || secondStage)
            {
                // Plain sweep of my own delayed balance output (commitment
                // to_local or a matured second-stage output).
                if (cond.relTimelock <= 0)
                {
                    continue;
                }
                SystemState n = s;
                if (!buildClaim(n))
                {
                    continue;
                }
                auto& my = n.channels[c].side[side];
                my.stake -= std::min(my.stake, sp.value);
                emit("SweepOwnOutput(" + cu +
                         ",src=" + std::to_string(sp.ref.tx) + ":" +
                         std::to_string(sp.ref.index) + ")",
                     std::move(n));
                continue;
            }

            std::string pidArg = ",p=" + std::to_string(sh->id);
            if (cond.hashLocked())
            {
                // Preimage claim of an incoming HTLC. An off-chain fail that
                // never completed its removal round does not forfeit the
                // claim: the published commitment still carries the output,
                // and collecting it completes the payment after all.
                auto const* rec = vars.findIncoming(sh->id);
                bool active =
                    rec != nullptr && detail::unresolvedOnChain(rec->state);
                if (active)
                {
                    SystemState n = s;
                    if (!buildClaim(n))
                    {
                        continue;
                    }
                    auto& my = n.channels[c].side[side];
                    auto* nh = my.findHtlc(my.incoming, sh->id);
                    if (nh->state == HtlcState::FULFILLED)
                    {
                        my.stake -= std::min(my.stake, sh->amount);
                    }
                    nh->state = HtlcState::PERSISTED;
                    detail::markLeg(n.users[ui], sh->id, peer, u,
                                    LegState::PROCESSED);
                    emit("RedeemHTLCAfterClose(" + cu + pidArg + ")",
                         std::move(n));
                }
                else if (!honest)
                {
                    // Cheat: pocket the HTLC output although my own record
                    // of it never reached a committed state (or is already
                    // terminal). Collecting by preimage still completes the
                    // payment in fact, so a record that never finished its
                    // add handshake books the payment as processed; a record
                    // that already holds a terminal verdict keeps it (legs
                    // only ever move away from NEW).
                    SystemState n = s;
                    if (!buildClaim(n))
                    {
                        continue;
                    }
                    detail::markLeg(n.users[ui], sh->id, peer, u,
                                    LegState::PROCESSED);
                    emit("Cheat(" + cu + pidArg + ",claim)", std::move(n));
                }
            }
            else if (cond.absTimelock > 0)
            {
                // Direct timeout claim of an outgoing HTLC. A record failed
                // off-chain but left in the published commitment still holds
                // my value, so reclaiming it is part of honest behavior.
                auto const* rec = vars.findOutgoing(sh->id);
                bool active = rec != nullptr &&
                              (rec->state == HtlcState::COMMITTED ||
                               rec->state == HtlcState::OFF_TIMEDOUT);
                bool knows = s.users[ui].preimages.count(sh->hash) != 0;
                if (active && !knows)
                {
                    SystemState n = s;
                    if (!buildClaim(n))
                    {
                        continue;
                    }
                    auto& my = n.channels[c].side[side];
                    auto* nh = my.findHtlc(my.outgoing, sh->id);
                    my.stake -= std::min(my.stake, sh->amount);
                    nh->state = HtlcState::TIMEDOUT;
                    detail::markLeg(n.users[ui], sh->id, u, peer,
                                    LegState::ABORTED);
                    emit("RedeemHTLCAfterClose(" + cu + pidArg + ")",
                         std::move(n));
                }
                else if (!honest)
                {
                    // Cheat: reclaim via the timeout path although the
                    // payment went through (or was already settled).
                    SystemState n = s;
                    if (!buildClaim(n))
                    {
                        continue;
                    }
                    auto& my = n.channels[c].side[side];
                    auto* nh = my.findHtlc(my.outgoing, sh->id);
                    if (nh != nullptr && (nh->state == HtlcState::COMMITTED ||
                                          nh->state == HtlcState::OFF_TIMEDOUT))
                    {
                        my.stake -= std::min(my.stake, sh->amount);
                    }
                    if (nh != nullptr && detail::unresolvedOnChain(nh->state))
                    {
                        nh->state = HtlcState::TIMEDOUT;
                        detail::markLeg(n.users[ui], sh->id, u, peer,
                                        LegState::ABORTED);
                    }
                    emit("Cheat(" + cu + pidArg + ",claim)", std::move(n));
                }
            }
        }
    }

    // ---- cross-channel preimage extraction from the ledger -----------------
    for (size_t ui = 0; ui < s.users.size(); ++ui)
    {
        UserId u = static_cast<UserId>(ui);
        auto const& user = s.users[ui];
        // Collect unresolved HTLC hashes this user cares about.
        std::vector<std::pair<HashVal, TimePoint>> wanted;
        for (size_t ci = 0; ci < s.channels.size(); ++ci)
        {
            int32_t side = ctx.sideOf(static_cast<ChannelId>(ci), u);
            if (side < 0)
            {
                continue;
            }
            auto scanList = [&](std::vector<Htlc> const& list)
            {
                for (auto const& h : list)
                {
                    if (!htlcResolved(h.state) &&
                        user.preimages.count(h.hash) == 0)
                    {
                        // Track the largest timelock for lateness purposes
                        // (the incoming hop has the larger one).
                        bool found = false;
                        for (auto& [hash, tl] : wanted)
                        {
                            if (hash == h.hash)
                            {
                                tl = std::max(tl, h.timelock);
                                found = true;
                            }
                        }
                        if (!found)
                        {
                            wanted.push_back({h.hash, h.timelock});
                        }
                    }
                }
            };
            scanList(s.channels[ci].side[side].incoming);
            scanList(s.channels[ci].side[side].outgoing);
        }
        for (auto const& [hash, timelock] : wanted)
        {
            bool revealed = false;
            for (auto const& tx : s.ledger.txs)
            {
                for (auto const& in : tx.inputs)
                {
                    revealed = revealed || in.witness.hasPreimage(hash);
                }
            }
            if (!revealed)
            {
                continue;
            }
            SystemState n = s;
            n.users[ui].preimages.insert(hash);
            if (s.now > timelock + grace)
            {
                n.users[ui].latePreimages.insert(hash);
            }
            // Hash values equal their payment's preimage in this model.
            emit("NoteThatHTLCFulfilledOnChainInOtherChannel(" +
                     sc.users[ui].name + ",p=" +
                     std::to_string(hash - sc.constants.preimageOffset) + ")",
                 std::move(n));
        }
    }

    timeSuccessors(ctx, s, topt, out);

    std::stable_sort(out.begin(), out.end(),
                     [](Successor const& a, Successor const& b)
                     { return a.first < b.first; });
    return out;
}

} // namespace lnmc
