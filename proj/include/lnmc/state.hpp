// Copyright 2026 the lnmc contributors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0
#pragma once

#include "lnmc/ledger.hpp"
#include "lnmc/scenario.hpp"

#include <optional>

namespace lnmc
{

// ---------------------------------------------------------------------------
// HTLC lifecycle
// ---------------------------------------------------------------------------
//
// Each side of a channel tracks its own view of every HTLC it offered
// (outgoing) or was offered (incoming). The commitment-update handshake is a
// four-message round (commitment_signed and revoke_and_ack in each
// direction), and the intermediate states record how far an addition has
// propagated:
//
//   outgoing: NEW --SendSignedCommitment--> SENT_COMMIT
//             --ReceiveRevocationKey-->     PENDING_COMMIT
//             --ReceiveSignedCommitment-->  RECV_COMMIT
//             --SendRevocationKey-->        COMMITTED
//   incoming: NEW --ReceiveSignedCommitment--> RECV_COMMIT
//             --SendRevocationKey-->           PENDING_COMMIT
//             --SendSignedCommitment-->        SENT_COMMIT
//             --ReceiveRevocationKey-->        COMMITTED   (timelock > now)
//
// Resolution: FULFILLED / OFF_TIMEDOUT record an off-chain fulfil/fail whose
// removal round is still revocable; PERSISTED / TIMEDOUT mark the removal
// becoming irrevocable (or the equivalent on-chain settlement); ABORTED marks
// an HTLC that never made it into an irrevocable commitment. On-chain
// observation can also move COMMITTED directly to PERSISTED or TIMEDOUT.
enum class HtlcState : uint8_t
{
    NEW = 0,
    SENT_COMMIT,
    RECV_COMMIT,
    PENDING_COMMIT,
    COMMITTED,
    FULFILLED,
    PERSISTED,
    OFF_TIMEDOUT,
    TIMEDOUT,
    ABORTED
};

inline char const*
htlcStateName(HtlcState s)
{
    switch (s)
    {
    case HtlcState::NEW:
        return "NEW";
    case HtlcState::SENT_COMMIT:
        return "SENT-COMMIT";
    case HtlcState::RECV_COMMIT:
        return "RECV-COMMIT";
    case HtlcState::PENDING_COMMIT:
        return "PENDING-COMMIT";
    case HtlcState::COMMITTED:
        return "COMMITTED";
    case HtlcState::FULFILLED:
        return "FULFILLED";
    case HtlcState::PERSISTED:
        return "PERSISTED";
    case HtlcState::OFF_TIMEDOUT:
        return "OFF-TIMEDOUT";
    case HtlcState::TIMEDOUT:
        return "TIMEDOUT";
    case HtlcState::ABORTED:
        return "ABORTED";
    }
    return "?";
}

// True for states in which the HTLC's fate is settled.
inline bool
htlcResolved(HtlcState s)
{
    return s == HtlcState::PERSISTED || s == HtlcState::TIMEDOUT ||
           s == HtlcState::ABORTED;
}

struct Htlc
{
    PaymentId id = 0;
    Amount amount = 0;
    HashVal hash = 0;
    TimePoint timelock = 0;
    HtlcState state = HtlcState::NEW;
    // Routing payload (incoming side): the users after me on the route and
    // the terminal payment secret. Empty path means I am the final receiver.
    std::vector<UserId> onwardPath;
    HashVal secret = 0;

    friend bool operator==(Htlc const&, Htlc const&) = default;

    void
    serialize(CanonicalWriter& w) const
    {
        w.i32(id);
        w.i64(amount);
        w.i64(hash);
        w.i32(timelock);
        w.u8(static_cast<uint8_t>(state));
        w.u32(static_cast<uint32_t>(onwardPath.size()));
        for (UserId u : onwardPath)
        {
            w.i32(u);
        }
        w.i64(secret);
    }

    static Htlc
    deserialize(CanonicalReader& r)
    {
        Htlc h;
        h.id = r.i32();
        h.amount = r.i64();
        h.hash = r.i64();
        h.timelock = r.i32();
        h.state = static_cast<HtlcState>(r.u8());
        uint32_t n = r.u32();
        h.onwardPath.reserve(n);
        for (uint32_t i = 0; i < n; ++i)
        {
            h.onwardPath.push_back(r.i32());
        }
        h.secret = r.i64();
        return h;
    }
};

// ---------------------------------------------------------------------------
// Payments as the environment sees them
// ---------------------------------------------------------------------------
//
// A multi-hop payment is decomposed at initialization into one leg per hop;
// every user on the route holds its own copies of the legs it participates
// in, and these copies (not the HTLCs) are what the external projection and
// the idealized payment network reason about.
enum class LegState : uint8_t
{
    NEW = 0,
    PROCESSED,
    ABORTED
};

inline char const*
legStateName(LegState s)
{
    switch (s)
    {
    case LegState::NEW:
        return "NEW";
    case LegState::PROCESSED:
        return "PROCESSED";
    case LegState::ABORTED:
        return "ABORTED";
    }
    return "?";
}

struct PaymentLeg
{
    PaymentId id = 0;
    Amount amount = 0;
    UserId sender = NO_USER;
    UserId receiver = NO_USER;
    LegState state = LegState::NEW;

    friend bool operator==(PaymentLeg const&, PaymentLeg const&) = default;

    void
    serialize(CanonicalWriter& w) const
    {
        w.i32(id);
        w.i64(amount);
        w.i32(sender);
        w.i32(receiver);
        w.u8(static_cast<uint8_t>(state));
    }

    static PaymentLeg
    deserialize(CanonicalReader& r)
    {
        PaymentLeg l;
        l.id = r.i32();
        l.amount = r.i64();
        l.sender = r.i32();
        l.receiver = r.i32();
        l.state = static_cast<LegState>(r.u8());
        return l;
    }
};

// A payment the user still has to put on the wire: either a route origin
// waiting for an invoice, or a forward obligation created when an HTLC
// arrived at an intermediary. Consumed when the outgoing HTLC is added.
struct PendingSend
{
    PaymentId id = 0;
    Amount amount = 0;
    TimePoint timelock = 0; // timelock of the outgoing HTLC to create
    UserId nextHop = NO_USER;
    std::vector<UserId> onwardPath; // after nextHop; empty = nextHop is final
    UserId finalReceiver = NO_USER;
    bool haveHash = false;
    bool invoiceRequested = false;
    HashVal hash = 0;
    HashVal secret = 0;

    friend bool operator==(PendingSend const&, PendingSend const&) = default;

    void
    serialize(CanonicalWriter& w) const
    {
        w.i32(id);
        w.i64(amount);
        w.i32(timelock);
        w.i32(nextHop);
        w.u32(static_cast<uint32_t>(onwardPath.size()));
        for (UserId u : onwardPath)
        {
            w.i32(u);
        }
        w.i32(finalReceiver);
        w.boolean(haveHash);
        w.boolean(invoiceRequested);
        w.i64(hash);
        w.i64(secret);
    }

    static PendingSend
    deserialize(CanonicalReader& r)
    {
        PendingSend p;
        p.id = r.i32();
        p.amount = r.i64();
        p.timelock = r.i32();
        p.nextHop = r.i32();
        uint32_t n = r.u32();
        p.onwardPath.reserve(n);
        for (uint32_t i = 0; i < n; ++i)
        {
            p.onwardPath.push_back(r.i32());
        }
        p.finalReceiver = r.i32();
        p.haveHash = r.boolean();
        p.invoiceRequested = r.boolean();
        p.hash = r.i64();
        p.secret = r.i64();
        return p;
    }
};

// Invoice traffic is modeled as an unordered message pool (unlike channel
// queues, which are FIFO).
struct InvoiceMsg
{
    enum class Kind : uint8_t
    {
        REQUEST = 0,
        PAYMENT_HASH = 1
    };

    Kind kind = Kind::REQUEST;
    UserId from = NO_USER;
    UserId to = NO_USER;
    PaymentId payment = 0;
    HashVal hash = 0;
    HashVal secret = 0;

    friend auto operator<=>(InvoiceMsg const&, InvoiceMsg const&) = default;

    void
    serialize(CanonicalWriter& w) const
    {
        w.u8(static_cast<uint8_t>(kind));
        w.i32(from);
        w.i32(to);
        w.i32(payment);
        w.i64(hash);
        w.i64(secret);
    }

    static InvoiceMsg
    deserialize(CanonicalReader& r)
    {
        InvoiceMsg m;
        m.kind = static_cast<Kind>(r.u8());
        m.from = r.i32();
        m.to = r.i32();
        m.payment = r.i32();
        m.hash = r.i64();
        m.secret = r.i64();
        return m;
    }
};

// ---------------------------------------------------------------------------
// Commitment snapshots
// ---------------------------------------------------------------------------
//
// A commitment transaction is fully determined by a compact snapshot: the
// version index, the split of the capacity, and the HTLCs it carries with
// their pre-allocated second-stage transaction ids. Both channel members
// derive identical snapshots from their synchronized views, so "verifying a
// signature" amounts to rebuilding the expected snapshot and comparing.
struct SnapHtlc
{
    PaymentId id = 0;
    Amount amount = 0;
    HashVal hash = 0;
    TimePoint timelock = 0;
    bool offeredByOwner = false; // owner of the commitment offered this HTLC
    TxId secondStageTxId = NO_TX;

    friend bool operator==(SnapHtlc const&, SnapHtlc const&) = default;

    void
    serialize(CanonicalWriter& w) const
    {
        w.i32(id);
        w.i64(amount);
        w.i64(hash);
        w.i32(timelock);
        w.boolean(offeredByOwner);
        w.i32(secondStageTxId);
    }

    static SnapHtlc
    deserialize(CanonicalReader& r)
    {
        SnapHtlc h;
        h.id = r.i32();
        h.amount = r.i64();
        h.hash = r.i64();
        h.timelock = r.i32();
        h.offeredByOwner = r.boolean();
        h.secondStageTxId = r.i32();
        return h;
    }
};

struct CommitSnapshot
{
    int32_t index = 0; // commitment version, revocation key index
    TxId txId = NO_TX;
    Amount balanceOwner = 0;
    Amount balancePeer = 0;
    std::vector<SnapHtlc> htlcs; // sorted by payment id

    friend bool operator==(CommitSnapshot const&, CommitSnapshot const&) =
        default;

    SnapHtlc const*
    findHtlc(PaymentId id) const
    {
        for (auto const& h : htlcs)
        {
            if (h.id == id)
            {
                return &h;
            }
        }
        return nullptr;
    }

    void
    serialize(CanonicalWriter& w) const
    {
        w.i32(index);
        w.i32(txId);
        w.i64(balanceOwner);
        w.i64(balancePeer);
        w.u32(static_cast<uint32_t>(htlcs.size()));
        for (auto const& h : htlcs)
        {
            h.serialize(w);
        }
    }

    static CommitSnapshot
    deserialize(CanonicalReader& r)
    {
        CommitSnapshot s;
        s.index = r.i32();
        s.txId = r.i32();
        s.balanceOwner = r.i64();
        s.balancePeer = r.i64();
        uint32_t n = r.u32();
        s.htlcs.reserve(n);
        for (uint32_t i = 0; i < n; ++i)
        {
            s.htlcs.push_back(SnapHtlc::deserialize(r));
        }
        return s;
    }
};

// ---------------------------------------------------------------------------
// Channel messages (FIFO per channel; a user consumes the first message
// addressed to it)
// ---------------------------------------------------------------------------
enum class MsgType : uint8_t
{
    OPEN_CHANNEL = 0,
    ACCEPT_CHANNEL,
    FUNDING_CREATED,
    FUNDING_SIGNED,
    CHANNEL_READY,
    UPDATE_ADD_HTLC,
    COMMITMENT_SIGNED,
    REVOKE_AND_ACK,
    UPDATE_FULFILL_HTLC,
    UPDATE_FAIL_HTLC
};

inline char const*
msgTypeName(MsgType t)
{
    switch (t)
    {
    case MsgType::OPEN_CHANNEL:
        return "open_channel";
    case MsgType::ACCEPT_CHANNEL:
        return "accept_channel";
    case MsgType::FUNDING_CREATED:
        return "funding_created";
    case MsgType::FUNDING_SIGNED:
        return "funding_signed";
    case MsgType::CHANNEL_READY:
        return "channel_ready";
    case MsgType::UPDATE_ADD_HTLC:
        return "update_add_htlc";
    case MsgType::COMMITMENT_SIGNED:
        return "commitment_signed";
    case MsgType::REVOKE_AND_ACK:
        return "revoke_and_ack";
    case MsgType::UPDATE_FULFILL_HTLC:
        return "update_fulfill_htlc";
    case MsgType::UPDATE_FAIL_HTLC:
        return "update_fail_htlc";
    }
    return "?";
}

struct ChannelMessage
{
    MsgType type = MsgType::OPEN_CHANNEL;
    int32_t senderSide = 0; // 0 or 1 within the channel
    // Payload fields; which are meaningful depends on type.
    std::optional<CommitSnapshot> snapshot; // funding_*/commitment_signed
    Htlc htlc;                              // update_add_htlc
    int32_t revokedIndex = -1;              // revoke_and_ack
    PaymentId payment = 0;                  // update_fulfill/fail
    HashVal preimage = 0;                   // update_fulfill

    friend bool operator==(ChannelMessage const&,
                           ChannelMessage const&) = default;

    void
    serialize(CanonicalWriter& w) const
    {
        w.u8(static_cast<uint8_t>(type));
        w.i32(senderSide);
        w.boolean(snapshot.has_value());
        if (snapshot)
        {
            snapshot->serialize(w);
        }
        htlc.serialize(w);
        w.i32(revokedIndex);
        w.i32(payment);
        w.i64(preimage);
    }

    static ChannelMessage
    deserialize(CanonicalReader& r)
    {
        ChannelMessage m;
        m.type = static_cast<MsgType>(r.u8());
        m.senderSide = r.i32();
        if (r.boolean())
        {
            m.snapshot = CommitSnapshot::deserialize(r);
        }
        m.htlc = Htlc::deserialize(r);
        m.revokedIndex = r.i32();
        m.payment = r.i32();
        m.preimage = r.i64();
        return m;
    }
};

// ---------------------------------------------------------------------------
// Per-channel, per-user protocol variables
// ---------------------------------------------------------------------------
enum class ChanState : uint8_t
{
    INIT = 0,
    OPEN_SENT_OPEN_CHANNEL,
    OPEN_SENT_ACCEPT,
    OPEN_SENT_FIRST_COMMIT,
    OPEN_SENT_FUNDING_SIGNED,
    OPEN_FUNDING_PUB,
    OPEN_NEW_KEY_SENT,
    OPEN_NEW_KEY_RECEIVED,
    REV_KEYS_EXCHANGED,
    CLOSING,
    CLOSED // reserved; CLOSING is the absorbing post-close state
};

inline char const*
chanStateName(ChanState s)
{
    switch (s)
    {
    case ChanState::INIT:
        return "init";
    case ChanState::OPEN_SENT_OPEN_CHANNEL:
        return "open-sent-open-channel";
    case ChanState::OPEN_SENT_ACCEPT:
        return "open-sent-accept";
    case ChanState::OPEN_SENT_FIRST_COMMIT:
        return "open-sent-first-commit";
    case ChanState::OPEN_SENT_FUNDING_SIGNED:
        return "open-sent-funding-signed";
    case ChanState::OPEN_FUNDING_PUB:
        return "open-funding-pub";
    case ChanState::OPEN_NEW_KEY_SENT:
        return "open-new-key-sent";
    case ChanState::OPEN_NEW_KEY_RECEIVED:
        return "open-new-key-received";
    case ChanState::REV_KEYS_EXCHANGED:
        return "rev-keys-exchanged";
    case ChanState::CLOSING:
        return "closing";
    case ChanState::CLOSED:
        return "closed";
    }
    return "?";
}

struct ChannelUserVars
{
    ChanState state = ChanState::INIT;
    Amount balance = 0; // off-chain balance bookkeeping (cBalance)
    // Refinement-facing share of the channel's value: capacity contributed
    // plus fulfilled incoming minus paid-out/settled amounts. The sum over
    // channels is the user's external ChannelBalance.
    Amount stake = 0;
    std::vector<Htlc> incoming; // sorted by payment id
    std::vector<Htlc> outgoing; // sorted by payment id
    std::vector<HashVal> fulfilledAfterTimeout; // sorted
    // Commitment version history. mySnapshots[k] is version k of MY
    // commitment (all versions below the last are revoked by me);
    // peerSnapshots[k] is version k of the PEER's commitment, every one of
    // which I proposed and therefore know in full. myPending is a version
    // received via commitment_signed but not yet revoked into; peerPending
    // is a version I proposed that awaits the peer's revoke_and_ack.
    std::vector<CommitSnapshot> mySnapshots;
    std::vector<CommitSnapshot> peerSnapshots;
    std::optional<CommitSnapshot> myPending;
    std::optional<CommitSnapshot> peerPending;
    std::vector<int32_t> peerRevocations; // indices handed over, sorted

    Htlc*
    findHtlc(std::vector<Htlc>& list, PaymentId id)
    {
        for (auto& h : list)
        {
            if (h.id == id)
            {
                return &h;
            }
        }
        return nullptr;
    }

    Htlc const*
    findIncoming(PaymentId id) const
    {
        for (auto const& h : incoming)
        {
            if (h.id == id)
            {
                return &h;
            }
        }
        return nullptr;
    }

    Htlc const*
    findOutgoing(PaymentId id) const
    {
        for (auto const& h : outgoing)
        {
            if (h.id == id)
            {
                return &h;
            }
        }
        return nullptr;
    }

    bool
    holdsRevocation(int32_t index) const
    {
        return std::binary_search(peerRevocations.begin(),
                                  peerRevocations.end(), index);
    }

    friend bool operator==(ChannelUserVars const&,
                           ChannelUserVars const&) = default;

    void
    serialize(CanonicalWriter& w) const
    {
        w.u8(static_cast<uint8_t>(state));
        w.i64(balance);
        w.i64(stake);
        w.u32(static_cast<uint32_t>(incoming.size()));
        for (auto const& h : incoming)
        {
            h.serialize(w);
        }
        w.u32(static_cast<uint32_t>(outgoing.size()));
        for (auto const& h : outgoing)
        {
            h.serialize(w);
        }
        w.u32(static_cast<uint32_t>(fulfilledAfterTimeout.size()));
        for (auto const& h : fulfilledAfterTimeout)
        {
            w.i64(h);
        }
        w.u32(static_cast<uint32_t>(mySnapshots.size()));
        for (auto const& s : mySnapshots)
        {
            s.serialize(w);
        }
        w.u32(static_cast<uint32_t>(peerSnapshots.size()));
        for (auto const& s : peerSnapshots)
        {
            s.serialize(w);
        }
        w.boolean(myPending.has_value());
        if (myPending)
        {
            myPending->serialize(w);
        }
        w.boolean(peerPending.has_value());
        if (peerPending)
        {
            peerPending->serialize(w);
        }
        w.u32(static_cast<uint32_t>(peerRevocations.size()));
        for (auto i : peerRevocations)
        {
            w.i32(i);
        }
    }

    static ChannelUserVars
    deserialize(CanonicalReader& r)
    {
        ChannelUserVars v;
        v.state = static_cast<ChanState>(r.u8());
        v.balance = r.i64();
        v.stake = r.i64();
        uint32_t n = r.u32();
        v.incoming.reserve(n);
        for (uint32_t i = 0; i < n; ++i)
        {
            v.incoming.push_back(Htlc::deserialize(r));
        }
        n = r.u32();
        v.outgoing.reserve(n);
        for (uint32_t i = 0; i < n; ++i)
        {
            v.outgoing.push_back(Htlc::deserialize(r));
        }
        n = r.u32();
        v.fulfilledAfterTimeout.reserve(n);
        for (uint32_t i = 0; i < n; ++i)
        {
            v.fulfilledAfterTimeout.push_back(r.i64());
        }
        n = r.u32();
        v.mySnapshots.reserve(n);
        for (uint32_t i = 0; i < n; ++i)
        {
            v.mySnapshots.push_back(CommitSnapshot::deserialize(r));
        }
        n = r.u32();
        v.peerSnapshots.reserve(n);
        for (uint32_t i = 0; i < n; ++i)
        {
            v.peerSnapshots.push_back(CommitSnapshot::deserialize(r));
        }
        if (r.boolean())
        {
            v.myPending = CommitSnapshot::deserialize(r);
        }
        if (r.boolean())
        {
            v.peerPending = CommitSnapshot::deserialize(r);
        }
        n = r.u32();
        v.peerRevocations.reserve(n);
        for (uint32_t i = 0; i < n; ++i)
        {
            v.peerRevocations.push_back(r.i32());
        }
        return v;
    }
};

struct ChannelState
{
    TxId fundingTxId = NO_TX;
    // True iff the commitment spending the funding output was one whose
    // revocation key the counterparty already held when it hit the chain.
    // A revocation key still in flight does not count: its holder-to-be
    // sees the close as honest until the key arrives, and by then the
    // delayed outputs may legitimately have been swept.
    bool punishableAtPublication = false;
    std::vector<ChannelMessage> queue; // FIFO
    ChannelUserVars side[2];

    friend bool operator==(ChannelState const&, ChannelState const&) = default;

    // First queued message addressed to side `s`, i.e. sent by the peer.
    std::optional<size_t>
    firstMessageFor(int32_t s) const
    {
        for (size_t i = 0; i < queue.size(); ++i)
        {
            if (queue[i].senderSide != s)
            {
                return i;
            }
        }
        return std::nullopt;
    }

    void
    serialize(CanonicalWriter& w) const
    {
        w.i32(fundingTxId);
        w.boolean(punishableAtPublication);
        w.u32(static_cast<uint32_t>(queue.size()));
        for (auto const& m : queue)
        {
            m.serialize(w);
        }
        side[0].serialize(w);
        side[1].serialize(w);
    }

    static ChannelState
    deserialize(CanonicalReader& r)
    {
        ChannelState c;
        c.fundingTxId = r.i32();
        c.punishableAtPublication = r.boolean();
        uint32_t n = r.u32();
        c.queue.reserve(n);
        for (uint32_t i = 0; i < n; ++i)
        {
            c.queue.push_back(ChannelMessage::deserialize(r));
        }
        c.side[0] = ChannelUserVars::deserialize(r);
        c.side[1] = ChannelUserVars::deserialize(r);
        return c;
    }
};

struct UserState
{
    bool honest = true;
    std::vector<PaymentLeg> legs;          // sorted by (id, sender, receiver)
    std::vector<PendingSend> pendingSends; // sorted by payment id
    std::set<HashVal> preimages;
    std::set<HashVal> latePreimages;
    std::vector<std::pair<HashVal, HashVal>> secretsIssued; // sorted

    PaymentLeg*
    findLeg(PaymentId id, UserId sender, UserId receiver)
    {
        for (auto& l : legs)
        {
            if (l.id == id && l.sender == sender && l.receiver == receiver)
            {
                return &l;
            }
        }
        return nullptr;
    }

    PendingSend*
    findPendingSend(PaymentId id)
    {
        for (auto& p : pendingSends)
        {
            if (p.id == id)
            {
                return &p;
            }
        }
        return nullptr;
    }

    PendingSend const*
    findPendingSend(PaymentId id) const
    {
        return const_cast<UserState*>(this)->findPendingSend(id);
    }

    bool
    knowsPreimage(HashVal p) const
    {
        return preimages.count(p) != 0;
    }

    friend bool operator==(UserState const&, UserState const&) = default;

    void
    serialize(CanonicalWriter& w) const
    {
        w.boolean(honest);
        w.u32(static_cast<uint32_t>(legs.size()));
        for (auto const& l : legs)
        {
            l.serialize(w);
        }
        w.u32(static_cast<uint32_t>(pendingSends.size()));
        for (auto const& p : pendingSends)
        {
            p.serialize(w);
        }
        w.u32(static_cast<uint32_t>(preimages.size()));
        for (auto p : preimages)
        {
            w.i64(p);
        }
        w.u32(static_cast<uint32_t>(latePreimages.size()));
        for (auto p : latePreimages)
        {
            w.i64(p);
        }
        w.u32(static_cast<uint32_t>(secretsIssued.size()));
        for (auto const& [p, s] : secretsIssued)
        {
            w.i64(p);
            w.i64(s);
        }
    }

    static UserState
    deserialize(CanonicalReader& r)
    {
        UserState u;
        u.honest = r.boolean();
        uint32_t n = r.u32();
        u.legs.reserve(n);
        for (uint32_t i = 0; i < n; ++i)
        {
            u.legs.push_back(PaymentLeg::deserialize(r));
        }
        n = r.u32();
        u.pendingSends.reserve(n);
        for (uint32_t i = 0; i < n; ++i)
        {
            u.pendingSends.push_back(PendingSend::deserialize(r));
        }
        n = r.u32();
        for (uint32_t i = 0; i < n; ++i)
        {
            u.preimages.insert(u.preimages.end(), r.i64());
        }
        n = r.u32();
        for (uint32_t i = 0; i < n; ++i)
        {
            u.latePreimages.insert(u.latePreimages.end(), r.i64());
        }
        n = r.u32();
        u.secretsIssued.reserve(n);
        for (uint32_t i = 0; i < n; ++i)
        {
            HashVal p = r.i64();
            HashVal s = r.i64();
            u.secretsIssued.emplace_back(p, s);
        }
        return u;
    }
};

// ---------------------------------------------------------------------------
// Whole-system state
// ---------------------------------------------------------------------------
struct SystemState
{
    TimePoint now = 0;
    Ledger ledger;
    std::vector<UserState> users;
    std::vector<ChannelState> channels;
    std::vector<InvoiceMsg> invoiceMsgs; // sorted (set semantics)

    friend bool operator==(SystemState const&, SystemState const&) = default;

    void
    serialize(CanonicalWriter& w) const
    {
        w.i32(now);
        ledger.serialize(w);
        w.u32(static_cast<uint32_t>(users.size()));
        for (auto const& u : users)
        {
            u.serialize(w);
        }
        w.u32(static_cast<uint32_t>(channels.size()));
        for (auto const& c : channels)
        {
            c.serialize(w);
        }
        w.u32(static_cast<uint32_t>(invoiceMsgs.size()));
        for (auto const& m : invoiceMsgs)
        {
            m.serialize(w);
        }
    }

    std::string
    canonicalBytes() const
    {
        CanonicalWriter w;
        serialize(w);
        return w.bytes();
    }

    static SystemState
    deserialize(CanonicalReader& r)
    {
        SystemState s;
        s.now = r.i32();
        s.ledger = Ledger::deserialize(r);
        uint32_t n = r.u32();
        s.users.reserve(n);
        for (uint32_t i = 0; i < n; ++i)
        {
            s.users.push_back(UserState::deserialize(r));
        }
        n = r.u32();
        s.channels.reserve(n);
        for (uint32_t i = 0; i < n; ++i)
        {
            s.channels.push_back(ChannelState::deserialize(r));
        }
        n = r.u32();
        s.invoiceMsgs.reserve(n);
        for (uint32_t i = 0; i < n; ++i)
        {
            s.invoiceMsgs.push_back(InvoiceMsg::deserialize(r));
        }
        return s;
    }

    // Rebuilds a state from its canonical encoding. The encoding must be
    // consumed exactly; leftover bytes mean the writer and reader disagree.
    static SystemState
    fromCanonicalBytes(std::string_view bytes)
    {
        CanonicalReader r(bytes);
        SystemState s = deserialize(r);
        if (!r.finished())
        {
            throw std::runtime_error(
                "canonical byte stream has trailing bytes");
        }
        return s;
    }

    Fingerprint
    fingerprint() const
    {
        return fingerprintBytes(canonicalBytes());
    }
};

// Immutable run context shared by all states of one exploration.
struct ModelContext
{
    Scenario scenario;
    ProtocolRules rules;

    UserId
    sideUser(ChannelId c, int32_t side) const
    {
        return scenario.channels[c].members[side];
    }

    int32_t
    sideOf(ChannelId c, UserId u) const
    {
        if (scenario.channels[c].members[0] == u)
        {
            return 0;
        }
        if (scenario.channels[c].members[1] == u)
        {
            return 1;
        }
        return -1;
    }

    // The unique channel connecting two users, or -1.
    ChannelId
    channelBetween(UserId a, UserId b) const
    {
        for (size_t i = 0; i < scenario.channels.size(); ++i)
        {
            if (scenario.channels[i].hasMember(a) &&
                scenario.channels[i].hasMember(b))
            {
                return static_cast<ChannelId>(i);
            }
        }
        return -1;
    }

    ChannelId
    channelOfTx(TxId id) const
    {
        for (size_t i = 0; i < scenario.channels.size(); ++i)
        {
            if (id >= scenario.channels[i].txIdLo &&
                id <= scenario.channels[i].txIdHi)
            {
                return static_cast<ChannelId>(i);
            }
        }
        return -1;
    }
};

// ---------------------------------------------------------------------------
// External projection
// ---------------------------------------------------------------------------
//
// What the environment can see of a user: honesty, the balance it holds
// across channels, the balance it exclusively owns on-chain, and the fate of
// its payment legs. Internal machinery (clocks, queues, inventories,
// commitment history) is deliberately absent.
struct UserView
{
    bool honest = true;
    Amount channelBalance = 0;
    Amount blockchainBalance = 0;
    std::vector<PaymentLeg> legs;

    friend bool operator==(UserView const&, UserView const&) = default;
    friend auto operator<=>(UserView const&, UserView const&) = default;

    void
    serialize(CanonicalWriter& w) const
    {
        w.boolean(honest);
        w.i64(channelBalance);
        w.i64(blockchainBalance);
        w.u32(static_cast<uint32_t>(legs.size()));
        for (auto const& l : legs)
        {
            l.serialize(w);
        }
    }
};

struct ExternalView
{
    std::vector<UserView> users;

    friend bool operator==(ExternalView const&, ExternalView const&) = default;
    friend auto operator<=>(ExternalView const&, ExternalView const&) = default;

    std::string
    canonicalBytes() const
    {
        CanonicalWriter w;
        w.u32(static_cast<uint32_t>(users.size()));
        for (auto const& u : users)
        {
            u.serialize(w);
        }
        return w.bytes();
    }
};

inline ExternalView
projectExternal(ModelContext const& ctx, SystemState const& s)
{
    ExternalView view;
    view.users.resize(s.users.size());
    for (size_t u = 0; u < s.users.size(); ++u)
    {
        auto& v = view.users[u];
        v.honest = s.users[u].honest;
        v.blockchainBalance = onchainBalance(s.ledger, static_cast<UserId>(u));
        v.channelBalance = 0;
        for (size_t c = 0; c < s.channels.size(); ++c)
        {
            int32_t side = ctx.sideOf(static_cast<ChannelId>(c),
                                      static_cast<UserId>(u));
            if (side >= 0)
            {
                v.channelBalance += s.channels[c].side[side].stake;
            }
        }
        v.legs = s.users[u].legs;
    }
    return view;
}

inline PaymentLeg const*
findLegConst(UserState const& u, PaymentId id, UserId sender, UserId receiver)
{
    for (auto const& l : u.legs)
    {
        if (l.id == id && l.sender == sender && l.receiver == receiver)
        {
            return &l;
        }
    }
    return nullptr;
}

} // namespace lnmc
