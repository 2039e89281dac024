// Copyright 2026 the lnmc contributors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0
#pragma once

#include "lnmc/state.hpp"

namespace lnmc
{

// ---------------------------------------------------------------------------
// Deterministic construction of channel transactions from snapshots.
//
// Output layout of a commitment transaction owned by `owner`:
//   [to_local if balanceOwner > 0]
//   [to_remote if balancePeer > 0]
//   [one output per HTLC, in snapshot (payment id) order]
//
// to_local     : { SingleSig(owner) after TO_SELF_DELAY,
//                  AllSig(revkey(owner, index), peer) }
// to_remote    : { SingleSig(peer) }
// offered HTLC : { AllSig(revkey, peer),
//                  SingleSigHashLock(peer, hash),
//                  AllSig(owner, peer) locked until the HTLC timelock }
// received HTLC: { AllSig(revkey, peer),
//                  AllSigHashLock(owner, peer, hash),
//                  SingleSig(peer) locked until the HTLC timelock }
//
// The AllSig paths on HTLC outputs are spent by pre-signed second-stage
// transactions whose single output mirrors to_local, which is what makes a
// revoked HTLC claim punishable during TO_SELF_DELAY. When the rules fold
// the second stage away, the timeout/success paths pay their owner directly.
// ---------------------------------------------------------------------------

inline int32_t
commitmentHtlcOutputIndex(CommitSnapshot const& snap, PaymentId id)
{
    int32_t idx = (snap.balanceOwner > 0 ? 1 : 0) +
                  (snap.balancePeer > 0 ? 1 : 0);
    for (auto const& h : snap.htlcs)
    {
        if (h.id == id)
        {
            return idx;
        }
        ++idx;
    }
    return -1;
}

inline int32_t
commitmentToLocalIndex(CommitSnapshot const& snap)
{
    return snap.balanceOwner > 0 ? 0 : -1;
}

inline Transaction
buildCommitmentTx(ModelContext const& ctx, ChannelId chan, int32_t ownerSide,
                  ChannelState const& cs, CommitSnapshot const& snap)
{
    UserId owner = ctx.sideUser(chan, ownerSide);
    UserId peer = ctx.sideUser(chan, 1 - ownerSide);
    TimePoint tsd = ctx.scenario.constants.toSelfDelay;
    Key rev = revocationKey(owner, chan, snap.index);

    Transaction tx;
    tx.id = snap.txId;
    tx.absLocktime = 0;
    Input in;
    in.prev = OutputRef{cs.fundingTxId, 0};
    in.witness.keys = {userKey(owner), userKey(peer)};
    std::sort(in.witness.keys.begin(), in.witness.keys.end());
    tx.inputs.push_back(in);

    if (snap.balanceOwner > 0)
    {
        Output o;
        o.value = snap.balanceOwner;
        Condition toSelf;
        toSelf.kind = Condition::SINGLE_SIGNATURE;
        toSelf.keys = {userKey(owner)};
        toSelf.relTimelock = tsd;
        Condition revoke;
        revoke.kind = Condition::ALL_SIGNATURES;
        revoke.keys = {rev, userKey(peer)};
        std::sort(revoke.keys.begin(), revoke.keys.end());
        o.conditions = {toSelf, revoke};
        tx.outputs.push_back(o);
    }
    if (snap.balancePeer > 0)
    {
        Output o;
        o.value = snap.balancePeer;
        Condition c;
        c.kind = Condition::SINGLE_SIGNATURE;
        c.keys = {userKey(peer)};
        o.conditions = {c};
        tx.outputs.push_back(o);
    }
    for (auto const& h : snap.htlcs)
    {
        Output o;
        o.value = h.amount;
        Condition revoke;
        revoke.kind = Condition::ALL_SIGNATURES;
        revoke.keys = {rev, userKey(peer)};
        std::sort(revoke.keys.begin(), revoke.keys.end());
        if (h.offeredByOwner)
        {
            Condition claim;
            claim.kind = Condition::SINGLE_SIG_HASH_LOCK;
            claim.keys = {userKey(peer)};
            claim.hash = h.hash;
            Condition timeout;
            if (ctx.rules.twoStageHtlc)
            {
                timeout.kind = Condition::ALL_SIGNATURES;
                timeout.keys = {userKey(owner), userKey(peer)};
                std::sort(timeout.keys.begin(), timeout.keys.end());
            }
            else
            {
                timeout.kind = Condition::SINGLE_SIGNATURE;
                timeout.keys = {userKey(owner)};
            }
            timeout.absTimelock = h.timelock;
            o.conditions = {revoke, claim, timeout};
        }
        else
        {
            Condition claim;
            if (ctx.rules.twoStageHtlc)
            {
                claim.kind = Condition::ALL_SIG_HASH_LOCK;
                claim.keys = {userKey(owner), userKey(peer)};
                std::sort(claim.keys.begin(), claim.keys.end());
            }
            else
            {
                claim.kind = Condition::SINGLE_SIG_HASH_LOCK;
                claim.keys = {userKey(owner)};
            }
            claim.hash = h.hash;
            Condition timeout;
            timeout.kind = Condition::SINGLE_SIGNATURE;
            timeout.keys = {userKey(peer)};
            timeout.absTimelock = h.timelock;
            o.conditions = {revoke, claim, timeout};
        }
        tx.outputs.push_back(o);
    }
    return tx;
}

// Second-stage transaction claiming HTLC `h` out of `owner`'s published
// commitment `snap`. A success transaction (for a received HTLC) needs the
// preimage in its witness and carries no locktime; a timeout transaction
// (for an offered HTLC) is locked until the HTLC timelock.
inline Transaction
buildSecondStageTx(ModelContext const& ctx, ChannelId chan, int32_t ownerSide,
                   CommitSnapshot const& snap, SnapHtlc const& h,
                   bool success, std::optional<HashVal> preimage)
{
    UserId owner = ctx.sideUser(chan, ownerSide);
    UserId peer = ctx.sideUser(chan, 1 - ownerSide);
    TimePoint tsd = ctx.scenario.constants.toSelfDelay;

    Transaction tx;
    tx.id = h.secondStageTxId;
    tx.absLocktime = success ? 0 : h.timelock;
    Input in;
    in.prev = OutputRef{snap.txId, commitmentHtlcOutputIndex(snap, h.id)};
    in.witness.keys = {userKey(owner), userKey(peer)};
    std::sort(in.witness.keys.begin(), in.witness.keys.end());
    if (preimage)
    {
        in.witness.preimages = {*preimage};
    }
    tx.inputs.push_back(in);

    Output o;
    o.value = h.amount;
    Condition toSelf;
    toSelf.kind = Condition::SINGLE_SIGNATURE;
    toSelf.keys = {userKey(owner)};
    toSelf.relTimelock = tsd;
    Condition revoke;
    revoke.kind = Condition::ALL_SIGNATURES;
    revoke.keys = {revocationKey(owner, chan, snap.index), userKey(peer)};
    std::sort(revoke.keys.begin(), revoke.keys.end());
    o.conditions = {toSelf, revoke};
    tx.outputs.push_back(o);
    return tx;
}

// Funding transaction: the funder spends one of its exclusively owned
// unspent outputs (deterministically the smallest (txid, index) large
// enough) into a 2-of-2 funding output plus change.
inline std::optional<Transaction>
buildFundingTx(ModelContext const& ctx, ChannelId chan, Ledger const& ledger)
{
    auto const& sc = ctx.scenario.channels[chan];
    UserId funder = sc.funder;
    std::optional<OutputRef> pick;
    Amount pickValue = 0;
    for (auto const& tx : ledger.txs)
    {
        for (size_t i = 0; i < tx.outputs.size(); ++i)
        {
            OutputRef ref{tx.id, static_cast<int32_t>(i)};
            if (ledger.isSpent(ref))
            {
                continue;
            }
            if (!exclusivelyOwned(tx.outputs[i], funder))
            {
                continue;
            }
            if (tx.outputs[i].value < sc.capacity)
            {
                continue;
            }
            if (!pick)
            {
                pick = ref;
                pickValue = tx.outputs[i].value;
            }
        }
        if (pick)
        {
            break;
        }
    }
    if (!pick)
    {
        return std::nullopt;
    }

    Transaction tx;
    tx.id = sc.txIdLo; // first id in the channel's range
    tx.absLocktime = 0;
    Input in;
    in.prev = *pick;
    in.witness.keys = {userKey(funder)};
    tx.inputs.push_back(in);

    Output funding;
    funding.value = sc.capacity;
    Condition both;
    both.kind = Condition::ALL_SIGNATURES;
    both.keys = {userKey(sc.members[0]), userKey(sc.members[1])};
    std::sort(both.keys.begin(), both.keys.end());
    funding.conditions = {both};
    tx.outputs.push_back(funding);

    if (pickValue > sc.capacity)
    {
        Output change;
        change.value = pickValue - sc.capacity;
        Condition c;
        c.kind = Condition::SINGLE_SIGNATURE;
        c.keys = {userKey(funder)};
        change.conditions = {c};
        tx.outputs.push_back(change);
    }
    return tx;
}

// Extract the revocation-key index advertised by a published commitment (or
// second-stage) transaction: the index of any REVOCATION key appearing in
// its output conditions. Returns the key owner and index, or nullopt when no
// revocation path exists (e.g. a plain settlement output).
struct RevocationTag
{
    UserId owner = NO_USER;
    int32_t index = -1;
};

inline std::optional<RevocationTag>
revocationTagOf(Transaction const& tx)
{
    for (auto const& o : tx.outputs)
    {
        for (auto const& c : o.conditions)
        {
            for (auto const& k : c.keys)
            {
                if (k.kind == Key::REVOCATION)
                {
                    return RevocationTag{k.owner, k.index};
                }
            }
        }
    }
    return std::nullopt;
}

// True when `tx` spends the channel's funding output, i.e. is a commitment.
inline bool
spendsFunding(Transaction const& tx, TxId fundingTxId)
{
    for (auto const& in : tx.inputs)
    {
        if (in.prev.tx == fundingTxId && in.prev.index == 0)
        {
            return true;
        }
    }
    return false;
}

// An output is "clean" when it is a plain, unconditionally aged
// single-signature settlement: exactly one SINGLE_SIGNATURE condition with
// no timelocks and no hash. Sweeping such outputs is value-neutral churn,
// so claim actions never respend them.
inline bool
cleanOutput(Output const& o)
{
    return o.conditions.size() == 1 &&
           o.conditions[0].kind == Condition::SINGLE_SIGNATURE &&
           o.conditions[0].keys.size() == 1 &&
           o.conditions[0].absTimelock == 0 &&
           o.conditions[0].relTimelock == 0;
}

namespace detail
{

struct PublishedCommitment
{
    int32_t ownerSide = -1;
    TxId txId = NO_TX;
    CommitSnapshot snap;
};

inline Transaction const*
findSpender(Ledger const& ledger, OutputRef ref)
{
    for (auto const& tx : ledger.txs)
    {
        for (auto const& in : tx.inputs)
        {
            if (in.prev == ref)
            {
                return &tx;
            }
        }
    }
    return nullptr;
}

// The commitment transaction of channel `c` on the ledger, if any: the
// unique spender of the funding output, identified within the version
// histories of either side.
inline std::optional<PublishedCommitment>
publishedCommitment(ModelContext const& ctx, SystemState const& s,
                    ChannelId c)
{
    (void)ctx;
    auto const& cs = s.channels[c];
    if (cs.fundingTxId == NO_TX || s.ledger.findTx(cs.fundingTxId) == nullptr)
    {
        return std::nullopt;
    }
    Transaction const* spender = findSpender(s.ledger, {cs.fundingTxId, 0});
    if (spender == nullptr)
    {
        return std::nullopt;
    }
    for (int32_t side = 0; side < 2; ++side)
    {
        for (auto const& snap : cs.side[side].mySnapshots)
        {
            if (snap.txId == spender->id)
            {
                return PublishedCommitment{side, spender->id, snap};
            }
        }
        if (cs.side[side].myPending &&
            cs.side[side].myPending->txId == spender->id)
        {
            return PublishedCommitment{side, spender->id,
                                       *cs.side[side].myPending};
        }
    }
    return std::nullopt;
}

} // namespace detail

} // namespace lnmc
