// Copyright 2026 the lnmc contributors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0
#pragma once

#include "lnmc/core.hpp"

#include <cassert>
#include <optional>
#include <set>
#include <vector>

namespace lnmc
{

// Symbolic crypto: a signature is modeled as the key itself appearing in a
// witness, and the hash of a preimage is the preimage value. A key is either
// a user's permanent key or one of the per-commitment revocation keys it
// generates, identified by owner, channel, and commitment index (revocation
// key sequences are independent per channel).
struct Key
{
    enum class Kind : uint8_t
    {
        USER = 0,
        REVOCATION = 1
    };

    using enum Kind;

    Kind kind = Kind::USER;
    UserId owner = NO_USER;
    ChannelId channel = -1; // revocation keys only
    int32_t index = 0;      // revocation keys only

    friend auto operator<=>(Key const&, Key const&) = default;

    void
    serialize(CanonicalWriter& w) const
    {
        w.u8(static_cast<uint8_t>(kind));
        w.i32(owner);
        w.i32(channel);
        w.i32(index);
    }

    static Key
    deserialize(CanonicalReader& r)
    {
        Key k;
        k.kind = static_cast<Kind>(r.u8());
        k.owner = r.i32();
        k.channel = r.i32();
        k.index = r.i32();
        return k;
    }
};

inline Key
userKey(UserId u)
{
    return Key{Key::Kind::USER, u, -1, 0};
}

inline Key
revocationKey(UserId owner, ChannelId channel, int32_t index)
{
    return Key{Key::Kind::REVOCATION, owner, channel, index};
}

// One way of spending an output. The keys listed must all sign (single-key
// kinds list exactly one key), hash-locked kinds additionally demand a
// matching preimage, and the timelocks constrain the spending transaction:
// abs_timelock is a check-locktime-verify style floor on the spender's
// abs_locktime, rel_timelock a floor on the age of the transaction carrying
// this condition.
struct Condition
{
    enum class Kind : uint8_t
    {
        SINGLE_SIGNATURE = 0,
        ALL_SIGNATURES = 1,
        SINGLE_SIG_HASH_LOCK = 2,
        ALL_SIG_HASH_LOCK = 3
    };

    using enum Kind;

    Kind kind = Kind::SINGLE_SIGNATURE;
    std::vector<Key> keys;
    HashVal hash = 0;           // hash-locked kinds only
    TimePoint absTimelock = 0;  // 0 = unconstrained
    TimePoint relTimelock = 0;  // 0 = unconstrained

    friend auto operator<=>(Condition const&, Condition const&) = default;

    bool
    hashLocked() const
    {
        return kind == Kind::SINGLE_SIG_HASH_LOCK ||
               kind == Kind::ALL_SIG_HASH_LOCK;
    }

    void
    serialize(CanonicalWriter& w) const
    {
        w.u8(static_cast<uint8_t>(kind));
        w.u32(static_cast<uint32_t>(keys.size()));
        for (auto const& k : keys)
        {
            k.serialize(w);
        }
        w.i64(hash);
        w.i32(absTimelock);
        w.i32(relTimelock);
    }

    static Condition
    deserialize(CanonicalReader& r)
    {
        Condition c;
        c.kind = static_cast<Kind>(r.u8());
        uint32_t n = r.u32();
        c.keys.reserve(n);
        for (uint32_t i = 0; i < n; ++i)
        {
            c.keys.push_back(Key::deserialize(r));
        }
        c.hash = r.i64();
        c.absTimelock = r.i32();
        c.relTimelock = r.i32();
        return c;
    }
};

struct Output
{
    Amount value = 0;
    std::vector<Condition> conditions;

    friend auto operator<=>(Output const&, Output const&) = default;

    void
    serialize(CanonicalWriter& w) const
    {
        w.i64(value);
        w.u32(static_cast<uint32_t>(conditions.size()));
        for (auto const& c : conditions)
        {
            c.serialize(w);
        }
    }

    static Output
    deserialize(CanonicalReader& r)
    {
        Output o;
        o.value = r.i64();
        uint32_t n = r.u32();
        o.conditions.reserve(n);
        for (uint32_t i = 0; i < n; ++i)
        {
            o.conditions.push_back(Condition::deserialize(r));
        }
        return o;
    }
};

struct OutputRef
{
    TxId tx = NO_TX;
    int32_t index = 0;

    friend auto operator<=>(OutputRef const&, OutputRef const&) = default;

    int64_t
    packed() const
    {
        return (static_cast<int64_t>(tx) << 32) | static_cast<uint32_t>(index);
    }
};

// The witness carries the keys whose owners signed the transaction and any
// preimages revealed. In the symbolic model, listing a key is the signature.
struct Witness
{
    std::vector<Key> keys;
    std::vector<HashVal> preimages;

    friend auto operator<=>(Witness const&, Witness const&) = default;

    bool
    hasKey(Key const& k) const
    {
        return std::find(keys.begin(), keys.end(), k) != keys.end();
    }

    bool
    hasPreimage(HashVal h) const
    {
        return std::find(preimages.begin(), preimages.end(), h) !=
               preimages.end();
    }

    void
    serialize(CanonicalWriter& w) const
    {
        w.u32(static_cast<uint32_t>(keys.size()));
        for (auto const& k : keys)
        {
            k.serialize(w);
        }
        w.u32(static_cast<uint32_t>(preimages.size()));
        for (auto const& p : preimages)
        {
            w.i64(p);
        }
    }

    static Witness
    deserialize(CanonicalReader& r)
    {
        Witness wit;
        uint32_t nk = r.u32();
        wit.keys.reserve(nk);
        for (uint32_t i = 0; i < nk; ++i)
        {
            wit.keys.push_back(Key::deserialize(r));
        }
        uint32_t np = r.u32();
        wit.preimages.reserve(np);
        for (uint32_t i = 0; i < np; ++i)
        {
            wit.preimages.push_back(r.i64());
        }
        return wit;
    }
};

struct Input
{
    OutputRef prev;
    TimePoint relTimelock = 0; // extra sequence-style floor on the source age
    Witness witness;

    friend auto operator<=>(Input const&, Input const&) = default;

    void
    serialize(CanonicalWriter& w) const
    {
        w.i32(prev.tx);
        w.i32(prev.index);
        w.i32(relTimelock);
        witness.serialize(w);
    }

    static Input
    deserialize(CanonicalReader& r)
    {
        Input in;
        in.prev.tx = r.i32();
        in.prev.index = r.i32();
        in.relTimelock = r.i32();
        in.witness = Witness::deserialize(r);
        return in;
    }
};

struct Transaction
{
    TxId id = NO_TX;
    TimePoint absLocktime = 0;
    std::vector<Input> inputs;
    std::vector<Output> outputs;

    friend auto operator<=>(Transaction const&, Transaction const&) = default;

    void
    serialize(CanonicalWriter& w) const
    {
        w.i32(id);
        w.i32(absLocktime);
        w.u32(static_cast<uint32_t>(inputs.size()));
        for (auto const& in : inputs)
        {
            in.serialize(w);
        }
        w.u32(static_cast<uint32_t>(outputs.size()));
        for (auto const& o : outputs)
        {
            o.serialize(w);
        }
    }

    static Transaction
    deserialize(CanonicalReader& r)
    {
        Transaction t;
        t.id = r.i32();
        t.absLocktime = r.i32();
        uint32_t ni = r.u32();
        t.inputs.reserve(ni);
        for (uint32_t i = 0; i < ni; ++i)
        {
            t.inputs.push_back(Input::deserialize(r));
        }
        uint32_t no = r.u32();
        t.outputs.reserve(no);
        for (uint32_t i = 0; i < no; ++i)
        {
            t.outputs.push_back(Output::deserialize(r));
        }
        return t;
    }
};

// Tunable validation/construction rules. The insecure variants exist solely
// as regression targets for the checker and can only be constructed in
// binaries compiled with LNMC_ENABLE_FLAW_INJECTION; release tools always use
// the defaults.
struct ProtocolRules
{
    // Enforce "condition.abs_timelock <= spending tx.abs_locktime". When
    // disabled, validation degrades to "condition.abs_timelock <= now",
    // which lets a transaction whose locktime predates the condition's
    // timelock satisfy it once enough time has passed.
    bool cltvCheck = true;

    // Resolve commitment HTLC outputs through pre-signed second-stage
    // transactions whose outputs stay delayed and revocable. When disabled,
    // HTLC outputs are claimable directly to clean outputs.
    bool twoStageHtlc = true;

#ifdef LNMC_ENABLE_FLAW_INJECTION
    static ProtocolRules
    withoutCltvCheck()
    {
        ProtocolRules r;
        r.cltvCheck = false;
        return r;
    }

    static ProtocolRules
    withFoldedHtlcOutputs()
    {
        ProtocolRules r;
        r.twoStageHtlc = false;
        return r;
    }
#endif
};

enum class TxError
{
    OK = 0,
    LOCKTIME_IN_FUTURE,
    NO_INPUTS,
    DUPLICATE_ID,
    UNKNOWN_OUTPUT,
    ALREADY_SPENT,
    UNSATISFIED_CONDITION,
    VALUE_MISMATCH
};

inline char const*
txErrorName(TxError e)
{
    switch (e)
    {
    case TxError::OK:
        return "ok";
    case TxError::LOCKTIME_IN_FUTURE:
        return "locktime-in-future";
    case TxError::NO_INPUTS:
        return "no-inputs";
    case TxError::DUPLICATE_ID:
        return "duplicate-id";
    case TxError::UNKNOWN_OUTPUT:
        return "unknown-output";
    case TxError::ALREADY_SPENT:
        return "already-spent";
    case TxError::UNSATISFIED_CONDITION:
        return "unsatisfied-condition";
    case TxError::VALUE_MISMATCH:
        return "value-mismatch";
    }
    return "?";
}

// Append-only set of published (hence final) transactions, with per-output
// spent tracking and age clocks. Ages are tracked lazily: only transactions
// carrying relative-timelocked output conditions get a clock, and the clock
// is dropped once every output of the transaction is spent. Transactions are
// kept sorted by id so serialization does not depend on publication order.
struct Ledger
{
    std::vector<Transaction> txs;
    std::vector<std::pair<TxId, TimePoint>> ages; // sorted by tx id

    // Derived index, not serialized: packed refs of spent outputs.
    std::vector<int64_t> spentRefs;

    Transaction const*
    findTx(TxId id) const
    {
        auto it = std::partition_point(txs.begin(), txs.end(),
                                       [&](auto const& t)
                                       { return t.id < id; });
        return (it != txs.end() && it->id == id) ? &*it : nullptr;
    }

    bool
    isSpent(OutputRef ref) const
    {
        return std::binary_search(spentRefs.begin(), spentRefs.end(),
                                  ref.packed());
    }

    Output const*
    findUnspent(OutputRef ref) const
    {
        auto const* tx = findTx(ref.tx);
        if (!tx || ref.index < 0 ||
            ref.index >= static_cast<int32_t>(tx->outputs.size()) ||
            isSpent(ref))
        {
            return nullptr;
        }
        return &tx->outputs[ref.index];
    }

    TimePoint
    ageOf(TxId id) const
    {
        auto it = std::partition_point(ages.begin(), ages.end(),
                                       [&](auto const& a)
                                       { return a.first < id; });
        return (it != ages.end() && it->first == id) ? it->second : 0;
    }

    bool
    tracksAge(TxId id) const
    {
        auto it = std::partition_point(ages.begin(), ages.end(),
                                       [&](auto const& a)
                                       { return a.first < id; });
        return it != ages.end() && it->first == id;
    }

    Amount
    totalUnspentValue() const
    {
        Amount sum = 0;
        for (auto const& tx : txs)
        {
            for (size_t i = 0; i < tx.outputs.size(); ++i)
            {
                if (!isSpent({tx.id, static_cast<int32_t>(i)}))
                {
                    sum += tx.outputs[i].value;
                }
            }
        }
        return sum;
    }

    void
    serialize(CanonicalWriter& w) const
    {
        w.u32(static_cast<uint32_t>(txs.size()));
        for (auto const& t : txs)
        {
            t.serialize(w);
        }
        w.u32(static_cast<uint32_t>(ages.size()));
        for (auto const& [id, age] : ages)
        {
            w.i32(id);
            w.i32(age);
        }
    }

    static Ledger
    deserialize(CanonicalReader& r)
    {
        Ledger lg;
        uint32_t nt = r.u32();
        lg.txs.reserve(nt);
        for (uint32_t i = 0; i < nt; ++i)
        {
            lg.txs.push_back(Transaction::deserialize(r));
        }
        uint32_t na = r.u32();
        lg.ages.reserve(na);
        for (uint32_t i = 0; i < na; ++i)
        {
            TxId id = r.i32();
            TimePoint age = r.i32();
            lg.ages.emplace_back(id, age);
        }
        // spentRefs is a derived index: every input of a published
        // transaction spends its source exactly once.
        for (auto const& t : lg.txs)
        {
            for (auto const& in : t.inputs)
            {
                lg.spentRefs.push_back(in.prev.packed());
            }
        }
        std::sort(lg.spentRefs.begin(), lg.spentRefs.end());
        return lg;
    }
};

// Key material a user can sign with: its own permanent key, every revocation
// key it generated itself, plus every revocation key whose private half the
// counterparty has handed over.
struct KeyRing
{
    UserId self = NO_USER;
    std::set<std::tuple<UserId, ChannelId, int32_t>> revocationKeys;

    bool
    canSign(Key const& k) const
    {
        if (k.kind == Key::Kind::USER)
        {
            return k.owner == self;
        }
        if (k.owner == self)
        {
            return true;
        }
        return revocationKeys.count({k.owner, k.channel, k.index}) != 0;
    }
};

namespace detail
{
inline bool
conditionSatisfied(Condition const& cond, Input const& in,
                   Transaction const& tx, Ledger const& ledger,
                   ProtocolRules const& rules, TimePoint now)
{
    for (auto const& k : cond.keys)
    {
        if (!in.witness.hasKey(k))
        {
            return false;
        }
    }
    if (cond.hashLocked() && !in.witness.hasPreimage(cond.hash))
    {
        return false;
    }
    if (cond.absTimelock > 0)
    {
        // Check-locktime-verify: the spending transaction must commit to a
        // locktime at or past the condition's floor. The flawed variant
        // compares against the current time instead, accepting spenders
        // whose own locktime never acknowledged the floor.
        TimePoint reference = rules.cltvCheck ? tx.absLocktime : now;
        if (cond.absTimelock > reference)
        {
            return false;
        }
    }
    TimePoint requiredAge = std::max(cond.relTimelock, in.relTimelock);
    if (requiredAge > 0 && ledger.ageOf(in.prev.tx) < requiredAge)
    {
        return false;
    }
    return true;
}
} // namespace detail

// Full validity of a candidate transaction against the current chain state:
// locktime reached, inputs unspent and distinct, one condition per input
// satisfied, and value conserved.
inline TxError
validateTransaction(Ledger const& ledger, Transaction const& tx,
                    TimePoint now, ProtocolRules const& rules = {})
{
    if (tx.absLocktime > now)
    {
        return TxError::LOCKTIME_IN_FUTURE;
    }
    if (tx.inputs.empty())
    {
        return TxError::NO_INPUTS;
    }
    if (ledger.findTx(tx.id) != nullptr)
    {
        return TxError::DUPLICATE_ID;
    }
    Amount inValue = 0;
    std::set<int64_t> seen;
    for (auto const& in : tx.inputs)
    {
        if (!seen.insert(in.prev.packed()).second)
        {
            return TxError::ALREADY_SPENT;
        }
        auto const* src = ledger.findTx(in.prev.tx);
        if (!src || in.prev.index < 0 ||
            in.prev.index >= static_cast<int32_t>(src->outputs.size()))
        {
            return TxError::UNKNOWN_OUTPUT;
        }
        if (ledger.isSpent(in.prev))
        {
            return TxError::ALREADY_SPENT;
        }
        Output const& out = src->outputs[in.prev.index];
        bool ok = false;
        for (auto const& cond : out.conditions)
        {
            if (detail::conditionSatisfied(cond, in, tx, ledger, rules, now))
            {
                ok = true;
                break;
            }
        }
        if (!ok)
        {
            return TxError::UNSATISFIED_CONDITION;
        }
        inValue += out.value;
    }
    Amount outValue = 0;
    for (auto const& o : tx.outputs)
    {
        outValue += o.value;
    }
    if (inValue != outValue)
    {
        return TxError::VALUE_MISMATCH;
    }
    return TxError::OK;
}

// Appends a validated transaction: marks inputs spent, starts an age clock
// if any output carries a relative timelock, and drops age clocks of
// transactions that just became fully spent.
inline void
publishTransaction(Ledger& ledger, Transaction const& tx, TimePoint now,
                   ProtocolRules const& rules = {})
{
    TxError err = validateTransaction(ledger, tx, now, rules);
    (void)err;
    assert(err == TxError::OK);

    std::vector<TxId> touched;
    for (auto const& in : tx.inputs)
    {
        auto packed = in.prev.packed();
        auto it = std::lower_bound(ledger.spentRefs.begin(),
                                   ledger.spentRefs.end(), packed);
        ledger.spentRefs.insert(it, packed);
        touched.push_back(in.prev.tx);
    }

    auto pos = std::partition_point(ledger.txs.begin(), ledger.txs.end(),
                                    [&](auto const& t)
                                    { return t.id < tx.id; });
    ledger.txs.insert(pos, tx);

    bool needsAge = false;
    for (auto const& o : tx.outputs)
    {
        for (auto const& c : o.conditions)
        {
            needsAge = needsAge || c.relTimelock > 0;
        }
    }
    if (needsAge)
    {
        auto it = std::partition_point(ledger.ages.begin(), ledger.ages.end(),
                                       [&](auto const& a)
                                       { return a.first < tx.id; });
        ledger.ages.insert(it, {tx.id, 0});
    }

    for (TxId id : touched)
    {
        auto const* src = ledger.findTx(id);
        // The clock exists for relative-timelock checks, which in this model
        // only output conditions impose; once every rel-locked output is
        // spent the age can no longer influence validation.
        bool clockNeeded = false;
        for (size_t i = 0; i < src->outputs.size(); ++i)
        {
            if (ledger.isSpent({id, static_cast<int32_t>(i)}))
            {
                continue;
            }
            for (auto const& c : src->outputs[i].conditions)
            {
                clockNeeded = clockNeeded || c.relTimelock > 0;
            }
        }
        if (!clockNeeded)
        {
            auto it = std::partition_point(ledger.ages.begin(),
                                           ledger.ages.end(),
                                           [&](auto const& a)
                                           { return a.first < id; });
            if (it != ledger.ages.end() && it->first == id)
            {
                ledger.ages.erase(it);
            }
        }
    }
}

// Constructs the genesis ledger: one coinbase transaction per user holding
// its initial balance behind a bare single-signature condition. Coinbase
// transactions are the only ones admitted without inputs.
inline Ledger
genesisLedger(std::vector<std::pair<TxId, std::pair<UserId, Amount>>> const&
                  coinbases)
{
    Ledger ledger;
    for (auto const& [id, ua] : coinbases)
    {
        Transaction tx;
        tx.id = id;
        if (ua.second > 0)
        {
            Output out;
            out.value = ua.second;
            out.conditions.push_back(Condition{
                Condition::Kind::SINGLE_SIGNATURE, {userKey(ua.first)}, 0, 0,
                0});
            tx.outputs.push_back(out);
        }
        auto pos = std::partition_point(ledger.txs.begin(), ledger.txs.end(),
                                        [&](auto const& t)
                                        { return t.id < tx.id; });
        ledger.txs.insert(pos, tx);
    }
    return ledger;
}

struct SpendableOutput
{
    OutputRef ref;
    int32_t conditionIndex = 0;
    Amount value = 0;
};

// Enumerates every unspent (output, condition) pair the user could spend
// right now with a fresh transaction: it can sign all required keys, holds a
// required preimage, the age floor is met, and the condition's absolute
// timelock has passed (a fresh spender's locktime can be set at most to
// `now`, so a higher floor is unreachable today).
inline std::vector<SpendableOutput>
spendableOutputs(Ledger const& ledger, KeyRing const& keys,
                 std::set<HashVal> const& preimages, TimePoint now)
{
    std::vector<SpendableOutput> result;
    for (auto const& tx : ledger.txs)
    {
        for (size_t i = 0; i < tx.outputs.size(); ++i)
        {
            OutputRef ref{tx.id, static_cast<int32_t>(i)};
            if (ledger.isSpent(ref))
            {
                continue;
            }
            auto const& out = tx.outputs[i];
            for (size_t ci = 0; ci < out.conditions.size(); ++ci)
            {
                auto const& cond = out.conditions[ci];
                bool canSign = true;
                for (auto const& k : cond.keys)
                {
                    canSign = canSign && keys.canSign(k);
                }
                if (!canSign)
                {
                    continue;
                }
                if (cond.hashLocked() && preimages.count(cond.hash) == 0)
                {
                    continue;
                }
                if (cond.absTimelock > now)
                {
                    continue;
                }
                if (cond.relTimelock > 0 &&
                    ledger.ageOf(tx.id) < cond.relTimelock)
                {
                    continue;
                }
                result.push_back(
                    {ref, static_cast<int32_t>(ci), out.value});
                break;
            }
        }
    }
    return result;
}

// An output counts toward a user's on-chain balance only when it is
// exclusively theirs by structure: every condition demands exactly the
// user's own permanent key, so no counterparty key and no revocation path
// can ever divert it. Delayed or hash-locked self-owned conditions still
// qualify; anything mentioning another key (including the user's own
// revocation keys, whose private halves may have been handed over) does not.
inline bool
exclusivelyOwned(Output const& out, UserId user)
{
    if (out.conditions.empty())
    {
        return false;
    }
    for (auto const& cond : out.conditions)
    {
        for (auto const& k : cond.keys)
        {
            if (k.kind != Key::Kind::USER || k.owner != user)
            {
                return false;
            }
        }
        if (cond.keys.empty())
        {
            return false;
        }
    }
    return true;
}

inline Amount
onchainBalance(Ledger const& ledger, UserId user)
{
    Amount sum = 0;
    for (auto const& tx : ledger.txs)
    {
        for (size_t i = 0; i < tx.outputs.size(); ++i)
        {
            if (ledger.isSpent({tx.id, static_cast<int32_t>(i)}))
            {
                continue;
            }
            if (exclusivelyOwned(tx.outputs[i], user))
            {
                sum += tx.outputs[i].value;
            }
        }
    }
    return sum;
}

} // namespace lnmc
