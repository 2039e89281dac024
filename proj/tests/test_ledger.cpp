// Copyright 2026 the lnmc contributors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0

#include "lnmc/ledger.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace lnmc;

namespace
{

// Coinbase 1: 20 to A(0); coinbase 2: 5 to B(1).
Ledger
fixtureLedger()
{
    return genesisLedger({{1, {0, 20}}, {2, {1, 5}}});
}

Transaction
simpleSpend(TxId id, OutputRef src, Amount value, UserId signer,
            Condition destCond)
{
    Transaction tx;
    tx.id = id;
    Input in;
    in.prev = src;
    in.witness.keys.push_back(userKey(signer));
    tx.inputs.push_back(in);
    Output out;
    out.value = value;
    out.conditions.push_back(std::move(destCond));
    tx.outputs.push_back(out);
    return tx;
}

Condition
plainSig(UserId u)
{
    return Condition{Condition::Kind::SINGLE_SIGNATURE, {userKey(u)}, 0, 0,
                     0};
}

} // namespace

TEST_CASE("unconditioned single-signature spend validates", "[ledger]")
{
    Ledger ledger = fixtureLedger();
    auto tx = simpleSpend(10, {1, 0}, 20, 0, plainSig(0));
    CHECK(validateTransaction(ledger, tx, 0) == TxError::OK);

    SECTION("wrong signer fails")
    {
        tx.inputs[0].witness.keys = {userKey(1)};
        CHECK(validateTransaction(ledger, tx, 0) ==
              TxError::UNSATISFIED_CONDITION);
    }
    SECTION("value must be conserved")
    {
        tx.outputs[0].value = 19;
        CHECK(validateTransaction(ledger, tx, 0) == TxError::VALUE_MISMATCH);
    }
    SECTION("unknown output ref fails")
    {
        tx.inputs[0].prev = {7, 0};
        CHECK(validateTransaction(ledger, tx, 0) == TxError::UNKNOWN_OUTPUT);
    }
}

TEST_CASE("absolute timelock uses the spender's committed locktime",
          "[ledger]")
{
    // One output with a timeout condition at absolute time 10. A spender
    // whose own locktime stayed 0 must be rejected no matter how late it
    // is; committing to locktime >= 10 (which delays validity to then)
    // makes it spendable.
    Ledger ledger = fixtureLedger();
    Transaction lockTx;
    lockTx.id = 10;
    Input in;
    in.prev = {1, 0};
    in.witness.keys.push_back(userKey(0));
    lockTx.inputs.push_back(in);
    Output out;
    out.value = 20;
    out.conditions.push_back(
        Condition{Condition::Kind::SINGLE_SIGNATURE, {userKey(0)}, 0, 10, 0});
    lockTx.outputs.push_back(out);
    publishTransaction(ledger, lockTx, 0);

    auto spend = simpleSpend(11, {10, 0}, 20, 0, plainSig(0));
    spend.absLocktime = 0;
    CHECK(validateTransaction(ledger, spend, 15) ==
          TxError::UNSATISFIED_CONDITION);

    spend.absLocktime = 10;
    CHECK(validateTransaction(ledger, spend, 15) == TxError::OK);
    // ... but such a spender is itself not valid before its locktime.
    CHECK(validateTransaction(ledger, spend, 9) ==
          TxError::LOCKTIME_IN_FUTURE);

    SECTION("flawed validator accepts the uncommitted spender late")
    {
        spend.absLocktime = 0;
        auto flawed = ProtocolRules::withoutCltvCheck();
        CHECK(validateTransaction(ledger, spend, 15, flawed) == TxError::OK);
        CHECK(validateTransaction(ledger, spend, 9, flawed) ==
              TxError::UNSATISFIED_CONDITION);
    }
}

TEST_CASE("relative timelock compares the source age against the floor",
          "[ledger]")
{
    TimePoint const toSelfDelay = 3;
    for (TimePoint age = 0; age <= toSelfDelay; ++age)
    {
        Ledger ledger = fixtureLedger();
        Transaction delayed;
        delayed.id = 10;
        Input in;
        in.prev = {1, 0};
        in.witness.keys.push_back(userKey(0));
        delayed.inputs.push_back(in);
        Output out;
        out.value = 20;
        out.conditions.push_back(Condition{Condition::Kind::SINGLE_SIGNATURE,
                                           {userKey(0)},
                                           0,
                                           0,
                                           toSelfDelay});
        delayed.outputs.push_back(out);
        publishTransaction(ledger, delayed, 0);
        REQUIRE(ledger.tracksAge(10));
        ledger.ages[0].second = age;

        auto spend = simpleSpend(11, {10, 0}, 20, 0, plainSig(0));
        bool expect = age >= toSelfDelay;
        INFO("age " << age);
        CHECK((validateTransaction(ledger, spend, age) == TxError::OK) ==
              expect);

        // The input's own floor participates via max(condition, input).
        spend.inputs[0].relTimelock = toSelfDelay + 1;
        CHECK(validateTransaction(ledger, spend, age) ==
              TxError::UNSATISFIED_CONDITION);
    }
}

TEST_CASE("multi-signature and hash-lock conditions", "[ledger]")
{
    Ledger ledger = fixtureLedger();
    Transaction both;
    both.id = 10;
    Input in;
    in.prev = {1, 0};
    in.witness.keys.push_back(userKey(0));
    both.inputs.push_back(in);
    Output o1;
    o1.value = 12;
    o1.conditions.push_back(Condition{
        Condition::Kind::ALL_SIGNATURES, {userKey(0), userKey(1)}, 0, 0, 0});
    Output o2;
    o2.value = 8;
    o2.conditions.push_back(Condition{Condition::Kind::SINGLE_SIG_HASH_LOCK,
                                      {userKey(1)},
                                      77,
                                      0,
                                      0});
    both.outputs.push_back(o1);
    both.outputs.push_back(o2);
    publishTransaction(ledger, both, 0);

    SECTION("two-party output needs both signatures")
    {
        auto spend = simpleSpend(11, {10, 0}, 12, 0, plainSig(0));
        CHECK(validateTransaction(ledger, spend, 0) ==
              TxError::UNSATISFIED_CONDITION);
        spend.inputs[0].witness.keys.push_back(userKey(1));
        CHECK(validateTransaction(ledger, spend, 0) == TxError::OK);
    }
    SECTION("hash lock needs the matching preimage in the witness")
    {
        auto spend = simpleSpend(11, {10, 1}, 8, 1, plainSig(1));
        CHECK(validateTransaction(ledger, spend, 0) ==
              TxError::UNSATISFIED_CONDITION);
        spend.inputs[0].witness.preimages.push_back(78);
        CHECK(validateTransaction(ledger, spend, 0) ==
              TxError::UNSATISFIED_CONDITION);
        spend.inputs[0].witness.preimages.push_back(77);
        CHECK(validateTransaction(ledger, spend, 0) == TxError::OK);
    }
}

TEST_CASE("publication marks outputs spent and manages age clocks",
          "[ledger]")
{
    Ledger ledger = fixtureLedger();
    Amount total = ledger.totalUnspentValue();
    CHECK(total == 25);

    auto tx = simpleSpend(10, {1, 0}, 20, 0, plainSig(0));
    publishTransaction(ledger, tx, 0);
    CHECK(ledger.isSpent({1, 0}));
    CHECK(ledger.totalUnspentValue() == 25);
    // No relative timelock in any output: no age clock.
    CHECK_FALSE(ledger.tracksAge(10));

    // Double publication is a double spend, not enabled.
    auto again = simpleSpend(11, {1, 0}, 20, 0, plainSig(0));
    CHECK(validateTransaction(ledger, again, 0) == TxError::ALREADY_SPENT);
    // Reusing an id is rejected independently.
    auto reuse = simpleSpend(10, {2, 0}, 5, 1, plainSig(1));
    CHECK(validateTransaction(ledger, reuse, 0) == TxError::DUPLICATE_ID);
}

TEST_CASE("spendable set reflects keys, preimages, and publication",
          "[ledger]")
{
    Ledger ledger;
    KeyRing keysA;
    keysA.self = 0;
    CHECK(spendableOutputs(ledger, keysA, {}, 0).empty());

    ledger = fixtureLedger();
    auto mineA = spendableOutputs(ledger, keysA, {}, 0);
    REQUIRE(mineA.size() == 1);
    CHECK(mineA[0].ref.tx == 1);
    CHECK(mineA[0].value == 20);

    // Spend the coinbase into a funding-style 2-of-2; no single ring can
    // satisfy it, so it leaves both users' spendable sets.
    auto tx = simpleSpend(10, {1, 0}, 20, 0,
                          Condition{Condition::Kind::ALL_SIGNATURES,
                                    {userKey(0), userKey(1)},
                                    0,
                                    0,
                                    0});
    publishTransaction(ledger, tx, 0);
    mineA = spendableOutputs(ledger, keysA, {}, 0);
    CHECK(mineA.empty());

    KeyRing keysB;
    keysB.self = 1;
    auto mineB = spendableOutputs(ledger, keysB, {}, 0);
    REQUIRE(mineB.size() == 1); // B's own coinbase only
    CHECK(mineB[0].ref.tx == 2);
}

TEST_CASE("revocation key holder can take every output of a revoked "
          "commitment",
          "[ledger]")
{
    Ledger ledger = fixtureLedger();
    // A publishes an outdated commitment-like transaction: a delayed
    // self-payout revocable by B, plus an HTLC-like output also revocable.
    Transaction cheat;
    cheat.id = 10;
    Input in;
    in.prev = {1, 0};
    in.witness.keys.push_back(userKey(0));
    cheat.inputs.push_back(in);
    Output toLocal;
    toLocal.value = 15;
    toLocal.conditions.push_back(Condition{
        Condition::Kind::SINGLE_SIGNATURE, {userKey(0)}, 0, 0, 2});
    toLocal.conditions.push_back(
        Condition{Condition::Kind::ALL_SIGNATURES,
                  {revocationKey(0, 0, 0), userKey(1)},
                  0,
                  0,
                  0});
    Output htlc;
    htlc.value = 5;
    htlc.conditions.push_back(Condition{Condition::Kind::SINGLE_SIG_HASH_LOCK,
                                        {userKey(1)},
                                        99,
                                        0,
                                        0});
    htlc.conditions.push_back(
        Condition{Condition::Kind::ALL_SIGNATURES,
                  {revocationKey(0, 0, 0), userKey(1)},
                  0,
                  0,
                  0});
    cheat.outputs.push_back(toLocal);
    cheat.outputs.push_back(htlc);
    publishTransaction(ledger, cheat, 0);

    KeyRing punisher;
    punisher.self = 1;
    punisher.revocationKeys.insert({0, 0, 0});
    auto claimable = spendableOutputs(ledger, punisher, {}, 0);
    // Both cheat outputs immediately (revocation path has no delay), plus
    // B's own coinbase.
    REQUIRE(claimable.size() == 3);
    Amount sum = 0;
    for (auto const& c : claimable)
    {
        sum += c.value;
    }
    CHECK(sum == 15 + 5 + 5);
}

TEST_CASE("exclusive ownership drives the on-chain balance", "[ledger]")
{
    Ledger ledger = fixtureLedger();
    CHECK(onchainBalance(ledger, 0) == 20);
    CHECK(onchainBalance(ledger, 1) == 5);

    // An output spendable by A after a delay but also by B via revocation
    // counts for neither side.
    Transaction tx;
    tx.id = 10;
    Input in;
    in.prev = {1, 0};
    in.witness.keys.push_back(userKey(0));
    tx.inputs.push_back(in);
    Output contested;
    contested.value = 20;
    contested.conditions.push_back(Condition{
        Condition::Kind::SINGLE_SIGNATURE, {userKey(0)}, 0, 0, 1});
    contested.conditions.push_back(
        Condition{Condition::Kind::ALL_SIGNATURES,
                  {revocationKey(0, 0, 0), userKey(1)},
                  0,
                  0,
                  0});
    tx.outputs.push_back(contested);
    publishTransaction(ledger, tx, 0);
    CHECK(onchainBalance(ledger, 0) == 0);
    CHECK(onchainBalance(ledger, 1) == 5);

    // A delayed or hash-locked output still counts when only the owner's
    // permanent key appears.
    Transaction sweep;
    sweep.id = 11;
    Input sin;
    sin.prev = {10, 0};
    sin.witness.keys.push_back(userKey(1));
    sin.witness.keys.push_back(revocationKey(0, 0, 0));
    sweep.inputs.push_back(sin);
    Output delayedOwn;
    delayedOwn.value = 20;
    delayedOwn.conditions.push_back(Condition{
        Condition::Kind::SINGLE_SIGNATURE, {userKey(1)}, 0, 0, 5});
    sweep.outputs.push_back(delayedOwn);
    publishTransaction(ledger, sweep, 0);
    CHECK(onchainBalance(ledger, 1) == 25);
}

TEST_CASE("validity is monotone in time for pure absolute timelocks",
          "[ledger]")
{
    Ledger ledger = fixtureLedger();
    Transaction lockTx;
    lockTx.id = 10;
    Input in;
    in.prev = {1, 0};
    in.witness.keys.push_back(userKey(0));
    lockTx.inputs.push_back(in);
    Output out;
    out.value = 20;
    out.conditions.push_back(
        Condition{Condition::Kind::SINGLE_SIGNATURE, {userKey(0)}, 0, 4, 0});
    lockTx.outputs.push_back(out);
    publishTransaction(ledger, lockTx, 0);

    auto spend = simpleSpend(11, {10, 0}, 20, 0, plainSig(0));
    spend.absLocktime = 4;
    bool prev = false;
    for (TimePoint t = 0; t <= 8; ++t)
    {
        bool ok = validateTransaction(ledger, spend, t) == TxError::OK;
        if (prev)
        {
            CHECK(ok);
        }
        prev = ok;
    }
    CHECK(prev);
}
