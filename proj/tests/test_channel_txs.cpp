// Copyright 2026 the lnmc contributors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0
#include "helpers.hpp"

#include "lnmc/channel_txs.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace lnmc;

namespace
{

std::vector<Key>
sortedKeys(std::vector<Key> ks)
{
    std::sort(ks.begin(), ks.end());
    return ks;
}

CommitSnapshot
snapWith(int32_t index, TxId txId, Amount own, Amount peer,
         std::vector<SnapHtlc> htlcs = {})
{
    CommitSnapshot s;
    s.index = index;
    s.txId = txId;
    s.balanceOwner = own;
    s.balancePeer = peer;
    s.htlcs = std::move(htlcs);
    return s;
}

SnapHtlc
htlcWith(PaymentId id, Amount amount, HashVal hash, TimePoint timelock,
         bool offeredByOwner, TxId secondStage)
{
    SnapHtlc h;
    h.id = id;
    h.amount = amount;
    h.hash = hash;
    h.timelock = timelock;
    h.offeredByOwner = offeredByOwner;
    h.secondStageTxId = secondStage;
    return h;
}

} // namespace

TEST_CASE("commitment transaction output layout", "[channel_txs]")
{
    auto spec = test::specFor("c1.toml");
    auto const& ctx = spec.ctx;
    REQUIRE(ctx.sideUser(0, 0) == 0); // A
    REQUIRE(ctx.sideUser(0, 1) == 1); // B

    ChannelState cs;
    cs.fundingTxId = 3;
    auto snap = snapWith(2, 40, 6, 3,
                         {htlcWith(1, 1, 1001, 8, /*offered*/ true, 41)});

    Transaction tx = buildCommitmentTx(ctx, 0, 0, cs, snap);
    CHECK(tx.id == 40);
    CHECK(tx.absLocktime == 0);
    REQUIRE(tx.inputs.size() == 1);
    CHECK(tx.inputs[0].prev.tx == 3);
    CHECK(tx.inputs[0].prev.index == 0);
    CHECK(tx.inputs[0].witness.keys ==
          sortedKeys({userKey(0), userKey(1)}));

    REQUIRE(tx.outputs.size() == 3);
    CHECK(commitmentToLocalIndex(snap) == 0);
    CHECK(commitmentHtlcOutputIndex(snap, 1) == 2);
    CHECK(commitmentHtlcOutputIndex(snap, 99) == -1);

    // to_local: delayed self-claim plus the revocable path.
    auto const& toLocal = tx.outputs[0];
    CHECK(toLocal.value == 6);
    REQUIRE(toLocal.conditions.size() == 2);
    CHECK(toLocal.conditions[0].kind == Condition::SINGLE_SIGNATURE);
    CHECK(toLocal.conditions[0].keys == std::vector<Key>{userKey(0)});
    CHECK(toLocal.conditions[0].relTimelock ==
          ctx.scenario.constants.toSelfDelay);
    CHECK(toLocal.conditions[1].kind == Condition::ALL_SIGNATURES);
    CHECK(toLocal.conditions[1].keys ==
          sortedKeys({revocationKey(0, 0, 2), userKey(1)}));

    // to_remote: immediately spendable by the peer.
    auto const& toRemote = tx.outputs[1];
    CHECK(toRemote.value == 3);
    REQUIRE(toRemote.conditions.size() == 1);
    CHECK(toRemote.conditions[0].kind == Condition::SINGLE_SIGNATURE);
    CHECK(toRemote.conditions[0].keys == std::vector<Key>{userKey(1)});
    CHECK(toRemote.conditions[0].relTimelock == 0);
    CHECK(toRemote.conditions[0].absTimelock == 0);

    // Offered HTLC: revoke, peer hash claim, pre-signed timeout path.
    auto const& htlcOut = tx.outputs[2];
    CHECK(htlcOut.value == 1);
    REQUIRE(htlcOut.conditions.size() == 3);
    CHECK(htlcOut.conditions[0].kind == Condition::ALL_SIGNATURES);
    CHECK(htlcOut.conditions[0].keys ==
          sortedKeys({revocationKey(0, 0, 2), userKey(1)}));
    CHECK(htlcOut.conditions[1].kind == Condition::SINGLE_SIG_HASH_LOCK);
    CHECK(htlcOut.conditions[1].keys == std::vector<Key>{userKey(1)});
    CHECK(htlcOut.conditions[1].hash == 1001);
    CHECK(htlcOut.conditions[2].kind == Condition::ALL_SIGNATURES);
    CHECK(htlcOut.conditions[2].keys ==
          sortedKeys({userKey(0), userKey(1)}));
    CHECK(htlcOut.conditions[2].absTimelock == 8);

    Amount total = 0;
    for (auto const& o : tx.outputs)
    {
        total += o.value;
    }
    CHECK(total == ctx.scenario.channels[0].capacity);
    CHECK(spendsFunding(tx, 3));
    CHECK_FALSE(spendsFunding(tx, 40));

    auto tag = revocationTagOf(tx);
    REQUIRE(tag.has_value());
    CHECK(tag->owner == 0);
    CHECK(tag->index == 2);
}

TEST_CASE("zero-balance commitment sides are omitted", "[channel_txs]")
{
    auto spec = test::specFor("c1.toml");
    ChannelState cs;
    cs.fundingTxId = 3;

    auto allPeer = snapWith(0, 40, 0, 10);
    Transaction tx = buildCommitmentTx(spec.ctx, 0, 0, cs, allPeer);
    REQUIRE(tx.outputs.size() == 1);
    CHECK(tx.outputs[0].value == 10);
    CHECK(commitmentToLocalIndex(allPeer) == -1);
    CHECK(revocationTagOf(tx) == std::nullopt);

    auto allOwner = snapWith(0, 40, 10, 0);
    tx = buildCommitmentTx(spec.ctx, 0, 0, cs, allOwner);
    REQUIRE(tx.outputs.size() == 1);
    CHECK(commitmentToLocalIndex(allOwner) == 0);
    REQUIRE(revocationTagOf(tx).has_value());

    auto withHtlc = snapWith(1, 42, 0, 7, {htlcWith(1, 3, 1001, 8, true, 43)});
    CHECK(commitmentHtlcOutputIndex(withHtlc, 1) == 1);
}

TEST_CASE("received HTLC output shape", "[channel_txs]")
{
    auto spec = test::specFor("c1.toml");
    ChannelState cs;
    cs.fundingTxId = 3;
    // B's commitment for the same channel state: B received the HTLC.
    auto snap = snapWith(1, 45, 3, 6,
                         {htlcWith(1, 1, 1001, 8, /*offered*/ false, 46)});
    Transaction tx = buildCommitmentTx(spec.ctx, 0, 1, cs, snap);

    REQUIRE(tx.outputs.size() == 3);
    auto const& htlcOut = tx.outputs[2];
    CHECK(htlcOut.conditions[0].kind == Condition::ALL_SIGNATURES);
    CHECK(htlcOut.conditions[0].keys ==
          sortedKeys({revocationKey(1, 0, 1), userKey(0)}));
    // Success path is pre-signed: both signatures plus the preimage.
    CHECK(htlcOut.conditions[1].kind == Condition::ALL_SIG_HASH_LOCK);
    CHECK(htlcOut.conditions[1].keys ==
          sortedKeys({userKey(0), userKey(1)}));
    CHECK(htlcOut.conditions[1].hash == 1001);
    // Timeout path goes back to the offering peer after the timelock.
    CHECK(htlcOut.conditions[2].kind == Condition::SINGLE_SIGNATURE);
    CHECK(htlcOut.conditions[2].keys == std::vector<Key>{userKey(0)});
    CHECK(htlcOut.conditions[2].absTimelock == 8);

    auto tag = revocationTagOf(tx);
    REQUIRE(tag.has_value());
    CHECK(tag->owner == 1);
    CHECK(tag->index == 1);
}

TEST_CASE("second-stage success and timeout transactions", "[channel_txs]")
{
    auto spec = test::specFor("c1.toml");
    auto const& ctx = spec.ctx;

    auto received = htlcWith(1, 1, 1001, 8, /*offered*/ false, 46);
    auto snap = snapWith(1, 45, 3, 6, {received});

    Transaction success =
        buildSecondStageTx(ctx, 0, 1, snap, received, true, 1001);
    CHECK(success.id == 46);
    CHECK(success.absLocktime == 0);
    REQUIRE(success.inputs.size() == 1);
    CHECK(success.inputs[0].prev.tx == 45);
    CHECK(success.inputs[0].prev.index ==
          commitmentHtlcOutputIndex(snap, 1));
    CHECK(success.inputs[0].witness.preimages ==
          std::vector<HashVal>{1001});
    REQUIRE(success.outputs.size() == 1);
    auto const& o = success.outputs[0];
    CHECK(o.value == 1);
    REQUIRE(o.conditions.size() == 2);
    CHECK(o.conditions[0].kind == Condition::SINGLE_SIGNATURE);
    CHECK(o.conditions[0].keys == std::vector<Key>{userKey(1)});
    CHECK(o.conditions[0].relTimelock == ctx.scenario.constants.toSelfDelay);
    CHECK(o.conditions[1].kind == Condition::ALL_SIGNATURES);
    CHECK(o.conditions[1].keys ==
          sortedKeys({revocationKey(1, 0, 1), userKey(0)}));

    auto offered = htlcWith(1, 1, 1001, 8, /*offered*/ true, 41);
    auto snapA = snapWith(2, 40, 6, 3, {offered});
    Transaction timeout =
        buildSecondStageTx(ctx, 0, 0, snapA, offered, false, std::nullopt);
    CHECK(timeout.id == 41);
    CHECK(timeout.absLocktime == 8);
    CHECK(timeout.inputs[0].witness.preimages.empty());
    REQUIRE(timeout.outputs.size() == 1);
    CHECK(timeout.outputs[0].conditions[0].keys ==
          std::vector<Key>{userKey(0)});
}

TEST_CASE("folded rules claim HTLC outputs directly", "[channel_txs]")
{
    auto spec = test::specFor("c1.toml", ProtocolRules::withFoldedHtlcOutputs());
    ChannelState cs;
    cs.fundingTxId = 3;

    auto offered = snapWith(2, 40, 6, 3, {htlcWith(1, 1, 1001, 8, true, 41)});
    Transaction tx = buildCommitmentTx(spec.ctx, 0, 0, cs, offered);
    auto const& off = tx.outputs[2];
    CHECK(off.conditions[1].kind == Condition::SINGLE_SIG_HASH_LOCK);
    CHECK(off.conditions[1].keys == std::vector<Key>{userKey(1)});
    // Timeout pays the owner directly instead of via a pre-signed,
    // revocable second stage.
    CHECK(off.conditions[2].kind == Condition::SINGLE_SIGNATURE);
    CHECK(off.conditions[2].keys == std::vector<Key>{userKey(0)});
    CHECK(off.conditions[2].absTimelock == 8);

    auto rec = snapWith(1, 45, 3, 6, {htlcWith(1, 1, 1001, 8, false, 46)});
    tx = buildCommitmentTx(spec.ctx, 0, 1, cs, rec);
    auto const& in = tx.outputs[2];
    CHECK(in.conditions[1].kind == Condition::SINGLE_SIG_HASH_LOCK);
    CHECK(in.conditions[1].keys == std::vector<Key>{userKey(1)});
    CHECK(in.conditions[2].kind == Condition::SINGLE_SIGNATURE);
    CHECK(in.conditions[2].keys == std::vector<Key>{userKey(0)});
}

TEST_CASE("funding transaction construction", "[channel_txs]")
{
    auto spec = test::specFor("c1.toml");
    auto const& ctx = spec.ctx;

    SECTION("spends the first sufficient exclusively-owned output")
    {
        Ledger ledger = genesisLedger({{1, {0, 25}}, {2, {1, 5}}});
        auto tx = buildFundingTx(ctx, 0, ledger);
        REQUIRE(tx.has_value());
        CHECK(tx->id == ctx.scenario.channels[0].txIdLo);
        REQUIRE(tx->inputs.size() == 1);
        CHECK(tx->inputs[0].prev.tx == 1);
        CHECK(tx->inputs[0].prev.index == 0);

        REQUIRE(tx->outputs.size() == 2);
        CHECK(tx->outputs[0].value == 10);
        REQUIRE(tx->outputs[0].conditions.size() == 1);
        CHECK(tx->outputs[0].conditions[0].kind == Condition::ALL_SIGNATURES);
        CHECK(tx->outputs[0].conditions[0].keys ==
              sortedKeys({userKey(0), userKey(1)}));
        CHECK(tx->outputs[1].value == 15);
        CHECK(tx->outputs[1].conditions[0].keys ==
              std::vector<Key>{userKey(0)});
        CHECK(spendsFunding(
            Transaction{0, 0, {Input{{tx->id, 0}, 0, {}}}, {}}, tx->id));

        CHECK(validateTransaction(ledger, *tx, 0) == TxError::OK);
        publishTransaction(ledger, *tx, 0);
        CHECK(ledger.isSpent(OutputRef{1, 0}));
    }

    SECTION("exact-value input produces no change output")
    {
        Ledger ledger = genesisLedger({{1, {0, 10}}});
        auto tx = buildFundingTx(ctx, 0, ledger);
        REQUIRE(tx.has_value());
        CHECK(tx->outputs.size() == 1);
        CHECK(validateTransaction(ledger, *tx, 0) == TxError::OK);
    }

    SECTION("insufficient or foreign funds yield no transaction")
    {
        Ledger small = genesisLedger({{1, {0, 9}}});
        CHECK(buildFundingTx(ctx, 0, small) == std::nullopt);
        Ledger wrongOwner = genesisLedger({{1, {1, 25}}});
        CHECK(buildFundingTx(ctx, 0, wrongOwner) == std::nullopt);
    }

    SECTION("spent outputs are skipped")
    {
        Ledger ledger = genesisLedger({{1, {0, 25}}, {2, {0, 12}}});
        auto first = buildFundingTx(ctx, 0, ledger);
        REQUIRE(first.has_value());
        CHECK(first->inputs[0].prev.tx == 1);
        publishTransaction(ledger, *first, 0);
        // Re-picking must move on to the next owned output. (A second
        // channel would use its own id range; reuse channel 0 for the pick
        // logic only.)
        auto again = buildFundingTx(ctx, 0, ledger);
        REQUIRE(again.has_value());
        CHECK(again->inputs[0].prev.tx == 2);
    }
}

TEST_CASE("clean outputs are plain single-signature settlements",
          "[channel_txs]")
{
    Output plain;
    plain.value = 5;
    Condition c;
    c.kind = Condition::SINGLE_SIGNATURE;
    c.keys = {userKey(0)};
    plain.conditions = {c};
    CHECK(cleanOutput(plain));

    Output delayed = plain;
    delayed.conditions[0].relTimelock = 1;
    CHECK_FALSE(cleanOutput(delayed));

    Output locked = plain;
    locked.conditions[0].absTimelock = 4;
    CHECK_FALSE(cleanOutput(locked));

    Output twoPath = plain;
    twoPath.conditions.push_back(c);
    CHECK_FALSE(cleanOutput(twoPath));
}
