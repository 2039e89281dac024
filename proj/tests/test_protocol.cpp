// Copyright 2026 the lnmc contributors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0
#include "helpers.hpp"

#include "lnmc/invariants.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace lnmc;

namespace
{

// Apply the first label-sorted successor matching each prefix, requiring
// that every transition preserves the step and state invariants.
void
playChecked(Spec const& spec, SystemState& s,
            std::vector<std::string> const& prefixes)
{
    for (auto const& prefix : prefixes)
    {
        SystemState pre = s;
        auto label = test::applyFirst(spec, s, prefix);
        INFO("script step: " << prefix);
        REQUIRE(label.has_value());
        INFO("took: " << *label);
        auto stepErr = checkStepInvariants(spec.ctx, pre, *label, s);
        INFO("step invariant: " << stepErr.value_or("ok"));
        CHECK(stepErr == std::nullopt);
        auto stateErr = checkStateInvariants(spec.ctx, s);
        INFO("state invariant: " << stateErr.value_or("ok"));
        CHECK(stateErr == std::nullopt);
    }
}

UserView
viewOf(Spec const& spec, SystemState const& s, size_t u)
{
    return spec.project(s).users[u];
}

} // namespace

TEST_CASE("funding handshake moves the capacity into the channel",
          "[protocol]")
{
    Spec spec = test::specFor("c1.toml");
    SystemState s = spec.initials()[0];
    playChecked(spec, s, test::c1FundScript());

    auto a = viewOf(spec, s, 0);
    auto b = viewOf(spec, s, 1);
    CHECK(a.channelBalance == 10);
    CHECK(a.blockchainBalance == 0);
    CHECK(b.channelBalance == 0);
    CHECK(b.blockchainBalance == 0);
    // The conditional payment is not yet resolved for anyone.
    REQUIRE(a.legs.size() == 1);
    CHECK(a.legs[0].state == LegState::NEW);
    CHECK(b.legs[0].state == LegState::NEW);
}

TEST_CASE("cooperative payment settles inside the channel", "[protocol]")
{
    Spec spec = test::specFor("c1.toml");
    SystemState s = spec.initials()[0];
    playChecked(spec, s, test::concatScripts({test::c1FundScript(), test::c1AddScript(), test::c1SettleScript()}));

    auto a = viewOf(spec, s, 0);
    auto b = viewOf(spec, s, 1);
    CHECK(a.channelBalance == 7);
    CHECK(b.channelBalance == 3);
    CHECK(a.legs[0].state == LegState::PROCESSED);
    CHECK(b.legs[0].state == LegState::PROCESSED);
    CHECK(s.now == 0); // all of the above runs without any clock movement
}

TEST_CASE("unilateral close pays both sides out on chain", "[protocol]")
{
    Spec spec = test::specFor("c1.toml");
    SystemState s = spec.initials()[0];
    playChecked(spec, s,
                test::concatScripts({test::c1FundScript(), test::c1AddScript(), test::c1SettleScript(),
                        {"CloseChannel(a,A",
                         "NoteThatOtherPartyClosedHonestly(a,B",
                         "AdvanceTxAge(", "SweepOwnOutput(a,A"}}));

    auto a = viewOf(spec, s, 0);
    auto b = viewOf(spec, s, 1);
    CHECK(a.channelBalance == 0);
    CHECK(a.blockchainBalance == 7);
    CHECK(b.channelBalance == 0);
    CHECK(b.blockchainBalance == 3);

    // Run the clock out; the state must stay quiescent apart from time and
    // then satisfy the terminal payout floor for both honest users.
    auto atEnd = [&](SystemState const& st) { return spec.quiescent(st); };
    REQUIRE(test::driveUntil(spec, s, atEnd, {"AdvanceTime("}, 16));
    TerminalStats stats;
    CHECK(checkTerminalState(spec.ctx, s, stats) == std::nullopt);
    CHECK(stats.terminalStatesSeen == 1);
    // No revoked commitment was published, so the punishment floor is moot.
    CHECK(stats.floorChecksPerformed == 0);
}

TEST_CASE("preimage redemption on chain after a mid-payment close",
          "[protocol]")
{
    Spec spec = test::specFor("c1.toml");
    SystemState s = spec.initials()[0];
    playChecked(spec, s,
                test::concatScripts({test::c1FundScript(), test::c1AddScript(),
                        {"CloseChannel(a,A,tx=8",
                         "NoteThatOtherPartyClosedHonestly(a,B",
                         "RedeemHTLCAfterClose(a,B",
                         "NoteThatHTLCFulfilledOnChainByOtherUser(a,A",
                         "AdvanceTxAge(tx=8", "SweepOwnOutput(a,A"}}));

    auto a = viewOf(spec, s, 0);
    auto b = viewOf(spec, s, 1);
    CHECK(a.blockchainBalance == 7);
    CHECK(b.blockchainBalance == 3);
    CHECK(a.legs[0].state == LegState::PROCESSED);
    CHECK(b.legs[0].state == LegState::PROCESSED);
}

TEST_CASE("honest holders of a preimage redeem before time can advance",
          "[protocol]")
{
    Spec spec = test::specFor("c1.toml");
    SystemState s = spec.initials()[0];
    playChecked(spec, s,
                test::concatScripts({test::c1FundScript(), test::c1AddScript(),
                        {"CloseChannel(a,A,tx=8",
                         "NoteThatOtherPartyClosedHonestly(a,B"}}));
    auto succs = spec.next(s);
    CHECK(test::hasLabelPrefix(succs, "RedeemHTLCAfterClose(a,B"));
    CHECK_FALSE(test::hasLabelPrefix(succs, "AdvanceTime("));
}

TEST_CASE("offered conditional payment is reclaimed after its timelock",
          "[protocol]")
{
    Spec spec = test::specFor("c1.toml");
    // Assignment 1 keeps the payer honest and frees the receiver from the
    // obligation to redeem promptly, so the clock can pass the timelock.
    SystemState s = spec.initials()[1];
    REQUIRE(s.users[0].honest);
    REQUIRE_FALSE(s.users[1].honest);

    playChecked(spec, s,
                test::concatScripts({test::c1FundScript(), test::c1AddScript(),
                        {"CloseChannel(a,A,tx=8", "AdvanceTime("}}));
    CHECK(s.now == 8); // jumps straight to the payment deadline

    playChecked(spec, s,
                {"RedeemHTLCAfterClose(a,A", "AdvanceTxAge(tx=9",
                 "SweepOwnOutput(a,A,src=9", "AdvanceTxAge(tx=8",
                 "SweepOwnOutput(a,A,src=8"});

    auto a = viewOf(spec, s, 0);
    CHECK(a.blockchainBalance == 10);
    CHECK(a.channelBalance == 0);
    CHECK(a.legs[0].state == LegState::ABORTED);
}

TEST_CASE("publishing a revoked commitment forfeits everything",
          "[protocol]")
{
    Spec spec = test::specFor("c1.toml");
    // Assignment 2 makes the payer dishonest; the receiver stays honest.
    SystemState s = spec.initials()[2];
    REQUIRE_FALSE(s.users[0].honest);
    REQUIRE(s.users[1].honest);

    playChecked(spec, s, test::concatScripts({test::c1FundScript(), test::c1AddScript(), test::c1SettleScript()}));

    // The settled split is 7/3, but the initial commitment gave the funder
    // everything. Publishing it is the profitable cheat.
    auto succs = spec.next(s);
    CHECK(test::hasLabelPrefix(succs, "Cheat(a,A,tx=4"));

    playChecked(spec, s,
                {"Cheat(a,A,tx=4", "NoteThatOtherPartyCheated(a,B",
                 "Punish(a,B"});

    auto a = viewOf(spec, s, 0);
    auto b = viewOf(spec, s, 1);
    CHECK(b.blockchainBalance == 10);
    CHECK(a.blockchainBalance == 0);

    // The punished payout dominates what the honest user was owed, so the
    // terminal floor holds once the clock runs out.
    auto atEnd = [&](SystemState const& st) { return spec.quiescent(st); };
    REQUIRE(test::driveUntil(spec, s, atEnd, {"AdvanceTime("}, 16));
    TerminalStats stats;
    CHECK(checkTerminalState(spec.ctx, s, stats) == std::nullopt);
    // The revoked publication against an honest victim arms the floor.
    CHECK(stats.floorChecksPerformed == 1);
}

TEST_CASE("honest users never have cheat moves", "[protocol]")
{
    Spec spec = test::specFor("c1.toml");
    SystemState s = spec.initials()[0];
    playChecked(spec, s, test::concatScripts({test::c1FundScript(), test::c1AddScript(), test::c1SettleScript()}));
    for (auto const& [label, st] : spec.next(s))
    {
        CHECK(label.rfind("Cheat(", 0) != 0);
    }
}

TEST_CASE("two-hop payment settles across both channels", "[protocol]")
{
    Spec spec = test::specFor("c2.toml");
    SystemState s = spec.initials()[0];

    // Drive entirely with the cooperative policy: prefer anything except
    // closing, cheating, or advancing time, until both end users see the
    // payment processed and the intermediary is flat.
    auto done = [&](SystemState const& st)
    {
        auto v = spec.project(st);
        return v.users[0].legs[0].state == LegState::PROCESSED &&
               v.users[2].legs[0].state == LegState::PROCESSED &&
               v.users[0].channelBalance == 7 &&
               v.users[1].channelBalance == 10 &&
               v.users[2].channelBalance == 3;
    };
    bool reached = test::driveUntil(
        spec, s, done, {"CloseChannel(", "Cheat(", "AdvanceTime("}, 200);
    REQUIRE(reached);

    auto err = checkStateInvariants(spec.ctx, s);
    CHECK(err == std::nullopt);

    // The intermediary routed 3 in and 3 out; it carries both a received
    // and a forwarded leg for the same payment.
    auto b = viewOf(spec, s, 1);
    REQUIRE(b.legs.size() == 2);
    CHECK(b.legs[0].state == LegState::PROCESSED);
    CHECK(b.legs[1].state == LegState::PROCESSED);
}
