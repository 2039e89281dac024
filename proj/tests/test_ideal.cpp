// Copyright 2026 the lnmc contributors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0
#include "helpers.hpp"

#include "lnmc/ideal.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace lnmc;

namespace
{

std::vector<std::string> const kNames = {"A", "B"};

UserView
user(bool honest, Amount chan, Amount chain,
     std::vector<PaymentLeg> legs = {})
{
    UserView v;
    v.honest = honest;
    v.channelBalance = chan;
    v.blockchainBalance = chain;
    v.legs = std::move(legs);
    return v;
}

PaymentLeg
leg(PaymentId id, Amount amount, UserId sender, UserId receiver,
    LegState state)
{
    return PaymentLeg{id, amount, sender, receiver, state};
}

ExternalView
twoUsers(UserView a, UserView b)
{
    ExternalView v;
    v.users = {std::move(a), std::move(b)};
    return v;
}

bool
contained(ExternalView const& pre, ExternalView const& post)
{
    return idealContainsStep(kNames, pre, post) == std::nullopt;
}

} // namespace

TEST_CASE("stutter, deposit, and withdrawal are ideal moves", "[ideal]")
{
    auto pre = twoUsers(user(true, 0, 10), user(true, 0, 0));
    CHECK(contained(pre, pre));

    // Deposit: on-chain funds move into the channel pool.
    CHECK(contained(pre, twoUsers(user(true, 10, 0), user(true, 0, 0))));
    CHECK(contained(pre, twoUsers(user(true, 4, 6), user(true, 0, 0))));

    // Withdrawal: channel funds return on-chain, in full for honest users.
    auto inChan = twoUsers(user(true, 10, 0), user(true, 0, 0));
    CHECK(contained(inChan, twoUsers(user(true, 0, 10), user(true, 0, 0))));
    CHECK(contained(inChan, twoUsers(user(true, 7, 3), user(true, 0, 0))));
}

TEST_CASE("deposits cannot exceed on-chain holdings", "[ideal]")
{
    auto pre = twoUsers(user(true, 0, 10), user(true, 0, 2));
    auto err =
        idealContainsStep(kNames, pre,
                          twoUsers(user(true, 0, 10), user(true, 5, 0)));
    REQUIRE(err.has_value());
    CHECK(err->find("depositing more than owned") != std::string::npos);

    // The same growth is fine when the chain balance covers it.
    CHECK(contained(pre, twoUsers(user(true, 0, 10), user(true, 2, 0))));
}

TEST_CASE("honest value cannot vanish; dishonest burn is allowed", "[ideal]")
{
    auto honest = twoUsers(user(true, 0, 10), user(true, 0, 0));
    auto err =
        idealContainsStep(kNames, honest,
                          twoUsers(user(true, 0, 6), user(true, 0, 0)));
    REQUIRE(err.has_value());
    CHECK(err->find("paid out short") != std::string::npos);

    auto sly = twoUsers(user(false, 0, 10), user(true, 0, 0));
    CHECK(contained(sly, twoUsers(user(false, 0, 6), user(true, 0, 0))));
}

TEST_CASE("on-chain windfalls are within the ideal (punishment payouts)",
          "[ideal]")
{
    // A victim's balance may grow beyond its own channel holdings when a
    // cheater forfeits; containment is per-user and tolerates the gain.
    auto pre = twoUsers(user(false, 7, 0), user(true, 3, 0));
    auto post = twoUsers(user(false, 7, 0), user(true, 0, 10));
    CHECK(contained(pre, post));
}

TEST_CASE("payments settle consistently at both ends", "[ideal]")
{
    auto mkPre = [&](LegState sa, LegState sb)
    {
        return twoUsers(user(true, 10, 0, {leg(1, 3, 0, 1, sa)}),
                        user(true, 0, 0, {leg(1, 3, 0, 1, sb)}));
    };
    auto mkPost = [&](LegState sa, LegState sb, Amount chanA, Amount chanB)
    {
        return twoUsers(user(true, chanA, 0, {leg(1, 3, 0, 1, sa)}),
                        user(true, chanB, 0, {leg(1, 3, 0, 1, sb)}));
    };

    // Settling both ends atomically with matching balance shifts is ideal.
    CHECK(contained(
        mkPre(LegState::NEW, LegState::NEW),
        mkPost(LegState::PROCESSED, LegState::PROCESSED, 7, 3)));

    // The receiver settling first (on-chain redemption) is ideal: the
    // sender still carries the leg and the money.
    CHECK(contained(mkPre(LegState::NEW, LegState::NEW),
                    mkPost(LegState::NEW, LegState::PROCESSED, 10, 3)));

    // The sender settling while the receiver never does is NOT ideal.
    auto err = idealContainsStep(
        kNames, mkPre(LegState::NEW, LegState::NEW),
        mkPost(LegState::PROCESSED, LegState::NEW, 7, 0));
    REQUIRE(err.has_value());
    CHECK(err->find("without settling at receiver") != std::string::npos);

    // Sending without owning the funds is not ideal either.
    auto thin = twoUsers(user(true, 2, 0, {leg(1, 3, 0, 1, LegState::NEW)}),
                         user(true, 0, 0, {leg(1, 3, 0, 1, LegState::NEW)}));
    auto settled =
        twoUsers(user(true, 2, 0, {leg(1, 3, 0, 1, LegState::PROCESSED)}),
                 user(true, 3, 0, {leg(1, 3, 0, 1, LegState::PROCESSED)}));
    auto err2 = idealContainsStep(kNames, thin, settled);
    REQUIRE(err2.has_value());
    CHECK(err2->find("more than the channel balance") != std::string::npos);
}

TEST_CASE("identity of the views is preserved", "[ideal]")
{
    auto pre = twoUsers(user(true, 0, 10), user(true, 0, 0));
    auto flipped = twoUsers(user(false, 0, 10), user(true, 0, 0));
    auto err = idealContainsStep(kNames, pre, flipped);
    REQUIRE(err.has_value());
    CHECK(err->find("honesty") != std::string::npos);

    auto grown = twoUsers(
        user(true, 0, 10, {leg(1, 3, 0, 1, LegState::NEW)}),
        user(true, 0, 0));
    err = idealContainsStep(kNames, pre, grown);
    REQUIRE(err.has_value());
    CHECK(err->find("leg set") != std::string::npos);

    ExternalView lone;
    lone.users = {user(true, 0, 10)};
    err = idealContainsStep(kNames, pre, lone);
    REQUIRE(err.has_value());
    CHECK(err->find("user set") != std::string::npos);
}

TEST_CASE("initial views start fully on-chain and unsettled", "[ideal]")
{
    Spec spec = test::specFor("c1.toml");
    for (auto const& init : spec.initials())
    {
        CHECK(idealValidInitial(spec.ctx, spec.project(init)) ==
              std::nullopt);
    }

    auto good = spec.project(spec.initials()[0]);
    auto inChannel = good;
    inChannel.users[0].channelBalance = 1;
    CHECK(idealValidInitial(spec.ctx, inChannel).has_value());

    auto wrongChain = good;
    wrongChain.users[0].blockchainBalance += 1;
    CHECK(idealValidInitial(spec.ctx, wrongChain).has_value());

    auto preSettled = good;
    preSettled.users[0].legs[0].state = LegState::PROCESSED;
    CHECK(idealValidInitial(spec.ctx, preSettled).has_value());
}

TEST_CASE("every step of the scripted runs is contained in the ideal",
          "[ideal]")
{
    std::vector<std::string> names;
    Spec spec = test::specFor("c1.toml");
    for (auto const& u : spec.ctx.scenario.users)
    {
        names.push_back(u.name);
    }

    auto playContained = [&](SystemState& s,
                             std::vector<std::string> const& script)
    {
        for (auto const& prefix : script)
        {
            auto pre = spec.project(s);
            auto label = test::applyFirst(spec, s, prefix);
            INFO("script step: " << prefix);
            REQUIRE(label.has_value());
            auto err = idealContainsStep(names, pre, spec.project(s));
            INFO("containment after " << *label << ": "
                                      << err.value_or("ok"));
            CHECK(err == std::nullopt);
        }
    };

    SECTION("cooperative settlement, close, and sweep")
    {
        SystemState s = spec.initials()[0];
        playContained(
            s, test::concatScripts(
                   {test::c1FundScript(), test::c1AddScript(),
                    test::c1SettleScript(),
                    {"CloseChannel(a,A", "NoteThatOtherPartyClosedHonestly(",
                     "AdvanceTxAge(", "SweepOwnOutput(a,A",
                     "AdvanceTime(to=8", "AdvanceTime(to=12", "AdvanceTime(to=16"}}));
    }

    SECTION("cheated close, punishment, and payout")
    {
        SystemState s = spec.initials()[2];
        playContained(
            s, test::concatScripts({test::c1FundScript(), test::c1AddScript(),
                                    test::c1SettleScript(),
                                    {"Cheat(a,A,tx=4",
                                     "NoteThatOtherPartyCheated(a,B",
                                     "Punish(a,B"}}));
    }

    SECTION("mid-payment close with on-chain redemption")
    {
        SystemState s = spec.initials()[0];
        playContained(
            s, test::concatScripts(
                   {test::c1FundScript(), test::c1AddScript(),
                    {"CloseChannel(a,A,tx=8",
                     "NoteThatOtherPartyClosedHonestly(a,B",
                     "RedeemHTLCAfterClose(a,B",
                     "NoteThatHTLCFulfilledOnChainByOtherUser(a,A",
                     "AdvanceTxAge(tx=8", "SweepOwnOutput(a,A"}}));
    }
}
