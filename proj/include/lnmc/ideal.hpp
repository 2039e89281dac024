// Copyright 2026 the lnmc contributors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0
#pragma once

#include "lnmc/state.hpp"

#include <sstream>

// The idealized payment network the protocol refines: each user owns a
// blockchain balance and a channel balance, moves value between them with
// Deposit and Withdraw, pays and gets paid through the channel pool, and
// never goes negative. A protocol step refines the ideal system iff the
// observable deltas it produces can be replayed as a sequence of ideal moves
// for every user; the algebra below decides that question in closed form,
// choosing the smallest balancing Deposit a* that could explain the step.
namespace lnmc
{

// Checks that the external-view transition pre -> post is one the ideal
// payment network could have taken. Returns a diagnosis if not.
inline std::optional<std::string>
idealContainsStep(std::vector<std::string> const& names,
                  ExternalView const& pre, ExternalView const& post)
{
    if (pre.users.size() != post.users.size())
    {
        return std::string("user set changed between views");
    }
    for (size_t u = 0; u < pre.users.size(); ++u)
    {
        auto const& a = pre.users[u];
        auto const& b = post.users[u];
        if (a.honest != b.honest)
        {
            return "honesty of user '" + names[u] + "' changed mid-run";
        }
        if (a.legs.size() != b.legs.size())
        {
            return "leg set of user '" + names[u] + "' changed mid-run";
        }

        // Net payment flow and gross outflow settled by this step.
        Amount paid = 0;     // received minus sent over newly settled legs
        Amount sentNow = 0;  // gross amount newly sent
        for (size_t i = 0; i < a.legs.size(); ++i)
        {
            if (a.legs[i].state == LegState::PROCESSED ||
                b.legs[i].state != LegState::PROCESSED)
            {
                continue;
            }
            if (b.legs[i].receiver == static_cast<UserId>(u))
            {
                paid += b.legs[i].amount;
            }
            if (b.legs[i].sender == static_cast<UserId>(u))
            {
                paid -= b.legs[i].amount;
                sentNow += b.legs[i].amount;
            }
        }

        Amount dChan = b.channelBalance - a.channelBalance;
        Amount dChain = b.blockchainBalance - a.blockchainBalance;

        // The smallest deposit that reconciles both deltas; the withdrawal
        // and the implied spend of on-chain funds follow from it.
        Amount deposit = std::max<Amount>({0, dChan - paid, -dChain});
        Amount withdrawal = paid + deposit - dChan;
        Amount chainGain = dChain + deposit;

        auto fail = [&](char const* why)
        {
            std::ostringstream os;
            os << "step of user '" << names[u]
               << "' is not an ideal behavior (" << why << "): paid " << paid
               << ", channel delta " << dChan << ", chain delta " << dChain;
            return os.str();
        };
        if (a.channelBalance < sentNow)
        {
            return fail("paid out more than the channel balance held");
        }
        if (deposit > a.blockchainBalance)
        {
            return fail("requires depositing more than owned on-chain");
        }
        if (withdrawal < 0)
        {
            return fail("channel balance grew beyond deposits and receipts");
        }
        if (chainGain < 0)
        {
            return fail("on-chain funds vanished beyond the deposit");
        }
        if (a.honest && chainGain < withdrawal)
        {
            return fail("an honest withdrawal was paid out short");
        }
        if (withdrawal > a.channelBalance + paid + deposit)
        {
            return fail("withdrew more than the channel balance held");
        }
    }

    // A settled sent leg must be matched by the receiving end: value the
    // sender considers paid has arrived at the receiver's copy of the leg.
    for (size_t u = 0; u < pre.users.size(); ++u)
    {
        auto const& a = pre.users[u];
        auto const& b = post.users[u];
        for (size_t i = 0; i < a.legs.size(); ++i)
        {
            if (a.legs[i].state == LegState::PROCESSED ||
                b.legs[i].state != LegState::PROCESSED ||
                b.legs[i].sender != static_cast<UserId>(u))
            {
                continue;
            }
            UserId r = b.legs[i].receiver;
            bool matched = false;
            for (auto const& leg : post.users[r].legs)
            {
                if (leg.id == b.legs[i].id &&
                    leg.sender == b.legs[i].sender &&
                    leg.receiver == b.legs[i].receiver)
                {
                    matched = leg.state == LegState::PROCESSED;
                }
            }
            if (!matched)
            {
                std::ostringstream os;
                os << "payment " << b.legs[i].id << " settled at sender '"
                   << names[u] << "' without settling at receiver '"
                   << names[r] << "'";
                return os.str();
            }
        }
    }
    return std::nullopt;
}

// Checks that an initial external view is one the ideal network starts in:
// all value on-chain, channels empty, no payment settled yet.
inline std::optional<std::string>
idealValidInitial(ModelContext const& ctx, ExternalView const& view)
{
    auto const& sc = ctx.scenario;
    if (view.users.size() != sc.users.size())
    {
        return std::string("user set does not match the scenario");
    }
    for (size_t u = 0; u < view.users.size(); ++u)
    {
        auto const& v = view.users[u];
        if (v.channelBalance != 0)
        {
            return "user '" + sc.users[u].name +
                   "' starts with a non-empty channel balance";
        }
        if (v.blockchainBalance != sc.users[u].initialBalance)
        {
            return "user '" + sc.users[u].name +
                   "' does not start with its declared balance";
        }
        for (auto const& leg : v.legs)
        {
            if (leg.state != LegState::NEW)
            {
                return "user '" + sc.users[u].name +
                       "' starts with a settled payment leg";
            }
        }
    }
    return std::nullopt;
}

} // namespace lnmc
