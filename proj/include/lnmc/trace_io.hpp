// Copyright 2026 the lnmc contributors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0
#pragma once

#include "lnmc/checker.hpp"

#include <json.hpp>

// JSON-lines serialization of counterexample traces and state dumps. One
// object per line; the schema is part of the tool's external contract:
//   {"idx": N, "action": "...", "external": {...}, "state_fp": "..."}
// where external lists per-user name, honesty, channel and blockchain
// balances, and payment legs with user names and a lifecycle state drawn
// from {"new", "processed", "aborted"}.
namespace lnmc
{

inline char const*
legStateJsonName(LegState s)
{
    switch (s)
    {
    case LegState::NEW:
        return "new";
    case LegState::PROCESSED:
        return "processed";
    case LegState::ABORTED:
        return "aborted";
    }
    return "?";
}

inline std::optional<LegState>
legStateFromJsonName(std::string const& s)
{
    if (s == "new")
    {
        return LegState::NEW;
    }
    if (s == "processed")
    {
        return LegState::PROCESSED;
    }
    if (s == "aborted")
    {
        return LegState::ABORTED;
    }
    return std::nullopt;
}

inline nlohmann::json
externalViewToJson(std::vector<std::string> const& names,
                   ExternalView const& view)
{
    nlohmann::json users = nlohmann::json::array();
    for (size_t i = 0; i < view.users.size(); ++i)
    {
        auto const& u = view.users[i];
        nlohmann::json payments = nlohmann::json::array();
        for (auto const& leg : u.legs)
        {
            payments.push_back(
                {{"id", leg.id},
                 {"amount", leg.amount},
                 {"sender", names.at(static_cast<size_t>(leg.sender))},
                 {"receiver", names.at(static_cast<size_t>(leg.receiver))},
                 {"state", legStateJsonName(leg.state)}});
        }
        users.push_back({{"name", names.at(i)},
                         {"honest", u.honest},
                         {"channel_balance", u.channelBalance},
                         {"blockchain_balance", u.blockchainBalance},
                         {"payments", std::move(payments)}});
    }
    return {{"users", std::move(users)}};
}

inline std::optional<ExternalView>
externalViewFromJson(std::vector<std::string> const& names,
                     nlohmann::json const& j)
{
    auto userIdOf = [&](std::string const& name) -> std::optional<UserId>
    {
        for (size_t i = 0; i < names.size(); ++i)
        {
            if (names[i] == name)
            {
                return static_cast<UserId>(i);
            }
        }
        return std::nullopt;
    };
    if (!j.contains("users") || !j["users"].is_array())
    {
        return std::nullopt;
    }
    ExternalView view;
    for (auto const& ju : j["users"])
    {
        UserView u;
        u.honest = ju.at("honest").get<bool>();
        u.channelBalance = ju.at("channel_balance").get<Amount>();
        u.blockchainBalance = ju.at("blockchain_balance").get<Amount>();
        for (auto const& jp : ju.at("payments"))
        {
            PaymentLeg leg;
            leg.id = jp.at("id").get<PaymentId>();
            leg.amount = jp.at("amount").get<Amount>();
            auto sender = userIdOf(jp.at("sender").get<std::string>());
            auto receiver = userIdOf(jp.at("receiver").get<std::string>());
            auto state =
                legStateFromJsonName(jp.at("state").get<std::string>());
            if (!sender || !receiver || !state)
            {
                return std::nullopt;
            }
            leg.sender = *sender;
            leg.receiver = *receiver;
            leg.state = *state;
            u.legs.push_back(leg);
        }
        view.users.push_back(std::move(u));
    }
    return view;
}

inline std::string
traceToJsonLines(std::vector<std::string> const& names,
                 std::vector<TraceStep> const& trace)
{
    std::string out;
    for (size_t i = 0; i < trace.size(); ++i)
    {
        nlohmann::json row = {
            {"idx", i},
            {"action", trace[i].action},
            {"external", externalViewToJson(names, trace[i].external)},
            {"state_fp", trace[i].fp.hex()}};
        out += row.dump();
        out += '\n';
    }
    return out;
}

inline std::optional<Fingerprint>
fingerprintFromHex(std::string const& hex)
{
    if (hex.size() != 32)
    {
        return std::nullopt;
    }
    auto nibble = [](char c) -> int
    {
        if (c >= '0' && c <= '9')
        {
            return c - '0';
        }
        if (c >= 'a' && c <= 'f')
        {
            return c - 'a' + 10;
        }
        if (c >= 'A' && c <= 'F')
        {
            return c - 'A' + 10;
        }
        return -1;
    };
    uint64_t parts[2] = {0, 0};
    for (int half = 0; half < 2; ++half)
    {
        for (int i = 0; i < 16; ++i)
        {
            int v = nibble(hex[static_cast<size_t>(half * 16 + i)]);
            if (v < 0)
            {
                return std::nullopt;
            }
            parts[half] = (parts[half] << 4) | static_cast<uint64_t>(v);
        }
    }
    Fingerprint fp;
    fp.hi = parts[0];
    fp.lo = parts[1];
    return fp;
}

inline std::optional<std::vector<TraceStep>>
traceFromJsonLines(std::vector<std::string> const& names,
                   std::string const& text)
{
    std::vector<TraceStep> trace;
    size_t pos = 0;
    while (pos < text.size())
    {
        size_t end = text.find('\n', pos);
        if (end == std::string::npos)
        {
            end = text.size();
        }
        std::string line = text.substr(pos, end - pos);
        pos = end + 1;
        if (line.empty())
        {
            continue;
        }
        nlohmann::json row =
            nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
        if (row.is_discarded())
        {
            return std::nullopt;
        }
        TraceStep step;
        step.action = row.at("action").get<std::string>();
        auto view = externalViewFromJson(names, row.at("external"));
        auto fp = fingerprintFromHex(row.at("state_fp").get<std::string>());
        if (!view || !fp ||
            row.at("idx").get<size_t>() != trace.size())
        {
            return std::nullopt;
        }
        step.external = std::move(*view);
        step.fp = *fp;
        trace.push_back(std::move(step));
    }
    return trace;
}

inline std::string
dumpedStatesToJsonLines(
    std::vector<std::string> const& names,
    std::vector<std::pair<Fingerprint, ExternalView>> const& dumped)
{
    std::string out;
    for (auto const& [fp, view] : dumped)
    {
        nlohmann::json row = {
            {"state_fp", fp.hex()},
            {"external", externalViewToJson(names, view)}};
        out += row.dump();
        out += '\n';
    }
    return out;
}

} // namespace lnmc
