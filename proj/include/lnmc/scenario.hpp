// Copyright 2026 the lnmc contributors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0
#pragma once

#include "lnmc/core.hpp"

#include <json.hpp>

#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lnmc
{

// A scenario file describes the finite world the checker explores: the users
// and their funding, the channels between them, the payments attempted, and
// the protocol/model constants. Files are JSON or a TOML subset; both parse
// into the same structure and validation reports errors by field path.

enum class Honesty
{
    HONEST,
    DISHONEST,
    EXPLORE_BOTH
};

struct ScenarioUser
{
    std::string name;
    Amount initialBalance = 0;
    Honesty honesty = Honesty::HONEST;

    friend bool operator==(ScenarioUser const&, ScenarioUser const&) = default;
};

struct ScenarioChannel
{
    std::string name;
    UserId members[2] = {NO_USER, NO_USER};
    UserId funder = NO_USER;
    Amount capacity = 0;
    TxId txIdLo = 0;
    TxId txIdHi = 0;

    friend bool operator==(ScenarioChannel const&,
                           ScenarioChannel const&) = default;

    bool
    hasMember(UserId u) const
    {
        return members[0] == u || members[1] == u;
    }

    UserId
    peerOf(UserId u) const
    {
        return members[0] == u ? members[1] : members[0];
    }
};

struct ScenarioPayment
{
    PaymentId id = 0;
    Amount amount = 0;
    std::vector<UserId> path;
    TimePoint deadline = 0;

    friend bool operator==(ScenarioPayment const&,
                           ScenarioPayment const&) = default;
};

struct ScenarioConstants
{
    TimePoint grace = 3;       // blocks an off-chain reaction may lag
    TimePoint toSelfDelay = 1; // maturity delay on revocable outputs
    TimePoint cltvDelta = 5;   // per-hop timelock decrement
    TimePoint maxTime = 0;     // exploration horizon (required)
    HashVal preimageOffset = 1000;
    HashVal secretOffset = 2000;
    Amount amountMin = 0;
    Amount amountMax = 1000;

    friend bool operator==(ScenarioConstants const&,
                           ScenarioConstants const&) = default;
};

struct ScenarioError : std::runtime_error
{
    std::string path;

    ScenarioError(std::string fieldPath, std::string const& message)
        : std::runtime_error(fieldPath + ": " + message),
          path(std::move(fieldPath))
    {
    }
};

struct Scenario
{
    std::string name;
    std::vector<ScenarioUser> users;
    std::vector<ScenarioChannel> channels;
    std::vector<ScenarioPayment> payments;
    ScenarioConstants constants;

    friend bool operator==(Scenario const&, Scenario const&) = default;

    UserId
    userIndex(std::string const& userName) const
    {
        for (size_t i = 0; i < users.size(); ++i)
        {
            if (users[i].name == userName)
            {
                return static_cast<UserId>(i);
            }
        }
        return NO_USER;
    }

    // Coinbase transaction ids are implicitly 1..N in user order; channel id
    // ranges must avoid them.
    TxId
    genesisTxId(UserId u) const
    {
        return static_cast<TxId>(u) + 1;
    }

    HashVal
    preimageFor(PaymentId p) const
    {
        return p + constants.preimageOffset;
    }

    HashVal
    secretFor(PaymentId p) const
    {
        return p + constants.secretOffset;
    }

    // Hop timelocks descend from sender to receiver by cltv_delta, ending at
    // the payment's deadline on the final hop.
    std::vector<TimePoint>
    hopTimelocks(ScenarioPayment const& p) const
    {
        size_t hops = p.path.size() - 1;
        std::vector<TimePoint> out(hops);
        for (size_t i = 0; i < hops; ++i)
        {
            out[i] = p.deadline +
                     constants.cltvDelta *
                         static_cast<TimePoint>(hops - 1 - i);
        }
        return out;
    }

    // All honesty vectors to explore: each explore_both user doubles the
    // set. Assignments are emitted in a fixed order (honest first, users in
    // declaration order) so initial-state enumeration is deterministic.
    std::vector<std::vector<bool>>
    honestyAssignments() const
    {
        std::vector<std::vector<bool>> result{{}};
        for (auto const& u : users)
        {
            std::vector<std::vector<bool>> next;
            for (auto const& prefix : result)
            {
                if (u.honesty == Honesty::HONEST ||
                    u.honesty == Honesty::EXPLORE_BOTH)
                {
                    auto v = prefix;
                    v.push_back(true);
                    next.push_back(std::move(v));
                }
                if (u.honesty == Honesty::DISHONEST ||
                    u.honesty == Honesty::EXPLORE_BOTH)
                {
                    auto v = prefix;
                    v.push_back(false);
                    next.push_back(std::move(v));
                }
            }
            result = std::move(next);
        }
        return result;
    }
};

namespace detail
{

inline std::string
honestyName(Honesty h)
{
    switch (h)
    {
    case Honesty::HONEST:
        return "honest";
    case Honesty::DISHONEST:
        return "dishonest";
    case Honesty::EXPLORE_BOTH:
        return "explore_both";
    }
    return "?";
}

inline Honesty
honestyFromName(std::string const& s, std::string const& path)
{
    if (s == "honest")
    {
        return Honesty::HONEST;
    }
    if (s == "dishonest")
    {
        return Honesty::DISHONEST;
    }
    if (s == "explore_both")
    {
        return Honesty::EXPLORE_BOTH;
    }
    throw ScenarioError(path,
                        "expected honest|dishonest|explore_both, got '" + s +
                            "'");
}

// --- Minimal TOML subset parser ---------------------------------------
//
// Supports exactly what scenario files need: comments, [table] headers,
// [[array-of-tables]] headers, and `key = value` lines where a value is a
// string, integer, boolean, a single-line array of values, or a single-line
// inline table. Everything parses into a JSON document so the rest of the
// loader is format-agnostic. This is a deliberate subset; scenario files are
// small and flat.

struct TomlParser
{
    std::string_view text;
    size_t pos = 0;
    int line = 1;

    [[noreturn]] void
    fail(std::string const& msg) const
    {
        throw ScenarioError("line " + std::to_string(line), msg);
    }

    bool
    atEnd() const
    {
        return pos >= text.size();
    }

    char
    peek() const
    {
        return text[pos];
    }

    void
    skipInlineWs()
    {
        while (!atEnd() && (peek() == ' ' || peek() == '\t'))
        {
            ++pos;
        }
    }

    void
    skipWsAndComments()
    {
        while (!atEnd())
        {
            char c = peek();
            if (c == ' ' || c == '\t' || c == '\r')
            {
                ++pos;
            }
            else if (c == '\n')
            {
                ++pos;
                ++line;
            }
            else if (c == '#')
            {
                while (!atEnd() && peek() != '\n')
                {
                    ++pos;
                }
            }
            else
            {
                break;
            }
        }
    }

    std::string
    parseKey()
    {
        skipInlineWs();
        size_t start = pos;
        while (!atEnd() &&
               (std::isalnum(static_cast<unsigned char>(peek())) ||
                peek() == '_' || peek() == '-'))
        {
            ++pos;
        }
        if (pos == start)
        {
            fail("expected key");
        }
        return std::string(text.substr(start, pos - start));
    }

    nlohmann::ordered_json
    parseValue()
    {
        skipInlineWs();
        if (atEnd())
        {
            fail("expected value");
        }
        char c = peek();
        if (c == '"')
        {
            ++pos;
            std::string s;
            while (!atEnd() && peek() != '"')
            {
                if (peek() == '\n')
                {
                    fail("unterminated string");
                }
                if (peek() == '\\' && pos + 1 < text.size())
                {
                    ++pos;
                }
                s.push_back(text[pos++]);
            }
            if (atEnd())
            {
                fail("unterminated string");
            }
            ++pos;
            return s;
        }
        if (c == '[')
        {
            ++pos;
            nlohmann::ordered_json arr = nlohmann::ordered_json::array();
            skipInlineWs();
            if (!atEnd() && peek() == ']')
            {
                ++pos;
                return arr;
            }
            while (true)
            {
                arr.push_back(parseValue());
                skipInlineWs();
                if (!atEnd() && peek() == ',')
                {
                    ++pos;
                    continue;
                }
                if (!atEnd() && peek() == ']')
                {
                    ++pos;
                    return arr;
                }
                fail("expected ',' or ']' in array");
            }
        }
        if (c == '{')
        {
            ++pos;
            nlohmann::ordered_json obj = nlohmann::ordered_json::object();
            skipInlineWs();
            if (!atEnd() && peek() == '}')
            {
                ++pos;
                return obj;
            }
            while (true)
            {
                std::string k = parseKey();
                skipInlineWs();
                if (atEnd() || peek() != '=')
                {
                    fail("expected '=' in inline table");
                }
                ++pos;
                obj[k] = parseValue();
                skipInlineWs();
                if (!atEnd() && peek() == ',')
                {
                    ++pos;
                    skipInlineWs();
                    continue;
                }
                if (!atEnd() && peek() == '}')
                {
                    ++pos;
                    return obj;
                }
                fail("expected ',' or '}' in inline table");
            }
        }
        if (c == 't' || c == 'f')
        {
            if (text.substr(pos, 4) == "true")
            {
                pos += 4;
                return true;
            }
            if (text.substr(pos, 5) == "false")
            {
                pos += 5;
                return false;
            }
            fail("expected boolean");
        }
        if (c == '-' || std::isdigit(static_cast<unsigned char>(c)))
        {
            size_t start = pos;
            if (c == '-')
            {
                ++pos;
            }
            while (!atEnd() &&
                   std::isdigit(static_cast<unsigned char>(peek())))
            {
                ++pos;
            }
            if (pos == start || (c == '-' && pos == start + 1))
            {
                fail("expected number");
            }
            return std::stoll(std::string(text.substr(start, pos - start)));
        }
        fail(std::string("unexpected character '") + c + "'");
    }

    nlohmann::ordered_json
    parse()
    {
        nlohmann::ordered_json root = nlohmann::ordered_json::object();
        nlohmann::ordered_json* current = &root;
        while (true)
        {
            skipWsAndComments();
            if (atEnd())
            {
                break;
            }
            if (peek() == '[')
            {
                ++pos;
                bool arrayOfTables = !atEnd() && peek() == '[';
                if (arrayOfTables)
                {
                    ++pos;
                }
                std::string name = parseKey();
                skipInlineWs();
                if (atEnd() || peek() != ']')
                {
                    fail("expected ']' after table name");
                }
                ++pos;
                if (arrayOfTables)
                {
                    if (atEnd() || peek() != ']')
                    {
                        fail("expected ']]' after table array name");
                    }
                    ++pos;
                    if (!root.contains(name))
                    {
                        root[name] = nlohmann::ordered_json::array();
                    }
                    root[name].push_back(nlohmann::ordered_json::object());
                    current = &root[name].back();
                }
                else
                {
                    root[name] = nlohmann::ordered_json::object();
                    current = &root[name];
                }
            }
            else
            {
                std::string key = parseKey();
                skipInlineWs();
                if (atEnd() || peek() != '=')
                {
                    fail("expected '=' after key '" + key + "'");
                }
                ++pos;
                (*current)[key] = parseValue();
                skipInlineWs();
                if (!atEnd() && peek() == '#')
                {
                    while (!atEnd() && peek() != '\n')
                    {
                        ++pos;
                    }
                }
                if (!atEnd() && peek() != '\n')
                {
                    fail("trailing content after value");
                }
            }
        }
        return root;
    }
};

template <typename T>
T
requireField(nlohmann::ordered_json const& j, std::string const& key,
             std::string const& path)
{
    if (!j.contains(key))
    {
        throw ScenarioError(path + "." + key, "missing required field");
    }
    try
    {
        return j.at(key).get<T>();
    }
    catch (nlohmann::json::exception const&)
    {
        throw ScenarioError(path + "." + key, "wrong type");
    }
}

template <typename T>
T
optionalField(nlohmann::ordered_json const& j, std::string const& key,
              std::string const& path, T def)
{
    if (!j.contains(key))
    {
        return def;
    }
    try
    {
        return j.at(key).get<T>();
    }
    catch (nlohmann::json::exception const&)
    {
        throw ScenarioError(path + "." + key, "wrong type");
    }
}

} // namespace detail

// Structural validation. Every rule a scenario must obey to make the model
// well-formed lives here so load failures identify the offending field.
inline void
validateScenario(Scenario const& s)
{
    auto const& k = s.constants;
    if (s.users.empty())
    {
        throw ScenarioError("users", "at least one user required");
    }
    if (k.maxTime <= 0)
    {
        throw ScenarioError("constants.max_time", "must be positive");
    }
    if (k.grace < 0 || k.toSelfDelay < 1 || k.cltvDelta < 1)
    {
        throw ScenarioError("constants",
                            "grace must be >= 0, to_self_delay and "
                            "cltv_delta >= 1");
    }
    if (k.cltvDelta <= k.grace + k.toSelfDelay)
    {
        // An intermediary that learns a preimage as late as T+grace must
        // still be able to get it on-chain and matured before its own
        // upstream timelock; the per-hop decrement has to cover that window.
        throw ScenarioError("constants.cltv_delta",
                            "must exceed grace + to_self_delay");
    }
    if (k.amountMin < 0 || k.amountMax < k.amountMin)
    {
        throw ScenarioError("constants.amount_range", "invalid range");
    }
    for (size_t i = 0; i < s.users.size(); ++i)
    {
        auto const& u = s.users[i];
        std::string path = "users[" + std::to_string(i) + "]";
        if (u.name.empty())
        {
            throw ScenarioError(path + ".name", "must be non-empty");
        }
        for (size_t j = 0; j < i; ++j)
        {
            if (s.users[j].name == u.name)
            {
                throw ScenarioError(path + ".name",
                                    "duplicate user name '" + u.name + "'");
            }
        }
        if (u.initialBalance < k.amountMin || u.initialBalance > k.amountMax)
        {
            throw ScenarioError(path + ".initial_balance",
                                "outside amount_range");
        }
    }
    std::vector<std::pair<TxId, TxId>> ranges;
    ranges.emplace_back(1, static_cast<TxId>(s.users.size()));
    for (size_t i = 0; i < s.channels.size(); ++i)
    {
        auto const& c = s.channels[i];
        std::string path = "channels[" + std::to_string(i) + "]";
        if (c.name.empty())
        {
            throw ScenarioError(path + ".name", "must be non-empty");
        }
        for (size_t j = 0; j < i; ++j)
        {
            if (s.channels[j].name == c.name)
            {
                throw ScenarioError(path + ".name", "duplicate channel name");
            }
        }
        if (c.members[0] == NO_USER || c.members[1] == NO_USER)
        {
            throw ScenarioError(path + ".members", "unknown user");
        }
        if (c.members[0] == c.members[1])
        {
            throw ScenarioError(path + ".members", "members must differ");
        }
        if (c.funder != c.members[0] && c.funder != c.members[1])
        {
            throw ScenarioError(path + ".funder", "must be a member");
        }
        if (c.capacity <= 0 || c.capacity > k.amountMax)
        {
            throw ScenarioError(path + ".capacity", "outside amount_range");
        }
        if (c.capacity > s.users[c.funder].initialBalance)
        {
            throw ScenarioError(path + ".capacity",
                                "exceeds funder's initial balance");
        }
        if (c.txIdLo <= 0 || c.txIdHi < c.txIdLo)
        {
            throw ScenarioError(path + ".tx_id_range", "invalid range");
        }
        if (c.txIdLo <= static_cast<TxId>(s.users.size()))
        {
            throw ScenarioError(path + ".tx_id_range",
                                "overlaps the genesis coinbase ids 1..N");
        }
        for (auto const& [lo, hi] : ranges)
        {
            if (c.txIdLo <= hi && lo <= c.txIdHi)
            {
                throw ScenarioError(path + ".tx_id_range",
                                    "overlaps another id range");
            }
        }
        ranges.emplace_back(c.txIdLo, c.txIdHi);
    }
    Amount totalFunding(0);
    for (size_t ui = 0; ui < s.users.size(); ++ui)
    {
        totalFunding = 0;
        for (auto const& c : s.channels)
        {
            if (c.funder == static_cast<UserId>(ui))
            {
                totalFunding += c.capacity;
            }
        }
        if (totalFunding > s.users[ui].initialBalance)
        {
            throw ScenarioError("users[" + std::to_string(ui) + "]",
                                "funds more capacity than its balance");
        }
    }
    for (size_t i = 0; i < s.payments.size(); ++i)
    {
        auto const& p = s.payments[i];
        std::string path = "payments[" + std::to_string(i) + "]";
        if (p.id <= 0)
        {
            throw ScenarioError(path + ".id", "must be positive");
        }
        for (size_t j = 0; j < i; ++j)
        {
            if (s.payments[j].id == p.id)
            {
                throw ScenarioError(path + ".id", "duplicate payment id");
            }
        }
        if (p.amount <= 0 || p.amount > k.amountMax)
        {
            throw ScenarioError(path + ".amount", "outside amount_range");
        }
        if (p.path.size() < 2)
        {
            throw ScenarioError(path + ".path",
                                "needs at least sender and receiver");
        }
        for (size_t a = 0; a < p.path.size(); ++a)
        {
            if (p.path[a] == NO_USER)
            {
                throw ScenarioError(path + ".path", "unknown user");
            }
            for (size_t b = 0; b < a; ++b)
            {
                if (p.path[a] == p.path[b])
                {
                    throw ScenarioError(path + ".path",
                                        "path must not revisit a user");
                }
            }
        }
        for (size_t hop = 0; hop + 1 < p.path.size(); ++hop)
        {
            bool found = false;
            for (auto const& c : s.channels)
            {
                found = found || (c.hasMember(p.path[hop]) &&
                                  c.hasMember(p.path[hop + 1]));
            }
            if (!found)
            {
                throw ScenarioError(path + ".path",
                                    "no channel between consecutive hops");
            }
        }
        if (p.deadline <= 0 || p.deadline >= k.maxTime)
        {
            throw ScenarioError(path + ".deadline",
                                "must lie strictly before max_time");
        }
        // The first hop carries the largest timelock; after it expires the
        // offerer still needs grace blocks to react, one block to publish,
        // and to_self_delay blocks of maturity before sweeping. Without this
        // headroom a run can hit the horizon with funds in limbo.
        TimePoint firstHop =
            p.deadline + k.cltvDelta * static_cast<TimePoint>(
                                           p.path.size() - 2);
        if (firstHop + k.grace + 1 + k.toSelfDelay + 1 > k.maxTime)
        {
            throw ScenarioError(
                path + ".deadline",
                "insufficient headroom before max_time for on-chain "
                "resolution of every hop");
        }
    }
    if (s.constants.preimageOffset == s.constants.secretOffset)
    {
        throw ScenarioError("constants.secret_offset",
                            "must differ from preimage_offset");
    }
}

inline nlohmann::ordered_json
scenarioToJson(Scenario const& s)
{
    nlohmann::ordered_json j;
    j["name"] = s.name;
    j["constants"] = {{"grace", s.constants.grace},
                      {"to_self_delay", s.constants.toSelfDelay},
                      {"cltv_delta", s.constants.cltvDelta},
                      {"max_time", s.constants.maxTime},
                      {"preimage_offset", s.constants.preimageOffset},
                      {"secret_offset", s.constants.secretOffset},
                      {"amount_range", {s.constants.amountMin,
                                        s.constants.amountMax}}};
    j["users"] = nlohmann::ordered_json::array();
    for (auto const& u : s.users)
    {
        j["users"].push_back({{"name", u.name},
                              {"initial_balance", u.initialBalance},
                              {"honesty", detail::honestyName(u.honesty)}});
    }
    j["channels"] = nlohmann::ordered_json::array();
    for (auto const& c : s.channels)
    {
        j["channels"].push_back(
            {{"name", c.name},
             {"members", {s.users[c.members[0]].name,
                          s.users[c.members[1]].name}},
             {"funder", s.users[c.funder].name},
             {"capacity", c.capacity},
             {"tx_id_range", {c.txIdLo, c.txIdHi}}});
    }
    j["payments"] = nlohmann::ordered_json::array();
    for (auto const& p : s.payments)
    {
        nlohmann::ordered_json path = nlohmann::ordered_json::array();
        for (UserId u : p.path)
        {
            path.push_back(s.users[u].name);
        }
        j["payments"].push_back({{"id", p.id},
                                 {"amount", p.amount},
                                 {"path", path},
                                 {"deadline", p.deadline}});
    }
    return j;
}

inline std::string
writeScenario(Scenario const& s)
{
    return scenarioToJson(s).dump(2) + "\n";
}

inline Scenario
scenarioFromJson(nlohmann::ordered_json const& j)
{
    using detail::optionalField;
    using detail::requireField;

    Scenario s;
    s.name = optionalField<std::string>(j, "name", "", "unnamed");
    if (j.contains("constants"))
    {
        auto const& jc = j.at("constants");
        std::string path = "constants";
        s.constants.grace =
            optionalField<TimePoint>(jc, "grace", path, s.constants.grace);
        s.constants.toSelfDelay = optionalField<TimePoint>(
            jc, "to_self_delay", path, s.constants.toSelfDelay);
        s.constants.cltvDelta = optionalField<TimePoint>(
            jc, "cltv_delta", path, s.constants.cltvDelta);
        s.constants.maxTime =
            requireField<TimePoint>(jc, "max_time", path);
        s.constants.preimageOffset = optionalField<HashVal>(
            jc, "preimage_offset", path, s.constants.preimageOffset);
        s.constants.secretOffset = optionalField<HashVal>(
            jc, "secret_offset", path, s.constants.secretOffset);
        if (jc.contains("amount_range"))
        {
            auto const& r = jc.at("amount_range");
            if (!r.is_array() || r.size() != 2)
            {
                throw ScenarioError("constants.amount_range",
                                    "expected [min, max]");
            }
            s.constants.amountMin = r[0].get<Amount>();
            s.constants.amountMax = r[1].get<Amount>();
        }
    }
    else
    {
        throw ScenarioError("constants", "missing required table");
    }

    if (!j.contains("users") || !j.at("users").is_array())
    {
        throw ScenarioError("users", "missing required array");
    }
    for (size_t i = 0; i < j.at("users").size(); ++i)
    {
        auto const& ju = j.at("users")[i];
        std::string path = "users[" + std::to_string(i) + "]";
        ScenarioUser u;
        u.name = requireField<std::string>(ju, "name", path);
        u.initialBalance = requireField<Amount>(ju, "initial_balance", path);
        u.honesty = detail::honestyFromName(
            optionalField<std::string>(ju, "honesty", path, "honest"),
            path + ".honesty");
        s.users.push_back(std::move(u));
    }

    if (j.contains("channels"))
    {
        for (size_t i = 0; i < j.at("channels").size(); ++i)
        {
            auto const& jc = j.at("channels")[i];
            std::string path = "channels[" + std::to_string(i) + "]";
            ScenarioChannel c;
            c.name = requireField<std::string>(jc, "name", path);
            auto members =
                requireField<std::vector<std::string>>(jc, "members", path);
            if (members.size() != 2)
            {
                throw ScenarioError(path + ".members",
                                    "expected exactly two users");
            }
            c.members[0] = s.userIndex(members[0]);
            c.members[1] = s.userIndex(members[1]);
            c.funder =
                s.userIndex(requireField<std::string>(jc, "funder", path));
            c.capacity = requireField<Amount>(jc, "capacity", path);
            auto range =
                requireField<std::vector<TxId>>(jc, "tx_id_range", path);
            if (range.size() != 2)
            {
                throw ScenarioError(path + ".tx_id_range",
                                    "expected [lo, hi]");
            }
            c.txIdLo = range[0];
            c.txIdHi = range[1];
            s.channels.push_back(std::move(c));
        }
    }

    if (j.contains("payments"))
    {
        for (size_t i = 0; i < j.at("payments").size(); ++i)
        {
            auto const& jp = j.at("payments")[i];
            std::string path = "payments[" + std::to_string(i) + "]";
            ScenarioPayment p;
            p.id = requireField<PaymentId>(jp, "id", path);
            p.amount = requireField<Amount>(jp, "amount", path);
            auto names =
                requireField<std::vector<std::string>>(jp, "path", path);
            for (auto const& n : names)
            {
                p.path.push_back(s.userIndex(n));
            }
            p.deadline = requireField<TimePoint>(jp, "deadline", path);
            s.payments.push_back(std::move(p));
        }
    }

    validateScenario(s);
    return s;
}

// Sniffs JSON vs TOML by the first significant character.
inline Scenario
parseScenario(std::string const& text)
{
    size_t i = 0;
    while (i < text.size() &&
           (std::isspace(static_cast<unsigned char>(text[i])) != 0))
    {
        ++i;
    }
    if (i < text.size() && text[i] == '{')
    {
        nlohmann::ordered_json j;
        try
        {
            j = nlohmann::ordered_json::parse(text);
        }
        catch (nlohmann::json::exception const& e)
        {
            throw ScenarioError("json", e.what());
        }
        return scenarioFromJson(j);
    }
    detail::TomlParser p{text};
    return scenarioFromJson(p.parse());
}

inline Scenario
loadScenario(std::string const& filePath)
{
    std::ifstream in(filePath);
    if (!in)
    {
        throw ScenarioError("file", "cannot open '" + filePath + "'");
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parseScenario(ss.str());
}

} // namespace lnmc
