// Copyright 2026 the lnmc contributors. Licensed under the Apache License,
// Version 2.0. See the LICENSE file at the root of this distribution or at
// http://www.apache.org/licenses/LICENSE-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lnmc
{

// Scalar domains. Everything the model manipulates is a small integer: users
// and channels are dense indices, transaction/payment ids come from disjoint
// ranges declared in the scenario, and hashing a preimage is the identity, so
// a hash value and a preimage share one domain.
using UserId = int32_t;
using ChannelId = int32_t;
using TxId = int32_t;
using PaymentId = int32_t;
using Amount = int64_t;
using TimePoint = int32_t;
using HashVal = int64_t;

constexpr UserId NO_USER = -1;
constexpr TxId NO_TX = -1;

// Appends a canonical little-endian byte encoding of state components.
// Fingerprints and full-state collision checks both consume this stream, so
// every container must be written in a deterministic order (sorted for sets,
// insertion order for queues) and every field in a documented, fixed order.
class CanonicalWriter
{
  public:
    void
    u8(uint8_t v)
    {
        mBytes.push_back(static_cast<char>(v));
    }

    void
    u32(uint32_t v)
    {
        for (int i = 0; i < 4; ++i)
        {
            mBytes.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
        }
    }

    void
    u64(uint64_t v)
    {
        for (int i = 0; i < 8; ++i)
        {
            mBytes.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
        }
    }

    void
    i32(int32_t v)
    {
        u32(static_cast<uint32_t>(v));
    }

    void
    i64(int64_t v)
    {
        u64(static_cast<uint64_t>(v));
    }

    void
    boolean(bool v)
    {
        u8(v ? 1 : 0);
    }

    void
    str(std::string_view s)
    {
        u32(static_cast<uint32_t>(s.size()));
        mBytes.append(s.data(), s.size());
    }

    std::string const&
    bytes() const
    {
        return mBytes;
    }

    void
    clear()
    {
        mBytes.clear();
    }

  private:
    std::string mBytes;
};

// Reads a CanonicalWriter stream back, field by field in the same order.
// States held in compact byte form are rehydrated through this; any
// writer/reader mismatch surfaces as a truncation error rather than silently
// skewed fields.
class CanonicalReader
{
  public:
    explicit CanonicalReader(std::string_view bytes) : mBytes(bytes)
    {
    }

    uint8_t
    u8()
    {
        need(1);
        return static_cast<uint8_t>(mBytes[mPos++]);
    }

    uint32_t
    u32()
    {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
        {
            v |= static_cast<uint32_t>(
                     static_cast<uint8_t>(mBytes[mPos + static_cast<size_t>(i)]))
                 << (8 * i);
        }
        mPos += 4;
        return v;
    }

    uint64_t
    u64()
    {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
        {
            v |= static_cast<uint64_t>(
                     static_cast<uint8_t>(mBytes[mPos + static_cast<size_t>(i)]))
                 << (8 * i);
        }
        mPos += 8;
        return v;
    }

    int32_t
    i32()
    {
        return static_cast<int32_t>(u32());
    }

    int64_t
    i64()
    {
        return static_cast<int64_t>(u64());
    }

    bool
    boolean()
    {
        return u8() != 0;
    }

    std::string
    str()
    {
        uint32_t n = u32();
        need(n);
        std::string s(mBytes.substr(mPos, n));
        mPos += n;
        return s;
    }

    bool
    finished() const
    {
        return mPos == mBytes.size();
    }

  private:
    void
    need(size_t n) const
    {
        if (mPos + n > mBytes.size())
        {
            throw std::runtime_error("canonical byte stream truncated");
        }
    }

    std::string_view mBytes;
    size_t mPos = 0;
};

// 128-bit state fingerprint.
struct Fingerprint
{
    uint64_t hi = 0;
    uint64_t lo = 0;

    friend bool
    operator==(Fingerprint const& a, Fingerprint const& b)
    {
        return a.hi == b.hi && a.lo == b.lo;
    }

    friend bool
    operator<(Fingerprint const& a, Fingerprint const& b)
    {
        return a.hi != b.hi ? a.hi < b.hi : a.lo < b.lo;
    }

    std::string hex() const;
};

struct FingerprintHasher
{
    size_t
    operator()(Fingerprint const& f) const
    {
        return static_cast<size_t>(f.hi ^ (f.lo * 0x9e3779b97f4a7c15ull));
    }
};

namespace detail
{
inline uint64_t
rotl64(uint64_t x, int8_t r)
{
    return (x << r) | (x >> (64 - r));
}

inline uint64_t
fmix64(uint64_t k)
{
    k ^= k >> 33;
    k *= 0xff51afd7ed558ccdull;
    k ^= k >> 33;
    k *= 0xc4ceb9fe1a85ec53ull;
    k ^= k >> 33;
    return k;
}

inline uint64_t
loadLE64(char const* p)
{
    uint64_t v;
    std::memcpy(&v, p, 8);
    // The in-memory bytes were produced little-endian by CanonicalWriter, so
    // on a little-endian host this is already canonical; big-endian hosts
    // would need a byte swap. The model targets little-endian platforms.
    return v;
}
} // namespace detail

// MurmurHash3 x64 128-bit over a canonical byte string. Chosen for its
// platform-independent definition (we fix the seed) and cheap mixing; the
// checker relies on 128 bits making collisions vanishingly unlikely and
// additionally cross-checks full states on small models.
inline Fingerprint
fingerprintBytes(std::string_view data, uint64_t seed = 0x1db3a7c59f20e6b1ull)
{
    using namespace detail;
    size_t const len = data.size();
    char const* p = data.data();
    size_t const nblocks = len / 16;

    uint64_t h1 = seed;
    uint64_t h2 = seed;
    uint64_t const c1 = 0x87c37b91114253d5ull;
    uint64_t const c2 = 0x4cf5ad432745937full;

    for (size_t i = 0; i < nblocks; ++i)
    {
        uint64_t k1 = loadLE64(p + i * 16);
        uint64_t k2 = loadLE64(p + i * 16 + 8);
        k1 *= c1;
        k1 = rotl64(k1, 31);
        k1 *= c2;
        h1 ^= k1;
        h1 = rotl64(h1, 27);
        h1 += h2;
        h1 = h1 * 5 + 0x52dce729;
        k2 *= c2;
        k2 = rotl64(k2, 33);
        k2 *= c1;
        h2 ^= k2;
        h2 = rotl64(h2, 31);
        h2 += h1;
        h2 = h2 * 5 + 0x38495ab5;
    }

    char const* tail = p + nblocks * 16;
    uint64_t k1 = 0;
    uint64_t k2 = 0;
    switch (len & 15)
    {
    case 15:
        k2 ^= uint64_t(uint8_t(tail[14])) << 48;
        [[fallthrough]];
    case 14:
        k2 ^= uint64_t(uint8_t(tail[13])) << 40;
        [[fallthrough]];
    case 13:
        k2 ^= uint64_t(uint8_t(tail[12])) << 32;
        [[fallthrough]];
    case 12:
        k2 ^= uint64_t(uint8_t(tail[11])) << 24;
        [[fallthrough]];
    case 11:
        k2 ^= uint64_t(uint8_t(tail[10])) << 16;
        [[fallthrough]];
    case 10:
        k2 ^= uint64_t(uint8_t(tail[9])) << 8;
        [[fallthrough]];
    case 9:
        k2 ^= uint64_t(uint8_t(tail[8]));
        k2 *= c2;
        k2 = rotl64(k2, 33);
        k2 *= c1;
        h2 ^= k2;
        [[fallthrough]];
    case 8:
        k1 ^= uint64_t(uint8_t(tail[7])) << 56;
        [[fallthrough]];
    case 7:
        k1 ^= uint64_t(uint8_t(tail[6])) << 48;
        [[fallthrough]];
    case 6:
        k1 ^= uint64_t(uint8_t(tail[5])) << 40;
        [[fallthrough]];
    case 5:
        k1 ^= uint64_t(uint8_t(tail[4])) << 32;
        [[fallthrough]];
    case 4:
        k1 ^= uint64_t(uint8_t(tail[3])) << 24;
        [[fallthrough]];
    case 3:
        k1 ^= uint64_t(uint8_t(tail[2])) << 16;
        [[fallthrough]];
    case 2:
        k1 ^= uint64_t(uint8_t(tail[1])) << 8;
        [[fallthrough]];
    case 1:
        k1 ^= uint64_t(uint8_t(tail[0]));
        k1 *= c1;
        k1 = rotl64(k1, 31);
        k1 *= c2;
        h1 ^= k1;
        break;
    case 0:
        break;
    }

    h1 ^= uint64_t(len);
    h2 ^= uint64_t(len);
    h1 += h2;
    h2 += h1;
    h1 = fmix64(h1);
    h2 = fmix64(h2);
    h1 += h2;
    h2 += h1;
    return Fingerprint{h1, h2};
}

inline std::string
Fingerprint::hex() const
{
    static char const* digits = "0123456789abcdef";
    std::string out(32, '0');
    for (int i = 0; i < 16; ++i)
    {
        uint64_t word = i < 8 ? hi : lo;
        int shift = 8 * (7 - (i % 8));
        uint8_t byte = static_cast<uint8_t>((word >> shift) & 0xff);
        out[2 * i] = digits[byte >> 4];
        out[2 * i + 1] = digits[byte & 0xf];
    }
    return out;
}

} // namespace lnmc
