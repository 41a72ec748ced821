#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

namespace spde::rng {

/// Philox4x32-10 counter-based generator (Salmon et al., Random123).
/// A pure function of (counter, key): any draw can be regenerated independently.
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key)
{
    constexpr std::uint32_t m0 = 0xD2511F53u;
    constexpr std::uint32_t m1 = 0xCD9E8D57u;
    constexpr std::uint32_t w0 = 0x9E3779B9u;
    constexpr std::uint32_t w1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = std::uint64_t{m0} * ctr[0];
        const std::uint64_t p1 = std::uint64_t{m1} * ctr[2];
        ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
               static_cast<std::uint32_t>(p1),
               static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
               static_cast<std::uint32_t>(p0)};
        key[0] += w0;
        key[1] += w1;
    }
    return ctr;
}

/// SplitMix64 finalizer; used to derive child seeds from a master seed.
constexpr std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Seed of Monte Carlo sample `index` under `master`.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index)
{
    return splitmix64(splitmix64(master) ^ (index * 0xD1B54A32D192ED03ull + 1));
}

/// Uniform in (0, 1) from 64 random bits; never returns 0.
inline double to_open_unit(std::uint64_t bits)
{
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

/// Two independent standard normals for mode (i, j) at step m under `seed`.
/// The first drives the Brownian increment, the second is the OU residual draw.
/// Draws depend only on (seed, i, j, m).
inline std::pair<double, double> mode_normals(std::uint64_t seed, std::uint32_t i,
                                              std::uint32_t j, std::uint32_t m)
{
    const auto out = philox4x32({i, j, m, 0u},
                                {static_cast<std::uint32_t>(seed),
                                 static_cast<std::uint32_t>(seed >> 32)});
    const double u1 = to_open_unit((std::uint64_t{out[0]} << 32) | out[1]);
    const double u2 = to_open_unit((std::uint64_t{out[2]} << 32) | out[3]);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phi = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(phi), r * std::sin(phi)};
}

} // namespace spde::rng
