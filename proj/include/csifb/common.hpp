// SPDX-License-Identifier: Apache-2.0
//
// csifb — analog and digital deep CSI feedback simulation for FDD massive MIMO
// Copyright (C) 2026 csifb contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef CSIFB_COMMON_HPP
#define CSIFB_COMMON_HPP

#include <armadillo>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace csifb
{

using cx = std::complex<double>;

/// Power convention: dB -> linear is 10^(x/10). Negative infinity maps to 0.
inline double db_to_linear(double db)
{
    if (std::isinf(db) && db < 0.0)
        return 0.0;
    return std::pow(10.0, db / 10.0);
}

inline double linear_to_db(double lin)
{
    return 10.0 * std::log10(lin);
}

// --- Seed derivation -------------------------------------------------------
// All randomness in the project is derived from explicit 64-bit seeds through
// the SplitMix64 finalizer, so every draw is a pure function of its seed.

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b)
{
    return splitmix64(a ^ splitmix64(b));
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c)
{
    return mix_seed(mix_seed(a, b), c);
}

/// RNG used everywhere; constructed from a derived seed.
inline std::mt19937_64 make_rng(std::uint64_t seed)
{
    return std::mt19937_64(splitmix64(seed));
}

/// Circularly-symmetric complex Gaussian with E|z|^2 = variance.
inline cx draw_cn(std::mt19937_64 &rng, double variance)
{
    std::normal_distribution<double> n(0.0, std::sqrt(variance / 2.0));
    double re = n(rng);
    double im = n(rng);
    return {re, im};
}

inline bool all_finite(const arma::cx_mat &m)
{
    return m.is_finite();
}

inline void require(bool cond, const std::string &msg)
{
    if (!cond)
        throw std::invalid_argument(msg);
}

} // namespace csifb

#endif
