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

#ifndef CSIFB_CHANMODEL_HPP
#define CSIFB_CHANMODEL_HPP

#include "csifb/common.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace csifb
{

// Clustered multipath generator for paired FDD uplink/downlink channels.
//
// A sample is a sum of rays. Rays are grouped into clusters that share a
// random angular center; delay taps come from a fixed cyclic table over
// [0, max_delay_taps) with per-ray power weighted by exp(-tap/delay_decay),
// so the ensemble power-delay profile is exactly exponential. A deterministic
// LOS ray sits at delay tap 0, which makes the dataset mean converge to the
// LOS component. Uplink shares the ray geometry (taps, angles, magnitudes)
// with the downlink; only the per-ray phases are redrawn when
// ul_dl_phase_decorrelation is set.

struct GeometryConfig
{
    int n_clusters = 2;
    int rays_per_cluster = 6;
    int max_delay_taps = 12; // L_max
    double delay_decay = 3.0; // taps
    double angle_spread_deg = 5.0;
    double los_power_fraction = 0.1;
    double antenna_spacing_wavelengths = 0.5;
    bool ul_dl_phase_decorrelation = true;

    void validate(int n_c) const;
};

struct ChannelSample
{
    arma::cx_mat h_d; // N_c x N_t, angular-delay (rows = delay taps)
    arma::cx_mat h_u; // same convention
    std::int64_t sample_id = 0;
    std::uint64_t seed = 0;
};

struct DatasetManifest
{
    int format_version = 1;
    int n_c = 0;
    int n_t = 0;
    std::int64_t count = 0;
    std::string split; // "train" or "test"
    std::uint64_t global_seed = 0;
    GeometryConfig geometry;
    std::string dtype = "complex64 as interleaved little-endian IEEE-754 single-precision real,imag";
    std::string layout = "row-major [sample][delay_tap][antenna]";
};

struct Dataset
{
    DatasetManifest manifest;
    std::vector<ChannelSample> samples;
};

/// Seed for one sample, derived from the dataset-level seed and the split.
std::uint64_t sample_seed(std::uint64_t global_seed, const std::string &split, std::int64_t sample_id);

/// One raw (unnormalized) paired channel realization. Deterministic in
/// (geometry, n_c, n_t, seed). Expected Frobenius energy is N_t.
ChannelSample generate_sample(const GeometryConfig &geometry, int n_c, int n_t, std::uint64_t seed);

/// Scale h_d and h_u (each by its own factor) so the per-subcarrier row norm
/// averages to exactly 1, i.e. ||H||_F^2 = N_c. Applied to every dataset
/// sample before it is written.
void normalize_sample(ChannelSample &sample);

/// Fresh uplink realization for channel-in-the-loop training: same ray
/// geometry as the stored sample, per-ray phases redrawn from `realization`.
/// Realization 0 reproduces the stored (normalized) dataset uplink up to
/// float32 rounding. Output is normalized like dataset samples.
arma::cx_mat uplink_realization(const GeometryConfig &geometry, int n_c, int n_t,
                                std::uint64_t samp_seed, std::uint64_t realization);

/// Unitary column-wise DFT (delay -> frequency). Preserves Frobenius norm.
arma::cx_mat to_frequency(const arma::cx_mat &h);

/// Inverse of to_frequency.
arma::cx_mat to_delay(const arma::cx_mat &h_freq);

/// Generate the train/test pair under dir/train and dir/test.
void generate_dataset(const GeometryConfig &geometry, int n_c, int n_t,
                      std::int64_t n_train, std::int64_t n_test,
                      std::uint64_t global_seed, const std::string &dir);

Dataset load_dataset(const std::string &split_dir);

/// Element-wise mean of h_d over the dataset; the average-CSI fallback.
arma::cx_mat mean_channel(const Dataset &dataset);

/// Ensemble per-tap expected power (summed over antennas) of the generator,
/// including the LOS spike at tap 0. Length n_c.
arma::vec expected_tap_power_profile(const GeometryConfig &geometry, int n_c, int n_t);

} // namespace csifb

#endif
