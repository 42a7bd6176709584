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

#ifndef CSIFB_LINKPHYS_HPP
#define CSIFB_LINKPHYS_HPP

#include "csifb/common.hpp"

#include <cstdint>
#include <vector>

namespace csifb
{

struct SystemConfig
{
    int n_c = 64;
    int n_t = 8;
    int n_f = 16;               // feedback subcarriers
    double snr_fb_db = 10.0;    // uplink feedback SNR
    double snr_dl_db = 10.0;    // downlink SNR
    std::uint64_t subcarrier_seed = 1;
    double capacity_efficiency = 1.0; // eta in (0,1]

    double rho() const { return static_cast<double>(n_f) / n_c; }
    void validate() const;
};

struct FeedbackFrame
{
    arma::cx_vec x;              // length N_f, unit mean symbol power
    std::vector<int> indices;    // assigned uplink subcarriers, strictly increasing
};

struct ChannelOutput
{
    arma::cx_mat y;   // N_t x N_f received signal
    arma::cx_mat h_f; // N_t x N_f true feedback channel columns
};

enum class Scheme
{
    analog,
    digital,
    perfect,
    average
};

struct ReconstructionResult
{
    arma::cx_mat h_d_hat; // N_c x N_t angular-delay reconstruction
    Scheme scheme = Scheme::analog;
    bool failed = false;
};

/// n_f distinct subcarriers sampled uniformly without replacement,
/// deterministic in seed, returned sorted.
std::vector<int> select_subcarriers(int n_c, int n_f, std::uint64_t subcarrier_seed);

/// Scale to exact unit mean symbol power: x = x_raw * sqrt(N_f) / ||x_raw||.
arma::cx_vec normalize_power(const arma::cx_vec &x_raw);

/// SIMO feedback channel: y_j = h_f_j x_j + z_j with CN(0, sigma^2 I) noise,
/// sigma^2 = 10^(-snr_fb_db/10). h_f_j is row indices[j] of the frequency-
/// domain uplink channel, transposed to a column. Deterministic in noise_seed.
ChannelOutput apply_feedback_channel(const FeedbackFrame &frame, const arma::cx_mat &h_u_freq,
                                     double snr_fb_db, std::uint64_t noise_seed);

/// Normalized maximum ratio combining: xhat_j = h_j^H y_j / ||h_j||^2.
arma::cx_vec mrc_combine(const ChannelOutput &out);

/// eta * sum_j log2(1 + SNR_FB ||h_f_j||^2), in bits per feedback event.
double feedback_capacity(const arma::cx_mat &h_f, double snr_fb_db, double eta = 1.0);

/// Conjugate-beamforming downlink rate, bps/Hz:
/// (1/N_c) sum_i log2(1 + SNR_DL |h_i w_i^H|^2 / ||w_i||^2),
/// rows h_i of the true and w_i of the reconstructed frequency-domain CSI.
/// An all-zero reconstructed row contributes log2(1) = 0.
double downlink_rate(const arma::cx_mat &h_d_true_freq, const arma::cx_mat &h_d_hat_freq,
                     double snr_dl_db);

/// Gradient of downlink_rate with respect to the reconstructed matrix, as
/// dR/dRe(w) + i dR/dIm(w) per entry.
arma::cx_mat downlink_rate_grad(const arma::cx_mat &h_d_true_freq,
                                const arma::cx_mat &h_d_hat_freq, double snr_dl_db);

/// 10 log10(||h_true - h_hat||_F^2 / ||h_true||_F^2). Exact reconstruction is
/// reported as the -150 dB sentinel.
double nmse_db(const arma::cx_mat &h_true, const arma::cx_mat &h_hat);

constexpr double kNmseSentinelDb = -150.0;

// --- Templated single-sample helpers shared with the training graph --------
// The training loop instantiates these with float or double so the channel
// and MRC layers inside the autoencoder are the same formulas as the
// evaluation path.

/// Noise draw for one feedback event: N_t x N_f, per-antenna variance sigma^2.
template <typename T>
arma::Mat<std::complex<T>> draw_channel_noise(int n_t, int n_f, T sigma2, std::uint64_t noise_seed)
{
    auto rng = make_rng(mix_seed(noise_seed, 0xFEEDC0DEULL));
    arma::Mat<std::complex<T>> z(n_t, n_f);
    if (sigma2 <= T(0))
    {
        z.zeros();
        return z;
    }
    std::normal_distribution<double> n(0.0, std::sqrt(static_cast<double>(sigma2) / 2.0));
    for (arma::uword j = 0; j < z.n_cols; ++j)
        for (arma::uword a = 0; a < z.n_rows; ++a)
        {
            const double re = n(rng);
            const double im = n(rng);
            z(a, j) = std::complex<T>(static_cast<T>(re), static_cast<T>(im));
        }
    return z;
}

/// Channel + MRC in one step: xhat_j = x_j + h_j^H z_j / ||h_j||^2.
/// Affine in x with identity Jacobian, which is what backpropagation uses.
template <typename T>
arma::Col<std::complex<T>> channel_mrc_equalized(const arma::Col<std::complex<T>> &x,
                                                 const arma::Mat<std::complex<T>> &h_f,
                                                 T sigma2, std::uint64_t noise_seed)
{
    const arma::Mat<std::complex<T>> z = draw_channel_noise<T>(
        static_cast<int>(h_f.n_rows), static_cast<int>(h_f.n_cols), sigma2, noise_seed);
    arma::Col<std::complex<T>> xhat(x.n_elem);
    for (arma::uword j = 0; j < x.n_elem; ++j)
    {
        const T g = std::real(arma::cdot(h_f.col(j), h_f.col(j)));
        if (!(g > T(0)))
            throw std::domain_error("degenerate channel: zero-norm feedback column");
        xhat(j) = x(j) + arma::cdot(h_f.col(j), z.col(j)) / g;
    }
    return xhat;
}

} // namespace csifb

#endif
