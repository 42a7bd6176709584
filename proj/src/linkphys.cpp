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

#include "csifb/linkphys.hpp"

#include <algorithm>
#include <numeric>

namespace csifb
{

void SystemConfig::validate() const
{
    require(n_c >= 1, "system.n_c must be >= 1");
    require(n_t >= 1, "system.n_t must be >= 1");
    require(n_f >= 1 && n_f <= n_c, "system.n_f must satisfy 1 <= n_f <= n_c");
    require(capacity_efficiency > 0.0 && capacity_efficiency <= 1.0,
            "system.capacity_efficiency must be in (0,1]");
}

std::vector<int> select_subcarriers(int n_c, int n_f, std::uint64_t subcarrier_seed)
{
    require(n_c >= 1, "n_c must be >= 1");
    require(n_f >= 1 && n_f <= n_c, "n_f must satisfy 1 <= n_f <= n_c");

    // Partial Fisher-Yates over [0, n_c).
    std::vector<int> pool(static_cast<std::size_t>(n_c));
    std::iota(pool.begin(), pool.end(), 0);
    auto rng = make_rng(mix_seed(subcarrier_seed, 0x53554243ULL));
    for (int i = 0; i < n_f; ++i)
    {
        std::uniform_int_distribution<int> d(i, n_c - 1);
        std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(d(rng))]);
    }
    std::vector<int> sel(pool.begin(), pool.begin() + n_f);
    std::sort(sel.begin(), sel.end());
    return sel;
}

arma::cx_vec normalize_power(const arma::cx_vec &x_raw)
{
    const double nrm = arma::norm(x_raw, 2);
    if (!(nrm > 0.0))
        throw std::domain_error("degenerate input: all-zero feedback frame");
    return x_raw * (std::sqrt(static_cast<double>(x_raw.n_elem)) / nrm);
}

ChannelOutput apply_feedback_channel(const FeedbackFrame &frame, const arma::cx_mat &h_u_freq,
                                     double snr_fb_db, std::uint64_t noise_seed)
{
    require(all_finite(h_u_freq), "apply_feedback_channel: non-finite uplink CSI");
    const int n_t = static_cast<int>(h_u_freq.n_cols);
    const int n_f = static_cast<int>(frame.x.n_elem);
    require(static_cast<int>(frame.indices.size()) == n_f,
            "frame indices/symbols length mismatch");

    ChannelOutput out;
    out.h_f.set_size(n_t, n_f);
    for (int j = 0; j < n_f; ++j)
    {
        const int idx = frame.indices[static_cast<std::size_t>(j)];
        require(idx >= 0 && idx < static_cast<int>(h_u_freq.n_rows),
                "feedback subcarrier index out of range");
        out.h_f.col(j) = h_u_freq.row(idx).st(); // row -> column, no conjugation
    }

    const double sigma2 = db_to_linear(-snr_fb_db);
    const arma::cx_mat z = draw_channel_noise<double>(n_t, n_f, sigma2, noise_seed);
    out.y.set_size(n_t, n_f);
    for (int j = 0; j < n_f; ++j)
        out.y.col(j) = out.h_f.col(j) * frame.x(j) + z.col(j);
    return out;
}

arma::cx_vec mrc_combine(const ChannelOutput &out)
{
    const arma::uword n_f = out.y.n_cols;
    require(out.h_f.n_rows == out.y.n_rows && out.h_f.n_cols == n_f,
            "mrc_combine: shape mismatch");
    arma::cx_vec xhat(n_f);
    for (arma::uword j = 0; j < n_f; ++j)
    {
        const double g = std::real(arma::cdot(out.h_f.col(j), out.h_f.col(j)));
        if (!(g > 0.0))
            throw std::domain_error("degenerate channel: zero-norm feedback column");
        xhat(j) = arma::cdot(out.h_f.col(j), out.y.col(j)) / g;
    }
    return xhat;
}

double feedback_capacity(const arma::cx_mat &h_f, double snr_fb_db, double eta)
{
    require(all_finite(h_f), "feedback_capacity: non-finite input");
    require(eta > 0.0 && eta <= 1.0, "eta must be in (0,1]");
    const double snr = db_to_linear(snr_fb_db);
    double bits = 0.0;
    for (arma::uword j = 0; j < h_f.n_cols; ++j)
    {
        const double g = std::real(arma::cdot(h_f.col(j), h_f.col(j)));
        bits += std::log2(1.0 + snr * g);
    }
    return eta * bits;
}

double downlink_rate(const arma::cx_mat &h_d_true_freq, const arma::cx_mat &h_d_hat_freq,
                     double snr_dl_db)
{
    require(h_d_true_freq.n_rows == h_d_hat_freq.n_rows &&
                h_d_true_freq.n_cols == h_d_hat_freq.n_cols,
            "downlink_rate: shape mismatch");
    const double snr = db_to_linear(snr_dl_db);
    const arma::uword n_c = h_d_true_freq.n_rows;

    double rate = 0.0;
    for (arma::uword i = 0; i < n_c; ++i)
    {
        // Beam = conjugated reconstructed row; inner product h_i w_i^H.
        const cx p = arma::accu(h_d_true_freq.row(i) % arma::conj(h_d_hat_freq.row(i)));
        const double w2 = std::real(
            arma::accu(h_d_hat_freq.row(i) % arma::conj(h_d_hat_freq.row(i))));
        if (w2 > 0.0)
            rate += std::log2(1.0 + snr * std::norm(p) / w2);
    }
    return rate / static_cast<double>(n_c);
}

arma::cx_mat downlink_rate_grad(const arma::cx_mat &h_d_true_freq,
                                const arma::cx_mat &h_d_hat_freq, double snr_dl_db)
{
    require(h_d_true_freq.n_rows == h_d_hat_freq.n_rows &&
                h_d_true_freq.n_cols == h_d_hat_freq.n_cols,
            "downlink_rate_grad: shape mismatch");
    const double snr = db_to_linear(snr_dl_db);
    const arma::uword n_c = h_d_true_freq.n_rows;
    const double ln2 = std::log(2.0);

    arma::cx_mat grad(arma::size(h_d_hat_freq), arma::fill::zeros);
    for (arma::uword i = 0; i < n_c; ++i)
    {
        const arma::cx_rowvec h = h_d_true_freq.row(i);
        const arma::cx_rowvec w = h_d_hat_freq.row(i);
        const cx p = arma::accu(h % arma::conj(w));
        const double f = std::norm(p);
        const double g = std::real(arma::accu(w % arma::conj(w)));
        if (!(g > 0.0))
            continue;
        const double pref = snr / (ln2 * (1.0 + snr * f / g) * static_cast<double>(n_c));
        // d f / d w_k = 2 conj(p) h_k ; d g / d w_k = 2 w_k  (as dRe + i dIm).
        grad.row(i) += pref * ((2.0 * std::conj(p) / g) * h - (2.0 * f / (g * g)) * w);
    }
    return grad;
}

double nmse_db(const arma::cx_mat &h_true, const arma::cx_mat &h_hat)
{
    require(h_true.n_rows == h_hat.n_rows && h_true.n_cols == h_hat.n_cols,
            "nmse: shape mismatch");
    const double denom = std::pow(arma::norm(h_true, "fro"), 2);
    require(denom > 0.0, "nmse: zero reference");
    const double num = std::pow(arma::norm(h_true - h_hat, "fro"), 2);
    if (num == 0.0)
        return kNmseSentinelDb;
    return std::max(kNmseSentinelDb, 10.0 * std::log10(num / denom));
}

} // namespace csifb
