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

#include <catch2/catch_amalgamated.hpp>

#include "csifb/linkphys.hpp"

#include <set>

using namespace csifb;

namespace
{
constexpr double kInf = std::numeric_limits<double>::infinity();

FeedbackFrame make_frame(const arma::cx_vec &x, const std::vector<int> &idx)
{
    FeedbackFrame f;
    f.x = x;
    f.indices = idx;
    return f;
}
} // namespace

TEST_CASE("select_subcarriers: full set, determinism, paper overhead point")
{
    auto all = select_subcarriers(256, 256, 42);
    for (int i = 0; i < 256; ++i)
        REQUIRE(all[static_cast<std::size_t>(i)] == i);

    auto a = select_subcarriers(256, 51, 7);
    auto b = select_subcarriers(256, 51, 7);
    REQUIRE(a == b);
    REQUIRE(51.0 / 256.0 == Catch::Approx(0.199).margin(0.001));

    // sorted, unique, in range
    std::set<int> uniq(a.begin(), a.end());
    REQUIRE(uniq.size() == 51);
    REQUIRE(std::is_sorted(a.begin(), a.end()));
    REQUIRE(*uniq.begin() >= 0);
    REQUIRE(*uniq.rbegin() < 256);

    REQUIRE_THROWS_AS(select_subcarriers(16, 17, 1), std::invalid_argument);
    REQUIRE_THROWS_AS(select_subcarriers(16, 0, 1), std::invalid_argument);
}

TEST_CASE("select_subcarriers: uniform coverage across seeds")
{
    // Every index should appear with roughly equal frequency.
    arma::vec counts(32, arma::fill::zeros);
    const int reps = 4000;
    for (int s = 0; s < reps; ++s)
        for (int idx : select_subcarriers(32, 8, static_cast<std::uint64_t>(s)))
            counts(idx) += 1.0;
    const double expected = reps * 8.0 / 32.0; // 1000
    for (arma::uword i = 0; i < counts.n_elem; ++i)
        REQUIRE(std::abs(counts(i) - expected) / expected < 0.12);
}

TEST_CASE("normalize_power: unit mean symbol power")
{
    arma::cx_vec x = {cx(2, 0), cx(0, 0), cx(0, 0), cx(0, 0)};
    arma::cx_vec y = normalize_power(x);
    REQUIRE(arma::abs(y - x).max() < 1e-12); // already unit mean power
    REQUIRE(arma::mean(arma::square(arma::abs(y))) == Catch::Approx(1.0).margin(1e-12));

    arma::arma_rng::set_seed(11);
    for (int rep = 0; rep < 50; ++rep)
    {
        arma::cx_vec r(13, arma::fill::randn);
        arma::cx_vec n = normalize_power(r);
        REQUIRE(arma::mean(arma::square(arma::abs(n))) == Catch::Approx(1.0).margin(1e-6));
        // scale invariance for positive scales
        arma::cx_vec n2 = normalize_power(r * 3.7);
        REQUIRE(arma::abs(n2 - n).max() < 1e-9);
    }

    arma::cx_vec zero(5, arma::fill::zeros);
    REQUIRE_THROWS_AS(normalize_power(zero), std::domain_error);
}

TEST_CASE("apply_feedback_channel: noiseless substitution")
{
    // N_t = 2, h_f = (1, i), x = 1 + 0i, z = 0 -> y = (1, i).
    arma::cx_mat h_u_freq(3, 2, arma::fill::zeros);
    h_u_freq(1, 0) = cx(1, 0);
    h_u_freq(1, 1) = cx(0, 1);

    auto frame = make_frame(arma::cx_vec{cx(1, 0)}, {1});
    auto out = apply_feedback_channel(frame, h_u_freq, kInf, 9);
    REQUIRE(std::abs(out.y(0, 0) - cx(1, 0)) < 1e-15);
    REQUIRE(std::abs(out.y(1, 0) - cx(0, 1)) < 1e-15);
    REQUIRE(std::abs(out.h_f(0, 0) - cx(1, 0)) < 1e-15);

    // noiseless end-to-end: y_j = h_j x_j for random inputs
    arma::arma_rng::set_seed(3);
    arma::cx_mat hu(16, 4, arma::fill::randn);
    auto idx = select_subcarriers(16, 5, 21);
    arma::cx_vec x(5, arma::fill::randn);
    auto fr = make_frame(normalize_power(x), idx);
    auto o2 = apply_feedback_channel(fr, hu, kInf, 1);
    for (int j = 0; j < 5; ++j)
    {
        arma::cx_vec expect = hu.row(idx[static_cast<std::size_t>(j)]).st() * fr.x(j);
        REQUIRE(arma::abs(o2.y.col(j) - expect).max() < 1e-12);
    }

    auto bad = make_frame(arma::cx_vec{cx(1, 0)}, {99});
    REQUIRE_THROWS_AS(apply_feedback_channel(bad, hu, 10.0, 1), std::invalid_argument);
}

TEST_CASE("apply_feedback_channel: deterministic in noise seed")
{
    arma::arma_rng::set_seed(4);
    arma::cx_mat hu(8, 2, arma::fill::randn);
    auto fr = make_frame(normalize_power(arma::cx_vec(3, arma::fill::randn)),
                         select_subcarriers(8, 3, 5));
    auto a = apply_feedback_channel(fr, hu, 10.0, 77);
    auto b = apply_feedback_channel(fr, hu, 10.0, 77);
    auto c = apply_feedback_channel(fr, hu, 10.0, 78);
    REQUIRE(arma::abs(a.y - b.y).max() == 0.0);
    REQUIRE(arma::abs(a.y - c.y).max() > 1e-9);
}

// Monte-Carlo noise-variance oracle: zero input, measure per-antenna variance.
TEST_CASE("apply_feedback_channel: noise variance matches configured SNR")
{
    const double snr_db = 7.0;
    const double sigma2 = std::pow(10.0, -snr_db / 10.0);
    arma::cx_mat hu(4, 2, arma::fill::ones);
    auto idx = select_subcarriers(4, 4, 3);
    auto fr = make_frame(arma::cx_vec(4, arma::fill::zeros), idx); // precondition bypassed on purpose

    const int events = 25000; // 4 subcarriers each -> 1e5 noise draws per antenna
    arma::vec acc(2, arma::fill::zeros);
    for (int e = 0; e < events; ++e)
    {
        auto out = apply_feedback_channel(fr, hu, snr_db, 1000 + static_cast<std::uint64_t>(e));
        for (int a = 0; a < 2; ++a)
            acc(a) += arma::accu(arma::square(arma::abs(out.y.row(a))));
    }
    acc /= (4.0 * events);
    for (int a = 0; a < 2; ++a)
        REQUIRE(std::abs(acc(a) - sigma2) / sigma2 < 0.02);
}

TEST_CASE("mrc_combine: hand case and noiseless identity")
{
    ChannelOutput out;
    out.h_f = arma::cx_mat(2, 1);
    out.h_f(0, 0) = cx(1, 0);
    out.h_f(1, 0) = cx(0, 1);
    out.y = out.h_f; // y = h * 1
    auto xhat = mrc_combine(out);
    REQUIRE(std::abs(xhat(0) - cx(1, 0)) < 1e-15);

    arma::arma_rng::set_seed(8);
    arma::cx_mat hu(32, 4, arma::fill::randn);
    auto idx = select_subcarriers(32, 9, 2);
    auto fr = make_frame(normalize_power(arma::cx_vec(9, arma::fill::randn)), idx);
    auto o = apply_feedback_channel(fr, hu, kInf, 5);
    REQUIRE(arma::abs(mrc_combine(o) - fr.x).max() < 1e-6);

    ChannelOutput degenerate;
    degenerate.h_f = arma::cx_mat(2, 1, arma::fill::zeros);
    degenerate.y = arma::cx_mat(2, 1, arma::fill::ones);
    REQUIRE_THROWS_AS(mrc_combine(degenerate), std::domain_error);
}

// Monte-Carlo matched-filter oracle: post-combining SNR = SNR_FB * ||h||^2.
TEST_CASE("mrc_combine: post-MRC SNR gain")
{
    const double snr_db = 10.0;
    arma::cx_mat hu(2, 2, arma::fill::zeros);
    hu(0, 0) = cx(1.0, 0.0);
    hu(0, 1) = cx(0.0, 0.5);
    const double h_norm2 = 1.25;
    const double expected_snr = std::pow(10.0, snr_db / 10.0) * h_norm2;

    auto fr = make_frame(arma::cx_vec{cx(1, 0)}, {0});
    const int n = 100000;
    double err2 = 0.0;
    cx bias(0, 0);
    for (int i = 0; i < n; ++i)
    {
        auto out = apply_feedback_channel(fr, hu, snr_db, 50000 + static_cast<std::uint64_t>(i));
        cx e = mrc_combine(out)(0) - fr.x(0);
        err2 += std::norm(e);
        bias += e;
    }
    const double emp_snr = 1.0 / (err2 / n); // unit symbol power
    REQUIRE(std::abs(emp_snr - expected_snr) / expected_snr < 0.03);

    // Unbiasedness: |mean error| < 3 sigma_component / sqrt(n) per component.
    const double sigma_c = std::sqrt(std::pow(10.0, -snr_db / 10.0) / (2.0 * h_norm2));
    bias /= n;
    REQUIRE(std::abs(bias.real()) < 3.0 * sigma_c / std::sqrt(static_cast<double>(n)));
    REQUIRE(std::abs(bias.imag()) < 3.0 * sigma_c / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("feedback_capacity: closed-form cases")
{
    arma::cx_mat h1(1, 1);
    h1(0, 0) = cx(1, 0);
    REQUIRE(feedback_capacity(h1, -kInf) == 0.0);
    REQUIRE(feedback_capacity(h1, 0.0) == Catch::Approx(1.0).margin(1e-12));

    // ||h_1||^2 = 0.5, ||h_2||^2 = 2.0, SNR = 10 -> log2(6) + log2(21).
    arma::cx_mat h2(2, 2, arma::fill::zeros);
    h2(0, 0) = cx(std::sqrt(0.5), 0);
    h2(0, 1) = cx(0, std::sqrt(2.0));
    REQUIRE(feedback_capacity(h2, 10.0) ==
            Catch::Approx(6.977279923499917).margin(1e-9));

    // eta scaling
    REQUIRE(feedback_capacity(h2, 10.0, 0.5) ==
            Catch::Approx(0.5 * 6.977279923499917).margin(1e-9));
}

TEST_CASE("feedback_capacity: monotone in SNR and in subcarrier count")
{
    arma::arma_rng::set_seed(13);
    arma::cx_mat h(4, 6, arma::fill::randn);
    double prev = -1.0;
    for (double snr : {-10.0, 0.0, 5.0, 10.0, 20.0})
    {
        double c = feedback_capacity(h, snr);
        REQUIRE(c > prev);
        prev = c;
    }
    for (arma::uword k = 1; k < h.n_cols; ++k)
    {
        REQUIRE(feedback_capacity(h.cols(0, k), 10.0) >=
                feedback_capacity(h.cols(0, k - 1), 10.0));
    }
}

TEST_CASE("downlink_rate: perfect CSI, orthogonal beam, scale invariance")
{
    // SNR_DL * ||h_i||^2 = 3 for all i -> exactly 2 bps/Hz with perfect CSI.
    const double snr_db = 10.0; // linear 10
    arma::cx_mat h(6, 3, arma::fill::zeros);
    for (arma::uword i = 0; i < h.n_rows; ++i)
        h(i, 0) = cx(std::sqrt(0.3), 0);
    REQUIRE(downlink_rate(h, h, snr_db) == Catch::Approx(2.0).margin(1e-12));

    // Orthogonal reconstruction -> 0.
    arma::cx_mat w(6, 3, arma::fill::zeros);
    for (arma::uword i = 0; i < w.n_rows; ++i)
        w(i, 1) = cx(1, 0);
    REQUIRE(downlink_rate(h, w, snr_db) == 0.0);

    // Per-row complex rescaling leaves the rate unchanged.
    arma::arma_rng::set_seed(17);
    arma::cx_mat ht(8, 4, arma::fill::randn), wt(8, 4, arma::fill::randn);
    double base = downlink_rate(ht, wt, snr_db);
    arma::cx_mat ws = wt;
    for (arma::uword i = 0; i < ws.n_rows; ++i)
        ws.row(i) *= cx(0.3 * (i + 1.0), -1.7);
    REQUIRE(std::abs(downlink_rate(ht, ws, snr_db) - base) < 1e-9);

    // All-zero reconstructed row contributes log2(1) = 0.
    arma::cx_mat wz = wt;
    wz.row(2).zeros();
    REQUIRE(std::isfinite(downlink_rate(ht, wz, snr_db)));
}

TEST_CASE("downlink_rate: perfect CSI dominates any reconstruction")
{
    arma::arma_rng::set_seed(19);
    for (int rep = 0; rep < 1000; ++rep)
    {
        arma::cx_mat h(5, 3, arma::fill::randn), w(5, 3, arma::fill::randn);
        REQUIRE(downlink_rate(h, w, 10.0) <= downlink_rate(h, h, 10.0) + 1e-12);
    }
}

TEST_CASE("downlink_rate_grad: matches central finite differences")
{
    arma::arma_rng::set_seed(23);
    arma::cx_mat h(5, 3, arma::fill::randn), w(5, 3, arma::fill::randn);
    const double snr_db = 8.0;
    arma::cx_mat g = downlink_rate_grad(h, w, snr_db);

    auto rng = make_rng(99);
    std::uniform_int_distribution<int> ri(0, 4), ci(0, 2), part(0, 1);
    const double step = 1e-6;
    int checked = 0;
    while (checked < 24)
    {
        const int r = ri(rng), c = ci(rng);
        const bool real_part = part(rng) == 0;
        arma::cx_mat wp = w, wm = w;
        const cx delta = real_part ? cx(step, 0) : cx(0, step);
        wp(r, c) += delta;
        wm(r, c) -= delta;
        const double fd = (downlink_rate(h, wp, snr_db) - downlink_rate(h, wm, snr_db)) / (2 * step);
        const double an = real_part ? g(r, c).real() : g(r, c).imag();
        if (std::abs(fd) < 1e-8)
            continue; // skip numerically dead coordinates
        REQUIRE(std::abs(an - fd) / std::max(std::abs(an), std::abs(fd)) < 1e-3);
        ++checked;
    }
}

TEST_CASE("nmse: sentinel, zero estimate, brute-force oracle")
{
    arma::arma_rng::set_seed(29);
    arma::cx_mat h(7, 3, arma::fill::randn);
    REQUIRE(nmse_db(h, h) <= -100.0);

    arma::cx_mat zero(7, 3, arma::fill::zeros);
    REQUIRE(nmse_db(h, zero) == Catch::Approx(0.0).margin(1e-12));
    REQUIRE_THROWS_AS(nmse_db(zero, h), std::invalid_argument);

    arma::cx_mat w(7, 3, arma::fill::randn);
    double num = 0.0, den = 0.0;
    for (arma::uword r = 0; r < h.n_rows; ++r)
        for (arma::uword c = 0; c < h.n_cols; ++c)
        {
            num += std::norm(h(r, c) - w(r, c));
            den += std::norm(h(r, c));
        }
    REQUIRE(nmse_db(h, w) == Catch::Approx(10.0 * std::log10(num / den)).margin(1e-9));
}

TEST_CASE("channel_mrc_equalized: equals the channel + MRC composition")
{
    arma::arma_rng::set_seed(31);
    arma::cx_mat hu(16, 3, arma::fill::randn);
    auto idx = select_subcarriers(16, 6, 77);
    auto fr = make_frame(normalize_power(arma::cx_vec(6, arma::fill::randn)), idx);

    const double snr_db = 6.0;
    auto out = apply_feedback_channel(fr, hu, snr_db, 4242);
    arma::cx_vec via_ops = mrc_combine(out);
    arma::cx_vec via_fused = channel_mrc_equalized<double>(
        fr.x, out.h_f, std::pow(10.0, -snr_db / 10.0), 4242);
    REQUIRE(arma::abs(via_ops - via_fused).max() < 1e-12);
}
