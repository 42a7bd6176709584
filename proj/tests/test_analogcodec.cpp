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

#include "csifb/analogcodec.hpp"

#include <filesystem>

using namespace csifb;
namespace fs = std::filesystem;

namespace
{

Dataset make_tiny_dataset(const GeometryConfig &g, int n_c, int n_t, int count,
                          std::uint64_t global_seed, const std::string &split)
{
    Dataset ds;
    ds.manifest.n_c = n_c;
    ds.manifest.n_t = n_t;
    ds.manifest.count = count;
    ds.manifest.split = split;
    ds.manifest.global_seed = global_seed;
    ds.manifest.geometry = g;
    for (int i = 0; i < count; ++i)
    {
        ChannelSample s = generate_sample(g, n_c, n_t, sample_seed(global_seed, split, i));
        s.sample_id = i;
        normalize_sample(s);
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

SystemConfig tiny_config(int n_c, int n_t, int n_f, double snr_db)
{
    SystemConfig c;
    c.n_c = n_c;
    c.n_t = n_t;
    c.n_f = n_f;
    c.snr_fb_db = snr_db;
    c.snr_dl_db = 10.0;
    c.subcarrier_seed = 3;
    return c;
}

} // namespace

TEST_CASE("spec_for_overhead: feature counts and determinism")
{
    auto a = spec_for_overhead(256, 32, 0.25);
    REQUIRE(a.feature_count == 128); // 2 * 64
    REQUIRE(a.n_f == 64);

    auto b = spec_for_overhead(64, 8, 1.0);
    REQUIRE(b.feature_count == 128);

    auto c1 = spec_for_overhead(64, 8, 0.25, 16);
    auto c2 = spec_for_overhead(64, 8, 0.25, 16);
    REQUIRE(c1.encoder_layers.size() == 3);
    REQUIRE(c1.feature_count == c2.feature_count);
    REQUIRE(c1.projection_channels == c2.projection_channels);
    REQUIRE(c1.feat_h == c2.feat_h);

    // The bottleneck flatten always covers the feature count.
    REQUIRE(c1.projection_channels * c1.feat_h * c1.feat_w >= c1.feature_count);

    REQUIRE_THROWS_WITH(spec_for_overhead(64, 8, 0.001),
                        Catch::Matchers::ContainsSubstring("minimum feasible rho"));
}

TEST_CASE("build_analog_model: shapes, finiteness, deterministic init")
{
    auto spec = spec_for_overhead(64, 8, 0.25, 8);
    auto m1 = build_analog_model_t<float>(spec, 11);
    auto m2 = build_analog_model_t<float>(spec, 11);
    auto m3 = build_analog_model_t<float>(spec, 12);

    auto p1 = m1.params(), p2 = m2.params(), p3 = m3.params();
    REQUIRE(p1.size() == p2.size());
    for (std::size_t i = 0; i < p1.size(); ++i)
        REQUIRE(*p1[i].value == *p2[i].value);
    bool any_diff = false;
    for (std::size_t i = 0; i < p1.size(); ++i)
        if (*p1[i].value != *p3[i].value)
            any_diff = true;
    REQUIRE(any_diff);

    // Zero input pushes through encoder and decoder with finite values and
    // the contract output shape.
    nn::Tensor<float> zero(2, 2, 64, 8);
    auto enc = m1.encoder.forward(zero, false);
    REQUIRE(enc.c == spec.projection_channels);
    REQUIRE(enc.h == spec.feat_h);
    REQUIRE(enc.w == spec.feat_w);
    auto feats = crop_features(enc, spec.feature_count);
    REQUIRE(feats[0].size() == static_cast<std::size_t>(spec.feature_count));
    auto dec = m1.decoder.forward(pad_features(feats, spec), false);
    REQUIRE(dec.c == 2);
    REQUIRE(dec.h == 64);
    REQUIRE(dec.w == 8);
    for (float v : dec.data)
        REQUIRE(std::isfinite(v));
}

TEST_CASE("features_to_symbols: grouping and power normalization")
{
    arma::vec f = {1, 0, 0, 1};
    arma::cx_vec x = features_to_symbols(f);
    REQUIRE(std::abs(x(0) - cx(1, 0)) < 1e-12);
    REQUIRE(std::abs(x(1) - cx(0, 1)) < 1e-12);

    arma::vec f2 = {2, 0, 0, 0};
    arma::cx_vec x2 = features_to_symbols(f2);
    REQUIRE(arma::mean(arma::square(arma::abs(x2))) == Catch::Approx(1.0).margin(1e-12));

    // Round trip recovers the features up to the common positive scale.
    arma::arma_rng::set_seed(2);
    arma::vec fr(12, arma::fill::randn);
    arma::cx_vec xr = features_to_symbols(fr);
    arma::vec back = symbols_to_features(xr);
    const double ratio = back(0) / fr(0);
    REQUIRE(ratio > 0.0);
    for (arma::uword i = 0; i < fr.n_elem; ++i)
        REQUIRE(back(i) == Catch::Approx(ratio * fr(i)).margin(1e-9));
}

TEST_CASE("symbols_to_features: interleaving")
{
    arma::cx_vec x = {cx(1, 0), cx(0, 1)};
    arma::vec f = symbols_to_features(x);
    REQUIRE(f(0) == 1.0);
    REQUIRE(f(1) == 0.0);
    REQUIRE(f(2) == 0.0);
    REQUIRE(f(3) == 1.0);

    arma::cx_vec zero(3, arma::fill::zeros);
    REQUIRE(arma::abs(symbols_to_features(zero)).max() == 0.0);
}

TEST_CASE("pipeline stub: noiseless channel passes truncated features exactly")
{
    // Identity-path check of grouping -> power constraint -> channel -> MRC ->
    // de-grouping with the encoder/decoder replaced by a pass-through.
    arma::arma_rng::set_seed(9);
    arma::vec f(16, arma::fill::randn);
    arma::cx_vec x_raw(8);
    for (arma::uword j = 0; j < 8; ++j)
        x_raw(j) = cx(f(2 * j), f(2 * j + 1));
    const double scale = std::sqrt(8.0) / arma::norm(x_raw, 2);

    FeedbackFrame frame;
    frame.x = features_to_symbols(f);
    frame.indices = select_subcarriers(32, 8, 4);
    arma::cx_mat hu(32, 4, arma::fill::randn);

    auto out = apply_feedback_channel(frame, hu, std::numeric_limits<double>::infinity(), 1);
    arma::vec rec = symbols_to_features(mrc_combine(out));
    for (arma::uword i = 0; i < rec.n_elem; ++i)
        REQUIRE(rec(i) == Catch::Approx(scale * f(i)).margin(1e-9));
}

TEST_CASE("analog_forward: untrained model produces finite full-shape output")
{
    GeometryConfig g;
    g.max_delay_taps = 8;
    auto ds = make_tiny_dataset(g, 32, 4, 3, 77, "train");
    auto cfg = tiny_config(32, 4, 8, 10.0);
    auto spec = spec_for_overhead(32, 4, 0.25, 8);
    auto model = build_analog_model_t<float>(spec, 5);

    for (const auto &s : ds.samples)
    {
        auto r = analog_forward(s.h_d, to_frequency(s.h_u), cfg, model, 99);
        REQUIRE(r.scheme == Scheme::analog);
        REQUIRE_FALSE(r.failed);
        REQUIRE(r.h_d_hat.n_rows == 32);
        REQUIRE(r.h_d_hat.n_cols == 4);
        REQUIRE(r.h_d_hat.is_finite());
    }
}

TEST_CASE("analog_forward: noise seed only matters when the channel is noisy")
{
    GeometryConfig g;
    g.max_delay_taps = 8;
    auto ds = make_tiny_dataset(g, 32, 4, 1, 12, "train");
    auto spec = spec_for_overhead(32, 4, 0.25, 8);
    auto model = build_analog_model_t<float>(spec, 5);
    const arma::cx_mat hu_f = to_frequency(ds.samples[0].h_u);

    auto noiseless = tiny_config(32, 4, 8, std::numeric_limits<double>::infinity());
    auto a = analog_forward(ds.samples[0].h_d, hu_f, noiseless, model, 1);
    auto b = analog_forward(ds.samples[0].h_d, hu_f, noiseless, model, 2);
    REQUIRE(arma::abs(a.h_d_hat - b.h_d_hat).max() == 0.0);

    auto noisy = tiny_config(32, 4, 8, 5.0);
    auto c = analog_forward(ds.samples[0].h_d, hu_f, noisy, model, 1);
    auto d = analog_forward(ds.samples[0].h_d, hu_f, noisy, model, 2);
    REQUIRE(arma::abs(c.h_d_hat - d.h_d_hat).max() > 0.0);
}

TEST_CASE("analog_training_step: power constraint holds on every frame")
{
    auto spec = spec_for_overhead(16, 2, 0.5, 8);
    auto model = build_analog_model_t<float>(spec, 3);

    GeometryConfig g;
    g.max_delay_taps = 4;
    auto ds = make_tiny_dataset(g, 16, 2, 6, 5, "train");
    auto idx = select_subcarriers(16, 8, 3);

    AnalogBatch<float> batch;
    std::vector<const arma::cx_mat *> mats;
    for (const auto &s : ds.samples)
    {
        mats.push_back(&s.h_d);
        arma::cx_mat huf = to_frequency(s.h_u);
        arma::Mat<std::complex<float>> hf(2, 8);
        for (int j = 0; j < 8; ++j)
            for (int a = 0; a < 2; ++a)
                hf(a, j) = std::complex<float>(
                    static_cast<float>(huf(idx[static_cast<std::size_t>(j)], a).real()),
                    static_cast<float>(huf(idx[static_cast<std::size_t>(j)], a).imag()));
        batch.h_f.push_back(hf);
        batch.noise_seeds.push_back(42 + static_cast<std::uint64_t>(s.sample_id));
    }
    batch.x = csi_to_tensor<float>(mats);

    std::vector<std::vector<std::complex<float>>> frames;
    float loss = analog_training_step(model, batch, 0.1f, true, &frames);
    REQUIRE(std::isfinite(loss));
    REQUIRE(frames.size() == 6);
    for (const auto &fr : frames)
    {
        double p = 0;
        for (auto v : fr)
            p += std::norm(v);
        p /= static_cast<double>(fr.size());
        REQUIRE(p == Catch::Approx(1.0).margin(1e-5));
    }
}

// End-to-end gradient check through encoder, power constraint, channel, MRC
// and decoder, in double precision with seeded noise.
TEST_CASE("analog_training_step: analytic gradients match finite differences")
{
    auto spec = spec_for_overhead(8, 2, 0.25, 4);
    spec.decoder_residual_blocks = 1;
    auto model = build_analog_model_t<double>(spec, 21);

    GeometryConfig g;
    g.max_delay_taps = 3;
    auto ds = make_tiny_dataset(g, 8, 2, 3, 8, "train");
    auto idx = select_subcarriers(8, 2, 3);

    AnalogBatch<double> batch;
    std::vector<const arma::cx_mat *> mats;
    for (const auto &s : ds.samples)
    {
        mats.push_back(&s.h_d);
        arma::cx_mat huf = to_frequency(s.h_u);
        arma::cx_mat hf(2, 2);
        for (int j = 0; j < 2; ++j)
            hf.col(j) = huf.row(idx[static_cast<std::size_t>(j)]).st();
        batch.h_f.push_back(hf);
        batch.noise_seeds.push_back(1000 + static_cast<std::uint64_t>(s.sample_id));
    }
    batch.x = csi_to_tensor<double>(mats);

    const double sigma2 = 0.2;
    auto params = model.params();
    for (auto &p : params)
        std::fill(p.grad->begin(), p.grad->end(), 0.0);
    analog_training_step(model, batch, sigma2, true);

    auto rng = make_rng(777);
    std::uniform_int_distribution<std::size_t> pick_param(0, params.size() - 1);
    const double step = 1e-5;
    int checked = 0;
    while (checked < 25)
    {
        auto &p = params[pick_param(rng)];
        std::uniform_int_distribution<std::size_t> pick(0, p.value->size() - 1);
        const std::size_t j = pick(rng);
        const double save = (*p.value)[j];
        (*p.value)[j] = save + step;
        const double lp = analog_training_step(model, batch, sigma2, false);
        (*p.value)[j] = save - step;
        const double lm = analog_training_step(model, batch, sigma2, false);
        (*p.value)[j] = save;
        const double fd = (lp - lm) / (2 * step);
        const double an = (*p.grad)[j];
        if (std::abs(fd) < 1e-9)
            continue;
        INFO(p.name << "[" << j << "] fd=" << fd << " an=" << an);
        REQUIRE(std::abs(fd - an) / std::max(std::abs(fd), std::abs(an)) < 1e-3);
        ++checked;
    }
}

TEST_CASE("train_analog: zero epochs returns the initialization, deterministically")
{
    GeometryConfig g;
    g.max_delay_taps = 4;
    auto train = make_tiny_dataset(g, 16, 2, 8, 4, "train");
    auto val = make_tiny_dataset(g, 16, 2, 4, 4, "test");
    auto cfg = tiny_config(16, 2, 4, 10.0);
    auto spec = spec_for_overhead(16, 2, 0.25, 4);

    AnalogHyper hyper;
    hyper.epochs = 0;
    hyper.seed = 31;
    AnalogTrainingMeta meta;
    auto m1 = train_analog(train, val, cfg, spec, hyper, &meta);
    auto m2 = train_analog(train, val, cfg, spec, hyper);
    auto fresh = build_analog_model_t<float>(spec, 31);

    auto p1 = m1.params(), p2 = m2.params(), pf = fresh.params();
    for (std::size_t i = 0; i < p1.size(); ++i)
    {
        REQUIRE(*p1[i].value == *p2[i].value);
        REQUIRE(*p1[i].value == *pf[i].value);
    }
    REQUIRE(meta.trained_snr_fb_db == 10.0);
    REQUIRE(meta.train_loss.empty());
}

TEST_CASE("train_analog: a few epochs reduce the loss on a tiny problem")
{
    GeometryConfig g;
    g.max_delay_taps = 4;
    auto train = make_tiny_dataset(g, 16, 2, 64, 14, "train");
    auto val = make_tiny_dataset(g, 16, 2, 16, 14, "test");
    auto cfg = tiny_config(16, 2, 4, 10.0);
    auto spec = spec_for_overhead(16, 2, 0.25, 8);

    AnalogHyper hyper;
    hyper.epochs = 8;
    hyper.batch = 16;
    hyper.lr = 2e-3;
    hyper.seed = 7;
    AnalogTrainingMeta meta;
    auto model = train_analog(train, val, cfg, spec, hyper, &meta);
    REQUIRE(meta.train_loss.size() == 8);
    REQUIRE(meta.val_nmse_db.size() == 8);
    REQUIRE(meta.train_loss.back() < meta.train_loss.front());
}

TEST_CASE("analog checkpoint: save/load round trip preserves behavior")
{
    GeometryConfig g;
    g.max_delay_taps = 4;
    auto ds = make_tiny_dataset(g, 16, 2, 2, 6, "train");
    auto cfg = tiny_config(16, 2, 4, 12.0);
    auto spec = spec_for_overhead(16, 2, 0.25, 4);
    auto model = build_analog_model_t<float>(spec, 9);

    AnalogTrainingMeta meta;
    meta.trained_snr_fb_db = 12.0;
    meta.train_loss = {0.5, 0.25};
    meta.val_nmse_db = {-1.0, -2.0};

    const std::string dir = (fs::temp_directory_path() / "csifb_ckpt_analog").string();
    fs::remove_all(dir);
    save_analog_checkpoint(dir, model, meta);

    AnalogTrainingMeta loaded_meta;
    auto loaded = load_analog_checkpoint(dir, &loaded_meta);
    REQUIRE(loaded_meta.trained_snr_fb_db == 12.0);
    REQUIRE(loaded_meta.train_loss == meta.train_loss);

    auto a = analog_forward(ds.samples[0].h_d, to_frequency(ds.samples[0].h_u), cfg, model, 3);
    auto b = analog_forward(ds.samples[0].h_d, to_frequency(ds.samples[0].h_u), cfg, loaded, 3);
    REQUIRE(arma::abs(a.h_d_hat - b.h_d_hat).max() == 0.0);
}
