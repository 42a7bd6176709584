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
//
// Analog joint source-channel CSI autoencoder: a convolutional feature
// encoder at the UE, real-pair grouping to complex channel symbols under a
// per-frame power constraint, the SIMO feedback channel and MRC as
// untrainable layers in the loop, and a residual-block decoder at the BS.

#ifndef CSIFB_ANALOGCODEC_HPP
#define CSIFB_ANALOGCODEC_HPP

#include "csifb/chanmodel.hpp"
#include "csifb/linkphys.hpp"
#include "csifb/nn.hpp"

#include <optional>
#include <string>
#include <vector>

namespace csifb
{

struct ConvStageSpec
{
    int kernel = 5;   // square kernel
    int channels = 16;
    int down_h = 1;   // delay-axis downsampling factor
    int down_w = 1;   // antenna-axis downsampling factor
};

struct AnalogModelSpec
{
    int n_c = 0;
    int n_t = 0;
    double rho = 0.0;
    int n_f = 0;
    std::vector<ConvStageSpec> encoder_layers; // three stages, mirrored by the decoder
    int projection_channels = 0;               // 1x1 projection head channels
    int feat_h = 0, feat_w = 0;                // bottleneck spatial dims
    int feature_count = 0;                     // exactly 2*n_f real features
    int decoder_residual_blocks = 2;
    bool batch_norm = true;

    void validate() const;
};

/// Deterministic architecture rule for a given overhead: downsampling factors
/// from a fixed table, a 1x1 projection head, and the bottleneck flatten
/// cropped to exactly 2*n_f features. Throws a configuration error naming the
/// minimum feasible rho when rho*n_c < 1.
AnalogModelSpec spec_for_overhead(int n_c, int n_t, double rho, int base_channels = 256,
                                  int residual_blocks = 2, bool batch_norm = true);

template <typename T>
struct AnalogModel
{
    AnalogModelSpec spec;
    nn::Sequential<T> encoder; // (B,2,n_c,n_t) -> (B,c_p,feat_h,feat_w)
    nn::Sequential<T> decoder; // (B,c_p,feat_h,feat_w) -> (B,2,n_c,n_t)

    std::vector<nn::ParamRef<T>> params()
    {
        std::vector<nn::ParamRef<T>> out;
        encoder.collect_params(out, "encoder");
        decoder.collect_params(out, "decoder");
        return out;
    }
    std::vector<nn::ParamRef<T>> buffers()
    {
        std::vector<nn::ParamRef<T>> out;
        encoder.collect_buffers(out, "encoder");
        decoder.collect_buffers(out, "decoder");
        return out;
    }
};

/// Deterministic weight initialization given init_seed.
template <typename T>
AnalogModel<T> build_analog_model_t(const AnalogModelSpec &spec, std::uint64_t init_seed)
{
    spec.validate();
    auto rng = make_rng(mix_seed(init_seed, 0xA11A10C0DEULL));
    AnalogModel<T> m;
    m.spec = spec;

    int c_prev = 2;
    int h = spec.n_c, w = spec.n_t;
    for (const auto &st : spec.encoder_layers)
    {
        require(h % st.down_h == 0 && w % st.down_w == 0,
                "analog spec: downsample factor must divide the spatial dims");
        m.encoder.add(std::make_unique<nn::Conv2d<T>>(c_prev, st.channels, st.kernel, st.kernel,
                                                      st.down_h, st.down_w, rng));
        if (spec.batch_norm)
            m.encoder.add(std::make_unique<nn::BatchNorm2d<T>>(st.channels));
        m.encoder.add(std::make_unique<nn::PReLU<T>>(st.channels));
        c_prev = st.channels;
        h /= st.down_h;
        w /= st.down_w;
    }
    require(h == spec.feat_h && w == spec.feat_w, "analog spec: bottleneck dims inconsistent");
    m.encoder.add(std::make_unique<nn::Conv2d<T>>(c_prev, spec.projection_channels, 1, 1, 1, 1, rng));

    // Decoder mirror.
    const int base = spec.encoder_layers.back().channels;
    m.decoder.add(std::make_unique<nn::Conv2d<T>>(spec.projection_channels, base, 1, 1, 1, 1, rng));
    if (spec.batch_norm)
        m.decoder.add(std::make_unique<nn::BatchNorm2d<T>>(base));
    m.decoder.add(std::make_unique<nn::PReLU<T>>(base));
    for (int r = 0; r < spec.decoder_residual_blocks; ++r)
        m.decoder.add(std::make_unique<nn::ResidualBlock<T>>(base, 5, spec.batch_norm, rng));

    for (std::size_t i = spec.encoder_layers.size(); i-- > 0;)
    {
        const auto &st = spec.encoder_layers[i];
        if (st.down_h > 1 || st.down_w > 1)
            m.decoder.add(std::make_unique<nn::Upsample2d<T>>(st.down_h, st.down_w));
        const bool last = (i == 0);
        const int c_out = last ? 2 : spec.encoder_layers[i - 1].channels;
        m.decoder.add(std::make_unique<nn::Conv2d<T>>(
            last ? spec.encoder_layers[0].channels : st.channels, c_out, st.kernel, st.kernel,
            1, 1, rng));
        if (!last)
        {
            if (spec.batch_norm)
                m.decoder.add(std::make_unique<nn::BatchNorm2d<T>>(c_out));
            m.decoder.add(std::make_unique<nn::PReLU<T>>(c_out));
        }
    }
    return m;
}

// --- CSI <-> tensor conversions ---------------------------------------------

template <typename T>
nn::Tensor<T> csi_to_tensor(const std::vector<const arma::cx_mat *> &mats)
{
    const int b = static_cast<int>(mats.size());
    const int n_c = static_cast<int>(mats[0]->n_rows);
    const int n_t = static_cast<int>(mats[0]->n_cols);
    nn::Tensor<T> x(b, 2, n_c, n_t);
    for (int i = 0; i < b; ++i)
        for (int r = 0; r < n_c; ++r)
            for (int a = 0; a < n_t; ++a)
            {
                const cx v = (*mats[i])(r, a);
                x.at(i, 0, r, a) = static_cast<T>(v.real());
                x.at(i, 1, r, a) = static_cast<T>(v.imag());
            }
    return x;
}

template <typename T>
arma::cx_mat tensor_to_csi(const nn::Tensor<T> &t, int b)
{
    arma::cx_mat h(t.h, t.w);
    for (int r = 0; r < t.h; ++r)
        for (int a = 0; a < t.w; ++a)
            h(r, a) = cx(static_cast<double>(t.at(b, 0, r, a)),
                         static_cast<double>(t.at(b, 1, r, a)));
    return h;
}

// --- Feature head: bottleneck flatten, crop to 2*n_f, and its inverse ---------

template <typename T>
std::vector<std::vector<T>> crop_features(const nn::Tensor<T> &enc_out, int feature_count)
{
    std::vector<std::vector<T>> f(static_cast<std::size_t>(enc_out.n));
    const std::size_t per = enc_out.numel() / static_cast<std::size_t>(enc_out.n);
    for (int b = 0; b < enc_out.n; ++b)
    {
        const T *src = enc_out.data.data() + static_cast<std::size_t>(b) * per;
        f[static_cast<std::size_t>(b)].assign(src, src + feature_count);
    }
    return f;
}

template <typename T>
nn::Tensor<T> pad_features(const std::vector<std::vector<T>> &f, const AnalogModelSpec &spec)
{
    const int b = static_cast<int>(f.size());
    nn::Tensor<T> t(b, spec.projection_channels, spec.feat_h, spec.feat_w);
    const std::size_t per = t.numel() / static_cast<std::size_t>(b);
    for (int i = 0; i < b; ++i)
    {
        T *dst = t.data.data() + static_cast<std::size_t>(i) * per;
        std::copy(f[static_cast<std::size_t>(i)].begin(), f[static_cast<std::size_t>(i)].end(), dst);
    }
    return t;
}

// --- Real-pair grouping and the per-frame power constraint -------------------

/// x_raw[j] = f[2j] + i f[2j+1], then exact unit mean symbol power.
/// Saves what backward needs.
template <typename T>
struct PowerNormCache
{
    std::vector<T> unit; // u / ||u||
    T inv_norm;          // 1 / ||u||
};

template <typename T>
std::vector<std::complex<T>> features_to_symbols_t(const std::vector<T> &f, PowerNormCache<T> *cache)
{
    const std::size_t n_f = f.size() / 2;
    double nrm2 = 0.0;
    for (T v : f)
        nrm2 += static_cast<double>(v) * v;
    const T nrm = static_cast<T>(std::sqrt(nrm2));
    if (!(nrm > T(0)))
        throw std::domain_error("degenerate input: all-zero feature vector");
    const T scale = static_cast<T>(std::sqrt(static_cast<double>(n_f))) / nrm;
    if (cache)
    {
        cache->inv_norm = T(1) / nrm;
        cache->unit.resize(f.size());
        for (std::size_t i = 0; i < f.size(); ++i)
            cache->unit[i] = f[i] / nrm;
    }
    std::vector<std::complex<T>> x(n_f);
    for (std::size_t j = 0; j < n_f; ++j)
        x[j] = std::complex<T>(f[2 * j] * scale, f[2 * j + 1] * scale);
    return x;
}

/// Backward of features_to_symbols_t: J^T g = sqrt(n_f)/||u|| (g - u_hat (u_hat . g)).
template <typename T>
std::vector<T> features_to_symbols_backward(const std::vector<std::complex<T>> &gsym,
                                            const PowerNormCache<T> &cache)
{
    const std::size_t n_f = gsym.size();
    std::vector<T> g(2 * n_f);
    for (std::size_t j = 0; j < n_f; ++j)
    {
        g[2 * j] = gsym[j].real();
        g[2 * j + 1] = gsym[j].imag();
    }
    double dot = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
        dot += static_cast<double>(g[i]) * cache.unit[i];
    const T scale = static_cast<T>(std::sqrt(static_cast<double>(n_f))) * cache.inv_norm;
    std::vector<T> out(g.size());
    for (std::size_t i = 0; i < g.size(); ++i)
        out[i] = scale * (g[i] - cache.unit[i] * static_cast<T>(dot));
    return out;
}

/// De-grouping: interleave real/imag back into a feature vector.
template <typename T>
std::vector<T> symbols_to_features_t(const std::vector<std::complex<T>> &x)
{
    std::vector<T> f(2 * x.size());
    for (std::size_t j = 0; j < x.size(); ++j)
    {
        f[2 * j] = x[j].real();
        f[2 * j + 1] = x[j].imag();
    }
    return f;
}

// --- End-to-end training step -------------------------------------------------

template <typename T>
struct AnalogBatch
{
    nn::Tensor<T> x;                                   // inputs = reconstruction targets
    std::vector<arma::Mat<std::complex<T>>> h_f;       // per-sample N_t x N_f feedback channel
    std::vector<std::uint64_t> noise_seeds;            // per-sample channel noise
};

/// One forward (and optionally backward) pass of the full autoencoder with the
/// feedback channel and MRC in the loop. Returns the MSE loss; accumulates
/// parameter gradients when compute_grads is set. Transmitted frames can be
/// captured to verify the power constraint.
template <typename T>
T analog_training_step(AnalogModel<T> &model, const AnalogBatch<T> &batch, T sigma2,
                       bool compute_grads,
                       std::vector<std::vector<std::complex<T>>> *sent_frames = nullptr)
{
    const int b = batch.x.n;
    const int n_f = model.spec.n_f;

    // Always a train-mode pass (batch statistics in BN); compute_grads only
    // controls whether the backward sweep runs.
    nn::Tensor<T> enc_out = model.encoder.forward(batch.x, true);
    auto feats = crop_features(enc_out, model.spec.feature_count);

    std::vector<PowerNormCache<T>> caches(static_cast<std::size_t>(b));
    std::vector<std::vector<T>> equalized(static_cast<std::size_t>(b));
    for (int i = 0; i < b; ++i)
    {
        auto x = features_to_symbols_t(feats[static_cast<std::size_t>(i)],
                                       &caches[static_cast<std::size_t>(i)]);
        if (sent_frames)
            sent_frames->push_back(x);
        arma::Col<std::complex<T>> xv(x);
        arma::Col<std::complex<T>> xhat = channel_mrc_equalized<T>(
            xv, batch.h_f[static_cast<std::size_t>(i)], sigma2,
            batch.noise_seeds[static_cast<std::size_t>(i)]);
        equalized[static_cast<std::size_t>(i)] =
            symbols_to_features_t(std::vector<std::complex<T>>(xhat.begin(), xhat.end()));
    }

    nn::Tensor<T> dec_in = pad_features(equalized, model.spec);
    nn::Tensor<T> out = model.decoder.forward(dec_in, true);

    nn::Tensor<T> grad;
    const T loss = nn::mse_loss(out, batch.x, compute_grads ? &grad : nullptr);
    if (!compute_grads)
        return loss;

    nn::Tensor<T> g_dec_in = model.decoder.backward(grad);
    auto g_feats = crop_features(g_dec_in, model.spec.feature_count);

    // Channel + MRC are affine in the transmitted symbols with identity
    // Jacobian (xhat = x + equalized noise), so the gradient passes through
    // to the power normalization.
    std::vector<std::vector<T>> g_enc_feats(static_cast<std::size_t>(b));
    for (int i = 0; i < b; ++i)
    {
        const auto &gf = g_feats[static_cast<std::size_t>(i)];
        std::vector<std::complex<T>> gsym(static_cast<std::size_t>(n_f));
        for (int j = 0; j < n_f; ++j)
            gsym[static_cast<std::size_t>(j)] =
                std::complex<T>(gf[2 * static_cast<std::size_t>(j)],
                                gf[2 * static_cast<std::size_t>(j) + 1]);
        g_enc_feats[static_cast<std::size_t>(i)] =
            features_to_symbols_backward(gsym, caches[static_cast<std::size_t>(i)]);
    }

    nn::Tensor<T> g_enc_out = pad_features(g_enc_feats, model.spec);
    model.encoder.backward(g_enc_out);
    return loss;
}

// --- Spec-level operations (double precision public surface) ------------------

/// Group 2*N_f real features into N_f power-normalized complex symbols.
arma::cx_vec features_to_symbols(const arma::vec &f);

/// Inverse grouping (no normalization).
arma::vec symbols_to_features(const arma::cx_vec &x);

// --- Training -----------------------------------------------------------------

struct AnalogHyper
{
    double lr = 1e-3;
    int batch = 100;
    int epochs = 40;
    std::uint64_t seed = 1;
};

struct AnalogTrainingMeta
{
    double trained_snr_fb_db = 0.0;
    AnalogHyper hyper;
    std::vector<double> train_loss;  // per epoch
    std::vector<double> val_nmse_db; // per epoch
};

/// Channel-in-the-loop training: fresh noise and a fresh paired uplink
/// realization per sample per epoch, MSE loss on the angular-delay CSI.
/// Throws on divergence (non-finite loss).
AnalogModel<float> train_analog(const Dataset &train_set, const Dataset &val_set,
                                const SystemConfig &config, const AnalogModelSpec &spec,
                                const AnalogHyper &hyper, AnalogTrainingMeta *meta_out = nullptr);

/// Full inference pipeline on one sample: encode, feed back over the noisy
/// SIMO channel, MRC, decode. Analog never hard-fails.
ReconstructionResult analog_forward(const arma::cx_mat &h_d, const arma::cx_mat &h_u_freq,
                                    const SystemConfig &config, AnalogModel<float> &model,
                                    std::uint64_t noise_seed);

/// Mean validation NMSE (dB of the mean normalized squared error) of the
/// model over a dataset at the given config, with seeded per-sample noise.
double analog_validation_nmse_db(AnalogModel<float> &model, const Dataset &ds,
                                 const SystemConfig &config, std::uint64_t eval_seed);

// --- Checkpoint I/O -------------------------------------------------------------

void save_analog_checkpoint(const std::string &dir, AnalogModel<float> &model,
                            const AnalogTrainingMeta &meta);
AnalogModel<float> load_analog_checkpoint(const std::string &dir,
                                          AnalogTrainingMeta *meta_out = nullptr);

} // namespace csifb

#endif
