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
// Digital baseline: a rate-distortion-trained autoencoder with a uniformly
// quantized latent, a learned factorized entropy model (per-channel
// discretized logistic), range coding to a variable-length bit stream, a
// capacity-threshold feedback rule, and the average-CSI fallback on failure.

#ifndef CSIFB_DIGITALCODEC_HPP
#define CSIFB_DIGITALCODEC_HPP

#include "csifb/analogcodec.hpp" // ConvStageSpec, tensor helpers, dataset types
#include "csifb/linkphys.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace csifb
{

struct DigitalModelSpec
{
    int n_c = 0;
    int n_t = 0;
    std::vector<ConvStageSpec> encoder_layers; // same backbone family as the analog codec
    int latent_channels = 8;
    int feat_h = 0, feat_w = 0;
    double quantizer_step = 1.0;
    double lambda = 1e-4; // rate-distortion weight: loss = MSE + lambda * bits
    int decoder_residual_blocks = 2;
    bool batch_norm = true;

    int latent_size() const { return latent_channels * feat_h * feat_w; }
    void validate() const;
};

/// Backbone rule shared with the analog codec; the latent head replaces the
/// feature projection, so the architecture does not depend on rho.
DigitalModelSpec digital_spec_for(int n_c, int n_t, double lambda, int base_channels = 16,
                                  int latent_channels = 48, double quantizer_step = 1.0,
                                  int residual_blocks = 2, bool batch_norm = true);

template <typename T>
struct DigitalModel
{
    DigitalModelSpec spec;
    nn::Sequential<T> encoder; // (B,2,n_c,n_t) -> (B,latent_channels,feat_h,feat_w)
    nn::Sequential<T> decoder; // latent -> (B,2,n_c,n_t)
    // Factorized entropy model: one discretized logistic per latent channel,
    // in quantizer-step units.
    std::vector<T> ent_mu, ent_log_scale;
    std::vector<T> ent_mu_grad, ent_log_scale_grad;

    std::vector<nn::ParamRef<T>> params()
    {
        std::vector<nn::ParamRef<T>> out;
        encoder.collect_params(out, "encoder");
        decoder.collect_params(out, "decoder");
        out.push_back({"entropy.mu", &ent_mu, &ent_mu_grad});
        out.push_back({"entropy.log_scale", &ent_log_scale, &ent_log_scale_grad});
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

template <typename T>
DigitalModel<T> build_digital_model_t(const DigitalModelSpec &spec, std::uint64_t init_seed)
{
    spec.validate();
    auto rng = make_rng(mix_seed(init_seed, 0xD1617A1C0DEULL));
    DigitalModel<T> m;
    m.spec = spec;

    int c_prev = 2;
    int h = spec.n_c, w = spec.n_t;
    for (const auto &st : spec.encoder_layers)
    {
        require(h % st.down_h == 0 && w % st.down_w == 0,
                "digital spec: downsample factor must divide the spatial dims");
        m.encoder.add(std::make_unique<nn::Conv2d<T>>(c_prev, st.channels, st.kernel, st.kernel,
                                                      st.down_h, st.down_w, rng));
        if (spec.batch_norm)
            m.encoder.add(std::make_unique<nn::BatchNorm2d<T>>(st.channels));
        m.encoder.add(std::make_unique<nn::PReLU<T>>(st.channels));
        c_prev = st.channels;
        h /= st.down_h;
        w /= st.down_w;
    }
    require(h == spec.feat_h && w == spec.feat_w, "digital spec: bottleneck dims inconsistent");
    m.encoder.add(std::make_unique<nn::Conv2d<T>>(c_prev, spec.latent_channels, 1, 1, 1, 1, rng,
                                                  T(0)));

    const int base = spec.encoder_layers.back().channels;
    m.decoder.add(std::make_unique<nn::Conv2d<T>>(spec.latent_channels, base, 1, 1, 1, 1, rng));
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

    m.ent_mu.assign(static_cast<std::size_t>(spec.latent_channels), T(0));
    m.ent_log_scale.assign(static_cast<std::size_t>(spec.latent_channels), T(0));
    m.ent_mu_grad.assign(static_cast<std::size_t>(spec.latent_channels), T(0));
    m.ent_log_scale_grad.assign(static_cast<std::size_t>(spec.latent_channels), T(0));
    return m;
}

// --- Entropy model -------------------------------------------------------------

/// Code length in bits of a (possibly noisy) quantized-latent value under the
/// per-channel discretized logistic, with optional gradients. Values are in
/// quantizer-step units.
template <typename T>
T logistic_bits(T t, T mu, T log_scale, T *d_t = nullptr, T *d_mu = nullptr,
                T *d_log_scale = nullptr)
{
    const T sigma = std::max(T(1e-4), std::exp(log_scale));
    const auto sgm = [](T v) { return T(1) / (T(1) + std::exp(-v)); };
    const T a = (t - mu + T(0.5)) / sigma;
    const T b = (t - mu - T(0.5)) / sigma;
    const T sa = sgm(a), sb = sgm(b);
    const T p_raw = sa - sb;
    const T pmin = T(1e-9);
    const T p = std::max(p_raw, pmin);
    const T ln2 = T(0.69314718055994530942);
    if (d_t || d_mu || d_log_scale)
    {
        const T da = sa * (T(1) - sa);
        const T db = sb * (T(1) - sb);
        const T coef = (p_raw > pmin) ? -T(1) / (p * ln2) : T(0);
        if (d_t)
            *d_t = coef * (da - db) / sigma;
        if (d_mu)
            *d_mu = coef * -(da - db) / sigma;
        if (d_log_scale)
            *d_log_scale = coef * -(da * a - db * b);
    }
    return -std::log(p) / ln2;
}

// --- Bitstream -------------------------------------------------------------------

struct Bitstream
{
    std::vector<std::uint8_t> payload; // range-coded bytes, MSB-first packing
    long n_bits = 0;                   // actual coded length (8 * payload bytes)
    double est_bits = 0.0;             // entropy-model ideal code length
};

/// Length-prefixed wire format: u32 LE byte count, payload, u32 LE FNV-1a.
std::vector<std::uint8_t> serialize_bitstream(const Bitstream &bs);
Bitstream deserialize_bitstream(const std::vector<std::uint8_t> &wire);

// --- Training ----------------------------------------------------------------------

using DigitalHyper = AnalogHyper;

struct DigitalTrainingMeta
{
    double lambda = 0.0;
    DigitalHyper hyper;
    std::vector<double> train_loss;    // per epoch: MSE + lambda * bits
    std::vector<double> train_mse;     // per epoch
    std::vector<double> train_bits;    // per epoch mean bits per sample
    std::vector<double> val_nmse_db;   // per epoch
    std::vector<double> val_est_bits;  // per epoch mean
};

/// Rate-distortion training on an ideal bit pipe: additive uniform noise as
/// the quantization surrogate, loss = MSE + lambda * estimated bits.
DigitalModel<float> train_digital(const Dataset &train_set, const Dataset &val_set,
                                  const DigitalModelSpec &spec, const DigitalHyper &hyper,
                                  DigitalTrainingMeta *meta_out = nullptr);

/// Deterministic encode: quantize the latent, range-code it against the
/// learned model. Optionally returns the coded symbols for round-trip checks.
Bitstream digital_encode(const arma::cx_mat &h_d, DigitalModel<float> &model,
                         std::vector<int> *symbols_out = nullptr);

/// Capacity-threshold delivery: success iff n_bits <= c_fb (eta already
/// folded into c_fb by the caller). No bit errors on success.
bool digital_transmit(const Bitstream &bs, double c_fb_bits);

/// Decode the payload on success; fall back to the dataset mean channel on
/// failure. Throws on a corrupt payload (checksum mismatch).
ReconstructionResult digital_reconstruct(const Bitstream &bs, DigitalModel<float> &model,
                                         bool success, const arma::cx_mat &fallback_mean,
                                         std::vector<int> *symbols_out = nullptr);

// --- Checkpoint I/O ---------------------------------------------------------------

void save_digital_checkpoint(const std::string &dir, DigitalModel<float> &model,
                             const DigitalTrainingMeta &meta);
DigitalModel<float> load_digital_checkpoint(const std::string &dir,
                                            DigitalTrainingMeta *meta_out = nullptr);

} // namespace csifb

#endif
