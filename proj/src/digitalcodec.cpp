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

#include "csifb/digitalcodec.hpp"
#include "csifb/checkpoint_io.hpp"
#include "csifb/rangecoder.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <numeric>

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace csifb
{

namespace
{

constexpr std::uint32_t kFreqTotal = 1u << 16;
constexpr double kTailSigmas = 24.0; // logistic tails beyond this round to the end bins

json spec_to_json(const DigitalModelSpec &s)
{
    json layers = json::array();
    for (const auto &st : s.encoder_layers)
        layers.push_back({{"kernel", st.kernel},
                          {"channels", st.channels},
                          {"down_h", st.down_h},
                          {"down_w", st.down_w}});
    return json{{"n_c", s.n_c},
                {"n_t", s.n_t},
                {"encoder_layers", layers},
                {"latent_channels", s.latent_channels},
                {"feat_h", s.feat_h},
                {"feat_w", s.feat_w},
                {"quantizer_step", s.quantizer_step},
                {"lambda", s.lambda},
                {"decoder_residual_blocks", s.decoder_residual_blocks},
                {"batch_norm", s.batch_norm}};
}

DigitalModelSpec spec_from_json(const json &j)
{
    DigitalModelSpec s;
    s.n_c = j.at("n_c").get<int>();
    s.n_t = j.at("n_t").get<int>();
    for (const auto &l : j.at("encoder_layers"))
        s.encoder_layers.push_back({l.at("kernel").get<int>(), l.at("channels").get<int>(),
                                    l.at("down_h").get<int>(), l.at("down_w").get<int>()});
    s.latent_channels = j.at("latent_channels").get<int>();
    s.feat_h = j.at("feat_h").get<int>();
    s.feat_w = j.at("feat_w").get<int>();
    s.quantizer_step = j.at("quantizer_step").get<double>();
    s.lambda = j.at("lambda").get<double>();
    s.decoder_residual_blocks = j.at("decoder_residual_blocks").get<int>();
    s.batch_norm = j.at("batch_norm").get<bool>();
    return s;
}

struct ChannelPmf
{
    int lo = 0;             // smallest symbol value
    std::vector<std::uint32_t> freq; // 16-bit-total quantized counts
    std::vector<std::uint32_t> cum;  // exclusive prefix sums, size freq.size()+1
};

double logistic_cdf(double v) { return 1.0 / (1.0 + std::exp(-v)); }

/// Quantized coding distribution for one latent channel, derived from the
/// model parameters only, so encoder and decoder always agree.
ChannelPmf channel_pmf(float mu_f, float log_scale_f)
{
    const double mu = mu_f;
    const double sigma = std::max(1e-4, std::exp(static_cast<double>(log_scale_f)));

    ChannelPmf pmf;
    pmf.lo = static_cast<int>(std::floor(mu - kTailSigmas * sigma - 1.0));
    const int hi = static_cast<int>(std::ceil(mu + kTailSigmas * sigma + 1.0));
    const int n = hi - pmf.lo + 1;

    std::vector<double> p(static_cast<std::size_t>(n));
    double acc = 0.0;
    for (int k = 0; k < n; ++k)
    {
        const double q = pmf.lo + k;
        double lo_cdf = (k == 0) ? 0.0 : logistic_cdf((q - mu - 0.5) / sigma);
        double hi_cdf = (k == n - 1) ? 1.0 : logistic_cdf((q - mu + 0.5) / sigma);
        p[static_cast<std::size_t>(k)] = std::max(0.0, hi_cdf - lo_cdf);
        acc += p[static_cast<std::size_t>(k)];
    }

    // Quantize to integer counts totalling kFreqTotal with every bin >= 1.
    pmf.freq.assign(static_cast<std::size_t>(n), 1);
    const std::uint32_t spare = kFreqTotal - static_cast<std::uint32_t>(n);
    std::uint32_t used = 0;
    std::size_t argmax = 0;
    for (int k = 0; k < n; ++k)
    {
        const std::uint32_t extra =
            static_cast<std::uint32_t>(std::floor(p[static_cast<std::size_t>(k)] / acc * spare));
        pmf.freq[static_cast<std::size_t>(k)] += extra;
        used += extra;
        if (p[static_cast<std::size_t>(k)] > p[argmax])
            argmax = static_cast<std::size_t>(k);
    }
    pmf.freq[argmax] += spare - used; // exact total

    pmf.cum.resize(static_cast<std::size_t>(n) + 1);
    pmf.cum[0] = 0;
    for (int k = 0; k < n; ++k)
        pmf.cum[static_cast<std::size_t>(k) + 1] = pmf.cum[static_cast<std::size_t>(k)] +
                                                   pmf.freq[static_cast<std::size_t>(k)];
    return pmf;
}

std::uint32_t fnv1a(const std::vector<std::uint8_t> &bytes)
{
    std::uint32_t h = 2166136261u;
    for (std::uint8_t b : bytes)
    {
        h ^= b;
        h *= 16777619u;
    }
    return h;
}

void put_u32(std::vector<std::uint8_t> &v, std::uint32_t x)
{
    v.push_back(static_cast<std::uint8_t>(x & 0xFF));
    v.push_back(static_cast<std::uint8_t>((x >> 8) & 0xFF));
    v.push_back(static_cast<std::uint8_t>((x >> 16) & 0xFF));
    v.push_back(static_cast<std::uint8_t>((x >> 24) & 0xFF));
}

std::uint32_t get_u32(const std::vector<std::uint8_t> &v, std::size_t off)
{
    return static_cast<std::uint32_t>(v[off]) | (static_cast<std::uint32_t>(v[off + 1]) << 8) |
           (static_cast<std::uint32_t>(v[off + 2]) << 16) |
           (static_cast<std::uint32_t>(v[off + 3]) << 24);
}

} // namespace

void DigitalModelSpec::validate() const
{
    require(n_c >= 1 && n_t >= 1, "digital spec: n_c and n_t must be >= 1");
    require(!encoder_layers.empty(), "digital spec: encoder_layers empty");
    require(latent_channels >= 1, "digital spec: latent_channels must be >= 1");
    require(quantizer_step > 0.0, "digital spec: quantizer_step must be positive");
    require(lambda > 0.0, "digital spec: lambda must be positive");
    require(decoder_residual_blocks >= 0, "digital spec: negative residual block count");
}

DigitalModelSpec digital_spec_for(int n_c, int n_t, double lambda, int base_channels,
                                  int latent_channels, double quantizer_step,
                                  int residual_blocks, bool batch_norm)
{
    DigitalModelSpec s;
    s.n_c = n_c;
    s.n_t = n_t;
    s.latent_channels = latent_channels;
    s.quantizer_step = quantizer_step;
    s.lambda = lambda;
    s.decoder_residual_blocks = residual_blocks;
    s.batch_norm = batch_norm;

    // Same stage rule as the analog backbone: collapse both axes so the
    // latent cells integrate the whole grid.
    int h = n_c, w = n_t;
    for (int stage = 0; stage < 3; ++stage)
    {
        ConvStageSpec st;
        st.kernel = stage == 0 ? 9 : 5;
        st.channels = base_channels;
        st.down_h = (h % 4 == 0) ? 4 : (h % 2 == 0) ? 2 : 1;
        st.down_w = (w % 4 == 0) ? 4 : (w % 2 == 0) ? 2 : 1;
        h /= st.down_h;
        w /= st.down_w;
        s.encoder_layers.push_back(st);
    }
    s.feat_h = h;
    s.feat_w = w;
    s.validate();
    return s;
}

std::vector<std::uint8_t> serialize_bitstream(const Bitstream &bs)
{
    std::vector<std::uint8_t> wire;
    wire.reserve(bs.payload.size() + 8);
    put_u32(wire, static_cast<std::uint32_t>(bs.payload.size()));
    wire.insert(wire.end(), bs.payload.begin(), bs.payload.end());
    put_u32(wire, fnv1a(bs.payload));
    return wire;
}

Bitstream deserialize_bitstream(const std::vector<std::uint8_t> &wire)
{
    if (wire.size() < 8)
        throw std::runtime_error("corrupt bitstream: truncated header");
    const std::uint32_t len = get_u32(wire, 0);
    if (wire.size() != static_cast<std::size_t>(len) + 8)
        throw std::runtime_error("corrupt bitstream: length mismatch");
    Bitstream bs;
    bs.payload.assign(wire.begin() + 4, wire.begin() + 4 + len);
    if (get_u32(wire, 4 + len) != fnv1a(bs.payload))
        throw std::runtime_error("corrupt bitstream: checksum mismatch");
    bs.n_bits = 8 * static_cast<long>(len);
    return bs;
}

DigitalModel<float> train_digital(const Dataset &train_set, const Dataset &val_set,
                                  const DigitalModelSpec &spec, const DigitalHyper &hyper,
                                  DigitalTrainingMeta *meta_out)
{
    spec.validate();
    require(!train_set.samples.empty(), "train_digital: empty training set");
    require(spec.n_c == train_set.manifest.n_c && spec.n_t == train_set.manifest.n_t,
            "train_digital: spec does not match dataset dims");
    require(hyper.batch >= 1 && hyper.epochs >= 0, "train_digital: bad hyperparameters");

    DigitalModel<float> model = build_digital_model_t<float>(spec, hyper.seed);
    nn::Adam<float> opt(model.params(), hyper.lr);

    DigitalTrainingMeta meta;
    meta.lambda = spec.lambda;
    meta.hyper = hyper;

    const float step_size = static_cast<float>(spec.quantizer_step);
    const float lambda = static_cast<float>(spec.lambda);
    const std::size_t n_train = train_set.samples.size();
    std::vector<std::size_t> order(n_train);
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < hyper.epochs; ++epoch)
    {
        auto shuffle_rng = make_rng(mix_seed(hyper.seed, 0xD16E60C4, static_cast<std::uint64_t>(epoch)));
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double loss_acc = 0.0, mse_acc = 0.0, bits_acc = 0.0;
        long batches = 0;
        for (std::size_t start = 0; start < n_train; start += static_cast<std::size_t>(hyper.batch))
        {
            const std::size_t stop = std::min(n_train, start + static_cast<std::size_t>(hyper.batch));
            const int b = static_cast<int>(stop - start);
            std::vector<const arma::cx_mat *> mats;
            mats.reserve(static_cast<std::size_t>(b));
            for (std::size_t k = start; k < stop; ++k)
                mats.push_back(&train_set.samples[order[k]].h_d);
            nn::Tensor<float> x = csi_to_tensor<float>(mats);

            opt.zero_grad();
            nn::Tensor<float> y = model.encoder.forward(x, true);

            // Additive-uniform quantization surrogate, one draw per entry.
            auto noise_rng = make_rng(mix_seed(hyper.seed ^ 0x0F0F0F0FULL,
                                               static_cast<std::uint64_t>(epoch),
                                               static_cast<std::uint64_t>(start)));
            std::uniform_real_distribution<double> u(-0.5, 0.5);
            nn::Tensor<float> y_noisy = y;
            for (auto &v : y_noisy.data)
                v += static_cast<float>(u(noise_rng)) * step_size;

            nn::Tensor<float> out = model.decoder.forward(y_noisy, true);
            nn::Tensor<float> mse_grad;
            const float mse = nn::mse_loss(out, x, &mse_grad);

            // Rate term and its gradients, in quantizer-step units.
            nn::Tensor<float> y_grad = model.decoder.backward(mse_grad);
            const std::size_t plane = static_cast<std::size_t>(y.h) * y.w;
            double bits_total = 0.0;
            const float inv_b = 1.0f / static_cast<float>(b);
            for (int n = 0; n < y.n; ++n)
                for (int c = 0; c < y.c; ++c)
                {
                    float *ynp = &y_noisy.at(n, c, 0, 0);
                    float *ygp = &y_grad.at(n, c, 0, 0);
                    float dmu_acc = 0, dls_acc = 0;
                    for (std::size_t i = 0; i < plane; ++i)
                    {
                        float d_t, d_mu, d_ls;
                        bits_total += logistic_bits<float>(
                            ynp[i] / step_size, model.ent_mu[static_cast<std::size_t>(c)],
                            model.ent_log_scale[static_cast<std::size_t>(c)], &d_t, &d_mu, &d_ls);
                        ygp[i] += lambda * inv_b * d_t / step_size;
                        dmu_acc += d_mu;
                        dls_acc += d_ls;
                    }
                    model.ent_mu_grad[static_cast<std::size_t>(c)] += lambda * inv_b * dmu_acc;
                    model.ent_log_scale_grad[static_cast<std::size_t>(c)] += lambda * inv_b * dls_acc;
                }
            model.encoder.backward(y_grad);

            const double mean_bits = bits_total / b;
            const double loss = mse + lambda * mean_bits;
            if (!std::isfinite(loss))
                throw std::runtime_error("digital training diverged: non-finite loss at epoch " +
                                         std::to_string(epoch));
            opt.step();
            loss_acc += loss;
            mse_acc += mse;
            bits_acc += mean_bits;
            ++batches;
        }
        meta.train_loss.push_back(loss_acc / std::max(1L, batches));
        meta.train_mse.push_back(mse_acc / std::max(1L, batches));
        meta.train_bits.push_back(bits_acc / std::max(1L, batches));

        // Validation: quantized round trip, no noise.
        double nmse_acc = 0.0, est_acc = 0.0;
        for (const auto &s : val_set.samples)
        {
            Bitstream bs = digital_encode(s.h_d, model);
            ReconstructionResult r = digital_reconstruct(bs, model, true, s.h_d);
            nmse_acc += std::pow(arma::norm(s.h_d - r.h_d_hat, "fro"), 2) /
                        std::pow(arma::norm(s.h_d, "fro"), 2);
            est_acc += bs.est_bits;
        }
        const double denom = std::max<std::size_t>(1, val_set.samples.size());
        meta.val_nmse_db.push_back(10.0 * std::log10(std::max(1e-15, nmse_acc / denom)));
        meta.val_est_bits.push_back(est_acc / denom);
    }

    if (meta_out)
        *meta_out = meta;
    return model;
}

Bitstream digital_encode(const arma::cx_mat &h_d, DigitalModel<float> &model,
                         std::vector<int> *symbols_out)
{
    const auto &spec = model.spec;
    require(static_cast<int>(h_d.n_rows) == spec.n_c && static_cast<int>(h_d.n_cols) == spec.n_t,
            "digital_encode: shape mismatch");

    nn::Tensor<float> x = csi_to_tensor<float>({&h_d});
    nn::Tensor<float> y = model.encoder.forward(x, false);

    const float step_size = static_cast<float>(spec.quantizer_step);
    const std::size_t plane = static_cast<std::size_t>(y.h) * y.w;

    RangeEncoder enc;
    Bitstream bs;
    std::vector<int> symbols;
    for (int c = 0; c < y.c; ++c)
    {
        const ChannelPmf pmf = channel_pmf(model.ent_mu[static_cast<std::size_t>(c)],
                                           model.ent_log_scale[static_cast<std::size_t>(c)]);
        const int n_sym = static_cast<int>(pmf.freq.size());
        const float *yp = &y.at(0, c, 0, 0);
        for (std::size_t i = 0; i < plane; ++i)
        {
            int q = static_cast<int>(std::lround(yp[i] / step_size));
            q = std::clamp(q, pmf.lo, pmf.lo + n_sym - 1);
            const std::size_t k = static_cast<std::size_t>(q - pmf.lo);
            enc.encode(pmf.cum[k], pmf.freq[k], kFreqTotal);
            symbols.push_back(q);
            // Ideal code length under the continuous model of the discrete symbol.
            bs.est_bits += logistic_bits<double>(
                static_cast<double>(q), static_cast<double>(model.ent_mu[static_cast<std::size_t>(c)]),
                static_cast<double>(model.ent_log_scale[static_cast<std::size_t>(c)]));
        }
    }
    bs.payload = enc.finish();
    bs.n_bits = 8 * static_cast<long>(bs.payload.size());
    if (symbols_out)
        *symbols_out = std::move(symbols);
    return bs;
}

bool digital_transmit(const Bitstream &bs, double c_fb_bits)
{
    require(c_fb_bits >= 0.0, "digital_transmit: negative capacity");
    return static_cast<double>(bs.n_bits) <= c_fb_bits;
}

ReconstructionResult digital_reconstruct(const Bitstream &bs, DigitalModel<float> &model,
                                         bool success, const arma::cx_mat &fallback_mean,
                                         std::vector<int> *symbols_out)
{
    ReconstructionResult r;
    r.scheme = Scheme::digital;
    if (!success)
    {
        r.failed = true;
        r.h_d_hat = fallback_mean;
        return r;
    }
    r.failed = false;

    const auto &spec = model.spec;
    // Validate the payload framing before decoding (surfaces format bugs).
    deserialize_bitstream(serialize_bitstream(bs));

    RangeDecoder dec(bs.payload.data(), bs.payload.size());
    const std::size_t plane = static_cast<std::size_t>(spec.feat_h) * spec.feat_w;
    nn::Tensor<float> y(1, spec.latent_channels, spec.feat_h, spec.feat_w);
    std::vector<int> symbols;
    for (int c = 0; c < spec.latent_channels; ++c)
    {
        const ChannelPmf pmf = channel_pmf(model.ent_mu[static_cast<std::size_t>(c)],
                                           model.ent_log_scale[static_cast<std::size_t>(c)]);
        float *yp = &y.at(0, c, 0, 0);
        for (std::size_t i = 0; i < plane; ++i)
        {
            const std::uint32_t f = dec.decode_freq(kFreqTotal);
            // Locate the covering symbol in the cumulative table.
            const auto it = std::upper_bound(pmf.cum.begin(), pmf.cum.end(), f);
            const std::size_t k = static_cast<std::size_t>(it - pmf.cum.begin()) - 1;
            dec.update(pmf.cum[k], pmf.freq[k]);
            const int q = pmf.lo + static_cast<int>(k);
            symbols.push_back(q);
            yp[i] = static_cast<float>(q) * static_cast<float>(spec.quantizer_step);
        }
    }
    nn::Tensor<float> out = model.decoder.forward(y, false);
    r.h_d_hat = tensor_to_csi(out, 0);
    if (symbols_out)
        *symbols_out = std::move(symbols);
    return r;
}

void save_digital_checkpoint(const std::string &dir, DigitalModel<float> &model,
                             const DigitalTrainingMeta &meta)
{
    fs::create_directories(dir);
    std::vector<NamedWeights> weights;
    for (auto &p : model.params())
        weights.push_back({p.name, p.value});
    for (auto &b : model.buffers())
        weights.push_back({b.name, b.value});

    json doc{{"format_version", 1},
             {"scheme", "digital"},
             {"spec", spec_to_json(model.spec)},
             {"lambda", meta.lambda},
             {"training",
              {{"lr", meta.hyper.lr},
               {"batch", meta.hyper.batch},
               {"epochs", meta.hyper.epochs},
               {"seed", meta.hyper.seed},
               {"train_loss", meta.train_loss},
               {"train_mse", meta.train_mse},
               {"train_bits", meta.train_bits},
               {"val_nmse_db", meta.val_nmse_db},
               {"val_est_bits", meta.val_est_bits}}}};
    doc["weights_index"] = write_weight_file(dir, weights);

    std::ofstream f(dir + "/model.json");
    if (!f)
        throw std::runtime_error("cannot open for writing: " + dir + "/model.json");
    f << doc.dump(2) << "\n";
}

DigitalModel<float> load_digital_checkpoint(const std::string &dir, DigitalTrainingMeta *meta_out)
{
    std::ifstream f(dir + "/model.json");
    if (!f)
        throw std::runtime_error("cannot open: " + dir + "/model.json");
    json doc = json::parse(f);
    require(doc.at("scheme").get<std::string>() == "digital",
            "checkpoint scheme mismatch: expected digital");

    DigitalModelSpec spec = spec_from_json(doc.at("spec"));
    DigitalModel<float> model = build_digital_model_t<float>(spec, 0);

    std::vector<NamedWeights> weights;
    for (auto &p : model.params())
        weights.push_back({p.name, p.value});
    for (auto &b : model.buffers())
        weights.push_back({b.name, b.value});
    read_weight_file(dir, doc.at("weights_index"), weights);

    if (meta_out)
    {
        meta_out->lambda = doc.at("lambda").get<double>();
        const auto &t = doc.at("training");
        meta_out->hyper.lr = t.at("lr").get<double>();
        meta_out->hyper.batch = t.at("batch").get<int>();
        meta_out->hyper.epochs = t.at("epochs").get<int>();
        meta_out->hyper.seed = t.at("seed").get<std::uint64_t>();
        meta_out->train_loss = t.at("train_loss").get<std::vector<double>>();
        meta_out->train_mse = t.at("train_mse").get<std::vector<double>>();
        meta_out->train_bits = t.at("train_bits").get<std::vector<double>>();
        meta_out->val_nmse_db = t.at("val_nmse_db").get<std::vector<double>>();
        meta_out->val_est_bits = t.at("val_est_bits").get<std::vector<double>>();
    }
    return model;
}

} // namespace csifb
