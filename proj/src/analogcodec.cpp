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

#include "csifb/analogcodec.hpp"
#include "csifb/checkpoint_io.hpp"

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

json spec_to_json(const AnalogModelSpec &s)
{
    json layers = json::array();
    for (const auto &st : s.encoder_layers)
        layers.push_back({{"kernel", st.kernel},
                          {"channels", st.channels},
                          {"down_h", st.down_h},
                          {"down_w", st.down_w}});
    return json{{"n_c", s.n_c},
                {"n_t", s.n_t},
                {"rho", s.rho},
                {"n_f", s.n_f},
                {"encoder_layers", layers},
                {"projection_channels", s.projection_channels},
                {"feat_h", s.feat_h},
                {"feat_w", s.feat_w},
                {"feature_count", s.feature_count},
                {"decoder_residual_blocks", s.decoder_residual_blocks},
                {"batch_norm", s.batch_norm}};
}

AnalogModelSpec spec_from_json(const json &j)
{
    AnalogModelSpec s;
    s.n_c = j.at("n_c").get<int>();
    s.n_t = j.at("n_t").get<int>();
    s.rho = j.at("rho").get<double>();
    s.n_f = j.at("n_f").get<int>();
    for (const auto &l : j.at("encoder_layers"))
        s.encoder_layers.push_back({l.at("kernel").get<int>(), l.at("channels").get<int>(),
                                    l.at("down_h").get<int>(), l.at("down_w").get<int>()});
    s.projection_channels = j.at("projection_channels").get<int>();
    s.feat_h = j.at("feat_h").get<int>();
    s.feat_w = j.at("feat_w").get<int>();
    s.feature_count = j.at("feature_count").get<int>();
    s.decoder_residual_blocks = j.at("decoder_residual_blocks").get<int>();
    s.batch_norm = j.at("batch_norm").get<bool>();
    return s;
}

arma::Mat<std::complex<float>> feedback_columns_f(const arma::cx_mat &h_u_freq,
                                                  const std::vector<int> &indices)
{
    arma::Mat<std::complex<float>> h_f(h_u_freq.n_cols, indices.size());
    for (std::size_t j = 0; j < indices.size(); ++j)
        for (arma::uword a = 0; a < h_u_freq.n_cols; ++a)
        {
            const cx v = h_u_freq(static_cast<arma::uword>(indices[j]), a);
            h_f(a, j) = std::complex<float>(static_cast<float>(v.real()),
                                            static_cast<float>(v.imag()));
        }
    return h_f;
}

/// Single-sample reconstruction through the double-precision physics path.
arma::cx_mat reconstruct_one(AnalogModel<float> &model, const arma::cx_mat &h_d,
                             const arma::cx_mat &h_u_freq, const SystemConfig &config,
                             std::uint64_t noise_seed)
{
    const auto indices = select_subcarriers(config.n_c, config.n_f, config.subcarrier_seed);

    nn::Tensor<float> x_in = csi_to_tensor<float>({&h_d});
    nn::Tensor<float> enc_out = model.encoder.forward(x_in, false);
    auto feats = crop_features(enc_out, model.spec.feature_count);

    arma::vec f(feats[0].size());
    for (std::size_t i = 0; i < feats[0].size(); ++i)
        f(i) = feats[0][i];

    FeedbackFrame frame;
    frame.x = features_to_symbols(f);
    frame.indices = indices;

    ChannelOutput chan = apply_feedback_channel(frame, h_u_freq, config.snr_fb_db, noise_seed);
    arma::cx_vec xhat = mrc_combine(chan);

    std::vector<float> eq(2 * static_cast<std::size_t>(config.n_f));
    for (int j = 0; j < config.n_f; ++j)
    {
        eq[2 * static_cast<std::size_t>(j)] = static_cast<float>(xhat(j).real());
        eq[2 * static_cast<std::size_t>(j) + 1] = static_cast<float>(xhat(j).imag());
    }
    nn::Tensor<float> dec_in = pad_features<float>({eq}, model.spec);
    nn::Tensor<float> out = model.decoder.forward(dec_in, false);
    return tensor_to_csi(out, 0);
}

} // namespace

void AnalogModelSpec::validate() const
{
    require(n_c >= 1 && n_t >= 1, "analog spec: n_c and n_t must be >= 1");
    require(n_f >= 1 && n_f <= n_c, "analog spec: n_f must satisfy 1 <= n_f <= n_c");
    require(feature_count == 2 * n_f, "analog spec: feature_count must equal 2*n_f");
    require(!encoder_layers.empty(), "analog spec: encoder_layers empty");
    for (const auto &st : encoder_layers)
    {
        require(st.kernel >= 1 && st.kernel % 2 == 1, "analog spec: kernels must be odd");
        require(st.channels >= 1, "analog spec: channel count must be >= 1");
        require(st.down_h >= 1 && st.down_w >= 1, "analog spec: downsample factors must be >= 1");
    }
    require(projection_channels >= 1, "analog spec: projection_channels must be >= 1");
    require(projection_channels * feat_h * feat_w >= feature_count,
            "analog spec: bottleneck smaller than feature_count");
    require(decoder_residual_blocks >= 0, "analog spec: negative residual block count");
}

AnalogModelSpec spec_for_overhead(int n_c, int n_t, double rho, int base_channels,
                                  int residual_blocks, bool batch_norm)
{
    require(n_c >= 1 && n_t >= 1, "spec_for_overhead: n_c and n_t must be >= 1");
    const int n_f = static_cast<int>(std::llround(rho * n_c));
    if (n_f < 1)
        throw std::invalid_argument(
            "rho too small for the convolution stack: minimum feasible rho is 1/n_c = " +
            std::to_string(1.0 / n_c));
    require(n_f <= n_c, "spec_for_overhead: rho must be <= 1");

    AnalogModelSpec s;
    s.n_c = n_c;
    s.n_t = n_t;
    s.n_f = n_f;
    s.rho = static_cast<double>(n_f) / n_c;
    s.feature_count = 2 * n_f;
    s.decoder_residual_blocks = residual_blocks;
    s.batch_norm = batch_norm;

    // Three stages per the reference layout: 9x9 head, two 5x5 followers.
    // Both axes collapse as far as three stride-4 stages allow, so every
    // bottleneck cell integrates the whole delay-sparse grid before the 1x1
    // feature projection.
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
    s.projection_channels =
        (s.feature_count + h * w - 1) / (h * w); // ceil, flatten cropped to 2*n_f
    s.validate();
    return s;
}

arma::cx_vec features_to_symbols(const arma::vec &f)
{
    require(f.n_elem % 2 == 0, "features_to_symbols: feature vector length must be even");
    arma::cx_vec x_raw(f.n_elem / 2);
    for (arma::uword j = 0; j < x_raw.n_elem; ++j)
        x_raw(j) = cx(f(2 * j), f(2 * j + 1));
    return normalize_power(x_raw);
}

arma::vec symbols_to_features(const arma::cx_vec &x)
{
    arma::vec f(2 * x.n_elem);
    for (arma::uword j = 0; j < x.n_elem; ++j)
    {
        f(2 * j) = x(j).real();
        f(2 * j + 1) = x(j).imag();
    }
    return f;
}

AnalogModel<float> train_analog(const Dataset &train_set, const Dataset &val_set,
                                const SystemConfig &config, const AnalogModelSpec &spec,
                                const AnalogHyper &hyper, AnalogTrainingMeta *meta_out)
{
    config.validate();
    spec.validate();
    require(spec.n_c == config.n_c && spec.n_t == config.n_t && spec.n_f == config.n_f,
            "train_analog: model spec does not match system config");
    require(!train_set.samples.empty(), "train_analog: empty training set");
    require(hyper.batch >= 1 && hyper.epochs >= 0, "train_analog: bad hyperparameters");

    const auto indices = select_subcarriers(config.n_c, config.n_f, config.subcarrier_seed);
    const float sigma2 = static_cast<float>(db_to_linear(-config.snr_fb_db));
    const GeometryConfig &geom = train_set.manifest.geometry;

    AnalogModel<float> model = build_analog_model_t<float>(spec, hyper.seed);
    nn::Adam<float> opt(model.params(), hyper.lr);

    AnalogTrainingMeta meta;
    meta.trained_snr_fb_db = config.snr_fb_db;
    meta.hyper = hyper;

    const std::size_t n_train = train_set.samples.size();
    std::vector<std::size_t> order(n_train);
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < hyper.epochs; ++epoch)
    {
        auto shuffle_rng = make_rng(mix_seed(hyper.seed, 0x5EAF00D, static_cast<std::uint64_t>(epoch)));
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double loss_acc = 0.0;
        long batches = 0;
        for (std::size_t start = 0; start < n_train; start += static_cast<std::size_t>(hyper.batch))
        {
            const std::size_t stop = std::min(n_train, start + static_cast<std::size_t>(hyper.batch));
            AnalogBatch<float> batch;
            std::vector<const arma::cx_mat *> mats;
            mats.reserve(stop - start);
            for (std::size_t k = start; k < stop; ++k)
            {
                const ChannelSample &s = train_set.samples[order[k]];
                mats.push_back(&s.h_d);
                // Fresh paired uplink realization for this pass (realization 0
                // is the stored evaluation uplink).
                arma::cx_mat hu = uplink_realization(geom, config.n_c, config.n_t, s.seed,
                                                     static_cast<std::uint64_t>(epoch) + 1);
                batch.h_f.push_back(feedback_columns_f(to_frequency(hu), indices));
                batch.noise_seeds.push_back(mix_seed(hyper.seed ^ 0xA0A0A0A0ULL,
                                                     static_cast<std::uint64_t>(epoch),
                                                     static_cast<std::uint64_t>(s.sample_id)));
            }
            batch.x = csi_to_tensor<float>(mats);

            opt.zero_grad();
            const float loss = analog_training_step(model, batch, sigma2, true);
            if (!std::isfinite(loss))
                throw std::runtime_error("analog training diverged: non-finite loss at epoch " +
                                         std::to_string(epoch));
            opt.step();
            loss_acc += loss;
            ++batches;
        }
        meta.train_loss.push_back(loss_acc / std::max(1L, batches));
        meta.val_nmse_db.push_back(analog_validation_nmse_db(
            model, val_set, config, mix_seed(hyper.seed, 0x7A11DA7E, static_cast<std::uint64_t>(epoch))));
    }

    if (meta_out)
        *meta_out = meta;
    return model;
}

ReconstructionResult analog_forward(const arma::cx_mat &h_d, const arma::cx_mat &h_u_freq,
                                    const SystemConfig &config, AnalogModel<float> &model,
                                    std::uint64_t noise_seed)
{
    config.validate();
    require(model.spec.n_c == config.n_c && model.spec.n_t == config.n_t &&
                model.spec.n_f == config.n_f,
            "analog_forward: model spec does not match system config");
    ReconstructionResult r;
    r.scheme = Scheme::analog;
    r.failed = false;
    r.h_d_hat = reconstruct_one(model, h_d, h_u_freq, config, noise_seed);
    return r;
}

double analog_validation_nmse_db(AnalogModel<float> &model, const Dataset &ds,
                                 const SystemConfig &config, std::uint64_t eval_seed)
{
    require(!ds.samples.empty(), "analog_validation_nmse_db: empty dataset");
    double acc = 0.0;
    for (const auto &s : ds.samples)
    {
        arma::cx_mat hat = reconstruct_one(model, s.h_d, to_frequency(s.h_u), config,
                                           mix_seed(eval_seed, static_cast<std::uint64_t>(s.sample_id)));
        const double num = std::pow(arma::norm(s.h_d - hat, "fro"), 2);
        const double den = std::pow(arma::norm(s.h_d, "fro"), 2);
        acc += num / den;
    }
    return 10.0 * std::log10(std::max(1e-15, acc / static_cast<double>(ds.samples.size())));
}

void save_analog_checkpoint(const std::string &dir, AnalogModel<float> &model,
                            const AnalogTrainingMeta &meta)
{
    fs::create_directories(dir);
    std::vector<NamedWeights> weights;
    for (auto &p : model.params())
        weights.push_back({p.name, p.value});
    for (auto &b : model.buffers())
        weights.push_back({b.name, b.value});

    json doc{{"format_version", 1},
             {"scheme", "analog"},
             {"spec", spec_to_json(model.spec)},
             {"trained_snr_fb_db", meta.trained_snr_fb_db},
             {"training",
              {{"lr", meta.hyper.lr},
               {"batch", meta.hyper.batch},
               {"epochs", meta.hyper.epochs},
               {"seed", meta.hyper.seed},
               {"train_loss", meta.train_loss},
               {"val_nmse_db", meta.val_nmse_db}}}};
    doc["weights_index"] = write_weight_file(dir, weights);

    std::ofstream f(dir + "/model.json");
    if (!f)
        throw std::runtime_error("cannot open for writing: " + dir + "/model.json");
    f << doc.dump(2) << "\n";
}

AnalogModel<float> load_analog_checkpoint(const std::string &dir, AnalogTrainingMeta *meta_out)
{
    std::ifstream f(dir + "/model.json");
    if (!f)
        throw std::runtime_error("cannot open: " + dir + "/model.json");
    json doc = json::parse(f);
    require(doc.at("scheme").get<std::string>() == "analog",
            "checkpoint scheme mismatch: expected analog");

    AnalogModelSpec spec = spec_from_json(doc.at("spec"));
    AnalogModel<float> model = build_analog_model_t<float>(spec, 0);

    std::vector<NamedWeights> weights;
    for (auto &p : model.params())
        weights.push_back({p.name, p.value});
    for (auto &b : model.buffers())
        weights.push_back({b.name, b.value});
    read_weight_file(dir, doc.at("weights_index"), weights);

    if (meta_out)
    {
        meta_out->trained_snr_fb_db = doc.at("trained_snr_fb_db").get<double>();
        const auto &t = doc.at("training");
        meta_out->hyper.lr = t.at("lr").get<double>();
        meta_out->hyper.batch = t.at("batch").get<int>();
        meta_out->hyper.epochs = t.at("epochs").get<int>();
        meta_out->hyper.seed = t.at("seed").get<std::uint64_t>();
        meta_out->train_loss = t.at("train_loss").get<std::vector<double>>();
        meta_out->val_nmse_db = t.at("val_nmse_db").get<std::vector<double>>();
    }
    return model;
}

} // namespace csifb
