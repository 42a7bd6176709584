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
// Minimal CPU training engine: NCHW tensors, SAME-padded strided
// convolutions via im2col + BLAS GEMM, batch norm, PReLU, nearest-neighbor
// upsampling, residual blocks and Adam. Templated on the scalar type so the
// same graph runs in float for training and in double for finite-difference
// gradient checks.

#ifndef CSIFB_NN_HPP
#define CSIFB_NN_HPP

#include "csifb/common.hpp"

#include <cmath>
#include <memory>
#include <string>
#include <vector>

namespace csifb::nn
{

template <typename T>
struct Tensor
{
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<T> data;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_)
        : n(n_), c(c_), h(h_), w(w_),
          data(static_cast<std::size_t>(n_) * c_ * h_ * w_, T(0))
    {
    }

    std::size_t numel() const { return data.size(); }

    T &at(int in, int ic, int ih, int iw)
    {
        return data[((static_cast<std::size_t>(in) * c + ic) * h + ih) * w + iw];
    }
    const T &at(int in, int ic, int ih, int iw) const
    {
        return data[((static_cast<std::size_t>(in) * c + ic) * h + ih) * w + iw];
    }

    bool same_shape(const Tensor &o) const
    {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }
};

template <typename T>
struct ParamRef
{
    std::string name;
    std::vector<T> *value;
    std::vector<T> *grad;
};

template <typename T>
class Layer
{
public:
    virtual ~Layer() = default;
    virtual Tensor<T> forward(const Tensor<T> &x, bool train) = 0;
    virtual Tensor<T> backward(const Tensor<T> &gout) = 0;
    virtual void collect_params(std::vector<ParamRef<T>> &out, const std::string &prefix)
    {
        (void)out;
        (void)prefix;
    }
    /// Non-trainable state that still belongs in a checkpoint (BN statistics).
    virtual void collect_buffers(std::vector<ParamRef<T>> &out, const std::string &prefix)
    {
        (void)out;
        (void)prefix;
    }
    virtual std::string kind() const = 0;
};

namespace detail
{
/// SAME-padding output size for a strided convolution (ceil division).
inline int conv_out_size(int in, int stride) { return (in + stride - 1) / stride; }
} // namespace detail

// --- Convolution ------------------------------------------------------------

template <typename T>
class Conv2d final : public Layer<T>
{
public:
    // Bias defaults to a small constant so an untrained encoder cannot emit an
    // all-zero frame into the power normalizer.
    Conv2d(int c_in, int c_out, int kh, int kw, int sh, int sw, std::mt19937_64 &rng,
           T bias_init = T(0.01))
        : c_in_(c_in), c_out_(c_out), kh_(kh), kw_(kw), sh_(sh), sw_(sw),
          weight_(static_cast<std::size_t>(c_in) * kh * kw * c_out),
          bias_(static_cast<std::size_t>(c_out), bias_init),
          wgrad_(weight_.size(), T(0)), bgrad_(bias_.size(), T(0))
    {
        // He-normal, fan-in = c_in * kh * kw.
        const double stddev = std::sqrt(2.0 / (static_cast<double>(c_in) * kh * kw));
        std::normal_distribution<double> d(0.0, stddev);
        for (auto &v : weight_)
            v = static_cast<T>(d(rng));
    }

    Tensor<T> forward(const Tensor<T> &x, bool) override
    {
        in_shape_ = {x.n, x.c, x.h, x.w};
        const int ho = detail::conv_out_size(x.h, sh_);
        const int wo = detail::conv_out_size(x.w, sw_);
        const int k = c_in_ * kh_ * kw_;
        const std::size_t p = static_cast<std::size_t>(x.n) * ho * wo;

        col_.set_size(static_cast<arma::uword>(p), static_cast<arma::uword>(k));
        im2col(x, ho, wo);

        // out (P x c_out) = col (P x K) * W (K x c_out)
        arma::Mat<T> w_view(const_cast<T *>(weight_.data()), static_cast<arma::uword>(k),
                            static_cast<arma::uword>(c_out_), false, true);
        arma::Mat<T> out_mat = col_ * w_view;

        Tensor<T> y(x.n, c_out_, ho, wo);
        const std::size_t plane = static_cast<std::size_t>(ho) * wo;
        for (int n = 0; n < x.n; ++n)
            for (int co = 0; co < c_out_; ++co)
            {
                const T *src = out_mat.colptr(static_cast<arma::uword>(co)) +
                               static_cast<std::size_t>(n) * plane;
                T *dst = &y.at(n, co, 0, 0);
                const T b = bias_[static_cast<std::size_t>(co)];
                for (std::size_t i = 0; i < plane; ++i)
                    dst[i] = src[i] + b;
            }
        return y;
    }

    Tensor<T> backward(const Tensor<T> &gout) override
    {
        const auto [xn, xc, xh, xw] = in_shape_;
        const int ho = gout.h, wo = gout.w;
        const int k = c_in_ * kh_ * kw_;
        const std::size_t p = static_cast<std::size_t>(gout.n) * ho * wo;
        const std::size_t plane = static_cast<std::size_t>(ho) * wo;

        arma::Mat<T> g_mat(static_cast<arma::uword>(p), static_cast<arma::uword>(c_out_));
        for (int n = 0; n < gout.n; ++n)
            for (int co = 0; co < c_out_; ++co)
            {
                const T *src = &gout.at(n, co, 0, 0);
                T *dst = g_mat.colptr(static_cast<arma::uword>(co)) +
                         static_cast<std::size_t>(n) * plane;
                std::copy(src, src + plane, dst);
            }

        // Parameter gradients (accumulated; optimizer zeroes them).
        arma::Mat<T> wg_view(wgrad_.data(), static_cast<arma::uword>(k),
                             static_cast<arma::uword>(c_out_), false, true);
        wg_view += col_.t() * g_mat;
        for (int co = 0; co < c_out_; ++co)
            bgrad_[static_cast<std::size_t>(co)] +=
                arma::accu(g_mat.col(static_cast<arma::uword>(co)));

        // Input gradient.
        arma::Mat<T> w_view(weight_.data(), static_cast<arma::uword>(k),
                            static_cast<arma::uword>(c_out_), false, true);
        arma::Mat<T> dcol = g_mat * w_view.t(); // (P x K)

        Tensor<T> dx(xn, xc, xh, xw);
        col2im(dcol, dx, ho, wo);
        return dx;
    }

    void collect_params(std::vector<ParamRef<T>> &out, const std::string &prefix) override
    {
        out.push_back({prefix + ".weight", &weight_, &wgrad_});
        out.push_back({prefix + ".bias", &bias_, &bgrad_});
    }

    std::string kind() const override { return "conv2d"; }

private:
    void pads(int in_h, int in_w, int ho, int wo, int &top, int &left) const
    {
        const int ph = std::max(0, (ho - 1) * sh_ + kh_ - in_h);
        const int pw = std::max(0, (wo - 1) * sw_ + kw_ - in_w);
        top = ph / 2;
        left = pw / 2;
    }

    // Column k of the (P x K) matrix holds patch element (ci,ki,kj) for every
    // output position; runs over ow are contiguous in x when sw == 1.
    void im2col(const Tensor<T> &x, int ho, int wo)
    {
        int top, left;
        pads(x.h, x.w, ho, wo, top, left);
        std::size_t k = 0;
        for (int ci = 0; ci < x.c; ++ci)
            for (int ki = 0; ki < kh_; ++ki)
                for (int kj = 0; kj < kw_; ++kj, ++k)
                {
                    T *dst = col_.colptr(static_cast<arma::uword>(k));
                    const int ow_lo = std::max(0, (left - kj + sw_ - 1) / sw_);
                    const int ow_hi = std::min(wo, (x.w - kj + left + sw_ - 1) / sw_);
                    for (int n = 0; n < x.n; ++n)
                        for (int oh = 0; oh < ho; ++oh)
                        {
                            T *row = dst + (static_cast<std::size_t>(n) * ho + oh) * wo;
                            const int ih = oh * sh_ + ki - top;
                            if (ih < 0 || ih >= x.h)
                            {
                                std::fill(row, row + wo, T(0));
                                continue;
                            }
                            std::fill(row, row + ow_lo, T(0));
                            std::fill(row + ow_hi, row + wo, T(0));
                            const T *src = &x.at(n, ci, ih, 0);
                            if (sw_ == 1)
                            {
                                const int base = ow_lo + kj - left;
                                std::copy(src + base, src + base + (ow_hi - ow_lo), row + ow_lo);
                            }
                            else
                            {
                                for (int ow = ow_lo; ow < ow_hi; ++ow)
                                    row[ow] = src[ow * sw_ + kj - left];
                            }
                        }
                }
    }

    void col2im(const arma::Mat<T> &dcol, Tensor<T> &dx, int ho, int wo) const
    {
        int top, left;
        pads(dx.h, dx.w, ho, wo, top, left);
        std::size_t k = 0;
        for (int ci = 0; ci < dx.c; ++ci)
            for (int ki = 0; ki < kh_; ++ki)
                for (int kj = 0; kj < kw_; ++kj, ++k)
                {
                    const T *src_col = dcol.colptr(static_cast<arma::uword>(k));
                    const int ow_lo = std::max(0, (left - kj + sw_ - 1) / sw_);
                    const int ow_hi = std::min(wo, (dx.w - kj + left + sw_ - 1) / sw_);
                    for (int n = 0; n < dx.n; ++n)
                        for (int oh = 0; oh < ho; ++oh)
                        {
                            const int ih = oh * sh_ + ki - top;
                            if (ih < 0 || ih >= dx.h)
                                continue;
                            const T *row = src_col + (static_cast<std::size_t>(n) * ho + oh) * wo;
                            T *dst = &dx.at(n, ci, ih, 0);
                            for (int ow = ow_lo; ow < ow_hi; ++ow)
                                dst[ow * sw_ + kj - left] += row[ow];
                        }
                }
    }

    int c_in_, c_out_, kh_, kw_, sh_, sw_;
    std::vector<T> weight_; // (K x c_out) column-major, K = c_in*kh*kw
    std::vector<T> bias_;
    std::vector<T> wgrad_, bgrad_;
    arma::Mat<T> col_; // (P x K) patch matrix cached for the weight gradient
    std::array<int, 4> in_shape_{};
};

// --- PReLU -------------------------------------------------------------------

template <typename T>
class PReLU final : public Layer<T>
{
public:
    explicit PReLU(int channels, T slope = T(0.25))
        : slope_(static_cast<std::size_t>(channels), slope),
          sgrad_(static_cast<std::size_t>(channels), T(0))
    {
    }

    Tensor<T> forward(const Tensor<T> &x, bool) override
    {
        x_ = x;
        Tensor<T> y = x;
        const std::size_t plane = static_cast<std::size_t>(x.h) * x.w;
        for (int n = 0; n < x.n; ++n)
            for (int c = 0; c < x.c; ++c)
            {
                const T a = slope_[static_cast<std::size_t>(c)];
                T *d = &y.at(n, c, 0, 0);
                for (std::size_t i = 0; i < plane; ++i)
                    if (d[i] < T(0))
                        d[i] *= a;
            }
        return y;
    }

    Tensor<T> backward(const Tensor<T> &gout) override
    {
        Tensor<T> dx = gout;
        const std::size_t plane = static_cast<std::size_t>(x_.h) * x_.w;
        for (int n = 0; n < x_.n; ++n)
            for (int c = 0; c < x_.c; ++c)
            {
                const T a = slope_[static_cast<std::size_t>(c)];
                const T *xv = &x_.at(n, c, 0, 0);
                T *g = &dx.at(n, c, 0, 0);
                T acc = T(0);
                for (std::size_t i = 0; i < plane; ++i)
                    if (xv[i] < T(0))
                    {
                        acc += g[i] * xv[i];
                        g[i] *= a;
                    }
                sgrad_[static_cast<std::size_t>(c)] += acc;
            }
        return dx;
    }

    void collect_params(std::vector<ParamRef<T>> &out, const std::string &prefix) override
    {
        out.push_back({prefix + ".slope", &slope_, &sgrad_});
    }

    std::string kind() const override { return "prelu"; }

private:
    std::vector<T> slope_, sgrad_;
    Tensor<T> x_;
};

// --- Batch normalization ------------------------------------------------------

template <typename T>
class BatchNorm2d final : public Layer<T>
{
public:
    explicit BatchNorm2d(int channels, T eps = T(1e-5), T momentum = T(0.1))
        : eps_(eps), momentum_(momentum),
          gamma_(static_cast<std::size_t>(channels), T(1)),
          beta_(static_cast<std::size_t>(channels), T(0)),
          ggrad_(static_cast<std::size_t>(channels), T(0)),
          bgrad_(static_cast<std::size_t>(channels), T(0)),
          running_mean_(static_cast<std::size_t>(channels), T(0)),
          running_var_(static_cast<std::size_t>(channels), T(1))
    {
    }

    Tensor<T> forward(const Tensor<T> &x, bool train) override
    {
        const int ch = x.c;
        const std::size_t plane = static_cast<std::size_t>(x.h) * x.w;
        const std::size_t m = static_cast<std::size_t>(x.n) * plane;

        xhat_ = Tensor<T>(x.n, x.c, x.h, x.w);
        invstd_.assign(static_cast<std::size_t>(ch), T(0));
        Tensor<T> y(x.n, x.c, x.h, x.w);

        for (int c = 0; c < ch; ++c)
        {
            T mean, var;
            if (train)
            {
                double s = 0.0, s2 = 0.0;
                for (int n = 0; n < x.n; ++n)
                {
                    const T *v = &x.at(n, c, 0, 0);
                    for (std::size_t i = 0; i < plane; ++i)
                    {
                        s += v[i];
                        s2 += static_cast<double>(v[i]) * v[i];
                    }
                }
                mean = static_cast<T>(s / m);
                var = static_cast<T>(s2 / m - (s / m) * (s / m));
                if (var < T(0))
                    var = T(0);
                running_mean_[static_cast<std::size_t>(c)] =
                    (T(1) - momentum_) * running_mean_[static_cast<std::size_t>(c)] + momentum_ * mean;
                const T unbiased = m > 1 ? var * static_cast<T>(m) / static_cast<T>(m - 1) : var;
                running_var_[static_cast<std::size_t>(c)] =
                    (T(1) - momentum_) * running_var_[static_cast<std::size_t>(c)] + momentum_ * unbiased;
            }
            else
            {
                mean = running_mean_[static_cast<std::size_t>(c)];
                var = running_var_[static_cast<std::size_t>(c)];
            }
            const T istd = T(1) / std::sqrt(var + eps_);
            invstd_[static_cast<std::size_t>(c)] = istd;
            const T g = gamma_[static_cast<std::size_t>(c)], b = beta_[static_cast<std::size_t>(c)];
            for (int n = 0; n < x.n; ++n)
            {
                const T *v = &x.at(n, c, 0, 0);
                T *xh = &xhat_.at(n, c, 0, 0);
                T *yo = &y.at(n, c, 0, 0);
                for (std::size_t i = 0; i < plane; ++i)
                {
                    xh[i] = (v[i] - mean) * istd;
                    yo[i] = g * xh[i] + b;
                }
            }
        }
        train_mode_ = train;
        return y;
    }

    Tensor<T> backward(const Tensor<T> &gout) override
    {
        const int ch = gout.c;
        const std::size_t plane = static_cast<std::size_t>(gout.h) * gout.w;
        const std::size_t m = static_cast<std::size_t>(gout.n) * plane;
        Tensor<T> dx(gout.n, gout.c, gout.h, gout.w);

        for (int c = 0; c < ch; ++c)
        {
            const T g = gamma_[static_cast<std::size_t>(c)];
            const T istd = invstd_[static_cast<std::size_t>(c)];
            double sum_g = 0.0, sum_gx = 0.0;
            for (int n = 0; n < gout.n; ++n)
            {
                const T *go = &gout.at(n, c, 0, 0);
                const T *xh = &xhat_.at(n, c, 0, 0);
                for (std::size_t i = 0; i < plane; ++i)
                {
                    sum_g += go[i];
                    sum_gx += static_cast<double>(go[i]) * xh[i];
                }
            }
            bgrad_[static_cast<std::size_t>(c)] += static_cast<T>(sum_g);
            ggrad_[static_cast<std::size_t>(c)] += static_cast<T>(sum_gx);

            if (!train_mode_)
            {
                // Inference-mode backward (fixed statistics).
                for (int n = 0; n < gout.n; ++n)
                {
                    const T *go = &gout.at(n, c, 0, 0);
                    T *d = &dx.at(n, c, 0, 0);
                    for (std::size_t i = 0; i < plane; ++i)
                        d[i] = go[i] * g * istd;
                }
                continue;
            }

            const T k1 = g * istd / static_cast<T>(m);
            for (int n = 0; n < gout.n; ++n)
            {
                const T *go = &gout.at(n, c, 0, 0);
                const T *xh = &xhat_.at(n, c, 0, 0);
                T *d = &dx.at(n, c, 0, 0);
                for (std::size_t i = 0; i < plane; ++i)
                    d[i] = k1 * (static_cast<T>(m) * go[i] - static_cast<T>(sum_g) -
                                 xh[i] * static_cast<T>(sum_gx));
            }
        }
        return dx;
    }

    void collect_params(std::vector<ParamRef<T>> &out, const std::string &prefix) override
    {
        out.push_back({prefix + ".gamma", &gamma_, &ggrad_});
        out.push_back({prefix + ".beta", &beta_, &bgrad_});
    }

    void collect_buffers(std::vector<ParamRef<T>> &out, const std::string &prefix) override
    {
        out.push_back({prefix + ".running_mean", &running_mean_, nullptr});
        out.push_back({prefix + ".running_var", &running_var_, nullptr});
    }

    std::string kind() const override { return "batchnorm2d"; }

    std::vector<T> &running_mean() { return running_mean_; }
    std::vector<T> &running_var() { return running_var_; }

private:
    T eps_, momentum_;
    std::vector<T> gamma_, beta_, ggrad_, bgrad_;
    std::vector<T> running_mean_, running_var_;
    Tensor<T> xhat_;
    std::vector<T> invstd_;
    bool train_mode_ = true;
};

// --- Nearest-neighbor upsampling ----------------------------------------------

template <typename T>
class Upsample2d final : public Layer<T>
{
public:
    Upsample2d(int fh, int fw) : fh_(fh), fw_(fw) {}

    Tensor<T> forward(const Tensor<T> &x, bool) override
    {
        in_shape_ = {x.n, x.c, x.h, x.w};
        Tensor<T> y(x.n, x.c, x.h * fh_, x.w * fw_);
        for (int n = 0; n < x.n; ++n)
            for (int c = 0; c < x.c; ++c)
                for (int oh = 0; oh < y.h; ++oh)
                    for (int ow = 0; ow < y.w; ++ow)
                        y.at(n, c, oh, ow) = x.at(n, c, oh / fh_, ow / fw_);
        return y;
    }

    Tensor<T> backward(const Tensor<T> &gout) override
    {
        const auto [n0, c0, h0, w0] = in_shape_;
        Tensor<T> dx(n0, c0, h0, w0);
        for (int n = 0; n < gout.n; ++n)
            for (int c = 0; c < gout.c; ++c)
                for (int oh = 0; oh < gout.h; ++oh)
                    for (int ow = 0; ow < gout.w; ++ow)
                        dx.at(n, c, oh / fh_, ow / fw_) += gout.at(n, c, oh, ow);
        return dx;
    }

    std::string kind() const override { return "upsample2d"; }

private:
    int fh_, fw_;
    std::array<int, 4> in_shape_{};
};

// --- Residual block (two SAME convolutions, element-wise skip addition) --------

template <typename T>
class ResidualBlock final : public Layer<T>
{
public:
    ResidualBlock(int channels, int kernel, bool batch_norm, std::mt19937_64 &rng)
        : use_bn_(batch_norm),
          conv1_(channels, channels, kernel, kernel, 1, 1, rng),
          conv2_(channels, channels, kernel, kernel, 1, 1, rng),
          bn1_(channels), bn2_(channels), act1_(channels), act2_(channels)
    {
    }

    Tensor<T> forward(const Tensor<T> &x, bool train) override
    {
        x_ = x;
        Tensor<T> t = conv1_.forward(x, train);
        if (use_bn_)
            t = bn1_.forward(t, train);
        t = act1_.forward(t, train);
        t = conv2_.forward(t, train);
        if (use_bn_)
            t = bn2_.forward(t, train);
        for (std::size_t i = 0; i < t.numel(); ++i)
            t.data[i] += x.data[i];
        return act2_.forward(t, train);
    }

    Tensor<T> backward(const Tensor<T> &gout) override
    {
        Tensor<T> g = act2_.backward(gout);
        Tensor<T> skip = g;
        if (use_bn_)
            g = bn2_.backward(g);
        g = conv2_.backward(g);
        g = act1_.backward(g);
        if (use_bn_)
            g = bn1_.backward(g);
        g = conv1_.backward(g);
        for (std::size_t i = 0; i < g.numel(); ++i)
            g.data[i] += skip.data[i];
        return g;
    }

    void collect_params(std::vector<ParamRef<T>> &out, const std::string &prefix) override
    {
        conv1_.collect_params(out, prefix + ".conv1");
        if (use_bn_)
            bn1_.collect_params(out, prefix + ".bn1");
        act1_.collect_params(out, prefix + ".act1");
        conv2_.collect_params(out, prefix + ".conv2");
        if (use_bn_)
            bn2_.collect_params(out, prefix + ".bn2");
        act2_.collect_params(out, prefix + ".act2");
    }

    void collect_buffers(std::vector<ParamRef<T>> &out, const std::string &prefix) override
    {
        if (use_bn_)
        {
            bn1_.collect_buffers(out, prefix + ".bn1");
            bn2_.collect_buffers(out, prefix + ".bn2");
        }
    }

    std::string kind() const override { return "residual"; }

private:
    bool use_bn_;
    Conv2d<T> conv1_, conv2_;
    BatchNorm2d<T> bn1_, bn2_;
    PReLU<T> act1_, act2_;
    Tensor<T> x_;
};

// --- Sequential container ------------------------------------------------------

template <typename T>
class Sequential
{
public:
    void add(std::unique_ptr<Layer<T>> l) { layers_.push_back(std::move(l)); }

    Tensor<T> forward(const Tensor<T> &x, bool train)
    {
        Tensor<T> t = x;
        for (auto &l : layers_)
            t = l->forward(t, train);
        return t;
    }

    Tensor<T> backward(const Tensor<T> &gout)
    {
        Tensor<T> g = gout;
        for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
            g = (*it)->backward(g);
        return g;
    }

    void collect_params(std::vector<ParamRef<T>> &out, const std::string &prefix)
    {
        for (std::size_t i = 0; i < layers_.size(); ++i)
            layers_[i]->collect_params(out, prefix + "." + std::to_string(i) + "." +
                                                layers_[i]->kind());
    }

    void collect_buffers(std::vector<ParamRef<T>> &out, const std::string &prefix)
    {
        for (std::size_t i = 0; i < layers_.size(); ++i)
            layers_[i]->collect_buffers(out, prefix + "." + std::to_string(i) + "." +
                                                 layers_[i]->kind());
    }

    std::size_t size() const { return layers_.size(); }
    Layer<T> &layer(std::size_t i) { return *layers_[i]; }

private:
    std::vector<std::unique_ptr<Layer<T>>> layers_;
};

// --- Adam ------------------------------------------------------------------------

template <typename T>
class Adam
{
public:
    Adam(std::vector<ParamRef<T>> params, double lr, double beta1 = 0.9,
         double beta2 = 0.999, double eps = 1e-8)
        : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps)
    {
        for (const auto &p : params_)
        {
            m_.emplace_back(p.value->size(), 0.0);
            v_.emplace_back(p.value->size(), 0.0);
        }
    }

    void zero_grad()
    {
        for (auto &p : params_)
            std::fill(p.grad->begin(), p.grad->end(), T(0));
    }

    void step()
    {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (std::size_t i = 0; i < params_.size(); ++i)
        {
            auto &val = *params_[i].value;
            auto &grd = *params_[i].grad;
            auto &m = m_[i];
            auto &v = v_[i];
            for (std::size_t j = 0; j < val.size(); ++j)
            {
                const double g = static_cast<double>(grd[j]);
                m[j] = beta1_ * m[j] + (1.0 - beta1_) * g;
                v[j] = beta2_ * v[j] + (1.0 - beta2_) * g * g;
                val[j] -= static_cast<T>(lr_ * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + eps_));
            }
        }
    }

    const std::vector<ParamRef<T>> &params() const { return params_; }
    void set_lr(double lr) { lr_ = lr; }

private:
    std::vector<ParamRef<T>> params_;
    double lr_, beta1_, beta2_, eps_;
    std::vector<std::vector<double>> m_, v_;
    long t_ = 0;
};

// --- Loss ------------------------------------------------------------------------

/// Mean squared error over all entries; grad is with respect to pred.
template <typename T>
T mse_loss(const Tensor<T> &pred, const Tensor<T> &target, Tensor<T> *grad = nullptr)
{
    double acc = 0.0;
    const double inv = 1.0 / static_cast<double>(pred.numel());
    if (grad)
        *grad = Tensor<T>(pred.n, pred.c, pred.h, pred.w);
    for (std::size_t i = 0; i < pred.numel(); ++i)
    {
        const double d = static_cast<double>(pred.data[i]) - target.data[i];
        acc += d * d;
        if (grad)
            grad->data[i] = static_cast<T>(2.0 * d * inv);
    }
    return static_cast<T>(acc * inv);
}

} // namespace csifb::nn

#endif
