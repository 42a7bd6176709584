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

#include "csifb/chanmodel.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace csifb
{

namespace
{

constexpr std::uint64_t kRayStreamSalt = 0x5261795374726541ULL;   // ray geometry stream
constexpr std::uint64_t kUplinkPhaseSalt = 0x55706C696E6B5068ULL; // uplink phase stream

constexpr double kPi = 3.14159265358979323846;

struct Ray
{
    int tap;
    int cluster;
    double angle_rad;
    double magnitude;
    double dl_phase;
};

struct RaySet
{
    std::vector<Ray> rays;
    double los_amplitude; // deterministic broadside ray at tap 0
};

double tap_weight(int tap, double decay)
{
    return std::exp(-static_cast<double>(tap) / decay);
}

// Delay-tap table. Rays sit on a fixed cyclic tap grid (CDL-style prescribed
// delays) with squared magnitudes chosen so the per-tap ensemble power equals
// the exponential profile exactly. Randomness enters through cluster angles,
// ray angle offsets and per-ray phases.
struct TapPlan
{
    std::vector<int> tap_of_ray;
    std::vector<double> power_of_ray; // per-ray |gain|^2, sums to 1 - LOS fraction
};

TapPlan make_tap_plan(const GeometryConfig &g)
{
    const int n_rays = g.n_clusters * g.rays_per_cluster;
    const int l = g.max_delay_taps;

    TapPlan plan;
    plan.tap_of_ray.resize(static_cast<std::size_t>(n_rays));
    std::vector<int> rays_at_tap(static_cast<std::size_t>(l), 0);
    for (int i = 0; i < n_rays; ++i)
    {
        const int tap = i % l;
        plan.tap_of_ray[static_cast<std::size_t>(i)] = tap;
        rays_at_tap[static_cast<std::size_t>(tap)]++;
    }

    double z = 0.0;
    for (int t = 0; t < l; ++t)
        if (rays_at_tap[static_cast<std::size_t>(t)] > 0)
            z += tap_weight(t, g.delay_decay);

    const double nlos_power = 1.0 - g.los_power_fraction;
    plan.power_of_ray.resize(static_cast<std::size_t>(n_rays));
    for (int i = 0; i < n_rays; ++i)
    {
        const int tap = plan.tap_of_ray[static_cast<std::size_t>(i)];
        plan.power_of_ray[static_cast<std::size_t>(i)] =
            nlos_power * tap_weight(tap, g.delay_decay) /
            (z * rays_at_tap[static_cast<std::size_t>(tap)]);
    }
    return plan;
}

RaySet derive_rays(const GeometryConfig &g, std::uint64_t seed)
{
    auto rng = make_rng(mix_seed(seed, kRayStreamSalt));
    // Cluster centers within a +-30 degree sector (sectorized ULA cell).
    std::uniform_real_distribution<double> center_dist(-kPi / 6.0, kPi / 6.0);
    std::normal_distribution<double> offset_dist(0.0, g.angle_spread_deg * kPi / 180.0);
    std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * kPi);

    const TapPlan plan = make_tap_plan(g);
    const int n_rays = g.n_clusters * g.rays_per_cluster;

    std::vector<double> centers(static_cast<std::size_t>(g.n_clusters));
    for (auto &c : centers)
        c = center_dist(rng);

    RaySet rs;
    rs.los_amplitude = std::sqrt(g.los_power_fraction);
    rs.rays.reserve(static_cast<std::size_t>(n_rays));

    // Interleave clusters along the ray index so rays sharing a delay tap
    // usually come from different clusters (decorrelated angles).
    for (int i = 0; i < n_rays; ++i)
    {
        Ray ray;
        ray.cluster = i % g.n_clusters;
        ray.tap = plan.tap_of_ray[static_cast<std::size_t>(i)];
        ray.angle_rad = centers[static_cast<std::size_t>(ray.cluster)] + offset_dist(rng);
        ray.magnitude = std::sqrt(plan.power_of_ray[static_cast<std::size_t>(i)]);
        ray.dl_phase = phase_dist(rng);
        rs.rays.push_back(ray);
    }
    return rs;
}

// ULA steering row: exp(-i 2 pi d k sin(theta)), k = 0..n_t-1.
void add_ray(arma::cx_mat &h, const Ray &ray, double phase, double spacing, int n_t)
{
    const cx gain = std::polar(ray.magnitude, phase);
    const double step = -2.0 * kPi * spacing * std::sin(ray.angle_rad);
    for (int k = 0; k < n_t; ++k)
        h(ray.tap, k) += gain * std::polar(1.0, step * k);
}

arma::cx_mat build_channel(const RaySet &rs, const GeometryConfig &g, int n_c, int n_t,
                           const std::vector<double> &phases)
{
    arma::cx_mat h(n_c, n_t, arma::fill::zeros);
    for (std::size_t i = 0; i < rs.rays.size(); ++i)
        add_ray(h, rs.rays[i], phases[i], g.antenna_spacing_wavelengths, n_t);
    // Deterministic LOS: broadside, zero phase, identical in every sample.
    for (int k = 0; k < n_t; ++k)
        h(0, k) += cx(rs.los_amplitude, 0.0);
    return h;
}

std::vector<double> downlink_phases(const RaySet &rs)
{
    std::vector<double> p(rs.rays.size());
    for (std::size_t i = 0; i < rs.rays.size(); ++i)
        p[i] = rs.rays[i].dl_phase;
    return p;
}

std::vector<double> uplink_phases(const RaySet &rs, const GeometryConfig &g,
                                  std::uint64_t seed, std::uint64_t realization)
{
    if (!g.ul_dl_phase_decorrelation)
        return downlink_phases(rs);
    auto rng = make_rng(mix_seed(seed, kUplinkPhaseSalt, realization));
    std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * kPi);
    std::vector<double> p(rs.rays.size());
    for (auto &v : p)
        v = phase_dist(rng);
    return p;
}

void normalize_matrix(arma::cx_mat &h)
{
    const double fro = arma::norm(h, "fro");
    require(fro > 0.0, "cannot normalize an all-zero channel matrix");
    h *= std::sqrt(static_cast<double>(h.n_rows)) / fro;
}

void write_samples_bin(const std::string &path, const std::vector<ChannelSample> &samples, bool downlink)
{
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw std::runtime_error("cannot open for writing: " + path);
    std::vector<float> buf;
    for (const auto &s : samples)
    {
        const arma::cx_mat &h = downlink ? s.h_d : s.h_u;
        buf.clear();
        buf.reserve(h.n_elem * 2);
        for (arma::uword t = 0; t < h.n_rows; ++t)
            for (arma::uword a = 0; a < h.n_cols; ++a)
            {
                buf.push_back(static_cast<float>(h(t, a).real()));
                buf.push_back(static_cast<float>(h(t, a).imag()));
            }
        f.write(reinterpret_cast<const char *>(buf.data()),
                static_cast<std::streamsize>(buf.size() * sizeof(float)));
    }
    if (!f)
        throw std::runtime_error("write failed: " + path);
}

json geometry_to_json(const GeometryConfig &g)
{
    return json{{"n_clusters", g.n_clusters},
                {"rays_per_cluster", g.rays_per_cluster},
                {"max_delay_taps", g.max_delay_taps},
                {"delay_decay", g.delay_decay},
                {"angle_spread_deg", g.angle_spread_deg},
                {"los_power_fraction", g.los_power_fraction},
                {"antenna_spacing_wavelengths", g.antenna_spacing_wavelengths},
                {"ul_dl_phase_decorrelation", g.ul_dl_phase_decorrelation}};
}

GeometryConfig geometry_from_json(const json &j)
{
    GeometryConfig g;
    g.n_clusters = j.at("n_clusters").get<int>();
    g.rays_per_cluster = j.at("rays_per_cluster").get<int>();
    g.max_delay_taps = j.at("max_delay_taps").get<int>();
    g.delay_decay = j.at("delay_decay").get<double>();
    g.angle_spread_deg = j.at("angle_spread_deg").get<double>();
    g.los_power_fraction = j.at("los_power_fraction").get<double>();
    g.antenna_spacing_wavelengths = j.at("antenna_spacing_wavelengths").get<double>();
    g.ul_dl_phase_decorrelation = j.at("ul_dl_phase_decorrelation").get<bool>();
    return g;
}

void write_split(const GeometryConfig &geometry, int n_c, int n_t, std::int64_t count,
                 std::uint64_t global_seed, const std::string &split, const std::string &dir)
{
    std::vector<ChannelSample> samples;
    samples.reserve(static_cast<std::size_t>(count));
    for (std::int64_t id = 0; id < count; ++id)
    {
        ChannelSample s = generate_sample(geometry, n_c, n_t, sample_seed(global_seed, split, id));
        s.sample_id = id;
        normalize_sample(s);
        samples.push_back(std::move(s));
    }

    fs::create_directories(dir);
    json manifest{{"format_version", 1},
                  {"n_c", n_c},
                  {"n_t", n_t},
                  {"count", count},
                  {"split", split},
                  {"global_seed", global_seed},
                  {"geometry", geometry_to_json(geometry)},
                  {"dtype", "complex64 as interleaved little-endian IEEE-754 single-precision real,imag"},
                  {"layout", "row-major [sample][delay_tap][antenna]"}};
    std::ofstream mf(dir + "/manifest.json");
    if (!mf)
        throw std::runtime_error("cannot open for writing: " + dir + "/manifest.json");
    mf << manifest.dump(2) << "\n";

    write_samples_bin(dir + "/h_d.bin", samples, true);
    write_samples_bin(dir + "/h_u.bin", samples, false);
}

std::vector<arma::cx_mat> read_samples_bin(const std::string &path, std::int64_t count, int n_c, int n_t)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw std::runtime_error("cannot open: " + path);
    const std::size_t per_sample = static_cast<std::size_t>(n_c) * n_t * 2;
    std::vector<float> buf(per_sample);
    std::vector<arma::cx_mat> out;
    out.reserve(static_cast<std::size_t>(count));
    for (std::int64_t id = 0; id < count; ++id)
    {
        f.read(reinterpret_cast<char *>(buf.data()),
               static_cast<std::streamsize>(per_sample * sizeof(float)));
        if (!f)
            throw std::runtime_error("truncated array file: " + path);
        arma::cx_mat h(n_c, n_t);
        std::size_t k = 0;
        for (int t = 0; t < n_c; ++t)
            for (int a = 0; a < n_t; ++a)
            {
                h(t, a) = cx(buf[k], buf[k + 1]);
                k += 2;
            }
        out.push_back(std::move(h));
    }
    return out;
}

} // namespace

void GeometryConfig::validate(int n_c) const
{
    require(n_clusters >= 1, "geometry.n_clusters must be >= 1");
    require(rays_per_cluster >= 1, "geometry.rays_per_cluster must be >= 1");
    require(max_delay_taps >= 1, "geometry.max_delay_taps must be >= 1");
    require(max_delay_taps <= n_c, "geometry.max_delay_taps must be <= n_c");
    require(delay_decay > 0.0, "geometry.delay_decay must be positive");
    require(angle_spread_deg >= 0.0, "geometry.angle_spread_deg must be >= 0");
    require(los_power_fraction >= 0.0 && los_power_fraction <= 1.0,
            "geometry.los_power_fraction must be in [0,1]");
    require(antenna_spacing_wavelengths > 0.0, "geometry.antenna_spacing_wavelengths must be positive");
}

std::uint64_t sample_seed(std::uint64_t global_seed, const std::string &split, std::int64_t sample_id)
{
    std::uint64_t split_tag = 0;
    for (char c : split)
        split_tag = splitmix64(split_tag ^ static_cast<std::uint64_t>(static_cast<unsigned char>(c)));
    return mix_seed(global_seed, split_tag, static_cast<std::uint64_t>(sample_id));
}

ChannelSample generate_sample(const GeometryConfig &geometry, int n_c, int n_t, std::uint64_t seed)
{
    geometry.validate(n_c);
    require(n_t >= 1, "n_t must be >= 1");

    const RaySet rs = derive_rays(geometry, seed);
    ChannelSample s;
    s.seed = seed;
    s.h_d = build_channel(rs, geometry, n_c, n_t, downlink_phases(rs));
    s.h_u = build_channel(rs, geometry, n_c, n_t, uplink_phases(rs, geometry, seed, 0));
    return s;
}

void normalize_sample(ChannelSample &sample)
{
    normalize_matrix(sample.h_d);
    normalize_matrix(sample.h_u);
}

arma::cx_mat uplink_realization(const GeometryConfig &geometry, int n_c, int n_t,
                                std::uint64_t samp_seed, std::uint64_t realization)
{
    geometry.validate(n_c);
    require(n_t >= 1, "n_t must be >= 1");
    const RaySet rs = derive_rays(geometry, samp_seed);
    arma::cx_mat h = build_channel(rs, geometry, n_c, n_t,
                                   uplink_phases(rs, geometry, samp_seed, realization));
    normalize_matrix(h);
    return h;
}

arma::cx_mat to_frequency(const arma::cx_mat &h)
{
    require(all_finite(h), "to_frequency: input has non-finite entries");
    return arma::fft(h) / std::sqrt(static_cast<double>(h.n_rows));
}

arma::cx_mat to_delay(const arma::cx_mat &h_freq)
{
    require(all_finite(h_freq), "to_delay: input has non-finite entries");
    return arma::ifft(h_freq) * std::sqrt(static_cast<double>(h_freq.n_rows));
}

void generate_dataset(const GeometryConfig &geometry, int n_c, int n_t,
                      std::int64_t n_train, std::int64_t n_test,
                      std::uint64_t global_seed, const std::string &dir)
{
    geometry.validate(n_c);
    require(n_train >= 1 && n_test >= 1, "dataset counts must be >= 1");
    write_split(geometry, n_c, n_t, n_train, global_seed, "train", dir + "/train");
    write_split(geometry, n_c, n_t, n_test, global_seed, "test", dir + "/test");
}

Dataset load_dataset(const std::string &split_dir)
{
    std::ifstream mf(split_dir + "/manifest.json");
    if (!mf)
        throw std::runtime_error("cannot open: " + split_dir + "/manifest.json");
    json j = json::parse(mf);

    Dataset ds;
    ds.manifest.format_version = j.at("format_version").get<int>();
    require(ds.manifest.format_version == 1, "unsupported dataset format_version");
    ds.manifest.n_c = j.at("n_c").get<int>();
    ds.manifest.n_t = j.at("n_t").get<int>();
    ds.manifest.count = j.at("count").get<std::int64_t>();
    ds.manifest.split = j.at("split").get<std::string>();
    ds.manifest.global_seed = j.at("global_seed").get<std::uint64_t>();
    ds.manifest.geometry = geometry_from_json(j.at("geometry"));

    auto h_d = read_samples_bin(split_dir + "/h_d.bin", ds.manifest.count, ds.manifest.n_c, ds.manifest.n_t);
    auto h_u = read_samples_bin(split_dir + "/h_u.bin", ds.manifest.count, ds.manifest.n_c, ds.manifest.n_t);

    ds.samples.resize(static_cast<std::size_t>(ds.manifest.count));
    for (std::int64_t id = 0; id < ds.manifest.count; ++id)
    {
        auto &s = ds.samples[static_cast<std::size_t>(id)];
        s.sample_id = id;
        s.seed = sample_seed(ds.manifest.global_seed, ds.manifest.split, id);
        s.h_d = std::move(h_d[static_cast<std::size_t>(id)]);
        s.h_u = std::move(h_u[static_cast<std::size_t>(id)]);
    }
    return ds;
}

arma::cx_mat mean_channel(const Dataset &dataset)
{
    require(!dataset.samples.empty(), "mean_channel: empty dataset");
    arma::cx_mat acc(dataset.samples[0].h_d.n_rows, dataset.samples[0].h_d.n_cols, arma::fill::zeros);
    for (const auto &s : dataset.samples)
        acc += s.h_d;
    return acc / static_cast<double>(dataset.samples.size());
}

arma::vec expected_tap_power_profile(const GeometryConfig &g, int n_c, int n_t)
{
    g.validate(n_c);
    const TapPlan plan = make_tap_plan(g);
    arma::vec profile(n_c, arma::fill::zeros);
    for (std::size_t i = 0; i < plan.tap_of_ray.size(); ++i)
        profile(plan.tap_of_ray[i]) += n_t * plan.power_of_ray[i];
    profile(0) += n_t * g.los_power_fraction;
    return profile;
}

} // namespace csifb
