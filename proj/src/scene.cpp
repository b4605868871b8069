// SPDX-License-Identifier: Apache-2.0
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

#include "ckm/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ckm
{

namespace
{
enum Stream : std::uint64_t
{
    kGeometry = 1,
    kActivity = 2,
    kSlot = 3,
    kSplit = 4,
};

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

cplx complex_normal(std::mt19937_64 &rng)
{
    std::normal_distribution<double> n(0.0, std::sqrt(0.5));
    const double re = n(rng);
    const double im = n(rng);
    return {re, im};
}

CVec constant_modulus_pilot(int N, double power, std::mt19937_64 &rng)
{
    std::uniform_real_distribution<double> phase(0.0, kTwoPi);
    CVec x(N);
    const double amp = std::sqrt(power);
    for (int n = 0; n < N; ++n)
        x(n) = std::polar(amp, phase(rng));
    return x;
}

// Draws one multipath set with the configured delay/angle/power profile.
PathSet draw_paths(const SceneConfig &cfg, int count, std::mt19937_64 &rng)
{
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double az = cfg.azimuth_sector_deg * kPi / 180.0;
    const double ze = cfg.zenith_sector_deg * kPi / 180.0;

    PathSet ps;
    ps.paths.resize(static_cast<size_t>(count));
    double total = 0.0;
    for (auto &p : ps.paths)
    {
        const double tau = cfg.max_delay * unit(rng);
        const double azimuth = az * (2.0 * unit(rng) - 1.0);
        const double zenith = ze * (2.0 * unit(rng) - 1.0);
        p.params = SteeringParams{tau, kPi * std::sin(azimuth) * std::cos(zenith), kPi * std::sin(zenith)}.reduced();
        const double shadow = std::pow(10.0, -cfg.shadow_db * unit(rng) / 10.0);
        p.rho = std::exp(-cfg.power_decay * tau / cfg.max_delay) * shadow;
        total += p.rho;
    }
    for (auto &p : ps.paths)
        p.rho /= total;
    return ps;
}

PathSet displaced(const PathSet &base, const std::vector<PathDrift> &drift, double metres)
{
    PathSet out = base;
    for (size_t l = 0; l < out.paths.size(); ++l)
    {
        auto &p = out.paths[l].params;
        p = SteeringParams{p.tau + drift[l].tau * metres, p.theta + drift[l].theta * metres,
                           p.phi + drift[l].phi * metres}
                .reduced();
    }
    return out;
}
} // namespace

void SceneConfig::validate() const
{
    if (dims.M1 < 1 || dims.M2 < 1 || dims.N < 1)
        throw std::invalid_argument("SceneConfig: array dimensions must be >= 1");
    if (L_true < 1)
        throw std::invalid_argument("SceneConfig: L_true must be >= 1");
    if (K < 0 || L_I < 0)
        throw std::invalid_argument("SceneConfig: K and L_I must be non-negative");
    if (K > 0 && L_I < 1)
        throw std::invalid_argument("SceneConfig: interferers need L_I >= 1");
    if (!(interferer_activity >= 0.0 && interferer_activity <= 1.0))
        throw std::invalid_argument("SceneConfig: interferer_activity must lie in [0, 1]");
    if (!(user_power > 0.0 && interferer_power > 0.0 && noise_var > 0.0))
        throw std::invalid_argument("SceneConfig: powers must be positive");
    if (num_grids < 1 || slots_per_grid < 1)
        throw std::invalid_argument("SceneConfig: need at least one grid and one slot per grid");
    if (!(grid_size_d > 0.0))
        throw std::invalid_argument("SceneConfig: grid_size_d must be positive");
}

double PathSet::total_power() const
{
    double s = 0.0;
    for (const auto &p : paths)
        s += p.rho;
    return s;
}

std::vector<int> Scene::slots_of_grid(int q) const
{
    std::vector<int> idx;
    for (size_t i = 0; i < observations.size(); ++i)
        if (observations[i].grid_q == q)
            idx.push_back(static_cast<int>(i));
    return idx;
}

std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream, std::uint64_t index)
{
    const std::uint64_t s = splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ index);
    std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32)};
    return std::mt19937_64(seq);
}

SceneGeometry generate_scene(const SceneConfig &cfg)
{
    cfg.validate();
    auto rng = substream(cfg.seed, kGeometry, 0);
    std::uniform_real_distribution<double> sym(-1.0, 1.0);

    SceneGeometry geo;
    const PathSet base = draw_paths(cfg, cfg.L_true, rng);
    geo.user_drift.resize(base.paths.size());
    for (auto &d : geo.user_drift)
        d = PathDrift{cfg.delay_rate() * sym(rng), cfg.angle_rate() * sym(rng), cfg.angle_rate() * sym(rng)};

    for (int q = 0; q < cfg.num_grids; ++q)
        geo.user.push_back(displaced(base, geo.user_drift, q * cfg.grid_size_d));

    for (int k = 0; k < cfg.K; ++k)
        geo.interferers.push_back(draw_paths(cfg, cfg.L_I, rng));

    auto act = substream(cfg.seed, kActivity, 0);
    std::bernoulli_distribution on(cfg.interferer_activity);
    for (int k = 0; k < cfg.K; ++k)
        geo.interferer_on.push_back(on(act) ? 1 : 0);
    return geo;
}

CVec realize_channel(const PathSet &ps, const CVec &alphas, int M1, int M2, int N)
{
    if (alphas.size() != static_cast<Eigen::Index>(ps.paths.size()))
        throw std::invalid_argument("realize_channel: one coefficient per path required");
    CVec h = CVec::Zero(static_cast<Eigen::Index>(M1) * M2 * N);
    for (size_t l = 0; l < ps.paths.size(); ++l)
    {
        const auto &p = ps.paths[l];
        const CVec b = ura_steering(M1, M2, p.params.theta, p.params.phi);
        h += (alphas(static_cast<Eigen::Index>(l)) * std::sqrt(p.rho)) * kron(b, steering(N, p.params.tau));
    }
    return h;
}

SlotSample synthesize_slot(const SceneConfig &cfg, const SceneGeometry &geo, int slot_t, std::mt19937_64 &rng)
{
    const auto &d = cfg.dims;
    const int q = slot_t / cfg.slots_per_grid;
    if (q < 0 || q >= static_cast<int>(geo.user.size()))
        throw std::invalid_argument("synthesize_slot: slot outside the construction period");

    SlotSample s;
    s.truth.slot_t = slot_t;
    s.truth.grid_q = q;

    // Position along the grid's length-d line.
    s.truth.user_paths = geo.user[static_cast<size_t>(q)];
    if (cfg.intra_grid_jitter)
    {
        std::uniform_real_distribution<double> offset(-0.5, 0.5);
        s.truth.user_paths = displaced(s.truth.user_paths, geo.user_drift, offset(rng) * cfg.grid_size_d);
    }

    const int L = static_cast<int>(s.truth.user_paths.paths.size());
    s.truth.alphas.resize(L);
    for (int l = 0; l < L; ++l)
        s.truth.alphas(l) = complex_normal(rng);
    s.truth.h = realize_channel(s.truth.user_paths, s.truth.alphas, d.M1, d.M2, d.N);

    auto &obs = s.obs;
    obs.grid_q = q;
    obs.slot_t = slot_t;
    obs.pilot_user = constant_modulus_pilot(d.N, cfg.user_power, rng);
    obs.active_mask = geo.interferer_on;

    // Y = X H, antenna-major: y[m*N + n] = x[n] h[m*N + n].
    CVec signal(d.MN());
    for (int m = 0; m < d.M(); ++m)
        signal.segment(m * d.N, d.N) = s.truth.h.segment(m * d.N, d.N).cwiseProduct(obs.pilot_user);

    CVec interference = CVec::Zero(d.MN());
    for (size_t k = 0; k < geo.interferers.size(); ++k)
    {
        const PathSet &ips = geo.interferers[k];
        obs.pilot_interferers.push_back(constant_modulus_pilot(d.N, cfg.interferer_power, rng));
        CVec ia(static_cast<Eigen::Index>(ips.paths.size()));
        for (Eigen::Index l = 0; l < ia.size(); ++l)
            ia(l) = complex_normal(rng);
        s.truth.interferer_alphas.push_back(ia);
        if (!geo.interferer_on[k])
            continue;
        const CVec hk = realize_channel(ips, ia, d.M1, d.M2, d.N);
        for (int m = 0; m < d.M(); ++m)
            interference.segment(m * d.N, d.N) += hk.segment(m * d.N, d.N).cwiseProduct(obs.pilot_interferers.back());
    }

    CVec noise(d.MN());
    const double sigma = std::sqrt(cfg.noise_var);
    for (Eigen::Index i = 0; i < noise.size(); ++i)
        noise(i) = sigma * complex_normal(rng);

    obs.y = signal + interference + noise;
    s.truth.signal_energy = signal.squaredNorm();
    s.truth.interference_energy = interference.squaredNorm();
    s.truth.noise_energy = noise.squaredNorm();
    return s;
}

Scene simulate_scene(const SceneConfig &cfg)
{
    Scene scene;
    scene.cfg = cfg;
    scene.geometry = generate_scene(cfg);
    const int total = cfg.num_grids * cfg.slots_per_grid;
    scene.observations.reserve(static_cast<size_t>(total));
    scene.truth.reserve(static_cast<size_t>(total));
    for (int t = 0; t < total; ++t)
    {
        auto rng = substream(cfg.seed, kSlot, static_cast<std::uint64_t>(t));
        SlotSample s = synthesize_slot(cfg, scene.geometry, t, rng);
        scene.observations.push_back(std::move(s.obs));
        scene.truth.push_back(std::move(s.truth));
    }
    return scene;
}

SceneConfig calibrate_sinr(const SceneConfig &cfg, double target_sinr_db)
{
    if (std::isnan(target_sinr_db))
        throw std::invalid_argument("calibrate_sinr: target must not be NaN");
    const double db = std::min(target_sinr_db, 200.0);
    SceneConfig out = cfg;
    out.sinr_db = db;

    const double signal = cfg.user_power; // unit total path power
    const double impairment = signal / std::pow(10.0, db / 10.0);
    const double mean_interferers = cfg.interferer_activity * cfg.K;
    const double mn = static_cast<double>(cfg.dims.MN());

    if (mean_interferers > 0.0 && cfg.L_I > 0)
    {
        const double inr = std::pow(10.0, cfg.inr_db / 10.0);
        const double noise_total = impairment / (1.0 + inr);
        out.noise_var = noise_total / mn;
        out.interferer_power = inr * noise_total / mean_interferers;
    }
    else
    {
        out.noise_var = impairment / mn;
    }
    // Keep the config valid at extreme targets.
    out.noise_var = std::max(out.noise_var, 1e-300);
    out.interferer_power = std::max(out.interferer_power, 1e-300);
    return out;
}

CVec pilot_equalize(const Observation &obs, int N)
{
    CVec r = obs.y;
    const Eigen::Index M = obs.y.size() / N;
    for (Eigen::Index m = 0; m < M; ++m)
        r.segment(m * N, N) = r.segment(m * N, N).cwiseQuotient(obs.pilot_user);
    return r;
}

SlotSplit split_slots(const Scene &scene, int q, double ratio)
{
    if (!(ratio > 0.0 && ratio < 1.0))
        throw std::invalid_argument("split_slots: ratio must lie in (0, 1)");
    std::vector<int> idx = scene.slots_of_grid(q);
    auto rng = substream(scene.cfg.seed, kSplit, static_cast<std::uint64_t>(q));
    // Fisher-Yates with explicit draws; std::shuffle's algorithm is unspecified.
    for (size_t i = idx.size(); i > 1; --i)
    {
        std::uniform_int_distribution<size_t> pick(0, i - 1);
        std::swap(idx[i - 1], idx[pick(rng)]);
    }
    const int n = static_cast<int>(idx.size());
    int nc = static_cast<int>(std::lround(ratio * n));
    if (n >= 2)
        nc = std::clamp(nc, 1, n - 1);
    SlotSplit s;
    s.construction.assign(idx.begin(), idx.begin() + nc);
    s.estimation.assign(idx.begin() + nc, idx.end());
    std::sort(s.construction.begin(), s.construction.end());
    std::sort(s.estimation.begin(), s.estimation.end());
    return s;
}

} // namespace ckm
