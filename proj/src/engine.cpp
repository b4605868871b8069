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

#include "ckm/engine.hpp"
#include "ckm/dictionary.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace ckm
{

namespace
{
constexpr std::uint64_t kInitStream = 5;

using ConstRMap = Eigen::Map<const CMat>; // N x M view of y: column m is antenna m

ConstRMap as_matrix(const CVec &y, const ArrayDims &d)
{
    return ConstRMap(y.data(), d.N, d.M());
}

double pilot_power(const CVec &x)
{
    return x.squaredNorm() / static_cast<double>(x.size());
}

// Expected steering vectors for the current beliefs. Per slot: B (M x C) holds
// E[b] per column, S (N x C) holds pilot .* E[a_N].
struct SlotCache
{
    CMat B;
    CMat S;
    RVec power; // exact diagonal of E[Psi^H Psi]
};

struct Cache
{
    std::vector<CVec> ea_tau, ea_theta, ea_phi; // user paths
    std::vector<SlotCache> slots;
};

const CVec &interferer_pilot(const Observation &o, int k)
{
    return o.pilot_interferers[static_cast<size_t>(k)];
}

void refresh_user(Cache &c, const MpState &s, const std::vector<Observation> &obs, int l)
{
    const auto &d = s.dims;
    const auto L = static_cast<size_t>(l);
    c.ea_tau[L] = vm_expected_steering(d.N, s.tau[L]);
    c.ea_theta[L] = vm_expected_steering(d.M1, s.theta[L]);
    c.ea_phi[L] = vm_expected_steering(d.M2, s.phi[L]);
    const CVec b = kron(c.ea_theta[L], c.ea_phi[L]);
    for (size_t t = 0; t < obs.size(); ++t)
    {
        c.slots[t].B.col(l) = b;
        c.slots[t].S.col(l) = obs[t].pilot_user.cwiseProduct(c.ea_tau[L]);
    }
}

void refresh_interferer(Cache &c, const MpState &s, const std::vector<Observation> &obs, size_t t, int idx)
{
    const auto &d = s.dims;
    const int k = idx / s.L_bar_I;
    const auto &st = s.slots[t];
    const auto I = static_cast<size_t>(idx);
    const int col = s.L_bar + idx;
    c.slots[t].B.col(col) =
        kron(vm_expected_steering(d.M1, st.itheta[I]), vm_expected_steering(d.M2, st.iphi[I]));
    c.slots[t].S.col(col) = interferer_pilot(obs[t], k).cwiseProduct(vm_expected_steering(d.N, st.itau[I]));
}

Cache build_cache(const MpState &s, const std::vector<Observation> &obs)
{
    const auto &d = s.dims;
    const int C = s.columns();
    Cache c;
    c.ea_tau.resize(static_cast<size_t>(s.L_bar));
    c.ea_theta.resize(static_cast<size_t>(s.L_bar));
    c.ea_phi.resize(static_cast<size_t>(s.L_bar));
    c.slots.resize(obs.size());
    for (size_t t = 0; t < obs.size(); ++t)
    {
        auto &sc = c.slots[t];
        sc.B.resize(d.M(), C);
        sc.S.resize(d.N, C);
        sc.power.resize(C);
        const double pu = pilot_power(obs[t].pilot_user);
        for (int l = 0; l < s.L_bar; ++l)
            sc.power(l) = pu;
        for (int k = 0; k < s.K; ++k)
        {
            const double pi = pilot_power(interferer_pilot(obs[t], k));
            for (int i = 0; i < s.L_bar_I; ++i)
                sc.power(s.L_bar + k * s.L_bar_I + i) = pi;
        }
    }
    for (int l = 0; l < s.L_bar; ++l)
        refresh_user(c, s, obs, l);
    for (size_t t = 0; t < obs.size(); ++t)
        for (int i = 0; i < s.K * s.L_bar_I; ++i)
            refresh_interferer(c, s, obs, t, i);
    return c;
}

// E[Psi^H Psi] with exact diagonal and products of expected inner products off it.
CMat expected_gram(const SlotCache &sc)
{
    CMat G = (sc.B.adjoint() * sc.B).cwiseProduct(sc.S.adjoint() * sc.S);
    for (Eigen::Index i = 0; i < G.rows(); ++i)
        G(i, i) = sc.power(i);
    return G;
}

// Psi_hat^H y.
CVec matched(const SlotCache &sc, const CVec &y, const ArrayDims &d)
{
    const CMat T = as_matrix(y, d).transpose() * sc.S.conjugate(); // M x C
    CVec out(sc.B.cols());
    for (Eigen::Index c = 0; c < out.size(); ++c)
        out(c) = sc.B.col(c).dot(T.col(c));
    return out;
}

CVec column(const SlotCache &sc, Eigen::Index c)
{
    return kron(sc.B.col(c), sc.S.col(c));
}

// Residual seen by column `col` along the delay axis:
// R^T conj(b_col) - sum_{j != col} mu_j (b_col^H b_j) s_j.
CVec delay_residual(const SlotCache &sc, const CVec &y, const CVec &mu, const ArrayDims &d, int col)
{
    const CVec bc = sc.B.col(col);
    CVec coef = mu.cwiseProduct((sc.B.adjoint() * bc).conjugate());
    coef(col) = 0.0;
    return as_matrix(y, d) * bc.conjugate() - sc.S * coef;
}

// Residual seen by column `col` across the array:
// R conj(s_col) - sum_{j != col} mu_j (s_col^H s_j) b_j.
CVec array_residual(const SlotCache &sc, const CVec &y, const CVec &mu, const ArrayDims &d, int col)
{
    const CVec sc_col = sc.S.col(col);
    CVec coef = mu.cwiseProduct((sc.S.adjoint() * sc_col).conjugate());
    coef(col) = 0.0;
    return as_matrix(y, d).transpose() * sc_col.conjugate() - sc.B * coef;
}

// Coefficients of the azimuth (along = true) or zenith objective from an
// M-vector residual w, reshaped M1 x M2, and the expected steering of the
// other axis.
CVec fold_array(const CVec &w, const CVec &other, const ArrayDims &d, bool azimuth)
{
    CVec c = CVec::Zero(azimuth ? d.M1 : d.M2);
    for (int m1 = 0; m1 < d.M1; ++m1)
        for (int m2 = 0; m2 < d.M2; ++m2)
        {
            const cplx v = std::conj(w(m1 * d.M2 + m2));
            if (azimuth)
                c(m1) += v * other(m2);
            else
                c(m2) += v * other(m1);
        }
    return c;
}

VonMises fuse(const VonMises &prior, const LocalMax &lm, const VonMises &old, bool damp, double damping)
{
    const VonMises fresh = vm_multiply(prior, VonMises(lm.mu, lm.kappa));
    if (!damp || damping >= 1.0)
        return fresh;
    return VonMises::from_resultant(damping * fresh.resultant() + (1.0 - damping) * old.resultant());
}

double trig_value(const CVec &c, double w)
{
    double v = 0.0;
    for (Eigen::Index n = 0; n < c.size(); ++n)
        v += std::real(c(n) * std::polar(1.0, -static_cast<double>(n) * w));
    return v;
}
} // namespace

void MpConfig::validate() const
{
    if (L_bar < 1)
        throw std::invalid_argument("MpConfig: L_bar must be >= 1");
    if (L_bar_I < 1)
        throw std::invalid_argument("MpConfig: L_bar_I must be >= 1");
    if (max_iters < 1)
        throw std::invalid_argument("MpConfig: max_iters must be >= 1");
    if (!(init_kappa >= 0.0))
        throw std::invalid_argument("MpConfig: init_kappa must be non-negative");
    if (newton_steps < 0 || grid_oversample < 1)
        throw std::invalid_argument("MpConfig: newton_steps >= 0 and grid_oversample >= 1 required");
    if (!(damping > 0.0 && damping <= 1.0))
        throw std::invalid_argument("MpConfig: damping must lie in (0, 1]");
}

const CkmEntry &CkmTable::entry(int q) const
{
    for (const auto &e : grids)
        if (e.grid_q == q)
            return e;
    throw std::out_of_range("CkmTable: no record for grid " + std::to_string(q));
}

LocalMax maximize_trig(const CVec &c, double scale, int oversample, int newton_steps)
{
    const auto x = static_cast<int>(c.size());
    if (x < 1)
        throw std::invalid_argument("maximize_trig: empty coefficient vector");
    const int G = std::max(1, oversample) * x;

    std::vector<cplx> tw(static_cast<size_t>(G));
    for (int m = 0; m < G; ++m)
        tw[static_cast<size_t>(m)] = std::polar(1.0, -kTwoPi * m / G);

    int best = 0;
    double best_val = -std::numeric_limits<double>::infinity();
    for (int g = 0; g < G; ++g)
    {
        double v = 0.0;
        for (int n = 0; n < x; ++n)
            v += std::real(c(n) * tw[static_cast<size_t>((static_cast<long>(n) * g) % G)]);
        if (v > best_val)
        {
            best_val = v;
            best = g;
        }
    }

    auto derivs = [&](double w, double &d1, double &d2) {
        d1 = 0.0;
        d2 = 0.0;
        for (int n = 0; n < x; ++n)
        {
            const cplx e = c(n) * std::polar(1.0, -static_cast<double>(n) * w);
            d1 += n * std::imag(e);                        // Re(-i n e)
            d2 -= static_cast<double>(n) * n * std::real(e); // Re(-n^2 e)
        }
        d1 *= scale;
        d2 *= scale;
    };

    const double step = kTwoPi / G;
    double w = step * best;
    double d1 = 0.0, d2 = 0.0;
    for (int it = 0; it < newton_steps; ++it)
    {
        derivs(w, d1, d2);
        if (!(d2 < 0.0))
            break;
        const double delta = std::clamp(-d1 / d2, -0.5 * step, 0.5 * step);
        w += delta;
        if (std::abs(delta) < 1e-13)
            break;
    }
    derivs(w, d1, d2);

    LocalMax out;
    out.omega = wrap_2pi(w);
    if (d2 < 0.0 && std::isfinite(d2))
    {
        out.mu = wrap_2pi(w - d1 / d2);
        out.kappa = bessel_ratio_inv(std::exp(1.0 / (2.0 * d2)));
        return out;
    }

    // Discrete curvature around the grid maximum.
    out.fallback = true;
    const double w0 = step * best;
    const double fd = scale * (trig_value(c, w0 + step) - 2.0 * trig_value(c, w0) + trig_value(c, w0 - step)) /
                      (step * step);
    out.omega = wrap_2pi(w0);
    out.mu = out.omega;
    out.kappa = (fd < 0.0 && std::isfinite(fd)) ? bessel_ratio_inv(std::exp(1.0 / (2.0 * fd))) : 0.0;
    return out;
}

MpState init_state(const std::vector<Observation> &obs, const ArrayDims &dims, const MpConfig &cfg)
{
    cfg.validate();
    if (obs.empty())
        throw std::invalid_argument("init_state: no observations");
    const int q = obs.front().grid_q;
    for (const auto &o : obs)
    {
        if (o.grid_q != q)
            throw std::invalid_argument("init_state: observations span several grids");
        if (o.y.size() != dims.MN() || o.pilot_user.size() != dims.N)
            throw std::invalid_argument("init_state: observation size does not match the array");
        if (o.pilot_interferers.size() != obs.front().pilot_interferers.size())
            throw std::invalid_argument("init_state: interferer count differs between slots");
    }

    MpState s;
    s.dims = dims;
    s.K = cfg.cancel_interference ? static_cast<int>(obs.front().pilot_interferers.size()) : 0;
    s.L_bar = cfg.L_bar;
    s.L_bar_I = cfg.L_bar_I;
    const auto L = static_cast<size_t>(s.L_bar);
    const auto KI = static_cast<size_t>(s.K * s.L_bar_I);
    const double kappa0 = cfg.init_kappa;

    s.prior_tau.assign(L, VonMises::uniform());
    s.prior_theta.assign(L, VonMises::uniform());
    s.prior_phi.assign(L, VonMises::uniform());
    s.slots.resize(obs.size());

    if (cfg.init == InitMode::random)
    {
        auto rng = substream(cfg.seed, kInitStream, static_cast<std::uint64_t>(q));
        std::uniform_real_distribution<double> ang(0.0, kTwoPi);
        auto draw = [&] { return VonMises(ang(rng), kappa0); };
        for (size_t l = 0; l < L; ++l)
        {
            s.tau.push_back(draw());
            s.theta.push_back(draw());
            s.phi.push_back(draw());
        }
        for (auto &st : s.slots)
            for (size_t i = 0; i < KI; ++i)
            {
                st.itau.push_back(draw());
                st.itheta.push_back(draw());
                st.iphi.push_back(draw());
            }
    }
    else
    {
        std::vector<CVec> ys, pilots;
        for (const auto &o : obs)
        {
            ys.push_back(o.y);
            pilots.push_back(o.pilot_user);
        }
        const GreedyResult user = greedy_select(dims, ys, pilots, s.L_bar, cfg.grid_oversample, 1);
        for (const auto &p : user.params)
        {
            s.tau.emplace_back(p.tau, kappa0);
            s.theta.emplace_back(p.theta, kappa0);
            s.phi.emplace_back(p.phi, kappa0);
        }
        for (size_t t = 0; t < obs.size(); ++t)
        {
            CVec r = obs[t].y - atoms(dims, user.params, obs[t].pilot_user) * user.gains[t];
            for (int k = 0; k < s.K; ++k)
            {
                const CVec &x = interferer_pilot(obs[t], k);
                const GreedyResult g = greedy_select(dims, {r}, {x}, s.L_bar_I, cfg.grid_oversample, 1);
                for (const auto &p : g.params)
                {
                    s.slots[t].itau.emplace_back(p.tau, kappa0);
                    s.slots[t].itheta.emplace_back(p.theta, kappa0);
                    s.slots[t].iphi.emplace_back(p.phi, kappa0);
                }
                r -= atoms(dims, g.params, x) * g.gains.front();
            }
        }
    }

    const int C = s.columns();
    s.rho_bar = RVec::Constant(s.L_bar, 1.0 / s.L_bar);
    s.rho_I = 1.0 / s.L_bar_I;
    s.lambda = 1.0;

    double energy = 0.0;
    for (const auto &o : obs)
        energy += o.y.squaredNorm();
    s.gamma = energy / (static_cast<double>(dims.MN()) * static_cast<double>(obs.size()));
    s.gamma_init = s.gamma;

    const Cache cache = build_cache(s, obs);
    for (size_t t = 0; t < obs.size(); ++t)
    {
        auto &st = s.slots[t];
        CMat Psi(dims.MN(), C);
        for (int c = 0; c < C; ++c)
            Psi.col(c) = column(cache.slots[t], c);
        st.mu = least_squares(Psi, obs[t].y);
        st.prior_mean = CVec::Zero(C);
        st.prior_var.resize(C);
        st.prior_var.head(s.L_bar) = s.rho_bar;
        st.prior_var.tail(C - s.L_bar).setConstant(s.rho_I);
        st.var = st.prior_var;
        st.fy_mean = CVec::Zero(C);
        st.fy_var = st.prior_var;
        st.lambda_post.assign(static_cast<size_t>(s.K), 1.0);
    }
    s.diag.initial_residual = residual_energy(s, obs);
    return s;
}

void update_delay_angle(MpState &s, const std::vector<Observation> &obs, const MpConfig &cfg)
{
    const auto &d = s.dims;
    Cache cache = build_cache(s, obs);
    const bool damp = s.iteration > 0;
    const double scale_n = 2.0 / (s.gamma * std::sqrt(static_cast<double>(d.N)));
    const double scale_1 = 2.0 / (s.gamma * std::sqrt(static_cast<double>(d.M1)));
    const double scale_2 = 2.0 / (s.gamma * std::sqrt(static_cast<double>(d.M2)));

    auto record = [&](const LocalMax &lm) {
        if (lm.fallback)
            ++s.diag.newton_fallbacks;
    };

    for (int l = 0; l < s.L_bar; ++l)
    {
        const auto L = static_cast<size_t>(l);

        CVec c = CVec::Zero(d.N);
        for (size_t t = 0; t < obs.size(); ++t)
        {
            const CVec z = delay_residual(cache.slots[t], obs[t].y, s.slots[t].mu, d, l);
            c += z.conjugate().cwiseProduct(s.slots[t].mu(l) * obs[t].pilot_user);
        }
        LocalMax lm = maximize_trig(c, scale_n, cfg.grid_oversample, cfg.newton_steps);
        record(lm);
        s.tau[L] = fuse(s.prior_tau[L], lm, s.tau[L], damp, cfg.damping);
        refresh_user(cache, s, obs, l);

        std::vector<CVec> w(obs.size());
        CVec c1 = CVec::Zero(d.M1);
        for (size_t t = 0; t < obs.size(); ++t)
        {
            w[t] = array_residual(cache.slots[t], obs[t].y, s.slots[t].mu, d, l);
            c1 += s.slots[t].mu(l) * fold_array(w[t], cache.ea_phi[L], d, true);
        }
        lm = maximize_trig(c1, scale_1, cfg.grid_oversample, cfg.newton_steps);
        record(lm);
        s.theta[L] = fuse(s.prior_theta[L], lm, s.theta[L], damp, cfg.damping);
        refresh_user(cache, s, obs, l);

        CVec c2 = CVec::Zero(d.M2);
        for (size_t t = 0; t < obs.size(); ++t)
            c2 += s.slots[t].mu(l) * fold_array(w[t], cache.ea_theta[L], d, false);
        lm = maximize_trig(c2, scale_2, cfg.grid_oversample, cfg.newton_steps);
        record(lm);
        s.phi[L] = fuse(s.prior_phi[L], lm, s.phi[L], damp, cfg.damping);
        refresh_user(cache, s, obs, l);
    }

    // Interferer parameters: single-slot versions of the same updates.
    const VonMises flat = VonMises::uniform();
    for (size_t t = 0; t < obs.size(); ++t)
    {
        auto &st = s.slots[t];
        auto &sc = cache.slots[t];
        for (int idx = 0; idx < s.K * s.L_bar_I; ++idx)
        {
            const auto I = static_cast<size_t>(idx);
            const int col = s.L_bar + idx;
            const CVec &x = interferer_pilot(obs[t], idx / s.L_bar_I);

            const CVec z = delay_residual(sc, obs[t].y, st.mu, d, col);
            LocalMax lm = maximize_trig(z.conjugate().cwiseProduct(st.mu(col) * x), scale_n, cfg.grid_oversample,
                                        cfg.newton_steps);
            record(lm);
            st.itau[I] = fuse(flat, lm, st.itau[I], damp, cfg.damping);
            refresh_interferer(cache, s, obs, t, idx);

            const CVec w = array_residual(sc, obs[t].y, st.mu, d, col);
            const CVec eph = vm_expected_steering(d.M2, st.iphi[I]);
            lm = maximize_trig(st.mu(col) * fold_array(w, eph, d, true), scale_1, cfg.grid_oversample,
                               cfg.newton_steps);
            record(lm);
            st.itheta[I] = fuse(flat, lm, st.itheta[I], damp, cfg.damping);

            const CVec eth = vm_expected_steering(d.M1, st.itheta[I]);
            lm = maximize_trig(st.mu(col) * fold_array(w, eth, d, false), scale_2, cfg.grid_oversample,
                               cfg.newton_steps);
            record(lm);
            st.iphi[I] = fuse(flat, lm, st.iphi[I], damp, cfg.damping);
            refresh_interferer(cache, s, obs, t, idx);
        }
    }
}

void update_gains(MpState &s, const std::vector<Observation> &obs)
{
    const Cache cache = build_cache(s, obs);
    const int C = s.columns();
    for (size_t t = 0; t < obs.size(); ++t)
    {
        auto &st = s.slots[t];
        const auto &sc = cache.slots[t];
        st.prior_var.head(s.L_bar) = s.rho_bar;
        st.prior_mean.head(s.L_bar).setZero();

        const RVec prec = st.prior_var.cwiseInverse();
        CMat J = expected_gram(sc) / s.gamma;
        J.diagonal() += prec.cast<cplx>();
        const CVec rhs = prec.cast<cplx>().cwiseProduct(st.prior_mean) + matched(sc, obs[t].y, s.dims) / s.gamma;

        Eigen::LLT<CMat> llt(J);
        if (llt.info() != Eigen::Success)
        {
            ++s.diag.ridge_events;
            J.diagonal().array() += 1e-10 * J.trace().real();
            llt.compute(J);
        }
        const CMat Sigma = llt.solve(CMat::Identity(C, C));
        st.mu = Sigma * rhs;
        st.var = Sigma.diagonal().real().cwiseMax(1e-300);

        // Extrinsic messages towards the interferer gains.
        for (int c = s.L_bar; c < C; ++c)
        {
            const double p = 1.0 / st.var(c) - 1.0 / st.prior_var(c);
            if (p > 0.0 && std::isfinite(p))
            {
                st.fy_var(c) = 1.0 / p;
                st.fy_mean(c) = st.fy_var(c) * (st.mu(c) / st.var(c) - st.prior_mean(c) / st.prior_var(c));
            }
            else
            {
                ++s.diag.variance_clamps;
                st.fy_var(c) = 1e8 * s.rho_I;
                st.fy_mean(c) = st.mu(c);
            }
        }
    }
}

void update_interference(MpState &s, const std::vector<Observation> &obs)
{
    if (s.K == 0)
        return;
    (void)obs;
    const double slab = s.rho_I;
    for (auto &st : s.slots)
    {
        for (int k = 0; k < s.K; ++k)
        {
            const int base = s.L_bar + k * s.L_bar_I;
            double lp = s.lambda;
            if (s.lambda > 0.0 && s.lambda < 1.0)
            {
                // log CN(0; m, v) - log CN(0; m, v + slab), summed over paths.
                double diff = 0.0;
                for (int i = 0; i < s.L_bar_I; ++i)
                {
                    const double v = st.fy_var(base + i);
                    const double m2 = std::norm(st.fy_mean(base + i));
                    diff += -std::log(v) - m2 / v + std::log(v + slab) + m2 / (v + slab);
                }
                const double log_odds = std::log1p(-s.lambda) - std::log(s.lambda) + diff;
                lp = 1.0 / (1.0 + std::exp(log_odds));
                if (std::isnan(log_odds))
                {
                    ++s.diag.odds_underflows;
                    lp = s.lambda;
                }
            }
            st.lambda_post[static_cast<size_t>(k)] = lp;

            for (int i = 0; i < s.L_bar_I; ++i)
            {
                const int c = base + i;
                const double v = st.fy_var(c);
                const cplx m = st.fy_mean(c);
                const double Lam = 1.0 / (1.0 / v + 1.0 / slab);
                const cplx eta = Lam * m / v;
                const cplx mf = lp * eta;
                const double vf = std::max(lp * (std::norm(eta) + Lam) - std::norm(mf), 1e-12 * slab);

                const double p = 1.0 / vf - 1.0 / v;
                if (p > 0.0 && std::isfinite(p))
                {
                    st.prior_var(c) = 1.0 / p;
                    st.prior_mean(c) = st.prior_var(c) * (mf / vf - m / v);
                }
                else
                {
                    ++s.diag.variance_clamps;
                    st.prior_var(c) = 1e8 * slab;
                    st.prior_mean(c) = mf;
                }
            }
        }
    }
}

void em_update(MpState &s, const std::vector<Observation> &obs)
{
    const Cache cache = build_cache(s, obs);
    const auto &d = s.dims;
    const double T = static_cast<double>(obs.size());

    double acc = 0.0;
    for (size_t t = 0; t < obs.size(); ++t)
    {
        const auto &st = s.slots[t];
        const CMat G = expected_gram(cache.slots[t]);
        const CVec rhs = matched(cache.slots[t], obs[t].y, d);
        const double quad = std::real(st.mu.dot(G * st.mu));
        const double spread = st.var.dot(G.diagonal().real());
        acc += obs[t].y.squaredNorm() - 2.0 * std::real(rhs.dot(st.mu)) + quad + spread;
    }
    const double g = acc / (static_cast<double>(d.MN()) * T);
    if (g > 0.0 && std::isfinite(g))
        s.gamma = g;
    else
    {
        ++s.diag.gamma_clamps;
        s.gamma = 1e-12 * s.gamma_init;
    }
    s.gamma = std::max(s.gamma, 1e-12 * s.gamma_init);

    for (int l = 0; l < s.L_bar; ++l)
    {
        double r = 0.0;
        for (const auto &st : s.slots)
            r += std::norm(st.mu(l)) + st.var(l);
        s.rho_bar(l) = std::max(r / T, 1e-300);
    }

    if (s.K > 0)
    {
        double num = 0.0, den = 0.0, lsum = 0.0;
        for (const auto &st : s.slots)
            for (int k = 0; k < s.K; ++k)
            {
                const double lp = st.lambda_post[static_cast<size_t>(k)];
                double e = 0.0;
                for (int i = 0; i < s.L_bar_I; ++i)
                {
                    const int c = s.L_bar + k * s.L_bar_I + i;
                    e += std::norm(st.mu(c)) + st.var(c);
                }
                num += lp * e / s.L_bar_I;
                den += lp;
                lsum += lp;
            }
        if (den > 0.0)
            s.rho_I = std::max(num / den, 1e-300);
        s.lambda = (s.iteration == 0) ? 0.5 : std::clamp(lsum / (T * s.K), 0.0, 1.0);
    }
    ++s.iteration;
}

double residual_energy(const MpState &s, const std::vector<Observation> &obs)
{
    const Cache cache = build_cache(s, obs);
    double e = 0.0;
    for (size_t t = 0; t < obs.size(); ++t)
    {
        CVec r = obs[t].y;
        for (int c = 0; c < s.columns(); ++c)
            r -= s.slots[t].mu(c) * column(cache.slots[t], c);
        e += r.squaredNorm();
    }
    return e;
}

CkmEntry state_to_entry(const MpState &s, int grid_q)
{
    CkmEntry e;
    e.grid_q = grid_q;
    for (int l = 0; l < s.L_bar; ++l)
    {
        const auto L = static_cast<size_t>(l);
        const SteeringParams p = SteeringParams{s.tau[L].mu(), s.theta[L].mu(), s.phi[L].mu()}.reduced();
        e.paths.push_back(CkmPath{p.tau, p.theta, p.phi, s.rho_bar(l)});
    }
    std::stable_sort(e.paths.begin(), e.paths.end(), [](const CkmPath &a, const CkmPath &b) { return a.rho > b.rho; });
    return e;
}

ConstructResult construct_ckm(const std::vector<Observation> &obs, const ArrayDims &dims, const MpConfig &cfg)
{
    MpState s = init_state(obs, dims, cfg);
    using clock = std::chrono::steady_clock;
    for (int it = 0; it < cfg.max_iters; ++it)
    {
        const auto t0 = clock::now();
        update_delay_angle(s, obs, cfg);
        update_gains(s, obs);
        update_interference(s, obs);
        em_update(s, obs);
        s.diag.iteration_seconds.push_back(std::chrono::duration<double>(clock::now() - t0).count());
        s.diag.residual.push_back(residual_energy(s, obs));
        s.diag.gamma.push_back(s.gamma);
        if (s.K > 0)
            s.diag.lambda.push_back(s.lambda);
    }
    for (int k = 0; k < s.K; ++k)
    {
        double a = 0.0;
        for (const auto &st : s.slots)
            a += st.lambda_post[static_cast<size_t>(k)];
        s.diag.activity.push_back(a / static_cast<double>(s.slots.size()));
    }
    ConstructResult r;
    r.entry = state_to_entry(s, obs.front().grid_q);
    r.diag = std::move(s.diag);
    r.iterations = s.iteration;
    return r;
}

ConstructResult ici_non_cognitive_ckm(const std::vector<Observation> &obs, const ArrayDims &dims, MpConfig cfg)
{
    cfg.cancel_interference = false;
    return construct_ckm(obs, dims, cfg);
}

CMat ckm_dictionary(const CkmEntry &e, const ArrayDims &dims)
{
    CMat A(dims.MN(), static_cast<Eigen::Index>(e.paths.size()));
    for (size_t l = 0; l < e.paths.size(); ++l)
    {
        const auto &p = e.paths[l];
        A.col(static_cast<Eigen::Index>(l)) =
            kron(ura_steering(dims.M1, dims.M2, p.theta, p.phi), steering(dims.N, p.tau));
    }
    return A;
}

double ckm_accuracy(const CkmEntry &e, const ArrayDims &dims, const std::vector<CVec> &channels)
{
    return projection_residual_db(ckm_dictionary(e, dims), channels);
}

} // namespace ckm
