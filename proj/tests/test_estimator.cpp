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

#include "ckm/estimator.hpp"
#include "oracles.hpp"

#include <catch_amalgamated.hpp>

#include <chrono>

using namespace ckm;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace
{
CkmEntry random_entry(int L, std::mt19937_64 &rng, bool on_grid_delays = false, int N = 0)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    CkmEntry e;
    for (int l = 0; l < L; ++l)
    {
        CkmPath p;
        p.tau = on_grid_delays ? kTwoPi * (1 + 2 * l) / N : kTwoPi * u(rng);
        p.theta = -kPi + kTwoPi * u(rng);
        p.phi = -kPi + kTwoPi * u(rng);
        p.rho = 0.1 + u(rng);
        e.paths.push_back(p);
    }
    return e;
}

CVec white(int n, double var, std::mt19937_64 &rng)
{
    std::normal_distribution<double> g(0.0, std::sqrt(var / 2.0));
    CVec v(n);
    for (int i = 0; i < n; ++i)
        v(i) = cplx(g(rng), g(rng));
    return v;
}

// h drawn from the CKM prior: sum_l sqrt(rho_l) g_l A_l.
CVec draw_channel(const CovFactors &cov, std::mt19937_64 &rng)
{
    const CMat A = cov.dense_A();
    CVec h = CVec::Zero(A.rows());
    for (int l = 0; l < cov.paths(); ++l)
        h += std::sqrt(cov.sigma(l)) * white(1, 1.0, rng)(0) * A.col(l);
    return h;
}
} // namespace

TEST_CASE("build_cov: factors, trace and layout", "[estimator][oracle]")
{
    std::mt19937_64 rng(1);
    const ArrayDims d{2, 3, 8};
    const CkmEntry e = random_entry(4, rng);
    const CovFactors cov = build_cov(e, d);
    REQUIRE(cov.paths() == 4);
    CHECK(cov.B.rows() == 6);
    CHECK(cov.Af.rows() == 8);

    const CMat A = cov.dense_A();
    const CMat C = A * cov.sigma.cast<cplx>().asDiagonal() * A.adjoint();
    double rho_sum = 0.0;
    for (const auto &p : e.paths)
        rho_sum += p.rho;
    CHECK_THAT(C.trace().real(), WithinRel(rho_sum, 1e-12));

    std::vector<oracle::RawPath> raw;
    for (const auto &p : e.paths)
        raw.push_back({1.0, p.tau, p.theta, p.phi});
    for (int l = 0; l < 4; ++l)
    {
        CVec unit = CVec::Zero(4);
        unit(l) = 1.0;
        const CVec ref = oracle::channel_triple_sum(raw, unit, d.M1, d.M2, d.N);
        CHECK((A.col(l) - ref).norm() < 1e-12);
        CHECK_THAT(cov.sigma(l), WithinRel(e.paths[static_cast<size_t>(l)].rho, 1e-15));
    }

    // Single path: rank one.
    CkmEntry one;
    one.paths.push_back(e.paths[0]);
    const CovFactors c1 = build_cov(one, d);
    const CMat A1 = c1.dense_A();
    const CMat C1 = A1 * c1.sigma.cast<cplx>().asDiagonal() * A1.adjoint();
    Eigen::SelfAdjointEigenSolver<CMat> es(C1);
    CHECK(es.eigenvalues().head(d.MN() - 1).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THAT(es.eigenvalues()(d.MN() - 1), WithinRel(e.paths[0].rho, 1e-12));
}

TEST_CASE("delay_domain and ckm_pdp against direct sums", "[estimator][oracle]")
{
    std::mt19937_64 rng(2);
    const ArrayDims d{2, 2, 12};
    const CVec r = white(d.MN(), 1.0, rng);
    const CMat Z = delay_domain(r, d);
    REQUIRE(Z.rows() == d.M());
    REQUIRE(Z.cols() == d.N);
    for (int m = 0; m < d.M(); ++m)
        for (int j = 0; j < d.N; ++j)
        {
            cplx acc = 0.0;
            for (int n = 0; n < d.N; ++n)
                acc += r(m * d.N + n) * std::exp(cplx(0.0, kTwoPi * n * j / d.N));
            CHECK(std::abs(Z(m, j) - acc / std::sqrt(12.0)) < 1e-12);
        }

    const CkmEntry e = random_entry(3, rng);
    const RVec pdp = ckm_pdp(e, d.N, d.M());
    REQUIRE(pdp.size() == d.N);
    for (int j = 0; j < d.N; ++j)
    {
        double ref = 0.0;
        for (const auto &p : e.paths)
        {
            cplx acc = 0.0;
            for (int n = 0; n < d.N; ++n)
                acc += std::exp(cplx(0.0, kTwoPi * n * j / d.N - n * p.tau));
            ref += p.rho / d.M() * std::norm(acc) / (12.0 * 12.0);
        }
        CHECK_THAT(pdp(j), WithinRel(ref, 1e-10));
    }
    // Energy conservation of the unitary transform.
    double rho_sum = 0.0;
    for (const auto &p : e.paths)
        rho_sum += p.rho;
    CHECK_THAT(pdp.sum() * d.M(), WithinRel(rho_sum, 1e-12));
}

TEST_CASE("mmse_irc_full matches the Gauss-Markov estimate", "[estimator][oracle]")
{
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial)
    {
        const ArrayDims d{2, 2, 6};
        const CovFactors cov = build_cov(random_entry(1 + trial % 4, rng), d);
        const CMat Q = oracle::random_hpd(d.M(), rng);
        const CVec r = white(d.MN(), 1.0, rng);
        const CVec got = mmse_irc_full(r, cov.dense_A(), cov.sigma, Q);
        const CVec ref = oracle::gauss_markov(r, cov.dense_A(), cov.sigma, Q);
        CHECK((got - ref).norm() < 1e-10 * std::max(1.0, ref.norm()));
    }
}

TEST_CASE("mmse_irc_fast matches the dense estimator", "[estimator][property]")
{
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> um(1, 3), un(2, 16), ul(1, 6);
    for (int trial = 0; trial < 100; ++trial)
    {
        const ArrayDims d{um(rng), um(rng), un(rng)};
        const CovFactors cov = build_cov(random_entry(ul(rng), rng), d);
        const CMat Q = oracle::random_hpd(d.M(), rng);
        const CVec r = draw_channel(cov, rng) + white(d.MN(), 0.3, rng);
        const CVec full = mmse_irc_full(r, cov.dense_A(), cov.sigma, Q);
        const CVec fast = mmse_irc_fast(r, cov, Q);
        INFO("trial " << trial);
        CHECK((full - fast).norm() <= 1e-8 * full.norm());
    }
}

TEST_CASE("mmse_irc_fast: empty and zero-power CKM records", "[estimator]")
{
    std::mt19937_64 rng(5);
    const ArrayDims d{2, 2, 8};
    const CMat Q = CMat::Identity(4, 4);
    const CVec r = white(d.MN(), 1.0, rng);
    CHECK(mmse_irc_fast(r, build_cov(CkmEntry{}, d), Q).norm() == 0.0);
    CHECK(mmse_irc_full(r, CMat(d.MN(), 0), RVec(0), Q).norm() == 0.0);

    CkmEntry e = random_entry(3, rng);
    const CVec base = mmse_irc_fast(r, build_cov(e, d), Q);
    CkmPath dead = e.paths[0];
    dead.rho = 0.0;
    dead.tau += 0.3;
    e.paths.push_back(dead);
    const CVec with_dead = mmse_irc_fast(r, build_cov(e, d), Q);
    CHECK((base - with_dead).norm() < 1e-12 * base.norm());
}

TEST_CASE("mmse_irc_full refuses oversized problems", "[estimator]")
{
    const ArrayDims d{4, 4, 64};
    std::mt19937_64 rng(6);
    const CovFactors cov = build_cov(random_entry(2, rng), d);
    CHECK_THROWS_AS(mmse_irc_full(CVec::Zero(d.MN()), cov.dense_A(), cov.sigma, CMat::Identity(16, 16), 512),
                    std::invalid_argument);
}

TEST_CASE("noiseless estimation error equals the CKM accuracy", "[estimator][property]")
{
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial)
    {
        const ArrayDims d{2, 2, 16};
        const CkmEntry e = random_entry(4, rng);
        const CovFactors cov = build_cov(e, d);
        // Channels partly outside the span of the CKM atoms.
        std::vector<CVec> hs;
        std::vector<CVec> est;
        const CovFactors extra = build_cov(random_entry(2, rng), d);
        for (int t = 0; t < 5; ++t)
        {
            hs.push_back(draw_channel(cov, rng) + 0.3 * draw_channel(extra, rng));
            est.push_back(mmse_irc_fast(hs.back(), cov, 1e-13 * CMat::Identity(d.M(), d.M())));
        }
        double mse = 0.0;
        for (size_t t = 0; t < hs.size(); ++t)
            mse += (est[t] - hs[t]).squaredNorm() / d.MN();
        mse /= static_cast<double>(hs.size());
        INFO("trial " << trial);
        CHECK_THAT(10.0 * std::log10(mse), WithinAbs(ckm_accuracy(e, d, hs), 1e-6));
        CHECK_THAT(ls_lower_bound(hs, cov.dense_A()), WithinAbs(ckm_accuracy(e, d, hs), 1e-9));
    }
}

TEST_CASE("interference covariance: Hermitian, PSD and loaded", "[estimator][property]")
{
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 50; ++trial)
    {
        const ArrayDims d{2, 2, 32};
        const CkmEntry e = random_entry(3, rng);
        const CVec r = draw_channel(build_cov(e, d), rng) + white(d.MN(), 0.1, rng);
        const InterferenceCov ic = estimate_interference_cov(r, e, d);
        CHECK((ic.Q - ic.Q.adjoint()).norm() == 0.0);
        Eigen::SelfAdjointEigenSolver<CMat> es(ic.Q);
        CHECK(es.eigenvalues().minCoeff() > 0.0);
        CHECK_FALSE(ic.taps.empty());
        CHECK(std::is_sorted(ic.taps.begin(), ic.taps.end()));
    }
}

TEST_CASE("interference covariance of white noise is unbiased", "[estimator][montecarlo]")
{
    std::mt19937_64 rng(9);
    const ArrayDims d{2, 2, 64};
    const CkmEntry e = random_entry(3, rng);
    const double var = 0.25;
    CMat mean = CMat::Zero(4, 4);
    const int slots = 200;
    for (int t = 0; t < slots; ++t)
        mean += estimate_interference_cov(white(d.MN(), var, rng), e, d).Q / static_cast<double>(slots);
    CHECK((mean - var * CMat::Identity(4, 4)).norm() < 0.1 * var * 2.0);
}

TEST_CASE("interference covariance ignores user energy on CKM taps", "[estimator]")
{
    std::mt19937_64 rng(10);
    const ArrayDims d{2, 2, 32};
    // On-grid delays in the lower half: the user's energy sits on a few taps
    // away from the noise-floor reference.
    const CkmEntry e = random_entry(3, rng, true, d.N);
    const CVec noise = white(d.MN(), 0.05, rng);
    const CVec h = 10.0 * draw_channel(build_cov(e, d), rng);
    const InterferenceCov a = estimate_interference_cov(noise, e, d);
    const InterferenceCov b = estimate_interference_cov(noise + h, e, d);
    CHECK(a.taps == b.taps);
    CHECK((a.Q - b.Q).norm() < 1e-10 * a.Q.norm());
    for (int j : a.taps)
        for (const auto &p : e.paths)
            CHECK(std::abs(circ_diff(kTwoPi * j / d.N, p.tau)) > 1e-9);
}

TEST_CASE("interference covariance finds a directional interferer", "[estimator]")
{
    std::mt19937_64 rng(11);
    const ArrayDims d{4, 4, 64};
    const CkmEntry e = random_entry(2, rng);
    const CVec b = ura_steering(4, 4, 0.7, -1.1);
    CVec r = draw_channel(build_cov(e, d), rng) + white(d.MN(), 0.01, rng);
    const CVec s = white(d.N, 1.0, rng);
    r += kron(b, s);
    const InterferenceCov ic = estimate_interference_cov(r, e, d);
    Eigen::SelfAdjointEigenSolver<CMat> es(ic.Q);
    const CVec top = es.eigenvectors().col(d.M() - 1);
    CHECK(std::abs(top.dot(b)) > 0.99);
    CHECK(es.eigenvalues()(d.M() - 1) > 20.0 * es.eigenvalues()(d.M() - 2));
}

TEST_CASE("estimation error decreases with SINR", "[estimator][property]")
{
    std::mt19937_64 rng(12);
    const ArrayDims d{2, 2, 32};
    const CkmEntry e = random_entry(3, rng);
    const CovFactors cov = build_cov(e, d);
    std::vector<CVec> hs, ns;
    for (int t = 0; t < 50; ++t)
    {
        hs.push_back(draw_channel(cov, rng));
        ns.push_back(white(d.MN(), 1.0, rng));
    }
    double prev = std::numeric_limits<double>::infinity();
    for (double sinr : {-10.0, -5.0, 0.0, 5.0, 10.0, 20.0})
    {
        const double v = std::pow(10.0, -sinr / 10.0) * cov.sigma.sum() / d.M();
        std::vector<CVec> est;
        for (size_t t = 0; t < hs.size(); ++t)
            est.push_back(mmse_irc_fast(hs[t] + std::sqrt(v) * ns[t], cov, v * CMat::Identity(d.M(), d.M())));
        const double nmse = nmse_db(est, hs);
        INFO("sinr " << sinr);
        CHECK(nmse < prev);
        prev = nmse;
    }
}

TEST_CASE("nmse_db against a direct average", "[estimator][oracle]")
{
    std::mt19937_64 rng(13);
    std::vector<CVec> a, b;
    double acc = 0.0;
    for (int t = 0; t < 7; ++t)
    {
        b.push_back(white(10, 1.0, rng));
        a.push_back(b.back() + white(10, 0.01 * (t + 1), rng));
        double num = 0.0, den = 0.0;
        for (int i = 0; i < 10; ++i)
        {
            num += std::norm(a.back()(i) - b.back()(i));
            den += std::norm(b.back()(i));
        }
        acc += num / den;
    }
    CHECK_THAT(nmse_db(a, b), WithinAbs(10.0 * std::log10(acc / 7.0), 1e-12));
    CHECK_THROWS(nmse_db({}, {}));
}

TEST_CASE("fast path is at least ten times faster than the dense path", "[estimator][timing]")
{
    std::mt19937_64 rng(14);
    const ArrayDims d{4, 2, 128};
    const CovFactors cov = build_cov(random_entry(8, rng), d);
    const CMat Q = oracle::random_hpd(d.M(), rng);
    const CVec r = draw_channel(cov, rng) + white(d.MN(), 0.1, rng);
    const CMat A = cov.dense_A();

    using clock = std::chrono::steady_clock;
    auto t0 = clock::now();
    const CVec full = mmse_irc_full(r, A, cov.sigma, Q);
    const double t_full = std::chrono::duration<double>(clock::now() - t0).count();
    t0 = clock::now();
    CVec fast;
    for (int i = 0; i < 10; ++i)
        fast = mmse_irc_fast(r, cov, Q);
    const double t_fast = std::chrono::duration<double>(clock::now() - t0).count() / 10.0;
    CHECK((full - fast).norm() < 1e-8 * full.norm());
    CHECK(t_full >= 10.0 * t_fast);
}
