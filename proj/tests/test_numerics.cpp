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

#include "ckm/numerics.hpp"
#include "oracles.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace ckm;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("steering: closed-form cases", "[numerics]")
{
    const CVec a = steering(4, 0.0);
    for (int n = 0; n < 4; ++n)
        CHECK(std::abs(a(n) - cplx(0.5, 0.0)) < 1e-15);

    const CVec b = steering(2, kPi);
    CHECK(std::abs(b(0) - cplx(1.0 / std::sqrt(2.0), 0.0)) < 1e-15);
    CHECK(std::abs(b(1) - cplx(-1.0 / std::sqrt(2.0), 0.0)) < 1e-15);

    const CVec c = steering(8, 0.7);
    for (int n = 0; n < 8; ++n)
        CHECK(std::abs(c(n) - std::exp(cplx(0.0, -0.7 * n)) / std::sqrt(8.0)) < 1e-15);

    CHECK_THROWS_AS(steering(0, 0.1), std::invalid_argument);
}

TEST_CASE("steering: unit norm for random lengths and frequencies", "[numerics][property]")
{
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> len(1, 300);
    std::uniform_real_distribution<double> w(-50.0, 50.0);
    for (int i = 0; i < 500; ++i)
        CHECK_THAT(steering(len(rng), w(rng)).norm(), WithinAbs(1.0, 1e-12));
}

TEST_CASE("wrap helpers reduce to principal intervals", "[numerics]")
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> w(-100.0, 100.0);
    for (int i = 0; i < 1000; ++i)
    {
        const double x = w(rng);
        const double a = wrap_2pi(x), b = wrap_pi(x);
        CHECK(a >= 0.0);
        CHECK(a < kTwoPi);
        CHECK(b >= -kPi);
        CHECK(b < kPi);
        CHECK(std::abs(std::remainder(a - x, kTwoPi)) < 1e-9);
        CHECK(std::abs(std::remainder(b - x, kTwoPi)) < 1e-9);
    }
}

TEST_CASE("VonMises stores a reduced mean and rejects negative kappa", "[numerics]")
{
    const VonMises d(-1.0, 2.0);
    CHECK_THAT(d.mu(), WithinAbs(kTwoPi - 1.0, 1e-15));
    CHECK_THROWS_AS(VonMises(0.0, -1.0), std::invalid_argument);
    const VonMises u = VonMises::uniform();
    CHECK(u.kappa() == 0.0);
}

TEST_CASE("bessel_ratio against the power-series oracle", "[numerics][oracle]")
{
    CHECK(bessel_ratio(0.0) == 0.0);
    CHECK(bessel_ratio(1e6) >= 0.9999);
    CHECK_THAT(bessel_ratio(2.0), WithinRel(oracle::bessel_i(1, 2.0) / oracle::bessel_i(0, 2.0), 1e-12));
    CHECK_THAT(bessel_ratio(2.0), WithinAbs(0.697775, 1e-6));

    for (double k : {0.01, 0.3, 1.0, 4.5, 10.0, 27.0, 49.0, 80.0, 150.0, 300.0})
    {
        const auto r = bessel_ratios(12, k);
        const double i0 = oracle::bessel_i(0, k);
        for (int n = 0; n < 12; ++n)
            CHECK_THAT(r[static_cast<size_t>(n)], WithinAbs(oracle::bessel_i(n, k) / i0, 1e-11));
    }
}

TEST_CASE("bessel ratios stay finite and ordered for huge kappa", "[numerics]")
{
    for (double k : {1e3, 1e5, 1e8, 1e12})
    {
        const auto r = bessel_ratios(200, k);
        CHECK(r[0] == 1.0);
        for (size_t n = 1; n < r.size(); ++n)
        {
            CHECK(std::isfinite(r[n]));
            CHECK(r[n] <= r[n - 1]);
            CHECK(r[n] >= 0.0);
        }
    }
}

TEST_CASE("bessel_ratio is strictly increasing on [0, 500]", "[numerics][property]")
{
    double prev = -1.0;
    for (int i = 0; i < 100; ++i)
    {
        const double v = bessel_ratio(500.0 * i / 99.0);
        CHECK(v > prev);
        prev = v;
    }
}

TEST_CASE("bessel_ratio_inv round trip and clamping", "[numerics]")
{
    CHECK(bessel_ratio_inv(0.0) == 0.0);
    CHECK(bessel_ratio_inv(-0.3) == 0.0);
    CHECK_THAT(bessel_ratio_inv(bessel_ratio(5.0)), WithinAbs(5.0, 1e-6));
    for (double r : {0.999999999, 1.0, 3.0})
    {
        const double k = bessel_ratio_inv(r);
        CHECK(std::isfinite(k));
        CHECK(k > 1e6);
    }
    for (int i = 0; i <= 200; ++i)
    {
        const double r = 0.995 * i / 200.0;
        CHECK_THAT(bessel_ratio(bessel_ratio_inv(r)), WithinAbs(r, 1e-9 * std::max(r, 1e-3)));
    }
}

TEST_CASE("vm_expected_steering: limits and quadrature", "[numerics][oracle]")
{
    const CVec u = vm_expected_steering(3, VonMises(0.4, 0.0));
    CHECK(std::abs(u(0) - 1.0 / std::sqrt(3.0)) < 1e-15);
    CHECK(std::abs(u(1)) < 1e-15);
    CHECK(std::abs(u(2)) < 1e-15);

    CHECK((vm_expected_steering(3, VonMises(0.5, 1e8)) - steering(3, 0.5)).norm() < 1e-4);

    const CVec q = oracle::vm_mean_steering_quadrature(5, 1.2, 3.0);
    CHECK((vm_expected_steering(5, VonMises(1.2, 3.0)) - q).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("vm_expected_steering: magnitudes bounded and decreasing in n", "[numerics][property]")
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> mu(0.0, kTwoPi), lk(-3.0, 6.0);
    for (int i = 0; i < 200; ++i)
    {
        const int x = 1 + static_cast<int>(rng() % 64);
        const CVec e = vm_expected_steering(x, VonMises(mu(rng), std::pow(10.0, lk(rng))));
        for (int n = 0; n < x; ++n)
        {
            CHECK(std::abs(e(n)) <= 1.0 / std::sqrt(static_cast<double>(x)) + 1e-15);
            if (n > 0)
                CHECK(std::abs(e(n)) <= std::abs(e(n - 1)) + 1e-15);
        }
    }
}

TEST_CASE("vm_multiply: resultant algebra", "[numerics]")
{
    const VonMises a = vm_multiply(VonMises(1.0, 2.0), VonMises(2.5, 0.0));
    CHECK_THAT(a.mu(), WithinAbs(1.0, 1e-14));
    CHECK_THAT(a.kappa(), WithinAbs(2.0, 1e-14));

    const VonMises b = vm_multiply(VonMises(0.3, 4.0), VonMises(0.3, 6.0));
    CHECK_THAT(b.mu(), WithinAbs(0.3, 1e-14));
    CHECK_THAT(b.kappa(), WithinAbs(10.0, 1e-13));

    CHECK(vm_multiply(VonMises(0.0, 3.0), VonMises(kPi, 3.0)).kappa() < 1e-14);
}

TEST_CASE("vm_multiply is commutative and associative", "[numerics][property]")
{
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> mu(0.0, kTwoPi), k(0.0, 50.0);
    for (int i = 0; i < 200; ++i)
    {
        const VonMises a(mu(rng), k(rng)), b(mu(rng), k(rng)), c(mu(rng), k(rng));
        CHECK(std::abs(vm_multiply(a, b).resultant() - vm_multiply(b, a).resultant()) < 1e-10);
        CHECK(std::abs(vm_multiply(vm_multiply(a, b), c).resultant() -
                       vm_multiply(a, vm_multiply(b, c)).resultant()) < 1e-10);
    }
}

TEST_CASE("kron and ura_steering layout", "[numerics]")
{
    const CVec a = CVec::Random(3), b = CVec::Random(4);
    const CVec k = kron(a, b);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 4; ++j)
            CHECK(k(i * 4 + j) == a(i) * b(j));

    const CVec u = ura_steering(3, 5, 0.4, -1.1);
    for (int m1 = 0; m1 < 3; ++m1)
        for (int m2 = 0; m2 < 5; ++m2)
            CHECK(std::abs(u(m1 * 5 + m2) - std::exp(cplx(0.0, -(0.4 * m1 - 1.1 * m2))) / std::sqrt(15.0)) < 1e-14);
}

TEST_CASE("khatri_rao_gram: trivial and orthogonal cases", "[numerics]")
{
    const CMat B = steering(4, 0.3), Af = steering(8, 1.1);
    const CMat g = khatri_rao_gram(B, Af, CMat::Identity(4, 4));
    CHECK(std::abs(g(0, 0) - 1.0) < 1e-14);

    // Column 1 of B is orthogonal to the other columns (DFT steering at 2 pi k / M).
    CMat B3(4, 3), A3 = CMat::Random(8, 3);
    B3.col(0) = steering(4, 0.0);
    B3.col(1) = steering(4, kPi / 2.0);
    B3.col(2) = steering(4, kPi);
    const CMat G = khatri_rao_gram(B3, A3, CMat::Identity(4, 4));
    CHECK(std::abs(G(1, 0)) < 1e-14);
    CHECK(std::abs(G(1, 2)) < 1e-14);
    CHECK(std::abs(G(0, 1)) < 1e-14);

    CHECK_THROWS_AS(khatri_rao_gram(CMat::Random(4, 2), CMat::Random(8, 3), CMat::Identity(4, 4)),
                    std::invalid_argument);
    CHECK_THROWS_AS(khatri_rao_gram(CMat::Random(4, 2), CMat::Random(8, 2), CMat::Identity(3, 3)),
                    std::invalid_argument);
}

TEST_CASE("khatri_rao_gram equals the dense Kronecker computation", "[numerics][property]")
{
    std::mt19937_64 rng(17);
    for (int seed = 0; seed < 100; ++seed)
    {
        const int M = 1 + static_cast<int>(rng() % 8), N = 1 + static_cast<int>(rng() % 8);
        const int L = 1 + static_cast<int>(rng() % 4);
        const CMat B = oracle::random_cmat(M, L, rng), Af = oracle::random_cmat(N, L, rng);
        const CMat Qinv = oracle::random_hpd(M, rng);
        const CMat dense = oracle::dense_gram(B, Af, Qinv);
        const CMat fast = khatri_rao_gram(B, Af, Qinv);
        CHECK((fast - dense).norm() <= 1e-10 * dense.norm());
    }
}

TEST_CASE("projection_residual_db: span, complement and dense oracle", "[numerics]")
{
    const CVec h = kron(steering(4, 0.2), steering(8, 0.9));
    CMat A(32, 1);
    A.col(0) = h;
    CHECK(projection_residual_db(A, {h * cplx(0.3, -2.0)}) == -200.0);

    // h orthogonal to span A: the full energy per entry remains.
    CMat Aperp(32, 1);
    Aperp.col(0) = kron(steering(4, 0.2), steering(8, 0.9 + kTwoPi / 8.0));
    CHECK_THAT(projection_residual_db(Aperp, {h}), WithinAbs(10.0 * std::log10(1.0 / 32.0), 1e-9));
    CHECK_THAT(projection_residual_db(CMat(32, 0), {h}), WithinAbs(10.0 * std::log10(1.0 / 32.0), 1e-12));

    std::mt19937_64 rng(2);
    for (int i = 0; i < 20; ++i)
    {
        const CMat R = oracle::random_cmat(24, 5, rng);
        std::vector<CVec> hs{oracle::random_cmat(24, 1, rng), oracle::random_cmat(24, 1, rng)};
        double acc = 0.0;
        for (const auto &x : hs)
            acc += oracle::normal_equations_residual(R, x) / 24.0;
        CHECK_THAT(projection_residual_db(R, hs), WithinAbs(10.0 * std::log10(acc / 2.0), 1e-9));
    }

    CHECK_THROWS_AS(projection_residual_db(A, {}), std::invalid_argument);
    CHECK_THROWS_AS(projection_residual_db(A, {CVec::Ones(5)}), std::invalid_argument);
}
