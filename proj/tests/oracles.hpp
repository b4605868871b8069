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
//
// Independent reference computations for the tests. Nothing here calls the
// library routine it is meant to check.

#ifndef CKM_TESTS_ORACLES_HPP
#define CKM_TESTS_ORACLES_HPP

#include "ckm/numerics.hpp"

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <random>

namespace oracle
{

using ckm::CMat;
using ckm::cplx;
using ckm::CVec;

/// I_n(x) by its power series, summed in log space.
inline double bessel_i(int n, double x)
{
    if (x == 0.0)
        return n == 0 ? 1.0 : 0.0;
    long double sum = 0.0L;
    const long double lx = std::log(static_cast<long double>(x) / 2.0L);
    for (int k = 0; k < 2000; ++k)
    {
        const long double term =
            std::exp((2 * k + n) * lx - std::lgamma(static_cast<long double>(k + 1)) -
                     std::lgamma(static_cast<long double>(k + n + 1)));
        sum += term;
        if (k > x && term < 1e-22L * sum)
            break;
    }
    return static_cast<double>(sum);
}

/// E[a_x(w)] for w ~ VM(mu, kappa) by adaptive Gauss-Kronrod quadrature,
/// including the normalizing constant.
inline CVec vm_mean_steering_quadrature(int x, double mu, double kappa)
{
    using boost::math::quadrature::gauss_kronrod;
    auto density = [&](double w) { return std::exp(kappa * (std::cos(w - mu) - 1.0)); };
    const double z = gauss_kronrod<double, 61>::integrate(density, 0.0, ckm::kTwoPi, 15, 1e-14);
    CVec out(x);
    for (int n = 0; n < x; ++n)
    {
        const double re =
            gauss_kronrod<double, 61>::integrate([&](double w) { return density(w) * std::cos(n * w); }, 0.0,
                                                 ckm::kTwoPi, 15, 1e-14);
        const double im =
            gauss_kronrod<double, 61>::integrate([&](double w) { return -density(w) * std::sin(n * w); }, 0.0,
                                                 ckm::kTwoPi, 15, 1e-14);
        out(n) = cplx(re, im) / z / std::sqrt(static_cast<double>(x));
    }
    return out;
}

inline CMat random_cmat(int rows, int cols, std::mt19937_64 &rng)
{
    std::normal_distribution<double> g(0.0, 1.0);
    CMat A(rows, cols);
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i)
            A(i, j) = cplx(g(rng), g(rng));
    return A;
}

/// Random Hermitian positive definite matrix.
inline CMat random_hpd(int n, std::mt19937_64 &rng)
{
    const CMat X = random_cmat(n, n, rng);
    CMat H = X * X.adjoint() / static_cast<double>(n);
    H.diagonal().array() += 0.5;
    return H;
}

/// Explicit Kronecker product of matrices.
inline CMat kron_dense(const CMat &A, const CMat &B)
{
    CMat K(A.rows() * B.rows(), A.cols() * B.cols());
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < A.cols(); ++j)
            K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
    return K;
}

/// Column-wise Khatri-Rao product, column l = B_l (x) Af_l, built entry by entry.
inline CMat khatri_rao(const CMat &B, const CMat &Af)
{
    CMat A(B.rows() * Af.rows(), B.cols());
    for (Eigen::Index l = 0; l < B.cols(); ++l)
        for (Eigen::Index m = 0; m < B.rows(); ++m)
            for (Eigen::Index n = 0; n < Af.rows(); ++n)
                A(m * Af.rows() + n, l) = B(m, l) * Af(n, l);
    return A;
}

/// A^H (Qinv (x) I) A with everything formed densely.
inline CMat dense_gram(const CMat &B, const CMat &Af, const CMat &Qinv)
{
    const CMat A = khatri_rao(B, Af);
    return A.adjoint() * kron_dense(Qinv, CMat::Identity(Af.rows(), Af.rows())) * A;
}

/// |h - A (A^H A)^-1 A^H h|^2 from the normal equations (A full column rank).
inline double normal_equations_residual(const CMat &A, const CVec &h)
{
    const CMat G = A.adjoint() * A;
    const CVec x = G.fullPivLu().solve(A.adjoint() * h);
    return (h - A * x).squaredNorm();
}

/// h[m N + n] = sum_l alpha_l sqrt(rho_l) e^{-i(m1 theta + m2 phi + n tau)} / sqrt(M N), no Kronecker helpers.
struct RawPath
{
    double rho, tau, theta, phi;
};
inline CVec channel_triple_sum(const std::vector<RawPath> &paths, const CVec &alphas, int M1, int M2, int N)
{
    const int M = M1 * M2;
    CVec h = CVec::Zero(M * N);
    for (int m1 = 0; m1 < M1; ++m1)
        for (int m2 = 0; m2 < M2; ++m2)
            for (int n = 0; n < N; ++n)
            {
                cplx acc = 0.0;
                for (size_t l = 0; l < paths.size(); ++l)
                {
                    const auto &p = paths[l];
                    acc += alphas(static_cast<Eigen::Index>(l)) * std::sqrt(p.rho) *
                           std::exp(cplx(0.0, -(m1 * p.theta + m2 * p.phi + n * p.tau)));
                }
                h((m1 * M2 + m2) * N + n) = acc / std::sqrt(static_cast<double>(M * N));
            }
    return h;
}

/// Textbook Gauss-Markov estimate C (C + R)^-1 r with dense C = A diag(s) A^H and R = Q (x) I.
inline CVec gauss_markov(const CVec &r, const CMat &A, const Eigen::VectorXd &s, const CMat &Q)
{
    const Eigen::Index N = r.size() / Q.rows();
    CMat C = CMat::Zero(r.size(), r.size());
    for (Eigen::Index l = 0; l < A.cols(); ++l)
        C += s(l) * A.col(l) * A.col(l).adjoint();
    const CMat R = kron_dense(Q, CMat::Identity(N, N));
    return C * (C + R).inverse() * r;
}

} // namespace oracle

#endif
