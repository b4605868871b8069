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

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ckm
{

namespace
{
// Unitary DFT matrix, F[n, j] = exp(-i 2 pi n j / N) / sqrt(N).
CMat dft_matrix(int N)
{
    CMat F(N, N);
    const double s = 1.0 / std::sqrt(static_cast<double>(N));
    for (int n = 0; n < N; ++n)
        for (int j = 0; j < N; ++j)
            F(n, j) = std::polar(s, -kTwoPi * static_cast<double>((static_cast<long>(n) * j) % N) / N);
    return F;
}

// Rows are antennas: R[m, n] = r[m N + n].
CMat antenna_rows(const CVec &r, const ArrayDims &d)
{
    return Eigen::Map<const CMat>(r.data(), d.N, d.M()).transpose();
}
} // namespace

CMat CovFactors::dense_A() const
{
    CMat A(B.rows() * Af.rows(), sigma.size());
    for (Eigen::Index l = 0; l < sigma.size(); ++l)
        A.col(l) = kron(B.col(l), Af.col(l));
    return A;
}

CovFactors build_cov(const CkmEntry &e, const ArrayDims &dims)
{
    const auto L = static_cast<Eigen::Index>(e.paths.size());
    CovFactors c;
    c.B.resize(dims.M(), L);
    c.Af.resize(dims.N, L);
    c.sigma.resize(L);
    for (Eigen::Index l = 0; l < L; ++l)
    {
        const auto &p = e.paths[static_cast<size_t>(l)];
        c.B.col(l) = ura_steering(dims.M1, dims.M2, p.theta, p.phi);
        c.Af.col(l) = steering(dims.N, p.tau);
        c.sigma(l) = p.rho;
    }
    return c;
}

CMat delay_domain(const CVec &r, const ArrayDims &dims)
{
    if (r.size() != dims.MN())
        throw std::invalid_argument("delay_domain: vector length does not match the array");
    return antenna_rows(r, dims) * dft_matrix(dims.N).conjugate();
}

RVec ckm_pdp(const CkmEntry &e, int N, int M)
{
    const CMat Fh = dft_matrix(N).adjoint();
    RVec p = RVec::Zero(N);
    for (const auto &path : e.paths)
        p += (path.rho / M) * (Fh * steering(N, path.tau)).cwiseAbs2();
    return p;
}

InterferenceCov estimate_interference_cov(const CVec &r, const CkmEntry &e, const ArrayDims &dims,
                                          double power_threshold_db)
{
    const int N = dims.N, M = dims.M();
    const CMat Z = delay_domain(r, dims); // M x N
    const RVec tap_energy = Z.colwise().squaredNorm().transpose() / static_cast<double>(M);

    std::vector<double> upper(tap_energy.data() + N / 2, tap_energy.data() + N);
    if (upper.empty())
        upper.assign(tap_energy.data(), tap_energy.data() + N);
    const auto mid = upper.begin() + static_cast<long>(upper.size() / 2);
    std::nth_element(upper.begin(), mid, upper.end());
    const double floor = *mid;

    InterferenceCov out;
    out.threshold = floor * std::pow(10.0, -power_threshold_db / 10.0);
    const RVec pdp = ckm_pdp(e, N, M);
    for (int j = 0; j < N; ++j)
        if (pdp(j) < out.threshold)
            out.taps.push_back(j);

    if (out.taps.empty())
    {
        out.fallback = true;
        std::vector<int> order(static_cast<size_t>(N));
        for (int j = 0; j < N; ++j)
            order[static_cast<size_t>(j)] = j;
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return pdp(a) < pdp(b); });
        out.taps.assign(order.begin(), order.begin() + std::max(1, N / 2));
        std::sort(out.taps.begin(), out.taps.end());
    }

    CMat Q = CMat::Zero(M, M);
    for (int j : out.taps)
        Q.noalias() += Z.col(j) * Z.col(j).adjoint();
    Q /= static_cast<double>(out.taps.size());
    Q = 0.5 * (Q + Q.adjoint()).eval();
    const double load = 1e-6 * Q.trace().real() / M;
    Q.diagonal().array() += std::max(load, 1e-300);
    out.Q = Q;
    return out;
}

CVec mmse_irc_full(const CVec &r, const CMat &A, const RVec &sigma, const CMat &Q, int dense_cap)
{
    const Eigen::Index MN = r.size();
    if (MN > dense_cap)
        throw std::invalid_argument("mmse_irc_full: M N = " + std::to_string(MN) + " exceeds the dense cap");
    if (A.rows() != MN || A.cols() != sigma.size() || Q.rows() != Q.cols() || MN % Q.rows() != 0)
        throw std::invalid_argument("mmse_irc_full: inconsistent dimensions");
    if (A.cols() == 0)
        return CVec::Zero(MN);

    const Eigen::Index M = Q.rows(), N = MN / M;
    const CMat C = A * sigma.cast<cplx>().asDiagonal() * A.adjoint();
    CMat K = C;
    for (Eigen::Index m = 0; m < M; ++m)
        for (Eigen::Index k = 0; k < M; ++k)
            K.block(m * N, k * N, N, N).diagonal().array() += Q(m, k);

    Eigen::LLT<CMat> llt(K);
    if (llt.info() != Eigen::Success)
    {
        K.diagonal().array() += 1e-10 * K.trace().real() / static_cast<double>(MN);
        llt.compute(K);
    }
    return C * llt.solve(r);
}

CVec mmse_irc_fast(const CVec &r, const CovFactors &cov, const CMat &Q)
{
    const Eigen::Index M = cov.B.rows(), N = cov.Af.rows();
    if (r.size() != M * N || Q.rows() != M || Q.cols() != M)
        throw std::invalid_argument("mmse_irc_fast: inconsistent dimensions");

    // Paths with zero prior power contribute nothing in the limit.
    std::vector<Eigen::Index> keep;
    for (Eigen::Index l = 0; l < cov.sigma.size(); ++l)
        if (cov.sigma(l) > 0.0)
            keep.push_back(l);
    if (keep.empty())
        return CVec::Zero(r.size());
    const auto L = static_cast<Eigen::Index>(keep.size());
    CMat B(M, L), Af(N, L);
    RVec prec(L);
    for (Eigen::Index i = 0; i < L; ++i)
    {
        B.col(i) = cov.B.col(keep[static_cast<size_t>(i)]);
        Af.col(i) = cov.Af.col(keep[static_cast<size_t>(i)]);
        prec(i) = 1.0 / cov.sigma(keep[static_cast<size_t>(i)]);
    }

    const Eigen::LLT<CMat> qllt(Q);
    const CMat Qinv = qllt.solve(CMat::Identity(M, M));

    CMat G = khatri_rao_gram(B, Af, Qinv);
    G.diagonal() += prec.cast<cplx>();

    const CMat W = B.adjoint() * (Qinv * antenna_rows(r, ArrayDims{static_cast<int>(M), 1, static_cast<int>(N)}));
    CVec rhs(L);
    for (Eigen::Index l = 0; l < L; ++l)
        rhs(l) = (W.row(l).transpose().cwiseProduct(Af.col(l).conjugate())).sum();

    const CVec x = G.llt().solve(rhs);
    const CMat H = B * x.asDiagonal() * Af.transpose(); // M x N
    CVec h(M * N);
    for (Eigen::Index m = 0; m < M; ++m)
        h.segment(m * N, N) = H.row(m).transpose();
    return h;
}

double ls_lower_bound(const std::vector<CVec> &channels, const CMat &A)
{
    return projection_residual_db(A, channels);
}

double nmse_db(const std::vector<CVec> &estimates, const std::vector<CVec> &channels)
{
    if (estimates.size() != channels.size() || channels.empty())
        throw std::invalid_argument("nmse_db: need one estimate per channel");
    double acc = 0.0;
    for (size_t t = 0; t < channels.size(); ++t)
        acc += (estimates[t] - channels[t]).squaredNorm() / channels[t].squaredNorm();
    return 10.0 * std::log10(acc / static_cast<double>(channels.size()));
}

} // namespace ckm
