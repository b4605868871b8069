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

#include "ckm/dictionary.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <stdexcept>

namespace ckm
{

namespace
{
double grid_angle(int g, int count, double start)
{
    return start + kTwoPi * static_cast<double>(g) / static_cast<double>(count);
}

// Maximizes sum_t |sum_n d_t[n] exp(i n w)|^2 by Newton steps from w, each
// step limited to a quarter of the grid spacing.
double newton_noncoherent(const std::vector<CVec> &d, double w, double max_step)
{
    for (int it = 0; it < 20; ++it)
    {
        double j1 = 0.0, j2 = 0.0;
        for (const CVec &dt : d)
        {
            cplx g = 0.0, g1 = 0.0, g2 = 0.0;
            for (Eigen::Index n = 0; n < dt.size(); ++n)
            {
                const double fn = static_cast<double>(n);
                const cplx e = dt(n) * std::polar(1.0, fn * w);
                g += e;
                g1 += cplx(0.0, fn) * e;
                g2 -= fn * fn * e;
            }
            j1 += 2.0 * std::real(std::conj(g) * g1);
            j2 += 2.0 * (std::norm(g1) + std::real(std::conj(g) * g2));
        }
        if (!(j2 < 0.0))
            break;
        const double delta = std::clamp(-j1 / j2, -max_step, max_step);
        w += delta;
        if (std::abs(delta) < 1e-12)
            break;
    }
    return w;
}
} // namespace

GridCorrelator::GridCorrelator(const ArrayDims &dims, int oversample)
    : dims_(dims), gt_(oversample * dims.N), g1_(oversample * dims.M1), g2_(oversample * dims.M2)
{
    if (oversample < 1)
        throw std::invalid_argument("GridCorrelator: oversample must be >= 1");
    ft_.resize(dims.N, gt_);
    for (int g = 0; g < gt_; ++g)
        ft_.col(g) = steering(dims.N, grid_angle(g, gt_, 0.0)).conjugate();
    f1_.resize(g1_, dims.M1);
    for (int g = 0; g < g1_; ++g)
        f1_.row(g) = steering(dims.M1, grid_angle(g, g1_, -kPi)).conjugate().transpose();
    f2_.resize(dims.M2, g2_);
    for (int g = 0; g < g2_; ++g)
        f2_.col(g) = steering(dims.M2, grid_angle(g, g2_, -kPi)).conjugate();
}

SteeringParams GridCorrelator::point(std::size_t index) const
{
    // Index layout: ((g_tau * g1) + g_theta) * g2 + g_phi.
    const int gp = static_cast<int>(index % g2_);
    const int gth = static_cast<int>((index / g2_) % g1_);
    const int gt = static_cast<int>(index / (static_cast<std::size_t>(g1_) * g2_));
    return SteeringParams{grid_angle(gt, gt_, 0.0), grid_angle(gth, g1_, -kPi), grid_angle(gp, g2_, -kPi)}.reduced();
}

void GridCorrelator::accumulate(const CVec &r, const CVec &pilot, std::vector<double> &score) const
{
    const int M1 = dims_.M1, M2 = dims_.M2, N = dims_.N;
    if (r.size() != dims_.MN() || pilot.size() != N)
        throw std::invalid_argument("GridCorrelator: size mismatch");
    if (score.size() != size())
        score.assign(size(), 0.0);

    // W[m, n] = r[m, n] conj(x_n); rows are antennas.
    CMat W(dims_.M(), N);
    for (int m = 0; m < dims_.M(); ++m)
        W.row(m) = r.segment(m * N, N).cwiseProduct(pilot.conjugate()).transpose();
    const CMat D = W * ft_; // M x gt

    CMat block(M1, M2);
    std::size_t idx = 0;
    for (int g = 0; g < gt_; ++g)
    {
        for (int m1 = 0; m1 < M1; ++m1)
            for (int m2 = 0; m2 < M2; ++m2)
                block(m1, m2) = D(m1 * M2 + m2, g);
        const CMat c = f1_ * block * f2_;
        for (int a = 0; a < g1_; ++a)
            for (int b = 0; b < g2_; ++b)
                score[idx++] += std::norm(c(a, b));
    }
}

CVec atom(const ArrayDims &dims, const SteeringParams &p, const CVec &pilot)
{
    return kron(ura_steering(dims.M1, dims.M2, p.theta, p.phi), pilot.cwiseProduct(steering(dims.N, p.tau)));
}

CMat atoms(const ArrayDims &dims, const std::vector<SteeringParams> &params, const CVec &pilot)
{
    CMat A(dims.MN(), static_cast<Eigen::Index>(params.size()));
    for (size_t i = 0; i < params.size(); ++i)
        A.col(static_cast<Eigen::Index>(i)) = atom(dims, params[i], pilot);
    return A;
}

CVec least_squares(const CMat &A, const CVec &y)
{
    if (A.cols() == 0)
        return CVec(0);
    return A.completeOrthogonalDecomposition().solve(y);
}

SteeringParams refine_atom(const ArrayDims &dims, const std::vector<CVec> &rs, const std::vector<CVec> &pilots,
                           SteeringParams p, int oversample, int rounds)
{
    const int M1 = dims.M1, M2 = dims.M2, N = dims.N;
    std::vector<CVec> d(rs.size());
    std::vector<CVec> v(rs.size());
    for (int round = 0; round < rounds; ++round)
    {
        // Delay: d[n] = conj(x_n) (R^T conj(b))_n.
        const CVec b = ura_steering(M1, M2, p.theta, p.phi);
        for (size_t t = 0; t < rs.size(); ++t)
        {
            const Eigen::Map<const CMat> R(rs[t].data(), N, dims.M());
            d[t] = pilots[t].conjugate().cwiseProduct(R * b.conjugate());
        }
        p.tau = newton_noncoherent(d, p.tau, kPi / (2.0 * oversample * N));

        const CVec s = steering(N, p.tau);
        for (size_t t = 0; t < rs.size(); ++t)
        {
            const Eigen::Map<const CMat> R(rs[t].data(), N, dims.M());
            v[t] = R.transpose() * pilots[t].cwiseProduct(s).conjugate();
        }

        const CVec a2 = steering(M2, p.phi);
        for (size_t t = 0; t < rs.size(); ++t)
        {
            d[t] = CVec::Zero(M1);
            for (int m1 = 0; m1 < M1; ++m1)
                for (int m2 = 0; m2 < M2; ++m2)
                    d[t](m1) += std::conj(a2(m2)) * v[t](m1 * M2 + m2);
        }
        p.theta = newton_noncoherent(d, p.theta, kPi / (2.0 * oversample * M1));

        const CVec a1 = steering(M1, p.theta);
        for (size_t t = 0; t < rs.size(); ++t)
        {
            d[t] = CVec::Zero(M2);
            for (int m1 = 0; m1 < M1; ++m1)
                for (int m2 = 0; m2 < M2; ++m2)
                    d[t](m2) += std::conj(a1(m1)) * v[t](m1 * M2 + m2);
        }
        p.phi = newton_noncoherent(d, p.phi, kPi / (2.0 * oversample * M2));
        p = p.reduced();
    }
    return p;
}

GreedyResult greedy_select(const ArrayDims &dims, const std::vector<CVec> &ys, const std::vector<CVec> &pilots,
                           int count, int oversample, int refine_rounds)
{
    if (ys.size() != pilots.size())
        throw std::invalid_argument("greedy_select: one pilot per received vector required");
    const GridCorrelator grid(dims, oversample);
    if (count < 0 || static_cast<std::size_t>(count) > grid.size())
        throw std::invalid_argument("greedy_select: atom count out of range");

    GreedyResult out;
    std::vector<CVec> residual = ys;
    std::vector<char> used(grid.size(), 0);
    out.gains.assign(ys.size(), CVec(0));
    std::vector<double> score(grid.size());

    for (int step = 0; step < count; ++step)
    {
        std::fill(score.begin(), score.end(), 0.0);
        for (size_t t = 0; t < ys.size(); ++t)
            grid.accumulate(residual[t], pilots[t], score);
        std::size_t best = grid.size();
        for (std::size_t i = 0; i < score.size(); ++i)
            if (!used[i] && (best == grid.size() || score[i] > score[best]))
                best = i;
        used[best] = 1;
        out.params.push_back(grid.point(best));

        auto refit = [&] {
            for (size_t t = 0; t < ys.size(); ++t)
            {
                const CMat A = atoms(dims, out.params, pilots[t]);
                out.gains[t] = least_squares(A, ys[t]);
                residual[t] = ys[t] - A * out.gains[t];
            }
        };
        refit();
        if (refine_rounds <= 0)
            continue;

        // Newest atom first, then the earlier ones, each against the residual
        // with its own contribution added back.
        for (int pass = 0; pass < refine_rounds; ++pass)
        {
            for (int j = step; j >= 0; --j)
            {
                const auto J = static_cast<size_t>(j);
                std::vector<CVec> rs(ys.size());
                for (size_t t = 0; t < ys.size(); ++t)
                    rs[t] = residual[t] + out.gains[t](j) * atom(dims, out.params[J], pilots[t]);
                out.params[J] = refine_atom(dims, rs, pilots, out.params[J], oversample, 2);
                for (size_t t = 0; t < ys.size(); ++t)
                    residual[t] = rs[t] - out.gains[t](j) * atom(dims, out.params[J], pilots[t]);
            }
            refit();
        }
    }
    return out;
}

} // namespace ckm
