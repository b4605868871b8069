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

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ckm
{

double wrap_2pi(double angle)
{
    double r = std::fmod(angle, kTwoPi);
    if (r < 0.0)
        r += kTwoPi;
    if (r >= kTwoPi) // fmod rounding on tiny negatives
        r = 0.0;
    return r;
}

double wrap_pi(double angle)
{
    double r = wrap_2pi(angle + kPi) - kPi;
    return r;
}

VonMises::VonMises(double mu, double kappa)
    : mu_(wrap_2pi(mu)), kappa_(kappa)
{
    if (!(kappa >= 0.0))
        throw std::invalid_argument("VonMises: kappa must be non-negative");
}

cplx VonMises::resultant() const
{
    return std::polar(kappa_, mu_);
}

VonMises VonMises::from_resultant(cplx r)
{
    const double k = std::abs(r);
    if (k == 0.0)
        return {};
    return {std::arg(r), k};
}

CVec steering(int x, double omega)
{
    if (x < 1)
        throw std::invalid_argument("steering: length must be >= 1");
    CVec a(x);
    const double scale = 1.0 / std::sqrt(static_cast<double>(x));
    for (int n = 0; n < x; ++n)
        a(n) = std::polar(scale, -static_cast<double>(n) * omega);
    return a;
}

std::vector<double> bessel_ratios(int count, double kappa)
{
    if (count < 1)
        return {};
    if (!(kappa >= 0.0))
        throw std::invalid_argument("bessel_ratios: kappa must be non-negative");

    std::vector<double> out(static_cast<size_t>(count), 0.0);
    out[0] = 1.0;
    if (count == 1 || kappa == 0.0)
        return out;

    // Backward recurrence on r_n = I_n / I_{n-1}:  r_n = 1 / (2n/kappa + r_{n+1}).
    // The start value is the Amos-type approximation; the extra depth damps its error.
    const int extra = static_cast<int>(std::min(40.0 + 4.0 * std::sqrt(kappa), 3000.0));
    const int top = count - 1 + extra;
    const double nu = static_cast<double>(top + 1);
    double r = kappa / (nu - 0.5 + std::sqrt((nu + 0.5) * (nu + 0.5) + kappa * kappa));

    std::vector<double> ratio(static_cast<size_t>(count), 0.0);
    for (int n = top; n >= 1; --n)
    {
        r = 1.0 / (2.0 * n / kappa + r);
        if (n < count)
            ratio[static_cast<size_t>(n)] = r;
    }

    double p = 1.0;
    for (int n = 1; n < count; ++n)
    {
        p *= ratio[static_cast<size_t>(n)];
        out[static_cast<size_t>(n)] = p;
    }
    return out;
}

double bessel_ratio(double kappa)
{
    if (!(kappa >= 0.0))
        throw std::invalid_argument("bessel_ratio: kappa must be non-negative");
    if (kappa == 0.0)
        return 0.0;
    return bessel_ratios(2, kappa)[1];
}

namespace
{
// dA/dkappa. The closed form 1 - A/k - A^2 cancels catastrophically for large
// kappa, where the asymptotic series is used instead.
double bessel_ratio_derivative(double kappa, double a)
{
    if (kappa > 1e3)
    {
        const double k2 = kappa * kappa;
        return 1.0 / (2.0 * k2) + 1.0 / (4.0 * k2 * kappa) + 3.0 / (8.0 * k2 * k2);
    }
    if (kappa < 1e-8)
        return 0.5;
    return 1.0 - a / kappa - a * a;
}
} // namespace

double bessel_ratio_inv(double r)
{
    constexpr double r_max = 1.0 - 1e-9;
    if (!(r > 0.0)) // also catches NaN
        return 0.0;
    r = std::min(r, r_max);

    // Banerjee et al. rational approximation, then safeguarded Newton.
    const double r2 = r * r;
    double kappa = r * (2.0 - r2) / (1.0 - r2);

    double lo = 0.0;
    double hi = std::max(4.0 * kappa, 1.0);
    while (bessel_ratio(hi) < r)
        hi *= 2.0;

    for (int it = 0; it < 100; ++it)
    {
        const double a = bessel_ratio(kappa);
        const double f = a - r;
        if (std::abs(f) <= 1e-13 * r)
            break;
        if (f < 0.0)
            lo = std::max(lo, kappa);
        else
            hi = std::min(hi, kappa);

        double next = kappa - f / bessel_ratio_derivative(kappa, a);
        if (!(next > lo && next < hi))
            next = 0.5 * (lo + hi);
        if (std::abs(next - kappa) <= 1e-15 * kappa)
        {
            kappa = next;
            break;
        }
        kappa = next;
    }
    return kappa;
}

CVec vm_expected_steering(int x, const VonMises &d)
{
    if (x < 1)
        throw std::invalid_argument("vm_expected_steering: length must be >= 1");
    const std::vector<double> ratio = bessel_ratios(x, d.kappa());
    CVec a(x);
    const double scale = 1.0 / std::sqrt(static_cast<double>(x));
    for (int n = 0; n < x; ++n)
        a(n) = std::polar(scale * ratio[static_cast<size_t>(n)], -static_cast<double>(n) * d.mu());
    return a;
}

VonMises vm_multiply(const VonMises &a, const VonMises &b)
{
    return VonMises::from_resultant(a.resultant() + b.resultant());
}

CVec kron(const CVec &a, const CVec &b)
{
    CVec out(a.size() * b.size());
    for (Eigen::Index i = 0; i < a.size(); ++i)
        out.segment(i * b.size(), b.size()) = a(i) * b;
    return out;
}

CVec ura_steering(int m1, int m2, double theta, double phi)
{
    return kron(steering(m1, theta), steering(m2, phi));
}

CMat khatri_rao_gram(const CMat &B, const CMat &Af, const CMat &Qinv)
{
    if (B.cols() != Af.cols())
        throw std::invalid_argument("khatri_rao_gram: B and Af must have the same column count (" +
                                    std::to_string(B.cols()) + " vs " + std::to_string(Af.cols()) + ")");
    if (Qinv.rows() != Qinv.cols() || Qinv.rows() != B.rows())
        throw std::invalid_argument("khatri_rao_gram: Qinv must be square with B.rows() rows");
    const CMat spatial = B.adjoint() * Qinv * B;
    const CMat spectral = Af.adjoint() * Af;
    return spatial.cwiseProduct(spectral);
}

double projection_residual_db(const CMat &A, const std::vector<CVec> &hs)
{
    if (hs.empty())
        throw std::invalid_argument("projection_residual_db: no channels");
    CMat U;
    if (A.cols() > 0)
    {
        Eigen::BDCSVD<CMat> svd(A, Eigen::ComputeThinU);
        const auto &sv = svd.singularValues();
        const double tol = 1e-10 * (sv.size() > 0 ? sv(0) : 0.0);
        Eigen::Index rank = 0;
        while (rank < sv.size() && sv(rank) > tol)
            ++rank;
        U = svd.matrixU().leftCols(rank);
    }

    double acc = 0.0;
    for (const CVec &h : hs)
    {
        if (A.cols() > 0 && h.size() != A.rows())
            throw std::invalid_argument("projection_residual_db: channel length does not match A");
        double e = h.squaredNorm();
        if (U.cols() > 0)
            e = (h - U * (U.adjoint() * h)).squaredNorm();
        acc += e / static_cast<double>(h.size());
    }
    const double mean = acc / static_cast<double>(hs.size());
    return std::max(10.0 * std::log10(mean), -200.0);
}

} // namespace ckm
