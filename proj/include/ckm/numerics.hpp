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

#ifndef CKM_NUMERICS_HPP
#define CKM_NUMERICS_HPP

#include <Eigen/Dense>

#include <complex>
#include <numbers>
#include <vector>

namespace ckm
{

using cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Reduces an angle to [0, 2pi).
double wrap_2pi(double angle);

/// Reduces an angle to [-pi, pi).
double wrap_pi(double angle);

/// Signed circular difference a - b in [-pi, pi).
inline double circ_diff(double a, double b) { return wrap_pi(a - b); }

/**
 * Von Mises distribution on the circle.
 *
 * The mean direction is always stored reduced to [0, 2pi); kappa = 0 is the
 * uniform distribution. Products of densities are sums of resultant vectors
 * kappa * exp(i mu), which is why the resultant is exposed directly.
 */
class VonMises
{
public:
    VonMises() = default;
    VonMises(double mu, double kappa);

    double mu() const { return mu_; }
    double kappa() const { return kappa_; }

    cplx resultant() const;
    static VonMises from_resultant(cplx r);
    static VonMises uniform() { return {}; }

private:
    double mu_ = 0.0;
    double kappa_ = 0.0;
};

struct ComplexGaussian1D
{
    cplx mean{0.0, 0.0};
    double var = 1.0;
};

/// Normalized delay and directional components of one path.
struct SteeringParams
{
    double tau = 0.0;   // [0, 2pi)
    double theta = 0.0; // [-pi, pi)
    double phi = 0.0;   // [-pi, pi)

    SteeringParams reduced() const { return {wrap_2pi(tau), wrap_pi(theta), wrap_pi(phi)}; }
};

/// a_x(omega): entry n is exp(-i n omega) / sqrt(x).
CVec steering(int x, double omega);

/// E[a_x(omega)] for omega ~ VM(mu, kappa).
CVec vm_expected_steering(int x, const VonMises &d);

/// I_n(kappa) / I_0(kappa) for n = 0 .. count-1.
std::vector<double> bessel_ratios(int count, double kappa);

/// A(kappa) = I_1(kappa) / I_0(kappa).
double bessel_ratio(double kappa);

/// Inverse of A. Inputs outside [0, 1) are clamped to [0, 1 - 1e-9].
double bessel_ratio_inv(double r);

/// Product of two von Mises densities (renormalized).
VonMises vm_multiply(const VonMises &a, const VonMises &b);

/// Kronecker product of two vectors, a (x) b with index i * b.size() + j.
CVec kron(const CVec &a, const CVec &b);

/// URA steering b(theta, phi) = a_M1(theta) (x) a_M2(phi).
CVec ura_steering(int m1, int m2, double theta, double phi);

/**
 * (B^H Qinv B) .* (Af^H Af), which equals A^H (Qinv (x) I_N) A for the
 * column-wise Khatri-Rao product A = B *c Af.
 *
 * Throws std::invalid_argument on inconsistent dimensions.
 */
CMat khatri_rao_gram(const CMat &B, const CMat &Af, const CMat &Qinv);

/**
 * Mean over hs of |h - A A^+ h|^2 / dim(h), in dB, floored at -200 dB. The
 * projector comes from a thin SVD of A with rank tolerance 1e-10 * sigma_max;
 * an empty A projects onto {0}.
 */
double projection_residual_db(const CMat &A, const std::vector<CVec> &hs);

} // namespace ckm

#endif
