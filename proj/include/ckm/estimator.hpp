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

#ifndef CKM_ESTIMATOR_HPP
#define CKM_ESTIMATOR_HPP

#include "ckm/engine.hpp"

#include <vector>

namespace ckm
{

/**
 * Channel covariance implied by a CKM record, kept in factored form:
 * C = A diag(sigma) A^H with A = B *c Af (column l is B_l (x) Af_l).
 */
struct CovFactors
{
    CMat B;     // M x L spatial steering b(theta_l, phi_l)
    CMat Af;    // N x L delay steering a_N(tau_l)
    RVec sigma; // rho_bar

    int paths() const { return static_cast<int>(sigma.size()); }
    CMat dense_A() const;
};

CovFactors build_cov(const CkmEntry &e, const ArrayDims &dims);

struct InterferenceCov
{
    CMat Q;                // M x M, loaded
    std::vector<int> taps; // delay taps used in the sample covariance
    double threshold = 0.0;
    bool fallback = false; // no tap met the threshold
};

/// Per-antenna unitary inverse DFT: row m of the result is F^H r_m.
CMat delay_domain(const CVec &r, const ArrayDims &dims);

/// P_j = sum_l rho_l / M |(F^H a_N(tau_l))_j|^2, per antenna.
RVec ckm_pdp(const CkmEntry &e, int N, int M);

/**
 * Sample spatial covariance over the delay taps whose CKM-predicted power is
 * more than power_threshold_db below the interference-plus-noise floor
 * (median per-antenna tap energy over the upper half of the delay axis).
 */
InterferenceCov estimate_interference_cov(const CVec &r, const CkmEntry &e, const ArrayDims &dims,
                                          double power_threshold_db = 10.0);

/// Dense C (C + Q (x) I)^-1 r. Throws if M N exceeds dense_cap.
CVec mmse_irc_full(const CVec &r, const CMat &A, const RVec &sigma, const CMat &Q, int dense_cap = 4096);

/// A (A^H (Q^-1 (x) I) A + Sigma^-1)^-1 A^H (Q^-1 (x) I) r without M N x M N matrices.
CVec mmse_irc_fast(const CVec &r, const CovFactors &cov, const CMat &Q);

/// Mean |h - A A^+ h|^2 / (N M) over the channels, in dB (floor -200 dB).
double ls_lower_bound(const std::vector<CVec> &channels, const CMat &A);

/// 10 log10 of mean_t |h_hat_t - h_t|^2 / |h_t|^2.
double nmse_db(const std::vector<CVec> &estimates, const std::vector<CVec> &channels);

} // namespace ckm

#endif
