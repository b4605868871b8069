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

#ifndef CKM_ENGINE_HPP
#define CKM_ENGINE_HPP

#include "ckm/scene.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ckm
{

enum class InitMode
{
    random, // uniform random belief means
    greedy, // means at the strongest grid atoms of the residual
};

struct MpConfig
{
    int L_bar = 8;
    int L_bar_I = 4;
    int max_iters = 40;
    double init_kappa = 1e5;
    int newton_steps = 5;
    int grid_oversample = 2;
    double damping = 0.7;
    bool cancel_interference = true; // false: interferers treated as noise
    InitMode init = InitMode::greedy;
    std::uint64_t seed = 1;

    void validate() const;
};

/// Per-slot part of the message-passing state. Gain vectors are laid out as
/// [user paths (L_bar) | interferer 0 paths (L_bar_I) | interferer 1 ...].
struct SlotState
{
    CVec mu;  // Gaussian belief mean over all gains
    RVec var; // diagonal of the belief covariance
    CVec prior_mean; // message into the gains (user part: zero mean)
    RVec prior_var;  // (user part: rho_bar)
    CVec fy_mean;    // messages from the observation factor (interferer part only)
    RVec fy_var;
    std::vector<double> lambda_post;              // per interferer
    std::vector<VonMises> itau, itheta, iphi;     // per interferer path
};

struct MpDiagnostics
{
    std::vector<double> residual; // sum_t |y_t - Psi_t mu_t|^2 after each iteration
    std::vector<double> gamma;
    std::vector<double> lambda;   // empty when interference is not modelled
    std::vector<double> iteration_seconds;
    std::vector<double> activity; // final lambda_post averaged over slots, per interferer
    double initial_residual = 0.0;
    int newton_fallbacks = 0;
    int ridge_events = 0;
    int variance_clamps = 0;
    int odds_underflows = 0;
    int gamma_clamps = 0;
};

struct MpState
{
    ArrayDims dims;
    int K = 0;
    int L_bar = 0;
    int L_bar_I = 0;

    std::vector<VonMises> tau, theta, phi;                   // user path beliefs
    std::vector<VonMises> prior_tau, prior_theta, prior_phi; // non-informative by default
    std::vector<SlotState> slots;

    double gamma = 1.0;
    double gamma_init = 1.0;
    RVec rho_bar;
    double rho_I = 1.0;
    double lambda = 1.0;
    int iteration = 0; // completed iterations

    MpDiagnostics diag;

    int columns() const { return L_bar + K * L_bar_I; }
};

struct CkmPath
{
    double tau = 0.0;
    double theta = 0.0;
    double phi = 0.0;
    double rho = 0.0;
};

struct CkmEntry
{
    int grid_q = 0;
    std::vector<CkmPath> paths; // sorted by descending rho
};

struct CkmTable
{
    ArrayDims dims;
    int L_bar = 0;
    std::vector<CkmEntry> grids;

    const CkmEntry &entry(int q) const;
};

/// Result of a one-dimensional belief update.
struct LocalMax
{
    double omega = 0.0; // located maximum
    double mu = 0.0;    // V-M mean of the Laplace approximation
    double kappa = 0.0;
    bool fallback = false; // curvature was not negative at the Newton point
};

/**
 * Maximizes f(w) = scale * Re sum_n c_n exp(-i n w) on a grid of
 * oversample * len(c) points followed by Newton refinement, and converts the
 * curvature into a von Mises concentration.
 */
LocalMax maximize_trig(const CVec &c, double scale, int oversample, int newton_steps);

MpState init_state(const std::vector<Observation> &obs, const ArrayDims &dims, const MpConfig &cfg);
void update_delay_angle(MpState &s, const std::vector<Observation> &obs, const MpConfig &cfg);
void update_gains(MpState &s, const std::vector<Observation> &obs);
void update_interference(MpState &s, const std::vector<Observation> &obs);
void em_update(MpState &s, const std::vector<Observation> &obs);

/// sum_t |y_t - Psi_hat_t mu_t|^2 with expected steering columns.
double residual_energy(const MpState &s, const std::vector<Observation> &obs);

/// Current beliefs as a CKM record (means, rho_bar), sorted by descending rho.
CkmEntry state_to_entry(const MpState &s, int grid_q);

struct ConstructResult
{
    CkmEntry entry;
    MpDiagnostics diag;
    int iterations = 0;
};

/// Full iteration: delay/angle, gains, interference, EM; max_iters times.
ConstructResult construct_ckm(const std::vector<Observation> &obs, const ArrayDims &dims, const MpConfig &cfg);

/// Same engine with the interferer columns removed.
ConstructResult ici_non_cognitive_ckm(const std::vector<Observation> &obs, const ArrayDims &dims, MpConfig cfg);

/// Columns b(theta, phi) (x) a_N(tau) of a CKM record.
CMat ckm_dictionary(const CkmEntry &e, const ArrayDims &dims);

/// 10 log10 of the mean of |h - A A^+ h|^2 / (N M), floored at -200 dB.
double ckm_accuracy(const CkmEntry &e, const ArrayDims &dims, const std::vector<CVec> &channels);

} // namespace ckm

#endif
