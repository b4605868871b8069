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

#ifndef CKM_BASELINES_HPP
#define CKM_BASELINES_HPP

#include "ckm/engine.hpp"

namespace ckm
{

/**
 * OMP map construction: L_bar atoms chosen greedily on the slot-summed
 * correlation over an oversampled (tau, theta, phi) grid, per-slot LS gains,
 * rho_bar = mean_t |beta_hat|^2.
 */
CkmEntry omp_baseline_ckm(const std::vector<Observation> &obs, const ArrayDims &dims, int L_bar, int oversample = 2);

/// Single-slot OMP channel estimate from a pilot-equalized vector r.
struct OmpEstimate
{
    CVec h;
    CkmEntry atoms; // selected grid points with rho = |beta_hat|^2
};
OmpEstimate omp_channel_estimate(const CVec &r, const ArrayDims &dims, int L_bar, int oversample = 2);

} // namespace ckm

#endif
