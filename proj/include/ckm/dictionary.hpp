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

#ifndef CKM_DICTIONARY_HPP
#define CKM_DICTIONARY_HPP

#include "ckm/scene.hpp"

#include <cstddef>
#include <vector>

namespace ckm
{

/**
 * Uniformly sampled (tau, theta, phi) grid with `oversample` x N delay points
 * and `oversample` x M1 / M2 angle points. Correlates a received vector
 * against every atom b(theta, phi) (x) (pilot .* a_N(tau)) using separable
 * transforms, without forming the dictionary.
 */
class GridCorrelator
{
public:
    GridCorrelator(const ArrayDims &dims, int oversample);

    std::size_t size() const { return static_cast<std::size_t>(gt_) * g1_ * g2_; }
    SteeringParams point(std::size_t index) const;

    /// score[i] += |atom_i^H r|^2.
    void accumulate(const CVec &r, const CVec &pilot, std::vector<double> &score) const;

private:
    ArrayDims dims_;
    int gt_, g1_, g2_;
    CMat ft_; // N x gt, conj(a_N(tau_g))
    CMat f1_; // g1 x M1
    CMat f2_; // M2 x g2
};

/// Atom b(theta, phi) (x) (pilot .* a_N(tau)).
CVec atom(const ArrayDims &dims, const SteeringParams &p, const CVec &pilot);

/// Columns atom(dims, p, pilot) for every p.
CMat atoms(const ArrayDims &dims, const std::vector<SteeringParams> &params, const CVec &pilot);

/// Minimum-norm least-squares solution of A x = y (complete orthogonal decomposition).
CVec least_squares(const CMat &A, const CVec &y);

/**
 * Greedy (OMP) selection of `count` distinct atoms on the score summed over
 * all received vectors. Gains are refit by least squares per vector after
 * each selection. With refine_rounds > 0 every new atom is moved off the grid
 * by Newton steps on sum_t |atom^H r_t|^2 (r_t excluding that atom), and the
 * earlier atoms are revisited the same way, refine_rounds times.
 */
struct GreedyResult
{
    std::vector<SteeringParams> params;
    std::vector<CVec> gains; // one per received vector
};
GreedyResult greedy_select(const ArrayDims &dims, const std::vector<CVec> &ys, const std::vector<CVec> &pilots,
                           int count, int oversample, int refine_rounds = 0);

/**
 * Newton refinement of one atom against residuals rs (which must still contain
 * that atom's contribution), cycling over tau, theta, phi.
 */
SteeringParams refine_atom(const ArrayDims &dims, const std::vector<CVec> &rs, const std::vector<CVec> &pilots,
                           SteeringParams p, int oversample, int rounds);

} // namespace ckm

#endif
