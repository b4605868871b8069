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

#include "ckm/baselines.hpp"
#include "ckm/dictionary.hpp"

#include <algorithm>
#include <stdexcept>

namespace ckm
{

namespace
{
CkmEntry to_entry(const GreedyResult &g, int grid_q)
{
    CkmEntry e;
    e.grid_q = grid_q;
    for (size_t l = 0; l < g.params.size(); ++l)
    {
        double rho = 0.0;
        for (const CVec &b : g.gains)
            rho += std::norm(b(static_cast<Eigen::Index>(l)));
        rho /= static_cast<double>(g.gains.size());
        const auto &p = g.params[l];
        e.paths.push_back(CkmPath{p.tau, p.theta, p.phi, rho});
    }
    std::stable_sort(e.paths.begin(), e.paths.end(), [](const CkmPath &a, const CkmPath &b) { return a.rho > b.rho; });
    return e;
}
} // namespace

CkmEntry omp_baseline_ckm(const std::vector<Observation> &obs, const ArrayDims &dims, int L_bar, int oversample)
{
    if (obs.empty())
        throw std::invalid_argument("omp_baseline_ckm: no observations");
    std::vector<CVec> ys, pilots;
    for (const auto &o : obs)
    {
        ys.push_back(o.y);
        pilots.push_back(o.pilot_user);
    }
    return to_entry(greedy_select(dims, ys, pilots, L_bar, oversample), obs.front().grid_q);
}

OmpEstimate omp_channel_estimate(const CVec &r, const ArrayDims &dims, int L_bar, int oversample)
{
    const CVec ones = CVec::Ones(dims.N);
    const GreedyResult g = greedy_select(dims, {r}, {ones}, L_bar, oversample);
    OmpEstimate out;
    out.h = atoms(dims, g.params, ones) * g.gains.front();
    out.atoms = to_entry(g, 0);
    return out;
}

} // namespace ckm
