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

#ifndef CKM_SCENE_HPP
#define CKM_SCENE_HPP

#include "ckm/numerics.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace ckm
{

/// Array and band dimensions. Vectors are antenna-major: index m * N + n.
struct ArrayDims
{
    int M1 = 4;
    int M2 = 4;
    int N = 64;

    int M() const { return M1 * M2; }
    int MN() const { return M1 * M2 * N; }
    bool operator==(const ArrayDims &) const = default;
};

struct SceneConfig
{
    ArrayDims dims;
    double subcarrier_spacing = 30e3; // Hz
    double grid_size_d = 2.0;         // m
    int num_grids = 4;
    int slots_per_grid = 20;

    int L_true = 10;
    int K = 2;   // interferers
    int L_I = 4; // paths per interferer
    double interferer_activity = 0.5;

    double user_power = 1.0;
    double interferer_power = 1.0;
    double noise_var = 1e-3;
    double inr_db = 10.0;
    double sinr_db = 0.0; // nominal, written by calibrate_sinr

    // Multipath generator shape.
    double max_delay = 0.5 * kPi;     // normalized delay support [0, max_delay]
    double azimuth_sector_deg = 60.0; // physical azimuth in [-sector, sector]
    double zenith_sector_deg = 30.0;
    double power_decay = 3.0; // exponential profile exp(-decay * tau / max_delay)
    double shadow_db = 6.0;   // per-path uniform power spread

    // Spatial drift per metre of displacement (LOS example: 0.14 ns and 0.19 deg over 5 m).
    double delay_drift_s_per_m = 0.14e-9 / 5.0;
    double angle_drift_rad_per_m = (0.19 / 5.0) * kPi / 180.0;
    bool intra_grid_jitter = false;

    std::uint64_t seed = 1;

    void validate() const;

    /// Bounds on |d tau|, |d theta|, |d phi| per metre, in normalized units.
    double delay_rate() const { return kTwoPi * subcarrier_spacing * delay_drift_s_per_m; }
    double angle_rate() const { return kPi * angle_drift_rad_per_m; }
};

struct Path
{
    double rho = 0.0;
    SteeringParams params;
};

struct PathSet
{
    std::vector<Path> paths;

    double total_power() const;
};

/// Per-path linear drift rates (normalized units per metre).
struct PathDrift
{
    double tau = 0.0;
    double theta = 0.0;
    double phi = 0.0;
};

/// Large-scale geometry for one construction period.
struct SceneGeometry
{
    std::vector<PathSet> user;               // per grid
    std::vector<PathDrift> user_drift;       // per user path
    std::vector<PathSet> interferers;        // per interferer, fixed over the period
    std::vector<std::uint8_t> interferer_on; // Bernoulli(activity) per interferer
};

struct Observation
{
    CVec y; // M*N received samples
    CVec pilot_user;
    std::vector<CVec> pilot_interferers; // all K, active or not
    int grid_q = 0;
    int slot_t = 0;
    std::vector<std::uint8_t> active_mask;
};

struct SlotTruth
{
    int slot_t = 0;
    int grid_q = 0;
    PathSet user_paths; // as realized in this slot (differs from the grid set under jitter)
    CVec alphas;
    std::vector<CVec> interferer_alphas;
    CVec h; // user channel, M*N
    double signal_energy = 0.0;
    double interference_energy = 0.0;
    double noise_energy = 0.0;
};

struct Scene
{
    SceneConfig cfg;
    SceneGeometry geometry;
    std::vector<Observation> observations;
    std::vector<SlotTruth> truth;

    /// Indices into observations belonging to grid q, in slot order.
    std::vector<int> slots_of_grid(int q) const;
};

/// Deterministic substream for (seed, stream, index).
std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

SceneGeometry generate_scene(const SceneConfig &cfg);

/// h = sum_l alpha_l sqrt(rho_l) b(theta_l, phi_l) (x) a_N(tau_l).
CVec realize_channel(const PathSet &ps, const CVec &alphas, int M1, int M2, int N);

struct SlotSample
{
    Observation obs;
    SlotTruth truth;
};

SlotSample synthesize_slot(const SceneConfig &cfg, const SceneGeometry &geo, int slot_t, std::mt19937_64 &rng);

/// Generates geometry and all slots; slot t uses substream (seed, slot, t).
Scene simulate_scene(const SceneConfig &cfg);

/// Sets noise_var and interferer_power so that expected SINR hits the target
/// with the configured interference-to-noise ratio.
SceneConfig calibrate_sinr(const SceneConfig &cfg, double target_sinr_db);

/// Pilot-equalized observation: r[m*N+n] = y[m*N+n] / x[n].
CVec pilot_equalize(const Observation &obs, int N);

/// Splits grid q's slots into (construction, estimation) subsets, deterministic in (seed, q).
struct SlotSplit
{
    std::vector<int> construction;
    std::vector<int> estimation;
};
SlotSplit split_slots(const Scene &scene, int q, double ratio);

} // namespace ckm

#endif
