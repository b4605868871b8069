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

#ifndef CKM_HARNESS_HPP
#define CKM_HARNESS_HPP

#include "ckm/engine.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ckm
{

struct ExperimentConfig
{
    SceneConfig scene;
    MpConfig mp;

    std::vector<double> sinr_db{-5.0, 5.0};
    std::vector<int> L_bar{4, 8, 12};
    std::vector<double> grid_size_d{2.0};

    double slots_per_metre = 10.0; // |T_q| = round(slots_per_metre * d)
    double split_ratio = 0.7;      // construction share
    int replications = 2;
    std::uint64_t seed = 1; // replication r uses seed + r
    double power_threshold_db = 10.0;
    int threads = 0; // 0: hardware concurrency
    std::string output_dir = "out";

    void validate() const;
};

/// "desk" (small, CI-sized) or "paper" (full-size system). Throws on other names.
ExperimentConfig preset(const std::string &name);

/**
 * INI file with sections [scene], [mp], [sweep], [run]; keys absent from the
 * file keep the value from `base`. Lists are comma separated. Unknown keys
 * are rejected.
 */
ExperimentConfig load_config(const std::string &path, const ExperimentConfig &base);
ExperimentConfig parse_config(const std::string &ini_text, const ExperimentConfig &base);
std::string config_to_ini(const ExperimentConfig &cfg);

inline const std::vector<std::string> &method_names()
{
    static const std::vector<std::string> names{"proposed", "omp_ckm", "ici_non_cognitive", "lb", "omp"};
    return names;
}

struct MetricsRow
{
    int experiment = 0; // sweep point index
    std::uint64_t seed = 0;
    int grid_q = -1;    // -1: pooled over all grids
    double sinr_db = 0.0;
    int L_bar = 0;
    double d = 0.0;
    std::string method;
    double ckm_accuracy_db = 0.0;
    double nmse_db = 0.0;
    double wall_time_s = 0.0;
    int iterations = 0;
    std::string status = "ok";
};

struct SweepPoint
{
    double sinr_db = 0.0;
    int L_bar = 0;
    double d = 0.0;
};

/// Cartesian product in (sinr, L_bar, d) order, d fastest.
std::vector<SweepPoint> sweep_points(const ExperimentConfig &cfg);

/// Scene configuration for one sweep point and seed (SINR calibrated).
SceneConfig scene_for(const ExperimentConfig &cfg, const SweepPoint &p, std::uint64_t seed);

struct ExperimentResult
{
    std::vector<MetricsRow> pooled;   // one row per (point, seed, method)
    std::vector<MetricsRow> per_grid; // one row per (point, seed, grid, method)
};

/// Runs every sweep point and replication; rows are in (point, seed, method) order.
ExperimentResult run_experiment(const ExperimentConfig &cfg);

/// Writes metrics.csv, grid_metrics.csv and timings.csv into dir (created if needed).
void write_experiment(const ExperimentResult &res, const std::string &dir);

/// Metrics CSV without timing columns (deterministic), or the timings CSV.
std::string metrics_csv(const std::vector<MetricsRow> &rows);
std::string timings_csv(const std::vector<MetricsRow> &rows);
std::vector<MetricsRow> parse_metrics_csv(const std::string &text);

struct SummaryRow
{
    int experiment = 0;
    double sinr_db = 0.0;
    int L_bar = 0;
    double d = 0.0;
    std::string method;
    int count = 0;
    double ckm_accuracy_mean = 0.0;
    double ckm_accuracy_std = 0.0; // sample standard deviation, 0 for one row
    double nmse_mean = 0.0;
    double nmse_std = 0.0;
};

/// Mean and std per (sweep point, method) over rows with status "ok".
/// Throws std::invalid_argument on an empty input.
std::vector<SummaryRow> summarize(const std::vector<MetricsRow> &rows);
std::string summary_csv(const std::vector<SummaryRow> &rows);
std::string summary_table(const std::vector<SummaryRow> &rows);

/// Builds one CKM record per grid from its construction slots.
/// method: "proposed", "ici_non_cognitive" or "omp_ckm".
CkmTable construct_table(const Scene &scene, const MpConfig &mp, double split_ratio, const std::string &method,
                         std::vector<ConstructResult> *details = nullptr);

struct EstimateRow
{
    int slot = 0;
    int grid = 0;
    double sinr_db = 0.0;
    std::string method;
    double nmse_db = 0.0;
};

/// CKM-assisted MMSE-IRC over every grid's estimation slots.
std::vector<EstimateRow> estimate_scene(const Scene &scene, const CkmTable &table, double split_ratio,
                                        double power_threshold_db, const std::string &method_label);
std::string estimates_csv(const std::vector<EstimateRow> &rows);

/// RFC-4180 helpers.
std::string csv_field(const std::string &s);
std::vector<std::vector<std::string>> parse_csv(const std::string &text);

} // namespace ckm

#endif
