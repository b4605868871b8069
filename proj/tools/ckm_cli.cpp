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
//
// ckm_cli: scene simulation, CKM construction, channel estimation and sweeps.
//
//   ckm_cli simulate  [--preset desk] [--config f.ini] [--seed S] [--sinr DB] --out DIR
//   ckm_cli construct --scene DIR/scene.json [--method proposed] [--L-bar L] --out DIR
//   ckm_cli estimate  --scene DIR/scene.json --ckm DIR/ckm.bin --out DIR
//   ckm_cli run       [--preset desk] [--config f.ini] [--seed S] --out DIR
//   ckm_cli summarize DIR/metrics.csv --out DIR
//
// Errors are printed to stderr as one JSON object and the exit code is nonzero.

#include "ckm/ckm_io.hpp"
#include "ckm/harness.hpp"
#include "ckm/scene_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;

namespace
{

struct Common
{
    std::string preset = "desk";
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
};

void add_common(CLI::App *cmd, Common &c, bool with_out = true)
{
    cmd->add_option("--preset", c.preset, "Base parameter set")->check(CLI::IsMember({"desk", "paper"}));
    cmd->add_option("--config", c.config, "INI file overriding the preset")->check(CLI::ExistingFile);
    cmd->add_option("--seed", c.seed, "Base seed");
    if (with_out)
        cmd->add_option("--out", c.out, "Output directory");
}

ckm::ExperimentConfig resolve(const Common &c)
{
    ckm::ExperimentConfig cfg = ckm::preset(c.preset);
    if (!c.config.empty())
        cfg = ckm::load_config(c.config, cfg);
    if (c.seed)
        cfg.seed = *c.seed;
    cfg.output_dir = c.out;
    cfg.validate();
    return cfg;
}

fs::path out_dir(const std::string &dir)
{
    fs::create_directories(dir);
    return fs::path(dir);
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Channel knowledge map construction and CKM-assisted channel estimation"};
    app.require_subcommand(1);
    Common common;

    auto *sim = app.add_subcommand("simulate", "Generate a scene file");
    add_common(sim, common);
    std::optional<double> sim_sinr;
    std::optional<double> sim_d;
    sim->add_option("--sinr", sim_sinr, "Target SINR in dB (default: first sweep value)");
    sim->add_option("--d", sim_d, "Grid size in metres (default: first sweep value)");

    auto *con = app.add_subcommand("construct", "Build a CKM from a scene file");
    add_common(con, common);
    std::string con_scene, con_method = "proposed";
    std::optional<int> con_L;
    double con_split = 0.7;
    con->add_option("--scene", con_scene, "Scene file")->required()->check(CLI::ExistingFile);
    con->add_option("--method", con_method, "Construction method")
        ->check(CLI::IsMember({"proposed", "ici_non_cognitive", "omp_ckm"}));
    con->add_option("--L-bar", con_L, "Paths per grid (default: first sweep value)");
    con->add_option("--split", con_split, "Construction share of each grid's slots");

    auto *est = app.add_subcommand("estimate", "Estimate channels of a scene with a CKM");
    add_common(est, common);
    std::string est_scene, est_ckm, est_label = "proposed";
    double est_split = 0.7;
    est->add_option("--scene", est_scene, "Scene file")->required()->check(CLI::ExistingFile);
    est->add_option("--ckm", est_ckm, "Binary CKM file")->required()->check(CLI::ExistingFile);
    est->add_option("--label", est_label, "Method name written to the CSV");
    est->add_option("--split", est_split, "Construction share of each grid's slots");

    auto *run = app.add_subcommand("run", "End-to-end sweep");
    add_common(run, common);

    auto *sum = app.add_subcommand("summarize", "Aggregate a metrics file");
    std::string sum_in;
    sum->add_option("metrics", sum_in, "metrics.csv")->required()->check(CLI::ExistingFile);
    sum->add_option("--out", common.out, "Output directory");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp &e)
    {
        return app.exit(e);
    }
    catch (const CLI::CallForAllHelp &e)
    {
        return app.exit(e);
    }
    catch (const CLI::ParseError &e)
    {
        std::cerr << nlohmann::json{{"error", "usage"}, {"message", e.what()}}.dump() << "\n";
        return 2;
    }

    try
    {
        if (sim->parsed())
        {
            const auto cfg = resolve(common);
            ckm::SweepPoint p{sim_sinr.value_or(cfg.sinr_db.front()), cfg.L_bar.front(),
                              sim_d.value_or(cfg.grid_size_d.front())};
            const ckm::Scene scene = ckm::simulate_scene(ckm::scene_for(cfg, p, cfg.seed));
            const auto dir = out_dir(common.out);
            ckm::write_scene(scene, (dir / "scene.json").string());
            std::cout << (dir / "scene.json").string() << "\n";
        }
        else if (con->parsed())
        {
            const auto cfg = resolve(common);
            const ckm::Scene scene = ckm::read_scene(con_scene);
            ckm::MpConfig mp = cfg.mp;
            mp.L_bar = con_L.value_or(cfg.L_bar.front());
            mp.seed = cfg.seed;
            std::vector<ckm::ConstructResult> details;
            const ckm::CkmTable table = ckm::construct_table(scene, mp, con_split, con_method, &details);
            const auto dir = out_dir(common.out);
            ckm::write_ckm(table, (dir / "ckm.bin").string());
            ckm::write_text_file((dir / "ckm.txt").string(), ckm::ckm_to_text(table));
            std::string diag = "[\n";
            for (size_t i = 0; i < details.size(); ++i)
                diag += ckm::diagnostics_to_json(details[i].diag, static_cast<int>(i), details[i].iterations) +
                        (i + 1 < details.size() ? ",\n" : "");
            ckm::write_text_file((dir / "diagnostics.json").string(), diag + "]\n");
            std::cout << (dir / "ckm.bin").string() << "\n";
        }
        else if (est->parsed())
        {
            const auto cfg = resolve(common);
            const ckm::Scene scene = ckm::read_scene(est_scene);
            const ckm::CkmTable table = ckm::read_ckm(est_ckm);
            const auto rows = ckm::estimate_scene(scene, table, est_split, cfg.power_threshold_db, est_label);
            const auto dir = out_dir(common.out);
            ckm::write_text_file((dir / "estimates.csv").string(), ckm::estimates_csv(rows));
            std::cout << (dir / "estimates.csv").string() << "\n";
        }
        else if (run->parsed())
        {
            const auto cfg = resolve(common);
            const auto res = ckm::run_experiment(cfg);
            ckm::write_experiment(res, cfg.output_dir);
            ckm::write_text_file((fs::path(cfg.output_dir) / "config.ini").string(), ckm::config_to_ini(cfg));
            std::cout << ckm::summary_table(ckm::summarize(res.pooled));
        }
        else if (sum->parsed())
        {
            const auto rows = ckm::summarize(ckm::parse_metrics_csv(ckm::read_text_file(sum_in)));
            const auto dir = out_dir(common.out);
            ckm::write_text_file((dir / "summary.csv").string(), ckm::summary_csv(rows));
            const std::string table = ckm::summary_table(rows);
            ckm::write_text_file((dir / "summary.txt").string(), table);
            std::cout << table;
        }
    }
    catch (const std::invalid_argument &e)
    {
        std::cerr << nlohmann::json{{"error", "invalid_argument"}, {"message", e.what()}}.dump() << "\n";
        return 3;
    }
    catch (const std::exception &e)
    {
        std::cerr << nlohmann::json{{"error", "runtime"}, {"message", e.what()}}.dump() << "\n";
        return 1;
    }
    return 0;
}
