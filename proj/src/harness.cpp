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

#include "ckm/harness.hpp"
#include "ckm/baselines.hpp"
#include "ckm/estimator.hpp"
#include "ckm/scene_io.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>

namespace ckm
{

namespace
{
std::string num(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::string trim(const std::string &s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos)
        return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

template <class T> std::vector<T> parse_list(const std::string &s)
{
    std::vector<T> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
    {
        item = trim(item);
        if (item.empty())
            continue;
        std::istringstream is(item);
        T v{};
        if (!(is >> v) || !is.eof())
            throw std::invalid_argument("config: bad list element '" + item + "'");
        out.push_back(v);
    }
    if (out.empty())
        throw std::invalid_argument("config: empty list");
    return out;
}

template <class T> std::string join(const std::vector<T> &v)
{
    std::string out;
    for (size_t i = 0; i < v.size(); ++i)
    {
        if (i)
            out += ",";
        if constexpr (std::is_floating_point_v<T>)
            out += num(v[i]);
        else
            out += std::to_string(v[i]);
    }
    return out;
}

double to_db(double linear) { return 10.0 * std::log10(std::max(linear, 1e-20)); }

double from_db(double db) { return std::pow(10.0, db / 10.0); }

std::vector<Observation> gather(const Scene &scene, const std::vector<int> &idx)
{
    std::vector<Observation> out;
    for (int i : idx)
        out.push_back(scene.observations[static_cast<size_t>(i)]);
    return out;
}

// Running sums for one method over the estimation slots.
struct Accum
{
    double acc = 0.0;  // sum of |h - A A^+ h|^2 / (N M)
    double nmse = 0.0; // sum of |h_hat - h|^2 / |h|^2
    int slots = 0;
    double seconds = 0.0;
    int iterations = 0;
    std::string error;

    void add(const Accum &o)
    {
        acc += o.acc;
        nmse += o.nmse;
        slots += o.slots;
        seconds += o.seconds;
        iterations += o.iterations;
        if (error.empty())
            error = o.error;
    }
};

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Estimates every estimation slot with the CKM record and accumulates both metrics.
void score_ckm(const Scene &scene, const std::vector<int> &est, const CkmEntry &entry, double threshold_db, Accum &a)
{
    const ArrayDims &dims = scene.cfg.dims;
    const CMat A = ckm_dictionary(entry, dims);
    const CovFactors cov = build_cov(entry, dims);
    for (int i : est)
    {
        const auto &h = scene.truth[static_cast<size_t>(i)].h;
        const CVec r = pilot_equalize(scene.observations[static_cast<size_t>(i)], dims.N);
        const InterferenceCov q = estimate_interference_cov(r, entry, dims, threshold_db);
        const CVec hh = mmse_irc_fast(r, cov, q.Q);
        a.acc += from_db(projection_residual_db(A, {h}));
        a.nmse += (hh - h).squaredNorm() / h.squaredNorm();
        ++a.slots;
    }
}

std::vector<Accum> evaluate_grid(const ExperimentConfig &cfg, const Scene &scene, int q, const MpConfig &mp)
{
    const ArrayDims &dims = scene.cfg.dims;
    const SlotSplit split = split_slots(scene, q, cfg.split_ratio);
    const std::vector<Observation> obs = gather(scene, split.construction);
    const auto &names = method_names();
    std::vector<Accum> out(names.size());
    using clock = std::chrono::steady_clock;

    auto guarded = [&](size_t m, auto &&fn) {
        try
        {
            fn(out[m]);
        }
        catch (const std::exception &e)
        {
            out[m].error = e.what();
        }
    };

    CkmEntry proposed;
    bool have_proposed = false;
    guarded(0, [&](Accum &a) {
        const auto t0 = clock::now();
        const ConstructResult r = construct_ckm(obs, dims, mp);
        score_ckm(scene, split.estimation, r.entry, cfg.power_threshold_db, a);
        a.seconds = seconds_since(t0);
        a.iterations = r.iterations;
        proposed = r.entry;
        have_proposed = true;
    });
    guarded(1, [&](Accum &a) {
        const auto t0 = clock::now();
        const CkmEntry e = omp_baseline_ckm(obs, dims, mp.L_bar, mp.grid_oversample);
        score_ckm(scene, split.estimation, e, cfg.power_threshold_db, a);
        a.seconds = seconds_since(t0);
    });
    guarded(2, [&](Accum &a) {
        const auto t0 = clock::now();
        const ConstructResult r = ici_non_cognitive_ckm(obs, dims, mp);
        score_ckm(scene, split.estimation, r.entry, cfg.power_threshold_db, a);
        a.seconds = seconds_since(t0);
        a.iterations = r.iterations;
    });
    guarded(3, [&](Accum &a) {
        if (!have_proposed)
            throw std::runtime_error("lb: proposed construction failed");
        const auto t0 = clock::now();
        const CMat A = ckm_dictionary(proposed, dims);
        const double nm = static_cast<double>(dims.MN());
        for (int i : split.estimation)
        {
            const auto &h = scene.truth[static_cast<size_t>(i)].h;
            const double res = from_db(projection_residual_db(A, {h}));
            a.acc += res;
            a.nmse += res * nm / h.squaredNorm();
            ++a.slots;
        }
        a.seconds = seconds_since(t0);
    });
    guarded(4, [&](Accum &a) {
        const auto t0 = clock::now();
        for (int i : split.estimation)
        {
            const auto &h = scene.truth[static_cast<size_t>(i)].h;
            const CVec r = pilot_equalize(scene.observations[static_cast<size_t>(i)], dims.N);
            const OmpEstimate est = omp_channel_estimate(r, dims, mp.L_bar, mp.grid_oversample);
            a.acc += from_db(projection_residual_db(ckm_dictionary(est.atoms, dims), {h}));
            a.nmse += (est.h - h).squaredNorm() / h.squaredNorm();
            ++a.slots;
        }
        a.seconds = seconds_since(t0);
    });
    return out;
}

MetricsRow make_row(int point, const SweepPoint &p, std::uint64_t seed, int q, const std::string &method,
                    const Accum &a)
{
    MetricsRow row;
    row.experiment = point;
    row.seed = seed;
    row.grid_q = q;
    row.sinr_db = p.sinr_db;
    row.L_bar = p.L_bar;
    row.d = p.d;
    row.method = method;
    row.wall_time_s = a.seconds;
    row.iterations = a.iterations;
    if (!a.error.empty())
    {
        row.status = "error: " + a.error;
        row.ckm_accuracy_db = row.nmse_db = std::nan("");
    }
    else if (a.slots == 0)
    {
        row.status = "error: no estimation slots";
        row.ckm_accuracy_db = row.nmse_db = std::nan("");
    }
    else
    {
        row.ckm_accuracy_db = to_db(a.acc / a.slots);
        row.nmse_db = to_db(a.nmse / a.slots);
    }
    return row;
}

std::string opt_num(double v) { return std::isfinite(v) ? num(v) : ""; }

double parse_num(const std::string &s)
{
    if (s.empty())
        return std::nan("");
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size())
        throw std::invalid_argument("metrics: bad number '" + s + "'");
    return v;
}

const char *kMetricsHeader = "experiment,seed,grid_q,sinr_db,L_bar,d,method,ckm_accuracy_db,nmse_db,iterations,status";
} // namespace

void ExperimentConfig::validate() const
{
    mp.validate();
    if (!(split_ratio > 0.0 && split_ratio < 1.0))
        throw std::invalid_argument("ExperimentConfig: split_ratio must lie in (0, 1)");
    if (replications < 1)
        throw std::invalid_argument("ExperimentConfig: replications must be >= 1");
    if (sinr_db.empty() || L_bar.empty() || grid_size_d.empty())
        throw std::invalid_argument("ExperimentConfig: sweep axes must be non-empty");
    for (int l : L_bar)
        if (l < 1)
            throw std::invalid_argument("ExperimentConfig: L_bar values must be >= 1");
    for (double d : grid_size_d)
        if (!(d > 0.0) || std::lround(slots_per_metre * d) < 2)
            throw std::invalid_argument("ExperimentConfig: each grid needs at least two slots");
    if (threads < 0)
        throw std::invalid_argument("ExperimentConfig: threads must be >= 0");
    SceneConfig s = scene;
    s.grid_size_d = grid_size_d.front();
    s.validate();
}

ExperimentConfig preset(const std::string &name)
{
    ExperimentConfig c;
    if (name == "desk")
    {
        c.scene.dims = ArrayDims{4, 4, 64};
        c.scene.num_grids = 4;
        c.scene.L_true = 10;
        c.scene.K = 2;
        c.scene.L_I = 4;
        c.scene.interferer_activity = 0.5;
        c.scene.intra_grid_jitter = true;
        c.mp.L_bar_I = 4;
        c.sinr_db = {-5.0, 5.0};
        c.L_bar = {4, 8, 12};
        c.grid_size_d = {2.0};
        c.replications = 2;
        return c;
    }
    if (name == "paper")
    {
        c.scene.dims = ArrayDims{4, 8, 192};
        c.scene.num_grids = 4;
        c.scene.L_true = 60;
        c.scene.K = 4;
        c.scene.L_I = 15;
        c.scene.interferer_activity = 0.5;
        c.scene.intra_grid_jitter = true;
        c.mp.L_bar_I = 15;
        c.mp.max_iters = 40;
        c.sinr_db = {-10.0, -5.0, 0.0, 5.0, 10.0};
        c.L_bar = {20, 40, 60};
        c.grid_size_d = {2.0};
        c.replications = 10;
        return c;
    }
    throw std::invalid_argument("unknown preset '" + name + "' (expected desk or paper)");
}

ExperimentConfig parse_config(const std::string &ini_text, const ExperimentConfig &base)
{
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream in(ini_text);
    try
    {
        pt::read_ini(in, tree);
    }
    catch (const pt::ini_parser_error &e)
    {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }

    ExperimentConfig c = base;
    SceneConfig &s = c.scene;
    MpConfig &m = c.mp;

    using Setter = std::function<void(const std::string &)>;
    auto i = [](int &dst) { return Setter([&dst](const std::string &v) { dst = std::stoi(v); }); };
    auto d = [](double &dst) { return Setter([&dst](const std::string &v) { dst = std::stod(v); }); };
    auto u = [](std::uint64_t &dst) { return Setter([&dst](const std::string &v) { dst = std::stoull(v); }); };
    auto b = [](bool &dst) {
        return Setter([&dst](const std::string &v) {
            if (v == "true" || v == "1")
                dst = true;
            else if (v == "false" || v == "0")
                dst = false;
            else
                throw std::invalid_argument("expected true or false");
        });
    };

    const std::map<std::string, Setter> keys{
        {"scene.M1", i(s.dims.M1)},
        {"scene.M2", i(s.dims.M2)},
        {"scene.N", i(s.dims.N)},
        {"scene.subcarrier_spacing", d(s.subcarrier_spacing)},
        {"scene.num_grids", i(s.num_grids)},
        {"scene.L_true", i(s.L_true)},
        {"scene.K", i(s.K)},
        {"scene.L_I", i(s.L_I)},
        {"scene.interferer_activity", d(s.interferer_activity)},
        {"scene.inr_db", d(s.inr_db)},
        {"scene.max_delay", d(s.max_delay)},
        {"scene.azimuth_sector_deg", d(s.azimuth_sector_deg)},
        {"scene.zenith_sector_deg", d(s.zenith_sector_deg)},
        {"scene.power_decay", d(s.power_decay)},
        {"scene.shadow_db", d(s.shadow_db)},
        {"scene.delay_drift_s_per_m", d(s.delay_drift_s_per_m)},
        {"scene.angle_drift_rad_per_m", d(s.angle_drift_rad_per_m)},
        {"scene.intra_grid_jitter", b(s.intra_grid_jitter)},
        {"mp.L_bar_I", i(m.L_bar_I)},
        {"mp.max_iters", i(m.max_iters)},
        {"mp.init_kappa", d(m.init_kappa)},
        {"mp.newton_steps", i(m.newton_steps)},
        {"mp.grid_oversample", i(m.grid_oversample)},
        {"mp.damping", d(m.damping)},
        {"mp.cancel_interference", b(m.cancel_interference)},
        {"mp.init",
         [&m](const std::string &v) {
             if (v == "greedy")
                 m.init = InitMode::greedy;
             else if (v == "random")
                 m.init = InitMode::random;
             else
                 throw std::invalid_argument("expected greedy or random");
         }},
        {"sweep.sinr_db", [&c](const std::string &v) { c.sinr_db = parse_list<double>(v); }},
        {"sweep.L_bar", [&c](const std::string &v) { c.L_bar = parse_list<int>(v); }},
        {"sweep.grid_size_d", [&c](const std::string &v) { c.grid_size_d = parse_list<double>(v); }},
        {"run.seed", u(c.seed)},
        {"run.replications", i(c.replications)},
        {"run.split_ratio", d(c.split_ratio)},
        {"run.slots_per_metre", d(c.slots_per_metre)},
        {"run.power_threshold_db", d(c.power_threshold_db)},
        {"run.threads", i(c.threads)},
        {"run.output_dir", [&c](const std::string &v) { c.output_dir = v; }},
    };

    for (const auto &[section, body] : tree)
    {
        if (body.empty() && !body.data().empty())
            throw std::invalid_argument("config: key '" + section + "' outside a section");
        for (const auto &[key, value] : body)
        {
            const std::string full = section + "." + key;
            const auto it = keys.find(full);
            if (it == keys.end())
                throw std::invalid_argument("config: unknown key '" + full + "'");
            try
            {
                it->second(trim(value.data()));
            }
            catch (const std::exception &e)
            {
                throw std::invalid_argument("config: bad value for '" + full + "': " + e.what());
            }
        }
    }
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::string &path, const ExperimentConfig &base)
{
    return parse_config(read_text_file(path), base);
}

std::string config_to_ini(const ExperimentConfig &c)
{
    const SceneConfig &s = c.scene;
    const MpConfig &m = c.mp;
    std::ostringstream o;
    o << "[scene]\n"
      << "M1 = " << s.dims.M1 << "\nM2 = " << s.dims.M2 << "\nN = " << s.dims.N
      << "\nsubcarrier_spacing = " << num(s.subcarrier_spacing) << "\nnum_grids = " << s.num_grids
      << "\nL_true = " << s.L_true << "\nK = " << s.K << "\nL_I = " << s.L_I
      << "\ninterferer_activity = " << num(s.interferer_activity) << "\ninr_db = " << num(s.inr_db)
      << "\nmax_delay = " << num(s.max_delay) << "\nazimuth_sector_deg = " << num(s.azimuth_sector_deg)
      << "\nzenith_sector_deg = " << num(s.zenith_sector_deg) << "\npower_decay = " << num(s.power_decay)
      << "\nshadow_db = " << num(s.shadow_db) << "\ndelay_drift_s_per_m = " << num(s.delay_drift_s_per_m)
      << "\nangle_drift_rad_per_m = " << num(s.angle_drift_rad_per_m)
      << "\nintra_grid_jitter = " << (s.intra_grid_jitter ? "true" : "false") << "\n\n[mp]\n"
      << "L_bar_I = " << m.L_bar_I << "\nmax_iters = " << m.max_iters << "\ninit_kappa = " << num(m.init_kappa)
      << "\nnewton_steps = " << m.newton_steps << "\ngrid_oversample = " << m.grid_oversample
      << "\ndamping = " << num(m.damping) << "\ncancel_interference = " << (m.cancel_interference ? "true" : "false")
      << "\ninit = " << (m.init == InitMode::greedy ? "greedy" : "random") << "\n\n[sweep]\n"
      << "sinr_db = " << join(c.sinr_db) << "\nL_bar = " << join(c.L_bar) << "\ngrid_size_d = " << join(c.grid_size_d)
      << "\n\n[run]\n"
      << "seed = " << c.seed << "\nreplications = " << c.replications << "\nsplit_ratio = " << num(c.split_ratio)
      << "\nslots_per_metre = " << num(c.slots_per_metre) << "\npower_threshold_db = " << num(c.power_threshold_db)
      << "\nthreads = " << c.threads << "\noutput_dir = " << c.output_dir << "\n";
    return o.str();
}

std::vector<SweepPoint> sweep_points(const ExperimentConfig &cfg)
{
    std::vector<SweepPoint> pts;
    for (double s : cfg.sinr_db)
        for (int l : cfg.L_bar)
            for (double d : cfg.grid_size_d)
                pts.push_back(SweepPoint{s, l, d});
    return pts;
}

SceneConfig scene_for(const ExperimentConfig &cfg, const SweepPoint &p, std::uint64_t seed)
{
    SceneConfig s = cfg.scene;
    s.seed = seed;
    s.grid_size_d = p.d;
    s.slots_per_grid = static_cast<int>(std::lround(cfg.slots_per_metre * p.d));
    return calibrate_sinr(s, p.sinr_db);
}

ExperimentResult run_experiment(const ExperimentConfig &cfg)
{
    cfg.validate();
    const auto points = sweep_points(cfg);
    const auto &names = method_names();
    struct Job
    {
        int point;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (size_t p = 0; p < points.size(); ++p)
        for (int r = 0; r < cfg.replications; ++r)
            jobs.push_back(Job{static_cast<int>(p), cfg.seed + static_cast<std::uint64_t>(r)});

    struct JobOut
    {
        std::vector<MetricsRow> pooled, per_grid;
    };
    std::vector<JobOut> outs(jobs.size());

    auto run_job = [&](size_t j) {
        const Job &job = jobs[j];
        const SweepPoint &p = points[static_cast<size_t>(job.point)];
        JobOut &o = outs[j];
        std::vector<Accum> pooled(names.size());
        try
        {
            const Scene scene = simulate_scene(scene_for(cfg, p, job.seed));
            MpConfig mp = cfg.mp;
            mp.L_bar = p.L_bar;
            mp.seed = job.seed;
            for (int q = 0; q < scene.cfg.num_grids; ++q)
            {
                const auto per = evaluate_grid(cfg, scene, q, mp);
                for (size_t m = 0; m < names.size(); ++m)
                {
                    o.per_grid.push_back(make_row(job.point, p, job.seed, q, names[m], per[m]));
                    pooled[m].add(per[m]);
                }
            }
        }
        catch (const std::exception &e)
        {
            for (auto &a : pooled)
                a.error = e.what();
        }
        for (size_t m = 0; m < names.size(); ++m)
            o.pooled.push_back(make_row(job.point, p, job.seed, -1, names[m], pooled[m]));
    };

    unsigned workers = cfg.threads > 0 ? static_cast<unsigned>(cfg.threads) : std::thread::hardware_concurrency();
    workers = std::clamp<unsigned>(workers, 1u, static_cast<unsigned>(std::max<size_t>(jobs.size(), 1)));
    std::atomic<size_t> next{0};
    auto worker = [&] {
        for (size_t j = next++; j < jobs.size(); j = next++)
            run_job(j);
    };
    if (workers == 1)
        worker();
    else
    {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back(worker);
        for (auto &t : pool)
            t.join();
    }

    ExperimentResult res;
    for (auto &o : outs)
    {
        res.pooled.insert(res.pooled.end(), o.pooled.begin(), o.pooled.end());
        res.per_grid.insert(res.per_grid.end(), o.per_grid.begin(), o.per_grid.end());
    }
    return res;
}

std::string csv_field(const std::string &s)
{
    if (s.find_first_of(",\"\r\n") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char ch : s)
    {
        if (ch == '"')
            out += '"';
        out += ch;
    }
    return out + "\"";
}

std::vector<std::vector<std::string>> parse_csv(const std::string &text)
{
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false, any = false;
    for (size_t i = 0; i < text.size(); ++i)
    {
        const char ch = text[i];
        if (quoted)
        {
            if (ch == '"')
            {
                if (i + 1 < text.size() && text[i + 1] == '"')
                {
                    field += '"';
                    ++i;
                }
                else
                    quoted = false;
            }
            else
                field += ch;
            continue;
        }
        if (ch == '"')
        {
            quoted = true;
            any = true;
        }
        else if (ch == ',')
        {
            row.push_back(std::move(field));
            field.clear();
            any = true;
        }
        else if (ch == '\r' || ch == '\n')
        {
            if (ch == '\r' && i + 1 < text.size() && text[i + 1] == '\n')
                ++i;
            if (any || !field.empty())
            {
                row.push_back(std::move(field));
                rows.push_back(std::move(row));
            }
            field.clear();
            row.clear();
            any = false;
        }
        else
        {
            field += ch;
            any = true;
        }
    }
    if (quoted)
        throw std::invalid_argument("csv: unterminated quoted field");
    if (any || !field.empty())
    {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string metrics_csv(const std::vector<MetricsRow> &rows)
{
    std::string out = std::string(kMetricsHeader) + "\r\n";
    for (const auto &r : rows)
        out += std::to_string(r.experiment) + "," + std::to_string(r.seed) + "," + std::to_string(r.grid_q) + "," +
               num(r.sinr_db) + "," + std::to_string(r.L_bar) + "," + num(r.d) + "," + csv_field(r.method) + "," +
               opt_num(r.ckm_accuracy_db) + "," + opt_num(r.nmse_db) + "," + std::to_string(r.iterations) + "," +
               csv_field(r.status) + "\r\n";
    return out;
}

std::string timings_csv(const std::vector<MetricsRow> &rows)
{
    std::string out = "experiment,seed,grid_q,method,wall_time_s,iterations\r\n";
    for (const auto &r : rows)
        out += std::to_string(r.experiment) + "," + std::to_string(r.seed) + "," + std::to_string(r.grid_q) + "," +
               csv_field(r.method) + "," + num(r.wall_time_s) + "," + std::to_string(r.iterations) + "\r\n";
    return out;
}

std::vector<MetricsRow> parse_metrics_csv(const std::string &text)
{
    const auto rows = parse_csv(text);
    if (rows.empty())
        throw std::invalid_argument("metrics: empty file");
    std::string header;
    for (size_t i = 0; i < rows[0].size(); ++i)
        header += (i ? "," : "") + rows[0][i];
    if (header != kMetricsHeader)
        throw std::invalid_argument("metrics: unexpected header");
    std::vector<MetricsRow> out;
    for (size_t i = 1; i < rows.size(); ++i)
    {
        const auto &f = rows[i];
        if (f.size() != 11)
            throw std::invalid_argument("metrics: row " + std::to_string(i) + " has " + std::to_string(f.size()) +
                                        " fields");
        MetricsRow r;
        r.experiment = std::stoi(f[0]);
        r.seed = std::stoull(f[1]);
        r.grid_q = std::stoi(f[2]);
        r.sinr_db = parse_num(f[3]);
        r.L_bar = std::stoi(f[4]);
        r.d = parse_num(f[5]);
        r.method = f[6];
        r.ckm_accuracy_db = parse_num(f[7]);
        r.nmse_db = parse_num(f[8]);
        r.iterations = std::stoi(f[9]);
        r.status = f[10];
        out.push_back(std::move(r));
    }
    return out;
}

void write_experiment(const ExperimentResult &res, const std::string &dir)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw std::runtime_error("cannot create " + dir + ": " + ec.message());
    const std::filesystem::path base(dir);
    write_text_file((base / "metrics.csv").string(), metrics_csv(res.pooled));
    write_text_file((base / "grid_metrics.csv").string(), metrics_csv(res.per_grid));
    std::vector<MetricsRow> all = res.pooled;
    all.insert(all.end(), res.per_grid.begin(), res.per_grid.end());
    write_text_file((base / "timings.csv").string(), timings_csv(all));
}

std::vector<SummaryRow> summarize(const std::vector<MetricsRow> &rows)
{
    if (rows.empty())
        throw std::invalid_argument("summarize: no rows");

    using Key = std::tuple<int, double, int, double, std::string>;
    std::vector<Key> order;
    std::map<Key, std::vector<const MetricsRow *>> groups;
    for (const auto &r : rows)
    {
        const Key k{r.experiment, r.sinr_db, r.L_bar, r.d, r.method};
        auto it = groups.find(k);
        if (it == groups.end())
        {
            order.push_back(k);
            it = groups.emplace(k, std::vector<const MetricsRow *>{}).first;
        }
        if (r.status == "ok" && std::isfinite(r.ckm_accuracy_db) && std::isfinite(r.nmse_db))
            it->second.push_back(&r);
    }

    auto stats = [](const std::vector<double> &v, double &mean, double &sd) {
        mean = sd = 0.0;
        if (v.empty())
        {
            mean = sd = std::nan("");
            return;
        }
        for (double x : v)
            mean += x;
        mean /= static_cast<double>(v.size());
        if (v.size() > 1)
        {
            for (double x : v)
                sd += (x - mean) * (x - mean);
            sd = std::sqrt(sd / static_cast<double>(v.size() - 1));
        }
    };

    std::vector<SummaryRow> out;
    for (const auto &k : order)
    {
        const auto &g = groups.at(k);
        SummaryRow s;
        std::tie(s.experiment, s.sinr_db, s.L_bar, s.d, s.method) = k;
        s.count = static_cast<int>(g.size());
        std::vector<double> acc, nm;
        for (const auto *r : g)
        {
            acc.push_back(r->ckm_accuracy_db);
            nm.push_back(r->nmse_db);
        }
        stats(acc, s.ckm_accuracy_mean, s.ckm_accuracy_std);
        stats(nm, s.nmse_mean, s.nmse_std);
        out.push_back(std::move(s));
    }
    return out;
}

std::string summary_csv(const std::vector<SummaryRow> &rows)
{
    std::string out =
        "experiment,sinr_db,L_bar,d,method,count,ckm_accuracy_mean_db,ckm_accuracy_std_db,nmse_mean_db,nmse_std_db\r\n";
    for (const auto &r : rows)
        out += std::to_string(r.experiment) + "," + num(r.sinr_db) + "," + std::to_string(r.L_bar) + "," + num(r.d) +
               "," + csv_field(r.method) + "," + std::to_string(r.count) + "," + opt_num(r.ckm_accuracy_mean) + "," +
               opt_num(r.ckm_accuracy_std) + "," + opt_num(r.nmse_mean) + "," + opt_num(r.nmse_std) + "\r\n";
    return out;
}

std::string summary_table(const std::vector<SummaryRow> &rows)
{
    std::vector<std::vector<std::string>> cells{
        {"exp", "sinr_db", "L_bar", "d", "method", "n", "acc_mean", "acc_std", "nmse_mean", "nmse_std"}};
    auto fixed = [](double v) {
        if (!std::isfinite(v))
            return std::string("-");
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", v);
        return std::string(buf);
    };
    for (const auto &r : rows)
        cells.push_back({std::to_string(r.experiment), num(r.sinr_db), std::to_string(r.L_bar), num(r.d), r.method,
                         std::to_string(r.count), fixed(r.ckm_accuracy_mean), fixed(r.ckm_accuracy_std),
                         fixed(r.nmse_mean), fixed(r.nmse_std)});
    std::vector<size_t> width(cells[0].size(), 0);
    for (const auto &row : cells)
        for (size_t c = 0; c < row.size(); ++c)
            width[c] = std::max(width[c], row[c].size());
    std::string out;
    for (const auto &row : cells)
    {
        for (size_t c = 0; c < row.size(); ++c)
        {
            const std::string pad(width[c] - row[c].size(), ' ');
            // Text columns left-aligned, numbers right-aligned.
            out += (c == 4) ? row[c] + pad : pad + row[c];
            out += (c + 1 < row.size()) ? "  " : "\n";
        }
    }
    return out;
}

CkmTable construct_table(const Scene &scene, const MpConfig &mp, double split_ratio, const std::string &method,
                         std::vector<ConstructResult> *details)
{
    CkmTable t;
    t.dims = scene.cfg.dims;
    t.L_bar = mp.L_bar;
    for (int q = 0; q < scene.cfg.num_grids; ++q)
    {
        const auto obs = gather(scene, split_slots(scene, q, split_ratio).construction);
        ConstructResult r;
        if (method == "proposed")
            r = construct_ckm(obs, scene.cfg.dims, mp);
        else if (method == "ici_non_cognitive")
            r = ici_non_cognitive_ckm(obs, scene.cfg.dims, mp);
        else if (method == "omp_ckm")
            r.entry = omp_baseline_ckm(obs, scene.cfg.dims, mp.L_bar, mp.grid_oversample);
        else
            throw std::invalid_argument("unknown construction method '" + method + "'");
        r.entry.grid_q = q;
        t.grids.push_back(r.entry);
        if (details)
            details->push_back(std::move(r));
    }
    return t;
}

std::vector<EstimateRow> estimate_scene(const Scene &scene, const CkmTable &table, double split_ratio,
                                        double power_threshold_db, const std::string &method_label)
{
    if (!(table.dims == scene.cfg.dims))
        throw std::invalid_argument("estimate: CKM dimensions do not match the scene");
    std::vector<EstimateRow> out;
    for (int q = 0; q < scene.cfg.num_grids; ++q)
    {
        const CkmEntry &e = table.entry(q);
        const CovFactors cov = build_cov(e, scene.cfg.dims);
        for (int i : split_slots(scene, q, split_ratio).estimation)
        {
            const auto &obs = scene.observations[static_cast<size_t>(i)];
            const auto &h = scene.truth[static_cast<size_t>(i)].h;
            const CVec r = pilot_equalize(obs, scene.cfg.dims.N);
            const InterferenceCov ic = estimate_interference_cov(r, e, scene.cfg.dims, power_threshold_db);
            const CVec hh = mmse_irc_fast(r, cov, ic.Q);
            out.push_back(EstimateRow{obs.slot_t, q, scene.cfg.sinr_db, method_label,
                                      to_db((hh - h).squaredNorm() / h.squaredNorm())});
        }
    }
    return out;
}

std::string estimates_csv(const std::vector<EstimateRow> &rows)
{
    std::string out = "slot,grid,sinr_db,method,nmse_db\r\n";
    for (const auto &r : rows)
        out += std::to_string(r.slot) + "," + std::to_string(r.grid) + "," + num(r.sinr_db) + "," +
               csv_field(r.method) + "," + num(r.nmse_db) + "\r\n";
    return out;
}

} // namespace ckm
