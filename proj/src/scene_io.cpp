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

#include "ckm/scene_io.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ckm
{

using json = nlohmann::ordered_json;

namespace
{
json cvec_to_json(const CVec &v)
{
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i)
    {
        a.push_back(v(i).real());
        a.push_back(v(i).imag());
    }
    return a;
}

CVec cvec_from_json(const json &a)
{
    if (!a.is_array() || a.size() % 2 != 0)
        throw std::runtime_error("scene file: complex vector must be an even-length array");
    CVec v(static_cast<Eigen::Index>(a.size() / 2));
    for (Eigen::Index i = 0; i < v.size(); ++i)
        v(i) = cplx(a.at(2 * i).get<double>(), a.at(2 * i + 1).get<double>());
    return v;
}

json pathset_to_json(const PathSet &ps)
{
    json a = json::array();
    for (const auto &p : ps.paths)
        a.push_back(json::array({p.rho, p.params.tau, p.params.theta, p.params.phi}));
    return a;
}

PathSet pathset_from_json(const json &a)
{
    PathSet ps;
    for (const auto &row : a)
    {
        if (!row.is_array() || row.size() != 4)
            throw std::runtime_error("scene file: path rows are [rho, tau, theta, phi]");
        ps.paths.push_back(Path{row[0].get<double>(),
                                SteeringParams{row[1].get<double>(), row[2].get<double>(), row[3].get<double>()}});
    }
    return ps;
}

json mask_to_json(const std::vector<std::uint8_t> &m)
{
    json a = json::array();
    for (auto b : m)
        a.push_back(static_cast<int>(b));
    return a;
}

std::vector<std::uint8_t> mask_from_json(const json &a)
{
    std::vector<std::uint8_t> m;
    for (const auto &b : a)
        m.push_back(static_cast<std::uint8_t>(b.get<int>() != 0));
    return m;
}

json config_json(const SceneConfig &c)
{
    json j;
    j["M1"] = c.dims.M1;
    j["M2"] = c.dims.M2;
    j["N"] = c.dims.N;
    j["subcarrier_spacing"] = c.subcarrier_spacing;
    j["grid_size_d"] = c.grid_size_d;
    j["num_grids"] = c.num_grids;
    j["slots_per_grid"] = c.slots_per_grid;
    j["L_true"] = c.L_true;
    j["K"] = c.K;
    j["L_I"] = c.L_I;
    j["interferer_activity"] = c.interferer_activity;
    j["user_power"] = c.user_power;
    j["interferer_power"] = c.interferer_power;
    j["noise_var"] = c.noise_var;
    j["inr_db"] = c.inr_db;
    j["sinr_db"] = c.sinr_db;
    j["max_delay"] = c.max_delay;
    j["azimuth_sector_deg"] = c.azimuth_sector_deg;
    j["zenith_sector_deg"] = c.zenith_sector_deg;
    j["power_decay"] = c.power_decay;
    j["shadow_db"] = c.shadow_db;
    j["delay_drift_s_per_m"] = c.delay_drift_s_per_m;
    j["angle_drift_rad_per_m"] = c.angle_drift_rad_per_m;
    j["intra_grid_jitter"] = c.intra_grid_jitter;
    j["seed"] = c.seed;
    return j;
}

SceneConfig config_from(const json &j)
{
    SceneConfig c;
    c.dims.M1 = j.at("M1").get<int>();
    c.dims.M2 = j.at("M2").get<int>();
    c.dims.N = j.at("N").get<int>();
    c.subcarrier_spacing = j.at("subcarrier_spacing").get<double>();
    c.grid_size_d = j.at("grid_size_d").get<double>();
    c.num_grids = j.at("num_grids").get<int>();
    c.slots_per_grid = j.at("slots_per_grid").get<int>();
    c.L_true = j.at("L_true").get<int>();
    c.K = j.at("K").get<int>();
    c.L_I = j.at("L_I").get<int>();
    c.interferer_activity = j.at("interferer_activity").get<double>();
    c.user_power = j.at("user_power").get<double>();
    c.interferer_power = j.at("interferer_power").get<double>();
    c.noise_var = j.at("noise_var").get<double>();
    c.inr_db = j.at("inr_db").get<double>();
    c.sinr_db = j.at("sinr_db").get<double>();
    c.max_delay = j.at("max_delay").get<double>();
    c.azimuth_sector_deg = j.at("azimuth_sector_deg").get<double>();
    c.zenith_sector_deg = j.at("zenith_sector_deg").get<double>();
    c.power_decay = j.at("power_decay").get<double>();
    c.shadow_db = j.at("shadow_db").get<double>();
    c.delay_drift_s_per_m = j.at("delay_drift_s_per_m").get<double>();
    c.angle_drift_rad_per_m = j.at("angle_drift_rad_per_m").get<double>();
    c.intra_grid_jitter = j.at("intra_grid_jitter").get<bool>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.validate();
    return c;
}

json parse(const std::string &text)
{
    try
    {
        return json::parse(text);
    }
    catch (const json::parse_error &e)
    {
        throw std::runtime_error(std::string("scene file: ") + e.what());
    }
}
} // namespace

std::string scene_config_to_json(const SceneConfig &cfg) { return config_json(cfg).dump(2) + "\n"; }

SceneConfig scene_config_from_json(const std::string &text) { return config_from(parse(text)); }

std::string scene_to_json(const Scene &s)
{
    json j;
    j["schema"] = kSceneSchema;
    j["config"] = config_json(s.cfg);

    json geo;
    geo["user"] = json::array();
    for (const auto &ps : s.geometry.user)
        geo["user"].push_back(pathset_to_json(ps));
    geo["user_drift"] = json::array();
    for (const auto &d : s.geometry.user_drift)
        geo["user_drift"].push_back(json::array({d.tau, d.theta, d.phi}));
    geo["interferers"] = json::array();
    for (const auto &ps : s.geometry.interferers)
        geo["interferers"].push_back(pathset_to_json(ps));
    geo["interferer_on"] = mask_to_json(s.geometry.interferer_on);
    j["geometry"] = std::move(geo);

    j["observations"] = json::array();
    for (const auto &o : s.observations)
    {
        json jo;
        jo["slot_t"] = o.slot_t;
        jo["grid_q"] = o.grid_q;
        jo["active_mask"] = mask_to_json(o.active_mask);
        jo["pilot_user"] = cvec_to_json(o.pilot_user);
        jo["pilot_interferers"] = json::array();
        for (const auto &p : o.pilot_interferers)
            jo["pilot_interferers"].push_back(cvec_to_json(p));
        jo["y"] = cvec_to_json(o.y);
        j["observations"].push_back(std::move(jo));
    }

    j["truth"] = json::array();
    for (const auto &t : s.truth)
    {
        json jt;
        jt["slot_t"] = t.slot_t;
        jt["grid_q"] = t.grid_q;
        jt["user_paths"] = pathset_to_json(t.user_paths);
        jt["alphas"] = cvec_to_json(t.alphas);
        jt["interferer_alphas"] = json::array();
        for (const auto &a : t.interferer_alphas)
            jt["interferer_alphas"].push_back(cvec_to_json(a));
        jt["h"] = cvec_to_json(t.h);
        jt["signal_energy"] = t.signal_energy;
        jt["interference_energy"] = t.interference_energy;
        jt["noise_energy"] = t.noise_energy;
        j["truth"].push_back(std::move(jt));
    }
    return j.dump() + "\n";
}

Scene scene_from_json(const std::string &text)
{
    const json j = parse(text);
    try
    {
        if (j.at("schema").get<std::string>() != kSceneSchema)
            throw std::runtime_error("scene file: unsupported schema " + j.at("schema").get<std::string>());
        Scene s;
        s.cfg = config_from(j.at("config"));

        const json &geo = j.at("geometry");
        for (const auto &ps : geo.at("user"))
            s.geometry.user.push_back(pathset_from_json(ps));
        for (const auto &d : geo.at("user_drift"))
            s.geometry.user_drift.push_back(PathDrift{d.at(0).get<double>(), d.at(1).get<double>(), d.at(2).get<double>()});
        for (const auto &ps : geo.at("interferers"))
            s.geometry.interferers.push_back(pathset_from_json(ps));
        s.geometry.interferer_on = mask_from_json(geo.at("interferer_on"));

        const int MN = s.cfg.dims.MN();
        for (const auto &jo : j.at("observations"))
        {
            Observation o;
            o.slot_t = jo.at("slot_t").get<int>();
            o.grid_q = jo.at("grid_q").get<int>();
            o.active_mask = mask_from_json(jo.at("active_mask"));
            o.pilot_user = cvec_from_json(jo.at("pilot_user"));
            for (const auto &p : jo.at("pilot_interferers"))
                o.pilot_interferers.push_back(cvec_from_json(p));
            o.y = cvec_from_json(jo.at("y"));
            if (o.y.size() != MN || o.pilot_user.size() != s.cfg.dims.N)
                throw std::runtime_error("scene file: observation size does not match the array");
            s.observations.push_back(std::move(o));
        }
        for (const auto &jt : j.at("truth"))
        {
            SlotTruth t;
            t.slot_t = jt.at("slot_t").get<int>();
            t.grid_q = jt.at("grid_q").get<int>();
            t.user_paths = pathset_from_json(jt.at("user_paths"));
            t.alphas = cvec_from_json(jt.at("alphas"));
            for (const auto &a : jt.at("interferer_alphas"))
                t.interferer_alphas.push_back(cvec_from_json(a));
            t.h = cvec_from_json(jt.at("h"));
            t.signal_energy = jt.at("signal_energy").get<double>();
            t.interference_energy = jt.at("interference_energy").get<double>();
            t.noise_energy = jt.at("noise_energy").get<double>();
            s.truth.push_back(std::move(t));
        }
        return s;
    }
    catch (const json::exception &e)
    {
        throw std::runtime_error(std::string("scene file: ") + e.what());
    }
}

std::string read_text_file(const std::string &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string &path, const std::string &content)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot write " + path);
    out << content;
    if (!out)
        throw std::runtime_error("write failed: " + path);
}

void write_scene(const Scene &scene, const std::string &path) { write_text_file(path, scene_to_json(scene)); }

Scene read_scene(const std::string &path) { return scene_from_json(read_text_file(path)); }

} // namespace ckm
