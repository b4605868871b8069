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

#include "ckm/ckm_io.hpp"
#include "ckm/scene_io.hpp"

#include <json.hpp>

#include <bit>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace ckm
{

namespace
{
constexpr char kMagic[4] = {'C', 'K', 'M', '\0'};

void put_u32(std::string &out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i)
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_f64(std::string &out, double d)
{
    const auto v = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i)
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

class Reader
{
public:
    explicit Reader(const std::string &b) : b_(b) {}

    std::uint32_t u32()
    {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }

    double f64()
    {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return std::bit_cast<double>(v);
    }

    bool done() const { return pos_ == b_.size(); }

private:
    void need(std::size_t n) const
    {
        if (pos_ + n > b_.size())
            throw std::runtime_error("CKM file: truncated");
    }

    const std::string &b_;
    std::size_t pos_ = 0;
};

void check_table(const CkmTable &t)
{
    for (const auto &e : t.grids)
        if (static_cast<int>(e.paths.size()) != t.L_bar)
            throw std::invalid_argument("CKM table: every record must hold exactly L_bar paths");
}

std::string g17(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}
} // namespace

std::string ckm_to_bytes(const CkmTable &t)
{
    check_table(t);
    std::string out(kMagic, 4);
    put_u32(out, kCkmFormatVersion);
    put_u32(out, static_cast<std::uint32_t>(t.dims.M1));
    put_u32(out, static_cast<std::uint32_t>(t.dims.M2));
    put_u32(out, static_cast<std::uint32_t>(t.dims.N));
    put_u32(out, static_cast<std::uint32_t>(t.L_bar));
    put_u32(out, static_cast<std::uint32_t>(t.grids.size()));
    for (const auto &e : t.grids)
    {
        put_u32(out, static_cast<std::uint32_t>(e.grid_q));
        for (const auto &p : e.paths)
        {
            put_f64(out, p.tau);
            put_f64(out, p.theta);
            put_f64(out, p.phi);
            put_f64(out, p.rho);
        }
    }
    return out;
}

CkmTable ckm_from_bytes(const std::string &bytes)
{
    if (bytes.size() < 4 || bytes.compare(0, 4, std::string(kMagic, 4)) != 0)
        throw std::runtime_error("CKM file: bad magic");
    const std::string body = bytes.substr(4);
    Reader rd(body);
    const auto version = rd.u32();
    if (version != kCkmFormatVersion)
        throw std::runtime_error("CKM file: unsupported version " + std::to_string(version));
    CkmTable t;
    t.dims.M1 = static_cast<int>(rd.u32());
    t.dims.M2 = static_cast<int>(rd.u32());
    t.dims.N = static_cast<int>(rd.u32());
    t.L_bar = static_cast<int>(rd.u32());
    const auto Q = rd.u32();
    for (std::uint32_t i = 0; i < Q; ++i)
    {
        CkmEntry e;
        e.grid_q = static_cast<std::int32_t>(rd.u32());
        for (int l = 0; l < t.L_bar; ++l)
        {
            CkmPath p;
            p.tau = rd.f64();
            p.theta = rd.f64();
            p.phi = rd.f64();
            p.rho = rd.f64();
            e.paths.push_back(p);
        }
        t.grids.push_back(std::move(e));
    }
    if (!rd.done())
        throw std::runtime_error("CKM file: trailing bytes");
    return t;
}

std::string ckm_to_text(const CkmTable &t)
{
    check_table(t);
    std::string out = "ckm " + std::to_string(kCkmFormatVersion) + " " + std::to_string(t.dims.M1) + " " +
                      std::to_string(t.dims.M2) + " " + std::to_string(t.dims.N) + " " + std::to_string(t.L_bar) +
                      " " + std::to_string(t.grids.size()) + "\n";
    for (const auto &e : t.grids)
    {
        out += std::to_string(e.grid_q);
        for (const auto &p : e.paths)
            out += " " + g17(p.tau) + " " + g17(p.theta) + " " + g17(p.phi) + " " + g17(p.rho);
        out += "\n";
    }
    return out;
}

CkmTable ckm_from_text(const std::string &text)
{
    std::istringstream in(text);
    std::string tag;
    std::uint32_t version = 0;
    std::size_t Q = 0;
    CkmTable t;
    if (!(in >> tag >> version >> t.dims.M1 >> t.dims.M2 >> t.dims.N >> t.L_bar >> Q) || tag != "ckm")
        throw std::runtime_error("CKM text: bad header");
    if (version != kCkmFormatVersion)
        throw std::runtime_error("CKM text: unsupported version " + std::to_string(version));
    for (std::size_t i = 0; i < Q; ++i)
    {
        CkmEntry e;
        if (!(in >> e.grid_q))
            throw std::runtime_error("CKM text: truncated");
        for (int l = 0; l < t.L_bar; ++l)
        {
            CkmPath p;
            if (!(in >> p.tau >> p.theta >> p.phi >> p.rho))
                throw std::runtime_error("CKM text: truncated");
            e.paths.push_back(p);
        }
        t.grids.push_back(std::move(e));
    }
    return t;
}

void write_ckm(const CkmTable &table, const std::string &path) { write_text_file(path, ckm_to_bytes(table)); }

CkmTable read_ckm(const std::string &path) { return ckm_from_bytes(read_text_file(path)); }

std::string diagnostics_to_json(const MpDiagnostics &d, int grid_q, int iterations)
{
    nlohmann::ordered_json j;
    j["grid_q"] = grid_q;
    j["iterations"] = iterations;
    j["initial_residual"] = d.initial_residual;
    j["residual"] = d.residual;
    j["gamma"] = d.gamma;
    j["lambda"] = d.lambda;
    j["activity"] = d.activity;
    j["iteration_seconds"] = d.iteration_seconds;
    j["newton_fallbacks"] = d.newton_fallbacks;
    j["ridge_events"] = d.ridge_events;
    j["variance_clamps"] = d.variance_clamps;
    j["odds_underflows"] = d.odds_underflows;
    j["gamma_clamps"] = d.gamma_clamps;
    return j.dump(2) + "\n";
}

} // namespace ckm
