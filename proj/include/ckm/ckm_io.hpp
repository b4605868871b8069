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

#ifndef CKM_CKM_IO_HPP
#define CKM_CKM_IO_HPP

#include "ckm/engine.hpp"

#include <string>

namespace ckm
{

inline constexpr std::uint32_t kCkmFormatVersion = 1;

/**
 * Binary CKM file, all integers and floats little-endian:
 *
 *   "CKM\0"  u32 version  u32 M1  u32 M2  u32 N  u32 L_bar  u32 Q
 *   Q records: i32 grid_q, then L_bar x (f64 tau, f64 theta, f64 phi, f64 rho)
 *
 * Every record must hold exactly L_bar paths.
 */
std::string ckm_to_bytes(const CkmTable &table);
CkmTable ckm_from_bytes(const std::string &bytes);

/**
 * Text export, one record per line after a header line:
 *   ckm <version> <M1> <M2> <N> <L_bar> <Q>
 *   <grid_q> <tau> <theta> <phi> <rho> <tau> ...
 * Values use 17 significant digits, so reading back is lossless.
 */
std::string ckm_to_text(const CkmTable &table);
CkmTable ckm_from_text(const std::string &text);

void write_ckm(const CkmTable &table, const std::string &path);
CkmTable read_ckm(const std::string &path);

/// Diagnostics of one construction as pretty-printed JSON.
std::string diagnostics_to_json(const MpDiagnostics &diag, int grid_q, int iterations);

} // namespace ckm

#endif
