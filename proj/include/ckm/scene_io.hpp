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

#ifndef CKM_SCENE_IO_HPP
#define CKM_SCENE_IO_HPP

#include "ckm/scene.hpp"

#include <string>

namespace ckm
{

inline constexpr const char *kSceneSchema = "ckm.scene/1";

/**
 * JSON scene file. Top-level keys in order:
 *   schema, config, geometry {user, user_drift, interferers, interferer_on},
 *   observations [{slot_t, grid_q, active_mask, pilot_user, pilot_interferers, y}],
 *   truth [{slot_t, grid_q, user_paths, alphas, interferer_alphas, h,
 *           signal_energy, interference_energy, noise_energy}].
 * Path tables are arrays of [rho, tau, theta, phi]; complex vectors are flat
 * [re0, im0, re1, im1, ...] arrays. Doubles are written with shortest
 * round-trip precision, so write -> read -> write is byte-identical.
 */
std::string scene_to_json(const Scene &scene);
Scene scene_from_json(const std::string &text);

std::string scene_config_to_json(const SceneConfig &cfg);
SceneConfig scene_config_from_json(const std::string &text);

void write_scene(const Scene &scene, const std::string &path);
Scene read_scene(const std::string &path);

/// Whole-file helpers shared by the IO modules; throw std::runtime_error.
std::string read_text_file(const std::string &path);
void write_text_file(const std::string &path, const std::string &content);

} // namespace ckm

#endif
