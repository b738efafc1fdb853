/*
 * Copyright 2026 The refsplat Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "refsplat/trainer/optimizer.hpp"
#include "refsplat/trainer/parameters.hpp"

#include <cstdint>
#include <string>

namespace refsplat {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  long iteration = 0;
  Vec3 background = Vec3::Zero();
  ParameterSet params;
  OptimizerState optimizer;
};

/// Binary container: magic "RSPLCKPT", u32 version, then little-endian
/// fields (see README). Throws InputError on I/O failure.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
/// Throws InputError on a missing file, bad magic or version mismatch.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace refsplat
