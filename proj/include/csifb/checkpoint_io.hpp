// SPDX-License-Identifier: Apache-2.0
//
// csifb — analog and digital deep CSI feedback simulation for FDD massive MIMO
// Copyright (C) 2026 csifb contributors
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
// Shared checkpoint layout: model.json (spec + metadata + names/shapes index)
// next to weights.bin, raw little-endian float32 arrays.

#ifndef CSIFB_CHECKPOINT_IO_HPP
#define CSIFB_CHECKPOINT_IO_HPP

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace csifb
{

struct NamedWeights
{
    std::string name;
    std::vector<float> *data;
};

/// Serialize weight arrays to dir/weights.bin and return the index entries.
nlohmann::json write_weight_file(const std::string &dir, const std::vector<NamedWeights> &weights);

/// Load weights by name from dir/weights.bin per the index in model.json.
void read_weight_file(const std::string &dir, const nlohmann::json &index,
                      const std::vector<NamedWeights> &weights);

} // namespace csifb

#endif
