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

#include "csifb/checkpoint_io.hpp"

#include <fstream>
#include <stdexcept>

using json = nlohmann::json;

namespace csifb
{

json write_weight_file(const std::string &dir, const std::vector<NamedWeights> &weights)
{
    std::ofstream bin(dir + "/weights.bin", std::ios::binary);
    if (!bin)
        throw std::runtime_error("cannot open for writing: " + dir + "/weights.bin");

    json index = json::array();
    std::size_t offset = 0;
    for (const auto &w : weights)
    {
        bin.write(reinterpret_cast<const char *>(w.data->data()),
                  static_cast<std::streamsize>(w.data->size() * sizeof(float)));
        index.push_back({{"name", w.name}, {"count", w.data->size()}, {"offset", offset}});
        offset += w.data->size();
    }
    if (!bin)
        throw std::runtime_error("write failed: " + dir + "/weights.bin");
    return index;
}

void read_weight_file(const std::string &dir, const json &index,
                      const std::vector<NamedWeights> &weights)
{
    std::ifstream bin(dir + "/weights.bin", std::ios::binary);
    if (!bin)
        throw std::runtime_error("cannot open: " + dir + "/weights.bin");

    if (index.size() != weights.size())
        throw std::runtime_error("checkpoint weight count mismatch");
    for (std::size_t i = 0; i < weights.size(); ++i)
    {
        const auto &entry = index[i];
        if (entry.at("name").get<std::string>() != weights[i].name)
            throw std::runtime_error("checkpoint weight name mismatch: expected " +
                                     weights[i].name + ", found " +
                                     entry.at("name").get<std::string>());
        if (entry.at("count").get<std::size_t>() != weights[i].data->size())
            throw std::runtime_error("checkpoint weight size mismatch for " + weights[i].name);
        bin.seekg(static_cast<std::streamoff>(entry.at("offset").get<std::size_t>() * sizeof(float)));
        bin.read(reinterpret_cast<char *>(weights[i].data->data()),
                 static_cast<std::streamsize>(weights[i].data->size() * sizeof(float)));
        if (!bin)
            throw std::runtime_error("truncated weights file: " + dir + "/weights.bin");
    }
}

} // namespace csifb
