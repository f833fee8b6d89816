// Copyright 2026 recbench authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "recbench/nn.hpp"

namespace recbench::checkpoint {

// Single-file checkpoint of named parameter blocks.
//
//   RBCKPT1 <block count>
//   <name>\t<byte offset into the data section>     (one line per block)
//   ---
//   data section: per block `name\n` `dims space-separated\n` then the raw
//   values as little-endian 64-bit floats.
void save(const nn::ParamList& params, const std::string& path);

struct Block {
    std::vector<std::size_t> shape;
    std::vector<double> values;
};

std::map<std::string, Block> load_blocks(const std::string& path);

// Loads into an assembled model's parameters; names and shapes must match.
void load_into(const nn::ParamList& params, const std::string& path);

}  // namespace recbench::checkpoint
