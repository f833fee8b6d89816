// Copyright 2026 recbench authors
// SPDX-License-Identifier: Apache-2.0
#include "recbench/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace recbench::checkpoint {

namespace {

void put_u64_le(std::string& out, std::uint64_t bits) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

std::uint64_t get_u64_le(const char* p) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) {
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    }
    return bits;
}

}  // namespace

void save(const nn::ParamList& params, const std::string& path) {
    std::string data;
    std::ostringstream manifest;
    manifest << "RBCKPT1 " << params.size() << "\n";
    for (const auto& p : params) {
        manifest << p.name << '\t' << data.size() << '\n';
        data += p.name;
        data += '\n';
        std::string shape_line;
        for (std::size_t i = 0; i < p.value.shape().size(); ++i) {
            if (i) shape_line += ' ';
            shape_line += std::to_string(p.value.shape()[i]);
        }
        data += shape_line;
        data += '\n';
        for (real_t v : p.value.val()) {
            std::uint64_t bits;
            const double d = static_cast<double>(v);
            std::memcpy(&bits, &d, sizeof(bits));
            put_u64_le(data, bits);
        }
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("checkpoint::save: cannot write '" + path + "'");
    out << manifest.str() << "---\n" << data;
}

std::map<std::string, Block> load_blocks(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("checkpoint::load: cannot open '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string content = buffer.str();

    std::size_t cursor = 0;
    auto next_line = [&]() {
        const std::size_t eol = content.find('\n', cursor);
        if (eol == std::string::npos) throw ParseError("checkpoint::load: truncated header");
        std::string line = content.substr(cursor, eol - cursor);
        cursor = eol + 1;
        return line;
    };

    const std::string magic = next_line();
    if (magic.rfind("RBCKPT1 ", 0) != 0) {
        throw ParseError("checkpoint::load: '" + path + "' is not a checkpoint file");
    }
    const std::size_t count = std::stoul(magic.substr(8));
    std::vector<std::pair<std::string, std::size_t>> manifest;
    for (std::size_t i = 0; i < count; ++i) {
        const std::string line = next_line();
        const std::size_t tab = line.find('\t');
        if (tab == std::string::npos) throw ParseError("checkpoint::load: bad manifest line");
        manifest.emplace_back(line.substr(0, tab), std::stoul(line.substr(tab + 1)));
    }
    if (next_line() != "---") throw ParseError("checkpoint::load: missing header terminator");
    const std::size_t data_start = cursor;

    std::map<std::string, Block> blocks;
    for (const auto& [name, offset] : manifest) {
        cursor = data_start + offset;
        const std::string block_name = next_line();
        if (block_name != name) {
            throw ParseError("checkpoint::load: manifest/block name mismatch for '" + name + "'");
        }
        const std::string shape_line = next_line();
        Block block;
        std::istringstream ss(shape_line);
        std::size_t dim;
        std::size_t numel = 1;
        while (ss >> dim) {
            block.shape.push_back(dim);
            numel *= dim;
        }
        if (cursor + numel * 8 > content.size()) {
            throw ParseError("checkpoint::load: truncated block '" + name + "'");
        }
        block.values.resize(numel);
        for (std::size_t i = 0; i < numel; ++i) {
            const std::uint64_t bits = get_u64_le(content.data() + cursor + i * 8);
            double d;
            std::memcpy(&d, &bits, sizeof(d));
            block.values[i] = d;
        }
        blocks.emplace(name, std::move(block));
    }
    return blocks;
}

void load_into(const nn::ParamList& params, const std::string& path) {
    const auto blocks = load_blocks(path);
    for (const auto& p : params) {
        auto it = blocks.find(p.name);
        if (it == blocks.end()) {
            throw ParseError("checkpoint::load_into: missing block '" + p.name + "'");
        }
        if (it->second.shape != p.value.shape()) {
            throw ShapeError("checkpoint::load_into: shape mismatch for '" + p.name + "'");
        }
        auto& dst = const_cast<tensor::Tensor&>(p.value).val();
        for (std::size_t i = 0; i < dst.size(); ++i) {
            dst[i] = static_cast<real_t>(it->second.values[i]);
        }
    }
}

}  // namespace recbench::checkpoint
