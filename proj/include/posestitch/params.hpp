#pragma once

// Named parameter tensors and the PARAMS v1 checkpoint container.
//
// PARAMS v1 layout:
//   line 1:  PARAMS 1 <tensor_count>
//   then one manifest line per tensor:  <name> <rank> <dims...>
//   then raw little-endian 32-bit floats, tensors in manifest order,
//   row-major within each tensor.
// Tensors are stored in name order (std::map), so files are reproducible.

#include "posestitch/common.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

namespace posestitch {

template <class S>
using NamedTensors = std::map<std::string, MatX<S>>;

template <class S>
void save_params(const NamedTensors<S>& params, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path + "'");
    out << "PARAMS 1 " << params.size() << "\n";
    for (const auto& [name, t] : params) {
        if (name.find_first_of(" \t\n") != std::string::npos)
            throw Error("tensor name contains whitespace: '" + name + "'");
        out << name << " 2 " << t.rows() << " " << t.cols() << "\n";
    }
    for (const auto& [name, t] : params) {
        for (Eigen::Index i = 0; i < t.rows(); ++i)
            for (Eigen::Index j = 0; j < t.cols(); ++j) {
                float v = float(t(i, j));
                std::uint32_t bits;
                std::memcpy(&bits, &v, 4);
                char bytes[4] = {char(bits & 0xff), char((bits >> 8) & 0xff),
                                 char((bits >> 16) & 0xff), char((bits >> 24) & 0xff)};
                out.write(bytes, 4);
            }
    }
    if (!out) throw Error("write failed for '" + path + "'");
}

template <class S>
NamedTensors<S> load_params(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw Error(path + ": missing header");
    std::istringstream head(line);
    std::string magic, version;
    std::size_t count = 0;
    if (!(head >> magic >> version >> count) || magic != "PARAMS")
        throw Error(path + ": malformed PARAMS header");
    if (version != "1") throw Error(path + ": unsupported PARAMS version '" + version + "'");

    struct Entry {
        std::string name;
        Eigen::Index rows, cols;
    };
    std::vector<Entry> manifest;
    for (std::size_t i = 0; i < count; ++i) {
        if (!std::getline(in, line)) throw Error(path + ": truncated manifest");
        std::istringstream ls(line);
        std::string name;
        int rank = 0;
        if (!(ls >> name >> rank)) throw Error(path + ": malformed manifest line '" + line + "'");
        Eigen::Index rows = 1, cols = 1;
        if (rank == 1) {
            if (!(ls >> cols)) throw Error(path + ": malformed manifest line '" + line + "'");
        } else if (rank == 2) {
            if (!(ls >> rows >> cols)) throw Error(path + ": malformed manifest line '" + line + "'");
        } else {
            throw Error(path + ": unsupported tensor rank " + std::to_string(rank));
        }
        if (rows < 0 || cols < 0) throw Error(path + ": negative dimension in manifest");
        manifest.push_back({name, rows, cols});
    }

    NamedTensors<S> params;
    for (const auto& e : manifest) {
        MatX<S> t(e.rows, e.cols);
        for (Eigen::Index i = 0; i < e.rows; ++i)
            for (Eigen::Index j = 0; j < e.cols; ++j) {
                char bytes[4];
                if (!in.read(bytes, 4)) throw Error(path + ": truncated tensor data for '" + e.name + "'");
                std::uint32_t bits = (std::uint32_t(std::uint8_t(bytes[0]))) |
                                     (std::uint32_t(std::uint8_t(bytes[1])) << 8) |
                                     (std::uint32_t(std::uint8_t(bytes[2])) << 16) |
                                     (std::uint32_t(std::uint8_t(bytes[3])) << 24);
                float v;
                std::memcpy(&v, &bits, 4);
                t(i, j) = S(v);
            }
        if (!params.emplace(e.name, std::move(t)).second)
            throw Error(path + ": duplicate tensor name '" + e.name + "'");
    }
    return params;
}

template <class From, class To>
NamedTensors<To> cast_params(const NamedTensors<From>& in) {
    NamedTensors<To> out;
    for (const auto& [name, t] : in) out.emplace(name, t.template cast<To>());
    return out;
}

}  // namespace posestitch
