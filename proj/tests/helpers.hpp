#pragma once

// Shared test fixtures: scratch directories and small random pose data.

#include "posestitch/common.hpp"
#include "posestitch/pose.hpp"

#include <filesystem>
#include <fstream>
#include <string>

namespace testutil {

// Fresh scratch directory, removed on destruction.
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               ("posestitch_test_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }

    std::string file(const std::string& name) const { return (path / name).string(); }
};

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

inline std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// Random pose sequence over a joint chain, coordinates in [-1, 1).
inline posestitch::PoseSequence random_sequence(int frames, int joints, std::uint64_t seed) {
    posestitch::PoseSequence seq;
    seq.skeleton = posestitch::Skeleton::chain(joints);
    seq.frames.resize(frames, 3 * joints);
    posestitch::Rng rng(seed);
    for (int f = 0; f < frames; ++f)
        for (int c = 0; c < 3 * joints; ++c) seq.frames(f, c) = rng.uniform(-1.0, 1.0);
    return seq;
}

}  // namespace testutil
