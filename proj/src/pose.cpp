#include "posestitch/pose.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace posestitch {

namespace {

[[noreturn]] void parse_fail(const std::string& path, int line_no, const std::string& why) {
    throw Error(path + ":" + std::to_string(line_no) + ": " + why);
}

// Splits on runs of spaces/tabs. The formats never quote or escape.
std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream is(line);
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

long parse_int_tok(const std::string& tok, const std::string& path, int line_no) {
    try {
        size_t pos = 0;
        long v = std::stol(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        parse_fail(path, line_no, "expected integer, got '" + tok + "'");
    }
}

double parse_num_tok(const std::string& tok, const std::string& path, int line_no) {
    try {
        size_t pos = 0;
        double v = std::stod(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        if (!std::isfinite(v)) parse_fail(path, line_no, "non-finite value '" + tok + "'");
        return v;
    } catch (const Error&) {
        throw;
    } catch (const std::exception&) {
        parse_fail(path, line_no, "expected number, got '" + tok + "'");
    }
}

}  // namespace

void Skeleton::validate() const {
    if (joint_count < 1) throw Error("skeleton: joint_count must be >= 1");
    if (root < 0 || root >= joint_count) throw Error("skeleton: root out of range");
    if (int(edges.size()) != joint_count - 1)
        throw Error("skeleton: a tree over " + std::to_string(joint_count) + " joints needs " +
                    std::to_string(joint_count - 1) + " edges, got " + std::to_string(edges.size()));
    // Union-find connectivity over the edges.
    std::vector<int> parent(joint_count);
    for (int i = 0; i < joint_count; ++i) parent[i] = i;
    auto find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (auto [p, c] : edges) {
        if (p < 0 || p >= joint_count || c < 0 || c >= joint_count)
            throw Error("skeleton: edge index out of range");
        int a = find(p), b = find(c);
        if (a == b) throw Error("skeleton: edges contain a cycle");
        parent[a] = b;
    }
    // N-1 acyclic edges over N nodes are necessarily connected.
}

Skeleton Skeleton::chain(int joints) {
    Skeleton s;
    s.joint_count = joints;
    s.root = 0;
    for (int i = 0; i + 1 < joints; ++i) s.edges.emplace_back(i, i + 1);
    s.validate();
    return s;
}

void PoseSequence::validate() const {
    skeleton.validate();
    if (frames.rows() < 1) throw Error("pose sequence: needs at least one frame");
    if (frames.cols() != 3 * skeleton.joint_count)
        throw Error("pose sequence: frame width " + std::to_string(frames.cols()) +
                    " does not match 3*N = " + std::to_string(3 * skeleton.joint_count));
    if (!frames.allFinite()) throw Error("pose sequence: non-finite coordinate");
}

void FrameMask::validate() const {
    if (length < 0) throw Error("frame mask: negative length");
    for (int f : masked)
        if (f < 0 || f >= length) throw Error("frame mask: index out of range");
}

PoseSequence load_pose_sequence(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");

    std::string line;
    int line_no = 0;
    auto next_line = [&]() -> bool {
        if (!std::getline(in, line)) return false;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        ++line_no;
        return true;
    };

    if (!next_line()) parse_fail(path, 1, "missing header");
    auto head = split_ws(line);
    if (head.size() != 4 || head[0] != "POSESEQ")
        parse_fail(path, line_no, "malformed header, expected 'POSESEQ 1 <F> <N>'");
    if (head[1] != "1")
        parse_fail(path, line_no, "unsupported POSESEQ version '" + head[1] + "', only 1 accepted");
    long F = parse_int_tok(head[2], path, line_no);
    long N = parse_int_tok(head[3], path, line_no);
    if (F < 1 || N < 1) parse_fail(path, line_no, "F and N must be >= 1");

    if (!next_line()) parse_fail(path, 2, "missing EDGES line");
    auto etoks = split_ws(line);
    if (etoks.size() < 2 || etoks[0] != "EDGES" || etoks.size() % 2 != 0)
        parse_fail(path, line_no, "malformed EDGES line");
    Skeleton skel;
    skel.joint_count = int(N);
    skel.root = int(parse_int_tok(etoks[1], path, line_no));
    for (size_t i = 2; i + 1 < etoks.size(); i += 2)
        skel.edges.emplace_back(int(parse_int_tok(etoks[i], path, line_no)),
                                int(parse_int_tok(etoks[i + 1], path, line_no)));
    try {
        skel.validate();
    } catch (const Error& e) {
        parse_fail(path, line_no, e.what());
    }

    Matd frames(F, 3 * N);
    for (long f = 0; f < F; ++f) {
        if (!next_line()) parse_fail(path, line_no + 1, "missing frame line");
        auto toks = split_ws(line);
        if (long(toks.size()) != 3 * N)
            parse_fail(path, line_no,
                       "expected " + std::to_string(3 * N) + " values, got " + std::to_string(toks.size()));
        for (long c = 0; c < 3 * N; ++c) frames(f, c) = parse_num_tok(toks[c], path, line_no);
    }

    PoseSequence seq{skel, std::move(frames)};
    seq.validate();
    return seq;
}

std::string format_coord(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

void save_pose_sequence(const PoseSequence& seq, const std::string& path) {
    seq.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path + "'");
    out << "POSESEQ 1 " << seq.frame_count() << " " << seq.joint_count() << "\n";
    out << "EDGES " << seq.skeleton.root;
    for (auto [p, c] : seq.skeleton.edges) out << " " << p << " " << c;
    out << "\n";
    for (int f = 0; f < seq.frame_count(); ++f) {
        for (int c = 0; c < seq.frames.cols(); ++c) {
            if (c) out << " ";
            out << format_coord(seq.frames(f, c));
        }
        out << "\n";
    }
    if (!out) throw Error("write failed for '" + path + "'");
}

double mean_bone_length(const PoseSequence& seq) {
    if (seq.skeleton.edges.empty()) throw Error("normalize: skeleton has no edges");
    double sum = 0.0;
    for (int f = 0; f < seq.frame_count(); ++f)
        for (auto [p, c] : seq.skeleton.edges) sum += (seq.joint(f, c) - seq.joint(f, p)).norm();
    return sum / (double(seq.frame_count()) * double(seq.skeleton.edges.size()));
}

PoseSequence normalize(const PoseSequence& seq) {
    seq.validate();
    double scale = mean_bone_length(seq);
    if (scale <= 0.0) throw Error("normalize: degenerate skeleton, mean bone length is zero");

    PoseSequence out = seq;
    int N = seq.joint_count();
    for (int f = 0; f < seq.frame_count(); ++f) {
        Eigen::Vector3d root = seq.joint(f, seq.skeleton.root);
        for (int j = 0; j < N; ++j)
            out.frames.block<1, 3>(f, 3 * j) = (seq.joint(f, j) - root).transpose() / scale;
    }
    return out;
}

Matd flatten(const PoseSequence& seq) {
    seq.validate();
    return seq.frames;
}

PoseSequence unflatten(const Matd& features, const Skeleton& skeleton) {
    PoseSequence seq{skeleton, features};
    seq.validate();
    return seq;
}

}  // namespace posestitch
