#include "posestitch/render.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace posestitch {

namespace {

std::string num(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

}  // namespace

std::string render_frame_svg(const PoseSequence& seq, int frame) {
    seq.validate();
    if (frame < 0 || frame >= seq.frame_count())
        throw Error("render: frame index out of range");

    // Sequence-wide x/y bounds with a margin so every frame shares a viewport.
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (int f = 0; f < seq.frame_count(); ++f)
        for (int j = 0; j < seq.joint_count(); ++j) {
            Eigen::Vector3d p = seq.joint(f, j);
            xmin = std::min(xmin, p.x()), xmax = std::max(xmax, p.x());
            ymin = std::min(ymin, p.y()), ymax = std::max(ymax, p.y());
        }
    double span = std::max({xmax - xmin, ymax - ymin, 1e-6});
    double margin = 0.1 * span;
    xmin -= margin, ymin -= margin;
    span += 2.0 * margin;

    const double size = 320.0;
    auto sx = [&](double x) { return (x - xmin) / span * size; };
    // SVG y grows downward; flip so the pose's +y is up.
    auto sy = [&](double y) { return size - (y - ymin) / span * size; };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"320\" height=\"320\" "
           "viewBox=\"0 0 320 320\">\n";
    svg << "<rect width=\"320\" height=\"320\" fill=\"white\"/>\n";
    for (auto [a, b] : seq.skeleton.edges) {
        Eigen::Vector3d pa = seq.joint(frame, a), pb = seq.joint(frame, b);
        svg << "<line x1=\"" << num(sx(pa.x())) << "\" y1=\"" << num(sy(pa.y())) << "\" x2=\""
            << num(sx(pb.x())) << "\" y2=\"" << num(sy(pb.y()))
            << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
    }
    for (int j = 0; j < seq.joint_count(); ++j) {
        Eigen::Vector3d p = seq.joint(frame, j);
        svg << "<circle cx=\"" << num(sx(p.x())) << "\" cy=\"" << num(sy(p.y()))
            << "\" r=\"3.5\" fill=\"" << (j == seq.skeleton.root ? "crimson" : "black")
            << "\"/>\n";
    }
    svg << "<text x=\"8\" y=\"18\" font-family=\"monospace\" font-size=\"14\">frame " << frame
        << "</text>\n";
    svg << "</svg>\n";
    return svg.str();
}

int render_sequence(const PoseSequence& seq, const std::string& out_dir) {
    seq.validate();
    std::filesystem::create_directories(out_dir);
    for (int f = 0; f < seq.frame_count(); ++f) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%06d.svg", f);
        std::string path = (std::filesystem::path(out_dir) / name).string();
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error("render: cannot write '" + path + "'");
        out << render_frame_svg(seq, f);
    }
    return seq.frame_count();
}

}  // namespace posestitch
