#include "vreid/posegeom.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

namespace vreid {

using nlohmann::json;

void SegmentTable::validate() const {
    if (segments.size() != kNumSegments)
        throw PoseError("segment table must have exactly 13 entries, got " +
                        std::to_string(segments.size()));
    for (const auto& seg : segments) {
        if (seg.indices.size() < 3)
            throw PoseError("segment '" + seg.name + "' needs >= 3 vertices");
        for (int idx : seg.indices)
            if (idx < 0 || idx >= kNumKeypoints)
                throw PoseError("segment '" + seg.name +
                                "' has keypoint index out of range: " +
                                std::to_string(idx));
    }
}

void GroupTable::validate() const {
    std::set<int> seen;
    for (const auto& g : groups) {
        for (int idx : g) {
            if (idx < 0 || idx >= kNumKeypoints)
                throw PoseError("group index out of range: " + std::to_string(idx));
            if (!seen.insert(idx).second)
                throw PoseError("groups overlap at keypoint " + std::to_string(idx));
        }
    }
    if (seen.size() != kNumKeypoints)
        throw PoseError("groups must cover all 36 keypoints, cover " +
                        std::to_string(seen.size()));
}

// Default keypoint layout: 18 semantic locations, each with a left/right
// mirror pair at indices (2i, 2i+1). The hood polygon uses windshield-bottom
// (16,17) and hood-front (34,35) corners. Membership of the other segments
// and of the six groups is an overridable assumption (see configs/).
PoseConfig default_pose_config() {
    PoseConfig cfg;
    cfg.segments.segments = {
        {"hood", {16, 17, 35, 34}},
        {"windshield", {16, 17, 19, 18}},
        {"roof", {18, 19, 21, 20}},
        {"rear_window", {20, 21, 23, 22}},
        {"trunk", {22, 23, 31, 30}},
        {"front_bumper", {32, 33, 5, 4}},
        {"grille", {8, 9, 33, 32}},
        {"rear_bumper", {10, 11, 7, 6}},
        {"left_side", {12, 16, 20, 22, 14, 28}},
        {"right_side", {13, 17, 21, 23, 15, 29}},
        {"left_front_fender", {8, 12, 0}},
        {"right_front_fender", {9, 13, 1}},
        {"left_rear_fender", {10, 14, 2}},
    };
    cfg.groups.groups = {{
        {0, 1, 2, 3, 28, 29},          // wheel
        {12, 13, 14, 15, 26, 27},      // fender
        {6, 7, 10, 11, 30, 31},        // rear
        {4, 5, 8, 9, 32, 33, 34, 35},  // front
        {20, 21, 22, 23},              // rear_window
        {16, 17, 18, 19, 24, 25},      // front_window
    }};
    for (int i = 0; i < kNumKeypoints / 2; ++i)
        cfg.flip_pairs.emplace_back(2 * i, 2 * i + 1);
    cfg.segments.validate();
    cfg.groups.validate();
    return cfg;
}

PoseConfig load_pose_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw PoseError("cannot open pose config: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw PoseError("pose config parse error: " + std::string(e.what()));
    }
    PoseConfig cfg;
    for (const auto& sj : j.at("segments")) {
        cfg.segments.segments.push_back(
            {sj.at("name").get<std::string>(),
             sj.at("indices").get<std::vector<int>>()});
    }
    const auto& gj = j.at("groups");
    for (int g = 0; g < kNumPckGroups; ++g)
        cfg.groups.groups[g] = gj.at(GroupTable::kNames[g]).get<std::vector<int>>();
    for (const auto& pj : j.at("flip_pairs"))
        cfg.flip_pairs.emplace_back(pj.at(0).get<int>(), pj.at(1).get<int>());
    cfg.segments.validate();
    cfg.groups.validate();
    return cfg;
}

PoseVector normalize_keypoints(const KeypointSet& kps, int image_w, int image_h) {
    if (image_w <= 0 || image_h <= 0)
        throw PoseError("image dimensions must be positive");
    PoseVector pv;
    for (int k = 0; k < kNumKeypoints; ++k) {
        const auto& p = kps.points[k];
        pv.values[3 * k + 0] =
            std::clamp(p.x / image_w - 0.5, -0.5, 0.5);
        pv.values[3 * k + 1] =
            std::clamp(p.y / image_h - 0.5, -0.5, 0.5);
        pv.values[3 * k + 2] = p.confidence;
    }
    return pv;
}

Tensor3 render_heatmaps(const KeypointSet& kps, int image_w, int image_h,
                        int map_w, int map_h, double sigma,
                        double conf_threshold) {
    if (sigma <= 0) throw PoseError("sigma must be positive");
    if (map_w <= 0 || map_h <= 0) throw PoseError("map size must be positive");
    if (image_w <= 0 || image_h <= 0)
        throw PoseError("image dimensions must be positive");

    Tensor3 maps(kNumKeypoints, map_h, map_w);
    const double sx = static_cast<double>(map_w) / image_w;
    const double sy = static_cast<double>(map_h) / image_h;
    const double denom = 2.0 * sigma * sigma;
    for (int k = 0; k < kNumKeypoints; ++k) {
        const auto& p = kps.points[k];
        if (p.confidence < conf_threshold) continue;  // blank channel
        const double uk = p.x * sx;
        const double vk = p.y * sy;
        for (int v = 0; v < map_h; ++v) {
            for (int u = 0; u < map_w; ++u) {
                const double du = u - uk;
                const double dv = v - vk;
                maps.at(k, v, u) = std::exp(-(du * du + dv * dv) / denom);
            }
        }
    }
    return maps;
}

namespace {

// Even-odd point-in-polygon at (px, py).
bool inside_polygon(const std::vector<std::pair<double, double>>& poly,
                    double px, double py) {
    bool inside = false;
    const std::size_t n = poly.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const auto [xi, yi] = poly[i];
        const auto [xj, yj] = poly[j];
        if ((yi > py) != (yj > py)) {
            const double xcross = xj + (py - yj) / (yi - yj) * (xi - xj);
            if (px < xcross) inside = !inside;
        }
    }
    return inside;
}

}  // namespace

Tensor3 rasterize_segments(const KeypointSet& kps, const SegmentTable& table,
                           int image_w, int image_h, int map_w, int map_h,
                           double conf_threshold) {
    table.validate();
    if (map_w <= 0 || map_h <= 0) throw PoseError("map size must be positive");
    if (image_w <= 0 || image_h <= 0)
        throw PoseError("image dimensions must be positive");

    Tensor3 masks(kNumSegments, map_h, map_w);
    const double sx = static_cast<double>(map_w) / image_w;
    const double sy = static_cast<double>(map_h) / image_h;
    for (int s = 0; s < kNumSegments; ++s) {
        const auto& seg = table.segments[s];
        bool blank = false;
        std::vector<std::pair<double, double>> poly;
        poly.reserve(seg.indices.size());
        for (int idx : seg.indices) {
            const auto& p = kps.points[idx];
            if (p.confidence < conf_threshold) blank = true;
            poly.emplace_back(p.x * sx, p.y * sy);
        }
        if (blank) continue;
        for (int v = 0; v < map_h; ++v)
            for (int u = 0; u < map_w; ++u)
                if (inside_polygon(poly, u + 0.5, v + 0.5))
                    masks.at(s, v, u) = 1.0;
    }
    return masks;
}

namespace {

// Bilinear sample with half-pixel alignment, clamped at the border.
double bilinear(const Tensor3& t, std::size_t ch, double sy, double sx) {
    const double fx = std::clamp(sx, 0.0, static_cast<double>(t.w - 1));
    const double fy = std::clamp(sy, 0.0, static_cast<double>(t.h - 1));
    const std::size_t x0 = static_cast<std::size_t>(fx);
    const std::size_t y0 = static_cast<std::size_t>(fy);
    const std::size_t x1 = std::min(x0 + 1, t.w - 1);
    const std::size_t y1 = std::min(y0 + 1, t.h - 1);
    const double ax = fx - x0;
    const double ay = fy - y0;
    const double top = t.at(ch, y0, x0) * (1 - ax) + t.at(ch, y0, x1) * ax;
    const double bot = t.at(ch, y1, x0) * (1 - ax) + t.at(ch, y1, x1) * ax;
    return top * (1 - ay) + bot * ay;
}

}  // namespace

ChannelStack stack_channels(const Tensor3& rgb, const Tensor3& aux,
                            ChannelKind aux_kind, double scale) {
    if (rgb.c != 3) throw PoseError("rgb tensor must have 3 channels");
    if (aux.c != kNumKeypoints && aux.c != kNumSegments)
        throw PoseError("aux tensor must have 36 or 13 channels, got " +
                        std::to_string(aux.c));
    for (double v : rgb.data)
        if (v < 0.0 || v > 1.0) throw PoseError("rgb values must be in [0,1]");

    ChannelStack stack;
    stack.channels = Tensor3(3 + aux.c, rgb.h, rgb.w);
    stack.kinds.assign(3, ChannelKind::Rgb);
    for (std::size_t ch = 0; ch < 3; ++ch)
        for (std::size_t y = 0; y < rgb.h; ++y)
            for (std::size_t x = 0; x < rgb.w; ++x)
                stack.channels.at(ch, y, x) = rgb.at(ch, y, x);

    const double ry = static_cast<double>(aux.h) / rgb.h;
    const double rx = static_cast<double>(aux.w) / rgb.w;
    for (std::size_t ch = 0; ch < aux.c; ++ch) {
        stack.kinds.push_back(aux_kind);
        for (std::size_t y = 0; y < rgb.h; ++y) {
            const double sy = (y + 0.5) * ry - 0.5;
            for (std::size_t x = 0; x < rgb.w; ++x) {
                const double sx = (x + 0.5) * rx - 0.5;
                const double v = bilinear(aux, ch, sy, sx) * scale;
                stack.channels.at(3 + ch, y, x) = std::clamp(v, 0.0, 1.0);
            }
        }
    }
    return stack;
}

std::vector<double> pool_stacked_channels(const ChannelStack& stack, int grid) {
    const auto& t = stack.channels;
    if (grid <= 0 || t.h % grid != 0 || t.w % grid != 0)
        throw PoseError("grid must divide the spatial size");
    const std::size_t cell_h = t.h / grid;
    const std::size_t cell_w = t.w / grid;
    std::vector<double> out;
    out.reserve(t.c * grid * grid);
    for (std::size_t ch = 0; ch < t.c; ++ch) {
        for (int gy = 0; gy < grid; ++gy) {
            for (int gx = 0; gx < grid; ++gx) {
                double sum = 0.0;
                for (std::size_t y = gy * cell_h; y < (gy + 1) * cell_h; ++y)
                    for (std::size_t x = gx * cell_w; x < (gx + 1) * cell_w; ++x)
                        sum += t.at(ch, y, x);
                out.push_back(sum / static_cast<double>(cell_h * cell_w));
            }
        }
    }
    return out;
}

KeypointSet flip_horizontal(const KeypointSet& kps, double image_w,
                            const std::vector<std::pair<int, int>>& pairs) {
    std::set<int> used;
    for (const auto& [a, b] : pairs) {
        if (a < 0 || a >= kNumKeypoints || b < 0 || b >= kNumKeypoints)
            throw PoseError("flip pair index out of range");
        if (!used.insert(a).second || !used.insert(b).second)
            throw PoseError("flip pairs overlap");
    }
    KeypointSet out = kps;
    for (auto& p : out.points) p.x = image_w - p.x;
    for (const auto& [a, b] : pairs) std::swap(out.points[a], out.points[b]);
    return out;
}

PckReport pck_evaluate(const std::vector<KeypointSet>& pred,
                       const std::vector<KeypointSet>& gt,
                       const std::vector<BBox>& bboxes,
                       const GroupTable& groups,
                       double reference_ratio, double threshold_multiplier) {
    if (pred.size() != gt.size() || pred.size() != bboxes.size())
        throw PoseError("pred, gt and bboxes must have equal lengths");
    groups.validate();

    std::array<int, kNumKeypoints> kp_group{};
    for (int g = 0; g < kNumPckGroups; ++g)
        for (int idx : groups.groups[g]) kp_group[idx] = g;

    std::array<std::size_t, kNumPckGroups> correct{}, evaluable{};
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double diag =
            std::sqrt(bboxes[i].w * bboxes[i].w + bboxes[i].h * bboxes[i].h);
        const double threshold = threshold_multiplier * reference_ratio * diag;
        for (int k = 0; k < kNumKeypoints; ++k) {
            if (gt[i].points[k].confidence <= 0.0) continue;  // not evaluable
            const double dx = pred[i].points[k].x - gt[i].points[k].x;
            const double dy = pred[i].points[k].y - gt[i].points[k].y;
            const double err = std::sqrt(dx * dx + dy * dy);
            const int g = kp_group[k];
            ++evaluable[g];
            if (err <= threshold) ++correct[g];  // boundary counts as correct
        }
    }

    PckReport report;
    std::size_t total_correct = 0, total_eval = 0;
    for (int g = 0; g < kNumPckGroups; ++g) {
        total_correct += correct[g];
        total_eval += evaluable[g];
        if (evaluable[g] > 0)
            report.per_group_accuracy[g] =
                100.0 * static_cast<double>(correct[g]) / evaluable[g];
    }
    report.evaluated_keypoints = total_eval;
    report.mean_accuracy =
        total_eval > 0 ? 100.0 * static_cast<double>(total_correct) / total_eval
                       : 0.0;
    return report;
}

std::string pck_report_to_json(const PckReport& report) {
    auto round2 = [](double v) { return std::round(v * 100.0) / 100.0; };
    json j;
    for (int g = 0; g < kNumPckGroups; ++g) {
        if (report.per_group_accuracy[g])
            j[GroupTable::kNames[g]] = round2(*report.per_group_accuracy[g]);
        else
            j[GroupTable::kNames[g]] = nullptr;
    }
    j["mean"] = round2(report.mean_accuracy);
    j["evaluated_keypoints"] = report.evaluated_keypoints;
    return j.dump(2);
}

}  // namespace vreid
