#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vreid/types.hpp"

namespace vreid {

class PoseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// 36 x (x, y, confidence) with coordinates normalized to [-0.5, 0.5].
struct PoseVector {
    std::array<double, kPoseVectorLen> values{};
};

// Dense c x h x w tensor, channel-major.
struct Tensor3 {
    std::size_t c = 0, h = 0, w = 0;
    std::vector<double> data;

    Tensor3() = default;
    Tensor3(std::size_t c_, std::size_t h_, std::size_t w_, double fill = 0.0)
        : c(c_), h(h_), w(w_), data(c_ * h_ * w_, fill) {}

    double& at(std::size_t ch, std::size_t y, std::size_t x) {
        return data[(ch * h + y) * w + x];
    }
    double at(std::size_t ch, std::size_t y, std::size_t x) const {
        return data[(ch * h + y) * w + x];
    }
};

enum class ChannelKind { Rgb, Heatmap, Segment };

struct ChannelStack {
    Tensor3 channels;
    std::vector<ChannelKind> kinds;  // one entry per channel
};

struct SegmentDef {
    std::string name;
    std::vector<int> indices;  // polygon vertices as keypoint indices
};

struct SegmentTable {
    std::vector<SegmentDef> segments;  // exactly 13
    void validate() const;
};

// Keypoint-index partition used by PCK reporting; names fixed by the
// six body-part columns.
struct GroupTable {
    static constexpr std::array<const char*, kNumPckGroups> kNames = {
        "wheel", "fender", "rear", "front", "rear_window", "front_window"};
    std::array<std::vector<int>, kNumPckGroups> groups;
    void validate() const;
};

struct PoseConfig {
    SegmentTable segments;
    GroupTable groups;
    std::vector<std::pair<int, int>> flip_pairs;
};

PoseConfig default_pose_config();
PoseConfig load_pose_config(const std::string& path);

struct PckReport {
    std::array<std::optional<double>, kNumPckGroups> per_group_accuracy;  // percent
    double mean_accuracy = 0.0;  // percent, keypoint-weighted
    std::size_t evaluated_keypoints = 0;
};

std::string pck_report_to_json(const PckReport& report);

PoseVector normalize_keypoints(const KeypointSet& kps, int image_w, int image_h);

Tensor3 render_heatmaps(const KeypointSet& kps, int image_w, int image_h,
                        int map_w = 64, int map_h = 64, double sigma = 2.0,
                        double conf_threshold = 0.1);

Tensor3 rasterize_segments(const KeypointSet& kps, const SegmentTable& table,
                           int image_w, int image_h, int map_w = 64,
                           int map_h = 64, double conf_threshold = 0.1);

ChannelStack stack_channels(const Tensor3& rgb, const Tensor3& aux,
                            ChannelKind aux_kind, double scale = 1.0);

std::vector<double> pool_stacked_channels(const ChannelStack& stack, int grid);

KeypointSet flip_horizontal(const KeypointSet& kps, double image_w,
                            const std::vector<std::pair<int, int>>& pairs);

PckReport pck_evaluate(const std::vector<KeypointSet>& pred,
                       const std::vector<KeypointSet>& gt,
                       const std::vector<BBox>& bboxes,
                       const GroupTable& groups,
                       double reference_ratio = 0.25,
                       double threshold_multiplier = 0.5);

}  // namespace vreid
