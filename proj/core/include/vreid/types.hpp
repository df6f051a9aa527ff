#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "vreid/mat.hpp"

namespace vreid {

inline constexpr int kNumKeypoints = 36;
inline constexpr int kPoseVectorLen = 108;  // 36 x (x, y, confidence)
inline constexpr int kNumSegments = 13;
inline constexpr int kNumPckGroups = 6;

struct Keypoint {
    double x = 0.0;
    double y = 0.0;
    double confidence = 0.0;
};

// The 36-point deformable vehicle model: 2D projections with per-point
// visibility confidence. Coordinates may fall outside the image.
struct KeypointSet {
    std::array<Keypoint, kNumKeypoints> points{};
};

struct BBox {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;
};

enum class Split { Train, Query, Gallery };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct SampleRecord {
    std::string image_id;
    int identity = 0;
    int camera = 0;
    int color = 0;
    int vtype = 0;
    BBox bbox;
    std::optional<KeypointSet> keypoints;
    int image_width = 0;
    int image_height = 0;
    Split split = Split::Train;
};

struct DatasetManifest {
    std::vector<SampleRecord> records;
    std::vector<std::string> color_names;
    std::vector<std::string> type_names;
};

// Fixed-dimension feature vectors, row i aligned with manifest record i.
struct EmbeddingSet {
    std::size_t dim = 0;
    Matrix vectors;  // n x dim
};

}  // namespace vreid
