#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include "vreid/posegeom.hpp"
#include "vreid/types.hpp"

namespace vreid {

class GenError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct GenSpec {
    int n_identities = 40;
    int samples_per_identity = 10;
    int n_colors = 4;
    int n_types = 4;
    int embed_dim = 64;
    double intra_sigma = 0.05;
    double inter_scale = 10.0;
    int n_cameras = 4;
    double keypoint_jitter = 1.0;      // pixels
    double occlusion_drop_prob = 0.02;
    double azimuth_min = 20.0, azimuth_max = 70.0;      // degrees
    double elevation_min = 10.0, elevation_max = 30.0;  // degrees
    int image_w = 256, image_h = 256;
    std::uint64_t seed = 0;

    void validate() const;
};

// Canonical 3D wireframe of the 36-point vehicle model: 18 semantic
// locations mirrored left/right at indices (2i, 2i+1), consistent with
// the default flip pairs.
struct TemplateModel {
    std::array<std::array<double, 3>, kNumKeypoints> points{};  // (lateral, longitudinal, up)

    // length/height scales let vehicle type drive the body proportions
    static TemplateModel standard(double length_scale = 1.0,
                                  double height_scale = 1.0);
};

KeypointSet project_template(const TemplateModel& model, double azimuth_deg,
                             double elevation_deg, int image_w, int image_h);

KeypointSet perturb_keypoints(const KeypointSet& kps, double jitter,
                              double drop_prob, std::mt19937_64& rng);

struct GeneratedDataset {
    DatasetManifest manifest;
    EmbeddingSet descriptors;
    Matrix pose_vectors;  // n x 108
};

GeneratedDataset generate_dataset(const GenSpec& spec);

// Named presets: "easy" (separable clusters), "hard" (overlapping clusters
// tuned to a high variability ratio).
GenSpec gen_preset(const std::string& name);

}  // namespace vreid
