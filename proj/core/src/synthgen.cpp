#include "vreid/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace vreid {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

void GenSpec::validate() const {
    if (n_identities < 1 || samples_per_identity < 1 || n_colors < 1 ||
        n_types < 1 || embed_dim < 1 || n_cameras < 1)
        throw GenError("all counts must be >= 1");
    if (intra_sigma < 0 || inter_scale < 0 || keypoint_jitter < 0)
        throw GenError("sigmas and jitter must be >= 0");
    if (occlusion_drop_prob < 0 || occlusion_drop_prob > 1)
        throw GenError("occlusion_drop_prob must be in [0,1]");
    if (image_w <= 0 || image_h <= 0)
        throw GenError("image size must be positive");
    if (n_identities < 2)
        throw GenError("need at least 2 identities");
}

TemplateModel TemplateModel::standard(double length_scale, double height_scale) {
    // 18 left-side locations (lateral, longitudinal, up); right side mirrored.
    const double L[18][3] = {
        {0.90, 1.30, 0.30},   // 0  front wheel center
        {0.90, -1.30, 0.30},  // 1  rear wheel center
        {0.90, 2.00, 0.35},   // 2  front bumper corner
        {0.90, -2.00, 0.35},  // 3  rear bumper corner
        {0.80, 1.95, 0.70},   // 4  headlight
        {0.80, -1.95, 0.80},  // 5  taillight
        {0.90, 1.30, 0.75},   // 6  front fender top
        {0.90, -1.30, 0.78},  // 7  rear fender top
        {0.80, 0.70, 1.00},   // 8  windshield bottom
        {0.70, 0.25, 1.40},   // 9  windshield top
        {0.70, -0.90, 1.40},  // 10 roof rear corner
        {0.80, -1.35, 1.05},  // 11 rear window bottom
        {1.00, 0.55, 1.05},   // 12 side mirror
        {0.92, -0.20, 0.85},  // 13 door handle
        {0.90, 0.00, 0.25},   // 14 rocker mid
        {0.85, -1.95, 1.00},  // 15 trunk rear corner
        {0.55, 2.05, 0.55},   // 16 grille corner
        {0.75, 1.80, 0.85},   // 17 hood front corner
    };
    TemplateModel model;
    for (int i = 0; i < 18; ++i) {
        const double lx = L[i][0];
        const double ly = L[i][1] * length_scale;
        const double lz = L[i][2] * height_scale;
        model.points[2 * i] = {lx, ly, lz};
        model.points[2 * i + 1] = {-lx, ly, lz};
    }
    return model;
}

KeypointSet project_template(const TemplateModel& model, double azimuth_deg,
                             double elevation_deg, int image_w, int image_h) {
    if (image_w <= 0 || image_h <= 0) throw GenError("degenerate image size");
    if (!std::isfinite(azimuth_deg) || !std::isfinite(elevation_deg))
        throw GenError("angles must be finite");

    const double a = azimuth_deg * kPi / 180.0;
    const double e = elevation_deg * kPi / 180.0;
    const double ca = std::cos(a), sa = std::sin(a);
    const double ce = std::cos(e), se = std::sin(e);

    // Yaw about the up axis, then pitch about the image-x axis; orthographic
    // projection onto the xz plane with the camera along +y.
    std::array<double, kNumKeypoints> px, py, depth;
    for (int k = 0; k < kNumKeypoints; ++k) {
        const auto& p = model.points[k];
        const double x1 = p[0] * ca - p[1] * sa;
        const double y1 = p[0] * sa + p[1] * ca;
        const double z1 = p[2];
        const double y2 = y1 * ce - z1 * se;
        const double z2 = y1 * se + z1 * ce;
        px[k] = x1;
        py[k] = -z2;  // image y grows downward
        depth[k] = y2;
    }

    double min_x = px[0], max_x = px[0], min_y = py[0], max_y = py[0];
    for (int k = 1; k < kNumKeypoints; ++k) {
        min_x = std::min(min_x, px[k]);
        max_x = std::max(max_x, px[k]);
        min_y = std::min(min_y, py[k]);
        max_y = std::max(max_y, py[k]);
    }
    const double extent = std::max(max_x - min_x, max_y - min_y);
    const double scale =
        extent > 0 ? 0.8 * std::min(image_w, image_h) / extent : 1.0;
    const double cx = 0.5 * (min_x + max_x);
    const double cy = 0.5 * (min_y + max_y);

    KeypointSet out;
    for (int k = 0; k < kNumKeypoints; ++k) {
        out.points[k].x = image_w / 2.0 + (px[k] - cx) * scale;
        out.points[k].y = image_h / 2.0 + (py[k] - cy) * scale;
        // Self-occlusion: a point whose mirror partner sits strictly closer
        // to the camera is on the far side of the body.
        const int partner = (k % 2 == 0) ? k + 1 : k - 1;
        out.points[k].confidence =
            depth[partner] > depth[k] + 1e-9 ? 0.2 : 1.0;
    }
    return out;
}

KeypointSet perturb_keypoints(const KeypointSet& kps, double jitter,
                              double drop_prob, std::mt19937_64& rng) {
    if (jitter < 0) throw GenError("jitter must be >= 0");
    KeypointSet out = kps;
    std::uniform_real_distribution<double> offset(-jitter, jitter);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (auto& p : out.points) {
        if (jitter > 0) {
            p.x += offset(rng);
            p.y += offset(rng);
        }
        if (unit(rng) < drop_prob) p.confidence = 0.05;  // below blanking threshold
    }
    return out;
}

GeneratedDataset generate_dataset(const GenSpec& spec) {
    spec.validate();

    const int n_samples = spec.n_identities * spec.samples_per_identity;
    GeneratedDataset out;
    out.descriptors.dim = spec.embed_dim;
    out.descriptors.vectors = Matrix(n_samples, spec.embed_dim);
    out.pose_vectors = Matrix(n_samples, kPoseVectorLen);
    out.manifest.records.reserve(n_samples);
    for (int c = 0; c < spec.n_colors; ++c)
        out.manifest.color_names.push_back("color" + std::to_string(c));
    for (int t = 0; t < spec.n_types; ++t)
        out.manifest.type_names.push_back("type" + std::to_string(t));

    // Centroid coordinate scale chosen so mutual centroid distances land
    // near inter_scale.
    const double centroid_sigma =
        spec.inter_scale / std::sqrt(2.0 * spec.embed_dim);

    const int train_ids = spec.n_identities / 2;
    int row = 0;
    for (int id = 0; id < spec.n_identities; ++id) {
        // Per-identity stream: output is independent of generation order.
        std::mt19937_64 rng(spec.seed ^
                            (0x5851f42d4c957f2dULL * (id + 1)));
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::uniform_real_distribution<double> azimuth(spec.azimuth_min,
                                                       spec.azimuth_max);
        std::uniform_real_distribution<double> elevation(spec.elevation_min,
                                                         spec.elevation_max);

        std::vector<double> centroid(spec.embed_dim);
        for (auto& v : centroid) v = gauss(rng) * centroid_sigma;

        const int color = id % spec.n_colors;
        const int vtype = (id / spec.n_colors) % spec.n_types;
        // Type drives the template proportions so shape predicts type.
        const TemplateModel tmpl = TemplateModel::standard(
            0.55 + 0.30 * vtype, 1.50 - 0.25 * vtype);

        for (int s = 0; s < spec.samples_per_identity; ++s, ++row) {
            SampleRecord rec;
            char buf[16];
            std::snprintf(buf, sizeof(buf), "img_%05d", row);
            rec.image_id = buf;
            rec.identity = id;
            rec.camera = s % spec.n_cameras;
            rec.color = color;
            rec.vtype = vtype;
            rec.image_width = spec.image_w;
            rec.image_height = spec.image_h;
            if (id < train_ids)
                rec.split = Split::Train;
            else
                rec.split = (s == 0) ? Split::Query : Split::Gallery;

            for (int k = 0; k < spec.embed_dim; ++k)
                out.descriptors.vectors(row, k) =
                    centroid[k] + gauss(rng) * spec.intra_sigma;

            const double az = azimuth(rng);
            const double el = elevation(rng);
            KeypointSet clean =
                project_template(tmpl, az, el, spec.image_w, spec.image_h);
            double min_x = clean.points[0].x, max_x = clean.points[0].x;
            double min_y = clean.points[0].y, max_y = clean.points[0].y;
            for (const auto& p : clean.points) {
                min_x = std::min(min_x, p.x);
                max_x = std::max(max_x, p.x);
                min_y = std::min(min_y, p.y);
                max_y = std::max(max_y, p.y);
            }
            rec.bbox = BBox{min_x, min_y, max_x - min_x, max_y - min_y};

            KeypointSet noisy = perturb_keypoints(
                clean, spec.keypoint_jitter, spec.occlusion_drop_prob, rng);
            rec.keypoints = noisy;

            PoseVector pv =
                normalize_keypoints(noisy, spec.image_w, spec.image_h);
            for (int k = 0; k < kPoseVectorLen; ++k)
                out.pose_vectors(row, k) = pv.values[k];

            out.manifest.records.push_back(std::move(rec));
        }
    }
    return out;
}

GenSpec gen_preset(const std::string& name) {
    GenSpec spec;
    if (name == "easy") {
        spec.intra_sigma = 0.003;
        spec.inter_scale = 0.5;
    } else if (name == "hard") {
        spec.intra_sigma = 1.0;
        spec.inter_scale = 4.8;
    } else {
        throw GenError("unknown preset: " + name);
    }
    return spec;
}

}  // namespace vreid
