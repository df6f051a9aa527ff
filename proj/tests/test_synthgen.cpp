#include <doctest.h>

#include <cmath>
#include <map>
#include <random>
#include <set>

#include "vreid/metrics.hpp"
#include "vreid/posegeom.hpp"
#include "vreid/synthgen.hpp"

using namespace vreid;

TEST_CASE("frontal projection mirrors pairs about the vertical centerline") {
    TemplateModel model = TemplateModel::standard();
    KeypointSet kps = project_template(model, 0.0, 0.0, 256, 256);
    for (int i = 0; i < kNumKeypoints / 2; ++i) {
        const auto& left = kps.points[2 * i];
        const auto& right = kps.points[2 * i + 1];
        CHECK(left.x - 128.0 == doctest::Approx(-(right.x - 128.0)));
        CHECK(left.y == doctest::Approx(right.y));
    }
}

TEST_CASE("top-down projection leaves every keypoint visible") {
    TemplateModel model = TemplateModel::standard();
    KeypointSet kps = project_template(model, 0.0, 90.0, 256, 256);
    for (const auto& p : kps.points) CHECK(p.confidence == 1.0);
}

TEST_CASE("projection fits the wireframe into 80% of the image") {
    TemplateModel model = TemplateModel::standard();
    for (double az : {0.0, 33.0, 65.0}) {
        KeypointSet kps = project_template(model, az, 20.0, 256, 256);
        double min_x = kps.points[0].x, max_x = kps.points[0].x;
        double min_y = kps.points[0].y, max_y = kps.points[0].y;
        for (const auto& p : kps.points) {
            min_x = std::min(min_x, p.x);
            max_x = std::max(max_x, p.x);
            min_y = std::min(min_y, p.y);
            max_y = std::max(max_y, p.y);
        }
        const double extent = std::max(max_x - min_x, max_y - min_y);
        CHECK(extent == doctest::Approx(0.8 * 256));
        CHECK(min_x >= 0.0);
        CHECK(max_x <= 256.0);
    }
    CHECK_THROWS_AS(project_template(model, 0.0, 0.0, 0, 256), GenError);
    CHECK_THROWS_AS(
        project_template(model, std::numeric_limits<double>::infinity(), 0.0,
                         256, 256),
        GenError);
}

TEST_CASE("negated azimuth equals the horizontal flip of the projection") {
    TemplateModel model = TemplateModel::standard(0.9, 1.1);
    const auto pairs = default_pose_config().flip_pairs;
    for (double az : {15.0, 42.0, 66.0}) {
        KeypointSet pos = project_template(model, az, 22.0, 256, 256);
        KeypointSet neg = project_template(model, -az, 22.0, 256, 256);
        KeypointSet flipped = flip_horizontal(pos, 256.0, pairs);
        for (int k = 0; k < kNumKeypoints; ++k) {
            REQUIRE(neg.points[k].x ==
                    doctest::Approx(flipped.points[k].x).epsilon(1e-9));
            REQUIRE(neg.points[k].y ==
                    doctest::Approx(flipped.points[k].y).epsilon(1e-9));
            REQUIRE(neg.points[k].confidence == flipped.points[k].confidence);
        }
    }
}

TEST_CASE("perturbation jitters within bounds and marks dropped points") {
    TemplateModel model = TemplateModel::standard();
    KeypointSet clean = project_template(model, 40.0, 20.0, 256, 256);

    std::mt19937_64 rng(4);
    KeypointSet noisy = perturb_keypoints(clean, 2.5, 0.0, rng);
    for (int k = 0; k < kNumKeypoints; ++k) {
        CHECK(std::abs(noisy.points[k].x - clean.points[k].x) <= 2.5);
        CHECK(std::abs(noisy.points[k].y - clean.points[k].y) <= 2.5);
    }

    KeypointSet dropped = perturb_keypoints(clean, 0.0, 1.0, rng);
    for (const auto& p : dropped.points) CHECK(p.confidence < 0.1);

    CHECK_THROWS_AS(perturb_keypoints(clean, -1.0, 0.0, rng), GenError);
}

TEST_CASE("generation is deterministic and carries consistent labels") {
    GenSpec spec = gen_preset("easy");
    spec.n_identities = 12;
    spec.samples_per_identity = 4;
    spec.seed = 31;

    GeneratedDataset a = generate_dataset(spec);
    GeneratedDataset b = generate_dataset(spec);
    REQUIRE(a.manifest.records.size() == 48);
    CHECK(a.descriptors.vectors == b.descriptors.vectors);
    CHECK(a.pose_vectors == b.pose_vectors);

    std::set<std::string> ids;
    for (std::size_t i = 0; i < a.manifest.records.size(); ++i) {
        const auto& r = a.manifest.records[i];
        CHECK(ids.insert(r.image_id).second);  // unique image ids
        CHECK(r.color == r.identity % spec.n_colors);
        CHECK(r.vtype == (r.identity / spec.n_colors) % spec.n_types);
        CHECK(r.camera == static_cast<int>(i) % spec.n_cameras);
        CHECK(r.bbox.w > 0.0);
        CHECK(r.bbox.h > 0.0);
        REQUIRE(r.keypoints.has_value());
        if (r.identity < spec.n_identities / 2) {
            CHECK(r.split == Split::Train);
        } else {
            CHECK(r.split ==
                  (i % spec.samples_per_identity == 0 ? Split::Query
                                                      : Split::Gallery));
        }
    }
    CHECK(a.manifest.color_names.size() == 4);
    CHECK(a.manifest.type_names.size() == 4);
}

TEST_CASE("per-identity streams make output independent of identity count") {
    // Adding identities must not disturb the samples of existing ones.
    GenSpec small = gen_preset("easy");
    small.n_identities = 6;
    small.samples_per_identity = 3;
    small.seed = 77;
    GenSpec big = small;
    big.n_identities = 10;

    GeneratedDataset a = generate_dataset(small);
    GeneratedDataset b = generate_dataset(big);
    const std::size_t shared = small.n_identities * small.samples_per_identity;
    for (std::size_t row = 0; row < shared; ++row)
        for (std::size_t k = 0; k < a.descriptors.vectors.cols(); ++k)
            REQUIRE(a.descriptors.vectors(row, k) ==
                    b.descriptors.vectors(row, k));
}

TEST_CASE("variability ratio grows with intra-class spread") {
    auto ratio_for = [](double intra) {
        GenSpec spec;
        spec.n_identities = 16;
        spec.samples_per_identity = 6;
        spec.intra_sigma = intra;
        spec.inter_scale = 5.0;
        spec.seed = 13;
        GeneratedDataset data = generate_dataset(spec);
        std::vector<int> ids;
        for (const auto& r : data.manifest.records) ids.push_back(r.identity);
        return intra_inter_ratio(data.descriptors.vectors, ids);
    };
    double prev = 0.0;
    for (double intra : {0.05, 0.3, 1.0, 3.0}) {
        const double r = ratio_for(intra);
        CHECK(r > prev);
        prev = r;
    }
}

TEST_CASE("the hard preset lands in the intended variability band") {
    GenSpec spec = gen_preset("hard");
    spec.seed = 1;
    GeneratedDataset data = generate_dataset(spec);
    std::vector<int> ids;
    for (const auto& r : data.manifest.records) ids.push_back(r.identity);
    const double ratio = intra_inter_ratio(data.descriptors.vectors, ids);
    CHECK(ratio >= 0.90);
    CHECK(ratio <= 0.96);
}

TEST_CASE("spec validation rejects inconsistent parameters") {
    GenSpec spec;
    spec.n_identities = 0;
    CHECK_THROWS_AS(spec.validate(), GenError);
    spec = GenSpec{};
    spec.intra_sigma = -0.1;
    CHECK_THROWS_AS(spec.validate(), GenError);
    spec = GenSpec{};
    spec.occlusion_drop_prob = 1.5;
    CHECK_THROWS_AS(spec.validate(), GenError);
    CHECK_THROWS_AS(gen_preset("medium"), GenError);
    CHECK_NOTHROW(GenSpec{}.validate());
}
