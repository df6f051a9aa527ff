#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "oracles.hpp"
#include "vreid/losses.hpp"

using namespace vreid;

TEST_CASE("cross entropy on uniform logits equals ln(n)/n in literal mode") {
    std::vector<double> two{0.0, 0.0};
    CHECK(softmax_xent(two, 0).loss == doctest::Approx(std::log(2.0) / 2.0));
    CHECK(softmax_xent(two, 0, false).loss == doctest::Approx(std::log(2.0)));

    std::vector<double> four{1.0, 1.0, 1.0, 1.0};
    CHECK(softmax_xent(four, 2).loss == doctest::Approx(std::log(4.0) / 4.0));
    CHECK(softmax_xent(four, 2, false).loss == doctest::Approx(std::log(4.0)));
}

TEST_CASE("cross entropy is invariant to a constant logit shift") {
    std::vector<double> logits{0.3, -1.2, 2.5, 0.0};
    auto base = softmax_xent(logits, 2);
    for (double shift : {1.0, -7.5, 300.0}) {
        std::vector<double> shifted = logits;
        for (auto& v : shifted) v += shift;
        auto moved = softmax_xent(shifted, 2);
        CHECK(moved.loss == doctest::Approx(base.loss).epsilon(1e-12));
        for (std::size_t i = 0; i < logits.size(); ++i)
            CHECK(moved.grad[i] == doctest::Approx(base.grad[i]).epsilon(1e-12));
    }
}

TEST_CASE("cross entropy gradient sums to zero and matches differences") {
    std::vector<double> logits{0.5, -0.25, 1.75};
    auto res = softmax_xent(logits, 1);
    double sum = 0.0;
    for (double g : res.grad) sum += g;
    CHECK(sum == doctest::Approx(0.0).epsilon(1e-12));

    const double h = 1e-6;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        auto plus = logits, minus = logits;
        plus[i] += h;
        minus[i] -= h;
        const double fd = (softmax_xent(plus, 1).loss -
                           softmax_xent(minus, 1).loss) / (2 * h);
        CHECK(res.grad[i] == doctest::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("cross entropy input validation") {
    std::vector<double> one{1.0};
    CHECK_THROWS_AS(softmax_xent(one, 0), LossError);
    std::vector<double> two{1.0, 2.0};
    CHECK_THROWS_AS(softmax_xent(two, 2), LossError);
    CHECK_THROWS_AS(softmax_xent(two, -1), LossError);
    std::vector<double> inf{1.0, std::numeric_limits<double>::infinity()};
    CHECK_THROWS_AS(softmax_xent(inf, 0), LossError);
}

TEST_CASE("pairwise distances reproduce a 3-4-5 triangle") {
    Matrix f(3, 2);
    f(0, 0) = 0.0; f(0, 1) = 0.0;
    f(1, 0) = 3.0; f(1, 1) = 0.0;
    f(2, 0) = 3.0; f(2, 1) = 4.0;
    Matrix d = pairwise_euclidean(f);
    CHECK(d(0, 1) == doctest::Approx(3.0));
    CHECK(d(1, 2) == doctest::Approx(4.0));
    CHECK(d(0, 2) == doctest::Approx(5.0));
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(d(i, i) == 0.0);
        for (std::size_t j = 0; j < 3; ++j) CHECK(d(i, j) == d(j, i));
    }
}

TEST_CASE("batch-hard triplet reproduces the 1-d worked example") {
    // Features 0, 2, 1, 3 with ids A, A, B, B and margin 0.3: every anchor's
    // hardest positive is at distance 2 and hardest negative at distance 1,
    // so each hinge is 0.3 + 2 - 1 = 1.3 and so is the mean.
    Matrix f(4, 1);
    f(0, 0) = 0.0; f(1, 0) = 2.0; f(2, 0) = 1.0; f(3, 0) = 3.0;
    std::vector<int> ids{0, 0, 1, 1};
    TripletResult res = batch_hard_triplet(f, ids, TripletConfig{});
    CHECK(res.loss == doctest::Approx(1.3).epsilon(1e-9));
}

TEST_CASE("batch-hard triplet matches brute-force enumeration") {
    std::mt19937_64 rng(123);
    std::uniform_int_distribution<int> n_ids(2, 6);
    std::uniform_int_distribution<int> per_id(2, 5);
    std::uniform_int_distribution<int> dim_dist(1, 16);
    std::normal_distribution<double> gauss(0.0, 1.0);
    TripletConfig cfg;

    for (int trial = 0; trial < 200; ++trial) {
        std::vector<int> ids;
        const int classes = n_ids(rng);
        for (int c = 0; c < classes; ++c) {
            const int count = per_id(rng);
            for (int s = 0; s < count; ++s) ids.push_back(c);
        }
        const std::size_t d = dim_dist(rng);
        Matrix f(ids.size(), d);
        for (auto& v : f.data()) v = gauss(rng);

        TripletResult res = batch_hard_triplet(f, ids, cfg);
        const double ref = oracle::naive_batch_hard(f, ids, cfg.margin,
                                                    cfg.distance_epsilon);
        REQUIRE(res.loss == doctest::Approx(ref).epsilon(1e-9));
    }
}

TEST_CASE("triplet gradient matches central finite differences") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<int> ids{0, 0, 0, 1, 1, 2, 2};
    TripletConfig cfg;
    const double h = 1e-6;

    for (int trial = 0; trial < 10; ++trial) {
        Matrix f(ids.size(), 4);
        for (auto& v : f.data()) v = gauss(rng);
        TripletResult res = batch_hard_triplet(f, ids, cfg);
        for (std::size_t i = 0; i < f.size(); ++i) {
            Matrix plus = f, minus = f;
            plus.data()[i] += h;
            minus.data()[i] -= h;
            const double fd = (batch_hard_triplet(plus, ids, cfg).loss -
                               batch_hard_triplet(minus, ids, cfg).loss) /
                              (2 * h);
            REQUIRE(res.grad.data()[i] == doctest::Approx(fd).epsilon(1e-4));
        }
    }
}

TEST_CASE("an inactive hinge contributes zero loss and gradient") {
    // Two tight clusters far apart: margin easily satisfied everywhere.
    Matrix f(4, 2);
    f(0, 0) = 0.0;  f(0, 1) = 0.0;
    f(1, 0) = 0.1;  f(1, 1) = 0.0;
    f(2, 0) = 50.0; f(2, 1) = 0.0;
    f(3, 0) = 50.1; f(3, 1) = 0.0;
    std::vector<int> ids{0, 0, 1, 1};
    TripletResult res = batch_hard_triplet(f, ids, TripletConfig{});
    CHECK(res.loss == 0.0);
    for (double g : res.grad.data()) CHECK(g == 0.0);
}

TEST_CASE("triplet input validation") {
    Matrix f(3, 2);
    std::vector<int> ids{0, 0, 0};
    CHECK_THROWS_AS(batch_hard_triplet(f, ids, TripletConfig{}), LossError);
    std::vector<int> single{0, 0, 1};  // identity 1 has one sample
    CHECK_THROWS_AS(batch_hard_triplet(f, single, TripletConfig{}), LossError);
    std::vector<int> short_ids{0, 0};
    CHECK_THROWS_AS(batch_hard_triplet(f, short_ids, TripletConfig{}),
                    LossError);
}

TEST_CASE("loss bundle enforces the combination identities") {
    LossWeights w;
    LossBundle b = make_loss_bundle(1.3, 0.2, 0.4, 0.8, w);
    CHECK(b.id == doctest::Approx(1.5));  // λ_htri = λ_xent = 1
    CHECK(b.total == doctest::Approx(1.5 + 0.125 * 0.4 + 0.125 * 0.8));

    SUBCASE("zeroing the triplet weight leaves pure cross entropy") {
        LossWeights only_xent;
        only_xent.lambda_htri = 0.0;
        LossBundle bb = make_loss_bundle(7.0, 0.2, 0.0, 0.0, only_xent);
        CHECK(bb.id == doctest::Approx(0.2));
        CHECK(bb.total == doctest::Approx(0.2));
    }
    SUBCASE("zeroing the xent weight leaves pure triplet") {
        LossWeights only_tri;
        only_tri.lambda_xent = 0.0;
        LossBundle bb = make_loss_bundle(1.3, 9.0, 0.0, 0.0, only_tri);
        CHECK(bb.id == doctest::Approx(1.3));
    }
}

TEST_CASE("total_loss validates its inputs") {
    LossWeights w;
    CHECK(total_loss(1.0, 2.0, 4.0, w) == doctest::Approx(1.0 + 0.25 + 0.5));
    CHECK_THROWS_AS(total_loss(-1.0, 0.0, 0.0, w), LossError);
    CHECK_THROWS_AS(
        total_loss(std::numeric_limits<double>::quiet_NaN(), 0.0, 0.0, w),
        LossError);
}

namespace {

DatasetManifest batching_manifest(int n_ids, int per_id) {
    DatasetManifest m;
    for (int id = 0; id < n_ids; ++id) {
        for (int s = 0; s < per_id; ++s) {
            SampleRecord r;
            r.image_id = std::to_string(id) + "_" + std::to_string(s);
            r.identity = id;
            r.bbox = {0.0, 0.0, 1.0, 1.0};
            r.image_width = r.image_height = 1;
            r.split = Split::Train;
            m.records.push_back(std::move(r));
        }
    }
    return m;
}

}  // namespace

TEST_CASE("pk batches pick P distinct identities with K samples each") {
    DatasetManifest m = batching_manifest(10, 6);
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        auto batch = sample_pk_batch(m, 4, 3, rng);
        REQUIRE(batch.size() == 12);
        std::set<int> ids;
        for (std::size_t i = 0; i < batch.size(); i += 3) {
            const int id = m.records[batch[i]].identity;
            ids.insert(id);
            std::set<std::size_t> distinct;
            for (int k = 0; k < 3; ++k) {
                CHECK(m.records[batch[i + k]].identity == id);
                distinct.insert(batch[i + k]);
            }
            // 6 samples available for K = 3: drawn without replacement.
            CHECK(distinct.size() == 3);
        }
        CHECK(ids.size() == 4);
    }
}

TEST_CASE("pk batching is deterministic for a fixed generator state") {
    DatasetManifest m = batching_manifest(8, 4);
    std::mt19937_64 a(5), b(5);
    for (int i = 0; i < 10; ++i)
        CHECK(sample_pk_batch(m, 3, 2, a) == sample_pk_batch(m, 3, 2, b));
}

TEST_CASE("pk batching falls back to replacement for scarce identities") {
    DatasetManifest m = batching_manifest(4, 2);  // only 2 samples per id
    std::mt19937_64 rng(3);
    auto batch = sample_pk_batch(m, 4, 5, rng);
    REQUIRE(batch.size() == 20);
    for (std::size_t i = 0; i < batch.size(); i += 5) {
        const int id = m.records[batch[i]].identity;
        for (int k = 0; k < 5; ++k)
            CHECK(m.records[batch[i + k]].identity == id);
    }
    CHECK_THROWS_AS(sample_pk_batch(m, 5, 2, rng), LossError);  // P > ids
    CHECK_THROWS_AS(sample_pk_batch(m, 0, 2, rng), LossError);
}
