#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "vreid/metrics.hpp"

using namespace vreid;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix m(rows, cols);
    for (auto& v : m.data()) v = gauss(rng);
    return m;
}

// Ranked lists built directly from a distance row, for fixture tests.
std::vector<std::vector<std::size_t>> rank_rows(const Matrix& dmat) {
    return rank_gallery(dmat);
}

}  // namespace

TEST_CASE("ranking sorts by distance with ties to the lower index") {
    Matrix d(2, 3);
    d(0, 0) = 0.2; d(0, 1) = 0.1; d(0, 2) = 0.3;
    d(1, 0) = 0.1; d(1, 1) = 0.1; d(1, 2) = 0.05;
    auto ranked = rank_rows(d);
    CHECK(ranked[0] == std::vector<std::size_t>{1, 0, 2});
    CHECK(ranked[1] == std::vector<std::size_t>{2, 0, 1});  // tie -> lower index
}

TEST_CASE("ranking is stable under gallery permutation") {
    std::mt19937_64 rng(21);
    Matrix q = random_matrix(5, 8, rng);
    Matrix g = random_matrix(12, 8, rng);

    std::vector<std::size_t> perm(12);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix gp(12, 8);
    for (std::size_t i = 0; i < 12; ++i)
        std::copy(g.row(perm[i]), g.row(perm[i]) + 8, gp.row(i));

    auto ranked = rank_gallery(distance_matrix(q, g));
    auto ranked_p = rank_gallery(distance_matrix(q, gp));
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t r = 0; r < 12; ++r)
            CHECK(perm[ranked_p[i][r]] == ranked[i][r]);
}

TEST_CASE("AP fixture: positives at ranks 1 and 3 give 5/6") {
    Matrix d(1, 4);
    d(0, 0) = 0.1; d(0, 1) = 0.2; d(0, 2) = 0.3; d(0, 3) = 0.4;
    EvalMeta qm{{7}, {0}};
    EvalMeta gm{{7, 1, 7, 2}, {1, 1, 1, 1}};  // matches at ranks 1 and 3
    EvalProtocol protocol;
    const double ap = mean_ap(rank_rows(d), qm, gm, protocol);
    CHECK(ap == doctest::Approx((1.0 / 1.0 + 2.0 / 3.0) / 2.0));  // 5/6
    CHECK(ap == doctest::Approx(5.0 / 6.0));
}

TEST_CASE("truncated AP fixture: AP@2 = 0.5 with a hit at rank 1 of 2") {
    // Two positives overall, only the first inside the cutoff: the truncated
    // denominator min(n_pos, K) = 2 gives (1/1)/2 = 0.5.
    Matrix d(1, 4);
    d(0, 0) = 0.1; d(0, 1) = 0.2; d(0, 2) = 0.3; d(0, 3) = 0.4;
    EvalMeta qm{{7}, {0}};
    EvalMeta gm{{7, 1, 2, 7}, {1, 1, 1, 1}};
    EvalProtocol protocol;
    CHECK(mean_ap(rank_rows(d), qm, gm, protocol, 2) == doctest::Approx(0.5));
    // Untruncated AP for the same list: (1 + 2/4)/2 = 0.75.
    CHECK(mean_ap(rank_rows(d), qm, gm, protocol) == doctest::Approx(0.75));
}

TEST_CASE("same-camera same-id gallery entries are junk") {
    Matrix d(1, 3);
    d(0, 0) = 0.1; d(0, 1) = 0.2; d(0, 2) = 0.3;
    EvalMeta qm{{7}, {0}};
    // Nearest match shares the query camera: excluded, so the id-7 entry at
    // rank 3 becomes the only positive, at effective rank 2.
    EvalMeta gm{{7, 1, 7}, {0, 1, 1}};
    EvalProtocol protocol;
    CHECK(mean_ap(rank_rows(d), qm, gm, protocol) == doctest::Approx(0.5));

    protocol.exclude_same_camera_same_id = false;
    CHECK(mean_ap(rank_rows(d), qm, gm, protocol) ==
          doctest::Approx((1.0 + 2.0 / 3.0) / 2.0));
}

TEST_CASE("queries without positives are skipped or fail loudly") {
    Matrix d(2, 2);
    d(0, 0) = 0.1; d(0, 1) = 0.2;
    d(1, 0) = 0.1; d(1, 1) = 0.2;
    EvalMeta qm{{1, 9}, {0, 0}};  // id 9 has no gallery sample
    EvalMeta gm{{1, 2}, {1, 1}};
    EvalProtocol protocol;
    CHECK(mean_ap(rank_rows(d), qm, gm, protocol) == doctest::Approx(1.0));

    EvalMeta qm_none{{9, 9}, {0, 0}};
    CHECK_THROWS_AS(mean_ap(rank_rows(d), qm_none, gm, protocol), MetricError);
}

TEST_CASE("cmc is monotone nondecreasing and matches the naive oracle") {
    std::mt19937_64 rng(33);
    EvalProtocol protocol;
    for (int trial = 0; trial < 20; ++trial) {
        std::uniform_int_distribution<int> ids(0, 5), cams(0, 2);
        Matrix q = random_matrix(6, 4, rng);
        Matrix g = random_matrix(25, 4, rng);
        EvalMeta qm, gm;
        for (int i = 0; i < 6; ++i) {
            qm.identity.push_back(ids(rng));
            qm.camera.push_back(cams(rng));
        }
        for (int i = 0; i < 25; ++i) {
            gm.identity.push_back(ids(rng));
            gm.camera.push_back(cams(rng));
        }
        auto ranked = rank_gallery(distance_matrix(q, g));
        std::vector<double> cmc;
        try {
            cmc = cmc_curve(ranked, qm, gm, protocol);
        } catch (const MetricError&) {
            continue;  // all queries skipped in this draw
        }
        for (std::size_t k = 1; k < cmc.size(); ++k)
            REQUIRE(cmc[k] >= cmc[k - 1]);
        auto ref = oracle::naive_eval(q, g, qm, gm, protocol.rank_k_map_K,
                                      protocol.cmc_max_rank);
        for (std::size_t k = 0; k < cmc.size(); ++k)
            REQUIRE(cmc[k] == doctest::Approx(ref.cmc[k]).epsilon(1e-9));
    }
}

TEST_CASE("mAP and rank-K mAP match the naive oracle on random instances") {
    std::mt19937_64 rng(44);
    EvalProtocol protocol;
    int evaluated = 0;
    while (evaluated < 60) {
        std::uniform_int_distribution<int> ids(0, 7), cams(0, 3);
        std::uniform_int_distribution<int> qn(2, 8), gn(10, 40);
        const int nq = qn(rng), ng = gn(rng);
        Matrix q = random_matrix(nq, 6, rng);
        Matrix g = random_matrix(ng, 6, rng);
        EvalMeta qm, gm;
        for (int i = 0; i < nq; ++i) {
            qm.identity.push_back(ids(rng));
            qm.camera.push_back(cams(rng));
        }
        for (int i = 0; i < ng; ++i) {
            gm.identity.push_back(ids(rng));
            gm.camera.push_back(cams(rng));
        }
        auto ranked = rank_gallery(distance_matrix(q, g));
        double map, map_k;
        try {
            map = mean_ap(ranked, qm, gm, protocol);
            map_k = mean_ap(ranked, qm, gm, protocol, protocol.rank_k_map_K);
        } catch (const MetricError&) {
            continue;
        }
        ++evaluated;
        auto ref = oracle::naive_eval(q, g, qm, gm, protocol.rank_k_map_K,
                                      protocol.cmc_max_rank);
        REQUIRE(map == doctest::Approx(ref.map).epsilon(1e-9));
        REQUIRE(map_k == doctest::Approx(ref.map_at_k).epsilon(1e-9));
    }
}

TEST_CASE("retrieval metrics are invariant to uniform feature scaling") {
    std::mt19937_64 rng(55);
    Matrix q = random_matrix(5, 8, rng);
    Matrix g = random_matrix(20, 8, rng);
    EvalMeta qm, gm;
    std::uniform_int_distribution<int> ids(0, 4);
    for (int i = 0; i < 5; ++i) { qm.identity.push_back(ids(rng)); qm.camera.push_back(0); }
    for (int i = 0; i < 20; ++i) { gm.identity.push_back(ids(rng)); gm.camera.push_back(1); }

    EvalProtocol protocol;
    const double base = mean_ap(rank_gallery(distance_matrix(q, g)), qm, gm, protocol);
    for (double s : {0.01, 3.0, 1000.0}) {
        Matrix qs = q, gs = g;
        for (auto& v : qs.data()) v *= s;
        for (auto& v : gs.data()) v *= s;
        CHECK(mean_ap(rank_gallery(distance_matrix(qs, gs)), qm, gm, protocol) ==
              doctest::Approx(base).epsilon(1e-12));
    }
}

TEST_CASE("distances are invariant under an orthogonal transform") {
    std::mt19937_64 rng(66);
    Matrix q = random_matrix(4, 2, rng);
    Matrix g = random_matrix(9, 2, rng);
    const double theta = 0.7;
    auto rotate = [theta](const Matrix& m) {
        Matrix out(m.rows(), 2);
        for (std::size_t i = 0; i < m.rows(); ++i) {
            out(i, 0) = std::cos(theta) * m(i, 0) - std::sin(theta) * m(i, 1);
            out(i, 1) = std::sin(theta) * m(i, 0) + std::cos(theta) * m(i, 1);
        }
        return out;
    };
    Matrix d0 = distance_matrix(q, g);
    Matrix d1 = distance_matrix(rotate(q), rotate(g));
    for (std::size_t i = 0; i < d0.size(); ++i)
        CHECK(d1.data()[i] == doctest::Approx(d0.data()[i]).epsilon(1e-9));
}

TEST_CASE("tiled and threaded distance matrices are bitwise serial") {
    std::mt19937_64 rng(77);
    Matrix q = random_matrix(37, 19, rng);
    Matrix g = random_matrix(101, 19, rng);
    Matrix serial = distance_matrix(q, g, 0, 1);
    for (std::size_t tile : {1u, 7u, 64u, 1000u})
        for (int threads : {1, 2, 4, 8}) {
            Matrix other = distance_matrix(q, g, tile, threads);
            REQUIRE(other.data() == serial.data());  // bitwise
        }
    Matrix bad(3, 5);
    CHECK_THROWS_AS(distance_matrix(q, bad), MetricError);
}

TEST_CASE("attribute accuracy is a straight percentage") {
    CHECK(attribute_accuracy({1, 2, 3, 4}, {1, 2, 0, 4}) == doctest::Approx(75.0));
    CHECK_THROWS_AS(attribute_accuracy({1}, {1, 2}), MetricError);
    CHECK_THROWS_AS(attribute_accuracy({}, {}), MetricError);
}

TEST_CASE("variability ratio compares intra to inter mean distances") {
    // Two identities, two samples each: intra distances 1 and 1, inter
    // distances 10, 10, sqrt(101), sqrt(101).
    Matrix f(4, 2);
    f(0, 0) = 0.0;  f(0, 1) = 0.0;
    f(1, 0) = 1.0;  f(1, 1) = 0.0;
    f(2, 0) = 0.0;  f(2, 1) = 10.0;
    f(3, 0) = 1.0;  f(3, 1) = 10.0;
    std::vector<int> ids{0, 0, 1, 1};
    const double inter = (10.0 + 10.0 + 2.0 * std::sqrt(101.0)) / 4.0;
    CHECK(intra_inter_ratio(f, ids) == doctest::Approx(1.0 / inter));
    std::vector<int> distinct{0, 1, 2, 3};
    CHECK_THROWS_AS(intra_inter_ratio(f, distinct), MetricError);
}

TEST_CASE("evaluate aggregates and serializes a full report") {
    std::mt19937_64 rng(88);
    Matrix q = random_matrix(4, 6, rng);
    Matrix g = random_matrix(16, 6, rng);
    EvalMeta qm, gm;
    for (int i = 0; i < 4; ++i) { qm.identity.push_back(i); qm.camera.push_back(0); }
    for (int i = 0; i < 16; ++i) { gm.identity.push_back(i % 4); gm.camera.push_back(1 + i % 2); }

    EvalOptions options;
    options.color = AttributeEval{{0, 1, 0, 1}, {0, 1, 1, 1}};
    options.compute_variability = true;
    options.threads = 2;
    EvalReport report = evaluate(q, qm, g, gm, EvalProtocol{}, options);
    CHECK(report.n_queries_used == 4);
    CHECK(report.n_queries_skipped == 0);
    REQUIRE(report.color_accuracy.has_value());
    CHECK(*report.color_accuracy == doctest::Approx(75.0));
    CHECK(!report.type_accuracy.has_value());
    REQUIRE(report.variability_ratio.has_value());
    CHECK(report.cmc.size() == 20);

    const std::string json = eval_report_to_json(report);
    CHECK(json.find("\"mAP\"") != std::string::npos);
    CHECK(json.find("\"rank100_mAP\"") != std::string::npos);
    CHECK(json.find("\"type_acc\": null") != std::string::npos);
}
