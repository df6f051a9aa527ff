#include "vreid/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include <json.hpp>

namespace vreid {

using nlohmann::json;

Matrix distance_matrix(const Matrix& query, const Matrix& gallery,
                       std::size_t tile, int threads) {
    if (query.cols() != gallery.cols())
        throw MetricError("query/gallery dimension mismatch");
    const std::size_t q = query.rows();
    const std::size_t g = gallery.rows();
    const std::size_t d = query.cols();
    if (tile == 0) tile = g;

    Matrix dmat(q, g);
    auto compute_rows = [&](std::size_t row_begin, std::size_t row_end) {
        for (std::size_t j0 = 0; j0 < g; j0 += tile) {
            const std::size_t j1 = std::min(j0 + tile, g);
            for (std::size_t i = row_begin; i < row_end; ++i) {
                const double* qi = query.row(i);
                for (std::size_t j = j0; j < j1; ++j) {
                    const double* gj = gallery.row(j);
                    double s = 0.0;
                    for (std::size_t k = 0; k < d; ++k) {
                        const double diff = qi[k] - gj[k];
                        s += diff * diff;
                    }
                    dmat(i, j) = std::sqrt(std::max(s, 0.0));
                }
            }
        }
    };

    if (threads <= 1 || q < 2) {
        compute_rows(0, q);
    } else {
        const std::size_t nt = std::min<std::size_t>(threads, q);
        std::vector<std::thread> pool;
        const std::size_t chunk = (q + nt - 1) / nt;
        for (std::size_t t = 0; t < nt; ++t) {
            const std::size_t b = t * chunk;
            const std::size_t e = std::min(b + chunk, q);
            if (b >= e) break;
            pool.emplace_back(compute_rows, b, e);
        }
        for (auto& th : pool) th.join();
    }
    return dmat;
}

std::vector<std::vector<std::size_t>> rank_gallery(const Matrix& dmat) {
    std::vector<std::vector<std::size_t>> ranked(dmat.rows());
    for (std::size_t i = 0; i < dmat.rows(); ++i) {
        auto& order = ranked[i];
        order.resize(dmat.cols());
        std::iota(order.begin(), order.end(), 0);
        const double* row = dmat.row(i);
        std::sort(order.begin(), order.end(),
                  [row](std::size_t a, std::size_t b) {
                      if (row[a] != row[b]) return row[a] < row[b];
                      return a < b;
                  });
    }
    return ranked;
}

namespace {

// Per-query match flags after junk exclusion: same-id same-camera gallery
// entries are dropped, everything else keeps its rank order.
std::vector<char> filtered_matches(const std::vector<std::size_t>& order,
                                   int q_id, int q_cam, const EvalMeta& gmeta,
                                   const EvalProtocol& protocol) {
    std::vector<char> matches;
    matches.reserve(order.size());
    for (std::size_t g : order) {
        const bool same_id = gmeta.identity[g] == q_id;
        if (protocol.exclude_same_camera_same_id && same_id &&
            gmeta.camera[g] == q_cam)
            continue;
        matches.push_back(same_id ? 1 : 0);
    }
    return matches;
}

void check_meta(const std::vector<std::vector<std::size_t>>& ranked,
                const EvalMeta& qmeta, const EvalMeta& gmeta) {
    if (qmeta.identity.size() != ranked.size() ||
        qmeta.camera.size() != ranked.size())
        throw MetricError("query metadata not aligned with ranking");
    for (const auto& order : ranked)
        if (order.size() != gmeta.identity.size() ||
            gmeta.camera.size() != gmeta.identity.size())
            throw MetricError("gallery metadata not aligned with ranking");
}

}  // namespace

std::vector<double> cmc_curve(const std::vector<std::vector<std::size_t>>& ranked,
                              const EvalMeta& qmeta, const EvalMeta& gmeta,
                              const EvalProtocol& protocol) {
    check_meta(ranked, qmeta, gmeta);
    std::vector<double> cmc(protocol.cmc_max_rank, 0.0);
    std::size_t used = 0;
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        auto matches = filtered_matches(ranked[i], qmeta.identity[i],
                                        qmeta.camera[i], gmeta, protocol);
        const bool has_positive =
            std::find(matches.begin(), matches.end(), 1) != matches.end();
        if (!has_positive) {
            if (protocol.skip_queries_without_positives) continue;
            ++used;
            continue;  // counts as a miss at every rank
        }
        ++used;
        std::size_t first_hit = matches.size();
        for (std::size_t r = 0; r < matches.size(); ++r)
            if (matches[r]) { first_hit = r; break; }
        for (int k = static_cast<int>(first_hit); k < protocol.cmc_max_rank; ++k)
            cmc[k] += 1.0;
    }
    if (used == 0) throw MetricError("all queries skipped: nothing to evaluate");
    for (auto& v : cmc) v /= static_cast<double>(used);
    return cmc;
}

double mean_ap(const std::vector<std::vector<std::size_t>>& ranked,
               const EvalMeta& qmeta, const EvalMeta& gmeta,
               const EvalProtocol& protocol, std::optional<int> topK) {
    check_meta(ranked, qmeta, gmeta);
    double ap_sum = 0.0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        auto matches = filtered_matches(ranked[i], qmeta.identity[i],
                                        qmeta.camera[i], gmeta, protocol);
        const std::size_t n_pos =
            static_cast<std::size_t>(std::count(matches.begin(), matches.end(), 1));
        if (n_pos == 0) {
            if (protocol.skip_queries_without_positives) continue;
            ++used;
            continue;
        }
        ++used;
        const std::size_t limit =
            topK ? std::min<std::size_t>(*topK, matches.size()) : matches.size();
        std::size_t hits = 0;
        double ap = 0.0;
        for (std::size_t r = 0; r < limit; ++r) {
            if (matches[r]) {
                ++hits;
                ap += static_cast<double>(hits) / static_cast<double>(r + 1);
            }
        }
        const double denom =
            topK ? static_cast<double>(std::min<std::size_t>(n_pos, *topK))
                 : static_cast<double>(n_pos);
        ap_sum += ap / denom;
    }
    if (used == 0) throw MetricError("all queries skipped: nothing to evaluate");
    return ap_sum / static_cast<double>(used);
}

double attribute_accuracy(const std::vector<int>& predicted,
                          const std::vector<int>& truth) {
    if (predicted.size() != truth.size())
        throw MetricError("attribute prediction/truth length mismatch");
    if (predicted.empty()) throw MetricError("empty attribute input");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i)
        if (predicted[i] == truth[i]) ++correct;
    return 100.0 * static_cast<double>(correct) /
           static_cast<double>(predicted.size());
}

double intra_inter_ratio(const Matrix& features, const std::vector<int>& ids) {
    const std::size_t n = features.rows();
    const std::size_t d = features.cols();
    if (ids.size() != n) throw MetricError("ids length mismatch");

    double intra_sum = 0.0, inter_sum = 0.0;
    std::size_t intra_count = 0, inter_count = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double diff = features(i, k) - features(j, k);
                s += diff * diff;
            }
            const double dist = std::sqrt(std::max(s, 0.0));
            if (ids[i] == ids[j]) {
                intra_sum += dist;
                ++intra_count;
            } else {
                inter_sum += dist;
                ++inter_count;
            }
        }
    }
    if (intra_count == 0) throw MetricError("no intra-class pairs");
    if (inter_count == 0 || inter_sum == 0.0)
        throw MetricError("inter-class mean distance is zero");
    const double intra_mean = intra_sum / static_cast<double>(intra_count);
    const double inter_mean = inter_sum / static_cast<double>(inter_count);
    return intra_mean / inter_mean;
}

EvalReport evaluate(const Matrix& query, const EvalMeta& qmeta,
                    const Matrix& gallery, const EvalMeta& gmeta,
                    const EvalProtocol& protocol, const EvalOptions& options) {
    Matrix dmat = distance_matrix(query, gallery, options.tile, options.threads);
    auto ranked = rank_gallery(dmat);

    EvalReport report;
    report.map = mean_ap(ranked, qmeta, gmeta, protocol);
    report.rank_k_map =
        mean_ap(ranked, qmeta, gmeta, protocol, protocol.rank_k_map_K);
    report.cmc = cmc_curve(ranked, qmeta, gmeta, protocol);

    std::size_t used = 0, skipped = 0;
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        auto matches = filtered_matches(ranked[i], qmeta.identity[i],
                                        qmeta.camera[i], gmeta, protocol);
        const bool has_positive =
            std::find(matches.begin(), matches.end(), 1) != matches.end();
        if (!has_positive && protocol.skip_queries_without_positives)
            ++skipped;
        else
            ++used;
    }
    report.n_queries_used = used;
    report.n_queries_skipped = skipped;

    if (options.color)
        report.color_accuracy =
            attribute_accuracy(options.color->predicted, options.color->truth);
    if (options.type)
        report.type_accuracy =
            attribute_accuracy(options.type->predicted, options.type->truth);

    if (options.compute_variability) {
        Matrix all(query.rows() + gallery.rows(), query.cols());
        std::vector<int> all_ids;
        all_ids.reserve(all.rows());
        for (std::size_t i = 0; i < query.rows(); ++i) {
            std::copy(query.row(i), query.row(i) + query.cols(), all.row(i));
            all_ids.push_back(qmeta.identity[i]);
        }
        for (std::size_t i = 0; i < gallery.rows(); ++i) {
            std::copy(gallery.row(i), gallery.row(i) + gallery.cols(),
                      all.row(query.rows() + i));
            all_ids.push_back(gmeta.identity[i]);
        }
        report.variability_ratio = intra_inter_ratio(all, all_ids);
    }
    return report;
}

std::string eval_report_to_json(const EvalReport& report) {
    json j;
    j["mAP"] = report.map;
    j["rank100_mAP"] = report.rank_k_map;
    j["cmc"] = report.cmc;
    j["color_acc"] = report.color_accuracy
                         ? json(*report.color_accuracy / 100.0)
                         : json(nullptr);
    j["type_acc"] = report.type_accuracy ? json(*report.type_accuracy / 100.0)
                                         : json(nullptr);
    j["variability_ratio"] = report.variability_ratio
                                 ? json(*report.variability_ratio)
                                 : json(nullptr);
    j["n_queries_used"] = report.n_queries_used;
    j["n_queries_skipped"] = report.n_queries_skipped;
    return j.dump(2);
}

}  // namespace vreid
