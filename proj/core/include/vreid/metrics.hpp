#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vreid/types.hpp"

namespace vreid {

class MetricError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct EvalProtocol {
    bool exclude_same_camera_same_id = true;
    bool skip_queries_without_positives = true;
    int rank_k_map_K = 100;
    int cmc_max_rank = 20;
};

struct EvalMeta {
    std::vector<int> identity;
    std::vector<int> camera;
};

struct EvalReport {
    double map = 0.0;
    double rank_k_map = 0.0;
    std::vector<double> cmc;  // hit rate at rank 1..cmc_max_rank
    std::optional<double> color_accuracy;  // percent
    std::optional<double> type_accuracy;   // percent
    std::optional<double> variability_ratio;
    std::size_t n_queries_used = 0;
    std::size_t n_queries_skipped = 0;
};

std::string eval_report_to_json(const EvalReport& report);

// Tiled, optionally threaded; per-entry summation order is fixed so the
// result is bitwise identical regardless of tile size or thread count.
Matrix distance_matrix(const Matrix& query, const Matrix& gallery,
                       std::size_t tile = 512, int threads = 1);

// Per query, gallery indices sorted ascending by distance, ties broken by
// lower gallery index.
std::vector<std::vector<std::size_t>> rank_gallery(const Matrix& dmat);

std::vector<double> cmc_curve(const std::vector<std::vector<std::size_t>>& ranked,
                              const EvalMeta& qmeta, const EvalMeta& gmeta,
                              const EvalProtocol& protocol);

double mean_ap(const std::vector<std::vector<std::size_t>>& ranked,
               const EvalMeta& qmeta, const EvalMeta& gmeta,
               const EvalProtocol& protocol,
               std::optional<int> topK = std::nullopt);

double attribute_accuracy(const std::vector<int>& predicted,
                          const std::vector<int>& truth);

double intra_inter_ratio(const Matrix& features, const std::vector<int>& ids);

struct AttributeEval {
    std::vector<int> predicted;
    std::vector<int> truth;
};

struct EvalOptions {
    std::optional<AttributeEval> color;
    std::optional<AttributeEval> type;
    bool compute_variability = false;
    std::size_t tile = 512;
    int threads = 1;
};

EvalReport evaluate(const Matrix& query, const EvalMeta& qmeta,
                    const Matrix& gallery, const EvalMeta& gmeta,
                    const EvalProtocol& protocol,
                    const EvalOptions& options = {});

}  // namespace vreid
