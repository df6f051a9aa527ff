#include "vreid/losses.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

namespace vreid {

XentResult softmax_xent(std::span<const double> logits, int target,
                        bool class_count_factor) {
    const std::size_t n = logits.size();
    if (n < 2) throw LossError("softmax_xent needs at least 2 classes");
    if (target < 0 || static_cast<std::size_t>(target) >= n)
        throw LossError("target class out of range");
    for (double v : logits)
        if (!std::isfinite(v)) throw LossError("non-finite logit");

    const double m = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    std::vector<double> p(n);
    for (std::size_t i = 0; i < n; ++i) {
        p[i] = std::exp(logits[i] - m);
        denom += p[i];
    }
    for (auto& v : p) v /= denom;

    const double factor = class_count_factor ? 1.0 / static_cast<double>(n) : 1.0;
    XentResult out;
    out.loss = -factor * std::log(std::max(p[target], 1e-12));
    out.grad.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double y = (static_cast<int>(i) == target) ? 1.0 : 0.0;
        out.grad[i] = factor * (p[i] - y);
    }
    return out;
}

Matrix pairwise_euclidean(const Matrix& features) {
    const std::size_t n = features.rows();
    const std::size_t d = features.cols();
    for (double v : features.data())
        if (!std::isfinite(v)) throw LossError("non-finite feature value");

    Matrix dmat(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double diff = features(i, k) - features(j, k);
                s += diff * diff;
            }
            const double dist = std::sqrt(std::max(s, 0.0));
            dmat(i, j) = dist;
            dmat(j, i) = dist;
        }
    }
    return dmat;
}

TripletResult batch_hard_triplet(const Matrix& features,
                                 const std::vector<int>& ids,
                                 const TripletConfig& cfg) {
    const std::size_t n = features.rows();
    const std::size_t d = features.cols();
    if (ids.size() != n) throw LossError("ids length must match feature rows");

    std::unordered_map<int, int> id_counts;
    for (int id : ids) ++id_counts[id];
    if (id_counts.size() < 2)
        throw LossError("triplet mining needs at least 2 identities in the batch");
    for (const auto& [id, count] : id_counts)
        if (count < 2)
            throw LossError("identity " + std::to_string(id) +
                            " has a single sample in the batch");

    // Stabilized distances: sqrt(s + eps) so the gradient is finite at
    // coincident points.
    Matrix dmat(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double diff = features(i, k) - features(j, k);
                s += diff * diff;
            }
            dmat(i, j) = std::sqrt(s + cfg.distance_epsilon);
        }
    }

    TripletResult out;
    out.grad = Matrix(n, d);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t a = 0; a < n; ++a) {
        std::size_t hardest_pos = n, hardest_neg = n;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == a) continue;
            if (ids[j] == ids[a]) {
                if (hardest_pos == n || dmat(a, j) > dmat(a, hardest_pos))
                    hardest_pos = j;
            } else {
                if (hardest_neg == n || dmat(a, j) < dmat(a, hardest_neg))
                    hardest_neg = j;
            }
        }
        const double hinge =
            cfg.margin + dmat(a, hardest_pos) - dmat(a, hardest_neg);
        if (hinge <= 0.0) continue;  // subgradient 0 at the kink
        out.loss += hinge;

        const double inv_dap = 1.0 / dmat(a, hardest_pos);
        const double inv_dan = 1.0 / dmat(a, hardest_neg);
        for (std::size_t k = 0; k < d; ++k) {
            const double dp = (features(a, k) - features(hardest_pos, k)) * inv_dap;
            const double dn = (features(a, k) - features(hardest_neg, k)) * inv_dan;
            out.grad(a, k) += inv_n * (dp - dn);
            out.grad(hardest_pos, k) -= inv_n * dp;
            out.grad(hardest_neg, k) += inv_n * dn;
        }
    }
    out.loss *= inv_n;
    return out;
}

IdLossResult id_loss(const Matrix& features, const std::vector<int>& ids,
                     const Matrix& id_logits, const LossWeights& weights,
                     const TripletConfig& cfg) {
    const std::size_t n = features.rows();
    if (id_logits.rows() != n)
        throw LossError("id_logits rows must align with feature rows");

    IdLossResult out;
    out.grad_features = Matrix(n, features.cols());
    out.grad_logits = Matrix(n, id_logits.cols());

    if (weights.lambda_htri != 0.0) {
        TripletResult tri = batch_hard_triplet(features, ids, cfg);
        out.htri = tri.loss;
        for (std::size_t i = 0; i < tri.grad.size(); ++i)
            out.grad_features.data()[i] = weights.lambda_htri * tri.grad.data()[i];
    }

    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        XentResult x = softmax_xent(
            std::span<const double>(id_logits.row(i), id_logits.cols()), ids[i]);
        out.xent += x.loss * inv_n;
        for (std::size_t k = 0; k < id_logits.cols(); ++k)
            out.grad_logits(i, k) = weights.lambda_xent * inv_n * x.grad[k];
    }
    out.loss = weights.lambda_htri * out.htri + weights.lambda_xent * out.xent;
    return out;
}

double total_loss(double id_part, double color_loss, double type_loss,
                  const LossWeights& weights) {
    if (!(id_part >= 0.0) || !(color_loss >= 0.0) || !(type_loss >= 0.0))
        throw LossError("loss components must be finite and non-negative");
    return id_part + weights.lambda_color * color_loss +
           weights.lambda_type * type_loss;
}

LossBundle make_loss_bundle(double htri, double xent, double color, double type,
                            const LossWeights& weights) {
    LossBundle b;
    b.htri = htri;
    b.xent = xent;
    b.color = color;
    b.type = type;
    b.id = weights.lambda_htri * htri + weights.lambda_xent * xent;
    b.total = total_loss(b.id, color, type, weights);

    auto close = [](double a, double bb) {
        const double scale = std::max({std::abs(a), std::abs(bb), 1.0});
        return std::abs(a - bb) <= 1e-12 * scale;
    };
    if (!close(b.id, weights.lambda_htri * htri + weights.lambda_xent * xent) ||
        !close(b.total, b.id + weights.lambda_color * color +
                            weights.lambda_type * type))
        throw LossError("loss bundle identity violated");
    return b;
}

std::vector<std::size_t> sample_pk_batch(const DatasetManifest& manifest,
                                         int P, int K, std::mt19937_64& rng) {
    if (P < 1 || K < 1) throw LossError("P and K must be positive");

    // Identity -> train record indices, in first-appearance order.
    std::vector<int> id_order;
    std::map<int, std::vector<std::size_t>> by_id;
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        const auto& r = manifest.records[i];
        if (r.split != Split::Train) continue;
        auto [it, inserted] = by_id.try_emplace(r.identity);
        if (inserted) id_order.push_back(r.identity);
        it->second.push_back(i);
    }
    if (static_cast<int>(id_order.size()) < P)
        throw LossError("train split has " + std::to_string(id_order.size()) +
                        " identities, need " + std::to_string(P));

    // Choose P distinct identities via a partial Fisher-Yates shuffle.
    std::vector<int> pool = id_order;
    for (int i = 0; i < P; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
        std::swap(pool[i], pool[pick(rng)]);
    }

    std::vector<std::size_t> batch;
    batch.reserve(static_cast<std::size_t>(P) * K);
    for (int i = 0; i < P; ++i) {
        const auto& samples = by_id.at(pool[i]);
        if (static_cast<int>(samples.size()) >= K) {
            std::vector<std::size_t> local = samples;
            for (int k = 0; k < K; ++k) {
                std::uniform_int_distribution<std::size_t> pick(k, local.size() - 1);
                std::swap(local[k], local[pick(rng)]);
                batch.push_back(local[k]);
            }
        } else {
            std::uniform_int_distribution<std::size_t> pick(0, samples.size() - 1);
            for (int k = 0; k < K; ++k) batch.push_back(samples[pick(rng)]);
        }
    }
    return batch;
}

}  // namespace vreid
