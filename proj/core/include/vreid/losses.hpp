#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "vreid/types.hpp"

namespace vreid {

class LossError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TripletConfig {
    double margin = 0.3;
    double distance_epsilon = 1e-12;
};

struct LossWeights {
    double lambda_htri = 1.0;
    double lambda_xent = 1.0;
    double lambda_color = 0.125;
    double lambda_type = 0.125;
};

struct XentResult {
    double loss = 0.0;
    std::vector<double> grad;  // w.r.t. logits
};

// Cross entropy with the literal 1/N class-count factor; pass
// class_count_factor = false for the conventional -log p form.
XentResult softmax_xent(std::span<const double> logits, int target,
                        bool class_count_factor = true);

// Exact Euclidean distances (no epsilon); symmetric, zero diagonal.
Matrix pairwise_euclidean(const Matrix& features);

struct TripletResult {
    double loss = 0.0;
    Matrix grad;  // n x d, w.r.t. features
};

// Batch-hard mining: per anchor the farthest same-id and nearest
// different-id sample, hinged at the margin, averaged over anchors.
// Gradients flow through sqrt(s + epsilon) distances; ties break to the
// lowest index and an inactive hinge contributes zero gradient.
TripletResult batch_hard_triplet(const Matrix& features,
                                 const std::vector<int>& ids,
                                 const TripletConfig& cfg);

struct IdLossResult {
    double loss = 0.0;
    double htri = 0.0;
    double xent = 0.0;  // batch mean
    Matrix grad_features;
    Matrix grad_logits;
};

IdLossResult id_loss(const Matrix& features, const std::vector<int>& ids,
                     const Matrix& id_logits, const LossWeights& weights,
                     const TripletConfig& cfg);

double total_loss(double id_part, double color_loss, double type_loss,
                  const LossWeights& weights);

struct LossBundle {
    double total = 0.0;
    double id = 0.0;
    double htri = 0.0;
    double xent = 0.0;
    double color = 0.0;
    double type = 0.0;
};

// Combines components and asserts the internal identities
// id = l_htri*htri + l_xent*xent and total = id + l_color*color + l_type*type.
LossBundle make_loss_bundle(double htri, double xent, double color, double type,
                            const LossWeights& weights);

// PK batch: P distinct train identities, K indices each (with replacement
// when an identity has fewer than K samples). Deterministic per generator
// state.
std::vector<std::size_t> sample_pk_batch(const DatasetManifest& manifest,
                                         int P, int K, std::mt19937_64& rng);

}  // namespace vreid
