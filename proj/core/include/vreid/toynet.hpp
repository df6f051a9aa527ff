#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "vreid/losses.hpp"
#include "vreid/metrics.hpp"
#include "vreid/types.hpp"

namespace vreid {

class NetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ToyNetDims {
    std::size_t d_in = 64;
    std::size_t hidden = 128;
    std::size_t trunk = 64;   // feature before the pose concat
    std::size_t reid = 32;    // ReID FC width (1024 at full scale)
    std::size_t n_id = 2;
    std::size_t n_color = 2;
    std::size_t n_type = 2;
};

// Affine stacks: trunk (W1, W2), the ReID FC over the pose concat (Wr),
// and three classification heads. Also used as the gradient container.
struct ToyNetParams {
    ToyNetDims dims;
    double leaky_slope = 0.01;

    Matrix W1, W2, Wr, Wid, Wc, Wt;  // out x in
    std::vector<double> b1, b2, br, bid, bc, bt;

    static ToyNetParams zeros(const ToyNetDims& dims);
    static ToyNetParams init(const ToyNetDims& dims, std::uint64_t seed);

    // Element count across all tensors, for optimizer buffers.
    std::size_t flat_size() const;
    void for_each(auto&& fn) {
        fn(W1.data()); fn(b1); fn(W2.data()); fn(b2); fn(Wr.data()); fn(br);
        fn(Wid.data()); fn(bid); fn(Wc.data()); fn(bc); fn(Wt.data()); fn(bt);
    }
};

struct Activations {
    Matrix input, pose;           // batch x d_in, batch x 108
    Matrix zh, h, zf, f, g, zr, r;
    Matrix id_logits, color_logits, type_logits;
    bool pose_enabled = true;
};

Activations forward(const ToyNetParams& params, const Matrix& descriptors,
                    const Matrix& pose_vectors, bool use_pose = true);

struct Labels {
    std::vector<int> identity;  // class indices into n_id
    std::vector<int> color;
    std::vector<int> vtype;
};

struct BackwardResult {
    LossBundle losses;
    ToyNetParams grads;  // same shapes as params
};

BackwardResult backward(const ToyNetParams& params, const Activations& acts,
                        const Labels& labels, const LossWeights& weights,
                        const TripletConfig& cfg);

enum class OptimizerKind { Sgd, Adam };

struct OptimizerState {
    OptimizerKind kind = OptimizerKind::Adam;
    std::size_t step = 0;
    double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;
    std::vector<double> m, v;  // flattened first/second moments (adam)

    static OptimizerState make(OptimizerKind kind, const ToyNetParams& params);
};

void optimizer_step(ToyNetParams& params, const ToyNetParams& grads,
                    OptimizerState& state, double lr);

double lr_schedule(int epoch, double base = 3e-4,
                   const std::vector<int>& milestones = {20, 40},
                   double factor = 0.1);

struct EpochStats {
    int epoch = 0;
    double total_loss = 0.0;
    double htri = 0.0, xent = 0.0, color = 0.0, type = 0.0;
    double lr = 0.0;
    double holdout_map = 0.0;
    std::optional<double> color_accuracy;  // percent
    std::optional<double> type_accuracy;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
};

std::string train_history_to_ldjson(const TrainHistory& history);

struct TrainConfig {
    ToyNetDims dims;
    int epochs = 60;
    int P = 8;  // identities per batch
    int K = 4;  // samples per identity; P*K is the batch size
    int batches_per_epoch = 0;  // 0 = one pass over the train split
    double base_lr = 3e-4;
    std::vector<int> milestones = {20, 40};
    double lr_factor = 0.1;
    LossWeights weights;
    TripletConfig triplet;
    OptimizerKind optimizer = OptimizerKind::Adam;
    bool use_pose = true;        // K ablation switch
    bool use_attributes = true;  // MT ablation switch
    std::uint64_t seed = 0;
};

struct TrainData {
    DatasetManifest manifest;
    Matrix descriptors;   // n x d_in, aligned with manifest rows
    Matrix pose_vectors;  // n x 108
};

struct TrainResult {
    ToyNetParams params;
    TrainHistory history;
    std::vector<int> train_identity_order;  // identity label per class index
};

TrainResult train(const TrainConfig& config, const TrainData& data);

EmbeddingSet extract_features(const ToyNetParams& params,
                              const Matrix& descriptors,
                              const Matrix& pose_vectors, bool use_pose = true);

}  // namespace vreid
