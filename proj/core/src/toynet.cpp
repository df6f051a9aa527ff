#include "vreid/toynet.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include <json.hpp>

namespace vreid {

using nlohmann::json;

namespace {

Matrix xavier(std::size_t out, std::size_t in, std::mt19937_64& rng) {
    const double s = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-s, s);
    Matrix w(out, in);
    for (auto& v : w.data()) v = dist(rng);
    return w;
}

// out = X W^T + b, X: batch x in, W: out x in
Matrix affine(const Matrix& x, const Matrix& w, const std::vector<double>& b) {
    if (x.cols() != w.cols()) throw NetError("affine dimension mismatch");
    Matrix out(x.rows(), w.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double* xi = x.row(i);
        for (std::size_t o = 0; o < w.rows(); ++o) {
            const double* wo = w.row(o);
            double s = b[o];
            for (std::size_t k = 0; k < x.cols(); ++k) s += wo[k] * xi[k];
            out(i, o) = s;
        }
    }
    return out;
}

Matrix leaky_relu(const Matrix& z, double slope) {
    Matrix out = z;
    for (auto& v : out.data())
        if (v < 0.0) v *= slope;
    return out;
}

// Derivative is `slope` at exactly zero.
double lrelu_prime(double z, double slope) { return z > 0.0 ? 1.0 : slope; }

// dW += delta^T x accumulation for one affine layer; also returns dx.
void affine_backward(const Matrix& delta, const Matrix& x, const Matrix& w,
                     Matrix& dw, std::vector<double>& db, Matrix* dx) {
    for (std::size_t i = 0; i < delta.rows(); ++i) {
        const double* di = delta.row(i);
        const double* xi = x.row(i);
        for (std::size_t o = 0; o < delta.cols(); ++o) {
            db[o] += di[o];
            double* dwo = dw.row(o);
            for (std::size_t k = 0; k < x.cols(); ++k) dwo[k] += di[o] * xi[k];
        }
        if (dx) {
            for (std::size_t k = 0; k < x.cols(); ++k) {
                double s = 0.0;
                for (std::size_t o = 0; o < delta.cols(); ++o)
                    s += di[o] * w(o, k);
                (*dx)(i, k) += s;
            }
        }
    }
}

}  // namespace

ToyNetParams ToyNetParams::zeros(const ToyNetDims& dims) {
    ToyNetParams p;
    p.dims = dims;
    p.W1 = Matrix(dims.hidden, dims.d_in);
    p.b1.assign(dims.hidden, 0.0);
    p.W2 = Matrix(dims.trunk, dims.hidden);
    p.b2.assign(dims.trunk, 0.0);
    p.Wr = Matrix(dims.reid, dims.trunk + kPoseVectorLen);
    p.br.assign(dims.reid, 0.0);
    p.Wid = Matrix(dims.n_id, dims.reid);
    p.bid.assign(dims.n_id, 0.0);
    p.Wc = Matrix(dims.n_color, dims.reid);
    p.bc.assign(dims.n_color, 0.0);
    p.Wt = Matrix(dims.n_type, dims.reid);
    p.bt.assign(dims.n_type, 0.0);
    return p;
}

ToyNetParams ToyNetParams::init(const ToyNetDims& dims, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    ToyNetParams p = zeros(dims);
    p.W1 = xavier(dims.hidden, dims.d_in, rng);
    p.W2 = xavier(dims.trunk, dims.hidden, rng);
    p.Wr = xavier(dims.reid, dims.trunk + kPoseVectorLen, rng);
    p.Wid = xavier(dims.n_id, dims.reid, rng);
    p.Wc = xavier(dims.n_color, dims.reid, rng);
    p.Wt = xavier(dims.n_type, dims.reid, rng);
    return p;
}

std::size_t ToyNetParams::flat_size() const {
    std::size_t n = 0;
    const_cast<ToyNetParams*>(this)->for_each(
        [&n](const auto& buf) { n += buf.size(); });
    return n;
}

Activations forward(const ToyNetParams& params, const Matrix& descriptors,
                    const Matrix& pose_vectors, bool use_pose) {
    const auto& d = params.dims;
    if (descriptors.cols() != d.d_in)
        throw NetError("descriptor dimension mismatch");
    if (pose_vectors.cols() != kPoseVectorLen ||
        pose_vectors.rows() != descriptors.rows())
        throw NetError("pose vector shape mismatch");

    Activations a;
    a.input = descriptors;
    a.pose = use_pose ? pose_vectors
                      : Matrix(pose_vectors.rows(), kPoseVectorLen);
    a.pose_enabled = use_pose;

    a.zh = affine(a.input, params.W1, params.b1);
    a.h = leaky_relu(a.zh, params.leaky_slope);
    a.zf = affine(a.h, params.W2, params.b2);
    a.f = leaky_relu(a.zf, params.leaky_slope);

    a.g = Matrix(a.f.rows(), d.trunk + kPoseVectorLen);
    for (std::size_t i = 0; i < a.f.rows(); ++i) {
        std::copy(a.f.row(i), a.f.row(i) + d.trunk, a.g.row(i));
        std::copy(a.pose.row(i), a.pose.row(i) + kPoseVectorLen,
                  a.g.row(i) + d.trunk);
    }

    a.zr = affine(a.g, params.Wr, params.br);
    a.r = leaky_relu(a.zr, params.leaky_slope);
    a.id_logits = affine(a.r, params.Wid, params.bid);
    a.color_logits = affine(a.r, params.Wc, params.bc);
    a.type_logits = affine(a.r, params.Wt, params.bt);
    return a;
}

namespace {

// Weighted batch-mean cross entropy over one head; grad already carries
// lambda/batch scaling.
std::pair<double, Matrix> head_xent(const Matrix& logits,
                                    const std::vector<int>& targets,
                                    double lambda) {
    const std::size_t n = logits.rows();
    Matrix grad(n, logits.cols());
    double loss = 0.0;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        XentResult x = softmax_xent(
            std::span<const double>(logits.row(i), logits.cols()), targets[i]);
        loss += x.loss * inv_n;
        for (std::size_t k = 0; k < logits.cols(); ++k)
            grad(i, k) = lambda * inv_n * x.grad[k];
    }
    return {loss, grad};
}

}  // namespace

BackwardResult backward(const ToyNetParams& params, const Activations& acts,
                        const Labels& labels, const LossWeights& weights,
                        const TripletConfig& cfg) {
    const auto& d = params.dims;
    const std::size_t n = acts.r.rows();
    if (labels.identity.size() != n || labels.color.size() != n ||
        labels.vtype.size() != n)
        throw NetError("label count mismatch with batch size");

    BackwardResult res;
    res.grads = ToyNetParams::zeros(d);
    res.grads.leaky_slope = params.leaky_slope;

    Matrix dr(n, d.reid);

    double htri = 0.0;
    if (weights.lambda_htri != 0.0) {
        TripletResult tri = batch_hard_triplet(acts.r, labels.identity, cfg);
        htri = tri.loss;
        for (std::size_t i = 0; i < dr.size(); ++i)
            dr.data()[i] += weights.lambda_htri * tri.grad.data()[i];
    }

    auto [xent, did] = head_xent(acts.id_logits, labels.identity,
                                 weights.lambda_xent);
    auto [color_loss, dc] = head_xent(acts.color_logits, labels.color,
                                      weights.lambda_color);
    auto [type_loss, dt] = head_xent(acts.type_logits, labels.vtype,
                                     weights.lambda_type);

    affine_backward(did, acts.r, params.Wid, res.grads.Wid, res.grads.bid, &dr);
    affine_backward(dc, acts.r, params.Wc, res.grads.Wc, res.grads.bc, &dr);
    affine_backward(dt, acts.r, params.Wt, res.grads.Wt, res.grads.bt, &dr);

    Matrix dzr(n, d.reid);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < d.reid; ++k)
            dzr(i, k) = dr(i, k) * lrelu_prime(acts.zr(i, k), params.leaky_slope);

    Matrix dg(n, d.trunk + kPoseVectorLen);
    affine_backward(dzr, acts.g, params.Wr, res.grads.Wr, res.grads.br, &dg);

    Matrix df(n, d.trunk);
    for (std::size_t i = 0; i < n; ++i)
        std::copy(dg.row(i), dg.row(i) + d.trunk, df.row(i));

    Matrix dzf(n, d.trunk);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < d.trunk; ++k)
            dzf(i, k) = df(i, k) * lrelu_prime(acts.zf(i, k), params.leaky_slope);

    Matrix dh(n, d.hidden);
    affine_backward(dzf, acts.h, params.W2, res.grads.W2, res.grads.b2, &dh);

    Matrix dzh(n, d.hidden);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < d.hidden; ++k)
            dzh(i, k) = dh(i, k) * lrelu_prime(acts.zh(i, k), params.leaky_slope);

    affine_backward(dzh, acts.input, params.W1, res.grads.W1, res.grads.b1,
                    nullptr);

    res.losses = make_loss_bundle(htri, xent, color_loss, type_loss, weights);
    return res;
}

OptimizerState OptimizerState::make(OptimizerKind kind,
                                    const ToyNetParams& params) {
    OptimizerState s;
    s.kind = kind;
    if (kind == OptimizerKind::Adam) {
        s.m.assign(params.flat_size(), 0.0);
        s.v.assign(params.flat_size(), 0.0);
    }
    return s;
}

void optimizer_step(ToyNetParams& params, const ToyNetParams& grads,
                    OptimizerState& state, double lr) {
    for (double g : grads.W1.data())
        if (!std::isfinite(g)) throw NetError("non-finite gradient");

    ++state.step;
    std::vector<std::vector<double>*> pbufs, gbufs;
    params.for_each([&pbufs](auto& buf) { pbufs.push_back(&buf); });
    const_cast<ToyNetParams&>(grads).for_each(
        [&gbufs](auto& buf) { gbufs.push_back(&buf); });

    if (state.kind == OptimizerKind::Sgd) {
        for (std::size_t b = 0; b < pbufs.size(); ++b) {
            auto& p = *pbufs[b];
            const auto& g = *gbufs[b];
            for (std::size_t i = 0; i < p.size(); ++i) {
                if (!std::isfinite(g[i])) throw NetError("non-finite gradient");
                p[i] -= lr * g[i];
            }
        }
        return;
    }

    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    std::size_t off = 0;
    for (std::size_t b = 0; b < pbufs.size(); ++b) {
        auto& p = *pbufs[b];
        const auto& g = *gbufs[b];
        for (std::size_t i = 0; i < p.size(); ++i, ++off) {
            if (!std::isfinite(g[i])) throw NetError("non-finite gradient");
            state.m[off] = state.beta1 * state.m[off] + (1.0 - state.beta1) * g[i];
            state.v[off] =
                state.beta2 * state.v[off] + (1.0 - state.beta2) * g[i] * g[i];
            const double mhat = state.m[off] / bc1;
            const double vhat = state.v[off] / bc2;
            p[i] -= lr * mhat / (std::sqrt(vhat) + state.epsilon);
        }
    }
}

double lr_schedule(int epoch, double base, const std::vector<int>& milestones,
                   double factor) {
    for (std::size_t i = 1; i < milestones.size(); ++i)
        if (milestones[i] <= milestones[i - 1])
            throw NetError("milestones must be strictly increasing");
    int passed = 0;
    for (int m : milestones)
        if (m <= epoch) ++passed;
    return base * std::pow(factor, passed);
}

EmbeddingSet extract_features(const ToyNetParams& params,
                              const Matrix& descriptors,
                              const Matrix& pose_vectors, bool use_pose) {
    Activations a = forward(params, descriptors, pose_vectors, use_pose);
    EmbeddingSet emb;
    emb.dim = params.dims.reid;
    emb.vectors = a.r;
    return emb;
}

std::string train_history_to_ldjson(const TrainHistory& history) {
    std::string out;
    for (const auto& e : history.epochs) {
        json j;
        j["epoch"] = e.epoch;
        j["total_loss"] = e.total_loss;
        j["htri"] = e.htri;
        j["xent"] = e.xent;
        j["color"] = e.color;
        j["type"] = e.type;
        j["lr"] = e.lr;
        j["holdout_map"] = e.holdout_map;
        j["color_acc"] = e.color_accuracy ? json(*e.color_accuracy) : json(nullptr);
        j["type_acc"] = e.type_accuracy ? json(*e.type_accuracy) : json(nullptr);
        out += j.dump();
        out += "\n";
    }
    return out;
}

namespace {

struct SplitIndices {
    std::vector<std::size_t> train, query, gallery;
};

SplitIndices split_indices(const DatasetManifest& manifest) {
    SplitIndices s;
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        switch (manifest.records[i].split) {
            case Split::Train: s.train.push_back(i); break;
            case Split::Query: s.query.push_back(i); break;
            case Split::Gallery: s.gallery.push_back(i); break;
        }
    }
    return s;
}

Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& idx) {
    Matrix out(idx.size(), m.cols());
    for (std::size_t i = 0; i < idx.size(); ++i)
        std::copy(m.row(idx[i]), m.row(idx[i]) + m.cols(), out.row(i));
    return out;
}

int argmax_row(const Matrix& m, std::size_t row) {
    int best = 0;
    for (std::size_t k = 1; k < m.cols(); ++k)
        if (m(row, k) > m(row, best)) best = static_cast<int>(k);
    return best;
}

}  // namespace

TrainResult train(const TrainConfig& config, const TrainData& data) {
    const auto& manifest = data.manifest;
    SplitIndices splits = split_indices(manifest);
    if (splits.train.empty()) throw NetError("empty train split");
    if (splits.query.empty() || splits.gallery.empty())
        throw NetError("empty query or gallery split");

    // Identity -> class index, first-appearance order over the train split.
    std::vector<int> id_order;
    std::map<int, int> id_to_class;
    for (std::size_t i : splits.train) {
        const int id = manifest.records[i].identity;
        if (id_to_class.try_emplace(id, static_cast<int>(id_order.size())).second)
            id_order.push_back(id);
    }

    ToyNetDims dims = config.dims;
    dims.d_in = data.descriptors.cols();
    dims.n_id = id_order.size();
    dims.n_color = std::max<std::size_t>(manifest.color_names.size(), 2);
    dims.n_type = std::max<std::size_t>(manifest.type_names.size(), 2);

    TrainResult result;
    result.params = ToyNetParams::init(dims, config.seed);
    result.train_identity_order = id_order;

    OptimizerState opt = OptimizerState::make(config.optimizer, result.params);
    std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

    const int batch_size = config.P * config.K;
    // A desk-scale train split is tiny; an epoch makes several passes over
    // it so the schedule's first decay still leaves enough useful steps.
    const int batches_per_epoch =
        config.batches_per_epoch > 0
            ? config.batches_per_epoch
            : std::max<int>(1, 8 * static_cast<int>(splits.train.size()) /
                                   batch_size);

    LossWeights weights = config.weights;
    if (!config.use_attributes) {
        weights.lambda_color = 0.0;
        weights.lambda_type = 0.0;
    }

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const double lr =
            lr_schedule(epoch, config.base_lr, config.milestones, config.lr_factor);

        EpochStats stats;
        stats.epoch = epoch;
        stats.lr = lr;

        for (int b = 0; b < batches_per_epoch; ++b) {
            auto idx = sample_pk_batch(manifest, config.P, config.K, rng);
            Matrix x = gather_rows(data.descriptors, idx);
            Matrix pv = gather_rows(data.pose_vectors, idx);
            Labels labels;
            for (std::size_t i : idx) {
                const auto& rec = manifest.records[i];
                labels.identity.push_back(id_to_class.at(rec.identity));
                labels.color.push_back(rec.color);
                labels.vtype.push_back(rec.vtype);
            }
            Activations acts = forward(result.params, x, pv, config.use_pose);
            BackwardResult back =
                backward(result.params, acts, labels, weights, config.triplet);
            if (!std::isfinite(back.losses.total))
                throw NetError("non-finite loss at epoch " +
                               std::to_string(epoch) + ", batch " +
                               std::to_string(b));
            optimizer_step(result.params, back.grads, opt, lr);

            const double inv_b = 1.0 / batches_per_epoch;
            stats.total_loss += back.losses.total * inv_b;
            stats.htri += back.losses.htri * inv_b;
            stats.xent += back.losses.xent * inv_b;
            stats.color += back.losses.color * inv_b;
            stats.type += back.losses.type * inv_b;
        }

        // Held-out retrieval metrics on the query/gallery splits.
        Matrix qx = gather_rows(data.descriptors, splits.query);
        Matrix qp = gather_rows(data.pose_vectors, splits.query);
        Matrix gx = gather_rows(data.descriptors, splits.gallery);
        Matrix gp = gather_rows(data.pose_vectors, splits.gallery);
        Activations qa = forward(result.params, qx, qp, config.use_pose);
        Activations ga = forward(result.params, gx, gp, config.use_pose);

        EvalMeta qmeta, gmeta;
        for (std::size_t i : splits.query) {
            qmeta.identity.push_back(manifest.records[i].identity);
            qmeta.camera.push_back(manifest.records[i].camera);
        }
        for (std::size_t i : splits.gallery) {
            gmeta.identity.push_back(manifest.records[i].identity);
            gmeta.camera.push_back(manifest.records[i].camera);
        }
        EvalProtocol protocol;
        EvalOptions options;
        if (config.use_attributes) {
            AttributeEval color_eval, type_eval;
            std::size_t row = 0;
            for (std::size_t i : splits.query) {
                color_eval.predicted.push_back(argmax_row(qa.color_logits, row));
                color_eval.truth.push_back(manifest.records[i].color);
                type_eval.predicted.push_back(argmax_row(qa.type_logits, row));
                type_eval.truth.push_back(manifest.records[i].vtype);
                ++row;
            }
            row = 0;
            for (std::size_t i : splits.gallery) {
                color_eval.predicted.push_back(argmax_row(ga.color_logits, row));
                color_eval.truth.push_back(manifest.records[i].color);
                type_eval.predicted.push_back(argmax_row(ga.type_logits, row));
                type_eval.truth.push_back(manifest.records[i].vtype);
                ++row;
            }
            options.color = std::move(color_eval);
            options.type = std::move(type_eval);
        }
        EvalReport report = evaluate(qa.r, qmeta, ga.r, gmeta, protocol, options);
        stats.holdout_map = report.map;
        stats.color_accuracy = report.color_accuracy;
        stats.type_accuracy = report.type_accuracy;
        result.history.epochs.push_back(stats);
    }
    return result;
}

}  // namespace vreid
