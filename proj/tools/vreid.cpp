// Command-line front end: dataset generation, retrieval evaluation,
// keypoint accuracy, toy training runs, and per-query rank listings.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "vreid/embedding_io.hpp"
#include "vreid/losses.hpp"
#include "vreid/manifest.hpp"
#include "vreid/metrics.hpp"
#include "vreid/posegeom.hpp"
#include "vreid/synthgen.hpp"
#include "vreid/toynet.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vreid;

namespace {

json load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    json j;
    in >> j;
    return j;
}

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

struct PairedData {
    DatasetManifest manifest;
    EmbeddingSet embeddings;
};

PairedData load_paired(const std::string& manifest_path,
                       const std::string& emb_path) {
    PairedData data;
    data.manifest = load_manifest(manifest_path);
    data.embeddings = load_embeddings(emb_path);
    ValidationReport report = validate_pairing(data.manifest, data.embeddings);
    if (!report.ok()) {
        for (const auto& f : report.findings)
            std::cerr << "validation: " << f.message << "\n";
        throw std::runtime_error("manifest/embedding pairing failed validation");
    }
    return data;
}

struct SplitView {
    Matrix query, gallery;
    EvalMeta qmeta, gmeta;
    std::vector<std::size_t> query_rows, gallery_rows;
};

SplitView make_split_view(const DatasetManifest& manifest, const Matrix& vectors) {
    SplitView view;
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        const auto& r = manifest.records[i];
        if (r.split == Split::Query)
            view.query_rows.push_back(i);
        else if (r.split == Split::Gallery)
            view.gallery_rows.push_back(i);
    }
    auto gather = [&](const std::vector<std::size_t>& rows, EvalMeta& meta) {
        Matrix out(rows.size(), vectors.cols());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            std::copy(vectors.row(rows[i]), vectors.row(rows[i]) + vectors.cols(),
                      out.row(i));
            meta.identity.push_back(manifest.records[rows[i]].identity);
            meta.camera.push_back(manifest.records[rows[i]].camera);
        }
        return out;
    };
    view.query = gather(view.query_rows, view.qmeta);
    view.gallery = gather(view.gallery_rows, view.gmeta);
    return view;
}

void print_eval_row(const EvalReport& report) {
    auto pct = [](double v) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * v);
        return std::string(buf);
    };
    std::cout << "mAP Rank-1 Rank-5 Rank-20\n";
    std::cout << pct(report.map) << " " << pct(report.cmc[0]) << " "
              << pct(report.cmc[4]) << " " << pct(report.cmc[19]) << "\n";
}

Matrix pose_matrix_from(const EmbeddingSet& sidecar) {
    if (sidecar.dim != kPoseVectorLen)
        throw std::runtime_error("pose sidecar dim must be 108, got " +
                                 std::to_string(sidecar.dim));
    return sidecar.vectors;
}

json params_to_json(const ToyNetParams& p) {
    json j;
    j["dims"] = {{"d_in", p.dims.d_in},     {"hidden", p.dims.hidden},
                 {"trunk", p.dims.trunk},   {"reid", p.dims.reid},
                 {"n_id", p.dims.n_id},     {"n_color", p.dims.n_color},
                 {"n_type", p.dims.n_type}};
    j["leaky_slope"] = p.leaky_slope;
    auto mat = [](const Matrix& m) {
        return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}};
    };
    j["W1"] = mat(p.W1); j["b1"] = p.b1;
    j["W2"] = mat(p.W2); j["b2"] = p.b2;
    j["Wr"] = mat(p.Wr); j["br"] = p.br;
    j["Wid"] = mat(p.Wid); j["bid"] = p.bid;
    j["Wc"] = mat(p.Wc); j["bc"] = p.bc;
    j["Wt"] = mat(p.Wt); j["bt"] = p.bt;
    return j;
}

int cmd_gen(const GenSpec& spec, const std::string& out_dir) {
    GeneratedDataset ds = generate_dataset(spec);
    fs::create_directories(out_dir);
    save_manifest(ds.manifest, (fs::path(out_dir) / "manifest.jsonl").string());
    save_embeddings(ds.descriptors,
                    (fs::path(out_dir) / "embeddings.emb").string());
    EmbeddingSet pose_sidecar;
    pose_sidecar.dim = kPoseVectorLen;
    pose_sidecar.vectors = ds.pose_vectors;
    save_embeddings(pose_sidecar, (fs::path(out_dir) / "pose.emb").string());

    std::size_t n_train = 0, n_query = 0, n_gallery = 0;
    std::vector<int> ids;
    for (const auto& r : ds.manifest.records) {
        ids.push_back(r.identity);
        if (r.split == Split::Train) ++n_train;
        else if (r.split == Split::Query) ++n_query;
        else ++n_gallery;
    }
    const double ratio = intra_inter_ratio(ds.descriptors.vectors, ids);
    std::cout << "generated " << ds.manifest.records.size() << " samples ("
              << n_train << " train, " << n_query << " query, " << n_gallery
              << " gallery), " << spec.n_identities << " identities\n";
    std::printf("intra/inter variability ratio: %.4f\n", ratio);
    return 0;
}

int cmd_eval(const std::string& manifest_path, const std::string& emb_path,
             const std::string& out_path, const EvalProtocol& protocol,
             std::size_t tile, int threads) {
    PairedData data = load_paired(manifest_path, emb_path);
    SplitView view = make_split_view(data.manifest, data.embeddings.vectors);
    EvalOptions options;
    options.tile = tile;
    options.threads = threads;
    options.compute_variability = true;
    EvalReport report = evaluate(view.query, view.qmeta, view.gallery,
                                 view.gmeta, protocol, options);
    if (!out_path.empty()) write_text(out_path, eval_report_to_json(report));
    print_eval_row(report);
    return 0;
}

int cmd_pck(const std::string& pred_path, const std::string& gt_path,
            const PoseConfig& pose_cfg, double ratio, double multiplier,
            const std::string& out_path) {
    DatasetManifest pred = load_manifest(pred_path);
    DatasetManifest gt = load_manifest(gt_path);
    if (pred.records.size() != gt.records.size())
        throw std::runtime_error("prediction/ground-truth manifests differ in length");

    std::vector<KeypointSet> pred_kps, gt_kps;
    std::vector<BBox> bboxes;
    for (std::size_t i = 0; i < pred.records.size(); ++i) {
        if (!pred.records[i].keypoints || !gt.records[i].keypoints)
            throw std::runtime_error("record " + gt.records[i].image_id +
                                     " is missing keypoints");
        pred_kps.push_back(*pred.records[i].keypoints);
        gt_kps.push_back(*gt.records[i].keypoints);
        bboxes.push_back(gt.records[i].bbox);
    }
    PckReport report = pck_evaluate(pred_kps, gt_kps, bboxes, pose_cfg.groups,
                                    ratio, multiplier);
    if (!out_path.empty()) write_text(out_path, pck_report_to_json(report));

    for (int g = 0; g < kNumPckGroups; ++g)
        std::printf("%s acc. ", GroupTable::kNames[g]);
    std::printf("Mean\n");
    for (int g = 0; g < kNumPckGroups; ++g) {
        if (report.per_group_accuracy[g])
            std::printf("%.2f ", *report.per_group_accuracy[g]);
        else
            std::printf("-- ");
    }
    std::printf("%.2f\n", report.mean_accuracy);
    return 0;
}

int cmd_train(const std::string& data_dir, const std::string& out_dir,
              TrainConfig config, const std::string& ablate) {
    if (ablate == "k" || ablate == "pose-channels") config.use_pose = false;
    else if (ablate == "mt") config.use_attributes = false;
    else if (!ablate.empty())
        throw std::runtime_error("unknown ablation switch: " + ablate);

    TrainData data;
    data.manifest =
        load_manifest((fs::path(data_dir) / "manifest.jsonl").string());
    EmbeddingSet desc =
        load_embeddings((fs::path(data_dir) / "embeddings.emb").string());
    EmbeddingSet pose =
        load_embeddings((fs::path(data_dir) / "pose.emb").string());
    data.descriptors = desc.vectors;
    data.pose_vectors = pose_matrix_from(pose);

    TrainResult result = train(config, data);

    fs::create_directories(out_dir);
    write_text(fs::path(out_dir) / "model.json",
               params_to_json(result.params).dump(2));
    write_text(fs::path(out_dir) / "history.jsonl",
               train_history_to_ldjson(result.history));

    EmbeddingSet features = extract_features(
        result.params, data.descriptors, data.pose_vectors, config.use_pose);
    save_embeddings(features, (fs::path(out_dir) / "features.emb").string());

    SplitView view = make_split_view(data.manifest, features.vectors);
    EvalProtocol protocol;
    EvalOptions options;
    if (config.use_attributes) {
        Activations qa = forward(result.params,
                                 [&] {
                                     Matrix m(view.query_rows.size(),
                                              data.descriptors.cols());
                                     for (std::size_t i = 0; i < view.query_rows.size(); ++i)
                                         std::copy(data.descriptors.row(view.query_rows[i]),
                                                   data.descriptors.row(view.query_rows[i]) +
                                                       data.descriptors.cols(),
                                                   m.row(i));
                                     return m;
                                 }(),
                                 [&] {
                                     Matrix m(view.query_rows.size(), kPoseVectorLen);
                                     for (std::size_t i = 0; i < view.query_rows.size(); ++i)
                                         std::copy(data.pose_vectors.row(view.query_rows[i]),
                                                   data.pose_vectors.row(view.query_rows[i]) +
                                                       kPoseVectorLen,
                                                   m.row(i));
                                     return m;
                                 }(),
                                 config.use_pose);
        AttributeEval color_eval, type_eval;
        for (std::size_t i = 0; i < view.query_rows.size(); ++i) {
            int best_c = 0, best_t = 0;
            for (std::size_t k = 1; k < qa.color_logits.cols(); ++k)
                if (qa.color_logits(i, k) > qa.color_logits(i, best_c))
                    best_c = static_cast<int>(k);
            for (std::size_t k = 1; k < qa.type_logits.cols(); ++k)
                if (qa.type_logits(i, k) > qa.type_logits(i, best_t))
                    best_t = static_cast<int>(k);
            color_eval.predicted.push_back(best_c);
            type_eval.predicted.push_back(best_t);
            color_eval.truth.push_back(
                data.manifest.records[view.query_rows[i]].color);
            type_eval.truth.push_back(
                data.manifest.records[view.query_rows[i]].vtype);
        }
        options.color = std::move(color_eval);
        options.type = std::move(type_eval);
    }
    EvalReport report = evaluate(view.query, view.qmeta, view.gallery,
                                 view.gmeta, protocol, options);
    write_text(fs::path(out_dir) / "report.json", eval_report_to_json(report));
    print_eval_row(report);
    return 0;
}

int cmd_rank(const std::string& manifest_path, const std::string& emb_path,
             const std::string& query_id, int top, const std::string& out_path) {
    PairedData data = load_paired(manifest_path, emb_path);
    std::size_t query_row = data.manifest.records.size();
    for (std::size_t i = 0; i < data.manifest.records.size(); ++i) {
        if (data.manifest.records[i].image_id == query_id) {
            query_row = i;
            break;
        }
    }
    if (query_row == data.manifest.records.size())
        throw std::runtime_error("query id not found in manifest: " + query_id);

    const auto& qrec = data.manifest.records[query_row];
    std::vector<std::size_t> gallery_rows;
    for (std::size_t i = 0; i < data.manifest.records.size(); ++i)
        if (data.manifest.records[i].split == Split::Gallery)
            gallery_rows.push_back(i);
    if (gallery_rows.empty()) throw std::runtime_error("gallery split is empty");

    Matrix q(1, data.embeddings.vectors.cols());
    std::copy(data.embeddings.vectors.row(query_row),
              data.embeddings.vectors.row(query_row) + q.cols(), q.row(0));
    Matrix g(gallery_rows.size(), q.cols());
    for (std::size_t i = 0; i < gallery_rows.size(); ++i)
        std::copy(data.embeddings.vectors.row(gallery_rows[i]),
                  data.embeddings.vectors.row(gallery_rows[i]) + q.cols(),
                  g.row(i));

    Matrix dmat = distance_matrix(q, g);
    auto ranked = rank_gallery(dmat);

    std::ofstream dump;
    if (!out_path.empty()) dump.open(out_path);
    const int limit = std::min<int>(top, static_cast<int>(gallery_rows.size()));
    for (int r = 0; r < limit; ++r) {
        const auto& grec = data.manifest.records[gallery_rows[ranked[0][r]]];
        const bool match = grec.identity == qrec.identity;
        std::cout << (r + 1) << " " << grec.image_id << " "
                  << (match ? "true" : "false") << "\n";
        if (dump.is_open()) {
            json j{{"rank", r + 1},
                   {"image_id", grec.image_id},
                   {"match", match}};
            dump << j.dump() << "\n";
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pose-aware multi-task vehicle re-identification toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed = 0;
    std::string out;
    int threads = 1;
    app.add_option("--config", config_path, "JSON run config; flags override");
    app.add_option("--seed", seed, "global random seed");
    app.add_option("--threads", threads, "worker threads");

    // gen
    auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
    gen->fallthrough();
    std::string preset = "easy";
    std::string gen_out;
    GenSpec spec;
    gen->add_option("--preset", preset, "easy | hard");
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--identities", spec.n_identities);
    gen->add_option("--samples", spec.samples_per_identity);
    gen->add_option("--embed-dim", spec.embed_dim);
    auto* gen_intra = gen->add_option("--intra-sigma", spec.intra_sigma);
    auto* gen_inter = gen->add_option("--inter-scale", spec.inter_scale);
    gen->add_option("--jitter", spec.keypoint_jitter);
    gen->add_option("--drop-prob", spec.occlusion_drop_prob);

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate embeddings against a manifest");
    ev->fallthrough();
    std::string ev_manifest, ev_emb, ev_report;
    EvalProtocol protocol;
    std::size_t tile = 512;
    ev->add_option("--manifest", ev_manifest)->required();
    ev->add_option("--embeddings", ev_emb)->required();
    ev->add_option("--report", ev_report, "report JSON output path");
    ev->add_option("--rank-k", protocol.rank_k_map_K, "rank-K mAP cutoff");
    ev->add_option("--cmc-max-rank", protocol.cmc_max_rank);
    ev->add_option("--tile", tile);
    ev->add_flag("!--no-exclude", protocol.exclude_same_camera_same_id,
                 "disable same-id same-camera exclusion");

    // pck
    auto* pck = app.add_subcommand("pck", "keypoint accuracy between manifests");
    pck->fallthrough();
    std::string pck_pred, pck_gt, pck_cfg, pck_out;
    double pck_ratio = 0.25, pck_mult = 0.5;
    pck->add_option("--pred", pck_pred)->required();
    pck->add_option("--gt", pck_gt)->required();
    pck->add_option("--pose-config", pck_cfg, "segment/group config JSON");
    pck->add_option("--ratio", pck_ratio, "reference fraction of bbox diagonal");
    pck->add_option("--multiplier", pck_mult, "threshold multiplier");
    pck->add_option("--report", pck_out);

    // train
    auto* tr = app.add_subcommand("train", "train the toy multi-task network");
    tr->fallthrough();
    std::string tr_data, tr_out, tr_ablate;
    TrainConfig tconfig;
    tr->add_option("--data", tr_data, "directory from `gen`")->required();
    tr->add_option("--out", tr_out, "output directory")->required();
    tr->add_option("--epochs", tconfig.epochs);
    tr->add_option("--batches", tconfig.batches_per_epoch, "batches per epoch (0 = one pass)");
    tr->add_option("--p", tconfig.P, "identities per batch");
    tr->add_option("--k", tconfig.K, "samples per identity");
    tr->add_option("--lr", tconfig.base_lr);
    tr->add_option("--margin", tconfig.triplet.margin);
    tr->add_option("--reid-dim", tconfig.dims.reid);
    tr->add_option("--ablate", tr_ablate, "k | mt | pose-channels");

    // rank
    auto* rk = app.add_subcommand("rank", "list nearest gallery matches");
    rk->fallthrough();
    std::string rk_manifest, rk_emb, rk_query, rk_out;
    int rk_top = 30;
    rk->add_option("--manifest", rk_manifest)->required();
    rk->add_option("--embeddings", rk_emb)->required();
    rk->add_option("--query-id", rk_query)->required();
    rk->add_option("--top", rk_top);
    rk->add_option("--dump", rk_out, "line-delimited JSON dump path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        json config;
        if (!config_path.empty()) config = load_config_file(config_path);

        if (gen->parsed()) {
            GenSpec base = gen_preset(preset);
            if (config.contains("gen")) {
                const auto& g = config["gen"];
                if (g.contains("identities")) base.n_identities = g["identities"];
                if (g.contains("samples")) base.samples_per_identity = g["samples"];
                if (g.contains("intra_sigma")) base.intra_sigma = g["intra_sigma"];
                if (g.contains("inter_scale")) base.inter_scale = g["inter_scale"];
                if (g.contains("embed_dim")) base.embed_dim = g["embed_dim"];
            }
            // explicit flags override both preset and config
            if (gen->count("--identities")) base.n_identities = spec.n_identities;
            if (gen->count("--samples"))
                base.samples_per_identity = spec.samples_per_identity;
            if (gen->count("--embed-dim")) base.embed_dim = spec.embed_dim;
            if (gen_intra->count()) base.intra_sigma = spec.intra_sigma;
            if (gen_inter->count()) base.inter_scale = spec.inter_scale;
            if (gen->count("--jitter")) base.keypoint_jitter = spec.keypoint_jitter;
            if (gen->count("--drop-prob"))
                base.occlusion_drop_prob = spec.occlusion_drop_prob;
            base.seed = seed;
            return cmd_gen(base, gen_out);
        }
        if (ev->parsed())
            return cmd_eval(ev_manifest, ev_emb, ev_report, protocol, tile,
                            threads);
        if (pck->parsed()) {
            PoseConfig pose_cfg = pck_cfg.empty() ? default_pose_config()
                                                  : load_pose_config(pck_cfg);
            return cmd_pck(pck_pred, pck_gt, pose_cfg, pck_ratio, pck_mult,
                           pck_out);
        }
        if (tr->parsed()) {
            tconfig.seed = seed;
            if (config.contains("loss")) {
                const auto& l = config["loss"];
                if (l.contains("lambda_htri"))
                    tconfig.weights.lambda_htri = l["lambda_htri"];
                if (l.contains("lambda_xent"))
                    tconfig.weights.lambda_xent = l["lambda_xent"];
                if (l.contains("lambda_color"))
                    tconfig.weights.lambda_color = l["lambda_color"];
                if (l.contains("lambda_type"))
                    tconfig.weights.lambda_type = l["lambda_type"];
                if (l.contains("margin")) tconfig.triplet.margin = l["margin"];
            }
            return cmd_train(tr_data, tr_out, tconfig, tr_ablate);
        }
        if (rk->parsed())
            return cmd_rank(rk_manifest, rk_emb, rk_query, rk_top, rk_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
