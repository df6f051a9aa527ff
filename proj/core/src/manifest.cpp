#include "vreid/manifest.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace vreid {

using nlohmann::json;

std::string to_string(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Query: return "query";
        case Split::Gallery: return "gallery";
    }
    return "train";
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::Train;
    if (s == "query") return Split::Query;
    if (s == "gallery") return Split::Gallery;
    throw ManifestError("unknown split tag: " + s);
}

namespace {

SampleRecord parse_record(const json& j, int line_no) {
    SampleRecord rec;
    try {
        rec.image_id = j.at("image_id").get<std::string>();
        rec.identity = j.at("identity").get<int>();
        rec.camera = j.at("camera").get<int>();
        rec.color = j.at("color").get<int>();
        rec.vtype = j.at("type").get<int>();
        const auto& bb = j.at("bbox");
        rec.bbox = BBox{bb.at(0).get<double>(), bb.at(1).get<double>(),
                        bb.at(2).get<double>(), bb.at(3).get<double>()};
        const auto& sz = j.at("image_size");
        rec.image_width = sz.at(0).get<int>();
        rec.image_height = sz.at(1).get<int>();
        rec.split = split_from_string(j.at("split").get<std::string>());
        if (j.contains("keypoints") && !j.at("keypoints").is_null()) {
            const auto& kj = j.at("keypoints");
            if (kj.size() != kNumKeypoints) {
                throw ManifestError("expected 36 keypoints, got " +
                                    std::to_string(kj.size()));
            }
            KeypointSet kps;
            for (int k = 0; k < kNumKeypoints; ++k) {
                kps.points[k] = Keypoint{kj.at(k).at(0).get<double>(),
                                         kj.at(k).at(1).get<double>(),
                                         kj.at(k).at(2).get<double>()};
            }
            rec.keypoints = kps;
        }
    } catch (const json::exception& e) {
        throw ManifestError("line " + std::to_string(line_no) +
                            ": malformed record: " + e.what());
    }
    if (rec.bbox.w <= 0 || rec.bbox.h <= 0) {
        throw ManifestError("line " + std::to_string(line_no) +
                            ": bbox width/height must be positive");
    }
    if (rec.identity < 0 || rec.camera < 0) {
        throw ManifestError("line " + std::to_string(line_no) +
                            ": identity and camera labels must be >= 0");
    }
    if (rec.keypoints) {
        for (const auto& p : rec.keypoints->points) {
            if (p.confidence < 0.0 || p.confidence > 1.0) {
                throw ManifestError("line " + std::to_string(line_no) +
                                    ": keypoint confidence outside [0,1]");
            }
            if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
                throw ManifestError("line " + std::to_string(line_no) +
                                    ": non-finite keypoint coordinate");
            }
        }
    }
    return rec;
}

}  // namespace

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ManifestError("cannot open manifest file: " + path);

    DatasetManifest manifest;
    std::unordered_map<std::string, int> seen_ids;
    std::string line;
    int line_no = 0;
    bool header_allowed = true;

    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ManifestError("line " + std::to_string(line_no) +
                                ": JSON parse error: " + e.what());
        }
        if (header_allowed && !j.contains("image_id")) {
            if (j.contains("colors"))
                manifest.color_names = j.at("colors").get<std::vector<std::string>>();
            if (j.contains("types"))
                manifest.type_names = j.at("types").get<std::vector<std::string>>();
            header_allowed = false;
            continue;
        }
        header_allowed = false;
        SampleRecord rec = parse_record(j, line_no);
        auto [it, inserted] = seen_ids.emplace(rec.image_id, line_no);
        if (!inserted) {
            throw ManifestError("line " + std::to_string(line_no) +
                                ": duplicate image_id '" + rec.image_id +
                                "' (first seen on line " +
                                std::to_string(it->second) + ")");
        }
        manifest.records.push_back(std::move(rec));
    }

    int max_color = -1, max_type = -1;
    for (const auto& r : manifest.records) {
        max_color = std::max(max_color, r.color);
        max_type = std::max(max_type, r.vtype);
    }
    if (manifest.color_names.empty()) {
        for (int i = 0; i <= max_color; ++i)
            manifest.color_names.push_back("color" + std::to_string(i));
    }
    if (manifest.type_names.empty()) {
        for (int i = 0; i <= max_type; ++i)
            manifest.type_names.push_back("type" + std::to_string(i));
    }
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        const auto& r = manifest.records[i];
        if (r.color < 0 || r.color >= static_cast<int>(manifest.color_names.size()))
            throw ManifestError("record " + r.image_id + ": color index " +
                                std::to_string(r.color) + " outside label set");
        if (r.vtype < 0 || r.vtype >= static_cast<int>(manifest.type_names.size()))
            throw ManifestError("record " + r.image_id + ": type index " +
                                std::to_string(r.vtype) + " outside label set");
    }
    return manifest;
}

void save_manifest(const DatasetManifest& manifest, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ManifestError("cannot write manifest file: " + path);

    json header;
    header["colors"] = manifest.color_names;
    header["types"] = manifest.type_names;
    out << header.dump() << "\n";

    for (const auto& r : manifest.records) {
        json j;
        j["image_id"] = r.image_id;
        j["identity"] = r.identity;
        j["camera"] = r.camera;
        j["color"] = r.color;
        j["type"] = r.vtype;
        j["bbox"] = {r.bbox.x, r.bbox.y, r.bbox.w, r.bbox.h};
        j["image_size"] = {r.image_width, r.image_height};
        j["split"] = to_string(r.split);
        if (r.keypoints) {
            json kj = json::array();
            for (const auto& p : r.keypoints->points)
                kj.push_back({p.x, p.y, p.confidence});
            j["keypoints"] = kj;
        } else {
            j["keypoints"] = nullptr;
        }
        out << j.dump() << "\n";
    }
}

ValidationReport validate_pairing(const DatasetManifest& manifest,
                                  const EmbeddingSet& emb,
                                  bool require_keypoints) {
    ValidationReport report;
    if (manifest.records.size() != emb.vectors.rows()) {
        report.findings.push_back(
            {ValidationFinding::Kind::RowCountMismatch,
             "manifest has " + std::to_string(manifest.records.size()) +
                 " records but embedding set has " +
                 std::to_string(emb.vectors.rows()) + " rows"});
    }
    std::unordered_set<int> gallery_ids;
    for (const auto& r : manifest.records)
        if (r.split == Split::Gallery) gallery_ids.insert(r.identity);
    std::set<int> uncovered;
    for (const auto& r : manifest.records)
        if (r.split == Split::Query && !gallery_ids.count(r.identity))
            uncovered.insert(r.identity);
    for (int id : uncovered) {
        report.findings.push_back(
            {ValidationFinding::Kind::UncoveredQuery,
             "query identity " + std::to_string(id) +
                 " has no gallery sample"});
    }
    if (require_keypoints) {
        for (const auto& r : manifest.records) {
            if (!r.keypoints) {
                report.findings.push_back(
                    {ValidationFinding::Kind::MissingKeypoints,
                     "record " + r.image_id +
                         " has no keypoints but a pose pipeline was requested"});
            }
        }
    }
    return report;
}

}  // namespace vreid
