#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "vreid/types.hpp"

namespace vreid {

class ManifestError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Line-delimited JSON, one record per line. An optional header line
// {"colors": [...], "types": [...]} names the label sets; without it
// the sets are synthesized from the largest index seen.
DatasetManifest load_manifest(const std::string& path);
void save_manifest(const DatasetManifest& manifest, const std::string& path);

struct ValidationFinding {
    enum class Kind { RowCountMismatch, UncoveredQuery, MissingKeypoints };
    Kind kind;
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationFinding> findings;
    bool ok() const { return findings.empty(); }
};

ValidationReport validate_pairing(const DatasetManifest& manifest,
                                  const EmbeddingSet& emb,
                                  bool require_keypoints = false);

}  // namespace vreid
