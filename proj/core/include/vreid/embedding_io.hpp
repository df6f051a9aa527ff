#pragma once

#include <stdexcept>
#include <string>

#include "vreid/types.hpp"

namespace vreid {

class EmbeddingIOError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Binary format: magic "EMB1", u32 count, u32 dim (little-endian),
// then count*dim float32 row-major. Round trips bit-exactly.
EmbeddingSet load_embeddings(const std::string& path);
void save_embeddings(const EmbeddingSet& emb, const std::string& path);

}  // namespace vreid
