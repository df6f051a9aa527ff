#include "vreid/embedding_io.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace vreid {

namespace {
constexpr char kMagic[4] = {'E', 'M', 'B', '1'};
}

EmbeddingSet load_embeddings(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw EmbeddingIOError("cannot open embedding file: " + path);

    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw EmbeddingIOError("bad magic bytes in " + path);

    std::uint32_t count = 0, dim = 0;
    in.read(reinterpret_cast<char*>(&count), 4);
    in.read(reinterpret_cast<char*>(&dim), 4);
    if (!in) throw EmbeddingIOError("truncated header in " + path);

    const std::size_t n = static_cast<std::size_t>(count) * dim;
    std::vector<float> payload(n);
    in.read(reinterpret_cast<char*>(payload.data()),
            static_cast<std::streamsize>(n * sizeof(float)));
    const auto got = static_cast<std::size_t>(in.gcount());
    if (got != n * sizeof(float)) {
        throw EmbeddingIOError("truncated payload in " + path + ": expected " +
                               std::to_string(n * sizeof(float)) +
                               " bytes, got " + std::to_string(got));
    }

    EmbeddingSet emb;
    emb.dim = dim;
    emb.vectors = Matrix(count, dim);
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(payload[i]))
            throw EmbeddingIOError("non-finite value at element " +
                                   std::to_string(i) + " in " + path);
        emb.vectors.data()[i] = static_cast<double>(payload[i]);
    }
    return emb;
}

void save_embeddings(const EmbeddingSet& emb, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw EmbeddingIOError("cannot write embedding file: " + path);

    out.write(kMagic, 4);
    const std::uint32_t count = static_cast<std::uint32_t>(emb.vectors.rows());
    const std::uint32_t dim = static_cast<std::uint32_t>(emb.dim);
    out.write(reinterpret_cast<const char*>(&count), 4);
    out.write(reinterpret_cast<const char*>(&dim), 4);

    std::vector<float> payload(emb.vectors.size());
    for (std::size_t i = 0; i < payload.size(); ++i) {
        if (!std::isfinite(emb.vectors.data()[i]))
            throw EmbeddingIOError("non-finite value at element " +
                                   std::to_string(i));
        payload[i] = static_cast<float>(emb.vectors.data()[i]);
    }
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size() * sizeof(float)));
    if (!out) throw EmbeddingIOError("write failure on " + path);
}

}  // namespace vreid
