#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace annkit {

// Sentinel for "no point".
constexpr std::uint32_t kInvalidId = 0xffffffffu;

// Malformed file structure (truncation, inconsistent dimensions, bad header).
class format_error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Structurally valid file carrying unusable values (NaN/Inf, negative ids).
class data_error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Dense row-major set of float32 vectors. Immutable after load; safe for
/// unrestricted concurrent reads.
struct VectorSet {
    std::uint32_t n = 0;
    std::uint32_t dim = 0;
    std::vector<float> data;  // n*dim scalars, row i at [i*dim, (i+1)*dim)

    std::span<const float> row(std::uint32_t i) const {
        return {data.data() + std::size_t(i) * dim, dim};
    }
    const float* row_ptr(std::uint32_t i) const { return data.data() + std::size_t(i) * dim; }
};

/// Rows of point ids sorted by ascending true distance, ties by ascending id.
/// Also the in-memory shape of any ivecs file (graph rows, search results).
struct GroundTruth {
    std::uint32_t n = 0;  // rows
    std::uint32_t k = 0;  // ids per row
    std::vector<std::uint32_t> ids;

    std::span<const std::uint32_t> row(std::uint32_t i) const {
        return {ids.data() + std::size_t(i) * k, k};
    }
    // Checks that every id addresses the base set and rows hold no duplicates.
    void validate_against(std::uint32_t base_n) const;
};

// fvecs: per vector an int32 dimension then dim float32 values, little-endian,
// no header or footer. ivecs is the same layout with int32 payload. Both are
// bit-exact contracts: save(load(f)) reproduces f byte for byte.
VectorSet load_fvecs(const std::string& path);
void save_fvecs(const VectorSet& vs, const std::string& path);
GroundTruth load_ivecs(const std::string& path);
void save_ivecs(const GroundTruth& gt, const std::string& path);

/// Deterministic synthetic dataset; scalars uniform in [0,1).
VectorSet gen_synthetic(std::uint32_t n, std::uint32_t dim, std::uint64_t seed);

// Squared euclidean distance, accumulated in index-ascending order so results
// are bit-identical across runs and thread counts. No square root anywhere:
// rankings are unchanged and that is all the toolkit needs.
inline float l2_sq(const float* a, const float* b, std::uint32_t dim) {
    float acc = 0.0f;
    for (std::uint32_t i = 0; i < dim; ++i) {
        const float d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

float dist_sq(const VectorSet& vs, std::uint32_t a, std::uint32_t b);
float dist_sq_q(const VectorSet& vs, std::span<const float> q, std::uint32_t b);

}  // namespace annkit
