#include "annkit/dataset.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

namespace annkit {

namespace {

// The on-disk formats are little-endian; swap on big-endian hosts.
inline std::uint32_t to_host_le(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::big) {
        return __builtin_bswap32(v);
    }
    return v;
}

inline std::uint32_t to_disk_le(std::uint32_t v) { return to_host_le(v); }

class RecordReader {
  public:
    explicit RecordReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_.is_open()) throw format_error("cannot open file: " + path);
    }

    // Reads one little-endian int32. Returns false on clean EOF at a record
    // boundary; throws on mid-word truncation.
    bool read_i32(std::int32_t& out, bool at_record_start) {
        std::uint32_t raw = 0;
        in_.read(reinterpret_cast<char*>(&raw), 4);
        const auto got = in_.gcount();
        if (got == 0 && at_record_start && in_.eof()) return false;
        if (got != 4) {
            throw format_error("truncated record at byte " + std::to_string(offset_) + " in " +
                               path_);
        }
        raw = to_host_le(raw);
        std::memcpy(&out, &raw, 4);
        offset_ += 4;
        return true;
    }

    std::uint64_t offset() const { return offset_; }

  private:
    std::string path_;
    std::ifstream in_;
    std::uint64_t offset_ = 0;
};

class RecordWriter {
  public:
    explicit RecordWriter(const std::string& path) : path_(path), out_(path, std::ios::binary) {
        if (!out_.is_open()) throw format_error("cannot open file for writing: " + path);
    }

    void write_u32(std::uint32_t v) {
        v = to_disk_le(v);
        out_.write(reinterpret_cast<const char*>(&v), 4);
    }

    void close() {
        out_.flush();
        if (!out_) throw format_error("write failure on " + path_);
        out_.close();
    }

  private:
    std::string path_;
    std::ofstream out_;
};

}  // namespace

void GroundTruth::validate_against(std::uint32_t base_n) const {
    for (std::uint32_t i = 0; i < n; ++i) {
        const auto r = row(i);
        for (std::uint32_t j = 0; j < k; ++j) {
            if (r[j] >= base_n) {
                throw data_error("row " + std::to_string(i) + " holds id " + std::to_string(r[j]) +
                                 " outside base set of size " + std::to_string(base_n));
            }
            for (std::uint32_t l = j + 1; l < k; ++l) {
                if (r[j] == r[l]) {
                    throw data_error("row " + std::to_string(i) + " holds duplicate id " +
                                     std::to_string(r[j]));
                }
            }
        }
    }
}

VectorSet load_fvecs(const std::string& path) {
    RecordReader rd(path);
    VectorSet vs;
    std::int32_t dim0 = 0;
    std::uint32_t rec = 0;
    for (;;) {
        std::int32_t d = 0;
        const std::uint64_t rec_start = rd.offset();
        if (!rd.read_i32(d, /*at_record_start=*/true)) break;
        if (d < 1) {
            throw format_error("record " + std::to_string(rec) + " at byte " +
                               std::to_string(rec_start) + " declares dimension " +
                               std::to_string(d) + " in " + path);
        }
        if (rec == 0) {
            dim0 = d;
            vs.dim = static_cast<std::uint32_t>(d);
        } else if (d != dim0) {
            throw format_error("record " + std::to_string(rec) + " has dimension " +
                               std::to_string(d) + ", expected " + std::to_string(dim0) + " in " +
                               path);
        }
        for (std::int32_t j = 0; j < d; ++j) {
            std::int32_t raw = 0;
            rd.read_i32(raw, /*at_record_start=*/false);
            float f;
            std::memcpy(&f, &raw, 4);
            if (!std::isfinite(f)) {
                throw data_error("non-finite value in record " + std::to_string(rec) +
                                 " component " + std::to_string(j) + " in " + path);
            }
            vs.data.push_back(f);
        }
        ++rec;
    }
    vs.n = rec;
    return vs;
}

void save_fvecs(const VectorSet& vs, const std::string& path) {
    RecordWriter wr(path);
    for (std::uint32_t i = 0; i < vs.n; ++i) {
        wr.write_u32(vs.dim);
        const float* r = vs.row_ptr(i);
        for (std::uint32_t j = 0; j < vs.dim; ++j) {
            std::uint32_t raw;
            std::memcpy(&raw, &r[j], 4);
            wr.write_u32(raw);
        }
    }
    wr.close();
}

GroundTruth load_ivecs(const std::string& path) {
    RecordReader rd(path);
    GroundTruth gt;
    std::int32_t k0 = 0;
    std::uint32_t rec = 0;
    for (;;) {
        std::int32_t k = 0;
        const std::uint64_t rec_start = rd.offset();
        if (!rd.read_i32(k, /*at_record_start=*/true)) break;
        if (k < 1) {
            throw format_error("record " + std::to_string(rec) + " at byte " +
                               std::to_string(rec_start) + " declares dimension " +
                               std::to_string(k) + " in " + path);
        }
        if (rec == 0) {
            k0 = k;
            gt.k = static_cast<std::uint32_t>(k);
        } else if (k != k0) {
            throw format_error("record " + std::to_string(rec) + " has dimension " +
                               std::to_string(k) + ", expected " + std::to_string(k0) + " in " +
                               path);
        }
        for (std::int32_t j = 0; j < k; ++j) {
            std::int32_t v = 0;
            rd.read_i32(v, /*at_record_start=*/false);
            if (v < 0) {
                throw data_error("negative id in record " + std::to_string(rec) + " component " +
                                 std::to_string(j) + " in " + path);
            }
            gt.ids.push_back(static_cast<std::uint32_t>(v));
        }
        ++rec;
    }
    gt.n = rec;
    return gt;
}

void save_ivecs(const GroundTruth& gt, const std::string& path) {
    RecordWriter wr(path);
    for (std::uint32_t i = 0; i < gt.n; ++i) {
        wr.write_u32(gt.k);
        const auto r = gt.row(i);
        for (std::uint32_t j = 0; j < gt.k; ++j) {
            if (r[j] > 0x7fffffffu) {
                throw data_error("id " + std::to_string(r[j]) + " does not fit an int32 payload");
            }
            wr.write_u32(r[j]);
        }
    }
    wr.close();
}

VectorSet gen_synthetic(std::uint32_t n, std::uint32_t dim, std::uint64_t seed) {
    if (dim < 1) throw std::invalid_argument("gen_synthetic: dim must be >= 1");
    VectorSet vs;
    vs.n = n;
    vs.dim = dim;
    vs.data.resize(std::size_t(n) * dim);
    std::mt19937_64 rng(seed);
    for (auto& v : vs.data) {
        // Top 24 bits of the draw; exact multiples of 2^-24 in [0,1). Avoids
        // std::uniform_real_distribution, whose output is implementation-defined.
        v = float(std::uint32_t(rng() >> 40)) * 0x1p-24f;
    }
    return vs;
}

float dist_sq(const VectorSet& vs, std::uint32_t a, std::uint32_t b) {
    if (a >= vs.n || b >= vs.n) {
        throw std::out_of_range("dist_sq: point id out of range (n=" + std::to_string(vs.n) + ")");
    }
    return l2_sq(vs.row_ptr(a), vs.row_ptr(b), vs.dim);
}

float dist_sq_q(const VectorSet& vs, std::span<const float> q, std::uint32_t b) {
    if (b >= vs.n) {
        throw std::out_of_range("dist_sq_q: point id out of range (n=" + std::to_string(vs.n) +
                                ")");
    }
    if (q.size() != vs.dim) {
        throw std::invalid_argument("dist_sq_q: query length " + std::to_string(q.size()) +
                                    " does not match dim " + std::to_string(vs.dim));
    }
    return l2_sq(q.data(), vs.row_ptr(b), vs.dim);
}

}  // namespace annkit
