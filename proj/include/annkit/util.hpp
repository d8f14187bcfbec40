#pragma once

#include <chrono>
#include <cstdint>

namespace annkit {

// splitmix64 finalizer; decorrelates seed streams.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Independent RNG seed for stream `id` derived from a master seed.
inline std::uint64_t substream(std::uint64_t seed, std::uint64_t id) {
    return mix64(seed ^ mix64(id));
}

class StopWatch {
  public:
    StopWatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }
    void restart() { start_ = std::chrono::steady_clock::now(); }

  private:
    std::chrono::steady_clock::time_point start_;
};

}  // namespace annkit
