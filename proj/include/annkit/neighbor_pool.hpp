#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace annkit {

struct NeighborEntry {
    std::uint32_t id;
    float dist;      // squared distance to the owning point
    bool flag_new;   // not yet consumed by a local join round
    bool checked;    // already expanded by nn-expansion
};

// Ascending (dist, id); the tie-break makes every ordering in the toolkit total.
inline bool entry_less(const NeighborEntry& a, const NeighborEntry& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    return a.id < b.id;
}

/// Fixed-capacity candidate pool, kept sorted ascending by (dist, id) with no
/// duplicate ids. Offering the same id always carries the same distance, so a
/// duplicate sits exactly at its insertion position.
class NeighborPool {
  public:
    NeighborPool() = default;
    explicit NeighborPool(std::uint32_t capacity) : capacity_(capacity) {
        entries_.reserve(capacity);
    }

    // Returns true when the entry entered the pool (new id, within capacity).
    // A full pool rejects anything not better than its worst entry. On a
    // duplicate id the existing entry wins, flags included.
    bool insert(std::uint32_t id, float dist, bool flag_new) {
        const NeighborEntry e{id, dist, flag_new, false};
        std::size_t lo = 0, hi = entries_.size();
        while (lo < hi) {
            const std::size_t mid = (lo + hi) / 2;
            if (entry_less(entries_[mid], e)) {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        if (lo < entries_.size() && entries_[lo].id == id && entries_[lo].dist == dist) {
            return false;
        }
        if (lo >= capacity_) return false;
        entries_.insert(entries_.begin() + lo, e);
        if (entries_.size() > capacity_) entries_.pop_back();
        return true;
    }

    std::span<const NeighborEntry> entries() const { return entries_; }
    std::span<NeighborEntry> entries() { return entries_; }
    std::uint32_t size() const { return static_cast<std::uint32_t>(entries_.size()); }
    std::uint32_t capacity() const { return capacity_; }
    bool contains(std::uint32_t id) const {
        for (const auto& e : entries_) {
            if (e.id == id) return true;
        }
        return false;
    }

  private:
    std::vector<NeighborEntry> entries_;
    std::uint32_t capacity_ = 0;
};

}  // namespace annkit
