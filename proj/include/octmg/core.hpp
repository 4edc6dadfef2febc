#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

namespace octmg {

using real = double;

template <int D>
using IVec = std::array<int, D>;

template <int D>
using Point = std::array<real, D>;

/// Cardinal direction: one coordinate axis plus an orientation sign.
/// Naming follows the compass/vertical convention: W/E on axis 0,
/// S/N on axis 1, B/T on axis 2.
struct Direction {
  int axis = 0;
  int sign = -1;  // -1 or +1

  friend bool operator==(const Direction&, const Direction&) = default;
};

inline constexpr Direction dir_w{0, -1};
inline constexpr Direction dir_e{0, +1};
inline constexpr Direction dir_s{1, -1};
inline constexpr Direction dir_n{1, +1};
inline constexpr Direction dir_b{2, -1};
inline constexpr Direction dir_t{2, +1};

constexpr Direction opposite(Direction d) { return {d.axis, -d.sign}; }

/// Dense index of a direction in [0, 2*D): minus side first per axis.
constexpr int direction_index(Direction d) { return 2 * d.axis + (d.sign > 0 ? 1 : 0); }

template <int D>
constexpr std::array<Direction, 2 * D> all_directions() {
  std::array<Direction, 2 * D> dirs{};
  for (int a = 0; a < D; ++a) {
    dirs[2 * a] = Direction{a, -1};
    dirs[2 * a + 1] = Direction{a, +1};
  }
  return dirs;
}

inline const char* direction_name(Direction d) {
  static const char* names[6] = {"W", "E", "S", "N", "B", "T"};
  return names[direction_index(d)];
}

template <int D>
constexpr IVec<D> unit_offset(Direction d) {
  IVec<D> off{};
  off[d.axis] = d.sign;
  return off;
}

template <class T, std::size_t N>
constexpr std::array<T, N> add(std::array<T, N> a, const std::array<T, N>& b) {
  for (std::size_t i = 0; i < N; ++i) a[i] += b[i];
  return a;
}

/// Axis-aligned box in physical coordinates.
template <int D>
struct Box {
  Point<D> lo{};
  Point<D> hi{};

  bool valid() const {
    for (int d = 0; d < D; ++d)
      if (!(lo[d] <= hi[d])) return false;
    return true;
  }

  /// Closed-box intersection test.
  bool intersects(const Box& other) const {
    for (int d = 0; d < D; ++d)
      if (lo[d] > other.hi[d] || other.lo[d] > hi[d]) return false;
    return true;
  }
};

/// Half-open index range [lo, hi) per axis with an optional stride.
template <int D>
struct CellRange {
  IVec<D> lo{};
  IVec<D> hi{};
  IVec<D> step = unit_steps();

  static constexpr IVec<D> unit_steps() {
    IVec<D> s{};
    s.fill(1);
    return s;
  }

  bool empty() const {
    for (int d = 0; d < D; ++d)
      if (lo[d] >= hi[d]) return true;
    return false;
  }

  long long cell_count() const {
    long long c = 1;
    for (int d = 0; d < D; ++d) {
      long long extent = hi[d] - lo[d];
      if (extent <= 0) return 0;
      c *= (extent + step[d] - 1) / step[d];
    }
    return c;
  }

  int extent(int d) const { return hi[d] - lo[d]; }

  friend bool operator==(const CellRange&, const CellRange&) = default;
};

/// Visit every cell of the range, axis 0 fastest. This ordering is the
/// repository-wide convention for payloads and segment indices.
template <int D, class F>
void for_each_cell(const CellRange<D>& r, F&& f) {
  if (r.empty()) return;
  IVec<D> idx = r.lo;
  while (true) {
    f(idx);
    int d = 0;
    for (; d < D; ++d) {
      idx[d] += r.step[d];
      if (idx[d] < r.hi[d]) break;
      idx[d] = r.lo[d];
    }
    if (d == D) return;
  }
}

template <int D>
bool contains(const CellRange<D>& r, const std::type_identity_t<IVec<D>>& idx) {
  for (int d = 0; d < D; ++d)
    if (idx[d] < r.lo[d] || idx[d] >= r.hi[d]) return false;
  return true;
}

/// Run f(i) for i in [0, count) on up to `workers` threads. Work is split
/// into contiguous chunks so the partition is independent of scheduling;
/// callers must only write disjoint state per index.
inline void parallel_for(long long count, int workers, const std::function<void(long long)>& f) {
  if (count <= 0) return;
  if (workers <= 1 || count == 1) {
    for (long long i = 0; i < count; ++i) f(i);
    return;
  }
  int n_threads = static_cast<int>(std::min<long long>(workers, count));
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  long long chunk = (count + n_threads - 1) / n_threads;
  for (int t = 0; t < n_threads; ++t) {
    long long begin = t * chunk;
    long long end = std::min(count, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&f, begin, end] {
      for (long long i = begin; i < end; ++i) f(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace octmg
