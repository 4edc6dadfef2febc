#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "octmg/core.hpp"

namespace octmg {

/// Octree leaf address: refinement level plus position in the level-`level`
/// lattice of the root grid (coords[d] < root_dims[d] * 2^level).
template <int D>
struct BlockId {
  int level = 0;
  std::array<std::int64_t, D> coords{};

  friend bool operator==(const BlockId&, const BlockId&) = default;
  friend auto operator<=>(const BlockId&, const BlockId&) = default;

  BlockId parent() const {
    BlockId p{level - 1, coords};
    for (auto& c : p.coords) c >>= 1;
    return p;
  }

  BlockId child(const IVec<D>& offset) const {
    BlockId c{level + 1, coords};
    for (int d = 0; d < D; ++d) c.coords[d] = 2 * coords[d] + offset[d];
    return c;
  }
};

template <int D>
struct BlockIdHash {
  std::size_t operator()(const BlockId<D>& b) const {
    std::size_t h = std::hash<int>{}(b.level);
    for (int d = 0; d < D; ++d)
      h ^= std::hash<std::int64_t>{}(b.coords[d]) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
  }
};

enum class RefineCase { same_level, c2f, f2c };

inline const char* refine_case_name(RefineCase c) {
  switch (c) {
    case RefineCase::same_level: return "same_level";
    case RefineCase::c2f: return "c2f";
    default: return "f2c";
  }
}

template <int D>
struct NeighborInfo {
  BlockId<D> neighbor;
  RefineCase kase = RefineCase::same_level;
  int segment_index = 0;
};

/// Number of potential neighbor blocks across one cardinal direction.
inline int n_neigh(int l_curr, int l_neigh, int r, int d) {
  if (std::abs(l_curr - l_neigh) > 1)
    throw std::invalid_argument("n_neigh: balance violation, level difference > 1");
  if (l_curr < l_neigh) {
    int count = 1;
    for (int i = 0; i < d - 1; ++i) count *= r;
    return count;
  }
  return 1;
}

template <int D>
struct RefineStep {
  enum class Kind { all, region };
  Kind kind = Kind::all;
  Box<D> region{};

  static RefineStep refine_all() { return RefineStep{Kind::all, {}}; }
  static RefineStep refine_region(const Box<D>& b) { return RefineStep{Kind::region, b}; }
};

template <int D>
using RefinementSpec = std::vector<RefineStep<D>>;

/// Forest of octree leaf blocks tiling a cuboid domain. Immutable after
/// construction apart from rank assignment; all queries are safe for
/// concurrent readers.
template <int D>
class Blockforest {
 public:
  static constexpr int dim = D;
  static constexpr int refinement_ratio = 2;

  Blockforest(const IVec<D>& root_dims, const Box<D>& domain, int cells_per_block)
      : m_root_dims(root_dims), m_domain(domain), m_n(cells_per_block) {
    if (cells_per_block < 3)
      throw std::invalid_argument("Blockforest: cells_per_block must be >= 3");
    for (int d = 0; d < D; ++d) {
      if (root_dims[d] <= 0) throw std::invalid_argument("Blockforest: root_dims must be positive");
      if (!(domain.lo[d] < domain.hi[d]))
        throw std::invalid_argument("Blockforest: empty domain");
    }
  }

  const IVec<D>& root_dims() const { return m_root_dims; }
  const Box<D>& domain() const { return m_domain; }
  int cells_per_block() const { return m_n; }

  const std::vector<BlockId<D>>& leaves() const { return m_leaves; }
  std::size_t leaf_count() const { return m_leaves.size(); }

  bool is_leaf(const BlockId<D>& b) const { return m_index.count(b) > 0; }

  int leaf_index(const BlockId<D>& b) const {
    auto it = m_index.find(b);
    if (it == m_index.end()) throw std::invalid_argument("Blockforest: unknown block");
    return it->second;
  }

  int max_level() const {
    int m = 0;
    for (const auto& b : m_leaves) m = std::max(m, b.level);
    return m;
  }

  std::int64_t lattice_extent(int axis, int level) const {
    return static_cast<std::int64_t>(m_root_dims[axis]) << level;
  }

  bool in_lattice(const BlockId<D>& b) const {
    if (b.level < 0) return false;
    for (int d = 0; d < D; ++d)
      if (b.coords[d] < 0 || b.coords[d] >= lattice_extent(d, b.level)) return false;
    return true;
  }

  Point<D> block_extent(int level) const {
    Point<D> e{};
    for (int d = 0; d < D; ++d)
      e[d] = (m_domain.hi[d] - m_domain.lo[d]) / static_cast<real>(lattice_extent(d, level));
    return e;
  }

  Point<D> block_origin(const BlockId<D>& b) const {
    Point<D> ext = block_extent(b.level);
    Point<D> o{};
    for (int d = 0; d < D; ++d) o[d] = m_domain.lo[d] + static_cast<real>(b.coords[d]) * ext[d];
    return o;
  }

  bool face_on_domain_boundary(const BlockId<D>& b, Direction dir) const {
    std::int64_t c = b.coords[dir.axis];
    return dir.sign < 0 ? c == 0 : c == lattice_extent(dir.axis, b.level) - 1;
  }

  /// Neighbor topology across one face, assuming 2:1 balance. Returns no
  /// entries at the domain boundary, a single entry for same-level or
  /// coarser neighbors, and r^(D-1) entries ordered by segment index for
  /// finer neighbors.
  std::vector<NeighborInfo<D>> neighbors(const BlockId<D>& b, Direction dir) const {
    if (!is_leaf(b)) throw std::invalid_argument("neighbors: unknown block");
    std::vector<NeighborInfo<D>> out;
    BlockId<D> same{b.level, b.coords};
    same.coords[dir.axis] += dir.sign;
    if (!in_lattice(same)) return out;  // non-periodic domain boundary

    if (is_leaf(same)) {
      out.push_back({same, RefineCase::same_level, 0});
      return out;
    }
    if (same.level > 0 && is_leaf(same.parent())) {
      out.push_back({same.parent(), RefineCase::f2c, 0});
      return out;
    }
    // finer side: children of `same` that touch the shared face,
    // ordered lexicographically over the interface axes (lowest fastest)
    std::array<int, D - 1> tax = interface_axes(dir);
    int count = n_neigh(b.level, b.level + 1, refinement_ratio, D);
    for (int s = 0; s < count; ++s) {
      IVec<D> off{};
      off[dir.axis] = dir.sign > 0 ? 0 : 1;
      int bits = s;
      for (int t = 0; t < D - 1; ++t) {
        off[tax[t]] = bits & 1;
        bits >>= 1;
      }
      BlockId<D> child = same.child(off);
      if (!is_leaf(child))
        throw std::runtime_error("neighbors: forest is not 2:1 balanced at " +
                                 describe(b) + " -> " + direction_name(dir));
      out.push_back({child, RefineCase::c2f, s});
    }
    return out;
  }

  /// All leaves sharing a face with `b` in direction `dir`, at any level
  /// difference. Slower than neighbors(); used for balance checking.
  std::vector<BlockId<D>> face_adjacent_leaves(const BlockId<D>& b, Direction dir) const {
    std::vector<BlockId<D>> out;
    BlockId<D> same{b.level, b.coords};
    same.coords[dir.axis] += dir.sign;
    if (!in_lattice(same)) return out;
    // coarser ancestors
    BlockId<D> up = same;
    while (up.level > 0) {
      up = up.parent();
      if (is_leaf(up)) {
        out.push_back(up);
        return out;
      }
    }
    // same level or finer descendants on the shared face
    int lmax = max_level();
    collect_face_leaves(same, dir, lmax, out);
    return out;
  }

  const std::vector<int>& owners() const { return m_owners; }
  bool has_owners() const { return !m_owners.empty(); }

  int owner_of(const BlockId<D>& b) const {
    if (m_owners.empty()) throw std::logic_error("Blockforest: ranks not assigned");
    return m_owners[leaf_index(b)];
  }

  static std::string describe(const BlockId<D>& b) {
    std::string s = "L" + std::to_string(b.level) + "(";
    for (int d = 0; d < D; ++d) s += (d ? "," : "") + std::to_string(b.coords[d]);
    return s + ")";
  }

  /// Interface axes of a face, in increasing axis order (segment-index
  /// convention: lowest axis is the fastest).
  static std::array<int, D - 1> interface_axes(Direction dir) {
    std::array<int, D - 1> tax{};
    int k = 0;
    for (int d = 0; d < D; ++d)
      if (d != dir.axis) tax[k++] = d;
    return tax;
  }

 private:
  template <int E>
  friend Blockforest<E> build_forest(const IVec<E>&, const Box<E>&, int, const RefinementSpec<E>&);
  template <int E>
  friend const std::vector<int>& assign_ranks(Blockforest<E>&, int);

  void set_leaves(std::vector<BlockId<D>> leaves) {
    std::sort(leaves.begin(), leaves.end());
    m_leaves = std::move(leaves);
    m_index.clear();
    m_index.reserve(m_leaves.size());
    for (std::size_t i = 0; i < m_leaves.size(); ++i)
      m_index.emplace(m_leaves[i], static_cast<int>(i));
  }

  void collect_face_leaves(const BlockId<D>& cell, Direction dir, int lmax,
                           std::vector<BlockId<D>>& out) const {
    if (is_leaf(cell)) {
      out.push_back(cell);
      return;
    }
    if (cell.level >= lmax) return;
    std::array<int, D - 1> tax = interface_axes(dir);
    for (int s = 0; s < (1 << (D - 1)); ++s) {
      IVec<D> off{};
      off[dir.axis] = dir.sign > 0 ? 0 : 1;
      int bits = s;
      for (int t = 0; t < D - 1; ++t) {
        off[tax[t]] = bits & 1;
        bits >>= 1;
      }
      collect_face_leaves(cell.child(off), dir, lmax, out);
    }
  }

  IVec<D> m_root_dims{};
  Box<D> m_domain{};
  int m_n = 0;
  std::vector<BlockId<D>> m_leaves;
  std::unordered_map<BlockId<D>, int, BlockIdHash<D>> m_index;
  std::vector<int> m_owners;
};

/// Pairs of face-adjacent leaves violating the 2:1 balance restriction.
template <int D>
std::vector<std::pair<BlockId<D>, BlockId<D>>> check_balance(const Blockforest<D>& forest) {
  std::vector<std::pair<BlockId<D>, BlockId<D>>> bad;
  for (const auto& leaf : forest.leaves()) {
    for (Direction dir : all_directions<D>()) {
      for (const auto& nb : forest.face_adjacent_leaves(leaf, dir)) {
        if (nb.level - leaf.level >= 2 && leaf < nb) bad.emplace_back(leaf, nb);
        if (leaf.level - nb.level >= 2 && nb < leaf) bad.emplace_back(nb, leaf);
      }
    }
  }
  std::sort(bad.begin(), bad.end());
  bad.erase(std::unique(bad.begin(), bad.end()), bad.end());
  return bad;
}

namespace detail {

/// Bounding box of a block's cell centers: the block box shrunk by half a
/// cell width per side. Region refinement selects on this box, so a region
/// boundary that coincides with a block face selects only the blocks whose
/// cells actually reach it.
template <int D>
Box<D> cell_center_bbox(const Blockforest<D>& forest, const BlockId<D>& b) {
  Point<D> origin = forest.block_origin(b);
  Point<D> ext = forest.block_extent(b.level);
  Box<D> box;
  for (int d = 0; d < D; ++d) {
    real h = ext[d] / static_cast<real>(forest.cells_per_block());
    box.lo[d] = origin[d] + 0.5 * h;
    box.hi[d] = origin[d] + ext[d] - 0.5 * h;
  }
  return box;
}

template <int D>
void refine_into(const BlockId<D>& leaf, std::set<BlockId<D>>& leaves) {
  leaves.erase(leaf);
  IVec<D> off{};
  for (int s = 0; s < (1 << D); ++s) {
    for (int d = 0; d < D; ++d) off[d] = (s >> d) & 1;
    leaves.insert(leaf.child(off));
  }
}

}  // namespace detail

/// Builds the forest by applying the refinement steps in order, then ripple
/// refines until the 2:1 balance restriction holds everywhere.
template <int D>
Blockforest<D> build_forest(const IVec<D>& root_dims, const Box<D>& domain, int cells_per_block,
                            const RefinementSpec<D>& spec) {
  Blockforest<D> forest(root_dims, domain, cells_per_block);

  std::set<BlockId<D>> leaves;
  {
    BlockId<D> root{0, {}};
    IVec<D> idx{};
    CellRange<D> roots;
    for (int d = 0; d < D; ++d) roots.hi[d] = root_dims[d];
    for_each_cell(roots, [&](const IVec<D>& c) {
      BlockId<D> b{0, {}};
      for (int d = 0; d < D; ++d) b.coords[d] = c[d];
      leaves.insert(b);
    });
  }

  for (const auto& step : spec) {
    if (step.kind == RefineStep<D>::Kind::all) {
      std::vector<BlockId<D>> current(leaves.begin(), leaves.end());
      for (const auto& leaf : current) detail::refine_into(leaf, leaves);
    } else {
      if (!step.region.valid())
        throw std::invalid_argument("build_forest: malformed refinement region");
      forest.set_leaves({leaves.begin(), leaves.end()});
      std::vector<BlockId<D>> selected;
      for (const auto& leaf : leaves)
        if (detail::cell_center_bbox(forest, leaf).intersects(step.region))
          selected.push_back(leaf);
      for (const auto& leaf : selected) detail::refine_into(leaf, leaves);
    }
  }

  // ripple refinement: refine any leaf with a face neighbor >= 2 levels finer
  for (;;) {
    forest.set_leaves({leaves.begin(), leaves.end()});
    std::set<BlockId<D>> to_refine;
    for (const auto& leaf : forest.leaves())
      for (Direction dir : all_directions<D>())
        for (const auto& nb : forest.face_adjacent_leaves(leaf, dir))
          if (nb.level - leaf.level >= 2) to_refine.insert(leaf);
    if (to_refine.empty()) break;
    for (const auto& leaf : to_refine) detail::refine_into(leaf, leaves);
  }
  return forest;
}

namespace detail {

inline std::uint64_t spread_bits(std::uint64_t v, int stride) {
  std::uint64_t out = 0;
  for (int bit = 0; bit < 21; ++bit)
    out |= ((v >> bit) & 1ULL) << (bit * stride);
  return out;
}

/// Morton code of a leaf's level-normalized lower corner.
template <int D>
std::uint64_t morton_code(const BlockId<D>& b, int max_level) {
  std::uint64_t code = 0;
  for (int d = 0; d < D; ++d) {
    auto norm = static_cast<std::uint64_t>(b.coords[d]) << (max_level - b.level);
    code |= spread_bits(norm, D) << d;
  }
  return code;
}

}  // namespace detail

/// Assigns every leaf to a rank: leaves are ordered along the Morton curve
/// of their level-normalized coordinates and cut into contiguous chunks
/// whose sizes differ by at most one. Pure in (forest, n_ranks).
template <int D>
const std::vector<int>& assign_ranks(Blockforest<D>& forest, int n_ranks) {
  if (n_ranks < 1) throw std::invalid_argument("assign_ranks: n_ranks must be >= 1");
  const auto& leaves = forest.leaves();
  int lmax = forest.max_level();
  std::vector<int> order(leaves.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::vector<std::uint64_t> codes(leaves.size());
  for (std::size_t i = 0; i < leaves.size(); ++i)
    codes[i] = detail::morton_code(leaves[i], lmax);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return codes[a] < codes[b]; });

  std::vector<int> owners(leaves.size(), 0);
  auto n = static_cast<long long>(leaves.size());
  long long base = n / n_ranks, extra = n % n_ranks;
  long long pos = 0;
  for (int r = 0; r < n_ranks; ++r) {
    long long take = base + (r < extra ? 1 : 0);
    for (long long k = 0; k < take; ++k) owners[order[pos++]] = r;
  }
  forest.m_owners = std::move(owners);
  return forest.m_owners;
}

}  // namespace octmg
