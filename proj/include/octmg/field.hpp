#pragma once

#include <cassert>
#include <span>
#include <vector>

#include "octmg/blockforest.hpp"
#include "octmg/core.hpp"

namespace octmg {

/// Cell-centered scalar field on one block with exactly one ghost layer per
/// side. Raw indices include the ghosts: interior cells live at [1, n+1)
/// per axis, the ghost layers at 0 and n+1. Storage is axis-0-fastest;
/// the layout is never observable through the API.
template <int D>
class BlockField {
 public:
  BlockField() = default;

  BlockField(const BlockId<D>& block, int cells_per_block, int mg_level)
      : m_block(block), m_n_finest(cells_per_block), m_mg_level(mg_level) {
    int n = cells_per_block >> mg_level;
    if (n << mg_level != cells_per_block || n < 1)
      throw std::invalid_argument("BlockField: cells_per_block not divisible down to mg_level");
    m_cells = n;
    std::size_t total = 1;
    for (int d = 0; d < D; ++d) total *= static_cast<std::size_t>(n + 2);
    m_data.assign(total, 0.0);
  }

  BlockField(int cells_per_block, int mg_level = 0)
      : BlockField(BlockId<D>{}, cells_per_block, mg_level) {}

  const BlockId<D>& block() const { return m_block; }
  int mg_level() const { return m_mg_level; }
  int cells_per_block_finest() const { return m_n_finest; }

  /// Interior cells per dimension on this field's multigrid level.
  int cells() const { return m_cells; }

  real& at(const IVec<D>& raw) { return m_data[linear_index(raw)]; }
  real at(const IVec<D>& raw) const { return m_data[linear_index(raw)]; }

  std::span<real> data() { return m_data; }
  std::span<const real> data() const { return m_data; }

  void fill(real v) { m_data.assign(m_data.size(), v); }

  std::size_t stride(int d) const {
    std::size_t s = 1;
    for (int k = 0; k < d; ++k) s *= static_cast<std::size_t>(m_cells + 2);
    return s;
  }

  std::size_t linear_index(const IVec<D>& raw) const {
    std::size_t idx = 0;
    std::size_t stride = 1;
    for (int d = 0; d < D; ++d) {
      assert(raw[d] >= 0 && raw[d] < m_cells + 2);
      idx += static_cast<std::size_t>(raw[d]) * stride;
      stride *= static_cast<std::size_t>(m_cells + 2);
    }
    return idx;
  }

 private:
  BlockId<D> m_block{};
  int m_n_finest = 0;
  int m_mg_level = 0;
  int m_cells = 0;
  std::vector<real> m_data;
};

/// Physical cell widths and block origin for one (octree level, mg level).
template <int D>
struct Geometry {
  Point<D> h{};
  Point<D> origin{};

  /// Center of the cell at raw index `raw` (works for ghosts too).
  Point<D> cell_center(const IVec<D>& raw) const {
    Point<D> p{};
    for (int d = 0; d < D; ++d)
      p[d] = origin[d] + (static_cast<real>(raw[d] - 1) + 0.5) * h[d];
    return p;
  }
};

template <int D>
Point<D> cell_width(const Blockforest<D>& forest, const BlockId<D>& block, int mg_level) {
  (void)forest.leaf_index(block);
  Point<D> ext = forest.block_extent(block.level);
  int n = forest.cells_per_block() >> mg_level;
  Point<D> h{};
  for (int d = 0; d < D; ++d) h[d] = ext[d] / static_cast<real>(n);
  return h;
}

template <int D>
Geometry<D> geometry(const Blockforest<D>& forest, const BlockId<D>& block, int mg_level) {
  return Geometry<D>{cell_width(forest, block, mg_level), forest.block_origin(block)};
}

template <int D>
CellRange<D> interior_range(const BlockField<D>& f) {
  CellRange<D> r;
  for (int d = 0; d < D; ++d) {
    r.lo[d] = 1;
    r.hi[d] = 1 + f.cells();
  }
  return r;
}

/// The single layer of interior cells abutting the given face.
template <int D>
CellRange<D> interface_range(const BlockField<D>& f, Direction dir) {
  CellRange<D> r = interior_range(f);
  if (dir.sign < 0)
    r.hi[dir.axis] = r.lo[dir.axis] + 1;
  else
    r.lo[dir.axis] = r.hi[dir.axis] - 1;
  return r;
}

/// The full ghost face outside the given block face.
template <int D>
CellRange<D> ghost_face_range(const BlockField<D>& f, Direction dir) {
  CellRange<D> r = interior_range(f);
  if (dir.sign < 0) {
    r.lo[dir.axis] = 0;
    r.hi[dir.axis] = 1;
  } else {
    r.lo[dir.axis] = 1 + f.cells();
    r.hi[dir.axis] = 2 + f.cells();
  }
  return r;
}

/// Splits a face range into r^(D-1) segments, dividing each interface axis
/// into r equal pieces. Segment index is lexicographic over the interface
/// axes with the lowest-numbered axis fastest.
template <int D>
std::vector<CellRange<D>> split_interface(const CellRange<D>& range, Direction dir, int r) {
  auto tax = Blockforest<D>::interface_axes(dir);
  for (int t = 0; t < D - 1; ++t)
    if (range.extent(tax[t]) % r != 0)
      throw std::invalid_argument("split_interface: extent not divisible by r");

  int count = 1;
  for (int t = 0; t < D - 1; ++t) count *= r;
  std::vector<CellRange<D>> out(count);
  for (int s = 0; s < count; ++s) {
    CellRange<D> seg = range;
    int bits = s;
    for (int t = 0; t < D - 1; ++t) {
      int piece = bits % r;
      bits /= r;
      int w = range.extent(tax[t]) / r;
      seg.lo[tax[t]] = range.lo[tax[t]] + piece * w;
      seg.hi[tax[t]] = seg.lo[tax[t]] + w;
    }
    out[s] = seg;
  }
  return out;
}

/// Ghost range a received message is unpacked into: the full ghost face for
/// same-level and coarse-to-fine reception, or the segment_index-th
/// sub-rectangle of the ghost face for fine-to-coarse reception.
template <int D>
CellRange<D> ghost_segment_range(const BlockField<D>& f, Direction dir, RefineCase kase,
                                 int segment_index) {
  CellRange<D> face = ghost_face_range(f, dir);
  if (kase != RefineCase::f2c) {
    if (segment_index != 0)
      throw std::invalid_argument("ghost_segment_range: segment must be 0 for this case");
    return face;
  }
  auto segments = split_interface(face, dir, Blockforest<D>::refinement_ratio);
  if (segment_index < 0 || segment_index >= static_cast<int>(segments.size()))
    throw std::invalid_argument("ghost_segment_range: invalid segment index");
  return segments[segment_index];
}

}  // namespace octmg
