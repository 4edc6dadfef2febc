#pragma once

#include <array>
#include <cmath>
#include <type_traits>
#include <vector>

#include "octmg/field.hpp"

namespace octmg {

/// Coarse-to-fine scheme order, named by the number of Lagrange bases per
/// dimension. Fine-to-coarse is always the linear (equal-weight) average.
enum class SchemeOrder { constant = 1, linear = 2, quadratic = 3 };

constexpr int base_count(SchemeOrder order) { return static_cast<int>(order); }

inline const char* scheme_name(SchemeOrder order) {
  switch (order) {
    case SchemeOrder::constant: return "constant";
    case SchemeOrder::linear: return "linear";
    default: return "quadratic";
  }
}

struct LagrangeWeights {
  int count = 0;
  std::array<real, 3> w{};
};

/// Weights of the Lagrange interpolation polynomial through `positions`,
/// evaluated at x: w_i(x) = prod_{j != i} (x - x_j) / (x_i - x_j).
/// The weighted sum of base values reproduces polynomials up to degree
/// count-1 exactly; the weights always sum to one.
inline LagrangeWeights lagrange_weights(std::span<const real> positions, real x) {
  LagrangeWeights lw;
  lw.count = static_cast<int>(positions.size());
  if (lw.count < 1 || lw.count > 3)
    throw std::invalid_argument("lagrange_weights: need 1 to 3 positions");
  for (int i = 0; i < lw.count; ++i) {
    real w = 1.0;
    for (int j = 0; j < lw.count; ++j) {
      if (j == i) continue;
      real denom = positions[i] - positions[j];
      if (denom == 0.0) throw std::invalid_argument("lagrange_weights: duplicate positions");
      w *= (x - positions[j]) / denom;
    }
    lw.w[i] = w;
  }
  return lw;
}

/// One extra-/interpolation axis: up to three base positions (units of the
/// local cell width) with their values.
struct AxisBases {
  int count = 0;
  std::array<real, 3> positions{};
  std::array<real, 3> values{};

  real evaluate(real x) const {
    LagrangeWeights lw = lagrange_weights({positions.data(), static_cast<std::size_t>(count)}, x);
    real v = 0.0;
    for (int i = 0; i < count; ++i) v += lw.w[i] * values[i];
    return v;
  }
};

/// Communication direction plus the orthogonal directions spanned by the
/// remaining axes: O = C \ {d_comm, -d_comm}. The 2D orthogonal axis is the
/// lowest-numbered non-communication axis, matching the segment-index
/// convention; plus/minus follow the upwind/downwind naming.
template <int D>
struct OrthogonalFrame {
  Direction d_comm{};
  int comm_axis = 0;
  int o2d_axis = 1;
  int o3d_axis = 2;  // 3D only

  Direction o2d_plus() const { return {o2d_axis, +1}; }
  Direction o2d_minus() const { return {o2d_axis, -1}; }
  Direction o3d_plus() const { return {o3d_axis, +1}; }
  Direction o3d_minus() const { return {o3d_axis, -1}; }
};

template <int D>
OrthogonalFrame<D> make_frame(Direction d_comm) {
  OrthogonalFrame<D> f;
  f.d_comm = d_comm;
  f.comm_axis = d_comm.axis;
  auto tax = Blockforest<D>::interface_axes(d_comm);
  f.o2d_axis = tax[0];
  if constexpr (D == 3) f.o3d_axis = tax[1];
  return f;
}

/// Remapping rule for orthogonal bases: if the neighbor of `cell` in
/// direction o lies outside the interior, substitute the interior cell at
/// -2*o. With at least three cells per dimension the result is always an
/// interior location.
template <int D>
IVec<D> remap_orthogonal(const std::type_identity_t<IVec<D>>& cell, Direction o,
                         const CellRange<D>& interior) {
  IVec<D> off = unit_offset<D>(o);
  if (contains(interior, add(cell, off))) return off;
  off[o.axis] = -2 * o.sign;
  return off;
}

namespace detail {

/// Base offsets along one orthogonal axis for a cell at raw index `raw`
/// (interior spans [1, n]). Positions in cell widths equal the offsets.
/// Quadratic uses the three canonical sets {-1,0,1}, {0,1,2}, {-2,-1,0}
/// depending on which neighbor would fall into the ghost layer; linear uses
/// the downwind pair {-1,0} and falls back to {0,1} at the downwind edge.
struct TransverseBases {
  int count = 0;
  std::array<int, 3> offsets{};
};

inline TransverseBases transverse_bases(SchemeOrder order, int raw, int n) {
  TransverseBases tb;
  switch (order) {
    case SchemeOrder::constant:
      tb.count = 1;
      tb.offsets = {0, 0, 0};
      break;
    case SchemeOrder::linear:
      tb.count = 2;
      tb.offsets = raw == 1 ? std::array<int, 3>{0, 1, 0} : std::array<int, 3>{-1, 0, 0};
      break;
    case SchemeOrder::quadratic:
      tb.count = 3;
      if (raw == 1)
        tb.offsets = {0, 1, 2};
      else if (raw == n)
        tb.offsets = {-2, -1, 0};
      else
        tb.offsets = {-1, 0, 1};
      break;
  }
  return tb;
}

/// Target locations of the two fine values along an orthogonal axis,
/// relative to the coarse cell center in units of the coarse cell width.
inline constexpr real fine_target_down = -0.25;
inline constexpr real fine_target_up = +0.25;

/// Depth of the fine ghost cell centers beyond the interface cell center,
/// on an axis oriented into the block (bases at {0, 1, 2, ...}).
inline constexpr real fine_target_depth = -0.25;

}  // namespace detail

/// First-dimension extrapolation: from the interface cell and its neighbors
/// in the inverse communication direction, extrapolate to the fine ghost
/// depth a quarter cell width beyond the interface cell center.
template <int D>
real c2f_first_dim_base(const BlockField<D>& f, const std::type_identity_t<IVec<D>>& cell,
                        Direction d_comm,
                        SchemeOrder order) {
  IVec<D> into = unit_offset<D>(opposite(d_comm));
  AxisBases ab;
  ab.count = base_count(order);
  IVec<D> idx = cell;
  for (int k = 0; k < ab.count; ++k) {
    ab.positions[k] = static_cast<real>(k);
    ab.values[k] = f.at(idx);
    idx = add(idx, into);
  }
  if (ab.count == 1) return ab.values[0];
  return ab.evaluate(detail::fine_target_depth);
}

/// The r^(D-1) fine ghost values produced by one coarse interface cell,
/// in packing order: 2D [downwind, upwind] along the 2D orthogonal axis;
/// 3D [dd, ud, du, uu] with the 2D orthogonal state varying fastest.
template <int D>
std::array<real, (std::size_t{1} << (D - 1))> c2f_compute_fine_values(
    const BlockField<D>& f, const std::type_identity_t<IVec<D>>& cell,
    const OrthogonalFrame<D>& frame, SchemeOrder order) {
  const int n = f.cells();
  std::array<real, (std::size_t{1} << (D - 1))> out{};

  auto yb = detail::transverse_bases(order, cell[frame.o2d_axis], n);

  if constexpr (D == 2) {
    AxisBases second;
    second.count = yb.count;
    for (int k = 0; k < yb.count; ++k) {
      IVec<D> base = cell;
      base[frame.o2d_axis] += yb.offsets[k];
      second.positions[k] = static_cast<real>(yb.offsets[k]);
      second.values[k] = c2f_first_dim_base(f, base, frame.d_comm, order);
    }
    if (second.count == 1) {
      out[0] = out[1] = second.values[0];
    } else {
      out[0] = second.evaluate(detail::fine_target_down);
      out[1] = second.evaluate(detail::fine_target_up);
    }
  } else {
    auto zb = detail::transverse_bases(order, cell[frame.o3d_axis], n);
    AxisBases down_axis, up_axis;
    down_axis.count = up_axis.count = zb.count;
    for (int s = 0; s < zb.count; ++s) {
      // 1D extrapolated bases of this slice, at diagonals of the 2D
      // orthogonal offsets, then the slice's downwind/upwind 2D bases
      AxisBases second;
      second.count = yb.count;
      for (int k = 0; k < yb.count; ++k) {
        IVec<D> base = cell;
        base[frame.o2d_axis] += yb.offsets[k];
        base[frame.o3d_axis] += zb.offsets[s];
        second.positions[k] = static_cast<real>(yb.offsets[k]);
        second.values[k] = c2f_first_dim_base(f, base, frame.d_comm, order);
      }
      real down, up;
      if (second.count == 1) {
        down = up = second.values[0];
      } else {
        down = second.evaluate(detail::fine_target_down);
        up = second.evaluate(detail::fine_target_up);
      }
      down_axis.positions[s] = up_axis.positions[s] = static_cast<real>(zb.offsets[s]);
      down_axis.values[s] = down;
      up_axis.values[s] = up;
    }
    if (down_axis.count == 1) {
      out[0] = down_axis.values[0];
      out[1] = up_axis.values[0];
      out[2] = down_axis.values[0];
      out[3] = up_axis.values[0];
    } else {
      out[0] = down_axis.evaluate(detail::fine_target_down);
      out[1] = up_axis.evaluate(detail::fine_target_down);
      out[2] = down_axis.evaluate(detail::fine_target_up);
      out[3] = up_axis.evaluate(detail::fine_target_up);
    }
  }
  return out;
}

/// Ghost-cell offsets the packed fine values are unpacked into, relative to
/// the iteration cell when sweeping the fine ghost face with a step of r in
/// each interface dimension.
template <int D>
std::array<IVec<D>, (std::size_t{1} << (D - 1))> c2f_unpack_offsets(
    const OrthogonalFrame<D>& frame, int r = 2) {
  if (r != 2) throw std::invalid_argument("c2f_unpack_offsets: only r = 2 is supported");
  std::array<IVec<D>, (std::size_t{1} << (D - 1))> out{};
  out[1][frame.o2d_axis] = 1;
  if constexpr (D == 3) {
    out[2][frame.o3d_axis] = 1;
    out[3][frame.o2d_axis] = 1;
    out[3][frame.o3d_axis] = 1;
  }
  return out;
}

/// Equal-weight average of the r^D fine cells overlapping one coarse ghost
/// cell: weight 0.25 in 2D, 0.125 in 3D.
inline real f2c_reduce(std::span<const real> fine_values) {
  const std::size_t expected = fine_values.size();
  if (expected != 4 && expected != 8)
    throw std::invalid_argument("f2c_reduce: expected r^D values (4 in 2D, 8 in 3D)");
  real sum = 0.0;
  for (real v : fine_values) sum += v;
  return sum / static_cast<real>(expected);
}

/// Packs a fine block's contribution to a coarse neighbor: one value per
/// coarse ghost cell, iterating the block interface with a step of r per
/// dimension and averaging each r^D group of interior cells (the r layers
/// deep along the inverse direction included). Appends to `out` in the
/// segment-index axis order.
template <int D>
void f2c_pack(const BlockField<D>& f, Direction dir, std::vector<real>& out) {
  constexpr int r = 2;
  const int n = f.cells();
  if (n % r != 0) throw std::invalid_argument("f2c_pack: cells per dimension not divisible by r");

  CellRange<D> groups = interface_range(f, dir);
  for (int t = 0; t < D; ++t)
    if (t != dir.axis) groups.step[t] = r;
  // group base: also step r cells deep along -dir
  int depth_lo = dir.sign < 0 ? 1 : n - r + 1;

  std::array<real, (std::size_t{1} << D)> vals{};
  for_each_cell(groups, [&](const IVec<D>& base) {
    int k = 0;
    CellRange<D> box;
    for (int d = 0; d < D; ++d) {
      box.lo[d] = d == dir.axis ? depth_lo : base[d];
      box.hi[d] = box.lo[d] + r;
    }
    for_each_cell(box, [&](const IVec<D>& c) { vals[k++] = f.at(c); });
    out.push_back(f2c_reduce({vals.data(), static_cast<std::size_t>(k)}));
  });
}

template <int D>
std::vector<real> f2c_pack(const BlockField<D>& f, Direction dir) {
  std::vector<real> out;
  f2c_pack(f, dir, out);
  return out;
}

}  // namespace octmg
