#pragma once

#include <cmath>
#include <functional>

#include "octmg/comm.hpp"

namespace octmg {

struct SolverConfig {
  real omega = 0.8;
  int nu1 = 3;
  int nu2 = 3;
  int coarse_iters = 256;
  int max_cycles = 35;
  real residual_tol = 1e-16;
  SchemeOrder scheme = SchemeOrder::quadratic;
  int n_ranks = 1;
  int workers = 1;

  void validate() const {
    if (!(omega > 0.0 && omega <= 1.0)) throw std::invalid_argument("omega must be in (0, 1]");
    if (nu1 < 0 || nu2 < 0) throw std::invalid_argument("smoothing sweep counts must be >= 0");
    if (coarse_iters < 0) throw std::invalid_argument("coarse_iters must be >= 0");
    if (max_cycles < 1) throw std::invalid_argument("max_cycles must be >= 1");
    if (n_ranks < 1) throw std::invalid_argument("n_ranks must be >= 1");
    if (workers < 1) throw std::invalid_argument("workers must be >= 1");
  }
};

/// Dirichlet boundary data as a function of physical coordinates.
template <int D>
struct BoundarySpec {
  std::function<real(const Point<D>&)> g;
};

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-block field stacks for solution, right-hand side, residual and
/// scratch, over mg levels 0 (finest) .. levels()-1 (coarsest, 4 cells per
/// dimension). Exchange plans are built once per level and reused.
template <int D>
class MgHierarchy {
 public:
  explicit MgHierarchy(const Blockforest<D>& forest) : m_forest(&forest) {
    int n = forest.cells_per_block();
    if ((n & (n - 1)) != 0 || n < 4)
      throw std::invalid_argument("MgHierarchy: block size must be a power of two >= 4");
    m_levels = 1;
    while ((n >> m_levels) >= 4) ++m_levels;

    auto alloc = [&](std::vector<std::vector<BlockField<D>>>& stack) {
      stack.resize(m_levels);
      for (int l = 0; l < m_levels; ++l) {
        stack[l].reserve(forest.leaf_count());
        for (const auto& leaf : forest.leaves()) stack[l].emplace_back(leaf, n, l);
      }
    };
    alloc(m_u);
    alloc(m_f);
    alloc(m_res);
    alloc(m_tmp);
    m_plans.reserve(m_levels);
    for (int l = 0; l < m_levels; ++l) m_plans.push_back(build_plan(*m_forest, l));
  }

  const Blockforest<D>& forest() const { return *m_forest; }
  int levels() const { return m_levels; }
  int coarsest() const { return m_levels - 1; }

  std::vector<BlockField<D>>& u(int l) { return m_u[l]; }
  std::vector<BlockField<D>>& f(int l) { return m_f[l]; }
  std::vector<BlockField<D>>& res(int l) { return m_res[l]; }
  std::vector<BlockField<D>>& tmp(int l) { return m_tmp[l]; }
  const std::vector<BlockField<D>>& u(int l) const { return m_u[l]; }
  const std::vector<BlockField<D>>& f(int l) const { return m_f[l]; }
  const std::vector<BlockField<D>>& res(int l) const { return m_res[l]; }

  const ExchangePlan<D>& plan(int l) const { return m_plans[l]; }

 private:
  const Blockforest<D>* m_forest;
  int m_levels = 0;
  std::vector<std::vector<BlockField<D>>> m_u, m_f, m_res, m_tmp;
  std::vector<ExchangePlan<D>> m_plans;
};

/// out = A u on the interior, with A the negative Laplacian 5/7-point
/// stencil; ghosts supply the neighbor values at block faces.
template <int D>
void apply_laplacian(const BlockField<D>& u, const Geometry<D>& geom, BlockField<D>& out) {
  std::array<real, D> inv_h2{};
  real diag = 0.0;
  for (int d = 0; d < D; ++d) {
    inv_h2[d] = 1.0 / (geom.h[d] * geom.h[d]);
    diag += 2.0 * inv_h2[d];
  }
  const auto src = u.data();
  auto dst = out.data();
  for_each_cell(interior_range(u), [&](const IVec<D>& idx) {
    std::size_t lin = u.linear_index(idx);
    real v = diag * src[lin];
    for (int d = 0; d < D; ++d)
      v -= inv_h2[d] * (src[lin - u.stride(d)] + src[lin + u.stride(d)]);
    dst[lin] = v;
  });
}

template <int D>
BlockField<D> apply_laplacian(const BlockField<D>& u, const Geometry<D>& geom) {
  BlockField<D> out(u.block(), u.cells_per_block_finest(), u.mg_level());
  apply_laplacian(u, geom, out);
  return out;
}

/// One damped Jacobi update: out = u + omega * (f - A u) / diag(A).
template <int D>
void jacobi_sweep(const BlockField<D>& u, const BlockField<D>& f, const Geometry<D>& geom,
                  real omega, BlockField<D>& out) {
  std::array<real, D> inv_h2{};
  real diag = 0.0;
  for (int d = 0; d < D; ++d) {
    inv_h2[d] = 1.0 / (geom.h[d] * geom.h[d]);
    diag += 2.0 * inv_h2[d];
  }
  const real scale = omega / diag;
  const auto src = u.data();
  const auto rhs = f.data();
  auto dst = out.data();
  for_each_cell(interior_range(u), [&](const IVec<D>& idx) {
    std::size_t lin = u.linear_index(idx);
    real au = diag * src[lin];
    for (int d = 0; d < D; ++d)
      au -= inv_h2[d] * (src[lin - u.stride(d)] + src[lin + u.stride(d)]);
    dst[lin] = src[lin] + scale * (rhs[lin] - au);
  });
}

/// Fills ghost faces on the physical boundary: ghost = 2 g(face point) -
/// interior neighbor, the second-order Dirichlet rule for cell-centered
/// grids. Pass no boundary function for the homogeneous coarse-level case.
template <int D>
void set_boundary_ghosts(const Blockforest<D>& forest, std::vector<BlockField<D>>& fields,
                         int mg_level, const BoundarySpec<D>* spec) {
  const auto& leaves = forest.leaves();
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    BlockField<D>& f = fields[i];
    Geometry<D> geom = geometry(forest, leaves[i], mg_level);
    for (Direction dir : all_directions<D>()) {
      if (!forest.face_on_domain_boundary(leaves[i], dir)) continue;
      real face_coord = geom.origin[dir.axis];
      if (dir.sign > 0) face_coord += geom.h[dir.axis] * static_cast<real>(f.cells());
      for_each_cell(ghost_face_range(f, dir), [&](const IVec<D>& ghost) {
        IVec<D> inner = ghost;
        inner[dir.axis] -= dir.sign;
        real bc = 0.0;
        if (spec != nullptr) {
          Point<D> p = geom.cell_center(ghost);
          p[dir.axis] = face_coord;
          bc = spec->g(p);
        }
        f.at(ghost) = 2.0 * bc - f.at(inner);
      });
    }
  }
}

/// Restriction: each coarse interior cell is the arithmetic average of its
/// 2^D children. Intra-block only.
template <int D>
void restrict_block(const BlockField<D>& fine, BlockField<D>& coarse) {
  const real w = 1.0 / static_cast<real>(1 << D);
  for_each_cell(interior_range(coarse), [&](const IVec<D>& ic) {
    CellRange<D> children;
    for (int d = 0; d < D; ++d) {
      children.lo[d] = 2 * ic[d] - 1;
      children.hi[d] = children.lo[d] + 2;
    }
    real sum = 0.0;
    for_each_cell(children, [&](const IVec<D>& fc) { sum += fine.at(fc); });
    coarse.at(ic) = w * sum;
  });
}

/// Prolongation: piecewise-constant injection of the coarse value, added to
/// every child cell. Intra-block only.
template <int D>
void prolong_block(const BlockField<D>& coarse, BlockField<D>& fine) {
  for_each_cell(interior_range(fine), [&](const IVec<D>& fc) {
    IVec<D> ic;
    for (int d = 0; d < D; ++d) ic[d] = (fc[d] + 1) / 2;
    fine.at(fc) += coarse.at(ic);
  });
}

namespace detail {

/// Refreshes all ghosts of the given fields at one mg level: inter-block
/// exchange plus physical boundary ghosts. Performed before every stencil
/// application. Coarse levels solve correction equations and use
/// homogeneous boundary data.
template <int D>
void refresh_ghosts(MgHierarchy<D>& hier, std::vector<BlockField<D>>& fields, int level,
                    const SolverConfig& cfg, const BoundarySpec<D>* bc, VolumeReport& vol) {
  const auto& forest = hier.forest();
  vol.merge(exchange<D>(forest, fields, hier.plan(level), cfg.scheme, forest.owners(),
                        cfg.n_ranks, cfg.workers));
  set_boundary_ghosts(forest, fields, level, level == 0 ? bc : nullptr);
}

template <int D>
void smooth(MgHierarchy<D>& hier, int level, int sweeps, const SolverConfig& cfg,
            const BoundarySpec<D>* bc, VolumeReport& vol) {
  const auto& forest = hier.forest();
  auto n_blocks = static_cast<long long>(forest.leaf_count());
  for (int s = 0; s < sweeps; ++s) {
    refresh_ghosts(hier, hier.u(level), level, cfg, bc, vol);
    parallel_for(n_blocks, cfg.workers, [&](long long i) {
      Geometry<D> geom = geometry(forest, forest.leaves()[i], level);
      jacobi_sweep(hier.u(level)[i], hier.f(level)[i], geom, cfg.omega, hier.tmp(level)[i]);
    });
    std::swap(hier.u(level), hier.tmp(level));
  }
}

template <int D>
void compute_residual(MgHierarchy<D>& hier, int level, const SolverConfig& cfg,
                      const BoundarySpec<D>* bc, VolumeReport& vol) {
  const auto& forest = hier.forest();
  refresh_ghosts(hier, hier.u(level), level, cfg, bc, vol);
  parallel_for(static_cast<long long>(forest.leaf_count()), cfg.workers, [&](long long i) {
    Geometry<D> geom = geometry(forest, forest.leaves()[i], level);
    const BlockField<D>& u = hier.u(level)[i];
    BlockField<D>& r = hier.res(level)[i];
    apply_laplacian(u, geom, r);
    const auto rhs = hier.f(level)[i].data();
    auto res = r.data();
    for_each_cell(interior_range(u), [&](const IVec<D>& idx) {
      std::size_t lin = u.linear_index(idx);
      res[lin] = rhs[lin] - res[lin];
    });
  });
}

/// Unweighted discrete L2 norm of the residual over all interior cells.
/// Per-block partial sums are reduced in leaf order so the result is
/// independent of the worker count.
template <int D>
real residual_norm(MgHierarchy<D>& hier, int level, const SolverConfig& cfg) {
  const auto& forest = hier.forest();
  std::vector<real> partial(forest.leaf_count(), 0.0);
  parallel_for(static_cast<long long>(forest.leaf_count()), cfg.workers, [&](long long i) {
    const BlockField<D>& r = hier.res(level)[i];
    real sum = 0.0;
    const auto data = r.data();
    for_each_cell(interior_range(r), [&](const IVec<D>& idx) {
      real v = data[r.linear_index(idx)];
      sum += v * v;
    });
    partial[i] = sum;
  });
  real total = 0.0;
  for (real p : partial) total += p;
  return std::sqrt(total);
}

template <int D>
void v_cycle_level(MgHierarchy<D>& hier, int level, const SolverConfig& cfg,
                   const BoundarySpec<D>* bc, VolumeReport& vol) {
  const auto& forest = hier.forest();
  if (level == hier.coarsest()) {
    smooth(hier, level, cfg.coarse_iters, cfg, bc, vol);
    return;
  }
  smooth(hier, level, cfg.nu1, cfg, bc, vol);
  compute_residual(hier, level, cfg, bc, vol);
  parallel_for(static_cast<long long>(forest.leaf_count()), cfg.workers, [&](long long i) {
    restrict_block(hier.res(level)[i], hier.f(level + 1)[i]);
    hier.u(level + 1)[i].fill(0.0);
  });
  v_cycle_level(hier, level + 1, cfg, bc, vol);
  parallel_for(static_cast<long long>(forest.leaf_count()), cfg.workers, [&](long long i) {
    prolong_block(hier.u(level + 1)[i], hier.u(level)[i]);
  });
  smooth(hier, level, cfg.nu2, cfg, bc, vol);
}

}  // namespace detail

/// One V(nu1, nu2) cycle starting from the finest level.
template <int D>
void v_cycle(MgHierarchy<D>& hier, const SolverConfig& cfg, const BoundarySpec<D>& bc,
             VolumeReport& vol) {
  detail::v_cycle_level(hier, 0, cfg, &bc, vol);
}

template <int D>
struct SolveResult {
  int cycles = 0;
  bool converged = false;
  std::vector<real> residual_history;  // [0] is the initial residual norm
  VolumeReport volume;
};

/// Runs V-cycles until the residual norm falls below the threshold or the
/// cycle limit is reached. Aborts with a diagnostic if the residual grows
/// tenfold above its initial value.
template <int D>
SolveResult<D> solve(MgHierarchy<D>& hier, const SolverConfig& cfg, const BoundarySpec<D>& bc) {
  cfg.validate();
  SolveResult<D> result;
  detail::compute_residual(hier, 0, cfg, &bc, result.volume);
  real r0 = detail::residual_norm(hier, 0, cfg);
  result.residual_history.push_back(r0);
  if (r0 < cfg.residual_tol) {
    result.converged = true;
    return result;
  }
  for (int cycle = 1; cycle <= cfg.max_cycles; ++cycle) {
    v_cycle(hier, cfg, bc, result.volume);
    detail::compute_residual(hier, 0, cfg, &bc, result.volume);
    real r = detail::residual_norm(hier, 0, cfg);
    result.residual_history.push_back(r);
    result.cycles = cycle;
    if (r > 10.0 * r0)
      throw DivergenceError("solver diverged: residual " + std::to_string(r) + " vs initial " +
                            std::to_string(r0));
    if (r < cfg.residual_tol) {
      result.converged = true;
      break;
    }
  }
  return result;
}

struct ErrorNorms {
  real volume_weighted = 0.0;  // sqrt(sum V_cell e^2), comparable across meshes
  real plain = 0.0;            // sqrt(mean e^2), unweighted cell average
};

/// L2 norms of u - exact sampled at cell centers over all blocks.
template <int D, class Exact>
ErrorNorms l2_error(const Blockforest<D>& forest, const std::vector<BlockField<D>>& u,
                    Exact&& exact) {
  real weighted = 0.0, plain = 0.0;
  long long cells = 0;
  const auto& leaves = forest.leaves();
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    Geometry<D> geom = geometry(forest, leaves[i], u[i].mg_level());
    real v_cell = 1.0;
    for (int d = 0; d < D; ++d) v_cell *= geom.h[d];
    for_each_cell(interior_range(u[i]), [&](const IVec<D>& idx) {
      real e = u[i].at(idx) - exact(geom.cell_center(idx));
      weighted += v_cell * e * e;
      plain += e * e;
      ++cells;
    });
  }
  return {std::sqrt(weighted), std::sqrt(plain / static_cast<real>(cells))};
}

/// Grid convergence factor between successive resolutions: the ratio of the
/// halved-spacing error norm to the current one.
inline real grid_convergence(real e_h, real e_h2) {
  if (e_h == 0.0) throw std::invalid_argument("grid_convergence: zero reference error");
  return e_h2 / e_h;
}

}  // namespace octmg
