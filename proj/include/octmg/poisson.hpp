#pragma once

#include <numbers>

#include "octmg/mg.hpp"

namespace octmg {

/// Dirichlet Poisson benchmark: -lap(u) = f on the domain with u = g on the
/// boundary. The stock problem uses a harmonic product of sines and a
/// hyperbolic sine, so f vanishes and all error stems from the
/// discretization and the refinement-interface interpolation.
template <int D>
struct PoissonProblem {
  std::function<real(const Point<D>&)> exact;
  std::function<real(const Point<D>&)> rhs;
};

template <int D>
PoissonProblem<D> poisson_sinh_problem() {
  using std::numbers::pi;
  PoissonProblem<D> p;
  if constexpr (D == 3) {
    p.exact = [](const Point<3>& x) {
      return std::sin(pi * x[0]) * std::sin(pi * x[1]) * std::sinh(std::sqrt(2.0) * pi * x[2]);
    };
  } else {
    p.exact = [](const Point<2>& x) { return std::sin(pi * x[0]) * std::sinh(pi * x[1]); };
  }
  p.rhs = [](const Point<D>&) { return 0.0; };
  return p;
}

/// Sets up the finest level: zero initial guess, right-hand side sampled at
/// cell centers.
template <int D>
void assemble_problem(MgHierarchy<D>& hier, const PoissonProblem<D>& problem) {
  const auto& forest = hier.forest();
  const auto& leaves = forest.leaves();
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    hier.u(0)[i].fill(0.0);
    Geometry<D> geom = geometry(forest, leaves[i], 0);
    BlockField<D>& f = hier.f(0)[i];
    for_each_cell(interior_range(f),
                  [&](const IVec<D>& idx) { f.at(idx) = problem.rhs(geom.cell_center(idx)); });
  }
}

/// Unit cube split twice globally, then once more in the central
/// [0.25, 0.75]^3 region: 56 leaves on level 2 around 64 on level 3.
inline Blockforest<3> center_refined_cube(int cells_per_block) {
  RefinementSpec<3> spec;
  spec.push_back(RefineStep<3>::refine_all());
  spec.push_back(RefineStep<3>::refine_all());
  spec.push_back(RefineStep<3>::refine_region({{0.25, 0.25, 0.25}, {0.75, 0.75, 0.75}}));
  return build_forest<3>({1, 1, 1}, {{0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}}, cells_per_block, spec);
}

/// Two root blocks side by side on [0,2]x[0,1]; the left one refined once,
/// giving four fine leaves against one coarse leaf.
inline Blockforest<2> refined_pair(int cells_per_block) {
  RefinementSpec<2> spec;
  spec.push_back(RefineStep<2>::refine_region({{0.0, 0.0}, {1.0, 1.0}}));
  return build_forest<2>({2, 1}, {{0.0, 0.0}, {2.0, 1.0}}, cells_per_block, spec);
}

/// 2x2 root grid on the unit square, refined globally once and then twice
/// more toward the lower-left corner.
inline Blockforest<2> corner_refined_square(int cells_per_block) {
  RefinementSpec<2> spec;
  spec.push_back(RefineStep<2>::refine_all());
  spec.push_back(RefineStep<2>::refine_region({{0.0, 0.0}, {0.5, 0.5}}));
  spec.push_back(RefineStep<2>::refine_region({{0.0, 0.0}, {0.25, 0.25}}));
  return build_forest<2>({2, 2}, {{0.0, 0.0}, {1.0, 1.0}}, cells_per_block, spec);
}

}  // namespace octmg
