#pragma once

#include <functional>

#include "dfindex/field_program.hpp"
#include "dfindex/jet.hpp"

namespace dfindex {

using JetFn = std::function<Jet2(const Complex2Point&)>;

/// Selects one entry of the second-derivative blocks of a Jet2.
struct SecondEntry {
  enum class Block { mixed, holomorphic };
  Block block = Block::mixed;
  int i = 0;
  int j = 0;
};

/// Holomorphic directional derivatives V = sum V_k d/dz_k of both
/// second-derivative blocks.
struct SecondBlocksDerivative {
  Mat2c mix = Mat2c::Zero();
  Mat2c hol = Mat2c::Zero();
};

/// Smallest admissible finite-difference step at p.
double min_fd_step(const Complex2Point& p);

/// Default third-derivative step 1e-4 * (1 + |p|).
double default_third_step(const Complex2Point& p);

/// Central differences of the second blocks of `jet` along the real
/// directions underlying V, with one Richardson pass over steps h and h/2.
/// Throws StepError if h is below min_fd_step(p).
SecondBlocksDerivative directional_second_blocks(const JetFn& jet, const Complex2Point& p,
                                                 const Vec2c& V, double h);

cplx third_directional(const FieldProgram& f, const Complex2Point& p, const Vec2c& V,
                       SecondEntry target, double h);

/// Real directions (u, v) with V = 1/2 (D_u + i D_v) on functions.
void holomorphic_direction_pair(const Vec2c& V, Vec4& u, Vec4& v);

}  // namespace dfindex
