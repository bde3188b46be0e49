#include "dfindex/derivatives.hpp"

#include <cmath>
#include <limits>

#include "dfindex/errors.hpp"

namespace dfindex {

double min_fd_step(const Complex2Point& p) {
  return 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, p.norm());
}

double default_third_step(const Complex2Point& p) { return 1e-4 * (1.0 + p.norm()); }

void holomorphic_direction_pair(const Vec2c& V, Vec4& u, Vec4& v) {
  for (int k = 0; k < 2; ++k) {
    const double a = V(k).real(), b = V(k).imag();
    u[2 * k] = a;
    u[2 * k + 1] = b;
    v[2 * k] = b;
    v[2 * k + 1] = -a;
  }
}

namespace {

// Central difference of the blocks along real direction dir with step h.
SecondBlocksDerivative central(const JetFn& jet, const Vec4& x, const Vec4& dir, double h) {
  const Jet2 plus = jet(Complex2Point::from_real(x + h * dir));
  const Jet2 minus = jet(Complex2Point::from_real(x - h * dir));
  SecondBlocksDerivative d;
  d.mix = (plus.h_mix - minus.h_mix) / (2.0 * h);
  d.hol = (plus.h_hol - minus.h_hol) / (2.0 * h);
  return d;
}

SecondBlocksDerivative richardson(const JetFn& jet, const Vec4& x, const Vec4& dir, double h) {
  const SecondBlocksDerivative coarse = central(jet, x, dir, h);
  const SecondBlocksDerivative fine = central(jet, x, dir, 0.5 * h);
  SecondBlocksDerivative d;
  d.mix = (4.0 * fine.mix - coarse.mix) / 3.0;
  d.hol = (4.0 * fine.hol - coarse.hol) / 3.0;
  return d;
}

}  // namespace

SecondBlocksDerivative directional_second_blocks(const JetFn& jet, const Complex2Point& p,
                                                 const Vec2c& V, double h) {
  if (!(h >= min_fd_step(p))) throw StepError("finite-difference step below resolution");
  Vec4 u, v;
  holomorphic_direction_pair(V, u, v);
  const Vec4 x = p.real();
  const SecondBlocksDerivative du = richardson(jet, x, u, h);
  const SecondBlocksDerivative dv = richardson(jet, x, v, h);
  static constexpr cplx I{0.0, 1.0};
  SecondBlocksDerivative d;
  d.mix = 0.5 * (du.mix + I * dv.mix);
  d.hol = 0.5 * (du.hol + I * dv.hol);
  return d;
}

cplx third_directional(const FieldProgram& f, const Complex2Point& p, const Vec2c& V,
                       SecondEntry target, double h) {
  const JetFn jet = [&f](const Complex2Point& q) { return jet_eval(f, q); };
  const SecondBlocksDerivative d = directional_second_blocks(jet, p, V, h);
  const Mat2c& block = target.block == SecondEntry::Block::mixed ? d.mix : d.hol;
  return block(target.i, target.j);
}

}  // namespace dfindex
