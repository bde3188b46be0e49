#pragma once

// Independent oracles shared by the unit tests and the acceptance binary.
// Nothing here calls into the derivative code under test: finite differences
// use FieldProgram::value only, and the Wirtinger conversion is spelled out.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <random>
#include <vector>

#include "dfindex/certifier.hpp"
#include "dfindex/derivatives.hpp"
#include "dfindex/domain.hpp"
#include "dfindex/field_program.hpp"
#include "dfindex/frame.hpp"
#include "dfindex/jet.hpp"

namespace oracle {

using dfindex::cplx;
using dfindex::Complex2Point;
using dfindex::FieldProgram;
using dfindex::Jet2;
using dfindex::Vec4;

// ---------------------------------------------------------------- programs

/// Random expression trees whose guarded primitives stay inside their
/// domains on all of C^2.
class ProgramGen {
 public:
  explicit ProgramGen(std::uint64_t seed) : rng_(seed) {}

  FieldProgram make(int depth) {
    std::uniform_int_distribution<int> pick(0, depth <= 0 ? 5 : 15);
    const int k = pick(rng_);
    switch (k) {
      case 0: return FieldProgram::re_z();
      case 1: return FieldProgram::im_z();
      case 2: return FieldProgram::re_w();
      case 3: return FieldProgram::im_w();
      case 4: return pick_leaf_sq();
      case 5: return FieldProgram::constant(coef());
      case 6: return make(depth - 1) + make(depth - 1);
      case 7: return make(depth - 1) - make(depth - 1);
      case 8: return make(depth - 1) * make(depth - 1);
      case 9: {
        const FieldProgram b = make(depth - 1);
        return make(depth - 1) / (FieldProgram::constant(0.5 + unit()) + b * b);
      }
      case 10: return exp(0.5 * make(depth - 1));
      case 11: {
        const FieldProgram a = make(depth - 1);
        return log(FieldProgram::constant(0.5 + unit()) + a * a);
      }
      case 12: {
        const FieldProgram a = make(depth - 1);
        return pow(FieldProgram::constant(1.0) + a * a, -1.5 + 4.0 * unit());
      }
      case 13: return sin(make(depth - 1));
      case 14: return cos(make(depth - 1));
      default: {
        dfindex::CutoffShape s{0.2 * unit(), 0.5 + unit(), 0.5 + unit()};
        return cutoff(make(depth - 1), s);
      }
    }
  }

  Complex2Point point(double r = 1.0) {
    std::uniform_real_distribution<double> u(-r, r);
    return {{u(rng_), u(rng_)}, {u(rng_), u(rng_)}};
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  double unit() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }
  double coef() { return std::uniform_real_distribution<double>(-1.0, 1.0)(rng_); }
  FieldProgram pick_leaf_sq() {
    return unit() < 0.5 ? FieldProgram::abs2_z() : FieldProgram::abs2_w();
  }

  std::mt19937_64 rng_;
};

// ------------------------------------------------------ finite differences

struct RealDerivs {
  double val = 0.0;
  std::array<double, 4> g{};
  std::array<std::array<double, 4>, 4> H{};
};

inline double value_at(const FieldProgram& f, const Vec4& x) {
  return f.value(Complex2Point::from_real(x));
}

/// Central differences of a real function of R^4 with one Richardson pass.
template <class F>
RealDerivs fd_real_fn(F&& f, const Complex2Point& p, double h = 1e-3) {
  const Vec4 x = p.real();
  RealDerivs r;
  r.val = f(x);
  auto e = [](int k) {
    Vec4 v = Vec4::Zero();
    v[k] = 1.0;
    return v;
  };
  auto grad = [&](int k, double s) {
    return (f(x + s * e(k)) - f(x - s * e(k))) / (2 * s);
  };
  auto second = [&](int i, int j, double s) {
    if (i == j) {
      return (f(x + s * e(i)) - 2 * r.val + f(x - s * e(i))) / (s * s);
    }
    return (f(x + s * e(i) + s * e(j)) - f(x + s * e(i) - s * e(j)) -
            f(x - s * e(i) + s * e(j)) + f(x - s * e(i) - s * e(j))) /
           (4 * s * s);
  };
  for (int k = 0; k < 4; ++k) r.g[k] = (4 * grad(k, h / 2) - grad(k, h)) / 3;
  for (int i = 0; i < 4; ++i) {
    for (int j = i; j < 4; ++j) {
      r.H[i][j] = r.H[j][i] = (4 * second(i, j, h / 2) - second(i, j, h)) / 3;
    }
  }
  return r;
}

inline RealDerivs fd_real(const FieldProgram& f, const Complex2Point& p, double h = 1e-3) {
  return fd_real_fn([&f](const Vec4& x) { return value_at(f, x); }, p, h);
}

/// d/dz = (d/dx - i d/dy) / 2 written out entry by entry.
inline Jet2 wirtinger_of(const RealDerivs& r) {
  Jet2 j;
  j.val = r.val;
  const cplx I(0, 1);
  for (int a = 0; a < 2; ++a) j.d(a) = 0.5 * (r.g[2 * a] - I * r.g[2 * a + 1]);
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      const double xx = r.H[2 * a][2 * b], yy = r.H[2 * a + 1][2 * b + 1];
      const double xy = r.H[2 * a][2 * b + 1], yx = r.H[2 * a + 1][2 * b];
      j.h_mix(a, b) = 0.25 * cplx(xx + yy, xy - yx);
      j.h_hol(a, b) = 0.25 * cplx(xx - yy, -(xy + yx));
    }
  }
  return j;
}

/// Closed-form signed distance of the unit sphere, delta = |x| - 1.
inline Jet2 ball_delta(const Complex2Point& q) {
  const Vec4 x = q.real();
  const double r = x.norm();
  RealDerivs d;
  d.val = r - 1.0;
  const dfindex::Mat4 H = (dfindex::Mat4::Identity() - x * x.transpose() / (r * r)) / r;
  for (int i = 0; i < 4; ++i) {
    d.g[i] = x[i] / r;
    for (int j = 0; j < 4; ++j) d.H[i][j] = H(i, j);
  }
  return wirtinger_of(d);
}

/// Largest entry-wise deviation between two jets relative to the jet scale.
inline double jet_rel_error(const Jet2& a, const Jet2& b) {
  double scale = std::max(1.0, std::abs(b.val));
  double err = std::abs(a.val - b.val);
  for (int i = 0; i < 2; ++i) {
    scale = std::max(scale, std::abs(b.d(i)));
    err = std::max(err, std::abs(a.d(i) - b.d(i)));
    for (int k = 0; k < 2; ++k) {
      scale = std::max({scale, std::abs(b.h_mix(i, k)), std::abs(b.h_hol(i, k))});
      err = std::max({err, std::abs(a.h_mix(i, k) - b.h_mix(i, k)),
                      std::abs(a.h_hol(i, k) - b.h_hol(i, k))});
    }
  }
  return err / scale;
}

// --------------------------------------------------- symbolic polynomials

/// Polynomial in (z, zbar, w, wbar) with complex coefficients.
class Poly {
 public:
  using Exp = std::array<int, 4>;

  static Poly constant(cplx c) {
    Poly p;
    p.terms_[{0, 0, 0, 0}] = c;
    return p;
  }
  static Poly var(int k) {
    Poly p;
    Exp e{0, 0, 0, 0};
    e[k] = 1;
    p.terms_[e] = 1.0;
    return p;
  }
  // x = (z + zbar) / 2 and y = (z - zbar) / (2i) for the given complex slot.
  static Poly real_part(int slot) {
    return (var(2 * slot) + var(2 * slot + 1)) * constant(0.5);
  }
  static Poly imag_part(int slot) {
    return (var(2 * slot) - var(2 * slot + 1)) * constant(cplx(0, -0.5));
  }

  friend Poly operator+(const Poly& a, const Poly& b) {
    Poly r = a;
    for (const auto& [e, c] : b.terms_) r.terms_[e] += c;
    return r;
  }
  friend Poly operator-(const Poly& a, const Poly& b) {
    return a + b * constant(-1.0);
  }
  friend Poly operator*(const Poly& a, const Poly& b) {
    Poly r;
    for (const auto& [ea, ca] : a.terms_) {
      for (const auto& [eb, cb] : b.terms_) {
        Exp e;
        for (int k = 0; k < 4; ++k) e[k] = ea[k] + eb[k];
        r.terms_[e] += ca * cb;
      }
    }
    return r;
  }

  /// Derivative in slot k of (z, zbar, w, wbar).
  Poly d(int k) const {
    Poly r;
    for (const auto& [e, c] : terms_) {
      if (e[k] == 0) continue;
      Exp f = e;
      f[k] -= 1;
      r.terms_[f] += c * static_cast<double>(e[k]);
    }
    return r;
  }

  cplx eval(const Complex2Point& p) const {
    const std::array<cplx, 4> v{p.z, std::conj(p.z), p.w, std::conj(p.w)};
    cplx s = 0.0;
    for (const auto& [e, c] : terms_) {
      cplx t = c;
      for (int k = 0; k < 4; ++k) {
        for (int m = 0; m < e[k]; ++m) t *= v[k];
      }
      s += t;
    }
    return s;
  }

 private:
  std::map<Exp, cplx> terms_;
};

/// x1^a y1^b x2^c y2^d as a program and as a polynomial.
struct Monomial {
  FieldProgram program;
  Poly poly;
};

inline Monomial monomial(const std::array<int, 4>& powers) {
  Monomial m{FieldProgram::constant(1.0), Poly::constant(1.0)};
  const FieldProgram leaves[4] = {FieldProgram::re_z(), FieldProgram::im_z(), FieldProgram::re_w(),
                                  FieldProgram::im_w()};
  const Poly polys[4] = {Poly::real_part(0), Poly::imag_part(0), Poly::real_part(1),
                         Poly::imag_part(1)};
  for (int k = 0; k < 4; ++k) {
    for (int e = 0; e < powers[k]; ++e) {
      m.program = m.program * leaves[k];
      m.poly = m.poly * polys[k];
    }
  }
  return m;
}

/// sum_k V_k d/dz_k of f_{z_i zbar_j} (mixed) or f_{z_i z_j} (holomorphic).
inline cplx symbolic_third(const Poly& f, const Complex2Point& p, const dfindex::Vec2c& V,
                           dfindex::SecondEntry target) {
  const int zi = 2 * target.i;
  const int zj = target.block == dfindex::SecondEntry::Block::mixed ? 2 * target.j + 1
                                                                     : 2 * target.j;
  const Poly second = f.d(zi).d(zj);
  return V(0) * second.d(0).eval(p) + V(1) * second.d(2).eval(p);
}

// --------------------------------------------------- Hermitian positivity

/// Minimum of v* M v over unit vectors v = (cos t, sin t e^{i phi}) on a
/// phases x ratios grid, then three rounds of local grid zoom around the best
/// cell.
inline double grid_min(const dfindex::Mat2c& M, int phases = 360, int ratios = 100) {
  // v* M v = a cos^2 t + d sin^2 t + 2 cos t sin t Re(b e^{i phi}).
  const double a = M(0, 0).real(), d = M(1, 1).real();
  const cplx b = M(0, 1);
  auto q = [&](double t, double phi) {
    const double c = std::cos(t), s = std::sin(t);
    return a * c * c + d * s * s + 2 * c * s * (b * std::exp(cplx(0, phi))).real();
  };
  const double tmax = std::numbers::pi / 2;
  std::vector<double> re_b(phases);
  for (int k = 0; k < phases; ++k) {
    re_b[k] = (b * std::exp(cplx(0, 2 * std::numbers::pi * k / phases))).real();
  }
  double best = q(0, 0), bt = 0, bp = 0;
  for (int i = 0; i < ratios; ++i) {
    const double t = tmax * i / (ratios - 1);
    const double c = std::cos(t), s = std::sin(t);
    const double base = a * c * c + d * s * s, cross = 2 * c * s;
    for (int k = 0; k < phases; ++k) {
      const double v = base + cross * re_b[k];
      if (v < best) best = v, bt = t, bp = 2 * std::numbers::pi * k / phases;
    }
  }
  double dt = tmax / (ratios - 1), dp = 2 * std::numbers::pi / phases;
  for (int round = 0; round < 3; ++round) {
    const double ct = bt, cp = bp;
    for (int i = -10; i <= 10; ++i) {
      const double t = std::clamp(ct + dt * i / 10, 0.0, tmax);
      for (int k = -10; k <= 10; ++k) {
        const double phi = cp + dp * k / 10;
        const double v = q(t, phi);
        if (v < best) best = v, bt = t, bp = phi;
      }
    }
    dt /= 10;
    dp /= 10;
  }
  return best;
}

/// Random forms, a quarter of them on the boundary of the positive cone.
inline dfindex::HermitianForm2 random_form(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  dfindex::HermitianForm2 H;
  H.a_LL = g(rng);
  H.a_NN = g(rng);
  H.a_LN = {g(rng), g(rng)};
  if (std::uniform_real_distribution<double>(0, 1)(rng) < 0.25) {
    H.a_LL = std::abs(H.a_LL);
    H.a_NN = std::abs(H.a_NN);
    H.a_LN = std::polar(std::sqrt(H.a_LL * H.a_NN), std::arg(H.a_LN));
  }
  return H;
}

// --------------------------------------------------------- frame oracle

/// Frame fields of f as functions of the point, differentiated numerically.
struct FrameFD {
  const FieldProgram& f;
  double h = 1e-4;

  dfindex::Frame at(const Vec4& x) const {
    const Complex2Point p = Complex2Point::from_real(x);
    return dfindex::frame_at(dfindex::jet_eval(f, p), p);
  }

  /// d/dz_k (c = k) or d/dzbar_k (c = 2 + k) of the coefficient rows of L and N.
  void derivs(const Complex2Point& p, dfindex::Mat24c& dL, dfindex::Mat24c& dN) const {
    const Vec4 x = p.real();
    for (int k = 0; k < 2; ++k) {
      dfindex::Vec2c Lx, Ly, Nx, Ny;
      for (int part = 0; part < 2; ++part) {
        Vec4 e = Vec4::Zero();
        e[2 * k + part] = 1.0;
        auto diff = [&](double s, dfindex::Vec2c& dl, dfindex::Vec2c& dn) {
          const auto a = at(x + s * e), b = at(x - s * e);
          dl = (a.L - b.L) / (2 * s);
          dn = (a.N - b.N) / (2 * s);
        };
        dfindex::Vec2c l1, n1, l2, n2;
        diff(h, l1, n1);
        diff(h / 2, l2, n2);
        (part == 0 ? Lx : Ly) = (4.0 * l2 - l1) / 3.0;
        (part == 0 ? Nx : Ny) = (4.0 * n2 - n1) / 3.0;
      }
      const cplx I(0, 1);
      dL.col(k) = 0.5 * (Lx - I * Ly);
      dL.col(2 + k) = 0.5 * (Lx + I * Ly);
      dN.col(k) = 0.5 * (Nx - I * Ny);
      dN.col(2 + k) = 0.5 * (Nx + I * Ny);
    }
  }

  /// The four flat-connection pairings with g(A, B) = 1/2 sum A_j conj(B_j).
  dfindex::CovariantScalars scalars(const Complex2Point& p) const {
    const dfindex::Frame fr = at(p.real());
    dfindex::Mat24c dL, dN;
    derivs(p, dL, dN);
    auto hol = [](const dfindex::Mat24c& d, int row, const dfindex::Vec2c& X) {
      return X(0) * d(row, 0) + X(1) * d(row, 1);
    };
    auto antihol = [](const dfindex::Mat24c& d, int row, const dfindex::Vec2c& X) {
      return std::conj(X(0)) * d(row, 2) + std::conj(X(1)) * d(row, 3);
    };
    dfindex::CovariantScalars c;
    for (int j = 0; j < 2; ++j) {
      // N applied to conj(L_j): conj of Nbar(L_j).
      const cplx N_conjL = std::conj(antihol(dL, j, fr.N));
      c.gNLbarNbar += 0.5 * N_conjL * fr.N(j);
      c.gLbarLL += 0.5 * antihol(dL, j, fr.L) * std::conj(fr.L(j));
      c.gNLN += 0.5 * (hol(dL, j, fr.N) - hol(dN, j, fr.L)) * std::conj(fr.N(j));
      c.gLbarNN += 0.5 * antihol(dN, j, fr.L) * std::conj(fr.N(j));
    }
    return c;
  }
};

// ---------------------------------------------------- distance frame oracle

/// L, N of the signed distance from the unit normal n = grad delta alone:
/// delta_z = (n0 - i n1) / 2, delta_w = (n2 - i n3) / 2 and s = 1/2.
inline void frame_from_normal(const Vec4& n, dfindex::Vec2c& L, dfindex::Vec2c& N) {
  const cplx dz(0.5 * n[0], -0.5 * n[1]);
  const cplx dw(0.5 * n[2], -0.5 * n[3]);
  L << 2.0 * dw, -2.0 * dz;
  N << 2.0 * std::conj(dz), 2.0 * std::conj(dw);
}

/// Frame of the signed distance differentiated through foot-point normals.
/// grad delta(x) is the unit normal at the nearest boundary point, so the
/// frame field near the boundary needs projections only.
struct DeltaFrameFD {
  const dfindex::Domain& domain;
  double h = 1e-4;

  bool normal_at(const Vec4& x, const Vec4& seed, Vec4& n) const {
    auto pr = dfindex::project_from_seed(domain, x, seed);
    if (!pr) return false;
    n = dfindex::unit_normal(pr->foot.rho_jet);
    return true;
  }

  /// The four scalars at a boundary point; false if a projection fails.
  bool scalars(const dfindex::BoundaryPoint& bp, dfindex::CovariantScalars& c) const {
    const Vec4 x = bp.p.real();
    dfindex::Vec2c L, N;
    frame_from_normal(dfindex::unit_normal(bp.rho_jet), L, N);
    dfindex::Mat24c dL, dN;
    for (int k = 0; k < 2; ++k) {
      dfindex::Vec2c Ld[2], Nd[2];
      for (int part = 0; part < 2; ++part) {
        Vec4 e = Vec4::Zero();
        e[2 * k + part] = 1.0;
        dfindex::Vec2c l[2], m[2];
        for (int r = 0; r < 2; ++r) {
          const double step = r == 0 ? h : h / 2;
          Vec4 na, nb;
          if (!normal_at(x + step * e, x, na) || !normal_at(x - step * e, x, nb)) return false;
          dfindex::Vec2c La, Na, Lb, Nb;
          frame_from_normal(na, La, Na);
          frame_from_normal(nb, Lb, Nb);
          l[r] = (La - Lb) / (2 * step);
          m[r] = (Na - Nb) / (2 * step);
        }
        Ld[part] = (4.0 * l[1] - l[0]) / 3.0;
        Nd[part] = (4.0 * m[1] - m[0]) / 3.0;
      }
      const cplx I(0, 1);
      dL.col(k) = 0.5 * (Ld[0] - I * Ld[1]);
      dL.col(2 + k) = 0.5 * (Ld[0] + I * Ld[1]);
      dN.col(k) = 0.5 * (Nd[0] - I * Nd[1]);
      dN.col(2 + k) = 0.5 * (Nd[0] + I * Nd[1]);
    }
    auto hol = [](const dfindex::Mat24c& d, int row, const dfindex::Vec2c& X) {
      return X(0) * d(row, 0) + X(1) * d(row, 1);
    };
    auto antihol = [](const dfindex::Mat24c& d, int row, const dfindex::Vec2c& X) {
      return std::conj(X(0)) * d(row, 2) + std::conj(X(1)) * d(row, 3);
    };
    c = {};
    for (int j = 0; j < 2; ++j) {
      c.gNLbarNbar += 0.5 * std::conj(antihol(dL, j, N)) * N(j);
      c.gLbarLL += 0.5 * antihol(dL, j, L) * std::conj(L(j));
      c.gNLN += 0.5 * (hol(dL, j, N) - hol(dN, j, L)) * std::conj(N(j));
      c.gLbarNN += 0.5 * antihol(dN, j, L) * std::conj(N(j));
    }
    return true;
  }
};

/// Boundary points (0, w) of the worm annulus, |log |w|^2| <= beta - pi/2,
/// spread evenly in log |w| and angle.
inline std::vector<dfindex::BoundaryPoint> worm_annulus_points(const dfindex::Domain& worm,
                                                               double beta, std::size_t n,
                                                               std::uint64_t seed,
                                                               double shrink = 0.98) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double half = 0.5 * (beta - std::numbers::pi / 2) * shrink;
  std::vector<dfindex::BoundaryPoint> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = std::exp(half * u(rng));
    const double th = std::numbers::pi * u(rng);
    out.push_back(dfindex::make_boundary_point(worm, {cplx(0.0, 0.0), std::polar(r, th)}));
  }
  return out;
}

}  // namespace oracle
