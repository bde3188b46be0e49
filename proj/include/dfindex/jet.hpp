#pragma once

#include <complex>

#include <Eigen/Dense>

namespace dfindex {

using cplx = std::complex<double>;
using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;
using Vec2c = Eigen::Vector2cd;
using Mat2c = Eigen::Matrix2cd;

/// A point (z, w) of C^2.
struct Complex2Point {
  cplx z{};
  cplx w{};

  /// Real coordinates (Re z, Im z, Re w, Im w).
  Vec4 real() const { return {z.real(), z.imag(), w.real(), w.imag()}; }
  static Complex2Point from_real(const Vec4& x) {
    return {{x[0], x[1]}, {x[2], x[3]}};
  }
  bool finite() const;
  double norm() const { return real().norm(); }
};

/// Value, gradient and Hessian of a real field in the real coordinates
/// (x1, y1, x2, y2). Hessians are kept exactly symmetric.
struct RealJet {
  double val = 0.0;
  Vec4 grad = Vec4::Zero();
  Mat4 hess = Mat4::Zero();
};

/// Wirtinger form of a second-order jet of a real field on C^2.
///
/// d(i) = f_{z_i}, h_mix(i, j) = f_{z_i zbar_j} (Hermitian),
/// h_hol(i, j) = f_{z_i z_j} (symmetric). The antiholomorphic blocks are
/// the conjugates of these and are not stored.
struct Jet2 {
  double val = 0.0;
  Vec2c d = Vec2c::Zero();
  Mat2c h_mix = Mat2c::Zero();
  Mat2c h_hol = Mat2c::Zero();
};

Jet2 to_wirtinger(const RealJet& r);

/// Real gradient norm recovered from the Wirtinger gradient, 2 sqrt(|f_z|^2 + |f_w|^2).
double gradient_norm(const Jet2& j);

/// Entrywise a*x + b*y, used for extrapolation of jets.
Jet2 combine(double a, const Jet2& x, double b, const Jet2& y);

}  // namespace dfindex
