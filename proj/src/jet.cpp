#include "dfindex/jet.hpp"

#include <cmath>

namespace dfindex {

bool Complex2Point::finite() const {
  return std::isfinite(z.real()) && std::isfinite(z.imag()) && std::isfinite(w.real()) &&
         std::isfinite(w.imag());
}

Jet2 to_wirtinger(const RealJet& r) {
  static constexpr cplx I{0.0, 1.0};
  Jet2 j;
  j.val = r.val;
  for (int k = 0; k < 2; ++k) {
    j.d(k) = 0.5 * cplx{r.grad[2 * k], -r.grad[2 * k + 1]};
  }
  // Only the upper triangle is computed; the lower one is mirrored so the
  // Hermitian and symmetric structure is exact.
  auto H = [&r](int a, int b) { return a == b ? r.hess(a, a) : 0.5 * (r.hess(a, b) + r.hess(b, a)); };
  for (int i = 0; i < 2; ++i) {
    for (int k = i; k < 2; ++k) {
      const int xi = 2 * i, yi = 2 * i + 1, xk = 2 * k, yk = 2 * k + 1;
      cplx mix = 0.25 * (H(xi, xk) + H(yi, yk) + I * (H(xi, yk) - H(yi, xk)));
      if (i == k) mix = {mix.real(), 0.0};
      const cplx hol = 0.25 * (H(xi, xk) - H(yi, yk) - I * (H(xi, yk) + H(yi, xk)));
      j.h_mix(i, k) = mix;
      j.h_mix(k, i) = std::conj(mix);
      j.h_hol(i, k) = hol;
      j.h_hol(k, i) = hol;
    }
  }
  return j;
}

double gradient_norm(const Jet2& j) { return 2.0 * j.d.norm(); }

Jet2 combine(double a, const Jet2& x, double b, const Jet2& y) {
  Jet2 out;
  out.val = a * x.val + b * y.val;
  out.d = a * x.d + b * y.d;
  out.h_mix = a * x.h_mix + b * y.h_mix;
  out.h_hol = a * x.h_hol + b * y.h_hol;
  // Re-impose exact structure after the arithmetic.
  for (int i = 0; i < 2; ++i) out.h_mix(i, i) = out.h_mix(i, i).real();
  out.h_mix(1, 0) = std::conj(out.h_mix(0, 1));
  out.h_hol(1, 0) = out.h_hol(0, 1);
  return out;
}

}  // namespace dfindex
