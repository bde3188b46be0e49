#include "dfindex/frame.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "dfindex/derivatives.hpp"
#include "dfindex/errors.hpp"
#include "dfindex/parallel.hpp"
#include "point_index.hpp"

namespace dfindex {

Mat2c HermitianForm2::matrix() const {
  Mat2c m;
  m << cplx{a_LL, 0.0}, a_LN, std::conj(a_LN), cplx{a_NN, 0.0};
  return m;
}

Frame frame_at(const Jet2& f, const Complex2Point& /*p*/) {
  const Vec2c a = f.d;
  const double s = a.norm();
  if (!(s >= 1e-12)) throw DegenerateGradient("gradient too small to build a frame (s < 1e-12)");

  // Derivatives of a_i and conj(a_i) along the four Wirtinger directions.
  Mat24c da, dac;
  for (int i = 0; i < 2; ++i) {
    for (int k = 0; k < 2; ++k) {
      da(i, k) = f.h_hol(k, i);
      da(i, 2 + k) = f.h_mix(i, k);
      dac(i, k) = f.h_mix(k, i);
      dac(i, 2 + k) = std::conj(f.h_hol(k, i));
    }
  }
  Eigen::Matrix<cplx, 1, 4> ds;
  for (int c = 0; c < 4; ++c) {
    cplx acc{};
    for (int i = 0; i < 2; ++i) acc += da(i, c) * std::conj(a(i)) + a(i) * dac(i, c);
    ds(c) = acc / (2.0 * s);
  }

  Frame fr;
  fr.s = s;
  const Vec2c uL(a(1), -a(0));
  const Vec2c uN(std::conj(a(0)), std::conj(a(1)));
  fr.L = uL / s;
  fr.N = uN / s;
  for (int c = 0; c < 4; ++c) {
    const Vec2c duL(da(1, c), -da(0, c));
    const Vec2c duN(dac(0, c), dac(1, c));
    fr.dL.col(c) = duL / s - uL * ds(c) / (s * s);
    fr.dN.col(c) = duN / s - uN * ds(c) / (s * s);
  }
  return fr;
}

cplx metric(const Vec2c& A, const Vec2c& B) {
  return 0.5 * (A(0) * std::conj(B(0)) + A(1) * std::conj(B(1)));
}

cplx hess_pair(const Jet2& f, const Vec2c& X, const Vec2c& Y) {
  cplx acc{};
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) acc += X(i) * std::conj(Y(j)) * f.h_mix(i, j);
  }
  return acc;
}

HermitianForm2 hessian_LN(const Jet2& f, const Frame& fr) {
  HermitianForm2 h;
  h.a_LL = hess_pair(f, fr.L, fr.L).real();
  h.a_NN = hess_pair(f, fr.N, fr.N).real();
  h.a_LN = hess_pair(f, fr.L, fr.N);
  return h;
}

cplx apply_holo(const Vec2c& X, const Jet2& f) { return X(0) * f.d(0) + X(1) * f.d(1); }

cplx along(const Mat24c& d, int row, const Vec2c& X) {
  return X(0) * d(row, 0) + X(1) * d(row, 1);
}

cplx along_bar(const Mat24c& d, int row, const Vec2c& X) {
  return std::conj(X(0)) * d(row, 2) + std::conj(X(1)) * d(row, 3);
}

double levi_form(const Jet2& rho_jet, const Complex2Point& p) {
  const Frame fr = frame_at(rho_jet, p);
  return hess_pair(rho_jet, fr.L, fr.L).real();
}

double levi_form(const Domain& /*domain*/, const BoundaryPoint& bp) {
  return levi_form(bp.rho_jet, bp.p);
}

namespace {

Vec4 inward_offset(const BoundaryPoint& bp, double eps) {
  return bp.p.real() - eps * unit_normal(bp.rho_jet);
}

// Quadratic extrapolation to offset 0 from offsets eps, eps/2, eps/4. The
// linear two-point rule leaves an (eps / curvature radius)^2 error, which is
// 1e-3 near the inner rim of the worm annulus.
template <class T>
T to_boundary(const T& far, const T& mid, const T& near) {
  return (far - 6.0 * mid + 8.0 * near) / 3.0;
}

}  // namespace

DeltaBoundary delta_boundary(const Domain& domain, const BoundaryPoint& bp,
                             const DeltaOptions& opts) {
  const double eps = opts.boundary_offset;
  DeltaBoundary db;
  for (int k = 0; k < 3; ++k) {
    db.offset_points[k] = Complex2Point::from_real(inward_offset(bp, std::ldexp(eps, -k)));
    db.offset_jets[k] = delta_jet(domain, db.offset_points[k], opts.fd_step);
  }
  const Jet2& far = db.offset_jets[0];
  const Jet2& mid = db.offset_jets[1];
  const Jet2& near = db.offset_jets[2];
  db.jet = combine(1.0 / 3.0, far, 1.0, combine(-2.0, mid, 8.0 / 3.0, near));
  db.frame = frame_at(db.jet, bp.p);
  db.hess_NL = hess_pair(db.jet, db.frame.N, db.frame.L);
  return db;
}

Mat2c delta_mix_derivative(const Domain& domain, const BoundaryPoint& bp, const Vec2c& V,
                           const DeltaOptions& opts) {
  const JetFn jet = [&domain, &opts](const Complex2Point& q) {
    return delta_jet(domain, q, opts.fd_step);
  };
  auto at = [&](double t) {
    return directional_second_blocks(jet, Complex2Point::from_real(inward_offset(bp, t)), V,
                                     opts.third_step)
        .mix;
  };
  const double eps = opts.boundary_offset;
  return to_boundary<Mat2c>(at(eps), at(0.5 * eps), at(0.25 * eps));
}

DeltaThird delta_third(const Domain& domain, const BoundaryPoint& bp, const DeltaBoundary& db,
                       const DeltaOptions& opts) {
  const Frame& fr = db.frame;
  const Mat2c dmix = delta_mix_derivative(domain, bp, fr.L, opts);
  DeltaThird t;
  Vec2c M;
  for (int j = 0; j < 2; ++j) M(j) = along_bar(fr.dL, j, fr.L);
  cplx acc{};
  for (int i = 0; i < 2; ++i) {
    const cplx LNi = along(fr.dN, i, fr.L);
    for (int j = 0; j < 2; ++j) {
      const cplx LconjLj = fr.L(0) * std::conj(fr.dL(j, 2)) + fr.L(1) * std::conj(fr.dL(j, 3));
      acc += (LNi * std::conj(fr.L(j)) + fr.N(i) * LconjLj) * db.jet.h_mix(i, j);
      acc += fr.N(i) * std::conj(fr.L(j)) * dmix(i, j);
    }
  }
  t.L_hess_NL = acc;
  t.hess_N_LbarL = hess_pair(db.jet, fr.N, M);
  return t;
}

double CovariantScalars::max_abs() const {
  return std::max({std::abs(gNLbarNbar), std::abs(gLbarLL), std::abs(gNLN), std::abs(gLbarNN)});
}

CovariantScalars covariant_scalars(const Frame& fr) {
  CovariantScalars c;
  for (int j = 0; j < 2; ++j) {
    const cplx N_conjLj = fr.N(0) * std::conj(fr.dL(j, 2)) + fr.N(1) * std::conj(fr.dL(j, 3));
    c.gNLbarNbar += 0.5 * N_conjLj * fr.N(j);
    c.gLbarLL += 0.5 * along_bar(fr.dL, j, fr.L) * std::conj(fr.L(j));
    c.gNLN += 0.5 * (along(fr.dL, j, fr.N) - along(fr.dN, j, fr.L)) * std::conj(fr.N(j));
    c.gLbarNN += 0.5 * along_bar(fr.dN, j, fr.L) * std::conj(fr.N(j));
  }
  return c;
}

CovariantScalars covariant_scalars(const Domain& domain, const BoundaryPoint& bp,
                                   const DeltaOptions& opts) {
  return covariant_scalars(delta_boundary(domain, bp, opts).frame);
}

double constant_C(const std::vector<CovariantScalars>& scalars) {
  if (scalars.empty()) throw EmptySigma("no Levi-flat samples: the condition is vacuous");
  double C = 0.0;
  for (const auto& c : scalars) C = std::max(C, c.max_abs());
  return C;
}

double constant_C(const Domain& domain, const std::vector<LeviFlatSample>& sigma,
                  const DeltaOptions& opts) {
  if (sigma.empty()) throw EmptySigma("no Levi-flat samples: the condition is vacuous");
  std::vector<CovariantScalars> sc(sigma.size());
  parallel_for(sigma.size(),
               [&](std::size_t i) { sc[i] = covariant_scalars(domain, sigma[i].bp, opts); });
  return constant_C(sc);
}

std::vector<double> knn_weights(const std::vector<Vec4>& pts, std::size_t k) {
  const std::size_t n = pts.size();
  std::vector<double> w(n, 0.0);
  if (n <= 1) return w;
  k = std::min(k, n - 1);
  const detail::PointIndex index(pts);
  parallel_for(n, [&](std::size_t i) {
    w[i] = std::numbers::pi * index.kth_distance2(i, k) / static_cast<double>(k);
  });
  return w;
}

namespace {

LeviFlatSample make_sample(const BoundaryPoint& bp) {
  LeviFlatSample s;
  s.bp = bp;
  s.frame = frame_at(bp.rho_jet, bp.p);
  s.levi = hess_pair(bp.rho_jet, s.frame.L, s.frame.L).real();
  return s;
}

void assign_weights(std::vector<LeviFlatSample>& sigma) {
  std::vector<Vec4> pts;
  pts.reserve(sigma.size());
  for (const auto& s : sigma) pts.push_back(s.bp.p.real());
  const auto w = knn_weights(pts);
  for (std::size_t i = 0; i < sigma.size(); ++i) sigma[i].weight = w[i];
}

}  // namespace

std::vector<LeviFlatSample> leviflat_detect(const Domain& /*domain*/,
                                            const std::vector<BoundaryPoint>& samples,
                                            double tol) {
  std::vector<LeviFlatSample> all(samples.size());
  std::vector<char> ok(samples.size(), 0);
  parallel_for(samples.size(), [&](std::size_t i) {
    try {
      all[i] = make_sample(samples[i]);
      ok[i] = std::abs(all[i].levi) <= tol;
    } catch (const DegenerateGradient&) {
    }
  });
  std::vector<LeviFlatSample> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (ok[i]) out.push_back(std::move(all[i]));
  }
  assign_weights(out);
  return out;
}

namespace {

struct Probe {
  Vec4 x;
  BoundaryPoint bp;
  double levi;
};

std::optional<Probe> probe(const Domain& domain, const Vec4& q, const Vec4& seed) {
  auto pr = project_from_seed(domain, q, seed);
  if (!pr) return std::nullopt;
  try {
    const double lv = levi_form(pr->foot.rho_jet, pr->foot.p);
    return Probe{pr->foot.p.real(), pr->foot, lv};
  } catch (const DegenerateGradient&) {
    return std::nullopt;
  }
}

BoundaryPoint descend(const Domain& domain, const BoundaryPoint& start, const RefineOptions& o) {
  const Vec4 x0 = start.p.real();
  Probe cur{x0, start, levi_form(start.rho_jet, start.p)};
  for (int it = 0; it < o.max_iter; ++it) {
    if (std::abs(cur.levi) <= o.target) break;
    const double h = 1e-6 * (1.0 + cur.x.norm());
    Vec4 g;
    bool ok = true;
    for (int k = 0; k < 4 && ok; ++k) {
      Vec4 e = Vec4::Zero();
      e[k] = h;
      auto a = probe(domain, cur.x + e, cur.x);
      auto b = probe(domain, cur.x - e, cur.x);
      if (!a || !b) {
        ok = false;
        break;
      }
      g[k] = (a->levi - b->levi) / (2.0 * h);
    }
    if (!ok) break;
    const Vec4 n = unit_normal(cur.bp.rho_jet);
    g -= g.dot(n) * n;
    const double gg = g.squaredNorm();
    if (!(gg > 0.0)) break;
    // Newton step on sqrt(levi): exact for a quadratic zero.
    Vec4 step = -2.0 * cur.levi / gg * g;
    bool moved = false;
    for (int k = 0; k < 12; ++k) {
      const Vec4 target = cur.x + step;
      if ((target - x0).norm() <= o.max_travel) {
        auto nxt = probe(domain, target, target);
        if (nxt && std::abs(nxt->levi) < std::abs(cur.levi)) {
          cur = *nxt;
          moved = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  return cur.bp;
}

}  // namespace

std::vector<BoundaryPoint> refine_leviflat(const Domain& domain,
                                           const std::vector<BoundaryPoint>& samples,
                                           const RefineOptions& o) {
  const std::size_t n = samples.size();
  // Scale-free selection: the Levi form relative to the size of the complex
  // Hessian, so the candidate band has similar width everywhere on the boundary.
  std::vector<double> lv(n, std::numeric_limits<double>::infinity());
  parallel_for(n, [&](std::size_t i) {
    try {
      const double h = samples[i].rho_jet.h_mix.norm();
      if (h > 0.0) lv[i] = std::abs(levi_form(samples[i].rho_jet, samples[i].p)) / h;
    } catch (const DegenerateGradient&) {
    }
  });
  std::vector<double> sorted = lv;
  if (sorted.empty()) return {};
  std::nth_element(sorted.begin(), sorted.begin() + n / 2, sorted.end());
  const double threshold = o.candidate_levi * sorted[n / 2];

  std::vector<BoundaryPoint> out = samples;
  parallel_for(n, [&](std::size_t i) {
    if (lv[i] <= threshold) out[i] = descend(domain, samples[i], o);
  });
  return out;
}

double sampling_intensity(const LeviFlatSample& s) {
  if (!(s.frame.s > 0.0)) return 0.0;
  return std::abs(hess_pair(s.bp.rho_jet, s.frame.N, s.frame.L)) / (2.0 * s.frame.s);
}

std::vector<std::size_t> farthest_point_order(const std::vector<Vec4>& pts, std::size_t count,
                                              const std::vector<double>& scale) {
  const std::size_t n = pts.size();
  if (!scale.empty() && scale.size() != n) throw EmptyInput("scale and point lists differ");
  count = std::min(count, n);
  std::vector<std::size_t> order;
  if (count == 0) return order;
  order.reserve(count);
  std::vector<double> w2(n, 1.0);
  for (std::size_t j = 0; j < scale.size(); ++j) w2[j] = scale[j] * scale[j];
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::size_t cur = 0;
  for (std::size_t m = 0; m < count; ++m) {
    order.push_back(cur);
    dist[cur] = -1.0;
    std::size_t next = cur;
    double best = -1.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (dist[j] < 0.0) continue;
      dist[j] = std::min(dist[j], w2[j] * (pts[j] - pts[cur]).squaredNorm());
      if (dist[j] > best) {
        best = dist[j];
        next = j;
      }
    }
    cur = next;
  }
  return order;
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::vector<double> clamped_intensity(const std::vector<LeviFlatSample>& pool, double range) {
  std::vector<double> k(pool.size());
  double top = 0.0;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    k[i] = sampling_intensity(pool[i]);
    if (std::isfinite(k[i])) top = std::max(top, k[i]);
  }
  if (!(top > 0.0)) return std::vector<double>(pool.size(), 1.0);
  const double floor = top / range;
  for (auto& v : k) v = std::isfinite(v) ? std::clamp(v, floor, top) : top;
  return k;
}

// Grows the pool where its density falls short of wanted * kappa / int kappa.
// The area of a point's cell is estimated from its 8-NN radius; children land
// uniformly in that disc within the complex tangent line, then get projected
// and pulled back onto the Levi-flat set.
void densify(const Domain& domain, std::vector<LeviFlatSample>& pool, std::size_t wanted,
             std::uint64_t seed, const SigmaOptions& o) {
  constexpr std::size_t kNeighbours = 8;
  constexpr std::size_t kMaxChildren = 6;
  const auto cap = static_cast<std::size_t>(o.adapt_growth * static_cast<double>(wanted));
  for (int round = 0; round < o.adapt_rounds; ++round) {
    const std::size_t n = pool.size();
    if (n <= kNeighbours || n >= cap) return;
    const auto kappa = clamped_intensity(pool, o.dynamic_range);
    std::vector<Vec4> xs(n);
    for (std::size_t i = 0; i < n; ++i) xs[i] = pool[i].bp.p.real();
    std::vector<double> r2(n);
    {
      const detail::PointIndex index(xs);
      parallel_for(n, [&](std::size_t i) { r2[i] = index.kth_distance2(i, kNeighbours); });
    }
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += kappa[i] * std::numbers::pi * r2[i] / kNeighbours;
    if (!(total > 0.0)) return;

    struct Task {
      std::size_t parent;
      std::size_t child;
    };
    std::vector<Task> tasks;
    for (std::size_t i = 0; i < n && n + tasks.size() < cap; ++i) {
      const double q = static_cast<double>(wanted) * kappa[i] / total * std::numbers::pi * r2[i] /
                       kNeighbours;
      if (!(q > 2.0)) continue;
      const auto m = std::min<std::size_t>(kMaxChildren, static_cast<std::size_t>(std::ceil(q)) - 1);
      for (std::size_t j = 0; j < m; ++j) tasks.push_back({i, j});
    }
    if (tasks.empty()) return;

    std::vector<std::optional<LeviFlatSample>> born(tasks.size());
    parallel_for(tasks.size(), [&](std::size_t t) {
      const auto& parent = pool[tasks[t].parent];
      std::mt19937_64 rng(splitmix(o.spawn_seed ^ seed ^ splitmix(static_cast<std::uint64_t>(round)) ^
                                   splitmix(tasks[t].parent * 0x100000001b3ULL + tasks[t].child)));
      std::uniform_real_distribution<double> u(0.0, 1.0);
      const Vec2c& L = parent.frame.L;
      Vec4 e1{L(0).real(), L(0).imag(), L(1).real(), L(1).imag()};
      Vec4 e2{-L(0).imag(), L(0).real(), -L(1).imag(), L(1).real()};
      if (!(e1.norm() > 0.0)) return;
      e1.normalize();
      e2 -= e2.dot(e1) * e1;
      if (!(e2.norm() > 0.0)) return;
      e2.normalize();
      const double rad = std::sqrt(r2[tasks[t].parent]) * std::sqrt(u(rng));
      const double th = 2.0 * std::numbers::pi * u(rng);
      const Vec4 x = xs[tasks[t].parent];
      const Vec4 q = x + rad * (std::cos(th) * e1 + std::sin(th) * e2);
      try {
        auto pr = project_from_seed(domain, q, x);
        if (!pr) return;
        LeviFlatSample s = make_sample(descend(domain, pr->foot, o.refine));
        if (std::abs(s.levi) <= o.tol) born[t] = std::move(s);
      } catch (const DomainError&) {
      } catch (const DegenerateGradient&) {
      }
    });
    bool grew = false;
    for (auto& b : born) {
      if (b && pool.size() < cap) {
        pool.push_back(std::move(*b));
        grew = true;
      }
    }
    if (!grew) return;
  }
}

}  // namespace

std::vector<LeviFlatSample> detect_sigma(const Domain& domain, std::size_t target,
                                         std::uint64_t seed, const SigmaOptions& o) {
  const std::size_t pool_size = target * std::max<std::size_t>(1, o.oversample);
  std::vector<LeviFlatSample> pool;
  std::size_t used = 0;
  for (std::uint64_t round = 0; pool.size() < pool_size && used < o.max_boundary_samples;
       ++round) {
    const auto pts = sample_boundary(domain, o.batch, seed + 0x9e3779b97f4a7c15ULL * round);
    used += o.batch;
    const auto refined = refine_leviflat(domain, pts, o.refine);
    for (const auto& bp : refined) {
      if (pool.size() >= pool_size) break;
      LeviFlatSample s;
      try {
        s = make_sample(bp);
      } catch (const DegenerateGradient&) {
        continue;
      }
      if (std::abs(s.levi) <= o.tol) pool.push_back(std::move(s));
    }
  }
  if (pool.size() <= target) {
    assign_weights(pool);
    return pool;
  }
  densify(domain, pool, pool_size, seed, o);

  const auto kappa = clamped_intensity(pool, o.dynamic_range);
  std::vector<Vec4> xs;
  std::vector<double> scale;
  xs.reserve(pool.size());
  scale.reserve(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    xs.push_back(pool[i].bp.p.real());
    scale.push_back(std::sqrt(kappa[i]));
  }
  std::vector<LeviFlatSample> out;
  for (std::size_t i : farthest_point_order(xs, target, scale)) out.push_back(pool[i]);
  assign_weights(out);
  return out;
}

cplx complex_infinity() {
  const double inf = std::numeric_limits<double>::infinity();
  return {inf, inf};
}

bool is_infinite(cplx v) { return std::isinf(v.real()) || std::isinf(v.imag()); }

cplx torsion(const DeltaBoundary& db, const Jet2& psi_jet, double denom_tol) {
  const cplx Lbar_psi = std::conj(apply_holo(db.frame.L, psi_jet));
  const cplx D = 0.5 * Lbar_psi + db.hess_NL;
  if (std::abs(D) < denom_tol) return complex_infinity();
  return 1.0 / D;
}

cplx torsion(const Domain& domain, const FieldProgram& psi, const BoundaryPoint& bp,
             double denom_tol, const DeltaOptions& opts) {
  const DeltaBoundary db = delta_boundary(domain, bp, opts);
  return torsion(db, jet_eval(psi, bp.p), denom_tol);
}

cplx torsion_unreduced(const Jet2& f, const Complex2Point& p, double denom_tol) {
  const Frame fr = frame_at(f, p);
  const double grad = 2.0 * fr.s;
  const cplx H = hess_pair(f, fr.N, fr.L);
  if (std::abs(H) < denom_tol * grad) return complex_infinity();
  return grad / H;
}

double holo_c1_seminorm(const std::vector<cplx>& values, const std::vector<cplx>& Lvalues) {
  if (values.empty() || Lvalues.empty()) throw EmptyInput("seminorm of an empty sample list");
  if (values.size() != Lvalues.size()) throw EmptyInput("value lists differ in length");
  double a = 0.0, b = 0.0;
  for (const auto& v : values) a = std::max(a, std::abs(v));
  for (const auto& v : Lvalues) b = std::max(b, std::abs(v));
  return a + b;
}

}  // namespace dfindex
