#include "dfindex/domain.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <tuple>

#include "dfindex/errors.hpp"
#include "dfindex/parallel.hpp"

namespace dfindex {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kResidualTol = 1e-10;
constexpr std::size_t kCloudSize = 256;

nlohmann::json box_json(const Box4& b) {
  nlohmann::json j = nlohmann::json::array();
  for (int k = 0; k < 4; ++k) j.push_back({b.lo[k], b.hi[k]});
  return j;
}

Box4 box_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 4) throw SpecError("bbox must be 4 [lo, hi] pairs");
  Box4 b;
  for (int k = 0; k < 4; ++k) {
    if (!j[k].is_array() || j[k].size() != 2 || !j[k][0].is_number() || !j[k][1].is_number()) {
      throw SpecError("bbox must be 4 [lo, hi] pairs");
    }
    b.lo[k] = j[k][0].get<double>();
    b.hi[k] = j[k][1].get<double>();
    if (!(b.lo[k] < b.hi[k])) throw SpecError("bbox needs lo < hi in every coordinate");
  }
  return b;
}

double number(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number()) {
    throw SpecError(std::string("domain needs numeric \"") + key + "\"");
  }
  return j[key].get<double>();
}

// Newton iteration along the gradient line towards {rho = 0}.
std::optional<Vec4> gradient_flow(const FieldProgram& rho, const Vec4& start, double max_step,
                                  double tol) {
  Vec4 p = start;
  for (int it = 0; it < 200; ++it) {
    RealJet J;
    try {
      J = rho.eval_real(Complex2Point::from_real(p));
    } catch (const DomainError&) {
      return std::nullopt;
    }
    if (std::abs(J.val) <= tol) return p;
    const double gg = J.grad.squaredNorm();
    if (!(gg > 1e-28)) return std::nullopt;
    Vec4 step = -J.val / gg * J.grad;
    if (step.norm() > max_step) step *= max_step / step.norm();
    bool moved = false;
    for (int k = 0; k < 40; ++k) {
      try {
        const double r = rho.value(Complex2Point::from_real(p + step));
        if (std::abs(r) < std::abs(J.val)) {
          moved = true;
          break;
        }
      } catch (const DomainError&) {
      }
      step *= 0.5;
    }
    if (!moved) return std::nullopt;
    p += step;
  }
  return std::nullopt;
}

Eigen::Matrix<double, 5, 1> lagrange_residual(const Vec4& p, double lam, const Vec4& q,
                                              const RealJet& J) {
  Eigen::Matrix<double, 5, 1> F;
  F.head<4>() = p - q + lam * J.grad;
  F[4] = J.val;
  return F;
}

}  // namespace

bool Box4::contains(const Vec4& x) const {
  return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
}

DomainSpec DomainSpec::ball(double radius) {
  DomainSpec s;
  s.kind = DomainKind::ball;
  s.radius = radius;
  return s;
}

DomainSpec DomainSpec::ellipsoid(double a1, double a2) {
  DomainSpec s;
  s.kind = DomainKind::ellipsoid;
  s.a1 = a1;
  s.a2 = a2;
  return s;
}

DomainSpec DomainSpec::worm(double beta, std::optional<double> a) {
  DomainSpec s;
  s.kind = DomainKind::worm;
  s.beta = beta;
  s.worm_a = a.value_or(beta - kPi / 2.0 + 1.0);
  return s;
}

DomainSpec DomainSpec::custom(FieldProgram rho, Box4 bbox, Complex2Point interior) {
  DomainSpec s;
  s.kind = DomainKind::custom;
  s.custom_rho = std::move(rho);
  s.bbox = bbox;
  s.interior = interior;
  return s;
}

void validate(const DomainSpec& spec) {
  switch (spec.kind) {
    case DomainKind::ball:
      if (!(spec.radius > 0.0)) throw SpecError("ball radius must be positive");
      break;
    case DomainKind::ellipsoid:
      if (!(spec.a1 > 0.0) || !(spec.a2 > 0.0)) {
        throw SpecError("ellipsoid semi-axes must be positive");
      }
      break;
    case DomainKind::worm:
      if (!(spec.beta > kPi / 2.0)) {
        throw SpecError("worm domain requires beta > pi/2 (got beta = " +
                        std::to_string(spec.beta) + ")");
      }
      if (!(spec.worm_a > spec.beta - kPi / 2.0)) {
        throw SpecError("worm cutoff parameter a must exceed beta - pi/2");
      }
      if (spec.worm_a > 60.0) throw SpecError("worm cutoff parameter a too large (> 60)");
      break;
    case DomainKind::custom:
      if (!spec.custom_rho) throw SpecError("custom domain needs a defining-function program");
      if (!spec.bbox) throw SpecError("custom domain needs a bounding box");
      if (!spec.interior) throw SpecError("custom domain needs an interior witness point");
      break;
  }
  if (spec.interior && !spec.interior->finite()) throw SpecError("interior point not finite");
}

CutoffShape worm_cutoff(double beta, double a) {
  CutoffShape c;
  c.flat = beta - kPi / 2.0;
  c.width = a - c.flat;
  // value at |x| = a is scale * e^-2.
  c.scale = (1.0 + 1e-3) * std::exp(2.0);
  return c;
}

FieldProgram rho_program(const DomainSpec& spec) {
  validate(spec);
  using FP = FieldProgram;
  switch (spec.kind) {
    case DomainKind::ball:
      return FP::abs2_z() + FP::abs2_w() - FP::constant(spec.radius * spec.radius);
    case DomainKind::ellipsoid:
      return FP::constant(1.0 / (spec.a1 * spec.a1)) * FP::abs2_z() +
             FP::constant(1.0 / (spec.a2 * spec.a2)) * FP::abs2_w() - FP::constant(1.0);
    case DomainKind::worm: {
      const FP theta = log(FP::abs2_w());
      // |z + e^{i theta}|^2 - 1 = |z|^2 + 2 (x cos theta + y sin theta)
      return FP::abs2_z() + 2.0 * (FP::re_z() * cos(theta) + FP::im_z() * sin(theta)) +
             pow(cutoff(theta, worm_cutoff(spec.beta, spec.worm_a)), 2.0);
    }
    case DomainKind::custom:
      return *spec.custom_rho;
  }
  throw SpecError("unknown domain kind");
}

nlohmann::json DomainSpec::to_json() const {
  nlohmann::json j;
  switch (kind) {
    case DomainKind::ball:
      j["kind"] = "ball";
      j["radius"] = radius;
      break;
    case DomainKind::ellipsoid:
      j["kind"] = "ellipsoid";
      j["a1"] = a1;
      j["a2"] = a2;
      break;
    case DomainKind::worm:
      j["kind"] = "worm";
      j["beta"] = beta;
      j["a"] = worm_a;
      break;
    case DomainKind::custom:
      j["kind"] = "custom";
      j["rho"] = custom_rho->to_json();
      break;
  }
  if (bbox) j["bbox"] = box_json(*bbox);
  if (interior) {
    j["interior"] = {interior->z.real(), interior->z.imag(), interior->w.real(),
                     interior->w.imag()};
  }
  return j;
}

DomainSpec DomainSpec::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
    throw SpecError("domain must be an object with a string \"kind\"");
  }
  const std::string kind = j["kind"].get<std::string>();
  DomainSpec s;
  if (kind == "ball") {
    s = ball(j.contains("radius") ? number(j, "radius") : 1.0);
  } else if (kind == "ellipsoid") {
    s = ellipsoid(number(j, "a1"), number(j, "a2"));
  } else if (kind == "worm") {
    const double beta = number(j, "beta");
    std::optional<double> a;
    if (j.contains("a") && !j["a"].is_null()) a = number(j, "a");
    s = worm(beta, a);
  } else if (kind == "custom") {
    if (!j.contains("rho")) throw SpecError("custom domain needs \"rho\"");
    s.kind = DomainKind::custom;
    s.custom_rho = FieldProgram::from_json(j["rho"]);
  } else {
    throw SpecError("unknown domain kind \"" + kind + "\"");
  }
  if (j.contains("bbox")) s.bbox = box_from_json(j["bbox"]);
  if (j.contains("interior")) {
    const auto& p = j["interior"];
    if (!p.is_array() || p.size() != 4) throw SpecError("interior must be 4 real coordinates");
    Vec4 x;
    for (int k = 0; k < 4; ++k) {
      if (!p[k].is_number()) throw SpecError("interior must be 4 real coordinates");
      x[k] = p[k].get<double>();
    }
    s.interior = Complex2Point::from_real(x);
  }
  validate(s);
  return s;
}

Vec4 halton4(std::uint64_t index, const Vec4& shift) {
  static constexpr int bases[4] = {2, 3, 5, 7};
  Vec4 x;
  for (int k = 0; k < 4; ++k) {
    double f = 1.0, r = 0.0;
    std::uint64_t i = index;
    while (i > 0) {
      f /= bases[k];
      r += f * static_cast<double>(i % bases[k]);
      i /= bases[k];
    }
    x[k] = std::fmod(r + shift[k], 1.0);
  }
  return x;
}

Domain::Domain(DomainSpec spec) : spec_(std::move(spec)), rho_(rho_program(spec_)) {
  switch (spec_.kind) {
    case DomainKind::ball:
      bbox_.lo = Vec4::Constant(-1.05 * spec_.radius);
      bbox_.hi = Vec4::Constant(1.05 * spec_.radius);
      interior_ = {};
      break;
    case DomainKind::ellipsoid:
      bbox_.lo = -1.05 * Vec4(spec_.a1, spec_.a1, spec_.a2, spec_.a2);
      bbox_.hi = -bbox_.lo;
      interior_ = {};
      break;
    case DomainKind::worm: {
      const double R = 1.02 * std::exp(spec_.worm_a / 2.0);
      bbox_.lo = Vec4(-2.05, -2.05, -R, -R);
      bbox_.hi = -bbox_.lo;
      interior_ = {cplx{-1.0, 0.0}, cplx{1.0, 0.0}};
      break;
    }
    case DomainKind::custom:
      bbox_ = *spec_.bbox;
      interior_ = *spec_.interior;
      break;
  }
  if (spec_.bbox) bbox_ = *spec_.bbox;
  if (spec_.interior) interior_ = *spec_.interior;

  double r0 = 0.0;
  try {
    r0 = rho_.value(interior_);
  } catch (const DomainError& e) {
    throw SpecError(std::string("defining function undefined at interior witness: ") + e.what());
  }
  if (!(r0 < 0.0)) throw SpecError("defining function is not negative at the interior witness");
  rho_scale_ = std::max(1.0, std::abs(r0));

  const Vec4 extent = bbox_.hi - bbox_.lo;
  const double max_step = 0.25 * bbox_.diameter();
  for (std::uint64_t i = 1; cloud_.size() < kCloudSize && i <= 8 * kCloudSize; ++i) {
    const Vec4 u = halton4(i, Vec4::Constant(0.5));
    const Vec4 x = bbox_.lo + (extent.array() * u.array()).matrix();
    if (auto p = gradient_flow(rho_, x, max_step, 1e-12 * rho_scale_)) cloud_.push_back(*p);
  }
}

Vec4 unit_normal(const Jet2& rho_jet) {
  // Real gradient (f_x, f_y) = (2 Re f_z, -2 Im f_z) per complex coordinate.
  Vec4 g(2.0 * rho_jet.d(0).real(), -2.0 * rho_jet.d(0).imag(), 2.0 * rho_jet.d(1).real(),
         -2.0 * rho_jet.d(1).imag());
  const double n = g.norm();
  if (!(n > 0.0)) throw DegenerateGradient("vanishing gradient of defining function");
  return g / n;
}

BoundaryPoint make_boundary_point(const Domain& domain, const Complex2Point& p) {
  BoundaryPoint bp;
  bp.p = p;
  bp.rho_jet = jet_eval(domain.rho(), p);
  bp.foot_quality = std::abs(bp.rho_jet.val);
  return bp;
}

std::optional<Projection> project_from_seed(const Domain& domain, const Vec4& q,
                                            const Vec4& seed) {
  const FieldProgram& rho = domain.rho();
  auto eval = [&rho](const Vec4& x) -> std::optional<RealJet> {
    try {
      return rho.eval_real(Complex2Point::from_real(x));
    } catch (const DomainError&) {
      return std::nullopt;
    }
  };
  Vec4 p = seed;
  auto J = eval(p);
  if (!J) return std::nullopt;
  double gg = J->grad.squaredNorm();
  if (!(gg > 1e-28)) return std::nullopt;
  double lam = -(p - q).dot(J->grad) / gg;
  const double scale = 1.0 + q.norm();
  const double max_step = 0.5 * domain.bbox().diameter();

  auto F = lagrange_residual(p, lam, q, *J);
  double fn = F.norm();
  for (int it = 0; it < 100; ++it) {
    if (fn <= 1e-15 * scale) break;
    Eigen::Matrix<double, 5, 5> M = Eigen::Matrix<double, 5, 5>::Zero();
    M.topLeftCorner<4, 4>() = Mat4::Identity() + lam * J->hess;
    M.block<4, 1>(0, 4) = J->grad;
    M.block<1, 4>(4, 0) = J->grad.transpose();
    Eigen::Matrix<double, 5, 1> dx = M.fullPivLu().solve(-F);
    if (!dx.allFinite()) return std::nullopt;
    if (dx.head<4>().norm() > max_step) dx *= max_step / dx.head<4>().norm();
    bool accepted = false;
    for (int k = 0; k < 40; ++k) {
      const Vec4 p_new = p + dx.head<4>();
      const double lam_new = lam + dx[4];
      auto J_new = eval(p_new);
      if (J_new) {
        const auto F_new = lagrange_residual(p_new, lam_new, q, *J_new);
        const double fn_new = F_new.norm();
        if (fn_new < fn || (fn_new <= 2.0 * fn && fn <= 1e-12 * scale)) {
          p = p_new;
          lam = lam_new;
          J = J_new;
          F = F_new;
          const bool tiny_step = dx.head<4>().norm() <= 1e-15 * scale;
          fn = fn_new;
          accepted = true;
          if (tiny_step) it = 100;
          break;
        }
      }
      dx *= 0.5;
    }
    if (!accepted) break;
  }
  if (!(fn <= kResidualTol * scale)) return std::nullopt;

  Projection out;
  out.foot.p = Complex2Point::from_real(p);
  out.foot.rho_jet = to_wirtinger(*J);
  out.foot.foot_quality = std::abs(J->val);
  const Vec4 n = J->grad.normalized();
  out.sdist = (q - p).dot(n);
  return out;
}

Projection project_to_boundary(const Domain& domain, const Complex2Point& q_point) {
  if (!q_point.finite()) throw ConvergenceError("query point not finite");
  const Vec4 q = q_point.real();
  const double tol = 1e-12 * domain.rho_scale();
  std::vector<Vec4> seeds;
  if (auto p = gradient_flow(domain.rho(), q, 0.25 * domain.bbox().diameter(), tol)) {
    seeds.push_back(*p);
  }
  // Two nearest coarse-cloud points.
  const auto& cloud = domain.coarse_cloud();
  std::size_t best[2] = {cloud.size(), cloud.size()};
  double bestd[2] = {INFINITY, INFINITY};
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const double d = (cloud[i] - q).squaredNorm();
    if (d < bestd[0]) {
      bestd[1] = bestd[0];
      best[1] = best[0];
      bestd[0] = d;
      best[0] = i;
    } else if (d < bestd[1]) {
      bestd[1] = d;
      best[1] = i;
    }
  }
  for (auto b : best) {
    if (b < cloud.size()) seeds.push_back(cloud[b]);
  }

  std::optional<Projection> winner;
  double wd = INFINITY;
  for (const Vec4& s : seeds) {
    auto pr = project_from_seed(domain, q, s);
    if (!pr) continue;
    const double d = (pr->foot.p.real() - q).norm();
    if (d < wd) {
      wd = d;
      winner = pr;
    }
  }
  if (!winner) {
    throw ConvergenceError("boundary projection did not converge to residual 1e-10 from any seed");
  }
  return *winner;
}

Jet2 delta_jet(const Domain& domain, const Complex2Point& q, double h, Projection& centre) {
  centre = project_to_boundary(domain, q);
  if (!(h > 0.0)) h = 1e-4 * (1.0 + std::abs(centre.sdist));
  const Vec4 x = q.real();
  const Vec4 p0 = centre.foot.p.real();

  // [step][sign][k]
  double sd[2][2][4];
  Vec4 nrm[2][2][4];
  const double steps[2] = {h, 0.5 * h};
  for (int s = 0; s < 2; ++s) {
    for (int sg = 0; sg < 2; ++sg) {
      for (int k = 0; k < 4; ++k) {
        Vec4 off = Vec4::Zero();
        off[k] = (sg == 0 ? 1.0 : -1.0) * steps[s];
        auto pr = project_from_seed(domain, x + off, p0 + off);
        if (!pr) {
          throw TubularError("projection failed inside the finite-difference stencil");
        }
        if ((pr->foot.p.real() - p0).norm() > 10.0 * h) {
          throw TubularError("stencil foot points incoherent (near the medial axis)");
        }
        sd[s][sg][k] = pr->sdist;
        nrm[s][sg][k] = unit_normal(pr->foot.rho_jet);
      }
    }
  }
  RealJet r;
  r.val = centre.sdist;
  for (int k = 0; k < 4; ++k) {
    const double d_h = (sd[0][0][k] - sd[0][1][k]) / (2.0 * steps[0]);
    const double d_h2 = (sd[1][0][k] - sd[1][1][k]) / (2.0 * steps[1]);
    r.grad[k] = (4.0 * d_h2 - d_h) / 3.0;
    const Vec4 c_h = (nrm[0][0][k] - nrm[0][1][k]) / (2.0 * steps[0]);
    const Vec4 c_h2 = (nrm[1][0][k] - nrm[1][1][k]) / (2.0 * steps[1]);
    r.hess.col(k) = (4.0 * c_h2 - c_h) / 3.0;
  }
  r.hess = 0.5 * (r.hess + r.hess.transpose()).eval();
  return to_wirtinger(r);
}

Jet2 delta_jet(const Domain& domain, const Complex2Point& q, double h) {
  Projection centre;
  return delta_jet(domain, q, h, centre);
}

std::vector<BoundaryPoint> sample_boundary(const Domain& domain, std::size_t n,
                                           std::uint64_t seed) {
  if (n == 0) throw SpecError("sample count must be at least 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const Vec4 shift(uni(rng), uni(rng), uni(rng), uni(rng));
  const Box4& box = domain.bbox();
  const Vec4 extent = box.hi - box.lo;
  const double tol = 1e-12 * domain.rho_scale();
  const double max_step = 0.25 * box.diameter();

  std::vector<BoundaryPoint> out;
  out.reserve(n);
  std::set<std::array<long long, 4>> seen;
  const std::size_t budget = 100 * n;
  std::size_t next = 0;
  while (out.size() < n && next < budget) {
    const std::size_t batch = std::min(budget - next, std::max<std::size_t>(64, 2 * (n - out.size())));
    std::vector<std::optional<Projection>> results(batch);
    parallel_for(batch, [&](std::size_t i) {
      const Vec4 u = halton4(next + i + 1, shift);
      const Vec4 q = box.lo + (extent.array() * u.array()).matrix();
      if (auto p = gradient_flow(domain.rho(), q, max_step, tol)) {
        results[i] = project_from_seed(domain, q, *p);
      }
    });
    next += batch;
    for (auto& r : results) {
      if (out.size() >= n) break;
      if (!r || r->foot.foot_quality > 1e-10 * domain.rho_scale()) continue;
      const Vec4 x = r->foot.p.real();
      std::array<long long, 4> key;
      for (int k = 0; k < 4; ++k) key[k] = std::llround(x[k] * 1e9);
      if (!seen.insert(key).second) continue;
      out.push_back(r->foot);
    }
  }
  if (out.size() < n) {
    throw SpecError("found only " + std::to_string(out.size()) + " distinct boundary points of " +
                    std::to_string(n) + " requested within " + std::to_string(budget) +
                    " attempts");
  }
  return out;
}

}  // namespace dfindex
