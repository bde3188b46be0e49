#include "dfindex/conditions.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "dfindex/errors.hpp"
#include "dfindex/format.hpp"
#include "dfindex/parallel.hpp"
#include "point_index.hpp"

namespace dfindex {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_sigma(const std::vector<LeviFlatSample>& sigma) {
  if (sigma.empty()) throw EmptySigma("no Levi-flat samples: the condition is vacuous");
}

cplx denominator(const DeltaBoundary& db, const Jet2& psi_jet) {
  return 0.5 * std::conj(apply_holo(db.frame.L, psi_jet)) + db.hess_NL;
}

nlohmann::json num(double v) { return json_real(v); }
std::string fmt(double v) { return csv_real(v); }

std::vector<Jet2> psi_jets(const FieldProgram& psi, const std::vector<LeviFlatSample>& sigma) {
  std::vector<Jet2> out(sigma.size());
  parallel_for(sigma.size(), [&](std::size_t i) { out[i] = jet_eval(psi, sigma[i].bp.p); });
  return out;
}

// Jet of f g; both real.
Jet2 product(const Jet2& f, const Jet2& g) {
  Jet2 r;
  r.val = f.val * g.val;
  r.d = f.d * g.val + f.val * g.d;
  r.h_mix = f.h_mix * g.val + f.val * g.h_mix + f.d * g.d.adjoint() + g.d * f.d.adjoint();
  r.h_hol = f.h_hol * g.val + f.val * g.h_hol + f.d * g.d.transpose() + g.d * f.d.transpose();
  return r;
}

double raw_ratio(const DeltaBoundary& db, const FieldProgram& exp_psi) {
  double f[3];
  for (int k = 0; k < 3; ++k) {
    const Complex2Point& q = db.offset_points[k];
    const Jet2 J = product(db.offset_jets[k], jet_eval(exp_psi, q));
    const Frame fr = frame_at(J, q);
    const double LL = hess_pair(J, fr.L, fr.L).real();
    f[k] = LL / (-J.val) * std::norm(apply_holo(fr.N, J)) / std::norm(hess_pair(J, fr.L, fr.N));
  }
  return (f[0] - 6.0 * f[1] + 8.0 * f[2]) / 3.0;
}

bool all_closed(const std::vector<LeviFlatSample>& sigma) {
  std::vector<Vec4> pts;
  pts.reserve(sigma.size());
  for (const auto& s : sigma) pts.push_back(s.bp.p.real());
  return looks_closed(pts);
}

}  // namespace

const char* branch_name(Branch b) {
  return b == Branch::finite_torsion ? "finite-torsion" : "zero-denominator";
}

SigmaData prepare_sigma(const Domain& domain, const std::vector<LeviFlatSample>& sigma,
                        bool third_order, const ConditionOptions& opts) {
  require_sigma(sigma);
  SigmaData d;
  const std::size_t n = sigma.size();
  d.boundary.resize(n);
  d.scalars.resize(n);
  if (third_order) d.third.resize(n);
  parallel_for(n, [&](std::size_t i) {
    d.boundary[i] = delta_boundary(domain, sigma[i].bp, opts.delta);
    d.scalars[i] = covariant_scalars(d.boundary[i].frame);
    if (third_order) d.third[i] = delta_third(domain, sigma[i].bp, d.boundary[i], opts.delta);
  });
  d.C = constant_C(d.scalars);
  return d;
}

cplx L_Lbar(const Jet2& psi, const Frame& fr) {
  cplx acc{};
  for (int j = 0; j < 2; ++j) {
    const cplx LconjLj = fr.L(0) * std::conj(fr.dL(j, 2)) + fr.L(1) * std::conj(fr.dL(j, 3));
    acc += LconjLj * std::conj(psi.d(j));
  }
  return acc + hess_pair(psi, fr.L, fr.L);
}

ConditionReport first_condition(const SigmaData& data, const FieldProgram& psi,
                                const std::vector<LeviFlatSample>& sigma,
                                const ConditionOptions& opts) {
  require_sigma(sigma);
  if (data.third.size() != sigma.size()) {
    throw SpecError("first condition needs third-order signed-distance data");
  }
  const auto pj = psi_jets(psi, sigma);
  const FieldProgram exp_psi = exp(psi);
  std::vector<double> raw(sigma.size());
  parallel_for(sigma.size(), [&](std::size_t i) { raw[i] = raw_ratio(data.boundary[i], exp_psi); });
  ConditionReport rep;
  rep.condition = "first";
  rep.C = data.C;
  rep.min_lhs = kInf;
  std::vector<cplx> tv, ltv;
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    PointRecord r;
    r.point = sigma[i].bp.p;
    r.weight = sigma[i].weight;
    const auto& db = data.boundary[i];
    r.denominator = denominator(db, pj[i]);
    if (std::abs(r.denominator) < opts.denom_tol) {
      r.branch = Branch::zero_denominator;
      r.lhs = kInf;
      r.torsion = complex_infinity();
      r.L_torsion = complex_infinity();
    } else {
      const cplx D = r.denominator;
      r.torsion = 1.0 / D;
      r.L_torsion = -(0.5 * L_Lbar(pj[i], db.frame) + data.third[i].L_hess_NL) / (D * D);
      r.lhs = 2.5 + 3.75 * data.C * std::abs(r.torsion) + 0.5 * std::abs(r.L_torsion);
      if (r.lhs > 1.0) r.implied_eta_bound = 1.0 - 1.0 / r.lhs;
      tv.push_back(r.torsion);
      ltv.push_back(r.L_torsion);
    }
    r.rhs = r.lhs;
    if (std::isfinite(raw[i])) r.raw_ratio = raw[i];
    rep.min_lhs = std::min(rep.min_lhs, r.lhs);
    rep.per_point.push_back(r);
  }
  if (std::isfinite(rep.min_lhs) && rep.min_lhs > 1.0) rep.implied_index_bound = 1.0 - 1.0 / rep.min_lhs;
  if (!tv.empty()) rep.torsion_c1_norm = holo_c1_seminorm(tv, ltv);
  rep.closed_surface = all_closed(sigma);
  return rep;
}

ConditionReport first_condition(const Domain& domain, const FieldProgram& psi,
                                const std::vector<LeviFlatSample>& sigma,
                                const ConditionOptions& opts) {
  return first_condition(prepare_sigma(domain, sigma, true, opts), psi, sigma, opts);
}

Constants12 constants_c1_c2(const SigmaData& data) {
  if (data.boundary.empty()) throw EmptySigma("no Levi-flat samples: the condition is vacuous");
  if (data.third.size() != data.boundary.size()) {
    throw SpecError("C2 needs third-order signed-distance data");
  }
  double max_hnl = 0.0;
  double max_c2 = -kInf;
  for (std::size_t i = 0; i < data.boundary.size(); ++i) {
    max_hnl = std::max(max_hnl, std::abs(data.boundary[i].hess_NL));
    max_c2 = std::max(max_c2, (-data.third[i].L_hess_NL + data.third[i].hess_N_LbarL).real());
  }
  return {2.0 * data.C + 2.0 * max_hnl, 0.5 * max_c2};
}

Constants12 constants_c1_c2(const Domain& domain, const std::vector<LeviFlatSample>& sigma,
                            const ConditionOptions& opts) {
  return constants_c1_c2(prepare_sigma(domain, sigma, true, opts));
}

ConditionReport second_condition(const SigmaData& data, const FieldProgram& psi, double eta,
                                 const std::vector<LeviFlatSample>& sigma,
                                 const ConditionOptions& opts) {
  require_sigma(sigma);
  if (!(eta > 0.0 && eta < 1.0)) throw SpecError("eta must lie in (0, 1)");
  const Constants12 k = constants_c1_c2(data);
  const auto pj = psi_jets(psi, sigma);
  ConditionReport rep;
  rep.condition = "second";
  rep.C = data.C;
  rep.C1 = k.C1;
  rep.C2 = k.C2;
  rep.eta = eta;
  const double lhs = 1.0 / (1.0 - eta) - 1.0;
  rep.min_lhs = lhs;
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    PointRecord r;
    r.point = sigma[i].bp.p;
    r.weight = sigma[i].weight;
    const auto& db = data.boundary[i];
    r.denominator = denominator(db, pj[i]);
    r.lhs = lhs;
    const double a = std::abs(r.denominator);
    if (a < opts.denom_tol) {
      r.branch = Branch::zero_denominator;
      r.rhs = kInf;
      r.holds = true;
    } else {
      const double hpsi = hess_pair(pj[i], db.frame.L, db.frame.L).real();
      r.rhs = (k.C2 - 0.25 * hpsi) / (a * a) + k.C1 / a;
      r.holds = lhs <= r.rhs;
      r.torsion = 1.0 / r.denominator;
    }
    if (!r.holds) ++rep.violations;
    rep.per_point.push_back(r);
  }
  rep.closed_surface = all_closed(sigma);
  return rep;
}

ConditionReport second_condition(const Domain& domain, const FieldProgram& psi, double eta,
                                 const std::vector<LeviFlatSample>& sigma,
                                 const ConditionOptions& opts) {
  return second_condition(prepare_sigma(domain, sigma, true, opts), psi, eta, sigma, opts);
}

ConditionReport improved_second_bound(const SigmaData& data, const FieldProgram& psi, int n,
                                      const std::vector<LeviFlatSample>& sigma,
                                      const ConditionOptions& /*opts*/) {
  require_sigma(sigma);
  if (n < 1) throw SpecError("n must be a positive integer");
  const Constants12 k = constants_c1_c2(data);
  const auto pj = psi_jets(psi, sigma);
  const double nn = static_cast<double>(n);
  ConditionReport rep;
  rep.condition = "improved-second";
  rep.C = data.C;
  rep.C1 = k.C1;
  rep.C2 = k.C2;
  rep.n = n;
  rep.min_lhs = kInf;
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    PointRecord r;
    r.point = sigma[i].bp.p;
    r.weight = sigma[i].weight;
    const auto& db = data.boundary[i];
    r.denominator = denominator(db, pj[i]);
    r.lhs = std::abs(r.denominator);
    const double hpsi = hess_pair(pj[i], db.frame.L, db.frame.L).real();
    r.rhs = (k.C1 + std::sqrt(nn) * (1.0 + k.C1 * k.C1 / nn + (4.0 * k.C2 - hpsi))) / (2.0 * nn);
    r.holds = r.lhs <= r.rhs;
    if (!r.holds) ++rep.violations;
    rep.min_lhs = std::min(rep.min_lhs, r.lhs);
    rep.per_point.push_back(r);
  }
  rep.closed_surface = all_closed(sigma);
  return rep;
}

ConditionReport improved_second_bound(const Domain& domain, const FieldProgram& psi, int n,
                                      const std::vector<LeviFlatSample>& sigma,
                                      const ConditionOptions& opts) {
  return improved_second_bound(prepare_sigma(domain, sigma, true, opts), psi, n, sigma, opts);
}

double l1_torsion_integral(const SigmaData& data, const FieldProgram& psi,
                           const std::vector<LeviFlatSample>& sigma) {
  require_sigma(sigma);
  const auto pj = psi_jets(psi, sigma);
  double acc = 0.0;
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    acc += std::abs(denominator(data.boundary[i], pj[i])) * sigma[i].weight;
  }
  return acc;
}

double l1_torsion_integral(const Domain& domain, const FieldProgram& psi,
                           const std::vector<LeviFlatSample>& sigma,
                           const ConditionOptions& opts) {
  return l1_torsion_integral(prepare_sigma(domain, sigma, false, opts), psi, sigma);
}

bool looks_closed(const std::vector<Vec4>& pts, std::size_t k) {
  const std::size_t n = pts.size();
  if (k < 3 || n <= k) return false;
  std::vector<char> edge(n, 0);
  const detail::PointIndex index(pts);
  parallel_for(n, [&](std::size_t i) {
    std::vector<Vec4> off;
    off.reserve(k);
    for (std::size_t j : index.nearest(pts[i], k + 1)) {
      if (j != i && off.size() < k) off.push_back(pts[j] - pts[i]);
    }
    Mat4 cov = Mat4::Zero();
    for (const auto& v : off) cov += v * v.transpose();
    const Eigen::SelfAdjointEigenSolver<Mat4> es(cov);
    const Vec4 e1 = es.eigenvectors().col(3), e2 = es.eigenvectors().col(2);
    std::vector<double> ang;
    ang.reserve(off.size());
    for (const auto& v : off) ang.push_back(std::atan2(v.dot(e2), v.dot(e1)));
    std::sort(ang.begin(), ang.end());
    double gap = ang.front() + 2.0 * std::numbers::pi - ang.back();
    for (std::size_t m = 1; m < ang.size(); ++m) gap = std::max(gap, ang[m] - ang[m - 1]);
    edge[i] = gap > 0.9 * std::numbers::pi;
  });
  const auto flagged = static_cast<std::size_t>(std::count(edge.begin(), edge.end(), 1));
  return 100 * flagged < n;
}

nlohmann::json ConditionReport::to_json() const {
  nlohmann::json j;
  j["condition"] = condition;
  j["constants"] = {{"C", C}};
  if (C1) j["constants"]["C1"] = *C1;
  if (C2) j["constants"]["C2"] = *C2;
  if (eta) j["eta"] = *eta;
  if (n) j["n"] = *n;
  j["summary"] = {{"min_lhs", num(min_lhs)},
                  {"implied_index_bound", implied_index_bound ? nlohmann::json(*implied_index_bound)
                                                              : nlohmann::json(nullptr)},
                  {"violations", violations},
                  {"samples", per_point.size()},
                  {"closed_surface_heuristic", closed_surface}};
  if (torsion_c1_norm) j["summary"]["torsion_c1_norm"] = *torsion_c1_norm;
  if (l1_integral) j["summary"]["l1_torsion_integral"] = *l1_integral;
  if (!closed_surface) {
    j["summary"]["annotation"] =
        "the Levi-flat sample cloud appears to have an edge; results that assume a closed "
        "surface are doubtful";
  }
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& r : per_point) {
    const Vec4 x = r.point.real();
    nlohmann::json p;
    p["point"] = {x[0], x[1], x[2], x[3]};
    p["branch"] = branch_name(r.branch);
    p["lhs"] = num(r.lhs);
    p["rhs"] = num(r.rhs);
    p["holds"] = r.holds;
    p["implied_eta_bound"] =
        r.implied_eta_bound ? nlohmann::json(*r.implied_eta_bound) : nlohmann::json(nullptr);
    p["torsion"] = {num(r.torsion.real()), num(r.torsion.imag())};
    if (r.raw_ratio) p["raw_ratio"] = *r.raw_ratio;
    p["weight"] = r.weight;
    pts.push_back(p);
  }
  j["per_point"] = pts;
  return j;
}

std::string ConditionReport::to_csv() const {
  std::ostringstream os;
  os << "re_z,im_z,re_w,im_w,branch,lhs,rhs,holds\n";
  for (const auto& r : per_point) {
    const Vec4 x = r.point.real();
    os << fmt(x[0]) << ',' << fmt(x[1]) << ',' << fmt(x[2]) << ',' << fmt(x[3]) << ','
       << branch_name(r.branch) << ',' << fmt(r.lhs) << ',' << fmt(r.rhs) << ','
       << (r.holds ? "true" : "false") << '\n';
  }
  return os.str();
}

nlohmann::json vacuous_report(const std::string& condition, const std::string& reason) {
  return {{"condition", condition}, {"vacuous", true}, {"reason", reason}};
}

}  // namespace dfindex
