#include "dfindex/certifier.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "dfindex/parallel.hpp"

namespace dfindex {

PsiFamily PsiFamily::default_family() {
  using FP = FieldProgram;
  PsiFamily f;
  f.basis = {FP::constant(1.0), FP::re_z(),   FP::im_z(),
             FP::re_w(),        FP::im_w(),   FP::abs2_z(),
             FP::abs2_w(),      FP::re_z() * FP::re_w() + FP::im_z() * FP::im_w(),
             FP::im_z() * FP::re_w() - FP::re_z() * FP::im_w()};
  f.names = {"1", "re_z", "im_z", "re_w", "im_w", "abs2_z", "abs2_w", "re_z_wbar", "im_z_wbar"};
  return f;
}

FieldProgram PsiFamily::program(const std::vector<double>& c) const {
  FieldProgram out;
  bool first = true;
  for (std::size_t k = 0; k < basis.size() && k < c.size(); ++k) {
    if (c[k] == 0.0) continue;
    FieldProgram term = c[k] * basis[k];
    out = first ? term : out + term;
    first = false;
  }
  return out;
}

RealJet times_exp(const RealJet& rho, const RealJet& psi) {
  const double e = std::exp(psi.val);
  RealJet r;
  r.val = e * rho.val;
  r.grad = e * (rho.grad + rho.val * psi.grad);
  const Mat4 cross = rho.grad * psi.grad.transpose();
  r.hess = e * (rho.hess + cross + cross.transpose() +
                rho.val * (psi.hess + psi.grad * psi.grad.transpose()));
  return r;
}

std::vector<Complex2Point> interior_plan(const Domain& domain, const SamplePlan& plan) {
  if (plan.count == 0) throw SpecError("sample count must be at least 1");
  if (!(plan.min_depth > 0.0) || !(plan.tubular_width >= plan.min_depth)) {
    throw SpecError("need 0 < min_depth <= tubular_width");
  }
  if (plan.levels < 1) throw SpecError("need at least one depth level");
  const std::size_t levels = static_cast<std::size_t>(plan.levels);
  const std::size_t n_base = (plan.count + levels - 1) / levels;
  const auto base = refine_leviflat(domain, sample_boundary(domain, n_base, plan.seed));
  std::vector<double> depths(levels);
  for (std::size_t l = 0; l < levels; ++l) {
    const double f = levels == 1 ? 0.0 : static_cast<double>(l) / static_cast<double>(levels - 1);
    depths[l] = plan.min_depth * std::pow(plan.tubular_width / plan.min_depth, f);
  }
  std::vector<Complex2Point> out;
  out.reserve(plan.count);
  for (const auto& bp : base) {
    const Vec4 n = unit_normal(bp.rho_jet);
    for (double d : depths) {
      if (out.size() >= plan.count) break;
      out.push_back(Complex2Point::from_real(bp.p.real() - d * n));
    }
  }
  return out;
}

namespace {

SampleTerms make_terms(const RealJet& r, const Complex2Point& q, double depth) {
  SampleTerms t;
  t.q = q;
  t.depth = depth;
  if (!(r.val < 0.0)) {
    t.error = "defining function is not negative at the sample";
    return t;
  }
  const Jet2 J = to_wirtinger(r);
  Frame fr;
  try {
    fr = frame_at(J, q);
  } catch (const DegenerateGradient& e) {
    t.error = e.what();
    return t;
  }
  const HermitianForm2 H = hessian_LN(J, fr);
  const cplx Lr = apply_holo(fr.L, J);
  const cplx Nr = apply_holo(fr.N, J);
  const double m = -r.val;
  t.A = H.a_LL;
  t.B = H.a_LN;
  t.D0 = H.a_NN;
  t.A_barrier = std::norm(Lr) / m;
  t.B_barrier = Lr * std::conj(Nr) / m;
  t.Dk = std::norm(Nr) / m;
  t.ok = std::isfinite(t.A) && std::isfinite(t.D0) && std::isfinite(t.Dk) &&
         std::isfinite(std::abs(t.B));
  if (!t.ok) t.error = "non-finite form entries";
  return t;
}

}  // namespace

HermitianForm2 SampleTerms::form(double eta) const {
  const double s = 1.0 - eta;
  HermitianForm2 h;
  h.a_LL = A + s * A_barrier;
  h.a_LN = B + s * B_barrier;
  h.a_NN = D0 + s * Dk;
  return h;
}

HermitianForm2 composite_hessian(const Jet2& rho_jet, double eta, const Complex2Point& q) {
  if (!(rho_jet.val < 0.0)) throw DomainError("composite Hessian needs rho(q) < 0");
  const Frame fr = frame_at(rho_jet, q);
  HermitianForm2 h = hessian_LN(rho_jet, fr);
  const cplx Lr = apply_holo(fr.L, rho_jet);
  const cplx Nr = apply_holo(fr.N, rho_jet);
  const double c = (1.0 - eta) / (-rho_jet.val);
  h.a_LL += c * std::norm(Lr);
  h.a_LN += c * Lr * std::conj(Nr);
  h.a_NN += c * std::norm(Nr);
  return h;
}

HermitianForm2 composite_hessian(const Domain& domain, const FieldProgram& psi, double eta,
                                 const Complex2Point& q) {
  const RealJet r = times_exp(domain.rho().eval_real(q), psi.eval_real(q));
  return composite_hessian(to_wirtinger(r), eta, q);
}

Positivity positivity_check(const HermitianForm2& H, double psd_tol) {
  const double A = H.a_LL, D = H.a_NN, b = std::abs(H.a_LN);
  const double s = std::max({std::abs(A), std::abs(D), b, 1.0});
  Positivity p;
  p.discriminant = b * b - A * D;
  p.pass = A >= -psd_tol * s && D >= -psd_tol * s && p.discriminant <= psd_tol * s * s;
  p.margin = std::min({A, D, -p.discriminant / s});
  return p;
}

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::certified:
      return "certified";
    case Verdict::refuted:
      return "refuted";
    case Verdict::inconclusive:
      return "inconclusive";
  }
  return "inconclusive";
}

nlohmann::json CertReport::to_json() const {
  nlohmann::json j;
  j["verdict"] = verdict_name(verdict);
  j["eta"] = eta;
  j["sampled"] = true;
  if (witness) {
    const Vec4 x = witness->point.real();
    j["witness"] = {{"point", {x[0], x[1], x[2], x[3]}},
                    {"margin", witness->margin},
                    {"depth", witness->depth}};
  } else {
    j["witness"] = nullptr;
  }
  j["margin"] = margin;
  j["samples_used"] = samples_used;
  j["failures"] = failures;
  j["errors"] = errors;
  j["zero_LN_flags"] = zero_LN_flags;
  j["diagnostics"] = diagnostics;
  return j;
}

CertReport certify_terms(const std::vector<SampleTerms>& terms, double eta, double psd_tol,
                         double denom_tol) {
  CertReport rep;
  rep.eta = eta;
  rep.margin = std::numeric_limits<double>::infinity();
  double worst = std::numeric_limits<double>::infinity();
  std::size_t worst_i = terms.size();
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const SampleTerms& t = terms[i];
    if (!t.ok) {
      ++rep.errors;
      if (rep.diagnostics.size() < 10) rep.diagnostics.push_back(t.error);
      continue;
    }
    ++rep.samples_used;
    const HermitianForm2 H = t.form(eta);
    const Positivity p = positivity_check(H, psd_tol);
    rep.margin = std::min(rep.margin, p.margin);
    if (std::abs(H.a_LL) <= 1e-6 && std::abs(H.a_LN) < denom_tol) ++rep.zero_LN_flags;
    if (!p.pass) {
      ++rep.failures;
      // The shallowest failure is reported: the boundary limit decides the
      // exponent, deeper failures may be artefacts of the tubular width.
      const bool shallower = worst_i == terms.size() || t.depth < terms[worst_i].depth;
      const bool same_depth = worst_i != terms.size() && t.depth == terms[worst_i].depth;
      if (shallower || (same_depth && p.margin < worst)) {
        worst = p.margin;
        worst_i = i;
      }
    }
  }
  if (rep.failures > 0) {
    rep.verdict = Verdict::refuted;
    rep.witness = Witness{terms[worst_i].q, worst, terms[worst_i].depth};
  } else if (rep.errors > 0 || rep.samples_used == 0) {
    rep.verdict = Verdict::inconclusive;
  } else {
    rep.verdict = Verdict::certified;
  }
  if (rep.samples_used == 0) rep.margin = 0.0;
  return rep;
}

CertReport certify_eta(const EtaTrial& trial, const Domain& domain, double psd_tol,
                       double denom_tol) {
  if (!(trial.eta > 0.0 && trial.eta < 1.0)) throw SpecError("eta must lie in (0, 1)");
  std::vector<Complex2Point> pts;
  try {
    pts = interior_plan(domain, trial.samples);
  } catch (const SpecError&) {
    throw;
  } catch (const Error& e) {
    CertReport rep;
    rep.eta = trial.eta;
    rep.diagnostics.push_back(std::string("sample plan failed: ") + e.what());
    return rep;
  }
  std::vector<SampleTerms> terms(pts.size());
  parallel_for(pts.size(), [&](std::size_t i) {
    try {
      const RealJet r = times_exp(domain.rho().eval_real(pts[i]), trial.psi.eval_real(pts[i]));
      terms[i] = make_terms(r, pts[i], 0.0);
    } catch (const Error& e) {
      terms[i].q = pts[i];
      terms[i].error = e.what();
    }
  });
  const std::size_t levels = static_cast<std::size_t>(trial.samples.levels);
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const double f = levels == 1 ? 0.0
                                 : static_cast<double>(i % levels) / static_cast<double>(levels - 1);
    terms[i].depth =
        trial.samples.min_depth * std::pow(trial.samples.tubular_width / trial.samples.min_depth, f);
  }
  return certify_terms(terms, trial.eta, psd_tol, denom_tol);
}

CertificationProblem::CertificationProblem(const Domain& domain, PsiFamily family,
                                           const SamplePlan& plan)
    : family_(std::move(family)) {
  if (family_.dim() > 32) throw SpecError("psi family dimension exceeds 32");
  points_ = interior_plan(domain, plan);
  const std::size_t n = points_.size();
  const std::size_t levels = static_cast<std::size_t>(plan.levels);
  depths_.resize(n);
  ok_.assign(n, 0);
  err_.resize(n);
  rho_.resize(n);
  basis_.assign(n, std::vector<RealJet>(family_.dim()));
  parallel_for(n, [&](std::size_t i) {
    const double f = levels == 1 ? 0.0
                                 : static_cast<double>(i % levels) / static_cast<double>(levels - 1);
    depths_[i] = plan.min_depth * std::pow(plan.tubular_width / plan.min_depth, f);
    try {
      rho_[i] = domain.rho().eval_real(points_[i]);
      for (std::size_t k = 0; k < family_.dim(); ++k) {
        basis_[i][k] = family_.basis[k].eval_real(points_[i]);
      }
      ok_[i] = 1;
    } catch (const Error& e) {
      err_[i] = e.what();
    }
  });
}

std::vector<SampleTerms> CertificationProblem::terms(const std::vector<double>& c) const {
  std::vector<SampleTerms> out(points_.size());
  parallel_for(points_.size(), [&](std::size_t i) {
    if (!ok_[i]) {
      out[i].q = points_[i];
      out[i].depth = depths_[i];
      out[i].error = err_[i];
      return;
    }
    RealJet psi;
    for (std::size_t k = 0; k < family_.dim() && k < c.size(); ++k) {
      if (c[k] == 0.0) continue;
      psi.val += c[k] * basis_[i][k].val;
      psi.grad += c[k] * basis_[i][k].grad;
      psi.hess += c[k] * basis_[i][k].hess;
    }
    out[i] = make_terms(times_exp(rho_[i], psi), points_[i], depths_[i]);
  });
  return out;
}

BisectionOutcome bisect_eta(const std::vector<SampleTerms>& terms, const IndexOptions& o) {
  if (!(o.bisect_tol >= 1e-4)) throw SpecError("bisect_tol must be at least 1e-4");
  BisectionOutcome out;
  double lo = 1e-3, hi = 1.0 - 1e-3;
  auto run = [&](double eta) {
    out.reports.push_back(certify_terms(terms, eta, o.psd_tol, o.denom_tol));
    return out.reports.back().verdict == Verdict::certified;
  };
  if (!run(lo)) return out;
  out.certified_any = true;
  if (run(hi)) {
    out.eta = hi;
    return out;
  }
  while (hi - lo > o.bisect_tol) {
    const double mid = 0.5 * (lo + hi);
    (run(mid) ? lo : hi) = mid;
  }
  out.eta = lo;
  return out;
}

namespace {

// Continuous companion of the bisection result: the smallest per-sample
// threshold eta (exact for the affine dependence on 1 - eta), squashed below 0.
double surrogate(const std::vector<SampleTerms>& terms) {
  double worst = 1.0;
  for (const auto& t : terms) {
    double score;
    if (!t.ok) {
      score = -2.0;
    } else if (t.A <= 0.0) {
      score = -1.0 + t.A / (1.0 + std::abs(t.A));
    } else {
      const double need = (std::norm(t.B) / t.A - t.D0) / t.Dk;
      const double eta = std::min(1.0, 1.0 - std::max(0.0, need));
      score = eta >= 0.0 ? eta : eta / (1.0 - eta);
    }
    worst = std::min(worst, score);
  }
  return worst;
}

struct Search {
  const CertificationProblem* problem = nullptr;
  const IndexOptions* opts = nullptr;
  std::size_t evaluations = 0;
  bool over_budget = false;
  double best_value = -std::numeric_limits<double>::infinity();
  std::vector<double> best_params;
  BisectionOutcome best_outcome;

  double evaluate(const std::vector<double>& c) {
    const auto terms = problem->terms(c);
    BisectionOutcome b = bisect_eta(terms, *opts);
    const double value = b.eta + 1e-3 * surrogate(terms);
    if (value > best_value) {
      best_value = value;
      best_params = c;
      best_outcome = std::move(b);
    }
    return value;
  }
};

double nm_objective(const gsl_vector* x, void* data) {
  auto* s = static_cast<Search*>(data);
  if (s->evaluations >= s->opts->search_budget) {
    s->over_budget = true;
    return 1e300;
  }
  ++s->evaluations;
  std::vector<double> c(x->size);
  for (std::size_t k = 0; k < x->size; ++k) c[k] = gsl_vector_get(x, k);
  return -s->evaluate(c);
}

}  // namespace

IndexResult estimate_index(const CertificationProblem& problem, const IndexOptions& o) {
  if (!(o.bisect_tol >= 1e-4)) throw SpecError("bisect_tol must be at least 1e-4");
  const std::size_t dim = problem.family().dim();
  Search s;
  s.problem = &problem;
  s.opts = &o;
  s.evaluate(std::vector<double>(dim, 0.0));

  bool converged = true;
  if (dim > 0 && o.search_budget > 0) {
    gsl_set_error_handler_off();
    std::mt19937_64 rng(o.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    gsl_multimin_function fn{&nm_objective, dim, &s};
    gsl_vector* x = gsl_vector_alloc(dim);
    gsl_vector* step = gsl_vector_alloc(dim);
    gsl_multimin_fminimizer* m = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, dim);
    for (int r = 0; r <= o.restarts && !s.over_budget; ++r) {
      for (std::size_t k = 0; k < dim; ++k) {
        double v = s.best_params[k];
        if (r > 0) v += 0.5 * o.initial_step * gauss(rng);
        gsl_vector_set(x, k, v);
        gsl_vector_set(step, k, o.initial_step * (r > 0 ? (0.5 + 0.5 * std::abs(gauss(rng))) : 1.0));
      }
      gsl_multimin_fminimizer_set(m, &fn, x, step);
      converged = false;
      for (int it = 0; it < 100000 && !s.over_budget; ++it) {
        if (gsl_multimin_fminimizer_iterate(m) != GSL_SUCCESS) break;
        if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(m), 1e-4) == GSL_SUCCESS) {
          converged = true;
          break;
        }
      }
    }
    gsl_multimin_fminimizer_free(m);
    gsl_vector_free(step);
    gsl_vector_free(x);
  }

  IndexResult res;
  res.eta_star = s.best_outcome.eta;
  res.certified_any = s.best_outcome.certified_any;
  res.best_params = s.best_params;
  res.best_psi = problem.family().program(s.best_params);
  res.reports = s.best_outcome.reports;
  res.evaluations = s.evaluations + 1;
  res.budget_exhausted = s.over_budget && !converged;
  if (res.budget_exhausted && o.strict_budget) {
    throw BudgetExhausted("search budget exhausted before the simplex converged", res);
  }
  return res;
}

IndexResult estimate_index(const Domain& domain, const PsiFamily& family, const SamplePlan& plan,
                           const IndexOptions& opts) {
  return estimate_index(CertificationProblem(domain, family, plan), opts);
}

nlohmann::json IndexResult::to_json(const PsiFamily& family) const {
  nlohmann::json j;
  j["eta_star"] = eta_star;
  j["certified_any"] = certified_any;
  nlohmann::json params = nlohmann::json::object();
  for (std::size_t k = 0; k < best_params.size(); ++k) {
    params[k < family.names.size() ? family.names[k] : std::to_string(k)] = best_params[k];
  }
  j["best_params"] = params;
  j["best_psi"] = best_psi.to_json();
  j["evaluations"] = evaluations;
  j["budget_exhausted"] = budget_exhausted;
  nlohmann::json reps = nlohmann::json::array();
  for (const auto& r : reports) reps.push_back(r.to_json());
  j["reports"] = reps;
  return j;
}

}  // namespace dfindex
