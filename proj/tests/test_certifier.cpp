#include "doctest.h"

#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>

#include "dfindex/certifier.hpp"
#include "dfindex/errors.hpp"
#include "support.hpp"

using namespace dfindex;

namespace {

constexpr double kPi = std::numbers::pi;

const Domain& ball() {
  static const Domain d(DomainSpec::ball());
  return d;
}

const Domain& ellipsoid() {
  static const Domain d(DomainSpec::ellipsoid(1.0, 0.6));
  return d;
}

const Domain& worm() {
  static const Domain d(DomainSpec::worm(2.5 * kPi));
  return d;
}

SamplePlan plan(std::size_t count, std::uint64_t seed = 0) {
  SamplePlan p;
  p.count = count;
  p.seed = seed;
  return p;
}

// -(-f)^eta as a program, with f = rho * exp(psi).
FieldProgram composite(const FieldProgram& rho, const FieldProgram& psi, double eta) {
  return FieldProgram::constant(-1.0) * pow(FieldProgram::constant(-1.0) * rho * exp(psi), eta);
}

// Smallest eigenvalue of the Hessian of -(-rho)^eta on (L, N) for the worm
// with psi = 0. The normal entry dwarfs the others near the boundary, which
// is beyond the resolution of a grid search.
double direct_min_eigenvalue(const Complex2Point& q, double eta) {
  const FieldProgram rho = rho_program(worm().spec());
  const Jet2 phi = jet_eval(composite(rho, FieldProgram{}, eta), q);
  const Frame fr = frame_at(jet_eval(rho, q), q);
  const Eigen::SelfAdjointEigenSolver<Mat2c> es(hessian_LN(phi, fr).matrix());
  return es.eigenvalues()(0);
}

}  // namespace

TEST_CASE("positivity check examples") {
  HermitianForm2 id;
  id.a_LL = 1.0;
  id.a_NN = 1.0;
  const Positivity p = positivity_check(id);
  CHECK(p.pass);
  CHECK(p.margin == 1.0);

  HermitianForm2 bad = id;
  bad.a_LN = 2.0;
  const Positivity q = positivity_check(bad);
  CHECK_FALSE(q.pass);
  CHECK(q.discriminant == doctest::Approx(3.0));
  CHECK(q.margin < 0.0);

  HermitianForm2 neg = id;
  neg.a_NN = -1e-3;
  CHECK_FALSE(positivity_check(neg).pass);
}

TEST_CASE("positivity check against grid minimization") {
  std::mt19937_64 rng(2024);
  int disagreements = 0, decided = 0;
  for (int t = 0; t < 3000; ++t) {
    const HermitianForm2 H = oracle::random_form(rng);
    const Positivity p = positivity_check(H);
    if (std::abs(p.margin) < 1e-10) continue;
    ++decided;
    const double gmin = oracle::grid_min(H.matrix());
    if (p.pass != (gmin >= -1e-12)) ++disagreements;
  }
  CHECK(decided > 2000);
  CHECK(disagreements == 0);
}

TEST_CASE("composite form on the ball at (0.5, 0)") {
  const HermitianForm2 H = composite_hessian(ball(), FieldProgram{}, 0.5, {cplx(0.5, 0), cplx(0, 0)});
  CHECK(H.a_LL > 0.0);
  CHECK(H.a_NN > 0.0);
  CHECK(positivity_check(H).pass);
  CHECK(positivity_check(H).margin > 0.0);
  CHECK_THROWS_AS(composite_hessian(ball(), FieldProgram{}, 0.5, {cplx(1.5, 0), cplx(0, 0)}),
                  DomainError);
}

TEST_CASE("composite form is affine in 1 - eta") {
  const auto pts = interior_plan(worm(), plan(40, 3));
  const FieldProgram psi = 0.2 * FieldProgram::re_z() + 0.1 * FieldProgram::abs2_w();
  for (const auto& q : pts) {
    const auto h1 = composite_hessian(worm(), psi, 0.2, q);
    const auto h2 = composite_hessian(worm(), psi, 0.5, q);
    const auto h3 = composite_hessian(worm(), psi, 0.8, q);
    // Equal steps in eta give equal increments.
    const double s = 1.0 + std::abs(h1.a_NN) + std::abs(h1.a_LL) + std::abs(h1.a_LN);
    CHECK(std::abs((h1.a_LL - h2.a_LL) - (h2.a_LL - h3.a_LL)) < 1e-9 * s);
    CHECK(std::abs((h1.a_NN - h2.a_NN) - (h2.a_NN - h3.a_NN)) < 1e-9 * s);
    CHECK(std::abs((h1.a_LN - h2.a_LN) - (h2.a_LN - h3.a_LN)) < 1e-9 * s);
  }
}

TEST_CASE("composite form times its prefactor is the Hessian of -(-rho)^eta") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> c(-0.3, 0.3);
  const PsiFamily fam = PsiFamily::default_family();
  for (const Domain* d : {&ball(), &ellipsoid(), &worm()}) {
    const FieldProgram rho0 = rho_program(d->spec());
    for (const auto& q : interior_plan(*d, plan(30, 5))) {
      std::vector<double> coef(fam.dim());
      for (auto& v : coef) v = c(rng);
      // |w| reaches 25 on the worm; keep e^psi representable.
      for (std::size_t k = 6; k < coef.size(); ++k) coef[k] *= 0.01;
      const FieldProgram psi = fam.program(coef);
      const double eta = std::uniform_real_distribution<double>(0.05, 0.95)(rng);
      const HermitianForm2 H = composite_hessian(*d, psi, eta, q);

      const FieldProgram rho = rho0 * exp(psi);
      const Jet2 rj = jet_eval(rho, q);
      const Frame fr = frame_at(rj, q);
      const HermitianForm2 direct = hessian_LN(jet_eval(composite(rho0, psi, eta), q), fr);
      const double pref = eta * std::pow(-rj.val, eta - 1.0);
      const double scale = pref * (std::abs(H.a_LL) + std::abs(H.a_NN) + std::abs(H.a_LN));
      CHECK(std::abs(pref * H.a_LL - direct.a_LL) <= 1e-8 * scale);
      CHECK(std::abs(pref * H.a_NN - direct.a_NN) <= 1e-8 * scale);
      CHECK(std::abs(pref * H.a_LN - direct.a_LN) <= 1e-8 * scale);
    }
  }
}

TEST_CASE("ball is certified close to 1") {
  const CertReport r = certify_eta({0.99, FieldProgram{}, plan(10000)}, ball());
  CHECK(r.verdict == Verdict::certified);
  CHECK(r.margin > 0.0);
  CHECK(r.samples_used == 10000);
  CHECK_FALSE(r.witness.has_value());
  CHECK(certify_eta({0.01, FieldProgram{}, plan(2000)}, ball()).verdict == Verdict::certified);
  CHECK(certify_eta({0.01, FieldProgram{}, plan(2000)}, ellipsoid()).verdict ==
        Verdict::certified);
}

TEST_CASE("worm with psi = 0 is refuted near the annulus") {
  const CertReport r = certify_eta({0.9, FieldProgram{}, plan(10000)}, worm());
  REQUIRE(r.verdict == Verdict::refuted);
  REQUIRE(r.witness.has_value());
  CHECK(r.witness->margin < -1e-10);
  CHECK(r.failures > 0);
  CHECK(std::abs(r.witness->point.z) < 0.1);
  const double lw = std::log(std::norm(r.witness->point.w));
  CHECK(std::abs(lw) <= 2.5 * kPi - kPi / 2 + 0.5);

  // The witness is real: the Hessian of -(-rho)^eta itself has a negative
  // direction there.
  CHECK(direct_min_eigenvalue(r.witness->point, 0.9) < 0.0);
}

TEST_CASE("worm with psi = 0 fails even for small eta") {
  const CertReport r = certify_eta({0.01, FieldProgram{}, plan(10000)}, worm());
  REQUIRE(r.verdict == Verdict::refuted);
  const Complex2Point q = r.witness->point;
  CHECK(direct_min_eigenvalue(q, 0.01) < 0.0);
}

TEST_CASE("certification is monotone in eta") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> c(-0.4, 0.4), u(0.0, 1.0);
  const PsiFamily fam = PsiFamily::default_family();
  const Domain* domains[] = {&ball(), &ellipsoid(), &worm()};
  int certified_pairs = 0;
  for (int t = 0; t < 100; ++t) {
    const Domain& d = *domains[t % 3];
    std::vector<double> coef(fam.dim());
    for (auto& v : coef) v = c(rng) * (t % 2);
    const CertificationProblem prob(d, fam, plan(300, static_cast<std::uint64_t>(t)));
    const auto terms = prob.terms(coef);
    const double hi = 0.02 + 0.96 * u(rng);
    const double lo = hi * u(rng);
    const CertReport rh = certify_terms(terms, hi);
    const CertReport rl = certify_terms(terms, lo);
    if (rh.verdict == Verdict::certified) {
      ++certified_pairs;
      CHECK(rl.verdict == Verdict::certified);
    }
    if (rl.verdict == Verdict::refuted) CHECK(rh.verdict != Verdict::certified);
  }
  CHECK(certified_pairs > 20);
}

TEST_CASE("certification is deterministic") {
  const EtaTrial trial{0.7, 0.1 * FieldProgram::abs2_w(), plan(3000, 12)};
  const auto a = certify_eta(trial, worm()).to_json();
  const auto b = certify_eta(trial, worm()).to_json();
  CHECK(a.dump() == b.dump());
  CHECK(a["verdict"] == "refuted");
  CHECK(a["witness"]["point"].size() == 4);
}

TEST_CASE("interior plan") {
  const auto pts = interior_plan(ball(), plan(500, 1));
  CHECK(pts.size() == 500);
  for (const auto& q : pts) {
    const double depth = 1.0 - std::sqrt(std::norm(q.z) + std::norm(q.w));
    CHECK(depth >= 1e-6 * 0.99);
    CHECK(depth <= 0.05 * 1.01);
  }
  SamplePlan bad = plan(10);
  bad.min_depth = 0.1;
  CHECK_THROWS_AS(interior_plan(ball(), bad), SpecError);
  CHECK_THROWS_AS(interior_plan(ball(), plan(0)), SpecError);
}

TEST_CASE("bisection and index estimate on the ball") {
  PsiFamily zero;  // psi = 0 only
  IndexOptions o;
  o.bisect_tol = 1e-2;
  const IndexResult r = estimate_index(ball(), zero, plan(2000), o);
  CHECK(r.certified_any);
  CHECK(r.eta_star >= 0.99 - 1e-2);
  CHECK_FALSE(r.reports.empty());

  const CertificationProblem prob(ball(), PsiFamily::default_family(), plan(1000));
  const auto b = bisect_eta(prob.terms(std::vector<double>(9, 0.0)), o);
  CHECK(b.certified_any);
  CHECK(b.eta >= 0.98);
}

TEST_CASE("empty search budget evaluates the family origin") {
  IndexOptions o;
  o.search_budget = 0;
  const PsiFamily fam = PsiFamily::default_family();
  const IndexResult r = estimate_index(ball(), fam, plan(500), o);
  REQUIRE(r.best_params.size() == fam.dim());
  for (double v : r.best_params) CHECK(v == 0.0);
  CHECK(r.eta_star >= 0.98);
}

TEST_CASE("index estimate on the worm stays below the upper bound") {
  IndexOptions o;
  o.search_budget = 30;
  o.restarts = 1;
  const IndexResult r = estimate_index(worm(), PsiFamily::default_family(), plan(2000), o);
  CHECK(r.eta_star <= 2 * kPi / (2 * 2.5 * kPi - kPi) + 0.05);
  const auto j = r.to_json(PsiFamily::default_family());
  CHECK(j.contains("eta_star"));
  CHECK(j["best_params"].size() == 9);
}
