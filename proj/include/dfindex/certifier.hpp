#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "dfindex/domain.hpp"
#include "dfindex/errors.hpp"
#include "dfindex/frame.hpp"

namespace dfindex {

/// Linear family psi = sum c_k phi_k.
struct PsiFamily {
  std::vector<FieldProgram> basis;
  std::vector<std::string> names;

  /// {1, Re z, Im z, Re w, Im w, |z|^2, |w|^2, Re z wbar, Im z wbar}.
  static PsiFamily default_family();
  std::size_t dim() const { return basis.size(); }
  FieldProgram program(const std::vector<double>& c) const;
};

/// Jet of rho * exp(psi) from the real jets of rho and psi.
RealJet times_exp(const RealJet& rho, const RealJet& psi);

/// Interior points: boundary samples (Levi-flat candidates refined towards
/// the Levi-flat set) moved inward along the normal by depths log-spaced in
/// [min_depth, tubular_width].
struct SamplePlan {
  std::size_t count = 10000;
  double min_depth = 1e-6;
  double tubular_width = 0.05;
  int levels = 10;
  std::uint64_t seed = 0;
};

std::vector<Complex2Point> interior_plan(const Domain& domain, const SamplePlan& plan);

/// The bracketed Hermitian form of the Hessian of -(-rho)^eta on (L, N)
/// with rho = rho_domain * exp(psi) and the frame of rho at q; the positive
/// factor eta (-rho)^(eta - 1) is dropped. Throws DomainError if rho(q) >= 0.
HermitianForm2 composite_hessian(const Domain& domain, const FieldProgram& psi, double eta,
                                 const Complex2Point& q);

/// Same for a given jet of rho.
HermitianForm2 composite_hessian(const Jet2& rho_jet, double eta, const Complex2Point& q);

struct Positivity {
  bool pass = false;
  double margin = 0.0;
  double discriminant = 0.0;  // |B|^2 - A D
};

/// pass iff A >= -tol s, D >= -tol s and |B|^2 - A D <= tol s^2 with
/// s = max(|A|, |D|, |B|, 1); margin = min(A, D, -(|B|^2 - A D) / s).
Positivity positivity_check(const HermitianForm2& H, double psd_tol = 1e-10);

enum class Verdict { certified, refuted, inconclusive };
const char* verdict_name(Verdict v);

/// The failing sample closest to the boundary (most negative margin among
/// equally shallow failures).
struct Witness {
  Complex2Point point;
  double margin = 0.0;
  double depth = 0.0;
};

struct CertReport {
  Verdict verdict = Verdict::inconclusive;
  double eta = 0.0;
  std::optional<Witness> witness;
  double margin = 0.0;  // minimum over evaluated samples
  std::size_t samples_used = 0;
  std::size_t failures = 0;
  std::size_t errors = 0;
  /// Levi-flat-adjacent samples with |Hess(L, N)| below denom_tol.
  std::size_t zero_LN_flags = 0;
  std::vector<std::string> diagnostics;

  nlohmann::json to_json() const;
};

/// Eta-independent parts of the form at one sample: A and B do not depend on
/// eta, D = D0 + (1 - eta) Dk with Dk >= 0. The frame is that of rho itself,
/// so L rho = 0 and the barrier term only enters D.
struct SampleTerms {
  Complex2Point q;
  double depth = 0.0;
  bool ok = false;
  std::string error;
  double A = 0.0;
  double D0 = 0.0;
  double Dk = 0.0;
  cplx B{};
  double A_barrier = 0.0;  // (1 - eta)-coefficient of A, |L rho|^2 / (-rho)
  cplx B_barrier{};

  HermitianForm2 form(double eta) const;
};

/// Precomputed jets of the domain function and of a psi family on a sample
/// plan; evaluating a family member costs no further program evaluations.
class CertificationProblem {
 public:
  CertificationProblem(const Domain& domain, PsiFamily family, const SamplePlan& plan);

  const PsiFamily& family() const { return family_; }
  std::size_t size() const { return points_.size(); }
  const std::vector<Complex2Point>& points() const { return points_; }

  std::vector<SampleTerms> terms(const std::vector<double>& c) const;

 private:
  PsiFamily family_;
  std::vector<Complex2Point> points_;
  std::vector<double> depths_;
  std::vector<char> ok_;
  std::vector<std::string> err_;
  std::vector<RealJet> rho_;
  std::vector<std::vector<RealJet>> basis_;  // [sample][k]
};

CertReport certify_terms(const std::vector<SampleTerms>& terms, double eta, double psd_tol = 1e-10,
                         double denom_tol = 1e-8);

struct EtaTrial {
  double eta = 0.5;
  FieldProgram psi;
  SamplePlan samples;
};

/// Sampled certification of -(-rho)^eta with rho = rho_domain * exp(psi).
/// Errors are folded into an inconclusive verdict.
CertReport certify_eta(const EtaTrial& trial, const Domain& domain, double psd_tol = 1e-10,
                       double denom_tol = 1e-8);

struct IndexOptions {
  double bisect_tol = 1e-2;
  std::size_t search_budget = 200;  // objective evaluations of the outer search
  std::uint64_t seed = 0;
  int restarts = 3;
  double initial_step = 0.5;
  double psd_tol = 1e-10;
  double denom_tol = 1e-8;
  bool strict_budget = false;  // throw BudgetExhausted instead of flagging it
};

struct IndexResult {
  double eta_star = 0.0;  // 0 when no eta in the bracket is certified
  bool certified_any = false;
  std::vector<double> best_params;
  FieldProgram best_psi;
  std::vector<CertReport> reports;  // bisection trail of the best candidate
  std::size_t evaluations = 0;
  bool budget_exhausted = false;

  nlohmann::json to_json(const PsiFamily& family) const;
};

class BudgetExhausted : public Error {
 public:
  BudgetExhausted(const std::string& what, IndexResult best)
      : Error(what), best_(std::move(best)) {}
  const IndexResult& best() const { return best_; }

 private:
  IndexResult best_;
};

/// Bisection of the certified eta on the bracket (1e-3, 1 - 1e-3).
struct BisectionOutcome {
  double eta = 0.0;
  bool certified_any = false;
  std::vector<CertReport> reports;
};
BisectionOutcome bisect_eta(const std::vector<SampleTerms>& terms, const IndexOptions& opts);

/// Largest certified eta over the family: bisection per candidate inside a
/// seeded Nelder-Mead search with restarts, limited to search_budget
/// candidate evaluations. A lower estimate of the index.
IndexResult estimate_index(const Domain& domain, const PsiFamily& family, const SamplePlan& plan,
                           const IndexOptions& opts = {});

IndexResult estimate_index(const CertificationProblem& problem, const IndexOptions& opts = {});

}  // namespace dfindex
