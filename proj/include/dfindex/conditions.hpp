#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "dfindex/frame.hpp"

namespace dfindex {

struct ConditionOptions {
  double denom_tol = 1e-8;
  DeltaOptions delta{};
};

/// Psi-independent signed-distance data of a Levi-flat sample set.
struct SigmaData {
  std::vector<DeltaBoundary> boundary;
  std::vector<CovariantScalars> scalars;
  std::vector<DeltaThird> third;  // empty unless requested
  double C = 0.0;
};

/// Throws EmptySigma on an empty set. TubularError propagates.
SigmaData prepare_sigma(const Domain& domain, const std::vector<LeviFlatSample>& sigma,
                        bool third_order, const ConditionOptions& opts = {});

enum class Branch { finite_torsion, zero_denominator };
const char* branch_name(Branch b);

struct PointRecord {
  Complex2Point point;
  Branch branch = Branch::finite_torsion;
  double lhs = 0.0;  // +inf on the zero-denominator branch of the first condition
  std::optional<double> implied_eta_bound;
  double rhs = 0.0;
  bool holds = true;
  cplx denominator{};  // 1/2 Lbar psi + Hess_delta(N, L)
  cplx torsion{};
  cplx L_torsion{};
  /// First condition only: Hess_rho(L, L) / (-rho) |N rho|^2 / |Hess_rho(L, N)|^2 for
  /// rho = delta e^psi, extrapolated to the boundary along the inward normal.
  std::optional<double> raw_ratio;
  double weight = 0.0;
};

struct ConditionReport {
  std::string condition;
  std::vector<PointRecord> per_point;
  double C = 0.0;
  std::optional<double> C1;
  std::optional<double> C2;
  std::optional<double> eta;
  std::optional<int> n;
  double min_lhs = 0.0;
  std::optional<double> implied_index_bound;
  std::size_t violations = 0;
  std::optional<double> torsion_c1_norm;
  std::optional<double> l1_integral;
  bool closed_surface = true;  // heuristic; false when the sample cloud has an edge

  nlohmann::json to_json() const;
  /// One row per sample: coordinates, branch, lhs, rhs, holds.
  std::string to_csv() const;
};

/// lhs = 2.5 + 3.75 C |T| + 0.5 |L T| per sample, T the torsion.
ConditionReport first_condition(const Domain& domain, const FieldProgram& psi,
                                const std::vector<LeviFlatSample>& sigma,
                                const ConditionOptions& opts = {});
ConditionReport first_condition(const SigmaData& data, const FieldProgram& psi,
                                const std::vector<LeviFlatSample>& sigma,
                                const ConditionOptions& opts = {});

struct Constants12 {
  double C1 = 0.0;
  double C2 = 0.0;
};

/// C1 = 2C + 2 max |Hess_delta(N, L)|,
/// C2 = 1/2 max Re(-L Hess_delta(N, L) + Hess_delta(N, nabla_Lbar L)).
Constants12 constants_c1_c2(const Domain& domain, const std::vector<LeviFlatSample>& sigma,
                            const ConditionOptions& opts = {});
Constants12 constants_c1_c2(const SigmaData& data);

/// Per sample: 1/(1-eta) - 1 <= (C2 - Hess_psi(L,L)/4)/|D|^2 + C1/|D|, or |D| < denom_tol.
ConditionReport second_condition(const Domain& domain, const FieldProgram& psi, double eta,
                                 const std::vector<LeviFlatSample>& sigma,
                                 const ConditionOptions& opts = {});
ConditionReport second_condition(const SigmaData& data, const FieldProgram& psi, double eta,
                                 const std::vector<LeviFlatSample>& sigma,
                                 const ConditionOptions& opts = {});

/// |D| <= (C1 + sqrt(n) (1 + C1^2/n + 4 C2 - Hess_psi(L,L))) / (2n).
ConditionReport improved_second_bound(const Domain& domain, const FieldProgram& psi, int n,
                                      const std::vector<LeviFlatSample>& sigma,
                                      const ConditionOptions& opts = {});
ConditionReport improved_second_bound(const SigmaData& data, const FieldProgram& psi, int n,
                                      const std::vector<LeviFlatSample>& sigma,
                                      const ConditionOptions& opts = {});

/// Weighted sum of |1/2 Lbar psi + Hess_delta(N, L)| over the samples.
double l1_torsion_integral(const Domain& domain, const FieldProgram& psi,
                           const std::vector<LeviFlatSample>& sigma,
                           const ConditionOptions& opts = {});
double l1_torsion_integral(const SigmaData& data, const FieldProgram& psi,
                           const std::vector<LeviFlatSample>& sigma);

/// L(Lbar psi) at a point from the jet of psi and the frame.
cplx L_Lbar(const Jet2& psi_jet, const Frame& frame);

/// Heuristic for a sampled surface: a point is on an edge when its k nearest
/// neighbours, projected to their best-fit plane, leave an angular gap above
/// 0.9 pi. The cloud counts as closed when under 1% of points are edge points.
bool looks_closed(const std::vector<Vec4>& points, std::size_t k = 16);

/// Annotation wrapper for reports of the EmptySigma case.
nlohmann::json vacuous_report(const std::string& condition, const std::string& reason);

}  // namespace dfindex
