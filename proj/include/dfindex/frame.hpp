#pragma once

#include <array>
#include <optional>
#include <vector>

#include "dfindex/domain.hpp"
#include "dfindex/field_program.hpp"
#include "dfindex/jet.hpp"

namespace dfindex {

using Mat24c = Eigen::Matrix<cplx, 2, 4>;

/// Normalized holomorphic tangential field L and complex normal N of the
/// level set of a real function through a point.
///
/// With a = (f_z, f_w) and s = |a|: L = (f_w, -f_z) / s, N = conj(a) / s.
/// dL(i, c), dN(i, c) are the derivatives of the i-th coefficient along
/// d/dz, d/dw, d/dzbar, d/dwbar for c = 0..3.
struct Frame {
  Vec2c L = Vec2c::Zero();
  Vec2c N = Vec2c::Zero();
  Mat24c dL = Mat24c::Zero();
  Mat24c dN = Mat24c::Zero();
  double s = 0.0;  // half the real gradient norm
};

/// A complex Hessian restricted to span(L, N).
struct HermitianForm2 {
  double a_LL = 0.0;
  double a_NN = 0.0;
  cplx a_LN{};

  cplx a_NL() const { return std::conj(a_LN); }
  Mat2c matrix() const;
};

/// Throws DegenerateGradient if s < 1e-12.
Frame frame_at(const Jet2& f_jet, const Complex2Point& p);

/// Hermitian metric pairing g(A, B) = 1/2 sum A_j conj(B_j).
cplx metric(const Vec2c& A, const Vec2c& B);

/// Hess_f(X, Y) = sum X_i conj(Y_j) f_{z_i zbar_j}.
cplx hess_pair(const Jet2& f_jet, const Vec2c& X, const Vec2c& Y);

HermitianForm2 hessian_LN(const Jet2& f_jet, const Frame& frame);

/// X f = sum X_k df/dz_k for a holomorphic field X.
cplx apply_holo(const Vec2c& X, const Jet2& f_jet);

/// Derivative of a coefficient row along X (holomorphic part, columns 0-1)
/// and along conj(X) (antiholomorphic part, columns 2-3).
cplx along(const Mat24c& d, int row, const Vec2c& X);
cplx along_bar(const Mat24c& d, int row, const Vec2c& X);

/// Hess_rho(L, L) in the frame of rho at a boundary point.
double levi_form(const Domain& domain, const BoundaryPoint& bp);
double levi_form(const Jet2& rho_jet, const Complex2Point& p);

/// Signed-distance data on the boundary: the jet of delta extrapolated from
/// the inward offsets eps, eps/2 and eps/4, the frame of delta, and
/// Hess_delta(N, L). The offset jets are kept for interior-limit diagnostics.
struct DeltaBoundary {
  Jet2 jet;
  Frame frame;
  cplx hess_NL{};
  std::array<Complex2Point, 3> offset_points{};  // depths eps, eps/2, eps/4
  std::array<Jet2, 3> offset_jets{};
};

struct DeltaOptions {
  double boundary_offset = 1e-3;
  double fd_step = 0.0;     // delta_jet step; <= 0 selects its default
  double third_step = 1e-3;
};

DeltaBoundary delta_boundary(const Domain& domain, const BoundaryPoint& bp,
                             const DeltaOptions& opts = {});

/// Third-order signed-distance terms at a boundary point:
/// L(Hess_delta(N, L)) and Hess_delta(N, nabla_{Lbar} L).
struct DeltaThird {
  cplx L_hess_NL{};
  cplx hess_N_LbarL{};
};

DeltaThird delta_third(const Domain& domain, const BoundaryPoint& bp, const DeltaBoundary& db,
                       const DeltaOptions& opts = {});

/// Derivative of the mixed second-derivative block of delta along the
/// holomorphic vector V, extrapolated to the boundary like delta_boundary.
Mat2c delta_mix_derivative(const Domain& domain, const BoundaryPoint& bp, const Vec2c& V,
                           const DeltaOptions& opts = {});

struct CovariantScalars {
  cplx gNLbarNbar{};  // g(nabla_N Lbar, Nbar)
  cplx gLbarLL{};     // g(nabla_Lbar L, L)
  cplx gNLN{};        // g([N, L], N)
  cplx gLbarNN{};     // g(nabla_Lbar N, N)

  double max_abs() const;
};

/// Flat-connection scalars from the coefficient derivatives of a frame.
CovariantScalars covariant_scalars(const Frame& frame);

/// Scalars of the signed-distance frame at a boundary point.
CovariantScalars covariant_scalars(const Domain& domain, const BoundaryPoint& bp,
                                   const DeltaOptions& opts = {});

struct LeviFlatSample {
  BoundaryPoint bp;
  Frame frame;
  double levi = 0.0;
  cplx torsion{std::nan(""), std::nan("")};
  double weight = 0.0;
};

/// Maximum of the four scalar magnitudes over the samples, using the
/// signed-distance frame. Throws EmptySigma on an empty list.
double constant_C(const Domain& domain, const std::vector<LeviFlatSample>& sigma,
                  const DeltaOptions& opts = {});
double constant_C(const std::vector<CovariantScalars>& scalars);

/// Samples with |levi| <= tol, with kNN quadrature weights (k = 8).
std::vector<LeviFlatSample> leviflat_detect(const Domain& domain,
                                            const std::vector<BoundaryPoint>& samples,
                                            double tol);

/// Area weights pi r_k^2 / k, r_k the distance to the k-th nearest neighbour.
std::vector<double> knn_weights(const std::vector<Vec4>& points, std::size_t k = 8);

struct RefineOptions {
  /// Candidates have |levi| / |complex Hessian| below this multiple of the
  /// input median.
  double candidate_levi = 0.05;
  double max_travel = 0.5;
  int max_iter = 30;
  double target = 1e-9;
};

/// Moves boundary points with small Levi form down the Levi form along the
/// boundary (Gauss-Newton steps on the projected surface). Points that do not
/// qualify as candidates are returned unchanged.
std::vector<BoundaryPoint> refine_leviflat(const Domain& domain,
                                           const std::vector<BoundaryPoint>& samples,
                                           const RefineOptions& opts = {});

struct SigmaOptions {
  double tol = 1e-6;
  /// Size of the candidate pool relative to the target.
  std::size_t oversample = 4;
  std::size_t batch = 2000;
  std::size_t max_boundary_samples = 200000;
  RefineOptions refine{};
  /// Pool densification towards the sampling intensity: rounds, and the
  /// factor by which the pool may grow beyond oversample * target.
  int adapt_rounds = 12;
  double adapt_growth = 3.0;
  /// Intensities are clamped to [max / dynamic_range, max].
  double dynamic_range = 1e4;
  std::uint64_t spawn_seed = 0x51ed270b27a3c5e1ULL;
};

/// Sampling intensity |Hess_rho(N, L)| / |grad rho| of a boundary sample:
/// the magnitude of the inverse torsion for psi = 0, which is where the
/// torsion integrand concentrates.
double sampling_intensity(const LeviFlatSample& s);

/// Greedy farthest-point order of the first `count` selections, starting at
/// index 0. With scale, the distance of candidate j to the selection is
/// multiplied by scale[j], so the selected spacing follows 1 / scale.
std::vector<std::size_t> farthest_point_order(const std::vector<Vec4>& points, std::size_t count,
                                              const std::vector<double>& scale = {});

/// Detected Levi-flat samples. Boundary sampling in deterministic batches,
/// refinement and detection fill a pool of oversample * target points; the
/// pool is then densified where it is sparse relative to the sampling
/// intensity (new points spawned along the complex tangent, projected and
/// refined), and target samples are selected by farthest-point order with
/// spacing proportional to intensity^(-1/2). Weights are kNN areas (k = 8)
/// of the selected set.
std::vector<LeviFlatSample> detect_sigma(const Domain& domain, std::size_t target,
                                         std::uint64_t seed, const SigmaOptions& opts = {});

/// Complex infinity marker used for vanishing torsion denominators.
cplx complex_infinity();
bool is_infinite(cplx v);

/// 1 / (1/2 Lbar psi + Hess_delta(N, L)) at a boundary point, or the
/// infinity marker when the denominator is below denom_tol.
cplx torsion(const Domain& domain, const FieldProgram& psi, const BoundaryPoint& bp,
             double denom_tol = 1e-8, const DeltaOptions& opts = {});

/// Same from precomputed boundary data.
cplx torsion(const DeltaBoundary& db, const Jet2& psi_jet, double denom_tol = 1e-8);

/// |grad f| / Hess_f(N, L) evaluated directly from the jet of f.
cplx torsion_unreduced(const Jet2& f_jet, const Complex2Point& p, double denom_tol = 1e-8);

/// max |values| + max |Lvalues|. Throws EmptyInput.
double holo_c1_seminorm(const std::vector<cplx>& values, const std::vector<cplx>& Lvalues);

}  // namespace dfindex
