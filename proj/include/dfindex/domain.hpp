#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "json.hpp"

#include "dfindex/field_program.hpp"
#include "dfindex/jet.hpp"

namespace dfindex {

enum class DomainKind { ball, ellipsoid, worm, custom };

/// Axis-aligned box in the real coordinates (Re z, Im z, Re w, Im w).
struct Box4 {
  Vec4 lo = Vec4::Constant(-1.0);
  Vec4 hi = Vec4::Constant(1.0);

  bool contains(const Vec4& x) const;
  double diameter() const { return (hi - lo).norm(); }
};

/// Parametric description of a bounded domain {rho < 0}.
///
/// ball: radius. ellipsoid: semi-axes a1 (z) and a2 (w). worm: beta > pi/2
/// and the cutoff parameter a > beta - pi/2. custom: a defining-function
/// program plus a bounding box and an interior witness point.
struct DomainSpec {
  DomainKind kind = DomainKind::ball;
  double radius = 1.0;
  double a1 = 1.0;
  double a2 = 1.0;
  double beta = 0.0;
  double worm_a = 0.0;
  std::optional<FieldProgram> custom_rho;
  std::optional<Box4> bbox;
  std::optional<Complex2Point> interior;

  static DomainSpec ball(double radius = 1.0);
  static DomainSpec ellipsoid(double a1, double a2);
  /// a defaults to beta - pi/2 + 1.
  static DomainSpec worm(double beta, std::optional<double> a = std::nullopt);
  static DomainSpec custom(FieldProgram rho, Box4 bbox, Complex2Point interior);

  nlohmann::json to_json() const;
  /// Throws SpecError on malformed or invalid input.
  static DomainSpec from_json(const nlohmann::json& j);
};

/// Throws SpecError when the parameters violate the domain's constraints.
void validate(const DomainSpec& spec);

/// The defining function rho with Omega = {rho < 0}. For the worm,
///   rho = |z + exp(i log|w|^2)|^2 - 1 + eta(log|w|^2)^2
/// with eta the flat-bottomed cutoff calibrated so eta(a) = 1 + 1e-3.
FieldProgram rho_program(const DomainSpec& spec);

/// Shape of the worm cutoff for the given parameters.
CutoffShape worm_cutoff(double beta, double a);

struct BoundaryPoint {
  Complex2Point p;
  Jet2 rho_jet;
  double foot_quality = 0.0;  // |rho(p)|
};

struct Projection {
  BoundaryPoint foot;
  double sdist = 0.0;  // negative inside
};

/// Evaluated domain: the spec, its defining function, the resolved bounding
/// box and interior witness, and a coarse boundary point cloud used to seed
/// projections. Immutable after construction.
class Domain {
 public:
  explicit Domain(DomainSpec spec);

  const DomainSpec& spec() const { return spec_; }
  const FieldProgram& rho() const { return rho_; }
  const Box4& bbox() const { return bbox_; }
  const Complex2Point& interior() const { return interior_; }
  /// max(1, |rho(interior witness)|).
  double rho_scale() const { return rho_scale_; }
  const std::vector<Vec4>& coarse_cloud() const { return cloud_; }

 private:
  DomainSpec spec_;
  FieldProgram rho_;
  Box4 bbox_;
  Complex2Point interior_;
  double rho_scale_ = 1.0;
  std::vector<Vec4> cloud_;
};

/// Unit outward normal grad rho / |grad rho| of a jet, in real coordinates.
Vec4 unit_normal(const Jet2& rho_jet);

/// Boundary point closest to q: Newton iteration on the Lagrange system
/// {rho(p) = 0, p - q + lambda grad rho(p) = 0} from several seeds (gradient
/// flow from q and the nearest coarse-cloud points); the smallest distance
/// wins. Throws ConvergenceError if no seed converges to residual 1e-10.
Projection project_to_boundary(const Domain& domain, const Complex2Point& q);

/// Single Lagrange-Newton solve from a seed boundary guess.
std::optional<Projection> project_from_seed(const Domain& domain, const Vec4& q,
                                            const Vec4& seed);

/// Default finite-difference step 1e-4 * (1 + |sdist|); pass h <= 0 for it.
/// Signed distance jet at q: value from the projection, gradient from
/// Richardson central differences of the signed distance, second
/// derivatives from Richardson central differences of the foot-point unit
/// normal (the exact gradient of the signed distance). Throws TubularError
/// when stencil foot points scatter by more than 10 stencil widths.
Jet2 delta_jet(const Domain& domain, const Complex2Point& q, double h = 0.0);

/// Same as delta_jet, also returning the centre projection.
Jet2 delta_jet(const Domain& domain, const Complex2Point& q, double h, Projection& centre);

/// n boundary points from scrambled Halton points of the bounding box
/// followed by projection; deterministic in seed. Throws SpecError if fewer
/// than n distinct points are found within 100 n attempts.
std::vector<BoundaryPoint> sample_boundary(const Domain& domain, std::size_t n,
                                           std::uint64_t seed);

/// Boundary point from its coordinates (evaluates the rho jet).
BoundaryPoint make_boundary_point(const Domain& domain, const Complex2Point& p);

/// Four-dimensional Halton point with a Cranley-Patterson shift.
Vec4 halton4(std::uint64_t index, const Vec4& shift);

}  // namespace dfindex
