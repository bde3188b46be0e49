#pragma once

#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "dfindex/jet.hpp"

namespace dfindex {

enum class NodeKind {
  constant,
  re_z,
  im_z,
  re_w,
  im_w,
  add,
  sub,
  mul,
  div,
  exp,
  log,
  pow,
  abs2_z,
  abs2_w,
  cutoff,
  sin,
  cos,
};

/// Flat-bottomed even cutoff
///   c(x) = scale * exp(-2 / s),  s = (|x| - flat) / width  for |x| > flat,
/// and 0 on [-flat, flat]. Convex on |x| <= flat + width.
struct CutoffShape {
  double flat = 0.0;
  double width = 1.0;
  double scale = 1.0;

  double value(double x) const;
  /// Value, first and second derivative at x.
  void eval(double x, double& f, double& df, double& d2f) const;
};

/// Immutable expression tree over the real coordinates of C^2.
///
/// Nodes are stored in topological order with the root last; copies share
/// storage. Evaluation carries second-order jets forward in real
/// coordinates.
class FieldProgram {
 public:
  FieldProgram();  // the constant 0

  static FieldProgram constant(double c);
  static FieldProgram re_z();
  static FieldProgram im_z();
  static FieldProgram re_w();
  static FieldProgram im_w();
  static FieldProgram abs2_z();
  static FieldProgram abs2_w();

  friend FieldProgram operator+(const FieldProgram& a, const FieldProgram& b);
  friend FieldProgram operator-(const FieldProgram& a, const FieldProgram& b);
  friend FieldProgram operator*(const FieldProgram& a, const FieldProgram& b);
  friend FieldProgram operator/(const FieldProgram& a, const FieldProgram& b);
  friend FieldProgram operator*(double c, const FieldProgram& a);

  friend FieldProgram exp(const FieldProgram& a);
  friend FieldProgram log(const FieldProgram& a);
  friend FieldProgram sin(const FieldProgram& a);
  friend FieldProgram cos(const FieldProgram& a);
  friend FieldProgram pow(const FieldProgram& a, double exponent);
  friend FieldProgram cutoff(const FieldProgram& a, const CutoffShape& shape);

  /// Throws DomainError when a guarded primitive leaves its domain.
  RealJet eval_real(const Complex2Point& p) const;
  double value(const Complex2Point& p) const;

  std::size_t size() const { return nodes_->size(); }
  /// True when the program is the literal constant 0.
  bool is_zero() const;

  nlohmann::json to_json() const;
  /// Throws SpecError on malformed input.
  static FieldProgram from_json(const nlohmann::json& j);

 private:
  struct Node {
    NodeKind kind = NodeKind::constant;
    int a = -1;
    int b = -1;
    double param = 0.0;
    CutoffShape shape{};
  };

  explicit FieldProgram(std::vector<Node> nodes);
  static FieldProgram leaf(NodeKind kind, double param = 0.0);
  static FieldProgram unary(NodeKind kind, const FieldProgram& a, double param = 0.0,
                            CutoffShape shape = {});
  static FieldProgram binary(NodeKind kind, const FieldProgram& a, const FieldProgram& b);
  nlohmann::json node_json(int index) const;

  std::shared_ptr<const std::vector<Node>> nodes_;
};

/// Wirtinger jet of f at p.
Jet2 jet_eval(const FieldProgram& f, const Complex2Point& p);

const char* node_kind_name(NodeKind kind);

}  // namespace dfindex
