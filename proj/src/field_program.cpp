#include "dfindex/field_program.hpp"

#include <cmath>
#include <map>

#include "dfindex/errors.hpp"

namespace dfindex {
namespace {

struct KindName {
  NodeKind kind;
  const char* name;
  int arity;
};

constexpr KindName kKinds[] = {
    {NodeKind::constant, "const", 0}, {NodeKind::re_z, "re_z", 0},
    {NodeKind::im_z, "im_z", 0},      {NodeKind::re_w, "re_w", 0},
    {NodeKind::im_w, "im_w", 0},      {NodeKind::add, "add", 2},
    {NodeKind::sub, "sub", 2},        {NodeKind::mul, "mul", 2},
    {NodeKind::div, "div", 2},        {NodeKind::exp, "exp", 1},
    {NodeKind::log, "log", 1},        {NodeKind::pow, "pow", 1},
    {NodeKind::abs2_z, "abs2_z", 0},  {NodeKind::abs2_w, "abs2_w", 0},
    {NodeKind::cutoff, "cutoff", 1},  {NodeKind::sin, "sin", 1},
    {NodeKind::cos, "cos", 1},
};

const KindName& kind_info(NodeKind kind) {
  for (const auto& k : kKinds) {
    if (k.kind == kind) return k;
  }
  throw SpecError("unknown node kind");
}

bool is_integer(double p) { return std::nearbyint(p) == p; }

// Scalar function values f, f', f'' for the unary primitives.
void unary_derivs(NodeKind kind, double u, double param, const CutoffShape& shape, double& f,
                  double& df, double& d2f) {
  switch (kind) {
    case NodeKind::exp:
      f = df = d2f = std::exp(u);
      return;
    case NodeKind::log:
      if (!(u > 0.0)) throw DomainError("log of non-positive argument");
      f = std::log(u);
      df = 1.0 / u;
      d2f = -df * df;
      return;
    case NodeKind::sin:
      f = std::sin(u);
      df = std::cos(u);
      d2f = -f;
      return;
    case NodeKind::cos:
      f = std::cos(u);
      df = -std::sin(u);
      d2f = -f;
      return;
    case NodeKind::pow: {
      const double p = param;
      if (!is_integer(p) && !(u > 0.0)) {
        throw DomainError("fractional power of non-positive base");
      }
      if (is_integer(p) && p < 0.0 && u == 0.0) throw DomainError("negative power of zero");
      f = std::pow(u, p);
      df = p == 0.0 ? 0.0 : p * std::pow(u, p - 1.0);
      d2f = (p == 0.0 || p == 1.0) ? 0.0 : p * (p - 1.0) * std::pow(u, p - 2.0);
      return;
    }
    case NodeKind::cutoff:
      shape.eval(u, f, df, d2f);
      return;
    default:
      throw SpecError("not a unary node");
  }
}

void apply_unary(const RealJet& u, double f, double df, double d2f, RealJet& out) {
  out.val = f;
  out.grad = df * u.grad;
  out.hess = df * u.hess + d2f * (u.grad * u.grad.transpose());
}

}  // namespace

double CutoffShape::value(double x) const {
  const double t = std::abs(x) - flat;
  if (t <= 0.0) return 0.0;
  return scale * std::exp(-2.0 * width / t);
}

void CutoffShape::eval(double x, double& f, double& df, double& d2f) const {
  const double t = std::abs(x) - flat;
  // exp(-2/s) is below the double range well before s = 1e-3.
  if (t <= 1e-3 * width) {
    f = df = d2f = 0.0;
    return;
  }
  const double s = t / width;
  const double e = scale * std::exp(-2.0 / s);
  const double sign = x < 0.0 ? -1.0 : 1.0;
  f = e;
  df = sign * e * 2.0 / (s * s) / width;
  d2f = e * (4.0 / (s * s * s * s) - 4.0 / (s * s * s)) / (width * width);
}

FieldProgram::FieldProgram() : FieldProgram(leaf(NodeKind::constant, 0.0)) {}

FieldProgram::FieldProgram(std::vector<Node> nodes)
    : nodes_(std::make_shared<const std::vector<Node>>(std::move(nodes))) {}

FieldProgram FieldProgram::leaf(NodeKind kind, double param) {
  Node n;
  n.kind = kind;
  n.param = param;
  return FieldProgram(std::vector<Node>{n});
}

FieldProgram FieldProgram::unary(NodeKind kind, const FieldProgram& a, double param,
                                 CutoffShape shape) {
  std::vector<Node> nodes = *a.nodes_;
  Node n;
  n.kind = kind;
  n.a = static_cast<int>(nodes.size()) - 1;
  n.param = param;
  n.shape = shape;
  nodes.push_back(n);
  return FieldProgram(std::move(nodes));
}

FieldProgram FieldProgram::binary(NodeKind kind, const FieldProgram& a, const FieldProgram& b) {
  std::vector<Node> nodes = *a.nodes_;
  const int offset = static_cast<int>(nodes.size());
  for (Node n : *b.nodes_) {
    if (n.a >= 0) n.a += offset;
    if (n.b >= 0) n.b += offset;
    nodes.push_back(n);
  }
  Node n;
  n.kind = kind;
  n.a = offset - 1;
  n.b = static_cast<int>(nodes.size()) - 1;
  nodes.push_back(n);
  return FieldProgram(std::move(nodes));
}

FieldProgram FieldProgram::constant(double c) { return leaf(NodeKind::constant, c); }
FieldProgram FieldProgram::re_z() { return leaf(NodeKind::re_z); }
FieldProgram FieldProgram::im_z() { return leaf(NodeKind::im_z); }
FieldProgram FieldProgram::re_w() { return leaf(NodeKind::re_w); }
FieldProgram FieldProgram::im_w() { return leaf(NodeKind::im_w); }
FieldProgram FieldProgram::abs2_z() { return leaf(NodeKind::abs2_z); }
FieldProgram FieldProgram::abs2_w() { return leaf(NodeKind::abs2_w); }

FieldProgram operator+(const FieldProgram& a, const FieldProgram& b) {
  return FieldProgram::binary(NodeKind::add, a, b);
}
FieldProgram operator-(const FieldProgram& a, const FieldProgram& b) {
  return FieldProgram::binary(NodeKind::sub, a, b);
}
FieldProgram operator*(const FieldProgram& a, const FieldProgram& b) {
  return FieldProgram::binary(NodeKind::mul, a, b);
}
FieldProgram operator/(const FieldProgram& a, const FieldProgram& b) {
  return FieldProgram::binary(NodeKind::div, a, b);
}
FieldProgram operator*(double c, const FieldProgram& a) { return FieldProgram::constant(c) * a; }
FieldProgram exp(const FieldProgram& a) { return FieldProgram::unary(NodeKind::exp, a); }
FieldProgram log(const FieldProgram& a) { return FieldProgram::unary(NodeKind::log, a); }
FieldProgram sin(const FieldProgram& a) { return FieldProgram::unary(NodeKind::sin, a); }
FieldProgram cos(const FieldProgram& a) { return FieldProgram::unary(NodeKind::cos, a); }
FieldProgram pow(const FieldProgram& a, double exponent) {
  return FieldProgram::unary(NodeKind::pow, a, exponent);
}
FieldProgram cutoff(const FieldProgram& a, const CutoffShape& shape) {
  if (!(shape.flat >= 0.0) || !(shape.width > 0.0) || !(shape.scale > 0.0)) {
    throw SpecError("cutoff needs flat >= 0, width > 0, scale > 0");
  }
  return FieldProgram::unary(NodeKind::cutoff, a, 0.0, shape);
}

bool FieldProgram::is_zero() const {
  return nodes_->size() == 1 && nodes_->front().kind == NodeKind::constant &&
         nodes_->front().param == 0.0;
}

RealJet FieldProgram::eval_real(const Complex2Point& p) const {
  thread_local std::vector<RealJet> scratch;
  const auto& nodes = *nodes_;
  scratch.resize(nodes.size());
  const Vec4 x = p.real();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Node& n = nodes[i];
    RealJet& out = scratch[i];
    switch (n.kind) {
      case NodeKind::constant:
        out.val = n.param;
        out.grad.setZero();
        out.hess.setZero();
        break;
      case NodeKind::re_z:
      case NodeKind::im_z:
      case NodeKind::re_w:
      case NodeKind::im_w: {
        const int k = static_cast<int>(n.kind) - static_cast<int>(NodeKind::re_z);
        out.val = x[k];
        out.grad.setZero();
        out.grad[k] = 1.0;
        out.hess.setZero();
        break;
      }
      case NodeKind::abs2_z:
      case NodeKind::abs2_w: {
        const int k = n.kind == NodeKind::abs2_z ? 0 : 2;
        out.val = x[k] * x[k] + x[k + 1] * x[k + 1];
        out.grad.setZero();
        out.grad[k] = 2.0 * x[k];
        out.grad[k + 1] = 2.0 * x[k + 1];
        out.hess.setZero();
        out.hess(k, k) = 2.0;
        out.hess(k + 1, k + 1) = 2.0;
        break;
      }
      case NodeKind::add: {
        const RealJet &u = scratch[n.a], &v = scratch[n.b];
        out.val = u.val + v.val;
        out.grad = u.grad + v.grad;
        out.hess = u.hess + v.hess;
        break;
      }
      case NodeKind::sub: {
        const RealJet &u = scratch[n.a], &v = scratch[n.b];
        out.val = u.val - v.val;
        out.grad = u.grad - v.grad;
        out.hess = u.hess - v.hess;
        break;
      }
      case NodeKind::mul: {
        const RealJet &u = scratch[n.a], &v = scratch[n.b];
        const Mat4 cross = u.grad * v.grad.transpose();
        out.hess = u.val * v.hess + v.val * u.hess + cross + cross.transpose();
        out.grad = u.val * v.grad + v.val * u.grad;
        out.val = u.val * v.val;
        break;
      }
      case NodeKind::div: {
        const RealJet &u = scratch[n.a], &v = scratch[n.b];
        if (v.val == 0.0 || !std::isfinite(1.0 / v.val)) throw DomainError("division by zero");
        const double r = 1.0 / v.val;
        RealJet inv;
        apply_unary(v, r, -r * r, 2.0 * r * r * r, inv);
        const Mat4 cross = u.grad * inv.grad.transpose();
        out.hess = u.val * inv.hess + inv.val * u.hess + cross + cross.transpose();
        out.grad = u.val * inv.grad + inv.val * u.grad;
        out.val = u.val * inv.val;
        break;
      }
      default: {
        double f, df, d2f;
        const RealJet u = scratch[n.a];
        unary_derivs(n.kind, u.val, n.param, n.shape, f, df, d2f);
        apply_unary(u, f, df, d2f, out);
        break;
      }
    }
  }
  return scratch.back();
}

double FieldProgram::value(const Complex2Point& p) const {
  thread_local std::vector<double> scratch;
  const auto& nodes = *nodes_;
  scratch.resize(nodes.size());
  const Vec4 x = p.real();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Node& n = nodes[i];
    double& out = scratch[i];
    switch (n.kind) {
      case NodeKind::constant: out = n.param; break;
      case NodeKind::re_z: out = x[0]; break;
      case NodeKind::im_z: out = x[1]; break;
      case NodeKind::re_w: out = x[2]; break;
      case NodeKind::im_w: out = x[3]; break;
      case NodeKind::abs2_z: out = x[0] * x[0] + x[1] * x[1]; break;
      case NodeKind::abs2_w: out = x[2] * x[2] + x[3] * x[3]; break;
      case NodeKind::add: out = scratch[n.a] + scratch[n.b]; break;
      case NodeKind::sub: out = scratch[n.a] - scratch[n.b]; break;
      case NodeKind::mul: out = scratch[n.a] * scratch[n.b]; break;
      case NodeKind::div:
        if (scratch[n.b] == 0.0) throw DomainError("division by zero");
        out = scratch[n.a] / scratch[n.b];
        break;
      case NodeKind::cutoff: out = n.shape.value(scratch[n.a]); break;
      default: {
        double df, d2f;
        unary_derivs(n.kind, scratch[n.a], n.param, n.shape, out, df, d2f);
        break;
      }
    }
  }
  return scratch.back();
}

nlohmann::json FieldProgram::node_json(int index) const {
  const Node& n = (*nodes_)[index];
  const KindName& info = kind_info(n.kind);
  nlohmann::json j;
  j["kind"] = info.name;
  if (n.kind == NodeKind::constant) j["value"] = n.param;
  if (n.kind == NodeKind::pow) j["exponent"] = n.param;
  if (n.kind == NodeKind::cutoff) {
    j["flat"] = n.shape.flat;
    j["width"] = n.shape.width;
    j["scale"] = n.shape.scale;
  }
  if (info.arity >= 1) {
    j["args"] = nlohmann::json::array();
    j["args"].push_back(node_json(n.a));
    if (info.arity == 2) j["args"].push_back(node_json(n.b));
  }
  return j;
}

nlohmann::json FieldProgram::to_json() const {
  return node_json(static_cast<int>(nodes_->size()) - 1);
}

FieldProgram FieldProgram::from_json(const nlohmann::json& j) {
  if (j.is_number()) return constant(j.get<double>());
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
    throw SpecError("field program node must be an object with a string \"kind\"");
  }
  const std::string name = j["kind"].get<std::string>();
  const KindName* info = nullptr;
  for (const auto& k : kKinds) {
    if (name == k.name) info = &k;
  }
  if (info == nullptr) throw SpecError("unknown field program node kind \"" + name + "\"");

  std::vector<FieldProgram> args;
  if (info->arity > 0) {
    if (!j.contains("args") || !j["args"].is_array() ||
        static_cast<int>(j["args"].size()) != info->arity) {
      throw SpecError("node \"" + name + "\" needs " + std::to_string(info->arity) + " args");
    }
    for (const auto& a : j["args"]) args.push_back(from_json(a));
  }
  auto number = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_number()) {
      throw SpecError("node \"" + name + "\" needs numeric \"" + key + "\"");
    }
    return j[key].get<double>();
  };
  switch (info->kind) {
    case NodeKind::constant: return constant(number("value"));
    case NodeKind::pow: return pow(args[0], number("exponent"));
    case NodeKind::cutoff:
      return cutoff(args[0], CutoffShape{number("flat"), number("width"), number("scale")});
    case NodeKind::add: return args[0] + args[1];
    case NodeKind::sub: return args[0] - args[1];
    case NodeKind::mul: return args[0] * args[1];
    case NodeKind::div: return args[0] / args[1];
    case NodeKind::exp:
    case NodeKind::log:
    case NodeKind::sin:
    case NodeKind::cos: return unary(info->kind, args[0]);
    default: return leaf(info->kind);
  }
}

Jet2 jet_eval(const FieldProgram& f, const Complex2Point& p) { return to_wirtinger(f.eval_real(p)); }

const char* node_kind_name(NodeKind kind) { return kind_info(kind).name; }

}  // namespace dfindex
