#include "dsfl/tensor.hpp"

#include <atomic>
#include <cmath>
#include <numeric>
#include <sstream>

namespace dsfl {

int64_t numel(const Shape& shape) {
  int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << "]";
  return os.str();
}

namespace {

void check_shape_valid(const Shape& shape) {
  for (int d : shape) {
    if (d <= 0) throw ShapeError("non-positive dimension in shape " + shape_str(shape));
  }
}

void check_finite(const std::vector<double>& v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw NonFiniteError(std::string("non-finite value in ") + what);
  }
}

}  // namespace

// ---- Tensor -----------------------------------------------------------------

uint64_t Tensor::next_id() {
  static std::atomic<uint64_t> counter{1};
  return counter.fetch_add(1);
}

const std::vector<double>& Tensor::data() const {
  if (!data_) throw Error("use of undefined tensor");
  return *data_;
}

double Tensor::value() const {
  if (size() != 1) throw ShapeError("value() requires a single-element tensor, got " + shape_str(shape_));
  return data()[0];
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data) {
  check_shape_valid(shape);
  if (numel(shape) != static_cast<int64_t>(data.size())) {
    throw ShapeError("data length " + std::to_string(data.size()) + " does not match shape " + shape_str(shape));
  }
  check_finite(data, "tensor data");
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = std::make_shared<const std::vector<double>>(std::move(data));
  t.id_ = next_id();
  return t;
}

Tensor Tensor::zeros(Shape shape) {
  check_shape_valid(shape);
  std::vector<double> d(static_cast<size_t>(numel(shape)), 0.0);
  return from_data(std::move(shape), std::move(d));
}

Tensor Tensor::full(Shape shape, double value) {
  check_shape_valid(shape);
  std::vector<double> d(static_cast<size_t>(numel(shape)), value);
  return from_data(std::move(shape), std::move(d));
}

Tensor Tensor::scalar(double value) { return from_data({1}, {value}); }

Tensor Tensor::param(Shape shape, std::vector<double> data) {
  Tensor t = from_data(std::move(shape), std::move(data));
  t.grad_enabled_ = true;
  return t;
}

Tensor Tensor::with_grad(bool enabled) const {
  Tensor t = *this;
  t.grad_enabled_ = enabled;
  return t;
}

Tensor Tensor::detached() const {
  Tensor t = *this;
  t.grad_enabled_ = false;
  t.id_ = next_id();
  return t;
}

// ---- Tape ---------------------------------------------------------------------

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape::Tape() {
  prev_ = g_active_tape;
  g_active_tape = this;
}

Tape::~Tape() { g_active_tape = prev_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::record(const Tensor& out, const std::vector<Tensor>& inputs, BackwardFn fn) {
  Node node;
  node.out_id = out.id();
  for (const Tensor& in : inputs) {
    node.input_ids.push_back(in.id());
    if (in.grad_enabled() && !tracks(in.id())) leaf_shapes_.emplace(in.id(), in.shape());
  }
  node.backward = std::move(fn);
  nodes_.push_back(std::move(node));
  tracked_.insert(out.id());
}

GradMap Tape::backward(const Tensor& loss) {
  if (consumed_) throw Error("tape already consumed by a previous backward()");
  if (loss.size() != 1) throw ShapeError("backward() requires a scalar loss, got " + shape_str(loss.shape()));
  if (!tracks(loss.id())) throw Error("loss was not produced under an active tape");
  consumed_ = true;

  GradMap grads;
  grads.emplace(loss.id(), Tensor::full(loss.shape(), 1.0));

  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    const Node& node = *it;
    auto gi = grads.find(node.out_id);
    if (gi == grads.end()) continue;
    std::vector<Tensor> input_grads = node.backward(gi->second);
    if (input_grads.size() != node.input_ids.size()) throw Error("backward fn arity mismatch");
    for (size_t i = 0; i < input_grads.size(); ++i) {
      const Tensor& g = input_grads[i];
      if (!g.defined()) continue;
      uint64_t id = node.input_ids[i];
      auto slot = grads.find(id);
      if (slot == grads.end()) {
        grads.emplace(id, g);
      } else {
        if (slot->second.shape() != g.shape()) throw ShapeError("gradient shape mismatch during accumulation");
        std::vector<double> acc = slot->second.data();
        const auto& add = g.data();
        for (size_t k = 0; k < acc.size(); ++k) acc[k] += add[k];
        slot->second = Tensor::from_data(g.shape(), std::move(acc));
      }
    }
  }

  // keep only grad-enabled leaves; unreached leaves get zeros
  GradMap result;
  for (const auto& [id, shape] : leaf_shapes_) {
    auto it2 = grads.find(id);
    if (it2 != grads.end()) {
      result.emplace(id, it2->second);
    } else {
      result.emplace(id, Tensor::zeros(shape));
    }
  }
  return result;
}

// ---- op helpers -----------------------------------------------------------------

namespace {

/// Wrap freshly computed data, verify finiteness, record on the active tape.
Tensor make_result(const char* name, Shape shape, std::vector<double> data,
                   const std::vector<Tensor>& inputs, BackwardFn fn) {
  check_finite(data, name);
  Tensor out = Tensor::from_data(std::move(shape), std::move(data));
  Tape* tape = Tape::active();
  if (tape) {
    bool any = false;
    for (const Tensor& in : inputs) any = any || tape->wants(in);
    if (any) tape->record(out, inputs, std::move(fn));
  }
  return out;
}

bool need(const Tensor& t) {
  Tape* tape = Tape::active();
  return tape && tape->wants(t);
}

using UnaryGrad = double (*)(double x, double y);  // dy/dx from input and output

Tensor unary_op(const char* name, const Tensor& a, double (*f)(double), UnaryGrad df) {
  const auto& in = a.data();
  std::vector<double> out(in.size());
  for (size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  bool na = need(a);
  return make_result(name, a.shape(), std::move(out), {a},
                     [a, df, na](const Tensor& g) -> std::vector<Tensor> {
                       if (!na) return {Tensor{}};
                       const auto& gd = g.data();
                       const auto& ad = a.data();
                       std::vector<double> gi(gd.size());
                       for (size_t i = 0; i < gd.size(); ++i) gi[i] = gd[i] * df(ad[i], 0.0);
                       return {Tensor::from_data(a.shape(), std::move(gi))};
                     });
}

// binary elementwise with scalar broadcast on either side
template <class F, class DFA, class DFB>
Tensor binary_op(const char* name, const Tensor& a, const Tensor& b, F f, DFA dfa, DFB dfb) {
  bool a_scalar = a.size() == 1;
  bool b_scalar = b.size() == 1;
  if (!(a.shape() == b.shape() || a_scalar || b_scalar)) {
    throw ShapeError(std::string(name) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const Shape& out_shape = a_scalar && !b_scalar ? b.shape() : a.shape();
  const auto& ad = a.data();
  const auto& bd = b.data();
  size_t n = static_cast<size_t>(numel(out_shape));
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) {
    double x = ad[a_scalar ? 0 : i];
    double y = bd[b_scalar ? 0 : i];
    out[i] = f(x, y);
  }
  bool na = need(a), nb = need(b);
  return make_result(name, out_shape, std::move(out), {a, b},
                     [a, b, dfa, dfb, na, nb, a_scalar, b_scalar](const Tensor& g) -> std::vector<Tensor> {
                       const auto& gd = g.data();
                       const auto& ad2 = a.data();
                       const auto& bd2 = b.data();
                       std::vector<Tensor> result(2);
                       if (na) {
                         std::vector<double> ga(ad2.size(), 0.0);
                         for (size_t i = 0; i < gd.size(); ++i) {
                           double x = ad2[a_scalar ? 0 : i];
                           double y = bd2[b_scalar ? 0 : i];
                           ga[a_scalar ? 0 : i] += gd[i] * dfa(x, y);
                         }
                         result[0] = Tensor::from_data(a.shape(), std::move(ga));
                       }
                       if (nb) {
                         std::vector<double> gb(bd2.size(), 0.0);
                         for (size_t i = 0; i < gd.size(); ++i) {
                           double x = ad2[a_scalar ? 0 : i];
                           double y = bd2[b_scalar ? 0 : i];
                           gb[b_scalar ? 0 : i] += gd[i] * dfb(x, y);
                         }
                         result[1] = Tensor::from_data(b.shape(), std::move(gb));
                       }
                       return result;
                     });
}

}  // namespace

// ---- elementwise -----------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor neg(const Tensor& a) {
  return unary_op(
      "neg", a, +[](double x) { return -x; }, +[](double, double) { return -1.0; });
}

Tensor abs(const Tensor& a) {
  return unary_op(
      "abs", a, +[](double x) { return std::abs(x); },
      +[](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Tensor square(const Tensor& a) {
  return unary_op(
      "square", a, +[](double x) { return x * x; }, +[](double x, double) { return 2.0 * x; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op(
      "sigmoid", a, +[](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      +[](double x, double) {
        double s = 1.0 / (1.0 + std::exp(-x));
        return s * (1.0 - s);
      });
}

Tensor tanh(const Tensor& a) {
  return unary_op(
      "tanh", a, +[](double x) { return std::tanh(x); },
      +[](double x, double) {
        double t = std::tanh(x);
        return 1.0 - t * t;
      });
}

Tensor relu(const Tensor& a) {
  return unary_op(
      "relu", a, +[](double x) { return x > 0 ? x : 0.0; },
      +[](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  const auto& in = a.data();
  std::vector<double> out(in.size());
  for (size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0 ? in[i] : slope * in[i];
  bool na = need(a);
  return make_result("leaky_relu", a.shape(), std::move(out), {a},
                     [a, slope, na](const Tensor& g) -> std::vector<Tensor> {
                       if (!na) return {Tensor{}};
                       const auto& gd = g.data();
                       const auto& ad = a.data();
                       std::vector<double> gi(gd.size());
                       for (size_t i = 0; i < gd.size(); ++i) gi[i] = gd[i] * (ad[i] > 0 ? 1.0 : slope);
                       return {Tensor::from_data(a.shape(), std::move(gi))};
                     });
}

Tensor log(const Tensor& a) {
  return unary_op(
      "log", a, +[](double x) { return std::log(x); }, +[](double x, double) { return 1.0 / x; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  if (!(lo <= hi)) throw ValueError("clamp: lo > hi");
  const auto& in = a.data();
  std::vector<double> out(in.size());
  for (size_t i = 0; i < in.size(); ++i) out[i] = std::min(hi, std::max(lo, in[i]));
  bool na = need(a);
  return make_result("clamp", a.shape(), std::move(out), {a},
                     [a, lo, hi, na](const Tensor& g) -> std::vector<Tensor> {
                       if (!na) return {Tensor{}};
                       const auto& gd = g.data();
                       const auto& ad = a.data();
                       std::vector<double> gi(gd.size());
                       for (size_t i = 0; i < gd.size(); ++i)
                         gi[i] = (ad[i] > lo && ad[i] < hi) ? gd[i] : 0.0;
                       return {Tensor::from_data(a.shape(), std::move(gi))};
                     });
}

Tensor elementwise(EwOp op, const Tensor& a, const Tensor* b, double p1, double p2) {
  auto want_b = [&]() -> const Tensor& {
    if (!b) throw ValueError("binary elementwise op requires a second operand");
    return *b;
  };
  switch (op) {
    case EwOp::add: return add(a, want_b());
    case EwOp::sub: return sub(a, want_b());
    case EwOp::mul: return mul(a, want_b());
    case EwOp::neg: return neg(a);
    case EwOp::abs: return abs(a);
    case EwOp::square: return square(a);
    case EwOp::sigmoid: return sigmoid(a);
    case EwOp::tanh: return tanh(a);
    case EwOp::relu: return relu(a);
    case EwOp::leaky_relu: return leaky_relu(a, p1);
    case EwOp::log: return log(a);
    case EwOp::clamp: return clamp(a, p1, p2);
  }
  throw ValueError("unknown elementwise op");
}

Tensor add_scalar(const Tensor& a, double c) { return add(a, Tensor::scalar(c)); }
Tensor mul_scalar(const Tensor& a, double c) { return mul(a, Tensor::scalar(c)); }

// ---- reductions ------------------------------------------------------------------

namespace {

struct AxisPlan {
  std::vector<bool> reduced;  // per axis
  Shape out_shape;            // reduced axes dropped, [1] if everything reduced
  int64_t group_size = 1;     // number of input elements per output element
};

AxisPlan plan_axes(const Shape& shape, const std::vector<int>& axes) {
  AxisPlan plan;
  plan.reduced.assign(shape.size(), false);
  if (axes.empty()) {
    plan.reduced.assign(shape.size(), true);
  } else {
    for (int ax : axes) {
      if (ax < 0 || ax >= static_cast<int>(shape.size()))
        throw ShapeError("reduce: axis " + std::to_string(ax) + " invalid for shape " + shape_str(shape));
      if (plan.reduced[static_cast<size_t>(ax)])
        throw ShapeError("reduce: duplicate axis " + std::to_string(ax));
      plan.reduced[static_cast<size_t>(ax)] = true;
    }
  }
  for (size_t i = 0; i < shape.size(); ++i) {
    if (plan.reduced[i])
      plan.group_size *= shape[i];
    else
      plan.out_shape.push_back(shape[i]);
  }
  if (plan.out_shape.empty()) plan.out_shape = {1};
  return plan;
}

/// flat input index -> flat output index under the reduction plan
int64_t out_index(const Shape& shape, const AxisPlan& plan, int64_t flat) {
  int64_t out = 0;
  int64_t rem = flat;
  for (size_t i = 0; i < shape.size(); ++i) {
    int64_t stride = 1;
    for (size_t j = i + 1; j < shape.size(); ++j) stride *= shape[j];
    int64_t idx = rem / stride;
    rem %= stride;
    if (!plan.reduced[i]) out = out * shape[i] + idx;
  }
  return out;
}

}  // namespace

Tensor reduce(ReduceOp op, const Tensor& a, const std::vector<int>& axes) {
  AxisPlan plan = plan_axes(a.shape(), axes);
  const auto& in = a.data();
  std::vector<double> out(static_cast<size_t>(numel(plan.out_shape)), 0.0);

  // precompute input->output index map once; reused by the backward pass
  auto index_map = std::make_shared<std::vector<int64_t>>(in.size());
  for (int64_t i = 0; i < static_cast<int64_t>(in.size()); ++i)
    (*index_map)[static_cast<size_t>(i)] = out_index(a.shape(), plan, i);

  for (size_t i = 0; i < in.size(); ++i) {
    double x = in[i];
    double& acc = out[static_cast<size_t>((*index_map)[i])];
    switch (op) {
      case ReduceOp::sum: acc += x; break;
      case ReduceOp::mean: acc += x; break;
      case ReduceOp::l1_norm: acc += std::abs(x); break;
      case ReduceOp::sq_l2_norm: acc += x * x; break;
    }
  }
  if (op == ReduceOp::mean) {
    for (double& v : out) v /= static_cast<double>(plan.group_size);
  }

  bool na = need(a);
  double inv_group = 1.0 / static_cast<double>(plan.group_size);
  return make_result("reduce", plan.out_shape, std::move(out), {a},
                     [a, op, index_map, inv_group, na](const Tensor& g) -> std::vector<Tensor> {
                       if (!na) return {Tensor{}};
                       const auto& gd = g.data();
                       const auto& ad = a.data();
                       std::vector<double> gi(ad.size());
                       for (size_t i = 0; i < ad.size(); ++i) {
                         double go = gd[static_cast<size_t>((*index_map)[i])];
                         switch (op) {
                           case ReduceOp::sum: gi[i] = go; break;
                           case ReduceOp::mean: gi[i] = go * inv_group; break;
                           case ReduceOp::l1_norm:
                             gi[i] = go * (ad[i] > 0 ? 1.0 : (ad[i] < 0 ? -1.0 : 0.0));
                             break;
                           case ReduceOp::sq_l2_norm: gi[i] = go * 2.0 * ad[i]; break;
                         }
                       }
                       return {Tensor::from_data(a.shape(), std::move(gi))};
                     });
}

Tensor sum(const Tensor& a, const std::vector<int>& axes) { return reduce(ReduceOp::sum, a, axes); }
Tensor mean(const Tensor& a, const std::vector<int>& axes) { return reduce(ReduceOp::mean, a, axes); }
Tensor l1_norm(const Tensor& a, const std::vector<int>& axes) { return reduce(ReduceOp::l1_norm, a, axes); }
Tensor sq_l2_norm(const Tensor& a, const std::vector<int>& axes) { return reduce(ReduceOp::sq_l2_norm, a, axes); }

// ---- structure -------------------------------------------------------------------

Tensor reshape(const Tensor& a, Shape new_shape) {
  if (numel(new_shape) != a.size())
    throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(new_shape));
  bool na = need(a);
  Shape old_shape = a.shape();
  return make_result("reshape", std::move(new_shape), a.data(), {a},
                     [old_shape, na](const Tensor& g) -> std::vector<Tensor> {
                       if (!na) return {Tensor{}};
                       return {Tensor::from_data(old_shape, g.data())};
                     });
}

namespace {

struct SliceGeom {
  int64_t outer = 1, axis_dim = 1, inner = 1;
};

SliceGeom slice_geom(const Shape& shape, int axis) {
  SliceGeom g;
  for (int i = 0; i < static_cast<int>(shape.size()); ++i) {
    if (i < axis) g.outer *= shape[static_cast<size_t>(i)];
    else if (i == axis) g.axis_dim = shape[static_cast<size_t>(i)];
    else g.inner *= shape[static_cast<size_t>(i)];
  }
  return g;
}

}  // namespace

Tensor slice(const Tensor& a, int axis, int start, int len) {
  if (axis < 0 || axis >= a.rank()) throw ShapeError("slice: bad axis");
  if (start < 0 || len <= 0 || start + len > a.dim(axis))
    throw ShapeError("slice: range [" + std::to_string(start) + "," + std::to_string(start + len) +
                     ") out of bounds for axis size " + std::to_string(a.dim(axis)));
  SliceGeom geom = slice_geom(a.shape(), axis);
  Shape out_shape = a.shape();
  out_shape[static_cast<size_t>(axis)] = len;
  const auto& in = a.data();
  std::vector<double> out(static_cast<size_t>(geom.outer * len * geom.inner));
  for (int64_t o = 0; o < geom.outer; ++o)
    for (int64_t k = 0; k < len; ++k)
      for (int64_t i = 0; i < geom.inner; ++i)
        out[static_cast<size_t>((o * len + k) * geom.inner + i)] =
            in[static_cast<size_t>((o * geom.axis_dim + start + k) * geom.inner + i)];
  bool na = need(a);
  Shape in_shape = a.shape();
  return make_result("slice", std::move(out_shape), std::move(out), {a},
                     [in_shape, geom, start, len, na](const Tensor& g) -> std::vector<Tensor> {
                       if (!na) return {Tensor{}};
                       const auto& gd = g.data();
                       std::vector<double> gi(static_cast<size_t>(numel(in_shape)), 0.0);
                       for (int64_t o = 0; o < geom.outer; ++o)
                         for (int64_t k = 0; k < len; ++k)
                           for (int64_t i = 0; i < geom.inner; ++i)
                             gi[static_cast<size_t>((o * geom.axis_dim + start + k) * geom.inner + i)] =
                                 gd[static_cast<size_t>((o * len + k) * geom.inner + i)];
                       return {Tensor::from_data(in_shape, std::move(gi))};
                     });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ValueError("concat: no inputs");
  const Shape& base = parts[0].shape();
  if (axis < 0 || axis >= parts[0].rank()) throw ShapeError("concat: bad axis");
  int total = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != parts[0].rank()) throw ShapeError("concat: rank mismatch");
    for (int i = 0; i < p.rank(); ++i) {
      if (i != axis && p.dim(i) != base[static_cast<size_t>(i)])
        throw ShapeError("concat: shape mismatch " + shape_str(p.shape()) + " vs " + shape_str(base));
    }
    total += p.dim(axis);
  }
  Shape out_shape = base;
  out_shape[static_cast<size_t>(axis)] = total;
  SliceGeom geom = slice_geom(out_shape, axis);
  std::vector<double> out(static_cast<size_t>(numel(out_shape)));
  int offset = 0;
  for (const Tensor& p : parts) {
    int len = p.dim(axis);
    const auto& pd = p.data();
    for (int64_t o = 0; o < geom.outer; ++o)
      for (int64_t k = 0; k < len; ++k)
        for (int64_t i = 0; i < geom.inner; ++i)
          out[static_cast<size_t>((o * geom.axis_dim + offset + k) * geom.inner + i)] =
              pd[static_cast<size_t>((o * len + k) * geom.inner + i)];
    offset += len;
  }
  std::vector<bool> needs;
  needs.reserve(parts.size());
  for (const Tensor& p : parts) needs.push_back(need(p));
  std::vector<Shape> part_shapes;
  for (const Tensor& p : parts) part_shapes.push_back(p.shape());
  return make_result("concat", std::move(out_shape), std::move(out), parts,
                     [part_shapes, geom, axis, needs](const Tensor& g) -> std::vector<Tensor> {
                       std::vector<Tensor> gi(part_shapes.size());
                       const auto& gd = g.data();
                       int off = 0;
                       for (size_t pi = 0; pi < part_shapes.size(); ++pi) {
                         int len = part_shapes[pi][static_cast<size_t>(axis)];
                         if (needs[pi]) {
                           std::vector<double> gp(static_cast<size_t>(numel(part_shapes[pi])));
                           for (int64_t o = 0; o < geom.outer; ++o)
                             for (int64_t k = 0; k < len; ++k)
                               for (int64_t i = 0; i < geom.inner; ++i)
                                 gp[static_cast<size_t>((o * len + k) * geom.inner + i)] =
                                     gd[static_cast<size_t>((o * geom.axis_dim + off + k) * geom.inner + i)];
                           gi[pi] = Tensor::from_data(part_shapes[pi], std::move(gp));
                         }
                         off += len;
                       }
                       return gi;
                     });
}

}  // namespace dsfl
