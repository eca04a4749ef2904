#include "hsal/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hsal/errors.hpp"
#include "hsal/kernels.hpp"

namespace hsal {

const Tensor& Var::value() const { return tape->value(id); }
bool Var::requires_grad() const { return tape->requires_grad(id); }

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::Constant: return "constant";
    case OpKind::Parameter: return "parameter";
    case OpKind::MatMul: return "matmul";
    case OpKind::MatMulNT: return "matmul_nt";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::Scale: return "scale";
    case OpKind::Tanh: return "tanh";
    case OpKind::Relu: return "relu";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::Softmax: return "softmax";
    case OpKind::SegmentSoftmax: return "segment_softmax";
    case OpKind::Concat: return "concat";
    case OpKind::Gather: return "gather";
    case OpKind::Sum: return "sum";
    case OpKind::Mean: return "mean";
    case OpKind::SegmentSum: return "segment_sum";
    case OpKind::SegmentMean: return "segment_mean";
    case OpKind::ScaleRows: return "scale_rows";
    case OpKind::Rotary: return "rotary";
    case OpKind::Reshape: return "reshape";
    case OpKind::SoftmaxBce: return "softmax_bce";
  }
  return "?";
}

// ---- Tape ---------------------------------------------------------------

Var Tape::constant(Tensor value) {
  Node node;
  node.kind = OpKind::Constant;
  node.owned = std::move(value);
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::reference(const Tensor& value) {
  Node node;
  node.kind = OpKind::Constant;
  node.external = &value;
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::parameter(Tensor& param) { return parameter(param, param.mutable_grad()); }

Var Tape::parameter(const Tensor& param, std::span<double> grad_sink) {
  if (grad_sink.size() != param.size()) {
    throw DimensionError("gradient sink of length " + std::to_string(grad_sink.size()) +
                         " for parameter " + shape_str(param.shape()));
  }
  Node node;
  node.kind = OpKind::Parameter;
  node.external = &param;
  node.requires_grad = true;
  node.sink = grad_sink;
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::record(OpKind kind, std::vector<std::uint32_t> inputs, Tensor value,
                 BackwardFn backward) {
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  Node node;
  node.kind = kind;
  for (auto in : inputs) {
    if (in >= id) throw ContractError("tape input refers to a later node");
    node.requires_grad = node.requires_grad || nodes_[in].requires_grad;
  }
  node.inputs = std::move(inputs);
  node.owned = std::move(value);
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{this, id};
}

const Tensor& Tape::value(std::uint32_t id) const {
  const auto& n = nodes_[id];
  return n.external ? *n.external : n.owned;
}

std::span<const double> Tape::grad(Var v) const {
  const auto& n = nodes_[v.id];
  if (n.kind == OpKind::Parameter) return n.sink;
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw ContractError("loss belongs to another tape");
  if (value(loss.id).size() != 1) {
    throw ContractError("backward needs a scalar loss, got " +
                        shape_str(value(loss.id).shape()));
  }
  for (std::uint32_t i = 0; i <= loss.id; ++i) {
    auto& n = nodes_[i];
    if (n.requires_grad && n.kind != OpKind::Parameter) {
      n.grad.assign(value(i).size(), 0.0);
    }
  }
  if (!nodes_[loss.id].requires_grad) return;
  auto seed = nodes_[loss.id].kind == OpKind::Parameter
                  ? nodes_[loss.id].sink
                  : std::span<double>(nodes_[loss.id].grad);
  seed[0] += 1.0;

  std::vector<std::span<double>> input_grads;
  for (std::int64_t i = loss.id; i >= 0; --i) {
    auto& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.requires_grad || !n.backward) continue;
    input_grads.clear();
    for (auto in : n.inputs) {
      auto& src = nodes_[in];
      if (!src.requires_grad) {
        input_grads.emplace_back();
      } else if (src.kind == OpKind::Parameter) {
        input_grads.push_back(src.sink);
      } else {
        input_grads.emplace_back(src.grad);
      }
    }
    n.backward(*this, n.grad, input_grads);
  }
}

// ---- helpers ------------------------------------------------------------

namespace {

Tape& tape_of(Var a) {
  if (!a.tape) throw ContractError("operation on an unbound Var");
  return *a.tape;
}

Tape& same_tape(Var a, Var b) {
  if (a.tape != b.tape || !a.tape) throw ContractError("operands live on different tapes");
  return *a.tape;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()) + " differ");
  }
}

Tensor like(const Tensor& t) { return Tensor::uninitialized(t.shape()); }

}  // namespace

// ---- matmul -------------------------------------------------------------

Var matmul(Var a, Var b) {
  auto& tape = same_tape(a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  if (bv.rows() != k) {
    throw DimensionError("matmul: inner dimensions of " + shape_str(av.shape()) + " and " +
                         shape_str(bv.shape()) + " do not match");
  }
  auto out = Tensor::uninitialized({m, n});
  kernels::gemm(av.values(), bv.values(), out.values(), m, k, n, false);
  const auto ia = a.id, ib = b.id;
  return tape.record(
      OpKind::MatMul, {ia, ib}, std::move(out),
      [ia, ib, m, k, n](const Tape& t, std::span<const double> g,
                        std::span<const std::span<double>> dg) {
        if (!dg[0].empty()) kernels::gemm_nt(g, t.value(ib).values(), dg[0], m, n, k, true);
        if (!dg[1].empty()) kernels::gemm_tn(t.value(ia).values(), g, dg[1], k, m, n, true);
      });
}

Var matmul_nt(Var a, Var b) {
  auto& tape = same_tape(a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  const std::size_t m = av.rows(), k = av.cols(), n = bv.rows();
  if (bv.cols() != k) {
    throw DimensionError("matmul_nt: inner dimensions of " + shape_str(av.shape()) +
                         " and transposed " + shape_str(bv.shape()) + " do not match");
  }
  auto out = Tensor::uninitialized({m, n});
  kernels::gemm_nt(av.values(), bv.values(), out.values(), m, k, n, false);
  const auto ia = a.id, ib = b.id;
  return tape.record(
      OpKind::MatMulNT, {ia, ib}, std::move(out),
      [ia, ib, m, k, n](const Tape& t, std::span<const double> g,
                        std::span<const std::span<double>> dg) {
        // dA = G * B, dB = G^T * A
        if (!dg[0].empty()) kernels::gemm(g, t.value(ib).values(), dg[0], m, n, k, true);
        if (!dg[1].empty()) kernels::gemm_tn(g, t.value(ia).values(), dg[1], n, m, k, true);
      });
}

// ---- elementwise ----------------------------------------------------------

Var elementwise(Elementwise op, Var a, std::optional<Var> b) {
  const bool binary = op == Elementwise::Add || op == Elementwise::Sub || op == Elementwise::Mul;
  if (binary != b.has_value()) {
    throw ContractError(binary ? "binary elementwise op needs two operands"
                               : "unary elementwise op takes one operand");
  }
  auto& tape = binary ? same_tape(a, *b) : tape_of(a);
  const auto& av = a.value();
  auto out = like(av);
  auto o = out.values();
  auto x = av.values();
  const auto ia = a.id;

  if (binary) {
    const auto& bv = b->value();
    require_same_shape(av, bv, "elementwise");
    auto y = bv.values();
    const auto ib = b->id;
    switch (op) {
      case Elementwise::Add:
        for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + y[i];
        return tape.record(OpKind::Add, {ia, ib}, std::move(out),
                           [](const Tape&, std::span<const double> g,
                              std::span<const std::span<double>> dg) {
                             for (int s = 0; s < 2; ++s) {
                               if (dg[s].empty()) continue;
                               for (std::size_t i = 0; i < g.size(); ++i) dg[s][i] += g[i];
                             }
                           });
      case Elementwise::Sub:
        for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] - y[i];
        return tape.record(OpKind::Sub, {ia, ib}, std::move(out),
                           [](const Tape&, std::span<const double> g,
                              std::span<const std::span<double>> dg) {
                             if (!dg[0].empty())
                               for (std::size_t i = 0; i < g.size(); ++i) dg[0][i] += g[i];
                             if (!dg[1].empty())
                               for (std::size_t i = 0; i < g.size(); ++i) dg[1][i] -= g[i];
                           });
      default:
        for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * y[i];
        return tape.record(OpKind::Mul, {ia, ib}, std::move(out),
                           [ia, ib](const Tape& t, std::span<const double> g,
                                    std::span<const std::span<double>> dg) {
                             auto xa = t.value(ia).values();
                             auto xb = t.value(ib).values();
                             if (!dg[0].empty())
                               for (std::size_t i = 0; i < g.size(); ++i) dg[0][i] += g[i] * xb[i];
                             if (!dg[1].empty())
                               for (std::size_t i = 0; i < g.size(); ++i) dg[1][i] += g[i] * xa[i];
                           });
    }
  }

  switch (op) {
    case Elementwise::Tanh: {
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::tanh(x[i]);
      auto id = tape.size();
      return tape.record(OpKind::Tanh, {ia}, std::move(out),
                         [id](const Tape& t, std::span<const double> g,
                              std::span<const std::span<double>> dg) {
                           auto y = t.value(static_cast<std::uint32_t>(id)).values();
                           for (std::size_t i = 0; i < g.size(); ++i)
                             dg[0][i] += g[i] * (1.0 - y[i] * y[i]);
                         });
    }
    case Elementwise::Relu: {
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] > 0.0 ? x[i] : 0.0;
      return tape.record(OpKind::Relu, {ia}, std::move(out),
                         [ia](const Tape& t, std::span<const double> g,
                              std::span<const std::span<double>> dg) {
                           auto xa = t.value(ia).values();
                           for (std::size_t i = 0; i < g.size(); ++i)
                             if (xa[i] > 0.0) dg[0][i] += g[i];
                         });
    }
    default: {
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = 1.0 / (1.0 + std::exp(-x[i]));
      auto id = tape.size();
      return tape.record(OpKind::Sigmoid, {ia}, std::move(out),
                         [id](const Tape& t, std::span<const double> g,
                              std::span<const std::span<double>> dg) {
                           auto y = t.value(static_cast<std::uint32_t>(id)).values();
                           for (std::size_t i = 0; i < g.size(); ++i)
                             dg[0][i] += g[i] * y[i] * (1.0 - y[i]);
                         });
    }
  }
}

Var add(Var a, Var b) { return elementwise(Elementwise::Add, a, b); }
Var sub(Var a, Var b) { return elementwise(Elementwise::Sub, a, b); }
Var mul(Var a, Var b) { return elementwise(Elementwise::Mul, a, b); }
Var tanh(Var a) { return elementwise(Elementwise::Tanh, a); }
Var relu(Var a) { return elementwise(Elementwise::Relu, a); }
Var sigmoid(Var a) { return elementwise(Elementwise::Sigmoid, a); }

Var scale(Var a, double factor) {
  auto& tape = tape_of(a);
  auto out = like(a.value());
  auto x = a.value().values();
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = factor * x[i];
  return tape.record(OpKind::Scale, {a.id}, std::move(out),
                     [factor](const Tape&, std::span<const double> g,
                              std::span<const std::span<double>> dg) {
                       for (std::size_t i = 0; i < g.size(); ++i) dg[0][i] += factor * g[i];
                     });
}

// ---- softmax ------------------------------------------------------------

namespace {

void check_finite(std::span<const double> x, const char* op) {
  for (double v : x) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite input");
  }
}

// dx_i = y_i * (g_i - sum_j g_j y_j) within each group.
void softmax_backward(std::span<const double> y, std::span<const double> g,
                      std::span<double> dx, std::span<const std::uint32_t> segment,
                      std::size_t n_segments) {
  if (segment.empty()) {
    double dot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) dot += g[i] * y[i];
    for (std::size_t i = 0; i < y.size(); ++i) dx[i] += y[i] * (g[i] - dot);
    return;
  }
  std::vector<double> dot(n_segments, 0.0);
  for (std::size_t i = 0; i < y.size(); ++i) dot[segment[i]] += g[i] * y[i];
  for (std::size_t i = 0; i < y.size(); ++i) dx[i] += y[i] * (g[i] - dot[segment[i]]);
}

}  // namespace

Var softmax(Var x) {
  auto& tape = tape_of(x);
  const auto& xv = x.value();
  auto in = xv.values();
  check_finite(in, "softmax");
  auto out = like(xv);
  auto o = out.values();
  const double mx = *std::max_element(in.begin(), in.end());
  double z = 0.0;
  for (std::size_t i = 0; i < o.size(); ++i) {
    o[i] = std::exp(in[i] - mx);
    z += o[i];
  }
  for (auto& v : o) v /= z;
  const auto id = static_cast<std::uint32_t>(tape.size());
  return tape.record(OpKind::Softmax, {x.id}, std::move(out),
                     [id](const Tape& t, std::span<const double> g,
                          std::span<const std::span<double>> dg) {
                       softmax_backward(t.value(id).values(), g, dg[0], {}, 0);
                     });
}

Var segment_softmax(Var x, std::span<const std::uint32_t> segment, std::size_t n_segments) {
  auto& tape = tape_of(x);
  const auto& xv = x.value();
  auto in = xv.values();
  if (segment.size() != in.size()) {
    throw DimensionError("segment_softmax: " + std::to_string(segment.size()) +
                         " segment ids for " + std::to_string(in.size()) + " entries");
  }
  check_finite(in, "segment_softmax");
  std::vector<double> mx(n_segments, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (segment[i] >= n_segments) throw ContractError("segment id out of range");
    mx[segment[i]] = std::max(mx[segment[i]], in[i]);
  }
  auto out = like(xv);
  auto o = out.values();
  std::vector<double> z(n_segments, 0.0);
  for (std::size_t i = 0; i < in.size(); ++i) {
    o[i] = std::exp(in[i] - mx[segment[i]]);
    z[segment[i]] += o[i];
  }
  for (std::size_t i = 0; i < in.size(); ++i) o[i] /= z[segment[i]];
  const auto id = static_cast<std::uint32_t>(tape.size());
  std::vector<std::uint32_t> seg(segment.begin(), segment.end());
  return tape.record(OpKind::SegmentSoftmax, {x.id}, std::move(out),
                     [id, seg = std::move(seg), n_segments](
                         const Tape& t, std::span<const double> g,
                         std::span<const std::span<double>> dg) {
                       softmax_backward(t.value(id).values(), g, dg[0], seg, n_segments);
                     });
}

Var reshape(Var x, Shape shape) {
  auto& tape = tape_of(x);
  auto out = Tensor(std::move(shape), std::vector<double>(x.value().values().begin(),
                                                          x.value().values().end()));
  return tape.record(OpKind::Reshape, {x.id}, std::move(out),
                     [](const Tape&, std::span<const double> g,
                        std::span<const std::span<double>> dg) {
                       for (std::size_t i = 0; i < g.size(); ++i) dg[0][i] += g[i];
                     });
}

// ---- concat / gather ------------------------------------------------------

Var concat(std::initializer_list<Var> parts) {
  return concat(std::span<const Var>(parts.begin(), parts.size()));
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat of nothing");
  auto& tape = tape_of(parts[0]);
  const std::size_t rows = parts[0].value().rows();
  const bool rank1 = parts[0].value().rank() == 1;
  std::vector<std::size_t> widths;
  std::vector<std::uint32_t> ids;
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.tape != &tape) throw ContractError("concat operands live on different tapes");
    const auto& v = p.value();
    if (v.rows() != rows || (v.rank() == 1) != rank1) {
      throw DimensionError("concat: leading dimensions of " + shape_str(parts[0].shape()) +
                           " and " + shape_str(v.shape()) + " differ");
    }
    widths.push_back(v.cols());
    ids.push_back(p.id);
    total += v.cols();
  }
  auto out = rank1 ? Tensor::uninitialized({total}) : Tensor::uninitialized({rows, total});
  auto o = out.values();
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto src = parts[k].value().values();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(src.data() + r * widths[k], widths[k], o.data() + r * total + offset);
    }
    offset += widths[k];
  }
  return tape.record(OpKind::Concat, ids, std::move(out),
                     [widths, rows, total](const Tape&, std::span<const double> g,
                                           std::span<const std::span<double>> dg) {
                       std::size_t off = 0;
                       for (std::size_t k = 0; k < widths.size(); ++k) {
                         if (!dg[k].empty()) {
                           for (std::size_t r = 0; r < rows; ++r)
                             for (std::size_t c = 0; c < widths[k]; ++c)
                               dg[k][r * widths[k] + c] += g[r * total + off + c];
                         }
                         off += widths[k];
                       }
                     });
}

Var gather(Var table, std::span<const std::uint32_t> rows) {
  auto& tape = tape_of(table);
  const auto& tv = table.value();
  const std::size_t n_rows = tv.rows();
  const std::size_t d = tv.cols();
  if (rows.empty()) throw ContractError("gather with no indices");
  for (auto r : rows) {
    if (r >= n_rows) {
      throw LookupError("gather: row " + std::to_string(r) + " out of range for " +
                        shape_str(tv.shape()));
    }
  }
  auto out = Tensor::uninitialized({rows.size(), d});
  auto o = out.values();
  auto src = tv.values();
  for (std::size_t k = 0; k < rows.size(); ++k) {
    std::copy_n(src.data() + std::size_t{rows[k]} * d, d, o.data() + k * d);
  }
  std::vector<std::uint32_t> idx(rows.begin(), rows.end());
  return tape.record(OpKind::Gather, {table.id}, std::move(out),
                     [idx = std::move(idx), d](const Tape&, std::span<const double> g,
                                               std::span<const std::span<double>> dg) {
                       for (std::size_t k = 0; k < idx.size(); ++k) {
                         double* dst = dg[0].data() + std::size_t{idx[k]} * d;
                         const double* src_g = g.data() + k * d;
                         for (std::size_t c = 0; c < d; ++c) dst[c] += src_g[c];
                       }
                     });
}

// ---- reductions -----------------------------------------------------------

Var reduce(Reduction op, Var x, std::size_t axis) {
  auto& tape = tape_of(x);
  const auto& xv = x.value();
  const std::size_t r = xv.rows(), c = xv.cols();
  if (axis > 1 || (xv.rank() == 1 && axis != 0)) {
    throw ContractError("reduce: axis " + std::to_string(axis) + " invalid for " +
                        shape_str(xv.shape()));
  }
  // A rank-1 input reduces all of its entries; model it as a 1 x c row
  // reduced over axis 1.
  const bool over_cols = xv.rank() == 1 || axis == 1;
  const std::size_t n = over_cols ? c : r;
  const std::size_t out_len = xv.rank() == 1 ? 1 : (over_cols ? r : c);
  const double factor = op == Reduction::Mean ? 1.0 / static_cast<double>(n) : 1.0;
  auto out = Tensor::zeros({out_len});
  auto o = out.values();
  auto in = xv.values();
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      o[over_cols ? i : j] += in[i * c + j];
    }
  }
  for (auto& v : o) v *= factor;
  return tape.record(op == Reduction::Mean ? OpKind::Mean : OpKind::Sum, {x.id},
                     std::move(out),
                     [r, c, over_cols, factor](const Tape&, std::span<const double> g,
                                               std::span<const std::span<double>> dg) {
                       for (std::size_t i = 0; i < r; ++i)
                         for (std::size_t j = 0; j < c; ++j)
                           dg[0][i * c + j] += factor * g[over_cols ? i : j];
                     });
}

namespace {

Var segment_reduce(Var x, std::span<const std::uint32_t> segment, std::size_t n_segments,
                   bool mean) {
  auto& tape = tape_of(x);
  const auto& xv = x.value();
  const std::size_t n = xv.rows(), d = xv.cols();
  if (segment.size() != n) {
    throw DimensionError("segment reduction: " + std::to_string(segment.size()) +
                         " segment ids for " + shape_str(xv.shape()));
  }
  if (n_segments == 0) throw ContractError("segment reduction into zero segments");
  std::vector<double> weight(n_segments, 1.0);
  if (mean) {
    std::vector<std::size_t> count(n_segments, 0);
    for (auto s : segment) {
      if (s >= n_segments) throw ContractError("segment id out of range");
      ++count[s];
    }
    for (std::size_t s = 0; s < n_segments; ++s) {
      weight[s] = count[s] ? 1.0 / static_cast<double>(count[s]) : 0.0;
    }
  }
  auto out = Tensor::zeros({n_segments, d});
  auto o = out.values();
  auto in = xv.values();
  for (std::size_t i = 0; i < n; ++i) {
    const auto s = segment[i];
    if (s >= n_segments) throw ContractError("segment id out of range");
    for (std::size_t c = 0; c < d; ++c) o[s * d + c] += in[i * d + c];
  }
  if (mean) {
    for (std::size_t s = 0; s < n_segments; ++s)
      for (std::size_t c = 0; c < d; ++c) o[s * d + c] *= weight[s];
  }
  std::vector<std::uint32_t> seg(segment.begin(), segment.end());
  return tape.record(mean ? OpKind::SegmentMean : OpKind::SegmentSum, {x.id}, std::move(out),
                     [seg = std::move(seg), weight = std::move(weight), d](
                         const Tape&, std::span<const double> g,
                         std::span<const std::span<double>> dg) {
                       for (std::size_t i = 0; i < seg.size(); ++i) {
                         const double w = weight[seg[i]];
                         for (std::size_t c = 0; c < d; ++c)
                           dg[0][i * d + c] += w * g[seg[i] * d + c];
                       }
                     });
}

}  // namespace

Var segment_sum(Var x, std::span<const std::uint32_t> segment, std::size_t n_segments) {
  return segment_reduce(x, segment, n_segments, false);
}

Var segment_mean(Var x, std::span<const std::uint32_t> segment, std::size_t n_segments) {
  return segment_reduce(x, segment, n_segments, true);
}

Var scale_rows(Var x, Var w) {
  auto& tape = same_tape(x, w);
  const auto& xv = x.value();
  const auto& wv = w.value();
  const std::size_t n = xv.rows(), d = xv.cols();
  if (wv.size() != n) {
    throw DimensionError("scale_rows: weights " + shape_str(wv.shape()) + " for rows of " +
                         shape_str(xv.shape()));
  }
  auto out = like(xv);
  auto o = out.values();
  auto in = xv.values();
  auto wt = wv.values();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < d; ++c) o[i * d + c] = wt[i] * in[i * d + c];
  const auto ix = x.id, iw = w.id;
  return tape.record(OpKind::ScaleRows, {ix, iw}, std::move(out),
                     [ix, iw, n, d](const Tape& t, std::span<const double> g,
                                    std::span<const std::span<double>> dg) {
                       auto xin = t.value(ix).values();
                       auto win = t.value(iw).values();
                       if (!dg[0].empty())
                         for (std::size_t i = 0; i < n; ++i)
                           for (std::size_t c = 0; c < d; ++c)
                             dg[0][i * d + c] += win[i] * g[i * d + c];
                       if (!dg[1].empty())
                         for (std::size_t i = 0; i < n; ++i) {
                           double acc = 0.0;
                           for (std::size_t c = 0; c < d; ++c) acc += g[i * d + c] * xin[i * d + c];
                           dg[1][i] += acc;
                         }
                     });
}

// ---- rotary ---------------------------------------------------------------

namespace {

void rotate_rows(std::span<const double> in, std::span<double> out,
                 std::span<const double> positions, std::size_t d, double sign,
                 bool accumulate) {
  const std::size_t n = positions.size();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t k = 0; k < d / 2; ++k) {
      const double theta =
          std::pow(10000.0, -2.0 * static_cast<double>(k) / static_cast<double>(d));
      const double angle = sign * theta * positions[r];
      const double cs = std::cos(angle), sn = std::sin(angle);
      const double x0 = in[r * d + 2 * k], x1 = in[r * d + 2 * k + 1];
      const double y0 = cs * x0 - sn * x1;
      const double y1 = sn * x0 + cs * x1;
      if (accumulate) {
        out[r * d + 2 * k] += y0;
        out[r * d + 2 * k + 1] += y1;
      } else {
        out[r * d + 2 * k] = y0;
        out[r * d + 2 * k + 1] = y1;
      }
    }
  }
}

}  // namespace

Var rotary(Var x, std::span<const double> positions) {
  auto& tape = tape_of(x);
  const auto& xv = x.value();
  const std::size_t d = xv.cols();
  if (d % 2 != 0) throw ConfigError("rotary encoding needs an even dimension, got " + std::to_string(d));
  if (positions.size() != xv.rows()) {
    throw DimensionError("rotary: " + std::to_string(positions.size()) + " positions for " +
                         shape_str(xv.shape()));
  }
  auto out = like(xv);
  rotate_rows(xv.values(), out.values(), positions, d, 1.0, false);
  std::vector<double> pos(positions.begin(), positions.end());
  return tape.record(OpKind::Rotary, {x.id}, std::move(out),
                     [pos = std::move(pos), d](const Tape&, std::span<const double> g,
                                               std::span<const std::span<double>> dg) {
                       // the transpose of a rotation is the inverse rotation
                       rotate_rows(g, dg[0], pos, d, -1.0, true);
                     });
}

// ---- loss -----------------------------------------------------------------

Var softmax_bce(Var scores, std::size_t target) {
  constexpr double kLo = 1e-12;
  constexpr double kHi = 1.0 - 1e-12;
  auto& tape = tape_of(scores);
  auto s = scores.value().values();
  if (target >= s.size()) {
    throw ContractError("target " + std::to_string(target) + " outside " +
                        std::to_string(s.size()) + " scores");
  }
  check_finite(s, "loss");
  const double mx = *std::max_element(s.begin(), s.end());
  std::vector<double> y(s.size());
  double z = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    y[i] = std::exp(s[i] - mx);
    z += y[i];
  }
  for (auto& v : y) v /= z;
  double loss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double p = std::clamp(y[i], kLo, kHi);
    loss -= i == target ? std::log(p) : std::log(1.0 - p);
  }
  return tape.record(
      OpKind::SoftmaxBce, {scores.id}, Tensor({1}, {loss}),
      [y = std::move(y), target](const Tape&, std::span<const double> g,
                                 std::span<const std::span<double>> dg) {
        std::vector<double> dy(y.size(), 0.0);
        for (std::size_t i = 0; i < y.size(); ++i) {
          if (y[i] < kLo || y[i] > kHi) continue;  // clamped: flat
          dy[i] = i == target ? -1.0 / y[i] : 1.0 / (1.0 - y[i]);
          dy[i] *= g[0];
        }
        softmax_backward(y, dy, dg[0], {}, 0);
      });
}

}  // namespace hsal
