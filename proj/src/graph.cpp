#include "lirr/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lirr/errors.hpp"

namespace lirr {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                         b.shape_str());
  }
}

void add_into(Tensor& dst, const Tensor& src) {
  auto& d = dst.data();
  const auto& s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

// a (n x k) * b^T where b is (m x k) -> n x m
Tensor matmul_bt(const Tensor& a, const Tensor& b) {
  Tensor out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ar = a.data().data() + i * a.cols();
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* br = b.data().data() + j * b.cols();
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += ar[k] * br[k];
      out(i, j) = acc;
    }
  }
  return out;
}

// a^T * b where a is (n x k), b is (n x m) -> k x m
Tensor matmul_at(const Tensor& a, const Tensor& b) {
  Tensor out(a.cols(), b.cols());
  double* o = out.data().data();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ar = a.data().data() + i * a.cols();
    const double* br = b.data().data() + i * b.cols();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double av = ar[k];
      double* orow = o + k * b.cols();
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += av * br[j];
    }
  }
  return out;
}

Tensor softmax_rows(const Tensor& x) {
  Tensor out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    auto o = out.row(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      o[c] = std::exp(in[c] - mx);
      z += o[c];
    }
    for (double& v : o) v /= z;
  }
  return out;
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

const char* op_name(OpKind op) {
  switch (op) {
    case OpKind::Constant: return "constant";
    case OpKind::Parameter: return "parameter";
    case OpKind::MatMul: return "matmul";
    case OpKind::Add: return "add";
    case OpKind::AddRow: return "add_row";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::Scale: return "scale";
    case OpKind::Relu: return "relu";
    case OpKind::Tanh: return "tanh";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::Softmax: return "softmax";
    case OpKind::ConcatCols: return "concat_cols";
    case OpKind::ConcatRows: return "concat_rows";
    case OpKind::Transpose: return "transpose";
    case OpKind::NormalizeRows: return "normalize_rows";
    case OpKind::Sum: return "sum";
    case OpKind::Mean: return "mean";
    case OpKind::RowSum: return "row_sum";
    case OpKind::GradReverse: return "grad_reverse";
    case OpKind::SoftmaxCrossEntropy: return "softmax_cross_entropy";
    case OpKind::SigmoidBce: return "sigmoid_bce";
    case OpKind::L1Loss: return "l1_loss";
  }
  return "unknown";
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions differ " + a.shape_str() + " x " +
                         b.shape_str());
  }
  Tensor out(a.rows(), b.cols());
  double* o = out.data().data();
  const double* bd = b.data().data();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ar = a.data().data() + i * a.cols();
    double* orow = o + i * b.cols();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double av = ar[k];
      const double* brow = bd + k * b.cols();
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

Var Graph::push(OpKind op, std::size_t a, std::size_t b, double param, Tensor value,
                std::vector<double> aux) {
  nodes_.push_back(Node{op, a, b, param, std::move(aux), std::move(value)});
  return Var{nodes_.size() - 1};
}

const Graph::Node& Graph::node(Var v) const {
  if (v.id >= nodes_.size()) {
    throw IndexError("node id " + std::to_string(v.id) + " not in graph of size " +
                     std::to_string(nodes_.size()));
  }
  return nodes_[v.id];
}

Var Graph::constant(Tensor value) { return push(OpKind::Constant, 0, 0, 0.0, std::move(value)); }

Var Graph::parameter(Tensor value) {
  return push(OpKind::Parameter, 0, 0, 0.0, std::move(value));
}

const Tensor& Graph::value(Var v) const { return node(v).value; }

double Graph::scalar(Var v) const {
  const Tensor& t = value(v);
  if (t.rows() != 1 || t.cols() != 1) {
    throw ContractError("expected a scalar node, got shape " + t.shape_str());
  }
  return t[0];
}

OpKind Graph::kind(Var v) const { return node(v).op; }

bool Graph::is_parameter(Var v) const { return node(v).op == OpKind::Parameter; }

Var Graph::matmul(Var a, Var b) {
  return push(OpKind::MatMul, a.id, b.id, 0.0, lirr::matmul(value(a), value(b)));
}

Var Graph::add(Var a, Var b) {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  require_same_shape(x, y, "add");
  Tensor out = x;
  add_into(out, y);
  return push(OpKind::Add, a.id, b.id, 0.0, std::move(out));
}

Var Graph::add_row(Var a, Var row) {
  const Tensor& x = value(a);
  const Tensor& r = value(row);
  if (r.rows() != 1 || r.cols() != x.cols()) {
    throw DimensionError("add_row: expected a 1x" + std::to_string(x.cols()) +
                         " row, got " + r.shape_str() + " for " + x.shape_str());
  }
  Tensor out = x;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto o = out.row(i);
    for (std::size_t j = 0; j < o.size(); ++j) o[j] += r[j];
  }
  return push(OpKind::AddRow, a.id, row.id, 0.0, std::move(out));
}

Var Graph::sub(Var a, Var b) {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  require_same_shape(x, y, "sub");
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= y[i];
  return push(OpKind::Sub, a.id, b.id, 0.0, std::move(out));
}

Var Graph::mul(Var a, Var b) {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  require_same_shape(x, y, "mul");
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= y[i];
  return push(OpKind::Mul, a.id, b.id, 0.0, std::move(out));
}

Var Graph::scale(Var a, double k) {
  Tensor out = value(a);
  for (double& v : out.data()) v *= k;
  return push(OpKind::Scale, a.id, 0, k, std::move(out));
}

Var Graph::relu(Var a) {
  Tensor out = value(a);
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return push(OpKind::Relu, a.id, 0, 0.0, std::move(out));
}

Var Graph::tanh(Var a) {
  Tensor out = value(a);
  for (double& v : out.data()) v = std::tanh(v);
  return push(OpKind::Tanh, a.id, 0, 0.0, std::move(out));
}

Var Graph::sigmoid(Var a) {
  Tensor out = value(a);
  for (double& v : out.data()) v = stable_sigmoid(v);
  return push(OpKind::Sigmoid, a.id, 0, 0.0, std::move(out));
}

Var Graph::softmax(Var a) {
  return push(OpKind::Softmax, a.id, 0, 0.0, softmax_rows(value(a)));
}

Var Graph::concat_cols(Var a, Var b) {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  if (x.rows() != y.rows()) {
    throw DimensionError("concat_cols: row counts differ " + x.shape_str() + " vs " +
                         y.shape_str());
  }
  Tensor out(x.rows(), x.cols() + y.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto o = out.row(i);
    std::copy(x.row(i).begin(), x.row(i).end(), o.begin());
    std::copy(y.row(i).begin(), y.row(i).end(), o.begin() + static_cast<long>(x.cols()));
  }
  return push(OpKind::ConcatCols, a.id, b.id, 0.0, std::move(out));
}

Var Graph::concat_rows(Var a, Var b) {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  if (x.cols() != y.cols()) {
    throw DimensionError("concat_rows: column counts differ " + x.shape_str() + " vs " +
                         y.shape_str());
  }
  std::vector<double> data = x.data();
  data.insert(data.end(), y.data().begin(), y.data().end());
  return push(OpKind::ConcatRows, a.id, b.id, 0.0,
              Tensor(x.rows() + y.rows(), x.cols(), std::move(data)));
}

Var Graph::transpose(Var a) {
  const Tensor& x = value(a);
  Tensor out(x.cols(), x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) out(j, i) = x(i, j);
  }
  return push(OpKind::Transpose, a.id, 0, 0.0, std::move(out));
}

Var Graph::normalize_rows(Var a, double eps) {
  Tensor out = value(a);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    double sq = 0.0;
    for (double v : r) sq += v * v;
    const double s = std::sqrt(sq) + eps;
    for (double& v : r) v /= s;
  }
  return push(OpKind::NormalizeRows, a.id, 0, eps, std::move(out));
}

Var Graph::sum(Var a) {
  double acc = 0.0;
  for (double v : value(a).data()) acc += v;
  return push(OpKind::Sum, a.id, 0, 0.0, Tensor::scalar(acc));
}

Var Graph::mean(Var a) {
  const Tensor& x = value(a);
  if (x.empty()) throw ContractError("mean of an empty tensor");
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  return push(OpKind::Mean, a.id, 0, 0.0,
              Tensor::scalar(acc / static_cast<double>(x.size())));
}

Var Graph::row_sum(Var a) {
  const Tensor& x = value(a);
  Tensor out(x.rows(), 1);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double acc = 0.0;
    for (double v : x.row(i)) acc += v;
    out[i] = acc;
  }
  return push(OpKind::RowSum, a.id, 0, 0.0, std::move(out));
}

Var Graph::grad_reverse(Var a, double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ParameterError("grad_reverse: lambda must be a finite nonnegative number, got " +
                         std::to_string(lambda));
  }
  return push(OpKind::GradReverse, a.id, 0, lambda, value(a));
}

Var Graph::softmax_cross_entropy(Var logits, std::span<const std::size_t> labels) {
  const Tensor& x = value(logits);
  if (labels.size() != x.rows()) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for logits " + x.shape_str());
  }
  if (x.rows() == 0) throw ContractError("softmax_cross_entropy on an empty batch");
  std::vector<double> aux(labels.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    if (labels[i] >= x.cols()) {
      throw IndexError("label " + std::to_string(labels[i]) + " out of range for " +
                       std::to_string(x.cols()) + " classes");
    }
    auto r = x.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double z = 0.0;
    for (double v : r) z += std::exp(v - mx);
    acc += mx + std::log(z) - r[labels[i]];
    aux[i] = static_cast<double>(labels[i]);
  }
  return push(OpKind::SoftmaxCrossEntropy, logits.id, 0, 0.0,
              Tensor::scalar(acc / static_cast<double>(x.rows())), std::move(aux));
}

Var Graph::sigmoid_bce(Var logits, std::span<const double> targets) {
  const Tensor& x = value(logits);
  if (x.cols() != 1 || targets.size() != x.rows()) {
    throw DimensionError("sigmoid_bce: expected " + std::to_string(targets.size()) +
                         "x1 logits, got " + x.shape_str());
  }
  if (x.rows() == 0) throw ContractError("sigmoid_bce on an empty batch");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double v = x[i];
    acc += std::max(v, 0.0) - v * targets[i] + std::log1p(std::exp(-std::abs(v)));
  }
  return push(OpKind::SigmoidBce, logits.id, 0, 0.0,
              Tensor::scalar(acc / static_cast<double>(x.rows())),
              std::vector<double>(targets.begin(), targets.end()));
}

Var Graph::l1_loss(Var pred, Var target) {
  const Tensor& p = value(pred);
  const Tensor& t = value(target);
  require_same_shape(p, t, "l1_loss");
  if (p.empty()) throw ContractError("l1_loss on an empty batch");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - t[i]);
  return push(OpKind::L1Loss, pred.id, target.id, 0.0,
              Tensor::scalar(acc / static_cast<double>(p.size())));
}

Gradients Graph::backward(Var loss) const {
  const Tensor& lv = value(loss);
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " + lv.shape_str());
  }
  std::vector<Tensor> grads;
  grads.reserve(nodes_.size());
  for (const Node& n : nodes_) grads.emplace_back(n.value.rows(), n.value.cols());
  std::vector<char> touched(nodes_.size(), 0);
  grads[loss.id][0] = 1.0;
  touched[loss.id] = 1;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    if (!touched[i]) continue;
    backprop_node(nodes_[i], grads[i], grads, touched);
  }
  return Gradients(std::move(grads));
}

void Graph::backprop_node(const Node& n, const Tensor& g, std::vector<Tensor>& grads,
                          std::vector<char>& touched) const {
  auto accumulate = [&](std::size_t target, const Tensor& contribution) {
    add_into(grads[target], contribution);
    touched[target] = 1;
  };
  switch (n.op) {
    case OpKind::Constant:
    case OpKind::Parameter:
      return;
    case OpKind::MatMul: {
      const Tensor& a = nodes_[n.a].value;
      const Tensor& b = nodes_[n.b].value;
      accumulate(n.a, matmul_bt(g, b));
      accumulate(n.b, matmul_at(a, g));
      return;
    }
    case OpKind::Add:
      accumulate(n.a, g);
      accumulate(n.b, g);
      return;
    case OpKind::AddRow: {
      accumulate(n.a, g);
      Tensor col(1, g.cols());
      for (std::size_t i = 0; i < g.rows(); ++i) {
        for (std::size_t j = 0; j < g.cols(); ++j) col[j] += g(i, j);
      }
      accumulate(n.b, col);
      return;
    }
    case OpKind::Sub: {
      accumulate(n.a, g);
      Tensor neg = g;
      for (double& v : neg.data()) v = -v;
      accumulate(n.b, neg);
      return;
    }
    case OpKind::Mul: {
      const Tensor& a = nodes_[n.a].value;
      const Tensor& b = nodes_[n.b].value;
      Tensor da = g;
      Tensor db = g;
      for (std::size_t i = 0; i < g.size(); ++i) {
        da[i] *= b[i];
        db[i] *= a[i];
      }
      accumulate(n.a, da);
      accumulate(n.b, db);
      return;
    }
    case OpKind::Scale: {
      Tensor d = g;
      for (double& v : d.data()) v *= n.param;
      accumulate(n.a, d);
      return;
    }
    case OpKind::Relu: {
      const Tensor& a = nodes_[n.a].value;
      Tensor d = g;
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = a[i] > 0.0 ? d[i] : 0.0;
      accumulate(n.a, d);
      return;
    }
    case OpKind::Tanh: {
      Tensor d = g;
      for (std::size_t i = 0; i < d.size(); ++i) d[i] *= 1.0 - n.value[i] * n.value[i];
      accumulate(n.a, d);
      return;
    }
    case OpKind::Sigmoid: {
      Tensor d = g;
      for (std::size_t i = 0; i < d.size(); ++i) d[i] *= n.value[i] * (1.0 - n.value[i]);
      accumulate(n.a, d);
      return;
    }
    case OpKind::Softmax: {
      Tensor d(g.rows(), g.cols());
      for (std::size_t r = 0; r < g.rows(); ++r) {
        auto y = n.value.row(r);
        auto gr = g.row(r);
        double dot = 0.0;
        for (std::size_t c = 0; c < y.size(); ++c) dot += gr[c] * y[c];
        for (std::size_t c = 0; c < y.size(); ++c) d(r, c) = y[c] * (gr[c] - dot);
      }
      accumulate(n.a, d);
      return;
    }
    case OpKind::ConcatCols: {
      const std::size_t ca = nodes_[n.a].value.cols();
      const std::size_t cb = nodes_[n.b].value.cols();
      Tensor da(g.rows(), ca);
      Tensor db(g.rows(), cb);
      for (std::size_t i = 0; i < g.rows(); ++i) {
        auto r = g.row(i);
        std::copy(r.begin(), r.begin() + static_cast<long>(ca), da.row(i).begin());
        std::copy(r.begin() + static_cast<long>(ca), r.end(), db.row(i).begin());
      }
      accumulate(n.a, da);
      accumulate(n.b, db);
      return;
    }
    case OpKind::ConcatRows: {
      const Tensor& a = nodes_[n.a].value;
      const Tensor& b = nodes_[n.b].value;
      const auto split = static_cast<long>(a.size());
      accumulate(n.a, Tensor(a.rows(), a.cols(),
                             std::vector<double>(g.data().begin(), g.data().begin() + split)));
      accumulate(n.b, Tensor(b.rows(), b.cols(),
                             std::vector<double>(g.data().begin() + split, g.data().end())));
      return;
    }
    case OpKind::Transpose: {
      Tensor d(g.cols(), g.rows());
      for (std::size_t i = 0; i < g.rows(); ++i) {
        for (std::size_t j = 0; j < g.cols(); ++j) d(j, i) = g(i, j);
      }
      accumulate(n.a, d);
      return;
    }
    case OpKind::NormalizeRows: {
      const Tensor& a = nodes_[n.a].value;
      Tensor d(a.rows(), a.cols());
      for (std::size_t i = 0; i < a.rows(); ++i) {
        auto x = a.row(i);
        auto gr = g.row(i);
        double sq = 0.0;
        double dot = 0.0;
        for (std::size_t c = 0; c < x.size(); ++c) {
          sq += x[c] * x[c];
          dot += gr[c] * x[c];
        }
        const double norm = std::sqrt(sq);
        const double s = norm + n.param;
        const double k = norm > 0.0 ? dot / (s * s * norm) : 0.0;
        for (std::size_t c = 0; c < x.size(); ++c) d(i, c) = gr[c] / s - k * x[c];
      }
      accumulate(n.a, d);
      return;
    }
    case OpKind::Sum: {
      const Tensor& a = nodes_[n.a].value;
      accumulate(n.a, Tensor(a.rows(), a.cols(), g[0]));
      return;
    }
    case OpKind::Mean: {
      const Tensor& a = nodes_[n.a].value;
      accumulate(n.a, Tensor(a.rows(), a.cols(), g[0] / static_cast<double>(a.size())));
      return;
    }
    case OpKind::RowSum: {
      const Tensor& a = nodes_[n.a].value;
      Tensor d(a.rows(), a.cols());
      for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) d(i, j) = g[i];
      }
      accumulate(n.a, d);
      return;
    }
    case OpKind::GradReverse: {
      Tensor d = g;
      for (double& v : d.data()) v *= -n.param;
      accumulate(n.a, d);
      return;
    }
    case OpKind::SoftmaxCrossEntropy: {
      const Tensor& x = nodes_[n.a].value;
      Tensor d = softmax_rows(x);
      const double k = g[0] / static_cast<double>(x.rows());
      for (std::size_t i = 0; i < x.rows(); ++i) {
        d(i, static_cast<std::size_t>(n.aux[i])) -= 1.0;
        for (double& v : d.row(i)) v *= k;
      }
      accumulate(n.a, d);
      return;
    }
    case OpKind::SigmoidBce: {
      const Tensor& x = nodes_[n.a].value;
      Tensor d(x.rows(), 1);
      const double k = g[0] / static_cast<double>(x.rows());
      for (std::size_t i = 0; i < x.rows(); ++i) d[i] = k * (stable_sigmoid(x[i]) - n.aux[i]);
      accumulate(n.a, d);
      return;
    }
    case OpKind::L1Loss: {
      const Tensor& p = nodes_[n.a].value;
      const Tensor& t = nodes_[n.b].value;
      Tensor dp(p.rows(), p.cols());
      const double k = g[0] / static_cast<double>(p.size());
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double r = p[i] - t[i];
        dp[i] = r > 0.0 ? k : (r < 0.0 ? -k : 0.0);
      }
      Tensor dt = dp;
      for (double& v : dt.data()) v = -v;
      accumulate(n.a, dp);
      accumulate(n.b, dt);
      return;
    }
  }
}

const Tensor& Gradients::operator[](Var v) const {
  if (v.id >= grads_.size()) {
    throw IndexError("no gradient for node " + std::to_string(v.id));
  }
  return grads_[v.id];
}

}  // namespace lirr
