#pragma once

#include <atomic>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "dapamt/array.hpp"

namespace dapamt {

/// Primitive operations the reverse-mode tape understands.
enum class Prim {
  leaf,
  matmul,
  add,
  elementwise_multiply,
  concat,
  sigmoid,
  tanh,
  prelu,
  softmax,
  dot,
  scale,
  sum_of_squares,
};

inline const char* prim_name(Prim p) {
  switch (p) {
    case Prim::leaf: return "leaf";
    case Prim::matmul: return "matmul";
    case Prim::add: return "add";
    case Prim::elementwise_multiply: return "elementwise_multiply";
    case Prim::concat: return "concat";
    case Prim::sigmoid: return "sigmoid";
    case Prim::tanh: return "tanh";
    case Prim::prelu: return "prelu";
    case Prim::softmax: return "softmax";
    case Prim::dot: return "dot";
    case Prim::scale: return "scale";
    case Prim::sum_of_squares: return "sum_of_squares";
  }
  return "?";
}

/// Primitive-specific constants.
struct Attrs {
  double factor = 1.0;    // scale: multiplier
  bool transpose = false; // matmul: use A^T
  int rows = 0;           // concat: >0 stacks equal-length inputs as matrix rows
};

/// Handle to a node on a specific tape. The tag catches accidental mixing
/// of nodes from different tapes.
struct Var {
  int id = -1;
  unsigned tape_tag = 0;
};

struct Node {
  Array value;
  Array grad;  // same shape as value, zero until backward touches it
  Prim prim = Prim::leaf;
  std::vector<int> parents;
  Attrs attrs;
  std::string name;  // nonempty for named leaves (parameters)
};

enum class Mode { train, eval };

/// Eager reverse-mode tape. Nodes are appended in evaluation order, so a
/// reverse index sweep is a valid reverse-topological order for backward.
/// Values are immutable once created; backward only writes gradients.
class Tape {
 public:
  Tape() : tag_(next_tag()++) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Array value, std::string name = {}) {
    Node n;
    n.grad = Array::zeros(value.shape);
    n.value = std::move(value);
    n.name = std::move(name);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1, tag_};
  }

  Var constant(Array value) { return leaf(std::move(value)); }

  /// Applies one primitive, eagerly evaluating the result and recording
  /// parents for backward.
  Var apply(Prim op, const std::vector<Var>& inputs, const Attrs& attrs = {}) {
    Node n;
    n.prim = op;
    n.attrs = attrs;
    n.parents.reserve(inputs.size());
    for (const Var& v : inputs) n.parents.push_back(check(v));
    n.value = eval(op, n.parents, attrs);
    n.grad = Array::zeros(n.value.shape);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1, tag_};
  }

  Var matmul(Var m, Var v, bool transpose = false) {
    Attrs a;
    a.transpose = transpose;
    return apply(Prim::matmul, {m, v}, a);
  }
  Var add(Var a, Var b) { return apply(Prim::add, {a, b}); }
  Var mul(Var a, Var b) { return apply(Prim::elementwise_multiply, {a, b}); }
  Var concat(const std::vector<Var>& parts, int rows = 0) {
    Attrs a;
    a.rows = rows;
    return apply(Prim::concat, parts, a);
  }
  Var sigmoid(Var x) { return apply(Prim::sigmoid, {x}); }
  Var tanh(Var x) { return apply(Prim::tanh, {x}); }
  Var prelu(Var x, Var slope) { return apply(Prim::prelu, {x, slope}); }
  Var softmax(Var x) { return apply(Prim::softmax, {x}); }
  Var dot(Var a, Var b) { return apply(Prim::dot, {a, b}); }
  Var scale(Var x, double factor) {
    Attrs a;
    a.factor = factor;
    return apply(Prim::scale, {x}, a);
  }
  Var sum_of_squares(Var x) { return apply(Prim::sum_of_squares, {x}); }
  Var sub(Var a, Var b) { return add(a, scale(b, -1.0)); }

  /// Inverted dropout: train mode zeroes entries with probability `rate` and
  /// rescales survivors by 1/(1-rate); eval mode is the identity.
  Var dropout(Var x, double rate, Mode mode, std::mt19937_64& rng) {
    if (rate < 0.0 || rate >= 1.0)
      throw std::invalid_argument("dropout: rate must be in [0, 1)");
    if (mode == Mode::eval || rate == 0.0) return x;
    const Array& v = value(x);
    Array mask = Array::zeros(v.shape);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double keep_scale = 1.0 / (1.0 - rate);
    for (double& m : mask.data) m = (u(rng) >= rate) ? keep_scale : 0.0;
    return mul(x, constant(std::move(mask)));
  }

  /// Reverse sweep from a scalar root. Gradients accumulate (+=) into every
  /// reachable node; returns the gradient table for all reachable leaves,
  /// keyed by node id. Call zero_gradients() between independent passes.
  std::map<int, Array> backward(Var root) {
    int r = check(root);
    if (nodes_[r].value.numel() != 1)
      throw std::invalid_argument("backward: root is not scalar-valued");
    // reachability over parent edges
    std::vector<char> reach(nodes_.size(), 0);
    std::vector<int> stack{r};
    reach[r] = 1;
    while (!stack.empty()) {
      int id = stack.back();
      stack.pop_back();
      for (int p : nodes_[id].parents)
        if (!reach[p]) {
          reach[p] = 1;
          stack.push_back(p);
        }
    }
    nodes_[r].grad.data[0] += 1.0;
    for (int id = r; id >= 0; --id) {
      if (!reach[id] || nodes_[id].prim == Prim::leaf) continue;
      backprop(nodes_[id]);
    }
    std::map<int, Array> table;
    for (int id = 0; id <= r; ++id)
      if (reach[id] && nodes_[id].prim == Prim::leaf)
        table.emplace(id, nodes_[id].grad);
    return table;
  }

  /// Gradients of named leaves, summed per name.
  std::map<std::string, Array> named_gradients(const std::map<int, Array>& table) const {
    std::map<std::string, Array> out;
    for (const auto& [id, g] : table) {
      const std::string& name = nodes_[id].name;
      if (name.empty()) continue;
      auto it = out.find(name);
      if (it == out.end()) {
        out.emplace(name, g);
      } else {
        for (std::size_t i = 0; i < g.data.size(); ++i) it->second.data[i] += g.data[i];
      }
    }
    return out;
  }

  void zero_gradients() {
    for (Node& n : nodes_)
      std::fill(n.grad.data.begin(), n.grad.data.end(), 0.0);
  }

  const Array& value(Var v) const { return nodes_[check(v)].value; }
  const Array& gradient(Var v) const { return nodes_[check(v)].grad; }
  std::size_t size() const { return nodes_.size(); }

 private:
  static std::atomic<unsigned>& next_tag() {
    static std::atomic<unsigned> tag{1};
    return tag;
  }

  int check(Var v) const {
    if (v.tape_tag != tag_ || v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
      throw std::invalid_argument("autograd: node does not belong to this graph");
    return v.id;
  }

  const Array& val(int id) const { return nodes_[id].value; }

  Array eval(Prim op, const std::vector<int>& ps, const Attrs& attrs) {
    switch (op) {
      case Prim::matmul: {
        const Array& m = val(ps[0]);
        const Array& x = val(ps[1]);
        if (m.rank() != 2 || x.rank() != 1)
          throw ShapeError("matmul", m.shape, x.shape);
        int R = m.rows(), C = m.cols();
        if (!attrs.transpose) {
          if (C != x.rows()) throw ShapeError("matmul", m.shape, x.shape);
          Array out = Array::zeros({R});
          for (int r = 0; r < R; ++r) {
            double s = 0.0;
            const double* row = &m.data[static_cast<std::size_t>(r) * C];
            for (int c = 0; c < C; ++c) s += row[c] * x.data[c];
            out.data[r] = s;
          }
          return out;
        }
        if (R != x.rows()) throw ShapeError("matmul", m.shape, x.shape);
        Array out = Array::zeros({C});
        for (int r = 0; r < R; ++r) {
          const double xr = x.data[r];
          const double* row = &m.data[static_cast<std::size_t>(r) * C];
          for (int c = 0; c < C; ++c) out.data[c] += row[c] * xr;
        }
        return out;
      }
      case Prim::add: {
        const Array& a = val(ps[0]);
        const Array& b = val(ps[1]);
        if (!a.same_shape(b)) throw ShapeError("add", a.shape, b.shape);
        Array out = a;
        for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
        return out;
      }
      case Prim::elementwise_multiply: {
        const Array& a = val(ps[0]);
        const Array& b = val(ps[1]);
        if (!a.same_shape(b))
          throw ShapeError("elementwise_multiply", a.shape, b.shape);
        Array out = a;
        for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b.data[i];
        return out;
      }
      case Prim::concat: {
        if (ps.empty()) throw std::invalid_argument("concat: no inputs");
        long total = 0;
        for (int p : ps) {
          if (val(p).rank() != 1)
            throw ShapeError("concat", val(ps[0]).shape, val(p).shape);
          total += val(p).numel();
        }
        std::vector<double> d;
        d.reserve(static_cast<std::size_t>(total));
        for (int p : ps)
          d.insert(d.end(), val(p).data.begin(), val(p).data.end());
        if (attrs.rows > 0) {
          int k = attrs.rows;
          if (k != static_cast<int>(ps.size()) || total % k != 0)
            throw std::invalid_argument("concat: bad row count");
          int len = static_cast<int>(total / k);
          for (int p : ps)
            if (val(p).numel() != len)
              throw ShapeError("concat", val(ps[0]).shape, val(p).shape);
          return Array::matrix(k, len, std::move(d));
        }
        return Array::vec(std::move(d));
      }
      case Prim::sigmoid: {
        Array out = val(ps[0]);
        for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
        return out;
      }
      case Prim::tanh: {
        Array out = val(ps[0]);
        for (double& v : out.data) v = std::tanh(v);
        return out;
      }
      case Prim::prelu: {
        const Array& x = val(ps[0]);
        const Array& a = val(ps[1]);
        if (a.numel() != 1) throw ShapeError("prelu", x.shape, a.shape);
        const double slope = a.data[0];
        Array out = x;
        for (double& v : out.data) v = v > 0.0 ? v : slope * v;
        return out;
      }
      case Prim::softmax: {
        const Array& x = val(ps[0]);
        if (x.rank() != 1) throw ShapeError("softmax", x.shape, x.shape);
        Array out = x;
        double mx = out.data[0];
        for (double v : out.data) mx = std::max(mx, v);
        double sum = 0.0;
        for (double& v : out.data) {
          v = std::exp(v - mx);
          sum += v;
        }
        for (double& v : out.data) v /= sum;
        return out;
      }
      case Prim::dot: {
        const Array& a = val(ps[0]);
        const Array& b = val(ps[1]);
        if (a.rank() != 1 || !a.same_shape(b)) throw ShapeError("dot", a.shape, b.shape);
        double s = 0.0;
        for (std::size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
        return Array::scalar(s);
      }
      case Prim::scale: {
        Array out = val(ps[0]);
        for (double& v : out.data) v *= attrs.factor;
        return out;
      }
      case Prim::sum_of_squares: {
        const Array& x = val(ps[0]);
        double s = 0.0;
        for (double v : x.data) s += v * v;
        return Array::scalar(s);
      }
      case Prim::leaf:
        break;
    }
    throw std::invalid_argument("apply: unknown primitive");
  }

  void backprop(Node& n) {
    const Array& g = n.grad;
    switch (n.prim) {
      case Prim::matmul: {
        Node& m = nodes_[n.parents[0]];
        Node& x = nodes_[n.parents[1]];
        int R = m.value.rows(), C = m.value.cols();
        if (!n.attrs.transpose) {
          // out[r] = sum_c m[r,c] x[c]
          for (int r = 0; r < R; ++r) {
            const double gr = g.data[r];
            double* mg = &m.grad.data[static_cast<std::size_t>(r) * C];
            const double* mv = &m.value.data[static_cast<std::size_t>(r) * C];
            for (int c = 0; c < C; ++c) {
              mg[c] += gr * x.value.data[c];
              x.grad.data[c] += gr * mv[c];
            }
          }
        } else {
          // out[c] = sum_r m[r,c] x[r]
          for (int r = 0; r < R; ++r) {
            const double xr = x.value.data[r];
            double* mg = &m.grad.data[static_cast<std::size_t>(r) * C];
            const double* mv = &m.value.data[static_cast<std::size_t>(r) * C];
            double acc = 0.0;
            for (int c = 0; c < C; ++c) {
              mg[c] += g.data[c] * xr;
              acc += g.data[c] * mv[c];
            }
            x.grad.data[r] += acc;
          }
        }
        break;
      }
      case Prim::add:
        for (int side = 0; side < 2; ++side) {
          Node& p = nodes_[n.parents[side]];
          for (std::size_t i = 0; i < g.data.size(); ++i) p.grad.data[i] += g.data[i];
        }
        break;
      case Prim::elementwise_multiply: {
        Node& a = nodes_[n.parents[0]];
        Node& b = nodes_[n.parents[1]];
        for (std::size_t i = 0; i < g.data.size(); ++i) {
          a.grad.data[i] += g.data[i] * b.value.data[i];
          b.grad.data[i] += g.data[i] * a.value.data[i];
        }
        break;
      }
      case Prim::concat: {
        std::size_t off = 0;
        for (int pid : n.parents) {
          Node& p = nodes_[pid];
          for (std::size_t i = 0; i < p.value.data.size(); ++i)
            p.grad.data[i] += g.data[off + i];
          off += p.value.data.size();
        }
        break;
      }
      case Prim::sigmoid: {
        Node& p = nodes_[n.parents[0]];
        for (std::size_t i = 0; i < g.data.size(); ++i) {
          const double y = n.value.data[i];
          p.grad.data[i] += g.data[i] * y * (1.0 - y);
        }
        break;
      }
      case Prim::tanh: {
        Node& p = nodes_[n.parents[0]];
        for (std::size_t i = 0; i < g.data.size(); ++i) {
          const double y = n.value.data[i];
          p.grad.data[i] += g.data[i] * (1.0 - y * y);
        }
        break;
      }
      case Prim::prelu: {
        Node& x = nodes_[n.parents[0]];
        Node& a = nodes_[n.parents[1]];
        const double slope = a.value.data[0];
        double da = 0.0;
        for (std::size_t i = 0; i < g.data.size(); ++i) {
          const double xv = x.value.data[i];
          x.grad.data[i] += g.data[i] * (xv > 0.0 ? 1.0 : slope);
          if (xv <= 0.0) da += g.data[i] * xv;
        }
        a.grad.data[0] += da;
        break;
      }
      case Prim::softmax: {
        Node& p = nodes_[n.parents[0]];
        double s = 0.0;
        for (std::size_t i = 0; i < g.data.size(); ++i) s += g.data[i] * n.value.data[i];
        for (std::size_t i = 0; i < g.data.size(); ++i)
          p.grad.data[i] += n.value.data[i] * (g.data[i] - s);
        break;
      }
      case Prim::dot: {
        Node& a = nodes_[n.parents[0]];
        Node& b = nodes_[n.parents[1]];
        const double g0 = g.data[0];
        for (std::size_t i = 0; i < a.value.data.size(); ++i) {
          a.grad.data[i] += g0 * b.value.data[i];
          b.grad.data[i] += g0 * a.value.data[i];
        }
        break;
      }
      case Prim::scale: {
        Node& p = nodes_[n.parents[0]];
        for (std::size_t i = 0; i < g.data.size(); ++i)
          p.grad.data[i] += n.attrs.factor * g.data[i];
        break;
      }
      case Prim::sum_of_squares: {
        Node& p = nodes_[n.parents[0]];
        const double g0 = g.data[0];
        for (std::size_t i = 0; i < p.value.data.size(); ++i)
          p.grad.data[i] += 2.0 * g0 * p.value.data[i];
        break;
      }
      case Prim::leaf:
        break;
    }
  }

  unsigned tag_;
  std::vector<Node> nodes_;
};

}  // namespace dapamt
