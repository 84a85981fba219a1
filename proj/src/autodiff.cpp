#include "atten/autodiff.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <utility>

namespace atten {

namespace {

kern::Shape to_shape(const Dims& dims) {
  if (dims.size() > kern::kMaxRank) {
    throw Error("tensor rank " + std::to_string(dims.size()) + " exceeds supported " +
                std::to_string(kern::kMaxRank));
  }
  kern::Shape s;
  s.rank = dims.size();
  for (std::size_t i = 0; i < dims.size(); ++i) s.dims[i] = dims[i];
  return s;
}

Dims broadcast_dims(const char* op, const Dims& a, const Dims& b) {
  if (a.size() != b.size()) {
    throw Error(std::string(op) + ": rank mismatch " + dims_to_string(a) + " vs " +
                dims_to_string(b));
  }
  Dims out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == b[i]) {
      out[i] = a[i];
    } else if (a[i] == 1 || b[i] == 1) {
      out[i] = std::max(a[i], b[i]);
    } else {
      throw Error(std::string(op) + ": shapes not broadcastable " + dims_to_string(a) +
                  " vs " + dims_to_string(b));
    }
  }
  return out;
}

}  // namespace

NodeId Graph::emplace(Tensor value, const char* op, std::vector<NodeId> parents) {
  value.require_finite(op);
  Node n;
  n.value = std::move(value);
  n.op = op;
  n.parents = std::move(parents);
  for (const NodeId p : n.parents) {
    n.requires_grad = n.requires_grad || nodes_[p].requires_grad;
  }
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

void Graph::set_backprop(NodeId id, std::function<void(Graph&)> fn) {
  if (nodes_[id].requires_grad) nodes_[id].backprop = std::move(fn);
}

NodeId Graph::input(Tensor value, bool requires_grad) {
  value.require_finite("input");
  Node n;
  n.value = std::move(value);
  n.op = "input";
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::constant(Tensor value) { return input(std::move(value), false); }

Tensor& Graph::grad_buf(NodeId id) {
  Node& n = nodes_[id];
  if (!n.grad_live) {
    n.grad = Tensor(n.value.dims(), 0.0);
    n.grad_live = true;
  }
  return n.grad;
}

const Tensor& Graph::grad(NodeId id) {
  return grad_buf(id);  // zeros when nothing was deposited
}

void Graph::accumulate_grad(NodeId id, const Tensor& contribution, double factor) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  Tensor& buf = grad_buf(id);
  kern::reduce_to(to_shape(contribution.dims()), to_shape(buf.dims()), factor,
                  contribution.data(), buf.data());
}

void Graph::backward(NodeId root) {
  if (root >= nodes_.size()) throw Error("backward: bad root node");
  if (nodes_[root].value.size() != 1) {
    throw Error("backward: root must be scalar, got dims " +
                dims_to_string(nodes_[root].value.dims()));
  }
  Tensor seed(nodes_[root].value.dims(), 1.0);
  nodes_[root].grad = std::move(seed);
  nodes_[root].grad_live = true;
  for (NodeId id = root + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.grad_live && n.backprop) n.backprop(*this);
  }
}

NodeId Graph::binary_ew(kern::Binary op, const char* name, NodeId a, NodeId b) {
  const Tensor& av = nodes_[a].value;
  const Tensor& bv = nodes_[b].value;
  Dims out_dims = broadcast_dims(name, av.dims(), bv.dims());
  if (op == kern::Binary::Div) {
    for (const double v : bv.vec()) {
      if (v == 0.0) throw Error("div: division by zero");
    }
  }
  Tensor out(out_dims);
  const kern::Shape os = to_shape(out_dims), as = to_shape(av.dims()), bs = to_shape(bv.dims());
  kern::binary_bcast(op, os, as, bs, av.data(), bv.data(), out.data());

  NodeId self = emplace(std::move(out), name, {a, b});
  set_backprop(self, [op, a, b, self](Graph& g) {
    const Tensor& gy = g.nodes_[self].grad;
    const Tensor& av2 = g.nodes_[a].value;
    const Tensor& bv2 = g.nodes_[b].value;
    const Tensor& y = g.nodes_[self].value;
    const kern::Shape os2 = to_shape(y.dims());
    switch (op) {
      case kern::Binary::Add:
        g.accumulate_grad(a, gy, 1.0);
        g.accumulate_grad(b, gy, 1.0);
        break;
      case kern::Binary::Sub:
        g.accumulate_grad(a, gy, 1.0);
        g.accumulate_grad(b, gy, -1.0);
        break;
      case kern::Binary::Mul: {
        if (g.nodes_[a].requires_grad) {
          Tensor tmp(y.dims());
          kern::binary_bcast(kern::Binary::Mul, os2, os2, to_shape(bv2.dims()), gy.data(),
                             bv2.data(), tmp.data());
          g.accumulate_grad(a, tmp, 1.0);
        }
        if (g.nodes_[b].requires_grad) {
          Tensor tmp(y.dims());
          kern::binary_bcast(kern::Binary::Mul, os2, os2, to_shape(av2.dims()), gy.data(),
                             av2.data(), tmp.data());
          g.accumulate_grad(b, tmp, 1.0);
        }
        break;
      }
      case kern::Binary::Div: {
        if (g.nodes_[a].requires_grad) {
          Tensor tmp(y.dims());
          kern::binary_bcast(kern::Binary::Div, os2, os2, to_shape(bv2.dims()), gy.data(),
                             bv2.data(), tmp.data());
          g.accumulate_grad(a, tmp, 1.0);
        }
        if (g.nodes_[b].requires_grad) {
          Tensor tmp(y.dims());
          kern::binary_bcast(kern::Binary::Mul, os2, os2, os2, gy.data(), y.data(),
                             tmp.data());
          Tensor tmp2(y.dims());
          kern::binary_bcast(kern::Binary::Div, os2, os2, to_shape(bv2.dims()), tmp.data(),
                             bv2.data(), tmp2.data());
          g.accumulate_grad(b, tmp2, -1.0);
        }
        break;
      }
    }
  });
  return self;
}

NodeId Graph::unary_ew(kern::Unary op, const char* name, NodeId a) {
  const Tensor& av = nodes_[a].value;
  if (op == kern::Unary::Log) {
    for (const double v : av.vec()) {
      if (v <= 0.0) throw Error("log: non-positive input");
    }
  }
  Tensor out(av.dims());
  kern::unary_ew(op, av.data(), out.data(), av.size());

  NodeId self = emplace(std::move(out), name, {a});
  set_backprop(self, [op, a, self](Graph& g) {
    if (!g.nodes_[a].requires_grad) return;
    const Tensor& gy = g.nodes_[self].grad;
    const Tensor& x = g.nodes_[a].value;
    const Tensor& y = g.nodes_[self].value;
    Tensor& buf = g.grad_buf(a);
    kern::unary_ew_backward(op, x.data(), y.data(), gy.data(), buf.data(), x.size());
  });
  return self;
}

NodeId Graph::add(NodeId a, NodeId b) { return binary_ew(kern::Binary::Add, "add", a, b); }
NodeId Graph::sub(NodeId a, NodeId b) { return binary_ew(kern::Binary::Sub, "sub", a, b); }
NodeId Graph::mul(NodeId a, NodeId b) { return binary_ew(kern::Binary::Mul, "mul", a, b); }
NodeId Graph::div(NodeId a, NodeId b) { return binary_ew(kern::Binary::Div, "div", a, b); }
NodeId Graph::neg(NodeId a) { return unary_ew(kern::Unary::Neg, "neg", a); }
NodeId Graph::exp(NodeId a) { return unary_ew(kern::Unary::Exp, "exp", a); }
NodeId Graph::log(NodeId a) { return unary_ew(kern::Unary::Log, "log", a); }
NodeId Graph::relu(NodeId a) { return unary_ew(kern::Unary::Relu, "relu", a); }
NodeId Graph::sigmoid(NodeId a) { return unary_ew(kern::Unary::Sigmoid, "sigmoid", a); }

NodeId Graph::scale(NodeId a, double c) {
  const Tensor& av = nodes_[a].value;
  Tensor out(av.dims());
  kern::scale(av.data(), c, out.data(), av.size());
  NodeId self = emplace(std::move(out), "scale", {a});
  set_backprop(self, [a, c, self](Graph& g) {
    if (!g.nodes_[a].requires_grad) return;
    const Tensor& gy = g.nodes_[self].grad;
    Tensor& buf = g.grad_buf(a);
    kern::axpy(c, gy.data(), buf.data(), gy.size());
  });
  return self;
}

NodeId Graph::clamp_min(NodeId a, double floor_v) {
  const Tensor& av = nodes_[a].value;
  Tensor out(av.dims());
  kern::clamp_min(av.data(), floor_v, out.data(), av.size());
  NodeId self = emplace(std::move(out), "clamp_min", {a});
  set_backprop(self, [a, floor_v, self](Graph& g) {
    if (!g.nodes_[a].requires_grad) return;
    const Tensor& gy = g.nodes_[self].grad;
    const Tensor& x = g.nodes_[a].value;
    Tensor& buf = g.grad_buf(a);
    kern::clamp_min_backward(x.data(), floor_v, gy.data(), buf.data(), x.size());
  });
  return self;
}

NodeId Graph::matmul(NodeId a, NodeId b) {
  const Tensor& av = nodes_[a].value;
  const Tensor& bv = nodes_[b].value;
  if (av.rank() != 2 || bv.rank() != 2) {
    throw Error("matmul: operands must be rank 2, got " + dims_to_string(av.dims()) +
                " and " + dims_to_string(bv.dims()));
  }
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  if (bv.dim(0) != k) {
    throw Error("matmul: inner dims disagree, " + dims_to_string(av.dims()) + " x " +
                dims_to_string(bv.dims()));
  }
  Tensor out(Dims{m, n});
  kern::matmul(av.data(), bv.data(), out.data(), m, k, n);
  NodeId self = emplace(std::move(out), "matmul", {a, b});
  set_backprop(self, [a, b, self, m, k, n](Graph& g) {
    const Tensor& gy = g.nodes_[self].grad;
    if (g.nodes_[a].requires_grad) {
      kern::matmul_acc_nt(gy.data(), g.nodes_[b].value.data(), g.grad_buf(a).data(), m, k, n);
    }
    if (g.nodes_[b].requires_grad) {
      kern::matmul_acc_tn(g.nodes_[a].value.data(), gy.data(), g.grad_buf(b).data(), m, k, n);
    }
  });
  return self;
}

NodeId Graph::conv2d(NodeId x, NodeId kernel, std::size_t padding) {
  const Tensor& xv = nodes_[x].value;
  const Tensor& kv = nodes_[kernel].value;
  if (xv.rank() != 3 || kv.rank() != 4) {
    throw Error("conv2d: want input [C,H,W] and kernel [Cout,Cin,kh,kw], got " +
                dims_to_string(xv.dims()) + " and " + dims_to_string(kv.dims()));
  }
  const std::size_t cin = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
  const std::size_t cout = kv.dim(0), kh = kv.dim(2), kw = kv.dim(3);
  if (kv.dim(1) != cin) throw Error("conv2d: kernel Cin mismatch");
  if (kh % 2 == 0 || kw % 2 == 0) throw Error("conv2d: kernel dims must be odd");
  if (h + 2 * padding < kh || w + 2 * padding < kw) {
    throw Error("conv2d: kernel larger than padded input");
  }
  const std::size_t oh = h + 2 * padding - kh + 1;
  const std::size_t ow = w + 2 * padding - kw + 1;
  Tensor out(Dims{cout, oh, ow});
  kern::conv2d(xv.data(), kv.data(), out.data(), cin, h, w, cout, kh, kw, padding);
  NodeId self = emplace(std::move(out), "conv2d", {x, kernel});
  set_backprop(self, [x, kernel, self, cin, h, w, cout, kh, kw, padding](Graph& g) {
    const Tensor& gy = g.nodes_[self].grad;
    if (g.nodes_[x].requires_grad) {
      kern::conv2d_backward_input(gy.data(), g.nodes_[kernel].value.data(),
                                  g.grad_buf(x).data(), cin, h, w, cout, kh, kw, padding);
    }
    if (g.nodes_[kernel].requires_grad) {
      kern::conv2d_backward_kernel(gy.data(), g.nodes_[x].value.data(),
                                   g.grad_buf(kernel).data(), cin, h, w, cout, kh, kw,
                                   padding);
    }
  });
  return self;
}

NodeId Graph::pool2d(NodeId x, std::size_t window, PoolMode mode) {
  const Tensor& xv = nodes_[x].value;
  if (xv.rank() != 3) throw Error("pool2d: input must be [C,H,W]");
  const std::size_t c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
  if (window == 0 || h % window != 0 || w % window != 0) {
    throw Error("pool2d: window " + std::to_string(window) + " must divide " +
                dims_to_string(xv.dims()));
  }
  const std::size_t oh = h / window, ow = w / window;
  Tensor out(Dims{c, oh, ow});
  if (mode == PoolMode::Max) {
    std::vector<std::size_t> argmax(c * oh * ow);
    kern::pool2d_max(xv.data(), out.data(), argmax.data(), c, h, w, window);
    NodeId self = emplace(std::move(out), "maxpool", {x});
    set_backprop(self, [x, self, am = std::move(argmax)](Graph& g) {
      if (!g.nodes_[x].requires_grad) return;
      const Tensor& gy = g.nodes_[self].grad;
      kern::pool2d_max_backward(gy.data(), am.data(), g.grad_buf(x).data(), gy.size());
    });
    return self;
  }
  kern::pool2d_avg(xv.data(), out.data(), c, h, w, window);
  NodeId self = emplace(std::move(out), "avgpool", {x});
  set_backprop(self, [x, self, c, h, w, window](Graph& g) {
    if (!g.nodes_[x].requires_grad) return;
    const Tensor& gy = g.nodes_[self].grad;
    kern::pool2d_avg_backward(gy.data(), g.grad_buf(x).data(), c, h, w, window);
  });
  return self;
}

NodeId Graph::reduce(NodeId x, std::vector<std::size_t> axes, ReduceMode mode) {
  const Tensor& xv = nodes_[x].value;
  if (axes.empty()) throw Error("reduce: empty axis list");
  std::array<bool, kern::kMaxRank> flags{};
  for (const std::size_t ax : axes) {
    if (ax >= xv.rank()) throw Error("reduce: axis " + std::to_string(ax) + " out of range");
    if (flags[ax]) throw Error("reduce: duplicate axis " + std::to_string(ax));
    flags[ax] = true;
  }
  Dims out_dims;
  std::size_t red_total = 1;
  for (std::size_t i = 0; i < xv.rank(); ++i) {
    if (flags[i])
      red_total *= xv.dim(i);
    else
      out_dims.push_back(xv.dim(i));
  }
  const kern::Shape in_shape = to_shape(xv.dims());
  Tensor out(out_dims);

  const kern::Reduce kmode = mode == ReduceMode::Sum    ? kern::Reduce::Sum
                             : mode == ReduceMode::Mean ? kern::Reduce::Mean
                                                        : kern::Reduce::Max;
  if (mode == ReduceMode::Max) {
    std::vector<std::size_t> argmax(out.size());
    kern::reduce(kmode, in_shape, flags.data(), xv.data(), out.data(), argmax.data());
    NodeId self = emplace(std::move(out), "reduce_max", {x});
    set_backprop(self, [x, self, am = std::move(argmax)](Graph& g) {
      if (!g.nodes_[x].requires_grad) return;
      const Tensor& gy = g.nodes_[self].grad;
      kern::pool2d_max_backward(gy.data(), am.data(), g.grad_buf(x).data(), gy.size());
    });
    return self;
  }

  kern::reduce(kmode, in_shape, flags.data(), xv.data(), out.data(), nullptr);
  const double factor = mode == ReduceMode::Mean ? 1.0 / static_cast<double>(red_total) : 1.0;
  const char* name = mode == ReduceMode::Mean ? "reduce_mean" : "reduce_sum";
  NodeId self = emplace(std::move(out), name, {x});
  set_backprop(self, [x, self, in_shape, flags, factor](Graph& g) {
    if (!g.nodes_[x].requires_grad) return;
    const Tensor& gy = g.nodes_[self].grad;
    kern::reduce_backward_spread(in_shape, flags.data(), factor, gy.data(),
                                 g.grad_buf(x).data());
  });
  return self;
}

NodeId Graph::reduce_all(NodeId x, ReduceMode mode) {
  const Tensor& xv = nodes_[x].value;
  if (xv.rank() == 0) return reshape(x, {});
  std::vector<std::size_t> axes(xv.rank());
  for (std::size_t i = 0; i < axes.size(); ++i) axes[i] = i;
  return reduce(x, std::move(axes), mode);
}

NodeId Graph::reshape(NodeId x, Dims dims) {
  const Tensor& xv = nodes_[x].value;
  if (dims_product(dims) != xv.size()) {
    throw Error("reshape: size mismatch " + dims_to_string(xv.dims()) + " -> " +
                dims_to_string(dims));
  }
  Tensor out(std::move(dims), xv.vec());
  NodeId self = emplace(std::move(out), "reshape", {x});
  set_backprop(self, [x, self](Graph& g) {
    if (!g.nodes_[x].requires_grad) return;
    const Tensor& gy = g.nodes_[self].grad;
    kern::axpy(1.0, gy.data(), g.grad_buf(x).data(), gy.size());
  });
  return self;
}

NodeId Graph::concat0(std::span<const NodeId> parts) {
  if (parts.empty()) throw Error("concat0: no inputs");
  const Tensor& first = nodes_[parts[0]].value;
  if (first.rank() == 0) throw Error("concat0: scalars cannot be concatenated");
  Dims out_dims = first.dims();
  std::size_t total0 = 0;
  for (const NodeId p : parts) {
    const Dims& d = nodes_[p].value.dims();
    if (d.size() != out_dims.size()) throw Error("concat0: rank mismatch");
    for (std::size_t i = 1; i < d.size(); ++i) {
      if (d[i] != out_dims[i]) throw Error("concat0: trailing dims mismatch");
    }
    total0 += d[0];
  }
  out_dims[0] = total0;
  Tensor out(out_dims);
  std::size_t offset = 0;
  for (const NodeId p : parts) {
    const Tensor& v = nodes_[p].value;
    std::memcpy(out.data() + offset, v.data(), v.size() * sizeof(double));
    offset += v.size();
  }
  std::vector<NodeId> parents(parts.begin(), parts.end());
  NodeId self = emplace(std::move(out), "concat0", parents);
  set_backprop(self, [parents, self](Graph& g) {
    const Tensor& gy = g.nodes_[self].grad;
    std::size_t off = 0;
    for (const NodeId p : parents) {
      const std::size_t n = g.nodes_[p].value.size();
      if (g.nodes_[p].requires_grad) {
        kern::axpy(1.0, gy.data() + off, g.grad_buf(p).data(), n);
      }
      off += n;
    }
  });
  return self;
}

NodeId Graph::stack_rows(std::span<const NodeId> rows) {
  if (rows.empty()) throw Error("stack_rows: no inputs");
  const std::size_t d = nodes_[rows[0]].value.size();
  for (const NodeId r : rows) {
    const Tensor& v = nodes_[r].value;
    if (v.rank() != 1 || v.size() != d) {
      throw Error("stack_rows: rows must all be rank-1 of equal length");
    }
  }
  Tensor out(Dims{rows.size(), d});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::memcpy(out.data() + i * d, nodes_[rows[i]].value.data(), d * sizeof(double));
  }
  std::vector<NodeId> parents(rows.begin(), rows.end());
  NodeId self = emplace(std::move(out), "stack_rows", parents);
  set_backprop(self, [parents, self, d](Graph& g) {
    const Tensor& gy = g.nodes_[self].grad;
    for (std::size_t i = 0; i < parents.size(); ++i) {
      if (!g.nodes_[parents[i]].requires_grad) continue;
      kern::axpy(1.0, gy.data() + i * d, g.grad_buf(parents[i]).data(), d);
    }
  });
  return self;
}

NodeId Graph::select_rows(NodeId x, std::vector<std::size_t> rows) {
  const Tensor& xv = nodes_[x].value;
  if (xv.rank() < 1) throw Error("select_rows: input must have rank >= 1");
  if (rows.empty()) throw Error("select_rows: empty row list");
  const std::size_t b = xv.dim(0);
  const std::size_t row_size = xv.size() / b;
  for (const std::size_t r : rows) {
    if (r >= b) throw Error("select_rows: row index out of range");
  }
  Dims out_dims = xv.dims();
  out_dims[0] = rows.size();
  Tensor out(out_dims);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::memcpy(out.data() + i * row_size, xv.data() + rows[i] * row_size,
                row_size * sizeof(double));
  }
  NodeId self = emplace(std::move(out), "select_rows", {x});
  set_backprop(self, [x, self, rows = std::move(rows), row_size](Graph& g) {
    if (!g.nodes_[x].requires_grad) return;
    const Tensor& gy = g.nodes_[self].grad;
    Tensor& buf = g.grad_buf(x);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      kern::serial::axpy(1.0, gy.data() + i * row_size, buf.data() + rows[i] * row_size,
                         row_size);
    }
  });
  return self;
}

NodeId Graph::pairwise_sqdist(NodeId x) {
  const Tensor& xv = nodes_[x].value;
  if (xv.rank() != 2) throw Error("pairwise_sqdist: input must be [b,d]");
  const std::size_t b = xv.dim(0), d = xv.dim(1);
  Tensor out(Dims{b, b});
  kern::pairwise_sqdist(xv.data(), out.data(), b, d);
  NodeId self = emplace(std::move(out), "pairwise_sqdist", {x});
  set_backprop(self, [x, self, b, d](Graph& g) {
    if (!g.nodes_[x].requires_grad) return;
    const Tensor& gy = g.nodes_[self].grad;
    kern::pairwise_sqdist_backward(g.nodes_[x].value.data(), gy.data(),
                                   g.grad_buf(x).data(), b, d);
  });
  return self;
}

double grad_check(const ScalarFn& f, const Tensor& point, double step) {
  const Tensor points[1] = {point};
  return grad_check_multi(
      [&f](Graph& g, std::span<const NodeId> ids) { return f(g, ids[0]); }, points, step);
}

double grad_check_multi(const MultiScalarFn& f, std::span<const Tensor> points,
                        double step) {
  if (step <= 0.0) throw Error("grad_check: step must be positive");

  const auto eval_at = [&](std::span<const Tensor> pts) {
    Graph g;
    std::vector<NodeId> ids;
    ids.reserve(pts.size());
    for (const Tensor& t : pts) ids.push_back(g.input(t, false));
    const NodeId root = f(g, ids);
    if (g.value(root).size() != 1) throw Error("grad_check: function must return a scalar");
    return g.value(root)[0];
  };

  // analytic gradients
  Graph g;
  std::vector<NodeId> ids;
  for (const Tensor& t : points) ids.push_back(g.input(t, true));
  const NodeId root = f(g, ids);
  if (g.value(root).size() != 1) throw Error("grad_check: function must return a scalar");
  g.backward(root);

  std::vector<Tensor> work(points.begin(), points.end());
  double worst = 0.0;
  for (std::size_t t = 0; t < work.size(); ++t) {
    const Tensor& analytic = g.grad(ids[t]);
    for (std::size_t c = 0; c < work[t].size(); ++c) {
      const double orig = work[t][c];
      work[t][c] = orig + step;
      const double fp = eval_at(work);
      work[t][c] = orig - step;
      const double fm = eval_at(work);
      work[t][c] = orig;
      const double numeric = (fp - fm) / (2.0 * step);
      const double a = analytic[c];
      const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace atten
