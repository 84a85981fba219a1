#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "atten/kernels.hpp"
#include "atten/tensor.hpp"

namespace atten {

// Reverse-mode tape. Nodes are append-only, so insertion order is already a
// topological order and backward() is a single reverse sweep that touches
// each node exactly once. A graph belongs to one thread from construction
// through backward; run independent graphs for parallelism.
//
// Ops never mutate earlier values and raise Error on shape mismatches or
// non-finite results instead of letting NaN/Inf flow downstream.

using NodeId = std::uint32_t;

enum class PoolMode { Max, Avg };
enum class ReduceMode { Sum, Mean, Max };

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Leaves. Inputs participate in gradients, constants never do.
  NodeId input(Tensor value, bool requires_grad = true);
  NodeId constant(Tensor value);

  // Elementwise. Binary ops broadcast: ranks must match and each axis must
  // agree or be 1 on one side.
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId div(NodeId a, NodeId b);  // errors on an exact zero divisor
  NodeId neg(NodeId a);
  NodeId exp(NodeId a);
  NodeId log(NodeId a);  // errors on non-positive input
  NodeId relu(NodeId a);
  NodeId sigmoid(NodeId a);
  NodeId scale(NodeId a, double c);
  NodeId clamp_min(NodeId a, double floor_v);  // max(x, floor); grad passes where x >= floor

  // [m,k] x [k,n] -> [m,n]
  NodeId matmul(NodeId a, NodeId b);

  // input [Cin,H,W], kernel [Cout,Cin,kh,kw], stride-1 cross-correlation.
  NodeId conv2d(NodeId x, NodeId kernel, std::size_t padding);

  // [C,H,W] -> [C,H/win,W/win]; win must divide H and W. Max routes the
  // gradient to the first maximal element in row-major order.
  NodeId pool2d(NodeId x, std::size_t window, PoolMode mode);

  // Reduced axes are removed from the shape. Max backward follows the same
  // first-maximum convention as pool2d.
  NodeId reduce(NodeId x, std::vector<std::size_t> axes, ReduceMode mode);
  NodeId reduce_all(NodeId x, ReduceMode mode);  // -> rank-0 scalar

  // Plumbing.
  NodeId reshape(NodeId x, Dims dims);
  NodeId concat0(std::span<const NodeId> parts);          // along axis 0
  NodeId stack_rows(std::span<const NodeId> rows);        // n x [d] -> [n,d]
  NodeId select_rows(NodeId x, std::vector<std::size_t> rows);  // [b,d] -> [m,d]
  NodeId pairwise_sqdist(NodeId x);                       // [b,d] -> [b,b]

  void backward(NodeId root);  // root must be a single-element tensor

  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  // Allocates a zero gradient on demand, so unused inputs read as zero.
  const Tensor& grad(NodeId id);
  bool requires_grad(NodeId id) const { return nodes_[id].requires_grad; }
  std::size_t node_count() const { return nodes_.size(); }

  // Gradient accumulation helpers used by op closures.
  Tensor& grad_buf(NodeId id);
  void accumulate_grad(NodeId id, const Tensor& contribution, double factor = 1.0);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool grad_live = false;
    const char* op = "";
    std::vector<NodeId> parents;
    std::function<void(Graph&)> backprop;  // empty for leaves
  };

  NodeId emplace(Tensor value, const char* op, std::vector<NodeId> parents);
  void set_backprop(NodeId id, std::function<void(Graph&)> fn);
  NodeId binary_ew(kern::Binary op, const char* name, NodeId a, NodeId b);
  NodeId unary_ew(kern::Unary op, const char* name, NodeId a);

  std::vector<Node> nodes_;
};

// Max over coordinates of |analytic - central difference| / max(1, |analytic|)
// for a scalar-valued function of one tensor. `f` must build the function on
// the given graph from the given input node.
using ScalarFn = std::function<NodeId(Graph&, NodeId)>;
double grad_check(const ScalarFn& f, const Tensor& point, double step = 1e-5);

// Same check across several independent input tensors.
using MultiScalarFn = std::function<NodeId(Graph&, std::span<const NodeId>)>;
double grad_check_multi(const MultiScalarFn& f, std::span<const Tensor> points,
                        double step = 1e-5);

}  // namespace atten
