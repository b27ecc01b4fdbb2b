#pragma once

#include <functional>
#include <vector>

#include "nextmp/tensor.hpp"

namespace nextmp {

// Reverse-mode gradient tape over the primitive operations the guidance
// network needs. Node ids are issued in construction order, so the
// backward sweep is a single reverse pass that visits each node exactly
// once. With record = false the tape evaluates forward values only and
// stores no backward closures; both modes run identical forward
// arithmetic.
class Tape {
 public:
  using NodeId = int;

  explicit Tape(bool record = true) : record_(record) {}

  NodeId leaf(Tensor value);

  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  const Tensor& grad(NodeId id) const { return nodes_[id].grad; }

  // Seeds the (scalar) root with gradient 1 and sweeps backwards.
  void backward(NodeId root);

  std::size_t size() const { return nodes_.size(); }

  // x:[in], w:[out,in], b:[out] -> [out]. in == 0 degenerates to the bias.
  NodeId dense(NodeId x, NodeId w, NodeId b);
  // x:[..., c_in] matrix-multiplied along the last axis; bias optional
  // (pass -1 to skip).
  NodeId linear_lastdim(NodeId x, NodeId w, NodeId b);
  // x:[h, w, c_in], k:[kh, kw, c_in, c_out], b:[c_out]; zero padding keeps
  // the spatial shape (kernel dims odd).
  NodeId conv2d(NodeId x, NodeId k, NodeId b);
  // x:[a, b, c, c_in], k:[ka, kb, kc, c_in, c_out], b:[c_out]; same-shape
  // zero padding.
  NodeId conv3d(NodeId x, NodeId k, NodeId b);

  NodeId relu(NodeId x);
  NodeId sigmoid(NodeId x);
  NodeId tanh_op(NodeId x);
  // Softmax over every element of the tensor.
  NodeId softmax_all(NodeId x);
  // x:[..., groups * group_size] -> [..., groups], minimum within each
  // consecutive group (first index wins ties).
  NodeId group_min_lastdim(NodeId x, int group_size);

  NodeId concat_lastdim(NodeId a, NodeId b);
  NodeId slice_lastdim(NodeId x, int from, int to);
  NodeId broadcast_lastdim(NodeId x, int copies);
  // Replicates x across new leading dimensions, e.g. [c] -> [a, b, c].
  NodeId tile_leading(NodeId x, const std::vector<int>& lead);
  NodeId reshape(NodeId x, std::vector<int> shape);

  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId x, double c);

  // nu:[a, b, c, p] contracted against mu:[a, b, c] -> [p].
  NodeId attention_pool(NodeId nu, NodeId mu);
  // Sum of squared entries -> [1].
  NodeId sum_squares(NodeId x);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void(Tape&)> back;
  };

  NodeId push(Tensor value, std::function<void(Tape&)> back);
  Tensor& grad_ref(NodeId id) { return nodes_[id].grad; }

  bool record_;
  std::vector<Node> nodes_;
};

}  // namespace nextmp
