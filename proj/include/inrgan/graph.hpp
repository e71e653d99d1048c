#pragma once

// Static computation graphs over NdArray values with reverse-mode gradients.
//
// A Graph is a description only: it records primitives, their input
// references and the shapes they produce. Parameter and input values are bound
// at evaluation time, so the same graph can be evaluated at 32-bit or 64-bit
// precision and with any parameter set whose shapes match.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "inrgan/ndarray.hpp"

namespace inrgan {

enum class OpKind {
  Input,
  Parameter,
  Affine,
  Conv2d,
  LeakyRelu,
  Relu,
  Tanh,
  Sin,
  Cos,
  Abs,
  Add,
  Sub,
  Mul,
  Scale,
  Mean,
  BceWithLogits,
  ConcatChannels,
  Reshape,
  Downsample,
  TransposeLast2,
  Narrow,
  Gather,
};

const char* op_name(OpKind kind);

struct NodeId {
  int index = -1;
  bool valid() const { return index >= 0; }
  bool operator==(const NodeId&) const = default;
};

struct Node {
  OpKind kind = OpKind::Input;
  std::vector<int> inputs;
  Shape shape;
  std::string name;  // inputs and parameters only
  // Primitive attributes; meaning depends on kind.
  int stride = 1;
  int padding = 0;
  double scalar = 0.0;  // leaky slope, scale factor, or BCE label
  std::int64_t begin = 0;
  std::int64_t length = 0;
  std::shared_ptr<const std::vector<std::int64_t>> index;  // Gather source offsets
};

class Graph {
 public:
  Graph();
  // Copies describe a new graph: they get a fresh id.
  Graph(const Graph& other);
  Graph& operator=(const Graph& other);
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  NodeId input(std::string name, Shape shape);
  NodeId parameter(std::string name, Shape shape);

  // x: [n, in] or [B, n, in]; w: [out, in] (shared) or [B, out, in];
  // b: [out] or [B, out]. Produces [n, out] or [B, n, out].
  NodeId affine(NodeId x, NodeId w, NodeId b);
  // NCHW input, [O, C, k, k] kernel, [O] bias.
  NodeId conv2d(NodeId x, NodeId w, NodeId b, int stride, int padding);
  NodeId leaky_relu(NodeId x, double slope);
  NodeId relu(NodeId x);
  NodeId tanh(NodeId x);
  NodeId sin(NodeId x);
  NodeId cos(NodeId x);
  NodeId abs(NodeId x);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId x, double factor);
  // Mean over all elements; produces shape {1}.
  NodeId mean(NodeId x);
  // Elementwise sigmoid cross-entropy of logits against a constant label.
  NodeId bce_with_logits(NodeId logits, double label);
  NodeId concat_channels(NodeId a, NodeId b);
  NodeId reshape(NodeId x, Shape shape);
  // Keeps every factor-th row and column of an NCHW tensor.
  NodeId downsample(NodeId x, int factor);
  NodeId transpose_last2(NodeId x);
  // Slice [begin, begin + length) of the last axis.
  NodeId narrow(NodeId x, std::int64_t begin, std::int64_t length);
  // out.flat[i] = x.flat[index[i]]; index entries must be in range.
  NodeId gather(NodeId x, std::shared_ptr<const std::vector<std::int64_t>> index, Shape shape);

  void mark_output(const std::string& name, NodeId node);

  const std::vector<Node>& nodes() const { return nodes_; }
  const Node& node(NodeId id) const { return nodes_.at(static_cast<std::size_t>(id.index)); }
  const Shape& shape(NodeId id) const { return node(id).shape; }
  std::optional<NodeId> find_output(const std::string& name) const;
  std::optional<NodeId> find_input(const std::string& name) const;
  const std::vector<std::pair<std::string, NodeId>>& outputs() const { return outputs_; }
  std::vector<std::pair<std::string, Shape>> parameter_shapes() const;
  std::vector<std::pair<std::string, Shape>> input_shapes() const;
  std::uint64_t id() const { return id_; }

 private:
  NodeId push(Node node);
  const Node& checked(NodeId id, const char* op) const;

  std::vector<Node> nodes_;
  std::vector<std::pair<std::string, NodeId>> outputs_;
  std::uint64_t id_;
};

// Values of every node after a forward pass.
template <typename T>
class Forward {
 public:
  Forward() = default;

  bool complete() const { return graph_id_ != 0; }
  std::uint64_t graph_id() const { return graph_id_; }
  const NdArray<T>& value(NodeId id) const { return values_.at(static_cast<std::size_t>(id.index)); }
  const NdArray<T>& output(const std::string& name) const;
  TensorMap<T> outputs() const;

 private:
  template <typename U>
  friend Forward<U> eval_graph(const Graph&, const TensorMap<U>&, const TensorMap<U>&);

  std::uint64_t graph_id_ = 0;
  std::vector<std::pair<std::string, NodeId>> output_names_;
  std::vector<NdArray<T>> values_;
};

template <typename T>
struct Gradients {
  TensorMap<T> params;
  TensorMap<T> inputs;
};

// Evaluates every node. Throws std::invalid_argument when a parameter or input
// is missing or bound with the wrong shape.
template <typename T>
Forward<T> eval_graph(const Graph& graph, const TensorMap<T>& params, const TensorMap<T>& inputs);

// Reverse pass seeded at named outputs. Every parameter and input gets a
// gradient entry; unused ones are zero.
template <typename T>
Gradients<T> backward(const Graph& graph, const Forward<T>& forward,
                      const TensorMap<T>& output_seeds);

// Convenience: seed a single scalar output with 1.
template <typename T>
Gradients<T> backward_scalar(const Graph& graph, const Forward<T>& forward,
                             const std::string& output);

}  // namespace inrgan
