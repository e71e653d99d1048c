#include "inrgan/graph.hpp"

#include <Eigen/Core>
#include <atomic>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "inrgan/kernels.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace inrgan {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::Input: return "input";
    case OpKind::Parameter: return "parameter";
    case OpKind::Affine: return "affine";
    case OpKind::Conv2d: return "conv2d";
    case OpKind::LeakyRelu: return "leaky_relu";
    case OpKind::Relu: return "relu";
    case OpKind::Tanh: return "tanh";
    case OpKind::Sin: return "sin";
    case OpKind::Cos: return "cos";
    case OpKind::Abs: return "abs";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::Scale: return "scale";
    case OpKind::Mean: return "mean";
    case OpKind::BceWithLogits: return "bce_with_logits";
    case OpKind::ConcatChannels: return "concat_channels";
    case OpKind::Reshape: return "reshape";
    case OpKind::Downsample: return "downsample";
    case OpKind::TransposeLast2: return "transpose_last2";
    case OpKind::Narrow: return "narrow";
    case OpKind::Gather: return "gather";
  }
  return "?";
}

namespace {

std::atomic<std::uint64_t> next_graph_id{1};

#if defined(__GLIBC__)
// Node buffers are large and short-lived; keep them on the heap so repeated
// evaluations reuse already-mapped pages.
const bool heap_tuned = [] {
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  return true;
}();
#endif

[[noreturn]] void shape_error(const char* op, int node, const std::string& detail) {
  throw std::invalid_argument(std::string(op) + " (node " + std::to_string(node) +
                              "): " + detail);
}

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Map = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMap = Eigen::Map<const RowMat<T>>;

}  // namespace

Graph::Graph() : id_(next_graph_id.fetch_add(1)) {}

Graph::Graph(const Graph& other)
    : nodes_(other.nodes_), outputs_(other.outputs_), id_(next_graph_id.fetch_add(1)) {}

Graph& Graph::operator=(const Graph& other) {
  if (this != &other) {
    nodes_ = other.nodes_;
    outputs_ = other.outputs_;
    id_ = next_graph_id.fetch_add(1);
  }
  return *this;
}

NodeId Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return NodeId{static_cast<int>(nodes_.size()) - 1};
}

const Node& Graph::checked(NodeId id, const char* op) const {
  if (id.index < 0 || id.index >= static_cast<int>(nodes_.size())) {
    shape_error(op, static_cast<int>(nodes_.size()), "dangling input reference");
  }
  return nodes_[static_cast<std::size_t>(id.index)];
}

NodeId Graph::input(std::string name, Shape shape) {
  if (find_input(name)) throw std::invalid_argument("duplicate graph input '" + name + "'");
  Node n;
  n.kind = OpKind::Input;
  n.name = std::move(name);
  n.shape = std::move(shape);
  return push(std::move(n));
}

NodeId Graph::parameter(std::string name, Shape shape) {
  for (const auto& n : nodes_) {
    if (n.kind == OpKind::Parameter && n.name == name) {
      throw std::invalid_argument("duplicate graph parameter '" + name + "'");
    }
  }
  Node n;
  n.kind = OpKind::Parameter;
  n.name = std::move(name);
  n.shape = std::move(shape);
  return push(std::move(n));
}

NodeId Graph::affine(NodeId x, NodeId w, NodeId b) {
  const int self = static_cast<int>(nodes_.size());
  const Shape& xs = checked(x, "affine").shape;
  const Shape& ws = checked(w, "affine").shape;
  const Shape& bs = checked(b, "affine").shape;
  if (xs.size() != 2 && xs.size() != 3) shape_error("affine", self, "x must be rank 2 or 3");
  const std::int64_t batch = xs.size() == 3 ? xs[0] : 1;
  const std::int64_t in = xs.back();
  if (ws.size() == 2) {
    if (ws[1] != in) shape_error("affine", self, "weight " + shape_to_string(ws) + " vs x " + shape_to_string(xs));
    if (bs != Shape{ws[0]}) shape_error("affine", self, "bias " + shape_to_string(bs));
  } else if (ws.size() == 3) {
    if (xs.size() != 3 || ws[0] != batch || ws[2] != in) {
      shape_error("affine", self, "batched weight " + shape_to_string(ws) + " vs x " + shape_to_string(xs));
    }
    if (bs != Shape{batch, ws[1]}) shape_error("affine", self, "bias " + shape_to_string(bs));
  } else {
    shape_error("affine", self, "weight must be rank 2 or 3");
  }
  Node n;
  n.kind = OpKind::Affine;
  n.inputs = {x.index, w.index, b.index};
  n.shape = xs;
  n.shape.back() = ws.size() == 2 ? ws[0] : ws[1];
  return push(std::move(n));
}

NodeId Graph::conv2d(NodeId x, NodeId w, NodeId b, int stride, int padding) {
  const int self = static_cast<int>(nodes_.size());
  const Shape& xs = checked(x, "conv2d").shape;
  const Shape& ws = checked(w, "conv2d").shape;
  const Shape& bs = checked(b, "conv2d").shape;
  if (xs.size() != 4) shape_error("conv2d", self, "input must be NCHW, got " + shape_to_string(xs));
  if (ws.size() != 4 || ws[1] != xs[1] || ws[2] != ws[3]) {
    shape_error("conv2d", self, "kernel " + shape_to_string(ws) + " vs input " + shape_to_string(xs));
  }
  if (bs != Shape{ws[0]}) shape_error("conv2d", self, "bias " + shape_to_string(bs));
  kernels::ConvGeometry g{};
  try {
    g = kernels::conv_geometry(xs[1], xs[2], xs[3], ws[2], stride, padding);
  } catch (const std::invalid_argument& e) {
    shape_error("conv2d", self, e.what());
  }
  Node n;
  n.kind = OpKind::Conv2d;
  n.inputs = {x.index, w.index, b.index};
  n.stride = stride;
  n.padding = padding;
  n.shape = {xs[0], ws[0], g.out_height, g.out_width};
  return push(std::move(n));
}

namespace {
Node unary(OpKind kind, NodeId x, const Shape& shape) {
  Node n;
  n.kind = kind;
  n.inputs = {x.index};
  n.shape = shape;
  return n;
}
}  // namespace

NodeId Graph::leaky_relu(NodeId x, double slope) {
  Node n = unary(OpKind::LeakyRelu, x, checked(x, "leaky_relu").shape);
  n.scalar = slope;
  return push(std::move(n));
}
NodeId Graph::relu(NodeId x) { return push(unary(OpKind::Relu, x, checked(x, "relu").shape)); }
NodeId Graph::tanh(NodeId x) { return push(unary(OpKind::Tanh, x, checked(x, "tanh").shape)); }
NodeId Graph::sin(NodeId x) { return push(unary(OpKind::Sin, x, checked(x, "sin").shape)); }
NodeId Graph::cos(NodeId x) { return push(unary(OpKind::Cos, x, checked(x, "cos").shape)); }
NodeId Graph::abs(NodeId x) { return push(unary(OpKind::Abs, x, checked(x, "abs").shape)); }

NodeId Graph::scale(NodeId x, double factor) {
  Node n = unary(OpKind::Scale, x, checked(x, "scale").shape);
  n.scalar = factor;
  return push(std::move(n));
}

NodeId Graph::mean(NodeId x) {
  checked(x, "mean");
  return push(unary(OpKind::Mean, x, Shape{1}));
}

NodeId Graph::bce_with_logits(NodeId logits, double label) {
  Node n = unary(OpKind::BceWithLogits, logits, checked(logits, "bce_with_logits").shape);
  n.scalar = label;
  return push(std::move(n));
}

namespace {
const char* binary_name(OpKind kind) { return op_name(kind); }
}  // namespace

#define INRGAN_BINARY(fn, KIND)                                                        \
  NodeId Graph::fn(NodeId a, NodeId b) {                                               \
    const int self = static_cast<int>(nodes_.size());                                  \
    const Shape& as = checked(a, binary_name(KIND)).shape;                             \
    const Shape& bs = checked(b, binary_name(KIND)).shape;                             \
    if (as != bs) {                                                                    \
      shape_error(binary_name(KIND), self, shape_to_string(as) + " vs " + shape_to_string(bs)); \
    }                                                                                  \
    Node n;                                                                            \
    n.kind = KIND;                                                                     \
    n.inputs = {a.index, b.index};                                                     \
    n.shape = as;                                                                      \
    return push(std::move(n));                                                         \
  }

INRGAN_BINARY(add, OpKind::Add)
INRGAN_BINARY(sub, OpKind::Sub)
INRGAN_BINARY(mul, OpKind::Mul)
#undef INRGAN_BINARY

NodeId Graph::concat_channels(NodeId a, NodeId b) {
  const int self = static_cast<int>(nodes_.size());
  const Shape& as = checked(a, "concat_channels").shape;
  const Shape& bs = checked(b, "concat_channels").shape;
  if (as.size() != 4 || bs.size() != 4 || as[0] != bs[0] || as[2] != bs[2] || as[3] != bs[3]) {
    shape_error("concat_channels", self, shape_to_string(as) + " vs " + shape_to_string(bs));
  }
  Node n;
  n.kind = OpKind::ConcatChannels;
  n.inputs = {a.index, b.index};
  n.shape = {as[0], as[1] + bs[1], as[2], as[3]};
  return push(std::move(n));
}

NodeId Graph::reshape(NodeId x, Shape shape) {
  const int self = static_cast<int>(nodes_.size());
  const Shape& xs = checked(x, "reshape").shape;
  if (shape_size(xs) != shape_size(shape)) {
    shape_error("reshape", self, shape_to_string(xs) + " -> " + shape_to_string(shape));
  }
  return push(unary(OpKind::Reshape, x, shape));
}

NodeId Graph::downsample(NodeId x, int factor) {
  const int self = static_cast<int>(nodes_.size());
  const Shape& xs = checked(x, "downsample").shape;
  if (xs.size() != 4 || factor < 1 || xs[2] % factor != 0 || xs[3] % factor != 0) {
    shape_error("downsample", self, shape_to_string(xs) + " by " + std::to_string(factor));
  }
  Node n = unary(OpKind::Downsample, x, {xs[0], xs[1], xs[2] / factor, xs[3] / factor});
  n.stride = factor;
  return push(std::move(n));
}

NodeId Graph::transpose_last2(NodeId x) {
  const int self = static_cast<int>(nodes_.size());
  Shape s = checked(x, "transpose_last2").shape;
  if (s.size() < 2) shape_error("transpose_last2", self, "rank < 2");
  std::swap(s[s.size() - 1], s[s.size() - 2]);
  return push(unary(OpKind::TransposeLast2, x, s));
}

NodeId Graph::narrow(NodeId x, std::int64_t begin, std::int64_t length) {
  const int self = static_cast<int>(nodes_.size());
  Shape s = checked(x, "narrow").shape;
  if (s.empty() || begin < 0 || length < 1 || begin + length > s.back()) {
    shape_error("narrow", self, "range [" + std::to_string(begin) + ", " + std::to_string(begin + length) +
                                    ") outside " + shape_to_string(s));
  }
  s.back() = length;
  Node n = unary(OpKind::Narrow, x, s);
  n.begin = begin;
  n.length = length;
  return push(std::move(n));
}

NodeId Graph::gather(NodeId x, std::shared_ptr<const std::vector<std::int64_t>> index, Shape shape) {
  const int self = static_cast<int>(nodes_.size());
  const std::int64_t n_in = shape_size(checked(x, "gather").shape);
  if (!index || static_cast<std::int64_t>(index->size()) != shape_size(shape)) {
    shape_error("gather", self, "index table length does not match " + shape_to_string(shape));
  }
  for (std::int64_t v : *index) {
    if (v < 0 || v >= n_in) shape_error("gather", self, "index out of range");
  }
  Node n = unary(OpKind::Gather, x, std::move(shape));
  n.index = std::move(index);
  return push(std::move(n));
}

void Graph::mark_output(const std::string& name, NodeId node) {
  checked(node, "output");
  for (auto& [existing, id] : outputs_) {
    if (existing == name) throw std::invalid_argument("duplicate graph output '" + name + "'");
  }
  outputs_.emplace_back(name, node);
}

std::optional<NodeId> Graph::find_output(const std::string& name) const {
  for (const auto& [existing, id] : outputs_) {
    if (existing == name) return id;
  }
  return std::nullopt;
}

std::optional<NodeId> Graph::find_input(const std::string& name) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].kind == OpKind::Input && nodes_[i].name == name) return NodeId{static_cast<int>(i)};
  }
  return std::nullopt;
}

std::vector<std::pair<std::string, Shape>> Graph::parameter_shapes() const {
  std::vector<std::pair<std::string, Shape>> out;
  for (const auto& n : nodes_) {
    if (n.kind == OpKind::Parameter) out.emplace_back(n.name, n.shape);
  }
  return out;
}

std::vector<std::pair<std::string, Shape>> Graph::input_shapes() const {
  std::vector<std::pair<std::string, Shape>> out;
  for (const auto& n : nodes_) {
    if (n.kind == OpKind::Input) out.emplace_back(n.name, n.shape);
  }
  return out;
}

template <typename T>
const NdArray<T>& Forward<T>::output(const std::string& name) const {
  for (const auto& [existing, id] : output_names_) {
    if (existing == name) return value(id);
  }
  throw std::invalid_argument("no graph output named '" + name + "'");
}

template <typename T>
TensorMap<T> Forward<T>::outputs() const {
  TensorMap<T> out;
  for (const auto& [name, id] : output_names_) out.emplace(name, value(id));
  return out;
}

// ---------------------------------------------------------------------------
// Forward kernels

namespace {

template <typename T>
void forward_affine(const Node& n, const NdArray<T>& x, const NdArray<T>& w, const NdArray<T>& b,
                    NdArray<T>& y) {
  const bool batched_w = w.rank() == 3;
  const std::int64_t batch = x.rank() == 3 ? x.dim(0) : 1;
  const std::int64_t rows = x.rank() == 3 ? x.dim(1) : x.dim(0);
  const std::int64_t in = x.shape().back();
  const std::int64_t out = n.shape.back();
  for (std::int64_t i = 0; i < batch; ++i) {
    const T* wp = batched_w ? w.data() + i * out * in : w.data();
    const T* bp = batched_w ? b.data() + i * out : b.data();
    kernels::affine_rows(x.data() + i * rows * in, wp, bp, y.data() + i * rows * out, rows, in, out);
  }
}

template <typename T>
void backward_affine(const Node& n, const NdArray<T>& x, const NdArray<T>& w, const NdArray<T>& dy,
                     NdArray<T>* dx, NdArray<T>* dw, NdArray<T>* db) {
  const bool batched_w = w.rank() == 3;
  const std::int64_t batch = x.rank() == 3 ? x.dim(0) : 1;
  const std::int64_t rows = x.rank() == 3 ? x.dim(1) : x.dim(0);
  const std::int64_t in = x.shape().back();
  const std::int64_t out = n.shape.back();
  for (std::int64_t i = 0; i < batch; ++i) {
    const std::int64_t woff = batched_w ? i * out * in : 0;
    const std::int64_t boff = batched_w ? i * out : 0;
    kernels::affine_rows_backward(x.data() + i * rows * in, w.data() + woff, dy.data() + i * rows * out,
                                  dx ? dx->data() + i * rows * in : nullptr,
                                  dw ? dw->data() + woff : nullptr, db ? db->data() + boff : nullptr,
                                  rows, in, out);
  }
}

template <typename T>
void forward_conv(const Node& n, const NdArray<T>& x, const NdArray<T>& w, const NdArray<T>& b,
                  NdArray<T>& y, std::vector<T>& scratch) {
  const auto g = kernels::conv_geometry(x.dim(1), x.dim(2), x.dim(3), w.dim(2), n.stride, n.padding);
  const std::int64_t ckk = g.channels * g.kernel * g.kernel;
  const std::int64_t plane = g.out_height * g.out_width;
  const std::int64_t out_c = w.dim(0);
  scratch.resize(static_cast<std::size_t>(ckk * plane));
  ConstMap<T> wm(w.data(), out_c, ckk);
  for (std::int64_t i = 0; i < x.dim(0); ++i) {
    kernels::im2col(x.data() + i * g.channels * g.height * g.width, g, scratch.data());
    Map<T> ym(y.data() + i * out_c * plane, out_c, plane);
    ym.noalias() = wm * ConstMap<T>(scratch.data(), ckk, plane);
    ym.colwise() += Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>(b.data(), out_c);
  }
}

template <typename T>
void backward_conv(const Node& n, const NdArray<T>& x, const NdArray<T>& w, const NdArray<T>& dy,
                   NdArray<T>* dx, NdArray<T>* dw, NdArray<T>* db, std::vector<T>& scratch,
                   std::vector<T>& scratch2) {
  const auto g = kernels::conv_geometry(x.dim(1), x.dim(2), x.dim(3), w.dim(2), n.stride, n.padding);
  const std::int64_t ckk = g.channels * g.kernel * g.kernel;
  const std::int64_t plane = g.out_height * g.out_width;
  const std::int64_t out_c = w.dim(0);
  scratch.resize(static_cast<std::size_t>(ckk * plane));
  ConstMap<T> wm(w.data(), out_c, ckk);
  for (std::int64_t i = 0; i < x.dim(0); ++i) {
    ConstMap<T> dym(dy.data() + i * out_c * plane, out_c, plane);
    if (db) {
      const T* dyi = dy.data() + i * out_c * plane;
      for (std::int64_t o = 0; o < out_c; ++o) {
        T acc = T(0);
        for (std::int64_t p = 0; p < plane; ++p) acc += dyi[o * plane + p];
        (*db)[o] += acc;
      }
    }
    if (dw) {
      kernels::im2col(x.data() + i * g.channels * g.height * g.width, g, scratch.data());
      Map<T>(dw->data(), out_c, ckk).noalias() += dym * ConstMap<T>(scratch.data(), ckk, plane).transpose();
    }
    if (dx) {
      scratch2.resize(static_cast<std::size_t>(ckk * plane));
      Map<T> cols(scratch2.data(), ckk, plane);
      cols.noalias() = wm.transpose() * dym;
      kernels::col2im(scratch2.data(), g, dx->data() + i * g.channels * g.height * g.width);
    }
  }
}

template <typename T>
T softplus_neg_abs(T v) {
  return std::log1p(std::exp(-std::abs(v)));
}

}  // namespace

template <typename T>
Forward<T> eval_graph(const Graph& graph, const TensorMap<T>& params, const TensorMap<T>& inputs) {
  Forward<T> fw;
  const auto& nodes = graph.nodes();
  fw.values_.resize(nodes.size());
  std::vector<T> scratch;
  for (std::size_t idx = 0; idx < nodes.size(); ++idx) {
    const Node& n = nodes[idx];
    auto in = [&](int k) -> const NdArray<T>& { return fw.values_[static_cast<std::size_t>(n.inputs[static_cast<std::size_t>(k)])]; };
    NdArray<T>& y = fw.values_[idx];
    switch (n.kind) {
      case OpKind::Input:
      case OpKind::Parameter: {
        const auto& table = n.kind == OpKind::Input ? inputs : params;
        const char* what = n.kind == OpKind::Input ? "input" : "parameter";
        auto it = table.find(n.name);
        if (it == table.end()) {
          throw std::invalid_argument(std::string("eval_graph: unbound ") + what + " '" + n.name + "'");
        }
        if (it->second.shape() != n.shape) {
          throw std::invalid_argument(std::string("eval_graph: ") + what + " '" + n.name + "' has shape " +
                                      shape_to_string(it->second.shape()) + ", expected " +
                                      shape_to_string(n.shape));
        }
        y = it->second;
        continue;
      }
      default:
        break;
    }
    y = NdArray<T>(n.shape);
    T* out = y.data();
    const std::int64_t count = y.size();
    switch (n.kind) {
      case OpKind::Affine:
        forward_affine(n, in(0), in(1), in(2), y);
        break;
      case OpKind::Conv2d:
        forward_conv(n, in(0), in(1), in(2), y, scratch);
        break;
      case OpKind::LeakyRelu: {
        const T* a = in(0).data();
        const T slope = static_cast<T>(n.scalar);
        kernels::leaky_forward(a, out, count, slope);
        break;
      }
      case OpKind::Relu: {
        const T* a = in(0).data();
        for (std::int64_t i = 0; i < count; ++i) out[i] = a[i] > T(0) ? a[i] : T(0);
        break;
      }
      case OpKind::Tanh: {
        const T* a = in(0).data();
        for (std::int64_t i = 0; i < count; ++i) out[i] = std::tanh(a[i]);
        break;
      }
      case OpKind::Sin: {
        const T* a = in(0).data();
        for (std::int64_t i = 0; i < count; ++i) out[i] = std::sin(a[i]);
        break;
      }
      case OpKind::Cos: {
        const T* a = in(0).data();
        for (std::int64_t i = 0; i < count; ++i) out[i] = std::cos(a[i]);
        break;
      }
      case OpKind::Abs: {
        const T* a = in(0).data();
        for (std::int64_t i = 0; i < count; ++i) out[i] = std::abs(a[i]);
        break;
      }
      case OpKind::Add: {
        const T* a = in(0).data();
        const T* b = in(1).data();
        for (std::int64_t i = 0; i < count; ++i) out[i] = a[i] + b[i];
        break;
      }
      case OpKind::Sub: {
        const T* a = in(0).data();
        const T* b = in(1).data();
        for (std::int64_t i = 0; i < count; ++i) out[i] = a[i] - b[i];
        break;
      }
      case OpKind::Mul: {
        const T* a = in(0).data();
        const T* b = in(1).data();
        for (std::int64_t i = 0; i < count; ++i) out[i] = a[i] * b[i];
        break;
      }
      case OpKind::Scale: {
        const T* a = in(0).data();
        const T f = static_cast<T>(n.scalar);
        for (std::int64_t i = 0; i < count; ++i) out[i] = a[i] * f;
        break;
      }
      case OpKind::Mean: {
        const auto& a = in(0);
        double acc = 0.0;
        for (std::int64_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]);
        out[0] = static_cast<T>(acc / static_cast<double>(a.size()));
        break;
      }
      case OpKind::BceWithLogits: {
        const T* a = in(0).data();
        const T label = static_cast<T>(n.scalar);
        for (std::int64_t i = 0; i < count; ++i) {
          out[i] = std::max(a[i], T(0)) - a[i] * label + softplus_neg_abs(a[i]);
        }
        break;
      }
      case OpKind::ConcatChannels: {
        const auto& a = in(0);
        const auto& b = in(1);
        const std::int64_t plane = a.dim(2) * a.dim(3);
        const std::int64_t ca = a.dim(1) * plane;
        const std::int64_t cb = b.dim(1) * plane;
        for (std::int64_t i = 0; i < a.dim(0); ++i) {
          std::copy_n(a.data() + i * ca, ca, out + i * (ca + cb));
          std::copy_n(b.data() + i * cb, cb, out + i * (ca + cb) + ca);
        }
        break;
      }
      case OpKind::Reshape:
        std::copy_n(in(0).data(), count, out);
        break;
      case OpKind::Downsample: {
        const auto& a = in(0);
        const std::int64_t f = n.stride;
        const std::int64_t h = a.dim(2), w = a.dim(3), oh = n.shape[2], ow = n.shape[3];
        for (std::int64_t p = 0; p < a.dim(0) * a.dim(1); ++p) {
          for (std::int64_t r = 0; r < oh; ++r) {
            for (std::int64_t c = 0; c < ow; ++c) out[(p * oh + r) * ow + c] = a[(p * h + r * f) * w + c * f];
          }
        }
        break;
      }
      case OpKind::TransposeLast2: {
        const auto& a = in(0);
        const std::int64_t rows = a.shape()[a.shape().size() - 2];
        const std::int64_t cols = a.shape().back();
        const std::int64_t outer = a.size() / (rows * cols);
        for (std::int64_t o = 0; o < outer; ++o) {
          Map<T>(out + o * rows * cols, cols, rows) = ConstMap<T>(a.data() + o * rows * cols, rows, cols).transpose();
        }
        break;
      }
      case OpKind::Narrow: {
        const auto& a = in(0);
        const std::int64_t width = a.shape().back();
        const std::int64_t outer = a.size() / width;
        for (std::int64_t o = 0; o < outer; ++o) {
          std::copy_n(a.data() + o * width + n.begin, n.length, out + o * n.length);
        }
        break;
      }
      case OpKind::Gather: {
        const T* a = in(0).data();
        const auto& index = *n.index;
        for (std::int64_t i = 0; i < count; ++i) out[i] = a[index[static_cast<std::size_t>(i)]];
        break;
      }
      case OpKind::Input:
      case OpKind::Parameter:
        break;
    }
  }
  fw.graph_id_ = graph.id();
  fw.output_names_ = graph.outputs();
  return fw;
}

template <typename T>
Gradients<T> backward(const Graph& graph, const Forward<T>& forward, const TensorMap<T>& output_seeds) {
  if (!forward.complete()) throw std::logic_error("backward: no forward pass has been run");
  if (forward.graph_id() != graph.id()) {
    throw std::logic_error("backward: forward pass belongs to a different graph");
  }
  const auto& nodes = graph.nodes();
  std::vector<NdArray<T>> grads(nodes.size());
  std::vector<bool> live(nodes.size(), false);
  for (const auto& [name, seed] : output_seeds) {
    auto id = graph.find_output(name);
    if (!id) throw std::invalid_argument("backward: no graph output named '" + name + "'");
    const auto k = static_cast<std::size_t>(id->index);
    if (seed.shape() != nodes[k].shape) {
      throw std::invalid_argument("backward: seed for '" + name + "' has shape " + shape_to_string(seed.shape()) +
                                  ", expected " + shape_to_string(nodes[k].shape));
    }
    if (!live[k]) {
      grads[k] = seed;
      live[k] = true;
    } else {
      for (std::int64_t i = 0; i < seed.size(); ++i) grads[k][i] += seed[i];
    }
  }
  auto grad_of = [&](int idx) -> NdArray<T>& {
    const auto k = static_cast<std::size_t>(idx);
    if (!live[k]) {
      grads[k] = NdArray<T>(nodes[k].shape);
      live[k] = true;
    }
    return grads[k];
  };

  std::vector<T> scratch, scratch2;
  for (std::size_t idx = nodes.size(); idx-- > 0;) {
    if (!live[idx]) continue;
    const Node& n = nodes[idx];
    if (n.kind == OpKind::Input || n.kind == OpKind::Parameter) continue;
    const NdArray<T>& dy = grads[idx];
    const T* g = dy.data();
    const std::int64_t count = dy.size();
    auto val = [&](int k) -> const NdArray<T>& { return forward.value(NodeId{n.inputs[static_cast<std::size_t>(k)]}); };
    const NdArray<T>& y = forward.value(NodeId{static_cast<int>(idx)});
    switch (n.kind) {
      case OpKind::Affine:
        backward_affine(n, val(0), val(1), dy, &grad_of(n.inputs[0]), &grad_of(n.inputs[1]), &grad_of(n.inputs[2]));
        break;
      case OpKind::Conv2d:
        backward_conv(n, val(0), val(1), dy, &grad_of(n.inputs[0]), &grad_of(n.inputs[1]), &grad_of(n.inputs[2]),
                      scratch, scratch2);
        break;
      case OpKind::LeakyRelu: {
        const T* a = val(0).data();
        T* d = grad_of(n.inputs[0]).data();
        const T slope = static_cast<T>(n.scalar);
        kernels::leaky_backward(a, g, d, count, slope);
        break;
      }
      case OpKind::Relu: {
        const T* a = val(0).data();
        T* d = grad_of(n.inputs[0]).data();
        for (std::int64_t i = 0; i < count; ++i) d[i] += a[i] > T(0) ? g[i] : T(0);
        break;
      }
      case OpKind::Tanh: {
        const T* o = y.data();
        T* d = grad_of(n.inputs[0]).data();
        for (std::int64_t i = 0; i < count; ++i) d[i] += g[i] * (T(1) - o[i] * o[i]);
        break;
      }
      case OpKind::Sin: {
        const T* a = val(0).data();
        T* d = grad_of(n.inputs[0]).data();
        for (std::int64_t i = 0; i < count; ++i) d[i] += g[i] * std::cos(a[i]);
        break;
      }
      case OpKind::Cos: {
        const T* a = val(0).data();
        T* d = grad_of(n.inputs[0]).data();
        for (std::int64_t i = 0; i < count; ++i) d[i] -= g[i] * std::sin(a[i]);
        break;
      }
      case OpKind::Abs: {
        // Subgradient at zero is zero.
        const T* a = val(0).data();
        T* d = grad_of(n.inputs[0]).data();
        for (std::int64_t i = 0; i < count; ++i) {
          d[i] += a[i] > T(0) ? g[i] : (a[i] < T(0) ? -g[i] : T(0));
        }
        break;
      }
      case OpKind::Add: {
        T* da = grad_of(n.inputs[0]).data();
        for (std::int64_t i = 0; i < count; ++i) da[i] += g[i];
        T* db = grad_of(n.inputs[1]).data();
        for (std::int64_t i = 0; i < count; ++i) db[i] += g[i];
        break;
      }
      case OpKind::Sub: {
        T* da = grad_of(n.inputs[0]).data();
        for (std::int64_t i = 0; i < count; ++i) da[i] += g[i];
        T* db = grad_of(n.inputs[1]).data();
        for (std::int64_t i = 0; i < count; ++i) db[i] -= g[i];
        break;
      }
      case OpKind::Mul: {
        const T* a = val(0).data();
        const T* b = val(1).data();
        T* da = grad_of(n.inputs[0]).data();
        for (std::int64_t i = 0; i < count; ++i) da[i] += g[i] * b[i];
        T* db = grad_of(n.inputs[1]).data();
        for (std::int64_t i = 0; i < count; ++i) db[i] += g[i] * a[i];
        break;
      }
      case OpKind::Scale: {
        T* d = grad_of(n.inputs[0]).data();
        const T f = static_cast<T>(n.scalar);
        for (std::int64_t i = 0; i < count; ++i) d[i] += g[i] * f;
        break;
      }
      case OpKind::Mean: {
        NdArray<T>& d = grad_of(n.inputs[0]);
        const T share = g[0] / static_cast<T>(d.size());
        for (std::int64_t i = 0; i < d.size(); ++i) d[i] += share;
        break;
      }
      case OpKind::BceWithLogits: {
        const T* a = val(0).data();
        T* d = grad_of(n.inputs[0]).data();
        const T label = static_cast<T>(n.scalar);
        for (std::int64_t i = 0; i < count; ++i) {
          const T sig = T(1) / (T(1) + std::exp(-a[i]));
          d[i] += g[i] * (sig - label);
        }
        break;
      }
      case OpKind::ConcatChannels: {
        const Shape& as = nodes[static_cast<std::size_t>(n.inputs[0])].shape;
        const Shape& bs = nodes[static_cast<std::size_t>(n.inputs[1])].shape;
        const std::int64_t plane = as[2] * as[3];
        const std::int64_t ca = as[1] * plane;
        const std::int64_t cb = bs[1] * plane;
        T* da = grad_of(n.inputs[0]).data();
        T* db = grad_of(n.inputs[1]).data();
        for (std::int64_t i = 0; i < as[0]; ++i) {
          const T* src = g + i * (ca + cb);
          for (std::int64_t k = 0; k < ca; ++k) da[i * ca + k] += src[k];
          for (std::int64_t k = 0; k < cb; ++k) db[i * cb + k] += src[ca + k];
        }
        break;
      }
      case OpKind::Reshape: {
        T* d = grad_of(n.inputs[0]).data();
        for (std::int64_t i = 0; i < count; ++i) d[i] += g[i];
        break;
      }
      case OpKind::Downsample: {
        const Shape& xs = nodes[static_cast<std::size_t>(n.inputs[0])].shape;
        T* d = grad_of(n.inputs[0]).data();
        const std::int64_t f = n.stride;
        const std::int64_t h = xs[2], w = xs[3], oh = n.shape[2], ow = n.shape[3];
        for (std::int64_t p = 0; p < xs[0] * xs[1]; ++p) {
          for (std::int64_t r = 0; r < oh; ++r) {
            for (std::int64_t c = 0; c < ow; ++c) d[(p * h + r * f) * w + c * f] += g[(p * oh + r) * ow + c];
          }
        }
        break;
      }
      case OpKind::TransposeLast2: {
        const Shape& xs = nodes[static_cast<std::size_t>(n.inputs[0])].shape;
        const std::int64_t rows = xs[xs.size() - 2];
        const std::int64_t cols = xs.back();
        const std::int64_t outer = count / (rows * cols);
        T* d = grad_of(n.inputs[0]).data();
        for (std::int64_t o = 0; o < outer; ++o) {
          Map<T>(d + o * rows * cols, rows, cols) += ConstMap<T>(g + o * rows * cols, cols, rows).transpose();
        }
        break;
      }
      case OpKind::Narrow: {
        const std::int64_t width = nodes[static_cast<std::size_t>(n.inputs[0])].shape.back();
        const std::int64_t outer = count / n.length;
        T* d = grad_of(n.inputs[0]).data();
        for (std::int64_t o = 0; o < outer; ++o) {
          T* dst = d + o * width + n.begin;
          const T* src = g + o * n.length;
          for (std::int64_t k = 0; k < n.length; ++k) dst[k] += src[k];
        }
        break;
      }
      case OpKind::Gather: {
        T* d = grad_of(n.inputs[0]).data();
        const auto& index = *n.index;
        for (std::int64_t i = 0; i < count; ++i) d[index[static_cast<std::size_t>(i)]] += g[i];
        break;
      }
      case OpKind::Input:
      case OpKind::Parameter:
        break;
    }
    grads[idx] = NdArray<T>();
  }

  Gradients<T> out;
  for (std::size_t idx = 0; idx < nodes.size(); ++idx) {
    const Node& n = nodes[idx];
    if (n.kind != OpKind::Input && n.kind != OpKind::Parameter) continue;
    NdArray<T> g = live[idx] ? std::move(grads[idx]) : NdArray<T>(n.shape);
    (n.kind == OpKind::Input ? out.inputs : out.params).emplace(n.name, std::move(g));
  }
  return out;
}

template <typename T>
Gradients<T> backward_scalar(const Graph& graph, const Forward<T>& forward, const std::string& output) {
  auto id = graph.find_output(output);
  if (!id) throw std::invalid_argument("backward: no graph output named '" + output + "'");
  TensorMap<T> seeds;
  seeds.emplace(output, NdArray<T>(graph.shape(*id), T(1)));
  return backward(graph, forward, seeds);
}

template class Forward<float>;
template class Forward<double>;
template Forward<float> eval_graph<float>(const Graph&, const TensorMap<float>&, const TensorMap<float>&);
template Forward<double> eval_graph<double>(const Graph&, const TensorMap<double>&, const TensorMap<double>&);
template Gradients<float> backward<float>(const Graph&, const Forward<float>&, const TensorMap<float>&);
template Gradients<double> backward<double>(const Graph&, const Forward<double>&, const TensorMap<double>&);
template Gradients<float> backward_scalar<float>(const Graph&, const Forward<float>&, const std::string&);
template Gradients<double> backward_scalar<double>(const Graph&, const Forward<double>&, const std::string&);

}  // namespace inrgan
