#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dynshot/tensor.hpp"

namespace dynshot {

enum class OpKind : std::uint8_t {
  input,
  parameter,
  matmul,
  add_bias,
  activation,
  concat,
  mean_of,
  softmax_xent,
  slice_row,
};

enum class ActivationKind : std::uint8_t { relu, tanh };

std::string_view to_string(OpKind op);
std::string_view to_string(ActivationKind kind);
ActivationKind parse_activation(std::string_view name);

// Handle to a node of one Graph. Only meaningful together with that graph.
struct NodeRef {
  static constexpr std::uint32_t invalid_id = std::numeric_limits<std::uint32_t>::max();

  std::uint32_t id = invalid_id;

  bool valid() const { return id != invalid_id; }
  friend auto operator<=>(const NodeRef&, const NodeRef&) = default;
};

struct Initializer {
  enum class Kind : std::uint8_t { glorot_uniform, zeros, constant };

  Kind kind = Kind::zeros;
  std::uint64_t seed = 0;
  double value = 0.0;

  // Uniform in +-sqrt(6 / (fan_in + fan_out)). For a [out, in] matrix fan_in is the
  // last extent and fan_out the first; vectors use their length for both.
  static Initializer glorot(std::uint64_t seed) { return {Kind::glorot_uniform, seed, 0.0}; }
  static Initializer zeros() { return {Kind::zeros, 0, 0.0}; }
  static Initializer constant(double v) { return {Kind::constant, 0, v}; }

  Tensor make(const Shape& shape) const;
};

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
};

// Named trainable tensors shared by any number of graphs. Storage is stable:
// references returned by at() stay valid as new parameters are registered.
class ParameterRegistry {
 public:
  // Index of `name`, registering and initializing it on first use. A later call
  // with the same name must agree on the shape.
  std::size_t acquire(const std::string& name, const Shape& shape, const Initializer& init);

  std::optional<std::size_t> find(std::string_view name) const;
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  Parameter& at(std::size_t index) { return params_.at(index); }
  const Parameter& at(std::size_t index) const { return params_.at(index); }
  Parameter& at(std::string_view name);
  const Parameter& at(std::string_view name) const;

  void zero_grads();

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::deque<Parameter> params_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

struct Node {
  OpKind op = OpKind::input;
  std::vector<NodeRef> inputs;
  Shape shape;
  std::size_t param_index = 0;                      // parameter
  std::size_t row = 0;                              // slice_row
  ActivationKind activation = ActivationKind::relu;  // activation
  std::string label;                                // input name, parameter name
};

// Append-only static dataflow graph. Nodes only reference earlier nodes, so the
// node list is a topological order. Parameters live in a registry that may be
// shared with other graphs; parameter nodes alias registry storage.
class Graph {
 public:
  explicit Graph(std::shared_ptr<ParameterRegistry> registry = std::make_shared<ParameterRegistry>());

  NodeRef input(Shape shape, std::string name = {});
  NodeRef parameter(const std::string& name, const Shape& shape, const Initializer& init);

  // [m,k] x [k] -> [m], [m,k] x [k,n] -> [m,n]
  NodeRef matmul(NodeRef a, NodeRef b);
  // Broadcasts a [d] bias over the last axis of x.
  NodeRef add_bias(NodeRef x, NodeRef bias);
  NodeRef activation(NodeRef x, ActivationKind kind);
  // Concatenates along the last axis; leading extents must agree.
  NodeRef concat(std::span<const NodeRef> parts);
  NodeRef mean_of(std::span<const NodeRef> parts);
  NodeRef slice_row(NodeRef x, std::size_t row);
  // Scalar -log softmax(logits)[label] for 2 logits; `label` is a [1] node holding 0 or 1.
  NodeRef softmax_xent(NodeRef logits, NodeRef label);

  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t count_nodes(OpKind op) const;
  const Node& node(NodeRef ref) const;
  const Shape& shape(NodeRef ref) const { return node(ref).shape; }
  std::string describe(NodeRef ref) const;

  // Tally of named sub-network instantiations ("g", "f"), used for census checks.
  void count_instance(std::string_view tag);
  std::size_t instance_count(std::string_view tag) const;

  ParameterRegistry& registry() { return *registry_; }
  const ParameterRegistry& registry() const { return *registry_; }
  const std::shared_ptr<ParameterRegistry>& registry_handle() const { return registry_; }

 private:
  NodeRef append(Node node);
  void require_mutable() const;
  void require_node(NodeRef ref) const;

  std::vector<Node> nodes_;
  std::shared_ptr<ParameterRegistry> registry_;
  std::map<std::string, std::size_t, std::less<>> instances_;
  bool frozen_ = false;
};

// Non-owning map from input nodes to values; fed tensors must outlive forward().
class Feeds {
 public:
  Feeds& set(NodeRef node, const Tensor& value);
  const Tensor* find(NodeRef node) const;

 private:
  std::vector<std::pair<NodeRef, const Tensor*>> entries_;
};

// Per-evaluation storage for node values and adjoints. One Activations object
// per thread lets several threads evaluate the same frozen graph at once.
class Activations {
 public:
  explicit Activations(const Graph& graph);

  const Graph& graph() const { return *graph_; }
  bool evaluated(NodeRef ref) const { return evaluated_.at(ref.id) != 0; }
  const Tensor& value(NodeRef ref) const;
  // Softmax probabilities of a softmax_xent node.
  const Tensor& probabilities(NodeRef ref) const;
  // Adjoint d(loss)/d(node) after backward; not kept for parameter nodes.
  const Tensor& adjoint(NodeRef ref) const;

 private:
  friend void forward(const Graph&, const Feeds&, Activations&, NodeRef);
  template <typename GradSink>
  friend void backward_impl(const Graph&, Activations&, NodeRef, GradSink&&);

  const Graph* graph_;
  std::vector<Tensor> values_;
  std::vector<const Tensor*> view_;
  std::vector<Tensor> probs_;
  std::vector<Tensor> adjoints_;
  std::vector<char> evaluated_;
  std::vector<char> needed_;
};

// Parameter gradients detached from the registry, index-aligned with it.
class GradientBuffer {
 public:
  GradientBuffer() = default;
  explicit GradientBuffer(const ParameterRegistry& registry);

  std::size_t size() const { return grads_.size(); }
  Tensor& operator[](std::size_t i) { return grads_[i]; }
  const Tensor& operator[](std::size_t i) const { return grads_[i]; }
  void zero();
  // this += other, entry by entry.
  void add(const GradientBuffer& other);

 private:
  std::vector<Tensor> grads_;
};

// Evaluates every node that `target` depends on (all nodes when target is invalid).
void forward(const Graph& graph, const Feeds& feeds, Activations& acts, NodeRef target = {});
Activations forward(const Graph& graph, const Feeds& feeds, NodeRef target = {});

// Zeroes registry gradients, then accumulates d(loss)/d(parameter) summed over
// every node aliasing each parameter.
void backward(Graph& graph, Activations& acts, NodeRef loss);
// Accumulates into `grads` without touching the registry or zeroing first.
void backward_into(const Graph& graph, Activations& acts, NodeRef loss, GradientBuffer& grads);

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_entry = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t entries_checked = 0;
  std::size_t kinks_skipped = 0;  // entries whose perturbation flipped a relu
};

// Central finite differences over every entry of every parameter the graph
// references, compared with backward(). Parameter values are restored.
// Entries whose +-epsilon evaluations change which relu units are active are
// not compared; they are counted in kinks_skipped.
GradCheckReport grad_check(Graph& graph, NodeRef loss, const Feeds& feeds, double epsilon = 1e-5);

namespace testing {
// Mutation hook for negative controls: makes mean_of return the plain sum.
// Only honored in builds with DYNSHOT_MUTATION_HOOKS.
void set_mean_as_sum(bool enabled);
bool mean_as_sum();
}  // namespace testing

}  // namespace dynshot
