#include "dynshot/graph.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "dynshot/errors.hpp"
#include "dynshot/rng.hpp"

namespace dynshot {

namespace {

std::atomic<bool> g_mean_as_sum{false};

std::string shape_msg(const Graph& graph, NodeRef ref) {
  return graph.describe(ref) + " shape " + to_string(graph.shape(ref));
}

// Sorted-offset mean: mean = s0 + sum(s_i - s0) / k over the sorted values.
// Exactly idempotent on identical inputs and bitwise independent of input order.
double sorted_mean(std::span<double> values) {
  if (values.size() == 1) return values[0];
  std::sort(values.begin(), values.end());
  const double base = values[0];
  double offset = 0.0;
  for (std::size_t i = 1; i < values.size(); ++i) offset += values[i] - base;
  return base + offset / static_cast<double>(values.size());
}

}  // namespace

std::string_view to_string(OpKind op) {
  switch (op) {
    case OpKind::input: return "input";
    case OpKind::parameter: return "parameter";
    case OpKind::matmul: return "matmul";
    case OpKind::add_bias: return "add_bias";
    case OpKind::activation: return "activation";
    case OpKind::concat: return "concat";
    case OpKind::mean_of: return "mean_of";
    case OpKind::softmax_xent: return "softmax_xent";
    case OpKind::slice_row: return "slice_row";
  }
  return "unknown";
}

std::string_view to_string(ActivationKind kind) {
  return kind == ActivationKind::relu ? "relu" : "tanh";
}

ActivationKind parse_activation(std::string_view name) {
  if (name == "relu") return ActivationKind::relu;
  if (name == "tanh") return ActivationKind::tanh;
  throw GraphError("unknown activation '" + std::string(name) + "' (expected relu or tanh)");
}

// ---------------------------------------------------------------------------
// Initializer / registry

Tensor Initializer::make(const Shape& shape) const {
  switch (kind) {
    case Kind::zeros: return Tensor(shape, 0.0);
    case Kind::constant: return Tensor(shape, value);
    case Kind::glorot_uniform: {
      const double fan_in = static_cast<double>(shape.back());
      const double fan_out = static_cast<double>(shape.front());
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      Tensor t(shape);
      Rng rng(seed);
      for (double& v : t.values()) v = rng.uniform(-limit, limit);
      return t;
    }
  }
  return Tensor(shape);
}

std::size_t ParameterRegistry::acquire(const std::string& name, const Shape& shape,
                                       const Initializer& init) {
  if (auto it = index_.find(name); it != index_.end()) {
    const Shape& existing = params_[it->second].value.shape();
    if (existing != shape) {
      throw ShapeError("parameter '" + name + "' registered with shape " + to_string(existing) +
                       ", requested " + to_string(shape));
    }
    return it->second;
  }
  if (shape.empty() || numel(shape) == 0) {
    throw ShapeError("parameter '" + name + "' needs a non-empty shape");
  }
  params_.push_back(Parameter{name, init.make(shape), Tensor(shape, 0.0)});
  index_.emplace(name, params_.size() - 1);
  return params_.size() - 1;
}

std::optional<std::size_t> ParameterRegistry::find(std::string_view name) const {
  if (auto it = index_.find(name); it != index_.end()) return it->second;
  return std::nullopt;
}

std::size_t ParameterRegistry::scalar_count() const {
  std::size_t total = 0;
  for (const auto& p : params_) total += p.value.size();
  return total;
}

Parameter& ParameterRegistry::at(std::string_view name) {
  auto idx = find(name);
  if (!idx) throw GraphError("unknown parameter '" + std::string(name) + "'");
  return params_[*idx];
}

const Parameter& ParameterRegistry::at(std::string_view name) const {
  auto idx = find(name);
  if (!idx) throw GraphError("unknown parameter '" + std::string(name) + "'");
  return params_[*idx];
}

void ParameterRegistry::zero_grads() {
  for (auto& p : params_) p.grad.fill(0.0);
}

// ---------------------------------------------------------------------------
// Graph construction

Graph::Graph(std::shared_ptr<ParameterRegistry> registry) : registry_(std::move(registry)) {
  if (!registry_) throw GraphError("graph needs a parameter registry");
}

void Graph::require_mutable() const {
  if (frozen_) throw GraphError("graph is frozen; no nodes may be added");
}

void Graph::require_node(NodeRef ref) const {
  if (!ref.valid() || ref.id >= nodes_.size()) {
    throw GraphError("node reference #" + std::to_string(ref.id) + " does not belong to this graph");
  }
}

NodeRef Graph::append(Node node) {
  nodes_.push_back(std::move(node));
  return NodeRef{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Node& Graph::node(NodeRef ref) const {
  require_node(ref);
  return nodes_[ref.id];
}

std::string Graph::describe(NodeRef ref) const {
  const Node& n = node(ref);
  std::string out = "node #" + std::to_string(ref.id) + " (" + std::string(to_string(n.op));
  if (!n.label.empty()) out += " '" + n.label + "'";
  return out + ")";
}

std::size_t Graph::count_nodes(OpKind op) const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [op](const Node& n) { return n.op == op; }));
}

void Graph::count_instance(std::string_view tag) {
  require_mutable();
  auto it = instances_.find(tag);
  if (it == instances_.end()) {
    instances_.emplace(std::string(tag), 1);
  } else {
    ++it->second;
  }
}

std::size_t Graph::instance_count(std::string_view tag) const {
  auto it = instances_.find(tag);
  return it == instances_.end() ? 0 : it->second;
}

NodeRef Graph::input(Shape shape, std::string name) {
  require_mutable();
  if (shape.empty() || std::any_of(shape.begin(), shape.end(), [](std::size_t e) { return e == 0; })) {
    throw ShapeError("input '" + name + "' needs extents >= 1, got " + to_string(shape));
  }
  Node n;
  n.op = OpKind::input;
  n.shape = std::move(shape);
  n.label = std::move(name);
  return append(std::move(n));
}

NodeRef Graph::parameter(const std::string& name, const Shape& shape, const Initializer& init) {
  require_mutable();
  Node n;
  n.op = OpKind::parameter;
  n.param_index = registry_->acquire(name, shape, init);
  n.shape = shape;
  n.label = name;
  return append(std::move(n));
}

NodeRef Graph::matmul(NodeRef a, NodeRef b) {
  require_mutable();
  const Shape& sa = shape(a);
  const Shape& sb = shape(b);
  if (sa.size() != 2 || sb.empty() || sb.size() > 2 || sa[1] != sb[0]) {
    throw ShapeError("matmul of " + shape_msg(*this, a) + " and " + shape_msg(*this, b) +
                     " is not conformable");
  }
  Node n;
  n.op = OpKind::matmul;
  n.inputs = {a, b};
  n.shape = sb.size() == 1 ? Shape{sa[0]} : Shape{sa[0], sb[1]};
  return append(std::move(n));
}

NodeRef Graph::add_bias(NodeRef x, NodeRef bias) {
  require_mutable();
  const Shape& sx = shape(x);
  const Shape& sb = shape(bias);
  if (sb.size() != 1 || sb[0] != sx.back()) {
    throw ShapeError("add_bias: bias " + shape_msg(*this, bias) + " does not match last axis of " +
                     shape_msg(*this, x));
  }
  Node n;
  n.op = OpKind::add_bias;
  n.inputs = {x, bias};
  n.shape = sx;
  return append(std::move(n));
}

NodeRef Graph::activation(NodeRef x, ActivationKind kind) {
  require_mutable();
  Node n;
  n.op = OpKind::activation;
  n.inputs = {x};
  n.shape = shape(x);
  n.activation = kind;
  return append(std::move(n));
}

NodeRef Graph::concat(std::span<const NodeRef> parts) {
  require_mutable();
  if (parts.empty()) throw ShapeError("concat needs at least one part");
  const Shape& first = shape(parts[0]);
  Shape out = first;
  out.back() = 0;
  for (NodeRef p : parts) {
    const Shape& sp = shape(p);
    if (sp.size() != first.size() || !std::equal(sp.begin(), sp.end() - 1, first.begin())) {
      throw ShapeError("concat: " + shape_msg(*this, p) + " disagrees with leading extents of " +
                       shape_msg(*this, parts[0]));
    }
    out.back() += sp.back();
  }
  Node n;
  n.op = OpKind::concat;
  n.inputs.assign(parts.begin(), parts.end());
  n.shape = std::move(out);
  return append(std::move(n));
}

NodeRef Graph::mean_of(std::span<const NodeRef> parts) {
  require_mutable();
  if (parts.empty()) throw ShapeError("mean_of needs at least one part");
  const Shape& first = shape(parts[0]);
  for (NodeRef p : parts) {
    if (shape(p) != first) {
      throw ShapeError("mean_of: " + shape_msg(*this, p) + " differs from " + shape_msg(*this, parts[0]));
    }
  }
  Node n;
  n.op = OpKind::mean_of;
  n.inputs.assign(parts.begin(), parts.end());
  n.shape = first;
  return append(std::move(n));
}

NodeRef Graph::slice_row(NodeRef x, std::size_t row) {
  require_mutable();
  const Shape& sx = shape(x);
  if (sx.size() != 2 || row >= sx[0]) {
    throw ShapeError("slice_row " + std::to_string(row) + " out of range for " + shape_msg(*this, x));
  }
  Node n;
  n.op = OpKind::slice_row;
  n.inputs = {x};
  n.shape = {sx[1]};
  n.row = row;
  return append(std::move(n));
}

NodeRef Graph::softmax_xent(NodeRef logits, NodeRef label) {
  require_mutable();
  if (shape(logits) != Shape{2}) {
    throw ShapeError("softmax_xent expects 2 logits, got " + shape_msg(*this, logits));
  }
  if (node(label).op != OpKind::input || shape(label) != Shape{1}) {
    throw ShapeError("softmax_xent label must be a [1] input, got " + shape_msg(*this, label));
  }
  Node n;
  n.op = OpKind::softmax_xent;
  n.inputs = {logits, label};
  n.shape = {1};
  return append(std::move(n));
}

// ---------------------------------------------------------------------------
// Evaluation

Feeds& Feeds::set(NodeRef node, const Tensor& value) {
  for (auto& [ref, ptr] : entries_) {
    if (ref == node) {
      ptr = &value;
      return *this;
    }
  }
  entries_.emplace_back(node, &value);
  return *this;
}

const Tensor* Feeds::find(NodeRef node) const {
  for (const auto& [ref, ptr] : entries_) {
    if (ref == node) return ptr;
  }
  return nullptr;
}

Activations::Activations(const Graph& graph) : graph_(&graph) {
  const std::size_t count = graph.node_count();
  values_.resize(count);
  view_.assign(count, nullptr);
  probs_.resize(count);
  adjoints_.resize(count);
  evaluated_.assign(count, 0);
  needed_.assign(count, 0);
  for (std::uint32_t i = 0; i < count; ++i) {
    const Node& n = graph.node(NodeRef{i});
    if (n.op == OpKind::parameter) {
      view_[i] = &graph.registry().at(n.param_index).value;
      continue;
    }
    if (n.op != OpKind::input) values_[i] = Tensor(n.shape);
    adjoints_[i] = Tensor(n.shape);
    if (n.op == OpKind::softmax_xent) probs_[i] = Tensor({2});
  }
}

const Tensor& Activations::value(NodeRef ref) const {
  if (!ref.valid() || ref.id >= view_.size() || !evaluated_[ref.id]) {
    throw GraphError("value of " + graph_->describe(ref) + " requested before forward evaluated it");
  }
  return *view_[ref.id];
}

const Tensor& Activations::probabilities(NodeRef ref) const {
  if (graph_->node(ref).op != OpKind::softmax_xent) {
    throw GraphError(graph_->describe(ref) + " has no probabilities");
  }
  value(ref);
  return probs_[ref.id];
}

const Tensor& Activations::adjoint(NodeRef ref) const {
  if (graph_->node(ref).op == OpKind::parameter) {
    throw GraphError("adjoints of parameter nodes go straight to the gradient sink");
  }
  return adjoints_.at(ref.id);
}

void forward(const Graph& graph, const Feeds& feeds, Activations& acts, NodeRef target) {
  if (&acts.graph() != &graph) throw GraphError("activations belong to a different graph");
  const std::size_t count = graph.node_count();
  if (acts.view_.size() != count) throw GraphError("graph grew after its activations were allocated");
  const std::uint32_t last = target.valid() ? target.id : static_cast<std::uint32_t>(count - 1);
  if (count == 0) return;
  graph.node(NodeRef{last});

  auto& needed = acts.needed_;
  std::fill(needed.begin(), needed.end(), 0);
  std::fill(acts.evaluated_.begin(), acts.evaluated_.end(), 0);
  if (target.valid()) {
    needed[last] = 1;
    for (std::uint32_t i = last + 1; i-- > 0;) {
      if (!needed[i]) continue;
      for (NodeRef in : graph.node(NodeRef{i}).inputs) needed[in.id] = 1;
    }
  } else {
    std::fill(needed.begin(), needed.end(), 1);
  }

  const ParameterRegistry& registry = graph.registry();
  for (std::uint32_t i = 0; i <= last; ++i) {
    if (!needed[i]) continue;
    const NodeRef ref{i};
    const Node& n = graph.node(ref);
    Tensor& out = acts.values_[i];
    auto in = [&](std::size_t k) -> const Tensor& { return *acts.view_[n.inputs[k].id]; };

    switch (n.op) {
      case OpKind::input: {
        const Tensor* fed = feeds.find(ref);
        if (!fed) throw GraphError("unfed input: " + graph.describe(ref));
        if (fed->shape() != n.shape) {
          throw ShapeError("feed for " + graph.describe(ref) + " has shape " + to_string(fed->shape()) +
                           ", expected " + to_string(n.shape));
        }
        acts.view_[i] = fed;
        break;
      }
      case OpKind::parameter:
        acts.view_[i] = &registry.at(n.param_index).value;
        break;
      case OpKind::matmul: {
        const Tensor& a = in(0);
        const Tensor& b = in(1);
        const std::size_t m = a.extent(0), k = a.extent(1);
        const std::size_t cols = b.rank() == 1 ? 1 : b.extent(1);
        const double* pa = a.data();
        const double* pb = b.data();
        double* po = out.data();
        if (cols == 1) {
          for (std::size_t r = 0; r < m; ++r) {
            double acc = 0.0;
            const double* arow = pa + r * k;
            for (std::size_t j = 0; j < k; ++j) acc += arow[j] * pb[j];
            po[r] = acc;
          }
        } else {
          out.fill(0.0);
          for (std::size_t r = 0; r < m; ++r) {
            for (std::size_t j = 0; j < k; ++j) {
              const double av = pa[r * k + j];
              const double* brow = pb + j * cols;
              double* orow = po + r * cols;
              for (std::size_t c = 0; c < cols; ++c) orow[c] += av * brow[c];
            }
          }
        }
        acts.view_[i] = &out;
        break;
      }
      case OpKind::add_bias: {
        const Tensor& x = in(0);
        const Tensor& b = in(1);
        const std::size_t d = b.size();
        for (std::size_t e = 0; e < x.size(); ++e) out[e] = x[e] + b[e % d];
        acts.view_[i] = &out;
        break;
      }
      case OpKind::activation: {
        const Tensor& x = in(0);
        if (n.activation == ActivationKind::relu) {
          for (std::size_t e = 0; e < x.size(); ++e) out[e] = x[e] > 0.0 ? x[e] : 0.0;
        } else {
          for (std::size_t e = 0; e < x.size(); ++e) out[e] = std::tanh(x[e]);
        }
        acts.view_[i] = &out;
        break;
      }
      case OpKind::concat: {
        const std::size_t rows = out.rows();
        const std::size_t width = out.cols();
        std::size_t offset = 0;
        for (std::size_t p = 0; p < n.inputs.size(); ++p) {
          const Tensor& part = in(p);
          const std::size_t w = part.cols();
          for (std::size_t r = 0; r < rows; ++r) {
            std::copy_n(part.data() + r * w, w, out.data() + r * width + offset);
          }
          offset += w;
        }
        acts.view_[i] = &out;
        break;
      }
      case OpKind::mean_of: {
        const std::size_t k = n.inputs.size();
        if (testing::mean_as_sum()) {
          out.fill(0.0);
          for (std::size_t p = 0; p < k; ++p) {
            const Tensor& part = in(p);
            for (std::size_t e = 0; e < out.size(); ++e) out[e] += part[e];
          }
        } else {
          std::vector<double> column(k);
          for (std::size_t e = 0; e < out.size(); ++e) {
            for (std::size_t p = 0; p < k; ++p) column[p] = in(p)[e];
            out[e] = sorted_mean(column);
          }
        }
        acts.view_[i] = &out;
        break;
      }
      case OpKind::slice_row: {
        const Tensor& x = in(0);
        const auto row = x.row(n.row);
        std::copy(row.begin(), row.end(), out.data());
        acts.view_[i] = &out;
        break;
      }
      case OpKind::softmax_xent: {
        const Tensor& logits = in(0);
        const double label_value = in(1)[0];
        if (label_value != 0.0 && label_value != 1.0) {
          throw GraphError("label out of range for " + graph.describe(ref) + ": " +
                           std::to_string(label_value) + " (expected 0 or 1)");
        }
        const std::size_t label = label_value == 1.0 ? 1 : 0;
        const double top = std::max(logits[0], logits[1]);
        const double e0 = std::exp(logits[0] - top);
        const double e1 = std::exp(logits[1] - top);
        const double total = e0 + e1;
        Tensor& probs = acts.probs_[i];
        probs[0] = e0 / total;
        probs[1] = e1 / total;
        // -log p[label] = softplus(z_other - z_label); no cancellation for large margins.
        const double d = logits[1 - label] - logits[label];
        out[0] = std::max(d, 0.0) + std::log1p(std::exp(-std::abs(d)));
        acts.view_[i] = &out;
        break;
      }
    }
    acts.evaluated_[i] = 1;
  }
}

Activations forward(const Graph& graph, const Feeds& feeds, NodeRef target) {
  Activations acts(graph);
  forward(graph, feeds, acts, target);
  return acts;
}

// ---------------------------------------------------------------------------
// Reverse mode

template <typename GradSink>
void backward_impl(const Graph& graph, Activations& acts, NodeRef loss, GradSink&& param_grad) {
  const Node& loss_node = graph.node(loss);
  if (numel(loss_node.shape) != 1) {
    throw GraphError("backward needs a scalar loss, " + graph.describe(loss) + " has shape " +
                     to_string(loss_node.shape));
  }
  if (!acts.evaluated(loss)) throw GraphError("backward before forward evaluated " + graph.describe(loss));

  for (std::uint32_t i = 0; i <= loss.id; ++i) {
    if (acts.needed_[i] && graph.node(NodeRef{i}).op != OpKind::parameter) acts.adjoints_[i].fill(0.0);
  }
  acts.adjoints_[loss.id][0] = 1.0;

  auto sink = [&](NodeRef in) -> Tensor* {
    const Node& n = graph.node(in);
    if (n.op == OpKind::parameter) return &param_grad(n.param_index);
    if (n.op == OpKind::input) return nullptr;
    return &acts.adjoints_[in.id];
  };

  for (std::uint32_t i = loss.id + 1; i-- > 0;) {
    if (!acts.needed_[i]) continue;
    const NodeRef ref{i};
    const Node& n = graph.node(ref);
    if (n.op == OpKind::input || n.op == OpKind::parameter) continue;
    const Tensor& dy = acts.adjoints_[i];
    auto val = [&](std::size_t k) -> const Tensor& { return *acts.view_[n.inputs[k].id]; };

    switch (n.op) {
      case OpKind::matmul: {
        const Tensor& a = val(0);
        const Tensor& b = val(1);
        const std::size_t m = a.extent(0), k = a.extent(1);
        const std::size_t cols = b.rank() == 1 ? 1 : b.extent(1);
        if (Tensor* da = sink(n.inputs[0])) {
          // dA = dY * B^T
          for (std::size_t r = 0; r < m; ++r) {
            double* darow = da->data() + r * k;
            for (std::size_t c = 0; c < cols; ++c) {
              const double g = dy[r * cols + c];
              if (g == 0.0) continue;
              for (std::size_t j = 0; j < k; ++j) darow[j] += g * b[j * cols + c];
            }
          }
        }
        if (Tensor* db = sink(n.inputs[1])) {
          // dB = A^T * dY
          for (std::size_t r = 0; r < m; ++r) {
            const double* arow = a.data() + r * k;
            for (std::size_t c = 0; c < cols; ++c) {
              const double g = dy[r * cols + c];
              if (g == 0.0) continue;
              for (std::size_t j = 0; j < k; ++j) (*db)[j * cols + c] += arow[j] * g;
            }
          }
        }
        break;
      }
      case OpKind::add_bias: {
        if (Tensor* dx = sink(n.inputs[0])) {
          for (std::size_t e = 0; e < dy.size(); ++e) (*dx)[e] += dy[e];
        }
        if (Tensor* db = sink(n.inputs[1])) {
          const std::size_t d = db->size();
          for (std::size_t e = 0; e < dy.size(); ++e) (*db)[e % d] += dy[e];
        }
        break;
      }
      case OpKind::activation: {
        if (Tensor* dx = sink(n.inputs[0])) {
          const Tensor& y = *acts.view_[i];
          if (n.activation == ActivationKind::relu) {
            for (std::size_t e = 0; e < dy.size(); ++e) {
              if (y[e] > 0.0) (*dx)[e] += dy[e];
            }
          } else {
            for (std::size_t e = 0; e < dy.size(); ++e) (*dx)[e] += dy[e] * (1.0 - y[e] * y[e]);
          }
        }
        break;
      }
      case OpKind::concat: {
        const std::size_t rows = dy.rows();
        const std::size_t width = dy.cols();
        std::size_t offset = 0;
        for (std::size_t p = 0; p < n.inputs.size(); ++p) {
          const std::size_t w = graph.shape(n.inputs[p]).back();
          if (Tensor* dp = sink(n.inputs[p])) {
            for (std::size_t r = 0; r < rows; ++r) {
              for (std::size_t c = 0; c < w; ++c) (*dp)[r * w + c] += dy[r * width + offset + c];
            }
          }
          offset += w;
        }
        break;
      }
      case OpKind::mean_of: {
        const double scale = testing::mean_as_sum() ? 1.0 : 1.0 / static_cast<double>(n.inputs.size());
        for (NodeRef p : n.inputs) {
          if (Tensor* dp = sink(p)) {
            for (std::size_t e = 0; e < dy.size(); ++e) (*dp)[e] += dy[e] * scale;
          }
        }
        break;
      }
      case OpKind::slice_row: {
        if (Tensor* dx = sink(n.inputs[0])) {
          const std::size_t w = dy.size();
          for (std::size_t c = 0; c < w; ++c) (*dx)[n.row * w + c] += dy[c];
        }
        break;
      }
      case OpKind::softmax_xent: {
        if (Tensor* dl = sink(n.inputs[0])) {
          const Tensor& probs = acts.probs_[i];
          const std::size_t label = val(1)[0] == 1.0 ? 1 : 0;
          for (std::size_t c = 0; c < 2; ++c) {
            (*dl)[c] += dy[0] * (probs[c] - (c == label ? 1.0 : 0.0));
          }
        }
        break;
      }
      case OpKind::input:
      case OpKind::parameter:
        break;
    }
  }
}

void backward(Graph& graph, Activations& acts, NodeRef loss) {
  ParameterRegistry& registry = graph.registry();
  registry.zero_grads();
  backward_impl(graph, acts, loss, [&](std::size_t idx) -> Tensor& { return registry.at(idx).grad; });
}

void backward_into(const Graph& graph, Activations& acts, NodeRef loss, GradientBuffer& grads) {
  if (grads.size() != graph.registry().size()) {
    throw GraphError("gradient buffer has " + std::to_string(grads.size()) + " slots, registry has " +
                     std::to_string(graph.registry().size()));
  }
  backward_impl(graph, acts, loss, [&](std::size_t idx) -> Tensor& { return grads[idx]; });
}

GradientBuffer::GradientBuffer(const ParameterRegistry& registry) {
  grads_.reserve(registry.size());
  for (const auto& p : registry) grads_.emplace_back(p.value.shape(), 0.0);
}

void GradientBuffer::zero() {
  for (auto& g : grads_) g.fill(0.0);
}

void GradientBuffer::add(const GradientBuffer& other) {
  if (other.size() != size()) throw GraphError("gradient buffers differ in size");
  for (std::size_t i = 0; i < grads_.size(); ++i) {
    double* dst = grads_[i].data();
    const double* src = other.grads_[i].data();
    for (std::size_t e = 0; e < grads_[i].size(); ++e) dst[e] += src[e];
  }
}

// ---------------------------------------------------------------------------
// Finite-difference check

GradCheckReport grad_check(Graph& graph, NodeRef loss, const Feeds& feeds, double epsilon) {
  if (!(epsilon > 0.0)) throw GraphError("grad_check needs epsilon > 0");
  ParameterRegistry& registry = graph.registry();

  Activations acts(graph);
  forward(graph, feeds, acts, loss);
  backward(graph, acts, loss);

  std::vector<std::size_t> referenced;
  for (std::uint32_t i = 0; i < graph.node_count(); ++i) {
    const Node& n = graph.node(NodeRef{i});
    if (n.op == OpKind::parameter &&
        std::find(referenced.begin(), referenced.end(), n.param_index) == referenced.end()) {
      referenced.push_back(n.param_index);
    }
  }
  std::sort(referenced.begin(), referenced.end());

  // Relu inputs evaluated on the way to the loss. A perturbation that flips the
  // sign of any of them straddles a kink, where central differences are meaningless.
  std::vector<NodeRef> relu_inputs;
  for (std::uint32_t i = 0; i < graph.node_count(); ++i) {
    const Node& n = graph.node(NodeRef{i});
    if (n.op == OpKind::activation && n.activation == ActivationKind::relu && acts.evaluated(NodeRef{i})) {
      relu_inputs.push_back(n.inputs[0]);
    }
  }
  std::vector<bool> base_mask;
  auto relu_mask = [&]() {
    std::vector<bool> mask;
    for (NodeRef r : relu_inputs) {
      for (double v : acts.value(r).values()) mask.push_back(v > 0.0);
    }
    return mask;
  };
  base_mask = relu_mask();

  auto loss_at = [&](bool& crossed) {
    forward(graph, feeds, acts, loss);
    crossed = crossed || relu_mask() != base_mask;
    return acts.value(loss)[0];
  };

  GradCheckReport report;
  for (std::size_t idx : referenced) {
    Parameter& p = registry.at(idx);
    for (std::size_t e = 0; e < p.value.size(); ++e) {
      const double original = p.value[e];
      bool crossed = false;
      p.value[e] = original + epsilon;
      const double up = loss_at(crossed);
      p.value[e] = original - epsilon;
      const double down = loss_at(crossed);
      p.value[e] = original;
      if (crossed) {
        ++report.kinks_skipped;
        continue;
      }

      const double numeric = (up - down) / (2.0 * epsilon);
      const double analytic = p.grad[e];
      const double rel =
          std::abs(analytic - numeric) / std::max(1e-12, std::abs(analytic) + std::abs(numeric));
      ++report.entries_checked;
      if (rel > report.max_relative_error || report.worst_parameter.empty()) {
        report.max_relative_error = std::max(report.max_relative_error, rel);
        report.worst_parameter = p.name;
        report.worst_entry = e;
        report.worst_analytic = analytic;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

namespace testing {

void set_mean_as_sum(bool enabled) {
#ifdef DYNSHOT_MUTATION_HOOKS
  g_mean_as_sum.store(enabled, std::memory_order_relaxed);
#else
  (void)enabled;
#endif
}

bool mean_as_sum() { return g_mean_as_sum.load(std::memory_order_relaxed); }

}  // namespace testing

}  // namespace dynshot
