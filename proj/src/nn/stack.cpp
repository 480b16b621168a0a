#include "splitbench/nn/stack.hpp"

#include <atomic>

namespace splitbench::nn {

template <typename T>
std::uint64_t LayerStack<T>::next_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

template <typename T>
LayerStack<T>::LayerStack(Shape input_shape, std::vector<Layer<T>> layers)
    : input_shape_(std::move(input_shape)), layers_(std::move(layers)), id_(next_id()) {
  boundaries_.push_back(input_shape_);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    Shape next;
    try {
      next = infer_output_shape(l.kind, boundaries_.back());
    } catch (const ShapeError& e) {
      throw ShapeError(e.what(), i);
    }
    const auto expected = param_shapes(l.kind);
    if (expected.size() != l.params.size())
      throw ShapeError(kind_name(l.kind) + " expects " + std::to_string(expected.size()) +
                           " parameter tensors",
                       i);
    for (std::size_t p = 0; p < expected.size(); ++p)
      if (l.params[p].shape() != expected[p])
        throw ShapeError("parameter " + std::to_string(p) + " of " + kind_name(l.kind) +
                             " has shape " + shape_str(l.params[p].shape()) + ", expected " +
                             shape_str(expected[p]),
                         i);
    boundaries_.push_back(std::move(next));
  }
  output_shape_ = boundaries_.back();
}

template <typename T>
LayerStack<T>::LayerStack(const LayerStack& other)
    : input_shape_(other.input_shape_),
      output_shape_(other.output_shape_),
      boundaries_(other.boundaries_),
      layers_(other.layers_),
      id_(next_id()) {}

template <typename T>
LayerStack<T>& LayerStack<T>::operator=(const LayerStack& other) {
  if (this != &other) {
    input_shape_ = other.input_shape_;
    output_shape_ = other.output_shape_;
    boundaries_ = other.boundaries_;
    layers_ = other.layers_;
    id_ = next_id();
    version_ = 0;
  }
  return *this;
}

template <typename T>
std::size_t LayerStack<T>::parameter_tensor_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.params.size();
  return n;
}

template <typename T>
std::size_t LayerStack<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_)
    for (const auto& p : l.params) n += p.numel();
  return n;
}

template <typename T>
std::vector<BasicTensor<T>> LayerStack<T>::parameters() const {
  std::vector<BasicTensor<T>> out;
  for (const auto& l : layers_)
    for (const auto& p : l.params) out.push_back(p);
  return out;
}

template <typename T>
void LayerStack<T>::set_parameters(std::span<const BasicTensor<T>> params) {
  if (params.size() != parameter_tensor_count())
    throw ShapeError("expected " + std::to_string(parameter_tensor_count()) +
                     " parameter tensors, got " + std::to_string(params.size()));
  std::size_t k = 0;
  for (std::size_t i = 0; i < layers_.size(); ++i)
    for (auto& p : layers_[i].params) {
      if (params[k].shape() != p.shape())
        throw ShapeError("parameter shape " + shape_str(params[k].shape()) +
                             " does not match " + shape_str(p.shape()),
                         i);
      ++k;
    }
  k = 0;
  for (auto& l : layers_)
    for (auto& p : l.params) p = params[k++];
  touch();
}

template <typename T>
std::vector<BasicTensor<T>*> LayerStack<T>::mutable_parameters() {
  std::vector<BasicTensor<T>*> out;
  for (auto& l : layers_)
    for (auto& p : l.params) out.push_back(&p);
  touch();
  return out;
}

namespace {

template <typename T>
void check_batch(const LayerStack<T>& stack, const BasicTensor<T>& batch) {
  const Shape& s = batch.shape();
  if (s.empty() || Shape(s.begin() + 1, s.end()) != stack.input_shape())
    throw ShapeError("batch shape " + shape_str(s) + " does not match stack input " +
                         shape_str(stack.input_shape()),
                     0);
}

}  // namespace

template <typename T>
ForwardResult<T> forward(const LayerStack<T>& stack, BasicTensor<T> batch) {
  check_batch(stack, batch);
  ForwardResult<T> r;
  r.tape.stack_id = stack.id();
  r.tape.version = stack.version();
  r.tape.inputs.reserve(stack.size());
  for (std::size_t i = 0; i < stack.size(); ++i) {
    BasicTensor<T> next = layer_forward(stack.layer(i), batch);
    r.tape.inputs.push_back(std::move(batch));
    batch = std::move(next);
  }
  r.tape.output_shape = batch.shape();
  r.output = std::move(batch);
  return r;
}

template <typename T>
BasicTensor<T> predict(const LayerStack<T>& stack, BasicTensor<T> batch) {
  check_batch(stack, batch);
  for (std::size_t i = 0; i < stack.size(); ++i) batch = layer_forward(stack.layer(i), batch);
  return batch;
}

template <typename T>
Gradients<T> backward(const LayerStack<T>& stack, const Tape<T>& tape,
                      const BasicTensor<T>& grad_output, bool need_input_grad) {
  if (tape.stack_id != stack.id() || tape.inputs.size() != stack.size())
    throw Error("stale_tape", "tape was recorded on a different stack");
  if (tape.version != stack.version())
    throw Error("stale_tape", "stack parameters changed since the tape was recorded");
  if (grad_output.shape() != tape.output_shape)
    throw ShapeError("output gradient " + shape_str(grad_output.shape()) +
                         " does not match forward output " + shape_str(tape.output_shape),
                     stack.size() ? stack.size() - 1 : 0);

  std::vector<std::vector<BasicTensor<T>>> per_layer(stack.size());
  BasicTensor<T> g = grad_output;
  for (std::size_t i = stack.size(); i-- > 0;) {
    const bool want_input = need_input_grad || i > 0;
    LayerGrad<T> lg = layer_backward(stack.layer(i), tape.inputs[i], g, want_input);
    per_layer[i] = std::move(lg.params);
    g = std::move(lg.input);
  }
  Gradients<T> out;
  if (need_input_grad) out.input = stack.size() ? std::move(g) : grad_output;
  for (auto& ps : per_layer)
    for (auto& p : ps) out.params.push_back(std::move(p));
  return out;
}

void CutSpec::validate(std::size_t layer_count) const {
  if (cuts.empty() || cuts.size() > 2)
    throw Error("invalid_cut", "cut spec needs one or two cut indices");
  for (std::size_t c : cuts)
    if (c == 0 || c >= layer_count)
      throw Error("invalid_cut", "cut " + std::to_string(c) + " is degenerate for " +
                                     std::to_string(layer_count) + " layers");
  if (cuts.size() == 2 && cuts[0] >= cuts[1])
    throw Error("invalid_cut", "three-way cuts must be strictly increasing");
}

std::string role_name(SegmentRole role) {
  switch (role) {
    case SegmentRole::Front: return "front";
    case SegmentRole::Back: return "back";
    case SegmentRole::Head: return "head";
    case SegmentRole::Body: return "body";
    case SegmentRole::Tail: return "tail";
  }
  return "unknown";
}

template <typename T>
SegmentRole SplitParts<T>::role(std::size_t i) const {
  if (segments.size() == 2) return i == 0 ? SegmentRole::Front : SegmentRole::Back;
  static constexpr SegmentRole three[] = {SegmentRole::Head, SegmentRole::Body,
                                          SegmentRole::Tail};
  return three[i];
}

template <typename T>
SplitParts<T> split(const LayerStack<T>& stack, const CutSpec& cut) {
  cut.validate(stack.size());
  SplitParts<T> parts;
  std::vector<std::size_t> bounds{0};
  bounds.insert(bounds.end(), cut.cuts.begin(), cut.cuts.end());
  bounds.push_back(stack.size());
  for (std::size_t s = 0; s + 1 < bounds.size(); ++s) {
    std::vector<Layer<T>> layers(stack.layers().begin() + bounds[s],
                                 stack.layers().begin() + bounds[s + 1]);
    parts.segments.emplace_back(stack.boundary_shape(bounds[s]), std::move(layers));
  }
  return parts;
}

template <typename T>
LayerStack<T> concat(std::span<const LayerStack<T>> segments) {
  if (segments.empty()) throw Error("invalid_cut", "nothing to concatenate");
  std::vector<Layer<T>> layers;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    if (s > 0 && segments[s].input_shape() != segments[s - 1].output_shape())
      throw ShapeError("segment " + std::to_string(s) + " input " +
                       shape_str(segments[s].input_shape()) + " does not follow " +
                       shape_str(segments[s - 1].output_shape()));
    layers.insert(layers.end(), segments[s].layers().begin(), segments[s].layers().end());
  }
  return LayerStack<T>(segments.front().input_shape(), std::move(layers));
}

template class LayerStack<float>;
template class LayerStack<double>;
template struct SplitParts<float>;
template struct SplitParts<double>;
template ForwardResult<float> forward(const LayerStack<float>&, Tensor);
template ForwardResult<double> forward(const LayerStack<double>&, Tensor64);
template Tensor predict(const LayerStack<float>&, Tensor);
template Tensor64 predict(const LayerStack<double>&, Tensor64);
template Gradients<float> backward(const LayerStack<float>&, const Tape<float>&, const Tensor&,
                                   bool);
template Gradients<double> backward(const LayerStack<double>&, const Tape<double>&,
                                    const Tensor64&, bool);
template SplitParts<float> split(const LayerStack<float>&, const CutSpec&);
template SplitParts<double> split(const LayerStack<double>&, const CutSpec&);
template LayerStack<float> concat(std::span<const LayerStack<float>>);
template LayerStack<double> concat(std::span<const LayerStack<double>>);

}  // namespace splitbench::nn
