#include "splitbench/nn/layer.hpp"

#include <cmath>
#include <limits>

namespace splitbench::nn {

namespace {

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

std::size_t batch_of(const Shape& shape) {
  if (shape.empty()) throw ShapeError("batch tensor has rank 0");
  return shape.front();
}

Shape sample_of(const Shape& shape) { return Shape(shape.begin() + 1, shape.end()); }

Shape with_batch(std::size_t n, const Shape& sample) {
  Shape s{n};
  s.insert(s.end(), sample.begin(), sample.end());
  return s;
}

struct ConvGeometry {
  std::size_t in_ch, out_ch, k, stride, in_h, in_w, out_h, out_w;
  std::size_t patch() const { return in_ch * k * k; }
  std::size_t positions() const { return out_h * out_w; }
};

ConvGeometry conv_geometry(const Conv2D& c, const Shape& sample) {
  const Shape out = infer_output_shape(c, sample);
  return {c.in_ch, c.out_ch, c.kernel, c.stride, sample[1], sample[2], out[1], out[2]};
}

// cols[r][p] with r = (ic*k + ky)*k + kx and p = oy*out_w + ox.
template <typename T>
void im2col(const T* in, const ConvGeometry& g, T* cols) {
  const std::size_t P = g.positions();
  for (std::size_t ic = 0; ic < g.in_ch; ++ic) {
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        T* row = cols + ((ic * g.k + ky) * g.k + kx) * P;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const T* src = in + (ic * g.in_h + oy * g.stride + ky) * g.in_w + kx;
          T* dst = row + oy * g.out_w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) dst[ox] = src[ox * g.stride];
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* cols, const ConvGeometry& g, T* in) {
  const std::size_t P = g.positions();
  for (std::size_t ic = 0; ic < g.in_ch; ++ic) {
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const T* row = cols + ((ic * g.k + ky) * g.k + kx) * P;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          T* dst = in + (ic * g.in_h + oy * g.stride + ky) * g.in_w + kx;
          const T* src = row + oy * g.out_w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) dst[ox * g.stride] += src[ox];
        }
      }
    }
  }
}

template <typename T>
BasicTensor<T> dense_forward(const Dense& d, const Layer<T>& layer,
                             const BasicTensor<T>& x) {
  const std::size_t n = x.dim(0);
  BasicTensor<T> out(Shape{n, d.out});
  const T* w = layer.params[0].raw();
  const T* b = layer.params[1].raw();
  for (std::size_t s = 0; s < n; ++s) {
    T* o = out.raw() + s * d.out;
    for (std::size_t j = 0; j < d.out; ++j) o[j] = b[j];
    const T* xi = x.raw() + s * d.in;
    for (std::size_t i = 0; i < d.in; ++i) {
      const T xv = xi[i];
      const T* wr = w + i * d.out;
      for (std::size_t j = 0; j < d.out; ++j) o[j] += xv * wr[j];
    }
  }
  return out;
}

template <typename T>
LayerGrad<T> dense_backward(const Dense& d, const Layer<T>& layer,
                            const BasicTensor<T>& x, const BasicTensor<T>& g,
                            bool need_input_grad) {
  const std::size_t n = x.dim(0);
  LayerGrad<T> r;
  BasicTensor<T> gw(Shape{d.in, d.out});
  BasicTensor<T> gb(Shape{d.out});
  for (std::size_t s = 0; s < n; ++s) {
    const T* gs = g.raw() + s * d.out;
    const T* xs = x.raw() + s * d.in;
    for (std::size_t j = 0; j < d.out; ++j) gb[j] += gs[j];
    for (std::size_t i = 0; i < d.in; ++i) {
      const T xv = xs[i];
      T* gwr = gw.raw() + i * d.out;
      for (std::size_t j = 0; j < d.out; ++j) gwr[j] += xv * gs[j];
    }
  }
  if (need_input_grad) {
    r.input = BasicTensor<T>(x.shape());
    const T* w = layer.params[0].raw();
    for (std::size_t s = 0; s < n; ++s) {
      const T* gs = g.raw() + s * d.out;
      T* gx = r.input.raw() + s * d.in;
      for (std::size_t i = 0; i < d.in; ++i) {
        const T* wr = w + i * d.out;
        T acc = 0;
        for (std::size_t j = 0; j < d.out; ++j) acc += wr[j] * gs[j];
        gx[i] = acc;
      }
    }
  }
  r.params.push_back(std::move(gw));
  r.params.push_back(std::move(gb));
  return r;
}

template <typename T>
BasicTensor<T> conv_forward(const Conv2D& c, const Layer<T>& layer,
                            const BasicTensor<T>& x) {
  const std::size_t n = x.dim(0);
  const ConvGeometry g = conv_geometry(c, sample_of(x.shape()));
  const std::size_t P = g.positions(), R = g.patch();
  const std::size_t in_stride = g.in_ch * g.in_h * g.in_w;
  BasicTensor<T> out(Shape{n, g.out_ch, g.out_h, g.out_w});
  std::vector<T> cols(R * P);
  const T* w = layer.params[0].raw();
  const T* b = layer.params[1].raw();
  for (std::size_t s = 0; s < n; ++s) {
    im2col(x.raw() + s * in_stride, g, cols.data());
    T* o = out.raw() + s * g.out_ch * P;
    for (std::size_t oc = 0; oc < g.out_ch; ++oc) {
      T* orow = o + oc * P;
      for (std::size_t p = 0; p < P; ++p) orow[p] = b[oc];
      const T* wr = w + oc * R;
      for (std::size_t r = 0; r < R; ++r) {
        const T wv = wr[r];
        const T* crow = cols.data() + r * P;
        for (std::size_t p = 0; p < P; ++p) orow[p] += wv * crow[p];
      }
    }
  }
  return out;
}

template <typename T>
LayerGrad<T> conv_backward(const Conv2D& c, const Layer<T>& layer,
                           const BasicTensor<T>& x, const BasicTensor<T>& gout,
                           bool need_input_grad) {
  const std::size_t n = x.dim(0);
  const ConvGeometry g = conv_geometry(c, sample_of(x.shape()));
  const std::size_t P = g.positions(), R = g.patch();
  const std::size_t in_stride = g.in_ch * g.in_h * g.in_w;
  LayerGrad<T> r;
  BasicTensor<T> gw(layer.params[0].shape());
  BasicTensor<T> gb(layer.params[1].shape());
  if (need_input_grad) r.input = BasicTensor<T>(x.shape());
  std::vector<T> cols(R * P);
  std::vector<T> gcols(need_input_grad ? R * P : 0);
  const T* w = layer.params[0].raw();
  for (std::size_t s = 0; s < n; ++s) {
    im2col(x.raw() + s * in_stride, g, cols.data());
    const T* go = gout.raw() + s * g.out_ch * P;
    for (std::size_t oc = 0; oc < g.out_ch; ++oc) {
      const T* grow = go + oc * P;
      T bacc = 0;
      for (std::size_t p = 0; p < P; ++p) bacc += grow[p];
      gb[oc] += bacc;
      T* gwr = gw.raw() + oc * R;
      for (std::size_t rr = 0; rr < R; ++rr) {
        const T* crow = cols.data() + rr * P;
        T acc = 0;
        for (std::size_t p = 0; p < P; ++p) acc += grow[p] * crow[p];
        gwr[rr] += acc;
      }
    }
    if (need_input_grad) {
      std::fill(gcols.begin(), gcols.end(), T{0});
      for (std::size_t oc = 0; oc < g.out_ch; ++oc) {
        const T* grow = go + oc * P;
        const T* wr = w + oc * R;
        for (std::size_t rr = 0; rr < R; ++rr) {
          const T wv = wr[rr];
          T* gc = gcols.data() + rr * P;
          for (std::size_t p = 0; p < P; ++p) gc[p] += wv * grow[p];
        }
      }
      col2im_add(gcols.data(), g, r.input.raw() + s * in_stride);
    }
  }
  r.params.push_back(std::move(gw));
  r.params.push_back(std::move(gb));
  return r;
}

// Index of the window maximum; first occurrence wins on ties.
template <typename T>
std::size_t window_argmax(const T* plane, std::size_t w, std::size_t oy,
                          std::size_t ox, std::size_t win) {
  std::size_t best = (oy * win) * w + ox * win;
  T best_v = plane[best];
  for (std::size_t dy = 0; dy < win; ++dy) {
    for (std::size_t dx = 0; dx < win; ++dx) {
      const std::size_t idx = (oy * win + dy) * w + ox * win + dx;
      if (plane[idx] > best_v) {
        best_v = plane[idx];
        best = idx;
      }
    }
  }
  return best;
}

template <typename T>
BasicTensor<T> pool_forward(const MaxPool2D& mp, const BasicTensor<T>& x) {
  const Shape sample = sample_of(x.shape());
  const Shape os = infer_output_shape(mp, sample);
  const std::size_t n = x.dim(0), ch = sample[0], h = sample[1], w = sample[2];
  BasicTensor<T> out(with_batch(n, os));
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t c = 0; c < ch; ++c) {
      const T* plane = x.raw() + (s * ch + c) * h * w;
      T* o = out.raw() + (s * ch + c) * os[1] * os[2];
      for (std::size_t oy = 0; oy < os[1]; ++oy)
        for (std::size_t ox = 0; ox < os[2]; ++ox)
          o[oy * os[2] + ox] = plane[window_argmax(plane, w, oy, ox, mp.window)];
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> pool_backward(const MaxPool2D& mp, const BasicTensor<T>& x,
                             const BasicTensor<T>& gout) {
  const Shape sample = sample_of(x.shape());
  const Shape os = infer_output_shape(mp, sample);
  const std::size_t n = x.dim(0), ch = sample[0], h = sample[1], w = sample[2];
  BasicTensor<T> gin(x.shape());
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t c = 0; c < ch; ++c) {
      const T* plane = x.raw() + (s * ch + c) * h * w;
      T* gp = gin.raw() + (s * ch + c) * h * w;
      const T* g = gout.raw() + (s * ch + c) * os[1] * os[2];
      for (std::size_t oy = 0; oy < os[1]; ++oy)
        for (std::size_t ox = 0; ox < os[2]; ++ox)
          gp[window_argmax(plane, w, oy, ox, mp.window)] += g[oy * os[2] + ox];
    }
  }
  return gin;
}

}  // namespace

std::string kind_name(const LayerKind& kind) {
  return std::visit(
      Overloaded{
          [](const Dense& d) {
            return "Dense(" + std::to_string(d.in) + "," + std::to_string(d.out) + ")";
          },
          [](const Conv2D& c) {
            return "Conv2D(" + std::to_string(c.in_ch) + "," + std::to_string(c.out_ch) +
                   "," + std::to_string(c.kernel) + "," + std::to_string(c.stride) + ")";
          },
          [](const MaxPool2D& m) { return "MaxPool2D(" + std::to_string(m.window) + ")"; },
          [](const ReLU&) { return std::string("ReLU"); },
          [](const Flatten&) { return std::string("Flatten"); },
      },
      kind);
}

Shape infer_output_shape(const LayerKind& kind, const Shape& sample) {
  return std::visit(
      Overloaded{
          [&](const Dense& d) -> Shape {
            if (sample != Shape{d.in})
              throw ShapeError("Dense expects [" + std::to_string(d.in) + "], got " +
                               shape_str(sample));
            return {d.out};
          },
          [&](const Conv2D& c) -> Shape {
            if (sample.size() != 3 || sample[0] != c.in_ch)
              throw ShapeError("Conv2D expects [" + std::to_string(c.in_ch) +
                               "xHxW], got " + shape_str(sample));
            if (c.kernel == 0 || c.stride == 0 || sample[1] < c.kernel || sample[2] < c.kernel)
              throw ShapeError("Conv2D kernel " + std::to_string(c.kernel) +
                               " does not fit " + shape_str(sample));
            return {c.out_ch, (sample[1] - c.kernel) / c.stride + 1,
                    (sample[2] - c.kernel) / c.stride + 1};
          },
          [&](const MaxPool2D& m) -> Shape {
            if (sample.size() != 3 || m.window == 0 || sample[1] < m.window ||
                sample[2] < m.window)
              throw ShapeError("MaxPool2D(" + std::to_string(m.window) +
                               ") cannot pool " + shape_str(sample));
            return {sample[0], sample[1] / m.window, sample[2] / m.window};
          },
          [&](const ReLU&) -> Shape { return sample; },
          [&](const Flatten&) -> Shape { return {shape_numel(sample)}; },
      },
      kind);
}

std::vector<Shape> param_shapes(const LayerKind& kind) {
  if (const auto* d = std::get_if<Dense>(&kind)) return {{d->in, d->out}, {d->out}};
  if (const auto* c = std::get_if<Conv2D>(&kind))
    return {{c->out_ch, c->in_ch, c->kernel, c->kernel}, {c->out_ch}};
  return {};
}

template <typename T>
Layer<T> make_layer(const LayerKind& kind) {
  Layer<T> layer{kind, {}};
  for (auto& s : param_shapes(kind)) layer.params.emplace_back(s);
  return layer;
}

template <typename T>
Layer<T> make_layer(const LayerKind& kind, Rng& rng) {
  Layer<T> layer = make_layer<T>(kind);
  if (layer.params.empty()) return layer;
  std::size_t fan_in = 0;
  if (const auto* d = std::get_if<Dense>(&kind)) fan_in = d->in;
  if (const auto* c = std::get_if<Conv2D>(&kind)) fan_in = c->in_ch * c->kernel * c->kernel;
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (auto& v : layer.params[0].data()) v = static_cast<T>(rng.uniform(-bound, bound));
  return layer;
}

template <typename T>
BasicTensor<T> layer_forward(const Layer<T>& layer, const BasicTensor<T>& input) {
  const std::size_t n = batch_of(input.shape());
  const Shape os = infer_output_shape(layer.kind, sample_of(input.shape()));
  return std::visit(
      Overloaded{
          [&](const Dense& d) { return dense_forward(d, layer, input); },
          [&](const Conv2D& c) { return conv_forward(c, layer, input); },
          [&](const MaxPool2D& m) { return pool_forward(m, input); },
          [&](const ReLU&) {
            BasicTensor<T> out = input;
            for (auto& v : out.data()) v = v > T{0} ? v : T{0};
            return out;
          },
          [&](const Flatten&) { return input.reshaped(with_batch(n, os)); },
      },
      layer.kind);
}

template <typename T>
LayerGrad<T> layer_backward(const Layer<T>& layer, const BasicTensor<T>& input,
                            const BasicTensor<T>& grad_output, bool need_input_grad) {
  const std::size_t n = batch_of(input.shape());
  const Shape os = with_batch(n, infer_output_shape(layer.kind, sample_of(input.shape())));
  if (grad_output.shape() != os)
    throw ShapeError("gradient shape " + shape_str(grad_output.shape()) +
                     " does not match layer output " + shape_str(os));
  return std::visit(
      Overloaded{
          [&](const Dense& d) {
            return dense_backward(d, layer, input, grad_output, need_input_grad);
          },
          [&](const Conv2D& c) {
            return conv_backward(c, layer, input, grad_output, need_input_grad);
          },
          [&](const MaxPool2D& m) {
            LayerGrad<T> r;
            if (need_input_grad) r.input = pool_backward(m, input, grad_output);
            return r;
          },
          [&](const ReLU&) {
            LayerGrad<T> r;
            if (need_input_grad) {
              r.input = grad_output;
              const auto in = input.data();
              auto g = r.input.data();
              for (std::size_t i = 0; i < g.size(); ++i)
                if (!(in[i] > T{0})) g[i] = T{0};
            }
            return r;
          },
          [&](const Flatten&) {
            LayerGrad<T> r;
            if (need_input_grad) r.input = grad_output.reshaped(input.shape());
            return r;
          },
      },
      layer.kind);
}

template Layer<float> make_layer<float>(const LayerKind&);
template Layer<double> make_layer<double>(const LayerKind&);
template Layer<float> make_layer<float>(const LayerKind&, Rng&);
template Layer<double> make_layer<double>(const LayerKind&, Rng&);
template Tensor layer_forward<float>(const Layer<float>&, const Tensor&);
template Tensor64 layer_forward<double>(const Layer<double>&, const Tensor64&);
template LayerGrad<float> layer_backward<float>(const Layer<float>&, const Tensor&,
                                                const Tensor&, bool);
template LayerGrad<double> layer_backward<double>(const Layer<double>&, const Tensor64&,
                                                  const Tensor64&, bool);

}  // namespace splitbench::nn
