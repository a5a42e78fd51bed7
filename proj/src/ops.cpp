#include "hsmgnn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <string>

#include "hsmgnn/error.hpp"
#include "hsmgnn/kernels.hpp"

namespace hsmgnn::ops {

using detail::BackwardFn;
using detail::make_result;
using detail::Node;
using detail::wants_grad;

namespace {

const kernels::KernelTable& K() { return kernels::active(); }

Shape broadcast_shapes(const Shape& a, const Shape& b, const char* op) {
  const std::size_t r = std::max(a.size(), b.size());
  Shape out(r);
  for (std::size_t i = 0; i < r; ++i) {
    const std::size_t da = i < r - a.size() ? 1 : a[i - (r - a.size())];
    const std::size_t db = i < r - b.size() ? 1 : b[i - (r - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw ShapeError(std::string(op) + ": shapes " + shape_to_string(a) +
                       " and " + shape_to_string(b) + " are not broadcastable");
    }
    out[i] = std::max(da, db);
  }
  return out;
}

// Element strides of `in` viewed against broadcast shape `out`; stretched
// dimensions get stride 0.
std::vector<std::size_t> broadcast_strides(const Shape& in, const Shape& out) {
  std::vector<std::size_t> strides(out.size(), 0);
  std::size_t stride = 1;
  for (std::size_t k = 0; k < in.size(); ++k) {
    const std::size_t src = in.size() - 1 - k;
    const std::size_t dst = out.size() - 1 - k;
    strides[dst] = in[src] == 1 ? 0 : stride;
    stride *= in[src];
  }
  return strides;
}

// Calls f(flat_out, offset_a, offset_b) for every element of `out`.
template <class F>
void for_each_broadcast(const Shape& out, const std::vector<std::size_t>& sa,
                        const std::vector<std::size_t>& sb, F&& f) {
  const std::size_t n = shape_numel(out);
  const std::size_t r = out.size();
  std::vector<std::size_t> idx(r, 0);
  std::size_t ia = 0;
  std::size_t ib = 0;
  for (std::size_t k = 0; k < n; ++k) {
    f(k, ia, ib);
    for (std::size_t d = r; d-- > 0;) {
      ++idx[d];
      ia += sa[d];
      ib += sb[d];
      if (idx[d] < out[d]) break;
      ia -= sa[d] * out[d];
      ib -= sb[d] * out[d];
      idx[d] = 0;
    }
  }
}

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.begin(), small.end(), big.end() - small.size());
}

enum class BinaryKind { kAdd, kSub, kMul };

Tensor binary(const Tensor& a, const Tensor& b, BinaryKind kind) {
  const char* name = kind == BinaryKind::kAdd   ? "add"
                     : kind == BinaryKind::kSub ? "sub"
                                                : "mul";
  const Shape out_shape = broadcast_shapes(a.shape(), b.shape(), name);
  const std::size_t n = shape_numel(out_shape);
  std::vector<double> out(n);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  const auto apply = [kind](double x, double y) {
    switch (kind) {
      case BinaryKind::kAdd: return x + y;
      case BinaryKind::kSub: return x - y;
      case BinaryKind::kMul: return x * y;
    }
    return 0.0;
  };

  const bool same = a.shape() == b.shape();
  const bool b_suffix = !same && a.shape() == out_shape && is_suffix(b.shape(), out_shape);
  if (same && kind == BinaryKind::kAdd) {
    K().add(pa, pb, out.data(), n);
  } else if (same && kind == BinaryKind::kMul) {
    K().mul(pa, pb, out.data(), n);
  } else if (same) {
    for (std::size_t i = 0; i < n; ++i) out[i] = pa[i] - pb[i];
  } else if (b_suffix && kind != BinaryKind::kSub) {
    const std::size_t inner = b.numel();
    for (std::size_t o = 0; o < n; o += inner) {
      if (kind == BinaryKind::kAdd) {
        K().add(pa + o, pb, out.data() + o, inner);
      } else {
        K().mul(pa + o, pb, out.data() + o, inner);
      }
    }
  } else {
    const auto sa = broadcast_strides(a.shape(), out_shape);
    const auto sb = broadcast_strides(b.shape(), out_shape);
    for_each_broadcast(out_shape, sa, sb, [&](std::size_t k, std::size_t ia, std::size_t ib) {
      out[k] = apply(pa[ia], pb[ib]);
    });
  }

  BackwardFn bw = [kind, out_shape, same](Node& self) {
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    const double* g = self.grad.data();
    const std::size_t n = self.grad.size();
    const double sign_b = kind == BinaryKind::kSub ? -1.0 : 1.0;
    if (same) {
      if (kind == BinaryKind::kMul) {
        if (na.requires_grad) {
          auto& ga = na.ensure_grad();
          for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * nb.data[i];
        }
        if (nb.requires_grad) {
          auto& gb = nb.ensure_grad();
          for (std::size_t i = 0; i < n; ++i) gb[i] += g[i] * na.data[i];
        }
      } else {
        if (na.requires_grad) K().axpy(1.0, g, na.ensure_grad().data(), n);
        if (nb.requires_grad) K().axpy(sign_b, g, nb.ensure_grad().data(), n);
      }
      return;
    }
    const auto sa = broadcast_strides(na.shape, out_shape);
    const auto sb = broadcast_strides(nb.shape, out_shape);
    double* ga = na.requires_grad ? na.ensure_grad().data() : nullptr;
    double* gb = nb.requires_grad ? nb.ensure_grad().data() : nullptr;
    const double* da = na.data.data();
    const double* db = nb.data.data();
    for_each_broadcast(out_shape, sa, sb, [&](std::size_t k, std::size_t ia, std::size_t ib) {
      if (kind == BinaryKind::kMul) {
        if (ga) ga[ia] += g[k] * db[ib];
        if (gb) gb[ib] += g[k] * da[ia];
      } else {
        if (ga) ga[ia] += g[k];
        if (gb) gb[ib] += sign_b * g[k];
      }
    });
  };
  return make_result(out_shape, std::move(out), {a, b}, std::move(bw));
}

// Splits `shape` around `axis` into (outer, dim, inner) extents.
struct AxisSplit {
  std::size_t outer = 1;
  std::size_t dim = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.dim = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() < 2 || sb.size() < 2 || sa[sa.size() - 1] != sb[sb.size() - 2]) {
    throw ShapeError("matmul: incompatible shapes " + shape_to_string(sa) +
                     " and " + shape_to_string(sb));
  }
  const std::size_t p = sa[sa.size() - 2];
  const std::size_t q = sa[sa.size() - 1];
  const std::size_t r = sb[sb.size() - 1];
  const Shape batch_a(sa.begin(), sa.end() - 2);
  const Shape batch_b(sb.begin(), sb.end() - 2);
  Shape batch_out;
  try {
    batch_out = broadcast_shapes(batch_a, batch_b, "matmul");
  } catch (const ShapeError&) {
    throw ShapeError("matmul: batch dimensions of " + shape_to_string(sa) +
                     " and " + shape_to_string(sb) + " are not broadcastable");
  }
  const std::size_t batches = shape_numel(batch_out);
  // Matrix offsets (in matrices, not elements) for every output batch.
  auto offsets = std::make_shared<std::vector<std::pair<std::size_t, std::size_t>>>();
  offsets->reserve(batches);
  for_each_broadcast(batch_out, broadcast_strides(batch_a, batch_out),
                     broadcast_strides(batch_b, batch_out),
                     [&](std::size_t, std::size_t ia, std::size_t ib) {
                       offsets->emplace_back(ia, ib);
                     });

  std::vector<double> out(batches * p * r);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  for (std::size_t k = 0; k < batches; ++k) {
    const auto [ia, ib] = (*offsets)[k];
    K().gemm_nn(pa + ia * p * q, pb + ib * q * r, out.data() + k * p * r, p, q, r, false);
  }

  Shape out_shape = batch_out;
  out_shape.push_back(p);
  out_shape.push_back(r);
  BackwardFn bw = [offsets, p, q, r](Node& self) {
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    double* ga = na.requires_grad ? na.ensure_grad().data() : nullptr;
    double* gb = nb.requires_grad ? nb.ensure_grad().data() : nullptr;
    for (std::size_t k = 0; k < offsets->size(); ++k) {
      const auto [ia, ib] = (*offsets)[k];
      const double* g = self.grad.data() + k * p * r;
      if (ga) K().gemm_nt(g, nb.data.data() + ib * q * r, ga + ia * p * q, p, r, q, true);
      if (gb) K().gemm_tn(na.data.data() + ia * p * q, g, gb + ib * q * r, q, p, r, true);
    }
  };
  return make_result(std::move(out_shape), std::move(out), {a, b}, std::move(bw));
}

Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (x.rank() != 3 || weight.rank() != 3) {
    throw ShapeError("conv1d: expected x [BxCinxLen] and weight [CoutxCinxK], got " +
                     shape_to_string(x.shape()) + " and " + shape_to_string(weight.shape()));
  }
  const std::size_t batch = x.dim(0);
  const std::size_t cin = x.dim(1);
  const std::size_t len = x.dim(2);
  const std::size_t cout = weight.dim(0);
  const std::size_t ksize = weight.dim(2);
  if (ksize % 2 == 0) {
    throw ConfigError("conv1d: kernel size must be odd for 'same' padding, got " +
                      std::to_string(ksize));
  }
  if (weight.dim(1) != cin) {
    throw ShapeError("conv1d: input channels of " + shape_to_string(x.shape()) +
                     " do not match weight " + shape_to_string(weight.shape()));
  }
  if (bias.defined() && bias.shape() != Shape{cout}) {
    throw ShapeError("conv1d: bias shape " + shape_to_string(bias.shape()) +
                     " does not match output channels " + std::to_string(cout));
  }
  const std::size_t pad = ksize / 2;
  const std::size_t rows = cin * ksize;
  auto cols = std::make_shared<std::vector<double>>(batch * rows * len, 0.0);
  const double* px = x.data().data();
  for (std::size_t b = 0; b < batch; ++b) {
    double* col = cols->data() + b * rows * len;
    for (std::size_t c = 0; c < cin; ++c) {
      const double* xc = px + (b * cin + c) * len;
      for (std::size_t k = 0; k < ksize; ++k) {
        double* dst = col + (c * ksize + k) * len;
        for (std::size_t t = 0; t < len; ++t) {
          const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + k) -
                                     static_cast<std::ptrdiff_t>(pad);
          if (src >= 0 && src < static_cast<std::ptrdiff_t>(len)) dst[t] = xc[src];
        }
      }
    }
  }
  std::vector<double> out(batch * cout * len);
  const double* pw = weight.data().data();
  for (std::size_t b = 0; b < batch; ++b) {
    double* ob = out.data() + b * cout * len;
    K().gemm_nn(pw, cols->data() + b * rows * len, ob, cout, rows, len, false);
    if (bias.defined()) {
      for (std::size_t c = 0; c < cout; ++c) {
        const double bc = bias.data()[c];
        for (std::size_t t = 0; t < len; ++t) ob[c * len + t] += bc;
      }
    }
  }

  std::vector<Tensor> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  BackwardFn bw = [cols, batch, cin, len, cout, ksize, pad, rows](Node& self) {
    Node& nx = *self.inputs[0];
    Node& nw = *self.inputs[1];
    Node* nbias = self.inputs.size() > 2 ? self.inputs[2].get() : nullptr;
    std::vector<double> gcol(rows * len);
    for (std::size_t b = 0; b < batch; ++b) {
      const double* g = self.grad.data() + b * cout * len;
      if (nw.requires_grad) {
        K().gemm_nt(g, cols->data() + b * rows * len, nw.ensure_grad().data(), cout, len,
                    rows, true);
      }
      if (nbias && nbias->requires_grad) {
        auto& gbias = nbias->ensure_grad();
        for (std::size_t c = 0; c < cout; ++c) {
          double acc = 0.0;
          for (std::size_t t = 0; t < len; ++t) acc += g[c * len + t];
          gbias[c] += acc;
        }
      }
      if (nx.requires_grad) {
        K().gemm_tn(nw.data.data(), g, gcol.data(), rows, cout, len, false);
        double* gx = nx.ensure_grad().data() + b * cin * len;
        for (std::size_t c = 0; c < cin; ++c) {
          for (std::size_t k = 0; k < ksize; ++k) {
            const double* src = gcol.data() + (c * ksize + k) * len;
            for (std::size_t t = 0; t < len; ++t) {
              const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(t + k) -
                                         static_cast<std::ptrdiff_t>(pad);
              if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(len)) gx[c * len + pos] += src[t];
            }
          }
        }
      }
    }
  };
  return make_result({batch, cout, len}, std::move(out), std::move(inputs), std::move(bw));
}

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::kAdd); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::kSub); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::kMul); }

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.numel());
  K().scale(factor, a.data().data(), out.data(), out.size());
  BackwardFn bw = [factor](Node& self) {
    K().axpy(factor, self.grad.data(), self.inputs[0]->ensure_grad().data(), self.grad.size());
  };
  return make_result(a.shape(), std::move(out), {a}, std::move(bw));
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.numel());
  K().relu(x.data().data(), out.data(), out.size());
  BackwardFn bw = [](Node& self) {
    Node& in = *self.inputs[0];
    K().relu_backward(in.data.data(), self.grad.data(), in.ensure_grad().data(),
                      self.grad.size());
  };
  return make_result(x.shape(), std::move(out), {x}, std::move(bw));
}

Tensor sigmoid(const Tensor& x) {
  std::vector<double> out(x.numel());
  const auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = in[i];
    if (v >= 0.0) {
      out[i] = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      out[i] = e / (1.0 + e);
    }
  }
  BackwardFn bw = [](Node& self) {
    auto& g = self.inputs[0]->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double s = self.data[i];
      g[i] += self.grad[i] * s * (1.0 - s);
    }
  };
  return make_result(x.shape(), std::move(out), {x}, std::move(bw));
}

Tensor softmax_rows(const Tensor& x) {
  if (x.rank() == 0) throw ShapeError("softmax_rows: scalar input");
  const std::size_t width = x.shape().back();
  const std::size_t rows = x.numel() / width;
  std::vector<double> out(x.numel());
  const double* in = x.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = in + r * width;
    double* yr = out.data() + r * width;
    const double mx = *std::max_element(xr, xr + width);
    double total = 0.0;
    for (std::size_t j = 0; j < width; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      total += yr[j];
    }
    const double inv = 1.0 / total;
    for (std::size_t j = 0; j < width; ++j) yr[j] *= inv;
  }
  BackwardFn bw = [width, rows](Node& self) {
    auto& gx = self.inputs[0]->ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* s = self.data.data() + r * width;
      const double* g = self.grad.data() + r * width;
      const double inner = K().dot(s, g, width);
      for (std::size_t j = 0; j < width; ++j) gx[r * width + j] += s[j] * (g[j] - inner);
    }
  };
  return make_result(x.shape(), std::move(out), {x}, std::move(bw));
}

Tensor permute(const Tensor& x, const std::vector<std::size_t>& axes) {
  const Shape& in_shape = x.shape();
  const std::size_t r = in_shape.size();
  std::vector<bool> seen(r, false);
  if (axes.size() != r) {
    throw ShapeError("permute: axis list size does not match rank of " +
                     shape_to_string(in_shape));
  }
  for (std::size_t ax : axes) {
    if (ax >= r || seen[ax]) {
      throw ShapeError("permute: invalid axis order for " + shape_to_string(in_shape));
    }
    seen[ax] = true;
  }
  std::vector<std::size_t> in_strides(r, 1);
  for (std::size_t d = r; d-- > 1;) in_strides[d - 1] = in_strides[d] * in_shape[d];
  Shape out_shape(r);
  std::vector<std::size_t> gather(r);
  for (std::size_t i = 0; i < r; ++i) {
    out_shape[i] = in_shape[axes[i]];
    gather[i] = in_strides[axes[i]];
  }
  // Flat source index for each destination element.
  auto index = std::make_shared<std::vector<std::size_t>>(x.numel());
  const std::vector<std::size_t> zero(r, 0);
  for_each_broadcast(out_shape, gather, zero,
                     [&](std::size_t k, std::size_t src, std::size_t) { (*index)[k] = src; });
  std::vector<double> out(x.numel());
  const double* in = x.data().data();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = in[(*index)[k]];
  BackwardFn bw = [index](Node& self) {
    auto& g = self.inputs[0]->ensure_grad();
    for (std::size_t k = 0; k < index->size(); ++k) g[(*index)[k]] += self.grad[k];
  };
  return make_result(std::move(out_shape), std::move(out), {x}, std::move(bw));
}

Tensor transpose(const Tensor& x) {
  if (x.rank() < 2) {
    throw ShapeError("transpose: need rank >= 2, got " + shape_to_string(x.shape()));
  }
  std::vector<std::size_t> axes(x.rank());
  std::iota(axes.begin(), axes.end(), 0);
  std::swap(axes[axes.size() - 1], axes[axes.size() - 2]);
  return permute(x, axes);
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: cannot view " + shape_to_string(x.shape()) + " as " +
                     shape_to_string(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  BackwardFn bw = [](Node& self) {
    K().axpy(1.0, self.grad.data(), self.inputs[0]->ensure_grad().data(), self.grad.size());
  };
  return make_result(std::move(shape), std::move(out), {x}, std::move(bw));
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) {
    throw ShapeError("concat: axis " + std::to_string(axis) + " out of range for " +
                     shape_to_string(first));
  }
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const Tensor& t : parts) {
    const Shape& s = t.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) {
      if (i != axis && s[i] != first[i]) ok = false;
    }
    if (!ok) {
      throw ShapeError("concat: shape " + shape_to_string(s) + " incompatible with " +
                       shape_to_string(first) + " along axis " + std::to_string(axis));
    }
    out_shape[axis] += s[axis];
  }
  const AxisSplit outer_split = split_axis(first, axis);
  const std::size_t outer = outer_split.outer;
  const std::size_t inner = outer_split.inner;
  auto chunk = std::make_shared<std::vector<std::size_t>>();
  for (const Tensor& t : parts) chunk->push_back(t.shape()[axis] * inner);
  const std::size_t row = out_shape[axis] * inner;
  std::vector<double> out(outer * row);
  std::size_t col = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const double* src = parts[p].data().data();
    const std::size_t c = (*chunk)[p];
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy(src + o * c, src + (o + 1) * c, out.data() + o * row + col);
    }
    col += c;
  }
  BackwardFn bw = [chunk, outer, row](Node& self) {
    std::size_t col = 0;
    for (std::size_t p = 0; p < self.inputs.size(); ++p) {
      const std::size_t c = (*chunk)[p];
      if (self.inputs[p]->requires_grad) {
        double* g = self.inputs[p]->ensure_grad().data();
        for (std::size_t o = 0; o < outer; ++o) {
          K().axpy(1.0, self.grad.data() + o * row + col, g + o * c, c);
        }
      }
      col += c;
    }
  };
  return make_result(std::move(out_shape), std::move(out), parts, std::move(bw));
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length) {
  if (axis >= x.rank() || length == 0 || start + length > x.dim(axis)) {
    throw ShapeError("slice: range [" + std::to_string(start) + ", " +
                     std::to_string(start + length) + ") on axis " + std::to_string(axis) +
                     " invalid for " + shape_to_string(x.shape()));
  }
  const AxisSplit s = split_axis(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape[axis] = length;
  std::vector<double> out(s.outer * length * s.inner);
  const double* in = x.data().data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    const double* src = in + (o * s.dim + start) * s.inner;
    std::copy(src, src + length * s.inner, out.data() + o * length * s.inner);
  }
  BackwardFn bw = [s, start, length](Node& self) {
    double* g = self.inputs[0]->ensure_grad().data();
    const std::size_t c = length * s.inner;
    for (std::size_t o = 0; o < s.outer; ++o) {
      K().axpy(1.0, self.grad.data() + o * c, g + (o * s.dim + start) * s.inner, c);
    }
  };
  return make_result(std::move(out_shape), std::move(out), {x}, std::move(bw));
}

Tensor sum_axis(const Tensor& x, std::size_t axis, bool keepdim) {
  if (axis >= x.rank()) {
    throw ShapeError("sum_axis: axis " + std::to_string(axis) + " out of range for " +
                     shape_to_string(x.shape()));
  }
  const AxisSplit s = split_axis(x.shape(), axis);
  Shape out_shape = x.shape();
  if (keepdim) {
    out_shape[axis] = 1;
  } else {
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  }
  std::vector<double> out(s.outer * s.inner, 0.0);
  const double* in = x.data().data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t d = 0; d < s.dim; ++d) {
      K().axpy(1.0, in + (o * s.dim + d) * s.inner, out.data() + o * s.inner, s.inner);
    }
  }
  BackwardFn bw = [s](Node& self) {
    double* g = self.inputs[0]->ensure_grad().data();
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t d = 0; d < s.dim; ++d) {
        K().axpy(1.0, self.grad.data() + o * s.inner, g + (o * s.dim + d) * s.inner, s.inner);
      }
    }
  };
  return make_result(std::move(out_shape), std::move(out), {x}, std::move(bw));
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  BackwardFn bw = [](Node& self) {
    const double g = self.grad[0];
    for (double& v : self.inputs[0]->ensure_grad()) v += g;
  };
  return make_result({}, {total}, {x}, std::move(bw));
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape()) {
    throw ShapeError("mse_loss: prediction " + shape_to_string(pred.shape()) +
                     " and target " + shape_to_string(target.shape()) + " differ");
  }
  const std::size_t n = pred.numel();
  const auto p = pred.data();
  const auto t = target.data();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = p[i] - t[i];
    total += d * d;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  BackwardFn bw = [inv_n](Node& self) {
    Node& np = *self.inputs[0];
    Node& nt = *self.inputs[1];
    const double g = 2.0 * inv_n * self.grad[0];
    for (std::size_t i = 0; i < np.data.size(); ++i) {
      const double d = g * (np.data[i] - nt.data[i]);
      if (np.requires_grad) np.ensure_grad()[i] += d;
      if (nt.requires_grad) nt.ensure_grad()[i] -= d;
    }
  };
  return make_result({}, {total * inv_n}, {pred, target}, std::move(bw));
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size()) {
    throw ShapeError("cross_entropy: logits " + shape_to_string(logits.shape()) +
                     " do not match " + std::to_string(labels.size()) + " labels");
  }
  const std::size_t batch = logits.dim(0);
  const std::size_t classes = logits.dim(1);
  auto probs = std::make_shared<std::vector<double>>(logits.numel());
  auto label_copy = std::make_shared<std::vector<int>>(labels.begin(), labels.end());
  const double* in = logits.data().data();
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const int y = labels[b];
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw ContractError("cross_entropy: label " + std::to_string(y) + " outside [0, " +
                          std::to_string(classes) + ")");
    }
    const double* row = in + b * classes;
    const double mx = *std::max_element(row, row + classes);
    double z = 0.0;
    for (std::size_t k = 0; k < classes; ++k) z += std::exp(row[k] - mx);
    const double log_z = mx + std::log(z);
    for (std::size_t k = 0; k < classes; ++k) {
      (*probs)[b * classes + k] = std::exp(row[k] - log_z);
    }
    total += log_z - row[y];
  }
  const double inv_b = 1.0 / static_cast<double>(batch);
  BackwardFn bw = [probs, label_copy, classes, inv_b](Node& self) {
    auto& g = self.inputs[0]->ensure_grad();
    const double scale_g = self.grad[0] * inv_b;
    for (std::size_t b = 0; b < label_copy->size(); ++b) {
      for (std::size_t k = 0; k < classes; ++k) {
        const double onehot = static_cast<int>(k) == (*label_copy)[b] ? 1.0 : 0.0;
        g[b * classes + k] += scale_g * ((*probs)[b * classes + k] - onehot);
      }
    }
  };
  return make_result({}, {total * inv_b}, {logits}, std::move(bw));
}

}  // namespace hsmgnn::ops

namespace hsmgnn::ops {

Tensor gram(const Tensor& x) {
  if (x.rank() < 2) throw ShapeError("gram: expected [...xNxK], got " + shape_to_string(x.shape()));
  const Shape& s = x.shape();
  const std::size_t n = s[s.size() - 2];
  const std::size_t k = s[s.size() - 1];
  const std::size_t batch = x.numel() / (n * k);
  std::vector<double> out(batch * n * n);
  const double* in = x.data().data();
  for (std::size_t b = 0; b < batch; ++b) {
    const double* xb = in + b * n * k;
    double* gb = out.data() + b * n * n;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i; j < n; ++j) {
        const double v = K().dot(xb + i * k, xb + j * k, k);
        gb[i * n + j] = v;
        gb[j * n + i] = v;
      }
    }
  }
  Shape out_shape(s.begin(), s.end() - 1);
  out_shape.push_back(n);
  return make_result(std::move(out_shape), std::move(out), {x}, [batch, n, k](Node& self) {
    Node& in_node = *self.inputs[0];
    auto& gx = in_node.ensure_grad();
    std::vector<double> sym(n * n);
    for (std::size_t b = 0; b < batch; ++b) {
      const double* g = self.grad.data() + b * n * n;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) sym[i * n + j] = g[i * n + j] + g[j * n + i];
      }
      K().gemm_nn(sym.data(), in_node.data.data() + b * n * k, gx.data() + b * n * k, n, n, k,
                  true);
    }
  });
}

}  // namespace hsmgnn::ops
