// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <limits>

#include "mgrr/autodiff.hpp"
#include "mgrr/error.hpp"

namespace mgrr {

std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t padding) {
  if (stride == 0) throw DimensionError("stride must be positive");
  const long long span = static_cast<long long>(in) + 2 * static_cast<long long>(padding) - static_cast<long long>(kernel);
  if (span < 0) {
    throw DimensionError("kernel " + std::to_string(kernel) + " larger than padded input " +
                         std::to_string(in + 2 * padding));
  }
  return static_cast<std::size_t>(span) / stride + 1;
}

std::size_t deconv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t padding,
                              std::size_t output_padding) {
  if (stride == 0) throw DimensionError("stride must be positive");
  if (output_padding >= stride && output_padding > 0) throw DimensionError("output_padding must be < stride");
  const long long out = (static_cast<long long>(in) - 1) * static_cast<long long>(stride) -
                        2 * static_cast<long long>(padding) + static_cast<long long>(kernel) +
                        static_cast<long long>(output_padding);
  if (out <= 0) throw DimensionError("transposed convolution has non-positive output extent");
  return static_cast<std::size_t>(out);
}

namespace ops {
namespace {

Tape& tape_of(Var a) {
  if (!a.valid()) throw ContractError("operation on an empty Var");
  return *a.tape();
}

void require_rank(Var a, std::size_t rank, const char* op) {
  if (a.shape().size() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                         shape_str(a.shape()));
  }
}

void require_same_shape(Var a, Var b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

// Accumulate g into the gradient of `id` when that node needs one.
void accum(Tape& t, std::size_t id, std::span<const double> g) {
  if (!t.requires_grad(id)) return;
  auto dst = t.grad_slot(id);
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a);
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t r = a.shape()[0], k = a.shape()[1], c = b.shape()[1];
  if (b.shape()[0] != k) {
    throw DimensionError("matmul: inner extents differ " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  Tensor out({r, c});
  const auto A = a.value().data();
  const auto B = b.value().data();
  auto O = out.data();
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      if (av == 0.0) continue;
      const double* brow = &B[p * c];
      double* orow = &O[i * c];
      for (std::size_t j = 0; j < c; ++j) orow[j] += av * brow[j];
    }
  }
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(out), {a, b}, [ia, ib, r, k, c](Tape& t, std::span<const double> g) {
    const auto A = t.value(ia).data();
    const auto B = t.value(ib).data();
    if (t.requires_grad(ia)) {
      auto dA = t.grad_slot(ia);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < c; ++j) s += g[i * c + j] * B[p * c + j];
          dA[i * k + p] += s;
        }
    }
    if (t.requires_grad(ib)) {
      auto dB = t.grad_slot(ib);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double av = A[i * k + p];
          if (av == 0.0) continue;
          for (std::size_t j = 0; j < c; ++j) dB[p * c + j] += av * g[i * c + j];
        }
    }
  });
}

Var transpose(Var a) {
  Tape& t = tape_of(a);
  require_rank(a, 2, "transpose");
  const std::size_t r = a.shape()[0], c = a.shape()[1];
  Tensor out({c, r});
  const auto A = a.value().data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = A[i * c + j];
  const std::size_t ia = a.id();
  return t.record(std::move(out), {a}, [ia, r, c](Tape& t, std::span<const double> g) {
    auto d = t.grad_slot(ia);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) d[i * c + j] += g[j * r + i];
  });
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a);
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  const auto B = b.value().data();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += B[i];
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(out), {a, b}, [ia, ib](Tape& t, std::span<const double> g) {
    accum(t, ia, g);
    accum(t, ib, g);
  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a);
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  const auto B = b.value().data();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= B[i];
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(out), {a, b}, [ia, ib](Tape& t, std::span<const double> g) {
    accum(t, ia, g);
    if (t.requires_grad(ib)) {
      auto d = t.grad_slot(ib);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  Tape& t = tape_of(a);
  require_same_shape(a, b, "mul");
  Tensor out = a.value();
  const auto B = b.value().data();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= B[i];
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(out), {a, b}, [ia, ib](Tape& t, std::span<const double> g) {
    const auto A = t.value(ia).data();
    const auto B = t.value(ib).data();
    if (t.requires_grad(ia)) {
      auto d = t.grad_slot(ia);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * B[i];
    }
    if (t.requires_grad(ib)) {
      auto d = t.grad_slot(ib);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * A[i];
    }
  });
}

Var scale(Var a, double s) {
  Tape& t = tape_of(a);
  Tensor out = a.value();
  for (auto& v : out.storage()) v *= s;
  const std::size_t ia = a.id();
  return t.record(std::move(out), {a}, [ia, s](Tape& t, std::span<const double> g) {
    auto d = t.grad_slot(ia);
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += s * g[i];
  });
}

Var add_scalar(Var a, double s) {
  Tape& t = tape_of(a);
  Tensor out = a.value();
  for (auto& v : out.storage()) v += s;
  const std::size_t ia = a.id();
  return t.record(std::move(out), {a}, [ia](Tape& t, std::span<const double> g) { accum(t, ia, g); });
}

Var add_row_bias(Var a, Var bias) {
  Tape& t = tape_of(a);
  require_rank(a, 2, "add_row_bias");
  const std::size_t r = a.shape()[0], c = a.shape()[1];
  if (bias.numel() != c) throw DimensionError("add_row_bias: bias length must equal column count");
  Tensor out = a.value();
  const auto B = bias.value().data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] += B[j];
  const std::size_t ia = a.id(), ib = bias.id();
  return t.record(std::move(out), {a, bias}, [ia, ib, r, c](Tape& t, std::span<const double> g) {
    accum(t, ia, g);
    if (t.requires_grad(ib)) {
      auto d = t.grad_slot(ib);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) d[j] += g[i * c + j];
    }
  });
}

Var add_channel_bias(Var a, Var bias) {
  Tape& t = tape_of(a);
  require_rank(a, 3, "add_channel_bias");
  const std::size_t c = a.shape()[0], hw = a.shape()[1] * a.shape()[2];
  if (bias.numel() != c) throw DimensionError("add_channel_bias: bias length must equal channel count");
  Tensor out = a.value();
  const auto B = bias.value().data();
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < hw; ++i) out[ch * hw + i] += B[ch];
  const std::size_t ia = a.id(), ib = bias.id();
  return t.record(std::move(out), {a, bias}, [ia, ib, c, hw](Tape& t, std::span<const double> g) {
    accum(t, ia, g);
    if (t.requires_grad(ib)) {
      auto d = t.grad_slot(ib);
      for (std::size_t ch = 0; ch < c; ++ch) {
        double s = 0.0;
        for (std::size_t i = 0; i < hw; ++i) s += g[ch * hw + i];
        d[ch] += s;
      }
    }
  });
}


Var sigmoid(Var a) {
  Tape& t = tape_of(a);
  Tensor out = a.value();
  for (auto& v : out.storage()) v = sigmoid_scalar(v);
  const std::size_t ia = a.id(), io = t.size();
  return t.record(std::move(out), {a}, [ia, io](Tape& t, std::span<const double> g) {
    const auto S = t.value(io).data();
    auto d = t.grad_slot(ia);
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * S[i] * (1.0 - S[i]);
  });
}

Var relu(Var a) {
  Tape& t = tape_of(a);
  Tensor out = a.value();
  for (auto& v : out.storage()) v = v > 0.0 ? v : 0.0;
  const std::size_t ia = a.id();
  return t.record(std::move(out), {a}, [ia](Tape& t, std::span<const double> g) {
    const auto X = t.value(ia).data();
    auto d = t.grad_slot(ia);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (X[i] > 0.0) d[i] += g[i];
  });
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no operands");
  Tape& t = tape_of(parts.front());
  const Shape& base = parts.front().shape();
  if (axis >= base.size()) throw DimensionError("concat: axis " + std::to_string(axis) + " out of range");
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= base[i];
  for (std::size_t i = axis + 1; i < base.size(); ++i) inner *= base[i];
  std::vector<std::size_t> widths;  // axis extent * inner, per part
  std::size_t total_axis = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != base.size()) throw DimensionError("concat: rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i != axis && s[i] != base[i]) {
        throw DimensionError("concat: extents differ off-axis " + shape_str(s) + " vs " + shape_str(base));
      }
    }
    total_axis += s[axis];
    widths.push_back(s[axis] * inner);
  }
  Shape out_shape = base;
  out_shape[axis] = total_axis;
  Tensor out(out_shape);
  const std::size_t row = total_axis * inner;
  std::size_t offset = 0;
  std::vector<std::size_t> ids;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto src = parts[k].value().data();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(&src[o * widths[k]], widths[k], &out[o * row + offset]);
    offset += widths[k];
    ids.push_back(parts[k].id());
  }
  return t.record(std::move(out), parts, [ids, widths, outer, row](Tape& t, std::span<const double> g) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (t.requires_grad(ids[k])) {
        auto d = t.grad_slot(ids[k]);
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t i = 0; i < widths[k]; ++i) d[o * widths[k] + i] += g[o * row + offset + i];
      }
      offset += widths[k];
    }
  });
}

Var reshape(Var a, Shape shape) {
  Tape& t = tape_of(a);
  Tensor out = a.value().reshaped(std::move(shape));
  const std::size_t ia = a.id();
  return t.record(std::move(out), {a}, [ia](Tape& t, std::span<const double> g) { accum(t, ia, g); });
}

Var row(Var a, std::size_t i) {
  Tape& t = tape_of(a);
  require_rank(a, 2, "row");
  const std::size_t r = a.shape()[0], c = a.shape()[1];
  if (i >= r) throw DimensionError("row: index " + std::to_string(i) + " out of range");
  const auto A = a.value().data();
  Tensor out({c}, std::vector<double>(A.begin() + i * c, A.begin() + (i + 1) * c));
  const std::size_t ia = a.id();
  return t.record(std::move(out), {a}, [ia, i, c](Tape& t, std::span<const double> g) {
    auto d = t.grad_slot(ia);
    for (std::size_t j = 0; j < c; ++j) d[i * c + j] += g[j];
  });
}

Var stack_rows(const std::vector<Var>& rows) {
  if (rows.empty()) throw DimensionError("stack_rows: no operands");
  const std::size_t k = rows.front().numel();
  std::vector<Var> flat;
  flat.reserve(rows.size());
  for (const auto& r : rows) {
    if (r.numel() != k) throw DimensionError("stack_rows: rows differ in length");
    flat.push_back(r.shape().size() == 2 && r.shape()[0] == 1 ? r : reshape(r, {1, k}));
  }
  return concat(flat, 0);
}

Var softmax_rows(Var a, const std::vector<unsigned char>* mask) {
  Tape& t = tape_of(a);
  require_rank(a, 2, "softmax_rows");
  const std::size_t r = a.shape()[0], c = a.shape()[1];
  if (mask && mask->size() != r * c) throw DimensionError("softmax_rows: mask size mismatch");
  Tensor out({r, c});
  const auto A = a.value().data();
  for (std::size_t i = 0; i < r; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j)
      if (!mask || (*mask)[i * c + j]) mx = std::max(mx, A[i * c + j]);
    if (!std::isfinite(mx)) throw DimensionError("softmax_rows: row " + std::to_string(i) + " has no allowed entries");
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double e = (!mask || (*mask)[i * c + j]) ? std::exp(A[i * c + j] - mx) : 0.0;
      out[i * c + j] = e;
      s += e;
    }
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] /= s;
  }
  const std::size_t ia = a.id(), io = t.size();
  return t.record(std::move(out), {a}, [ia, io, r, c](Tape& t, std::span<const double> g) {
    const auto S = t.value(io).data();
    auto d = t.grad_slot(ia);
    for (std::size_t i = 0; i < r; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += g[i * c + j] * S[i * c + j];
      for (std::size_t j = 0; j < c; ++j) d[i * c + j] += S[i * c + j] * (g[i * c + j] - dot);
    }
  });
}

Var l2_normalize(Var a, std::size_t axis) {
  Tape& t = tape_of(a);
  const Shape& s = a.shape();
  if (axis >= s.size()) {
    throw DimensionError("l2_normalize: axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t len = s[axis];
  Tensor out = a.value();
  std::vector<double> norms(outer * inner);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t in = 0; in < inner; ++in) {
      double ss = 0.0;
      for (std::size_t k = 0; k < len; ++k) {
        const double v = out[(o * len + k) * inner + in];
        ss += v * v;
      }
      const double nrm = std::sqrt(ss);
      norms[o * inner + in] = nrm;
      if (nrm > 0.0)
        for (std::size_t k = 0; k < len; ++k) out[(o * len + k) * inner + in] /= nrm;
    }
  const std::size_t ia = a.id(), io = t.size();
  return t.record(std::move(out), {a},
                  [ia, io, outer, inner, len, norms = std::move(norms)](Tape& t, std::span<const double> g) {
                    const auto Y = t.value(io).data();
                    auto d = t.grad_slot(ia);
                    // Zero fibres get a zero gradient (the map is not differentiable there).
                    for (std::size_t o = 0; o < outer; ++o)
                      for (std::size_t in = 0; in < inner; ++in) {
                        const double nrm = norms[o * inner + in];
                        if (nrm == 0.0) continue;
                        double dot = 0.0;
                        for (std::size_t k = 0; k < len; ++k) {
                          const std::size_t idx = (o * len + k) * inner + in;
                          dot += g[idx] * Y[idx];
                        }
                        for (std::size_t k = 0; k < len; ++k) {
                          const std::size_t idx = (o * len + k) * inner + in;
                          d[idx] += (g[idx] - Y[idx] * dot) / nrm;
                        }
                      }
                  });
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  const std::size_t ia = a.id();
  return t.record(Tensor::scalar(s), {a}, [ia](Tape& t, std::span<const double> g) {
    auto d = t.grad_slot(ia);
    for (auto& v : d) v += g[0];
  });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

Var global_avg_pool(Var a) {
  require_rank(a, 3, "global_avg_pool");
  const auto& s = a.shape();
  return window_mean(a, 0, s[1] - 1, 0, s[2] - 1);
}

Var window_mean(Var a, std::size_t y0, std::size_t y1, std::size_t x0, std::size_t x1) {
  Tape& t = tape_of(a);
  require_rank(a, 3, "window_mean");
  const std::size_t c = a.shape()[0], h = a.shape()[1], w = a.shape()[2];
  if (y0 > y1 || x0 > x1 || y1 >= h || x1 >= w) throw DimensionError("window_mean: window outside map");
  const double inv = 1.0 / static_cast<double>((y1 - y0 + 1) * (x1 - x0 + 1));
  Tensor out({c});
  const auto A = a.value().data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    double s = 0.0;
    for (std::size_t y = y0; y <= y1; ++y)
      for (std::size_t x = x0; x <= x1; ++x) s += A[(ch * h + y) * w + x];
    out[ch] = s * inv;
  }
  const std::size_t ia = a.id();
  return t.record(std::move(out), {a}, [=](Tape& t, std::span<const double> g) {
    auto d = t.grad_slot(ia);
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t y = y0; y <= y1; ++y)
        for (std::size_t x = x0; x <= x1; ++x) d[(ch * h + y) * w + x] += g[ch] * inv;
  });
}

namespace {

// Range [lo, hi) of a in [0, na) for which b = a * s + k - p lands in [0, nb).
struct TapRange {
  std::size_t lo, hi;
};

TapRange tap_range(std::size_t na, std::size_t nb, std::size_t s, std::size_t k, std::size_t p) {
  const long long need = static_cast<long long>(p) - static_cast<long long>(k);  // a * s >= need
  const long long lim = static_cast<long long>(nb) + need;                         // a * s < lim
  const long long ss = static_cast<long long>(s);
  const long long lo = need <= 0 ? 0 : (need + ss - 1) / ss;
  const long long hi = lim <= 0 ? 0 : std::min<long long>(static_cast<long long>(na), (lim + ss - 1) / ss);
  if (hi <= lo) return {0, 0};
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

}  // namespace

Var conv2d(Var x, Var kernels, std::size_t stride, std::size_t padding) {
  Tape& t = tape_of(x);
  require_rank(x, 3, "conv2d");
  require_rank(kernels, 4, "conv2d");
  const std::size_t c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
  const std::size_t co = kernels.shape()[0], kh = kernels.shape()[2], kw = kernels.shape()[3];
  if (kernels.shape()[1] != c) throw DimensionError("conv2d: kernel input channels do not match input");
  const std::size_t oh = conv_out_extent(h, kh, stride, padding);
  const std::size_t ow = conv_out_extent(w, kw, stride, padding);
  Tensor out({co, oh, ow});
  const auto X = x.value().data();
  const auto K = kernels.value().data();
  // input row = out row * stride + ky - padding
  for (std::size_t o = 0; o < co; ++o)
    for (std::size_t ci = 0; ci < c; ++ci)
      for (std::size_t ky = 0; ky < kh; ++ky) {
        const auto ry = tap_range(oh, h, stride, ky, padding);
        for (std::size_t kx = 0; kx < kw; ++kx) {
          const auto rx = tap_range(ow, w, stride, kx, padding);
          const double kv = K[((o * c + ci) * kh + ky) * kw + kx];
          for (std::size_t oy = ry.lo; oy < ry.hi; ++oy) {
            const double* xrow = X.data() + (ci * h + oy * stride + ky - padding) * w;
            double* orow = &out[(o * oh + oy) * ow];
            for (std::size_t ox = rx.lo; ox < rx.hi; ++ox) orow[ox] += kv * xrow[ox * stride + kx - padding];
          }
        }
      }
  const std::size_t ixid = x.id(), ik = kernels.id();
  return t.record(std::move(out), {x, kernels}, [=](Tape& t, std::span<const double> g) {
    const auto X = t.value(ixid).data();
    const auto K = t.value(ik).data();
    const bool gx = t.requires_grad(ixid), gk = t.requires_grad(ik);
    std::span<double> dX, dK;
    if (gx) dX = t.grad_slot(ixid);
    if (gk) dK = t.grad_slot(ik);
    for (std::size_t o = 0; o < co; ++o)
      for (std::size_t ci = 0; ci < c; ++ci)
        for (std::size_t ky = 0; ky < kh; ++ky) {
          const auto ry = tap_range(oh, h, stride, ky, padding);
          for (std::size_t kx = 0; kx < kw; ++kx) {
            const auto rx = tap_range(ow, w, stride, kx, padding);
            const std::size_t kidx = ((o * c + ci) * kh + ky) * kw + kx;
            const double kv = K[kidx];
            double acc = 0.0;
            for (std::size_t oy = ry.lo; oy < ry.hi; ++oy) {
              const std::size_t xbase = (ci * h + oy * stride + ky - padding) * w;
              const double* grow = &g[(o * oh + oy) * ow];
              if (gx) {
                double* drow = dX.data() + xbase;
                for (std::size_t ox = rx.lo; ox < rx.hi; ++ox) drow[ox * stride + kx - padding] += kv * grow[ox];
              }
              if (gk) {
                const double* xrow = X.data() + xbase;
                for (std::size_t ox = rx.lo; ox < rx.hi; ++ox) acc += xrow[ox * stride + kx - padding] * grow[ox];
              }
            }
            if (gk) dK[kidx] += acc;
          }
        }
  });
}

Var deconv2d(Var x, Var kernels, std::size_t stride, std::size_t padding, std::size_t output_padding) {
  Tape& t = tape_of(x);
  require_rank(x, 3, "deconv2d");
  require_rank(kernels, 4, "deconv2d");
  const std::size_t c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
  const std::size_t co = kernels.shape()[0], kh = kernels.shape()[2], kw = kernels.shape()[3];
  if (kernels.shape()[1] != c) throw DimensionError("deconv2d: kernel input channels do not match input");
  const std::size_t oh = deconv_out_extent(h, kh, stride, padding, output_padding);
  const std::size_t ow = deconv_out_extent(w, kw, stride, padding, output_padding);
  Tensor out({co, oh, ow});
  const auto X = x.value().data();
  const auto K = kernels.value().data();
  // Scatter form: input pixel (iy, ix) contributes to output (iy*s - p + ky, ix*s - p + kx).
  for (std::size_t o = 0; o < co; ++o)
    for (std::size_t ci = 0; ci < c; ++ci)
      for (std::size_t ky = 0; ky < kh; ++ky) {
        const auto ry = tap_range(h, oh, stride, ky, padding);
        for (std::size_t kx = 0; kx < kw; ++kx) {
          const auto rx = tap_range(w, ow, stride, kx, padding);
          const double kv = K[((o * c + ci) * kh + ky) * kw + kx];
          for (std::size_t iy = ry.lo; iy < ry.hi; ++iy) {
            double* orow = out.storage().data() + (o * oh + iy * stride + ky - padding) * ow;
            const double* xrow = &X[(ci * h + iy) * w];
            for (std::size_t ix = rx.lo; ix < rx.hi; ++ix) orow[ix * stride + kx - padding] += kv * xrow[ix];
          }
        }
      }
  const std::size_t ixid = x.id(), ik = kernels.id();
  return t.record(std::move(out), {x, kernels}, [=](Tape& t, std::span<const double> g) {
    const auto X = t.value(ixid).data();
    const auto K = t.value(ik).data();
    const bool gx = t.requires_grad(ixid), gk = t.requires_grad(ik);
    std::span<double> dX, dK;
    if (gx) dX = t.grad_slot(ixid);
    if (gk) dK = t.grad_slot(ik);
    for (std::size_t o = 0; o < co; ++o)
      for (std::size_t ci = 0; ci < c; ++ci)
        for (std::size_t ky = 0; ky < kh; ++ky) {
          const auto ry = tap_range(h, oh, stride, ky, padding);
          for (std::size_t kx = 0; kx < kw; ++kx) {
            const auto rx = tap_range(w, ow, stride, kx, padding);
            const std::size_t kidx = ((o * c + ci) * kh + ky) * kw + kx;
            const double kv = K[kidx];
            double acc = 0.0;
            for (std::size_t iy = ry.lo; iy < ry.hi; ++iy) {
              const double* grow = g.data() + (o * oh + iy * stride + ky - padding) * ow;
              const std::size_t xbase = (ci * h + iy) * w;
              if (gx) {
                double* drow = &dX[xbase];
                for (std::size_t ix = rx.lo; ix < rx.hi; ++ix) drow[ix] += kv * grow[ix * stride + kx - padding];
              }
              if (gk) {
                const double* xrow = &X[xbase];
                for (std::size_t ix = rx.lo; ix < rx.hi; ++ix) acc += xrow[ix] * grow[ix * stride + kx - padding];
              }
            }
            if (gk) dK[kidx] += acc;
          }
        }
  });
}

Var weighted_bce(Var probs, const Tensor& targets, const Tensor& weights, double eps) {
  Tape& t = tape_of(probs);
  const std::size_t n = probs.numel();
  if (targets.numel() != n || weights.numel() != n) throw DimensionError("weighted_bce: length mismatch");
  const auto P = probs.value().data();
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = std::clamp(P[i], eps, 1.0 - eps);
    loss -= weights[i] * (targets[i] * std::log(p) + (1.0 - targets[i]) * std::log(1.0 - p));
  }
  loss /= static_cast<double>(n);
  const std::size_t ip = probs.id();
  return t.record(Tensor::scalar(loss), {probs}, [ip, n, targets, weights, eps](Tape& t, std::span<const double> g) {
    const auto P = t.value(ip).data();
    auto d = t.grad_slot(ip);
    for (std::size_t i = 0; i < n; ++i) {
      if (P[i] < eps || P[i] > 1.0 - eps) continue;  // clamped: locally constant
      const double p = P[i];
      const double dp = -weights[i] * (targets[i] / p - (1.0 - targets[i]) / (1.0 - p)) / static_cast<double>(n);
      d[i] += g[0] * dp;
    }
  });
}

Var landmark_loss(Var pred, const Tensor& truth, double inter_ocular) {
  Tape& t = tape_of(pred);
  if (!(inter_ocular > 0.0)) throw InputError("inter-ocular distance must be positive");
  if (pred.numel() != truth.numel() || pred.numel() % 2 != 0) throw DimensionError("landmark_loss: length mismatch");
  const auto P = pred.value().data();
  const double norm = 1.0 / (2.0 * inter_ocular * inter_ocular);
  double s = 0.0;
  for (std::size_t i = 0; i < truth.numel(); ++i) {
    const double e = truth[i] - P[i];
    s += e * e;
  }
  const std::size_t ip = pred.id();
  return t.record(Tensor::scalar(s * norm), {pred}, [ip, truth, norm](Tape& t, std::span<const double> g) {
    const auto P = t.value(ip).data();
    auto d = t.grad_slot(ip);
    for (std::size_t i = 0; i < truth.numel(); ++i) d[i] += g[0] * 2.0 * norm * (P[i] - truth[i]);
  });
}

}  // namespace ops
}  // namespace mgrr
