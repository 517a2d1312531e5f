// Licensed under the Apache License, Version 2.0 (the "License"); you
// may not use this file except in compliance with the License.  You
// may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or
// implied.  See the License for the specific language governing
// permissions and limitations under the License.

#include "gcldr/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>

#include "gcldr/errors.hpp"
#include "gcldr/kernels/dense.hpp"

namespace gcldr::ad {

namespace {

void require_matrix(const Tensor& t, const char* op) {
    if (t.rank() != 2)
        throw DimensionError(std::string(op) + ": expected a matrix, got shape " + shape_string(t.shape()));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                             shape_string(b.shape()));
}

Node& in(Node& self, std::size_t i) { return *self.inputs[i]; }

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// Elementwise unary op whose local derivative depends on the input and output.
template <class Fwd, class Deriv>
Tensor unary(const char* op, const Tensor& t, Fwd fwd, Deriv deriv) {
    std::vector<double> out(t.size());
    const auto x = t.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(x[i]);
    return make_result(op, t.shape(), std::move(out), {t}, [deriv](Node& self) {
        Node& a = in(self, 0);
        if (!a.requires_grad) return;
        for (std::size_t i = 0; i < a.value.size(); ++i)
            a.grad[i] += self.grad[i] * deriv(a.value[i], self.value[i]);
    });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_matrix(a, "matmul");
    require_matrix(b, "matmul");
    const std::size_t m = a.shape()[0], p = a.shape()[1], q = b.shape()[1];
    if (b.shape()[0] != p)
        throw DimensionError("matmul: inner dimensions differ " + shape_string(a.shape()) + " * " +
                             shape_string(b.shape()));
    std::vector<double> out(m * q);
    kernels::gemm(kernels::GemmNN{m, p, q}, a.values(), b.values(), out);
    return make_result("matmul", {m, q}, std::move(out), {a, b}, [m, p, q](Node& self) {
        Node& x = in(self, 0);
        Node& w = in(self, 1);
        if (x.requires_grad) kernels::gemm(kernels::GemmNT{m, p, q}, self.grad, w.value, x.grad);
        if (w.requires_grad) kernels::gemm(kernels::GemmTN{m, p, q}, x.value, self.grad, w.grad);
    });
}

Tensor add_rowvec(const Tensor& x, const Tensor& v) {
    require_matrix(x, "add_rowvec");
    const std::size_t b = x.shape()[0], h = x.shape()[1];
    if (v.size() != h)
        throw DimensionError("add_rowvec: vector of size " + std::to_string(v.size()) + " for width " +
                             std::to_string(h));
    std::vector<double> out(x.values().begin(), x.values().end());
    const auto vv = v.values();
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < h; ++j) out[i * h + j] += vv[j];
    return make_result("add_rowvec", x.shape(), std::move(out), {x, v}, [b, h](Node& self) {
        Node& a = in(self, 0);
        Node& c = in(self, 1);
        if (a.requires_grad)
            for (std::size_t i = 0; i < self.grad.size(); ++i) a.grad[i] += self.grad[i];
        if (c.requires_grad)
            for (std::size_t i = 0; i < b; ++i)
                for (std::size_t j = 0; j < h; ++j) c.grad[j] += self.grad[i * h + j];
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
    return make_result("add", a.shape(), std::move(out), {a, b}, [](Node& self) {
        for (std::size_t k = 0; k < 2; ++k) {
            Node& x = in(self, k);
            if (!x.requires_grad) continue;
            for (std::size_t i = 0; i < self.grad.size(); ++i) x.grad[i] += self.grad[i];
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] - b.values()[i];
    return make_result("sub", a.shape(), std::move(out), {a, b}, [](Node& self) {
        Node& x = in(self, 0);
        Node& y = in(self, 1);
        if (x.requires_grad)
            for (std::size_t i = 0; i < self.grad.size(); ++i) x.grad[i] += self.grad[i];
        if (y.requires_grad)
            for (std::size_t i = 0; i < self.grad.size(); ++i) y.grad[i] -= self.grad[i];
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
    return make_result("mul", a.shape(), std::move(out), {a, b}, [](Node& self) {
        Node& x = in(self, 0);
        Node& y = in(self, 1);
        if (x.requires_grad)
            for (std::size_t i = 0; i < self.grad.size(); ++i) x.grad[i] += self.grad[i] * y.value[i];
        if (y.requires_grad)
            for (std::size_t i = 0; i < self.grad.size(); ++i) y.grad[i] += self.grad[i] * x.value[i];
    });
}

Tensor scale(const Tensor& a, double s) {
    return unary("scale", a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
    return unary("add_scalar", a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor square(const Tensor& a) {
    return unary("square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor tanh(const Tensor& t) {
    return unary("tanh", t, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& t) {
    return unary("relu", t, [](double x) { return x > 0.0 ? x : 0.0; },
                 [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& t) {
    return unary("sigmoid", t, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor swish(const Tensor& t) {
    return unary("swish", t, [](double x) { return x * stable_sigmoid(x); },
                 [](double x, double) {
                     const double s = stable_sigmoid(x);
                     return s + x * s * (1.0 - s);
                 });
}

Tensor exp(const Tensor& t) {
    return unary("exp", t, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log_floored(const Tensor& t, double floor) {
    return unary("log", t, [floor](double x) { return std::log(std::max(x, floor)); },
                 [floor](double x, double) { return x > floor ? 1.0 / x : 0.0; });
}

Tensor softmax_rows(const Tensor& t) {
    require_matrix(t, "softmax_rows");
    const std::size_t b = t.shape()[0], n = t.shape()[1];
    std::vector<double> out(t.size());
    kernels::softmax_rows(b, n, t.values(), out);
    return make_result("softmax_rows", t.shape(), std::move(out), {t}, [b, n](Node& self) {
        Node& x = in(self, 0);
        if (!x.requires_grad) return;
        for (std::size_t i = 0; i < b; ++i) {
            const double* y = self.value.data() + i * n;
            const double* g = self.grad.data() + i * n;
            double dot = 0.0;
            for (std::size_t j = 0; j < n; ++j) dot += g[j] * y[j];
            for (std::size_t j = 0; j < n; ++j) x.grad[i * n + j] += y[j] * (g[j] - dot);
        }
    });
}

Tensor sum(const Tensor& t) {
    double s = 0.0;
    for (double v : t.values()) s += v;
    return make_result("sum", {1}, {s}, {t}, [](Node& self) {
        Node& x = in(self, 0);
        if (!x.requires_grad) return;
        for (auto& g : x.grad) g += self.grad[0];
    });
}

Tensor mean(const Tensor& t) { return scale(sum(t), 1.0 / static_cast<double>(t.size())); }

Tensor row_sum(const Tensor& t) {
    require_matrix(t, "row_sum");
    const std::size_t b = t.shape()[0], n = t.shape()[1];
    std::vector<double> out(b, 0.0);
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i] += t.values()[i * n + j];
    return make_result("row_sum", {b, 1}, std::move(out), {t}, [b, n](Node& self) {
        Node& x = in(self, 0);
        if (!x.requires_grad) return;
        for (std::size_t i = 0; i < b; ++i)
            for (std::size_t j = 0; j < n; ++j) x.grad[i * n + j] += self.grad[i];
    });
}

Tensor gather_cols(const Tensor& t, std::span<const std::size_t> index) {
    require_matrix(t, "gather_cols");
    const std::size_t b = t.shape()[0], n = t.shape()[1];
    if (index.size() != b)
        throw DimensionError("gather_cols: " + std::to_string(index.size()) + " indices for " + std::to_string(b) +
                             " rows");
    std::vector<double> out(b);
    for (std::size_t i = 0; i < b; ++i) {
        if (index[i] >= n) throw LabelError("gather_cols: index " + std::to_string(index[i]) + " >= " + std::to_string(n));
        out[i] = t.values()[i * n + index[i]];
    }
    std::vector<std::size_t> idx(index.begin(), index.end());
    return make_result("gather_cols", {b, 1}, std::move(out), {t}, [idx = std::move(idx), n](Node& self) {
        Node& x = in(self, 0);
        if (!x.requires_grad) return;
        for (std::size_t i = 0; i < idx.size(); ++i) x.grad[i * n + idx[i]] += self.grad[i];
    });
}

Tensor column(const Tensor& t, std::size_t j) {
    require_matrix(t, "column");
    const std::size_t b = t.shape()[0];
    std::vector<std::size_t> idx(b, j);
    return gather_cols(t, idx);
}

Tensor concat_cols(std::span<const Tensor> parts) {
    if (parts.empty()) throw DimensionError("concat_cols: no inputs");
    const std::size_t b = parts[0].rows();
    std::vector<std::size_t> widths;
    std::size_t total = 0;
    for (const auto& p : parts) {
        require_matrix(p, "concat_cols");
        if (p.rows() != b) throw DimensionError("concat_cols: row counts differ");
        widths.push_back(p.cols());
        total += p.cols();
    }
    std::vector<double> out(b * total);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        for (std::size_t i = 0; i < b; ++i)
            for (std::size_t j = 0; j < widths[k]; ++j)
                out[i * total + offset + j] = parts[k].values()[i * widths[k] + j];
        offset += widths[k];
    }
    return make_result("concat_cols", {b, total}, std::move(out), {parts.begin(), parts.end()},
                       [widths, b, total](Node& self) {
                           std::size_t off = 0;
                           for (std::size_t k = 0; k < widths.size(); ++k) {
                               Node& x = in(self, k);
                               if (x.requires_grad)
                                   for (std::size_t i = 0; i < b; ++i)
                                       for (std::size_t j = 0; j < widths[k]; ++j)
                                           x.grad[i * widths[k] + j] += self.grad[i * total + off + j];
                               off += widths[k];
                           }
                       });
}

Tensor batchnorm_train(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps, BatchStats* stats) {
    require_matrix(x, "batchnorm");
    const std::size_t b = x.shape()[0], h = x.shape()[1];
    if (b < 2) throw DegenerateBatchError("batchnorm: train mode needs at least 2 rows, got " + std::to_string(b));
    if (gamma.size() != h || beta.size() != h) throw DimensionError("batchnorm: scale/shift width mismatch");
    const auto xv = x.values();
    std::vector<double> mu(h, 0.0), var(h, 0.0);
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < h; ++j) mu[j] += xv[i * h + j];
    for (auto& m : mu) m /= static_cast<double>(b);
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < h; ++j) {
            const double d = xv[i * h + j] - mu[j];
            var[j] += d * d;
        }
    for (auto& v : var) v /= static_cast<double>(b);
    std::vector<double> inv_std(h), xhat(b * h), out(b * h);
    for (std::size_t j = 0; j < h; ++j) inv_std[j] = 1.0 / std::sqrt(var[j] + eps);
    const auto g = gamma.values();
    const auto s = beta.values();
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < h; ++j) {
            xhat[i * h + j] = (xv[i * h + j] - mu[j]) * inv_std[j];
            out[i * h + j] = g[j] * xhat[i * h + j] + s[j];
        }
    if (stats) *stats = BatchStats{mu, var};
    return make_result("batchnorm", x.shape(), std::move(out), {x, gamma, beta},
                       [b, h, inv_std = std::move(inv_std), xhat = std::move(xhat)](Node& self) {
                           Node& xn = in(self, 0);
                           Node& gn = in(self, 1);
                           Node& bn = in(self, 2);
                           std::vector<double> sum_dxhat(h, 0.0), sum_dxhat_xhat(h, 0.0);
                           for (std::size_t i = 0; i < b; ++i)
                               for (std::size_t j = 0; j < h; ++j) {
                                   const double gij = self.grad[i * h + j];
                                   if (gn.requires_grad) gn.grad[j] += gij * xhat[i * h + j];
                                   if (bn.requires_grad) bn.grad[j] += gij;
                                   const double dxh = gij * gn.value[j];
                                   sum_dxhat[j] += dxh;
                                   sum_dxhat_xhat[j] += dxh * xhat[i * h + j];
                               }
                           if (!xn.requires_grad) return;
                           const double bd = static_cast<double>(b);
                           for (std::size_t i = 0; i < b; ++i)
                               for (std::size_t j = 0; j < h; ++j) {
                                   const double dxh = self.grad[i * h + j] * gn.value[j];
                                   xn.grad[i * h + j] += inv_std[j] / bd *
                                                         (bd * dxh - sum_dxhat[j] - xhat[i * h + j] * sum_dxhat_xhat[j]);
                               }
                       });
}

Tensor batchnorm_infer(const Tensor& x, const Tensor& gamma, const Tensor& beta, std::span<const double> mean,
                       std::span<const double> var, double eps) {
    require_matrix(x, "batchnorm");
    const std::size_t b = x.shape()[0], h = x.shape()[1];
    if (gamma.size() != h || beta.size() != h || mean.size() != h || var.size() != h)
        throw DimensionError("batchnorm: width mismatch");
    std::vector<double> a(h), out(b * h);
    for (std::size_t j = 0; j < h; ++j) a[j] = gamma.values()[j] / std::sqrt(var[j] + eps);
    std::vector<double> m(mean.begin(), mean.end());
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < h; ++j)
            out[i * h + j] = a[j] * (x.values()[i * h + j] - m[j]) + beta.values()[j];
    std::vector<double> inv_std(h);
    for (std::size_t j = 0; j < h; ++j) inv_std[j] = 1.0 / std::sqrt(var[j] + eps);
    return make_result("batchnorm_infer", x.shape(), std::move(out), {x, gamma, beta},
                       [b, h, inv_std, m](Node& self) {
                           Node& xn = in(self, 0);
                           Node& gn = in(self, 1);
                           Node& bn = in(self, 2);
                           for (std::size_t i = 0; i < b; ++i)
                               for (std::size_t j = 0; j < h; ++j) {
                                   const double gij = self.grad[i * h + j];
                                   if (xn.requires_grad) xn.grad[i * h + j] += gij * gn.value[j] * inv_std[j];
                                   if (gn.requires_grad) gn.grad[j] += gij * (xn.value[i * h + j] - m[j]) * inv_std[j];
                                   if (bn.requires_grad) bn.grad[j] += gij;
                               }
                       });
}

Tensor dropout(const Tensor& t, double rate, std::mt19937_64& rng, Mode mode) {
    if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout: rate must lie in [0,1), got " + std::to_string(rate));
    if (mode == Mode::infer || rate == 0.0) return t;
    std::bernoulli_distribution keep(1.0 - rate);
    const double kept_scale = 1.0 / (1.0 - rate);
    std::vector<double> mask(t.size());
    for (auto& m : mask) m = keep(rng) ? kept_scale : 0.0;
    std::vector<double> out(t.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = t.values()[i] * mask[i];
    return make_result("dropout", t.shape(), std::move(out), {t}, [mask = std::move(mask)](Node& self) {
        Node& x = in(self, 0);
        if (!x.requires_grad) return;
        for (std::size_t i = 0; i < mask.size(); ++i) x.grad[i] += self.grad[i] * mask[i];
    });
}

Tensor cross_entropy(const Tensor& probs, std::span<const std::size_t> labels) {
    require_matrix(probs, "cross_entropy");
    const std::size_t b = probs.shape()[0], c = probs.shape()[1];
    if (labels.size() != b)
        throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for " + std::to_string(b) +
                             " rows");
    double total = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        if (labels[i] >= c)
            throw LabelError("cross_entropy: label " + std::to_string(labels[i]) + " outside " + std::to_string(c) +
                             " classes");
        total -= std::log(std::max(probs.values()[i * c + labels[i]], kLogFloor));
    }
    const double bd = static_cast<double>(b);
    std::vector<std::size_t> y(labels.begin(), labels.end());
    return make_result("cross_entropy", {1}, {total / bd}, {probs}, [y = std::move(y), c, bd](Node& self) {
        Node& p = in(self, 0);
        if (!p.requires_grad) return;
        for (std::size_t i = 0; i < y.size(); ++i) {
            const double pv = p.value[i * c + y[i]];
            if (pv > kLogFloor) p.grad[i * c + y[i]] -= self.grad[0] / (bd * pv);
        }
    });
}

}  // namespace gcldr::ad
