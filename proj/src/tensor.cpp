#include "nestner/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace nestner::ad {

namespace {

int product(const std::vector<int>& shape) {
    int n = 1;
    for (int d : shape) n *= d;
    return n;
}

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << "]";
    return os.str();
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) +
                     " and " + shape_str(b.shape()));
}

[[noreturn]] void shape_error(const char* op, const Tensor& a) {
    throw ShapeError(std::string(op) + ": bad shape " + shape_str(a.shape()));
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    Tensor t;
    t.impl_ = std::make_shared<Impl>();
    t.impl_->shape = std::move(shape);
    t.impl_->value.assign(static_cast<size_t>(product(t.impl_->shape)), 0.0);
    t.set_requires_grad(requires_grad);
    return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values, bool requires_grad) {
    if (static_cast<int>(values.size()) != product(shape))
        throw ShapeError("Tensor::from: " + std::to_string(values.size()) +
                         " values for shape " + shape_str(shape));
    Tensor t;
    t.impl_ = std::make_shared<Impl>();
    t.impl_->shape = std::move(shape);
    t.impl_->value = std::move(values);
    t.set_requires_grad(requires_grad);
    return t;
}

Tensor Tensor::scalar(double v) { return from({1}, {v}); }

Tensor Tensor::glorot(std::vector<int> shape, Rng& rng) {
    int fan_in = shape[0];
    int fan_out = shape.size() >= 2 ? shape[1] : shape[0];
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    Tensor t = zeros(std::move(shape));
    double* v = t.data();
    for (int i = 0; i < t.numel(); ++i) v[i] = rng.uniform(-bound, bound);
    return t;
}

const std::vector<int>& Tensor::shape() const { return impl_->shape; }
int Tensor::numel() const { return static_cast<int>(impl_->value.size()); }
int Tensor::rows() const { return impl_->shape.size() >= 2 ? impl_->shape[0] : 1; }
int Tensor::cols() const { return impl_->shape.back(); }

double* Tensor::data() const { return impl_->value.data(); }

double Tensor::item() const {
    if (numel() != 1) throw NotScalarError("item() on tensor of " + std::to_string(numel()) +
                                           " elements");
    return impl_->value[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

void Tensor::set_requires_grad(bool v) {
    impl_->requires_grad = v;
    if (v && impl_->grad.size() != impl_->value.size())
        impl_->grad.assign(impl_->value.size(), 0.0);
}

double* Tensor::grad() const { return impl_->grad.data(); }

void Tensor::zero_grad() {
    std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::clone() const {
    Tensor t;
    t.impl_ = std::make_shared<Impl>();
    t.impl_->shape = impl_->shape;
    t.impl_->value = impl_->value;
    t.set_requires_grad(impl_->requires_grad);
    return t;
}

// ---------------------------------------------------------------------------
// Tape

Tensor Tape::make_output(std::vector<int> shape, bool requires_grad) {
    return Tensor::zeros(std::move(shape), requires_grad);
}

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0])
        shape_error("matmul", a, b);
    const int m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    Tensor out = make_output({m, n}, a.requires_grad() || b.requires_grad());
    const double* pa = a.data();
    const double* pb = b.data();
    double* pc = out.data();
    for (int i = 0; i < m; ++i)
        for (int kk = 0; kk < k; ++kk) {
            const double aik = pa[i * k + kk];
            if (aik == 0.0) continue;
            const double* brow = pb + kk * n;
            double* crow = pc + i * n;
            for (int j = 0; j < n; ++j) crow[j] += aik * brow[j];
        }
    if (out.requires_grad()) {
        record([a, b, out, m, k, n]() mutable {
            const double* go = out.grad();
            if (a.requires_grad()) {
                double* ga = a.grad();
                const double* pb = b.data();
                // dA += dC B^T
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < n; ++j) {
                        const double g = go[i * n + j];
                        if (g == 0.0) continue;
                        const double* brow = pb + j;  // column j
                        for (int kk = 0; kk < k; ++kk) ga[i * k + kk] += g * brow[kk * n];
                    }
            }
            if (b.requires_grad()) {
                double* gb = b.grad();
                const double* pa = a.data();
                // dB += A^T dC
                for (int i = 0; i < m; ++i)
                    for (int kk = 0; kk < k; ++kk) {
                        const double aik = pa[i * k + kk];
                        if (aik == 0.0) continue;
                        const double* grow = go + i * n;
                        double* brow = gb + kk * n;
                        for (int j = 0; j < n; ++j) brow[j] += aik * grow[j];
                    }
            }
        });
    }
    return out;
}

Tensor Tape::transpose(const Tensor& a) {
    if (a.shape().size() != 2) shape_error("transpose", a);
    const int r = a.shape()[0], c = a.shape()[1];
    Tensor out = make_output({c, r}, a.requires_grad());
    const double* pa = a.data();
    double* po = out.data();
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) po[j * r + i] = pa[i * c + j];
    if (out.requires_grad()) {
        record([a, out, r, c]() mutable {
            double* ga = a.grad();
            const double* go = out.grad();
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < c; ++j) ga[i * c + j] += go[j * r + i];
        });
    }
    return out;
}

Tensor Tape::add(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) shape_error("add", a, b);
    Tensor out = make_output(a.shape(), a.requires_grad() || b.requires_grad());
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    const int n = a.numel();
    for (int i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
    if (out.requires_grad()) {
        record([a, b, out, n]() mutable {
            const double* go = out.grad();
            if (a.requires_grad()) {
                double* ga = a.grad();
                for (int i = 0; i < n; ++i) ga[i] += go[i];
            }
            if (b.requires_grad()) {
                double* gb = b.grad();
                for (int i = 0; i < n; ++i) gb[i] += go[i];
            }
        });
    }
    return out;
}

Tensor Tape::sub(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) shape_error("sub", a, b);
    Tensor out = make_output(a.shape(), a.requires_grad() || b.requires_grad());
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    const int n = a.numel();
    for (int i = 0; i < n; ++i) po[i] = pa[i] - pb[i];
    if (out.requires_grad()) {
        record([a, b, out, n]() mutable {
            const double* go = out.grad();
            if (a.requires_grad()) {
                double* ga = a.grad();
                for (int i = 0; i < n; ++i) ga[i] += go[i];
            }
            if (b.requires_grad()) {
                double* gb = b.grad();
                for (int i = 0; i < n; ++i) gb[i] -= go[i];
            }
        });
    }
    return out;
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) shape_error("mul", a, b);
    Tensor out = make_output(a.shape(), a.requires_grad() || b.requires_grad());
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    const int n = a.numel();
    for (int i = 0; i < n; ++i) po[i] = pa[i] * pb[i];
    if (out.requires_grad()) {
        record([a, b, out, n]() mutable {
            const double* go = out.grad();
            if (a.requires_grad()) {
                double* ga = a.grad();
                const double* pb = b.data();
                for (int i = 0; i < n; ++i) ga[i] += go[i] * pb[i];
            }
            if (b.requires_grad()) {
                double* gb = b.grad();
                const double* pa = a.data();
                for (int i = 0; i < n; ++i) gb[i] += go[i] * pa[i];
            }
        });
    }
    return out;
}

Tensor Tape::scale(const Tensor& a, double c) {
    Tensor out = make_output(a.shape(), a.requires_grad());
    const double* pa = a.data();
    double* po = out.data();
    const int n = a.numel();
    for (int i = 0; i < n; ++i) po[i] = pa[i] * c;
    if (out.requires_grad()) {
        record([a, out, c, n]() mutable {
            double* ga = a.grad();
            const double* go = out.grad();
            for (int i = 0; i < n; ++i) ga[i] += go[i] * c;
        });
    }
    return out;
}

Tensor Tape::add_rowwise(const Tensor& m, const Tensor& v) {
    if (m.shape().size() != 2 || v.shape().size() != 1 || v.shape()[0] != m.shape()[1])
        shape_error("add_rowwise", m, v);
    const int r = m.shape()[0], c = m.shape()[1];
    Tensor out = make_output({r, c}, m.requires_grad() || v.requires_grad());
    const double* pm = m.data();
    const double* pv = v.data();
    double* po = out.data();
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) po[i * c + j] = pm[i * c + j] + pv[j];
    if (out.requires_grad()) {
        record([m, v, out, r, c]() mutable {
            const double* go = out.grad();
            if (m.requires_grad()) {
                double* gm = m.grad();
                for (int i = 0; i < r * c; ++i) gm[i] += go[i];
            }
            if (v.requires_grad()) {
                double* gv = v.grad();
                for (int i = 0; i < r; ++i)
                    for (int j = 0; j < c; ++j) gv[j] += go[i * c + j];
            }
        });
    }
    return out;
}

Tensor Tape::add_colwise(const Tensor& m, const Tensor& v) {
    if (m.shape().size() != 2 || v.shape().size() != 1 || v.shape()[0] != m.shape()[0])
        shape_error("add_colwise", m, v);
    const int r = m.shape()[0], c = m.shape()[1];
    Tensor out = make_output({r, c}, m.requires_grad() || v.requires_grad());
    const double* pm = m.data();
    const double* pv = v.data();
    double* po = out.data();
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) po[i * c + j] = pm[i * c + j] + pv[i];
    if (out.requires_grad()) {
        record([m, v, out, r, c]() mutable {
            const double* go = out.grad();
            if (m.requires_grad()) {
                double* gm = m.grad();
                for (int i = 0; i < r * c; ++i) gm[i] += go[i];
            }
            if (v.requires_grad()) {
                double* gv = v.grad();
                for (int i = 0; i < r; ++i)
                    for (int j = 0; j < c; ++j) gv[i] += go[i * c + j];
            }
        });
    }
    return out;
}

Tensor Tape::concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no parts");
    const int r = parts[0].shape()[0];
    int c = 0;
    bool needs_grad = false;
    for (const Tensor& p : parts) {
        if (p.shape().size() != 2 || p.shape()[0] != r) shape_error("concat_cols", parts[0], p);
        c += p.shape()[1];
        needs_grad = needs_grad || p.requires_grad();
    }
    Tensor out = make_output({r, c}, needs_grad);
    double* po = out.data();
    int col = 0;
    for (const Tensor& p : parts) {
        const int pc = p.shape()[1];
        const double* pp = p.data();
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < pc; ++j) po[i * c + col + j] = pp[i * pc + j];
        col += pc;
    }
    if (needs_grad) {
        record([parts, out, r, c]() mutable {
            const double* go = out.grad();
            int col = 0;
            for (const Tensor& p : parts) {
                const int pc = p.shape()[1];
                if (p.requires_grad()) {
                    double* gp = p.grad();
                    for (int i = 0; i < r; ++i)
                        for (int j = 0; j < pc; ++j) gp[i * pc + j] += go[i * c + col + j];
                }
                col += pc;
            }
        });
    }
    return out;
}

Tensor Tape::slice_cols(const Tensor& a, int c0, int c1) {
    if (a.shape().size() != 2 || c0 < 0 || c1 > a.shape()[1] || c0 >= c1)
        shape_error("slice_cols", a);
    const int r = a.shape()[0], c = a.shape()[1], w = c1 - c0;
    Tensor out = make_output({r, w}, a.requires_grad());
    const double* pa = a.data();
    double* po = out.data();
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < w; ++j) po[i * w + j] = pa[i * c + c0 + j];
    if (out.requires_grad()) {
        record([a, out, r, c, w, c0]() mutable {
            double* ga = a.grad();
            const double* go = out.grad();
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < w; ++j) ga[i * c + c0 + j] += go[i * w + j];
        });
    }
    return out;
}

Tensor Tape::row(const Tensor& m, int r) {
    if (m.shape().size() != 2 || r < 0 || r >= m.shape()[0]) shape_error("row", m);
    const int c = m.shape()[1];
    Tensor out = make_output({c}, m.requires_grad());
    const double* pm = m.data();
    double* po = out.data();
    for (int j = 0; j < c; ++j) po[j] = pm[r * c + j];
    if (out.requires_grad()) {
        record([m, out, r, c]() mutable {
            double* gm = m.grad();
            const double* go = out.grad();
            for (int j = 0; j < c; ++j) gm[r * c + j] += go[j];
        });
    }
    return out;
}

Tensor Tape::pick(const Tensor& a, int flat_index) {
    if (flat_index < 0 || flat_index >= a.numel()) shape_error("pick", a);
    Tensor out = make_output({1}, a.requires_grad());
    out.data()[0] = a.data()[flat_index];
    if (out.requires_grad()) {
        record([a, out, flat_index]() mutable { a.grad()[flat_index] += out.grad()[0]; });
    }
    return out;
}

Tensor Tape::embedding_lookup(const Tensor& table, const std::vector<int>& ids) {
    if (table.shape().size() != 2) shape_error("embedding_lookup", table);
    const int rows = table.shape()[0], d = table.shape()[1];
    for (int id : ids)
        if (id < 0 || id >= rows)
            throw ShapeError("embedding_lookup: id " + std::to_string(id) + " out of " +
                             std::to_string(rows) + " rows");
    const int n = static_cast<int>(ids.size());
    Tensor out = make_output({n, d}, table.requires_grad());
    const double* pt = table.data();
    double* po = out.data();
    for (int i = 0; i < n; ++i)
        std::copy(pt + ids[static_cast<size_t>(i)] * d, pt + (ids[static_cast<size_t>(i)] + 1) * d,
                  po + i * d);
    if (out.requires_grad()) {
        record([table, out, ids, n, d]() mutable {
            double* gt = table.grad();
            const double* go = out.grad();
            for (int i = 0; i < n; ++i) {
                double* trow = gt + ids[static_cast<size_t>(i)] * d;
                const double* orow = go + i * d;
                for (int j = 0; j < d; ++j) trow[j] += orow[j];
            }
        });
    }
    return out;
}

Tensor Tape::softmax_rows(const Tensor& a) {
    if (a.shape().size() != 2) shape_error("softmax_rows", a);
    const int r = a.shape()[0], c = a.shape()[1];
    Tensor out = make_output({r, c}, a.requires_grad());
    const double* pa = a.data();
    double* po = out.data();
    for (int i = 0; i < r; ++i) {
        const double* arow = pa + i * c;
        double* orow = po + i * c;
        double mx = arow[0];
        for (int j = 1; j < c; ++j) mx = std::max(mx, arow[j]);
        double z = 0.0;
        for (int j = 0; j < c; ++j) {
            orow[j] = std::exp(arow[j] - mx);
            z += orow[j];
        }
        for (int j = 0; j < c; ++j) orow[j] /= z;
    }
    if (out.requires_grad()) {
        record([a, out, r, c]() mutable {
            double* ga = a.grad();
            const double* go = out.grad();
            const double* po = out.data();
            for (int i = 0; i < r; ++i) {
                const double* s = po + i * c;
                const double* g = go + i * c;
                double dot = 0.0;
                for (int j = 0; j < c; ++j) dot += g[j] * s[j];
                double* grow = ga + i * c;
                for (int j = 0; j < c; ++j) grow[j] += s[j] * (g[j] - dot);
            }
        });
    }
    return out;
}

Tensor Tape::log_softmax_rows(const Tensor& a) {
    if (a.shape().size() != 2) shape_error("log_softmax_rows", a);
    const int r = a.shape()[0], c = a.shape()[1];
    Tensor out = make_output({r, c}, a.requires_grad());
    const double* pa = a.data();
    double* po = out.data();
    for (int i = 0; i < r; ++i) {
        const double* arow = pa + i * c;
        double* orow = po + i * c;
        double mx = arow[0];
        for (int j = 1; j < c; ++j) mx = std::max(mx, arow[j]);
        double z = 0.0;
        for (int j = 0; j < c; ++j) z += std::exp(arow[j] - mx);
        const double lse = mx + std::log(z);
        for (int j = 0; j < c; ++j) orow[j] = arow[j] - lse;
    }
    if (out.requires_grad()) {
        record([a, out, r, c]() mutable {
            double* ga = a.grad();
            const double* go = out.grad();
            const double* po = out.data();
            for (int i = 0; i < r; ++i) {
                const double* g = go + i * c;
                const double* o = po + i * c;
                double gsum = 0.0;
                for (int j = 0; j < c; ++j) gsum += g[j];
                double* grow = ga + i * c;
                for (int j = 0; j < c; ++j) grow[j] += g[j] - std::exp(o[j]) * gsum;
            }
        });
    }
    return out;
}

Tensor Tape::logsumexp(const Tensor& a) {
    const int n = a.numel();
    if (n == 0) shape_error("logsumexp", a);
    Tensor out = make_output({1}, a.requires_grad());
    const double* pa = a.data();
    double mx = pa[0];
    for (int i = 1; i < n; ++i) mx = std::max(mx, pa[i]);
    double z = 0.0;
    for (int i = 0; i < n; ++i) z += std::exp(pa[i] - mx);
    out.data()[0] = mx + std::log(z);
    if (out.requires_grad()) {
        record([a, out, n]() mutable {
            double* ga = a.grad();
            const double g = out.grad()[0];
            const double lse = out.data()[0];
            const double* pa = a.data();
            for (int i = 0; i < n; ++i) ga[i] += g * std::exp(pa[i] - lse);
        });
    }
    return out;
}

Tensor Tape::logsumexp_cols(const Tensor& m) {
    if (m.shape().size() != 2) shape_error("logsumexp_cols", m);
    const int r = m.shape()[0], c = m.shape()[1];
    Tensor out = make_output({c}, m.requires_grad());
    const double* pm = m.data();
    double* po = out.data();
    for (int j = 0; j < c; ++j) {
        double mx = pm[j];
        for (int i = 1; i < r; ++i) mx = std::max(mx, pm[i * c + j]);
        double z = 0.0;
        for (int i = 0; i < r; ++i) z += std::exp(pm[i * c + j] - mx);
        po[j] = mx + std::log(z);
    }
    if (out.requires_grad()) {
        record([m, out, r, c]() mutable {
            double* gm = m.grad();
            const double* go = out.grad();
            const double* po = out.data();
            const double* pm = m.data();
            for (int j = 0; j < c; ++j) {
                const double g = go[j];
                if (g == 0.0) continue;
                for (int i = 0; i < r; ++i) gm[i * c + j] += g * std::exp(pm[i * c + j] - po[j]);
            }
        });
    }
    return out;
}

Tensor Tape::layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias,
                             double eps) {
    if (x.shape().size() != 2) shape_error("layer_norm_rows", x);
    const int r = x.shape()[0], c = x.shape()[1];
    if (gain.numel() != c || bias.numel() != c) shape_error("layer_norm_rows", x, gain);
    Tensor out =
        make_output({r, c}, x.requires_grad() || gain.requires_grad() || bias.requires_grad());
    // keep per-row 1/sigma and x-hat for the backward pass
    auto inv_sigma = std::make_shared<std::vector<double>>(static_cast<size_t>(r));
    auto xhat = std::make_shared<std::vector<double>>(static_cast<size_t>(r * c));
    const double* px = x.data();
    const double* pg = gain.data();
    const double* pb = bias.data();
    double* po = out.data();
    for (int i = 0; i < r; ++i) {
        const double* xr = px + i * c;
        double mean = 0.0;
        for (int j = 0; j < c; ++j) mean += xr[j];
        mean /= c;
        double var = 0.0;
        for (int j = 0; j < c; ++j) {
            const double d = xr[j] - mean;
            var += d * d;
        }
        var /= c;
        const double is = 1.0 / std::sqrt(var + eps);
        (*inv_sigma)[static_cast<size_t>(i)] = is;
        for (int j = 0; j < c; ++j) {
            const double xh = (xr[j] - mean) * is;
            (*xhat)[static_cast<size_t>(i * c + j)] = xh;
            po[i * c + j] = pg[j] * xh + pb[j];
        }
    }
    if (out.requires_grad()) {
        record([x, gain, bias, out, inv_sigma, xhat, r, c]() mutable {
            const double* go = out.grad();
            const double* pg = gain.data();
            if (gain.requires_grad()) {
                double* gg = gain.grad();
                for (int i = 0; i < r; ++i)
                    for (int j = 0; j < c; ++j)
                        gg[j] += go[i * c + j] * (*xhat)[static_cast<size_t>(i * c + j)];
            }
            if (bias.requires_grad()) {
                double* gb = bias.grad();
                for (int i = 0; i < r; ++i)
                    for (int j = 0; j < c; ++j) gb[j] += go[i * c + j];
            }
            if (x.requires_grad()) {
                double* gx = x.grad();
                for (int i = 0; i < r; ++i) {
                    const double* g = go + i * c;
                    const double* xh = xhat->data() + i * c;
                    double m1 = 0.0, m2 = 0.0;  // mean(g*gain), mean(g*gain*xhat)
                    for (int j = 0; j < c; ++j) {
                        const double gg = g[j] * pg[j];
                        m1 += gg;
                        m2 += gg * xh[j];
                    }
                    m1 /= c;
                    m2 /= c;
                    const double is = (*inv_sigma)[static_cast<size_t>(i)];
                    for (int j = 0; j < c; ++j)
                        gx[i * c + j] += is * (g[j] * pg[j] - m1 - xh[j] * m2);
                }
            }
        });
    }
    return out;
}

Tensor Tape::relu(const Tensor& a) {
    Tensor out = make_output(a.shape(), a.requires_grad());
    const double* pa = a.data();
    double* po = out.data();
    const int n = a.numel();
    for (int i = 0; i < n; ++i) po[i] = pa[i] > 0.0 ? pa[i] : 0.0;
    if (out.requires_grad()) {
        record([a, out, n]() mutable {
            double* ga = a.grad();
            const double* go = out.grad();
            const double* pa = a.data();
            for (int i = 0; i < n; ++i)
                if (pa[i] > 0.0) ga[i] += go[i];
        });
    }
    return out;
}

Tensor Tape::gelu(const Tensor& a) {
    Tensor out = make_output(a.shape(), a.requires_grad());
    const double* pa = a.data();
    double* po = out.data();
    const int n = a.numel();
    constexpr double inv_sqrt2 = 0.7071067811865475244;
    for (int i = 0; i < n; ++i) po[i] = 0.5 * pa[i] * (1.0 + std::erf(pa[i] * inv_sqrt2));
    if (out.requires_grad()) {
        record([a, out, n]() mutable {
            double* ga = a.grad();
            const double* go = out.grad();
            const double* pa = a.data();
            constexpr double inv_sqrt2 = 0.7071067811865475244;
            constexpr double inv_sqrt2pi = 0.3989422804014326779;
            for (int i = 0; i < n; ++i) {
                const double x = pa[i];
                const double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
                const double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
                ga[i] += go[i] * (cdf + x * pdf);
            }
        });
    }
    return out;
}

Tensor Tape::dropout(const Tensor& a, double p, bool training, Rng& rng) {
    if (!training || p <= 0.0) return a;
    if (p >= 1.0) throw ShapeError("dropout: p must be < 1");
    const int n = a.numel();
    auto mask = std::make_shared<std::vector<double>>(static_cast<size_t>(n));
    const double keep_scale = 1.0 / (1.0 - p);
    for (int i = 0; i < n; ++i)
        (*mask)[static_cast<size_t>(i)] = rng.uniform() >= p ? keep_scale : 0.0;
    Tensor out = make_output(a.shape(), a.requires_grad());
    const double* pa = a.data();
    double* po = out.data();
    for (int i = 0; i < n; ++i) po[i] = pa[i] * (*mask)[static_cast<size_t>(i)];
    if (out.requires_grad()) {
        record([a, out, mask, n]() mutable {
            double* ga = a.grad();
            const double* go = out.grad();
            for (int i = 0; i < n; ++i) ga[i] += go[i] * (*mask)[static_cast<size_t>(i)];
        });
    }
    return out;
}

Tensor Tape::mask_fill(const Tensor& a, const std::vector<std::uint8_t>& keep, double fill) {
    if (static_cast<int>(keep.size()) != a.numel()) shape_error("mask_fill", a);
    const int n = a.numel();
    Tensor out = make_output(a.shape(), a.requires_grad());
    const double* pa = a.data();
    double* po = out.data();
    for (int i = 0; i < n; ++i) po[i] = keep[static_cast<size_t>(i)] ? pa[i] : fill;
    if (out.requires_grad()) {
        record([a, out, keep, n]() mutable {
            double* ga = a.grad();
            const double* go = out.grad();
            for (int i = 0; i < n; ++i)
                if (keep[static_cast<size_t>(i)]) ga[i] += go[i];
        });
    }
    return out;
}

Tensor Tape::sum(const Tensor& a) {
    Tensor out = make_output({1}, a.requires_grad());
    const double* pa = a.data();
    const int n = a.numel();
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += pa[i];
    out.data()[0] = s;
    if (out.requires_grad()) {
        record([a, out, n]() mutable {
            double* ga = a.grad();
            const double g = out.grad()[0];
            for (int i = 0; i < n; ++i) ga[i] += g;
        });
    }
    return out;
}

void Tape::backward(const Tensor& loss) {
    if (loss.numel() != 1)
        throw NotScalarError("backward: loss has " + std::to_string(loss.numel()) +
                             " elements");
    if (!loss.requires_grad()) {
        steps_.clear();
        return;  // constant graph, nothing reachable
    }
    Tensor seed = loss;  // shared handle
    seed.grad()[0] += 1.0;
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
    steps_.clear();
}

}  // namespace nestner::ad
