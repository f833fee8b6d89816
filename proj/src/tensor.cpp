// Copyright 2026 recbench authors
// SPDX-License-Identifier: Apache-2.0
#include "recbench/tensor.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

namespace recbench::tensor {

namespace {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

#ifndef NDEBUG
void check_finite(const Tensor& t, const char* op) {
    for (real_t v : t.val()) {
        if (!std::isfinite(v)) {
            throw ContractError(std::string(op) + ": non-finite value in forward output");
        }
    }
}
#define RB_CHECK_FINITE(t, op) check_finite((t), (op))
#else
#define RB_CHECK_FINITE(t, op) ((void)0)
#endif

real_t softplus(real_t x) {
    // log(1 + e^x) without overflow for large |x|
    if (x > 0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

real_t sigmoid_scalar(real_t x) {
    if (x >= 0) {
        const real_t e = std::exp(-x);
        return 1 / (1 + e);
    }
    const real_t e = std::exp(x);
    return e / (1 + e);
}

constexpr real_t kGeluC = 0.7978845608028653558798921198687;  // sqrt(2/pi)
constexpr real_t kGeluA = 0.044715;

}  // namespace

std::string shape_str(const Tensor& t) {
    std::ostringstream os;
    os << "[";
    const auto& s = t.shape();
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
    auto n = std::make_shared<TensorNode>();
    n->val.assign(shape_numel(shape), 0);
    n->shape = std::move(shape);
    return Tensor(std::move(n));
}

Tensor Tensor::full(std::vector<std::size_t> shape, real_t value) {
    Tensor t = zeros(std::move(shape));
    std::fill(t.val().begin(), t.val().end(), value);
    return t;
}

Tensor Tensor::from(std::vector<std::size_t> shape, std::vector<real_t> values) {
    if (shape_numel(shape) != values.size()) {
        throw ShapeError("Tensor::from: shape does not match value count");
    }
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->val = std::move(values);
    return Tensor(std::move(n));
}

Tensor Tensor::scalar(real_t value) { return from({1}, {value}); }

Tensor Tensor::param(std::vector<std::size_t> shape) {
    Tensor t = zeros(std::move(shape));
    t.node()->requires_grad = true;
    t.node()->needs_grad = true;
    t.ensure_grad();
    return t;
}

real_t Tensor::item() const {
    if (numel() != 1) throw ContractError("Tensor::item: tensor is not scalar " + shape_str(*this));
    return node_->val[0];
}

void Tensor::ensure_grad() {
    if (node_->grad.size() != node_->val.size()) node_->grad.assign(node_->val.size(), 0);
}

void Tensor::zero_grad() {
    if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0);
}

void Tape::backward(const Tensor& loss) {
    if (loss.numel() != 1) {
        throw ContractError("backward: loss must be scalar, got " + shape_str(loss));
    }
    if (loss.node()->producer != this) {
        throw ContractError("backward: loss was not produced on this tape (detached ancestry)");
    }
    loss.node()->grad.assign(1, 1.0);
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
    entries_.clear();
}

void backward(Tape& tape, const Tensor& loss) { tape.backward(loss); }

// Creates the output node of an op and decides whether gradients flow.
Tensor make_output(Tape* tape, std::vector<std::size_t> shape, std::initializer_list<Tensor> inputs) {
    Tensor out = Tensor::zeros(std::move(shape));
    if (tape) {
        bool needs = false;
        for (const auto& in : inputs) needs = needs || in.needs_grad();
        if (needs) {
            out.node()->needs_grad = true;
            out.node()->producer = tape;
            out.ensure_grad();
            for (const auto& in : inputs) {
                if (in.needs_grad()) const_cast<Tensor&>(in).ensure_grad();
            }
        }
    }
    return out;
}

namespace {

bool recording(Tape* tape, const Tensor& out) { return tape && out.needs_grad(); }

void require_matrix(const Tensor& t, const char* op) {
    if (t.ndim() > 2) throw ShapeError(std::string(op) + ": expected matrix, got " + shape_str(t));
}

// C[m,n] (+)= A[m,k] * B[k,n]; raw row-major buffers.
void gemm_nn(const real_t* a, const real_t* b, real_t* c, std::size_t m, std::size_t k,
             std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        real_t* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const real_t av = a[i * k + p];
            if (av == 0) continue;
            const real_t* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[m,n] (+)= A[m,k] * B[n,k]^T
void gemm_nt(const real_t* a, const real_t* b, real_t* c, std::size_t m, std::size_t k,
             std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const real_t* arow = a + i * k;
        real_t* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const real_t* brow = b + j * k;
            real_t acc = 0;
            for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] += acc;
        }
    }
}

// C[k,n] (+)= A[m,k]^T * B[m,n]
void gemm_tn(const real_t* a, const real_t* b, real_t* c, std::size_t m, std::size_t k,
             std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const real_t* arow = a + i * k;
        const real_t* brow = b + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const real_t av = arow[p];
            if (av == 0) continue;
            real_t* crow = c + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

}  // namespace

Tensor matmul(Tape* tape, const Tensor& a, const Tensor& b) {
    require_matrix(a, "matmul");
    require_matrix(b, "matmul");
    const std::size_t m = a.rows(), k = a.cols(), k2 = b.rows(), n = b.cols();
    if (k != k2) {
        throw ShapeError("matmul: inner dimensions differ, " + shape_str(a) + " vs " + shape_str(b));
    }
    Tensor out = make_output(tape, {m, n}, {a, b});
    gemm_nn(a.val().data(), b.val().data(), out.val().data(), m, k, n);
    RB_CHECK_FINITE(out, "matmul");
    if (recording(tape, out)) {
        tape->record([a, b, out, m, k, n] {
            const real_t* g = out.grad().data();
            if (a.needs_grad()) gemm_nt(g, b.val().data(), a.node()->grad.data(), m, n, k);
            if (b.needs_grad()) gemm_tn(a.val().data(), g, b.node()->grad.data(), m, k, n);
        });
    }
    return out;
}

Tensor matmul_nt(Tape* tape, const Tensor& a, const Tensor& b) {
    require_matrix(a, "matmul_nt");
    require_matrix(b, "matmul_nt");
    const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
    if (k != b.cols()) {
        throw ShapeError("matmul_nt: inner dimensions differ, " + shape_str(a) + " vs " +
                         shape_str(b));
    }
    Tensor out = make_output(tape, {m, n}, {a, b});
    gemm_nt(a.val().data(), b.val().data(), out.val().data(), m, k, n);
    RB_CHECK_FINITE(out, "matmul_nt");
    if (recording(tape, out)) {
        tape->record([a, b, out, m, k, n] {
            const real_t* g = out.grad().data();
            // dA += G * B ; dB += G^T * A
            if (a.needs_grad()) gemm_nn(g, b.val().data(), a.node()->grad.data(), m, n, k);
            if (b.needs_grad()) gemm_tn(g, a.val().data(), b.node()->grad.data(), m, n, k);
        });
    }
    return out;
}

Tensor linear(Tape* tape, const Tensor& x, const Tensor& w, const Tensor& b) {
    const std::size_t r = x.rows(), f = x.cols(), o = w.cols();
    if (w.rows() != f) {
        throw ShapeError("linear: input width " + shape_str(x) + " does not match weight " +
                         shape_str(w));
    }
    if (b.numel() != o) {
        throw ShapeError("linear: bias " + shape_str(b) + " does not match output width " +
                         std::to_string(o));
    }
    Tensor out = make_output(tape, {r, o}, {x, w, b});
    gemm_nn(x.val().data(), w.val().data(), out.val().data(), r, f, o);
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < o; ++j) out.val()[i * o + j] += b.val()[j];
    }
    RB_CHECK_FINITE(out, "linear");
    if (recording(tape, out)) {
        tape->record([x, w, b, out, r, f, o] {
            const real_t* g = out.grad().data();
            if (x.needs_grad()) gemm_nt(g, w.val().data(), x.node()->grad.data(), r, o, f);
            if (w.needs_grad()) gemm_tn(x.val().data(), g, w.node()->grad.data(), r, f, o);
            if (b.needs_grad()) {
                real_t* gb = b.node()->grad.data();
                for (std::size_t i = 0; i < r; ++i) {
                    for (std::size_t j = 0; j < o; ++j) gb[j] += g[i * o + j];
                }
            }
        });
    }
    return out;
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " +
                         shape_str(b));
    }
}

}  // namespace

Tensor add(Tape* tape, const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    Tensor out = make_output(tape, a.shape(), {a, b});
    const std::size_t n = a.numel();
    for (std::size_t i = 0; i < n; ++i) out.val()[i] = a.val()[i] + b.val()[i];
    if (recording(tape, out)) {
        tape->record([a, b, out, n] {
            const real_t* g = out.grad().data();
            if (a.needs_grad()) {
                real_t* ga = a.node()->grad.data();
                for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
            }
            if (b.needs_grad()) {
                real_t* gb = b.node()->grad.data();
                for (std::size_t i = 0; i < n; ++i) gb[i] += g[i];
            }
        });
    }
    return out;
}

Tensor sub(Tape* tape, const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    Tensor out = make_output(tape, a.shape(), {a, b});
    const std::size_t n = a.numel();
    for (std::size_t i = 0; i < n; ++i) out.val()[i] = a.val()[i] - b.val()[i];
    if (recording(tape, out)) {
        tape->record([a, b, out, n] {
            const real_t* g = out.grad().data();
            if (a.needs_grad()) {
                real_t* ga = a.node()->grad.data();
                for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
            }
            if (b.needs_grad()) {
                real_t* gb = b.node()->grad.data();
                for (std::size_t i = 0; i < n; ++i) gb[i] -= g[i];
            }
        });
    }
    return out;
}

Tensor mul(Tape* tape, const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    Tensor out = make_output(tape, a.shape(), {a, b});
    const std::size_t n = a.numel();
    for (std::size_t i = 0; i < n; ++i) out.val()[i] = a.val()[i] * b.val()[i];
    if (recording(tape, out)) {
        tape->record([a, b, out, n] {
            const real_t* g = out.grad().data();
            if (a.needs_grad()) {
                real_t* ga = a.node()->grad.data();
                for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * b.val()[i];
            }
            if (b.needs_grad()) {
                real_t* gb = b.node()->grad.data();
                for (std::size_t i = 0; i < n; ++i) gb[i] += g[i] * a.val()[i];
            }
        });
    }
    return out;
}

Tensor scale(Tape* tape, const Tensor& x, real_t c) {
    Tensor out = make_output(tape, x.shape(), {x});
    const std::size_t n = x.numel();
    for (std::size_t i = 0; i < n; ++i) out.val()[i] = x.val()[i] * c;
    if (recording(tape, out)) {
        tape->record([x, out, c, n] {
            real_t* gx = x.node()->grad.data();
            const real_t* g = out.grad().data();
            for (std::size_t i = 0; i < n; ++i) gx[i] += g[i] * c;
        });
    }
    return out;
}

Tensor sum_all(Tape* tape, const Tensor& x) {
    Tensor out = make_output(tape, {1}, {x});
    real_t acc = 0;
    for (real_t v : x.val()) acc += v;
    out.val()[0] = acc;
    if (recording(tape, out)) {
        tape->record([x, out] {
            const real_t g = out.grad()[0];
            real_t* gx = x.node()->grad.data();
            const std::size_t n = x.numel();
            for (std::size_t i = 0; i < n; ++i) gx[i] += g;
        });
    }
    return out;
}

Tensor mean_all(Tape* tape, const Tensor& x) {
    Tensor s = sum_all(tape, x);
    return scale(tape, s, real_t(1) / static_cast<real_t>(x.numel()));
}

Tensor take_rows(Tape* tape, const Tensor& x, const std::vector<int>& indices) {
    require_matrix(x, "take_rows");
    const std::size_t r = x.rows(), c = x.cols();
    for (int idx : indices) {
        if (idx < 0 || static_cast<std::size_t>(idx) >= r) {
            throw BoundsError("take_rows: index " + std::to_string(idx) + " out of range [0," +
                              std::to_string(r) + ")");
        }
    }
    Tensor out = make_output(tape, {indices.size(), c}, {x});
    for (std::size_t i = 0; i < indices.size(); ++i) {
        std::memcpy(out.val().data() + i * c, x.val().data() + indices[i] * c, c * sizeof(real_t));
    }
    if (recording(tape, out)) {
        tape->record([x, out, indices, c] {
            real_t* gx = x.node()->grad.data();
            const real_t* g = out.grad().data();
            for (std::size_t i = 0; i < indices.size(); ++i) {
                real_t* row = gx + static_cast<std::size_t>(indices[i]) * c;
                const real_t* grow = g + i * c;
                for (std::size_t j = 0; j < c; ++j) row[j] += grow[j];
            }
        });
    }
    return out;
}

Tensor concat_rows(Tape* tape, const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ContractError("concat_rows: no parts");
    const std::size_t c = parts.front().cols();
    std::size_t total = 0;
    for (const auto& p : parts) {
        if (p.cols() != c) {
            throw ShapeError("concat_rows: column mismatch " + shape_str(parts.front()) + " vs " +
                             shape_str(p));
        }
        total += p.rows();
    }
    Tensor out = Tensor::zeros({total, c});
    bool needs = false;
    for (const auto& p : parts) needs = needs || p.needs_grad();
    if (tape && needs) {
        out.node()->needs_grad = true;
        out.node()->producer = tape;
        out.ensure_grad();
        for (const auto& p : parts) {
            if (p.needs_grad()) const_cast<Tensor&>(p).ensure_grad();
        }
    }
    std::size_t row = 0;
    for (const auto& p : parts) {
        std::memcpy(out.val().data() + row * c, p.val().data(), p.numel() * sizeof(real_t));
        row += p.rows();
    }
    if (recording(tape, out)) {
        tape->record([parts, out, c] {
            const real_t* g = out.grad().data();
            std::size_t row = 0;
            for (const auto& p : parts) {
                if (p.needs_grad()) {
                    real_t* gp = p.node()->grad.data();
                    const std::size_t n = p.numel();
                    const real_t* gsrc = g + row * c;
                    for (std::size_t i = 0; i < n; ++i) gp[i] += gsrc[i];
                }
                row += p.rows();
            }
        });
    }
    return out;
}

Tensor concat_cols(Tape* tape, const Tensor& a, const Tensor& b) {
    require_matrix(a, "concat_cols");
    require_matrix(b, "concat_cols");
    if (a.rows() != b.rows()) {
        throw ShapeError("concat_cols: row mismatch " + shape_str(a) + " vs " + shape_str(b));
    }
    const std::size_t r = a.rows(), ca = a.cols(), cb = b.cols();
    Tensor out = make_output(tape, {r, ca + cb}, {a, b});
    for (std::size_t i = 0; i < r; ++i) {
        std::memcpy(out.val().data() + i * (ca + cb), a.val().data() + i * ca, ca * sizeof(real_t));
        std::memcpy(out.val().data() + i * (ca + cb) + ca, b.val().data() + i * cb,
                    cb * sizeof(real_t));
    }
    if (recording(tape, out)) {
        tape->record([a, b, out, r, ca, cb] {
            const real_t* g = out.grad().data();
            for (std::size_t i = 0; i < r; ++i) {
                if (a.needs_grad()) {
                    real_t* ga = a.node()->grad.data() + i * ca;
                    for (std::size_t j = 0; j < ca; ++j) ga[j] += g[i * (ca + cb) + j];
                }
                if (b.needs_grad()) {
                    real_t* gb = b.node()->grad.data() + i * cb;
                    for (std::size_t j = 0; j < cb; ++j) gb[j] += g[i * (ca + cb) + ca + j];
                }
            }
        });
    }
    return out;
}

Tensor rowwise_dot(Tape* tape, const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "rowwise_dot");
    const std::size_t r = a.rows(), c = a.cols();
    Tensor out = make_output(tape, {r}, {a, b});
    for (std::size_t i = 0; i < r; ++i) {
        real_t acc = 0;
        for (std::size_t j = 0; j < c; ++j) acc += a.val()[i * c + j] * b.val()[i * c + j];
        out.val()[i] = acc;
    }
    if (recording(tape, out)) {
        tape->record([a, b, out, r, c] {
            const real_t* g = out.grad().data();
            for (std::size_t i = 0; i < r; ++i) {
                if (a.needs_grad()) {
                    real_t* ga = a.node()->grad.data() + i * c;
                    const real_t* bv = b.val().data() + i * c;
                    for (std::size_t j = 0; j < c; ++j) ga[j] += g[i] * bv[j];
                }
                if (b.needs_grad()) {
                    real_t* gb = b.node()->grad.data() + i * c;
                    const real_t* av = a.val().data() + i * c;
                    for (std::size_t j = 0; j < c; ++j) gb[j] += g[i] * av[j];
                }
            }
        });
    }
    return out;
}

Tensor mask_rows(Tape* tape, const Tensor& x, const std::vector<std::uint8_t>& keep) {
    require_matrix(x, "mask_rows");
    if (keep.size() != x.rows()) throw ShapeError("mask_rows: mask length != rows");
    const std::size_t r = x.rows(), c = x.cols();
    Tensor out = make_output(tape, x.shape(), {x});
    for (std::size_t i = 0; i < r; ++i) {
        if (keep[i]) {
            std::memcpy(out.val().data() + i * c, x.val().data() + i * c, c * sizeof(real_t));
        }
    }
    if (recording(tape, out)) {
        tape->record([x, out, keep, r, c] {
            real_t* gx = x.node()->grad.data();
            const real_t* g = out.grad().data();
            for (std::size_t i = 0; i < r; ++i) {
                if (!keep[i]) continue;
                for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += g[i * c + j];
            }
        });
    }
    return out;
}

Tensor masked_softmax_rows(Tape* tape, const Tensor& x, const std::vector<std::uint8_t>& mask) {
    require_matrix(x, "masked_softmax_rows");
    const std::size_t r = x.rows(), c = x.cols();
    if (mask.size() != r * c) throw ShapeError("masked_softmax_rows: mask size != numel");
    Tensor out = make_output(tape, x.shape(), {x});
    for (std::size_t i = 0; i < r; ++i) {
        const real_t* xr = x.val().data() + i * c;
        real_t* yr = out.val().data() + i * c;
        real_t mx = -std::numeric_limits<real_t>::infinity();
        for (std::size_t j = 0; j < c; ++j) {
            if (mask[i * c + j] && xr[j] > mx) mx = xr[j];
        }
        if (!std::isfinite(mx)) continue;  // fully masked row stays zero
        real_t denom = 0;
        for (std::size_t j = 0; j < c; ++j) {
            if (mask[i * c + j]) {
                yr[j] = std::exp(xr[j] - mx);
                denom += yr[j];
            }
        }
        for (std::size_t j = 0; j < c; ++j) {
            if (mask[i * c + j]) yr[j] /= denom;
        }
    }
    if (recording(tape, out)) {
        tape->record([x, out, mask, r, c] {
            real_t* gx = x.node()->grad.data();
            const real_t* g = out.grad().data();
            const real_t* y = out.val().data();
            for (std::size_t i = 0; i < r; ++i) {
                real_t dot = 0;
                for (std::size_t j = 0; j < c; ++j) {
                    if (mask[i * c + j]) dot += g[i * c + j] * y[i * c + j];
                }
                for (std::size_t j = 0; j < c; ++j) {
                    if (mask[i * c + j]) {
                        gx[i * c + j] += y[i * c + j] * (g[i * c + j] - dot);
                    }
                }
            }
        });
    }
    return out;
}

Tensor layer_norm(Tape* tape, const Tensor& x, const Tensor& gain, const Tensor& bias, real_t eps) {
    require_matrix(x, "layer_norm");
    const std::size_t r = x.rows(), c = x.cols();
    if (gain.numel() != c || bias.numel() != c) {
        throw ShapeError("layer_norm: gain/bias length must equal cols=" + std::to_string(c));
    }
    Tensor out = make_output(tape, x.shape(), {x, gain, bias});
    // cache normalized values and inverse stddevs for the backward pass
    auto xhat = std::make_shared<std::vector<real_t>>(r * c);
    auto inv_std = std::make_shared<std::vector<real_t>>(r);
    for (std::size_t i = 0; i < r; ++i) {
        const real_t* xr = x.val().data() + i * c;
        real_t mean = 0;
        for (std::size_t j = 0; j < c; ++j) mean += xr[j];
        mean /= static_cast<real_t>(c);
        real_t var = 0;
        for (std::size_t j = 0; j < c; ++j) var += (xr[j] - mean) * (xr[j] - mean);
        var /= static_cast<real_t>(c);
        const real_t is = real_t(1) / std::sqrt(var + eps);
        (*inv_std)[i] = is;
        for (std::size_t j = 0; j < c; ++j) {
            const real_t xh = (xr[j] - mean) * is;
            (*xhat)[i * c + j] = xh;
            out.val()[i * c + j] = xh * gain.val()[j] + bias.val()[j];
        }
    }
    RB_CHECK_FINITE(out, "layer_norm");
    if (recording(tape, out)) {
        tape->record([x, gain, bias, out, xhat, inv_std, r, c] {
            const real_t* g = out.grad().data();
            for (std::size_t i = 0; i < r; ++i) {
                const real_t* grow = g + i * c;
                const real_t* xh = xhat->data() + i * c;
                if (gain.needs_grad()) {
                    real_t* gg = gain.node()->grad.data();
                    for (std::size_t j = 0; j < c; ++j) gg[j] += grow[j] * xh[j];
                }
                if (bias.needs_grad()) {
                    real_t* gb = bias.node()->grad.data();
                    for (std::size_t j = 0; j < c; ++j) gb[j] += grow[j];
                }
                if (x.needs_grad()) {
                    // dx = (gy - mean(gy) - xhat * mean(gy*xhat)) * inv_std,
                    // with gy = g * gain
                    real_t m1 = 0, m2 = 0;
                    for (std::size_t j = 0; j < c; ++j) {
                        const real_t gy = grow[j] * gain.val()[j];
                        m1 += gy;
                        m2 += gy * xh[j];
                    }
                    m1 /= static_cast<real_t>(c);
                    m2 /= static_cast<real_t>(c);
                    real_t* gx = x.node()->grad.data() + i * c;
                    for (std::size_t j = 0; j < c; ++j) {
                        const real_t gy = grow[j] * gain.val()[j];
                        gx[j] += (gy - m1 - xh[j] * m2) * (*inv_std)[i];
                    }
                }
            }
        });
    }
    return out;
}

Tensor gelu(Tape* tape, const Tensor& x) {
    Tensor out = make_output(tape, x.shape(), {x});
    const std::size_t n = x.numel();
    for (std::size_t i = 0; i < n; ++i) {
        const real_t v = x.val()[i];
        const real_t u = kGeluC * (v + kGeluA * v * v * v);
        out.val()[i] = real_t(0.5) * v * (1 + std::tanh(u));
    }
    if (recording(tape, out)) {
        tape->record([x, out, n] {
            real_t* gx = x.node()->grad.data();
            const real_t* g = out.grad().data();
            for (std::size_t i = 0; i < n; ++i) {
                const real_t v = x.val()[i];
                const real_t u = kGeluC * (v + kGeluA * v * v * v);
                const real_t t = std::tanh(u);
                const real_t du = kGeluC * (1 + 3 * kGeluA * v * v);
                gx[i] += g[i] * (real_t(0.5) * (1 + t) + real_t(0.5) * v * (1 - t * t) * du);
            }
        });
    }
    return out;
}

Tensor sigmoid(Tape* tape, const Tensor& x) {
    Tensor out = make_output(tape, x.shape(), {x});
    const std::size_t n = x.numel();
    for (std::size_t i = 0; i < n; ++i) out.val()[i] = sigmoid_scalar(x.val()[i]);
    if (recording(tape, out)) {
        tape->record([x, out, n] {
            real_t* gx = x.node()->grad.data();
            const real_t* g = out.grad().data();
            for (std::size_t i = 0; i < n; ++i) {
                const real_t y = out.val()[i];
                gx[i] += g[i] * y * (1 - y);
            }
        });
    }
    return out;
}

Tensor bce_pair(Tape* tape, const Tensor& pos_scores, const Tensor& neg_scores) {
    require_same_shape(pos_scores, neg_scores, "bce_pair");
    Tensor out = make_output(tape, pos_scores.shape(), {pos_scores, neg_scores});
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) {
        out.val()[i] = softplus(-pos_scores.val()[i]) + softplus(neg_scores.val()[i]);
    }
    if (recording(tape, out)) {
        tape->record([pos_scores, neg_scores, out, n] {
            const real_t* g = out.grad().data();
            // d/dpos = sigma(pos) - 1, d/dneg = sigma(neg)
            if (pos_scores.needs_grad()) {
                real_t* gp = pos_scores.node()->grad.data();
                for (std::size_t i = 0; i < n; ++i) {
                    gp[i] += g[i] * (sigmoid_scalar(pos_scores.val()[i]) - 1);
                }
            }
            if (neg_scores.needs_grad()) {
                real_t* gn = neg_scores.node()->grad.data();
                for (std::size_t i = 0; i < n; ++i) {
                    gn[i] += g[i] * sigmoid_scalar(neg_scores.val()[i]);
                }
            }
        });
    }
    return out;
}

Tensor cross_entropy_rows(Tape* tape, const Tensor& logits, const std::vector<int>& targets) {
    require_matrix(logits, "cross_entropy_rows");
    const std::size_t r = logits.rows(), c = logits.cols();
    if (targets.size() != r) throw ShapeError("cross_entropy_rows: targets length != rows");
    for (int t : targets) {
        if (t < 0 || static_cast<std::size_t>(t) >= c) {
            throw BoundsError("cross_entropy_rows: target " + std::to_string(t) + " out of range");
        }
    }
    Tensor out = make_output(tape, {1}, {logits});
    real_t total = 0;
    for (std::size_t i = 0; i < r; ++i) {
        const real_t* row = logits.val().data() + i * c;
        real_t mx = row[0];
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
        real_t denom = 0;
        for (std::size_t j = 0; j < c; ++j) denom += std::exp(row[j] - mx);
        total += mx + std::log(denom) - row[targets[i]];
    }
    out.val()[0] = total / static_cast<real_t>(r);
    if (recording(tape, out)) {
        tape->record([logits, out, targets, r, c] {
            const real_t g = out.grad()[0] / static_cast<real_t>(r);
            real_t* gl = logits.node()->grad.data();
            for (std::size_t i = 0; i < r; ++i) {
                const real_t* row = logits.val().data() + i * c;
                real_t mx = row[0];
                for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
                real_t denom = 0;
                for (std::size_t j = 0; j < c; ++j) denom += std::exp(row[j] - mx);
                for (std::size_t j = 0; j < c; ++j) {
                    const real_t p = std::exp(row[j] - mx) / denom;
                    gl[i * c + j] += g * (p - (static_cast<std::size_t>(targets[i]) == j ? 1 : 0));
                }
            }
        });
    }
    return out;
}

Tensor dropout(Tape* tape, const Tensor& x, real_t p, Rng& rng) {
    if (p <= 0) return x;
    if (p >= 1) throw ContractError("dropout: p must be < 1");
    const std::size_t n = x.numel();
    auto mask = std::make_shared<std::vector<real_t>>(n);
    const real_t inv_keep = real_t(1) / (1 - p);
    for (std::size_t i = 0; i < n; ++i) {
        (*mask)[i] = rng.uniform() < p ? real_t(0) : inv_keep;
    }
    Tensor out = make_output(tape, x.shape(), {x});
    for (std::size_t i = 0; i < n; ++i) out.val()[i] = x.val()[i] * (*mask)[i];
    if (recording(tape, out)) {
        tape->record([x, out, mask, n] {
            real_t* gx = x.node()->grad.data();
            const real_t* g = out.grad().data();
            for (std::size_t i = 0; i < n; ++i) gx[i] += g[i] * (*mask)[i];
        });
    }
    return out;
}

Tensor multi_head_attention(Tape* tape, const Tensor& q, const Tensor& k, const Tensor& v,
                            std::size_t heads, bool causal,
                            const std::vector<std::uint8_t>& key_valid, real_t attn_dropout,
                            Rng* rng) {
    require_same_shape(q, k, "multi_head_attention");
    require_same_shape(q, v, "multi_head_attention");
    const std::size_t L = q.rows(), d = q.cols();
    if (heads == 0 || d % heads != 0) {
        throw ConfigError("multi_head_attention: width " + std::to_string(d) +
                          " not divisible by heads " + std::to_string(heads));
    }
    if (key_valid.size() != L) throw ShapeError("multi_head_attention: key_valid length != L");
    if (attn_dropout > 0 && rng == nullptr) {
        throw ContractError("multi_head_attention: attention dropout needs an rng");
    }
    const std::size_t dh = d / heads;
    const real_t inv_sqrt = real_t(1) / std::sqrt(static_cast<real_t>(dh));

    Tensor out = make_output(tape, {L, d}, {q, k, v});
    // Attention probabilities (after dropout) per head, kept for backward.
    auto probs = std::make_shared<std::vector<real_t>>(heads * L * L, real_t(0));
    auto raw_probs = attn_dropout > 0 ? std::make_shared<std::vector<real_t>>(heads * L * L, real_t(0))
                                      : probs;
    const real_t inv_keep = attn_dropout > 0 ? real_t(1) / (1 - attn_dropout) : real_t(1);

    std::vector<real_t> srow(L);
    for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t off = h * dh;
        for (std::size_t i = 0; i < L; ++i) {
            // scores over valid keys
            real_t mx = -std::numeric_limits<real_t>::infinity();
            for (std::size_t j = 0; j < L; ++j) {
                if (!key_valid[j] || (causal && j > i)) continue;
                real_t acc = 0;
                const real_t* qi = q.val().data() + i * d + off;
                const real_t* kj = k.val().data() + j * d + off;
                for (std::size_t p = 0; p < dh; ++p) acc += qi[p] * kj[p];
                srow[j] = acc * inv_sqrt;
                if (srow[j] > mx) mx = srow[j];
            }
            if (!std::isfinite(mx)) continue;  // no attendable key: zero output row
            real_t denom = 0;
            for (std::size_t j = 0; j < L; ++j) {
                if (!key_valid[j] || (causal && j > i)) continue;
                const real_t e = std::exp(srow[j] - mx);
                (*raw_probs)[(h * L + i) * L + j] = e;
                denom += e;
            }
            for (std::size_t j = 0; j < L; ++j) {
                if (!key_valid[j] || (causal && j > i)) continue;
                real_t pij = (*raw_probs)[(h * L + i) * L + j] / denom;
                (*raw_probs)[(h * L + i) * L + j] = pij;
                if (attn_dropout > 0) {
                    const real_t keep = rng->uniform() < attn_dropout ? real_t(0) : inv_keep;
                    (*probs)[(h * L + i) * L + j] = pij * keep;
                }
            }
            // context = P * V_h
            real_t* orow = out.val().data() + i * d + off;
            for (std::size_t j = 0; j < L; ++j) {
                const real_t pij = (*probs)[(h * L + i) * L + j];
                if (pij == 0) continue;
                const real_t* vj = v.val().data() + j * d + off;
                for (std::size_t p = 0; p < dh; ++p) orow[p] += pij * vj[p];
            }
        }
    }
    RB_CHECK_FINITE(out, "multi_head_attention");
    if (recording(tape, out)) {
        tape->record([q, k, v, out, probs, raw_probs, heads, L, d, dh, inv_sqrt, causal, key_valid,
                      attn_dropout, inv_keep] {
            const real_t* g = out.grad().data();
            std::vector<real_t> dP(L), dS(L);
            for (std::size_t h = 0; h < heads; ++h) {
                const std::size_t off = h * dh;
                for (std::size_t i = 0; i < L; ++i) {
                    const real_t* grow = g + i * d + off;
                    // dV += P^T g ; dP = g V^T (fully masked rows have zero
                    // probs everywhere, so they contribute nothing below)
                    for (std::size_t j = 0; j < L; ++j) {
                        const real_t pij = (*probs)[(h * L + i) * L + j];
                        if (pij != 0 && v.needs_grad()) {
                            real_t* gv = v.node()->grad.data() + j * d + off;
                            for (std::size_t p = 0; p < dh; ++p) gv[p] += pij * grow[p];
                        }
                        real_t acc = 0;
                        if (key_valid[j] && !(causal && j > i)) {
                            const real_t* vj = v.val().data() + j * d + off;
                            for (std::size_t p = 0; p < dh; ++p) acc += grow[p] * vj[p];
                        }
                        dP[j] = acc;
                    }
                    // undo attention-dropout scaling: dP_raw = dP * mask_scale
                    if (attn_dropout > 0) {
                        for (std::size_t j = 0; j < L; ++j) {
                            const real_t praw = (*raw_probs)[(h * L + i) * L + j];
                            const real_t pdrop = (*probs)[(h * L + i) * L + j];
                            dP[j] *= (praw != 0) ? (pdrop / praw) : 0;
                        }
                    }
                    // softmax jacobian on raw probabilities
                    real_t dot = 0;
                    for (std::size_t j = 0; j < L; ++j) {
                        dot += dP[j] * (*raw_probs)[(h * L + i) * L + j];
                    }
                    for (std::size_t j = 0; j < L; ++j) {
                        const real_t praw = (*raw_probs)[(h * L + i) * L + j];
                        dS[j] = praw * (dP[j] - dot);
                    }
                    // dQ_i += sum_j dS_j K_j / sqrt(dh); dK_j += dS_j Q_i / sqrt(dh)
                    for (std::size_t j = 0; j < L; ++j) {
                        if (dS[j] == 0) continue;
                        const real_t s = dS[j] * inv_sqrt;
                        if (q.needs_grad()) {
                            real_t* gq = q.node()->grad.data() + i * d + off;
                            const real_t* kj = k.val().data() + j * d + off;
                            for (std::size_t p = 0; p < dh; ++p) gq[p] += s * kj[p];
                        }
                        if (k.needs_grad()) {
                            real_t* gk = k.node()->grad.data() + j * d + off;
                            const real_t* qi = q.val().data() + i * d + off;
                            for (std::size_t p = 0; p < dh; ++p) gk[p] += s * qi[p];
                        }
                    }
                }
            }
        });
    }
    return out;
}

}  // namespace recbench::tensor
