#include "rpwno/autodiff.hpp"

#include <cmath>
#include <memory>
#include <numbers>
#include <stdexcept>

#include "kernels.hpp"

namespace rpwno {

const Tensor& Var::value() const {
    if (!tape_) throw std::logic_error("Var is not bound to a tape");
    return tape_->value(id_);
}

Var Tape::push(Node node) {
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.size() - 1);
}

void Tape::check_owned(Var v) const {
    if (v.tape() != this || v.id() >= nodes_.size()) throw std::logic_error("Var does not belong to this tape");
}

Var Tape::constant(Tensor value) {
    Node n;
    n.value = std::move(value);
    return push(std::move(n));
}

Var Tape::constant_ref(const Tensor& value) {
    Node n;
    n.external = &value;
    return push(std::move(n));
}

Var Tape::leaf(Tensor value) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = true;
    return push(std::move(n));
}

Var Tape::parameter(Parameter& p) {
    if (!p.grad.same_shape(p.value)) p.zero_grad();
    Node n;
    n.external = &p.value;
    n.requires_grad = true;
    n.param = &p;
    return push(std::move(n));
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
    return record(std::move(value), std::vector<Var>(inputs), std::move(backward));
}

Var Tape::record(Tensor value, const std::vector<Var>& inputs, BackwardFn backward) {
    Node n;
    n.value = std::move(value);
    for (const auto& v : inputs) {
        check_owned(v);
        n.requires_grad = n.requires_grad || nodes_[v.id()].requires_grad;
    }
    if (n.requires_grad) n.backward = std::move(backward);
    return push(std::move(n));
}

const Tensor& Tape::value(std::size_t id) const {
    const auto& n = nodes_.at(id);
    return n.external ? *n.external : n.value;
}

const Tensor& Tape::grad(Var v) const {
    check_owned(v);
    const auto& n = nodes_[v.id()];
    if (!n.has_grad) throw std::logic_error("no gradient reached node " + std::to_string(v.id()));
    return n.grad;
}

Tensor& Tape::grad_buffer(std::size_t id) {
    auto& n = nodes_.at(id);
    if (!n.has_grad) {
        n.grad = Tensor::zeros_like(n.external ? *n.external : n.value);
        n.has_grad = true;
    }
    return n.grad;
}

void Tape::backward(Var loss) {
    if (nodes_.empty()) throw std::logic_error("backward on an empty tape");
    check_owned(loss);
    const Tensor& lv = value(loss.id());
    if (lv.numel() != 1) throw std::invalid_argument("backward needs a scalar loss, got shape " + shape_str(lv.shape()));
    for (auto& n : nodes_) {
        n.has_grad = false;
        n.grad = Tensor();
    }
    grad_buffer(loss.id())[0] = 1.0;
    visited_ = 0;
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
        auto& n = nodes_[i];
        if (!n.has_grad || !n.requires_grad) continue;
        ++visited_;
        if (n.backward) n.backward(*this, n.grad);
        if (n.param) {
            auto& g = n.param->grad;
            for (std::size_t j = 0; j < g.numel(); ++j) g[j] += n.grad[j];
        }
    }
}

void Tape::clear() {
    nodes_.clear();
    visited_ = 0;
}

// ---- elementwise --------------------------------------------------------------

namespace {

void require_same(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
}

void accumulate(Tensor& dst, const Tensor& src, double s = 1.0) {
    for (std::size_t i = 0; i < dst.numel(); ++i) dst[i] += s * src[i];
}

}  // namespace

Var add(Var a, Var b) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    require_same(av, bv, "add");
    Tensor out(av.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = av[i] + bv[i];
    const auto ia = a.id(), ib = b.id();
    return a.tape()->record(std::move(out), {a, b}, [ia, ib](Tape& t, const Tensor& g) {
        if (t.requires_grad(ia)) accumulate(t.grad_buffer(ia), g);
        if (t.requires_grad(ib)) accumulate(t.grad_buffer(ib), g);
    });
}

Var mul(Var a, Var b) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    require_same(av, bv, "mul");
    Tensor out(av.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = av[i] * bv[i];
    const auto ia = a.id(), ib = b.id();
    return a.tape()->record(std::move(out), {a, b}, [ia, ib](Tape& t, const Tensor& g) {
        const Tensor& x = t.value(ia);
        const Tensor& y = t.value(ib);
        if (t.requires_grad(ia)) {
            auto& d = t.grad_buffer(ia);
            for (std::size_t i = 0; i < d.numel(); ++i) d[i] += g[i] * y[i];
        }
        if (t.requires_grad(ib)) {
            auto& d = t.grad_buffer(ib);
            for (std::size_t i = 0; i < d.numel(); ++i) d[i] += g[i] * x[i];
        }
    });
}

Var scale(Var a, double s) {
    const Tensor& av = a.value();
    Tensor out(av.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = s * av[i];
    const auto ia = a.id();
    return a.tape()->record(std::move(out), {a}, [ia, s](Tape& t, const Tensor& g) {
        accumulate(t.grad_buffer(ia), g, s);
    });
}

Var sum(Var a) {
    double s = 0.0;
    for (double v : a.value().values()) s += v;
    const auto ia = a.id();
    return a.tape()->record(Tensor::scalar(s), {a}, [ia](Tape& t, const Tensor& g) {
        auto& d = t.grad_buffer(ia);
        const double gv = g[0];
        for (std::size_t i = 0; i < d.numel(); ++i) d[i] += gv;
    });
}

// ---- GeLU ---------------------------------------------------------------------

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }
}  // namespace

double gelu_value(double x) { return x * normal_cdf(x); }

Var gelu(Var x) {
    const Tensor& xv = x.value();
    Tensor out(xv.shape());
    Tape& tape = *x.tape();
    if (!tape.requires_grad(x)) {
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] = gelu_value(xv[i]);
        return tape.record(std::move(out), {x}, {});
    }
    // The derivative shares the CDF evaluation, so it is formed here rather than in backward.
    auto slope = std::make_shared<std::vector<double>>(out.numel());
    for (std::size_t i = 0; i < out.numel(); ++i) {
        const double z = xv[i];
        const double cdf = normal_cdf(z);
        out[i] = z * cdf;
        (*slope)[i] = cdf + z * kInvSqrt2Pi * std::exp(-0.5 * z * z);
    }
    const auto ix = x.id();
    return tape.record(std::move(out), {x}, [ix, slope](Tape& t, const Tensor& g) {
        auto& d = t.grad_buffer(ix);
        for (std::size_t i = 0; i < d.numel(); ++i) d[i] += g[i] * (*slope)[i];
    });
}

// ---- dense / conv1x1 ----------------------------------------------------------

namespace {

Var dense_impl(Var x, Var w, Var b, const char* op) {
    const Tensor& xv = x.value();
    const Tensor& wv = w.value();
    const Tensor& bv = b.value();
    if (xv.rank() == 0 || wv.rank() != 2 || xv.shape().back() != wv.extent(0))
        throw std::invalid_argument(std::string(op) + ": input shape " + shape_str(xv.shape()) +
                                    " incompatible with weight shape " + shape_str(wv.shape()));
    if (bv.rank() != 1 || bv.extent(0) != wv.extent(1))
        throw std::invalid_argument(std::string(op) + ": bias shape " + shape_str(bv.shape()) +
                                    " incompatible with weight shape " + shape_str(wv.shape()));
    const std::size_t k = wv.extent(0), o = wv.extent(1);
    const std::size_t rows = xv.numel() / k;
    const std::size_t chunks = xv.rank() >= 2 ? xv.extent(0) : 1;
    const std::size_t chunk_rows = rows / chunks;

    Shape os = xv.shape();
    os.back() = o;
    Tensor out(os);
    for (std::size_t c = 0; c < chunks; ++c)
        kernels::affine(xv.data() + c * chunk_rows * k, wv.data(), bv.data(), out.data() + c * chunk_rows * o,
                        chunk_rows, k, o);

    const auto ix = x.id(), iw = w.id(), ib = b.id();
    return x.tape()->record(std::move(out), {x, w, b}, [=](Tape& t, const Tensor& g) {
        const Tensor& X = t.value(ix);
        const Tensor& W = t.value(iw);
        if (t.requires_grad(ix)) {
            auto& dx = t.grad_buffer(ix);
            for (std::size_t c = 0; c < chunks; ++c) {
                auto dX = kernels::mat(dx.data() + c * chunk_rows * k, chunk_rows, k);
                dX.noalias() += kernels::cmat(g.data() + c * chunk_rows * o, chunk_rows, o) *
                                kernels::cmat(W.data(), k, o).transpose();
            }
        }
        if (t.requires_grad(iw)) {
            auto dW = kernels::mat(t.grad_buffer(iw).data(), k, o);
            for (std::size_t c = 0; c < chunks; ++c)
                dW.noalias() += kernels::cmat(X.data() + c * chunk_rows * k, chunk_rows, k).transpose() *
                                kernels::cmat(g.data() + c * chunk_rows * o, chunk_rows, o);
        }
        if (t.requires_grad(ib)) {
            auto& db = t.grad_buffer(ib);
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t j = 0; j < o; ++j) db[j] += g[r * o + j];
        }
    });
}

}  // namespace

Var dense(Var x, Var w, Var b) { return dense_impl(x, w, b, "dense"); }

Var conv1x1(Var x, Var w, Var b) {
    if (x.value().rank() < 3)
        throw std::invalid_argument("conv1x1: expected [batch, spatial..., channels], got " +
                                    shape_str(x.value().shape()));
    return dense_impl(x, w, b, "conv1x1");
}

}  // namespace rpwno
