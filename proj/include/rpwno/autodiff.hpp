#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <string>
#include <vector>

#include "rpwno/tensor.hpp"

namespace rpwno {

struct Parameter {
    Parameter() = default;
    Parameter(std::string name, Tensor value)
        : name(std::move(name)), value(std::move(value)), grad(Tensor::zeros_like(this->value)) {}

    std::string name;
    Tensor value;
    Tensor grad;

    void zero_grad() { grad = Tensor::zeros_like(value); }
};

class Tape;

// Handle to a node on a Tape. Cheap to copy; valid while the tape is alive and not cleared.
class Var {
public:
    Var() = default;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    std::size_t id() const { return id_; }
    Tape* tape() const { return tape_; }

private:
    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

// Define-by-run reverse-mode tape. Nodes are appended in execution order, so every
// operand precedes its consumers and a reverse sweep is a valid topological order.
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, const Tensor& grad_out)>;

    Var constant(Tensor value);
    // References external storage that must outlive the tape; no gradient.
    Var constant_ref(const Tensor& value);
    Var leaf(Tensor value);
    // Gradients reaching this node are accumulated into p.grad by backward().
    Var parameter(Parameter& p);

    // Op implementers: record an output whose gradient is pushed to inputs by `backward`.
    Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);
    Var record(Tensor value, const std::vector<Var>& inputs, BackwardFn backward);

    void backward(Var loss);

    const Tensor& value(std::size_t id) const;
    const Tensor& grad(Var v) const;
    Tensor& grad_buffer(std::size_t id);
    bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
    bool requires_grad(Var v) const { return requires_grad(v.id()); }

    std::size_t size() const { return nodes_.size(); }
    std::size_t visited_in_last_backward() const { return visited_; }
    void clear();

private:
    struct Node {
        Tensor value;
        const Tensor* external = nullptr;
        Tensor grad;
        bool has_grad = false;
        bool requires_grad = false;
        Parameter* param = nullptr;
        BackwardFn backward;
    };

    Var push(Node node);
    void check_owned(Var v) const;

    std::vector<Node> nodes_;
    std::size_t visited_ = 0;
};

// ---- differentiable ops -------------------------------------------------------

Var add(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var sum(Var a);

double gelu_value(double x);
Var gelu(Var x);

// Affine map along the last axis: x[..., k] * W[k, o] + b[o].
Var dense(Var x, Var w, Var b);

// Pointwise channel mix of a channel-last field x[s, spatial..., k]; spatial extents preserved.
Var conv1x1(Var x, Var w, Var b);

}  // namespace rpwno
