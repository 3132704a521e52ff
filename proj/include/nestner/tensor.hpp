#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "nestner/errors.hpp"
#include "nestner/rng.hpp"

namespace nestner::ad {

// Dense f64 tensor, rank 1 or 2, with a shared-storage handle. Gradients
// live next to the values and are allocated as soon as a tensor becomes part
// of a differentiable graph, so backward closures never race on allocation.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
    static Tensor from(std::vector<int> shape, std::vector<double> values,
                       bool requires_grad = false);
    static Tensor scalar(double v);
    // Glorot/Xavier uniform: +-sqrt(6 / (fan_in + fan_out)). 1-D shapes use
    // fan_in = fan_out = n.
    static Tensor glorot(std::vector<int> shape, Rng& rng);

    bool defined() const { return impl_ != nullptr; }
    const std::vector<int>& shape() const;
    int numel() const;
    int rows() const;  // 1 for rank-1
    int cols() const;  // shape.back()

    // Tensors are handles onto shared storage; const on the handle does not
    // protect the buffer, mirroring shared_ptr::get.
    double* data() const;
    double item() const;  // scalar tensors only

    bool requires_grad() const;
    void set_requires_grad(bool v);
    double* grad() const;
    void zero_grad();

    Tensor clone() const;  // deep copy, detached from any graph

    bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

private:
    struct Impl {
        std::vector<int> shape;
        std::vector<double> value;
        std::vector<double> grad;  // sized with value when requires_grad
        bool requires_grad = false;
    };
    std::shared_ptr<Impl> impl_;
};

enum class ParamGroup { Encoder, Head };

struct Parameter {
    std::string name;
    ParamGroup group = ParamGroup::Encoder;
    Tensor value;  // shares storage with the owning model
};

// Reverse-mode tape. Forward ops append backward closures; backward() runs
// them in reverse creation order (a valid reverse-topological order because
// every op's inputs were created before its output) and then clears the
// tape. Parameter gradients persist across tapes and accumulate until
// zero_grad.
//
// One tape is single-threaded; independent tapes over read-only parameters
// may run in parallel threads.
class Tape {
public:
    // matrix product [m,k] x [k,n]
    Tensor matmul(const Tensor& a, const Tensor& b);
    Tensor transpose(const Tensor& a);

    Tensor add(const Tensor& a, const Tensor& b);  // same shape
    Tensor sub(const Tensor& a, const Tensor& b);
    Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
    Tensor scale(const Tensor& a, double c);
    Tensor add_rowwise(const Tensor& m, const Tensor& v);  // m[i][j] + v[j]
    Tensor add_colwise(const Tensor& m, const Tensor& v);  // m[i][j] + v[i]

    Tensor concat_cols(const std::vector<Tensor>& parts);
    Tensor slice_cols(const Tensor& a, int c0, int c1);
    Tensor row(const Tensor& m, int r);
    Tensor pick(const Tensor& a, int flat_index);  // -> scalar

    Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids);

    Tensor softmax_rows(const Tensor& a);
    Tensor log_softmax_rows(const Tensor& a);
    Tensor logsumexp(const Tensor& a);       // all entries -> scalar
    Tensor logsumexp_cols(const Tensor& m);  // [r,c] -> [c]

    Tensor layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps);
    Tensor relu(const Tensor& a);
    Tensor gelu(const Tensor& a);  // exact erf form

    // Inverted dropout: scales kept entries by 1/(1-p) at train time so
    // inference needs no rescale. Identity when training is off or p == 0.
    Tensor dropout(const Tensor& a, double p, bool training, Rng& rng);

    // out[i] = keep[i] ? a[i] : fill; gradient flows only through kept
    // entries.
    Tensor mask_fill(const Tensor& a, const std::vector<std::uint8_t>& keep, double fill);

    Tensor sum(const Tensor& a);  // -> scalar

    // Seeds d(loss)/d(loss) = 1 and propagates through the recorded graph,
    // accumulating into .grad of every reachable tensor. Frees the tape.
    void backward(const Tensor& loss);

    size_t size() const { return steps_.size(); }
    void clear() { steps_.clear(); }

private:
    Tensor make_output(std::vector<int> shape, bool requires_grad);
    void record(std::function<void()> fn) { steps_.push_back(std::move(fn)); }

    std::vector<std::function<void()>> steps_;
};

}  // namespace nestner::ad
