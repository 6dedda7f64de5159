#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "codegaze/errors.hpp"

namespace codegaze::nd {

using Shape = std::vector<int>;

std::string shape_str(const Shape& s);

struct TensorData {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // allocated lazily; same length as value once live
    bool requires_grad = false;

    long size() const { return static_cast<long>(value.size()); }
    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    }
};

// Dense real tensor handle. Copies share the underlying buffer; ops produce
// fresh tensors and record their backward step on the active Tape when any
// input participates in differentiation.
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(const Shape& shape, bool requires_grad = false);
    static Tensor full(const Shape& shape, double v, bool requires_grad = false);
    static Tensor from(const Shape& shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);

    bool defined() const { return d_ != nullptr; }
    const Shape& shape() const { return d_->shape; }
    int rank() const { return static_cast<int>(d_->shape.size()); }
    long size() const { return d_->size(); }

    // Reference accessors are lvalue-only: the buffer dies with the last
    // Tensor handle, so bind the result of an op before reading into it.
    std::vector<double>& value() & { return d_->value; }
    const std::vector<double>& value() const& { return d_->value; }
    std::vector<double> value() && { return d_->value; }
    std::vector<double>& grad() &;
    const std::vector<double>& grad() const&;
    std::vector<double> grad() && = delete;
    bool requires_grad() const { return d_->requires_grad; }
    void set_requires_grad(bool on);
    void zero_grad();

    // Scalar extraction; UsageError unless size() == 1.
    double item() const;

    double at(int i) const { return d_->value[static_cast<size_t>(i)]; }
    double at(int i, int j) const;
    void set(int i, double v) { d_->value[static_cast<size_t>(i)] = v; }
    void set(int i, int j, double v);

    TensorData* node() const { return d_.get(); }
    std::shared_ptr<TensorData> data_ptr() const { return d_; }

  private:
    std::shared_ptr<TensorData> d_;
};

// Records forward ops in execution order; backward() replays the exact
// reverse. Single-owner: only one active tape per thread.
class Tape {
  public:
    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Seeds d(loss)/d(loss) = 1 and runs recorded steps in reverse order,
    // accumulating into each participating tensor's grad. Clears the tape.
    void backward(const Tensor& loss);

    std::size_t recorded() const { return steps_.size(); }

    static Tape* active();
    static bool recording() { return active() != nullptr; }
    void record(std::function<void()> step) { steps_.push_back(std::move(step)); }

  private:
    std::vector<std::function<void()>> steps_;
};

// ---- forward ops ---------------------------------------------------------

// [m,k]x[k,n] -> [m,n]; [k]x[k,n] -> [n]; [m,k]x[k] -> [m]
Tensor matmul(const Tensor& a, const Tensor& b);
// same shape, or [m,n] + [n] broadcast over rows
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor elementwise_mul(const Tensor& a, const Tensor& b);
// out[i,:] = m[i,:] * s[i]
Tensor scale_rows(const Tensor& m, const Tensor& s);
// axis 0 only; all rank-1, or all rank-2 with equal column counts
Tensor concat(const std::vector<Tensor>& parts, int axis = 0);
// rank-1 rows of equal length -> [k,n]
Tensor stack_rows(const std::vector<Tensor>& rows);
// row i of [m,n] -> [n]
Tensor row(const Tensor& m, int i);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
// rank-1, or rank-2 along axis 1
Tensor softmax(const Tensor& x, int axis = -1);
// rank-1 with constant mask; masked positions get probability 0
Tensor masked_softmax(const Tensor& x, const std::vector<std::uint8_t>& mask);
Tensor embed_lookup(const Tensor& table, const std::vector<int>& ids);
Tensor flatten(const Tensor& x);
// sum(v*mask)/sum(mask); mask is constant
Tensor masked_mean(const Tensor& v, const std::vector<double>& mask);
// mean of scalar tensors
Tensor mean_of(const std::vector<Tensor>& scalars);

Tensor mse(const Tensor& pred, const Tensor& target);
Tensor cross_entropy(const Tensor& logits, int target_id);

struct GruParams {
    Tensor Wz, Wr, Wh;  // [d_in, d_h]
    Tensor Uz, Ur, Uh;  // [d_h, d_h]
    Tensor bz, br, bh;  // [d_h]

    static GruParams init(int d_in, int d_h, std::mt19937_64& rng);
    std::vector<std::pair<std::string, Tensor>> named(const std::string& prefix) const;
    std::vector<Tensor> all() const;
};

// z = sig(xWz + hUz + bz); r = sig(xWr + hUr + br);
// hc = tanh(xWh + (r*h)Uh + bh); h' = h + z*(hc - h)
Tensor gru_cell(const Tensor& x, const Tensor& h, const GruParams& p);

// states' = tanh(rownorm(adj) * states * W + b), with zero-degree rows of adj
// (padding) forced to zero. adj is treated as a constant.
Tensor gnn_hop(const Tensor& states, const Tensor& adj, const Tensor& W, const Tensor& b);

// ---- optimizers ----------------------------------------------------------

class Optimizer {
  public:
    enum class Kind { Sgd, Adam };

    Optimizer(Kind kind, double lr) : kind_(kind), lr_(lr) {}
    static Optimizer sgd(double lr) { return Optimizer(Kind::Sgd, lr); }
    static Optimizer adam(double lr) { return Optimizer(Kind::Adam, lr); }

    // Applies one update from accumulated grads, then zeroes them.
    void step(const std::vector<Tensor>& params);

    Kind kind() const { return kind_; }
    double learning_rate() const { return lr_; }
    long step_count() const { return step_count_; }

    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

  private:
    struct Moments {
        std::vector<double> m, v;
    };
    Kind kind_;
    double lr_;
    long step_count_ = 0;
    std::unordered_map<TensorData*, Moments> state_;
};

// ---- init / rng helpers --------------------------------------------------

// uniform in [0,1) from the top 53 bits of the engine output
double unit_uniform(std::mt19937_64& rng);
double uniform_in(std::mt19937_64& rng, double lo, double hi);
Tensor uniform_param(const Shape& shape, double lo, double hi, std::mt19937_64& rng);
Tensor xavier_param(int rows, int cols, std::mt19937_64& rng);
Tensor zeros_param(const Shape& shape);

template <typename T>
void fisher_yates(std::vector<T>& v, std::mt19937_64& rng) {
    for (size_t i = v.size(); i > 1; --i) {
        size_t j = static_cast<size_t>(rng() % i);
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace codegaze::nd
