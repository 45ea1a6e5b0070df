#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mdmlp/rng.hpp"
#include "mdmlp/tensor.hpp"

namespace mdmlp {

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
struct Value {
    Tape* tape = nullptr;
    std::int32_t id = -1;

    const Tensor& tensor() const;
    const Shape& shape() const { return tensor().shape(); }
};

enum class Activation { Tanh, Gelu, GeluExact, Sigmoid, LeakyRelu, Softshrink };

// Gradient of a scalar loss with respect to tape nodes, keyed by node id.
// Leaves that do not participate in the loss read back as zeros.
class Gradients {
  public:
    const Tensor& at(Value v) const;

  private:
    friend class Tape;
    std::vector<Tensor> by_id_;
    mutable std::vector<Tensor> zeros_cache_;
    std::vector<Shape> shapes_;
};

// Define-by-run record of primitive ops; rebuilt per forward pass. Insertion
// order is topological, so one reverse sweep visits every node exactly once.
class Tape {
  public:
    using BackwardFn = std::function<void(Tape&, const Tensor& grad_out)>;

    Value leaf(Tensor t, bool requires_grad);
    Value constant(Tensor t) { return leaf(std::move(t), false); }

    Value matmul(Value a, Value b);
    Value add(Value a, Value b);
    Value sub(Value a, Value b);
    Value mul(Value a, Value b);
    Value neg(Value a);
    Value scale(Value a, double s);
    Value add_rowvec(Value m, Value v);  // [R x N] + v[N]
    Value mul_rowvec(Value m, Value v);  // [R x N] * v[N], column-wise
    Value recip(Value a);
    Value transpose(Value a);            // rank 2
    Value transpose_last2(Value a);      // rank >= 2
    Value reshape(Value a, Shape shape); // view, no copy
    Value slice_last(Value a, std::int64_t begin, std::int64_t end);
    Value concat_cols(Value a, Value b); // rank 2, along columns
    Value mean_rows(Value m);            // [R x N] -> [N]
    Value mean_mid3(Value a);            // [B x Q x N] -> [B x N]
    Value repeat_mid3(Value a, std::int64_t q); // [B x N] -> [B x q x N]
    Value tile_leading(Value a, std::int64_t b);
    Value activation(Activation kind, Value x, double param = 0.0);
    Value abs(Value x);
    Value atan(Value x);
    Value dropout(Value x, double p, Rng& rng, bool training);
    Value sum(Value x);
    Value mean(Value x);
    Value value_embed(Value x, Value w); // [.. x L] x [E] -> [.. x L x E]

    // Escape hatch for ops defined outside this header (spectral transforms).
    Value record(std::vector<Value> inputs, Tensor out, BackwardFn backward);

    // Reverse sweep from a scalar loss node.
    Gradients backward(Value loss);

    const Tensor& tensor_of(std::int32_t id) const { return nodes_[static_cast<std::size_t>(id)].out; }
    bool requires_grad(std::int32_t id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
    std::size_t node_count() const { return nodes_.size(); }
    std::size_t backward_visits() const { return visits_; }

    // Accumulate a gradient contribution; only meaningful inside backward fns.
    void accum(Value v, const Tensor& partial);
    void accum(Value v, Tensor&& partial);
    const Tensor* grad_of(std::int32_t id) const;

  private:
    struct Node {
        Tensor out;
        bool requires_grad = false;
        BackwardFn backward;
    };

    Value push(Tensor out, bool requires_grad, BackwardFn backward);
    Value unary_elementwise(Value x, Tensor out, Tensor deriv);

    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
    std::size_t visits_ = 0;
};

// y = x * W + b with W[in x out], b[out]; the bias may be an empty Value.
Value linear(Tape& t, Value x, Value w, Value b);

} // namespace mdmlp
