#include "mdmlp/tape.hpp"

#include <cmath>
#include <utility>

#include "mdmlp/errors.hpp"

namespace mdmlp {

namespace {

constexpr double kGeluC = 0.7978845608028654; // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
constexpr double kInvSqrt2 = 0.7071067811865476;
constexpr double kInvSqrt2Pi = 0.3989422804014327;

void check_rank2(const Tensor& t, const char* op) {
    if (t.rank() != 2) throw DimensionError(std::string(op) + " expects rank 2, got " + shape_str(t.shape()));
}

} // namespace

const Tensor& Value::tensor() const { return tape->tensor_of(id); }

const Tensor& Gradients::at(Value v) const {
    const auto id = static_cast<std::size_t>(v.id);
    if (id < by_id_.size() && !by_id_[id].empty()) return by_id_[id];
    if (zeros_cache_.size() < shapes_.size()) zeros_cache_.resize(shapes_.size());
    if (zeros_cache_[id].empty()) zeros_cache_[id] = Tensor::zeros(shapes_[id]);
    return zeros_cache_[id];
}

Value Tape::push(Tensor out, bool requires_grad, BackwardFn backward) {
    Node n;
    n.out = std::move(out);
    n.requires_grad = requires_grad;
    if (requires_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Value{this, static_cast<std::int32_t>(nodes_.size() - 1)};
}

Value Tape::leaf(Tensor t, bool requires_grad) {
    return push(std::move(t), requires_grad, nullptr);
}

void Tape::accum(Value v, Tensor&& partial) {
    auto& slot = grads_[static_cast<std::size_t>(v.id)];
    if (slot.empty()) {
        slot = std::move(partial);
        return;
    }
    auto dst = slot.mut();
    auto src = partial.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void Tape::accum(Value v, const Tensor& partial) {
    auto& slot = grads_[static_cast<std::size_t>(v.id)];
    if (slot.empty()) {
        slot = partial.clone();
        return;
    }
    auto dst = slot.mut();
    auto src = partial.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

const Tensor* Tape::grad_of(std::int32_t id) const {
    const auto& g = grads_[static_cast<std::size_t>(id)];
    return g.empty() ? nullptr : &g;
}

Gradients Tape::backward(Value loss) {
    if (loss.tensor().size() != 1)
        throw ContractError("backward requires a scalar loss, got " + shape_str(loss.shape()));
    grads_.assign(nodes_.size(), Tensor());
    visits_ = 0;
    grads_[static_cast<std::size_t>(loss.id)] = Tensor::full(loss.tensor().shape(), 1.0);
    for (std::int32_t id = loss.id; id >= 0; --id) {
        auto& slot = grads_[static_cast<std::size_t>(id)];
        if (slot.empty()) continue;
        ++visits_;
        auto& node = nodes_[static_cast<std::size_t>(id)];
        if (node.backward) node.backward(*this, slot);
    }
    Gradients out;
    out.shapes_.reserve(nodes_.size());
    for (const auto& n : nodes_) out.shapes_.push_back(n.out.shape());
    out.by_id_ = std::move(grads_);
    grads_.clear();
    return out;
}

Value Tape::matmul(Value a, Value b) {
    const Tensor& ta = a.tensor();
    const Tensor& tb = b.tensor();
    check_rank2(ta, "matmul");
    check_rank2(tb, "matmul");
    const auto m = ta.dim(0), k = ta.dim(1), k2 = tb.dim(0), n = tb.dim(1);
    if (k != k2)
        throw DimensionError("matmul inner dimensions " + shape_str(ta.shape()) + " * " +
                             shape_str(tb.shape()));
    Tensor out = Tensor::uninit({m, n});
    gemm(false, false, m, n, k, ta.ptr(), k, tb.ptr(), n, 0.0, out.mut().data(), n);
    const bool need_a = requires_grad(a.id), need_b = requires_grad(b.id);
    return push(std::move(out), need_a || need_b,
                [a, b, m, n, k, need_a, need_b](Tape& t, const Tensor& g) {
                    if (need_a) {
                        Tensor ga = Tensor::uninit({m, k});
                        gemm(false, true, m, k, n, g.ptr(), n, b.tensor().ptr(), n, 0.0,
                             ga.mut().data(), k);
                        t.accum(a, std::move(ga));
                    }
                    if (need_b) {
                        Tensor gb = Tensor::uninit({k, n});
                        gemm(true, false, k, n, m, a.tensor().ptr(), k, g.ptr(), n, 0.0,
                             gb.mut().data(), n);
                        t.accum(b, std::move(gb));
                    }
                });
}

Value Tape::add(Value a, Value b) {
    const Tensor& ta = a.tensor();
    const Tensor& tb = b.tensor();
    if (!ta.same_shape(tb))
        throw DimensionError("add shapes " + shape_str(ta.shape()) + " vs " + shape_str(tb.shape()));
    Tensor out = Tensor::uninit(ta.shape());
    auto o = out.mut();
    auto x = ta.data(), y = tb.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + y[i];
    const bool need_a = requires_grad(a.id), need_b = requires_grad(b.id);
    return push(std::move(out), need_a || need_b, [a, b, need_a, need_b](Tape& t, const Tensor& g) {
        if (need_a) t.accum(a, g);
        if (need_b) t.accum(b, g);
    });
}

Value Tape::sub(Value a, Value b) {
    const Tensor& ta = a.tensor();
    const Tensor& tb = b.tensor();
    if (!ta.same_shape(tb))
        throw DimensionError("sub shapes " + shape_str(ta.shape()) + " vs " + shape_str(tb.shape()));
    Tensor out = Tensor::uninit(ta.shape());
    auto o = out.mut();
    auto x = ta.data(), y = tb.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] - y[i];
    const bool need_a = requires_grad(a.id), need_b = requires_grad(b.id);
    return push(std::move(out), need_a || need_b, [a, b, need_a, need_b](Tape& t, const Tensor& g) {
        if (need_a) t.accum(a, g);
        if (need_b) {
            Tensor gb = Tensor::uninit(g.shape());
            auto d = gb.mut();
            auto s = g.data();
            for (std::size_t i = 0; i < d.size(); ++i) d[i] = -s[i];
            t.accum(b, std::move(gb));
        }
    });
}

Value Tape::mul(Value a, Value b) {
    const Tensor& ta = a.tensor();
    const Tensor& tb = b.tensor();
    if (!ta.same_shape(tb))
        throw DimensionError("mul shapes " + shape_str(ta.shape()) + " vs " + shape_str(tb.shape()));
    Tensor out = Tensor::uninit(ta.shape());
    auto o = out.mut();
    auto x = ta.data(), y = tb.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * y[i];
    const bool need_a = requires_grad(a.id), need_b = requires_grad(b.id);
    return push(std::move(out), need_a || need_b, [a, b, need_a, need_b](Tape& t, const Tensor& g) {
        auto s = g.data();
        if (need_a) {
            Tensor ga = Tensor::uninit(g.shape());
            auto d = ga.mut();
            auto y = b.tensor().data();
            for (std::size_t i = 0; i < d.size(); ++i) d[i] = s[i] * y[i];
            t.accum(a, std::move(ga));
        }
        if (need_b) {
            Tensor gb = Tensor::uninit(g.shape());
            auto d = gb.mut();
            auto x = a.tensor().data();
            for (std::size_t i = 0; i < d.size(); ++i) d[i] = s[i] * x[i];
            t.accum(b, std::move(gb));
        }
    });
}

Value Tape::neg(Value a) { return scale(a, -1.0); }

Value Tape::scale(Value a, double s) {
    const Tensor& ta = a.tensor();
    Tensor out = Tensor::uninit(ta.shape());
    auto o = out.mut();
    auto x = ta.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * s;
    return push(std::move(out), requires_grad(a.id), [a, s](Tape& t, const Tensor& g) {
        Tensor ga = Tensor::uninit(g.shape());
        auto d = ga.mut();
        auto src = g.data();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = src[i] * s;
        t.accum(a, std::move(ga));
    });
}

namespace {

std::int64_t rowvec_len(const Tensor& v) {
    if (v.rank() == 1) return v.dim(0);
    if (v.rank() == 2 && v.dim(0) == 1) return v.dim(1);
    throw DimensionError("row vector must be [N] or [1 x N], got " + shape_str(v.shape()));
}

} // namespace

Value Tape::add_rowvec(Value m, Value v) {
    const Tensor& tm = m.tensor();
    const Tensor& tv = v.tensor();
    check_rank2(tm, "add_rowvec");
    const auto rows = tm.dim(0), cols = tm.dim(1);
    if (rowvec_len(tv) != cols)
        throw DimensionError("add_rowvec width " + shape_str(tm.shape()) + " vs " + shape_str(tv.shape()));
    Tensor out = Tensor::uninit(tm.shape());
    auto o = out.mut();
    auto x = tm.data(), y = tv.data();
    for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t c = 0; c < cols; ++c) o[r * cols + c] = x[r * cols + c] + y[c];
    const bool need_m = requires_grad(m.id), need_v = requires_grad(v.id);
    return push(std::move(out), need_m || need_v,
                [m, v, rows, cols, need_m, need_v](Tape& t, const Tensor& g) {
                    if (need_m) t.accum(m, g);
                    if (need_v) {
                        Tensor gv = Tensor::zeros(v.tensor().shape());
                        auto d = gv.mut();
                        auto s = g.data();
                        for (std::int64_t r = 0; r < rows; ++r)
                            for (std::int64_t c = 0; c < cols; ++c) d[c] += s[r * cols + c];
                        t.accum(v, std::move(gv));
                    }
                });
}

Value Tape::mul_rowvec(Value m, Value v) {
    const Tensor& tm = m.tensor();
    const Tensor& tv = v.tensor();
    check_rank2(tm, "mul_rowvec");
    const auto rows = tm.dim(0), cols = tm.dim(1);
    if (rowvec_len(tv) != cols)
        throw DimensionError("mul_rowvec width " + shape_str(tm.shape()) + " vs " + shape_str(tv.shape()));
    Tensor out = Tensor::uninit(tm.shape());
    auto o = out.mut();
    auto x = tm.data(), y = tv.data();
    for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t c = 0; c < cols; ++c) o[r * cols + c] = x[r * cols + c] * y[c];
    const bool need_m = requires_grad(m.id), need_v = requires_grad(v.id);
    return push(std::move(out), need_m || need_v,
                [m, v, rows, cols, need_m, need_v](Tape& t, const Tensor& g) {
                    auto s = g.data();
                    if (need_m) {
                        Tensor gm = Tensor::uninit(m.tensor().shape());
                        auto d = gm.mut();
                        auto y = v.tensor().data();
                        for (std::int64_t r = 0; r < rows; ++r)
                            for (std::int64_t c = 0; c < cols; ++c)
                                d[r * cols + c] = s[r * cols + c] * y[c];
                        t.accum(m, std::move(gm));
                    }
                    if (need_v) {
                        Tensor gv = Tensor::zeros(v.tensor().shape());
                        auto d = gv.mut();
                        auto x = m.tensor().data();
                        for (std::int64_t r = 0; r < rows; ++r)
                            for (std::int64_t c = 0; c < cols; ++c)
                                d[c] += s[r * cols + c] * x[r * cols + c];
                        t.accum(v, std::move(gv));
                    }
                });
}

Value Tape::recip(Value a) {
    const Tensor& ta = a.tensor();
    Tensor out = Tensor::uninit(ta.shape());
    auto o = out.mut();
    auto x = ta.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = 1.0 / x[i];
    Value r = push(std::move(out), requires_grad(a.id), nullptr);
    if (requires_grad(a.id)) {
        nodes_.back().backward = [a, r](Tape& t, const Tensor& g) {
            Tensor ga = Tensor::uninit(g.shape());
            auto d = ga.mut();
            auto s = g.data();
            auto y = r.tensor().data();
            for (std::size_t i = 0; i < d.size(); ++i) d[i] = -s[i] * y[i] * y[i];
            t.accum(a, std::move(ga));
        };
    }
    return r;
}

Value Tape::transpose(Value a) {
    const Tensor& ta = a.tensor();
    check_rank2(ta, "transpose");
    const auto rows = ta.dim(0), cols = ta.dim(1);
    Tensor out = Tensor::uninit({cols, rows});
    auto o = out.mut();
    auto x = ta.data();
    for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t c = 0; c < cols; ++c) o[c * rows + r] = x[r * cols + c];
    return push(std::move(out), requires_grad(a.id), [a, rows, cols](Tape& t, const Tensor& g) {
        Tensor ga = Tensor::uninit({rows, cols});
        auto d = ga.mut();
        auto s = g.data();
        for (std::int64_t c = 0; c < cols; ++c)
            for (std::int64_t r = 0; r < rows; ++r) d[r * cols + c] = s[c * rows + r];
        t.accum(a, std::move(ga));
    });
}

namespace {

Tensor transpose_last2_data(const Tensor& t) {
    const int rk = t.rank();
    const auto a = t.dim(rk - 2), b = t.dim(rk - 1);
    std::int64_t batch = 1;
    for (int i = 0; i < rk - 2; ++i) batch *= t.dim(i);
    Shape os = t.shape();
    std::swap(os[static_cast<std::size_t>(rk - 2)], os[static_cast<std::size_t>(rk - 1)]);
    Tensor out = Tensor::uninit(os);
    auto o = out.mut();
    auto x = t.data();
    for (std::int64_t n = 0; n < batch; ++n) {
        const double* src = x.data() + n * a * b;
        double* dst = o.data() + n * a * b;
        for (std::int64_t i = 0; i < a; ++i)
            for (std::int64_t j = 0; j < b; ++j) dst[j * a + i] = src[i * b + j];
    }
    return out;
}

} // namespace

Value Tape::transpose_last2(Value a) {
    const Tensor& ta = a.tensor();
    if (ta.rank() < 2)
        throw DimensionError("transpose_last2 expects rank >= 2, got " + shape_str(ta.shape()));
    return push(transpose_last2_data(ta), requires_grad(a.id), [a](Tape& t, const Tensor& g) {
        t.accum(a, transpose_last2_data(g));
    });
}

Value Tape::reshape(Value a, Shape shape) {
    const Tensor& ta = a.tensor();
    Shape in_shape = ta.shape();
    return push(ta.reshaped(std::move(shape)), requires_grad(a.id),
                [a, in_shape](Tape& t, const Tensor& g) {
                    const Tensor view = g.reshaped(in_shape);
                    t.accum(a, view); // cloned inside accum, the view aliases g
                });
}

Value Tape::slice_last(Value a, std::int64_t begin, std::int64_t end) {
    const Tensor& ta = a.tensor();
    const int rk = ta.rank();
    if (rk < 1) throw DimensionError("slice_last on scalar");
    const auto w = ta.dim(rk - 1);
    if (begin < 0 || end > w || begin >= end)
        throw DimensionError("slice_last range [" + std::to_string(begin) + "," + std::to_string(end) +
                             ") out of width " + std::to_string(w));
    std::int64_t batch = ta.size() / w;
    Shape os = ta.shape();
    os.back() = end - begin;
    Tensor out = Tensor::uninit(os);
    auto o = out.mut();
    auto x = ta.data();
    const auto sw = end - begin;
    for (std::int64_t n = 0; n < batch; ++n)
        for (std::int64_t j = 0; j < sw; ++j) o[n * sw + j] = x[n * w + begin + j];
    return push(std::move(out), requires_grad(a.id),
                [a, begin, w, sw, batch](Tape& t, const Tensor& g) {
                    Tensor ga = Tensor::zeros(a.tensor().shape());
                    auto d = ga.mut();
                    auto s = g.data();
                    for (std::int64_t n = 0; n < batch; ++n)
                        for (std::int64_t j = 0; j < sw; ++j) d[n * w + begin + j] = s[n * sw + j];
                    t.accum(a, std::move(ga));
                });
}

Value Tape::concat_cols(Value a, Value b) {
    const Tensor& ta = a.tensor();
    const Tensor& tb = b.tensor();
    check_rank2(ta, "concat_cols");
    check_rank2(tb, "concat_cols");
    if (ta.dim(0) != tb.dim(0))
        throw DimensionError("concat_cols rows " + shape_str(ta.shape()) + " vs " + shape_str(tb.shape()));
    const auto rows = ta.dim(0), na = ta.dim(1), nb = tb.dim(1);
    Tensor out = Tensor::uninit({rows, na + nb});
    auto o = out.mut();
    auto x = ta.data(), y = tb.data();
    for (std::int64_t r = 0; r < rows; ++r) {
        for (std::int64_t c = 0; c < na; ++c) o[r * (na + nb) + c] = x[r * na + c];
        for (std::int64_t c = 0; c < nb; ++c) o[r * (na + nb) + na + c] = y[r * nb + c];
    }
    const bool need_a = requires_grad(a.id), need_b = requires_grad(b.id);
    return push(std::move(out), need_a || need_b,
                [a, b, rows, na, nb, need_a, need_b](Tape& t, const Tensor& g) {
                    auto s = g.data();
                    if (need_a) {
                        Tensor ga = Tensor::uninit({rows, na});
                        auto d = ga.mut();
                        for (std::int64_t r = 0; r < rows; ++r)
                            for (std::int64_t c = 0; c < na; ++c) d[r * na + c] = s[r * (na + nb) + c];
                        t.accum(a, std::move(ga));
                    }
                    if (need_b) {
                        Tensor gb = Tensor::uninit({rows, nb});
                        auto d = gb.mut();
                        for (std::int64_t r = 0; r < rows; ++r)
                            for (std::int64_t c = 0; c < nb; ++c)
                                d[r * nb + c] = s[r * (na + nb) + na + c];
                        t.accum(b, std::move(gb));
                    }
                });
}

Value Tape::mean_rows(Value m) {
    const Tensor& tm = m.tensor();
    check_rank2(tm, "mean_rows");
    const auto rows = tm.dim(0), cols = tm.dim(1);
    Tensor out = Tensor::zeros({cols});
    auto o = out.mut();
    auto x = tm.data();
    for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t c = 0; c < cols; ++c) o[c] += x[r * cols + c];
    for (std::int64_t c = 0; c < cols; ++c) o[c] /= static_cast<double>(rows);
    return push(std::move(out), requires_grad(m.id), [m, rows, cols](Tape& t, const Tensor& g) {
        Tensor gm = Tensor::uninit({rows, cols});
        auto d = gm.mut();
        auto s = g.data();
        const double inv = 1.0 / static_cast<double>(rows);
        for (std::int64_t r = 0; r < rows; ++r)
            for (std::int64_t c = 0; c < cols; ++c) d[r * cols + c] = s[c] * inv;
        t.accum(m, std::move(gm));
    });
}

Value Tape::mean_mid3(Value a) {
    const Tensor& ta = a.tensor();
    if (ta.rank() != 3) throw DimensionError("mean_mid3 expects rank 3, got " + shape_str(ta.shape()));
    const auto b = ta.dim(0), q = ta.dim(1), n = ta.dim(2);
    Tensor out = Tensor::zeros({b, n});
    auto o = out.mut();
    auto x = ta.data();
    for (std::int64_t i = 0; i < b; ++i)
        for (std::int64_t j = 0; j < q; ++j)
            for (std::int64_t c = 0; c < n; ++c) o[i * n + c] += x[(i * q + j) * n + c];
    const double inv = 1.0 / static_cast<double>(q);
    for (auto& v : o) v *= inv;
    return push(std::move(out), requires_grad(a.id), [a, b, q, n, inv](Tape& t, const Tensor& g) {
        Tensor ga = Tensor::uninit({b, q, n});
        auto d = ga.mut();
        auto s = g.data();
        for (std::int64_t i = 0; i < b; ++i)
            for (std::int64_t j = 0; j < q; ++j)
                for (std::int64_t c = 0; c < n; ++c) d[(i * q + j) * n + c] = s[i * n + c] * inv;
        t.accum(a, std::move(ga));
    });
}

Value Tape::repeat_mid3(Value a, std::int64_t q) {
    const Tensor& ta = a.tensor();
    check_rank2(ta, "repeat_mid3");
    const auto b = ta.dim(0), n = ta.dim(1);
    Tensor out = Tensor::uninit({b, q, n});
    auto o = out.mut();
    auto x = ta.data();
    for (std::int64_t i = 0; i < b; ++i)
        for (std::int64_t j = 0; j < q; ++j)
            for (std::int64_t c = 0; c < n; ++c) o[(i * q + j) * n + c] = x[i * n + c];
    return push(std::move(out), requires_grad(a.id), [a, b, q, n](Tape& t, const Tensor& g) {
        Tensor ga = Tensor::zeros({b, n});
        auto d = ga.mut();
        auto s = g.data();
        for (std::int64_t i = 0; i < b; ++i)
            for (std::int64_t j = 0; j < q; ++j)
                for (std::int64_t c = 0; c < n; ++c) d[i * n + c] += s[(i * q + j) * n + c];
        t.accum(a, std::move(ga));
    });
}

Value Tape::tile_leading(Value a, std::int64_t b) {
    const Tensor& ta = a.tensor();
    const auto n = ta.size();
    Shape os;
    os.push_back(b);
    for (auto d : ta.shape()) os.push_back(d);
    Tensor out = Tensor::uninit(os);
    auto o = out.mut();
    auto x = ta.data();
    for (std::int64_t i = 0; i < b; ++i)
        for (std::int64_t j = 0; j < n; ++j) o[i * n + j] = x[j];
    return push(std::move(out), requires_grad(a.id), [a, b, n](Tape& t, const Tensor& g) {
        Tensor ga = Tensor::zeros(a.tensor().shape());
        auto d = ga.mut();
        auto s = g.data();
        for (std::int64_t i = 0; i < b; ++i)
            for (std::int64_t j = 0; j < n; ++j) d[j] += s[i * n + j];
        t.accum(a, std::move(ga));
    });
}

Value Tape::activation(Activation kind, Value x, double param) {
    const Tensor& tx = x.tensor();
    const auto n = static_cast<std::size_t>(tx.size());
    Tensor out_t = Tensor::uninit(tx.shape());
    Tensor deriv_t = Tensor::uninit(tx.shape());
    auto out = out_t.mut();
    auto dydx = deriv_t.mut();
    auto in = tx.data();
    switch (kind) {
        case Activation::Tanh:
            for (std::size_t i = 0; i < n; ++i) {
                const double y = std::tanh(in[i]);
                out[i] = y;
                dydx[i] = 1.0 - y * y;
            }
            break;
        case Activation::Gelu:
            for (std::size_t i = 0; i < n; ++i) {
                const double v = in[i];
                const double u = kGeluC * (v + kGeluA * v * v * v);
                const double th = std::tanh(u);
                out[i] = 0.5 * v * (1.0 + th);
                dydx[i] = 0.5 * (1.0 + th) +
                          0.5 * v * (1.0 - th * th) * kGeluC * (1.0 + 3.0 * kGeluA * v * v);
            }
            break;
        case Activation::GeluExact:
            for (std::size_t i = 0; i < n; ++i) {
                const double v = in[i];
                const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
                out[i] = v * cdf;
                dydx[i] = cdf + v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
            }
            break;
        case Activation::Sigmoid:
            for (std::size_t i = 0; i < n; ++i) {
                const double y = 1.0 / (1.0 + std::exp(-in[i]));
                out[i] = y;
                dydx[i] = y * (1.0 - y);
            }
            break;
        case Activation::LeakyRelu:
            for (std::size_t i = 0; i < n; ++i) {
                const bool pos = in[i] > 0.0;
                out[i] = pos ? in[i] : param * in[i];
                dydx[i] = pos ? 1.0 : param;
            }
            break;
        case Activation::Softshrink:
            if (param < 0.0) throw ConfigError("softshrink threshold must be >= 0");
            for (std::size_t i = 0; i < n; ++i) {
                const double v = in[i];
                if (v > param) {
                    out[i] = v - param;
                    dydx[i] = 1.0;
                } else if (v < -param) {
                    out[i] = v + param;
                    dydx[i] = 1.0;
                } else {
                    out[i] = 0.0;
                    dydx[i] = 0.0;
                }
            }
            break;
    }
    return unary_elementwise(x, std::move(out_t), std::move(deriv_t));
}

Value Tape::abs(Value x) {
    const Tensor& tx = x.tensor();
    const auto n = static_cast<std::size_t>(tx.size());
    Tensor out_t = Tensor::uninit(tx.shape());
    Tensor deriv_t = Tensor::uninit(tx.shape());
    auto out = out_t.mut();
    auto dydx = deriv_t.mut();
    auto in = tx.data();
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = std::fabs(in[i]);
        dydx[i] = in[i] > 0.0 ? 1.0 : (in[i] < 0.0 ? -1.0 : 0.0);
    }
    return unary_elementwise(x, std::move(out_t), std::move(deriv_t));
}

Value Tape::atan(Value x) {
    const Tensor& tx = x.tensor();
    const auto n = static_cast<std::size_t>(tx.size());
    Tensor out_t = Tensor::uninit(tx.shape());
    Tensor deriv_t = Tensor::uninit(tx.shape());
    auto out = out_t.mut();
    auto dydx = deriv_t.mut();
    auto in = tx.data();
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = std::atan(in[i]);
        dydx[i] = 1.0 / (1.0 + in[i] * in[i]);
    }
    return unary_elementwise(x, std::move(out_t), std::move(deriv_t));
}

Value Tape::unary_elementwise(Value x, Tensor out, Tensor deriv) {
    if (!requires_grad(x.id)) return push(std::move(out), false, nullptr);
    return push(std::move(out), true, [x, deriv](Tape& t, const Tensor& g) {
        Tensor gx = Tensor::uninit(g.shape());
        auto d = gx.mut();
        auto s = g.data();
        auto dv = deriv.data();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = s[i] * dv[i];
        t.accum(x, std::move(gx));
    });
}

Value Tape::dropout(Value x, double p, Rng& rng, bool training) {
    if (p < 0.0 || p >= 1.0) throw ConfigError("dropout probability must be in [0, 1)");
    if (!training || p == 0.0) return x;
    const Tensor& tx = x.tensor();
    const auto n = static_cast<std::size_t>(tx.size());
    const double keep_scale = 1.0 / (1.0 - p);
    Tensor mask = Tensor::uninit(tx.shape());
    auto mk = mask.mut();
    for (std::size_t i = 0; i < n; ++i) mk[i] = rng.uniform() < p ? 0.0 : keep_scale;
    Tensor out = Tensor::uninit(tx.shape());
    auto o = out.mut();
    auto in = tx.data();
    for (std::size_t i = 0; i < n; ++i) o[i] = in[i] * mk[i];
    return push(std::move(out), requires_grad(x.id), [x, mask](Tape& t, const Tensor& g) {
        Tensor gx = Tensor::uninit(g.shape());
        auto d = gx.mut();
        auto s = g.data();
        auto mk = mask.data();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = s[i] * mk[i];
        t.accum(x, std::move(gx));
    });
}

Value Tape::sum(Value x) {
    const Tensor& tx = x.tensor();
    double acc = 0.0;
    for (double v : tx.data()) acc += v;
    return push(Tensor::scalar(acc), requires_grad(x.id), [x](Tape& t, const Tensor& g) {
        t.accum(x, Tensor::full(x.tensor().shape(), g.item()));
    });
}

Value Tape::mean(Value x) {
    const Tensor& tx = x.tensor();
    const double inv = 1.0 / static_cast<double>(tx.size());
    double acc = 0.0;
    for (double v : tx.data()) acc += v;
    return push(Tensor::scalar(acc * inv), requires_grad(x.id), [x, inv](Tape& t, const Tensor& g) {
        t.accum(x, Tensor::full(x.tensor().shape(), g.item() * inv));
    });
}

Value Tape::value_embed(Value x, Value w) {
    const Tensor& tx = x.tensor();
    const Tensor& tw = w.tensor();
    if (tw.rank() != 1 || tw.dim(0) < 1)
        throw ConfigError("value_embed weight must be a non-empty vector");
    const auto nx = tx.size();
    const auto e = tw.dim(0);
    Shape os = tx.shape();
    os.push_back(e);
    Tensor out = Tensor::uninit(os);
    auto o = out.mut();
    auto in = tx.data();
    auto wv = tw.data();
    for (std::int64_t i = 0; i < nx; ++i)
        for (std::int64_t j = 0; j < e; ++j) o[i * e + j] = in[i] * wv[j];
    const bool need_x = requires_grad(x.id), need_w = requires_grad(w.id);
    return push(std::move(out), need_x || need_w,
                [x, w, nx, e, need_x, need_w](Tape& t, const Tensor& g) {
                    if (need_x) {
                        Tensor gx = Tensor::uninit(x.tensor().shape());
                        gemm(false, false, nx, 1, e, g.ptr(), e, w.tensor().ptr(), 1, 0.0,
                             gx.mut().data(), 1);
                        t.accum(x, std::move(gx));
                    }
                    if (need_w) {
                        Tensor gw = Tensor::uninit({e});
                        gemm(true, false, e, 1, nx, g.ptr(), e, x.tensor().ptr(), 1, 0.0,
                             gw.mut().data(), 1);
                        t.accum(w, std::move(gw));
                    }
                });
}

Value Tape::record(std::vector<Value> inputs, Tensor out, BackwardFn backward) {
    bool needs = false;
    for (const auto& v : inputs) needs = needs || requires_grad(v.id);
    return push(std::move(out), needs, std::move(backward));
}

Value linear(Tape& t, Value x, Value w, Value b) {
    Value y = t.matmul(x, w);
    if (b.tape != nullptr) y = t.add_rowvec(y, b);
    return y;
}

} // namespace mdmlp
