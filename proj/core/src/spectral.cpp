#include "mdmlp/spectral.hpp"

#include "mdmlp/errors.hpp"

namespace mdmlp {

ComplexSpectrum rfft(Tape& t, Value x) {
    const Tensor& tx = x.tensor();
    if (tx.rank() < 1) throw DimensionError("rfft input must have at least one axis");
    const std::int64_t len = tx.dim(tx.rank() - 1);
    if (len < 2) throw DimensionError("rfft requires last axis >= 2");
    const std::int64_t rows = tx.size() / len;
    const std::int64_t bins = rfft_bins(len);

    Shape packed_shape = tx.shape();
    packed_shape.back() = 2 * bins;
    Tensor packed = Tensor::zeros(packed_shape);
    {
        // Row layout [re | im] per logical row keeps this a single node.
        std::vector<double> re(static_cast<std::size_t>(rows * bins));
        std::vector<double> im(static_cast<std::size_t>(rows * bins));
        rfft_rows(tx.ptr(), rows, len, re.data(), im.data());
        auto o = packed.mut();
        for (std::int64_t r = 0; r < rows; ++r)
            for (std::int64_t k = 0; k < bins; ++k) {
                o[r * 2 * bins + k] = re[static_cast<std::size_t>(r * bins + k)];
                o[r * 2 * bins + bins + k] = im[static_cast<std::size_t>(r * bins + k)];
            }
    }
    Value node = t.record({x}, std::move(packed), [x, rows, len, bins](Tape& tp, const Tensor& g) {
        std::vector<double> gre(static_cast<std::size_t>(rows * bins));
        std::vector<double> gim(static_cast<std::size_t>(rows * bins));
        auto s = g.data();
        for (std::int64_t r = 0; r < rows; ++r)
            for (std::int64_t k = 0; k < bins; ++k) {
                gre[static_cast<std::size_t>(r * bins + k)] = s[r * 2 * bins + k];
                gim[static_cast<std::size_t>(r * bins + k)] = s[r * 2 * bins + bins + k];
            }
        Tensor gx = Tensor::zeros(x.tensor().shape());
        rfft_adjoint_rows(gre.data(), gim.data(), rows, len, gx.mut().data());
        tp.accum(x, std::move(gx));
    });
    return {t.slice_last(node, 0, bins), t.slice_last(node, bins, 2 * bins)};
}

Value irfft(Tape& t, const ComplexSpectrum& s, std::int64_t len) {
    const Tensor& tre = s.re.tensor();
    const Tensor& tim = s.im.tensor();
    if (!tre.same_shape(tim))
        throw DimensionError("spectrum re/im shapes differ: " + shape_str(tre.shape()) + " vs " +
                             shape_str(tim.shape()));
    const std::int64_t bins = tre.dim(tre.rank() - 1);
    if (bins != rfft_bins(len))
        throw DimensionError("irfft expects " + std::to_string(rfft_bins(len)) + " bins for length " +
                             std::to_string(len) + ", got " + std::to_string(bins));
    const std::int64_t rows = tre.size() / bins;

    Shape out_shape = tre.shape();
    out_shape.back() = len;
    Tensor out = Tensor::zeros(out_shape);
    irfft_rows(tre.ptr(), tim.ptr(), rows, len, out.mut().data());

    Value vre = s.re, vim = s.im;
    return t.record({vre, vim}, std::move(out), [vre, vim, rows, len, bins](Tape& tp, const Tensor& g) {
        Tensor gre = Tensor::zeros(vre.tensor().shape());
        Tensor gim = Tensor::zeros(vim.tensor().shape());
        irfft_adjoint_rows(g.ptr(), rows, len, gre.mut().data(), gim.mut().data());
        if (tp.requires_grad(vre.id)) tp.accum(vre, std::move(gre));
        if (tp.requires_grad(vim.id)) tp.accum(vim, std::move(gim));
    });
}

namespace {

struct FreAct {
    double slope, lambda;

    // value and derivative of softshrink(leaky_relu(z))
    void apply(double z, double& value, double& deriv) const {
        const double dl = z > 0.0 ? 1.0 : slope;
        const double lv = z > 0.0 ? z : slope * z;
        if (lv > lambda) {
            value = lv - lambda;
            deriv = dl;
        } else if (lv < -lambda) {
            value = lv + lambda;
            deriv = dl;
        } else {
            value = 0.0;
            deriv = 0.0;
        }
    }
};

} // namespace

ComplexSpectrum fre_mlp(Tape& t, const ComplexSpectrum& s, const FreMlpValues& p,
                        double leaky_slope, double shrink_lambda) {
    if (shrink_lambda < 0.0) throw ConfigError("softshrink threshold must be >= 0");
    const Tensor& tre = s.re.tensor();
    const Tensor& tim = s.im.tensor();
    if (!tre.same_shape(tim))
        throw DimensionError("spectrum re/im shapes differ: " + shape_str(tre.shape()) + " vs " +
                             shape_str(tim.shape()));
    const std::int64_t e = p.w_re.tensor().dim(0);
    if (tre.dim(tre.rank() - 1) != e)
        throw DimensionError("fre_mlp embedding axis " + shape_str(tre.shape()) + " vs E=" +
                             std::to_string(e));
    const std::int64_t rows = tre.size() / e;
    const FreAct act{leaky_slope, shrink_lambda};

    // Single fused node: complex affine map plus both activations. The
    // backward pass recomputes the pre-activations instead of saving them.
    auto affine_row = [e](const double* re, const double* im, const double* wre,
                          const double* wim, const double* bre, const double* bim, double* zr,
                          double* zi) {
        for (std::int64_t j = 0; j < e; ++j) {
            zr[j] = bre[j];
            zi[j] = bim[j];
        }
        for (std::int64_t k = 0; k < e; ++k) {
            const double xr = re[k], xi = im[k];
            const double* wr = wre + k * e;
            const double* wi = wim + k * e;
            for (std::int64_t j = 0; j < e; ++j) {
                zr[j] += xr * wr[j] - xi * wi[j];
                zi[j] += xr * wi[j] + xi * wr[j];
            }
        }
    };

    Shape packed_shape = tre.shape();
    packed_shape.back() = 2 * e;
    Tensor packed = Tensor::uninit(packed_shape);
    {
        auto o = packed.mut();
        const double* re = tre.ptr();
        const double* im = tim.ptr();
        const double* wre = p.w_re.tensor().ptr();
        const double* wim = p.w_im.tensor().ptr();
        const double* bre = p.b_re.tensor().ptr();
        const double* bim = p.b_im.tensor().ptr();
#pragma omp parallel if (rows >= 256)
        {
            std::vector<double> zr(static_cast<std::size_t>(e)), zi(static_cast<std::size_t>(e));
#pragma omp for schedule(static)
            for (std::int64_t r = 0; r < rows; ++r) {
                affine_row(re + r * e, im + r * e, wre, wim, bre, bim, zr.data(), zi.data());
                double deriv;
                for (std::int64_t j = 0; j < e; ++j) {
                    act.apply(zr[static_cast<std::size_t>(j)], o[r * 2 * e + j], deriv);
                    act.apply(zi[static_cast<std::size_t>(j)], o[r * 2 * e + e + j], deriv);
                }
            }
        }
    }

    Value vre = s.re, vim = s.im;
    FreMlpValues pv = p;
    Value node = t.record(
        {vre, vim, pv.w_re, pv.w_im, pv.b_re, pv.b_im}, std::move(packed),
        [vre, vim, pv, rows, e, act, affine_row](Tape& tp, const Tensor& g) {
            const double* re = vre.tensor().ptr();
            const double* im = vim.tensor().ptr();
            const double* wre = pv.w_re.tensor().ptr();
            const double* wim = pv.w_im.tensor().ptr();
            const double* bre = pv.b_re.tensor().ptr();
            const double* bim = pv.b_im.tensor().ptr();
            auto gs = g.data();

            // gate the incoming gradient by the recomputed activation slope
            Tensor glin_r = Tensor::uninit({rows, e});
            Tensor glin_i = Tensor::uninit({rows, e});
            auto gr = glin_r.mut();
            auto gi = glin_i.mut();
#pragma omp parallel if (rows >= 256)
            {
                std::vector<double> zr(static_cast<std::size_t>(e)), zi(static_cast<std::size_t>(e));
#pragma omp for schedule(static)
                for (std::int64_t r = 0; r < rows; ++r) {
                    affine_row(re + r * e, im + r * e, wre, wim, bre, bim, zr.data(), zi.data());
                    double value, deriv;
                    for (std::int64_t j = 0; j < e; ++j) {
                        act.apply(zr[static_cast<std::size_t>(j)], value, deriv);
                        gr[r * e + j] = gs[r * 2 * e + j] * deriv;
                        act.apply(zi[static_cast<std::size_t>(j)], value, deriv);
                        gi[r * e + j] = gs[r * 2 * e + e + j] * deriv;
                    }
                }
            }

            if (tp.requires_grad(vre.id)) {
                Tensor gx = Tensor::uninit(vre.tensor().shape());
                gemm(false, true, rows, e, e, glin_r.ptr(), e, wre, e, 0.0, gx.mut().data(), e);
                gemm(false, true, rows, e, e, glin_i.ptr(), e, wim, e, 1.0, gx.mut().data(), e);
                tp.accum(vre, std::move(gx));
            }
            if (tp.requires_grad(vim.id)) {
                Tensor gx = Tensor::uninit(vim.tensor().shape());
                gemm(false, true, rows, e, e, glin_i.ptr(), e, wre, e, 0.0, gx.mut().data(), e);
                Tensor sub = Tensor::uninit({rows, e});
                gemm(false, true, rows, e, e, glin_r.ptr(), e, wim, e, 0.0, sub.mut().data(), e);
                auto d = gx.mut();
                auto su = sub.data();
                for (std::size_t i = 0; i < d.size(); ++i) d[i] -= su[i];
                tp.accum(vim, std::move(gx));
            }
            if (tp.requires_grad(pv.w_re.id)) {
                Tensor gw = Tensor::uninit({e, e});
                gemm(true, false, e, e, rows, re, e, glin_r.ptr(), e, 0.0, gw.mut().data(), e);
                gemm(true, false, e, e, rows, im, e, glin_i.ptr(), e, 1.0, gw.mut().data(), e);
                tp.accum(pv.w_re, std::move(gw));
            }
            if (tp.requires_grad(pv.w_im.id)) {
                Tensor gw = Tensor::uninit({e, e});
                gemm(true, false, e, e, rows, re, e, glin_i.ptr(), e, 0.0, gw.mut().data(), e);
                Tensor sub = Tensor::uninit({e, e});
                gemm(true, false, e, e, rows, im, e, glin_r.ptr(), e, 0.0, sub.mut().data(), e);
                auto d = gw.mut();
                auto su = sub.data();
                for (std::size_t i = 0; i < d.size(); ++i) d[i] -= su[i];
                tp.accum(pv.w_im, std::move(gw));
            }
            if (tp.requires_grad(pv.b_re.id)) {
                Tensor gb = Tensor::zeros({e});
                auto d = gb.mut();
                for (std::int64_t r = 0; r < rows; ++r)
                    for (std::int64_t j = 0; j < e; ++j) d[j] += gr[r * e + j];
                tp.accum(pv.b_re, std::move(gb));
            }
            if (tp.requires_grad(pv.b_im.id)) {
                Tensor gb = Tensor::zeros({e});
                auto d = gb.mut();
                for (std::int64_t r = 0; r < rows; ++r)
                    for (std::int64_t j = 0; j < e; ++j) d[j] += gi[r * e + j];
                tp.accum(pv.b_im, std::move(gb));
            }
        });
    return {t.slice_last(node, 0, e), t.slice_last(node, e, 2 * e)};
}

} // namespace mdmlp
