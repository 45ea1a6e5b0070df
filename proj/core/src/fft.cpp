#include "mdmlp/fft.hpp"

#include <cmath>

#include "mdmlp/errors.hpp"

namespace mdmlp {

FftPlan::FftPlan(std::int64_t n) : n_(n) {
    if (n < 1) throw DimensionError("FFT length must be >= 1");
    std::int64_t rem = n;
    for (std::int64_t f = 2; f * f <= rem;) {
        if (rem % f == 0) {
            factors_.push_back(f);
            rem /= f;
        } else {
            ++f;
        }
    }
    if (rem > 1) factors_.push_back(rem);
    tw_re_.resize(static_cast<std::size_t>(n));
    tw_im_.resize(static_cast<std::size_t>(n));
    const double step = -2.0 * M_PI / static_cast<double>(n);
    for (std::int64_t k = 0; k < n; ++k) {
        tw_re_[static_cast<std::size_t>(k)] = std::cos(step * static_cast<double>(k));
        tw_im_[static_cast<std::size_t>(k)] = std::sin(step * static_cast<double>(k));
    }
}

// Cooley-Tukey split n = r * m on strided input; children write their m-point
// transforms contiguously, then one pass combines them with stepped twiddle
// indices. The scratch pair is shared across recursion levels since children
// finish before the parent combines.
void FftPlan::run(std::int64_t n, std::int64_t stride, std::size_t factor_idx,
                  const double* re, const double* im,
                  double* out_re, double* out_im,
                  double* wre, double* wim, bool inv) const {
    if (n == 1) {
        out_re[0] = re[0];
        out_im[0] = im[0];
        return;
    }
    const std::int64_t r = factors_[factor_idx];
    const std::int64_t m = n / r;
    for (std::int64_t j = 0; j < r; ++j)
        run(m, stride * r, factor_idx + 1, re + j * stride, im + j * stride,
            out_re + j * m, out_im + j * m, wre, wim, inv);

    if (r == 2) {
        // in-place butterfly: W^{m*stride} = -1
        std::int64_t idx = 0;
        for (std::int64_t k2 = 0; k2 < m; ++k2) {
            const double tr = tw_re_[static_cast<std::size_t>(idx)];
            const double ti = inv ? -tw_im_[static_cast<std::size_t>(idx)]
                                  : tw_im_[static_cast<std::size_t>(idx)];
            const double or_ = out_re[m + k2], oi = out_im[m + k2];
            const double pr = or_ * tr - oi * ti;
            const double pi = or_ * ti + oi * tr;
            const double er = out_re[k2], ei = out_im[k2];
            out_re[k2] = er + pr;
            out_im[k2] = ei + pi;
            out_re[m + k2] = er - pr;
            out_im[m + k2] = ei - pi;
            idx += stride;
            if (idx >= n_) idx -= n_;
        }
        return;
    }
    if (r == 3) {
        // cube roots of unity; conjugate pair for the inverse direction
        const double cr = -0.5;
        const double ci = inv ? 0.86602540378443864676 : -0.86602540378443864676;
        std::int64_t idx1 = 0, idx2 = 0;
        const std::int64_t step2 = (2 * stride) % n_;
        for (std::int64_t k2 = 0; k2 < m; ++k2) {
            const double w1r = tw_re_[static_cast<std::size_t>(idx1)];
            const double w1i = inv ? -tw_im_[static_cast<std::size_t>(idx1)]
                                   : tw_im_[static_cast<std::size_t>(idx1)];
            const double w2r = tw_re_[static_cast<std::size_t>(idx2)];
            const double w2i = inv ? -tw_im_[static_cast<std::size_t>(idx2)]
                                   : tw_im_[static_cast<std::size_t>(idx2)];
            const double t1r = out_re[m + k2] * w1r - out_im[m + k2] * w1i;
            const double t1i = out_re[m + k2] * w1i + out_im[m + k2] * w1r;
            const double t2r = out_re[2 * m + k2] * w2r - out_im[2 * m + k2] * w2i;
            const double t2i = out_re[2 * m + k2] * w2i + out_im[2 * m + k2] * w2r;
            const double sr = t1r + t2r, si = t1i + t2i;
            const double dr = t1r - t2r, di = t1i - t2i;
            const double er = out_re[k2], ei = out_im[k2];
            out_re[k2] = er + sr;
            out_im[k2] = ei + si;
            out_re[m + k2] = er + cr * sr - ci * di;
            out_im[m + k2] = ei + cr * si + ci * dr;
            out_re[2 * m + k2] = er + cr * sr + ci * di;
            out_im[2 * m + k2] = ei + cr * si - ci * dr;
            idx1 += stride;
            if (idx1 >= n_) idx1 -= n_;
            idx2 += step2;
            if (idx2 >= n_) idx2 -= n_;
        }
        return;
    }

    // generic radix: accumulate into scratch, then copy back
    for (std::int64_t q = 0; q < r; ++q)
        for (std::int64_t k2 = 0; k2 < m; ++k2) {
            wre[q * m + k2] = out_re[k2];
            wim[q * m + k2] = out_im[k2];
        }
    for (std::int64_t j = 1; j < r; ++j) {
        const std::int64_t step = (j * stride) % n_;
        const double* sre = out_re + j * m;
        const double* sim = out_im + j * m;
        std::int64_t idx = 0;
        for (std::int64_t q = 0; q < r; ++q) {
            for (std::int64_t k2 = 0; k2 < m; ++k2) {
                const double tr = tw_re_[static_cast<std::size_t>(idx)];
                const double ti = inv ? -tw_im_[static_cast<std::size_t>(idx)]
                                      : tw_im_[static_cast<std::size_t>(idx)];
                const double xr = sre[k2];
                const double xi = sim[k2];
                wre[q * m + k2] += xr * tr - xi * ti;
                wim[q * m + k2] += xr * ti + xi * tr;
                idx += step;
                if (idx >= n_) idx -= n_;
            }
        }
    }
    for (std::int64_t k = 0; k < n; ++k) {
        out_re[k] = wre[k];
        out_im[k] = wim[k];
    }
}

void FftPlan::forward(const double* re, const double* im, double* out_re, double* out_im) const {
    std::vector<double> wre(static_cast<std::size_t>(n_)), wim(static_cast<std::size_t>(n_));
    run(n_, 1, 0, re, im, out_re, out_im, wre.data(), wim.data(), false);
}

void FftPlan::inverse(const double* re, const double* im, double* out_re, double* out_im) const {
    std::vector<double> wre(static_cast<std::size_t>(n_)), wim(static_cast<std::size_t>(n_));
    run(n_, 1, 0, re, im, out_re, out_im, wre.data(), wim.data(), true);
}

namespace {

struct FftWork {
    explicit FftWork(std::int64_t n)
        : a_re(static_cast<std::size_t>(n)), a_im(static_cast<std::size_t>(n)),
          b_re(static_cast<std::size_t>(n)), b_im(static_cast<std::size_t>(n)),
          w_re(static_cast<std::size_t>(n)), w_im(static_cast<std::size_t>(n)) {}
    std::vector<double> a_re, a_im, b_re, b_im, w_re, w_im;
};

} // namespace

void rfft_rows(const double* x, std::int64_t rows, std::int64_t len,
               double* out_re, double* out_im) {
    if (len < 2) throw DimensionError("rfft requires length >= 2");
    const FftPlan plan(len);
    const std::int64_t bins = rfft_bins(len);
#pragma omp parallel if (rows >= 16)
    {
        FftWork w(len);
        std::fill(w.a_im.begin(), w.a_im.end(), 0.0);
#pragma omp for schedule(static)
        for (std::int64_t r = 0; r < rows; ++r) {
            plan.run_with(x + r * len, w.a_im.data(), w.b_re.data(), w.b_im.data(), w.w_re.data(),
                          w.w_im.data(), false);
            for (std::int64_t k = 0; k < bins; ++k) {
                out_re[r * bins + k] = w.b_re[static_cast<std::size_t>(k)];
                out_im[r * bins + k] = w.b_im[static_cast<std::size_t>(k)];
            }
            out_im[r * bins] = 0.0;
            if (len % 2 == 0) out_im[r * bins + bins - 1] = 0.0;
        }
    }
}

void irfft_rows(const double* re, const double* im, std::int64_t rows, std::int64_t len,
                double* out) {
    if (len < 2) throw DimensionError("irfft requires length >= 2");
    const FftPlan plan(len);
    const std::int64_t bins = rfft_bins(len);
    const double inv_n = 1.0 / static_cast<double>(len);
    const bool even = len % 2 == 0;
#pragma omp parallel if (rows >= 16)
    {
    FftWork w(len);
#pragma omp for schedule(static)
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* sre = re + r * bins;
        const double* sim = im + r * bins;
        w.a_re[0] = sre[0];
        w.a_im[0] = 0.0;
        for (std::int64_t k = 1; k < bins; ++k) {
            const bool nyquist = even && k == bins - 1;
            w.a_re[static_cast<std::size_t>(k)] = sre[k];
            w.a_im[static_cast<std::size_t>(k)] = nyquist ? 0.0 : sim[k];
            if (!nyquist) {
                w.a_re[static_cast<std::size_t>(len - k)] = sre[k];
                w.a_im[static_cast<std::size_t>(len - k)] = -sim[k];
            }
        }
        plan.run_with(w.a_re.data(), w.a_im.data(), w.b_re.data(), w.b_im.data(), w.w_re.data(),
                      w.w_im.data(), true);
        for (std::int64_t t = 0; t < len; ++t)
            out[r * len + t] = w.b_re[static_cast<std::size_t>(t)] * inv_n;
    }
    }
}

void rfft_adjoint_rows(const double* g_re, const double* g_im, std::int64_t rows,
                       std::int64_t len, double* out) {
    const FftPlan plan(len);
    const std::int64_t bins = rfft_bins(len);
    const bool even = len % 2 == 0;
#pragma omp parallel if (rows >= 16)
    {
    FftWork w(len);
    std::fill(w.a_re.begin(), w.a_re.end(), 0.0);
    std::fill(w.a_im.begin(), w.a_im.end(), 0.0);
#pragma omp for schedule(static)
    for (std::int64_t r = 0; r < rows; ++r) {
        for (std::int64_t k = 0; k < bins; ++k) {
            w.a_re[static_cast<std::size_t>(k)] = g_re[r * bins + k];
            w.a_im[static_cast<std::size_t>(k)] = g_im[r * bins + k];
        }
        // The forward output pins these imaginary parts to zero.
        w.a_im[0] = 0.0;
        if (even) w.a_im[static_cast<std::size_t>(bins - 1)] = 0.0;
        plan.run_with(w.a_re.data(), w.a_im.data(), w.b_re.data(), w.b_im.data(), w.w_re.data(),
                      w.w_im.data(), true);
        for (std::int64_t t = 0; t < len; ++t) out[r * len + t] = w.b_re[static_cast<std::size_t>(t)];
    }
    }
}

void irfft_adjoint_rows(const double* g, std::int64_t rows, std::int64_t len,
                        double* out_re, double* out_im) {
    const FftPlan plan(len);
    const std::int64_t bins = rfft_bins(len);
    const double inv_n = 1.0 / static_cast<double>(len);
    const bool even = len % 2 == 0;
#pragma omp parallel if (rows >= 16)
    {
    FftWork w(len);
    std::fill(w.a_im.begin(), w.a_im.end(), 0.0);
#pragma omp for schedule(static)
    for (std::int64_t r = 0; r < rows; ++r) {
        plan.run_with(g + r * len, w.a_im.data(), w.b_re.data(), w.b_im.data(), w.w_re.data(),
                      w.w_im.data(), false);
        for (std::int64_t k = 0; k < bins; ++k) {
            const bool boundary = k == 0 || (even && k == bins - 1);
            const double s = boundary ? inv_n : 2.0 * inv_n;
            out_re[r * bins + k] = s * w.b_re[static_cast<std::size_t>(k)];
            out_im[r * bins + k] = boundary ? 0.0 : s * w.b_im[static_cast<std::size_t>(k)];
        }
    }
    }
}

} // namespace mdmlp
