#pragma once

#include <cstdint>
#include <vector>

namespace mdmlp {

// Mixed-radix complex DFT of a fixed length. Composite lengths use
// Cooley-Tukey splitting; prime factors fall back to the direct sum, so any
// length works (96 and 192 stay fast, 97 stays correct).
class FftPlan {
  public:
    explicit FftPlan(std::int64_t n);

    std::int64_t length() const { return n_; }

    // X[k] = sum_t x[t] e^{-2pi i k t / n}
    void forward(const double* re, const double* im, double* out_re, double* out_im) const;
    // X[k] = sum_t x[t] e^{+2pi i k t / n}, no 1/n factor
    void inverse(const double* re, const double* im, double* out_re, double* out_im) const;

    // Same transforms with caller-provided scratch (length n each); batched
    // row loops reuse one scratch pair instead of allocating per row.
    void run_with(const double* re, const double* im, double* out_re, double* out_im,
                  double* work_re, double* work_im, bool inv) const {
        run(n_, 1, 0, re, im, out_re, out_im, work_re, work_im, inv);
    }

  private:
    void run(std::int64_t n, std::int64_t stride, std::size_t factor_idx,
             const double* re, const double* im,
             double* out_re, double* out_im,
             double* work_re, double* work_im, bool inv) const;

    std::int64_t n_;
    std::vector<std::int64_t> factors_;
    std::vector<double> tw_re_, tw_im_; // e^{-2pi i k / n}
};

// Half-spectrum width for a real transform of length L.
inline std::int64_t rfft_bins(std::int64_t len) { return len / 2 + 1; }

// Real-input transforms over the last axis of row-major data. `rows` is the
// product of all leading dimensions.

// [rows x L] -> re/im [rows x F]; im at DC (and Nyquist for even L) is exact 0.
void rfft_rows(const double* x, std::int64_t rows, std::int64_t len,
               double* out_re, double* out_im);

// Inverse with 1/L normalization; the imaginary parts of the DC and Nyquist
// bins do not contribute, matching the Hermitian extension.
void irfft_rows(const double* re, const double* im, std::int64_t rows, std::int64_t len,
                double* out);

// Adjoint of rfft_rows as a linear map R^L -> R^2F.
void rfft_adjoint_rows(const double* g_re, const double* g_im, std::int64_t rows,
                       std::int64_t len, double* out);

// Adjoint of irfft_rows as a linear map R^2F -> R^L.
void irfft_adjoint_rows(const double* g, std::int64_t rows, std::int64_t len,
                        double* out_re, double* out_im);

} // namespace mdmlp
