#pragma once

#include "mdmlp/fft.hpp"
#include "mdmlp/tape.hpp"

namespace mdmlp {

// Half spectrum of a real signal, re/im carried as separate real tensors so
// the tape stays real-valued. Shapes [... x F] with F = L/2 + 1.
struct ComplexSpectrum {
    Value re, im;
};

// Complex affine map on the embedding axis, shared over channels and bins.
struct FreMlpParams {
    Tensor w_re, w_im; // [E x E]
    Tensor b_re, b_im; // [E]
};

struct FreMlpValues {
    Value w_re, w_im, b_re, b_im;
};

// Forward real DFT over the last axis (unnormalized).
ComplexSpectrum rfft(Tape& t, Value x);

// Inverse with 1/L normalization; spectrum width must equal L/2 + 1.
Value irfft(Tape& t, const ComplexSpectrum& s, std::int64_t len);

// out = shrink(act((re + i im) (W_re + i W_im) + (B_re + i B_im))), with
// LeakyReLU and softshrink applied to the real and imaginary parts separately.
ComplexSpectrum fre_mlp(Tape& t, const ComplexSpectrum& s, const FreMlpValues& p,
                        double leaky_slope, double shrink_lambda);

} // namespace mdmlp
