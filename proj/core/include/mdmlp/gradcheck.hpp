#pragma once

#include <functional>

#include "mdmlp/tape.hpp"

namespace mdmlp {

// Builds a scalar loss from one variable leaf; must be deterministic.
using ScalarFn = std::function<Value(Tape&, Value)>;

// Max over entries of |analytic - central difference| / max(1, |analytic|).
double finite_diff_check(const ScalarFn& f, const Tensor& x, double eps);

} // namespace mdmlp
