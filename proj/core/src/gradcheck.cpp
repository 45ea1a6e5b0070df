#include "mdmlp/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "mdmlp/errors.hpp"

namespace mdmlp {

double finite_diff_check(const ScalarFn& f, const Tensor& x, double eps) {
    if (eps <= 0.0) throw ConfigError("finite_diff_check step must be positive");

    Tape tape;
    Value leaf = tape.leaf(x.clone(), true);
    Value loss = f(tape, leaf);
    Gradients grads = tape.backward(loss);
    const Tensor analytic = grads.at(leaf).clone();

    auto eval_at = [&](const Tensor& point) {
        Tape t;
        Value v = t.leaf(point.clone(), false);
        return f(t, v).tensor().item();
    };

    double max_err = 0.0;
    Tensor probe = x.clone();
    auto p = probe.mut();
    auto ga = analytic.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double saved = p[i];
        p[i] = saved + eps;
        const double hi = eval_at(probe);
        p[i] = saved - eps;
        const double lo = eval_at(probe);
        p[i] = saved;
        const double central = (hi - lo) / (2.0 * eps);
        const double err = std::fabs(ga[i] - central) / std::max(1.0, std::fabs(ga[i]));
        max_err = std::max(max_err, err);
    }
    return max_err;
}

} // namespace mdmlp
