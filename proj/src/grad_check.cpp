#include "prism/grad_check.hpp"

#include <cmath>
#include <stdexcept>

namespace prism {

namespace {

double eval_loss(const LossBuilder& forward, const ParameterStore& params) {
    Tape tape;
    Val loss = forward(tape, params);
    const double x = tape.scalar_value(loss);
    if (!std::isfinite(x)) throw std::runtime_error("grad_check: non-finite loss during probing");
    return x;
}

}  // namespace

double grad_check(const LossBuilder& forward, ParameterStore& params, double eps) {
    if (!(eps > 0.0) || eps > 1e-3)
        throw std::invalid_argument("grad_check: eps must be in (0, 1e-3]");

    Tape tape;
    Val loss = forward(tape, params);
    if (!std::isfinite(tape.scalar_value(loss)))
        throw std::runtime_error("grad_check: non-finite loss during probing");
    GradientMap analytic = tape.backward(loss);

    double worst = 0.0;
    for (auto& [name, arr] : params.all()) {
        const Array& ga = analytic.at(name);
        for (size_t i = 0; i < arr.v.size(); ++i) {
            const double orig = arr.v[i];
            arr.v[i] = orig + eps;
            const double lp = eval_loss(forward, params);
            arr.v[i] = orig - eps;
            const double lm = eval_loss(forward, params);
            arr.v[i] = orig;
            const double central = (lp - lm) / (2.0 * eps);
            const double err = std::fabs(ga.v[i] - central) / std::max(1.0, std::fabs(central));
            worst = std::max(worst, err);
        }
    }
    return worst;
}

}  // namespace prism
