#pragma once

#include <cmath>
#include <functional>

#include "ctnn/ad/ops.hpp"
#include "ctnn/ad/tensor.hpp"

namespace ctnn::ad {

/// Central finite differences against reverse-mode gradients at `point`.
/// Returns max over coordinates of |ad - fd| / max(1, |ad|, |fd|).
inline double gradcheck(const std::function<Tensor(const Tensor&)>& f, const Tensor& point,
                        double eps = 1e-5) {
    Tensor x = point.detached();
    x.set_requires_grad();

    std::vector<double> g_ad;
    {
        Tape tape;
        Tensor loss = f(x);
        if (!std::isfinite(loss.value())) throw NonFiniteValue("gradcheck: loss not finite");
        tape.backward(loss);
        g_ad = x.grad();
        if (g_ad.empty()) g_ad.assign(static_cast<std::size_t>(x.size()), 0.0);
    }

    double worst = 0.0;
    NoGradGuard pause;
    for (int i = 0; i < x.size(); ++i) {
        const double saved = x.data()[i];
        x.data()[i] = saved + eps;
        const double fp = f(x).value();
        x.data()[i] = saved - eps;
        const double fm = f(x).value();
        x.data()[i] = saved;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw NonFiniteValue("gradcheck: perturbed loss not finite");
        const double fd = (fp - fm) / (2.0 * eps);
        const double ad = g_ad[static_cast<std::size_t>(i)];
        const double err = std::abs(ad - fd) / std::max({1.0, std::abs(ad), std::abs(fd)});
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace ctnn::ad
