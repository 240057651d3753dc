#include "mst/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "mst/prng.hpp"

namespace mst {

double relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) /
           std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

namespace {

double eval(const LossBuilder& f) {
    Graph g;
    NodeId loss = f(g);
    const Tensor& v = g.value(loss);
    if (v.size() != 1)
        throw std::invalid_argument("grad_check: loss builder must produce a scalar");
    return v.at(0);
}

} // namespace

double grad_check(const LossBuilder& f, std::span<Parameter* const> params,
                  const GradCheckOptions& opt) {
    if (opt.h < 1e-7 || opt.h > 1e-3)
        throw std::invalid_argument("grad_check: h must be in [1e-7, 1e-3]");

    for (Parameter* p : params) p->zero_grad();
    {
        Graph g;
        NodeId loss = f(g);
        g.backward(loss);
    }

    Prng rng(opt.seed);
    double worst = 0.0;
    for (Parameter* p : params) {
        if (!p->trainable) continue;
        std::vector<std::size_t> coords(p->tensor.size());
        for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
        if (coords.size() > opt.max_coords_per_param) {
            rng.shuffle(coords);
            coords.resize(opt.max_coords_per_param);
            std::sort(coords.begin(), coords.end());
        }
        for (std::size_t i : coords) {
            const double saved = p->tensor.at(i);
            p->tensor.at(i) = saved + opt.h;
            const double up = eval(f);
            p->tensor.at(i) = saved - opt.h;
            const double down = eval(f);
            p->tensor.at(i) = saved;
            const double numeric = (up - down) / (2.0 * opt.h);
            worst = std::max(worst, relative_error(p->grad.at(i), numeric));
        }
    }
    return worst;
}

} // namespace mst
