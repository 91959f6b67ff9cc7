#include "admrl/diffcore/gradcheck.hpp"

#include "admrl/common/random.hpp"
#include "admrl/diffcore/finite_diff.hpp"
#include "admrl/diffcore/mlp.hpp"

#include <algorithm>
#include <vector>

namespace admrl::diff {

namespace {

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(uniform01(rng) * static_cast<double>(hi - lo + 1)) % (hi - lo + 1);
}

}  // namespace

GradcheckReport run_gradcheck(const GradcheckConfig& cfg) {
  GradcheckReport report;
  report.cases = cfg.cases;
  for (std::size_t c = 0; c < cfg.cases; ++c) {
    Rng rng(derive_seed(cfg.seed, {c}));
    std::vector<std::size_t> sizes{pick(rng, 1, 6)};
    const std::size_t hidden = pick(rng, 0, 2);
    for (std::size_t i = 0; i < hidden; ++i) sizes.push_back(pick(rng, 1, 8));
    sizes.push_back(pick(rng, 1, 4));
    const Mlp net{sizes, "net.", uniform01(rng) < 0.5 ? Activation::Tanh : Activation::Identity};
    ParamVector params(net.layout());
    net.initialize(params, rng, 1.0);
    // Non-zero biases so every bias path is exercised.
    for (Eigen::Index i = 0; i < params.values().size(); ++i) params.values()[i] += 0.1 * standard_normal(rng);

    Graph graph{sizes.front(), [net](Tape& tape, const BoundParams& p, Var x) {
                  Var h = net.forward(p, x);
                  Var sq = tape.scale(tape.sum(tape.square(h)), 0.5);
                  Var sg = tape.mean(tape.sigmoid(h));
                  Var lg = tape.sum(tape.log(tape.add_scalar(tape.square(h), 1.0)));
                  Var nm = tape.sum(tape.row_norm(tape.add_scalar(h, 0.3)));
                  return tape.add(tape.add(sq, sg), tape.add(lg, nm));
                }};
    std::vector<double> input(sizes.front());
    for (auto& v : input) v = uniform(rng, -1.0, 1.0);

    const Vector analytic_p = grad_params(graph, params, input).values();
    const Vector numeric_p = finite_diff_oracle(
        [&](const Vector& v) { return eval_scalar(graph, ParamVector(params.shared_layout(), v), input); },
        params.values(), cfg.step);
    const Vector analytic_x = grad_inputs(graph, params, input);
    const Vector x0 = Eigen::Map<const Vector>(input.data(), static_cast<Eigen::Index>(input.size()));
    const Vector numeric_x = finite_diff_oracle(
        [&](const Vector& v) { return eval_scalar(graph, params, std::span<const double>(v.data(), v.size())); }, x0,
        cfg.step);

    const double ep = max_relative_error(analytic_p, numeric_p, cfg.relative_floor);
    const double ex = max_relative_error(analytic_x, numeric_x, cfg.relative_floor);
    report.worst_params = std::max(report.worst_params, ep);
    report.worst_inputs = std::max(report.worst_inputs, ex);
    if (ep > cfg.tolerance || ex > cfg.tolerance) ++report.failures;
  }
  return report;
}

}  // namespace admrl::diff
