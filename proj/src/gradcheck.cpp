#include "lextree/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace lextree {

namespace {

double eval_loss(const LossBuilder& build) {
  Graph g;
  return build(g).scalar();
}

std::string coord_name(const Parameter& p, std::size_t i) {
  return p.name + "[" + std::to_string(i) + "]";
}

}  // namespace

GradCheckReport grad_check(ParamSet& params, const LossBuilder& build, double tolerance,
                           double step) {
  GradCheckReport report;
  params.zero_grad();
  std::vector<Tensor> analytic;
  {
    Graph g;
    Expr loss = build(g);
    if (!std::isfinite(loss.scalar())) {
      report.failure = "non-finite loss at the unperturbed point";
      return report;
    }
    g.backward(loss);
    for (const auto* p : std::as_const(params).all()) analytic.push_back(p->grad);
  }

  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = params[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double saved = p.value[i];
      p.value[i] = saved + step;
      const double up = eval_loss(build);
      p.value[i] = saved - step;
      const double down = eval_loss(build);
      p.value[i] = saved;

      const double a = analytic[k][i];
      if (!std::isfinite(up) || !std::isfinite(down) || !std::isfinite(a)) {
        report.failure = "non-finite value at " + coord_name(p, i);
        report.pass = false;
        return report;
      }
      const double numeric = (up - down) / (2.0 * step);
      const double denom = std::max({1.0, std::abs(a), std::abs(numeric)});
      const double rel = std::abs(a - numeric) / denom;
      ++report.coordinates;
      if (rel > report.max_rel_err || report.worst.empty()) {
        if (rel >= report.max_rel_err) report.worst = coord_name(p, i);
        report.max_rel_err = std::max(report.max_rel_err, rel);
      }
    }
  }
  report.pass = report.max_rel_err < tolerance;
  return report;
}

}  // namespace lextree
