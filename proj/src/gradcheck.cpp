#include "opposd/gradcheck.hpp"

#include <cmath>

namespace opposd {

GradCheckReport check_gradients(std::span<double* const> params,
                                std::span<const double> analytic,
                                const std::function<double()>& loss, double step,
                                double tolerance) {
  if (params.size() != analytic.size()) {
    throw NumericError("check_gradients: analytic gradient size mismatch");
  }
  GradCheckReport report;
  report.checked = params.size();
  for (std::size_t i = 0; i < params.size(); ++i) {
    double& p = *params[i];
    const double saved = p;
    p = saved + step;
    const double up = loss();
    p = saved - step;
    const double down = loss();
    p = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double a = analytic[i];
    const double abs_err = std::fabs(a - numeric);
    const double rel_err = abs_err / std::max(std::fabs(a) + std::fabs(numeric), 1e-8);
    report.max_abs_err = std::max(report.max_abs_err, abs_err);
    report.max_rel_err = std::max(report.max_rel_err, rel_err);
  }
  report.pass = report.max_rel_err <= tolerance;
  return report;
}

GradCheckReport gradient_check(MlpParams& model,
                               const std::function<std::pair<double, MlpGradients>()>& loss_and_grads,
                               double tolerance, double step) {
  auto [loss_value, grads] = loss_and_grads();
  (void)loss_value;
  auto param_ptrs = mlp_param_ptrs(model);
  auto grad_ptrs = mlp_grad_ptrs(grads);
  VecD analytic(grad_ptrs.size());
  for (std::size_t i = 0; i < grad_ptrs.size(); ++i) analytic[i] = *grad_ptrs[i];
  auto loss_only = [&]() { return loss_and_grads().first; };
  return check_gradients(param_ptrs, analytic, loss_only, step, tolerance);
}

}  // namespace opposd
