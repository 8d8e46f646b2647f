#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "dgn/error.hpp"
#include "dgn/params.hpp"
#include "dgn/tape.hpp"

namespace dgn {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
};

// Compare reverse-mode gradients against central finite differences:
//   |analytic - numeric| / max(1, |analytic|, |numeric|), maximized over every
// parameter entry. The forward builder must rebuild the loss from the current
// parameter values on the tape it is given. Intended for double precision;
// epsilon must lie in [1e-7, 1e-4].
inline GradCheckResult grad_check(
    const std::function<Tape<double>::Id(Tape<double>&)>& forward, ParamStore<double>& params,
    double epsilon) {
  if (!(epsilon >= 1e-7 && epsilon <= 1e-4))
    throw ConfigError("grad_check: epsilon " + std::to_string(epsilon) +
                      " outside [1e-7, 1e-4]");

  auto eval = [&](const std::string& context) {
    Tape<double> tape;
    auto loss = forward(tape);
    double v = tape.value(loss).item();
    if (!std::isfinite(v))
      throw NumericError("grad_check: non-finite loss while perturbing " + context);
    return v;
  };

  // Analytic pass.
  std::vector<Tensor<double>> analytic;
  {
    Tape<double> tape;
    auto loss = forward(tape);
    if (!tape.value(loss).all_finite())
      throw NumericError("grad_check: non-finite loss on unperturbed parameters");
    backward(tape, loss, params);
    for (std::size_t p = 0; p < params.size(); ++p) {
      if (!params.at(p).gradient.all_finite())
        throw NumericError("grad_check: non-finite gradient for " + params.at(p).name);
      analytic.push_back(params.at(p).gradient);
    }
  }

  GradCheckResult result;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Parameter<double>& param = params.at(p);
    for (std::size_t i = 0; i < param.value.size(); ++i) {
      double saved = param.value[i];
      param.value[i] = saved + epsilon;
      double plus = eval(param.name);
      param.value[i] = saved - epsilon;
      double minus = eval(param.name);
      param.value[i] = saved;

      double numeric = (plus - minus) / (2.0 * epsilon);
      double a = analytic[p][i];
      double err = std::abs(a - numeric) /
                   std::max({1.0, std::abs(a), std::abs(numeric)});
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_param = param.name;
        result.worst_index = i;
      }
    }
  }
  return result;
}

}  // namespace dgn
