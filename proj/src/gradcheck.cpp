#include "ist/gradcheck.hpp"

#include "ist/errors.hpp"
#include "ist/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ist {

GradCheckReport finite_diff_check(const std::function<double()>& loss, const ParamRefs& params,
                                  const GradCheckOptions& options) {
  if (options.tolerance <= 0.0) throw ConfigError("finite_diff_check: tolerance must be positive");
  GradCheckReport report;
  RngStream rng(options.seed);
  for (Parameter* p : params) {
    const Eigen::Index n = p->value.size();
    std::vector<Eigen::Index> entries(static_cast<std::size_t>(n));
    std::iota(entries.begin(), entries.end(), 0);
    if (options.max_entries_per_param > 0 && entries.size() > options.max_entries_per_param) {
      // partial Fisher-Yates
      for (std::size_t i = 0; i < options.max_entries_per_param; ++i) {
        std::swap(entries[i], entries[i + rng.index(entries.size() - i)]);
      }
      entries.resize(options.max_entries_per_param);
    }
    for (Eigen::Index idx : entries) {
      double& x = p->value.data()[idx];
      const double saved = x;
      auto at = [&](double offset) {
        x = saved + offset;
        const double v = loss();
        if (!std::isfinite(v)) throw NumericError("finite_diff_check: non-finite loss perturbing " + p->name);
        return v;
      };
      const double h = options.step;
      double numeric = (at(h) - at(-h)) / (2.0 * h);
      if (options.fourth_order) {
        const double wide = (at(2.0 * h) - at(-2.0 * h)) / (4.0 * h);
        numeric = (4.0 * numeric - wide) / 3.0;
      }
      x = saved;
      const double analytic = p->grad.data()[idx];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), options.floor});
      const double rel = std::abs(analytic - numeric) / denom;
      ++report.entries_checked;
      if (rel > report.max_rel_error || report.worst_index < 0) {
        report.max_rel_error = rel;
        report.worst_parameter = p->name;
        report.worst_index = idx;
        report.analytic = analytic;
        report.numeric = numeric;
      }
    }
  }
  report.passed = report.max_rel_error <= options.tolerance;
  return report;
}

}  // namespace ist
