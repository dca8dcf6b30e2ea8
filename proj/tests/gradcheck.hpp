#pragma once

#include <cmath>
#include <functional>
#include <vector>

namespace testutil {

/// Relative error with an absolute floor: coordinates whose gradients are
/// essentially zero (|.| < 1e-6) compare against the floor, since central
/// differences there are pure roundoff.
inline double rel_err(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    return std::abs(analytic - numeric) / denom;
}

struct GradCheckStats {
    double p95 = 0.0; // 95th percentile of relative errors
    double max = 0.0;
    std::size_t n = 0;
};

/// Central finite differences of `value` against `analytic` over the chosen
/// coordinates of `params`.
inline GradCheckStats fd_check(std::vector<double>& params,
                               const std::function<double()>& value,
                               const std::vector<double>& analytic,
                               const std::vector<std::size_t>& coords, double h = 1e-5) {
    std::vector<double> errs;
    errs.reserve(coords.size());
    for (std::size_t i : coords) {
        const double keep = params[i];
        params[i] = keep + h;
        const double up = value();
        params[i] = keep - h;
        const double down = value();
        params[i] = keep;
        const double fd = (up - down) / (2.0 * h);
        errs.push_back(rel_err(analytic[i], fd));
    }
    GradCheckStats st;
    st.n = errs.size();
    std::sort(errs.begin(), errs.end());
    st.max = errs.empty() ? 0.0 : errs.back();
    st.p95 = errs.empty() ? 0.0 : errs[static_cast<std::size_t>(0.95 * (errs.size() - 1))];
    return st;
}

} // namespace testutil
