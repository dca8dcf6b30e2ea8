#include "zoneforge/eval/stats.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace zoneforge::evalkit {

namespace {

constexpr double kTol = 1e-12;

/// Continued fraction for the incomplete beta (modified Lentz).
double betacf(double a, double b, double x) {
    constexpr double tiny = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 400; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kTol) return h;
    }
    throw StatsError("incomplete_beta: continued fraction did not converge");
}

double mean_of(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

double var_of(std::span<const double> x, double mean) {
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return ss / static_cast<double>(x.size() - 1);
}

} // namespace

double incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) throw StatsError("incomplete_beta: a, b must be positive");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    // Use the continued fraction on the side where it converges fast.
    if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double nu) {
    if (!(nu > 0.0)) throw StatsError("student_t_two_sided_p: dof must be positive");
    if (t == 0.0) return 1.0;
    const double x = nu / (nu + t * t);
    return incomplete_beta(nu / 2.0, 0.5, x);
}

TTestResult welch_t(std::span<const double> x, std::span<const double> y) {
    if (x.size() < 2 || y.size() < 2)
        throw StatsError("welch_t needs at least 2 samples per group, got " +
                         std::to_string(x.size()) + " and " + std::to_string(y.size()));
    const double nx = static_cast<double>(x.size()), ny = static_cast<double>(y.size());
    const double mx = mean_of(x), my = mean_of(y);
    const double vx = var_of(x, mx), vy = var_of(y, my);
    if (vx <= 0.0 && vy <= 0.0)
        throw StatsError("welch_t: both samples have zero variance");
    const double se2 = vx / nx + vy / ny;
    TTestResult r;
    r.t = (mx - my) / std::sqrt(se2);
    r.dof = se2 * se2 /
            (vx * vx / (nx * nx * (nx - 1.0)) + vy * vy / (ny * ny * (ny - 1.0)));
    r.p = student_t_two_sided_p(r.t, r.dof);
    return r;
}

TTestResult paired_t(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw StatsError("paired_t: sample sizes differ");
    if (x.size() < 2) throw StatsError("paired_t needs at least 2 pairs");
    std::vector<double> d(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] - y[i];
    const double n = static_cast<double>(d.size());
    const double md = mean_of(d);
    const double vd = var_of(d, md);
    TTestResult r;
    r.dof = n - 1.0;
    if (vd <= 0.0) {
        if (md != 0.0) throw StatsError("paired_t: zero variance with nonzero mean difference");
        r.t = 0.0;
        r.p = 1.0;
        return r;
    }
    r.t = md / std::sqrt(vd / n);
    r.p = student_t_two_sided_p(r.t, r.dof);
    return r;
}

} // namespace zoneforge::evalkit
