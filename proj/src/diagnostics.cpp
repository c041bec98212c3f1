#include "superstat/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <numeric>

#include <fftw3.h>
#include <fmt/format.h>

#include "superstat/error.hpp"

namespace superstat {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Equal-count bin of every index, ranking by value (ties by position).
std::vector<int> quantile_bins(std::span<const double> values, int bins) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<int> bin(values.size());
    const auto n = values.size();
    for (std::size_t r = 0; r < n; ++r) {
        bin[order[r]] = static_cast<int>(r * static_cast<std::size_t>(bins) / n);
    }
    return bin;
}

}  // namespace

std::vector<double> to_clock_grid(std::span<const std::int64_t> window_index,
                                  std::span<const double> values, int slots_per_day,
                                  int open_slot) {
    if (window_index.size() != values.size()) throw InputError("to_clock_grid: size mismatch");
    if (values.empty()) return {};
    if (slots_per_day <= 0) return {values.begin(), values.end()};
    auto clock = [&](std::int64_t wi) {
        return (wi / slots_per_day) * 144 + open_slot + wi % slots_per_day;
    };
    const std::int64_t first = clock(window_index.front());
    std::vector<double> grid(static_cast<std::size_t>(clock(window_index.back()) - first + 1), kNaN);
    for (std::size_t i = 0; i < values.size(); ++i) {
        grid[static_cast<std::size_t>(clock(window_index[i]) - first)] = values[i];
    }
    return grid;
}

std::vector<double> with_day_breaks(std::span<const std::int64_t> window_index,
                                    std::span<const double> values, int slots_per_day) {
    if (window_index.size() != values.size()) throw InputError("with_day_breaks: size mismatch");
    if (values.empty()) return {};
    std::vector<double> out;
    std::size_t i = 0;
    for (std::int64_t wi = window_index.front(); wi <= window_index.back(); ++wi) {
        if (slots_per_day > 0 && wi % slots_per_day == 0 && wi != window_index.front()) {
            out.push_back(kNaN);
        }
        if (i < values.size() && window_index[i] == wi) {
            out.push_back(values[i++]);
        } else {
            out.push_back(kNaN);
        }
    }
    return out;
}

Spectrum power_spectrum(std::span<const double> series) {
    std::size_t lo = 0, hi = series.size();
    while (lo < hi && std::isnan(series[lo])) ++lo;
    while (hi > lo && std::isnan(series[hi - 1])) --hi;
    const std::size_t n = hi - lo;
    if (n < 8) throw InputError(fmt::format("power spectrum needs at least 8 values, got {}", n));

    Spectrum out;
    std::vector<double> x(series.begin() + static_cast<std::ptrdiff_t>(lo),
                          series.begin() + static_cast<std::ptrdiff_t>(hi));
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isnan(x[i])) continue;
        std::size_t j = i;
        while (std::isnan(x[j])) ++j;
        const double left = x[i - 1], right = x[j];
        for (std::size_t k = i; k < j; ++k) {
            x[k] = left + (right - left) * static_cast<double>(k - i + 1) / static_cast<double>(j - i + 1);
        }
        out.interpolated += j - i;
        i = j;
    }
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    for (double& v : x) v -= mean;

    const std::size_t m = n / 2 + 1;
    std::vector<std::complex<double>> X(m);
    fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), x.data(),
                                          reinterpret_cast<fftw_complex*>(X.data()), FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);

    const double norm = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
    out.points.reserve(m);
    for (std::size_t k = 0; k < m; ++k) {
        double p = std::norm(X[k]) * norm;
        const bool self_conjugate = k == 0 || (n % 2 == 0 && k == n / 2);
        if (!self_conjugate) p *= 2.0;
        out.points.push_back({static_cast<double>(k) / static_cast<double>(n), p});
    }
    return out;
}

std::vector<double> autocorrelation(std::span<const double> series, int max_lag) {
    if (max_lag < 0) throw InputError("autocorrelation: negative max_lag");
    double sum = 0.0;
    std::size_t count = 0;
    for (double v : series) {
        if (std::isnan(v)) continue;
        sum += v;
        ++count;
    }
    if (count == 0) throw InputError("autocorrelation: empty series");
    const double mean = sum / static_cast<double>(count);
    double var = 0.0;
    for (double v : series) {
        if (!std::isnan(v)) var += (v - mean) * (v - mean);
    }
    std::vector<double> acf(static_cast<std::size_t>(max_lag) + 1, 0.0);
    acf[0] = 1.0;
    if (var == 0.0) return acf;
    for (int lag = 1; lag <= max_lag; ++lag) {
        const auto l = static_cast<std::size_t>(lag);
        double c = 0.0;
        for (std::size_t t = 0; t + l < series.size(); ++t) {
            const double a = series[t], b = series[t + l];
            if (std::isnan(a) || std::isnan(b)) continue;
            c += (a - mean) * (b - mean);
        }
        acf[l] = c / var;
    }
    return acf;
}

AcfFit acf_exponential_fit(std::span<const double> series, int max_lag, double noise_floor_z) {
    if (max_lag < 3) throw InputError("acf fit: max_lag must be at least 3");
    const auto finite = static_cast<std::size_t>(
        std::count_if(series.begin(), series.end(), [](double v) { return !std::isnan(v); }));
    if (finite <= 2 * static_cast<std::size_t>(max_lag)) {
        throw InputError(fmt::format("acf fit: series of {} values is too short for max_lag {}",
                                     finite, max_lag));
    }
    return fit_acf_decay(autocorrelation(series, max_lag), finite, noise_floor_z);
}

AcfFit fit_acf_decay(std::vector<double> acf, std::size_t n_values, double noise_floor_z) {
    if (acf.size() < 4) throw InputError("acf fit: max_lag must be at least 3");
    const int max_lag = static_cast<int>(acf.size()) - 1;
    AcfFit fit;
    fit.max_lag = max_lag;
    fit.acf = std::move(acf);
    const double floor = std::max(0.0, noise_floor_z) / std::sqrt(static_cast<double>(std::max<std::size_t>(n_values, 1)));

    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    int used = 0;
    for (int lag = 1; lag <= max_lag; ++lag) {
        const double r = fit.acf[static_cast<std::size_t>(lag)];
        if (!(r > floor)) break;
        const double y = std::log(r);
        sx += lag;
        sy += y;
        sxx += double(lag) * lag;
        sxy += lag * y;
        syy += y * y;
        ++used;
    }
    fit.lags_used = used;
    if (used < 3) {
        throw NumericalError(fmt::format("acf fit: only {} lags with positive autocorrelation", used));
    }
    const double n = used;
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double intercept = (sy - slope * sx) / n;
    if (!(slope < 0.0)) throw NumericalError("acf fit: autocorrelation does not decay");
    fit.xi = -1.0 / slope;
    fit.beta = std::exp(intercept);
    const double sst = syy - sy * sy / n;
    double rss = 0.0;
    for (int lag = 1; lag <= used; ++lag) {
        const double e = std::log(fit.acf[static_cast<std::size_t>(lag)]) - (intercept + slope * lag);
        rss += e * e;
    }
    fit.r_squared = sst > 0.0 ? 1.0 - rss / sst : 1.0;
    return fit;
}

double GaussianSummary::density(double x, double y) const {
    const double dx = x - mu[0], dy = y - mu[1];
    const double q = (sigma[1][1] * dx * dx - 2.0 * sigma[0][1] * dx * dy + sigma[0][0] * dy * dy) /
                     determinant;
    return std::exp(-0.5 * q) / (2.0 * std::numbers::pi * std::sqrt(determinant));
}

std::array<double, 3> GaussianSummary::sigma_se() const {
    const double m = static_cast<double>(n > 1 ? n - 1 : 1);
    const double sxx = sigma[0][0], syy = sigma[1][1], sxy = sigma[0][1];
    return {std::sqrt(2.0 * sxx * sxx / m), std::sqrt((sxx * syy + sxy * sxy) / m),
            std::sqrt(2.0 * syy * syy / m)};
}

GaussianSummary joint_gaussian_summary(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw InputError("joint gaussian: size mismatch");
    if (x.size() < 100) {
        throw InputError(fmt::format("joint gaussian needs at least 100 entries, got {}", x.size()));
    }
    GaussianSummary g;
    g.n = x.size();
    const double n = static_cast<double>(g.n);
    g.mu[0] = std::accumulate(x.begin(), x.end(), 0.0) / n;
    g.mu[1] = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - g.mu[0], dy = y[i] - g.mu[1];
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    g.sigma[0][0] = sxx / (n - 1);
    g.sigma[1][1] = syy / (n - 1);
    g.sigma[0][1] = g.sigma[1][0] = sxy / (n - 1);
    g.determinant = g.sigma[0][0] * g.sigma[1][1] - g.sigma[0][1] * g.sigma[0][1];
    if (!(g.determinant > 1e-10 * g.sigma[0][0] * g.sigma[1][1])) {
        throw NumericalError("joint gaussian: covariance matrix is singular");
    }
    return g;
}

GaussianSummary joint_gaussian_summary(const FluctuationSeries& fl) {
    return joint_gaussian_summary(fl.phi_f, fl.theta_f);
}

double wilcoxon_rank_sum_z(std::span<const double> a, std::span<const double> b) {
    const std::size_t n1 = a.size(), n2 = b.size(), n = n1 + n2;
    if (n1 == 0 || n2 == 0) throw InputError("rank-sum test needs two non-empty samples");
    std::vector<std::pair<double, bool>> all;
    all.reserve(n);
    for (double v : a) all.emplace_back(v, true);
    for (double v : b) all.emplace_back(v, false);
    std::sort(all.begin(), all.end(),
              [](const auto& l, const auto& r) { return l.first < r.first; });
    double w = 0.0, ties = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && all[j].first == all[i].first) ++j;
        const double mid = 0.5 * static_cast<double>(i + 1 + j);  // average of ranks i+1..j
        for (std::size_t k = i; k < j; ++k) {
            if (all[k].second) w += mid;
        }
        const double t = static_cast<double>(j - i);
        ties += t * t * t - t;
        i = j;
    }
    const double dn1 = static_cast<double>(n1), dn2 = static_cast<double>(n2), dn = static_cast<double>(n);
    const double mean = dn1 * (dn + 1.0) / 2.0;
    const double var = dn1 * dn2 / 12.0 * ((dn + 1.0) - ties / (dn * (dn - 1.0)));
    return var > 0.0 ? (w - mean) / std::sqrt(var) : 0.0;
}

MarkovTestResult markov_test(std::span<const double> series, int lag, int bins, std::size_t min_cell) {
    if (lag < 1) throw InputError("markov test: lag must be at least 1");
    if (bins < 2) throw InputError("markov test: need at least 2 bins");
    const auto l = static_cast<std::size_t>(lag);
    std::vector<double> x1, x2, x3;
    for (std::size_t t = l; t + l < series.size(); ++t) {
        const double past = series[t - l], now = series[t], next = series[t + l];
        if (std::isnan(past) || std::isnan(now) || std::isnan(next)) continue;
        x3.push_back(past);
        x2.push_back(now);
        x1.push_back(next);
    }
    MarkovTestResult res;
    res.lag = lag;
    res.bins = bins;
    if (x1.empty()) throw InputError("markov test: no complete triples");

    const auto bin_of = quantile_bins(x2, bins);
    std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(bins));
    for (std::size_t i = 0; i < bin_of.size(); ++i) members[static_cast<std::size_t>(bin_of[i])].push_back(i);

    for (const auto& idx : members) {
        const std::size_t m = idx.size();
        const std::size_t cells = std::min<std::size_t>(static_cast<std::size_t>(bins), m / min_cell);
        if (cells < 2) continue;
        // Local linear adjustment of x1 for x2 inside the bin.
        double m1 = 0, m2 = 0;
        for (auto i : idx) {
            m1 += x1[i];
            m2 += x2[i];
        }
        m1 /= static_cast<double>(m);
        m2 /= static_cast<double>(m);
        double c12 = 0, c22 = 0;
        for (auto i : idx) {
            c12 += (x1[i] - m1) * (x2[i] - m2);
            c22 += (x2[i] - m2) * (x2[i] - m2);
        }
        const double slope = c22 > 0.0 ? c12 / c22 : 0.0;
        std::vector<double> adjusted(m), past(m);
        for (std::size_t k = 0; k < m; ++k) {
            adjusted[k] = x1[idx[k]] - slope * (x2[idx[k]] - m2);
            past[k] = x3[idx[k]];
        }
        const auto cell_of = quantile_bins(past, static_cast<int>(cells));
        for (std::size_t c = 0; c < cells; ++c) {
            std::vector<double> in, out;
            for (std::size_t k = 0; k < m; ++k) {
                (static_cast<std::size_t>(cell_of[k]) == c ? in : out).push_back(adjusted[k]);
            }
            res.z.push_back(wilcoxon_rank_sum_z(in, out));
        }
    }
    res.cells = static_cast<int>(res.z.size());
    if (res.cells < 3) {
        throw InputError(fmt::format("markov test: only {} usable conditioning cells", res.cells));
    }
    double sum = 0.0;
    for (double z : res.z) sum += std::abs(z);
    res.mean_abs_z = sum / res.cells;
    res.t_ratio = res.mean_abs_z / std::sqrt(2.0 / std::numbers::pi);
    return res;
}

PawulaResult pawula_check(std::span<const double> series, int tau, int bins) {
    if (tau < 1) throw InputError("pawula check: tau must be at least 1");
    if (bins < 1) throw InputError("pawula check: need at least one bin");
    const auto l = static_cast<std::size_t>(tau);
    std::vector<double> x, dx;
    for (std::size_t t = 0; t + l < series.size(); ++t) {
        if (std::isnan(series[t]) || std::isnan(series[t + l])) continue;
        x.push_back(series[t]);
        dx.push_back(series[t + l] - series[t]);
    }
    if (x.empty()) throw InputError("pawula check: no increment pairs");
    const auto bin_of = quantile_bins(x, bins);
    struct Acc {
        double sx = 0, s2 = 0, s4 = 0;
        std::size_t n = 0;
    };
    std::vector<Acc> acc(static_cast<std::size_t>(bins));
    for (std::size_t i = 0; i < x.size(); ++i) {
        auto& a = acc[static_cast<std::size_t>(bin_of[i])];
        const double d2 = dx[i] * dx[i];
        a.sx += x[i];
        a.s2 += d2;
        a.s4 += d2 * d2;
        ++a.n;
    }
    PawulaResult res;
    res.tau = tau;
    double weighted = 0.0;
    std::size_t total = 0;
    for (const auto& a : acc) {
        if (a.n == 0) continue;
        PawulaBin b;
        const double n = static_cast<double>(a.n);
        b.center = a.sx / n;
        b.n = a.n;
        b.d2 = a.s2 / n / tau;
        b.d4 = a.s4 / n / (24.0 * tau);
        b.ratio = b.d2 > 0.0 ? b.d4 / (b.d2 * b.d2) : 0.0;
        weighted += b.ratio * n;
        total += a.n;
        res.bins.push_back(b);
    }
    res.pooled_ratio = total > 0 ? weighted / static_cast<double>(total) : 0.0;
    return res;
}

}  // namespace superstat
