#include "superstat/decompose.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "superstat/csv.hpp"
#include "superstat/error.hpp"
#include "superstat/ingest.hpp"

namespace superstat {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double value_of(const LogNormalParams& p, Component which) {
    return which == Component::phi ? p.phi : p.theta;
}

}  // namespace

double DailyPattern::at(std::int64_t window_index) const {
    if (slots_per_day <= 0 || window_index < 0) return kNaN;
    const auto slot = static_cast<std::size_t>(window_index % slots_per_day);
    const auto day = static_cast<std::size_t>(window_index / slots_per_day);
    if (method == PatternMethod::moving_mean && day < day_means.size()) return day_means[day][slot];
    return slot < slot_means.size() ? slot_means[slot] : kNaN;
}

DailyPattern daily_pattern(const ParamSeries& series, Component which, const PatternOptions& opts) {
    const int spd = series.slots_per_day;
    if (spd <= 0) throw InputError("daily pattern: slots_per_day must be positive");
    if (series.size() == 0) throw InputError("daily pattern: empty series");
    const auto n_days = static_cast<std::size_t>(series.window_index.back() / spd + 1);
    const auto slots = static_cast<std::size_t>(spd);

    // sums[d][s], counts[d][s] per day and slot
    std::vector<double> sums(n_days * slots, 0.0);
    std::vector<int> counts(n_days * slots, 0);
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto wi = static_cast<std::size_t>(series.window_index[i]);
        sums[wi] += value_of(series.params[i], which);
        counts[wi] += 1;
    }

    DailyPattern p;
    p.method = opts.method;
    p.window_days = opts.method == PatternMethod::moving_mean ? opts.window_days : 0;
    p.slots_per_day = spd;
    p.open_slot = series.open_slot;
    p.slot_means.assign(slots, kNaN);
    for (std::size_t s = 0; s < slots; ++s) {
        double sum = 0.0;
        int count = 0;
        for (std::size_t d = 0; d < n_days; ++d) {
            sum += sums[d * slots + s];
            count += counts[d * slots + s];
        }
        if (count > 0) p.slot_means[s] = sum / count;
    }
    if (opts.method == PatternMethod::global_mean) return p;

    if (opts.window_days < 1) throw InputError("daily pattern: window_days must be positive");
    if (n_days < static_cast<std::size_t>(opts.window_days)) {
        throw InputError(fmt::format("daily pattern: moving mean over {} days needs at least that "
                                     "many days, series spans {}",
                                     opts.window_days, n_days));
    }
    // Prefix sums over days per slot.
    std::vector<double> psum((n_days + 1) * slots, 0.0);
    std::vector<int> pcount((n_days + 1) * slots, 0);
    for (std::size_t d = 0; d < n_days; ++d) {
        for (std::size_t s = 0; s < slots; ++s) {
            psum[(d + 1) * slots + s] = psum[d * slots + s] + sums[d * slots + s];
            pcount[(d + 1) * slots + s] = pcount[d * slots + s] + counts[d * slots + s];
        }
    }
    const auto w = static_cast<std::int64_t>(opts.window_days);
    p.day_means.assign(n_days, std::vector<double>(slots, kNaN));
    for (std::size_t d = 0; d < n_days; ++d) {
        const auto di = static_cast<std::int64_t>(d);
        std::int64_t lo = opts.alignment == MovingAlignment::centered ? di - w / 2 : di - w + 1;
        std::int64_t hi = lo + w;  // exclusive
        lo = std::max<std::int64_t>(lo, 0);
        hi = std::min<std::int64_t>(hi, static_cast<std::int64_t>(n_days));
        for (std::size_t s = 0; s < slots; ++s) {
            const auto a = static_cast<std::size_t>(lo) * slots + s;
            const auto b = static_cast<std::size_t>(hi) * slots + s;
            const int count = pcount[b] - pcount[a];
            if (count > 0) p.day_means[d][s] = (psum[b] - psum[a]) / count;
        }
    }
    return p;
}

double intraday_time(int slot, int open_slot) {
    return static_cast<double>((open_slot + slot) % 144) - 54.0;
}

CubicFit fit_cubic(std::span<const double> t_d, std::span<const double> values) {
    if (t_d.size() != values.size()) throw InputError("fit_cubic: size mismatch");
    const auto m = static_cast<Eigen::Index>(values.size());
    if (m < 4) throw InputError(fmt::format("fit_cubic needs at least 4 slots, got {}", m));

    // Work in u = t / scale to keep the Vandermonde matrix well conditioned.
    double scale = 0.0;
    for (double t : t_d) scale = std::max(scale, std::abs(t));
    if (scale == 0.0) scale = 1.0;
    Eigen::MatrixXd X(m, 4);
    Eigen::VectorXd y(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const double u = t_d[static_cast<std::size_t>(i)] / scale;
        X(i, 0) = u * u * u;
        X(i, 1) = u * u;
        X(i, 2) = u;
        X(i, 3) = 1.0;
        y(i) = values[static_cast<std::size_t>(i)];
    }
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    if (qr.rank() < 4) throw NumericalError("fit_cubic: fewer than 4 distinct intraday times");
    const Eigen::Vector4d beta = qr.solve(y);
    const Eigen::VectorXd resid = y - X * beta;
    const double rss = resid.squaredNorm();
    const double mean = y.mean();
    const double sst = (y.array() - mean).square().sum();

    CubicFit fit;
    const Eigen::Vector4d unscale(1.0 / (scale * scale * scale), 1.0 / (scale * scale), 1.0 / scale, 1.0);
    fit.a = beta(0) * unscale(0);
    fit.b = beta(1) * unscale(1);
    fit.c = beta(2) * unscale(2);
    fit.d = beta(3);
    const bool flat = sst <= 1e-24 * static_cast<double>(m) * std::max(1.0, mean * mean);
    fit.r_squared = flat ? 1.0 : 1.0 - rss / sst;
    if (m > 4) {
        const double sigma2 = rss / static_cast<double>(m - 4);
        const Eigen::Matrix4d cov = sigma2 * (X.transpose() * X).inverse();
        for (int k = 0; k < 4; ++k) fit.se[static_cast<std::size_t>(k)] = std::sqrt(cov(k, k)) * unscale(k);
    }
    return fit;
}

CubicFit fit_cubic(const DailyPattern& pattern) {
    std::vector<double> t, v;
    for (std::size_t s = 0; s < pattern.slot_means.size(); ++s) {
        if (std::isnan(pattern.slot_means[s])) continue;
        t.push_back(intraday_time(static_cast<int>(s), pattern.open_slot));
        v.push_back(pattern.slot_means[s]);
    }
    return fit_cubic(t, v);
}

CubicFit nyse_phi_pattern() {
    CubicFit c;
    c.a = 8.2e-5;
    c.b = -2.3e-3;
    c.c = -2.0e-2;
    c.d = 13.52;
    return c;
}

CubicFit nyse_theta_pattern() {
    CubicFit c;
    c.a = -1.0e-5;
    c.b = 5.6e-4;
    c.c = -1.3e-2;
    c.d = 1.79;
    return c;
}

bool FluctuationSeries::same_segment(std::int64_t a, std::int64_t b) const {
    return slots_per_day <= 0 || a / slots_per_day == b / slots_per_day;
}

DetrendResult detrend(const ParamSeries& series, const DailyPattern& phi_pattern,
                      const DailyPattern& theta_pattern, double outlier_sigma) {
    if (series.size() == 0) throw InputError("detrend: empty series");
    std::vector<double> pf(series.size()), tf(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto wi = series.window_index[i];
        const double pp = phi_pattern.at(wi);
        const double tp = theta_pattern.at(wi);
        if (std::isnan(pp) || std::isnan(tp)) {
            throw InputError(fmt::format("detrend: no pattern value for window {}", wi));
        }
        pf[i] = series.params[i].phi - pp;
        tf[i] = series.params[i].theta - tp;
    }
    const auto clip_phi = clip_outliers(pf, outlier_sigma);
    const auto clip_theta = clip_outliers(tf, outlier_sigma);

    DetrendResult out;
    out.removed_phi = clip_phi.removed;
    out.removed_theta = clip_theta.removed;
    auto& fl = out.fluctuations;
    fl.slots_per_day = series.slots_per_day;
    fl.open_slot = series.open_slot;
    for (std::size_t i = 0; i < series.size(); ++i) {
        if (!clip_phi.keep_mask[i] || !clip_theta.keep_mask[i]) continue;
        fl.window_index.push_back(series.window_index[i]);
        fl.phi_f.push_back(pf[i]);
        fl.theta_f.push_back(tf[i]);
    }
    return out;
}

void write_fluctuations_csv(std::ostream& out, const FluctuationSeries& fl) {
    out << "# slots_per_day=" << fl.slots_per_day << " open_slot=" << fl.open_slot << '\n';
    out << "window_index,phi_f,theta_f\n";
    for (std::size_t i = 0; i < fl.size(); ++i) {
        out << fl.window_index[i] << ',' << csv::num(fl.phi_f[i]) << ',' << csv::num(fl.theta_f[i])
            << '\n';
    }
}

FluctuationSeries read_fluctuations_csv(std::istream& in) {
    const auto t = csv::read_table(in);
    FluctuationSeries fl;
    if (auto it = t.meta.find("slots_per_day"); it != t.meta.end()) {
        fl.slots_per_day = static_cast<int>(csv::to_int(it->second, 1));
    }
    if (auto it = t.meta.find("open_slot"); it != t.meta.end()) {
        fl.open_slot = static_cast<int>(csv::to_int(it->second, 1));
    }
    const auto ci = t.column("window_index"), cp = t.column("phi_f"), ct = t.column("theta_f");
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto ln = t.line_numbers[r];
        const auto wi = csv::to_int(t.rows[r][ci], ln);
        if (!fl.window_index.empty() && wi <= fl.window_index.back()) {
            throw InputError(fmt::format("line {}: window_index must increase", ln));
        }
        fl.window_index.push_back(wi);
        fl.phi_f.push_back(csv::to_double(t.rows[r][cp], ln));
        fl.theta_f.push_back(csv::to_double(t.rows[r][ct], ln));
    }
    return fl;
}

void write_patterns_csv(std::ostream& out, const DailyPattern& phi, const DailyPattern& theta) {
    out << "slot,t_d,phi,theta\n";
    for (std::size_t s = 0; s < phi.slot_means.size(); ++s) {
        out << s << ',' << csv::num(intraday_time(static_cast<int>(s), phi.open_slot)) << ','
            << csv::num(phi.slot_means[s]) << ','
            << csv::num(s < theta.slot_means.size() ? theta.slot_means[s] : kNaN) << '\n';
    }
}

}  // namespace superstat
