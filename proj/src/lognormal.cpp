#include "superstat/lognormal.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>

#include <fmt/format.h>

#include "superstat/csv.hpp"
#include "superstat/error.hpp"

namespace superstat {

LogNormalParams fit_window(std::span<const double> values, const LogNormalFitOptions& opts) {
    if (values.size() < 2) {
        throw InputError(fmt::format("log-normal fit needs at least 2 values, got {}", values.size()));
    }
    double sum = 0.0;
    for (double v : values) {
        if (!(v > 0.0)) throw InputError(fmt::format("log-normal fit: non-positive value {}", v));
        sum += std::log(v);
    }
    const double n = static_cast<double>(values.size());
    const double phi = sum / n;
    double ss = 0.0;
    for (double v : values) {
        const double d = std::log(v) - phi;
        ss += d * d;
    }
    double theta = std::sqrt(ss / n);
    if (theta <= 1e-12 * std::max(1.0, std::abs(phi))) theta = 0.0;
    if (theta < opts.theta_floor) theta = opts.theta_floor;
    if (!(theta > 0.0)) throw InputError("log-normal fit: degenerate window (theta = 0)");
    return {phi, theta, values.size(), theta / std::sqrt(n), theta / std::sqrt(2.0 * n)};
}

LogNormalParams fit_window(const WindowSample& sample, const LogNormalFitOptions& opts) {
    return fit_window(std::span<const double>(sample.values), opts);
}

std::vector<double> ParamSeries::phi() const {
    std::vector<double> out;
    out.reserve(params.size());
    for (const auto& p : params) out.push_back(p.phi);
    return out;
}

std::vector<double> ParamSeries::theta() const {
    std::vector<double> out;
    out.reserve(params.size());
    for (const auto& p : params) out.push_back(p.theta);
    return out;
}

FitAllResult fit_all(std::span<const WindowSample> windows, int slots_per_day, int open_slot,
                     const LogNormalFitOptions& opts) {
    FitAllResult out;
    out.series.slots_per_day = slots_per_day;
    out.series.open_slot = open_slot;
    std::vector<const WindowSample*> sorted;
    for (const auto& w : windows) sorted.push_back(&w);
    std::sort(sorted.begin(), sorted.end(), [](const WindowSample* a, const WindowSample* b) {
        return a->window_index < b->window_index;
    });
    for (const WindowSample* w : sorted) {
        try {
            out.series.params.push_back(fit_window(*w, opts));
            out.series.window_index.push_back(w->window_index);
        } catch (const InputError&) {
            out.skips.push_back({"fit", "degenerate", -1, w->window_index, w->intraday_slot,
                                 w->values.size()});
        }
    }
    if (out.series.params.empty()) throw InputError("no windows");
    return out;
}

double lognormal_pdf(double s, double phi, double theta) {
    if (!(s > 0.0)) throw InputError(fmt::format("lognormal_pdf: s must be positive, got {}", s));
    if (!(theta > 0.0)) throw InputError("lognormal_pdf: theta must be positive");
    const double z = (std::log(s) - phi) / theta;
    return std::exp(-0.5 * z * z) / (s * theta * std::sqrt(2.0 * std::numbers::pi));
}

void write_param_series_csv(std::ostream& out, const ParamSeries& series) {
    out << "# slots_per_day=" << series.slots_per_day << " open_slot=" << series.open_slot << '\n';
    out << "window_index,phi,theta,n,se_phi,se_theta\n";
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto& p = series.params[i];
        out << series.window_index[i] << ',' << csv::num(p.phi) << ',' << csv::num(p.theta) << ','
            << p.n << ',' << csv::num(p.se_phi) << ',' << csv::num(p.se_theta) << '\n';
    }
}

ParamSeries read_param_series_csv(std::istream& in) {
    const auto t = csv::read_table(in);
    ParamSeries s;
    if (auto it = t.meta.find("slots_per_day"); it != t.meta.end()) {
        s.slots_per_day = static_cast<int>(csv::to_int(it->second, 1));
    }
    if (auto it = t.meta.find("open_slot"); it != t.meta.end()) {
        s.open_slot = static_cast<int>(csv::to_int(it->second, 1));
    }
    const auto ci = t.column("window_index"), cp = t.column("phi"), ct = t.column("theta"),
               cn = t.column("n"), csp = t.column("se_phi"), cst = t.column("se_theta");
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const auto ln = t.line_numbers[r];
        const auto wi = csv::to_int(row[ci], ln);
        if (!s.window_index.empty() && wi <= s.window_index.back()) {
            throw InputError(fmt::format("line {}: window_index must increase", ln));
        }
        LogNormalParams p{csv::to_double(row[cp], ln), csv::to_double(row[ct], ln),
                          static_cast<std::size_t>(csv::to_int(row[cn], ln)),
                          csv::to_double(row[csp], ln), csv::to_double(row[cst], ln)};
        if (!(p.theta > 0.0)) throw InputError(fmt::format("line {}: theta must be positive", ln));
        s.window_index.push_back(wi);
        s.params.push_back(p);
    }
    return s;
}

}  // namespace superstat
