#include "superstat/moments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <fmt/format.h>

#include "superstat/csv.hpp"
#include "superstat/error.hpp"

namespace superstat {

namespace {

constexpr double kMaxExponent = 709.78;

}  // namespace

double f_n(double phi, double theta, int n) {
    const double nn = static_cast<double>(n);
    const double e = nn * phi + 0.5 * nn * nn * theta * theta;
    if (!(e < kMaxExponent)) {
        throw NumericalError(fmt::format("moment of order {} overflows (exponent {})", n, e));
    }
    return std::exp(e);
}

std::string to_string(MomentSource s) {
    switch (s) {
        case MomentSource::empirical: return "empirical";
        case MomentSource::model_direct: return "model_direct";
        case MomentSource::model_ito: return "model_ito";
    }
    return "unknown";
}

MomentSeries empirical_moments(const ParamSeries& series, int n) {
    if (n < 1) throw InputError(fmt::format("moment order must be >= 1, got {}", n));
    MomentSeries m;
    m.order = n;
    m.source = MomentSource::empirical;
    m.window_index = series.window_index;
    m.values.reserve(series.size());
    for (const auto& p : series.params) m.values.push_back(f_n(p.phi, p.theta, n));
    return m;
}

ItoCoefficients::ItoCoefficients(CoeffSurfaces surfaces, int n, ThetaCurvature curvature)
    : s_(std::move(surfaces)), n_(n), curvature_(curvature) {
    if (n < 1) throw InputError(fmt::format("moment order must be >= 1, got {}", n));
}

double ItoCoefficients::dF_dphi(double phi, double theta) const { return n_ * F(phi, theta); }

double ItoCoefficients::dF_dtheta(double phi, double theta) const {
    return static_cast<double>(n_) * n_ * theta * F(phi, theta);
}

double ItoCoefficients::d2F_dphi2(double phi, double theta) const {
    return static_cast<double>(n_) * n_ * F(phi, theta);
}

double ItoCoefficients::d2F_dtheta2(double phi, double theta) const {
    const double n2 = static_cast<double>(n_) * n_;
    const double quartic = n2 * n2 * theta * theta;
    return (curvature_ == ThetaCurvature::exact ? n2 + quartic : quartic) * F(phi, theta);
}

double ItoCoefficients::d2F_dphi_dtheta(double phi, double theta) const {
    return static_cast<double>(n_) * n_ * n_ * theta * F(phi, theta);
}

double ItoCoefficients::A(double phi, double theta) const {
    const auto h = s_.drift(phi, theta);
    const auto g = s_.noise(phi, theta);
    return dF_dphi(phi, theta) * h(0) + dF_dtheta(phi, theta) * h(1) +
           d2F_dphi_dtheta(phi, theta) * (g(0, 0) * g(1, 0) + g(0, 1) * g(1, 1)) +
           0.5 * d2F_dphi2(phi, theta) * (g(0, 0) * g(0, 0) + g(0, 1) * g(0, 1)) +
           0.5 * d2F_dtheta2(phi, theta) * (g(1, 0) * g(1, 0) + g(1, 1) * g(1, 1));
}

double ItoCoefficients::B(double phi, double theta) const {
    const auto g = s_.noise(phi, theta);
    return dF_dphi(phi, theta) * g(0, 0) + dF_dtheta(phi, theta) * g(1, 0);
}

double ItoCoefficients::C(double phi, double theta) const {
    const auto g = s_.noise(phi, theta);
    return dF_dphi(phi, theta) * g(0, 1) + dF_dtheta(phi, theta) * g(1, 1);
}

MomentTrack integrate_moment_increments(const ItoCoefficients& coeffs, State x0, double dt,
                                        std::span<const WienerIncrement> increments,
                                        double divergence_bound) {
    MomentTrack track;
    track.path = integrate_increments(coeffs.surfaces(), x0, dt, increments, divergence_bound);
    track.ito.reserve(track.path.size());
    track.direct.reserve(track.path.size());
    double m = coeffs.F(x0.phi, x0.theta);
    track.ito.push_back(m);
    for (std::size_t k = 0; k < increments.size(); ++k) {
        const State& x = track.path[k];
        m += coeffs.A(x.phi, x.theta) * dt + coeffs.B(x.phi, x.theta) * increments[k].w1 +
             coeffs.C(x.phi, x.theta) * increments[k].w2;
        if (!std::isfinite(m)) throw NumericalError(fmt::format("moment equation diverged at step {}", k + 1));
        track.ito.push_back(m);
    }
    for (const auto& x : track.path) track.direct.push_back(coeffs.F(x.phi, x.theta));
    return track;
}

MomentIntegration integrate_moment_sde(const CoeffSurfaces& s, const SimConfig& cfg, int n) {
    cfg.validate();
    const int sub = cfg.resolved_subsample();
    const auto steps = static_cast<std::size_t>(cfg.n_steps - 1) * static_cast<std::size_t>(sub);
    // Same draw order as simulate(), so the path matches simulate(s, cfg).
    const auto dw = wiener_increments(cfg.seed, steps, cfg.dt);
    const ItoCoefficients coeffs(s, n);
    const auto track = integrate_moment_increments(coeffs, cfg.initial, cfg.dt, dw, cfg.divergence_bound);

    MomentIntegration out;
    out.moments.order = n;
    out.moments.source = MomentSource::model_ito;
    out.path.seed = cfg.seed;
    out.path.surfaces_fingerprint = surfaces_fingerprint(s);
    for (std::int64_t k = 0; k < cfg.n_steps; ++k) {
        const auto j = static_cast<std::size_t>(k) * static_cast<std::size_t>(sub);
        out.moments.window_index.push_back(k);
        out.moments.values.push_back(track.ito[j]);
        out.path.states.push_back(track.path[j]);
    }
    return out;
}

MomentSeries recompose_moments(const DailyPattern& phi_pattern, const DailyPattern& theta_pattern,
                               const FluctuationSeries& fl, int n, MomentSource source) {
    if (n < 1) throw InputError(fmt::format("moment order must be >= 1, got {}", n));
    const int spd = phi_pattern.slots_per_day;
    if (spd <= 0 || theta_pattern.slots_per_day != spd) {
        throw InputError("recompose_moments: patterns disagree on slots_per_day");
    }
    MomentSeries m;
    m.order = n;
    m.source = source;
    m.window_index = fl.window_index;
    m.values.reserve(fl.size());
    for (std::size_t i = 0; i < fl.size(); ++i) {
        double p, t;
        if (fl.slots_per_day > 0) {
            p = phi_pattern.at(fl.window_index[i]);
            t = theta_pattern.at(fl.window_index[i]);
        } else {
            const auto slot = static_cast<std::size_t>(i % static_cast<std::size_t>(spd));
            p = phi_pattern.slot_means[slot];
            t = theta_pattern.slot_means[slot];
        }
        if (!std::isfinite(p) || !std::isfinite(t)) {
            throw InputError(fmt::format("recompose_moments: no pattern value for window {}", fl.window_index[i]));
        }
        m.values.push_back(f_n(p + fl.phi_f[i], t + fl.theta_f[i], n));
    }
    return m;
}

double ks_distance(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw InputError("ks_distance: empty sample");
    std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    const double nx = static_cast<double>(x.size()), ny = static_cast<double>(y.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < x.size() && j < y.size()) {
        const double v = std::min(x[i], y[j]);
        while (i < x.size() && x[i] <= v) ++i;
        while (j < y.size() && y[j] <= v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / nx - static_cast<double>(j) / ny));
    }
    return d;
}

MomentComparison moment_distributions(const MomentSeries& empirical, const MomentSeries& model,
                                      int bins) {
    if (bins < 1) throw InputError(fmt::format("moment_distributions: bins must be >= 1, got {}", bins));
    if (empirical.values.empty() || model.values.empty()) {
        throw InputError("moment_distributions: empty moment series");
    }
    MomentComparison c;
    c.order = empirical.order;
    c.ks = ks_distance(empirical.values, model.values);

    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto* v : {&empirical.values, &model.values}) {
        for (double x : *v) {
            if (x > 0.0) {
                lo = std::min(lo, x);
                hi = std::max(hi, x);
            }
        }
    }
    if (!(hi > lo)) hi = lo * 1.01 + 1e-300;
    const double llo = std::log(lo), lhi = std::log(hi);
    c.edges.resize(static_cast<std::size_t>(bins) + 1);
    for (int k = 0; k <= bins; ++k) {
        c.edges[static_cast<std::size_t>(k)] = std::exp(llo + (lhi - llo) * k / bins);
    }
    c.edges.front() = lo;
    c.edges.back() = hi;

    auto histogram = [&](const std::vector<double>& v) {
        std::vector<double> pdf(static_cast<std::size_t>(bins), 0.0);
        std::size_t used = 0;
        for (double x : v) {
            if (!(x > 0.0)) continue;
            auto k = static_cast<std::size_t>(
                std::upper_bound(c.edges.begin(), c.edges.end(), x) - c.edges.begin());
            k = std::clamp<std::size_t>(k, 1, static_cast<std::size_t>(bins)) - 1;
            pdf[k] += 1.0;
            ++used;
        }
        for (std::size_t k = 0; k < pdf.size(); ++k) {
            pdf[k] /= static_cast<double>(std::max<std::size_t>(used, 1)) * (c.edges[k + 1] - c.edges[k]);
        }
        return pdf;
    };
    c.pdf_empirical = histogram(empirical.values);
    c.pdf_model = histogram(model.values);
    for (std::size_t k = 0; k < c.pdf_model.size(); ++k) {
        c.overlap += std::min(c.pdf_empirical[k], c.pdf_model[k]) * (c.edges[k + 1] - c.edges[k]);
    }
    return c;
}

void write_moments_csv(std::ostream& out, std::span<const MomentSeries> series) {
    out << "window_index,n,value,source\n";
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.values.size(); ++i) {
            out << s.window_index[i] << ',' << s.order << ',' << csv::num(s.values[i]) << ','
                << to_string(s.source) << '\n';
        }
    }
}

}  // namespace superstat
