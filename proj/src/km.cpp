#include "superstat/km.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>

#include <fmt/format.h>

#include "superstat/csv.hpp"
#include "superstat/error.hpp"

namespace superstat {

namespace {

std::vector<double> quantile_edges(std::vector<double> values, int bins) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    std::vector<double> edges;
    edges.reserve(static_cast<std::size_t>(bins) + 1);
    for (int k = 0; k < bins; ++k) edges.push_back(values[static_cast<std::size_t>(k) * n / static_cast<std::size_t>(bins)]);
    edges.push_back(values.back());
    for (std::size_t k = 1; k < edges.size(); ++k) {
        if (!(edges[k] > edges[k - 1])) {
            throw InputError("state grid: degenerate bin edges (too many identical values)");
        }
    }
    return edges;
}

int locate_1d(const std::vector<double>& edges, double v) {
    if (!(v >= edges.front()) || !(v <= edges.back())) return -1;
    const auto it = std::upper_bound(edges.begin(), edges.end(), v);
    const int k = static_cast<int>(it - edges.begin()) - 1;
    return std::min(k, static_cast<int>(edges.size()) - 2);
}

struct Moments {
    std::size_t n = 0;
    double sp = 0, st = 0;            // conditioning state
    double dp = 0, dt = 0;            // increments
    double dpp = 0, dpt = 0, dtt = 0; // products
    double dpppp = 0, dptpt = 0, dtttt = 0;
};

}  // namespace

int StateGrid::locate(double phi, double theta) const {
    const int i = locate_1d(phi_edges, phi);
    const int j = locate_1d(theta_edges, theta);
    if (i < 0 || j < 0) return -1;
    return i * theta_bins() + j;
}

StateGrid build_grid(const FluctuationSeries& fl, int bins_per_axis, std::size_t min_count) {
    if (bins_per_axis < 3) throw InputError("state grid: bins_per_axis must be at least 3");
    if (fl.size() < 1000) {
        throw InputError(fmt::format("state grid needs at least 1000 points, got {}", fl.size()));
    }
    StateGrid g;
    g.min_count = min_count;
    g.phi_edges = quantile_edges(fl.phi_f, bins_per_axis);
    g.theta_edges = quantile_edges(fl.theta_f, bins_per_axis);
    g.counts.assign(static_cast<std::size_t>(g.phi_bins() * g.theta_bins()), 0);
    for (std::size_t i = 0; i < fl.size(); ++i) {
        const int b = g.locate(fl.phi_f[i], fl.theta_f[i]);
        if (b >= 0) ++g.counts[static_cast<std::size_t>(b)];
    }
    return g;
}

KMField conditional_moments(const FluctuationSeries& fl, const StateGrid& grid, int tau,
                            DiffusionConvention convention) {
    if (tau < 1) throw InputError("conditional moments: tau must be at least 1");
    std::vector<Moments> acc(grid.counts.size());
    std::size_t j = 0;
    for (std::size_t i = 0; i < fl.size(); ++i) {
        const auto target = fl.window_index[i] + tau;
        if (j < i) j = i;
        while (j < fl.size() && fl.window_index[j] < target) ++j;
        if (j >= fl.size()) break;
        if (fl.window_index[j] != target || !fl.same_segment(fl.window_index[i], target)) continue;
        const int b = grid.locate(fl.phi_f[i], fl.theta_f[i]);
        if (b < 0) continue;
        auto& m = acc[static_cast<std::size_t>(b)];
        const double dp = fl.phi_f[j] - fl.phi_f[i];
        const double dt = fl.theta_f[j] - fl.theta_f[i];
        ++m.n;
        m.sp += fl.phi_f[i];
        m.st += fl.theta_f[i];
        m.dp += dp;
        m.dt += dt;
        m.dpp += dp * dp;
        m.dpt += dp * dt;
        m.dtt += dt * dt;
        m.dpppp += dp * dp * dp * dp;
        m.dptpt += dp * dt * dp * dt;
        m.dtttt += dt * dt * dt * dt;
    }

    const double k = convention == DiffusionConvention::factorial ? 2.0 : 1.0;
    const double t = tau;
    KMField field;
    field.tau = tau;
    for (std::size_t b = 0; b < acc.size(); ++b) {
        const auto& m = acc[b];
        if (m.n < grid.min_count || m.n < 2) continue;
        const double n = static_cast<double>(m.n);
        KMBin bin;
        bin.bin = static_cast<int>(b);
        bin.n = m.n;
        bin.tau_used = tau;
        bin.phi_c = m.sp / n;
        bin.theta_c = m.st / n;
        const double mp = m.dp / n, mt = m.dt / n;
        const double mpp = m.dpp / n, mpt = m.dpt / n, mtt = m.dtt / n;
        bin.d1_phi = mp / t;
        bin.d1_theta = mt / t;
        bin.d2_pp = mpp / (k * t);
        bin.d2_pt = mpt / (k * t);
        bin.d2_tt = mtt / (k * t);
        auto se = [n](double second, double first) {
            return std::sqrt(std::max(0.0, second - first * first) / n);
        };
        bin.se_d1_phi = se(mpp, mp) / t;
        bin.se_d1_theta = se(mtt, mt) / t;
        bin.se_d2_pp = se(m.dpppp / n, mpp) / (k * t);
        bin.se_d2_pt = se(m.dptpt / n, mpt) / (k * t);
        bin.se_d2_tt = se(m.dtttt / n, mtt) / (k * t);
        field.bins.push_back(bin);
    }
    if (field.bins.empty()) {
        throw InputError(fmt::format("conditional moments: no bin holds {} increment pairs at tau {}",
                                     grid.min_count, tau));
    }
    return field;
}

KMField extrapolate_tau(std::span<const KMField> fields) {
    if (fields.size() < 2) throw InputError("tau extrapolation needs at least two lags");
    std::vector<const KMField*> sorted;
    for (const auto& f : fields) sorted.push_back(&f);
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->tau < b->tau; });
    std::vector<std::map<int, const KMBin*>> lookup(sorted.size());
    for (std::size_t f = 0; f < sorted.size(); ++f) {
        for (const auto& b : sorted[f]->bins) lookup[f][b.bin] = &b;
    }

    KMField out;
    out.tau = 0;
    for (const auto& base : sorted.front()->bins) {
        KMBin bin = base;
        std::vector<const KMBin*> seen;
        std::vector<double> taus;
        for (std::size_t f = 0; f < sorted.size(); ++f) {
            auto it = lookup[f].find(base.bin);
            if (it == lookup[f].end()) continue;
            if (!taus.empty() && taus.back() == sorted[f]->tau) continue;
            seen.push_back(it->second);
            taus.push_back(sorted[f]->tau);
        }
        if (seen.size() >= 2) {
            auto intercept = [&](double KMBin::*value, double KMBin::*err, double& se_out) {
                double sw = 0, swt = 0, swtt = 0, swy = 0, swty = 0;
                for (std::size_t k = 0; k < seen.size(); ++k) {
                    const double s = seen[k]->*err;
                    const double w = s > 0.0 ? 1.0 / (s * s) : 1.0;
                    const double y = seen[k]->*value;
                    sw += w;
                    swt += w * taus[k];
                    swtt += w * taus[k] * taus[k];
                    swy += w * y;
                    swty += w * taus[k] * y;
                }
                const double det = sw * swtt - swt * swt;
                se_out = std::sqrt(swtt / det);
                return (swtt * swy - swt * swty) / det;
            };
            bin.d1_phi = intercept(&KMBin::d1_phi, &KMBin::se_d1_phi, bin.se_d1_phi);
            bin.d1_theta = intercept(&KMBin::d1_theta, &KMBin::se_d1_theta, bin.se_d1_theta);
            bin.d2_pp = intercept(&KMBin::d2_pp, &KMBin::se_d2_pp, bin.se_d2_pp);
            bin.d2_pt = intercept(&KMBin::d2_pt, &KMBin::se_d2_pt, bin.se_d2_pt);
            bin.d2_tt = intercept(&KMBin::d2_tt, &KMBin::se_d2_tt, bin.se_d2_tt);
            bin.tau_used = 0;
        }
        out.bins.push_back(bin);
    }
    return out;
}

KMField estimate_km(const FluctuationSeries& fl, const StateGrid& grid, int max_tau,
                    DiffusionConvention convention) {
    if (max_tau < 1) throw InputError("km estimate: max_tau must be at least 1");
    std::vector<KMField> fields;
    for (int tau = 1; tau <= max_tau; ++tau) fields.push_back(conditional_moments(fl, grid, tau, convention));
    if (max_tau == 1) return fields.front();
    return extrapolate_tau(fields);
}

void assign_theoretical_se(KMField& field) {
    for (auto& b : field.bins) {
        const double n = static_cast<double>(std::max<std::size_t>(b.n, 1));
        const double t = std::max(1, b.tau_used);
        b.se_d1_phi = std::sqrt(std::max(0.0, b.d2_pp) / (n * t));
        b.se_d1_theta = std::sqrt(std::max(0.0, b.d2_tt) / (n * t));
        b.se_d2_pp = std::sqrt(2.0 * b.d2_pp * b.d2_pp / n);
        b.se_d2_pt = std::sqrt((std::abs(b.d2_pp * b.d2_tt) + b.d2_pt * b.d2_pt) / n);
        b.se_d2_tt = std::sqrt(2.0 * b.d2_tt * b.d2_tt / n);
    }
}

void write_km_csv(std::ostream& out, const KMField& field) {
    out << "phi_c,theta_c,n,d1_phi,d1_theta,d2_pp,d2_pt,d2_tt\n";
    for (const auto& b : field.bins) {
        out << csv::num(b.phi_c) << ',' << csv::num(b.theta_c) << ',' << b.n << ','
            << csv::num(b.d1_phi) << ',' << csv::num(b.d1_theta) << ',' << csv::num(b.d2_pp) << ','
            << csv::num(b.d2_pt) << ',' << csv::num(b.d2_tt) << '\n';
    }
}

KMField read_km_csv(std::istream& in) {
    const auto t = csv::read_table(in);
    std::array<std::size_t, 8> c{};
    const std::array<const char*, 8> names{"phi_c",    "theta_c", "n",     "d1_phi",
                                           "d1_theta", "d2_pp",   "d2_pt", "d2_tt"};
    for (std::size_t k = 0; k < names.size(); ++k) c[k] = t.column(names[k]);
    KMField f;
    f.tau = 0;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const auto ln = t.line_numbers[r];
        KMBin b;
        b.bin = static_cast<int>(r);
        b.phi_c = csv::to_double(row[c[0]], ln);
        b.theta_c = csv::to_double(row[c[1]], ln);
        const auto n = csv::to_int(row[c[2]], ln);
        if (n < 1) throw InputError(fmt::format("line {}: bin count must be positive", ln));
        b.n = static_cast<std::size_t>(n);
        b.d1_phi = csv::to_double(row[c[3]], ln);
        b.d1_theta = csv::to_double(row[c[4]], ln);
        b.d2_pp = csv::to_double(row[c[5]], ln);
        b.d2_pt = csv::to_double(row[c[6]], ln);
        b.d2_tt = csv::to_double(row[c[7]], ln);
        b.tau_used = 0;
        f.bins.push_back(b);
    }
    if (f.bins.empty()) throw InputError("km field file holds no bins");
    assign_theoretical_se(f);
    return f;
}

}  // namespace superstat
