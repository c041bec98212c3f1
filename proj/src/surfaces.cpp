#include "superstat/surfaces.hpp"

#include <cmath>

#include <Eigen/Dense>
#include <fmt/format.h>
#include <json.hpp>

#include "superstat/error.hpp"
#include "superstat/hash.hpp"

namespace superstat {

using nlohmann::ordered_json;

Eigen::Matrix2d CoeffSurfaces::noise(double phi, double theta) const {
    const double off = g_pt(phi, theta);
    Eigen::Matrix2d g;
    g << g_pp(phi, theta), off, off, g_tt(phi, theta);
    return g;
}

CoeffSurfaces nyse_reference_surfaces() {
    CoeffSurfaces s;
    s.d1_phi = {-0.0085, -0.7143, 0.2812};
    s.d1_theta = {-0.0031, 0.0293, -0.5023};
    s.g_pp = {0.2185, 0.0918, 0.2255, 0.4850, 0.2925, 4.0541};
    s.g_tt = {0.0360, 0.0174, -0.0128, 0.0210, 0.0245, 1.5197};
    s.g_pt = {-0.0111, -0.0051, -0.0158, -0.0134, 0.2936, -0.1835};
    s.r_squared.d1_phi = 0.78;
    s.r_squared.d1_theta = 0.67;
    s.r_squared.g_pp = 0.93;
    s.r_squared.g_tt = 0.92;
    s.r_squared.g_pt = 0.93;
    return s;
}

namespace {

ordered_json linear_row(const LinearForm& f, double r2) {
    return ordered_json::array({f.a, f.b, f.c, nullptr, nullptr, nullptr, r2});
}

ordered_json quadratic_row(const QuadraticForm& f, double r2) {
    return ordered_json::array({f.a, f.b, f.c, f.d, f.e, f.f, r2});
}

double cell(const nlohmann::json& row, std::size_t k, const char* name) {
    const auto& v = row.at(k);
    if (v.is_null()) return 0.0;
    if (!v.is_number()) throw InputError(fmt::format("surfaces: row {} column {} is not a number", name, k));
    return v.get<double>();
}

const nlohmann::json& row_of(const nlohmann::json& rows, const char* name) {
    if (!rows.contains(name)) throw InputError(fmt::format("surfaces: missing row '{}'", name));
    const auto& r = rows.at(name);
    if (!r.is_array() || r.size() != 7) {
        throw InputError(fmt::format("surfaces: row '{}' must hold 7 entries", name));
    }
    return r;
}

LinearForm read_linear(const nlohmann::json& rows, const char* name, double& r2) {
    const auto& r = row_of(rows, name);
    for (std::size_t k = 3; k < 6; ++k) {
        if (!r.at(k).is_null() && cell(r, k, name) != 0.0) {
            throw InputError(fmt::format("surfaces: drift row '{}' must be linear", name));
        }
    }
    r2 = cell(r, 6, name);
    return {cell(r, 0, name), cell(r, 1, name), cell(r, 2, name)};
}

QuadraticForm read_quadratic(const nlohmann::json& rows, const char* name, double& r2) {
    const auto& r = row_of(rows, name);
    r2 = cell(r, 6, name);
    return {cell(r, 0, name), cell(r, 1, name), cell(r, 2, name),
            cell(r, 3, name), cell(r, 4, name), cell(r, 5, name)};
}

/// Weighted least squares; returns coefficients and the weighted R^2.
Eigen::VectorXd weighted_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                             const Eigen::VectorXd& w, double& r2) {
    const Eigen::VectorXd sw = w.array().sqrt();
    const Eigen::MatrixXd Xw = sw.asDiagonal() * X;
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xw);
    if (qr.rank() < X.cols()) {
        throw NumericalError(fmt::format("surface fit: rank-deficient design ({} of {} columns)",
                                         qr.rank(), X.cols()));
    }
    const Eigen::VectorXd beta = qr.solve(sw.asDiagonal() * y);
    const double wsum = w.sum();
    const double ybar = w.dot(y) / wsum;
    const double sst = (w.array() * (y.array() - ybar).square()).sum();
    const double rss = (w.array() * (y - X * beta).array().square()).sum();
    r2 = sst > 1e-300 ? 1.0 - rss / sst : 1.0;
    return beta;
}

}  // namespace

std::string dump_surfaces(const CoeffSurfaces& s) {
    ordered_json j;
    j["columns"] = {"1", "phi", "theta", "phi^2", "phi*theta", "theta^2", "R2"};
    j["rows"]["d1_phi"] = linear_row(s.d1_phi, s.r_squared.d1_phi);
    j["rows"]["d1_theta"] = linear_row(s.d1_theta, s.r_squared.d1_theta);
    j["rows"]["g_pp"] = quadratic_row(s.g_pp, s.r_squared.g_pp);
    j["rows"]["g_tt"] = quadratic_row(s.g_tt, s.r_squared.g_tt);
    j["rows"]["g_pt"] = quadratic_row(s.g_pt, s.r_squared.g_pt);
    j["symmetric_g"] = s.symmetric_g;
    return j.dump(2) + "\n";
}

CoeffSurfaces parse_surfaces(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError(fmt::format("surfaces JSON parse error at byte {}: {}", e.byte, e.what()));
    }
    try {
        if (!j.is_object() || !j.contains("rows")) throw InputError("surfaces: missing 'rows' object");
        const auto& rows = j.at("rows");
        CoeffSurfaces s;
        s.d1_phi = read_linear(rows, "d1_phi", s.r_squared.d1_phi);
        s.d1_theta = read_linear(rows, "d1_theta", s.r_squared.d1_theta);
        s.g_pp = read_quadratic(rows, "g_pp", s.r_squared.g_pp);
        s.g_tt = read_quadratic(rows, "g_tt", s.r_squared.g_tt);
        s.g_pt = read_quadratic(rows, "g_pt", s.r_squared.g_pt);
        s.symmetric_g = j.value("symmetric_g", true);
        if (!s.symmetric_g) throw InputError("surfaces: only symmetric noise matrices are supported");
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(fmt::format("surfaces: {}", e.what()));
    }
}

std::string surfaces_fingerprint(const CoeffSurfaces& s) {
    return sha256_hex(dump_surfaces(s)).substr(0, 16);
}

DriftFit fit_drift_surfaces(const KMField& field) {
    const auto m = static_cast<Eigen::Index>(field.bins.size());
    if (m < 6) throw InputError(fmt::format("drift fit needs at least 6 bins, got {}", m));
    Eigen::MatrixXd X(m, 3);
    Eigen::VectorXd yp(m), yt(m), w(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto& b = field.bins[static_cast<std::size_t>(i)];
        X.row(i) << 1.0, b.phi_c, b.theta_c;
        yp(i) = b.d1_phi;
        yt(i) = b.d1_theta;
        w(i) = static_cast<double>(b.n);
    }
    DriftFit fit;
    const Eigen::VectorXd bp = weighted_fit(X, yp, w, fit.r2_phi);
    const Eigen::VectorXd bt = weighted_fit(X, yt, w, fit.r2_theta);
    fit.phi = {bp(0), bp(1), bp(2)};
    fit.theta = {bt(0), bt(1), bt(2)};
    return fit;
}

Eigen::Matrix2d symmetric_sqrt(const Eigen::Matrix2d& m) {
    const double a = m(0, 0), d = m(1, 1), b = 0.5 * (m(0, 1) + m(1, 0));
    const double s = std::sqrt(std::max(0.0, a * d - b * b));
    const double trace = a + d + 2.0 * s;
    if (!(trace > 0.0)) return Eigen::Matrix2d::Zero();
    const double t = std::sqrt(trace);
    Eigen::Matrix2d r;
    r << (a + s) / t, b / t, b / t, (d + s) / t;
    return r;
}

GField g_from_d2(const KMField& field) {
    GField out;
    for (const auto& bin : field.bins) {
        const double a = bin.d2_pp, d = bin.d2_tt, b = bin.d2_pt;
        const double mean = 0.5 * (a + d);
        const double radius = std::hypot(0.5 * (a - d), b);
        const double hi = mean + radius, lo = mean - radius;
        // Unit eigenvector of the small eigenvalue.
        Eigen::Vector2d v(b, lo - a);
        const Eigen::Vector2d alt(lo - d, b);
        if (alt.norm() > v.norm()) v = alt;
        if (v.norm() == 0.0) v << 0.0, 1.0;
        v.normalize();
        const double v1 = v(0), v2 = v(1);
        const double se_lo = std::sqrt(std::pow(v1, 4) * bin.se_d2_pp * bin.se_d2_pp +
                                       4.0 * v1 * v1 * v2 * v2 * bin.se_d2_pt * bin.se_d2_pt +
                                       std::pow(v2, 4) * bin.se_d2_tt * bin.se_d2_tt);
        GBin g;
        g.phi_c = bin.phi_c;
        g.theta_c = bin.theta_c;
        g.n = bin.n;
        if (lo >= 0.0) {
            Eigen::Matrix2d d2;
            d2 << a, b, b, d;
            g.g = symmetric_sqrt(d2);
        } else if (lo >= -3.0 * se_lo && hi >= -3.0 * se_lo) {
            // Floor the negative eigenvalue: keep only the leading direction.
            g.floored = true;
            const Eigen::Vector2d u(-v2, v1);
            g.g = std::sqrt(std::max(0.0, hi)) * (u * u.transpose());
        } else {
            out.excluded.push_back(bin.bin);
            continue;
        }
        out.bins.push_back(g);
    }
    if (out.bins.empty()) throw NumericalError("g_from_d2: every bin has an indefinite diffusion matrix");
    return out;
}

GFit fit_g_surfaces(const GField& field) {
    const auto m = static_cast<Eigen::Index>(field.bins.size());
    if (m < 6) throw InputError(fmt::format("noise-matrix fit needs at least 6 bins, got {}", m));
    Eigen::MatrixXd X(m, 6);
    Eigen::VectorXd ypp(m), ytt(m), ypt(m), w(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto& b = field.bins[static_cast<std::size_t>(i)];
        const double p = b.phi_c, t = b.theta_c;
        X.row(i) << 1.0, p, t, p * p, p * t, t * t;
        ypp(i) = b.g(0, 0);
        ytt(i) = b.g(1, 1);
        ypt(i) = 0.5 * (b.g(0, 1) + b.g(1, 0));
        w(i) = static_cast<double>(b.n);
    }
    GFit fit;
    auto to_form = [](const Eigen::VectorXd& c) {
        return QuadraticForm{c(0), c(1), c(2), c(3), c(4), c(5)};
    };
    fit.pp = to_form(weighted_fit(X, ypp, w, fit.r2_pp));
    fit.tt = to_form(weighted_fit(X, ytt, w, fit.r2_tt));
    fit.pt = to_form(weighted_fit(X, ypt, w, fit.r2_pt));
    return fit;
}

CoeffSurfaces fit_surfaces(const KMField& field) {
    const auto drift = fit_drift_surfaces(field);
    const auto g = fit_g_surfaces(g_from_d2(field));
    CoeffSurfaces s;
    s.d1_phi = drift.phi;
    s.d1_theta = drift.theta;
    s.g_pp = g.pp;
    s.g_tt = g.tt;
    s.g_pt = g.pt;
    s.r_squared.d1_phi = drift.r2_phi;
    s.r_squared.d1_theta = drift.r2_theta;
    s.r_squared.g_pp = g.r2_pp;
    s.r_squared.g_tt = g.r2_tt;
    s.r_squared.g_pt = g.r2_pt;
    return s;
}

}  // namespace superstat
