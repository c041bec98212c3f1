#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "superstat/km.hpp"

namespace superstat {

/// a + b phi + c theta
struct LinearForm {
    double a = 0.0, b = 0.0, c = 0.0;
    double operator()(double phi, double theta) const { return a + b * phi + c * theta; }
};

/// a + b phi + c theta + d phi^2 + e phi theta + f theta^2
struct QuadraticForm {
    double a = 0.0, b = 0.0, c = 0.0, d = 0.0, e = 0.0, f = 0.0;
    double operator()(double phi, double theta) const {
        return a + b * phi + c * theta + d * phi * phi + e * phi * theta + f * theta * theta;
    }
};

/// Parametric drift vector and noise matrix of the fluctuation dynamics.
/// The noise matrix is symmetric: g_pt fills both off-diagonal entries.
struct CoeffSurfaces {
    LinearForm d1_phi, d1_theta;
    QuadraticForm g_pp, g_tt, g_pt;
    struct {
        double d1_phi = 0.0, d1_theta = 0.0, g_pp = 0.0, g_tt = 0.0, g_pt = 0.0;
    } r_squared;
    bool symmetric_g = true;

    Eigen::Vector2d drift(double phi, double theta) const {
        return {d1_phi(phi, theta), d1_theta(phi, theta)};
    }
    Eigen::Matrix2d noise(double phi, double theta) const;
    Eigen::Matrix2d diffusion(double phi, double theta) const {
        const Eigen::Matrix2d g = noise(phi, theta);
        return g * g.transpose();
    }
};

/// Surfaces fitted to detrended 10-minute NYSE volume-price parameters.
CoeffSurfaces nyse_reference_surfaces();

/// JSON laid out as the coefficient table: rows d1_phi, d1_theta, g_pp, g_tt,
/// g_pt; columns 1, phi, theta, phi^2, phi*theta, theta^2, R2 (null where a
/// drift row has no quadratic term).
/// Parse errors become InputError with the byte position.
CoeffSurfaces parse_surfaces(std::string_view text);
std::string dump_surfaces(const CoeffSurfaces& s);
/// Short SHA-256 prefix of the canonical JSON.
std::string surfaces_fingerprint(const CoeffSurfaces& s);

struct DriftFit {
    LinearForm phi, theta;
    double r2_phi = 0.0, r2_theta = 0.0;
};

/// Count-weighted least squares of the drift components on (1, phi, theta).
DriftFit fit_drift_surfaces(const KMField& field);

/// Unique symmetric positive semi-definite square root of a symmetric 2x2
/// matrix with non-negative eigenvalues.
Eigen::Matrix2d symmetric_sqrt(const Eigen::Matrix2d& m);

struct GBin {
    double phi_c = 0.0, theta_c = 0.0;
    std::size_t n = 0;
    Eigen::Matrix2d g = Eigen::Matrix2d::Zero();
    bool floored = false;  // a slightly negative eigenvalue was set to zero
};

struct GField {
    std::vector<GBin> bins;
    std::vector<int> excluded;  // grid bins whose d2 was clearly indefinite
};

/// Per-bin g with g g^T = d2. Eigenvalues down to -3 standard errors are
/// floored at zero; bins below that are excluded. Throws NumericalError when
/// every bin is excluded.
GField g_from_d2(const KMField& field);

struct GFit {
    QuadraticForm pp, tt, pt;
    double r2_pp = 0.0, r2_tt = 0.0, r2_pt = 0.0;
};

GFit fit_g_surfaces(const GField& field);

/// Drift fit + g construction + g fit.
CoeffSurfaces fit_surfaces(const KMField& field);

}  // namespace superstat
