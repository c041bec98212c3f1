#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "superstat/decompose.hpp"
#include "superstat/langevin.hpp"

namespace superstat {

/// <s^n> = exp(n phi + n^2 theta^2 / 2) of a log-normal. Throws
/// NumericalError when the result overflows.
double f_n(double phi, double theta, int n);

enum class MomentSource { empirical, model_direct, model_ito };
std::string to_string(MomentSource s);

struct MomentSeries {
    int order = 1;
    std::vector<std::int64_t> window_index;
    std::vector<double> values;
    MomentSource source = MomentSource::empirical;
};

MomentSeries empirical_moments(const ParamSeries& series, int n);

/// Second theta derivative of F_n. `exact` is (n^2 + n^4 theta^2) F_n;
/// `printed` drops the n^2 F_n term as in the originally published identity.
enum class ThetaCurvature { exact, printed };

/// Drift (A_n) and noise loadings (B_n, C_n) of the Ito equation
/// d<s^n> = A_n dt + B_n dW1 + C_n dW2 for F_n(phi(t), theta(t)), the drift
/// h = D1 and noise matrix g taken from the surfaces (row 1 phi, row 2 theta).
class ItoCoefficients {
public:
    ItoCoefficients(CoeffSurfaces surfaces, int n, ThetaCurvature curvature = ThetaCurvature::exact);

    int order() const { return n_; }
    const CoeffSurfaces& surfaces() const { return s_; }
    double F(double phi, double theta) const { return f_n(phi, theta, n_); }
    double dF_dphi(double phi, double theta) const;
    double dF_dtheta(double phi, double theta) const;
    double d2F_dphi2(double phi, double theta) const;
    double d2F_dtheta2(double phi, double theta) const;
    double d2F_dphi_dtheta(double phi, double theta) const;

    double A(double phi, double theta) const;
    double B(double phi, double theta) const;
    double C(double phi, double theta) const;

private:
    CoeffSurfaces s_;
    int n_;
    ThetaCurvature curvature_;
};

/// Co-integration of the parameter system and the moment equation driven by
/// the same increments.
struct MomentTrack {
    std::vector<State> path;     // size increments + 1
    std::vector<double> ito;     // integrated <s^n>
    std::vector<double> direct;  // f_n(path)
};

MomentTrack integrate_moment_increments(const ItoCoefficients& coeffs, State x0, double dt,
                                        std::span<const WienerIncrement> increments,
                                        double divergence_bound = 1e6);

struct MomentIntegration {
    MomentSeries moments;  // source model_ito, at output cadence
    SimPath path;
};

MomentIntegration integrate_moment_sde(const CoeffSurfaces& s, const SimConfig& cfg, int n);

/// Moments of pattern + fluctuation: F_n(pattern_phi(slot) + phi', ...).
/// Fluctuation entry i is assigned slot i mod slots_per_day unless the series
/// carries its own day structure.
MomentSeries recompose_moments(const DailyPattern& phi_pattern, const DailyPattern& theta_pattern,
                               const FluctuationSeries& fl, int n, MomentSource source);

struct MomentComparison {
    int order = 1;
    double ks = 0.0;       // two-sample Kolmogorov-Smirnov distance
    double overlap = 0.0;  // integral of min(pdf_a, pdf_b) on the shared grid
    std::vector<double> edges;  // log-spaced
    std::vector<double> pdf_empirical;
    std::vector<double> pdf_model;
};

double ks_distance(std::span<const double> a, std::span<const double> b);

MomentComparison moment_distributions(const MomentSeries& empirical, const MomentSeries& model,
                                      int bins = 50);

void write_moments_csv(std::ostream& out, std::span<const MomentSeries> series);

}  // namespace superstat
