#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include <json.hpp>

#include "superstat/moments.hpp"
#include "superstat/pipeline.hpp"
#include "test_support.hpp"

using namespace superstat;

namespace {

// Symbolic partial derivatives of exp(n phi + n^2 theta^2 / 2), written out
// independently of the evaluator under test.
struct Partials {
    double f, fp, ft, fpp, ftt, fpt;
};

Partials partials(double phi, double theta, int n) {
    const double f = std::exp(n * phi + 0.5 * n * n * theta * theta);
    const double k = n * n * theta;  // d/dtheta of the exponent
    return {f, n * f, k * f, n * n * f, (n * n + k * k) * f, n * k * f};
}

CoeffSurfaces random_surfaces(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    CoeffSurfaces s;
    s.d1_phi = {u(rng), u(rng), u(rng)};
    s.d1_theta = {u(rng), u(rng), u(rng)};
    s.g_pp = {u(rng), u(rng), u(rng), u(rng), u(rng), u(rng)};
    s.g_tt = {u(rng), u(rng), u(rng), u(rng), u(rng), u(rng)};
    s.g_pt = {u(rng), u(rng), u(rng), u(rng), u(rng), u(rng)};
    return s;
}

DailyPattern flat_pattern(double v, int spd) {
    DailyPattern p;
    p.slots_per_day = spd;
    p.slot_means.assign(static_cast<std::size_t>(spd), v);
    return p;
}

}  // namespace

TEST(Fn, Examples) {
    EXPECT_DOUBLE_EQ(f_n(0.0, 0.0, 1), 1.0);
    EXPECT_NEAR(f_n(1.0, 1.0, 2), std::exp(4.0), 1e-12 * std::exp(4.0));
    EXPECT_NEAR(f_n(1.0, 1.0, 1), std::exp(1.5), 1e-14);
    EXPECT_THROW(f_n(200.0, 5.0, 4), NumericalError);
}

TEST(Fn, MonteCarloMean) {
    std::mt19937_64 rng(1);
    std::lognormal_distribution<double> d(0.5, 0.4);
    double sum = 0.0;
    const int n = 400000;
    for (int i = 0; i < n; ++i) sum += d(rng);
    EXPECT_NEAR(sum / n, f_n(0.5, 0.4, 1), 0.005 * f_n(0.5, 0.4, 1));
}

TEST(Fn, LogIdentityAndOrdering) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> up(-3, 3), ut(0, 1.5);
    for (int k = 0; k < 1000; ++k) {
        const double phi = up(rng), theta = ut(rng);
        for (int n = 1; n <= 4; ++n) {
            EXPECT_NEAR(std::log(f_n(phi, theta, n)), n * phi + 0.5 * n * n * theta * theta, 1e-12);
            EXPECT_GE(f_n(phi, theta, n + 1), f_n(phi, theta, n) * std::exp(phi) * (1 - 1e-12));
        }
    }
}

TEST(EmpiricalMoments, PerWindow) {
    ParamSeries s;
    s.window_index = {0, 1};
    s.params = {{0.0, 0.0}, {1.0, 1.0}};
    const auto m = empirical_moments(s, 2);
    EXPECT_DOUBLE_EQ(m.values[0], 1.0);
    EXPECT_NEAR(m.values[1], std::exp(4.0), 1e-12 * std::exp(4.0));
    EXPECT_EQ(m.source, MomentSource::empirical);
    EXPECT_THROW(empirical_moments(s, 0), InputError);
}

TEST(ItoCoefficients, ChainRuleExample) {
    CoeffSurfaces s;
    s.d1_phi = {0.0, -1.0, 0.0};
    s.d1_theta = {0.0, 0.0, -1.0};
    const ItoCoefficients c(s, 1);
    EXPECT_NEAR(c.A(1.0, 1.0), -2.0 * std::exp(1.5), 1e-12);
    EXPECT_DOUBLE_EQ(c.B(1.0, 1.0), 0.0);
    EXPECT_DOUBLE_EQ(c.C(1.0, 1.0), 0.0);
}

TEST(ItoCoefficients, TermDropout) {
    // theta = 0 and no theta noise: only the first-order phi term and the phi
    // curvature survive.
    CoeffSurfaces s;
    s.d1_phi = {0.3, -0.2, 0.0};
    s.d1_theta = {0.1, 0.0, 0.0};
    s.g_pp.a = 0.4;
    s.g_pt.a = 0.0;
    const ItoCoefficients c(s, 1);
    const double phi = 0.7;
    const double f = std::exp(phi);
    const double h1 = 0.3 - 0.2 * phi;
    EXPECT_NEAR(c.A(phi, 0.0), f * h1 + 0.5 * f * 0.16, 1e-12);
}

TEST(ItoCoefficients, SymbolicOracleAtRandomStates) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> up(-1, 1), ut(-0.5, 0.5);
    for (int k = 0; k < 100; ++k) {
        const auto s = random_surfaces(rng);
        const double phi = up(rng), theta = ut(rng);
        for (int n = 1; n <= 4; ++n) {
            const ItoCoefficients c(s, n);
            const auto d = partials(phi, theta, n);
            const double h1 = s.d1_phi(phi, theta), h2 = s.d1_theta(phi, theta);
            const double g11 = s.g_pp(phi, theta), g22 = s.g_tt(phi, theta), g12 = s.g_pt(phi, theta);
            const double g21 = g12;
            const double a = d.fp * h1 + d.ft * h2 + d.fpt * (g11 * g21 + g12 * g22) +
                             0.5 * d.fpp * (g11 * g11 + g12 * g12) + 0.5 * d.ftt * (g21 * g21 + g22 * g22);
            const double b = d.fp * g11 + d.ft * g21;
            const double cc = d.fp * g12 + d.ft * g22;
            const double scale = std::max(1.0, d.f);
            EXPECT_NEAR(c.A(phi, theta), a, 1e-10 * scale);
            EXPECT_NEAR(c.B(phi, theta), b, 1e-10 * scale);
            EXPECT_NEAR(c.C(phi, theta), cc, 1e-10 * scale);
        }
    }
}

TEST(ItoCoefficients, FiniteDifferenceDerivatives) {
    const ItoCoefficients c(nyse_reference_surfaces(), 3);
    const double h = 1e-4;
    for (const auto [phi, theta] : {std::pair{0.1, 0.2}, std::pair{-0.4, -0.1}, std::pair{0.0, 0.3}}) {
        const double f0 = c.F(phi, theta);
        const double fp = (c.F(phi + h, theta) - c.F(phi - h, theta)) / (2 * h);
        const double ft = (c.F(phi, theta + h) - c.F(phi, theta - h)) / (2 * h);
        const double fpp = (c.F(phi + h, theta) - 2 * f0 + c.F(phi - h, theta)) / (h * h);
        const double ftt = (c.F(phi, theta + h) - 2 * f0 + c.F(phi, theta - h)) / (h * h);
        const double fpt = (c.F(phi + h, theta + h) - c.F(phi + h, theta - h) - c.F(phi - h, theta + h) +
                            c.F(phi - h, theta - h)) /
                           (4 * h * h);
        EXPECT_NEAR(c.dF_dphi(phi, theta), fp, 1e-6 * f0 * 10);
        EXPECT_NEAR(c.dF_dtheta(phi, theta), ft, 1e-6 * f0 * 10);
        EXPECT_NEAR(c.d2F_dphi2(phi, theta), fpp, 1e-4 * f0 * 10);
        EXPECT_NEAR(c.d2F_dtheta2(phi, theta), ftt, 1e-4 * f0 * 10);
        EXPECT_NEAR(c.d2F_dphi_dtheta(phi, theta), fpt, 1e-4 * f0 * 10);
    }
}

TEST(ItoCoefficients, PrintedCurvatureDropsSecondOrderTerm) {
    const auto s = nyse_reference_surfaces();
    const ItoCoefficients exact(s, 2), printed(s, 2, ThetaCurvature::printed);
    const double phi = 0.1, theta = 0.2;
    EXPECT_NEAR(exact.d2F_dtheta2(phi, theta) - printed.d2F_dtheta2(phi, theta), 4.0 * f_n(phi, theta, 2),
                1e-12);
    EXPECT_NE(exact.A(phi, theta), printed.A(phi, theta));
    EXPECT_EQ(exact.B(phi, theta), printed.B(phi, theta));
}

TEST(MomentSde, NoiselessMatchesDeterministicPath) {
    CoeffSurfaces s;
    s.d1_phi = {0.0, -0.5, 0.0};
    s.d1_theta = {0.0, 0.0, -0.5};
    SimConfig cfg;
    cfg.dt = 0.01;
    cfg.n_steps = 21;
    cfg.initial = {0.5, 0.3};
    const auto r = integrate_moment_sde(s, cfg, 1);
    ASSERT_EQ(r.moments.values.size(), 21u);
    EXPECT_EQ(r.moments.source, MomentSource::model_ito);
    EXPECT_DOUBLE_EQ(r.moments.values[0], f_n(0.5, 0.3, 1));
    for (std::size_t k = 0; k < r.path.states.size(); ++k) {
        const double direct = f_n(r.path.states[k].phi, r.path.states[k].theta, 1);
        EXPECT_NEAR(r.moments.values[k], direct, 0.02 * direct);
    }
}

TEST(MomentSde, PathMatchesSimulate) {
    SimConfig cfg;
    cfg.n_steps = 30;
    cfg.seed = 5;
    const auto s = nyse_reference_surfaces();
    const auto r = integrate_moment_sde(s, cfg, 2);
    const auto p = simulate(s, cfg);
    for (std::size_t k = 0; k < p.states.size(); ++k) EXPECT_EQ(r.path.states[k].phi, p.states[k].phi);
}

TEST(MomentSde, ItoSelfConsistency) {
    // f_n of the parameter path is the exact solution the moment equation
    // approximates; at dt = 1e-3 over 1e3 steps the first-moment gap stays
    // below 1%. Higher orders scale the strong error by about n^2.
    const auto s = nyse_reference_surfaces();
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto dw = wiener_increments(seed, 1000, 1e-3);
        const auto t = integrate_moment_increments(ItoCoefficients(s, 1), {}, 1e-3, dw);
        worst = std::max(worst, std::abs(t.ito.back() - t.direct.back()) / t.direct.back());
    }
    EXPECT_LT(worst, 0.01);
}

TEST(MomentSde, GapShrinksWithStep) {
    const auto s = nyse_reference_surfaces();
    const ItoCoefficients c(s, 1);
    double previous = std::numeric_limits<double>::infinity();
    for (int factor : {4, 2, 1}) {
        double sq = 0.0;
        for (std::uint64_t seed = 11; seed < 41; ++seed) {
            const auto base = wiener_increments(seed, 4000, 2.5e-4);
            std::vector<WienerIncrement> dw(4000 / factor);
            for (std::size_t k = 0; k < base.size(); ++k) {
                dw[k / factor].w1 += base[k].w1;
                dw[k / factor].w2 += base[k].w2;
            }
            const auto t = integrate_moment_increments(c, {}, 2.5e-4 * factor, dw);
            const double rel = (t.ito.back() - t.direct.back()) / t.direct.back();
            sq += rel * rel;
        }
        EXPECT_LT(sq, previous) << factor;
        previous = sq;
    }
}

TEST(Recompose, ZeroFluctuationsGiveEmpiricalMoments) {
    ParamSeries s;
    s.slots_per_day = 3;
    for (int d = 0; d < 4; ++d) {
        for (int k = 0; k < 3; ++k) {
            s.window_index.push_back(d * 3 + k);
            s.params.push_back({1.0 + 0.1 * k, 0.5 - 0.05 * k, 10, 0.1, 0.1});
        }
    }
    const PatternOptions opts{PatternMethod::global_mean, 1, MovingAlignment::centered};
    const auto pp = daily_pattern(s, Component::phi, opts);
    const auto tp = daily_pattern(s, Component::theta, opts);
    FluctuationSeries fl;
    fl.slots_per_day = 3;
    fl.window_index = s.window_index;
    fl.phi_f.assign(s.size(), 0.0);
    fl.theta_f.assign(s.size(), 0.0);
    for (int n = 1; n <= 4; ++n) {
        const auto a = recompose_moments(pp, tp, fl, n, MomentSource::model_direct);
        const auto b = empirical_moments(s, n);
        for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(a.values[i], b.values[i], 1e-12 * b.values[i]);
    }
    // A continuous path cycles through the slots by position.
    FluctuationSeries path;
    path.window_index = {0, 1, 2, 3};
    path.phi_f.assign(4, 0.0);
    path.theta_f.assign(4, 0.0);
    const auto c = recompose_moments(pp, tp, path, 1, MomentSource::model_direct);
    EXPECT_DOUBLE_EQ(c.values[3], c.values[0]);
    EXPECT_NE(c.values[1], c.values[0]);
    EXPECT_THROW(recompose_moments(pp, flat_pattern(0.0, 4), path, 1, MomentSource::model_direct), InputError);
}

TEST(Ks, IdenticalAndDisjoint) {
    const std::vector<double> a{1, 2, 3, 4}, b{5, 6, 7};
    EXPECT_DOUBLE_EQ(ks_distance(a, a), 0.0);
    EXPECT_DOUBLE_EQ(ks_distance(a, b), 1.0);
    EXPECT_DOUBLE_EQ(ks_distance(b, a), 1.0);
    // Hand value: {1, 2} vs {2, 3}; after 1 the CDFs are 1/2 and 0.
    EXPECT_DOUBLE_EQ(ks_distance(std::vector<double>{1, 2}, std::vector<double>{2, 3}), 0.5);
    EXPECT_THROW(ks_distance(std::vector<double>{}, a), InputError);
}

TEST(MomentDistributions, LogGridAndNormalization) {
    MomentSeries a, b;
    std::mt19937_64 rng(7);
    std::lognormal_distribution<double> d(0.0, 2.0);
    for (int i = 0; i < 20000; ++i) {
        a.values.push_back(d(rng));
        b.values.push_back(d(rng));
    }
    const auto c = moment_distributions(a, b, 40);
    ASSERT_EQ(c.edges.size(), 41u);
    const double ratio = c.edges[1] / c.edges[0];
    for (std::size_t k = 1; k + 1 < c.edges.size(); ++k) EXPECT_NEAR(c.edges[k + 1] / c.edges[k], ratio, 1e-9 * ratio);
    double mass = 0.0;
    for (std::size_t k = 0; k < c.pdf_model.size(); ++k) mass += c.pdf_model[k] * (c.edges[k + 1] - c.edges[k]);
    EXPECT_NEAR(mass, 1.0, 1e-12);
    EXPECT_GT(c.overlap, 0.95);
    EXPECT_LT(c.ks, 0.03);
    const auto same = moment_distributions(a, a, 40);
    EXPECT_DOUBLE_EQ(same.ks, 0.0);
    EXPECT_NEAR(same.overlap, 1.0, 1e-12);
}

TEST(MomentsCsv, Layout) {
    MomentSeries m;
    m.order = 3;
    m.window_index = {4};
    m.values = {2.5};
    m.source = MomentSource::model_ito;
    std::ostringstream out;
    write_moments_csv(out, std::vector<MomentSeries>{m});
    EXPECT_EQ(out.str(), "window_index,n,value,source\n4,3,2.5,model_ito\n");
}

TEST(ClosedLoop, FirstMomentDistributionMatches) {
    // Synthetic ticks -> fitted surfaces -> simulated moments against the
    // empirical moments of the same ticks.
    test::TempDir dir;
    test::write_fixture(pipeline_fixture_spec(), dir / "fixture.csv");
    auto cfg = load_config(std::filesystem::path(SUPERSTAT_TEST_DATA) / "fixture.conf");
    run_pipeline(dir / "fixture.csv", cfg, dir / "out");
    const auto summary = nlohmann::json::parse(test::read_file(dir / "out" / "moments_summary.json"));
    ASSERT_TRUE(summary.is_array());
    EXPECT_EQ(summary[0]["n"], 1);
    EXPECT_LT(summary[0]["ks"].get<double>(), 0.1);
}
