#include <doctest.h>

#include <cmath>
#include <complex>
#include <functional>
#include <random>
#include <unsupported/Eigen/MatrixFunctions>

#include "ctdelay/ct_sim.hpp"
#include "ctdelay/excitation.hpp"
#include "ctdelay/filter_design.hpp"

using namespace ctdelay;

namespace {

const CtModel kCase1({2.0}, {0.25, 0.7, 1.0});
const CtModel kCase2({-6400.0, 1600.0}, {1.0, 5.0, 408.0, 416.0, 1600.0});

StateSpace first_order() { return tf_to_ss(CtModel({1.0}, {1.0, 1.0})); }

double max_abs_diff(const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

// Fine-step RK4 on z' = F z + G, z(0) = 0, and on Phi' = F Phi, Phi(0) = I.
std::pair<Matrix, Vector> rk4_substeps(const StateSpace& ss, double h, int steps) {
    const int n = ss.order();
    Matrix A = Matrix::Zero(n + 1, n + 1);
    A.topLeftCorner(n, n) = ss.F;
    A.topRightCorner(n, 1) = ss.G;
    Matrix X = Matrix::Identity(n + 1, n + 1);
    const double d = h / steps;
    for (int i = 0; i < steps; ++i) {
        const Matrix k1 = A * X;
        const Matrix k2 = A * (X + 0.5 * d * k1);
        const Matrix k3 = A * (X + 0.5 * d * k2);
        const Matrix k4 = A * (X + d * k3);
        X += d / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return {X.topLeftCorner(n, n), X.topRightCorner(n, 1)};
}

SampledDataset regular_dataset(double h, std::size_t n, const std::function<double(double)>& u) {
    SampledDataset d;
    for (std::size_t k = 0; k < n; ++k) {
        d.t.push_back(static_cast<double>(k) * h);
        d.u.push_back(u(d.t.back()));
        d.y.push_back(0.0);
    }
    return d;
}

}  // namespace

TEST_CASE("expm_pair") {
    const auto [F, G] = expm_pair(first_order(), 0.1);
    CHECK(F(0, 0) == doctest::Approx(std::exp(-0.1)).epsilon(1e-14));
    CHECK(G(0) == doctest::Approx(1.0 - std::exp(-0.1)).epsilon(1e-13));

    const auto ss = tf_to_ss(kCase1);
    const auto [F0, G0] = expm_pair(ss, 0.0);
    CHECK(max_abs_diff(F0, Matrix::Identity(2, 2)) == 0.0);
    CHECK(G0.cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(expm_pair(ss, -1e-3), std::invalid_argument);

    const auto [Fh, Gh] = expm_pair(ss, 0.05);
    const auto [Fr, Gr] = rk4_substeps(ss, 0.05, 1000);
    CHECK(max_abs_diff(Fh, Fr) < 1e-10);
    CHECK(max_abs_diff(Gh, Gr) < 1e-10);
}

TEST_CASE("rk4_pair") {
    const auto ss = tf_to_ss(kCase1);
    const auto [F0, G0] = rk4_pair(ss, 0.0);
    CHECK(max_abs_diff(F0, Matrix::Identity(2, 2)) == 0.0);
    CHECK(G0.cwiseAbs().maxCoeff() == 0.0);

    const auto [f, g] = rk4_pair(first_order(), 0.01);
    CHECK(std::abs(f(0, 0) - std::exp(-0.01)) < 1e-11);

    // local error is fifth order: halving delta divides it by about 32
    auto err = [&](double d) {
        const auto [Fr, Gr] = rk4_pair(ss, d);
        const auto [Fe, Ge] = expm_pair(ss, d);
        return std::max(max_abs_diff(Fr, Fe), max_abs_diff(Gr, Ge));
    };
    CHECK(err(0.04) / err(0.02) == doctest::Approx(32.0).epsilon(0.1));
    CHECK(err(0.04) < 1e-7);
    CHECK(err(0.025) < 1e-8);
    // the cache never takes residual steps above 0.02 / ||A||
    const auto cache = DiscretizationCache::for_steps(ss, 0.05, 1.0);
    CHECK(err(cache.delta()) < 1e-10);
}

TEST_CASE("DiscretizationCache table and hybrid steps") {
    const auto ss = tf_to_ss(kCase1);
    const DiscretizationCache cache(ss, 0.05, 40);
    CHECK(max_abs_diff(cache.F_table(0), Matrix::Identity(2, 2)) == 0.0);
    CHECK(cache.G_table(0).cwiseAbs().maxCoeff() == 0.0);

    // semigroup property of the table
    const Matrix F1 = cache.F_table(1);
    const Vector G1 = cache.G_table(1);
    for (int m = 0; m < 40; ++m) {
        CHECK(max_abs_diff(cache.F_table(m + 1), F1 * cache.F_table(m)) < 1e-10);
        CHECK(max_abs_diff(cache.G_table(m + 1), F1 * cache.G_table(m) + G1) < 1e-10);
    }

    const auto [F3, G3] = cache.hybrid_step(3 * 0.05);
    CHECK(max_abs_diff(F3, cache.F_table(3)) < 1e-15);
    CHECK(max_abs_diff(G3, cache.G_table(3)) < 1e-15);

    const auto [Fh, Gh] = cache.hybrid_step(0.123);
    const auto [Fe, Ge] = expm_pair(ss, 0.123);
    CHECK(max_abs_diff(Fh, Fe) < 1e-8);
    CHECK(max_abs_diff(Gh, Ge) < 1e-8);

    CHECK_THROWS_AS(cache.hybrid_step(41 * 0.05 + 0.01), std::out_of_range);
    CHECK_THROWS_AS(cache.hybrid_step(-0.01), std::invalid_argument);
}

TEST_CASE("hybrid_step matches the exponential for random steps") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> h(0.0, 1.0);
    for (const CtModel* m : {&kCase1, &kCase2}) {
        for (const auto& ss : {tf_to_ss(*m), scaled_ss(*m)}) {
            const auto cache = DiscretizationCache::for_steps(ss, 0.01, 1.0);
            double worst = 0.0;
            for (int i = 0; i < 1000; ++i) {
                const double s = h(rng);
                const auto [F, G] = cache.hybrid_step(s);
                const auto [Fe, Ge] = expm_pair(ss, s);
                worst = std::max({worst, max_abs_diff(F, Fe), max_abs_diff(G, Ge)});
            }
            CHECK(worst < 1e-8);
        }
    }
}

TEST_CASE("hybrid_step composes like the exponential") {
    const auto ss = scaled_ss(kCase1);
    const auto cache = DiscretizationCache::for_steps(ss, 0.01, 2.0);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> h(0.0, 1.0), z(-1.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        const double h1 = h(rng), h2 = h(rng);
        const Vector z0 = Vector::NullaryExpr(2, [&] { return z(rng); });
        const auto [F1, G1] = cache.hybrid_step(h1);
        const auto [F2, G2] = cache.hybrid_step(h2);
        const auto [F12, G12] = cache.hybrid_step(h1 + h2);
        const Vector two = F1 * (F2 * z0 + G2) + G1;
        const Vector one = F12 * z0 + G12;
        CHECK((two - one).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("augmented step blocks carry the ramp response") {
    const auto ss = scaled_ss(kCase1);
    const auto cache = DiscretizationCache::for_steps(ss, 0.01, 0.5, 3);
    for (double h : {0.0, 0.013, 0.25, 0.49}) {
        const Matrix exact = augmented_expm(ss, h, 3).topRows(2);
        CHECK(max_abs_diff(cache.step_block(h), exact) < 1e-9);
    }
    // augmented generator: exponential of the generator matches the series definition
    const Matrix A = augmented_generator(ss, 1);
    CHECK(max_abs_diff(augmented_expm(ss, 0.3, 1), (A * 0.3).exp()) < 1e-12);
}

TEST_CASE("filter_signal_delayed step responses") {
    const auto ss = first_order();
    auto d = regular_dataset(0.01, 301, [](double) { return 1.0; });
    const auto cache = DiscretizationCache::for_grid(ss, d.t);
    const Vector y = filter_signal_delayed(ss, d, 0.0, cache);
    CHECK(y(100) == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-3));

    // DC gain after five time constants, with a delay
    const auto c1 = scaled_ss(kCase1);
    auto long_d = regular_dataset(0.05, 400, [](double) { return 1.0; });
    const auto cache1 = DiscretizationCache::for_grid(c1, long_d.t);
    const Vector x = filter_signal_delayed(c1, long_d, 3.0, cache1);
    CHECK(x(399) == doctest::Approx(2.0).epsilon(1e-3));
    CHECK(x(59) == 0.0);  // still before the delayed step

    CHECK_THROWS_AS(filter_signal_delayed(c1, long_d, 25.0, cache1), std::invalid_argument);
    CHECK_THROWS_AS(filter_signal_delayed(c1, long_d, -1.0, cache1), std::invalid_argument);
}

TEST_CASE("filtering is linear") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-1.0, 1.0), h(0.01, 0.09);
    SampledDataset a, b, c;
    double t = 0.0;
    for (int k = 0; k < 500; ++k) {
        const double ua = u(rng), ub = u(rng);
        for (auto* d : {&a, &b, &c}) d->t.push_back(t), d->y.push_back(0.0);
        a.u.push_back(ua);
        b.u.push_back(ub);
        c.u.push_back(2.5 * ua - 0.7 * ub);
        t += h(rng);
    }
    const auto ss = scaled_ss(kCase1);
    const auto cache = DiscretizationCache::for_grid(ss, a.t);
    for (double tau : {0.0, 1.234}) {
        const Vector ya = filter_signal_delayed(ss, a, tau, cache);
        const Vector yb = filter_signal_delayed(ss, b, tau, cache);
        const Vector yc = filter_signal_delayed(ss, c, tau, cache);
        CHECK((yc - (2.5 * ya - 0.7 * yb)).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("integer-sample delay equals a shifted sequence") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double h = 0.05;
    const int q = 7;
    auto d = regular_dataset(h, 300, [&](double) { return u(rng); });
    SampledDataset shifted = d;
    for (std::size_t k = 0; k < d.size(); ++k) shifted.u[k] = k >= q ? d.u[k - q] : 0.0;
    const auto ss = scaled_ss(kCase1);
    const auto cache = DiscretizationCache::for_grid(ss, d.t);
    const Vector a = filter_signal_delayed(ss, d, q * h, cache);
    const Vector b = filter_signal_delayed(ss, shifted, 0.0, cache);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("bounded input gives bounded output") {
    const auto bank = design_bank(2.0, 10.0, 4, 10);
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto d = regular_dataset(0.02, 3000, [&](double) { return u(rng); });
    for (const auto& ss : bank.realizations) {
        const auto cache = DiscretizationCache::for_grid(ss, d.t);
        const Vector y = filter_signal_delayed(ss, d, 0.5, cache);
        CHECK(y.allFinite());
        CHECK(y.cwiseAbs().maxCoeff() <= 10.0);
    }
}

TEST_CASE("irregular-grid simulation against an oversampled exact oracle") {
    ExcitationSpec exc;
    exc.clock_period = 0.5;
    SamplingSpec samp;
    samp.kind = SamplingSpec::Kind::IrregularUniform;
    samp.lo = 0.01;
    samp.hi = 0.09;
    samp.n_samples = 4000;
    samp.seed = 21;
    const auto g = make_dataset(kCase1.with_delay(8.0), exc, samp, std::nullopt, 0);
    const auto sig = prbs(exc, g.data.t.back());

    // exact steps of 0.0005 s; delayed clock edges fall on this grid
    const auto ss = scaled_ss(kCase1);
    const double dt = 0.0005;
    const auto [Fd, Gd] = expm_pair(ss, dt);
    Vector z = Vector::Zero(2);
    double t = 0.0;
    double worst = 0.0, peak = 0.0;
    for (std::size_t k = 0; k < g.data.size(); ++k) {
        const double tk = g.data.t[k];
        while (t + dt <= tk + 1e-12) {
            z = Fd * z + Gd * sig.value_at(t + 0.5 * dt - 8.0);
            t += dt;
        }
        const auto [Fr, Gr] = expm_pair(ss, tk - t);
        const double x = ss.H.dot(Fr * z + Gr * sig.value_at(t + 0.5 * (tk - t) - 8.0));
        worst = std::max(worst, std::abs(x - g.x[k]));
        peak = std::max(peak, std::abs(x));
    }
    CHECK(worst < 1e-6 * peak);
}

TEST_CASE("PiecewiseInput") {
    const PiecewiseInput p({0.0, 1.0, 2.0}, {1.0, -1.0, 0.5}, {0.0, 2.0, 0.0});
    CHECK(p.value_at(-0.1) == 0.0);
    CHECK(p.value_at(0.5) == 1.0);
    CHECK(p.value_at(1.5) == doctest::Approx(0.0));
    CHECK(p.value_at(10.0) == 0.5);
    CHECK(p.scaled(2.0).value_at(1.25) == doctest::Approx(-1.0));
    CHECK(p.plus(p, -1.0).value_at(1.7) == doctest::Approx(0.0));
    CHECK_THROWS_AS(PiecewiseInput({1.0, 0.0}, {1.0, 1.0}, {0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("svf derivatives") {
    SUBCASE("constant signal") {
        std::vector<double> t;
        for (int k = 0; k < 2000; ++k) t.push_back(0.01 * k);
        const PiecewiseInput c({0.0}, {3.0}, {0.0});
        const Matrix r = svf_derivatives(t, c, 2, 2.0, 0.0);
        CHECK(r(0, 1999) == doctest::Approx(3.0 / 4.0).epsilon(1e-3));
        CHECK(std::abs(r(1, 1999)) < 1e-3);
        CHECK(std::abs(r(2, 1999)) < 1e-3);
    }
    SUBCASE("sinusoid against the frequency response") {
        std::vector<double> t, v, s;
        const double h = 0.001;
        for (int k = 0; k < 20001; ++k) t.push_back(h * k), v.push_back(std::sin(h * k));
        for (int k = 0; k < 20001; ++k) s.push_back(k + 1 < 20001 ? (v[k + 1] - v[k]) / h : 0.0);
        const PiecewiseInput sig(t, v, s);
        const Matrix r = svf_derivatives(t, sig, 1, 10.0, 0.0);
        const std::complex<double> gain = std::complex<double>(0.0, 1.0) / std::complex<double>(10.0, 1.0);  // p/(p+10) at 1 rad/s
        double worst = 0.0;
        for (int k = 10000; k < 20001; k += 7) {
            const double expect = std::abs(gain) * std::sin(t[k] + std::arg(gain));
            worst = std::max(worst, std::abs(r(1, k) - expect));
        }
        CHECK(worst < 0.01 * std::abs(gain));
    }
    SUBCASE("rows are derivatives of each other") {
        std::vector<double> t;
        const double h = 0.001;
        for (int k = 0; k < 5000; ++k) t.push_back(h * k);
        const PiecewiseInput step({0.0}, {1.0}, {0.0});
        const Matrix r = svf_derivatives(t, step, 2, 2.0, 0.0);
        for (int i = 1; i <= 2; ++i) {
            double ss = 0.0;
            int count = 0;
            for (int k = 1; k + 1 < 5000; ++k) {
                const double fd = (r(i - 1, k + 1) - r(i - 1, k - 1)) / (2 * h);
                ss += (fd - r(i, k)) * (fd - r(i, k));
                ++count;
            }
            CHECK(std::sqrt(ss / count) < 1e-3);
        }
    }
    CHECK_THROWS_AS(svf_derivatives(std::vector<double>{0.0, 1.0}, PiecewiseInput({0.0}, {1.0}, {0.0}), 0, 1.0, 0.0),
                    std::invalid_argument);
}

TEST_CASE("sample filtering holds") {
    // a ramp sampled on an irregular grid is reproduced exactly by linear and cubic hold
    std::vector<double> t{0.0};
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> h(0.01, 0.05);
    while (t.size() < 400) t.push_back(t.back() + h(rng));
    std::vector<double> v;
    for (double x : t) v.push_back(0.5 * x);
    const auto ss = scaled_ss(CtModel({1.0}, {1.0, 1.0}));
    const auto cache = DiscretizationCache::for_grid(ss, t, 3);
    const GridSteps grid(cache, t);
    const Vector lin = filter_samples(ss, grid, v, Hold::Linear);
    const Vector cub = filter_samples(ss, grid, v, Hold::Cubic);
    // 1/(p+1) of 0.5 t from zero state: 0.5 (t - 1 + e^-t)
    for (std::size_t k = 0; k < t.size(); ++k) {
        const double expect = 0.5 * (t[k] - 1.0 + std::exp(-t[k]));
        CHECK(lin(static_cast<Eigen::Index>(k)) == doctest::Approx(expect).epsilon(1e-9).scale(1.0));
        CHECK(cub(static_cast<Eigen::Index>(k)) == doctest::Approx(expect).epsilon(1e-9).scale(1.0));
    }
    CHECK(!GridSteps(cache, t).regular());
}
