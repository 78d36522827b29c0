#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ctdelay/polynomial.hpp"
#include "ctdelay/srivc.hpp"
#include "fixtures.hpp"

using namespace ctdelay;

TEST_CASE("least-squares start") {
    const auto g = fixture::case1_regular(std::nullopt);
    const EstimationContext ctx(g.data, 2, 0, 1.0, 15.0);
    const ParamVector th = ls_init(ctx, 8.0);
    const FilterChannel id(ctx);
    CHECK(normalized_fit(id, th, 8.0) < 5.0);

    const auto f = fixture::regular(CtModel({1.0}, {1.0, 1.0}), 0.05, 2000, std::nullopt);
    const ParamVector p = ls_init(f.data, 0.0, 1, 0, 1.0);
    CHECK(p.theta()(0) == doctest::Approx(1.0).epsilon(1e-2));
    CHECK(p.theta()(1) == doctest::Approx(1.0).epsilon(1e-2));

    SampledDataset zero = g.data;
    std::fill(zero.u.begin(), zero.u.end(), 0.0);
    std::fill(zero.y.begin(), zero.y.end(), 0.0);
    zero.u_clock_edges.reset();
    CHECK_THROWS_AS(ls_init(zero, 8.0, 2, 0, 1.0), std::runtime_error);
}

TEST_CASE("IV iteration") {
    const auto g = fixture::case1_regular(std::nullopt);
    const EstimationContext ctx(g.data, 2, 0, 1.0, 15.0);
    const FilterChannel id(ctx);
    const auto d = id.delayed(8.0);
    const auto truth = ParamVector::from_model(fixture::case1());
    const ParamVector again = srivc_iterate(id, d, truth);
    CHECK(again.relative_change(truth) < 1e-6);

    Vector unstable(3);
    unstable << -1.0, 4.0, 8.0;  // roots with positive real part
    const ParamVector out = srivc_iterate(id, d, ParamVector(2, 0, unstable));
    CHECK(out.theta().allFinite());

    const ParamVector st = stabilized(ParamVector(2, 0, unstable));
    for (auto r : poly_roots(st.denominator())) CHECK(r.real() < 1e-9);
}

TEST_CASE("SRIVC on noise-free data") {
    SUBCASE("Case 1") {
        const auto g = fixture::case1_regular(std::nullopt);
        const auto r = srivc_estimate(g.data, 8.0, 2, 0, 1.0, nullptr, 1e-3, 50);
        CHECK(fixture::max_rel_error(r.theta, fixture::case1()) < 1e-3);
        CHECK(r.iterations <= 50);
        CHECK(r.converged);
        CHECK(r.last_change < 1e-3);
        for (auto root : poly_roots(r.theta.denominator())) CHECK(root.real() < 1e-9);
    }
    SUBCASE("Case 2") {
        const auto g = fixture::regular(fixture::case2(), 0.01, 8000, std::nullopt);
        const auto r = srivc_estimate(g.data, 8.0, 4, 1, 25.0);
        CHECK(fixture::max_rel_error(r.theta, fixture::case2()) < 1e-2);
    }
    SUBCASE("orders 1 to 4") {
        const std::vector<CtModel> systems{
            CtModel({1.0}, {1.0, 1.0}, 1.5),
            CtModel({2.0}, {0.25, 0.7, 1.0}, 2.0),
            CtModel({2.0, 3.0}, {1.0, 6.0, 11.0, 6.0}, 0.7),
            CtModel({1.0, 4.0}, poly_mul(std::vector<double>{1.0, 2.0, 1.0}, std::vector<double>{1.0, 1.0, 4.0}), 3.0),
        };
        for (const auto& sys : systems) {
            const double h = std::min(0.05, 2.0 * std::numbers::pi / bandwidth(sys) / 50.0);
            const auto g = fixture::regular(sys, h, 4000, std::nullopt);
            const double w = std::max(1.0, bandwidth(sys));
            const auto r = srivc_estimate(g.data, sys.delay(), sys.order(), sys.num_order(), w);
            CHECK(fixture::max_rel_error(r.theta, sys) < 1e-3);
        }
    }
}

TEST_CASE("prefiltered SRIVC keeps the noise-free solution") {
    const auto g = fixture::case1_regular(std::nullopt);
    const auto cfg = fixture::case1_config();
    for (std::size_t k : {std::size_t{0}, std::size_t{4}, std::size_t{9}}) {
        const auto r = srivc_estimate(g.data, 8.0, 2, 0, 1.0, &cfg.bank.realizations[k]);
        CHECK(fixture::max_rel_error(r.theta, fixture::case1()) < 1e-3);
    }
}

TEST_CASE("SRIVC at 15 dB") {
    // median over 20 noise realizations of the per-coefficient relative error
    std::vector<std::vector<double>> errs(3);
    const auto truth = ParamVector::from_model(fixture::case1()).theta();
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto g = fixture::case1_regular(15.0, seed);
        const EstimationContext ctx(g.data, 2, 0, 1.0, 15.0);
        const FilterChannel id(ctx);
        const auto r = srivc_estimate(id, 8.0, ls_init(ctx, 8.0), 0.0, 5);
        for (int i = 0; i < 3; ++i) errs[i].push_back(std::abs(r.theta.theta()(i) - truth(i)) / std::abs(truth(i)));
    }
    for (auto& e : errs) {
        std::nth_element(e.begin(), e.begin() + 10, e.end());
        CHECK(e[10] < 0.05);
    }
}

TEST_CASE("context validation") {
    const auto g = fixture::case1_regular(std::nullopt);
    CHECK_THROWS_AS(EstimationContext(g.data, 2, 2, 1.0, 15.0), std::invalid_argument);
    CHECK_THROWS_AS(EstimationContext(g.data, 2, 0, 0.0, 15.0), std::invalid_argument);
    CHECK_THROWS_AS(EstimationContext(g.data, 2, 0, 1.0, 1000.0), std::invalid_argument);
    const EstimationContext ctx(g.data, 2, 0, 1.0, 15.0);
    CHECK(ctx.skip() == 500);  // t < 15 + 10 s at 50 ms
}
