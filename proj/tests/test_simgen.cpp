#include <catch_amalgamated.hpp>

#include "ccge/ccge.hpp"
#include "support.hpp"

using namespace ccge;
using namespace testing_support;

TEST_CASE("SNP marginals follow Hardy-Weinberg proportions", "[simgen]") {
    const int n = 1000000;
    const double p = 0.3;
    const MatrixXd g = gen_snps(n, {0.1, p, 0.3}, 0.7, 1);
    const double expect[3] = {(1 - p) * (1 - p), 2 * p * (1 - p), p * p};
    for (int code = 0; code < 3; ++code) {
        const double freq = (g.col(1).array() == code).cast<double>().mean();
        const double se = std::sqrt(expect[code] * (1 - expect[code]) / n);
        CHECK(std::abs(freq - expect[code]) < 3 * se);
    }
}

TEST_CASE("uncorrelated copula gives uncorrelated SNPs", "[simgen]") {
    const int n = 1000000;
    const MatrixXd g = gen_snps(n, {0.3, 0.3}, 0.0, 2);
    const ArrayXd a = g.col(0).array() - g.col(0).mean(), b = g.col(1).array() - g.col(1).mean();
    const double r = (a * b).sum() / std::sqrt(a.square().sum() * b.square().sum());
    CHECK(std::abs(r) < 0.01);
}

TEST_CASE("a common allele gives symmetric homozygote frequencies", "[simgen]") {
    const int n = 1000000;
    const MatrixXd g = gen_snps(n, {0.5}, 0.7, 3);
    const double f0 = (g.col(0).array() == 0).cast<double>().mean();
    const double f2 = (g.col(0).array() == 2).cast<double>().mean();
    CHECK(std::abs(f0 - f2) < 3 * std::sqrt((f0 + f2) / n));
}

TEST_CASE("adjacent SNPs are positively correlated under the default structure", "[simgen]") {
    const MatrixXd g = gen_snps(200000, {0.3, 0.3, 0.3}, 0.7, 4);
    const ArrayXd a = g.col(0).array() - g.col(0).mean(), b = g.col(1).array() - g.col(1).mean();
    CHECK((a * b).mean() > 0.2);
}

TEST_CASE("a null model at intercept zero samples half cases", "[simgen]") {
    Scenario sc = preset("base");
    sc.beta_true.setZero();
    sc.alpha0 = 0.0;
    SamplingStats st;
    gen_case_control(sc, 20000, 20000, 5, &st);
    const double prev = static_cast<double>(st.raw_cases) / st.draws;
    CHECK(std::abs(prev - 0.5) < 3 * std::sqrt(0.25 / st.draws));
}

TEST_CASE("the base intercept yields a three percent disease rate", "[simgen]") {
    SamplingStats st;
    const auto data = gen_case_control(preset("base"), 10, 30000, 6, &st);
    CHECK(data.n1() == 30000);
    CHECK(st.draws > 900000);
    const double prev = static_cast<double>(st.raw_cases) / st.draws;
    CHECK(std::abs(prev - 0.03) < 3 * std::sqrt(0.03 * 0.97 / st.draws));
}

TEST_CASE("calibrated intercepts reproduce the target prevalence on fresh draws", "[simgen]") {
    for (const std::string name : {"misspec-0.12", "viol-G2", "altdist"}) {
        const Scenario sc = calibrated(preset(name));
        const auto m = population_m(sc, 1000000, 777);
        CHECK(std::abs(population_prevalence(m, *sc.alpha0) - sc.target_pi1) < 1e-3);
    }
    const auto m = population_m(preset("base"), 1000000, 778);
    CHECK(std::abs(population_prevalence(m, -4.165) - 0.03) < 1e-3);
}

TEST_CASE("population draws show no SNP-exposure association", "[simgen]") {
    const Scenario sc = preset("base");
    const PopulationSampler pop(sc);
    std::vector<double> pvals;
    VectorXd g, x;
    for (int rep = 0; rep < 200; ++rep) {
        Rng rng = make_rng(9, rep);
        MatrixXd table = MatrixXd::Zero(3, 2);
        for (int i = 0; i < 2000; ++i) {
            pop.draw(rng, g, x);
            table(static_cast<int>(g[rep % 5]), static_cast<int>(x[0])) += 1;
        }
        pvals.push_back(chi_square_pvalue(table));
    }
    CHECK(ks_uniform_pvalue(pvals) > 0.01);
}

TEST_CASE("the violation scenario shifts X by alpha times the chosen SNP", "[simgen]") {
    const Scenario sc = preset("viol-G2");
    REQUIRE(sc.dependence);
    CHECK(sc.dependence->snp == 1);
    const PopulationSampler pop(sc);
    Rng rng = make_rng(10, 0);
    const int n = 1000000;
    VectorXd g, x;
    double sg = 0, sx = 0, sgg = 0, sgx = 0;
    for (int i = 0; i < n; ++i) {
        pop.draw(rng, g, x);
        sg += g[1];
        sx += x[0];
        sgg += g[1] * g[1];
        sgx += g[1] * x[0];
    }
    const double vg = sgg / n - (sg / n) * (sg / n);
    const double slope = (sgx / n - sg / n * sx / n) / vg;
    CHECK(std::abs(slope - 0.032) < 3 / std::sqrt(n * vg));
}

TEST_CASE("preset registry", "[simgen]") {
    for (const auto& name : preset_names()) {
        const Scenario sc = preset(name);
        CHECK_NOTHROW(sc.validate());
        CHECK(sc.beta_true.size() == sc.spec().dim_beta());
    }
    CHECK(preset("base").alpha0 == -4.165);
    CHECK(preset("misspec-0.085").target_pi1 == 0.085);
    CHECK(preset("altdist").q() == 3);
    CHECK(preset("altdist").px() == 2);
    CHECK(preset("altdist").target_pi1 == 0.05);
    CHECK_THROWS_AS(preset("nope"), ScenarioError);
}

TEST_CASE("standardized gamma component has mean zero and unit variance", "[simgen]") {
    const Scenario sc = preset("altdist");
    const PopulationSampler pop(sc);
    Rng rng = make_rng(11, 0);
    const int n = 200000;
    double s = 0, ss = 0;
    VectorXd g, x;
    for (int i = 0; i < n; ++i) {
        pop.draw(rng, g, x);
        s += g[2];
        ss += g[2] * g[2];
    }
    CHECK(std::abs(s / n) < 0.01);
    CHECK(std::abs(ss / n - 1.0) < 0.02);
}

TEST_CASE("case-control sampling fills quotas deterministically", "[simgen]") {
    const auto a = gen_case_control(preset("base"), 123, 77, 12);
    const auto b = gen_case_control(preset("base"), 123, 77, 12);
    CHECK(a.n0() == 123);
    CHECK(a.n1() == 77);
    CHECK(a.g() == b.g());
    CHECK(a.x() == b.x());
    CHECK(a.d() == b.d());
    Scenario uncal = preset("misspec-0.05");
    CHECK_THROWS_AS(gen_case_control(uncal, 10, 10, 1), ScenarioError);
}

TEST_CASE("unreachable quotas raise ScenarioError", "[simgen]") {
    Scenario sc = preset("base");
    sc.alpha0 = -40.0;
    CHECK_THROWS_AS(gen_case_control(sc, 10, 10, 1, nullptr, 100000), ScenarioError);
}

TEST_CASE("replication reports are deterministic and worker independent", "[simgen]") {
    ReplicationConfig cfg;
    cfg.methods = {Method::Logistic, Method::SpmleX, Method::Symmetric};
    cfg.R = 6;
    cfg.n0 = cfg.n1 = 200;
    cfg.B = 20;
    cfg.seed = 13;
    const auto a = run_replication(preset("base"), cfg);
    cfg.workers = 3;
    const auto b = run_replication(preset("base"), cfg);
    CHECK(to_json(a).dump() == to_json(b).dump());
    CHECK(a.completed == 6);
    for (const auto& p : a.get(Method::Logistic).params) CHECK(p.mse_eff == 1.0);
    for (const auto& m : a.methods) CHECK(m.params.size() == 11);
    cfg.R = 1;
    CHECK_THROWS_AS(run_replication(preset("base"), cfg), ConfigError);
}

TEST_CASE("replication always carries logistic for efficiencies", "[simgen]") {
    ReplicationConfig cfg;
    cfg.methods = {Method::SpmleX};
    cfg.R = 3;
    cfg.n0 = cfg.n1 = 150;
    cfg.seed = 14;
    const auto rep = run_replication(preset("base"), cfg);
    CHECK(rep.methods.size() == 2);
    const auto& lg = rep.get(Method::Logistic);
    const auto& sx = rep.get(Method::SpmleX);
    for (std::size_t j = 0; j < sx.params.size(); ++j)
        CHECK(sx.params[j].mse_eff == lg.params[j].mse / sx.params[j].mse);
}
