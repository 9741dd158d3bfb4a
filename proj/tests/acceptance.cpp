// Acceptance runs. `acceptance --criterion N` prints one PASS/FAIL line per
// check and exits nonzero if any check fails. Tolerances are fixed here.

#include <chrono>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ccge/ccge.hpp"
#include "support.hpp"

using namespace ccge;
using namespace testing_support;

namespace {

constexpr std::uint64_t kSeed = 42;
constexpr int kR = 200;

int failures = 0;

void report(const std::string& id, bool pass, const std::string& what) {
    std::cout << (pass ? "PASS " : "FAIL ") << id << ": " << what << std::endl;
    if (!pass) ++failures;
}

std::string fmt(double v, int prec = 4) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(prec) << v;
    return os.str();
}

std::string sci(double v) {
    std::ostringstream os;
    os << std::scientific << std::setprecision(2) << v;
    return os.str();
}

bool is_interaction(const std::string& name) { return std::count(name.begin(), name.end(), '_') == 2; }

double mean_interaction_eff(const MethodSummary& m) {
    double s = 0;
    int k = 0;
    for (const auto& p : m.params)
        if (is_interaction(p.name)) {
            s += p.mse_eff;
            ++k;
        }
    return s / k;
}

void print_table(const ReplicationReport& rep) {
    std::cout << "completed " << rep.completed << "/" << rep.requested << " replications\n";
    for (const auto& m : rep.methods) {
        std::cout << "  " << to_string(m.method) << "\n";
        for (const auto& p : m.params)
            std::cout << "    " << std::left << std::setw(12) << p.name << std::right << " bias " << std::setw(8)
                      << fmt(p.bias) << "  cov " << std::setw(6) << fmt(p.coverage, 1) << "  mse_eff "
                      << fmt(p.mse_eff, 3) << "\n";
    }
}

ReplicationReport replicate(const std::string& scenario, PrevalenceSpec prev, std::vector<Method> methods, int B) {
    ReplicationConfig cfg;
    cfg.methods = std::move(methods);
    cfg.R = kR;
    cfg.n0 = cfg.n1 = 500;
    cfg.B = B;
    cfg.seed = kSeed;
    cfg.prevalence = prev;
    cfg.workers = default_workers();
    const auto rep = run_replication(preset(scenario), cfg);
    print_table(rep);
    return rep;
}

// Criteria 1 and 2 share the checks; only the prevalence mode differs.
void table_one(const std::string& tag, PrevalenceSpec prev) {
    const auto rep = replicate("base", prev, {Method::Logistic, Method::SpmleX, Method::Symmetric}, 200);
    report(tag + "(0)", rep.completed == rep.requested, "all replications completed (" + std::to_string(rep.completed) + ")");

    double worst_bias = 0, lo_cov = 100, hi_cov = 0;
    std::string wb, wl, wh;
    for (const auto& m : rep.methods)
        for (const auto& p : m.params) {
            const std::string where = std::string(to_string(m.method)) + " " + p.name;
            if (std::abs(p.bias) > worst_bias) worst_bias = std::abs(p.bias), wb = where;
            if (p.coverage < lo_cov) lo_cov = p.coverage, wl = where;
            if (p.coverage > hi_cov) hi_cov = p.coverage, wh = where;
        }
    report(tag + "(a)", worst_bias <= 0.06, "max |bias| " + fmt(worst_bias) + " (" + wb + ") <= 0.06");
    report(tag + "(b)", lo_cov >= 91.0 && hi_cov <= 98.5,
           "coverage range [" + fmt(lo_cov, 1) + " (" + wl + "), " + fmt(hi_cov, 1) + " (" + wh + ")] within [91, 98.5]");

    const auto& sym = rep.get(Method::Symmetric);
    double min_eff = 1e300;
    std::string wm;
    for (const auto& p : sym.params)
        if (is_interaction(p.name) && p.mse_eff < min_eff) min_eff = p.mse_eff, wm = p.name;
    const double sym_mean = mean_interaction_eff(sym), x_mean = mean_interaction_eff(rep.get(Method::SpmleX));
    report(tag + "(c)", min_eff >= 1.8 && sym_mean >= 2.2,
           "symmetric interaction MSE efficiency min " + fmt(min_eff, 3) + " (" + wm + ") >= 1.8, mean " +
               fmt(sym_mean, 3) + " >= 2.2");
    report(tag + "(d)", sym_mean > x_mean,
           "mean interaction efficiency symmetric " + fmt(sym_mean, 3) + " > spmle_x " + fmt(x_mean, 3));
}

void misspecified() {
    const auto rep = replicate("misspec-0.085", PrevalenceSpec::known(0.03),
                               {Method::Logistic, Method::SpmleX, Method::Symmetric}, 200);
    report("3(0)", rep.completed == rep.requested, "all replications completed (" + std::to_string(rep.completed) + ")");
    double lo = 100;
    std::string where;
    for (const auto& m : rep.methods)
        for (const auto& p : m.params)
            if (p.coverage < lo) lo = p.coverage, where = std::string(to_string(m.method)) + " " + p.name;
    report("3", lo >= 89.0, "minimum coverage " + fmt(lo, 1) + " (" + where + ") >= 89");
}

void violation() {
    const auto rep = replicate("viol-G2", PrevalenceSpec::known(0.03), {Method::Symmetric}, 100);
    report("4(0)", rep.completed == rep.requested, "all replications completed (" + std::to_string(rep.completed) + ")");
    const auto& sym = rep.get(Method::Symmetric);
    double target = 0, other = 0;
    std::string wo;
    for (const auto& p : sym.params) {
        if (!is_interaction(p.name)) continue;
        if (p.name == "beta_x1_g2") target = std::abs(p.bias);
        else if (std::abs(p.bias) > other) other = std::abs(p.bias), wo = p.name;
    }
    report("4(a)", target >= 0.03, "symmetric |bias(beta_x1_g2)| " + fmt(target) + " >= 0.03");
    report("4(b)", other <= 0.03, "max |bias| of other interactions " + fmt(other) + " (" + wo + ") <= 0.03");
}

PrevalenceSpec prev_of(double pi1) { return pi1 < 0 ? PrevalenceSpec::rare() : PrevalenceSpec::known(pi1); }

void properties() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(2024);

    {
        double worst = 0;
        for (bool cont : {false, true}) {
            const auto data = testing_support::random_data(rng, 80, 60, 3, 1, cont);
            for (double pi1 : {0.03, -1.0}) {
                const LikelihoodContext ctx(data, RiskSpec(3, 1), prev_of(pi1));
                for (int rep = 0; rep < 10; ++rep) {
                    const VectorXd w = random_omega(rng, ctx.p());
                    for (auto axis : {ProfileAxis::ProfileX, ProfileAxis::ProfileG}) {
                        const VectorXd s = score(axis, OmegaVector::from_flat(w), ctx);
                        const VectorXd fd = central_gradient(
                            [&](const VectorXd& v) { return profile_loglik(axis, OmegaVector::from_flat(v), ctx); }, w) /
                                            std::sqrt(ctx.n());
                        worst = std::max(worst, rel_err(fd, s));
                    }
                }
            }
        }
        report("5(score)", worst < 1e-5, "analytic score vs finite differences, max rel err " + sci(worst) + " < 1e-5");
    }

    {
        double worst = 0;
        for (int rep = 0; rep < 50; ++rep) {
            const auto data = testing_support::random_data(rng, 40 + rep, 25 + rep % 7, 1 + rep % 3, 1 + rep % 2, rep % 5 == 4);
            const double pi1 = rep % 2 ? 0.05 : -1.0;
            const LikelihoodContext ctx(data, RiskSpec(data.q(), data.px()), prev_of(pi1));
            const VectorXd w = random_omega(rng, ctx.p());
            const auto om = OmegaVector::from_flat(w);
            for (int i = 0; i < 3; ++i) {
                const VectorXd x = data.x().row(i * 7).transpose();
                const VectorXd g = data.g().row(i * 5).transpose();
                const double nx = naive_r_hat_x(data, x, w, pi1), ng = naive_r_hat_g(data, g, w, pi1);
                worst = std::max(worst, std::abs(r_hat(ProfileAxis::ProfileX, x, om, ctx).value - nx) / nx);
                worst = std::max(worst, std::abs(r_hat(ProfileAxis::ProfileG, g, om, ctx).value - ng) / ng);
            }
        }
        report("5(r_hat)", worst <= 1e-12, "r_hat vs naive triple sum on 50 datasets, max rel err " + sci(worst) + " <= 1e-12");
    }

    {
        // exact R_X over a discrete support with X independent of G
        const double f[3] = {0.49, 0.42, 0.09}, fx = 0.4;
        const double alpha0 = -2.0, bg = 0.5, bx = 0.3, bgx = 0.4;
        auto risk = [&](int g, int x) { return 1.0 / (1.0 + std::exp(-(alpha0 + bg * g + bx * x + bgx * g * x))); };
        std::vector<double> wts[2];
        double pi1 = 0.0;
        for (int g = 0; g < 3; ++g)
            for (int x = 0; x < 2; ++x) {
                const double p = f[g] * (x ? fx : 1 - fx);
                wts[0].push_back(p * (1 - risk(g, x)));
                wts[1].push_back(p * risk(g, x));
                pi1 += p * risk(g, x);
            }
        const int n0 = 40, n1 = 40;
        const double kappa = kappa_from_alpha(alpha0, n1, n0, pi1);
        VectorXd beta(3);
        beta << bg, bx, bgx;
        double exact = 0.0;
        for (int g = 0; g < 3; ++g)
            for (int r = 0; r < 2; ++r) exact += f[g] * direct_s(r, kappa, bg * g + bx + bgx * g, n0, n1, pi1);
        std::discrete_distribution<int> draw[2] = {std::discrete_distribution<int>(wts[0].begin(), wts[0].end()),
                                                   std::discrete_distribution<int>(wts[1].begin(), wts[1].end())};
        const int reps = 2000;
        std::vector<double> vals;
        VectorXd pt = VectorXd::Ones(1);
        while (static_cast<int>(vals.size()) < reps) {
            VectorXi d(n0 + n1);
            MatrixXd g(n0 + n1, 1), x(n0 + n1, 1);
            for (int i = 0; i < n0 + n1; ++i) {
                d[i] = i < n1;
                const int k = draw[d[i]](rng);
                g(i, 0) = k / 2;
                x(i, 0) = k % 2;
            }
            try {
                const LikelihoodContext ctx(CaseControlData(d, g, x), RiskSpec(1, 1), PrevalenceSpec::known(pi1));
                vals.push_back(r_hat(ProfileAxis::ProfileX, pt, OmegaVector{kappa, beta}, ctx).value);
            } catch (const DataError&) {
            }
        }
        const double mean = std::accumulate(vals.begin(), vals.end(), 0.0) / reps;
        double ss = 0.0;
        for (double v : vals) ss += (v - mean) * (v - mean);
        const double se = std::sqrt(ss / (reps - 1) / reps);
        report("5(unbiased)", std::abs(mean - exact) < 3 * se,
               "Monte Carlo mean of r_hat " + fmt(mean, 5) + " vs exact " + fmt(exact, 5) + ", |diff| < 3 SE = " + fmt(3 * se, 5));
    }

    {
        const auto wx = OmegaVector::from_flat(random_omega(rng, 4)), wg = OmegaVector::from_flat(random_omega(rng, 4));
        const auto r = gls_combine(wx, wg, MatrixXd::Identity(8, 8));
        const double e1 = (r.omega.flat() - 0.5 * (wx.flat() + wg.flat())).lpNorm<Eigen::Infinity>();
        MatrixXd lam = MatrixXd::Identity(8, 8);
        lam.topLeftCorner(4, 4) *= 4.0;
        const auto r2 = gls_combine(wx, wg, lam);
        const double e2 = (r2.omega.flat() - (0.2 * wx.flat() + 0.8 * wg.flat())).lpNorm<Eigen::Infinity>();
        report("5(gls)", e1 < 1e-15 && e2 < 1e-15, "GLS identity averaging and inverse-variance weighting exact");
    }

    {
        std::normal_distribution<double> z;
        const int p = 4;
        int bad = 0;
        for (int rep = 0; rep < 500; ++rep) {
            MatrixXd a(2 * p, 2 * p + rep % 7);
            for (auto& v : a.reshaped()) v = z(rng);
            const MatrixXd lam = a * a.transpose();
            const auto r = gls_combine(OmegaVector::from_flat(VectorXd::Zero(p)), OmegaVector::from_flat(VectorXd::Zero(p)), lam);
            for (int j = 0; j < p; ++j)
                bad += r.cov(j, j) > lam(j, j) + 1e-10 || r.cov(j, j) > lam(p + j, p + j) + 1e-10;
        }
        report("5(dominance)", bad == 0, "GLS variance dominance over 500 random PSD matrices, violations " + std::to_string(bad));
    }

    {
        const auto data = testing_support::random_data(rng, 47, 31, 2, 1);
        const auto res = balanced_resample(tabulate(data), 200, 99, 1, [](const CellTable& t, int) {
            VectorXd v(2);
            v << t.n0, t.n1;
            return v;
        });
        const bool ok = res.replicates.rows() == 200 && (res.replicates.col(0).array() == 47.0).all() &&
                        (res.replicates.col(1).array() == 31.0).all();
        report("5(strata)", ok, "every bootstrap replicate keeps n0 = 47 and n1 = 31");
    }

    {
        const auto data = base_data(15);
        double worst = 0;
        for (auto axis : {ProfileAxis::ProfileX, ProfileAxis::ProfileG}) {
            const auto known = fit_spmle(axis, data, RiskSpec(5, 1), PrevalenceSpec::known(1e-3));
            const auto rare = fit_spmle(axis, data, RiskSpec(5, 1), PrevalenceSpec::rare());
            worst = std::max(worst, (known.omega_hat.flat() - rare.omega_hat.flat()).lpNorm<Eigen::Infinity>());
        }
        report("5(rare)", worst <= 0.02, "known(1e-3) vs rare estimates, max |diff| " + fmt(worst) + " <= 0.02");
    }

    {
        ReplicationConfig cfg;
        cfg.R = 4;
        cfg.n0 = cfg.n1 = 200;
        cfg.B = 20;
        cfg.seed = 7;
        const auto a = to_json(run_replication(preset("base"), cfg)).dump();
        const auto b = to_json(run_replication(preset("base"), cfg)).dump();
        report("5(determinism)", a == b, "two identical replicate runs are byte-identical");
    }

    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report("5(time)", secs < 300, "property suite took " + fmt(secs, 1) + " s < 300 s");
}

}  // namespace

int main(int argc, char** argv) {
    int criterion = 0;
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--criterion") criterion = std::atoi(argv[i + 1]);
    if (criterion < 1 || criterion > 5) {
        std::cerr << "usage: acceptance --criterion N (1-5)\n";
        return 2;
    }
    try {
        switch (criterion) {
            case 1: table_one("1", PrevalenceSpec::known(0.03)); break;
            case 2: table_one("2", PrevalenceSpec::rare()); break;
            case 3: misspecified(); break;
            case 4: violation(); break;
            case 5: properties(); break;
        }
    } catch (const std::exception& e) {
        report(std::to_string(criterion), false, std::string("aborted: ") + e.what());
    }
    return failures == 0 ? 0 : 1;
}
