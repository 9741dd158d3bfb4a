#pragma once

// Scenario generators and the Monte Carlo replication harness.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "ccge/estimators.hpp"

namespace ccge {

struct GammaComponent {
    double shape = 20.0;
    double scale = 20.0;
    bool standardize = true;  // centre and scale to unit variance
};

struct XColumn {
    enum class Kind { Binary, Normal };
    Kind kind = Kind::Binary;
    double freq = 0.5;  // Binary
    double mean = 0.0;  // Normal
    double sd = 1.0;    // Normal
};

// X column 0 gets mean alpha * G_j (Normal) instead of its own mean.
struct Dependence {
    int snp = 0;  // zero-based G column
    double alpha = 0.032;
};

struct Scenario {
    std::string name;
    std::vector<double> snp_mafs;
    double corr_base = 0.7;
    std::vector<GammaComponent> g_extra;
    std::vector<XColumn> x_spec;
    VectorXd beta_true;  // default risk form layout
    std::optional<double> alpha0;
    double target_pi1 = 0.03;
    std::optional<Dependence> dependence;

    int q() const { return static_cast<int>(snp_mafs.size() + g_extra.size()); }
    int px() const { return static_cast<int>(x_spec.size()); }
    RiskSpec spec() const { return RiskSpec(q(), px()); }

    void validate() const {
        if (snp_mafs.empty() && g_extra.empty()) throw ScenarioError("scenario '" + name + "' has no G columns");
        if (x_spec.empty()) throw ScenarioError("scenario '" + name + "' has no X columns");
        for (double p : snp_mafs)
            if (!(p > 0.0 && p <= 0.5)) throw ScenarioError("minor allele frequency must lie in (0, 0.5]");
        if (!(std::abs(corr_base) < 1.0)) throw ScenarioError("corr_base must satisfy |corr_base| < 1");
        if (!(target_pi1 > 0.0 && target_pi1 < 1.0)) throw ScenarioError("target_pi1 must lie in (0, 1)");
        for (const auto& g : g_extra)
            if (!(g.shape > 0 && g.scale > 0)) throw ScenarioError("gamma shape and scale must be positive");
        for (const auto& x : x_spec) {
            if (x.kind == XColumn::Kind::Binary && !(x.freq > 0.0 && x.freq < 1.0))
                throw ScenarioError("binary X frequency must lie in (0, 1)");
            if (x.kind == XColumn::Kind::Normal && !(x.sd > 0.0)) throw ScenarioError("normal X sd must be positive");
        }
        if (beta_true.size() != spec().dim_beta())
            throw ScenarioError("beta_true has length " + std::to_string(beta_true.size()) + ", expected " +
                                std::to_string(spec().dim_beta()));
        if (dependence) {
            if (dependence->snp < 0 || dependence->snp >= q()) throw ScenarioError("dependence SNP index out of range");
            if (x_spec[0].kind != XColumn::Kind::Normal)
                throw ScenarioError("dependence requires a normal first X column");
        }
    }
};

// ------------------------------------------------------------------- SNPs

// Gaussian copula trichotomized at HWE thresholds.
class SnpSampler {
public:
    SnpSampler(const std::vector<double>& mafs, double corr_base) : q_(static_cast<Eigen::Index>(mafs.size())) {
        if (!(std::abs(corr_base) < 1.0)) throw ScenarioError("corr_base must satisfy |corr_base| < 1");
        MatrixXd c(q_, q_);
        for (Eigen::Index j = 0; j < q_; ++j)
            for (Eigen::Index k = 0; k < q_; ++k) c(j, k) = std::pow(corr_base, std::abs(static_cast<double>(j - k)));
        Eigen::LLT<MatrixXd> llt(c);
        if (llt.info() != Eigen::Success) throw ScenarioError("SNP correlation matrix is not positive definite");
        chol_ = llt.matrixL();
        const boost::math::normal std_normal;
        for (double p : mafs) {
            if (!(p > 0.0 && p <= 0.5)) throw ScenarioError("minor allele frequency must lie in (0, 0.5]");
            const double p0 = (1 - p) * (1 - p);
            t0_.push_back(boost::math::quantile(std_normal, p0));
            t1_.push_back(boost::math::quantile(std_normal, p0 + 2 * p * (1 - p)));
        }
    }

    Eigen::Index q() const { return q_; }

    template <typename Out>
    void draw(Rng& rng, Out&& out) const {
        VectorXd z(q_);
        for (Eigen::Index j = 0; j < q_; ++j) z[j] = normal_(rng);
        z = chol_ * z;
        for (Eigen::Index j = 0; j < q_; ++j) out[j] = z[j] < t0_[j] ? 0.0 : (z[j] < t1_[j] ? 1.0 : 2.0);
    }

private:
    Eigen::Index q_;
    MatrixXd chol_;
    std::vector<double> t0_, t1_;
    mutable std::normal_distribution<double> normal_{0.0, 1.0};
};

inline MatrixXd gen_snps(Eigen::Index n, const std::vector<double>& mafs, double corr_base, std::uint64_t seed) {
    const SnpSampler s(mafs, corr_base);
    MatrixXd g(n, s.q());
    Rng rng = make_rng(seed, 0);
    VectorXd row(s.q());
    for (Eigen::Index i = 0; i < n; ++i) {
        s.draw(rng, row);
        g.row(i) = row.transpose();
    }
    return g;
}

// ------------------------------------------------------------- population

// Draws (G, X) from the population model of a scenario.
class PopulationSampler {
public:
    explicit PopulationSampler(const Scenario& sc) : sc_(sc), snps_(sc.snp_mafs, sc.corr_base), spec_(sc.spec()) {
        sc.validate();
    }

    const RiskSpec& spec() const { return spec_; }

    void draw(Rng& rng, VectorXd& g, VectorXd& x) const {
        g.resize(sc_.q());
        x.resize(sc_.px());
        if (snps_.q() > 0) snps_.draw(rng, g.head(snps_.q()));
        for (std::size_t e = 0; e < sc_.g_extra.size(); ++e) {
            const auto& c = sc_.g_extra[e];
            std::gamma_distribution<double> gamma(c.shape, c.scale);
            double v = gamma(rng);
            if (c.standardize) v = (v - c.shape * c.scale) / (std::sqrt(c.shape) * c.scale);
            g[snps_.q() + static_cast<Eigen::Index>(e)] = v;
        }
        for (int l = 0; l < sc_.px(); ++l) {
            const auto& xs = sc_.x_spec[l];
            if (xs.kind == XColumn::Kind::Binary) {
                x[l] = unif_(rng) < xs.freq ? 1.0 : 0.0;
            } else {
                double mean = xs.mean;
                if (l == 0 && sc_.dependence) mean = sc_.dependence->alpha * g[sc_.dependence->snp];
                x[l] = mean + xs.sd * normal_(rng);
            }
        }
    }

    double m(const VectorXd& g, const VectorXd& x) const { return build_design(g, x, spec_).dot(sc_.beta_true); }

private:
    const Scenario& sc_;
    SnpSampler snps_;
    RiskSpec spec_;
    mutable std::uniform_real_distribution<double> unif_{0.0, 1.0};
    mutable std::normal_distribution<double> normal_{0.0, 1.0};
};

inline double logistic_cdf(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

inline constexpr std::uint64_t kCalibrationSeed = 0x5eedca1b;

// Population prevalence at a given alpha0, averaged over fixed draws.
inline double population_prevalence(const std::vector<double>& m, double alpha0) {
    double s = 0.0;
    for (double v : m) s += logistic_cdf(alpha0 + v);
    return s / static_cast<double>(m.size());
}

inline std::vector<double> population_m(const Scenario& sc, std::size_t draws, std::uint64_t seed) {
    const PopulationSampler pop(sc);
    Rng rng = make_rng(seed, 1);
    std::vector<double> m(draws);
    VectorXd g, x;
    for (auto& v : m) {
        pop.draw(rng, g, x);
        v = pop.m(g, x);
    }
    return m;
}

// Bisection for the intercept giving the target prevalence on common random
// numbers.
inline double calibrate_alpha0(const Scenario& sc, std::size_t draws = 1000000, std::uint64_t seed = kCalibrationSeed) {
    const auto m = population_m(sc, draws, seed);
    double lo = -30.0, hi = 30.0;
    for (int it = 0; it < 200 && hi - lo > 1e-10; ++it) {
        const double mid = 0.5 * (lo + hi);
        (population_prevalence(m, mid) < sc.target_pi1 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

inline Scenario calibrated(Scenario sc) {
    if (!sc.alpha0) sc.alpha0 = calibrate_alpha0(sc);
    return sc;
}

// ----------------------------------------------------------------- presets

inline std::vector<std::string> preset_names() {
    return {"base", "misspec-0.05", "misspec-0.085", "misspec-0.12", "viol-G1", "viol-G2", "viol-G3", "altdist"};
}

// Presets are returned uncalibrated except for the base intercept.
inline Scenario preset(const std::string& name) {
    const double l12 = std::log(1.2), l13 = std::log(1.3);
    Scenario sc;
    sc.name = name;
    sc.snp_mafs = {0.1, 0.3, 0.3, 0.3, 0.1};
    sc.corr_base = 0.7;
    sc.x_spec = {XColumn{}};
    sc.beta_true.resize(11);
    sc.beta_true << l12, l12, 0, l12, 0, std::log(1.5), l13, 0, 0, l13, 0;
    sc.target_pi1 = 0.03;
    if (name == "base") {
        sc.alpha0 = -4.165;
        return sc;
    }
    if (name.rfind("misspec-", 0) == 0) {
        const std::string rate = name.substr(8);
        if (rate != "0.05" && rate != "0.085" && rate != "0.12") throw ScenarioError("unknown scenario '" + name + "'");
        sc.target_pi1 = std::stod(rate);
        return sc;
    }
    if (name == "viol-G1" || name == "viol-G2" || name == "viol-G3") {
        const double l121 = std::log(1.21);
        sc.x_spec = {XColumn{XColumn::Kind::Normal, 0.5, 0.0, 1.0}};
        sc.beta_true << l12, l12, 0, l12, 0, std::log(1.35), l121, 0, 0, l121, 0;
        sc.dependence = Dependence{name.back() - '1', 0.032};
        return sc;
    }
    if (name == "altdist") {
        sc.snp_mafs = {0.2, 0.3};
        sc.g_extra = {GammaComponent{20.0, 20.0, true}};
        sc.x_spec = {XColumn{}, XColumn{XColumn::Kind::Normal, 0.5, 0.0, 1.0}};
        sc.beta_true = VectorXd::Zero(3 + 2 + 6);
        sc.beta_true.head(5) << l12, 0, std::log(1.38), std::log(1.5), std::log(1.14);
        sc.beta_true[5] = std::log(1.1);
        sc.target_pi1 = 0.05;
        return sc;
    }
    throw ScenarioError("unknown scenario '" + name + "'");
}

// ------------------------------------------------------------ case-control

inline constexpr std::uint64_t kMaxPopulationDraws = 100000000;

struct SamplingStats {
    std::uint64_t draws = 0;      // population draws made
    std::uint64_t raw_cases = 0;  // diseased among them
};

// Rejection sampling from the population until both quotas fill. Cases come
// first in the returned data.
inline CaseControlData gen_case_control(const Scenario& sc, Eigen::Index n0, Eigen::Index n1, std::uint64_t seed,
                                        SamplingStats* stats = nullptr,
                                        std::uint64_t max_draws = kMaxPopulationDraws) {
    if (!sc.alpha0) throw ScenarioError("scenario '" + sc.name + "' is not calibrated");
    if (n0 < 1 || n1 < 1) throw ScenarioError("n0 and n1 must be >= 1");
    const PopulationSampler pop(sc);
    Rng rng = make_rng(seed, 0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const auto q = sc.q(), px = sc.px();
    MatrixXd g(n0 + n1, q), x(n0 + n1, px);
    VectorXi d(n0 + n1);
    Eigen::Index have1 = 0, have0 = 0;
    VectorXd gr, xr;
    SamplingStats local;
    for (; have0 < n0 || have1 < n1; ++local.draws) {
        if (local.draws >= max_draws)
            throw ScenarioError("case/control quotas not reached in " + std::to_string(max_draws) +
                                " population draws (prevalence too extreme)");
        pop.draw(rng, gr, xr);
        const int dd = unif(rng) < logistic_cdf(*sc.alpha0 + pop.m(gr, xr)) ? 1 : 0;
        local.raw_cases += dd;
        Eigen::Index row;
        if (dd == 1) {
            if (have1 >= n1) continue;
            row = have1++;
        } else {
            if (have0 >= n0) continue;
            row = n1 + have0++;
        }
        g.row(row) = gr.transpose();
        x.row(row) = xr.transpose();
        d[row] = dd;
    }
    if (stats) *stats = local;
    return CaseControlData(std::move(d), std::move(g), std::move(x));
}

// ------------------------------------------------------------- replication

struct ParamStat {
    std::string name;
    double truth = 0.0;
    double mean = 0.0;
    double bias = 0.0;
    double coverage = 0.0;  // percent
    double mse = 0.0;
    double mse_eff = 0.0;   // MSE(logistic) / MSE(method)
    double mean_se = 0.0;
    double emp_sd = 0.0;
};

struct MethodSummary {
    Method method;
    std::vector<ParamStat> params;  // beta parameters only
    MatrixXd estimates;             // completed replications x p (all of Omega)
};

struct ReplicationConfig {
    std::vector<Method> methods{Method::Logistic, Method::SpmleX, Method::Symmetric};
    int R = 200;
    Eigen::Index n0 = 500;
    Eigen::Index n1 = 500;
    int B = 200;
    std::uint64_t seed = 0;
    PrevalenceSpec prevalence = PrevalenceSpec::known(0.03);
    unsigned workers = 1;
    LambdaSource lambda_source = LambdaSource::Bootstrap;
};

struct ReplicationReport {
    Scenario scenario;
    ReplicationConfig config;
    int requested = 0;
    int completed = 0;
    std::vector<std::string> failures;
    std::vector<MethodSummary> methods;
    double runtime_seconds = 0.0;  // not part of the deterministic output

    const MethodSummary& get(Method m) const {
        for (const auto& s : methods)
            if (s.method == m) return s;
        throw ConfigError(std::string("method not in report: ") + to_string(m));
    }
};

// Fits every method on R independent datasets. Replication r uses streams
// derive_seed(seed, r, 0) for data and derive_seed(seed, r, 1) for the
// bootstrap.
inline ReplicationReport run_replication(const Scenario& scenario_in, ReplicationConfig cfg) {
    if (cfg.R < 2) throw ConfigError("replication needs R >= 2");
    const auto t0 = std::chrono::steady_clock::now();
    const Scenario sc = calibrated(scenario_in);
    sc.validate();
    if (std::find(cfg.methods.begin(), cfg.methods.end(), Method::Logistic) == cfg.methods.end())
        cfg.methods.insert(cfg.methods.begin(), Method::Logistic);
    const RiskSpec spec = sc.spec();
    const int p = spec.dim_omega();

    std::vector<std::optional<std::vector<FitResult>>> fits(static_cast<std::size_t>(cfg.R));
    std::vector<std::string> why(static_cast<std::size_t>(cfg.R));
    FitOptions opts;
    opts.workers = 1;
    opts.lambda_source = cfg.lambda_source;
    parallel_for(static_cast<std::size_t>(cfg.R), cfg.workers, [&](std::size_t r) {
        try {
            const auto data = gen_case_control(sc, cfg.n0, cfg.n1, derive_seed(cfg.seed, r, 0));
            fits[r] = fit_methods(data, spec, cfg.prevalence, cfg.methods, cfg.B, derive_seed(cfg.seed, r, 1), opts).fits;
        } catch (const ScenarioError&) {
            throw;
        } catch (const Error& e) {
            why[r] = "replication " + std::to_string(r) + ": " + e.what();
        }
    });

    ReplicationReport rep;
    rep.scenario = sc;
    rep.config = cfg;
    rep.requested = cfg.R;
    for (int r = 0; r < cfg.R; ++r) {
        if (fits[r])
            ++rep.completed;
        else
            rep.failures.push_back(why[r]);
    }
    if (rep.requested - rep.completed > 0.05 * cfg.R)
        throw ExcessiveBootstrapFailure(std::to_string(rep.requested - rep.completed) + " of " +
                                            std::to_string(cfg.R) + " replications failed (limit 5%)",
                                        rep.failures);

    const auto names = spec.parameter_names();
    for (std::size_t k = 0; k < cfg.methods.size(); ++k) {
        MethodSummary ms;
        ms.method = cfg.methods[k];
        ms.estimates.resize(rep.completed, p);
        MatrixXd lo(rep.completed, p), hi(rep.completed, p), se(rep.completed, p);
        Eigen::Index row = 0;
        for (const auto& f : fits) {
            if (!f) continue;
            const auto& fr = (*f)[k];
            ms.estimates.row(row) = fr.omega_hat.flat().transpose();
            lo.row(row) = fr.ci_lo.transpose();
            hi.row(row) = fr.ci_hi.transpose();
            se.row(row) = fr.se.transpose();
            ++row;
        }
        for (int j = 1; j < p; ++j) {
            ParamStat s;
            s.name = names[j];
            s.truth = sc.beta_true[j - 1];
            const VectorXd col = ms.estimates.col(j);
            s.mean = col.mean();
            s.bias = s.mean - s.truth;
            s.mse = (col.array() - s.truth).square().mean();
            s.emp_sd = std::sqrt((col.array() - s.mean).square().sum() / std::max(1.0, col.size() - 1.0));
            s.mean_se = se.col(j).mean();
            int covered = 0;
            for (Eigen::Index r = 0; r < rep.completed; ++r) covered += lo(r, j) <= s.truth && s.truth <= hi(r, j);
            s.coverage = 100.0 * covered / static_cast<double>(rep.completed);
            ms.params.push_back(std::move(s));
        }
        rep.methods.push_back(std::move(ms));
    }
    const auto& logit = rep.get(Method::Logistic);
    for (auto& ms : rep.methods)
        for (std::size_t j = 0; j < ms.params.size(); ++j)
            ms.params[j].mse_eff = ms.method == Method::Logistic ? 1.0 : logit.params[j].mse / ms.params[j].mse;
    rep.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

}  // namespace ccge
