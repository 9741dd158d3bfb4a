#pragma once

// Estimators: prospective logistic regression, the SPMLE on either profile
// axis, the composite likelihood estimator, and the symmetric combination
// (GLS of the two SPMLEs), with sandwich and balanced-bootstrap covariances.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ccge/cells.hpp"
#include "ccge/logistic.hpp"
#include "ccge/model.hpp"
#include "ccge/optim.hpp"
#include "ccge/parallel.hpp"
#include "ccge/retrolik.hpp"

namespace ccge {

enum class Method { Logistic, SpmleX, SpmleG, Composite, Symmetric };

inline const char* to_string(Method m) {
    switch (m) {
        case Method::Logistic: return "logistic";
        case Method::SpmleX: return "spmle_x";
        case Method::SpmleG: return "spmle_g";
        case Method::Composite: return "composite";
        case Method::Symmetric: return "symmetric";
    }
    return "?";
}

inline Method parse_method(const std::string& s) {
    for (Method m : {Method::Logistic, Method::SpmleX, Method::SpmleG, Method::Composite, Method::Symmetric})
        if (s == to_string(m)) return m;
    throw ConfigError("unknown method '" + s + "' (expected logistic, spmle_x, spmle_g, composite or symmetric)");
}

enum class CovSource { Asymptotic, Bootstrap };

inline const char* to_string(CovSource s) { return s == CovSource::Asymptotic ? "asymptotic" : "bootstrap"; }

// Where the GLS weight matrix Lambda_all comes from.
enum class LambdaSource { Bootstrap, Asymptotic };

inline constexpr double kWaldZ = 1.959964;

struct FitResult {
    Method method = Method::Logistic;
    OmegaVector omega_hat;
    MatrixXd cov;
    CovSource cov_source = CovSource::Asymptotic;
    VectorXd se;
    VectorXd ci_lo;
    VectorXd ci_hi;
    bool converged = false;
    int iterations = 0;
    double final_score_norm = 0.0;
    PrevalenceSpec prevalence = PrevalenceSpec::rare();
    std::optional<int> bootstrap_B;
    int bootstrap_dropped = 0;
    bool ridge_applied = false;
    bool percentile_ci = false;
};

struct FitOptions {
    unsigned workers = 1;
    LambdaSource lambda_source = LambdaSource::Bootstrap;
    bool percentile_ci = false;
    SolverOptions solver{};
};

namespace detail {

inline void set_wald(FitResult& r) {
    r.se = r.cov.diagonal().cwiseMax(0.0).cwiseSqrt();
    const VectorXd w = r.omega_hat.flat();
    r.ci_lo = w - kWaldZ * r.se;
    r.ci_hi = w + kWaldZ * r.se;
}

inline MatrixXd sample_cov(const MatrixXd& reps) {
    const Eigen::RowVectorXd mean = reps.colwise().mean();
    const MatrixXd c = reps.rowwise() - mean;
    MatrixXd s = c.transpose() * c / std::max<double>(1.0, static_cast<double>(reps.rows()) - 1.0);
    return 0.5 * (s + s.transpose());
}

// Linear-interpolation sample quantile.
inline double quantile(std::vector<double> v, double prob) {
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline void set_percentile(FitResult& r, const MatrixXd& reps) {
    r.percentile_ci = true;
    for (Eigen::Index j = 0; j < reps.cols(); ++j) {
        std::vector<double> col(reps.col(j).data(), reps.col(j).data() + reps.rows());
        r.ci_lo[j] = quantile(col, 0.025);
        r.ci_hi[j] = quantile(col, 0.975);
    }
}

}  // namespace detail

// ---------------------------------------------------------------- logistic

inline FitResult logistic_result(const LogisticEstimate& est, const PrevalenceSpec& prev) {
    FitResult r;
    r.method = Method::Logistic;
    r.omega_hat = OmegaVector::from_flat(est.coef);
    r.cov = est.cov;
    r.cov_source = CovSource::Asymptotic;
    r.converged = est.converged;
    r.iterations = est.iterations;
    r.final_score_norm = est.score_norm;
    r.prevalence = prev;
    detail::set_wald(r);
    return r;
}

// The intercept is reported as kappa; prevalence plays no role in the fit
// and is only echoed in the result.
inline FitResult fit_logistic(const CaseControlData& data, const RiskSpec& spec,
                              const PrevalenceSpec& prev = PrevalenceSpec::rare()) {
    const auto est = logistic_regression(tabulate(data).table, spec);
    if (!est.converged)
        throw NonConvergence("logistic regression did not converge",
                             std::vector<double>(est.coef.data(), est.coef.data() + est.coef.size()), est.score_norm);
    return logistic_result(est, prev);
}

// ------------------------------------------------------------------- SPMLE

inline ObjectiveFn objective_fn(Objective obj, const LikelihoodContext& ctx) {
    return [obj, &ctx](const VectorXd& w) {
        auto ev = evaluate(obj, w, ctx);
        return ObjectiveValue{ev.loglik, std::move(ev.grad)};
    };
}

inline SolverResult solve_estimating_equation(Objective obj, const LikelihoodContext& ctx, const VectorXd& start,
                                              const std::optional<MatrixXd>& hessian0 = std::nullopt,
                                              SolverOptions opt = {}) {
    opt.grad_scale = std::sqrt(ctx.n());
    auto res = maximize(objective_fn(obj, ctx), start, opt, hessian0);
    if (!res.converged)
        throw NonConvergence("estimating equation not solved after " + std::to_string(res.iterations) +
                                 " iterations (score norm " + std::to_string(res.score_norm) + ")",
                             std::vector<double>(res.x.data(), res.x.data() + res.x.size()), res.score_norm);
    return res;
}

// Plug-in pieces of the sandwich: Gamma-hat (p x p) and the stratum-centred
// influence terms zeta* per cell.
struct SandwichParts {
    MatrixXd gamma;
    MatrixXd zeta_centered;
    VectorXd counts;
};

inline SandwichParts sandwich_parts(ProfileAxis axis, const VectorXd& omega_hat, const LikelihoodContext& ctx,
                                    const std::optional<MatrixXd>& hessian = std::nullopt) {
    SandwichParts s;
    const MatrixXd h = hessian ? *hessian : fd_hessian(objective_fn(objective_for(axis), ctx), omega_hat);
    s.gamma = h / ctx.n();
    s.zeta_centered = zeta(axis, omega_hat, ctx);
    const auto& cells = ctx.table().cells;
    s.counts.resize(static_cast<Eigen::Index>(cells.size()));
    VectorXd mean[2] = {VectorXd::Zero(ctx.p()), VectorXd::Zero(ctx.p())};
    for (std::size_t c = 0; c < cells.size(); ++c) {
        s.counts[c] = cells[c].count;
        mean[cells[c].d] += cells[c].count * s.zeta_centered.row(c).transpose();
    }
    mean[0] /= ctx.n0();
    mean[1] /= ctx.n1();
    for (std::size_t c = 0; c < cells.size(); ++c) s.zeta_centered.row(c) -= mean[cells[c].d].transpose();
    return s;
}

namespace detail {

inline Eigen::PartialPivLU<MatrixXd> checked_lu(const MatrixXd& gamma) {
    Eigen::JacobiSVD<MatrixXd> svd(gamma);
    const auto& sv = svd.singularValues();
    const double cond = sv[0] / sv[sv.size() - 1];
    if (!(cond < 1e14))
        throw CovarianceError("Gamma-hat is singular (condition number " + std::to_string(cond) + ")");
    return Eigen::PartialPivLU<MatrixXd>(gamma);
}

// Gamma^{-1} Sigma Gamma^{-T} / n
inline MatrixXd sandwich(const MatrixXd& gamma, const MatrixXd& sigma, double n) {
    const auto lu = checked_lu(gamma);
    const MatrixXd left = lu.solve(sigma);
    MatrixXd cov = lu.solve(left.transpose()) / n;
    return 0.5 * (cov + cov.transpose());
}

}  // namespace detail

// Sigma-hat = sum_d (n_d/n) cov(zeta | D = d); returns Gamma^-1 Sigma Gamma^-T / n.
inline MatrixXd sandwich_cov_spmle(ProfileAxis axis, const OmegaVector& omega_hat, const LikelihoodContext& ctx,
                                   const std::optional<MatrixXd>& hessian = std::nullopt) {
    const auto s = sandwich_parts(axis, omega_hat.flat(), ctx, hessian);
    const MatrixXd weighted = s.zeta_centered.array().colwise() * s.counts.array();
    const MatrixXd sigma = weighted.transpose() * s.zeta_centered / ctx.n();
    return detail::sandwich(s.gamma, sigma, ctx.n());
}

// Lambda_all = Gamma_all^-1 Sigma_all Gamma_all^-T / n for the stacked
// (Omega_X, Omega_G) estimate, from the cross-covariance of the zetas.
inline MatrixXd asymptotic_lambda_all(const VectorXd& omega_x, const VectorXd& omega_g, const LikelihoodContext& ctx,
                                      const std::optional<MatrixXd>& hx = std::nullopt,
                                      const std::optional<MatrixXd>& hg = std::nullopt) {
    const auto sx = sandwich_parts(ProfileAxis::ProfileX, omega_x, ctx, hx);
    const auto sg = sandwich_parts(ProfileAxis::ProfileG, omega_g, ctx, hg);
    const auto p = ctx.p();
    MatrixXd z(sx.zeta_centered.rows(), 2 * p);
    z << sx.zeta_centered, sg.zeta_centered;
    const MatrixXd weighted = z.array().colwise() * sx.counts.array();
    const MatrixXd sigma = weighted.transpose() * z / ctx.n();
    MatrixXd gamma = MatrixXd::Zero(2 * p, 2 * p);
    gamma.topLeftCorner(p, p) = sx.gamma;
    gamma.bottomRightCorner(p, p) = sg.gamma;
    return detail::sandwich(gamma, sigma, ctx.n());
}

inline VectorXd logistic_start(const LikelihoodContext& ctx) {
    const auto est = logistic_regression(ctx.table(), ctx.spec());
    return est.coef;
}

inline FitResult spmle_result(ProfileAxis axis, const SolverResult& sol, const LikelihoodContext& ctx,
                              const MatrixXd& hessian) {
    FitResult r;
    r.method = axis == ProfileAxis::ProfileX ? Method::SpmleX : Method::SpmleG;
    r.omega_hat = OmegaVector::from_flat(sol.x);
    r.cov = sandwich_cov_spmle(axis, r.omega_hat, ctx, hessian);
    r.cov_source = CovSource::Asymptotic;
    r.converged = sol.converged;
    r.iterations = sol.iterations;
    r.final_score_norm = sol.score_norm;
    r.prevalence = ctx.prevalence();
    detail::set_wald(r);
    return r;
}

inline FitResult fit_spmle(ProfileAxis axis, const CaseControlData& data, const RiskSpec& spec,
                           const PrevalenceSpec& prev, const std::optional<OmegaVector>& start = std::nullopt,
                           const FitOptions& opts = {}) {
    const LikelihoodContext ctx(data, spec, prev);
    const VectorXd w0 = start ? start->flat() : logistic_start(ctx);
    const auto sol = solve_estimating_equation(objective_for(axis), ctx, w0, std::nullopt, opts.solver);
    const MatrixXd h = fd_hessian(objective_fn(objective_for(axis), ctx), sol.x);
    return spmle_result(axis, sol, ctx, h);
}

// ----------------------------------------------------------------- bootstrap

// Per-cell counts for one balanced resample: n1 draws with replacement from
// the cases and n0 from the controls.
inline std::vector<double> resample_counts(const Tabulation& tab, Rng& rng) {
    std::vector<double> counts(tab.table.cells.size(), 0.0);
    for (const auto* stratum : {&tab.controls, &tab.cases}) {
        std::uniform_int_distribution<std::size_t> pick(0, stratum->size() - 1);
        for (std::size_t k = 0; k < stratum->size(); ++k) counts[tab.subject_cell[(*stratum)[pick(rng)]]] += 1.0;
    }
    return counts;
}

struct ResampleOutcome {
    MatrixXd replicates;               // successful replicates, in replicate order
    std::vector<int> replicate_index;  // original index of each row
    int requested = 0;
    int dropped = 0;
    std::vector<std::string> failures;
};

// Applies `estimator(table, b) -> VectorXd` to B balanced resamples. Replicate
// b draws from the stream derive_seed(seed, b). A replicate whose estimator
// throws ccge::Error is dropped; more than 5% drops is an error.
template <typename Estimator>
ResampleOutcome balanced_resample(const Tabulation& tab, int B, std::uint64_t seed, unsigned workers,
                                  Estimator&& estimator) {
    if (B < 2) throw ConfigError("bootstrap needs B >= 2");
    std::vector<std::optional<VectorXd>> out(static_cast<std::size_t>(B));
    std::vector<std::string> why(static_cast<std::size_t>(B));
    parallel_for(static_cast<std::size_t>(B), workers, [&](std::size_t b) {
        Rng rng = make_rng(seed, b);
        const auto counts = resample_counts(tab, rng);
        try {
            out[b] = estimator(tab.table.reweighted(counts), static_cast<int>(b));
        } catch (const Error& e) {
            why[b] = "replicate " + std::to_string(b) + ": " + e.what();
        }
    });
    ResampleOutcome res;
    res.requested = B;
    Eigen::Index k = -1;
    for (int b = 0; b < B; ++b) {
        if (out[b]) {
            if (k < 0) k = out[b]->size();
            res.replicate_index.push_back(b);
        } else {
            ++res.dropped;
            res.failures.push_back(why[b]);
        }
    }
    if (res.dropped > 0.05 * B)
        throw ExcessiveBootstrapFailure(std::to_string(res.dropped) + " of " + std::to_string(B) +
                                            " bootstrap replicates failed (limit 5%)",
                                        res.failures);
    res.replicates.resize(static_cast<Eigen::Index>(res.replicate_index.size()), std::max<Eigen::Index>(k, 0));
    for (std::size_t r = 0; r < res.replicate_index.size(); ++r)
        res.replicates.row(static_cast<Eigen::Index>(r)) = out[res.replicate_index[r]]->transpose();
    return res;
}

struct BootstrapResult {
    std::vector<Method> targets;
    MatrixXd replicates;  // rows: replicates; columns: p per target, in target order
    MatrixXd cov;         // sample covariance of the columns
    int requested = 0;
    int dropped = 0;
    std::vector<std::string> failures;

    Eigen::Index p() const { return targets.empty() ? 0 : replicates.cols() / static_cast<Eigen::Index>(targets.size()); }

    MatrixXd block(Method m) const {
        for (std::size_t t = 0; t < targets.size(); ++t)
            if (targets[t] == m) return replicates.middleCols(static_cast<Eigen::Index>(t) * p(), p());
        throw ConfigError(std::string("bootstrap has no replicates for ") + to_string(m));
    }
};

inline Objective objective_for(Method m) {
    switch (m) {
        case Method::SpmleX: return Objective::ProfileX;
        case Method::SpmleG: return Objective::ProfileG;
        case Method::Composite: return Objective::Composite;
        default: throw ConfigError(std::string("no retrospective objective for ") + to_string(m));
    }
}

// Full-data solution for one bootstrap target, used as the replicate start.
struct TargetStart {
    Method method;
    VectorXd omega;
    MatrixXd hessian;
};

// Every target is refitted on the same resample, so cross-covariances
// between targets are captured.
inline BootstrapResult bootstrap_targets(const Tabulation& tab, const RiskSpec& spec, const PrevalenceSpec& prev,
                                         int B, std::uint64_t seed, const std::vector<TargetStart>& starts,
                                         const FitOptions& opts = {}) {
    auto est = [&](const CellTable& table, int) {
        const LikelihoodContext ctx(table, spec, prev);
        VectorXd out(static_cast<Eigen::Index>(starts.size()) * ctx.p());
        for (std::size_t t = 0; t < starts.size(); ++t) {
            const auto sol = solve_estimating_equation(objective_for(starts[t].method), ctx, starts[t].omega,
                                                       starts[t].hessian, opts.solver);
            out.segment(static_cast<Eigen::Index>(t) * ctx.p(), ctx.p()) = sol.x;
        }
        return out;
    };
    auto res = balanced_resample(tab, B, seed, opts.workers, est);
    BootstrapResult br;
    for (const auto& s : starts) br.targets.push_back(s.method);
    br.replicates = std::move(res.replicates);
    br.cov = detail::sample_cov(br.replicates);
    br.requested = res.requested;
    br.dropped = res.dropped;
    br.failures = std::move(res.failures);
    return br;
}

inline TargetStart full_data_start(Method m, const LikelihoodContext& ctx, const VectorXd& start,
                                   const FitOptions& opts = {}) {
    const auto obj = objective_for(m);
    const auto sol = solve_estimating_equation(obj, ctx, start, std::nullopt, opts.solver);
    return {m, sol.x, fd_hessian(objective_fn(obj, ctx), sol.x)};
}

inline BootstrapResult balanced_bootstrap(const CaseControlData& data, const RiskSpec& spec,
                                          const PrevalenceSpec& prev, int B, std::uint64_t seed,
                                          const std::vector<Method>& targets, const FitOptions& opts = {}) {
    if (targets.empty()) throw ConfigError("bootstrap needs at least one target");
    const auto tab = tabulate(data);
    const LikelihoodContext ctx(tab.table, spec, prev);
    const VectorXd w0 = logistic_start(ctx);
    std::vector<TargetStart> starts;
    for (Method m : targets) {
        if (m != Method::SpmleX && m != Method::SpmleG && m != Method::Composite)
            throw ConfigError(std::string("bootstrap target must be spmle_x, spmle_g or composite, got ") + to_string(m));
        starts.push_back(full_data_start(m, ctx, w0, opts));
    }
    return bootstrap_targets(tab, spec, prev, B, seed, starts, opts);
}

// ---------------------------------------------------------------------- GLS

struct GlsResult {
    OmegaVector omega;
    MatrixXd cov;      // (X^T Lambda^-1 X)^-1
    MatrixXd weights;  // p x 2p: omega_symm = weights * (omega_x; omega_g)
    bool ridge_applied = false;
};

// Generalized least squares with design (I_p, I_p)^T. Solved by symmetric
// factorization; a ridge is added when Lambda is numerically singular.
inline GlsResult gls_combine(const OmegaVector& omega_x, const OmegaVector& omega_g, const MatrixXd& lambda_all) {
    const auto p = omega_x.size();
    if (omega_g.size() != p) throw DimensionError("omega_g", p, omega_g.size());
    if (lambda_all.rows() != 2 * p || lambda_all.cols() != 2 * p)
        throw DimensionError("lambda_all", 2 * p, lambda_all.rows());
    if (!lambda_all.isApprox(lambda_all.transpose(), 1e-10) &&
        (lambda_all - lambda_all.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, lambda_all.cwiseAbs().maxCoeff()))
        throw CovarianceError("lambda_all is not symmetric");

    MatrixXd lambda = 0.5 * (lambda_all + lambda_all.transpose());
    const double trace = lambda.trace();
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(lambda, Eigen::EigenvaluesOnly);
    const auto& ev = eig.eigenvalues();
    if (ev.minCoeff() < -1e-10 * std::abs(trace))
        throw CovarianceError("lambda_all is not positive semidefinite (min eigenvalue " +
                              std::to_string(ev.minCoeff()) + ")");
    GlsResult res;
    const double cond = ev.maxCoeff() / std::max(ev.minCoeff(), 0.0);
    if (!(cond <= 1e12)) {
        lambda.diagonal().array() += 1e-8 * trace / static_cast<double>(2 * p);
        res.ridge_applied = true;
    }
    MatrixXd design(2 * p, p);
    design << MatrixXd::Identity(p, p), MatrixXd::Identity(p, p);
    Eigen::LDLT<MatrixXd> ldlt(lambda);
    const MatrixXd linv_x = ldlt.solve(design);     // Lambda^-1 X
    const MatrixXd info = design.transpose() * linv_x;  // X^T Lambda^-1 X
    Eigen::LDLT<MatrixXd> info_ldlt(0.5 * (info + info.transpose()));
    res.weights = info_ldlt.solve(linv_x.transpose());
    VectorXd y(2 * p);
    y << omega_x.flat(), omega_g.flat();
    res.omega = OmegaVector::from_flat(res.weights * y);
    res.cov = info_ldlt.solve(MatrixXd::Identity(p, p));
    res.cov = 0.5 * (res.cov + res.cov.transpose());
    return res;
}

// --------------------------------------------------------------- orchestration

struct SymmetricFit {
    FitResult symmetric;
    FitResult spmle_x;
    FitResult spmle_g;
    MatrixXd lambda_all;
    GlsResult gls;
    BootstrapResult bootstrap;
};

// Fits every requested method on one dataset. All bootstrap-based methods
// share one set of balanced resamples.
struct MultiFit {
    std::vector<FitResult> fits;  // in the order requested
    std::optional<SymmetricFit> symmetric;
    std::optional<BootstrapResult> bootstrap;

    const FitResult& get(Method m) const {
        for (const auto& f : fits)
            if (f.method == m) return f;
        throw ConfigError(std::string("method not fitted: ") + to_string(m));
    }
};

inline MultiFit fit_methods(const CaseControlData& data, const RiskSpec& spec, const PrevalenceSpec& prev,
                            const std::vector<Method>& methods, int B, std::uint64_t seed,
                            const FitOptions& opts = {}) {
    auto wants = [&](Method m) { return std::find(methods.begin(), methods.end(), m) != methods.end(); };
    const auto tab = tabulate(data);
    const LikelihoodContext ctx(tab.table, spec, prev);
    const auto logit = logistic_regression(tab.table, spec);
    if (!logit.converged)
        throw NonConvergence("logistic regression did not converge",
                             std::vector<double>(logit.coef.data(), logit.coef.data() + logit.coef.size()),
                             logit.score_norm);

    const bool symm = wants(Method::Symmetric);
    const bool need_x = symm || wants(Method::SpmleX);
    const bool need_g = symm || wants(Method::SpmleG);
    std::optional<TargetStart> sx, sg, sc;
    if (need_x) sx = full_data_start(Method::SpmleX, ctx, logit.coef, opts);
    if (need_g) sg = full_data_start(Method::SpmleG, ctx, logit.coef, opts);
    if (wants(Method::Composite)) sc = full_data_start(Method::Composite, ctx, logit.coef, opts);

    auto spmle_fit = [&](ProfileAxis axis, const TargetStart& s) {
        SolverResult sol;
        sol.x = s.omega;
        sol.converged = true;
        auto ev = evaluate(objective_for(axis), s.omega, ctx);
        sol.score_norm = ev.grad.lpNorm<Eigen::Infinity>() / std::sqrt(ctx.n());
        return spmle_result(axis, sol, ctx, s.hessian);
    };
    std::optional<FitResult> fx, fg;
    if (sx) fx = spmle_fit(ProfileAxis::ProfileX, *sx);
    if (sg) fg = spmle_fit(ProfileAxis::ProfileG, *sg);

    MultiFit out;
    std::vector<TargetStart> starts;
    if (symm) {
        starts.push_back(*sx);
        starts.push_back(*sg);
    }
    if (sc) starts.push_back(*sc);
    if (!starts.empty()) out.bootstrap = bootstrap_targets(tab, spec, prev, B, seed, starts, opts);

    const auto p = ctx.p();
    if (symm) {
        SymmetricFit sf;
        sf.spmle_x = *fx;
        sf.spmle_g = *fg;
        const MatrixXd rx = out.bootstrap->block(Method::SpmleX);
        const MatrixXd rg = out.bootstrap->block(Method::SpmleG);
        MatrixXd stacked(rx.rows(), 2 * p);
        stacked << rx, rg;
        sf.lambda_all = opts.lambda_source == LambdaSource::Bootstrap
                            ? detail::sample_cov(stacked)
                            : asymptotic_lambda_all(sx->omega, sg->omega, ctx, sx->hessian, sg->hessian);
        sf.gls = gls_combine(fx->omega_hat, fg->omega_hat, sf.lambda_all);
        const MatrixXd combos = stacked * sf.gls.weights.transpose();
        FitResult& r = sf.symmetric;
        r.method = Method::Symmetric;
        r.omega_hat = sf.gls.omega;
        r.cov = detail::sample_cov(combos);
        r.cov_source = CovSource::Bootstrap;
        r.converged = fx->converged && fg->converged;
        r.iterations = std::max(fx->iterations, fg->iterations);
        r.final_score_norm = std::max(fx->final_score_norm, fg->final_score_norm);
        r.prevalence = prev;
        r.bootstrap_B = B;
        r.bootstrap_dropped = out.bootstrap->dropped;
        r.ridge_applied = sf.gls.ridge_applied;
        detail::set_wald(r);
        if (opts.percentile_ci) detail::set_percentile(r, combos);
        sf.bootstrap = *out.bootstrap;
        out.symmetric = std::move(sf);
    }

    for (Method m : methods) {
        switch (m) {
            case Method::Logistic: out.fits.push_back(logistic_result(logit, prev)); break;
            case Method::SpmleX: out.fits.push_back(*fx); break;
            case Method::SpmleG: out.fits.push_back(*fg); break;
            case Method::Symmetric: out.fits.push_back(out.symmetric->symmetric); break;
            case Method::Composite: {
                FitResult r;
                r.method = Method::Composite;
                r.omega_hat = OmegaVector::from_flat(sc->omega);
                const MatrixXd reps = out.bootstrap->block(Method::Composite);
                r.cov = detail::sample_cov(reps);
                r.cov_source = CovSource::Bootstrap;
                r.converged = true;
                r.final_score_norm =
                    evaluate(Objective::Composite, sc->omega, ctx).grad.lpNorm<Eigen::Infinity>() / std::sqrt(ctx.n());
                r.prevalence = prev;
                r.bootstrap_B = B;
                r.bootstrap_dropped = out.bootstrap->dropped;
                detail::set_wald(r);
                if (opts.percentile_ci) detail::set_percentile(r, reps);
                out.fits.push_back(std::move(r));
                break;
            }
        }
    }
    return out;
}

inline SymmetricFit fit_symmetric(const CaseControlData& data, const RiskSpec& spec, const PrevalenceSpec& prev,
                                  int B = 200, std::uint64_t seed = 0, const FitOptions& opts = {}) {
    return *fit_methods(data, spec, prev, {Method::Symmetric}, B, seed, opts).symmetric;
}

inline FitResult fit_composite(const CaseControlData& data, const RiskSpec& spec, const PrevalenceSpec& prev,
                               int B = 200, std::uint64_t seed = 0, const FitOptions& opts = {}) {
    return fit_methods(data, spec, prev, {Method::Composite}, B, seed, opts).get(Method::Composite);
}

}  // namespace ccge
