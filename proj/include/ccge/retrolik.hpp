#pragma once

// Retrospective likelihood kernels: the S factor, the plug-in estimates of
// R_X and R_G, the estimated profile loglikelihoods and their scores.
//
// Everything is evaluated on the pair grid (unique G row i, unique X row j),
// so one evaluation costs O(u_g * u_x) rather than O(n^2).

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <tuple>
#include <string>
#include <vector>

#include "ccge/cells.hpp"
#include "ccge/model.hpp"

namespace ccge {

enum class ProfileAxis { ProfileX, ProfileG };

inline const char* to_string(ProfileAxis a) { return a == ProfileAxis::ProfileX ? "profile_x" : "profile_g"; }

namespace detail {

// log(1 + e^z) without overflow
inline double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

inline double sigmoid(double z) {
    const double t = std::exp(-std::abs(z));
    return z >= 0 ? 1.0 / (1.0 + t) : t / (1.0 + t);
}

inline void softplus_sigmoid(const ArrayXXd& z, ArrayXXd& sp, ArrayXXd& sig) {
    const ArrayXXd t = (-z.abs()).exp();
    sp = z.max(0.0) + t.log1p();
    sig = (z >= 0.0).select((1.0 + t).inverse(), t / (1.0 + t));
}

}  // namespace detail

class LikelihoodContext {
public:
    LikelihoodContext(CellTable table, RiskSpec spec, PrevalenceSpec prevalence)
        : table_(std::move(table)), spec_(std::move(spec)), prevalence_(prevalence) {
        if (table_.g_unique.cols() != spec_.q()) throw DimensionError("g columns", spec_.q(), table_.g_unique.cols());
        if (table_.x_unique.cols() != spec_.px()) throw DimensionError("x columns", spec_.px(), table_.x_unique.cols());
        if (table_.n0 <= 0 || table_.n1 <= 0) throw DataError("need at least one case and one control");
        build_terms();
        build_counts();
    }

    LikelihoodContext(const CaseControlData& data, RiskSpec spec, PrevalenceSpec prevalence)
        : LikelihoodContext(tabulate(data).table, std::move(spec), prevalence) {}

    const CellTable& table() const noexcept { return table_; }
    const RiskSpec& spec() const noexcept { return spec_; }
    const PrevalenceSpec& prevalence() const noexcept { return prevalence_; }
    int p() const noexcept { return spec_.dim_omega(); }
    double n() const noexcept { return table_.n(); }
    double n0() const noexcept { return table_.n0; }
    double n1() const noexcept { return table_.n1; }

    // log(n1/n0) - log(pi1/pi0); NaN under the rare approximation.
    double offset() const noexcept { return offset_; }

    // pi_d / n_d; under the rare approximation (1/n0, 0).
    double stratum_weight(int d) const noexcept { return d == 1 ? w1_ : w0_; }

    const ArrayXd& g_weight() const noexcept { return a_; }  // sum_d (pi_d/n_d) n_d(g_i)
    const ArrayXd& x_weight() const noexcept { return b_; }  // sum_d (pi_d/n_d) n_d(x_j)
    const ArrayXd& g_count() const noexcept { return ng_; }
    const ArrayXd& x_count() const noexcept { return nx_; }
    double g_count(int d, Eigen::Index i) const noexcept { return ngd_[d][i]; }
    double x_count(int d, Eigen::Index j) const noexcept { return nxd_[d][j]; }

    const MatrixXd& g_factors() const noexcept { return phi_; }  // u_g x T, G part of each term
    const MatrixXd& x_factors() const noexcept { return chi_; }  // u_x x T, X part of each term

    // Covariate vector (1, design) for the pair (g_i, x_j).
    VectorXd pair_design(Eigen::Index i, Eigen::Index j) const {
        VectorXd v(p());
        v[0] = 1.0;
        v.tail(p() - 1) = (phi_.row(i).array() * chi_.row(j).array()).matrix().transpose();
        return v;
    }

    // E = kappa + m on the pair grid.
    ArrayXXd linear_predictor(const VectorXd& omega) const {
        check_omega(omega);
        MatrixXd a = MatrixXd::Zero(table_.ug(), xmono_.cols());
        a.col(0).setConstant(omega[0]);
        for (int t = 0; t < spec_.dim_beta(); ++t) a.col(group_[t]) += omega[t + 1] * phi_.col(t);
        return (a * xmono_.transpose()).array();
    }

    // sum_ij W_ij (1, design_ij)
    VectorXd total_grad(const ArrayXXd& w) const {
        VectorXd out(p());
        out[0] = w.sum();
        const MatrixXd wc = w.matrix() * xmono_;
        for (int t = 0; t < spec_.dim_beta(); ++t) out[t + 1] = phi_.col(t).dot(wc.col(group_[t]));
        return out;
    }

    // row i: sum_j W_ij (1, design_ij)
    MatrixXd rowwise_grad(const ArrayXXd& w) const {
        MatrixXd out(table_.ug(), p());
        out.col(0) = w.rowwise().sum().matrix();
        const MatrixXd wc = w.matrix() * xmono_;
        for (int t = 0; t < spec_.dim_beta(); ++t) out.col(t + 1) = phi_.col(t).cwiseProduct(wc.col(group_[t]));
        return out;
    }

    // row j: sum_i W_ij (1, design_ij)
    MatrixXd colwise_grad(const ArrayXXd& w) const {
        MatrixXd out(table_.ux(), p());
        out.col(0) = w.colwise().sum().matrix().transpose();
        const MatrixXd wphi = w.matrix().transpose() * phi_;
        for (int t = 0; t < spec_.dim_beta(); ++t) out.col(t + 1) = chi_.col(t).cwiseProduct(wphi.col(t));
        return out;
    }

    void check_omega(const VectorXd& omega) const {
        if (omega.size() != p()) throw DimensionError("omega", p(), omega.size());
    }

private:
    void build_terms() {
        const auto& terms = spec_.terms();
        const int nt = spec_.dim_beta();
        phi_.resize(table_.ug(), nt);
        chi_.resize(table_.ux(), nt);
        for (int t = 0; t < nt; ++t) {
            for (Eigen::Index i = 0; i < table_.ug(); ++i) {
                double v = 1.0;
                for (int k : terms[t].g_cols) v *= table_.g_unique(i, k);
                phi_(i, t) = v;
            }
            for (Eigen::Index j = 0; j < table_.ux(); ++j) {
                double v = 1.0;
                for (int l : terms[t].x_cols) v *= table_.x_unique(j, l);
                chi_(j, t) = v;
            }
        }
        // Group terms by their X monomial so E = A * C^T has inner dimension
        // (#distinct X monomials + 1) instead of T.
        std::map<std::vector<int>, int> groups{{{}, 0}};
        group_.resize(nt);
        std::vector<int> rep{-1};
        for (int t = 0; t < nt; ++t) {
            auto key = terms[t].x_cols;
            std::sort(key.begin(), key.end());
            auto [it, inserted] = groups.emplace(key, static_cast<int>(rep.size()));
            if (inserted) rep.push_back(t);
            group_[t] = it->second;
        }
        xmono_.resize(table_.ux(), static_cast<Eigen::Index>(rep.size()));
        xmono_.col(0).setOnes();
        for (std::size_t k = 1; k < rep.size(); ++k) xmono_.col(k) = chi_.col(rep[k]);
    }

    void build_counts() {
        for (int d = 0; d < 2; ++d) {
            ngd_[d] = ArrayXd::Zero(table_.ug());
            nxd_[d] = ArrayXd::Zero(table_.ux());
        }
        for (const auto& c : table_.cells) {
            ngd_[c.d][c.gi] += c.count;
            nxd_[c.d][c.xi] += c.count;
        }
        ng_ = ngd_[0] + ngd_[1];
        nx_ = nxd_[0] + nxd_[1];
        if (prevalence_.is_rare()) {
            offset_ = std::numeric_limits<double>::quiet_NaN();
            w0_ = 1.0 / table_.n0;
            w1_ = 0.0;
        } else {
            const double pi1 = prevalence_.pi1();
            offset_ = std::log(table_.n1 / table_.n0) - std::log(pi1 / (1.0 - pi1));
            w0_ = (1.0 - pi1) / table_.n0;
            w1_ = pi1 / table_.n1;
        }
        a_ = w0_ * ngd_[0] + w1_ * ngd_[1];
        b_ = w0_ * nxd_[0] + w1_ * nxd_[1];
    }

    CellTable table_;
    RiskSpec spec_;
    PrevalenceSpec prevalence_;
    double offset_ = 0.0;
    double w0_ = 0.0;
    double w1_ = 0.0;
    MatrixXd phi_;
    MatrixXd chi_;
    MatrixXd xmono_;
    std::vector<int> group_;
    ArrayXd ngd_[2];
    ArrayXd nxd_[2];
    ArrayXd ng_;
    ArrayXd nx_;
    ArrayXd a_;
    ArrayXd b_;
};

// Pair-grid quantities shared by both profile axes at one Omega.
struct Kernel {
    ArrayXXd e;           // kappa + m
    ArrayXXd log_t;       // log T, T = S(0) + S(1)
    ArrayXXd dlog_t;      // d log T / d E
    ArrayXXd w_subject;   // sum over cells of count * d log S / d E
    double subject_loglik = 0.0;
    std::vector<double> cell_dlog_s;
};

inline Kernel compute_kernel(const VectorXd& omega, const LikelihoodContext& ctx) {
    Kernel k;
    k.e = ctx.linear_predictor(omega);
    ArrayXXd sp_e, sig_e;
    detail::softplus_sigmoid(k.e, sp_e, sig_e);
    const bool rare = ctx.prevalence().is_rare();
    ArrayXXd sp_z, sig_z;
    if (rare) {
        k.log_t = sp_e;
        k.dlog_t = sig_e;
    } else {
        detail::softplus_sigmoid(k.e - ctx.offset(), sp_z, sig_z);
        k.log_t = sp_e - sp_z;
        k.dlog_t = sig_e - sig_z;
    }
    k.w_subject = ArrayXXd::Zero(k.e.rows(), k.e.cols());
    const auto& cells = ctx.table().cells;
    k.cell_dlog_s.resize(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const auto& cell = cells[c];
        const double e = k.e(cell.gi, cell.xi);
        double log_s = cell.d * e;
        double dlog_s = cell.d;
        if (!rare) {
            log_s -= sp_z(cell.gi, cell.xi);
            dlog_s -= sig_z(cell.gi, cell.xi);
        }
        if (!std::isfinite(log_s)) throw NumericError("non-finite log S", cell.first_subject);
        k.subject_loglik += cell.count * log_s;
        k.w_subject(cell.gi, cell.xi) += cell.count * dlog_s;
        k.cell_dlog_s[c] = dlog_s;
    }
    return k;
}

// Normalized plug-in weights for one axis. For ProfileX, column j holds
// a_i T_ij / Rhat_X(x_j); for ProfileG, row i holds b_j T_ij / Rhat_G(g_i).
struct AxisPart {
    ProfileAxis axis;
    ArrayXd log_r;   // log Rhat at each unique profiled row
    ArrayXXd prob;   // normalized weights, u_g x u_x
    double loglik = 0.0;  // - sum_i log Rhat(profiled_i)
};

inline AxisPart compute_axis(ProfileAxis axis, const Kernel& k, const LikelihoodContext& ctx) {
    AxisPart part;
    part.axis = axis;
    if (axis == ProfileAxis::ProfileX) {
        const ArrayXd la = ctx.g_weight().log();
        ArrayXXd lw = k.log_t.colwise() + la;
        const Eigen::RowVectorXd mx = lw.colwise().maxCoeff().matrix();
        part.prob = (lw.rowwise() - mx.array()).exp();
        const Eigen::RowVectorXd s = part.prob.colwise().sum().matrix();
        part.prob.rowwise() /= s.array();
        part.log_r = (mx.array() + s.array().log()).transpose();
        part.loglik = -(ctx.x_count() * part.log_r).sum();
    } else {
        const Eigen::RowVectorXd lb = ctx.x_weight().log().matrix().transpose();
        ArrayXXd lw = k.log_t.rowwise() + lb.array();
        const ArrayXd mx = lw.rowwise().maxCoeff();
        part.prob = (lw.colwise() - mx).exp();
        const ArrayXd s = part.prob.rowwise().sum();
        part.prob.colwise() /= s;
        part.log_r = mx + s.log();
        part.loglik = -(ctx.g_count() * part.log_r).sum();
    }
    if (!std::isfinite(part.loglik)) throw NumericError(std::string("non-finite log Rhat on ") + to_string(axis));
    return part;
}

// Weight matrix whose total_grad is the gradient of part.loglik.
inline ArrayXXd axis_weights(const AxisPart& part, const Kernel& k, const LikelihoodContext& ctx) {
    ArrayXXd w = part.prob * k.dlog_t;
    if (part.axis == ProfileAxis::ProfileX)
        w.rowwise() *= -ctx.x_count().transpose();
    else
        w.colwise() *= -ctx.g_count();
    return w;
}

enum class Objective { ProfileX, ProfileG, Composite };

inline Objective objective_for(ProfileAxis a) {
    return a == ProfileAxis::ProfileX ? Objective::ProfileX : Objective::ProfileG;
}

// Unnormalized loglikelihood and its gradient (sum over subjects).
struct Evaluation {
    double loglik = 0.0;
    VectorXd grad;
};

inline Evaluation evaluate(Objective obj, const VectorXd& omega, const LikelihoodContext& ctx, bool with_grad = true) {
    const Kernel k = compute_kernel(omega, ctx);
    Evaluation ev;
    auto one_axis = [&](ProfileAxis axis, double& ll, VectorXd& g) {
        const AxisPart part = compute_axis(axis, k, ctx);
        ll = k.subject_loglik + part.loglik;
        if (with_grad) g = ctx.total_grad(k.w_subject + axis_weights(part, k, ctx));
    };
    if (obj == Objective::Composite) {
        double lx = 0, lg = 0;
        VectorXd gx, gg;
        one_axis(ProfileAxis::ProfileX, lx, gx);
        one_axis(ProfileAxis::ProfileG, lg, gg);
        ev.loglik = (lx + lg) * 0.5;
        if (with_grad) ev.grad = (gx + gg) * 0.5;
    } else {
        one_axis(obj == Objective::ProfileX ? ProfileAxis::ProfileX : ProfileAxis::ProfileG, ev.loglik, ev.grad);
    }
    return ev;
}

struct ValueGrad {
    double value;
    VectorXd grad;
};

// S(d, g, x, Omega) = exp{d(kappa + m)} / [1 + exp{kappa - offset + m}]; the
// denominator term vanishes under the rare approximation.
inline ValueGrad s_factor(int d, const RowRef& g_row, const RowRef& x_row, const OmegaVector& omega,
                          const LikelihoodContext& ctx) {
    if (d != 0 && d != 1) throw DomainError("d must be 0 or 1");
    if (omega.size() != ctx.p()) throw DimensionError("omega", ctx.p(), omega.size());
    const auto m = evaluate_m(g_row, x_row, omega.beta, ctx.spec());
    if (!std::isfinite(m.value)) throw NumericError("non-finite m");
    const double e = omega.kappa + m.value;
    double log_s = d * e;
    double dlog_s = d;
    if (!ctx.prevalence().is_rare()) {
        log_s -= detail::softplus(e - ctx.offset());
        dlog_s -= detail::sigmoid(e - ctx.offset());
    }
    ValueGrad out{std::exp(log_s), VectorXd(ctx.p())};
    out.grad[0] = out.value * dlog_s;
    out.grad.tail(ctx.p() - 1) = out.value * dlog_s * m.gradient;
    return out;
}

namespace detail {

// log T(g, x) = log{S(0) + S(1)} and its derivative in E.
inline std::pair<double, double> log_t(double e, const LikelihoodContext& ctx) {
    if (ctx.prevalence().is_rare()) return {softplus(e), sigmoid(e)};
    const double z = e - ctx.offset();
    return {softplus(e) - softplus(z), sigmoid(e) - sigmoid(z)};
}

}  // namespace detail

// Rhat_X(x) = sum_j sum_r sum_d (pi_d/n_d) I(D_j = d) S(r, G_j, x) over the
// unique G rows (ProfileX), or the mirror image summing over X (ProfileG).
inline ValueGrad r_hat(ProfileAxis axis, const RowRef& point_row, const OmegaVector& omega,
                       const LikelihoodContext& ctx) {
    if (omega.size() != ctx.p()) throw DimensionError("omega", ctx.p(), omega.size());
    const bool px = axis == ProfileAxis::ProfileX;
    const auto& t = ctx.table();
    const MatrixXd& others = px ? t.g_unique : t.x_unique;
    const ArrayXd& weight = px ? ctx.g_weight() : ctx.x_weight();
    if (point_row.size() != (px ? ctx.spec().px() : ctx.spec().q()))
        throw DimensionError(px ? "x" : "g", px ? ctx.spec().px() : ctx.spec().q(), point_row.size());

    const Eigen::Index u = others.rows();
    std::vector<double> lt(u), dlt(u);
    std::vector<VectorXd> design(u);
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < u; ++i) {
        const VectorXd row = others.row(i).transpose();
        const auto m = px ? evaluate_m(row, point_row, omega.beta, ctx.spec())
                          : evaluate_m(point_row, row, omega.beta, ctx.spec());
        std::tie(lt[i], dlt[i]) = detail::log_t(omega.kappa + m.value, ctx);
        design[i] = m.gradient;
        if (weight[i] > 0) mx = std::max(mx, lt[i] + std::log(weight[i]));
    }
    double s = 0.0;
    VectorXd g = VectorXd::Zero(ctx.p());
    for (Eigen::Index i = 0; i < u; ++i) {
        if (weight[i] <= 0) continue;
        const double term = weight[i] * std::exp(lt[i] - mx);
        s += term;
        g[0] += term * dlt[i];
        g.tail(ctx.p() - 1) += term * dlt[i] * design[i];
    }
    const double scale = std::exp(mx);
    return {s * scale, g * scale};
}

inline double profile_loglik(ProfileAxis axis, const OmegaVector& omega, const LikelihoodContext& ctx) {
    return evaluate(objective_for(axis), omega.flat(), ctx, false).loglik;
}

inline double composite_loglik(const OmegaVector& omega, const LikelihoodContext& ctx) {
    return evaluate(Objective::Composite, omega.flat(), ctx, false).loglik;
}

// n^{-1/2} sum_i { S_Omega/S - Rhat_Omega/Rhat }
inline VectorXd score(ProfileAxis axis, const OmegaVector& omega, const LikelihoodContext& ctx) {
    return evaluate(objective_for(axis), omega.flat(), ctx).grad / std::sqrt(ctx.n());
}

inline VectorXd score_composite(const OmegaVector& omega, const LikelihoodContext& ctx) {
    return evaluate(Objective::Composite, omega.flat(), ctx).grad / std::sqrt(ctx.n());
}

// Per-cell influence terms zeta(Z_i, Omega) of the estimated score with the
// conditional expectations replaced by stratum sample means. Row c of the
// result belongs to ctx.table().cells[c].
inline MatrixXd zeta(ProfileAxis axis, const VectorXd& omega, const LikelihoodContext& ctx) {
    const Kernel k = compute_kernel(omega, ctx);
    const AxisPart part = compute_axis(axis, k, ctx);
    const ArrayXXd pd = part.prob * k.dlog_t;
    const bool px = axis == ProfileAxis::ProfileX;

    // r: Rhat_Omega/Rhat at each profiled row
    const MatrixXd r = px ? ctx.colwise_grad(pd) : ctx.rowwise_grad(pd);
    // v_ij = n(profiled) T_ij / Rhat(profiled)
    ArrayXXd v;
    MatrixXd f;
    if (px) {
        v = (k.log_t.rowwise() - part.log_r.transpose()).exp();
        v.rowwise() *= ctx.x_count().transpose();
        f = ctx.rowwise_grad(v * k.dlog_t) - v.matrix() * r;
    } else {
        v = (k.log_t.colwise() - part.log_r).exp();
        v.colwise() *= ctx.g_count();
        f = ctx.colwise_grad(v * k.dlog_t) - v.matrix().transpose() * r;
    }

    const auto& cells = ctx.table().cells;
    MatrixXd z(static_cast<Eigen::Index>(cells.size()), ctx.p());
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const auto& cell = cells[c];
        const VectorXd psi = k.cell_dlog_s[c] * ctx.pair_design(cell.gi, cell.xi);
        const Eigen::Index prof = px ? cell.xi : cell.gi;
        const Eigen::Index other = px ? cell.gi : cell.xi;
        z.row(c) = psi.transpose() - r.row(prof) - ctx.stratum_weight(cell.d) * f.row(other);
    }
    return z;
}

}  // namespace ccge
