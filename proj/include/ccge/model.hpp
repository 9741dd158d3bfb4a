#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ccge/errors.hpp"

namespace ccge {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;
using Eigen::ArrayXd;
using Eigen::ArrayXXd;
using RowRef = Eigen::Ref<const VectorXd>;

// The retrospective sample: disease indicator, genetic covariates G (n x q)
// and environmental covariates X (n x p_x). Validated on construction and
// immutable afterwards.
class CaseControlData {
public:
    CaseControlData(VectorXi d, MatrixXd g, MatrixXd x) : d_(std::move(d)), g_(std::move(g)), x_(std::move(x)) {
        const auto n = d_.size();
        if (g_.rows() != n) throw DimensionError("g rows", n, g_.rows());
        if (x_.rows() != n) throw DimensionError("x rows", n, x_.rows());
        if (g_.cols() < 1) throw DataError("g must have at least one column");
        if (x_.cols() < 1) throw DataError("x must have at least one column");
        for (Eigen::Index i = 0; i < n; ++i) {
            if (d_[i] != 0 && d_[i] != 1)
                throw DataError("row " + std::to_string(i + 1) + ", column d: disease indicator must be 0 or 1");
            (d_[i] == 1 ? n1_ : n0_)++;
        }
        if (n0_ < 1 || n1_ < 1) throw DataError("need at least one case and one control");
        check_block(g_, "g");
        check_block(x_, "x");
    }

    const VectorXi& d() const noexcept { return d_; }
    const MatrixXd& g() const noexcept { return g_; }
    const MatrixXd& x() const noexcept { return x_; }
    Eigen::Index n() const noexcept { return d_.size(); }
    Eigen::Index n0() const noexcept { return n0_; }
    Eigen::Index n1() const noexcept { return n1_; }
    Eigen::Index q() const noexcept { return g_.cols(); }
    Eigen::Index px() const noexcept { return x_.cols(); }

private:
    static void check_block(const MatrixXd& m, const char* name) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            for (Eigen::Index i = 0; i < m.rows(); ++i) {
                if (!std::isfinite(m(i, j)))
                    throw DataError("row " + std::to_string(i + 1) + ", column " + name + std::to_string(j + 1) +
                                    ": non-finite value");
            }
            if ((m.col(j).array() == m(0, j)).all())
                throw DataError(std::string("column ") + name + std::to_string(j + 1) + " is constant");
        }
    }

    VectorXi d_;
    MatrixXd g_;
    MatrixXd x_;
    Eigen::Index n0_ = 0;
    Eigen::Index n1_ = 0;
};

// One term of m(G, X, beta): the product of the selected G columns and X
// columns. An empty side contributes the factor 1.
struct Term {
    std::vector<int> g_cols;
    std::vector<int> x_cols;

    bool operator==(const Term&) const = default;
};

enum class RiskForm { MainEffectsAndAllGXInteractions, MainEffectsOnly, Custom };

// Functional form of m(G, X, beta) and the layout of beta. Under the default
// form beta = (beta_G, beta_X, beta_GX) with interactions ordered G-major
// within each X column: (g1 x1, ..., gq x1, g1 x2, ...).
class RiskSpec {
public:
    RiskSpec(int q, int px, RiskForm form = RiskForm::MainEffectsAndAllGXInteractions, std::vector<Term> custom = {})
        : q_(q), px_(px), form_(form) {
        if (q < 1 || px < 1) throw DomainError("risk model needs q >= 1 and p_x >= 1");
        if (form == RiskForm::Custom) {
            if (custom.empty()) throw DomainError("custom risk form needs at least one term");
            for (const auto& t : custom) {
                if (t.g_cols.empty() && t.x_cols.empty())
                    throw DomainError("custom term with no columns duplicates the intercept");
                for (int k : t.g_cols)
                    if (k < 0 || k >= q) throw DomainError("custom term references g column out of range");
                for (int l : t.x_cols)
                    if (l < 0 || l >= px) throw DomainError("custom term references x column out of range");
            }
            terms_ = std::move(custom);
            return;
        }
        for (int k = 0; k < q; ++k) terms_.push_back({{k}, {}});
        for (int l = 0; l < px; ++l) terms_.push_back({{}, {l}});
        if (form == RiskForm::MainEffectsAndAllGXInteractions)
            for (int l = 0; l < px; ++l)
                for (int k = 0; k < q; ++k) terms_.push_back({{k}, {l}});
    }

    int q() const noexcept { return q_; }
    int px() const noexcept { return px_; }
    RiskForm form() const noexcept { return form_; }
    const std::vector<Term>& terms() const noexcept { return terms_; }
    int dim_beta() const noexcept { return static_cast<int>(terms_.size()); }
    int dim_omega() const noexcept { return dim_beta() + 1; }

    // kappa, beta_g1.., beta_x1.., beta_x1_g1..
    std::vector<std::string> parameter_names() const {
        std::vector<std::string> names{"kappa"};
        for (const auto& t : terms_) {
            std::string s = "beta";
            for (int l : t.x_cols) s += "_x" + std::to_string(l + 1);
            for (int k : t.g_cols) s += "_g" + std::to_string(k + 1);
            names.push_back(std::move(s));
        }
        return names;
    }

    bool operator==(const RiskSpec&) const = default;

private:
    int q_;
    int px_;
    RiskForm form_;
    std::vector<Term> terms_;
};

// Omega = (kappa, beta^T)^T; kappa is always coordinate 0 when flattened.
struct OmegaVector {
    double kappa = 0.0;
    VectorXd beta;

    Eigen::Index size() const noexcept { return beta.size() + 1; }

    VectorXd flat() const {
        VectorXd v(size());
        v[0] = kappa;
        v.tail(beta.size()) = beta;
        return v;
    }

    static OmegaVector from_flat(const RowRef& v) {
        if (v.size() < 1) throw DimensionError("omega", 1, 0);
        return {v[0], v.tail(v.size() - 1)};
    }
};

// Known(pi1) or the rare-disease limit pi1 -> 0.
class PrevalenceSpec {
public:
    static PrevalenceSpec known(double pi1) {
        if (!(pi1 > 0.0 && pi1 < 1.0))
            throw DomainError("prevalence pi1 must lie in the open interval (0, 1), got " + std::to_string(pi1));
        return PrevalenceSpec(pi1);
    }
    static PrevalenceSpec rare() { return PrevalenceSpec(std::nullopt); }

    bool is_rare() const noexcept { return !pi1_.has_value(); }
    // pi1, or 0 under the rare approximation
    double pi1() const noexcept { return pi1_.value_or(0.0); }
    double pi(int d) const noexcept { return d == 1 ? pi1() : 1.0 - pi1(); }

    bool operator==(const PrevalenceSpec&) const = default;

private:
    explicit PrevalenceSpec(std::optional<double> p) : pi1_(p) {}
    std::optional<double> pi1_;
};

inline double term_value(const Term& t, const RowRef& g_row, const RowRef& x_row) {
    double v = 1.0;
    for (int k : t.g_cols) v *= g_row[k];
    for (int l : t.x_cols) v *= x_row[l];
    return v;
}

// Covariate vector whose inner product with beta is m(g, x, beta).
inline VectorXd build_design(const RowRef& g_row, const RowRef& x_row, const RiskSpec& spec) {
    if (g_row.size() != spec.q()) throw DimensionError("g", spec.q(), g_row.size());
    if (x_row.size() != spec.px()) throw DimensionError("x", spec.px(), x_row.size());
    VectorXd out(spec.dim_beta());
    for (int t = 0; t < spec.dim_beta(); ++t) out[t] = term_value(spec.terms()[t], g_row, x_row);
    return out;
}

struct MValue {
    double value;
    VectorXd gradient;  // d m / d beta
};

inline MValue evaluate_m(const RowRef& g_row, const RowRef& x_row, const RowRef& beta, const RiskSpec& spec) {
    if (beta.size() != spec.dim_beta()) throw DimensionError("beta", spec.dim_beta(), beta.size());
    VectorXd design = build_design(g_row, x_row, spec);
    const double v = design.dot(beta);
    return {v, std::move(design)};
}

// kappa = alpha0 + log(n1/n0) - log(pi1/pi0): the intercept prospective
// logistic regression converges to under case-control sampling.
inline double kappa_from_alpha(double alpha0, double n1, double n0, double pi1) {
    if (!(pi1 > 0.0 && pi1 < 1.0)) throw DomainError("pi1 must lie in (0, 1)");
    if (n0 < 1 || n1 < 1) throw DomainError("stratum counts must be >= 1");
    return alpha0 + std::log(n1 / n0) - std::log(pi1 / (1.0 - pi1));
}

inline double alpha_from_kappa(double kappa, double n1, double n0, double pi1) {
    if (!(pi1 > 0.0 && pi1 < 1.0)) throw DomainError("pi1 must lie in (0, 1)");
    if (n0 < 1 || n1 < 1) throw DomainError("stratum counts must be >= 1");
    return kappa - std::log(n1 / n0) + std::log(pi1 / (1.0 - pi1));
}

}  // namespace ccge
