#pragma once

// Prospective logistic regression of D on (1, design) by Newton-Raphson,
// run on the collapsed cell table with counts as case weights.

#include <cmath>

#include "ccge/cells.hpp"
#include "ccge/model.hpp"

namespace ccge {

struct LogisticEstimate {
    VectorXd coef;      // (kappa, beta)
    MatrixXd cov;       // inverse observed information
    int iterations = 0;
    double score_norm = 0.0;  // ||gradient||_inf / sqrt(n)
    bool converged = false;
};

inline MatrixXd cell_design(const CellTable& t, const RiskSpec& spec) {
    MatrixXd x(static_cast<Eigen::Index>(t.cells.size()), spec.dim_omega());
    for (std::size_t c = 0; c < t.cells.size(); ++c) {
        const auto& cell = t.cells[c];
        x(c, 0) = 1.0;
        x.row(c).tail(spec.dim_beta()) =
            build_design(t.g_unique.row(cell.gi).transpose(), t.x_unique.row(cell.xi).transpose(), spec).transpose();
    }
    return x;
}

inline LogisticEstimate logistic_regression(const CellTable& t, const RiskSpec& spec, int max_iter = 100) {
    const MatrixXd x = cell_design(t, spec);
    const auto nc = x.rows();
    VectorXd y(nc), w(nc);
    for (Eigen::Index c = 0; c < nc; ++c) {
        y[c] = t.cells[c].d;
        w[c] = t.cells[c].count;
    }
    auto loglik = [&](const VectorXd& b) {
        const ArrayXd eta = (x * b).array();
        // y*eta - log(1 + e^eta)
        const ArrayXd sp = eta.max(0.0) + (-eta.abs()).exp().log1p();
        return (w.array() * (y.array() * eta - sp)).sum();
    };

    LogisticEstimate est;
    est.coef = VectorXd::Zero(x.cols());
    est.coef[0] = std::log(t.n1 / t.n0);
    double ll = loglik(est.coef);
    MatrixXd info;
    VectorXd grad;
    for (est.iterations = 0; est.iterations < max_iter; ++est.iterations) {
        const ArrayXd eta = (x * est.coef).array();
        const ArrayXd mu = (1.0 + (-eta).exp()).inverse();
        grad = x.transpose() * (w.array() * (y.array() - mu)).matrix();
        info = x.transpose() * (x.array().colwise() * (w.array() * mu * (1.0 - mu))).matrix();
        Eigen::LDLT<MatrixXd> ldlt(info);
        if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-14)
            throw SeparationError("logistic information matrix is singular (collinear design or separation)");
        VectorXd step = ldlt.solve(grad);
        double next = loglik(est.coef + step);
        for (int h = 0; h < 30 && !(next >= ll - 1e-12 * std::abs(ll)); ++h) {
            step *= 0.5;
            next = loglik(est.coef + step);
        }
        est.coef += step;
        ll = next;
        if (step.lpNorm<Eigen::Infinity>() < 1e-12 * std::max(1.0, est.coef.lpNorm<Eigen::Infinity>())) {
            est.converged = true;
            ++est.iterations;
            break;
        }
        if (est.coef.tail(est.coef.size() - 1).norm() > 30.0) {
            const ArrayXd mu_now = (1.0 + (-(x * est.coef).array()).exp()).inverse();
            if ((mu_now < 1e-10 || mu_now > 1.0 - 1e-10).any())
                throw SeparationError("logistic fit diverges: fitted probabilities reach 0 or 1 with ||beta|| > 30");
        }
    }
    const ArrayXd eta = (x * est.coef).array();
    const ArrayXd mu = (1.0 + (-eta).exp()).inverse();
    grad = x.transpose() * (w.array() * (y.array() - mu)).matrix();
    info = x.transpose() * (x.array().colwise() * (w.array() * mu * (1.0 - mu))).matrix();
    if (est.coef.tail(est.coef.size() - 1).norm() > 30.0 && (mu < 1e-10 || mu > 1.0 - 1e-10).any())
        throw SeparationError("logistic fit diverges: fitted probabilities reach 0 or 1 with ||beta|| > 30");
    est.score_norm = grad.lpNorm<Eigen::Infinity>() / std::sqrt(t.n());
    Eigen::LDLT<MatrixXd> ldlt(info);
    est.cov = ldlt.solve(MatrixXd::Identity(info.rows(), info.cols()));
    est.cov = 0.5 * (est.cov + est.cov.transpose());
    return est;
}

}  // namespace ccge
