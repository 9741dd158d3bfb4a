#pragma once

// Quasi-Newton maximizer for smooth low-dimensional objectives with an
// analytic gradient. BFGS on the inverse Hessian, seeded from a
// finite-difference Hessian; damped Newton when the line search stalls.

#include <cmath>
#include <functional>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "ccge/errors.hpp"

namespace ccge {

struct ObjectiveValue {
    double value = 0.0;
    Eigen::VectorXd grad;
};

using ObjectiveFn = std::function<ObjectiveValue(const Eigen::VectorXd&)>;

struct SolverOptions {
    int max_iter = 200;
    double score_tol = 1e-8;   // on ||grad / grad_scale||_inf
    double step_tol = 1e-10;   // on ||step||_inf / max(1, ||x||_inf)
    double grad_scale = 1.0;   // sqrt(n) turns a summed gradient into the n^{-1/2} score
};

struct SolverResult {
    Eigen::VectorXd x;
    double value = 0.0;
    Eigen::VectorXd grad;
    int iterations = 0;
    int evaluations = 0;
    double score_norm = 0.0;
    bool converged = false;
};

// Central-difference Hessian of an analytic gradient, symmetrized.
inline Eigen::MatrixXd fd_hessian(const ObjectiveFn& f, const Eigen::VectorXd& x, double rel_step = 1e-5) {
    const auto p = x.size();
    Eigen::MatrixXd h(p, p);
    Eigen::VectorXd xp = x;
    for (Eigen::Index j = 0; j < p; ++j) {
        const double step = rel_step * std::max(1.0, std::abs(x[j]));
        xp[j] = x[j] + step;
        const Eigen::VectorXd gp = f(xp).grad;
        xp[j] = x[j] - step;
        const Eigen::VectorXd gm = f(xp).grad;
        xp[j] = x[j];
        h.col(j) = (gp - gm) / (2.0 * step);
    }
    return 0.5 * (h + h.transpose());
}

namespace detail {

// Inverse of -H when -H is positive definite.
inline std::optional<Eigen::MatrixXd> inverse_neg_hessian(const Eigen::MatrixXd& h) {
    Eigen::LLT<Eigen::MatrixXd> llt(-h);
    if (llt.info() != Eigen::Success) return std::nullopt;
    return llt.solve(Eigen::MatrixXd::Identity(h.rows(), h.cols()));
}

}  // namespace detail

inline SolverResult maximize(const ObjectiveFn& f, Eigen::VectorXd x0, const SolverOptions& opt = {},
                             const std::optional<Eigen::MatrixXd>& hessian0 = std::nullopt) {
    using Eigen::MatrixXd;
    using Eigen::VectorXd;
    const auto p = x0.size();
    SolverResult res;
    res.x = std::move(x0);
    ObjectiveValue cur = f(res.x);
    res.evaluations = 1;
    if (!std::isfinite(cur.value) || !cur.grad.allFinite())
        throw NonConvergence("objective not finite at the starting value",
                             std::vector<double>(res.x.data(), res.x.data() + p), INFINITY);

    auto counted = [&](const VectorXd& x) {
        ++res.evaluations;
        return f(x);
    };
    auto seed_inverse = [&](const std::optional<MatrixXd>& h) -> MatrixXd {
        if (h) {
            if (auto inv = detail::inverse_neg_hessian(*h)) return *inv;
        }
        const MatrixXd fd = fd_hessian(counted, res.x);
        if (auto inv = detail::inverse_neg_hessian(fd)) return *inv;
        const double scale = std::max(1.0, cur.grad.lpNorm<Eigen::Infinity>());
        return MatrixXd::Identity(p, p) / scale;
    };

    MatrixXd hinv = seed_inverse(hessian0);
    const double noise = 1e-11;
    auto score_norm = [&](const VectorXd& g) { return g.lpNorm<Eigen::Infinity>() / opt.grad_scale; };

    for (res.iterations = 0; res.iterations < opt.max_iter; ++res.iterations) {
        VectorXd dir = hinv * cur.grad;
        double slope = cur.grad.dot(dir);
        if (!(slope > 0)) {
            hinv = seed_inverse(std::nullopt);
            dir = hinv * cur.grad;
            slope = cur.grad.dot(dir);
        }

        auto acceptable = [&](const ObjectiveValue& trial, double alpha) {
            if (!std::isfinite(trial.value) || !trial.grad.allFinite()) return false;
            if (trial.value >= cur.value + 1e-4 * alpha * slope) return true;
            // at the rounding floor of the objective, accept on gradient decrease
            return std::abs(trial.value - cur.value) <= noise * std::max(1.0, std::abs(cur.value)) &&
                   trial.grad.lpNorm<Eigen::Infinity>() < cur.grad.lpNorm<Eigen::Infinity>();
        };

        std::optional<ObjectiveValue> next;
        VectorXd step;
        double alpha = 1.0;
        for (int ls = 0; ls < 40 && slope > 0; ++ls, alpha *= 0.5) {
            step = alpha * dir;
            ObjectiveValue trial = counted(res.x + step);
            if (acceptable(trial, alpha)) {
                next = std::move(trial);
                break;
            }
        }

        if (!next) {
            // damped Newton fallback
            const MatrixXd h = fd_hessian(counted, res.x);
            double lambda = 1e-6 * std::max(1.0, h.diagonal().cwiseAbs().maxCoeff());
            for (int k = 0; k < 30 && !next; ++k, lambda *= 10.0) {
                const MatrixXd a = -h + lambda * MatrixXd::Identity(p, p);
                Eigen::LLT<MatrixXd> llt(a);
                if (llt.info() != Eigen::Success) continue;
                step = llt.solve(cur.grad);
                slope = cur.grad.dot(step);
                ObjectiveValue trial = counted(res.x + step);
                if (acceptable(trial, 1.0)) next = std::move(trial);
            }
            if (auto inv = detail::inverse_neg_hessian(h)) hinv = *inv;
        }

        if (!next) {
            // no ascent possible from here; converged only if the score is already solved
            res.score_norm = score_norm(cur.grad);
            res.converged = res.score_norm < opt.score_tol;
            break;
        }

        const VectorXd y = cur.grad - next->grad;  // gradient change of -f
        const double sy = step.dot(y);
        if (sy > 1e-12 * step.norm() * y.norm()) {
            const double rho = 1.0 / sy;
            const MatrixXd v = MatrixXd::Identity(p, p) - rho * step * y.transpose();
            hinv = v * hinv * v.transpose() + rho * step * step.transpose();
        }
        const double rel = step.lpNorm<Eigen::Infinity>() / std::max(1.0, res.x.lpNorm<Eigen::Infinity>());
        res.x += step;
        cur = std::move(*next);
        res.score_norm = score_norm(cur.grad);
        if (res.score_norm < opt.score_tol && rel < opt.step_tol) {
            res.converged = true;
            ++res.iterations;
            break;
        }
    }
    res.value = cur.value;
    res.grad = cur.grad;
    res.score_norm = score_norm(cur.grad);
    return res;
}

}  // namespace ccge
