#pragma once

// Test-only helpers: random datasets and brute-force reference formulas that
// share no code with the library kernels.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "ccge/ccge.hpp"

namespace testing_support {

using ccge::MatrixXd;
using ccge::VectorXd;
using ccge::VectorXi;

// Random case-control data, not drawn from any model. SNP-like G in {0,1,2};
// X binary or standard normal per column.
inline ccge::CaseControlData random_data(std::mt19937_64& rng, int n0, int n1, int q, int px, bool continuous_x = false) {
    std::uniform_int_distribution<int> geno(0, 2);
    std::bernoulli_distribution coin(0.5);
    std::normal_distribution<double> z(0.0, 1.0);
    for (;;) {
        const int n = n0 + n1;
        VectorXi d(n);
        MatrixXd g(n, q), x(n, px);
        for (int i = 0; i < n; ++i) {
            d[i] = i < n1 ? 1 : 0;
            for (int k = 0; k < q; ++k) g(i, k) = geno(rng);
            for (int l = 0; l < px; ++l) x(i, l) = continuous_x ? z(rng) : (coin(rng) ? 1.0 : 0.0);
        }
        try {
            return ccge::CaseControlData(d, g, x);
        } catch (const ccge::DataError&) {
            // constant column; draw again
        }
    }
}

inline VectorXd random_omega(std::mt19937_64& rng, int p, double scale = 0.5) {
    std::uniform_real_distribution<double> u(-scale, scale);
    VectorXd w(p);
    for (int k = 0; k < p; ++k) w[k] = u(rng);
    return w;
}

// m for the default risk form, written out directly.
inline double direct_m(const VectorXd& g, const VectorXd& x, const VectorXd& beta) {
    const auto q = g.size(), px = x.size();
    double m = 0.0;
    for (int k = 0; k < q; ++k) m += beta[k] * g[k];
    for (int l = 0; l < px; ++l) m += beta[q + l] * x[l];
    for (int l = 0; l < px; ++l)
        for (int k = 0; k < q; ++k) m += beta[q + px + l * q + k] * g[k] * x[l];
    return m;
}

// S(r, g, x) straight from its definition; pi1 < 0 means the rare limit.
inline double direct_s(int r, double kappa, double m, double n0, double n1, double pi1) {
    if (pi1 < 0) return std::exp(r * (kappa + m));
    const double offset = std::log(n1 / n0) - std::log(pi1 / (1 - pi1));
    return std::exp(r * (kappa + m)) / (1.0 + std::exp(kappa - offset + m));
}

// Rhat_X(x) as the triple sum over every subject j, r and d.
inline double naive_r_hat_x(const ccge::CaseControlData& data, const VectorXd& x, const VectorXd& omega, double pi1) {
    const double n0 = data.n0(), n1 = data.n1();
    const double pi[2] = {pi1 < 0 ? 1.0 : 1 - pi1, pi1 < 0 ? 0.0 : pi1};
    const double nd[2] = {n0, n1};
    const VectorXd beta = omega.tail(omega.size() - 1);
    double s = 0.0;
    for (Eigen::Index j = 0; j < data.n(); ++j) {
        const double m = direct_m(data.g().row(j).transpose(), x, beta);
        for (int r = 0; r < 2; ++r)
            for (int d = 0; d < 2; ++d)
                if (data.d()[j] == d) s += pi[d] / nd[d] * direct_s(r, omega[0], m, n0, n1, pi1);
    }
    return s;
}

inline double naive_r_hat_g(const ccge::CaseControlData& data, const VectorXd& g, const VectorXd& omega, double pi1) {
    const double n0 = data.n0(), n1 = data.n1();
    const double pi[2] = {pi1 < 0 ? 1.0 : 1 - pi1, pi1 < 0 ? 0.0 : pi1};
    const double nd[2] = {n0, n1};
    const VectorXd beta = omega.tail(omega.size() - 1);
    double s = 0.0;
    for (Eigen::Index j = 0; j < data.n(); ++j) {
        const double m = direct_m(g, data.x().row(j).transpose(), beta);
        for (int r = 0; r < 2; ++r)
            for (int d = 0; d < 2; ++d)
                if (data.d()[j] == d) s += pi[d] / nd[d] * direct_s(r, omega[0], m, n0, n1, pi1);
    }
    return s;
}

// Profile loglikelihood as a subject loop over the naive pieces.
inline double naive_loglik(bool profile_x, const ccge::CaseControlData& data, const VectorXd& omega, double pi1) {
    const VectorXd beta = omega.tail(omega.size() - 1);
    double ll = 0.0;
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        const VectorXd g = data.g().row(i).transpose(), x = data.x().row(i).transpose();
        ll += std::log(direct_s(data.d()[i], omega[0], direct_m(g, x, beta), data.n0(), data.n1(), pi1));
        ll -= std::log(profile_x ? naive_r_hat_x(data, x, omega, pi1) : naive_r_hat_g(data, g, omega, pi1));
    }
    return ll;
}

template <typename F>
VectorXd central_gradient(F&& f, const VectorXd& w, double h = 1e-6) {
    VectorXd g(w.size());
    VectorXd wp = w;
    for (Eigen::Index k = 0; k < w.size(); ++k) {
        const double step = h * std::max(1.0, std::abs(w[k]));
        wp[k] = w[k] + step;
        const double fp = f(wp);
        wp[k] = w[k] - step;
        const double fm = f(wp);
        wp[k] = w[k];
        g[k] = (fp - fm) / (2 * step);
    }
    return g;
}

inline double rel_err(const VectorXd& a, const VectorXd& b) {
    return (a - b).lpNorm<Eigen::Infinity>() / std::max(1.0, b.lpNorm<Eigen::Infinity>());
}

// One-sample Kolmogorov-Smirnov test against U(0, 1), asymptotic p-value
// with the Stephens small-sample correction.
inline double ks_uniform_pvalue(std::vector<double> p) {
    std::sort(p.begin(), p.end());
    const double n = static_cast<double>(p.size());
    double dmax = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        dmax = std::max(dmax, (i + 1) / n - p[i]);
        dmax = std::max(dmax, p[i] - i / n);
    }
    const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * dmax;
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) sum += (k % 2 ? 2.0 : -2.0) * std::exp(-2.0 * k * k * lambda * lambda);
    return std::clamp(sum, 0.0, 1.0);
}

// Pearson chi-square p-value of an r x c table via the regularized gamma
// function, independent of the library's implementation.
inline double chi_square_pvalue(const MatrixXd& t) {
    const double n = t.sum();
    double stat = 0.0;
    int rows = 0, cols = 0;
    for (Eigen::Index i = 0; i < t.rows(); ++i) rows += t.row(i).sum() > 0;
    for (Eigen::Index j = 0; j < t.cols(); ++j) cols += t.col(j).sum() > 0;
    for (Eigen::Index i = 0; i < t.rows(); ++i)
        for (Eigen::Index j = 0; j < t.cols(); ++j) {
            const double e = t.row(i).sum() * t.col(j).sum() / n;
            if (e > 0) stat += (t(i, j) - e) * (t(i, j) - e) / e;
        }
    const double df = (rows - 1) * (cols - 1);
    return boost::math::gamma_q(df / 2.0, stat / 2.0);
}

// Small base-like dataset from the library generator.
inline ccge::CaseControlData base_data(std::uint64_t seed, int n0 = 500, int n1 = 500) {
    static const ccge::Scenario sc = ccge::preset("base");
    return ccge::gen_case_control(sc, n0, n1, seed);
}

}  // namespace testing_support
