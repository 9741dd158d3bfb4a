#pragma once

// Pre-analysis utilities: polygenic risk scores and a G-X independence
// screen run on the controls.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "ccge/model.hpp"

namespace ccge {

class PrsWeights {
public:
    using Entry = std::pair<std::string, double>;

    explicit PrsWeights(std::vector<Entry> entries) : entries_(std::move(entries)) {
        if (entries_.empty()) throw ConfigError("PRS weights are empty");
        std::set<std::string> seen;
        for (const auto& [id, w] : entries_) {
            if (!seen.insert(id).second) throw ConfigError("duplicate PRS identifier '" + id + "'");
            if (!std::isfinite(w)) throw ConfigError("PRS coefficient for '" + id + "' is not finite");
        }
    }

    const std::vector<Entry>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }

    VectorXd coefficients() const {
        VectorXd c(static_cast<Eigen::Index>(entries_.size()));
        for (std::size_t k = 0; k < entries_.size(); ++k) c[k] = entries_[k].second;
        return c;
    }

    // Bundled weight sets, addressable by name.
    static PrsWeights bundled(const std::string& name) {
        if (name != "plco21") throw ConfigError("unknown PRS weight set '" + name + "' (available: plco21)");
        return PrsWeights({
            {"rs11249433", -0.02813492}, {"rs1045485", -0.09307971}, {"rs13387042", -0.26203658},
            {"rs4973768", 0.08013260},   {"rs10069690", 0.06459363}, {"rs10941679", 0.09185539},
            {"rs889312", -0.00565121},   {"rs17530068", 0.09668742}, {"rs2046210", 0.09851217},
            {"rs1562430", -0.14871719},  {"rs1011970", 0.05329783},  {"rs865686", -0.02913340},
            {"rs2380205", -0.01821032},  {"rs10995190", -0.04275836}, {"rs2981582", 0.14008397},
            {"rs909116", 0.04955235},    {"rs614367", 0.06438418},   {"rs3803662", 0.27080105},
            {"rs6504950", -0.17586244},  {"rs8170", 0.08570773},     {"rs999737", -0.13737833},
        });
    }

private:
    std::vector<Entry> entries_;
};

inline VectorXd raw_polygenic_score(const MatrixXd& genotypes, const PrsWeights& w) {
    if (genotypes.cols() != static_cast<Eigen::Index>(w.size()))
        throw DimensionError("genotype columns", static_cast<Eigen::Index>(w.size()), genotypes.cols());
    return genotypes * w.coefficients();
}

// Weighted genotype sum standardized to mean 0 and SD 1 (denominator n - 1).
inline VectorXd polygenic_score(const MatrixXd& genotypes, const PrsWeights& w) {
    const VectorXd raw = raw_polygenic_score(genotypes, w);
    if (raw.size() < 2) throw DegenerateScoreError("polygenic score needs at least two subjects");
    const double mean = raw.mean();
    const double sd = std::sqrt((raw.array() - mean).square().sum() / (raw.size() - 1.0));
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) throw DegenerateScoreError("raw polygenic score has zero variance");
    return (raw.array() - mean) / sd;
}

// -------------------------------------------------------------------- tests

struct TestResult {
    double statistic = 0.0;
    double df = 0.0;
    double p = 1.0;
};

inline TestResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() < 2 || b.size() < 2) throw InsufficientData("t-test needs at least two observations per group");
    auto moments = [](const std::vector<double>& v) {
        const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - m) * (x - m);
        return std::pair{m, ss / (static_cast<double>(v.size()) - 1.0)};
    };
    const auto [ma, va] = moments(a);
    const auto [mb, vb] = moments(b);
    const double sa = va / static_cast<double>(a.size()), sb = vb / static_cast<double>(b.size());
    TestResult r;
    if (sa + sb <= 0.0) {
        // both groups constant
        r.statistic = ma == mb ? 0.0 : std::copysign(INFINITY, ma - mb);
        r.df = static_cast<double>(a.size() + b.size() - 2);
        r.p = ma == mb ? 1.0 : 0.0;
        return r;
    }
    r.statistic = (ma - mb) / std::sqrt(sa + sb);
    r.df = (sa + sb) * (sa + sb) /
           (sa * sa / (static_cast<double>(a.size()) - 1.0) + sb * sb / (static_cast<double>(b.size()) - 1.0));
    const boost::math::students_t dist(r.df);
    r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.statistic)));
    return r;
}

// Pearson chi-square on an r x c table of counts. Empty rows and columns are
// dropped before computing degrees of freedom.
inline TestResult chi_square_test(const MatrixXd& table) {
    std::vector<Eigen::Index> rows, cols;
    for (Eigen::Index i = 0; i < table.rows(); ++i)
        if (table.row(i).sum() > 0) rows.push_back(i);
    for (Eigen::Index j = 0; j < table.cols(); ++j)
        if (table.col(j).sum() > 0) cols.push_back(j);
    TestResult r;
    if (rows.size() < 2 || cols.size() < 2) return r;
    const double n = table.sum();
    for (auto i : rows)
        for (auto j : cols) {
            const double e = table.row(i).sum() * table.col(j).sum() / n;
            r.statistic += (table(i, j) - e) * (table(i, j) - e) / e;
        }
    r.df = static_cast<double>((rows.size() - 1) * (cols.size() - 1));
    const boost::math::chi_squared dist(r.df);
    r.p = boost::math::cdf(boost::math::complement(dist, r.statistic));
    return r;
}

// Benjamini-Hochberg adjusted p-values, returned in input order.
inline std::vector<double> bh_qvalues(const std::vector<double>& p) {
    const std::size_t m = p.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
    std::vector<double> q(m);
    double running = 1.0;
    for (std::size_t k = m; k-- > 0;) {
        const std::size_t i = order[k];
        running = std::min(running, p[i] * static_cast<double>(m) / static_cast<double>(k + 1));
        // p * m / m can round one ulp below p
        q[i] = std::min(1.0, std::max(running, p[i]));
    }
    return q;
}

// ----------------------------------------------------------------- screen

enum class GKind { Snp, Continuous };

struct ScreenOptions {
    bool merge_small_cells = true;  // fold genotype 2 into 1 when an expected count is < 5
    int min_controls_per_level = 10;
};

struct ScreenTest {
    int g_col = 0;
    int x_col = 0;
    std::string test;  // "welch_t" or "chi_square"
    double statistic = 0.0;
    double df = 0.0;
    double p = 1.0;
    double q = 1.0;
    bool merged = false;
};

struct ScreenReport {
    Eigen::Index n_controls = 0;
    std::vector<int> binary_x;   // X columns tested
    std::vector<int> skipped_x;  // non-binary X columns
    std::vector<ScreenTest> tests;
};

// Control rows of (G, X). Every statistic of the screen is computed from
// this subset only.
inline std::pair<MatrixXd, MatrixXd> control_rows(const CaseControlData& data) {
    MatrixXd g(data.n0(), data.q()), x(data.n0(), data.px());
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        if (data.d()[i] != 0) continue;
        g.row(k) = data.g().row(i);
        x.row(k) = data.x().row(i);
        ++k;
    }
    return {std::move(g), std::move(x)};
}

inline ScreenReport independence_screen_controls(const MatrixXd& g, const MatrixXd& x, const std::vector<GKind>& g_kind,
                                                 const ScreenOptions& opt = {}) {
    if (static_cast<Eigen::Index>(g_kind.size()) != g.cols())
        throw DimensionError("g_kind", g.cols(), static_cast<Eigen::Index>(g_kind.size()));
    ScreenReport rep;
    rep.n_controls = g.rows();
    std::vector<std::pair<double, double>> levels(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index l = 0; l < x.cols(); ++l) {
        std::set<double> vals(x.col(l).data(), x.col(l).data() + x.rows());
        if (vals.size() == 2) {
            rep.binary_x.push_back(static_cast<int>(l));
            levels[l] = {*vals.begin(), *vals.rbegin()};
            for (double v : vals) {
                const auto cnt = (x.col(l).array() == v).count();
                if (cnt < opt.min_controls_per_level)
                    throw InsufficientData("X column x" + std::to_string(l + 1) + " has " + std::to_string(cnt) +
                                           " controls at level " + std::to_string(v) + " (need " +
                                           std::to_string(opt.min_controls_per_level) + ")");
            }
        } else {
            rep.skipped_x.push_back(static_cast<int>(l));
        }
    }
    if (rep.binary_x.empty()) throw DataError("independence screen needs at least one binary X column among controls");

    for (int l : rep.binary_x) {
        const double hi_level = levels[l].second;
        for (Eigen::Index k = 0; k < g.cols(); ++k) {
            ScreenTest t;
            t.g_col = static_cast<int>(k);
            t.x_col = l;
            if (g_kind[k] == GKind::Continuous) {
                std::vector<double> a, b;
                for (Eigen::Index i = 0; i < g.rows(); ++i) (x(i, l) == hi_level ? a : b).push_back(g(i, k));
                const auto r = welch_t_test(a, b);
                t.test = "welch_t";
                t.statistic = r.statistic;
                t.df = r.df;
                t.p = r.p;
            } else {
                MatrixXd table = MatrixXd::Zero(3, 2);
                for (Eigen::Index i = 0; i < g.rows(); ++i) {
                    const double v = g(i, k);
                    if (v != 0.0 && v != 1.0 && v != 2.0)
                        throw DataError("row " + std::to_string(i + 1) + " of controls, column g" +
                                        std::to_string(k + 1) + ": SNP code must be 0, 1 or 2");
                    table(static_cast<Eigen::Index>(v), x(i, l) == hi_level ? 1 : 0) += 1.0;
                }
                if (opt.merge_small_cells) {
                    const double n = table.sum();
                    bool small = false;
                    for (Eigen::Index j = 0; j < 2; ++j) small |= table.row(2).sum() * table.col(j).sum() / n < 5.0;
                    if (small) {
                        table.row(1) += table.row(2);
                        table.row(2).setZero();
                        t.merged = true;
                    }
                }
                const auto r = chi_square_test(table);
                t.test = "chi_square";
                t.statistic = r.statistic;
                t.df = r.df;
                t.p = r.p;
            }
            rep.tests.push_back(std::move(t));
        }
    }
    std::vector<double> p;
    for (const auto& t : rep.tests) p.push_back(t.p);
    const auto q = bh_qvalues(p);
    for (std::size_t i = 0; i < q.size(); ++i) rep.tests[i].q = q[i];
    return rep;
}

inline ScreenReport independence_screen(const CaseControlData& data, const std::vector<GKind>& g_kind,
                                        const ScreenOptions& opt = {}) {
    const auto [g, x] = control_rows(data);
    return independence_screen_controls(g, x, g_kind, opt);
}

}  // namespace ccge
