#pragma once

#include <cstdint>
#include <cstring>
#include <unordered_map>
#include <vector>

#include "ccge/model.hpp"

namespace ccge {

// A subject profile (d, unique G row, unique X row) with its multiplicity.
struct Cell {
    int d;
    int gi;
    int xi;
    double count;
    long first_subject;  // for diagnostics; -1 when unknown
};

// Case-control data collapsed onto exact-match unique rows of G and X.
// All likelihood kernels run on this representation; a bootstrap replicate
// is the same table with different counts.
struct CellTable {
    MatrixXd g_unique;
    MatrixXd x_unique;
    std::vector<Cell> cells;
    double n0 = 0;
    double n1 = 0;

    double n() const noexcept { return n0 + n1; }
    Eigen::Index ug() const noexcept { return g_unique.rows(); }
    Eigen::Index ux() const noexcept { return x_unique.rows(); }

    // Same rows with per-cell counts replaced; zero-count cells and rows no
    // cell refers to are dropped.
    CellTable reweighted(const std::vector<double>& counts) const {
        if (counts.size() != cells.size()) throw DimensionError("cell counts", cells.size(), counts.size());
        std::vector<int> gmap(static_cast<std::size_t>(ug()), -1), xmap(static_cast<std::size_t>(ux()), -1);
        CellTable out;
        int ng = 0, nx = 0;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (counts[c] <= 0) continue;
            const auto& cell = cells[c];
            if (gmap[cell.gi] < 0) gmap[cell.gi] = ng++;
            if (xmap[cell.xi] < 0) xmap[cell.xi] = nx++;
            out.cells.push_back({cell.d, gmap[cell.gi], xmap[cell.xi], counts[c], cell.first_subject});
            (cell.d == 1 ? out.n1 : out.n0) += counts[c];
        }
        out.g_unique.resize(ng, g_unique.cols());
        out.x_unique.resize(nx, x_unique.cols());
        for (Eigen::Index i = 0; i < ug(); ++i)
            if (gmap[i] >= 0) out.g_unique.row(gmap[i]) = g_unique.row(i);
        for (Eigen::Index j = 0; j < ux(); ++j)
            if (xmap[j] >= 0) out.x_unique.row(xmap[j]) = x_unique.row(j);
        return out;
    }
};

namespace detail {

struct RowKey {
    std::vector<std::uint64_t> bits;
    bool operator==(const RowKey&) const = default;
};

struct RowKeyHash {
    std::size_t operator()(const RowKey& k) const noexcept {
        std::uint64_t h = 0x9e3779b97f4a7c15ULL;
        for (auto b : k.bits) {
            h ^= b + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        }
        return static_cast<std::size_t>(h);
    }
};

inline RowKey row_key(const MatrixXd& m, Eigen::Index i) {
    RowKey k;
    k.bits.resize(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        const double v = m(i, j);
        std::memcpy(&k.bits[j], &v, sizeof(double));
    }
    return k;
}

// Bitwise-exact deduplication; unique rows keep first-appearance order.
inline std::vector<int> dedup_rows(const MatrixXd& m, MatrixXd& unique) {
    std::unordered_map<RowKey, int, RowKeyHash> seen;
    std::vector<int> idx(static_cast<std::size_t>(m.rows()));
    std::vector<Eigen::Index> firsts;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        auto [it, inserted] = seen.emplace(row_key(m, i), static_cast<int>(firsts.size()));
        if (inserted) firsts.push_back(i);
        idx[i] = it->second;
    }
    unique.resize(static_cast<Eigen::Index>(firsts.size()), m.cols());
    for (std::size_t u = 0; u < firsts.size(); ++u) unique.row(u) = m.row(firsts[u]);
    return idx;
}

}  // namespace detail

struct Tabulation {
    CellTable table;
    std::vector<int> subject_cell;  // cell index of each subject
    std::vector<int> cases;         // subject indices with d = 1
    std::vector<int> controls;      // subject indices with d = 0
};

inline Tabulation tabulate(const CaseControlData& data) {
    Tabulation tab;
    auto& t = tab.table;
    const auto gidx = detail::dedup_rows(data.g(), t.g_unique);
    const auto xidx = detail::dedup_rows(data.x(), t.x_unique);
    std::unordered_map<std::int64_t, int> cell_of;
    tab.subject_cell.resize(static_cast<std::size_t>(data.n()));
    const std::int64_t ux = t.ux();
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        const int d = data.d()[i];
        const std::int64_t key = (static_cast<std::int64_t>(gidx[i]) * ux + xidx[i]) * 2 + d;
        auto [it, inserted] = cell_of.emplace(key, static_cast<int>(t.cells.size()));
        if (inserted) t.cells.push_back({d, gidx[i], xidx[i], 0.0, static_cast<long>(i)});
        t.cells[it->second].count += 1.0;
        tab.subject_cell[i] = it->second;
        (d == 1 ? tab.cases : tab.controls).push_back(static_cast<int>(i));
    }
    t.n0 = static_cast<double>(data.n0());
    t.n1 = static_cast<double>(data.n1());
    return tab;
}

}  // namespace ccge
