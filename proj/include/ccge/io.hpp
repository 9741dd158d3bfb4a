#pragma once

// CSV datasets, JSON scenario configs and JSON serialization of results.

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ccge/diagnostics.hpp"
#include "ccge/estimators.hpp"
#include "ccge/simgen.hpp"

namespace ccge {

using json = nlohmann::ordered_json;

inline constexpr const char* kSchemaVersion = "1";

// ---------------------------------------------------------------------- CSV

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    for (auto& s : out) {
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t");
        s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    }
    return out;
}

// Column name of the form <prefix><positive integer>.
inline int indexed_column(const std::string& name, char prefix) {
    if (name.size() < 2 || name[0] != prefix) return 0;
    int k = 0;
    const auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), k);
    return ec == std::errc() && ptr == name.data() + name.size() && k > 0 ? k : 0;
}

inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace detail

inline CaseControlData read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.empty()) throw DataError("missing header row (expected d,g1..,x1..)");
    const auto header = detail::split_csv_line(line);
    if (header[0] != "d") throw DataError("header column 1 must be 'd', got '" + header[0] + "'");
    int q = 0, px = 0;
    for (std::size_t c = 1; c < header.size(); ++c) {
        if (px == 0 && detail::indexed_column(header[c], 'g') == q + 1) {
            ++q;
        } else if (detail::indexed_column(header[c], 'x') == px + 1) {
            ++px;
        } else {
            throw DataError("header column " + std::to_string(c + 1) + " '" + header[c] +
                            "' is out of order (expected d, g1..gq, x1..xp)");
        }
    }
    if (q == 0) throw DataError("header has no g columns");
    if (px == 0) throw DataError("header has no x columns");

    std::vector<int> d;
    std::vector<double> vals;
    long row = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        ++row;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size())
            throw DataError("row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                            " fields, got " + std::to_string(cells.size()));
        for (std::size_t c = 0; c < cells.size(); ++c) {
            double v = 0.0;
            const auto& s = cells[c];
            const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
                throw DataError("row " + std::to_string(row) + ", column " + header[c] + ": '" + s +
                                "' is not a finite number");
            if (c == 0) {
                if (v != 0.0 && v != 1.0)
                    throw DataError("row " + std::to_string(row) + ", column d: disease indicator must be 0 or 1, got " + s);
                d.push_back(static_cast<int>(v));
            } else {
                vals.push_back(v);
            }
        }
    }
    const auto n = static_cast<Eigen::Index>(d.size());
    if (n == 0) throw DataError("no data rows");
    VectorXi dv(n);
    MatrixXd g(n, q), x(n, px);
    for (Eigen::Index i = 0; i < n; ++i) {
        dv[i] = d[i];
        for (int k = 0; k < q; ++k) g(i, k) = vals[i * (q + px) + k];
        for (int l = 0; l < px; ++l) x(i, l) = vals[i * (q + px) + q + l];
    }
    return CaseControlData(std::move(dv), std::move(g), std::move(x));
}

inline CaseControlData load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    return read_csv(in);
}

// Shortest round-trip representation of every value.
inline void write_csv(std::ostream& out, const CaseControlData& data) {
    out << "d";
    for (Eigen::Index k = 0; k < data.q(); ++k) out << ",g" << k + 1;
    for (Eigen::Index l = 0; l < data.px(); ++l) out << ",x" << l + 1;
    out << "\n";
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        out << data.d()[i];
        for (Eigen::Index k = 0; k < data.q(); ++k) out << ',' << detail::format_double(data.g()(i, k));
        for (Eigen::Index l = 0; l < data.px(); ++l) out << ',' << detail::format_double(data.x()(i, l));
        out << "\n";
    }
}

inline void write_csv(const std::string& path, const CaseControlData& data) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    write_csv(out, data);
}

// --------------------------------------------------------------------- JSON

inline json to_json(const PrevalenceSpec& p) {
    json j;
    j["mode"] = p.is_rare() ? "rare" : "known";
    if (!p.is_rare()) j["pi1"] = p.pi1();
    return j;
}

inline json named(const VectorXd& v, const std::vector<std::string>& names) {
    json j = json::object();
    for (Eigen::Index k = 0; k < v.size(); ++k) j[names[k]] = v[k];
    return j;
}

inline json to_json(const FitResult& r, const std::vector<std::string>& names, std::optional<std::uint64_t> seed) {
    json j;
    j["method"] = to_string(r.method);
    j["omega_hat"] = named(r.omega_hat.flat(), names);
    j["se"] = named(r.se, names);
    json ci = json::object();
    for (std::size_t k = 0; k < names.size(); ++k) ci[names[k]] = {r.ci_lo[k], r.ci_hi[k]};
    j["ci"] = ci;
    j["ci_type"] = r.percentile_ci ? "percentile" : "wald";
    json cov = json::array();
    for (Eigen::Index a = 0; a < r.cov.rows(); ++a)
        for (Eigen::Index b = 0; b < r.cov.cols(); ++b) cov.push_back(r.cov(a, b));
    j["cov"] = cov;
    j["cov_source"] = to_string(r.cov_source);
    j["converged"] = r.converged;
    j["iterations"] = r.iterations;
    j["score_norm"] = r.final_score_norm;
    j["B"] = r.bootstrap_B ? json(*r.bootstrap_B) : json(nullptr);
    j["bootstrap_dropped"] = r.bootstrap_dropped;
    j["ridge_applied"] = r.ridge_applied;
    j["seed"] = r.bootstrap_B && seed ? json(*seed) : json(nullptr);
    return j;
}

inline json fit_report_json(const MultiFit& fit, const RiskSpec& spec, const PrevalenceSpec& prev,
                            const CaseControlData& data, int B, std::uint64_t seed) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["command"] = "fit";
    j["prevalence"] = to_json(prev);
    j["n0"] = data.n0();
    j["n1"] = data.n1();
    j["parameter_names"] = spec.parameter_names();
    j["B"] = B;
    j["seed"] = seed;
    json results = json::array();
    for (const auto& f : fit.fits) results.push_back(to_json(f, spec.parameter_names(), seed));
    j["results"] = results;
    return j;
}

inline json to_json(const Scenario& sc) {
    json j;
    j["name"] = sc.name;
    j["snp_mafs"] = sc.snp_mafs;
    j["corr_base"] = sc.corr_base;
    json extra = json::array();
    for (const auto& g : sc.g_extra)
        extra.push_back({{"kind", "gamma"}, {"shape", g.shape}, {"scale", g.scale}, {"standardize", g.standardize}});
    j["g_extra"] = extra;
    json xs = json::array();
    for (const auto& x : sc.x_spec) {
        if (x.kind == XColumn::Kind::Binary)
            xs.push_back({{"kind", "binary"}, {"freq", x.freq}});
        else
            xs.push_back({{"kind", "normal"}, {"mean", x.mean}, {"sd", x.sd}});
    }
    j["x_spec"] = xs;
    j["beta_true"] = std::vector<double>(sc.beta_true.data(), sc.beta_true.data() + sc.beta_true.size());
    j["alpha0"] = sc.alpha0 ? json(*sc.alpha0) : json(nullptr);
    j["target_pi1"] = sc.target_pi1;
    j["dependence"] = sc.dependence ? json{{"snp", sc.dependence->snp + 1}, {"alpha", sc.dependence->alpha}}
                                    : json(nullptr);
    return j;
}

// A scenario config is a JSON object. "preset" names a starting point; every
// other key overrides the matching field.
inline Scenario scenario_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("scenario config must be a JSON object");
    static const std::set<std::string> known{"preset", "name", "snp_mafs", "corr_base", "g_extra", "x_spec",
                                             "beta_true", "alpha0", "target_pi1", "dependence"};
    for (const auto& [k, v] : j.items())
        if (!known.count(k)) throw ConfigError("unknown scenario key '" + k + "'");
    try {
        Scenario sc;
        if (j.contains("preset")) {
            sc = preset(j["preset"].get<std::string>());
            // a preset intercept only survives when the model is unchanged
            for (const auto& [k, v] : j.items())
                if (k != "preset" && k != "name") sc.alpha0.reset();
        }
        if (j.contains("name")) sc.name = j["name"].get<std::string>();
        if (sc.name.empty()) sc.name = "custom";
        if (j.contains("snp_mafs")) sc.snp_mafs = j["snp_mafs"].get<std::vector<double>>();
        if (j.contains("corr_base")) sc.corr_base = j["corr_base"].get<double>();
        if (j.contains("g_extra")) {
            sc.g_extra.clear();
            for (const auto& e : j["g_extra"]) {
                if (e.value("kind", "gamma") != "gamma") throw ConfigError("g_extra kind must be 'gamma'");
                sc.g_extra.push_back({e.value("shape", 20.0), e.value("scale", 20.0), e.value("standardize", true)});
            }
        }
        if (j.contains("x_spec")) {
            sc.x_spec.clear();
            for (const auto& e : j["x_spec"]) {
                const auto kind = e.at("kind").get<std::string>();
                XColumn x;
                if (kind == "binary") {
                    x.freq = e.value("freq", 0.5);
                } else if (kind == "normal") {
                    x.kind = XColumn::Kind::Normal;
                    x.mean = e.value("mean", 0.0);
                    x.sd = e.value("sd", 1.0);
                } else {
                    throw ConfigError("x_spec kind must be 'binary' or 'normal', got '" + kind + "'");
                }
                sc.x_spec.push_back(x);
            }
        }
        if (j.contains("beta_true")) {
            const auto b = j["beta_true"].get<std::vector<double>>();
            sc.beta_true = Eigen::Map<const VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
        }
        if (j.contains("target_pi1")) sc.target_pi1 = j["target_pi1"].get<double>();
        if (j.contains("alpha0") && !j["alpha0"].is_null()) sc.alpha0 = j["alpha0"].get<double>();
        if (j.contains("dependence")) {
            if (j["dependence"].is_null()) {
                sc.dependence.reset();
            } else {
                const auto& dj = j["dependence"];
                sc.dependence = Dependence{dj.at("snp").get<int>() - 1, dj.value("alpha", 0.032)};
            }
        }
        sc.validate();
        return sc;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed scenario config: ") + e.what());
    }
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario config '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("scenario config '" + path + "' is not valid JSON: " + e.what());
    }
    return scenario_from_json(j);
}

inline json to_json(const ReplicationReport& rep) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["command"] = "replicate";
    j["scenario"] = to_json(rep.scenario);
    json cfg;
    json methods = json::array();
    for (Method m : rep.config.methods) methods.push_back(to_string(m));
    cfg["methods"] = methods;
    cfg["R"] = rep.config.R;
    cfg["n0"] = rep.config.n0;
    cfg["n1"] = rep.config.n1;
    cfg["B"] = rep.config.B;
    cfg["seed"] = rep.config.seed;
    cfg["prevalence"] = to_json(rep.config.prevalence);
    cfg["lambda_source"] = rep.config.lambda_source == LambdaSource::Bootstrap ? "bootstrap" : "asymptotic";
    j["config"] = cfg;
    j["requested"] = rep.requested;
    j["completed"] = rep.completed;
    j["failures"] = rep.failures;
    json ms = json::array();
    for (const auto& s : rep.methods) {
        json params = json::array();
        for (const auto& p : s.params)
            params.push_back({{"name", p.name},
                              {"truth", p.truth},
                              {"mean", p.mean},
                              {"bias", p.bias},
                              {"coverage", p.coverage},
                              {"mse", p.mse},
                              {"mse_eff", p.mse_eff},
                              {"mean_se", p.mean_se},
                              {"emp_sd", p.emp_sd}});
        ms.push_back({{"method", to_string(s.method)}, {"parameters", params}});
    }
    j["methods"] = ms;
    return j;
}

// One row per (replication, method): all Omega coordinates.
inline void write_estimates_csv(std::ostream& out, const ReplicationReport& rep) {
    const auto names = rep.scenario.spec().parameter_names();
    out << "replication,method";
    for (const auto& n : names) out << ',' << n;
    out << "\n";
    for (Eigen::Index r = 0; r < rep.completed; ++r)
        for (const auto& s : rep.methods) {
            out << r << ',' << to_string(s.method);
            for (Eigen::Index k = 0; k < s.estimates.cols(); ++k) out << ',' << detail::format_double(s.estimates(r, k));
            out << "\n";
        }
}

inline json to_json(const ScreenReport& rep) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["command"] = "diagnose";
    j["n_controls"] = rep.n_controls;
    json tested = json::array(), skipped = json::array();
    for (int l : rep.binary_x) tested.push_back("x" + std::to_string(l + 1));
    for (int l : rep.skipped_x) skipped.push_back("x" + std::to_string(l + 1));
    j["tested_x"] = tested;
    j["skipped_x"] = skipped;
    json tests = json::array();
    for (const auto& t : rep.tests)
        tests.push_back({{"g", "g" + std::to_string(t.g_col + 1)},
                         {"x", "x" + std::to_string(t.x_col + 1)},
                         {"test", t.test},
                         {"statistic", t.statistic},
                         {"df", t.df},
                         {"p", t.p},
                         {"q", t.q},
                         {"merged", t.merged}});
    j["tests"] = tests;
    return j;
}

}  // namespace ccge
