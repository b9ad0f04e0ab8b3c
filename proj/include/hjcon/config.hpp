#ifndef HJCON_CONFIG_HPP
#define HJCON_CONFIG_HPP

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "hjcon/fixed_point.hpp"
#include "hjcon/hj_limit.hpp"
#include "hjcon/initial_data.hpp"
#include "hjcon/parabolic.hpp"
#include "hjcon/rate_model.hpp"
#include "hjcon/sweep.hpp"

namespace hjcon {

using nlohmann::json;

struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw config_error("bad JSON in " + path + ": " + e.what());
    }
    return j;
}

inline Vec vec_from_json(const json& j) {
    if (!j.is_array()) throw config_error("expected a numeric array");
    Vec v(j.size());
    for (size_t i = 0; i < j.size(); ++i) v[i] = j[i].get<double>();
    return v;
}

inline Mat mat_from_json(const json& j) {
    if (!j.is_array() || j.empty()) throw config_error("expected a matrix (array of rows)");
    const size_t rows = j.size(), cols = j[0].size();
    Mat m(rows, cols);
    for (size_t i = 0; i < rows; ++i) {
        if (j[i].size() != cols) throw config_error("ragged matrix rows");
        for (size_t k = 0; k < cols; ++k) m(i, k) = j[i][k].get<double>();
    }
    return m;
}

inline PsiSpec psi_from_json(const json& j) {
    if (j.is_null()) return PsiSpec{};
    const std::string kind = j.value("kind", "const");
    if (kind == "const") return PsiSpec::constant(j.value("value", 1.0));
    if (kind == "poly") {
        std::vector<double> c = j.at("coeffs").get<std::vector<double>>();
        return PsiSpec::poly(std::move(c));
    }
    throw config_error("psi.kind must be \"const\" or \"poly\"");
}

inline RateModel model_from_json(const json& j) {
    try {
        return RateModel(j.at("a").get<double>(), mat_from_json(j.at("B")),
                         vec_from_json(j.at("theta")), j.at("c").get<double>(),
                         j.contains("psi") ? psi_from_json(j["psi"]) : PsiSpec{},
                         j.value("kappa", 0.0));
    } catch (const json::exception& e) {
        throw config_error(std::string("model: ") + e.what());
    }
}

inline InitialData init_from_json(const json& j, const RateModel& model) {
    try {
        double r = -1.0;
        if (j.contains("r") && j["r"].is_number()) r = j["r"].get<double>();
        return make_initial_data(model, vec_from_json(j.at("m0")), mat_from_json(j.at("A0")),
                                 j.value("offset", 0.0), r);
    } catch (const json::exception& e) {
        throw config_error(std::string("init: ") + e.what());
    }
}

inline Box box_from_json(const json& j) {
    return Box(vec_from_json(j.at("lo")), vec_from_json(j.at("hi")));
}

inline Hamiltonian ham_from_json(const json& j, const char* key, Hamiltonian fallback) {
    if (!j.contains(key)) return fallback;
    const std::string s = j[key].get<std::string>();
    if (s == "llf") return Hamiltonian::LocalLaxFriedrichs;
    if (s == "godunov") return Hamiltonian::Godunov;
    if (s == "central") return Hamiltonian::Central;
    if (s == "blended") return Hamiltonian::Blended;
    throw config_error("hamiltonian must be \"llf\", \"godunov\", \"central\" or \"blended\"");
}

// ---------------------------------------------------------------------------
// report serialization

inline json to_json(const Vec& v) {
    json a = json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

inline json hypothesis_report_to_json(const HypothesisReport& rep) {
    json j;
    j["admissible"] = rep.admissible();
    j["constants"] = {{"K0_bar", rep.K0_bar},   {"K1_bar", rep.K1_bar},
                      {"K1_under", rep.K1_under}, {"K2_bar", rep.K2_bar},
                      {"K2_under", rep.K2_under}, {"K3", rep.K3},
                      {"I_M", rep.I_M},          {"psi_min", rep.psi_min}};
    j["box"] = {{"lo", to_json(rep.box.lo)}, {"hi", to_json(rep.box.hi)}};
    j["I_range"] = {rep.I_lo, rep.I_hi};
    json entries = json::array();
    for (const auto& e : rep.entries) {
        json je = {{"name", e.name}, {"value", e.value}, {"satisfied", e.satisfied},
                   {"note", e.note}};
        if (e.worst_x.size() > 0) {
            je["worst_x"] = to_json(e.worst_x);
            je["worst_I"] = e.worst_I;
        }
        entries.push_back(je);
    }
    j["checks"] = entries;
    return j;
}

inline json sandwich_to_json(const SandwichDiagnostics& d) {
    return {{"value_ok", d.value_ok},
            {"hess_upper_ok", d.hess_upper_ok},
            {"hess_lower_ok_tight", d.hess_lower_ok_tight},
            {"hess_lower_ok_loose", d.hess_lower_ok_loose},
            {"min_value_margin_up", d.min_value_margin_up},
            {"min_value_margin_lo", d.min_value_margin_lo},
            {"min_hess_margin_up", d.min_hess_margin_up},
            {"min_hess_margin_lo_tight", d.min_hess_margin_lo_tight},
            {"min_hess_margin_lo_loose", d.min_hess_margin_lo_loose},
            {"nodes_checked", d.nodes_checked}};
}

inline json sweep_report_to_json(const SweepReport& rep) {
    json j;
    j["eps_ladder"] = rep.eps_ladder;
    j["t_star"] = rep.t_star;
    j["complete"] = rep.complete();
    j["oracle_reference"] = rep.oracle_reference;
    j["ref_I_agreement"] = rep.ref_I_agreement;
    j["ref_x_agreement"] = rep.ref_x_agreement;
    if (!rep.failures.empty()) {
        json f = json::array();
        for (const auto& [eps, why] : rep.failures) f.push_back({{"eps", eps}, {"reason", why}});
        j["failures"] = f;
    }
    json entries = json::array();
    for (const auto& e : rep.entries)
        entries.push_back({{"eps", e.eps},
                           {"t_star", e.t_star},
                           {"t_actual", e.t_actual},
                           {"I_err_signed", e.I_err_signed},
                           {"I_err_abs", e.I_err_abs},
                           {"x_err_abs", e.x_err_abs},
                           {"u_err_sup", e.u_err_sup},
                           {"u1_scale", e.u1_scale}});
    j["entries"] = entries;
    json fits = json::array();
    for (const auto& f : rep.fits)
        fits.push_back({{"t_star", f.t_star},
                        {"slope_I", f.slope_I},
                        {"slope_x", f.slope_x},
                        {"I1_first3", f.I1_first3},
                        {"I1_last3", f.I1_last3},
                        {"x1_first3", f.x1_first3},
                        {"x1_last3", f.x1_last3},
                        {"u_monotone", f.u_monotone}});
    j["fits"] = fits;
    json moms = json::array();
    for (const auto& m : rep.moments)
        moms.push_back({{"eps", m.eps},
                        {"t", m.t},
                        {"m0", m.m0},
                        {"mean", to_json(m.mean)},
                        {"second_central", m.second_central},
                        {"m0_vs_rho", m.m0_vs_rho},
                        {"mean_vs_xbar", m.mean_vs_xbar}});
    j["moments"] = moms;
    json runs = json::array();
    for (const auto& r : rep.runs)
        runs.push_back({{"eps", r.eps},
                        {"primary", r.primary == ParabolicForm::Density ? "density" : "hopf-cole"},
                        {"h", r.h},
                        {"dt", r.dt},
                        {"I_min", r.I_min},
                        {"I_max", r.I_max_run},
                        {"fitted_C", r.fitted_C},
                        {"mass_leak_events", r.mass_leak_events},
                        {"cross_check_max_dI", r.cross_check_max_dI},
                        {"sandwich", sandwich_to_json(r.sandwich)}});
    j["runs"] = runs;
    return j;
}

inline void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << "\n";
}

inline void write_snapshot_with_sidecar(const std::string& stem, const GridField& g,
                                        const std::string& field_name) {
    write_snapshot(stem + ".bin", g);
    json side;
    side["field"] = field_name;
    side["d"] = g.dim();
    side["n"] = g.shape();
    side["lo"] = to_json(g.box().lo);
    side["hi"] = to_json(g.box().hi);
    side["t"] = g.t;
    side["layout"] = "row-major float64 little-endian; header i64 d, i64 n[d], "
                     "f64 lo[d], f64 hi[d], f64 t";
    write_json_file(stem + ".json", side);
}

// eps-run series CSV: t, I_eps, x_1..x_d, mass, psi_mass
inline void write_eps_run_csv(const std::string& path, const EpsRunResult& run, int d) {
    std::vector<std::string> header{"t", "I_eps"};
    for (int a = 0; a < d; ++a) header.push_back("x_" + std::to_string(a + 1));
    header.push_back("mass");
    header.push_back("psi_mass");
    std::vector<std::vector<double>> rows;
    for (const auto& s : run.series) {
        std::vector<double> row{s.t, s.I};
        for (int a = 0; a < d; ++a) row.push_back(s.x_peak[a]);
        row.push_back(s.mass);
        row.push_back(s.psi_mass);
        rows.push_back(std::move(row));
    }
    write_csv(path, header, rows);
}

// two-column gnuplot data
inline void write_plot_data(const std::string& path, const std::vector<double>& x,
                            const std::vector<double>& y) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (size_t i = 0; i < x.size() && i < y.size(); ++i)
        out << format_double(x[i]) << " " << format_double(y[i]) << "\n";
}

} // namespace hjcon

#endif // HJCON_CONFIG_HPP
