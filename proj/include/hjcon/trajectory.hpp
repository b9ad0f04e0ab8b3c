#ifndef HJCON_TRAJECTORY_HPP
#define HJCON_TRAJECTORY_HPP

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "hjcon/grid.hpp"
#include "hjcon/linalg.hpp"

namespace hjcon {

struct TrajectorySample {
    double t = 0.0;
    Vec x;                      // peak / dominant trait
    double I = 0.0;             // resource (Lagrange multiplier)
    double rho = 0.0;           // I / psi(x)
    double max_u_residual = 0.0; // |max_x u|
    double R_residual = 0.0;     // |R(x, I)|
};

struct TrajectoryRecord {
    std::vector<TrajectorySample> samples;
    std::vector<GridField> snapshots;
    int projection_events = 0;

    double final_time() const { return samples.empty() ? 0.0 : samples.back().t; }
};

// Deterministic shortest-roundtrip double formatting ("%.17g" prints a value
// that parses back bit-identically).
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_csv: cannot open " + path);
    for (size_t i = 0; i < header.size(); ++i)
        out << (i ? "," : "") << header[i];
    out << "\n";
    for (const auto& row : rows) {
        for (size_t i = 0; i < row.size(); ++i)
            out << (i ? "," : "") << format_double(row[i]);
        out << "\n";
    }
    if (!out) throw std::runtime_error("write_csv: write failed for " + path);
}

// columns: t, x_1..x_d, I, rho, constraint_residual, R_residual
inline void write_trajectory_csv(const std::string& path, const TrajectoryRecord& rec, int d) {
    std::vector<std::string> header{"t"};
    for (int a = 0; a < d; ++a) header.push_back("x_" + std::to_string(a + 1));
    header.insert(header.end(), {"I", "rho", "constraint_residual", "R_residual"});
    std::vector<std::vector<double>> rows;
    rows.reserve(rec.samples.size());
    for (const auto& s : rec.samples) {
        std::vector<double> row{s.t};
        for (int a = 0; a < d; ++a) row.push_back(s.x[a]);
        row.insert(row.end(), {s.I, s.rho, s.max_u_residual, s.R_residual});
        rows.push_back(std::move(row));
    }
    write_csv(path, header, rows);
}

} // namespace hjcon

#endif // HJCON_TRAJECTORY_HPP
