#pragma once

// Result summarization: quantiles, success-rate-at-level tables, and the
// convergence-trace CSV format.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "margin/attack.hpp"
#include "margin/errors.hpp"

namespace margin {

// Linear-interpolation quantile (the "type 7" scheme most stats packages
// default to): h = q * (n - 1), interpolate between the surrounding order
// statistics. Input need not be sorted.
inline double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw InvalidInput("quantile: empty sample");
    if (!(q >= 0.0 && q <= 1.0)) throw InvalidInput("quantile: q outside [0, 1]");
    std::sort(values.begin(), values.end());
    double h = q * static_cast<double>(values.size() - 1);
    std::size_t lo = static_cast<std::size_t>(h);
    if (lo + 1 >= values.size()) return values.back();
    double frac = h - static_cast<double>(lo);
    return values[lo] + frac * (values[lo + 1] - values[lo]);
}

// One attack outcome as the tables see it: did it succeed, and at what margin.
struct MarginOutcome {
    bool success = false;
    double margin = 0.0;
};

// Percentage of runs that succeeded with margin <= level, one entry per
// level. Failed runs never count, whatever their margin.
inline std::vector<double> success_rate_table(const std::vector<MarginOutcome>& outcomes,
                                              const std::vector<double>& levels) {
    if (outcomes.empty()) throw InvalidInput("success_rate_table: no outcomes");
    std::vector<double> rates;
    rates.reserve(levels.size());
    for (double level : levels) {
        int hits = 0;
        for (const MarginOutcome& o : outcomes)
            if (o.success && o.margin <= level) ++hits;
        rates.push_back(100.0 * hits / static_cast<double>(outcomes.size()));
    }
    return rates;
}

// Rate rendered the way reports print it: one decimal place.
inline double round_rate(double pct) { return std::round(pct * 10.0) / 10.0; }

// ---- convergence traces ---------------------------------------------------
// CSV with header k,phase,c_value,distance; one row per recorded move, in
// trace order. Doubles are written with %.17g so the file round-trips
// bit-exactly.

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void export_convergence(const std::vector<MoveRecord>& trace, std::ostream& out) {
    out << "k,phase,c_value,distance\n";
    for (const MoveRecord& m : trace)
        out << m.k << ',' << phase_name(m.phase) << ',' << format_double(m.c_value) << ','
            << format_double(m.distance) << '\n';
}

inline void export_convergence(const std::vector<MoveRecord>& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("export_convergence: cannot open " + path);
    export_convergence(trace, out);
}

// Reads back only the columns the CSV stores; points and flags are not part
// of the interchange format.
inline std::vector<MoveRecord> parse_convergence_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line))
        throw FormatError("parse_convergence_csv: empty file");
    if (line != "k,phase,c_value,distance")
        throw FormatError("parse_convergence_csv: bad header: " + line);
    std::vector<MoveRecord> trace;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string k_s, phase_s, c_s, d_s;
        if (!std::getline(row, k_s, ',') || !std::getline(row, phase_s, ',') ||
            !std::getline(row, c_s, ',') || !std::getline(row, d_s))
            throw FormatError("parse_convergence_csv: malformed line " + std::to_string(line_no));
        MoveRecord m;
        try {
            m.k = std::stoi(k_s);
            m.c_value = std::stod(c_s);
            m.distance = std::stod(d_s);
        } catch (const std::exception&) {
            throw FormatError("parse_convergence_csv: bad number on line " + std::to_string(line_no));
        }
        if (phase_s == "restoration")
            m.phase = Phase::Restoration;
        else if (phase_s == "projection")
            m.phase = Phase::Projection;
        else if (phase_s == "final_tuning")
            m.phase = Phase::FinalTuning;
        else
            throw FormatError("parse_convergence_csv: unknown phase on line " +
                              std::to_string(line_no));
        trace.push_back(m);
    }
    return trace;
}

inline std::vector<MoveRecord> parse_convergence_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("parse_convergence_csv: cannot open " + path);
    return parse_convergence_csv(in);
}

} // namespace margin
