#pragma once

#include <cmath>
#include <string>

#include "shotnoise/cli/artifacts.hpp"
#include "shotnoise/errors.hpp"

namespace shotnoise::cli {

struct CompareOptions {
    std::string a_column; // empty: first column after the key
    std::string b_column; // empty: same name as the A column
};

namespace detail {

// Standard error column paired with a value column, if the artifact has one.
inline std::string stderr_column(const Table& t, const std::string& value) {
    for (const std::string& c : {value + "_stderr", std::string("mc_stderr"), std::string("stderr")}) {
        if (!t.has_column(c)) continue;
        if (c == "mc_stderr" && value != "mc") continue;
        if (c == "stderr" && value != "psi_hat" && value != "distance") continue;
        return c;
    }
    return "";
}

} // namespace detail

// Joins two artifacts row by row on their first (grid) column and emits
// key, a, b, ratio = b / a and z = (b - a) / sqrt(se_a^2 + se_b^2). The z
// column is left out when neither artifact carries a standard error.
inline Table compare_tables(const Table& a, const Table& b, const CompareOptions& opt = {}) {
    if (a.rows.empty()) throw DomainError("compare: first artifact has no rows");
    if (b.rows.empty()) throw DomainError("compare: second artifact has no rows");
    if (a.columns.size() < 2 || b.columns.size() < 2) throw DomainError("compare: artifacts need a value column");
    if (a.columns[0] != b.columns[0])
        throw DomainError("compare: grid keys differ ('" + a.columns[0] + "' vs '" + b.columns[0] + "')");
    if (a.rows.size() != b.rows.size())
        throw DomainError("compare: grid sizes differ (" + std::to_string(a.rows.size()) + " vs " +
                          std::to_string(b.rows.size()) + ")");
    const std::string ca = opt.a_column.empty() ? a.columns[1] : opt.a_column;
    const std::string cb = opt.b_column.empty() ? ca : opt.b_column;
    const std::size_t ia = a.column(ca), ib = b.column(cb);
    const std::string sa = detail::stderr_column(a, ca), sb = detail::stderr_column(b, cb);
    const bool with_z = !sa.empty() || !sb.empty();
    Table out{{a.columns[0], "a", "b", "ratio"}, {}};
    if (with_z) out.columns.push_back("z");
    for (std::size_t r = 0; r < a.rows.size(); ++r) {
        const double key = a.rows[r][0];
        if (key != b.rows[r][0])
            throw DomainError("compare: grid mismatch in row " + std::to_string(r + 1) + " (" + format_number(key) +
                              " vs " + format_number(b.rows[r][0]) + ")");
        const double va = a.rows[r][ia], vb = b.rows[r][ib];
        const double ratio = va == vb ? 1.0 : vb / va;
        const double se =
            std::hypot(sa.empty() ? 0.0 : a.rows[r][a.column(sa)], sb.empty() ? 0.0 : b.rows[r][b.column(sb)]);
        const double z = !with_z || va == vb ? 0.0 : (vb - va) / se;
        if (!std::isfinite(ratio) || !std::isfinite(z))
            throw NumericError("compare: ratio or z-score not finite in row " + std::to_string(r + 1), va);
        out.rows.push_back({key, va, vb, ratio});
        if (with_z) out.rows.back().push_back(z);
    }
    return out;
}

} // namespace shotnoise::cli
