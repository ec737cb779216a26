#include "cmdpm/lp.hpp"

#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace cmdpm {
namespace {

// Shortest representation that fits the 12-character numeric field.
std::string mps_number(double v) {
    if (v == 0.0) return "0";
    char buf[48];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    if (res.ec == std::errc() && res.ptr - buf <= 12) return std::string(buf, res.ptr);
    for (int precision = 12; precision > 0; --precision) {
        std::snprintf(buf, sizeof buf, "%.*g", precision, v);
        if (std::strlen(buf) <= 12) return buf;
    }
    return buf;
}

std::string indexed_name(char prefix, Eigen::Index i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%c%07lld", prefix, static_cast<long long>(i + 1));
    return buf;
}

std::string pad(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

void rtrim_line(std::ostringstream& out, std::string line) {
    line.erase(line.find_last_not_of(' ') + 1);
    out << line << '\n';
}

// Fields: 2-3, 5-12, 15-22, 25-36.
void entry(std::ostringstream& out, const std::string& code, const std::string& f2, const std::string& f3,
           const std::string& value) {
    std::string line = " " + pad(code, 2) + " " + pad(f2, 8) + "  " + pad(f3, 8) + "  " + value;
    rtrim_line(out, std::move(line));
}

} // namespace

std::string to_mps(const LpProblem& problem, const std::string& name) {
    problem.check();
    const Eigen::Index n = problem.num_variables();
    const Eigen::Index m_eq = problem.num_equalities();
    const Eigen::Index m_in = problem.num_inequalities();
    if (n > 9'999'999 || m_eq + m_in > 9'999'999) throw InvalidArgument("problem too large for fixed MPS names");

    std::ostringstream out;
    out << "* objective negated: the original problem maximizes\n";
    out << "NAME          " << name << '\n';
    out << "ROWS\n";
    out << " N  OBJ\n";
    for (Eigen::Index i = 0; i < m_eq; ++i) out << " E  " << indexed_name('R', i) << '\n';
    for (Eigen::Index i = 0; i < m_in; ++i) out << " L  " << indexed_name('R', m_eq + i) << '\n';

    out << "COLUMNS\n";
    for (Eigen::Index j = 0; j < n; ++j) {
        const std::string col = indexed_name('C', j);
        bool written = false;
        if (problem.objective[j] != 0.0) {
            entry(out, "", col, "OBJ", mps_number(-problem.objective[j]));
            written = true;
        }
        for (LpProblem::SparseMatrix::InnerIterator it(problem.eq_matrix, j); it; ++it) {
            entry(out, "", col, indexed_name('R', it.row()), mps_number(it.value()));
            written = true;
        }
        for (LpProblem::SparseMatrix::InnerIterator it(problem.in_matrix, j); it; ++it) {
            entry(out, "", col, indexed_name('R', m_eq + it.row()), mps_number(it.value()));
            written = true;
        }
        if (!written) entry(out, "", col, "OBJ", "0");
    }

    out << "RHS\n";
    for (Eigen::Index i = 0; i < m_eq; ++i)
        if (problem.eq_rhs[i] != 0.0) entry(out, "", "RHS", indexed_name('R', i), mps_number(problem.eq_rhs[i]));
    for (Eigen::Index i = 0; i < m_in; ++i)
        if (problem.in_rhs[i] != 0.0)
            entry(out, "", "RHS", indexed_name('R', m_eq + i), mps_number(problem.in_rhs[i]));

    std::ostringstream bounds;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double l = problem.lower[j], u = problem.upper[j];
        const std::string col = indexed_name('C', j);
        const bool lfin = std::isfinite(l), ufin = std::isfinite(u);
        if (lfin && ufin && l == u) {
            entry(bounds, "FX", "BND", col, mps_number(l));
        } else if (!lfin && !ufin) {
            entry(bounds, "FR", "BND", col, "");
        } else if (!lfin) {
            entry(bounds, "MI", "BND", col, "");
            entry(bounds, "UP", "BND", col, mps_number(u));
        } else {
            if (l != 0.0 || (ufin && u < 0.0)) entry(bounds, "LO", "BND", col, mps_number(l));
            if (ufin) entry(bounds, "UP", "BND", col, mps_number(u));
        }
    }
    const std::string b = bounds.str();
    if (!b.empty()) out << "BOUNDS\n" << b;
    out << "ENDATA\n";
    return out.str();
}

void export_mps(const LpProblem& problem, const std::string& path) {
    const std::string text = to_mps(problem);
    std::ofstream file(path, std::ios::binary);
    if (!file) throw Error("cannot open '" + path + "' for writing");
    file << text;
    if (!file.flush()) throw Error("failed writing '" + path + "'");
}

} // namespace cmdpm
