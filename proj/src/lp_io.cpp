#include "rfp/lp.hpp"

#include <cmath>
#include <istream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace rfp::lp {

namespace {

void write_value(std::ostream& out, double v) {
    if (std::isinf(v)) out << (v > 0 ? "inf" : "-inf");
    else out << v;
}

double read_value(std::istream& in) {
    std::string tok;
    if (!(in >> tok)) throw std::runtime_error("lp dump: unexpected end of input");
    if (tok == "inf" || tok == "+inf") return std::numeric_limits<double>::infinity();
    if (tok == "-inf") return -std::numeric_limits<double>::infinity();
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::runtime_error("lp dump: bad number '" + tok + "'");
    return v;
}

void expect(std::istream& in, const std::string& name) {
    std::string tok;
    if (!(in >> tok) || tok != name) throw std::runtime_error("lp dump: expected section '" + name + "'");
}

void write_block(std::ostream& out, const char* name, const SparseMatrix& A, const Eigen::VectorXd& rhs) {
    out << name << ' ' << A.rows() << ' ' << A.cols() << ' ' << A.nonZeros() << '\n';
    for (Eigen::Index k = 0; k < A.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(A, k); it; ++it) out << it.row() << ' ' << k << ' ' << it.value() << '\n';
    }
    for (Eigen::Index i = 0; i < rhs.size(); ++i) {
        write_value(out, rhs[i]);
        out << '\n';
    }
}

void read_block(std::istream& in, const char* name, Eigen::Index n, SparseMatrix& A, Eigen::VectorXd& rhs) {
    expect(in, name);
    Eigen::Index rows = 0, cols = 0, nnz = 0;
    if (!(in >> rows >> cols >> nnz) || rows < 0 || cols != n || nnz < 0)
        throw std::runtime_error(std::string("lp dump: bad header for ") + name);
    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(nnz));
    for (Eigen::Index k = 0; k < nnz; ++k) {
        Eigen::Index i = 0, j = 0;
        if (!(in >> i >> j)) throw std::runtime_error("lp dump: truncated triplets");
        const double v = read_value(in);
        if (i < 0 || i >= rows || j < 0 || j >= cols) throw std::runtime_error("lp dump: triplet out of range");
        trips.emplace_back(i, j, v);
    }
    A.resize(rows, cols);
    A.setFromTriplets(trips.begin(), trips.end());
    A.makeCompressed();
    rhs.resize(rows);
    for (Eigen::Index i = 0; i < rows; ++i) rhs[i] = read_value(in);
}

} // namespace

void write_triplets(const StandardFormLP& lp, std::ostream& out) {
    const auto old_prec = out.precision(std::numeric_limits<double>::max_digits10);
    const Eigen::Index n = lp.num_variables();
    out << "objective " << n << '\n';
    for (Eigen::Index j = 0; j < n; ++j) out << lp.objective[j] << '\n';
    write_block(out, "equalities", lp.eq_matrix, lp.eq_rhs);
    write_block(out, "inequalities", lp.ineq_matrix, lp.ineq_rhs);
    out << "bounds " << n << '\n';
    for (Eigen::Index j = 0; j < n; ++j) {
        write_value(out, lp.lower_bounds[j]);
        out << ' ';
        write_value(out, lp.upper_bounds[j]);
        if (static_cast<std::size_t>(j) < lp.variable_names.size()) out << ' ' << lp.variable_names[j];
        out << '\n';
    }
    out.precision(old_prec);
}

StandardFormLP read_triplets(std::istream& in) {
    StandardFormLP lp;
    expect(in, "objective");
    Eigen::Index n = 0;
    if (!(in >> n) || n < 0) throw std::runtime_error("lp dump: bad objective header");
    lp.objective.resize(n);
    for (Eigen::Index j = 0; j < n; ++j) lp.objective[j] = read_value(in);
    read_block(in, "equalities", n, lp.eq_matrix, lp.eq_rhs);
    read_block(in, "inequalities", n, lp.ineq_matrix, lp.ineq_rhs);
    expect(in, "bounds");
    Eigen::Index nb = 0;
    if (!(in >> nb) || nb != n) throw std::runtime_error("lp dump: bad bounds header");
    lp.lower_bounds.resize(n);
    lp.upper_bounds.resize(n);
    std::string line;
    std::getline(in, line);
    bool any_name = false;
    std::vector<std::string> names(static_cast<std::size_t>(n));
    for (Eigen::Index j = 0; j < n; ++j) {
        if (!std::getline(in, line)) throw std::runtime_error("lp dump: truncated bounds");
        std::istringstream ls(line);
        lp.lower_bounds[j] = read_value(ls);
        lp.upper_bounds[j] = read_value(ls);
        if (ls >> names[static_cast<std::size_t>(j)]) any_name = true;
    }
    if (any_name) lp.variable_names = std::move(names);
    return lp;
}

} // namespace rfp::lp
