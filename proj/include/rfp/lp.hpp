#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace rfp::lp {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

// maximize c'x  s.t.  A_eq x = b_eq,  A_in x <= b_in,  lb <= x <= ub
struct StandardFormLP {
    Eigen::VectorXd objective;
    SparseMatrix eq_matrix;
    Eigen::VectorXd eq_rhs;
    SparseMatrix ineq_matrix;
    Eigen::VectorXd ineq_rhs;
    Eigen::VectorXd lower_bounds;
    Eigen::VectorXd upper_bounds;
    std::vector<std::string> variable_names;

    Eigen::Index num_variables() const { return objective.size(); }
    Eigen::Index num_equalities() const { return eq_matrix.rows(); }
    Eigen::Index num_inequalities() const { return ineq_matrix.rows(); }

    // Throws std::invalid_argument when dimensions or bounds are inconsistent.
    void validate() const;
};

enum class Status { optimal, infeasible, unbounded, numerical_failure };

const char* to_string(Status s);

struct LPSolution {
    Status status = Status::numerical_failure;
    Eigen::VectorXd primal;
    double objective_value = 0.0;
    double max_eq_residual = 0.0;
    double max_ineq_violation = 0.0;
    double solve_time = 0.0;  // seconds
    int iterations = 0;
};

struct SolverOptions {
    double tolerance = 1e-8;
    int max_iterations = 200;
    bool verbose = false;  // iteration log on stderr
};

// Seam for swapping the embedded solver with an external one.
class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string name() const = 0;
    virtual LPSolution solve(const StandardFormLP& lp, const SolverOptions& options) const = 0;
};

// Primal-dual interior point (Mehrotra predictor-corrector) on the sparse
// normal equations. Stateless; one instance may be shared between threads.
class InteriorPointBackend final : public Backend {
public:
    std::string name() const override { return "interior-point"; }
    LPSolution solve(const StandardFormLP& lp, const SolverOptions& options) const override;
};

const Backend& default_backend();

LPSolution solve_lp(const StandardFormLP& lp, double tolerance = 1e-8);

struct ResidualReport {
    double max_eq_residual = 0.0;
    double max_ineq_violation = 0.0;
    double max_bound_violation = 0.0;
};

// Recomputes residuals from the primal alone. Throws std::logic_error("not optimal")
// for non-optimal solutions.
ResidualReport validate_solution(const StandardFormLP& lp, const LPSolution& sol);

// Plain-text dump:
//   objective section, equality block, inequality block, bounds.
// Each block is "<name> rows cols nnz" followed by "i j v" triplet lines and the
// rhs values one per line. Infinite bounds are written as inf / -inf.
void write_triplets(const StandardFormLP& lp, std::ostream& out);
StandardFormLP read_triplets(std::istream& in);

} // namespace rfp::lp
