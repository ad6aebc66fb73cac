#include "rfp/lp.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace rfp::lp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Internal problem: minimize c'x  s.t.  A x = b,  x_j >= 0 unless free_j,  x_j <= u_j (u_j may be +inf).
struct InternalLP {
    SparseMatrix A;
    Eigen::VectorXd b;
    Eigen::VectorXd c;
    Eigen::VectorXd u;
    std::vector<char> free;  // unrestricted columns (u must be +inf)
};

struct CoreResult {
    bool converged = false;
    bool diverged = false;
    int iterations = 0;
    Eigen::VectorXd x;
    Eigen::VectorXd y;
    double objective = 0.0;
};

// Regularized augmented system
//   [ -(D + rp I)  A' ] [dx]   [r1]
//   [      A      rd I ] [dy] = [r2]
// which is quasi-definite, so an LDL' factorization exists for any symmetric ordering.
// The pattern is fixed; each iteration rewrites the diagonal and refactorizes.
class AugmentedSystem {
public:
    AugmentedSystem(const SparseMatrix& A, double primal_reg, double dual_reg)
        : A_(A), n_(A.cols()), m_(A.rows()), primal_reg_(primal_reg), dual_reg_(dual_reg) {
        std::vector<Triplet> trips;
        trips.reserve(static_cast<std::size_t>(A.nonZeros() + n_ + m_));
        for (Eigen::Index j = 0; j < n_; ++j) trips.emplace_back(j, j, -1.0);
        for (Eigen::Index k = 0; k < A.outerSize(); ++k) {
            for (SparseMatrix::InnerIterator it(A, k); it; ++it) trips.emplace_back(n_ + it.row(), k, it.value());
        }
        for (Eigen::Index i = 0; i < m_; ++i) trips.emplace_back(n_ + i, n_ + i, dual_reg_);
        K_.resize(n_ + m_, n_ + m_);
        K_.setFromTriplets(trips.begin(), trips.end());
        K_.makeCompressed();
        // the diagonal is the first stored entry of each column of the lower triangle
        diag_.resize(static_cast<std::size_t>(n_ + m_));
        for (Eigen::Index j = 0; j < n_ + m_; ++j) diag_[static_cast<std::size_t>(j)] = K_.outerIndexPtr()[j];
        solver_.analyzePattern(K_);
    }

    // Raises the regularization until the factorization succeeds; refinement in solve()
    // recovers the unregularized direction.
    bool factorize(const Eigen::VectorXd& d) {
        d_ = d;
        double* values = K_.valuePtr();
        for (double scale = 1.0; scale <= 1e6; scale *= 100.0) {
            for (Eigen::Index j = 0; j < n_; ++j)
                values[diag_[static_cast<std::size_t>(j)]] = -(d[j] + scale * primal_reg_);
            for (Eigen::Index i = 0; i < m_; ++i) values[diag_[static_cast<std::size_t>(n_ + i)]] = scale * dual_reg_;
            solver_.factorize(K_);
            if (solver_.info() == Eigen::Success && solver_.vectorD().allFinite()) return true;
        }
        return false;
    }

    // Solves the unregularized system, using the regularized factorization with refinement.
    void solve(const Eigen::VectorXd& r1, const Eigen::VectorXd& r2, Eigen::VectorXd& dx, Eigen::VectorXd& dy) const {
        Eigen::VectorXd rhs(n_ + m_);
        rhs << r1, r2;
        Eigen::VectorXd sol = solver_.solve(rhs);
        const double scale = 1.0 + rhs.cwiseAbs().maxCoeff();
        for (int k = 0; k < 6; ++k) {
            const Eigen::VectorXd res = rhs - apply(sol);
            if (res.cwiseAbs().maxCoeff() <= 1e-15 * scale) break;
            sol += solver_.solve(res);
        }
        dx = sol.head(n_);
        dy = sol.tail(m_);
    }

private:
    Eigen::VectorXd apply(const Eigen::VectorXd& v) const {
        Eigen::VectorXd out(n_ + m_);
        const auto x = v.head(n_);
        const auto y = v.tail(m_);
        out.head(n_) = -d_.cwiseProduct(x) + A_.transpose() * y;
        out.tail(m_) = A_ * x;
        return out;
    }

    const SparseMatrix& A_;
    Eigen::Index n_, m_;
    double primal_reg_, dual_reg_;
    SparseMatrix K_;
    Eigen::VectorXd d_;
    std::vector<Eigen::Index> diag_;
    Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> solver_;
};

double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv, const Eigen::VectorXd& mask) {
    double alpha = kInf;
    for (Eigen::Index j = 0; j < v.size(); ++j) {
        if (mask[j] != 0.0 && dv[j] < 0.0) alpha = std::min(alpha, -v[j] / dv[j]);
    }
    return alpha;
}

double inf_norm(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

// Mehrotra predictor-corrector on an already scaled internal problem.
CoreResult interior_point(const InternalLP& p, double tol, int max_iterations, bool verbose = false) {
    const Eigen::Index m = p.A.rows();
    const Eigen::Index n = p.A.cols();
    CoreResult out;

    Eigen::VectorXd has_lb(n), has_ub(n), u(n);
    Eigen::Index n_lb = 0, n_ub = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
        const bool is_free = !p.free.empty() && p.free[static_cast<std::size_t>(j)];
        const bool bounded = std::isfinite(p.u[j]);
        has_lb[j] = is_free ? 0.0 : 1.0;
        has_ub[j] = bounded ? 1.0 : 0.0;
        u[j] = bounded ? p.u[j] : 0.0;
        n_lb += is_free ? 0 : 1;
        n_ub += bounded ? 1 : 0;
    }
    const double total_pairs = std::max<double>(1.0, static_cast<double>(n_lb + n_ub));

    AugmentedSystem kkt(p.A, 1e-10, 1e-10);

    // Starting point (Mehrotra's heuristic, adjusted for free columns and upper bounds).
    Eigen::VectorXd x(n), z(n), w = Eigen::VectorXd::Zero(n), v = Eigen::VectorXd::Zero(n), y(m);
    {
        if (!kkt.factorize(Eigen::VectorXd::Ones(n))) return out;
        Eigen::VectorXd tmp;
        kkt.solve(Eigen::VectorXd::Zero(n), p.b, x, y);  // min-norm solution of A x = b
        kkt.solve(p.c, Eigen::VectorXd::Zero(m), tmp, y);  // least-squares multipliers
        z = (p.c - p.A.transpose() * y).cwiseProduct(has_lb);
        double xmin = kInf, zmin = kInf;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (has_lb[j] == 0.0) continue;
            xmin = std::min(xmin, x[j]);
            zmin = std::min(zmin, z[j]);
        }
        const double dx = std::isfinite(xmin) ? std::max(-1.5 * xmin, 0.0) : 0.0;
        const double dz = std::isfinite(zmin) ? std::max(-1.5 * zmin, 0.0) : 0.0;
        double xz = 0.0, sx = 0.0, sz = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (has_lb[j] == 0.0) continue;
            x[j] += dx;
            z[j] += dz;
            xz += x[j] * z[j];
            sx += x[j];
            sz += z[j];
        }
        const double ax = (sz > 0 ? 0.5 * xz / sz : 0.0) + 1e-2;
        const double az = (sx > 0 ? 0.5 * xz / sx : 0.0) + 1e-2;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (has_lb[j] == 0.0) continue;
            x[j] += ax;
            z[j] += az;
            if (has_ub[j] == 0.0) continue;
            if (x[j] >= 0.9 * u[j]) x[j] = 0.5 * u[j];
            w[j] = u[j] - x[j];
            v[j] = z[j];
        }
    }

    const double bnorm = std::max(inf_norm(p.b), n_ub > 0 ? inf_norm(u) : 0.0);
    const double cnorm = inf_norm(p.c);
    const SparseMatrix At = p.A.transpose();

    Eigen::VectorXd d(n), rp(m), rd(n), ru(n);
    Eigen::VectorXd dx(n), dy(m), dz(n), dw(n), dv(n);

    // Newton direction for complementarity targets rxz (x.z) and rwv (w.v).
    auto solve_newton = [&](const Eigen::VectorXd& rxz, const Eigen::VectorXd& rwv) {
        Eigen::VectorXd r1 = rd;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (has_lb[j] != 0.0) r1[j] -= rxz[j] / x[j];
            if (has_ub[j] != 0.0) r1[j] += (rwv[j] - v[j] * ru[j]) / w[j];
        }
        kkt.solve(r1, rp, dx, dy);
        for (Eigen::Index j = 0; j < n; ++j) {
            dz[j] = has_lb[j] != 0.0 ? (rxz[j] - z[j] * dx[j]) / x[j] : 0.0;
            if (has_ub[j] != 0.0) {
                dw[j] = ru[j] - dx[j];
                dv[j] = (rwv[j] - v[j] * dw[j]) / w[j];
            } else {
                dw[j] = 0.0;
                dv[j] = 0.0;
            }
        }
    };

    auto step_lengths = [&](double eta) {
        const double ap = std::min(max_step(x, dx, has_lb), max_step(w, dw, has_ub));
        const double ad = std::min(max_step(z, dz, has_lb), max_step(v, dv, has_ub));
        return std::pair{std::min(1.0, eta * ap), std::min(1.0, eta * ad)};
    };

    auto complementarity = [&](const Eigen::VectorXd& xx, const Eigen::VectorXd& zz, const Eigen::VectorXd& ww,
                               const Eigen::VectorXd& vv) {
        return (xx.cwiseProduct(zz).dot(has_lb) + ww.cwiseProduct(vv).dot(has_ub)) / total_pairs;
    };

    for (int it = 0; it < max_iterations; ++it) {
        out.iterations = it;
        rp = p.b - p.A * x;
        rd = p.c - At * y - z + v;
        ru = (u - x - w).cwiseProduct(has_ub);
        const double mu = complementarity(x, z, w, v);

        const double pobj = p.c.dot(x);
        const double dobj = p.b.dot(y) - u.dot(v);
        const double pres = std::max(inf_norm(rp), inf_norm(ru)) / (1.0 + bnorm);
        const double dres = inf_norm(rd) / (1.0 + cnorm);
        const double gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj));
        if (verbose)
            std::fprintf(stderr, "ipm %3d  pres %.2e  dres %.2e  gap %.2e  mu %.2e  |x| %.2e\n", it, pres, dres, gap, mu,
                         inf_norm(x));
        if (pres <= tol && dres <= tol && gap <= tol) {
            out.converged = true;
            break;
        }
        if (!std::isfinite(mu) || inf_norm(x) > 1e12 * (1.0 + bnorm) ||
            std::max(inf_norm(y), inf_norm(z)) > 1e12 * (1.0 + cnorm)) {
            out.diverged = true;
            break;
        }

        for (Eigen::Index j = 0; j < n; ++j) {
            d[j] = 0.0;
            if (has_lb[j] != 0.0) d[j] += z[j] / x[j];
            if (has_ub[j] != 0.0) d[j] += v[j] / w[j];
        }
        if (!kkt.factorize(d)) {
            if (verbose) std::fprintf(stderr, "factorization failed (max d %.2e)\n", d.maxCoeff());
            break;
        }

        // Predictor.
        Eigen::VectorXd rxz = -x.cwiseProduct(z);
        Eigen::VectorXd rwv = -w.cwiseProduct(v);
        solve_newton(rxz, rwv);
        if (!dx.allFinite() || !dy.allFinite()) {
            if (verbose) std::fprintf(stderr, "non-finite predictor\n");
            break;
        }
        auto [ap, ad] = step_lengths(1.0);
        const double mu_aff = complementarity(x + ap * dx, z + ad * dz, w + ap * dw, v + ad * dv);
        const double sigma = mu > 0.0 ? std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3) : 0.0;

        // Corrector.
        rxz = (Eigen::VectorXd::Constant(n, sigma * mu) - x.cwiseProduct(z) - dx.cwiseProduct(dz)).cwiseProduct(has_lb);
        rwv = (Eigen::VectorXd::Constant(n, sigma * mu) - w.cwiseProduct(v) - dw.cwiseProduct(dv)).cwiseProduct(has_ub);
        solve_newton(rxz, rwv);
        if (!dx.allFinite() || !dy.allFinite()) break;
        std::tie(ap, ad) = step_lengths(0.995);
        if (verbose) {
            std::fprintf(stderr, "      ap %.3e ad %.3e sigma %.2e linres %.2e\n", ap, ad, sigma,
                         inf_norm(p.A * dx - rp) / (1.0 + inf_norm(rp)));
        }

        x += ap * dx;
        w += ap * dw;
        y += ad * dy;
        z += ad * dz;
        v += ad * dv;
        // Keep strictly interior.
        for (Eigen::Index j = 0; j < n; ++j) {
            if (has_lb[j] != 0.0) {
                x[j] = std::max(x[j], 1e-300);
                z[j] = std::max(z[j], 1e-300);
            }
            if (has_ub[j] != 0.0) {
                w[j] = std::max(w[j], 1e-300);
                v[j] = std::max(v[j], 1e-300);
            }
        }
    }
    out.x = x;
    out.y = y;
    out.objective = p.c.dot(x);
    return out;
}

// Geometric (Ruiz) equilibration; returns row and column scale factors.
void equilibrate(SparseMatrix& A, Eigen::VectorXd& row_scale, Eigen::VectorXd& col_scale) {
    row_scale = Eigen::VectorXd::Ones(A.rows());
    col_scale = Eigen::VectorXd::Ones(A.cols());
    for (int pass = 0; pass < 12; ++pass) {
        Eigen::VectorXd rmax = Eigen::VectorXd::Zero(A.rows());
        Eigen::VectorXd cmax = Eigen::VectorXd::Zero(A.cols());
        for (Eigen::Index k = 0; k < A.outerSize(); ++k) {
            for (SparseMatrix::InnerIterator it(A, k); it; ++it) {
                const double a = std::abs(it.value());
                rmax[it.row()] = std::max(rmax[it.row()], a);
                cmax[k] = std::max(cmax[k], a);
            }
        }
        Eigen::VectorXd r = rmax.unaryExpr([](double a) { return a > 0 ? 1.0 / std::sqrt(a) : 1.0; });
        Eigen::VectorXd c = cmax.unaryExpr([](double a) { return a > 0 ? 1.0 / std::sqrt(a) : 1.0; });
        for (Eigen::Index k = 0; k < A.outerSize(); ++k) {
            for (SparseMatrix::InnerIterator it(A, k); it; ++it) it.valueRef() *= r[it.row()] * c[k];
        }
        row_scale = row_scale.cwiseProduct(r);
        col_scale = col_scale.cwiseProduct(c);
        if ((rmax.array() - 1.0).abs().maxCoeff() < 1e-3 && (cmax.array() - 1.0).abs().maxCoeff() < 1e-3) break;
    }
}

enum class VarKind { fixed, lower, upper_only, free };

struct Reduction {
    std::vector<VarKind> kind;
    std::vector<Eigen::Index> column;  // first internal column, -1 for fixed
    Eigen::VectorXd offset;            // x = offset + sign * xbar
    std::vector<Eigen::Index> kept_eq_rows;
    Eigen::Index n_internal = 0;
    double objective_constant = 0.0;
    bool trivially_infeasible = false;
};

// Converts the user LP to internal form (minimization, x >= 0, optional upper bounds).
InternalLP reduce(const StandardFormLP& lp, Reduction& red) {
    const Eigen::Index n = lp.num_variables();
    const Eigen::Index me = lp.num_equalities();
    const Eigen::Index mi = lp.num_inequalities();
    red.kind.resize(static_cast<std::size_t>(n));
    red.column.assign(static_cast<std::size_t>(n), -1);
    red.offset = Eigen::VectorXd::Zero(n);

    Eigen::Index next = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double l = lp.lower_bounds[j], u = lp.upper_bounds[j];
        VarKind k;
        if (std::isfinite(l) && std::isfinite(u) && u - l <= 1e-12 * (1.0 + std::abs(l))) {
            k = VarKind::fixed;
            red.offset[j] = l;
        } else if (std::isfinite(l)) {
            k = VarKind::lower;
            red.offset[j] = l;
        } else if (std::isfinite(u)) {
            k = VarKind::upper_only;
            red.offset[j] = u;
        } else {
            k = VarKind::free;
        }
        red.kind[static_cast<std::size_t>(j)] = k;
        if (k != VarKind::fixed) {
            red.column[static_cast<std::size_t>(j)] = next;
            ++next;
        }
    }
    const Eigen::Index n_struct = next;

    // Equality rows that lose all entries are dropped (or flagged infeasible).
    Eigen::VectorXd eq_rhs = lp.eq_rhs - lp.eq_matrix * red.offset;
    Eigen::VectorXd in_rhs = lp.ineq_rhs - lp.ineq_matrix * red.offset;
    std::vector<int> eq_count(static_cast<std::size_t>(me), 0);
    const SparseMatrix eq_cols = lp.eq_matrix;  // column-major
    for (Eigen::Index k = 0; k < eq_cols.outerSize(); ++k) {
        if (red.kind[static_cast<std::size_t>(k)] == VarKind::fixed) continue;
        for (SparseMatrix::InnerIterator it(eq_cols, k); it; ++it) {
            if (it.value() != 0.0) ++eq_count[static_cast<std::size_t>(it.row())];
        }
    }
    std::vector<Eigen::Index> eq_row_map(static_cast<std::size_t>(me), -1);
    for (Eigen::Index i = 0; i < me; ++i) {
        if (eq_count[static_cast<std::size_t>(i)] > 0) {
            eq_row_map[static_cast<std::size_t>(i)] = static_cast<Eigen::Index>(red.kept_eq_rows.size());
            red.kept_eq_rows.push_back(i);
        } else if (std::abs(eq_rhs[i]) > 1e-9 * (1.0 + std::abs(lp.eq_rhs[i]))) {
            red.trivially_infeasible = true;
        }
    }
    const Eigen::Index me_kept = static_cast<Eigen::Index>(red.kept_eq_rows.size());
    const Eigen::Index m = me_kept + mi;
    const Eigen::Index n_int = n_struct + mi;
    red.n_internal = n_int;

    InternalLP p;
    p.b.resize(m);
    for (Eigen::Index r = 0; r < me_kept; ++r) p.b[r] = eq_rhs[red.kept_eq_rows[static_cast<std::size_t>(r)]];
    p.b.tail(mi) = in_rhs;
    p.c = Eigen::VectorXd::Zero(n_int);
    p.u = Eigen::VectorXd::Constant(n_int, kInf);
    p.free.assign(static_cast<std::size_t>(n_int), 0);

    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(lp.eq_matrix.nonZeros() + lp.ineq_matrix.nonZeros()) * 2 + mi);
    auto emit = [&](Eigen::Index row, Eigen::Index j, double a) {
        const auto kind = red.kind[static_cast<std::size_t>(j)];
        const Eigen::Index col = red.column[static_cast<std::size_t>(j)];
        switch (kind) {
        case VarKind::fixed: break;
        case VarKind::lower: trips.emplace_back(row, col, a); break;
        case VarKind::upper_only: trips.emplace_back(row, col, -a); break;
        case VarKind::free: trips.emplace_back(row, col, a); break;
        }
    };
    for (Eigen::Index k = 0; k < lp.eq_matrix.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(lp.eq_matrix, k); it; ++it) {
            const Eigen::Index r = eq_row_map[static_cast<std::size_t>(it.row())];
            if (r >= 0) emit(r, k, it.value());
        }
    }
    for (Eigen::Index k = 0; k < lp.ineq_matrix.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(lp.ineq_matrix, k); it; ++it) emit(me_kept + it.row(), k, it.value());
    }
    for (Eigen::Index i = 0; i < mi; ++i) trips.emplace_back(me_kept + i, n_struct + i, 1.0);
    p.A.resize(m, n_int);
    p.A.setFromTriplets(trips.begin(), trips.end());
    p.A.makeCompressed();

    for (Eigen::Index j = 0; j < n; ++j) {
        const double cj = -lp.objective[j];  // minimize -c'x
        const Eigen::Index col = red.column[static_cast<std::size_t>(j)];
        red.objective_constant += lp.objective[j] * red.offset[j];
        switch (red.kind[static_cast<std::size_t>(j)]) {
        case VarKind::fixed: break;
        case VarKind::lower:
            p.c[col] = cj;
            if (std::isfinite(lp.upper_bounds[j])) p.u[col] = lp.upper_bounds[j] - lp.lower_bounds[j];
            break;
        case VarKind::upper_only: p.c[col] = -cj; break;
        case VarKind::free:
            p.c[col] = cj;
            p.free[static_cast<std::size_t>(col)] = 1;
            break;
        }
    }
    return p;
}

Eigen::VectorXd expand(const Reduction& red, const Eigen::VectorXd& xbar) {
    Eigen::VectorXd x = red.offset;
    for (std::size_t j = 0; j < red.kind.size(); ++j) {
        const Eigen::Index col = red.column[j];
        const auto jj = static_cast<Eigen::Index>(j);
        switch (red.kind[j]) {
        case VarKind::fixed: break;
        case VarKind::lower: x[jj] += xbar[col]; break;
        case VarKind::upper_only: x[jj] -= xbar[col]; break;
        case VarKind::free: x[jj] += xbar[col]; break;
        }
    }
    return x;
}

struct Scaled {
    InternalLP lp;
    Eigen::VectorXd row_scale, col_scale;
    double b_scale = 1.0, c_scale = 1.0;
};

Scaled scale(const InternalLP& p) {
    Scaled s;
    s.lp = p;
    equilibrate(s.lp.A, s.row_scale, s.col_scale);
    s.lp.b = p.b.cwiseProduct(s.row_scale);
    s.lp.c = p.c.cwiseProduct(s.col_scale);
    s.lp.u = p.u.cwiseQuotient(s.col_scale);
    double bmax = inf_norm(s.lp.b);
    for (Eigen::Index j = 0; j < s.lp.u.size(); ++j) {
        if (std::isfinite(s.lp.u[j])) bmax = std::max(bmax, s.lp.u[j]);
    }
    s.b_scale = std::max(1.0, bmax);
    s.c_scale = std::max(1.0, inf_norm(s.lp.c));
    s.lp.b /= s.b_scale;
    s.lp.u /= s.b_scale;
    s.lp.c /= s.c_scale;
    return s;
}

Eigen::VectorXd unscale_x(const Scaled& s, const Eigen::VectorXd& x) {
    return x.cwiseProduct(s.col_scale) * s.b_scale;
}

// Phase 1: minimize the l1 norm of artificial residuals. Returns true if feasible.
bool phase_one_feasible(const Scaled& s, double tol, int max_iterations, Eigen::VectorXd* x_out) {
    const Eigen::Index m = s.lp.A.rows();
    const Eigen::Index n = s.lp.A.cols();
    InternalLP q;
    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(s.lp.A.nonZeros()) + 2 * m);
    for (Eigen::Index k = 0; k < s.lp.A.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(s.lp.A, k); it; ++it) trips.emplace_back(it.row(), k, it.value());
    }
    for (Eigen::Index i = 0; i < m; ++i) {
        trips.emplace_back(i, n + 2 * i, 1.0);
        trips.emplace_back(i, n + 2 * i + 1, -1.0);
    }
    q.A.resize(m, n + 2 * m);
    q.A.setFromTriplets(trips.begin(), trips.end());
    q.A.makeCompressed();
    q.b = s.lp.b;
    q.c = Eigen::VectorXd::Zero(n + 2 * m);
    q.c.tail(2 * m).setOnes();
    q.u = Eigen::VectorXd::Constant(n + 2 * m, kInf);
    q.u.head(n) = s.lp.u;
    q.free.assign(static_cast<std::size_t>(n + 2 * m), 0);
    if (!s.lp.free.empty()) std::copy(s.lp.free.begin(), s.lp.free.end(), q.free.begin());
    const CoreResult r = interior_point(q, std::min(tol, 1e-9), max_iterations);
    if (x_out && r.x.size() > 0) *x_out = r.x.head(n);
    if (r.x.size() == 0) return true;  // undecided; treat as feasible
    return r.objective <= 1e-6 * (1.0 + inf_norm(s.lp.b));
}

} // namespace

const char* to_string(Status s) {
    switch (s) {
    case Status::optimal: return "optimal";
    case Status::infeasible: return "infeasible";
    case Status::unbounded: return "unbounded";
    case Status::numerical_failure: return "numerical_failure";
    }
    return "unknown";
}

void StandardFormLP::validate() const {
    const Eigen::Index n = objective.size();
    if (eq_matrix.cols() != n || ineq_matrix.cols() != n)
        throw std::invalid_argument("constraint matrix column count differs from objective length");
    if (eq_rhs.size() != eq_matrix.rows()) throw std::invalid_argument("eq_rhs length differs from equality rows");
    if (ineq_rhs.size() != ineq_matrix.rows())
        throw std::invalid_argument("ineq_rhs length differs from inequality rows");
    if (lower_bounds.size() != n || upper_bounds.size() != n)
        throw std::invalid_argument("bound vectors must match the variable count");
    for (Eigen::Index j = 0; j < n; ++j) {
        if (!(lower_bounds[j] <= upper_bounds[j])) throw std::invalid_argument("lower bound exceeds upper bound");
        if (std::isnan(objective[j])) throw std::invalid_argument("objective contains NaN");
    }
    if (!variable_names.empty() && static_cast<Eigen::Index>(variable_names.size()) != n)
        throw std::invalid_argument("variable_names length differs from variable count");
}

LPSolution InteriorPointBackend::solve(const StandardFormLP& lp, const SolverOptions& options) const {
    if (!(options.tolerance > 0.0)) throw std::invalid_argument("tolerance must be positive");
    lp.validate();
    const auto start = std::chrono::steady_clock::now();
    LPSolution sol;

    auto finish = [&](LPSolution& s) -> LPSolution& {
        s.solve_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return s;
    };
    auto fill_residuals = [&](LPSolution& s) {
        s.max_eq_residual = lp.num_equalities() ? inf_norm(lp.eq_matrix * s.primal - lp.eq_rhs) : 0.0;
        s.max_ineq_violation =
            lp.num_inequalities() ? std::max(0.0, (lp.ineq_matrix * s.primal - lp.ineq_rhs).maxCoeff()) : 0.0;
        s.objective_value = lp.objective.dot(s.primal);
    };

    Reduction red;
    const InternalLP internal = reduce(lp, red);
    if (red.trivially_infeasible) {
        sol.status = Status::infeasible;
        sol.primal = red.offset;
        return finish(sol);
    }
    if (internal.A.cols() == 0) {
        sol.primal = red.offset;
        fill_residuals(sol);
        sol.status = sol.max_eq_residual <= 1e-9 && sol.max_ineq_violation <= 1e-9 ? Status::optimal
                                                                                     : Status::infeasible;
        return finish(sol);
    }

    const Scaled s = scale(internal);
    CoreResult r = interior_point(s.lp, options.tolerance, options.max_iterations, options.verbose);
    sol.iterations = r.iterations;
    if (r.converged) {
        sol.primal = expand(red, unscale_x(s, r.x));
        fill_residuals(sol);
        const double xmag = inf_norm(sol.primal);
        const double eq_tol = 1e-6 * (1.0 + std::max(inf_norm(lp.eq_rhs), xmag));
        const double in_tol = 1e-6 * (1.0 + std::max(inf_norm(lp.ineq_rhs), xmag));
        sol.status = (sol.max_eq_residual <= eq_tol && sol.max_ineq_violation <= in_tol) ? Status::optimal
                                                                                       : Status::numerical_failure;
        return finish(sol);
    }

    // Classify the failure.
    Eigen::VectorXd x_feas;
    if (!phase_one_feasible(s, options.tolerance, options.max_iterations, &x_feas)) {
        sol.status = Status::infeasible;
        sol.primal = expand(red, unscale_x(s, x_feas));
        fill_residuals(sol);
        return finish(sol);
    }
    // Feasible: box the problem; an optimum pressed against the box means unbounded.
    // Free columns are shifted so that x = x' - box with 0 <= x' <= 2 box.
    const double box = 1e6 * (1.0 + (x_feas.size() ? inf_norm(x_feas) : 1.0));
    Scaled boxed = s;
    Eigen::VectorXd shift = Eigen::VectorXd::Zero(s.lp.u.size());
    for (Eigen::Index j = 0; j < boxed.lp.u.size(); ++j) {
        if (boxed.lp.free[static_cast<std::size_t>(j)]) {
            shift[j] = box;
            boxed.lp.u[j] = 2.0 * box;
            boxed.lp.free[static_cast<std::size_t>(j)] = 0;
        } else {
            boxed.lp.u[j] = std::min(boxed.lp.u[j], box);
        }
    }
    boxed.lp.b += s.lp.A * shift;
    CoreResult rb = interior_point(boxed.lp, options.tolerance, options.max_iterations);
    sol.iterations += rb.iterations;
    if (rb.converged) {
        const Eigen::VectorXd xb = rb.x - shift;
        sol.primal = expand(red, unscale_x(s, xb));
        fill_residuals(sol);
        bool at_box = false;
        for (Eigen::Index j = 0; j < xb.size(); ++j) {
            if (!std::isfinite(s.lp.u[j]) && std::abs(xb[j]) > 0.5 * box) at_box = true;
        }
        sol.status = at_box ? Status::unbounded : Status::optimal;
        return finish(sol);
    }
    sol.status = Status::numerical_failure;
    sol.primal = expand(red, unscale_x(s, r.x.size() ? r.x : Eigen::VectorXd::Zero(internal.A.cols())));
    fill_residuals(sol);
    return finish(sol);
}

const Backend& default_backend() {
    static const InteriorPointBackend backend;
    return backend;
}

LPSolution solve_lp(const StandardFormLP& lp, double tolerance) {
    SolverOptions opts;
    opts.tolerance = tolerance;
    return default_backend().solve(lp, opts);
}

ResidualReport validate_solution(const StandardFormLP& lp, const LPSolution& sol) {
    if (sol.status != Status::optimal) throw std::logic_error("not optimal");
    ResidualReport rep;
    const Eigen::VectorXd& x = sol.primal;
    if (lp.num_equalities() > 0) rep.max_eq_residual = (lp.eq_matrix * x - lp.eq_rhs).cwiseAbs().maxCoeff();
    if (lp.num_inequalities() > 0)
        rep.max_ineq_violation = std::max(0.0, (lp.ineq_matrix * x - lp.ineq_rhs).maxCoeff());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        rep.max_bound_violation = std::max(rep.max_bound_violation, lp.lower_bounds[j] - x[j]);
        rep.max_bound_violation = std::max(rep.max_bound_violation, x[j] - lp.upper_bounds[j]);
    }
    return rep;
}

} // namespace rfp::lp
