/**
 * @file  linalg.cpp
 */
#include "eds/linalg.hpp"

#include <cmath>

namespace eds {

int svd_rank(const Eigen::MatrixXd& m, double rel_threshold) {
    if (m.rows() == 0 || m.cols() == 0) {
        return 0;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv(0) <= 0.0) {
        return 0;
    }
    const double cut = rel_threshold * sv(0);
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > cut) {
            ++rank;
        }
    }
    return rank;
}

ExprMatrix ExprMatrix::zero(int rows, int cols) {
    ExprMatrix m;
    m.rows = rows;
    m.cols = cols;
    m.entries.assign(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), Expr());
    return m;
}

ExprMatrix ExprMatrix::identity(int n) {
    ExprMatrix m = zero(n, n);
    for (int i = 0; i < n; ++i) {
        m.at(i, i) = Expr::constant(1);
    }
    return m;
}

Eigen::MatrixXd eval_matrix(const ExprMatrix& m, const EvalPoint& p) {
    Eigen::MatrixXd out(m.rows, m.cols);
    for (int r = 0; r < m.rows; ++r) {
        for (int c = 0; c < m.cols; ++c) {
            out(r, c) = eval_at(m.at(r, c), p);
        }
    }
    return out;
}

std::vector<EvalPoint> sample_admissible(const SamplingPolicy& policy,
                                         const std::vector<Expr>& guards, int count) {
    std::vector<EvalPoint> out;
    SamplingPolicy probe = policy;
    probe.samples = policy.max_draws; // enumerate the full admissible stream lazily
    // Walk the policy's deterministic stream and keep guard-finite points.
    for (const EvalPoint& pt : probe.sample_points()) {
        if (static_cast<int>(out.size()) >= count) {
            break;
        }
        bool ok = true;
        for (const Expr& g : guards) {
            try {
                double magnitude = 0.0;
                const double v = eval_with_magnitude(g, pt, magnitude);
                if (!std::isfinite(v)) {
                    ok = false;
                    break;
                }
            } catch (const SingularEvaluation&) {
                ok = false;
                break;
            }
        }
        if (ok) {
            out.push_back(pt);
        }
    }
    return out;
}

namespace {

/// Pivot preference: literal rational constants make exact pivots and need no
/// sampling; otherwise fall back on the zero-test oracle.
enum class PivotClass { LiteralNonZero, OracleNonZero, Zero, Unknown };

PivotClass classify_pivot(const Expr& e, const SamplingPolicy& policy) {
    if (e.is_literal_zero()) {
        return PivotClass::Zero;
    }
    if (e.constant_value().has_value()) {
        return PivotClass::LiteralNonZero;
    }
    const ZeroVerdict v = is_zero(e, policy);
    switch (v.verdict) {
    case Verdict::Zero: return PivotClass::Zero;
    case Verdict::NonZero: return PivotClass::OracleNonZero;
    case Verdict::Unknown: return PivotClass::Unknown;
    }
    return PivotClass::Unknown;
}

} // namespace

SymbolicSolve solve_linear_symbolic(const ExprMatrix& a_in, const ExprMatrix& b_in,
                                    const SamplingPolicy& policy) {
    SymbolicSolve result;
    ExprMatrix a = a_in;
    ExprMatrix b = b_in;
    const int m = a.rows;
    const int n = a.cols;
    const int k = b.cols;

    std::vector<int> pivot_col_of_row(static_cast<std::size_t>(m), -1);
    std::vector<int> pivot_row_of_col(static_cast<std::size_t>(n), -1);
    int next_row = 0;

    for (int col = 0; col < n && next_row < m; ++col) {
        // Choose the pivot row: prefer literal constants.
        int pivot = -1;
        bool saw_unknown = false;
        for (int r = next_row; r < m; ++r) {
            const PivotClass pc = classify_pivot(a.at(r, col), policy);
            if (pc == PivotClass::LiteralNonZero) {
                pivot = r;
                break;
            }
            if (pc == PivotClass::OracleNonZero && pivot < 0) {
                pivot = r;
            }
            if (pc == PivotClass::Unknown) {
                saw_unknown = true;
            }
        }
        if (pivot < 0) {
            if (saw_unknown) {
                result.status = SolveStatus::Indeterminate;
                result.detail = "pivot column " + std::to_string(col) +
                                " has entries with unknown zero-verdicts";
                return result;
            }
            continue; // structurally zero column: free unknown
        }
        if (pivot != next_row) {
            for (int c = 0; c < n; ++c) {
                std::swap(a.at(pivot, c), a.at(next_row, c));
            }
            for (int c = 0; c < k; ++c) {
                std::swap(b.at(pivot, c), b.at(next_row, c));
            }
        }
        const Expr inv = a.at(next_row, col).pow(-1);
        for (int c = 0; c < n; ++c) {
            a.at(next_row, c) = a.at(next_row, c) * inv;
        }
        for (int c = 0; c < k; ++c) {
            b.at(next_row, c) = b.at(next_row, c) * inv;
        }
        for (int r = 0; r < m; ++r) {
            if (r == next_row || a.at(r, col).is_literal_zero()) {
                continue;
            }
            const Expr f = a.at(r, col);
            for (int c = 0; c < n; ++c) {
                a.at(r, c) = a.at(r, c) - f * a.at(next_row, c);
            }
            for (int c = 0; c < k; ++c) {
                b.at(r, c) = b.at(r, c) - f * b.at(next_row, c);
            }
        }
        pivot_col_of_row[static_cast<std::size_t>(next_row)] = col;
        pivot_row_of_col[static_cast<std::size_t>(col)] = next_row;
        ++next_row;
    }

    // Consistency: eliminated rows with zero coefficients must have zero rhs.
    for (int r = next_row; r < m; ++r) {
        for (int c = 0; c < k; ++c) {
            const Expr& rhs = b.at(r, c);
            if (rhs.is_literal_zero()) {
                continue;
            }
            const ZeroVerdict v = is_zero(rhs, policy);
            if (v.is_nonzero()) {
                result.status = SolveStatus::Inconsistent;
                result.detail = "residual row " + std::to_string(r) +
                                " has nonzero right-hand side " + rhs.print();
                return result;
            }
            if (v.is_unknown()) {
                result.status = SolveStatus::Indeterminate;
                result.detail = "residual right-hand side has unknown zero-verdict";
                return result;
            }
        }
    }

    // Free unknowns are set to zero; flag them so callers relying on a unique
    // solution can reject.
    result.solution = ExprMatrix::zero(n, k);
    bool has_free = false;
    for (int c = 0; c < n; ++c) {
        const int pr = pivot_row_of_col[static_cast<std::size_t>(c)];
        if (pr < 0) {
            has_free = true;
            continue;
        }
        for (int j = 0; j < k; ++j) {
            // Row-reduced echelon: subtract contributions of later pivots is
            // already done by full elimination, so the row directly gives the
            // unknown (free unknowns pinned at zero contribute nothing).
            result.solution.at(c, j) = b.at(pr, j);
        }
    }
    result.status = SolveStatus::Solved;
    result.fully_determined = !has_free;
    if (has_free) {
        result.detail = "underdetermined: free unknowns pinned at zero";
    }
    return result;
}

SymbolicKernel symbolic_kernel(const ExprMatrix& a_in, const SamplingPolicy& policy) {
    SymbolicKernel result;
    ExprMatrix a = a_in;
    const int m = a.rows;
    const int n = a.cols;

    std::vector<int> pivot_row_of_col(static_cast<std::size_t>(n), -1);
    std::vector<bool> row_used(static_cast<std::size_t>(m), false);
    int rank = 0;
    while (rank < m) {
        // Pivot-column selection prefers the leftmost column holding a
        // literally nonzero entry over any column that merely has an
        // oracle-certified nonzero entry.  Literal pivots keep the reduced
        // rows -- and hence the kernel basis -- free of spurious
        // denominators (e.g. they select the momentum column over the
        // coordinate column in a row like  -p dp + dr).
        int lit_col = -1, lit_row = -1;
        int orc_col = -1, orc_row = -1;
        int unknown_col = -1;
        for (int col = 0; col < n && lit_col < 0; ++col) {
            if (pivot_row_of_col[static_cast<std::size_t>(col)] >= 0) {
                continue;
            }
            for (int r = 0; r < m; ++r) {
                if (row_used[static_cast<std::size_t>(r)]) {
                    continue;
                }
                const PivotClass pc = classify_pivot(a.at(r, col), policy);
                if (pc == PivotClass::LiteralNonZero) {
                    lit_col = col;
                    lit_row = r;
                    break;
                }
                if (pc == PivotClass::OracleNonZero && orc_col < 0) {
                    orc_col = col;
                    orc_row = r;
                }
                if (pc == PivotClass::Unknown && unknown_col < 0) {
                    unknown_col = col;
                }
            }
        }
        const int col = lit_col >= 0 ? lit_col : orc_col;
        const int row = lit_col >= 0 ? lit_row : orc_row;
        if (col < 0) {
            if (unknown_col >= 0) {
                result.status = SolveStatus::Indeterminate;
                result.detail = "column " + std::to_string(unknown_col) +
                                " has entries with unknown zero-verdicts";
                return result;
            }
            break; // every remaining column is zero on the remaining rows
        }
        const Expr inv = a.at(row, col).pow(-1);
        for (int c = 0; c < n; ++c) {
            a.at(row, c) = a.at(row, c) * inv;
        }
        for (int r = 0; r < m; ++r) {
            if (r == row || a.at(r, col).is_literal_zero()) {
                continue;
            }
            const Expr f = a.at(r, col);
            for (int c = 0; c < n; ++c) {
                a.at(r, c) = a.at(r, c) - f * a.at(row, c);
            }
        }
        pivot_row_of_col[static_cast<std::size_t>(col)] = row;
        row_used[static_cast<std::size_t>(row)] = true;
        ++rank;
    }

    for (int c = 0; c < n; ++c) {
        if (pivot_row_of_col[static_cast<std::size_t>(c)] >= 0) {
            result.pivot_cols.push_back(c);
        } else {
            result.free_cols.push_back(c);
        }
    }
    for (const int fc : result.free_cols) {
        std::vector<Expr> v(static_cast<std::size_t>(n));
        v[static_cast<std::size_t>(fc)] = Expr::constant(1);
        for (const int pc : result.pivot_cols) {
            const int pr = pivot_row_of_col[static_cast<std::size_t>(pc)];
            v[static_cast<std::size_t>(pc)] = -a.at(pr, fc);
        }
        result.basis.push_back(std::move(v));
    }
    result.status = SolveStatus::Solved;
    return result;
}

} // namespace eds
