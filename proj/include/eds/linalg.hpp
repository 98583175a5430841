/**
 * @file  linalg.hpp
 * @brief Numeric rank via SVD and symbolic linear solving with zero-test
 *        pivoting, shared by the distribution and projection machinery.
 */
#ifndef EDS_LINALG_HPP
#define EDS_LINALG_HPP

#include "eds/expr.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace eds {

/// Numeric rank: number of singular values above rel_threshold times the
/// largest singular value (rank 0 for a zero or empty matrix).
int svd_rank(const Eigen::MatrixXd& m, double rel_threshold = 1e-9);

/// Matrix of symbolic entries, row-major.
struct ExprMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<Expr> entries;

    static ExprMatrix zero(int rows, int cols);
    static ExprMatrix identity(int n);
    Expr& at(int r, int c) { return entries[static_cast<std::size_t>(r * cols + c)]; }
    const Expr& at(int r, int c) const {
        return entries[static_cast<std::size_t>(r * cols + c)];
    }
};

/// Evaluates a symbolic matrix at a point; propagates SingularEvaluation.
Eigen::MatrixXd eval_matrix(const ExprMatrix& m, const EvalPoint& p);

/// Draws points from the policy's deterministic stream, keeping those where
/// every guard expression evaluates finitely (denominators above the policy
/// floor) and the policy exclusions hold; stops after `count` points or the
/// policy draw cap.
std::vector<EvalPoint> sample_admissible(const SamplingPolicy& policy,
                                         const std::vector<Expr>& guards, int count);

enum class SolveStatus { Solved, Inconsistent, Indeterminate };

/// Result of a symbolic linear solve; `solution` is cols(a) x cols(b),
/// meaningful only when status == Solved.
struct SymbolicSolve {
    SolveStatus status = SolveStatus::Indeterminate;
    ExprMatrix solution;
    bool fully_determined = false; ///< no free unknowns were pinned
    std::string detail;
};

/// Solves a x = b for each column of b by Gaussian elimination over symbolic
/// entries; pivots are chosen by the zero-test oracle under `policy` (literal
/// nonzero constants preferred).  Free columns are reported as Indeterminate
/// unless the corresponding solution entries are forced; Unknown verdicts
/// during pivoting give Indeterminate, never a silently wrong solution.
SymbolicSolve solve_linear_symbolic(const ExprMatrix& a, const ExprMatrix& b,
                                    const SamplingPolicy& policy);

/// Basis of the right kernel of `a`, one row vector per free column of the
/// reduced echelon form.  pivot_cols/free_cols partition the column indices.
struct SymbolicKernel {
    SolveStatus status = SolveStatus::Indeterminate;
    std::vector<std::vector<Expr>> basis;
    std::vector<int> pivot_cols;
    std::vector<int> free_cols;
    std::string detail;
};

/// Kernel by the same oracle-pivoted elimination as solve_linear_symbolic;
/// Unknown pivot verdicts yield Indeterminate rather than a wrong basis.
SymbolicKernel symbolic_kernel(const ExprMatrix& a, const SamplingPolicy& policy);

} // namespace eds

#endif // EDS_LINALG_HPP
