/**
 * @file  darboux.hpp
 * @brief Darboux integrability decision, Darboux projection, lifted commuting
 *        frames, derived tangential algebras, structure constants, tangential
 *        symmetries, reciprocal Lie algebras, fingerprinting, and
 *        normalization to constant structure constants.
 */
#ifndef EDS_DARBOUX_HPP
#define EDS_DARBOUX_HPP

#include "eds/decomposable.hpp"

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace eds {

/// Which characteristic system an operation refers to.
enum class Side { F, G };
const char* side_name(Side s);

/// User-supplied first integrals: for_f holds invariants of F (functions
/// annihilated by every generator of F), for_g the invariants of G.
struct InvariantSet {
    std::vector<Expr> for_f;
    std::vector<Expr> for_g;
};

struct DarbouxReport {
    CheckStatus status = CheckStatus::Indeterminate;
    int n_f = 0; ///< number of supplied F-invariants
    int n_g = 0; ///< number of supplied G-invariants
    bool rank_condition = false; ///< n_f = rank G, n_g = rank F, and the
                                 ///< bracket-closure counts agree
    bool transversality = false; ///< combined invariant differentials have
                                 ///< full rank on V at the sample points
    std::vector<ConditionReport> conditions;
    std::vector<ConditionReport> failures() const;
};

/// Decides Darboux integrability for a decomposable system with the supplied
/// invariants: verifies each invariant, checks functional independence per
/// family, compares counts against the characteristic ranks (and against
/// count_invariants), and tests transversality.
DarbouxReport check_darboux(const DecomposableSystem& sys, const InvariantSet& inv);

/// The projection pi = pi1 x pi2 onto B = B1 x B2 whose target coordinates
/// are the invariants: B1 carries the G-invariants J (moved by F), B2 the
/// F-invariants I (moved by G).  Z = ker(d pi) is the fiber tangent bundle.
struct DarbouxProjection {
    DecomposableSystem sys;
    InvariantSet invariants;
    ChartPtr b1;   ///< chart of the first factor (one coordinate per J)
    ChartPtr b2;   ///< chart of the second factor (one coordinate per I)
    ChartPtr base; ///< product chart: b1 coordinates then b2 coordinates
    Submersion pi; ///< source -> base, components (J^1..; I^1..)
    Distribution z; ///< vertical distribution ker(d pi), rank s
    std::vector<int> fiber_coords; ///< source coordinate indices that
                                   ///< coordinatize the fibers (the free
                                   ///< columns of the invariant Jacobian)
    int fiber_dim() const { return static_cast<int>(fiber_coords.size()); }
};

/// Builds and validates the Darboux projection; throws std::runtime_error on
/// a failed precondition (check_darboux not ok) or transversality failure.
DarbouxProjection build_projection(const DecomposableSystem& sys, const InvariantSet& inv);

/// Commuting frames on the two base factors.
struct BaseFrames {
    std::vector<VectorField> on_b1;
    std::vector<VectorField> on_b2;
};

/// The default choice: coordinate frames d/db1_i and d/db2_j.
BaseFrames coordinate_base_frames(const DarbouxProjection& proj);

/// Lifts of commuting base frames: f[i] is the unique field in F with
/// d pi(f[i]) = base_f[i], and likewise for g; all cross-brackets [f_i, g_j]
/// vanish (verified at construction).
struct LiftedFrame {
    std::vector<VectorField> base_f;
    std::vector<VectorField> base_g;
    std::vector<VectorField> f;
    std::vector<VectorField> g;
};

LiftedFrame lift_frame(const DarbouxProjection& proj);
LiftedFrame lift_frame(const DarbouxProjection& proj, const BaseFrames& frames);

/// A frame X_1..X_m with its structure coefficient functions:
/// [X_i, X_j] = sum_k c^k_ij X_k, stored flat with antisymmetry filled in.
struct LieAlgebraPresentation {
    ChartPtr chart;
    std::vector<VectorField> frame;
    std::vector<Expr> coeffs; ///< flat dim^3, index (k*dim + i)*dim + j

    int dim() const { return static_cast<int>(frame.size()); }
    const Expr& structure(int k, int i, int j) const {
        return coeffs[static_cast<std::size_t>((k * dim() + i) * dim() + j)];
    }
    bool has_constant_coefficients() const;
};

/// Solves the structure coefficients of a bracket-closed frame by symbolic
/// linear algebra in the frame; throws std::runtime_error if some bracket
/// leaves the span (frame not closed) or the solve is indeterminate.
LieAlgebraPresentation structure_constants(const ChartPtr& chart,
                                           const std::vector<VectorField>& frame,
                                           const SamplingPolicy& policy);

/// The derived algebra f' (side F) or g' (side G): iterated brackets of the
/// lifted frame, collecting vertical fields until their span reaches rank s
/// at the sample points.  Throws std::runtime_error if the span stalls below
/// s (the Darboux hypothesis is violated).
LieAlgebraPresentation derived_tangential_frame(const DarbouxProjection& proj,
                                                const LiftedFrame& lift, Side side);

/// Zero iff every structure coefficient is killed by the raw G-generators and
/// by the vertical frame Z - i.e. the coefficients are functions of the B1
/// coordinates only.  NonZero/Unknown report the first offending derivative.
ZeroVerdict coefficients_depend_only_on_base1(const LieAlgebraPresentation& pres,
                                              const DarbouxProjection& proj);

/// Ok iff x is pointwise vertical (d pi(x) = 0 as zero-verdicts) and
/// [x, D] is contained pointwise in D for the chosen side's distribution.
CheckStatus verify_tangential_symmetry(const VectorField& x, const DarbouxProjection& proj,
                                       Side side, std::string* why = nullptr);

/// ev(frame, p): column j holds frame[j] at p in the fiber coordinates.
Eigen::MatrixXd evaluation_map(const std::vector<VectorField>& frame,
                               const std::vector<int>& fiber_coords, const EvalPoint& p);

/// Fiber-chart convenience: all chart coordinates are fiber coordinates.
Eigen::MatrixXd evaluation_map(const std::vector<VectorField>& frame, const EvalPoint& p);

/// Findings of a reciprocal-pair check at a set of points.
struct ReciprocalReport {
    bool commute = false;      ///< all [A_i, B_j] have Zero verdicts
    bool transitive_a = false; ///< ev(A, p) invertible at every point
    bool transitive_b = false;
    double anti_iso_residual = 0.0; ///< max over points and pairs of
                                    ///< |alpha([X,Y]) + [alpha X, alpha Y]|
    std::vector<ConditionReport> findings;
    bool ok(double tol = 1e-9) const {
        return commute && transitive_a && transitive_b && anti_iso_residual < tol;
    }
};

/// Verifies that two frames on a common (fiber) chart centralize each other
/// and that alpha_x = ev(B,x)^{-1} ev(A,x) is a Lie-algebra anti-isomorphism.
ReciprocalReport check_reciprocal(const LieAlgebraPresentation& a,
                                  const LieAlgebraPresentation& b,
                                  const std::vector<EvalPoint>& points);

/// Rectangular sampling grid for the reciprocal-frame construction.
struct GridSpec {
    std::vector<double> lo;
    std::vector<double> hi;
    std::vector<int> shape; ///< nodes per axis, >= 2 unless the axis is flat
    double abs_tol = 1e-9;
    double rel_tol = 1e-9;
};

/// Grid-sampled frame: per node, the coefficient matrix a^l_i (column i is
/// field i in the input-frame basis) and the assembled chart components.
struct GridFrame {
    ChartPtr chart;
    std::vector<double> lo;
    std::vector<double> step;
    std::vector<int> shape;
    int fields = 0;
    std::vector<double> coeffs;  ///< node-major, then l*fields + i
    std::vector<double> vectors; ///< node-major, then coord*fields + i
    double max_commutator_residual = 0.0;
    double abs_tol = 0.0;
    double rel_tol = 0.0;

    int node_count() const;
    int node_index(const std::vector<int>& idx) const;
    std::vector<double> node_point(const std::vector<int>& idx) const;
    /// Multilinear interpolation of the coefficient matrix at x.
    Eigen::MatrixXd coefficients_at(const std::vector<double>& x) const;
    Eigen::MatrixXd vectors_at(const std::vector<double>& x) const;
    /// One row per grid node: fiber coordinates then frame coefficients.
    std::string to_csv() const;
};

/// Numerically constructs the centralizer (reciprocal) frame of a locally
/// transitive frame with exact constant structure constants by integrating
/// X_j(a^l) = -sum_i a^i c^l_ji along grid lines from base_point (which must
/// be a grid node), a(base) = identity.  Throws on non-transitivity at a
/// node or ODE failure.
GridFrame reciprocal_frame(const LieAlgebraPresentation& pres,
                           const std::vector<double>& base_point, const GridSpec& grid);

/// Exact rational point: (symbol id, value) pairs.
using RationalPoint = std::vector<std::pair<int, Rational>>;

/// Basis-independent record of a finite-dimensional Lie algebra over Q.
struct AlgebraFingerprint {
    int dimension = 0;
    bool abelian = true;
    std::vector<int> derived_series;       ///< dims from `dimension` until repeat
    std::vector<int> lower_central_series; ///< dims from `dimension` until repeat
    int center_dim = 0;
    std::vector<std::vector<Rational>> center_basis; ///< in the frame basis;
                                                     ///< not part of same_type
    int killing_rank = 0;
    int killing_positive = 0;
    int killing_negative = 0;

    bool same_type(const AlgebraFingerprint& o) const;
    std::string print() const;
};

/// Fingerprint from exact constants c^k_ij (flat dim^3); throws
/// std::invalid_argument on an antisymmetry or Jacobi violation.
AlgebraFingerprint fingerprint(int dim, const std::vector<Rational>& constants);

/// Fingerprint of a presentation whose coefficients are literal constants.
AlgebraFingerprint fingerprint(const LieAlgebraPresentation& pres);

/// Fingerprint of the fiber algebra over `point`: evaluates the coefficient
/// functions exactly at the rational point; throws if a coefficient does not
/// evaluate to a rational there.
AlgebraFingerprint fingerprint_at(const LieAlgebraPresentation& pres,
                                  const RationalPoint& point);

/// Raised when normalize_structure meets an algebra outside its catalog.
struct NotImplementedForType : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Result of aligning structure coefficients across fibers: a new frame
/// Y_i = mu^i_j X_j with constant coefficients equal to those over the
/// reference fiber (the sample-box center), plus the transition matrix mu
/// (entries are pullbacks to the source chart, i.e. functions of the
/// B1-invariants).
struct NormalizedStructure {
    LieAlgebraPresentation presentation;
    ExprMatrix mu;
    RationalPoint reference;
};

/// Catalog: already-constant coefficients (mu = identity), abelian by
/// zero-verdicts, and the 2-dimensional nonabelian scaling alignment.
/// Anything else throws NotImplementedForType.
NormalizedStructure normalize_structure(const LieAlgebraPresentation& pres,
                                        const DarbouxProjection& proj);

/// Basis of the center of a constant-coefficient presentation, scaled so the
/// first nonzero chart coefficient is +1; every element is verified as a
/// tangential symmetry of BOTH characteristic systems (throws on failure).
std::vector<VectorField> system_symmetries(const LieAlgebraPresentation& normalized,
                                           const DarbouxProjection& proj);

} // namespace eds

#endif // EDS_DARBOUX_HPP
