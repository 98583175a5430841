/**
 * @file  geometry.hpp
 * @brief Vector fields and distributions on a single coordinate chart: Lie
 *        brackets, projection along submersions, bracket closure
 *        (completion), numeric rank, invariant verification and counting.
 */
#ifndef EDS_GEOMETRY_HPP
#define EDS_GEOMETRY_HPP

#include "eds/expr.hpp"
#include "eds/linalg.hpp"

#include <memory>
#include <string>
#include <vector>

namespace eds {

// ---------------------------------------------------------------------------
// Chart
// ---------------------------------------------------------------------------

struct Chart;
using ChartPtr = std::shared_ptr<const Chart>;

/// A single coordinate chart: ordered coordinate symbols, a sample box, and
/// optional singular-locus exclusion expressions.
struct Chart {
    std::vector<int> coords; ///< coordinate symbol ids, ordered
    std::vector<std::array<double, 2>> box; ///< per-coordinate sample domain
    std::vector<Expr> exclusions; ///< points with |excl| below floor are rejected

    static ChartPtr make(const std::vector<std::string>& names,
                         std::array<double, 2> default_box = {-2.0, 2.0});

    int dim() const { return static_cast<int>(coords.size()); }
    int index_of(int symbol_id) const; ///< -1 when absent
    const std::string& coord_name(int index) const;
    SymbolTableView symbol_table() const;
    /// Sampling policy spanning the chart coordinates with the chart's box
    /// and exclusions.
    SamplingPolicy policy(std::uint64_t seed = 0x9e3779b97f4a7c15ULL) const;
};

/// True when the two charts name the same ordered coordinates.
bool same_chart(const ChartPtr& a, const ChartPtr& b);

/// `base` if that name is not already a coordinate of the chart, otherwise
/// the first of base_1, base_2, ... that is not.
std::string fresh_coord_name(const Chart& chart, const std::string& base);

// ---------------------------------------------------------------------------
// VectorField
// ---------------------------------------------------------------------------

/// X = sum_i coefficient[i] * d/dx_i over a fixed chart.
class VectorField {
public:
    VectorField(ChartPtr chart, std::vector<Expr> coefficients);
    static VectorField zero(const ChartPtr& chart);
    static VectorField coordinate(const ChartPtr& chart, int index);

    const ChartPtr& chart() const { return chart_; }
    const std::vector<Expr>& coefficients() const { return coef_; }
    const Expr& coefficient(int i) const { return coef_[static_cast<std::size_t>(i)]; }

    /// Directional derivative X(f) = sum_i a^i df/dx_i.
    Expr apply(const Expr& f) const;

    bool is_literal_zero() const;

    VectorField operator+(const VectorField& other) const;
    VectorField operator-(const VectorField& other) const;
    VectorField operator-() const;
    VectorField operator*(const Expr& scale) const;

    /// Renders in the field syntax, e.g. "d/dx + p*d/dz".
    std::string print() const;

private:
    ChartPtr chart_;
    std::vector<Expr> coef_;
};

/// Commutator [X, Y]^i = X(Y^i) - Y(X^i); requires a shared chart.
VectorField lie_bracket(const VectorField& x, const VectorField& y);

/// Parses the field syntax: sum of `coef * d/d<coord>` terms, where a bare
/// `d/d<coord>` denotes unit coefficient (e.g.
/// "d/dx + p*d/dz + exp(z)*d/dq").  Throws ParseError.
VectorField parse_vector_field(const std::string& text, const ChartPtr& chart);

// ---------------------------------------------------------------------------
// Distribution
// ---------------------------------------------------------------------------

/// Raised when bracket closure fails to stabilize within the chart-dimension
/// iteration cap (impossible for constant-rank input; signals degeneracy).
class CompletionError : public std::runtime_error {
public:
    explicit CompletionError(const std::string& message)
        : std::runtime_error(message) {}
};

/// Finitely generated distribution with a cached generic rank.  The generic
/// rank is the maximum numeric rank of the generator coefficient matrix over
/// the cached admissible sample points; differing ranks across those points
/// are recorded (constant-rank contract violation) rather than hidden.
class Distribution {
public:
    Distribution(ChartPtr chart, std::vector<VectorField> generators,
                 std::uint64_t seed = 0x9e3779b97f4a7c15ULL);

    const ChartPtr& chart() const { return chart_; }
    const std::vector<VectorField>& generators() const { return gens_; }
    int generic_rank() const { return generic_rank_; }
    std::uint64_t seed() const { return seed_; }

    const std::vector<EvalPoint>& sample_points() const { return points_; }
    const std::vector<int>& point_ranks() const { return point_ranks_; }
    /// True when numeric ranks differ across the cached sample points.
    bool constant_rank_violated() const;

    /// Numeric rank of the generator matrix at an arbitrary point.
    int rank_at(const EvalPoint& p) const;

    /// Pointwise containment: rank([generators | x]) equals rank(generators)
    /// at admissible sample points drawn with both fields' denominators
    /// guarded.
    bool contains_pointwise(const VectorField& x) const;

private:
    ChartPtr chart_;
    std::vector<VectorField> gens_;
    std::uint64_t seed_;
    std::vector<EvalPoint> points_;
    std::vector<int> point_ranks_;
    int generic_rank_ = 0;
};

/// Smallest bracket-closed distribution containing d: adjoins pairwise
/// brackets until the generic rank stabilizes.  Throws CompletionError if the
/// rank still grows after dim-many sweeps.
Distribution completion(const Distribution& d);

/// n - rank(completion(d)): the number of functionally independent local
/// invariants of the completed (integrable) distribution.
int count_invariants(const Distribution& d);

/// Zero iff X(I) is zero for every generator X of d.  The certification is
/// symbolic only when every generator's verdict was symbolic; a NonZero
/// generator verdict wins over Unknown.
ZeroVerdict verify_invariant(const Distribution& d, const Expr& invariant);

/// Full row rank of the Jacobian of the given functions at p (singular-value
/// threshold relative to the largest singular value).
bool functionally_independent(const std::vector<Expr>& functions, const ChartPtr& chart,
                              const EvalPoint& p, double rel_threshold = 1e-9);

// ---------------------------------------------------------------------------
// Submersion and field projection
// ---------------------------------------------------------------------------

/// pi: source -> target given by one source-coordinate expression per target
/// coordinate.  `vertical_frame` optionally lists generators of ker(d pi)
/// for fiber-derivative checks on non-coordinate submersions.
struct Submersion {
    ChartPtr source;
    ChartPtr target;
    std::vector<Expr> components;
    std::vector<VectorField> vertical_frame;

    /// True when every component is a bare source coordinate symbol.
    bool is_coordinate_projection() const;
    /// Pushforward components d(pi)(X)^j = X(pi^j), as source expressions.
    std::vector<Expr> pushforward(const VectorField& x) const;
};

enum class ProjectionStatus { Projected, NotProjectable, Indeterminate };

struct ProjectionResult {
    ProjectionStatus status = ProjectionStatus::Indeterminate;
    std::optional<VectorField> field; ///< on the target chart, when Projected
    std::string detail;
};

/// pi_* X when the pushforward is independent of the fiber coordinates
/// (fiber-derivative zero-verdicts); NotProjectable with a witness component
/// otherwise; Unknown verdicts surface as Indeterminate, never a false
/// positive.
ProjectionResult project_field(const VectorField& x, const Submersion& pi);

} // namespace eds

#endif // EDS_GEOMETRY_HPP
