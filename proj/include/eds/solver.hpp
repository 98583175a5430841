/**
 * @file  solver.hpp
 * @brief Integral surfaces by lifting: restrict V = F (+) G over the product
 *        of two base curves and integrate the resulting rank-2 integrable
 *        distribution with node-aligned adaptive ODE steps.
 */
#ifndef EDS_SOLVER_HPP
#define EDS_SOLVER_HPP

#include "eds/darboux.hpp"
#include "eds/ode.hpp"

#include <memory>
#include <string>
#include <vector>

namespace eds {

// ---------------------------------------------------------------------------
// Curve
// ---------------------------------------------------------------------------

/// A parametrized curve in one base factor: one component expression per
/// target coordinate, every component a function of the single parameter
/// symbol, over a closed parameter interval.
struct Curve {
    int parameter = -1;           ///< parameter symbol id
    std::vector<Expr> components; ///< one per base-factor coordinate
    double lo = 0.0;
    double hi = 1.0;

    /// Interns `parameter_name` and parses each component against a symbol
    /// table holding only that parameter.
    static Curve make(const std::string& parameter_name,
                      const std::vector<std::string>& component_texts, double lo,
                      double hi);

    std::vector<double> value_at(double s) const;
    std::vector<double> derivative_at(double s) const;
};

// ---------------------------------------------------------------------------
// Lifted direction fields
// ---------------------------------------------------------------------------

/// The restriction of V over the inverse image of gamma_1 x gamma_2: at a
/// chart point lying over (gamma_1(u), gamma_2(v)) it produces the unique
/// vector of F projecting to gamma_1'(u) and the unique vector of G
/// projecting to gamma_2'(v); their span is the rank-2 integrable
/// distribution W.
class LiftedDirections {
public:
    const ChartPtr& chart() const { return chart_; }
    const Curve& gamma1() const { return gamma1_; }
    const Curve& gamma2() const { return gamma2_; }

    /// Unique vector in F at `point` (chart-ordered values) with
    /// d(pi_1) image gamma_1'(u); throws OdeError when the frame fails to
    /// project isomorphically there (projection-solve degeneracy).
    std::vector<double> u_direction(const std::vector<double>& point, double u) const;
    /// G-side analogue over gamma_2'(v).
    std::vector<double> v_direction(const std::vector<double>& point, double v) const;

    /// pi(point) as (pi_1; pi_2) values, for projection-consistency checks.
    std::vector<double> projection_at(const std::vector<double>& point) const;

private:
    friend LiftedDirections restrict_to_lift(const DecomposableSystem& sys,
                                             const DarbouxProjection& proj,
                                             const Curve& gamma1, const Curve& gamma2);
    struct Side;
    LiftedDirections();

    ChartPtr chart_;
    Curve gamma1_;
    Curve gamma2_;
    std::shared_ptr<const Side> f_side_; ///< frame + projection data for F
    std::shared_ptr<const Side> g_side_;
    std::vector<Expr> exclusions_;
};

/// Builds the direction-field pair for the curves gamma_1 in B1 and gamma_2
/// in B2.  Validates component counts against the base factors and rejects
/// curves whose derivative vector vanishes at a sampled parameter value
/// (degenerate-curve error, std::invalid_argument).
LiftedDirections restrict_to_lift(const DecomposableSystem& sys,
                                  const DarbouxProjection& proj, const Curve& gamma1,
                                  const Curve& gamma2);

// ---------------------------------------------------------------------------
// Integral surfaces
// ---------------------------------------------------------------------------

/// A (u,v) grid of chart points with the integrator tolerances and achieved
/// defect statistics.
struct IntegralSurface {
    ChartPtr chart;
    std::vector<double> u_grid;
    std::vector<double> v_grid;
    /// Node-major chart points: ((iu * nv()) + iv) * dim + coordinate.
    std::vector<double> points;
    OdeOptions tolerances;
    /// Corner disagreement between u-then-v and v-then-u boundary
    /// integration (zero on degenerate 1 x m grids).
    double path_defect = 0.0;
    /// max |pi(node) - (gamma_1(u), gamma_2(v))| over all nodes.
    double projection_defect = 0.0;

    int nu() const { return static_cast<int>(u_grid.size()); }
    int nv() const { return static_cast<int>(v_grid.size()); }
    const double* node(int iu, int iv) const;

    /// Header "u,v,<coordinate names>", one row per node (u-major).
    std::string to_csv() const;
    /// Tolerances, defects, and grid shape as a JSON object.
    std::string metadata_json() const;
};

/// Integrates the u-direction along the first grid axis starting from m0
/// (which must project to (gamma_1(u_grid[0]), gamma_2(v_grid[0]))), then the
/// v-direction along each column; also integrates the opposite order around
/// the grid boundary and records the corner disagreement as the
/// path-independence defect.  Throws OdeError on step-size underflow or when
/// a node leaves the admissible domain (an exclusion locus is crossed).
IntegralSurface integrate_surface(const LiftedDirections& directions,
                                  const std::vector<double>& m0,
                                  const std::vector<double>& u_grid,
                                  const std::vector<double>& v_grid,
                                  const OdeOptions& opts = {});

// ---------------------------------------------------------------------------
// Residuals
// ---------------------------------------------------------------------------

/// Chart symbols plus the jet symbols of every coordinate with respect to
/// the first two coordinates a, b: "<w>_<a>", "<w>_<b>", "<w>_<a><a>",
/// "<w>_<a><b>", "<w>_<b><b>" (e.g. z_x, z_y, z_xx, z_xy, z_yy on a chart
/// whose independent coordinates are x and y).
SymbolTableView jet_symbol_table(const ChartPtr& chart);

struct ResidualReport {
    double max_residual = 0.0;
    int interior_nodes = 0;     ///< nodes with a full central-difference stencil
    bool grid_too_coarse = false; ///< an axis has fewer than 3 nodes
};

/// Maximum |residual| over interior grid nodes, with first and second
/// derivatives of the dependent coordinates taken by central differences in
/// the first two (independent) coordinates.  The residual expression may use
/// the chart symbols and the jet symbols of jet_symbol_table().  Grids
/// below 3 x 3 yield the grid-too-coarse warning instead of values.
ResidualReport residual_check(const IntegralSurface& surface, const Expr& residual);

} // namespace eds

#endif // EDS_SOLVER_HPP
