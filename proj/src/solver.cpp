/**
 * @file  solver.cpp
 * @brief Curve-restricted direction fields and integral-surface integration.
 */
#include "eds/solver.hpp"

#include "json.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>
#include <utility>

namespace eds {

namespace {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

// ---------------------------------------------------------------------------
// Curve
// ---------------------------------------------------------------------------

Curve Curve::make(const std::string& parameter_name,
                  const std::vector<std::string>& component_texts, double lo, double hi) {
    Curve c;
    c.parameter = Symbols::intern(parameter_name);
    SymbolTableView table;
    table.ids = {c.parameter};
    c.components.reserve(component_texts.size());
    for (const std::string& text : component_texts) {
        c.components.push_back(parse_expr(text, table));
    }
    c.lo = lo;
    c.hi = hi;
    return c;
}

std::vector<double> Curve::value_at(double s) const {
    EvalPoint p;
    p.symbol_ids = {parameter};
    p.values = {s};
    std::vector<double> out;
    out.reserve(components.size());
    for (const Expr& e : components) {
        out.push_back(eval_at(e, p));
    }
    return out;
}

std::vector<double> Curve::derivative_at(double s) const {
    EvalPoint p;
    p.symbol_ids = {parameter};
    p.values = {s};
    std::vector<double> out;
    out.reserve(components.size());
    for (const Expr& e : components) {
        out.push_back(eval_at(differentiate(e, parameter), p));
    }
    return out;
}

// ---------------------------------------------------------------------------
// LiftedDirections
// ---------------------------------------------------------------------------

/// Per-side data: the characteristic frame, the compiled lift matrix
/// A_{m,a} = X_a(J^m), and the compiled curve data of the matching factor.
struct LiftedDirections::Side {
    std::string label;                    ///< "F" or "G"
    int k = 0;                            ///< frame size
    int dim = 0;                          ///< chart dimension
    std::vector<CompiledExpr> field;      ///< k * dim coefficients, row-major
    std::vector<CompiledExpr> amat;       ///< k * k lift-matrix entries
    std::vector<CompiledExpr> pi;         ///< this factor's projection components
    std::vector<CompiledExpr> curve_val;  ///< curve components over the parameter
    std::vector<CompiledExpr> curve_der;  ///< their derivatives
    int parameter = -1;

    std::vector<double> direction(const std::vector<double>& point, double s) const {
        Eigen::MatrixXd a(k, k);
        for (int m = 0; m < k; ++m) {
            for (int j = 0; j < k; ++j) {
                a(m, j) = amat[static_cast<std::size_t>(m * k + j)].eval(point.data());
            }
        }
        Eigen::VectorXd rhs(k);
        for (int m = 0; m < k; ++m) {
            rhs(m) = curve_der[static_cast<std::size_t>(m)].eval(&s);
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
        lu.setThreshold(1e-10);
        if (!lu.isInvertible()) {
            throw OdeError("restrict: the " + label +
                           "-frame does not project isomorphically onto its base factor "
                           "at the current point");
        }
        const Eigen::VectorXd c = lu.solve(rhs);
        std::vector<double> dir(static_cast<std::size_t>(dim), 0.0);
        for (int j = 0; j < k; ++j) {
            const double cj = c(j);
            if (cj == 0.0) {
                continue;
            }
            for (int cc = 0; cc < dim; ++cc) {
                dir[static_cast<std::size_t>(cc)] +=
                    cj * field[static_cast<std::size_t>(j * dim + cc)].eval(point.data());
            }
        }
        return dir;
    }
};

LiftedDirections::LiftedDirections() = default;

std::vector<double> LiftedDirections::u_direction(const std::vector<double>& point,
                                                  double u) const {
    return f_side_->direction(point, u);
}

std::vector<double> LiftedDirections::v_direction(const std::vector<double>& point,
                                                  double v) const {
    return g_side_->direction(point, v);
}

std::vector<double> LiftedDirections::projection_at(const std::vector<double>& point) const {
    std::vector<double> out;
    out.reserve(f_side_->pi.size() + g_side_->pi.size());
    for (const CompiledExpr& e : f_side_->pi) {
        out.push_back(e.eval(point.data()));
    }
    for (const CompiledExpr& e : g_side_->pi) {
        out.push_back(e.eval(point.data()));
    }
    return out;
}

namespace {

/// Rejects curves whose derivative vector vanishes somewhere on the sampled
/// interval, and curves whose component count does not match the factor.
void validate_curve(const Curve& curve, int expected_components, const char* which) {
    if (static_cast<int>(curve.components.size()) != expected_components) {
        throw std::invalid_argument(std::string("restrict: ") + which + " must have " +
                                    std::to_string(expected_components) +
                                    " component(s), one per base-factor coordinate");
    }
    if (!(curve.lo < curve.hi)) {
        throw std::invalid_argument(std::string("restrict: ") + which +
                                    " has an empty parameter interval");
    }
    constexpr int kSamples = 17;
    for (int i = 0; i < kSamples; ++i) {
        const double s =
            curve.lo + (curve.hi - curve.lo) * static_cast<double>(i) / (kSamples - 1);
        const std::vector<double> d = curve.derivative_at(s);
        double norm = 0.0;
        for (const double v : d) {
            norm += std::abs(v);
        }
        if (!(norm > 1e-12)) {
            throw std::invalid_argument(std::string("restrict: ") + which +
                                        " has a vanishing derivative at parameter value " +
                                        format_double(s) + " (degenerate curve)");
        }
    }
}

} // namespace

LiftedDirections restrict_to_lift(const DecomposableSystem& sys,
                                  const DarbouxProjection& proj, const Curve& gamma1,
                                  const Curve& gamma2) {
    if (!same_chart(sys.chart(), proj.sys.chart())) {
        throw std::invalid_argument("restrict: the system and projection charts differ");
    }
    validate_curve(gamma1, proj.b1->dim(), "gamma1");
    validate_curve(gamma2, proj.b2->dim(), "gamma2");

    const ChartPtr& chart = sys.chart();
    const std::vector<int>& slots = chart->coords;

    auto build_side = [&](const char* label, const Distribution& dist,
                          const std::vector<Expr>& invariants,
                          const Curve& curve) -> std::shared_ptr<const LiftedDirections::Side> {
        auto side = std::make_shared<LiftedDirections::Side>();
        side->label = label;
        side->k = static_cast<int>(dist.generators().size());
        side->dim = chart->dim();
        if (side->k != static_cast<int>(invariants.size())) {
            throw std::invalid_argument(
                std::string("restrict: the ") + label +
                "-frame size does not match the opposite invariant count");
        }
        for (const VectorField& x : dist.generators()) {
            for (int c = 0; c < side->dim; ++c) {
                side->field.emplace_back(x.coefficient(c), slots);
            }
        }
        for (const Expr& inv : invariants) {
            for (const VectorField& x : dist.generators()) {
                side->amat.emplace_back(x.apply(inv), slots);
            }
        }
        for (const Expr& inv : invariants) {
            side->pi.emplace_back(inv, slots);
        }
        side->parameter = curve.parameter;
        const std::vector<int> param_slot = {curve.parameter};
        for (const Expr& component : curve.components) {
            side->curve_val.emplace_back(component, param_slot);
            side->curve_der.emplace_back(differentiate(component, curve.parameter),
                                         param_slot);
        }
        return side;
    };

    LiftedDirections out;
    out.chart_ = chart;
    out.gamma1_ = gamma1;
    out.gamma2_ = gamma2;
    // B1 carries the G-invariants (the image of the F-frame under d(pi_1)).
    out.f_side_ = build_side("F", sys.f(), proj.invariants.for_g, gamma1);
    out.g_side_ = build_side("G", sys.g(), proj.invariants.for_f, gamma2);
    out.exclusions_ = chart->exclusions;
    return out;
}

// ---------------------------------------------------------------------------
// IntegralSurface
// ---------------------------------------------------------------------------

const double* IntegralSurface::node(int iu, int iv) const {
    const int dim = chart->dim();
    return &points[static_cast<std::size_t>((iu * nv() + iv) * dim)];
}

std::string IntegralSurface::to_csv() const {
    std::ostringstream out;
    out << "u,v";
    for (int c = 0; c < chart->dim(); ++c) {
        out << ',' << chart->coord_name(c);
    }
    out << '\n';
    for (int iu = 0; iu < nu(); ++iu) {
        for (int iv = 0; iv < nv(); ++iv) {
            out << format_double(u_grid[static_cast<std::size_t>(iu)]) << ','
                << format_double(v_grid[static_cast<std::size_t>(iv)]);
            const double* p = node(iu, iv);
            for (int c = 0; c < chart->dim(); ++c) {
                out << ',' << format_double(p[c]);
            }
            out << '\n';
        }
    }
    return out.str();
}

std::string IntegralSurface::metadata_json() const {
    nlohmann::json meta;
    meta["abs_tol"] = tolerances.abs_tol;
    meta["rel_tol"] = tolerances.rel_tol;
    meta["path_defect"] = path_defect;
    meta["projection_defect"] = projection_defect;
    meta["nu"] = nu();
    meta["nv"] = nv();
    std::vector<std::string> names;
    for (int c = 0; c < chart->dim(); ++c) {
        names.push_back(chart->coord_name(c));
    }
    meta["coordinates"] = names;
    return meta.dump(2);
}

namespace {

void require_monotone_grid(const std::vector<double>& grid, const char* which) {
    if (grid.empty()) {
        throw std::invalid_argument(std::string("integrate: ") + which + " grid is empty");
    }
    for (std::size_t i = 1; i < grid.size(); ++i) {
        const double step = grid[i] - grid[i - 1];
        const double first = grid[1] - grid[0];
        if (step == 0.0 || !std::isfinite(step) || step * first <= 0.0) {
            throw std::invalid_argument(std::string("integrate: ") + which +
                                        " grid values must be strictly monotone");
        }
    }
}

} // namespace

IntegralSurface integrate_surface(const LiftedDirections& directions,
                                  const std::vector<double>& m0,
                                  const std::vector<double>& u_grid,
                                  const std::vector<double>& v_grid,
                                  const OdeOptions& opts) {
    const ChartPtr& chart = directions.chart();
    const int dim = chart->dim();
    if (static_cast<int>(m0.size()) != dim) {
        throw std::invalid_argument("integrate: m0 does not have one value per chart "
                                    "coordinate");
    }
    require_monotone_grid(u_grid, "u");
    require_monotone_grid(v_grid, "v");

    // Precompiled exclusion guards with their signs at m0: a node where an
    // exclusion magnitude collapses or flips sign has crossed the locus.
    std::vector<CompiledExpr> exclusions;
    std::vector<double> exclusion_sign;
    for (const Expr& e : chart->exclusions) {
        exclusions.emplace_back(e, chart->coords);
        const double at_m0 = exclusions.back().eval(m0.data());
        exclusion_sign.push_back(at_m0 >= 0.0 ? 1.0 : -1.0);
    }
    auto check_admissible = [&](const std::vector<double>& y) {
        for (const double v : y) {
            if (!std::isfinite(v)) {
                throw OdeError("integrate: surface node is not finite");
            }
        }
        for (std::size_t i = 0; i < exclusions.size(); ++i) {
            const double val = exclusions[i].eval(y.data());
            if (std::abs(val) < 1e-9 || val * exclusion_sign[i] < 0.0) {
                throw OdeError("integrate: the surface left the admissible domain "
                               "(exclusion locus '" +
                               chart->exclusions[i].print() + "' was crossed)");
            }
        }
    };

    // Precondition: m0 lies over (gamma1(u0), gamma2(v0)).
    const std::vector<double> pi0 = directions.projection_at(m0);
    {
        const std::vector<double> g1 = directions.gamma1().value_at(u_grid.front());
        const std::vector<double> g2 = directions.gamma2().value_at(v_grid.front());
        double err = 0.0;
        for (std::size_t i = 0; i < g1.size(); ++i) {
            err = std::max(err, std::abs(pi0[i] - g1[i]));
        }
        for (std::size_t i = 0; i < g2.size(); ++i) {
            err = std::max(err, std::abs(pi0[g1.size() + i] - g2[i]));
        }
        if (err > 1e-6) {
            throw std::invalid_argument(
                "integrate: m0 does not project to (gamma1(u0), gamma2(v0)); "
                "max component error " +
                format_double(err));
        }
    }
    check_admissible(m0);

    const int nu = static_cast<int>(u_grid.size());
    const int nv = static_cast<int>(v_grid.size());

    IntegralSurface surf;
    surf.chart = chart;
    surf.u_grid = u_grid;
    surf.v_grid = v_grid;
    surf.tolerances = opts;
    surf.points.assign(static_cast<std::size_t>(nu) * nv * dim, 0.0);
    auto store = [&](int iu, int iv, const std::vector<double>& y) {
        std::copy(y.begin(), y.end(),
                  surf.points.begin() + static_cast<std::size_t>((iu * nv + iv) * dim));
    };

    const OdeRhs rhs_u = [&](const std::vector<double>& y, std::vector<double>& dydt,
                             double t) { dydt = directions.u_direction(y, t); };
    const OdeRhs rhs_v = [&](const std::vector<double>& y, std::vector<double>& dydt,
                             double t) { dydt = directions.v_direction(y, t); };

    // First axis: u along the row iv = 0.
    std::vector<double> y = m0;
    store(0, 0, y);
    for (int iu = 1; iu < nu; ++iu) {
        y = integrate_ode(rhs_u, std::move(y),
                          u_grid[static_cast<std::size_t>(iu - 1)],
                          u_grid[static_cast<std::size_t>(iu)], opts);
        check_admissible(y);
        store(iu, 0, y);
    }
    // Columns: v from each row-0 node.
    for (int iu = 0; iu < nu; ++iu) {
        y.assign(surf.node(iu, 0), surf.node(iu, 0) + dim);
        for (int iv = 1; iv < nv; ++iv) {
            y = integrate_ode(rhs_v, std::move(y),
                              v_grid[static_cast<std::size_t>(iv - 1)],
                              v_grid[static_cast<std::size_t>(iv)], opts);
            check_admissible(y);
            store(iu, iv, y);
        }
    }

    // Path-independence defect: v-then-u around the boundary to the far
    // corner, compared against the stored u-then-v value.
    if (nu > 1 && nv > 1) {
        std::vector<double> walk(surf.node(0, nv - 1), surf.node(0, nv - 1) + dim);
        for (int iu = 1; iu < nu; ++iu) {
            walk = integrate_ode(rhs_u, std::move(walk),
                                 u_grid[static_cast<std::size_t>(iu - 1)],
                                 u_grid[static_cast<std::size_t>(iu)], opts);
        }
        const double* corner = surf.node(nu - 1, nv - 1);
        double defect = 0.0;
        for (int c = 0; c < dim; ++c) {
            defect = std::max(defect, std::abs(walk[static_cast<std::size_t>(c)] - corner[c]));
        }
        surf.path_defect = defect;
    }

    // Projection consistency over every node.
    {
        double worst = 0.0;
        std::vector<double> node(static_cast<std::size_t>(dim));
        for (int iu = 0; iu < nu; ++iu) {
            const std::vector<double> g1 =
                directions.gamma1().value_at(u_grid[static_cast<std::size_t>(iu)]);
            for (int iv = 0; iv < nv; ++iv) {
                const std::vector<double> g2 =
                    directions.gamma2().value_at(v_grid[static_cast<std::size_t>(iv)]);
                node.assign(surf.node(iu, iv), surf.node(iu, iv) + dim);
                const std::vector<double> pi = directions.projection_at(node);
                for (std::size_t i = 0; i < g1.size(); ++i) {
                    worst = std::max(worst, std::abs(pi[i] - g1[i]));
                }
                for (std::size_t i = 0; i < g2.size(); ++i) {
                    worst = std::max(worst, std::abs(pi[g1.size() + i] - g2[i]));
                }
            }
        }
        surf.projection_defect = worst;
    }
    return surf;
}

// ---------------------------------------------------------------------------
// Residuals
// ---------------------------------------------------------------------------

namespace {

enum class JetKind { DA, DB, DAA, DAB, DBB };

struct JetSpec {
    int coord = 0; ///< chart coordinate index being differentiated
    JetKind kind = JetKind::DA;
};

/// name -> spec for the jet symbols "<w>_<a>", "<w>_<b>", "<w>_<a><a>",
/// "<w>_<a><b>", "<w>_<b><b>" of every chart coordinate w.
std::map<int, JetSpec> jet_symbol_map(const ChartPtr& chart) {
    std::map<int, JetSpec> out;
    if (chart->dim() < 2) {
        return out;
    }
    const std::string a = chart->coord_name(0);
    const std::string b = chart->coord_name(1);
    for (int c = 0; c < chart->dim(); ++c) {
        const std::string w = chart->coord_name(c);
        const std::pair<std::string, JetKind> suffixes[] = {
            {a, JetKind::DA},         {b, JetKind::DB},     {a + a, JetKind::DAA},
            {a + b, JetKind::DAB},    {b + b, JetKind::DBB}};
        for (const auto& [suffix, kind] : suffixes) {
            const int id = Symbols::intern(w + "_" + suffix);
            out.emplace(id, JetSpec{c, kind});
        }
    }
    return out;
}

} // namespace

SymbolTableView jet_symbol_table(const ChartPtr& chart) {
    SymbolTableView table;
    table.ids = chart->coords;
    for (const auto& [id, spec] : jet_symbol_map(chart)) {
        (void)spec;
        table.ids.push_back(id);
    }
    return table;
}

ResidualReport residual_check(const IntegralSurface& surface, const Expr& residual) {
    ResidualReport report;
    if (surface.nu() < 3 || surface.nv() < 3) {
        report.grid_too_coarse = true;
        return report;
    }
    const ChartPtr& chart = surface.chart;
    const int dim = chart->dim();
    if (dim < 2) {
        throw std::invalid_argument("residual: the chart needs two independent "
                                    "coordinates");
    }
    const std::map<int, JetSpec> jets = jet_symbol_map(chart);

    // Classify every symbol of the residual: chart coordinate or jet symbol.
    struct Needed {
        int symbol;
        bool is_jet;
        JetSpec spec;  ///< jet case
        int coord = 0; ///< chart case
    };
    std::vector<Needed> needed;
    for (const int s : residual.symbols()) {
        const int idx = chart->index_of(s);
        if (idx >= 0) {
            needed.push_back({s, false, {}, idx});
            continue;
        }
        const auto it = jets.find(s);
        if (it == jets.end()) {
            throw std::invalid_argument("residual: unknown symbol '" + Symbols::name(s) +
                                        "' (not a chart coordinate or jet symbol)");
        }
        needed.push_back({s, true, it->second, 0});
    }

    EvalPoint p;
    for (const Needed& n : needed) {
        p.symbol_ids.push_back(n.symbol);
        p.values.push_back(0.0);
    }

    const int nv = surface.nv();
    auto at = [&](int iu, int iv, int c) {
        return surface.points[static_cast<std::size_t>((iu * nv + iv) * dim + c)];
    };

    for (int iu = 1; iu + 1 < surface.nu(); ++iu) {
        for (int iv = 1; iv + 1 < nv; ++iv) {
            // Independent-coordinate spacings from the grid itself.
            const double xp = at(iu + 1, iv, 0), x0 = at(iu, iv, 0), xm = at(iu - 1, iv, 0);
            const double yp = at(iu, iv + 1, 1), y0 = at(iu, iv, 1), ym = at(iu, iv - 1, 1);
            const double dx = xp - xm;
            const double dy = yp - ym;
            if (std::abs(dx) < 1e-14 || std::abs(dy) < 1e-14) {
                throw std::runtime_error(
                    "residual: an independent coordinate does not vary across the "
                    "difference stencil");
            }
            for (std::size_t i = 0; i < needed.size(); ++i) {
                const Needed& n = needed[i];
                double value = 0.0;
                if (!n.is_jet) {
                    value = at(iu, iv, n.coord);
                } else {
                    const int w = n.spec.coord;
                    switch (n.spec.kind) {
                    case JetKind::DA:
                        value = (at(iu + 1, iv, w) - at(iu - 1, iv, w)) / dx;
                        break;
                    case JetKind::DB:
                        value = (at(iu, iv + 1, w) - at(iu, iv - 1, w)) / dy;
                        break;
                    case JetKind::DAB:
                        value = (at(iu + 1, iv + 1, w) - at(iu + 1, iv - 1, w) -
                                 at(iu - 1, iv + 1, w) + at(iu - 1, iv - 1, w)) /
                                (dx * dy);
                        break;
                    case JetKind::DAA: {
                        const double hp = xp - x0;
                        const double hm = x0 - xm;
                        value = 2.0 *
                                (hm * at(iu + 1, iv, w) - (hp + hm) * at(iu, iv, w) +
                                 hp * at(iu - 1, iv, w)) /
                                (hp * hm * (hp + hm));
                        break;
                    }
                    case JetKind::DBB: {
                        const double hp = yp - y0;
                        const double hm = y0 - ym;
                        value = 2.0 *
                                (hm * at(iu, iv + 1, w) - (hp + hm) * at(iu, iv, w) +
                                 hp * at(iu, iv - 1, w)) /
                                (hp * hm * (hp + hm));
                        break;
                    }
                    }
                }
                p.values[i] = value;
            }
            report.max_residual = std::max(report.max_residual, std::abs(eval_at(residual, p)));
            ++report.interior_nodes;
        }
    }
    return report;
}

} // namespace eds
