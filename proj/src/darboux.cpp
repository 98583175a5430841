/**
 * @file  darboux.cpp
 */
#include "eds/darboux.hpp"

#include "eds/linalg.hpp"
#include "eds/ode.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace eds {

const char* side_name(Side s) {
    return s == Side::F ? "F" : "G";
}

std::vector<ConditionReport> DarbouxReport::failures() const {
    std::vector<ConditionReport> out;
    for (const ConditionReport& c : conditions) {
        if (c.status != CheckStatus::Ok) {
            out.push_back(c);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// check_darboux
// ---------------------------------------------------------------------------

namespace {

std::string ordinal_tag(const char* base, Side side, int index) {
    return std::string(base) + "-" + side_name(side) + "[" + std::to_string(index + 1) + "]";
}

CheckStatus verdict_to_status(const ZeroVerdict& v) {
    switch (v.verdict) {
    case Verdict::Zero:
        return CheckStatus::Ok;
    case Verdict::NonZero:
        return CheckStatus::Fail;
    default:
        return CheckStatus::Indeterminate;
    }
}

std::string nonzero_detail(const ZeroVerdict& v) {
    std::ostringstream os;
    os << "nonzero (witness value " << v.witness_value << ")";
    return os.str();
}

} // namespace

DarbouxReport check_darboux(const DecomposableSystem& sys, const InvariantSet& inv) {
    DarbouxReport report;
    report.n_f = static_cast<int>(inv.for_f.size());
    report.n_g = static_cast<int>(inv.for_g.size());
    const int k = sys.f().generic_rank();
    const int l = sys.g().generic_rank();

    auto add = [&](std::string condition, CheckStatus status, std::string detail) {
        report.conditions.push_back({std::move(condition), status, std::move(detail)});
    };

    // Each supplied function really is a first integral of its side.
    for (const auto& [side, dist, funcs] :
         {std::tuple<Side, const Distribution*, const std::vector<Expr>*>{Side::F, &sys.f(),
                                                                          &inv.for_f},
          {Side::G, &sys.g(), &inv.for_g}}) {
        for (std::size_t i = 0; i < funcs->size(); ++i) {
            const ZeroVerdict v = verify_invariant(*dist, (*funcs)[i]);
            add(ordinal_tag("invariant", side, static_cast<int>(i)), verdict_to_status(v),
                v.is_zero() ? "" : nonzero_detail(v));
        }
    }

    // Functional independence within each family at the sample points.
    for (const auto& [side, funcs] :
         {std::pair<Side, const std::vector<Expr>*>{Side::F, &inv.for_f}, {Side::G, &inv.for_g}}) {
        if (funcs->empty()) {
            continue;
        }
        CheckStatus st = CheckStatus::Ok;
        std::string detail;
        int usable = 0;
        for (const EvalPoint& p : sys.v().sample_points()) {
            try {
                if (!functionally_independent(*funcs, sys.chart(), p)) {
                    st = CheckStatus::Fail;
                    detail = "differentials are linearly dependent at a sample point";
                    break;
                }
                ++usable;
            } catch (const SingularEvaluation&) {
                continue; // point sits on a singular locus of the invariants
            }
        }
        if (st == CheckStatus::Ok && usable == 0) {
            st = CheckStatus::Indeterminate;
            detail = "no admissible sample point evaluated finitely";
        }
        add(std::string("independence-") + side_name(side), st, std::move(detail));
    }

    // Counting conditions: the supplied families must have the sizes the
    // projection needs (#invariants of F = rank G and vice versa) and the
    // systems must actually possess that many independent invariants.
    add("invariant-count-F", report.n_f == l ? CheckStatus::Ok : CheckStatus::Fail,
        report.n_f == l ? ""
                        : "supplied " + std::to_string(report.n_f) +
                              " invariant(s) of F; rank G = " + std::to_string(l) + " required");
    add("invariant-count-G", report.n_g == k ? CheckStatus::Ok : CheckStatus::Fail,
        report.n_g == k ? ""
                        : "supplied " + std::to_string(report.n_g) +
                              " invariant(s) of G; rank F = " + std::to_string(k) + " required");
    bool max_counts_ok = true;
    for (const auto& [side, dist, needed, other] :
         {std::tuple<Side, const Distribution*, int, const char*>{Side::F, &sys.f(), l, "G"},
          {Side::G, &sys.g(), k, "F"}}) {
        CheckStatus st = CheckStatus::Ok;
        std::string detail;
        try {
            const int have = count_invariants(*dist);
            if (have != needed) {
                st = CheckStatus::Fail;
                detail = std::string("count_invariants(") + side_name(side) +
                         ") = " + std::to_string(have) + " but rank " + other + " = " +
                         std::to_string(needed);
            }
        } catch (const std::exception& ex) {
            st = CheckStatus::Indeterminate;
            detail = ex.what();
        }
        max_counts_ok = max_counts_ok && st == CheckStatus::Ok;
        add(std::string("maximal-invariant-count-") + side_name(side), st, std::move(detail));
    }
    report.rank_condition = report.n_f == l && report.n_g == k && max_counts_ok;

    // Transversality: the combined invariant differentials restricted to
    // V = F (+) G have full rank k + l at the sample points.
    {
        CheckStatus st = CheckStatus::Ok;
        std::string detail;
        std::vector<Expr> combined = inv.for_g;
        combined.insert(combined.end(), inv.for_f.begin(), inv.for_f.end());
        const auto& vgens = sys.v().generators();
        ExprMatrix m = ExprMatrix::zero(static_cast<int>(combined.size()),
                                        static_cast<int>(vgens.size()));
        for (int r = 0; r < m.rows; ++r) {
            for (int c = 0; c < m.cols; ++c) {
                m.at(r, c) = vgens[static_cast<std::size_t>(c)].apply(
                    combined[static_cast<std::size_t>(r)]);
            }
        }
        int usable = 0;
        for (const EvalPoint& p : sys.v().sample_points()) {
            try {
                const int r = svd_rank(eval_matrix(m, p));
                ++usable;
                if (r != k + l) {
                    st = CheckStatus::Fail;
                    detail = "restricted differentials have rank " + std::to_string(r) +
                             " != " + std::to_string(k + l) + " at a sample point";
                    break;
                }
            } catch (const SingularEvaluation&) {
                continue;
            }
        }
        if (st == CheckStatus::Ok && usable == 0) {
            st = CheckStatus::Indeterminate;
            detail = "no admissible sample point evaluated finitely";
        }
        report.transversality = st == CheckStatus::Ok;
        add("transversality", st, std::move(detail));
    }

    report.status = CheckStatus::Ok;
    for (const ConditionReport& c : report.conditions) {
        if (c.status == CheckStatus::Fail) {
            report.status = CheckStatus::Fail;
            break;
        }
        if (c.status == CheckStatus::Indeterminate) {
            report.status = CheckStatus::Indeterminate;
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// build_projection
// ---------------------------------------------------------------------------

namespace {

/// Sample range of an expression over the admissible points, padded so the
/// target box comfortably contains the projected values.
std::array<double, 2> padded_range(const Expr& e, const std::vector<EvalPoint>& points) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const EvalPoint& p : points) {
        try {
            const double v = eval_at(e, p);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        } catch (const SingularEvaluation&) {
            continue;
        }
    }
    if (!(lo <= hi)) {
        return {-2.0, 2.0};
    }
    const double pad = std::max(0.25 * (hi - lo), 0.25);
    return {lo - pad, hi + pad};
}

ChartPtr make_target_chart(const Chart& source, const std::string& prefix,
                           const std::vector<Expr>& invariants,
                           const std::vector<EvalPoint>& points) {
    auto chart = std::make_shared<Chart>();
    for (std::size_t i = 0; i < invariants.size(); ++i) {
        const std::string name =
            fresh_coord_name(source, prefix + "_" + std::to_string(i + 1));
        chart->coords.push_back(Symbols::intern(name));
        chart->box.push_back(padded_range(invariants[i], points));
    }
    return chart;
}

/// Full rank of [X_a(inv_m)] over the distribution's generators at every
/// usable sample point.
void require_projected_rank(const Distribution& d, const std::vector<Expr>& invariants,
                            int expected, const char* what) {
    ExprMatrix m = ExprMatrix::zero(static_cast<int>(invariants.size()),
                                    static_cast<int>(d.generators().size()));
    for (int r = 0; r < m.rows; ++r) {
        for (int c = 0; c < m.cols; ++c) {
            m.at(r, c) = d.generators()[static_cast<std::size_t>(c)].apply(
                invariants[static_cast<std::size_t>(r)]);
        }
    }
    int usable = 0;
    for (const EvalPoint& p : d.sample_points()) {
        try {
            if (svd_rank(eval_matrix(m, p)) != expected) {
                throw std::runtime_error(std::string("darboux projection: ") + what +
                                         " does not have full rank at a sample point");
            }
            ++usable;
        } catch (const SingularEvaluation&) {
            continue;
        }
    }
    if (usable == 0) {
        throw std::runtime_error(std::string("darboux projection: ") + what +
                                 " could not be rank-checked at any sample point");
    }
}

} // namespace

DarbouxProjection build_projection(const DecomposableSystem& sys, const InvariantSet& inv) {
    const DarbouxReport report = check_darboux(sys, inv);
    if (report.status != CheckStatus::Ok) {
        std::string what = "darboux projection: precondition failed";
        for (const ConditionReport& c : report.failures()) {
            what += "; " + c.condition + (c.detail.empty() ? "" : ": " + c.detail);
        }
        throw std::runtime_error(what);
    }

    const ChartPtr& chart = sys.chart();
    const int n = chart->dim();
    const int k = sys.f().generic_rank();
    const int l = sys.g().generic_rank();
    const int s = n - k - l;
    const auto& points = sys.v().sample_points();

    const ChartPtr b1 = make_target_chart(*chart, "b1", inv.for_g, points);
    const ChartPtr b2 = make_target_chart(*chart, "b2", inv.for_f, points);
    auto base = std::make_shared<Chart>();
    base->coords = b1->coords;
    base->coords.insert(base->coords.end(), b2->coords.begin(), b2->coords.end());
    base->box = b1->box;
    base->box.insert(base->box.end(), b2->box.begin(), b2->box.end());

    std::vector<Expr> components = inv.for_g;
    components.insert(components.end(), inv.for_f.begin(), inv.for_f.end());

    // Fiber tangent bundle: symbolic kernel of the invariant Jacobian.  The
    // free columns of the reduction coordinatize the fibers.
    ExprMatrix jac = ExprMatrix::zero(k + l, n);
    for (int r = 0; r < k + l; ++r) {
        for (int c = 0; c < n; ++c) {
            jac.at(r, c) = differentiate(components[static_cast<std::size_t>(r)],
                                         chart->coords[static_cast<std::size_t>(c)]);
        }
    }
    const SymbolicKernel kernel = symbolic_kernel(jac, chart->policy(sys.f().seed()));
    if (kernel.status != SolveStatus::Solved) {
        throw std::runtime_error("darboux projection: fiber kernel solve failed: " +
                                 kernel.detail);
    }
    if (static_cast<int>(kernel.basis.size()) != s) {
        throw std::runtime_error("darboux projection: fiber tangent bundle has rank " +
                                 std::to_string(kernel.basis.size()) + ", expected s = " +
                                 std::to_string(s));
    }
    std::vector<VectorField> zgens;
    zgens.reserve(kernel.basis.size());
    for (const auto& coeffs : kernel.basis) {
        zgens.emplace_back(chart, coeffs);
    }
    Distribution z(chart, zgens, sys.f().seed());
    if (z.generic_rank() != s || z.constant_rank_violated()) {
        throw std::runtime_error("darboux projection: fiber distribution rank is not constantly " +
                                 std::to_string(s));
    }

    // d pi maps F onto the first factor and G onto the second, each with
    // full rank; the fibers sit inside both characteristic completions.
    require_projected_rank(sys.f(), inv.for_g, k, "d pi(F)");
    require_projected_rank(sys.g(), inv.for_f, l, "d pi(G)");
    const Distribution comp_f = completion(sys.f());
    const Distribution comp_g = completion(sys.g());
    for (const VectorField& zg : zgens) {
        if (!comp_f.contains_pointwise(zg) || !comp_g.contains_pointwise(zg)) {
            throw std::runtime_error(
                "darboux projection: fiber field " + zg.print() +
                " is not contained in both characteristic completions");
        }
    }

    Submersion pi{chart, base, components, zgens};
    return DarbouxProjection{sys,  inv, b1, b2, base, std::move(pi), std::move(z),
                             kernel.free_cols};
}

// ---------------------------------------------------------------------------
// Lifted frames
// ---------------------------------------------------------------------------

BaseFrames coordinate_base_frames(const DarbouxProjection& proj) {
    BaseFrames frames;
    for (int i = 0; i < proj.b1->dim(); ++i) {
        frames.on_b1.push_back(VectorField::coordinate(proj.b1, i));
    }
    for (int j = 0; j < proj.b2->dim(); ++j) {
        frames.on_b2.push_back(VectorField::coordinate(proj.b2, j));
    }
    return frames;
}

namespace {

/// Pullback of a base-factor function through the projection: substitutes
/// each target coordinate by its invariant expression.
Expr pull_back(const Expr& e, const ChartPtr& target, const std::vector<Expr>& invariants) {
    Expr out = e;
    for (int i = 0; i < target->dim(); ++i) {
        out = out.substitute(target->coords[static_cast<std::size_t>(i)],
                             invariants[static_cast<std::size_t>(i)]);
    }
    return out;
}

void require_commuting(const std::vector<VectorField>& frame, const ChartPtr& chart,
                       std::uint64_t seed, const char* label) {
    const SamplingPolicy policy = chart->policy(seed);
    for (std::size_t i = 0; i < frame.size(); ++i) {
        for (std::size_t j = i + 1; j < frame.size(); ++j) {
            const VectorField b = lie_bracket(frame[i], frame[j]);
            for (int c = 0; c < chart->dim(); ++c) {
                const ZeroVerdict v = is_zero(b.coefficient(c), policy);
                if (v.is_nonzero()) {
                    throw std::invalid_argument(std::string("lift: base frame on ") + label +
                                                " does not commute: [X_" + std::to_string(i + 1) +
                                                ", X_" + std::to_string(j + 1) + "] != 0");
                }
                if (v.is_unknown()) {
                    throw std::invalid_argument(
                        std::string("lift: could not certify that the base frame on ") + label +
                        " commutes");
                }
            }
        }
    }
}

/// Solves for the unique fields of `d` whose pushforward along the given
/// invariants equals each requested base frame field.
std::vector<VectorField> lift_one_side(const DarbouxProjection& proj, const Distribution& d,
                                       const std::vector<Expr>& invariants,
                                       const ChartPtr& target,
                                       const std::vector<VectorField>& base_frame,
                                       const char* label) {
    const int rank = d.generic_rank();
    const auto& gens = d.generators();
    if (static_cast<int>(gens.size()) != rank) {
        throw std::invalid_argument(std::string("lift: ") + label +
                                    " needs a minimal generating set (" + std::to_string(rank) +
                                    " generators, got " + std::to_string(gens.size()) + ")");
    }
    if (static_cast<int>(base_frame.size()) != rank) {
        throw std::invalid_argument(std::string("lift: expected ") + std::to_string(rank) +
                                    " base fields for " + label + ", got " +
                                    std::to_string(base_frame.size()));
    }
    const int m = static_cast<int>(invariants.size());
    ExprMatrix a = ExprMatrix::zero(m, rank);
    for (int r = 0; r < m; ++r) {
        for (int c = 0; c < rank; ++c) {
            a.at(r, c) = gens[static_cast<std::size_t>(c)].apply(
                invariants[static_cast<std::size_t>(r)]);
        }
    }
    ExprMatrix rhs = ExprMatrix::zero(m, rank);
    for (int r = 0; r < m; ++r) {
        for (int i = 0; i < rank; ++i) {
            rhs.at(r, i) =
                pull_back(base_frame[static_cast<std::size_t>(i)].coefficient(r), target,
                          invariants);
        }
    }
    const SymbolicSolve sol =
        solve_linear_symbolic(a, rhs, proj.sys.chart()->policy(proj.sys.f().seed()));
    if (sol.status != SolveStatus::Solved || !sol.fully_determined) {
        throw std::runtime_error(std::string("lift: solving for the ") + label +
                                 "-lift failed: " + (sol.detail.empty() ? "system is not uniquely solvable" : sol.detail));
    }
    std::vector<VectorField> lifted;
    for (int i = 0; i < rank; ++i) {
        VectorField x = VectorField::zero(proj.sys.chart());
        for (int c = 0; c < rank; ++c) {
            x = x + gens[static_cast<std::size_t>(c)] * sol.solution.at(c, i);
        }
        lifted.push_back(std::move(x));
    }
    return lifted;
}

} // namespace

LiftedFrame lift_frame(const DarbouxProjection& proj) {
    return lift_frame(proj, coordinate_base_frames(proj));
}

LiftedFrame lift_frame(const DarbouxProjection& proj, const BaseFrames& frames) {
    const std::uint64_t seed = proj.sys.f().seed();
    require_commuting(frames.on_b1, proj.b1, seed, "B1");
    require_commuting(frames.on_b2, proj.b2, seed, "B2");

    LiftedFrame lifted;
    lifted.base_f = frames.on_b1;
    lifted.base_g = frames.on_b2;
    lifted.f = lift_one_side(proj, proj.sys.f(), proj.invariants.for_g, proj.b1, frames.on_b1,
                             "F");
    lifted.g = lift_one_side(proj, proj.sys.g(), proj.invariants.for_f, proj.b2, frames.on_b2,
                             "G");

    // The decisive property: every cross-bracket of the lifted frames
    // vanishes identically.
    const SamplingPolicy policy = proj.sys.chart()->policy(seed);
    for (std::size_t i = 0; i < lifted.f.size(); ++i) {
        for (std::size_t j = 0; j < lifted.g.size(); ++j) {
            const VectorField b = lie_bracket(lifted.f[i], lifted.g[j]);
            for (int c = 0; c < proj.sys.chart()->dim(); ++c) {
                const ZeroVerdict v = is_zero(b.coefficient(c), policy);
                if (v.is_nonzero()) {
                    throw std::runtime_error(
                        "lift: [f_" + std::to_string(i + 1) + ", g_" + std::to_string(j + 1) +
                        "] has a nonzero " + proj.sys.chart()->coord_name(c) + "-component");
                }
                if (v.is_unknown()) {
                    throw std::runtime_error("lift: could not certify that [f_" +
                                             std::to_string(i + 1) + ", g_" +
                                             std::to_string(j + 1) + "] vanishes");
                }
            }
        }
    }
    return lifted;
}

// ---------------------------------------------------------------------------
// Structure constants
// ---------------------------------------------------------------------------

bool LieAlgebraPresentation::has_constant_coefficients() const {
    return std::all_of(coeffs.begin(), coeffs.end(),
                       [](const Expr& e) { return e.constant_value().has_value(); });
}

LieAlgebraPresentation structure_constants(const ChartPtr& chart,
                                           const std::vector<VectorField>& frame,
                                           const SamplingPolicy& policy) {
    const int m = static_cast<int>(frame.size());
    LieAlgebraPresentation pres;
    pres.chart = chart;
    pres.frame = frame;
    pres.coeffs.assign(static_cast<std::size_t>(m) * m * m, Expr());
    if (m == 0) {
        return pres;
    }
    const int n = chart->dim();
    ExprMatrix a = ExprMatrix::zero(n, m);
    for (int c = 0; c < n; ++c) {
        for (int j = 0; j < m; ++j) {
            a.at(c, j) = frame[static_cast<std::size_t>(j)].coefficient(c);
        }
    }
    const int pairs = m * (m - 1) / 2;
    if (pairs == 0) {
        return pres;
    }
    ExprMatrix rhs = ExprMatrix::zero(n, pairs);
    std::vector<std::pair<int, int>> order;
    for (int i = 0; i < m; ++i) {
        for (int j = i + 1; j < m; ++j) {
            const int q = static_cast<int>(order.size());
            const VectorField b =
                lie_bracket(frame[static_cast<std::size_t>(i)], frame[static_cast<std::size_t>(j)]);
            for (int c = 0; c < n; ++c) {
                rhs.at(c, q) = b.coefficient(c);
            }
            order.emplace_back(i, j);
        }
    }
    const SymbolicSolve sol = solve_linear_symbolic(a, rhs, policy);
    if (sol.status == SolveStatus::Inconsistent) {
        throw std::runtime_error("structure constants: the frame is not bracket-closed (" +
                                 sol.detail + ")");
    }
    if (sol.status == SolveStatus::Indeterminate) {
        throw std::runtime_error("structure constants: solve was indeterminate (" + sol.detail +
                                 ")");
    }
    if (!sol.fully_determined) {
        throw std::runtime_error(
            "structure constants: the frame is linearly dependent, coefficients are not unique");
    }
    for (std::size_t q = 0; q < order.size(); ++q) {
        const auto [i, j] = order[q];
        for (int kk = 0; kk < m; ++kk) {
            const Expr c = sol.solution.at(kk, static_cast<int>(q));
            pres.coeffs[static_cast<std::size_t>((kk * m + i) * m + j)] = c;
            pres.coeffs[static_cast<std::size_t>((kk * m + j) * m + i)] = -c;
        }
    }
    return pres;
}

// ---------------------------------------------------------------------------
// Derived tangential frame
// ---------------------------------------------------------------------------

namespace {

/// Highest numeric rank of the fields' coefficient matrix over the usable
/// sample points.
int numeric_rank(const std::vector<VectorField>& fields, const ChartPtr& chart,
                 const std::vector<EvalPoint>& points) {
    if (fields.empty()) {
        return 0;
    }
    ExprMatrix m = ExprMatrix::zero(chart->dim(), static_cast<int>(fields.size()));
    for (int c = 0; c < chart->dim(); ++c) {
        for (int j = 0; j < static_cast<int>(fields.size()); ++j) {
            m.at(c, j) = fields[static_cast<std::size_t>(j)].coefficient(c);
        }
    }
    int best = 0;
    for (const EvalPoint& p : points) {
        try {
            best = std::max(best, svd_rank(eval_matrix(m, p)));
        } catch (const SingularEvaluation&) {
            continue;
        }
    }
    return best;
}

} // namespace

LieAlgebraPresentation derived_tangential_frame(const DarbouxProjection& proj,
                                                const LiftedFrame& lift, Side side) {
    const ChartPtr& chart = proj.sys.chart();
    const std::vector<VectorField>& lifts = side == Side::F ? lift.f : lift.g;
    const int s = proj.fiber_dim();
    if (s == 0) {
        LieAlgebraPresentation empty;
        empty.chart = chart;
        return empty;
    }
    const auto& points = proj.sys.v().sample_points();

    std::vector<VectorField> verts;
    int rank = 0;
    auto try_add = [&](const VectorField& candidate) {
        if (rank == s || candidate.is_literal_zero()) {
            return false;
        }
        std::vector<VectorField> trial = verts;
        trial.push_back(candidate);
        if (numeric_rank(trial, chart, points) <= rank) {
            return false;
        }
        verts.push_back(candidate);
        ++rank;
        return true;
    };

    // Seed with the brackets of the lifted frame (vertical because the base
    // frame commutes), then sweep brackets of lifts against collected
    // verticals and of verticals among themselves until the span fills the
    // fiber tangent bundle.
    for (std::size_t i = 0; i < lifts.size() && rank < s; ++i) {
        for (std::size_t j = i + 1; j < lifts.size() && rank < s; ++j) {
            try_add(lie_bracket(lifts[i], lifts[j]));
        }
    }
    for (int sweep = 0; sweep < 2 * s + 4 && rank < s; ++sweep) {
        bool progress = false;
        const std::vector<VectorField> snapshot = verts;
        for (const VectorField& x : lifts) {
            for (const VectorField& v : snapshot) {
                if (rank == s) {
                    break;
                }
                progress = try_add(lie_bracket(x, v)) || progress;
            }
        }
        for (std::size_t i = 0; i < snapshot.size() && rank < s; ++i) {
            for (std::size_t j = i + 1; j < snapshot.size() && rank < s; ++j) {
                progress = try_add(lie_bracket(snapshot[i], snapshot[j])) || progress;
            }
        }
        if (!progress && rank < s) {
            throw std::runtime_error("derived tangential frame: the bracket span stalled at rank " +
                                     std::to_string(rank) + " below the fiber dimension " +
                                     std::to_string(s));
        }
    }
    if (rank < s) {
        throw std::runtime_error("derived tangential frame: the bracket span stalled at rank " +
                                 std::to_string(rank) + " below the fiber dimension " +
                                 std::to_string(s));
    }
    return structure_constants(chart, verts, chart->policy(proj.sys.f().seed()));
}

// ---------------------------------------------------------------------------
// Coefficient base-dependence and tangential symmetries
// ---------------------------------------------------------------------------

ZeroVerdict coefficients_depend_only_on_base1(const LieAlgebraPresentation& pres,
                                              const DarbouxProjection& proj) {
    ZeroVerdict out;
    out.verdict = Verdict::Zero;
    out.certification = Certification::Symbolic;
    std::vector<VectorField> killers = proj.sys.g().generators();
    killers.insert(killers.end(), proj.z.generators().begin(), proj.z.generators().end());
    const SamplingPolicy policy = proj.sys.chart()->policy(proj.sys.f().seed());
    std::optional<ZeroVerdict> unknown;
    for (const Expr& c : pres.coeffs) {
        if (c.is_literal_zero() || c.constant_value().has_value()) {
            continue;
        }
        for (const VectorField& w : killers) {
            const ZeroVerdict v = is_zero(w.apply(c), policy);
            if (v.is_nonzero()) {
                return v;
            }
            if (v.is_unknown() && !unknown) {
                unknown = v;
            }
            if (v.certification == Certification::Numeric) {
                out.certification = Certification::Numeric;
            }
        }
    }
    if (unknown) {
        return *unknown;
    }
    return out;
}

CheckStatus verify_tangential_symmetry(const VectorField& x, const DarbouxProjection& proj,
                                       Side side, std::string* why) {
    if (!same_chart(x.chart(), proj.sys.chart())) {
        throw std::invalid_argument("tangential symmetry: field lives on a different chart");
    }
    const SamplingPolicy policy = proj.sys.chart()->policy(proj.sys.f().seed());
    bool unknown = false;
    std::string unknown_why;
    for (std::size_t m = 0; m < proj.pi.components.size(); ++m) {
        const ZeroVerdict v = is_zero(x.apply(proj.pi.components[m]), policy);
        if (v.is_nonzero()) {
            if (why) {
                *why = "not vertical: moves projection component #" + std::to_string(m + 1);
            }
            return CheckStatus::Fail;
        }
        if (v.is_unknown() && !unknown) {
            unknown = true;
            unknown_why =
                "verticality against projection component #" + std::to_string(m + 1) +
                " could not be certified";
        }
    }
    const Distribution& d = side == Side::F ? proj.sys.f() : proj.sys.g();
    for (std::size_t i = 0; i < d.generators().size(); ++i) {
        const VectorField b = lie_bracket(x, d.generators()[i]);
        if (b.is_literal_zero()) {
            continue;
        }
        if (!d.contains_pointwise(b)) {
            if (why) {
                *why = std::string("[x, ") + side_name(side) + "_" + std::to_string(i + 1) +
                       "] leaves the characteristic distribution";
            }
            return CheckStatus::Fail;
        }
    }
    if (unknown) {
        if (why) {
            *why = unknown_why;
        }
        return CheckStatus::Indeterminate;
    }
    return CheckStatus::Ok;
}

// ---------------------------------------------------------------------------
// Evaluation maps and reciprocal pairs
// ---------------------------------------------------------------------------

Eigen::MatrixXd evaluation_map(const std::vector<VectorField>& frame,
                               const std::vector<int>& fiber_coords, const EvalPoint& p) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(fiber_coords.size()),
                      static_cast<Eigen::Index>(frame.size()));
    for (std::size_t r = 0; r < fiber_coords.size(); ++r) {
        for (std::size_t j = 0; j < frame.size(); ++j) {
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) =
                eval_at(frame[j].coefficient(fiber_coords[r]), p);
        }
    }
    return m;
}

Eigen::MatrixXd evaluation_map(const std::vector<VectorField>& frame, const EvalPoint& p) {
    if (frame.empty()) {
        return Eigen::MatrixXd(0, 0);
    }
    std::vector<int> all(static_cast<std::size_t>(frame.front().chart()->dim()));
    for (std::size_t i = 0; i < all.size(); ++i) {
        all[i] = static_cast<int>(i);
    }
    return evaluation_map(frame, all, p);
}

ReciprocalReport check_reciprocal(const LieAlgebraPresentation& a,
                                  const LieAlgebraPresentation& b,
                                  const std::vector<EvalPoint>& points) {
    if (!same_chart(a.chart, b.chart)) {
        throw std::invalid_argument("reciprocal check: the frames live on different charts");
    }
    if (points.empty()) {
        throw std::invalid_argument("reciprocal check: need at least one evaluation point");
    }
    const int m = a.dim();
    if (m != b.dim() || m != a.chart->dim()) {
        throw std::invalid_argument(
            "reciprocal check: both frames must have exactly chart-dimension many fields");
    }
    ReciprocalReport rep;
    auto add = [&](std::string condition, CheckStatus status, std::string detail) {
        rep.findings.push_back({std::move(condition), status, std::move(detail)});
    };

    // Centralizer property.
    rep.commute = true;
    const SamplingPolicy policy = a.chart->policy();
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
            const VectorField br = lie_bracket(a.frame[static_cast<std::size_t>(i)],
                                               b.frame[static_cast<std::size_t>(j)]);
            for (int c = 0; c < m; ++c) {
                const ZeroVerdict v = is_zero(br.coefficient(c), policy);
                if (v.is_zero()) {
                    continue;
                }
                rep.commute = false;
                add("commute[" + std::to_string(i + 1) + "," + std::to_string(j + 1) + "]",
                    v.is_nonzero() ? CheckStatus::Fail : CheckStatus::Indeterminate,
                    v.is_nonzero() ? nonzero_detail(v) : "zero-verdict unknown");
                break;
            }
        }
    }

    // Pointwise transitivity and the anti-isomorphism residual.
    rep.transitive_a = true;
    rep.transitive_b = true;
    double residual = 0.0;
    for (std::size_t pi = 0; pi < points.size(); ++pi) {
        Eigen::MatrixXd ea;
        Eigen::MatrixXd eb;
        std::vector<double> ca(static_cast<std::size_t>(m) * m * m);
        std::vector<double> cb(static_cast<std::size_t>(m) * m * m);
        try {
            ea = evaluation_map(a.frame, points[pi]);
            eb = evaluation_map(b.frame, points[pi]);
            for (int kk = 0; kk < m; ++kk) {
                for (int i = 0; i < m; ++i) {
                    for (int j = 0; j < m; ++j) {
                        const std::size_t idx = static_cast<std::size_t>((kk * m + i) * m + j);
                        ca[idx] = eval_at(a.structure(kk, i, j), points[pi]);
                        cb[idx] = eval_at(b.structure(kk, i, j), points[pi]);
                    }
                }
            }
        } catch (const SingularEvaluation& ex) {
            add("evaluation[point " + std::to_string(pi + 1) + "]", CheckStatus::Indeterminate,
                ex.what());
            continue;
        }
        const bool inv_a = svd_rank(ea) == m;
        const bool inv_b = svd_rank(eb) == m;
        if (!inv_a) {
            rep.transitive_a = false;
            add("transitive-A[point " + std::to_string(pi + 1) + "]", CheckStatus::Fail,
                "evaluation map is singular");
        }
        if (!inv_b) {
            rep.transitive_b = false;
            add("transitive-B[point " + std::to_string(pi + 1) + "]", CheckStatus::Fail,
                "evaluation map is singular");
        }
        if (!inv_a || !inv_b) {
            continue;
        }
        const Eigen::MatrixXd alpha = eb.fullPivLu().solve(ea);
        for (int i = 0; i < m; ++i) {
            for (int j = i + 1; j < m; ++j) {
                Eigen::VectorXd w(m);
                for (int kk = 0; kk < m; ++kk) {
                    w(kk) = ca[static_cast<std::size_t>((kk * m + i) * m + j)];
                }
                Eigen::VectorXd v = Eigen::VectorXd::Zero(m);
                for (int kk = 0; kk < m; ++kk) {
                    double acc = 0.0;
                    for (int mm = 0; mm < m; ++mm) {
                        for (int nn = 0; nn < m; ++nn) {
                            acc += cb[static_cast<std::size_t>((kk * m + mm) * m + nn)] *
                                   alpha(mm, i) * alpha(nn, j);
                        }
                    }
                    v(kk) = acc;
                }
                const Eigen::VectorXd rho = alpha * w + v;
                residual = std::max(residual, rho.cwiseAbs().maxCoeff());
            }
        }
    }
    rep.anti_iso_residual = residual;
    return rep;
}

// ---------------------------------------------------------------------------
// Grid-sampled reciprocal frame
// ---------------------------------------------------------------------------

int GridFrame::node_count() const {
    int n = 1;
    for (const int s : shape) {
        n *= s;
    }
    return n;
}

int GridFrame::node_index(const std::vector<int>& idx) const {
    int out = 0;
    for (std::size_t d = 0; d < shape.size(); ++d) {
        out = out * shape[d] + idx[d];
    }
    return out;
}

std::vector<double> GridFrame::node_point(const std::vector<int>& idx) const {
    std::vector<double> x(shape.size());
    for (std::size_t d = 0; d < shape.size(); ++d) {
        x[d] = lo[d] + step[d] * idx[d];
    }
    return x;
}

namespace {

/// Multilinear interpolation of a per-node (rows x cols) record.
Eigen::MatrixXd interpolate_records(const GridFrame& g, const std::vector<double>& data,
                                    int rows, int cols, const std::vector<double>& x) {
    const int dims = static_cast<int>(g.shape.size());
    if (static_cast<int>(x.size()) != dims) {
        throw std::invalid_argument("grid interpolation: point dimension mismatch");
    }
    std::vector<int> cell(static_cast<std::size_t>(dims), 0);
    std::vector<double> t(static_cast<std::size_t>(dims), 0.0);
    for (int d = 0; d < dims; ++d) {
        if (g.shape[static_cast<std::size_t>(d)] < 2) {
            continue;
        }
        double u = (x[static_cast<std::size_t>(d)] - g.lo[static_cast<std::size_t>(d)]) /
                   g.step[static_cast<std::size_t>(d)];
        u = std::clamp(u, 0.0, static_cast<double>(g.shape[static_cast<std::size_t>(d)] - 1));
        const int i0 = std::min(static_cast<int>(std::floor(u)),
                                g.shape[static_cast<std::size_t>(d)] - 2);
        cell[static_cast<std::size_t>(d)] = i0;
        t[static_cast<std::size_t>(d)] = u - i0;
    }
    const int record = rows * cols;
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rows, cols);
    std::vector<int> idx(static_cast<std::size_t>(dims), 0);
    for (int corner = 0; corner < (1 << dims); ++corner) {
        double weight = 1.0;
        for (int d = 0; d < dims; ++d) {
            const bool high = (corner >> d) & 1;
            weight *= high ? t[static_cast<std::size_t>(d)] : 1.0 - t[static_cast<std::size_t>(d)];
            idx[static_cast<std::size_t>(d)] = cell[static_cast<std::size_t>(d)] + (high ? 1 : 0);
        }
        if (weight == 0.0) {
            continue;
        }
        const std::size_t base = static_cast<std::size_t>(g.node_index(idx)) *
                                 static_cast<std::size_t>(record);
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cols; ++c) {
                out(r, c) += weight * data[base + static_cast<std::size_t>(r * cols + c)];
            }
        }
    }
    return out;
}

} // namespace

Eigen::MatrixXd GridFrame::coefficients_at(const std::vector<double>& x) const {
    return interpolate_records(*this, coeffs, fields, fields, x);
}

Eigen::MatrixXd GridFrame::vectors_at(const std::vector<double>& x) const {
    return interpolate_records(*this, vectors, chart->dim(), fields, x);
}

std::string GridFrame::to_csv() const {
    std::ostringstream os;
    os.precision(17);
    for (int c = 0; c < chart->dim(); ++c) {
        os << (c ? "," : "") << chart->coord_name(c);
    }
    for (int l = 0; l < fields; ++l) {
        for (int i = 0; i < fields; ++i) {
            os << ",a_" << l + 1 << "_" << i + 1;
        }
    }
    os << "\n";
    const int dims = static_cast<int>(shape.size());
    std::vector<int> idx(static_cast<std::size_t>(dims), 0);
    const int total = node_count();
    const int record = fields * fields;
    for (int node = 0; node < total; ++node) {
        const std::vector<double> x = node_point(idx);
        for (int d = 0; d < dims; ++d) {
            os << (d ? "," : "") << x[static_cast<std::size_t>(d)];
        }
        for (int q = 0; q < record; ++q) {
            os << "," << coeffs[static_cast<std::size_t>(node) * record + static_cast<std::size_t>(q)];
        }
        os << "\n";
        for (int d = dims - 1; d >= 0; --d) {
            if (++idx[static_cast<std::size_t>(d)] < shape[static_cast<std::size_t>(d)]) {
                break;
            }
            idx[static_cast<std::size_t>(d)] = 0;
        }
    }
    return os.str();
}

namespace {

/// Compiled chart-component matrix of a frame: E(x) column j = field j.
struct CompiledFrame {
    int dim = 0;
    int nfields = 0;
    std::vector<CompiledExpr> comps;  ///< row-major (coord, field)
    std::vector<CompiledExpr> derivs; ///< (coord, field, axis)

    CompiledFrame(const LieAlgebraPresentation& pres, bool with_derivatives) {
        const ChartPtr& chart = pres.chart;
        dim = chart->dim();
        nfields = pres.dim();
        for (int c = 0; c < dim; ++c) {
            for (int j = 0; j < nfields; ++j) {
                comps.emplace_back(pres.frame[static_cast<std::size_t>(j)].coefficient(c),
                                   chart->coords);
                if (with_derivatives) {
                    for (int d = 0; d < dim; ++d) {
                        derivs.emplace_back(
                            differentiate(pres.frame[static_cast<std::size_t>(j)].coefficient(c),
                                          chart->coords[static_cast<std::size_t>(d)]),
                            chart->coords);
                    }
                }
            }
        }
    }

    Eigen::MatrixXd eval(const std::vector<double>& x) const {
        Eigen::MatrixXd e(dim, nfields);
        for (int c = 0; c < dim; ++c) {
            for (int j = 0; j < nfields; ++j) {
                e(c, j) = comps[static_cast<std::size_t>(c * nfields + j)].eval(x.data());
            }
        }
        return e;
    }

    double deriv(int coord, int field, int axis, const std::vector<double>& x) const {
        return derivs[static_cast<std::size_t>((coord * nfields + field) * dim + axis)].eval(
            x.data());
    }
};

} // namespace

GridFrame reciprocal_frame(const LieAlgebraPresentation& pres,
                           const std::vector<double>& base_point, const GridSpec& grid) {
    const ChartPtr& chart = pres.chart;
    const int s = pres.dim();
    const int dims = chart->dim();
    if (s != dims) {
        throw std::invalid_argument(
            "reciprocal frame: the frame must be a local parallelism (one field per coordinate)");
    }
    if (!pres.has_constant_coefficients()) {
        throw std::invalid_argument("reciprocal frame: structure coefficients must be constant");
    }
    if (static_cast<int>(grid.lo.size()) != dims || static_cast<int>(grid.hi.size()) != dims ||
        static_cast<int>(grid.shape.size()) != dims ||
        static_cast<int>(base_point.size()) != dims) {
        throw std::invalid_argument("reciprocal frame: grid/point dimension mismatch");
    }

    GridFrame out;
    out.chart = chart;
    out.lo = grid.lo;
    out.shape = grid.shape;
    out.fields = s;
    out.abs_tol = grid.abs_tol;
    out.rel_tol = grid.rel_tol;
    out.step.assign(static_cast<std::size_t>(dims), 0.0);
    std::vector<int> base_idx(static_cast<std::size_t>(dims), 0);
    for (int d = 0; d < dims; ++d) {
        const double axis_lo = grid.lo[static_cast<std::size_t>(d)];
        const double axis_hi = grid.hi[static_cast<std::size_t>(d)];
        const int count = grid.shape[static_cast<std::size_t>(d)];
        if (count < 1 || axis_hi < axis_lo || (count == 1 && axis_hi != axis_lo) ||
            (count > 1 && axis_hi == axis_lo)) {
            throw std::invalid_argument("reciprocal frame: inconsistent grid axis " +
                                        std::to_string(d));
        }
        out.step[static_cast<std::size_t>(d)] = count > 1 ? (axis_hi - axis_lo) / (count - 1) : 0.0;
        const double b = base_point[static_cast<std::size_t>(d)];
        if (count == 1) {
            if (std::abs(b - axis_lo) > 1e-9) {
                throw std::invalid_argument("reciprocal frame: base point is not a grid node");
            }
            continue;
        }
        const double u = (b - axis_lo) / out.step[static_cast<std::size_t>(d)];
        const double r = std::round(u);
        if (std::abs(u - r) > 1e-9 || r < 0.0 || r >= static_cast<double>(count)) {
            throw std::invalid_argument("reciprocal frame: base point is not a grid node");
        }
        base_idx[static_cast<std::size_t>(d)] = static_cast<int>(r);
    }

    std::vector<double> c(static_cast<std::size_t>(s) * s * s);
    for (int kk = 0; kk < s; ++kk) {
        for (int i = 0; i < s; ++i) {
            for (int j = 0; j < s; ++j) {
                c[static_cast<std::size_t>((kk * s + i) * s + j)] =
                    static_cast<double>(*pres.structure(kk, i, j).constant_value());
            }
        }
    }
    const CompiledFrame frame(pres, true);

    const int total = out.node_count();
    const int record = s * s;
    out.coeffs.assign(static_cast<std::size_t>(total) * static_cast<std::size_t>(record), 0.0);
    std::vector<char> filled(static_cast<std::size_t>(total), 0);

    // a(base) = identity.
    {
        const std::size_t off =
            static_cast<std::size_t>(out.node_index(base_idx)) * static_cast<std::size_t>(record);
        for (int l = 0; l < s; ++l) {
            out.coeffs[off + static_cast<std::size_t>(l * s + l)] = 1.0;
        }
        filled[static_cast<std::size_t>(out.node_index(base_idx))] = 1;
    }

    // March along grid lines: X_j(a^l_i) = -sum_m a^m_i c^l_jm, converted to
    // the coordinate derivative along the active axis through E(x)^-T.
    auto rhs_for_axis = [&frame, &c, s](int axis, std::vector<double> fixed) {
        return [&frame, &c, s, axis, fixed = std::move(fixed)](const std::vector<double>& y,
                                                               std::vector<double>& dydt,
                                                               double tt) {
            std::vector<double> x = fixed;
            x[static_cast<std::size_t>(axis)] = tt;
            const Eigen::MatrixXd e = frame.eval(x);
            Eigen::FullPivLU<Eigen::MatrixXd> lu(e);
            if (!lu.isInvertible()) {
                throw OdeError("reciprocal frame: the frame is not transitive along the sweep");
            }
            const Eigen::MatrixXd einv = lu.inverse();
            dydt.assign(static_cast<std::size_t>(s) * static_cast<std::size_t>(s), 0.0);
            for (int l = 0; l < s; ++l) {
                for (int i = 0; i < s; ++i) {
                    double acc = 0.0;
                    for (int j = 0; j < s; ++j) {
                        double xj = 0.0;
                        for (int m = 0; m < s; ++m) {
                            xj -= y[static_cast<std::size_t>(m * s + i)] *
                                  c[static_cast<std::size_t>((l * s + j) * s + m)];
                        }
                        acc += einv(j, axis) * xj;
                    }
                    dydt[static_cast<std::size_t>(l * s + i)] = acc;
                }
            }
        };
    };

    const OdeOptions opts{grid.abs_tol, grid.rel_tol};
    for (int axis = 0; axis < dims; ++axis) {
        // Seeds: before this axis is swept, exactly the nodes whose indices
        // match the base on this axis and beyond are filled.
        std::vector<int> idx = base_idx;
        std::vector<int> cursor(static_cast<std::size_t>(axis), 0);
        while (true) {
            for (int d = 0; d < axis; ++d) {
                idx[static_cast<std::size_t>(d)] = cursor[static_cast<std::size_t>(d)];
            }
            const std::vector<double> seed_point = out.node_point(idx);
            const std::size_t seed_off = static_cast<std::size_t>(out.node_index(idx)) *
                                         static_cast<std::size_t>(record);
            for (const int dir : {+1, -1}) {
                std::vector<int> walk = idx;
                std::vector<double> state(
                    out.coeffs.begin() + static_cast<std::ptrdiff_t>(seed_off),
                    out.coeffs.begin() + static_cast<std::ptrdiff_t>(seed_off + record));
                double t0 = seed_point[static_cast<std::size_t>(axis)];
                while (true) {
                    const int next = walk[static_cast<std::size_t>(axis)] + dir;
                    if (next < 0 || next >= out.shape[static_cast<std::size_t>(axis)]) {
                        break;
                    }
                    walk[static_cast<std::size_t>(axis)] = next;
                    const double t1 = out.lo[static_cast<std::size_t>(axis)] +
                                      out.step[static_cast<std::size_t>(axis)] * next;
                    state = integrate_ode(rhs_for_axis(axis, seed_point), std::move(state), t0,
                                          t1, opts);
                    t0 = t1;
                    const std::size_t off = static_cast<std::size_t>(out.node_index(walk)) *
                                            static_cast<std::size_t>(record);
                    std::copy(state.begin(), state.end(),
                              out.coeffs.begin() + static_cast<std::ptrdiff_t>(off));
                    filled[static_cast<std::size_t>(out.node_index(walk))] = 1;
                }
            }
            int d = axis - 1;
            for (; d >= 0; --d) {
                if (++cursor[static_cast<std::size_t>(d)] <
                    out.shape[static_cast<std::size_t>(d)]) {
                    break;
                }
                cursor[static_cast<std::size_t>(d)] = 0;
            }
            if (d < 0) {
                break;
            }
        }
    }
    if (std::find(filled.begin(), filled.end(), 0) != filled.end()) {
        throw std::runtime_error("reciprocal frame: internal sweep left unfilled grid nodes");
    }

    // Assembled chart components Y_i = sum_l a^l_i X_l at every node.
    out.vectors.assign(static_cast<std::size_t>(total) * static_cast<std::size_t>(dims * s), 0.0);
    {
        std::vector<int> idx(static_cast<std::size_t>(dims), 0);
        for (int node = 0; node < total; ++node) {
            const std::vector<double> x = out.node_point(idx);
            const Eigen::MatrixXd e = frame.eval(x);
            Eigen::MatrixXd a(s, s);
            for (int l = 0; l < s; ++l) {
                for (int i = 0; i < s; ++i) {
                    a(l, i) = out.coeffs[static_cast<std::size_t>(node) *
                                             static_cast<std::size_t>(record) +
                                         static_cast<std::size_t>(l * s + i)];
                }
            }
            const Eigen::MatrixXd v = e * a;
            for (int coord = 0; coord < dims; ++coord) {
                for (int i = 0; i < s; ++i) {
                    out.vectors[static_cast<std::size_t>(node) * static_cast<std::size_t>(dims * s) +
                                static_cast<std::size_t>(coord * s + i)] = v(coord, i);
                }
            }
            for (int d = dims - 1; d >= 0; --d) {
                if (++idx[static_cast<std::size_t>(d)] < out.shape[static_cast<std::size_t>(d)]) {
                    break;
                }
                idx[static_cast<std::size_t>(d)] = 0;
            }
        }
    }

    // Finite-difference commutator residual [X_j, Y_i] at interior nodes
    // (central differences for Y, exact derivatives for X).
    bool can_difference = true;
    for (int d = 0; d < dims; ++d) {
        can_difference = can_difference && out.shape[static_cast<std::size_t>(d)] >= 3;
    }
    if (can_difference) {
        std::vector<int> idx(static_cast<std::size_t>(dims), 1);
        while (true) {
            const std::vector<double> x = out.node_point(idx);
            const Eigen::MatrixXd e = frame.eval(x);
            const int node = out.node_index(idx);
            std::vector<Eigen::MatrixXd> dy(static_cast<std::size_t>(dims));
            for (int d = 0; d < dims; ++d) {
                std::vector<int> up = idx;
                std::vector<int> dn = idx;
                ++up[static_cast<std::size_t>(d)];
                --dn[static_cast<std::size_t>(d)];
                Eigen::MatrixXd hi_m(dims, s);
                Eigen::MatrixXd lo_m(dims, s);
                const std::size_t hi_off = static_cast<std::size_t>(out.node_index(up)) *
                                           static_cast<std::size_t>(dims * s);
                const std::size_t lo_off = static_cast<std::size_t>(out.node_index(dn)) *
                                           static_cast<std::size_t>(dims * s);
                for (int coord = 0; coord < dims; ++coord) {
                    for (int i = 0; i < s; ++i) {
                        hi_m(coord, i) =
                            out.vectors[hi_off + static_cast<std::size_t>(coord * s + i)];
                        lo_m(coord, i) =
                            out.vectors[lo_off + static_cast<std::size_t>(coord * s + i)];
                    }
                }
                dy[static_cast<std::size_t>(d)] =
                    (hi_m - lo_m) / (2.0 * out.step[static_cast<std::size_t>(d)]);
            }
            Eigen::MatrixXd y(dims, s);
            for (int coord = 0; coord < dims; ++coord) {
                for (int i = 0; i < s; ++i) {
                    y(coord, i) =
                        out.vectors[static_cast<std::size_t>(node) *
                                        static_cast<std::size_t>(dims * s) +
                                    static_cast<std::size_t>(coord * s + i)];
                }
            }
            for (int j = 0; j < s; ++j) {
                for (int i = 0; i < s; ++i) {
                    for (int coord = 0; coord < dims; ++coord) {
                        double comm = 0.0;
                        for (int d = 0; d < dims; ++d) {
                            comm += e(d, j) * dy[static_cast<std::size_t>(d)](coord, i);
                            comm -= y(d, i) * frame.deriv(coord, j, d, x);
                        }
                        out.max_commutator_residual =
                            std::max(out.max_commutator_residual, std::abs(comm));
                    }
                }
            }
            int d = dims - 1;
            for (; d >= 0; --d) {
                if (++idx[static_cast<std::size_t>(d)] <
                    out.shape[static_cast<std::size_t>(d)] - 1) {
                    break;
                }
                idx[static_cast<std::size_t>(d)] = 1;
            }
            if (d < 0) {
                break;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Exact fingerprinting over Q
// ---------------------------------------------------------------------------

namespace {

using RatVec = std::vector<Rational>;
using RatMat = std::vector<RatVec>;

/// In-place reduced row echelon form over Q; returns the rank.  Records one
/// pivot row per pivot column when the caller passes a slot for them.
int rat_rref(RatMat& m, std::vector<int>* pivot_row_of_col = nullptr) {
    if (m.empty()) {
        return 0;
    }
    const int rows = static_cast<int>(m.size());
    const int cols = static_cast<int>(m[0].size());
    if (pivot_row_of_col) {
        pivot_row_of_col->assign(static_cast<std::size_t>(cols), -1);
    }
    int rank = 0;
    for (int col = 0; col < cols && rank < rows; ++col) {
        int pivot = -1;
        for (int r = rank; r < rows; ++r) {
            if (m[static_cast<std::size_t>(r)][static_cast<std::size_t>(col)] != 0) {
                pivot = r;
                break;
            }
        }
        if (pivot < 0) {
            continue;
        }
        std::swap(m[static_cast<std::size_t>(rank)], m[static_cast<std::size_t>(pivot)]);
        const Rational inv = m[static_cast<std::size_t>(rank)][static_cast<std::size_t>(col)];
        for (int cc = 0; cc < cols; ++cc) {
            m[static_cast<std::size_t>(rank)][static_cast<std::size_t>(cc)] /= inv;
        }
        for (int r = 0; r < rows; ++r) {
            if (r == rank || m[static_cast<std::size_t>(r)][static_cast<std::size_t>(col)] == 0) {
                continue;
            }
            const Rational f = m[static_cast<std::size_t>(r)][static_cast<std::size_t>(col)];
            for (int cc = 0; cc < cols; ++cc) {
                m[static_cast<std::size_t>(r)][static_cast<std::size_t>(cc)] -=
                    f * m[static_cast<std::size_t>(rank)][static_cast<std::size_t>(cc)];
            }
        }
        if (pivot_row_of_col) {
            (*pivot_row_of_col)[static_cast<std::size_t>(col)] = rank;
        }
        ++rank;
    }
    return rank;
}

/// Basis (rows) of { u : u M = 0  reading m as rows of constraints on u }.
RatMat rat_nullspace(RatMat m, int cols) {
    std::vector<int> pivot_row_of_col;
    if (m.empty()) {
        // No constraints: the whole space.
        RatMat basis;
        for (int i = 0; i < cols; ++i) {
            RatVec v(static_cast<std::size_t>(cols), Rational(0));
            v[static_cast<std::size_t>(i)] = 1;
            basis.push_back(std::move(v));
        }
        return basis;
    }
    rat_rref(m, &pivot_row_of_col);
    RatMat basis;
    for (int fc = 0; fc < cols; ++fc) {
        if (pivot_row_of_col[static_cast<std::size_t>(fc)] >= 0) {
            continue;
        }
        RatVec v(static_cast<std::size_t>(cols), Rational(0));
        v[static_cast<std::size_t>(fc)] = 1;
        for (int pc = 0; pc < cols; ++pc) {
            const int pr = pivot_row_of_col[static_cast<std::size_t>(pc)];
            if (pr >= 0) {
                v[static_cast<std::size_t>(pc)] =
                    -m[static_cast<std::size_t>(pr)][static_cast<std::size_t>(fc)];
            }
        }
        basis.push_back(std::move(v));
    }
    return basis;
}

RatVec rat_bracket(const std::vector<Rational>& c, int dim, const RatVec& u, const RatVec& v) {
    RatVec w(static_cast<std::size_t>(dim), Rational(0));
    for (int kk = 0; kk < dim; ++kk) {
        for (int i = 0; i < dim; ++i) {
            if (u[static_cast<std::size_t>(i)] == 0) {
                continue;
            }
            for (int j = 0; j < dim; ++j) {
                const Rational& cc = c[static_cast<std::size_t>((kk * dim + i) * dim + j)];
                if (cc != 0 && v[static_cast<std::size_t>(j)] != 0) {
                    w[static_cast<std::size_t>(kk)] +=
                        cc * u[static_cast<std::size_t>(i)] * v[static_cast<std::size_t>(j)];
                }
            }
        }
    }
    return w;
}

RatMat identity_basis(int dim) {
    RatMat basis;
    for (int i = 0; i < dim; ++i) {
        RatVec v(static_cast<std::size_t>(dim), Rational(0));
        v[static_cast<std::size_t>(i)] = 1;
        basis.push_back(std::move(v));
    }
    return basis;
}

RatMat reduced_basis(std::vector<RatVec> vecs) {
    if (vecs.empty()) {
        return {};
    }
    RatMat m = std::move(vecs);
    const int rank = rat_rref(m);
    m.resize(static_cast<std::size_t>(rank));
    return m;
}

std::vector<int> derived_dims(const std::vector<Rational>& c, int dim) {
    RatMat basis = identity_basis(dim);
    std::vector<int> dims = {dim};
    while (true) {
        std::vector<RatVec> next;
        for (std::size_t i = 0; i < basis.size(); ++i) {
            for (std::size_t j = i + 1; j < basis.size(); ++j) {
                next.push_back(rat_bracket(c, dim, basis[i], basis[j]));
            }
        }
        const RatMat reduced = reduced_basis(std::move(next));
        const int r = static_cast<int>(reduced.size());
        if (r == dims.back()) {
            break;
        }
        dims.push_back(r);
        basis = reduced;
    }
    return dims;
}

std::vector<int> lower_central_dims(const std::vector<Rational>& c, int dim) {
    const RatMat whole = identity_basis(dim);
    RatMat basis = whole;
    std::vector<int> dims = {dim};
    while (true) {
        std::vector<RatVec> next;
        for (const RatVec& u : whole) {
            for (const RatVec& v : basis) {
                next.push_back(rat_bracket(c, dim, u, v));
            }
        }
        const RatMat reduced = reduced_basis(std::move(next));
        const int r = static_cast<int>(reduced.size());
        if (r == dims.back()) {
            break;
        }
        dims.push_back(r);
        basis = reduced;
    }
    return dims;
}

RatMat center_basis_of(const std::vector<Rational>& c, int dim) {
    if (dim == 0) {
        return {};
    }
    RatMat constraints(static_cast<std::size_t>(dim) * static_cast<std::size_t>(dim),
                       RatVec(static_cast<std::size_t>(dim), Rational(0)));
    for (int kk = 0; kk < dim; ++kk) {
        for (int j = 0; j < dim; ++j) {
            for (int i = 0; i < dim; ++i) {
                constraints[static_cast<std::size_t>(kk * dim + j)][static_cast<std::size_t>(i)] =
                    c[static_cast<std::size_t>((kk * dim + i) * dim + j)];
            }
        }
    }
    RatMat basis = rat_nullspace(std::move(constraints), dim);
    for (RatVec& v : basis) {
        for (const Rational& entry : v) {
            if (entry != 0) {
                const Rational lead = entry;
                for (Rational& e : v) {
                    e /= lead;
                }
                break;
            }
        }
    }
    return basis;
}

/// Exact signature of the Killing form by symmetric congruence reduction.
void killing_data(const std::vector<Rational>& c, int dim, int& rank, int& pos, int& neg) {
    RatMat k(static_cast<std::size_t>(dim), RatVec(static_cast<std::size_t>(dim), Rational(0)));
    for (int a = 0; a < dim; ++a) {
        for (int b = 0; b < dim; ++b) {
            Rational acc = 0;
            for (int m = 0; m < dim; ++m) {
                for (int n = 0; n < dim; ++n) {
                    acc += c[static_cast<std::size_t>((m * dim + a) * dim + n)] *
                           c[static_cast<std::size_t>((n * dim + b) * dim + m)];
                }
            }
            k[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = acc;
        }
    }
    pos = 0;
    neg = 0;
    for (int i = 0; i < dim; ++i) {
        auto& ki = k[static_cast<std::size_t>(i)];
        if (ki[static_cast<std::size_t>(i)] == 0) {
            int j = -1;
            for (int r = i + 1; r < dim; ++r) {
                if (k[static_cast<std::size_t>(r)][static_cast<std::size_t>(r)] != 0) {
                    j = r;
                    break;
                }
            }
            if (j >= 0) {
                std::swap(k[static_cast<std::size_t>(i)], k[static_cast<std::size_t>(j)]);
                for (auto& row : k) {
                    std::swap(row[static_cast<std::size_t>(i)], row[static_cast<std::size_t>(j)]);
                }
            } else {
                for (int r = i + 1; r < dim; ++r) {
                    if (ki[static_cast<std::size_t>(r)] != 0) {
                        j = r;
                        break;
                    }
                }
                if (j < 0) {
                    continue; // the remaining block's row i is entirely zero
                }
                for (int cc = 0; cc < dim; ++cc) {
                    k[static_cast<std::size_t>(i)][static_cast<std::size_t>(cc)] +=
                        k[static_cast<std::size_t>(j)][static_cast<std::size_t>(cc)];
                }
                for (int rr = 0; rr < dim; ++rr) {
                    k[static_cast<std::size_t>(rr)][static_cast<std::size_t>(i)] +=
                        k[static_cast<std::size_t>(rr)][static_cast<std::size_t>(j)];
                }
            }
        }
        const Rational d = k[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)];
        if (d == 0) {
            continue;
        }
        if (d > 0) {
            ++pos;
        } else {
            ++neg;
        }
        for (int r = i + 1; r < dim; ++r) {
            if (k[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)] == 0) {
                continue;
            }
            const Rational f =
                k[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)] / d;
            for (int cc = 0; cc < dim; ++cc) {
                k[static_cast<std::size_t>(r)][static_cast<std::size_t>(cc)] -=
                    f * k[static_cast<std::size_t>(i)][static_cast<std::size_t>(cc)];
            }
            for (int rr = 0; rr < dim; ++rr) {
                k[static_cast<std::size_t>(rr)][static_cast<std::size_t>(r)] -=
                    f * k[static_cast<std::size_t>(rr)][static_cast<std::size_t>(i)];
            }
        }
    }
    rank = pos + neg;
}

std::optional<Rational> eval_rational(const Expr& e, const RationalPoint& pt);

std::optional<Rational> eval_rational_atom(const Atom& a, const RationalPoint& pt) {
    switch (a.kind) {
    case Atom::Kind::Symbol:
        for (const auto& [id, value] : pt) {
            if (id == a.symbol) {
                return value;
            }
        }
        return std::nullopt;
    case Atom::Kind::Sum:
        return eval_rational(a.expr, pt);
    default:
        return std::nullopt; // transcendental application
    }
}

std::optional<Rational> rat_pow(const Rational& base, int power) {
    if (power < 0 && base == 0) {
        return std::nullopt;
    }
    Rational out = 1;
    for (int i = 0; i < std::abs(power); ++i) {
        out *= base;
    }
    if (power < 0) {
        out = Rational(1) / out;
    }
    return out;
}

std::optional<Rational> eval_rational(const Expr& e, const RationalPoint& pt) {
    Rational total = 0;
    for (const Monomial& m : e.terms()) {
        Rational term = m.coef;
        for (const Factor& f : m.factors) {
            const auto atom_value = eval_rational_atom(*f.atom, pt);
            if (!atom_value) {
                return std::nullopt;
            }
            const auto powered = rat_pow(*atom_value, f.power);
            if (!powered) {
                return std::nullopt;
            }
            term *= *powered;
        }
        total += term;
    }
    return total;
}

Rational rational_from_double(double x) {
    if (x == 0.0) {
        return Rational(0);
    }
    if (!std::isfinite(x)) {
        throw std::invalid_argument("cannot convert a non-finite double to a rational");
    }
    int exp = 0;
    const double mant = std::frexp(x, &exp);
    const auto imant = static_cast<long long>(std::ldexp(mant, 53));
    exp -= 53;
    Rational r(imant);
    if (exp >= 0) {
        r *= Rational(BigInt(1) << exp);
    } else {
        r /= Rational(BigInt(1) << -exp);
    }
    return r;
}

std::string join_dims(const std::vector<int>& dims) {
    std::string out;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        out += (i ? "," : "") + std::to_string(dims[i]);
    }
    return out;
}

} // namespace

bool AlgebraFingerprint::same_type(const AlgebraFingerprint& o) const {
    return dimension == o.dimension && abelian == o.abelian &&
           derived_series == o.derived_series &&
           lower_central_series == o.lower_central_series && center_dim == o.center_dim &&
           killing_rank == o.killing_rank && killing_positive == o.killing_positive &&
           killing_negative == o.killing_negative;
}

std::string AlgebraFingerprint::print() const {
    std::ostringstream os;
    os << "dim " << dimension << (abelian ? ", abelian" : "") << ", derived ("
       << join_dims(derived_series) << "), lower-central (" << join_dims(lower_central_series)
       << "), center dim " << center_dim << ", killing rank " << killing_rank << " (+"
       << killing_positive << ", -" << killing_negative << ")";
    return os.str();
}

AlgebraFingerprint fingerprint(int dim, const std::vector<Rational>& constants) {
    if (static_cast<int>(constants.size()) != dim * dim * dim) {
        throw std::invalid_argument("fingerprint: expected dim^3 structure constants");
    }
    for (int kk = 0; kk < dim; ++kk) {
        for (int i = 0; i < dim; ++i) {
            for (int j = 0; j < dim; ++j) {
                if (constants[static_cast<std::size_t>((kk * dim + i) * dim + j)] +
                        constants[static_cast<std::size_t>((kk * dim + j) * dim + i)] !=
                    0) {
                    throw std::invalid_argument(
                        "fingerprint: structure constants violate antisymmetry");
                }
            }
        }
    }
    for (int i = 0; i < dim; ++i) {
        for (int j = i + 1; j < dim; ++j) {
            for (int kk = j + 1; kk < dim; ++kk) {
                for (int m = 0; m < dim; ++m) {
                    Rational sum = 0;
                    for (int l = 0; l < dim; ++l) {
                        sum += constants[static_cast<std::size_t>((l * dim + i) * dim + j)] *
                               constants[static_cast<std::size_t>((m * dim + l) * dim + kk)];
                        sum += constants[static_cast<std::size_t>((l * dim + j) * dim + kk)] *
                               constants[static_cast<std::size_t>((m * dim + l) * dim + i)];
                        sum += constants[static_cast<std::size_t>((l * dim + kk) * dim + i)] *
                               constants[static_cast<std::size_t>((m * dim + l) * dim + j)];
                    }
                    if (sum != 0) {
                        throw std::invalid_argument(
                            "fingerprint: structure constants violate the Jacobi identity");
                    }
                }
            }
        }
    }

    AlgebraFingerprint fp;
    fp.dimension = dim;
    fp.abelian = std::all_of(constants.begin(), constants.end(),
                             [](const Rational& r) { return r == 0; });
    fp.derived_series = derived_dims(constants, dim);
    fp.lower_central_series = lower_central_dims(constants, dim);
    const RatMat center = center_basis_of(constants, dim);
    fp.center_dim = static_cast<int>(center.size());
    fp.center_basis = center;
    killing_data(constants, dim, fp.killing_rank, fp.killing_positive, fp.killing_negative);
    return fp;
}

AlgebraFingerprint fingerprint(const LieAlgebraPresentation& pres) {
    std::vector<Rational> constants;
    constants.reserve(pres.coeffs.size());
    for (const Expr& e : pres.coeffs) {
        const auto v = e.constant_value();
        if (!v) {
            throw std::invalid_argument(
                "fingerprint: the presentation does not have constant coefficients");
        }
        constants.push_back(*v);
    }
    return fingerprint(pres.dim(), constants);
}

AlgebraFingerprint fingerprint_at(const LieAlgebraPresentation& pres,
                                  const RationalPoint& point) {
    std::vector<Rational> constants;
    constants.reserve(pres.coeffs.size());
    for (const Expr& e : pres.coeffs) {
        const auto v = eval_rational(e, point);
        if (!v) {
            throw std::invalid_argument("fingerprint: a structure coefficient does not evaluate "
                                        "to a rational at the given point");
        }
        constants.push_back(*v);
    }
    return fingerprint(pres.dim(), constants);
}

// ---------------------------------------------------------------------------
// Normalization to constant structure constants
// ---------------------------------------------------------------------------

namespace {

ExprMatrix identity_expr_matrix(int n) {
    ExprMatrix m = ExprMatrix::zero(n, n);
    for (int i = 0; i < n; ++i) {
        m.at(i, i) = Expr::constant(1);
    }
    return m;
}

} // namespace

NormalizedStructure normalize_structure(const LieAlgebraPresentation& pres,
                                        const DarbouxProjection& proj) {
    const ZeroVerdict dep = coefficients_depend_only_on_base1(pres, proj);
    if (dep.is_nonzero()) {
        throw std::invalid_argument(
            "normalize: the structure coefficients are not functions of the first base factor");
    }
    if (dep.is_unknown()) {
        throw std::runtime_error("normalize: could not certify that the coefficients are "
                                 "functions of the first base factor");
    }
    const ChartPtr& chart = pres.chart;
    const int s = pres.dim();

    RationalPoint center;
    for (int i = 0; i < chart->dim(); ++i) {
        const bool boxed = static_cast<int>(chart->box.size()) == chart->dim();
        const double mid =
            boxed ? 0.5 * (chart->box[static_cast<std::size_t>(i)][0] +
                           chart->box[static_cast<std::size_t>(i)][1])
                  : 0.0;
        center.emplace_back(chart->coords[static_cast<std::size_t>(i)], rational_from_double(mid));
    }

    if (pres.has_constant_coefficients()) {
        return {pres, identity_expr_matrix(s), center};
    }

    const SamplingPolicy policy = chart->policy(proj.sys.f().seed());
    bool all_zero = true;
    bool unknown = false;
    for (const Expr& c : pres.coeffs) {
        const ZeroVerdict v = is_zero(c, policy);
        if (v.is_nonzero()) {
            all_zero = false;
        } else if (v.is_unknown()) {
            unknown = true;
        }
    }
    if (all_zero && !unknown) {
        LieAlgebraPresentation flat = pres;
        flat.coeffs.assign(flat.coeffs.size(), Expr());
        return {flat, identity_expr_matrix(s), center};
    }

    if (s != 2) {
        throw NotImplementedForType(
            "normalize: the catalog covers constant, abelian, and two-dimensional structures; "
            "got a " +
            std::to_string(s) + "-dimensional structure with nonconstant coefficients");
    }

    // [X1, X2] = a(x) X1 + b(x) X2 with a, b functions of the first base
    // factor.  A pointwise-algebraic frame change Y = mu X with mu likewise
    // constant on fibers transforms (a, b) by the adjugate of mu, so the
    // target constants are the values over the reference fiber.
    const Expr a = pres.structure(0, 0, 1);
    const Expr b = pres.structure(1, 0, 1);
    const auto a_star = eval_rational(a, center);
    const auto b_star = eval_rational(b, center);
    if (!a_star || !b_star) {
        throw NotImplementedForType(
            "normalize: the coefficients do not evaluate rationally at the reference fiber");
    }
    const ZeroVerdict va = is_zero(a, policy);
    ExprMatrix mu = ExprMatrix::zero(2, 2);
    if (va.is_zero()) {
        if (*b_star == 0) {
            throw NotImplementedForType(
                "normalize: the reference fiber is degenerate (c^2_12 vanishes at the box "
                "center)");
        }
        mu.at(0, 0) = Expr::constant(*b_star) * b.pow(-1);
        mu.at(1, 1) = Expr::constant(1);
    } else if (va.is_nonzero()) {
        if (*a_star == 0) {
            throw NotImplementedForType(
                "normalize: the reference fiber is degenerate (c^1_12 vanishes at the box "
                "center)");
        }
        const Expr ainv = a.pow(-1);
        mu.at(0, 0) = Expr::constant(1);
        mu.at(0, 1) = (b - Expr::constant(*b_star)) * ainv;
        mu.at(1, 1) = Expr::constant(*a_star) * ainv;
    } else {
        throw std::runtime_error("normalize: the zero-verdict for c^1_12 is unknown");
    }

    std::vector<VectorField> frame;
    for (int i = 0; i < 2; ++i) {
        VectorField y = VectorField::zero(chart);
        for (int j = 0; j < 2; ++j) {
            if (!mu.at(i, j).is_literal_zero()) {
                y = y + pres.frame[static_cast<std::size_t>(j)] * mu.at(i, j);
            }
        }
        frame.push_back(std::move(y));
    }

    // Verify the defining identity [Y1, Y2] = a* Y1 + b* Y2.
    const VectorField residual = lie_bracket(frame[0], frame[1]) -
                                 (frame[0] * Expr::constant(*a_star) +
                                  frame[1] * Expr::constant(*b_star));
    for (int c = 0; c < chart->dim(); ++c) {
        const ZeroVerdict v = is_zero(residual.coefficient(c), policy);
        if (v.is_nonzero()) {
            throw std::runtime_error("normalize: verification failed, the transformed frame "
                                     "does not realize the reference constants");
        }
        if (v.is_unknown()) {
            throw std::runtime_error(
                "normalize: could not certify the transformed structure constants");
        }
    }

    LieAlgebraPresentation out;
    out.chart = chart;
    out.frame = frame;
    out.coeffs.assign(8, Expr());
    out.coeffs[static_cast<std::size_t>((0 * 2 + 0) * 2 + 1)] = Expr::constant(*a_star);
    out.coeffs[static_cast<std::size_t>((0 * 2 + 1) * 2 + 0)] = -Expr::constant(*a_star);
    out.coeffs[static_cast<std::size_t>((1 * 2 + 0) * 2 + 1)] = Expr::constant(*b_star);
    out.coeffs[static_cast<std::size_t>((1 * 2 + 1) * 2 + 0)] = -Expr::constant(*b_star);
    return {out, mu, center};
}

// ---------------------------------------------------------------------------
// System symmetries from the center
// ---------------------------------------------------------------------------

std::vector<VectorField> system_symmetries(const LieAlgebraPresentation& normalized,
                                           const DarbouxProjection& proj) {
    if (!normalized.has_constant_coefficients()) {
        throw std::invalid_argument(
            "system symmetries: the presentation must have constant structure coefficients");
    }
    const int s = normalized.dim();
    std::vector<Rational> constants;
    constants.reserve(normalized.coeffs.size());
    for (const Expr& e : normalized.coeffs) {
        constants.push_back(*e.constant_value());
    }
    const RatMat center = center_basis_of(constants, s);

    std::vector<VectorField> out;
    for (const RatVec& u : center) {
        VectorField x = VectorField::zero(normalized.chart);
        for (int i = 0; i < s; ++i) {
            if (u[static_cast<std::size_t>(i)] != 0) {
                x = x + normalized.frame[static_cast<std::size_t>(i)] *
                            Expr::constant(u[static_cast<std::size_t>(i)]);
            }
        }
        // Scale so the first nonzero chart coefficient is +1 when that
        // coefficient is constant.
        for (int c = 0; c < normalized.chart->dim(); ++c) {
            const Expr& coef = x.coefficient(c);
            if (coef.is_literal_zero()) {
                continue;
            }
            if (const auto val = coef.constant_value(); val && *val != 0) {
                x = x * Expr::constant(Rational(1) / *val);
            }
            break;
        }
        for (const Side side : {Side::F, Side::G}) {
            std::string why;
            const CheckStatus st = verify_tangential_symmetry(x, proj, side, &why);
            if (st == CheckStatus::Fail) {
                throw std::runtime_error(std::string("system symmetries: a center element is "
                                                     "not a tangential symmetry of ") +
                                         side_name(side) + ": " + why);
            }
            if (st == CheckStatus::Indeterminate) {
                throw std::runtime_error(
                    std::string("system symmetries: could not certify a center element against ") +
                    side_name(side) + ": " + why);
            }
        }
        out.push_back(std::move(x));
    }
    return out;
}

} // namespace eds
