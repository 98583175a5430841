/**
 * @file  decomposable.cpp
 */
#include "eds/decomposable.hpp"

#include <algorithm>
#include <stdexcept>

namespace eds {

std::string SystemClass::print() const {
    return "(" + std::to_string(s) + "," + std::to_string(k) + "," + std::to_string(l) + ")";
}

const char* check_status_name(CheckStatus s) {
    switch (s) {
    case CheckStatus::Ok: return "ok";
    case CheckStatus::Fail: return "fail";
    case CheckStatus::Indeterminate: return "indeterminate";
    }
    return "?";
}

namespace {

std::vector<VectorField> concat_generators(const Distribution& f, const Distribution& g) {
    std::vector<VectorField> gens = f.generators();
    const auto& gg = g.generators();
    gens.insert(gens.end(), gg.begin(), gg.end());
    return gens;
}

} // namespace

DecomposableSystem::DecomposableSystem(ChartPtr chart, Distribution f, Distribution g,
                                       std::string name)
    : chart_(std::move(chart)),
      f_(std::move(f)),
      g_(std::move(g)),
      v_(chart_, concat_generators(f_, g_), f_.seed()),
      name_(std::move(name)) {
    if (!same_chart(f_.chart(), chart_) || !same_chart(g_.chart(), chart_)) {
        throw std::invalid_argument("characteristic distributions live off the system chart");
    }
    cls_.k = f_.generic_rank();
    cls_.l = g_.generic_rank();
    cls_.s = chart_->dim() - cls_.k - cls_.l;
}

std::vector<ConditionReport> DecomposableReport::failures() const {
    std::vector<ConditionReport> out;
    for (const ConditionReport& c : conditions) {
        if (c.status != CheckStatus::Ok) {
            out.push_back(c);
        }
    }
    return out;
}

DecomposableReport check_decomposable(const ChartPtr& chart, const Distribution& f,
                                      const Distribution& g) {
    DecomposableReport report;
    report.cls.k = f.generic_rank();
    report.cls.l = g.generic_rank();
    report.cls.s = chart->dim() - report.cls.k - report.cls.l;

    auto add = [&](std::string condition, CheckStatus status, std::string detail) {
        report.conditions.push_back({std::move(condition), status, std::move(detail)});
    };

    // Constant-rank contract for F, G, and V.
    const Distribution v(chart, concat_generators(f, g), f.seed());
    for (const auto& [label, dist] :
         {std::pair<const char*, const Distribution*>{"constant-rank F", &f},
          {"constant-rank G", &g},
          {"constant-rank V", &v}}) {
        if (dist->constant_rank_violated()) {
            add(label, CheckStatus::Fail,
                "numeric rank varies across the admissible sample points");
        } else {
            add(label, CheckStatus::Ok, "");
        }
    }

    // Empty intersection: rank(F (+) G) = rank F + rank G at the sample points.
    {
        CheckStatus st = CheckStatus::Ok;
        std::string detail;
        if (v.generic_rank() != report.cls.k + report.cls.l || v.constant_rank_violated()) {
            st = CheckStatus::Fail;
            detail = "rank(F(+)G) = " + std::to_string(v.generic_rank()) + " but rank F + rank G = " +
                     std::to_string(report.cls.k + report.cls.l) +
                     "; the characteristic distributions intersect";
        }
        add("direct-sum", st, detail);
    }

    // Cross-brackets [F_i, G_j] contained in V pointwise.
    {
        CheckStatus st = CheckStatus::Ok;
        std::string detail;
        for (std::size_t i = 0; i < f.generators().size() && st == CheckStatus::Ok; ++i) {
            for (std::size_t j = 0; j < g.generators().size() && st == CheckStatus::Ok; ++j) {
                const VectorField b = lie_bracket(f.generators()[i], g.generators()[j]);
                try {
                    if (!v.contains_pointwise(b)) {
                        st = CheckStatus::Fail;
                        detail = "[F_" + std::to_string(i + 1) + ", G_" + std::to_string(j + 1) +
                                 "] = " + b.print() + " leaves F (+) G";
                    }
                } catch (const std::exception& ex) {
                    st = CheckStatus::Indeterminate;
                    detail = "[F_" + std::to_string(i + 1) + ", G_" + std::to_string(j + 1) +
                             "]: " + ex.what();
                }
            }
        }
        add("cross-brackets mod F(+)G", st, detail);
    }

    // No invariants of V.
    {
        CheckStatus st = CheckStatus::Ok;
        std::string detail;
        try {
            const int inv = count_invariants(v);
            report.no_invariants_of_v = (inv == 0);
            if (inv != 0) {
                st = CheckStatus::Fail;
                detail = "V has " + std::to_string(inv) + " invariant(s)";
            }
        } catch (const std::exception& ex) {
            st = CheckStatus::Indeterminate;
            detail = ex.what();
        }
        add("no-invariants V", st, detail);
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

DecomposableReport check_decomposable(const DecomposableSystem& sys) {
    return check_decomposable(sys.chart(), sys.f(), sys.g());
}

// ---------------------------------------------------------------------------
// Integral elements
// ---------------------------------------------------------------------------

namespace {

Eigen::MatrixXd generators_at(const Distribution& d, const EvalPoint& p) {
    const int n = d.chart()->dim();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(d.generators().size()), n);
    for (std::size_t r = 0; r < d.generators().size(); ++r) {
        for (int c = 0; c < n; ++c) {
            m(static_cast<Eigen::Index>(r), c) =
                eval_at(d.generators()[r].coefficient(c), p);
        }
    }
    return m;
}

} // namespace

int element_intersection_dim(const Distribution& d, const IntegralElement& e) {
    const Eigen::MatrixXd gens = generators_at(d, e.base);
    Eigen::MatrixXd span(2, gens.cols());
    for (Eigen::Index c = 0; c < gens.cols(); ++c) {
        span(0, c) = e.e1[static_cast<std::size_t>(c)];
        span(1, c) = e.e2[static_cast<std::size_t>(c)];
    }
    const int dim_e = svd_rank(span);
    const int dim_d = svd_rank(gens);
    Eigen::MatrixXd joined(gens.rows() + 2, gens.cols());
    joined.topRows(gens.rows()) = gens;
    joined.bottomRows(2) = span;
    // dim(E ∩ D) = dim E + dim D - dim(E + D).
    return dim_e + dim_d - svd_rank(joined);
}

bool is_integral_element(const DecomposableSystem& sys, const IntegralElement& e) {
    const int n = sys.chart()->dim();
    if (static_cast<int>(e.e1.size()) != n || static_cast<int>(e.e2.size()) != n) {
        throw std::invalid_argument("integral element vectors have the wrong dimension");
    }
    Eigen::MatrixXd span(2, n);
    for (int c = 0; c < n; ++c) {
        span(0, c) = e.e1[static_cast<std::size_t>(c)];
        span(1, c) = e.e2[static_cast<std::size_t>(c)];
    }
    if (svd_rank(span) != 2) {
        return false; // degenerate element
    }
    return element_intersection_dim(sys.f(), e) == 1 &&
           element_intersection_dim(sys.g(), e) == 1;
}

// ---------------------------------------------------------------------------
// Prolongation
// ---------------------------------------------------------------------------

namespace {

void require_nonvanishing(const Distribution& d, const char* label) {
    const VectorField& lead = d.generators().front();
    for (const EvalPoint& p : d.sample_points()) {
        double norm2 = 0.0;
        for (int c = 0; c < d.chart()->dim(); ++c) {
            const double v = eval_at(lead.coefficient(c), p);
            norm2 += v * v;
        }
        if (!(norm2 > 1e-18)) {
            throw std::runtime_error(std::string(label) +
                                     "_1 vanishes at a sample point; pick a frame whose "
                                     "first field is pointwise nonzero");
        }
    }
}

} // namespace

DecomposableSystem prolong(const DecomposableSystem& sys) {
    const Distribution& f = sys.f();
    const Distribution& g = sys.g();
    const int k = f.generic_rank();
    const int l = g.generic_rank();
    if (static_cast<int>(f.generators().size()) != k ||
        static_cast<int>(g.generators().size()) != l) {
        throw std::invalid_argument(
            "prolongation needs frames: generator count must equal the rank");
    }
    require_nonvanishing(f, "F");
    require_nonvanishing(g, "G");

    const int n = sys.chart()->dim();

    // Structure functions of the cross-brackets in the chosen frames,
    // [F_i, G_j] = sum_a P^a_ij F_a + sum_b Q^b_ij G_b (row-major over (i,j);
    // rows 0..k-1 hold P, rows k..k+l-1 hold Q).  The prolonged lead fields
    // need vertical corrections built from P and Q so that the cross-bracket
    // containment survives prolongation; for frames whose cross-brackets
    // vanish identically the corrections are zero and the leads reduce to
    // F_1 + sum c_i F_i and G_1 + sum d_j G_j.
    std::vector<VectorField> cross;
    cross.reserve(static_cast<std::size_t>(k * l));
    bool commuting = true;
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < l; ++j) {
            cross.push_back(lie_bracket(f.generators()[static_cast<std::size_t>(i)],
                                        g.generators()[static_cast<std::size_t>(j)]));
            if (!cross.back().is_literal_zero()) {
                commuting = false;
            }
        }
    }
    ExprMatrix structure = ExprMatrix::zero(k + l, k * l);
    if (!commuting) {
        ExprMatrix frame = ExprMatrix::zero(n, k + l);
        ExprMatrix rhs = ExprMatrix::zero(n, k * l);
        for (int r = 0; r < n; ++r) {
            for (int i = 0; i < k; ++i) {
                frame.at(r, i) = f.generators()[static_cast<std::size_t>(i)].coefficient(r);
            }
            for (int j = 0; j < l; ++j) {
                frame.at(r, k + j) = g.generators()[static_cast<std::size_t>(j)].coefficient(r);
            }
            for (int c = 0; c < k * l; ++c) {
                rhs.at(r, c) = cross[static_cast<std::size_t>(c)].coefficient(r);
            }
        }
        const SymbolicSolve sol =
            solve_linear_symbolic(frame, rhs, sys.chart()->policy(f.seed()));
        if (sol.status != SolveStatus::Solved) {
            throw std::runtime_error(
                "prolongation: a cross-bracket could not be expressed in the chosen "
                "frames (" + sol.detail + ")");
        }
        structure = sol.solution;
    }

    // Extended chart: original coordinates plus affine fiber coordinates.
    std::vector<std::string> names;
    names.reserve(static_cast<std::size_t>(sys.chart()->dim() + (k - 1) + (l - 1)));
    for (int i = 0; i < sys.chart()->dim(); ++i) {
        names.push_back(sys.chart()->coord_name(i));
    }
    std::vector<std::string> c_names, d_names;
    for (int i = 2; i <= k; ++i) {
        c_names.push_back(fresh_coord_name(*sys.chart(), "c" + std::to_string(i)));
        names.push_back(c_names.back());
    }
    for (int i = 2; i <= l; ++i) {
        d_names.push_back(fresh_coord_name(*sys.chart(), "d" + std::to_string(i)));
        names.push_back(d_names.back());
    }
    auto extended = std::make_shared<Chart>();
    for (const std::string& n : names) {
        extended->coords.push_back(Symbols::intern(n));
    }
    extended->box = sys.chart()->box;
    extended->box.resize(names.size(), std::array<double, 2>{-2.0, 2.0});
    extended->exclusions = sys.chart()->exclusions;
    const ChartPtr echart = extended;

    auto lift = [&](const VectorField& x) {
        std::vector<Expr> coef = x.coefficients();
        coef.resize(static_cast<std::size_t>(echart->dim()));
        return VectorField(echart, std::move(coef));
    };

    // Fiber-coefficient expressions with the affine normalization c_1 = d_1 = 1.
    std::vector<Expr> cexpr(static_cast<std::size_t>(k), Expr::constant(1));
    for (int i = 2; i <= k; ++i) {
        cexpr[static_cast<std::size_t>(i - 1)] =
            Expr::symbol(c_names[static_cast<std::size_t>(i - 2)]);
    }
    std::vector<Expr> dexpr(static_cast<std::size_t>(l), Expr::constant(1));
    for (int j = 2; j <= l; ++j) {
        dexpr[static_cast<std::size_t>(j - 1)] =
            Expr::symbol(d_names[static_cast<std::size_t>(j - 2)]);
    }

    // lambda^a = sum_ij c_i d_j P^a_ij and mu^b = sum_ij c_i d_j Q^b_ij are
    // the frame components of [F_1 + sum c_i F_i, G_1 + sum d_j G_j].
    std::vector<Expr> lambda(static_cast<std::size_t>(k));
    std::vector<Expr> mu(static_cast<std::size_t>(l));
    for (int a = 0; a < k; ++a) {
        Expr acc;
        for (int i = 0; i < k; ++i) {
            for (int j = 0; j < l; ++j) {
                acc = acc + cexpr[static_cast<std::size_t>(i)] *
                                dexpr[static_cast<std::size_t>(j)] * structure.at(a, i * l + j);
            }
        }
        lambda[static_cast<std::size_t>(a)] = acc;
    }
    for (int b = 0; b < l; ++b) {
        Expr acc;
        for (int i = 0; i < k; ++i) {
            for (int j = 0; j < l; ++j) {
                acc = acc + cexpr[static_cast<std::size_t>(i)] *
                                dexpr[static_cast<std::size_t>(j)] *
                                structure.at(k + b, i * l + j);
            }
        }
        mu[static_cast<std::size_t>(b)] = acc;
    }

    std::vector<VectorField> fhat;
    {
        VectorField lead = lift(f.generators().front());
        for (int i = 2; i <= k; ++i) {
            lead = lead + lift(f.generators()[static_cast<std::size_t>(i - 1)]) *
                              cexpr[static_cast<std::size_t>(i - 1)];
        }
        // Vertical correction (d_j mu^1 - mu^j) d/dd_j keeps the cross-bracket
        // with the G-side lead inside the prolonged direct sum.
        for (int j = 2; j <= l; ++j) {
            const Expr coef = dexpr[static_cast<std::size_t>(j - 1)] * mu[0] -
                              mu[static_cast<std::size_t>(j - 1)];
            lead = lead + VectorField::coordinate(
                              echart, echart->index_of(Symbols::intern(
                                          d_names[static_cast<std::size_t>(j - 2)]))) *
                              coef;
        }
        fhat.push_back(lead);
        for (const std::string& nm : c_names) {
            fhat.push_back(VectorField::coordinate(echart, echart->index_of(Symbols::intern(nm))));
        }
    }
    std::vector<VectorField> ghat;
    {
        VectorField lead = lift(g.generators().front());
        for (int j = 2; j <= l; ++j) {
            lead = lead + lift(g.generators()[static_cast<std::size_t>(j - 1)]) *
                              dexpr[static_cast<std::size_t>(j - 1)];
        }
        for (int i = 2; i <= k; ++i) {
            const Expr coef = lambda[static_cast<std::size_t>(i - 1)] -
                              cexpr[static_cast<std::size_t>(i - 1)] * lambda[0];
            lead = lead + VectorField::coordinate(
                              echart, echart->index_of(Symbols::intern(
                                          c_names[static_cast<std::size_t>(i - 2)]))) *
                              coef;
        }
        ghat.push_back(lead);
        for (const std::string& nm : d_names) {
            ghat.push_back(VectorField::coordinate(echart, echart->index_of(Symbols::intern(nm))));
        }
    }

    return DecomposableSystem(echart, Distribution(echart, fhat, f.seed()),
                              Distribution(echart, ghat, g.seed()),
                              sys.name().empty() ? "" : sys.name() + "-prolonged");
}

} // namespace eds
