/**
 * @file  geometry.cpp
 */
#include "eds/geometry.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace eds {

// ---------------------------------------------------------------------------
// Chart
// ---------------------------------------------------------------------------

ChartPtr Chart::make(const std::vector<std::string>& names,
                     std::array<double, 2> default_box) {
    if (names.empty()) {
        throw std::invalid_argument("chart needs at least one coordinate");
    }
    auto chart = std::make_shared<Chart>();
    for (const std::string& n : names) {
        const int id = Symbols::intern(n);
        if (std::find(chart->coords.begin(), chart->coords.end(), id) != chart->coords.end()) {
            throw std::invalid_argument("duplicate chart coordinate '" + n + "'");
        }
        chart->coords.push_back(id);
    }
    chart->box.assign(names.size(), default_box);
    return chart;
}

int Chart::index_of(int symbol_id) const {
    for (std::size_t i = 0; i < coords.size(); ++i) {
        if (coords[i] == symbol_id) {
            return static_cast<int>(i);
        }
    }
    return -1;
}

const std::string& Chart::coord_name(int index) const {
    return Symbols::name(coords[static_cast<std::size_t>(index)]);
}

SymbolTableView Chart::symbol_table() const {
    SymbolTableView v;
    v.ids = coords;
    return v;
}

SamplingPolicy Chart::policy(std::uint64_t seed) const {
    SamplingPolicy p;
    p.symbol_ids = coords;
    p.box = box;
    if (p.box.size() != coords.size()) {
        p.box.assign(coords.size(), std::array<double, 2>{-2.0, 2.0});
    }
    p.exclusions = exclusions;
    p.seed = seed;
    return p;
}

bool same_chart(const ChartPtr& a, const ChartPtr& b) {
    if (a == b) {
        return true;
    }
    return a && b && a->coords == b->coords;
}

std::string fresh_coord_name(const Chart& chart, const std::string& base) {
    std::string candidate = base;
    for (int attempt = 1;; ++attempt) {
        const auto id = Symbols::lookup(candidate);
        if (!id || chart.index_of(*id) < 0) {
            return candidate;
        }
        candidate = base + "_" + std::to_string(attempt);
    }
}

// ---------------------------------------------------------------------------
// VectorField
// ---------------------------------------------------------------------------

VectorField::VectorField(ChartPtr chart, std::vector<Expr> coefficients)
    : chart_(std::move(chart)), coef_(std::move(coefficients)) {
    if (!chart_) {
        throw std::invalid_argument("vector field needs a chart");
    }
    if (static_cast<int>(coef_.size()) != chart_->dim()) {
        throw std::invalid_argument("vector field has " + std::to_string(coef_.size()) +
                                    " coefficients on a " + std::to_string(chart_->dim()) +
                                    "-dimensional chart");
    }
    for (const Expr& c : coef_) {
        for (const int s : c.symbols()) {
            if (chart_->index_of(s) < 0) {
                throw std::invalid_argument("coefficient uses symbol '" + Symbols::name(s) +
                                            "' outside the chart");
            }
        }
    }
}

VectorField VectorField::zero(const ChartPtr& chart) {
    return VectorField(chart, std::vector<Expr>(static_cast<std::size_t>(chart->dim())));
}

VectorField VectorField::coordinate(const ChartPtr& chart, int index) {
    std::vector<Expr> c(static_cast<std::size_t>(chart->dim()));
    c[static_cast<std::size_t>(index)] = Expr::constant(1);
    return VectorField(chart, std::move(c));
}

Expr VectorField::apply(const Expr& f) const {
    Expr out;
    for (std::size_t i = 0; i < coef_.size(); ++i) {
        if (coef_[i].is_literal_zero()) {
            continue;
        }
        const Expr df = differentiate(f, chart_->coords[i]);
        if (!df.is_literal_zero()) {
            out = out + coef_[i] * df;
        }
    }
    return out;
}

bool VectorField::is_literal_zero() const {
    return std::all_of(coef_.begin(), coef_.end(),
                       [](const Expr& e) { return e.is_literal_zero(); });
}

VectorField VectorField::operator+(const VectorField& other) const {
    if (!same_chart(chart_, other.chart_)) {
        throw std::invalid_argument("vector field addition across different charts");
    }
    std::vector<Expr> c(coef_.size());
    for (std::size_t i = 0; i < coef_.size(); ++i) {
        c[i] = coef_[i] + other.coef_[i];
    }
    return VectorField(chart_, std::move(c));
}

VectorField VectorField::operator-(const VectorField& other) const {
    return *this + (-other);
}

VectorField VectorField::operator-() const {
    std::vector<Expr> c(coef_.size());
    for (std::size_t i = 0; i < coef_.size(); ++i) {
        c[i] = -coef_[i];
    }
    return VectorField(chart_, std::move(c));
}

VectorField VectorField::operator*(const Expr& scale) const {
    std::vector<Expr> c(coef_.size());
    for (std::size_t i = 0; i < coef_.size(); ++i) {
        c[i] = coef_[i] * scale;
    }
    return VectorField(chart_, std::move(c));
}

std::string VectorField::print() const {
    std::string s;
    for (std::size_t i = 0; i < coef_.size(); ++i) {
        const Expr& c = coef_[i];
        if (c.is_literal_zero()) {
            continue;
        }
        bool neg = false;
        Expr shown = c;
        if (c.terms().size() == 1 && c.terms().front().coef < 0) {
            neg = true;
            shown = -c;
        }
        std::string piece;
        const std::string dd = "d/d" + Symbols::name(chart_->coords[i]);
        if (shown.is_literal_one()) {
            piece = dd;
        } else if (shown.terms().size() > 1) {
            piece = "(" + shown.print() + ")*" + dd;
        } else {
            piece = shown.print() + "*" + dd;
        }
        if (s.empty()) {
            s = neg ? "-" + piece : piece;
        } else {
            s += (neg ? " - " : " + ") + piece;
        }
    }
    return s.empty() ? "0" : s;
}

VectorField lie_bracket(const VectorField& x, const VectorField& y) {
    if (!same_chart(x.chart(), y.chart())) {
        throw std::invalid_argument("lie bracket across different charts");
    }
    const int n = x.chart()->dim();
    std::vector<Expr> c(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        c[static_cast<std::size_t>(i)] =
            x.apply(y.coefficient(i)) - y.apply(x.coefficient(i));
    }
    return VectorField(x.chart(), std::move(c));
}

// ---------------------------------------------------------------------------
// Vector field parsing
// ---------------------------------------------------------------------------

namespace {

bool all_blank(const std::string& s) {
    return std::all_of(s.begin(), s.end(),
                       [](unsigned char c) { return std::isspace(c) != 0; });
}

/// Splits field text into signed terms at top-level '+'/'-' separators.
/// Signs with nothing before them (leading unary minus) fold into the term
/// sign; signs following an operator (as in x^-1) stay inside the term.
std::vector<std::pair<int, std::string>> split_signed_terms(const std::string& text) {
    std::vector<std::pair<int, std::string>> out;
    int depth = 0;
    int sign = 1;
    std::size_t start = 0;
    char prev_op = '\0'; // last non-space significant char
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (c == '(') {
            ++depth;
        } else if (c == ')') {
            --depth;
        } else if ((c == '+' || c == '-') && depth == 0) {
            const std::string head = text.substr(start, i - start);
            if (all_blank(head)) {
                if (c == '-') {
                    sign = -sign;
                }
                start = i + 1;
                prev_op = '\0';
                continue;
            }
            const bool in_operand =
                prev_op != '\0' && std::string("*/^+-(").find(prev_op) != std::string::npos;
            if (!in_operand) {
                out.emplace_back(sign, head);
                sign = (c == '-') ? -1 : 1;
                start = i + 1;
                prev_op = '\0';
                continue;
            }
        }
        if (!std::isspace(static_cast<unsigned char>(c))) {
            prev_op = c;
        }
    }
    out.emplace_back(sign, text.substr(start));
    return out;
}

} // namespace

VectorField parse_vector_field(const std::string& text, const ChartPtr& chart) {
    std::vector<Expr> coef(static_cast<std::size_t>(chart->dim()));
    const SymbolTableView table = chart->symbol_table();

    for (auto& [sign, piece] : split_signed_terms(text)) {
        // Locate the trailing d/d<coord> at parenthesis depth zero.
        int depth = 0;
        std::size_t dpos = std::string::npos;
        for (std::size_t i = 0; i + 2 < piece.size(); ++i) {
            if (piece[i] == '(') {
                ++depth;
            } else if (piece[i] == ')') {
                --depth;
            } else if (depth == 0 && piece.compare(i, 3, "d/d") == 0) {
                dpos = i;
            }
        }
        if (dpos == std::string::npos) {
            throw ParseError("field term lacks a d/d<coord> factor: '" + piece + "'", 0);
        }
        std::size_t j = dpos + 3;
        if (j >= piece.size() || !std::isalpha(static_cast<unsigned char>(piece[j]))) {
            throw ParseError("malformed derivation in field term: '" + piece + "'", dpos);
        }
        std::size_t name_end = j;
        while (name_end < piece.size() &&
               (std::isalnum(static_cast<unsigned char>(piece[name_end])) ||
                piece[name_end] == '_')) {
            ++name_end;
        }
        for (std::size_t k = name_end; k < piece.size(); ++k) {
            if (!std::isspace(static_cast<unsigned char>(piece[k]))) {
                throw ParseError("unexpected text after d/d" + piece.substr(j, name_end - j),
                                 k);
            }
        }
        const std::string coord = piece.substr(j, name_end - j);
        const auto sym = Symbols::lookup(coord);
        const int index = sym ? chart->index_of(*sym) : -1;
        if (index < 0) {
            throw ParseError("d/d" + coord + " is not a chart coordinate", dpos);
        }

        std::string prefix = piece.substr(0, dpos);
        while (!prefix.empty() && std::isspace(static_cast<unsigned char>(prefix.back()))) {
            prefix.pop_back();
        }
        Expr c = Expr::constant(1);
        if (!prefix.empty()) {
            if (prefix.back() != '*') {
                throw ParseError("coefficient must multiply d/d" + coord + " with '*'", dpos);
            }
            prefix.pop_back();
            c = parse_expr(prefix, table);
        }
        if (sign < 0) {
            c = -c;
        }
        coef[static_cast<std::size_t>(index)] = coef[static_cast<std::size_t>(index)] + c;
    }
    return VectorField(chart, std::move(coef));
}

// ---------------------------------------------------------------------------
// Distribution
// ---------------------------------------------------------------------------

namespace {

ExprMatrix coefficient_matrix(const std::vector<VectorField>& gens, int dim) {
    ExprMatrix m = ExprMatrix::zero(static_cast<int>(gens.size()), dim);
    for (int r = 0; r < m.rows; ++r) {
        for (int c = 0; c < dim; ++c) {
            m.at(r, c) = gens[static_cast<std::size_t>(r)].coefficient(c);
        }
    }
    return m;
}

std::vector<Expr> coefficient_guards(const std::vector<VectorField>& gens) {
    std::vector<Expr> guards;
    for (const VectorField& g : gens) {
        for (const Expr& c : g.coefficients()) {
            if (!c.constant_value().has_value()) {
                guards.push_back(c);
            }
        }
    }
    return guards;
}

constexpr int kRankSamplePoints = 8;

} // namespace

Distribution::Distribution(ChartPtr chart, std::vector<VectorField> generators,
                           std::uint64_t seed)
    : chart_(std::move(chart)), gens_(std::move(generators)), seed_(seed) {
    if (!chart_) {
        throw std::invalid_argument("distribution needs a chart");
    }
    for (const VectorField& g : gens_) {
        if (!same_chart(g.chart(), chart_)) {
            throw std::invalid_argument("distribution generator lives on a different chart");
        }
    }
    points_ = sample_admissible(chart_->policy(seed_), coefficient_guards(gens_),
                                kRankSamplePoints);
    if (static_cast<int>(points_.size()) < kRankSamplePoints) {
        throw std::runtime_error(
            "could not draw enough admissible sample points for the rank contract (got " +
            std::to_string(points_.size()) + ")");
    }
    const ExprMatrix m = coefficient_matrix(gens_, chart_->dim());
    for (const EvalPoint& p : points_) {
        const int r = svd_rank(eval_matrix(m, p));
        point_ranks_.push_back(r);
        generic_rank_ = std::max(generic_rank_, r);
    }
}

bool Distribution::constant_rank_violated() const {
    return std::any_of(point_ranks_.begin(), point_ranks_.end(),
                       [&](int r) { return r != generic_rank_; });
}

int Distribution::rank_at(const EvalPoint& p) const {
    return svd_rank(eval_matrix(coefficient_matrix(gens_, chart_->dim()), p));
}

bool Distribution::contains_pointwise(const VectorField& x) const {
    if (!same_chart(x.chart(), chart_)) {
        throw std::invalid_argument("containment check across different charts");
    }
    if (x.is_literal_zero()) {
        return true;
    }
    std::vector<VectorField> extended = gens_;
    extended.push_back(x);
    std::vector<Expr> guards = coefficient_guards(extended);
    const std::vector<EvalPoint> pts =
        sample_admissible(chart_->policy(seed_), guards, kRankSamplePoints);
    if (static_cast<int>(pts.size()) < kRankSamplePoints) {
        throw std::runtime_error(
            "could not draw enough admissible points for a containment check");
    }
    const ExprMatrix base = coefficient_matrix(gens_, chart_->dim());
    const ExprMatrix ext = coefficient_matrix(extended, chart_->dim());
    for (const EvalPoint& p : pts) {
        if (svd_rank(eval_matrix(ext, p)) != svd_rank(eval_matrix(base, p))) {
            return false;
        }
    }
    return true;
}

Distribution completion(const Distribution& d) {
    const ChartPtr& chart = d.chart();
    std::vector<VectorField> gens = d.generators();
    int fresh_from = 0; // pairs with both ends below this were bracketed already

    for (int sweep = 0; sweep <= chart->dim(); ++sweep) {
        const int ngens = static_cast<int>(gens.size());
        bool grew = false;
        Distribution check(chart, gens, d.seed());
        for (int i = 0; i < ngens; ++i) {
            for (int j = std::max(i + 1, fresh_from); j < ngens; ++j) {
                const VectorField b =
                    lie_bracket(gens[static_cast<std::size_t>(i)],
                                gens[static_cast<std::size_t>(j)]);
                if (b.is_literal_zero()) {
                    continue;
                }
                if (!check.contains_pointwise(b)) {
                    gens.push_back(b);
                    check = Distribution(chart, gens, d.seed());
                    grew = true;
                }
            }
        }
        fresh_from = ngens;
        if (!grew) {
            return check;
        }
    }
    throw CompletionError("bracket closure still growing after " +
                          std::to_string(chart->dim() + 1) +
                          " sweeps; the input violates the constant-rank contract");
}

int count_invariants(const Distribution& d) {
    return d.chart()->dim() - completion(d).generic_rank();
}

ZeroVerdict verify_invariant(const Distribution& d, const Expr& invariant) {
    const SamplingPolicy policy = d.chart()->policy(d.seed());
    ZeroVerdict combined;
    combined.verdict = Verdict::Zero;
    combined.certification = Certification::Symbolic;
    bool any_unknown = false;
    for (const VectorField& g : d.generators()) {
        const Expr deriv = g.apply(invariant);
        const ZeroVerdict v = is_zero(deriv, policy);
        if (v.is_nonzero()) {
            return v;
        }
        if (v.is_unknown()) {
            any_unknown = true;
        } else if (v.certification == Certification::Numeric) {
            combined.certification = Certification::Numeric;
        }
    }
    if (any_unknown) {
        combined.verdict = Verdict::Unknown;
        combined.certification = Certification::Numeric;
    }
    return combined;
}

bool functionally_independent(const std::vector<Expr>& functions, const ChartPtr& chart,
                              const EvalPoint& p, double rel_threshold) {
    const int rows = static_cast<int>(functions.size());
    ExprMatrix jac = ExprMatrix::zero(rows, chart->dim());
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < chart->dim(); ++j) {
            jac.at(i, j) = differentiate(functions[static_cast<std::size_t>(i)],
                                         chart->coords[static_cast<std::size_t>(j)]);
        }
    }
    return svd_rank(eval_matrix(jac, p), rel_threshold) == rows;
}

// ---------------------------------------------------------------------------
// Submersion and projection
// ---------------------------------------------------------------------------

namespace {

/// Source coordinate index when the expression is a bare coordinate symbol.
int bare_coordinate_index(const Expr& e, const Chart& source) {
    const auto& ts = e.terms();
    if (ts.size() != 1 || ts.front().coef != 1 || ts.front().factors.size() != 1) {
        return -1;
    }
    const Factor& f = ts.front().factors.front();
    if (f.power != 1 || f.atom->kind != Atom::Kind::Symbol) {
        return -1;
    }
    return source.index_of(f.atom->symbol);
}

} // namespace

bool Submersion::is_coordinate_projection() const {
    for (const Expr& c : components) {
        if (bare_coordinate_index(c, *source) < 0) {
            return false;
        }
    }
    return true;
}

std::vector<Expr> Submersion::pushforward(const VectorField& x) const {
    std::vector<Expr> out;
    out.reserve(components.size());
    for (const Expr& c : components) {
        out.push_back(x.apply(c));
    }
    return out;
}

ProjectionResult project_field(const VectorField& x, const Submersion& pi) {
    if (!same_chart(x.chart(), pi.source)) {
        throw std::invalid_argument("field lives on a different chart than the submersion");
    }
    if (static_cast<int>(pi.components.size()) != pi.target->dim()) {
        throw std::invalid_argument("submersion component count differs from target dimension");
    }
    ProjectionResult result;
    const std::vector<Expr> push = pi.pushforward(x);

    // Vertical frame: explicit if supplied, coordinate fields of the dropped
    // coordinates for coordinate projections.
    std::vector<VectorField> vertical = pi.vertical_frame;
    std::vector<int> kept(static_cast<std::size_t>(pi.source->dim()), -1);
    const bool coordinate_projection = pi.is_coordinate_projection();
    if (coordinate_projection) {
        for (std::size_t j = 0; j < pi.components.size(); ++j) {
            kept[static_cast<std::size_t>(bare_coordinate_index(pi.components[j],
                                                                *pi.source))] =
                static_cast<int>(j);
        }
        if (vertical.empty()) {
            for (int i = 0; i < pi.source->dim(); ++i) {
                if (kept[static_cast<std::size_t>(i)] < 0) {
                    vertical.push_back(VectorField::coordinate(pi.source, i));
                }
            }
        }
    }
    if (vertical.empty() && !coordinate_projection) {
        result.status = ProjectionStatus::Indeterminate;
        result.detail = "no vertical frame available for a non-coordinate submersion";
        return result;
    }

    const SamplingPolicy policy = pi.source->policy();
    for (std::size_t j = 0; j < push.size(); ++j) {
        for (const VectorField& z : vertical) {
            const Expr fiber_deriv = z.apply(push[j]);
            const ZeroVerdict v = is_zero(fiber_deriv, policy);
            if (v.is_nonzero()) {
                result.status = ProjectionStatus::NotProjectable;
                result.detail = "pushforward component " + std::to_string(j) + " (" +
                                push[j].print() + ") varies along the fiber direction " +
                                z.print();
                return result;
            }
            if (v.is_unknown()) {
                result.status = ProjectionStatus::Indeterminate;
                result.detail = "fiber-derivative of component " + std::to_string(j) +
                                " has an unknown zero-verdict";
                return result;
            }
        }
    }

    // Express the pushforward in target coordinates.
    std::vector<Expr> target_coef(static_cast<std::size_t>(pi.target->dim()));
    for (std::size_t j = 0; j < push.size(); ++j) {
        Expr e = push[j];
        if (coordinate_projection) {
            for (int i = 0; i < pi.source->dim(); ++i) {
                const int tgt = kept[static_cast<std::size_t>(i)];
                const int src_sym = pi.source->coords[static_cast<std::size_t>(i)];
                if (tgt >= 0) {
                    e = e.substitute(src_sym,
                                     Expr::symbol(pi.target->coords[static_cast<std::size_t>(
                                         tgt)]));
                } else if (e.contains_symbol(src_sym)) {
                    result.status = ProjectionStatus::Indeterminate;
                    result.detail =
                        "component " + std::to_string(j) +
                        " is fiber-independent numerically but still written in the fiber "
                        "coordinate '" +
                        Symbols::name(src_sym) + "'";
                    return result;
                }
            }
        } else {
            // Fiber-independence holds, but rewriting in the target chart needs
            // a closed form; only constants transfer syntactically.
            if (!e.constant_value().has_value()) {
                result.status = ProjectionStatus::Indeterminate;
                result.detail = "component " + std::to_string(j) +
                                " is constant on fibers but has no closed form in the "
                                "target coordinates";
                return result;
            }
        }
        target_coef[j] = e;
    }
    result.status = ProjectionStatus::Projected;
    result.field = VectorField(pi.target, std::move(target_coef));
    return result;
}

} // namespace eds
