/**
 * @file  expr.hpp
 * @brief Symbolic scalar expressions over named coordinates: parsing,
 *        normalization, differentiation, evaluation, and the zero-test oracle.
 *
 * Every Expr is held in a canonical sum-of-monomials normal form:
 *
 *   Expr     = ordered sum of Monomials (empty sum = 0)
 *   Monomial = exact rational coefficient x product of Atom^power (power != 0)
 *   Atom     = coordinate symbol | function application | irreducible sum
 *
 * Normalization is performed by the constructors, so it is idempotent by
 * construction.  Products of exponentials are merged (exp(a)*exp(b) ->
 * exp(a+b)), positive integer powers of small sums are expanded, and sums kept
 * as atoms (negative powers, oversized expansions) are reduced by extracting
 * rational content and common factors so that structurally equal values
 * compare equal.
 */
#ifndef EDS_EXPR_HPP
#define EDS_EXPR_HPP

#include "eds/rational.hpp"

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace eds {

// ---------------------------------------------------------------------------
// Symbols
// ---------------------------------------------------------------------------

/// Process-wide interned symbol registry; ids are stable for the process
/// lifetime.  Charts and symbol tables reference symbols by id.
class Symbols {
public:
    static int intern(const std::string& name);
    static const std::string& name(int id);
    static std::optional<int> lookup(const std::string& name);
};

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Syntax or validation error with the byte offset into the source text.
class ParseError : public std::runtime_error {
public:
    ParseError(std::string message, std::size_t offset)
        : std::runtime_error(std::move(message)), offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

/// Division by zero or a function evaluated outside its domain.
class SingularEvaluation : public std::runtime_error {
public:
    explicit SingularEvaluation(const std::string& message)
        : std::runtime_error(message) {}
};

// ---------------------------------------------------------------------------
// Expression tree
// ---------------------------------------------------------------------------

enum class Func { Exp, Ln, Sin, Cos, Sqrt };

const char* func_name(Func f);

struct Atom;
using AtomPtr = std::shared_ptr<const Atom>;

/// One atom raised to a nonzero integer power.
struct Factor {
    AtomPtr atom;
    int power = 1;
};

class Expr;

/// coefficient * product of factors; the coefficient is never zero and the
/// factor list is sorted with unique atoms.
struct Monomial {
    Rational coef;
    std::vector<Factor> factors;
};

/// Normalized symbolic expression (see file header for the normal form).
class Expr {
public:
    Expr() = default; // zero

    static Expr constant(const Rational& c);
    static Expr constant(long n) { return constant(Rational(n)); }
    static Expr symbol(int symbol_id);
    static Expr symbol(const std::string& name) { return symbol(Symbols::intern(name)); }
    static Expr apply(Func f, const Expr& argument);

    Expr operator+(const Expr& other) const;
    Expr operator-(const Expr& other) const;
    Expr operator*(const Expr& other) const;
    Expr operator/(const Expr& other) const; ///< throws SingularEvaluation on literal zero divisor
    Expr operator-() const;

    /// Integer power; pow(0, n<0) throws SingularEvaluation.
    Expr pow(int exponent) const;

    bool is_literal_zero() const { return terms_.empty(); }
    bool is_literal_one() const;
    /// Constant value if the expression is a literal rational.
    std::optional<Rational> constant_value() const;

    /// Structural total order; equal_to(a,b) iff compare == 0.
    static int compare(const Expr& a, const Expr& b);
    bool equals(const Expr& other) const { return compare(*this, other) == 0; }

    /// All symbol ids appearing anywhere in the tree, sorted ascending.
    std::vector<int> symbols() const;
    bool contains_symbol(int symbol_id) const;
    /// True if any exp/ln/sin/cos/sqrt application appears in the tree.
    bool has_function() const;

    /// Substitutes an expression for a symbol, renormalizing.
    Expr substitute(int symbol_id, const Expr& replacement) const;

    const std::vector<Monomial>& terms() const { return terms_; }

    /// Grammar-compatible rendering (parse_expr(print(e)) evaluates equal to e).
    std::string print() const;

private:
    friend Expr make_from_terms(std::vector<Monomial>&& terms);
    std::vector<Monomial> terms_;
};

struct Atom {
    enum class Kind { Symbol, Apply, Sum };
    Kind kind = Kind::Symbol;
    int symbol = -1; ///< Kind::Symbol
    Func fn = Func::Exp; ///< Kind::Apply
    Expr expr; ///< Apply argument, or the irreducible sum for Kind::Sum
};

// ---------------------------------------------------------------------------
// Parsing, differentiation, evaluation
// ---------------------------------------------------------------------------

/// Declared-symbol table for parsing: the set of identifiers the text may use.
struct SymbolTableView {
    std::vector<int> ids;
    bool contains(int id) const;
    static SymbolTableView of_names(const std::vector<std::string>& names);
};

/// Parses the expression grammar
///   expr := term (('+'|'-') term)*; term := factor (('*'|'/') factor)*;
///   factor := base ('^' integer)?; base := number | ident | func '(' expr ')'
///             | '(' expr ')' | '-' base
/// against a declared symbol table; throws ParseError on syntax errors or
/// undeclared identifiers.
Expr parse_expr(const std::string& text, const SymbolTableView& symbols);

/// Normalized partial derivative treating all other symbols as independent.
Expr differentiate(const Expr& e, int symbol_id);

/// Total assignment of values to symbols (indexed by symbol id).
struct EvalPoint {
    std::vector<int> symbol_ids;
    std::vector<double> values;

    double value_of(int symbol_id) const;
    void set(int symbol_id, double v);
};

/// IEEE double value of the standard interpretation; throws
/// SingularEvaluation on division by (numerically) zero, ln of a non-positive
/// value, or sqrt of a negative value.
double eval_at(const Expr& e, const EvalPoint& p);

/// Like eval_at, but also accumulates the sum of absolute monomial values
/// (the expression "magnitude" used for scaled zero-test tolerances).
double eval_with_magnitude(const Expr& e, const EvalPoint& p, double& magnitude);

// ---------------------------------------------------------------------------
// Compiled evaluation (stack program) for tight numeric loops
// ---------------------------------------------------------------------------

class CompiledExpr {
public:
    /// Slots index into the value vector handed to eval(); symbol ids not in
    /// `slot_symbols` must not appear in the expression.
    CompiledExpr(const Expr& e, const std::vector<int>& slot_symbols);
    double eval(const double* slot_values) const;

private:
    struct Op {
        enum class Code { Const, Var, Add, Mul, Powi, Fn } code;
        double constant = 0.0;
        int slot = 0;
        int power = 0;
        Func fn = Func::Exp;
    };
    void emit(const Expr& e, const std::vector<int>& slot_symbols);
    std::vector<Op> ops_;
    mutable std::vector<double> stack_;
};

// ---------------------------------------------------------------------------
// Zero-test oracle
// ---------------------------------------------------------------------------

enum class Verdict { Zero, NonZero, Unknown };
enum class Certification { Symbolic, Numeric };

struct ZeroVerdict {
    Verdict verdict = Verdict::Unknown;
    Certification certification = Certification::Numeric;
    std::optional<EvalPoint> witness; ///< NonZero: a point where |value| exceeded tolerance
    double witness_value = 0.0;

    bool is_zero() const { return verdict == Verdict::Zero; }
    bool is_nonzero() const { return verdict == Verdict::NonZero; }
    bool is_unknown() const { return verdict == Verdict::Unknown; }
    const char* verdict_name() const;
    const char* certification_name() const;
};

/// Randomized sampling policy for the zero test.  Deterministic for a fixed
/// seed.  Points are drawn uniformly from the per-symbol boxes; points whose
/// exclusion expressions fall below `exclusion_floor` in magnitude, or where
/// any denominator magnitude falls below `denom_floor`, are rejected and
/// redrawn up to `max_draws` attempts.
struct SamplingPolicy {
    std::vector<int> symbol_ids;
    std::vector<std::array<double, 2>> box; ///< per symbol; defaults to [-2,2]
    int samples = 8;
    double tolerance = 1e-9;
    std::uint64_t seed = 0x9e3779b97f4a7c15ULL;
    std::vector<Expr> exclusions;
    double exclusion_floor = 1e-3;
    double denom_floor = 1e-8;
    int max_draws = 4000;

    static SamplingPolicy over_symbols(const std::vector<int>& ids);
    /// The deterministic sequence of admissible sample points for this policy.
    std::vector<EvalPoint> sample_points() const;
};

/// Hybrid zero test: symbolic Zero when the normal form is the literal 0;
/// otherwise randomized evaluation at policy.samples admissible points with a
/// magnitude-scaled tolerance.  Any sample exceeding tolerance gives NonZero
/// with a witness; all samples passing gives a numerically-certified Zero;
/// failure to gather enough admissible points gives Unknown.
ZeroVerdict is_zero(const Expr& e, const SamplingPolicy& policy);

} // namespace eds

#endif // EDS_EXPR_HPP
