/**
 * @file  expr.cpp
 * @brief Normal-form construction, parser, derivative, evaluation, zero test.
 */
#include "eds/expr.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <deque>
#include <map>
#include <mutex>
#include <sstream>

namespace eds {

// ---------------------------------------------------------------------------
// Symbol registry
// ---------------------------------------------------------------------------

namespace {

struct Registry {
    std::deque<std::string> names; // deque: references stay valid across interns
    std::map<std::string, int> index;
    std::mutex mutex;
};

Registry& registry() {
    static Registry r;
    return r;
}

} // namespace

int Symbols::intern(const std::string& name) {
    Registry& r = registry();
    std::lock_guard<std::mutex> lock(r.mutex);
    auto it = r.index.find(name);
    if (it != r.index.end()) {
        return it->second;
    }
    const int id = static_cast<int>(r.names.size());
    r.names.push_back(name);
    r.index.emplace(name, id);
    return id;
}

const std::string& Symbols::name(int id) {
    Registry& r = registry();
    std::lock_guard<std::mutex> lock(r.mutex);
    return r.names.at(static_cast<std::size_t>(id));
}

std::optional<int> Symbols::lookup(const std::string& name) {
    Registry& r = registry();
    std::lock_guard<std::mutex> lock(r.mutex);
    auto it = r.index.find(name);
    if (it == r.index.end()) {
        return std::nullopt;
    }
    return it->second;
}

const char* func_name(Func f) {
    switch (f) {
    case Func::Exp: return "exp";
    case Func::Ln: return "ln";
    case Func::Sin: return "sin";
    case Func::Cos: return "cos";
    case Func::Sqrt: return "sqrt";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Ordering
// ---------------------------------------------------------------------------

namespace {

int atom_compare(const Atom& a, const Atom& b);

int atom_ptr_compare(const AtomPtr& a, const AtomPtr& b) {
    if (a.get() == b.get()) {
        return 0;
    }
    return atom_compare(*a, *b);
}

int factors_compare(const std::vector<Factor>& a, const std::vector<Factor>& b) {
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
        const int c = atom_ptr_compare(a[i].atom, b[i].atom);
        if (c != 0) {
            return c;
        }
        if (a[i].power != b[i].power) {
            return a[i].power < b[i].power ? -1 : 1;
        }
    }
    if (a.size() != b.size()) {
        return a.size() < b.size() ? -1 : 1;
    }
    return 0;
}

int rational_compare(const Rational& a, const Rational& b) {
    if (a < b) return -1;
    if (b < a) return 1;
    return 0;
}

int atom_compare(const Atom& a, const Atom& b) {
    const int ka = static_cast<int>(a.kind);
    const int kb = static_cast<int>(b.kind);
    if (ka != kb) {
        return ka < kb ? -1 : 1;
    }
    switch (a.kind) {
    case Atom::Kind::Symbol:
        if (a.symbol != b.symbol) {
            return a.symbol < b.symbol ? -1 : 1;
        }
        return 0;
    case Atom::Kind::Apply: {
        const int fa = static_cast<int>(a.fn);
        const int fb = static_cast<int>(b.fn);
        if (fa != fb) {
            return fa < fb ? -1 : 1;
        }
        return Expr::compare(a.expr, b.expr);
    }
    case Atom::Kind::Sum:
        return Expr::compare(a.expr, b.expr);
    }
    return 0;
}

} // namespace

int Expr::compare(const Expr& a, const Expr& b) {
    const std::size_t n = std::min(a.terms_.size(), b.terms_.size());
    for (std::size_t i = 0; i < n; ++i) {
        const int c = factors_compare(a.terms_[i].factors, b.terms_[i].factors);
        if (c != 0) {
            return c;
        }
        const int cc = rational_compare(a.terms_[i].coef, b.terms_[i].coef);
        if (cc != 0) {
            return cc;
        }
    }
    if (a.terms_.size() != b.terms_.size()) {
        return a.terms_.size() < b.terms_.size() ? -1 : 1;
    }
    return 0;
}

// ---------------------------------------------------------------------------
// Normal-form construction
// ---------------------------------------------------------------------------

namespace {

bool monomial_order(const Monomial& a, const Monomial& b) {
    const int c = factors_compare(a.factors, b.factors);
    if (c != 0) {
        return c < 0;
    }
    return rational_compare(a.coef, b.coef) < 0;
}

} // namespace

Expr make_from_terms(std::vector<Monomial>&& terms) {
    std::sort(terms.begin(), terms.end(), monomial_order);
    std::vector<Monomial> out;
    out.reserve(terms.size());
    for (Monomial& m : terms) {
        if (m.coef == 0) {
            continue;
        }
        if (!out.empty() && factors_compare(out.back().factors, m.factors) == 0) {
            out.back().coef += m.coef;
            if (out.back().coef == 0) {
                out.pop_back();
            }
        } else {
            out.push_back(std::move(m));
        }
    }
    Expr e;
    e.terms_ = std::move(out);
    return e;
}

namespace {

constexpr int kExpandTermCap = 4096;
constexpr int kExpandPowerCap = 16;

AtomPtr make_symbol_atom(int id) {
    auto a = std::make_shared<Atom>();
    a->kind = Atom::Kind::Symbol;
    a->symbol = id;
    return a;
}

AtomPtr make_apply_atom(Func f, const Expr& arg) {
    auto a = std::make_shared<Atom>();
    a->kind = Atom::Kind::Apply;
    a->fn = f;
    a->expr = arg;
    return a;
}

AtomPtr make_sum_atom_raw(const Expr& inner) {
    auto a = std::make_shared<Atom>();
    a->kind = Atom::Kind::Sum;
    a->expr = inner;
    return a;
}

Expr expr_of_monomial(Monomial&& m) {
    std::vector<Monomial> ts;
    if (m.coef != 0) {
        ts.push_back(std::move(m));
    }
    return make_from_terms(std::move(ts));
}

/// Canonicalizes the exp factors of a sorted factor list: scales powered
/// exponentials into power one (exp(a)^n -> exp(n a)) and merges them into a
/// single factor (exp(a) exp(b) -> exp(a+b)).  Keeps the list sorted.
void canonicalize_exponentials(std::vector<Factor>& factors) {
    Expr combined;
    bool saw_exp = false;
    std::vector<Factor> rest;
    rest.reserve(factors.size());
    for (Factor& f : factors) {
        if (f.atom->kind == Atom::Kind::Apply && f.atom->fn == Func::Exp) {
            saw_exp = true;
            combined = combined + f.atom->expr * Expr::constant(f.power);
        } else {
            rest.push_back(std::move(f));
        }
    }
    if (saw_exp && !combined.is_literal_zero()) {
        Factor ef;
        ef.atom = make_apply_atom(Func::Exp, combined);
        ef.power = 1;
        auto pos = std::lower_bound(rest.begin(), rest.end(), ef,
                                    [](const Factor& a, const Factor& b) {
                                        return atom_ptr_compare(a.atom, b.atom) < 0;
                                    });
        rest.insert(pos, std::move(ef));
    }
    factors = std::move(rest);
}

/// Merges two sorted factor lists adding powers of equal atoms; zero powers
/// cancel out.
std::vector<Factor> merge_factors(const std::vector<Factor>& a, const std::vector<Factor>& b) {
    std::vector<Factor> out;
    out.reserve(a.size() + b.size());
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        const int c = atom_ptr_compare(a[i].atom, b[j].atom);
        if (c < 0) {
            out.push_back(a[i++]);
        } else if (c > 0) {
            out.push_back(b[j++]);
        } else {
            const int p = a[i].power + b[j].power;
            if (p != 0) {
                out.push_back(Factor{a[i].atom, p});
            }
            ++i;
            ++j;
        }
    }
    for (; i < a.size(); ++i) out.push_back(a[i]);
    for (; j < b.size(); ++j) out.push_back(b[j]);
    return out;
}

Expr monomial_pow(const Monomial& m, int n);

/// Product of two monomials; may expand sum atoms whose merged power became
/// positive and small, hence returns a full Expr.
Expr mul_monomials(const Monomial& a, const Monomial& b) {
    Monomial prod;
    prod.coef = a.coef * b.coef;
    if (prod.coef == 0) {
        return Expr();
    }
    prod.factors = merge_factors(a.factors, b.factors);
    canonicalize_exponentials(prod.factors);

    // A sum atom whose power turned positive (cancellation across the two
    // operands) is expanded when small, keeping the global invariant that
    // small positive powers of sums never appear as atoms.
    for (std::size_t i = 0; i < prod.factors.size(); ++i) {
        const Factor& f = prod.factors[i];
        if (f.atom->kind == Atom::Kind::Sum && f.power > 0) {
            const double est = std::pow(static_cast<double>(f.atom->expr.terms().size()),
                                        static_cast<double>(f.power));
            if (f.power <= kExpandPowerCap && est <= kExpandTermCap) {
                Expr expanded = Expr::constant(1);
                for (int k = 0; k < f.power; ++k) {
                    expanded = expanded * f.atom->expr;
                }
                Monomial rest;
                rest.coef = prod.coef;
                rest.factors = prod.factors;
                rest.factors.erase(rest.factors.begin() + static_cast<std::ptrdiff_t>(i));
                return expr_of_monomial(std::move(rest)) * expanded;
            }
        }
    }
    return expr_of_monomial(std::move(prod));
}

/// Extracts rational content (including sign of the leading term) and common
/// atom powers from a multi-term sum, so that sums kept as atoms are
/// canonical up to the extracted monomial.
Monomial extract_content(const Expr& sum, Expr& reduced) {
    const std::vector<Monomial>& ts = sum.terms();
    Monomial content;
    content.coef = 0;
    for (const Monomial& m : ts) {
        Rational a = m.coef < 0 ? Rational(-m.coef) : m.coef;
        content.coef = (content.coef == 0) ? a : rational_gcd(content.coef, a);
    }
    if (ts.front().coef < 0) {
        content.coef = -content.coef;
    }
    // Common factors: atoms present in every term, at their minimum power.
    std::vector<Factor> common = ts.front().factors;
    for (std::size_t t = 1; t < ts.size() && !common.empty(); ++t) {
        std::vector<Factor> next;
        std::size_t i = 0, j = 0;
        const std::vector<Factor>& fs = ts[t].factors;
        while (i < common.size() && j < fs.size()) {
            const int c = atom_ptr_compare(common[i].atom, fs[j].atom);
            if (c < 0) {
                ++i;
            } else if (c > 0) {
                ++j;
            } else {
                next.push_back(Factor{common[i].atom, std::min(common[i].power, fs[j].power)});
                ++i;
                ++j;
            }
        }
        common = std::move(next);
    }
    content.factors = common;

    std::vector<Monomial> reduced_terms;
    reduced_terms.reserve(ts.size());
    for (const Monomial& m : ts) {
        Monomial r;
        r.coef = m.coef / content.coef;
        std::vector<Factor> inverted = common;
        for (Factor& f : inverted) {
            f.power = -f.power;
        }
        r.factors = merge_factors(m.factors, inverted);
        reduced_terms.push_back(std::move(r));
    }
    reduced = make_from_terms(std::move(reduced_terms));
    return content;
}

Expr monomial_pow(const Monomial& m, int n) {
    Monomial out;
    out.coef = rational_pow(m.coef, n);
    Expr result = expr_of_monomial(std::move(out));
    for (const Factor& f : m.factors) {
        const long long p64 = static_cast<long long>(f.power) * n;
        const int p = static_cast<int>(p64);
        if (p == 0) {
            continue;
        }
        if (f.atom->kind == Atom::Kind::Apply && f.atom->fn == Func::Exp) {
            // exp(a)^p -> exp(p a), power one.
            Monomial em;
            em.coef = 1;
            em.factors.push_back(
                Factor{make_apply_atom(Func::Exp, f.atom->expr * Expr::constant(p)), 1});
            result = result * expr_of_monomial(std::move(em));
            continue;
        }
        if (f.atom->kind == Atom::Kind::Sum && p > 0) {
            const double est = std::pow(static_cast<double>(f.atom->expr.terms().size()),
                                        static_cast<double>(p));
            if (p <= kExpandPowerCap && est <= kExpandTermCap) {
                Expr expanded = Expr::constant(1);
                for (int k = 0; k < p; ++k) {
                    expanded = expanded * f.atom->expr;
                }
                result = result * expanded;
                continue;
            }
        }
        Monomial fm;
        fm.coef = 1;
        fm.factors.push_back(Factor{f.atom, p});
        result = result * expr_of_monomial(std::move(fm));
    }
    return result;
}

} // namespace

Expr Expr::constant(const Rational& c) {
    std::vector<Monomial> ts;
    if (c != 0) {
        Monomial m;
        m.coef = c;
        ts.push_back(std::move(m));
    }
    return make_from_terms(std::move(ts));
}

Expr Expr::symbol(int symbol_id) {
    Monomial m;
    m.coef = 1;
    m.factors.push_back(Factor{make_symbol_atom(symbol_id), 1});
    std::vector<Monomial> ts{std::move(m)};
    return make_from_terms(std::move(ts));
}

Expr Expr::apply(Func f, const Expr& argument) {
    // Constant folding on exact values.
    if (const auto c = argument.constant_value()) {
        switch (f) {
        case Func::Exp:
            if (*c == 0) return constant(1);
            break;
        case Func::Ln:
            if (*c == 1) return Expr();
            if (*c <= 0) throw SingularEvaluation("ln of non-positive constant " + to_string(*c));
            break;
        case Func::Sin:
            if (*c == 0) return Expr();
            break;
        case Func::Cos:
            if (*c == 0) return constant(1);
            break;
        case Func::Sqrt: {
            if (*c < 0) throw SingularEvaluation("sqrt of negative constant " + to_string(*c));
            Rational root;
            if (rational_sqrt_exact(*c, root)) return constant(root);
            break;
        }
        }
    }
    Monomial m;
    m.coef = 1;
    m.factors.push_back(Factor{make_apply_atom(f, argument), 1});
    std::vector<Monomial> ts{std::move(m)};
    return make_from_terms(std::move(ts));
}

Expr Expr::operator+(const Expr& other) const {
    std::vector<Monomial> ts;
    ts.reserve(terms_.size() + other.terms_.size());
    ts.insert(ts.end(), terms_.begin(), terms_.end());
    ts.insert(ts.end(), other.terms_.begin(), other.terms_.end());
    return make_from_terms(std::move(ts));
}

Expr Expr::operator-() const {
    std::vector<Monomial> ts = terms_;
    for (Monomial& m : ts) {
        m.coef = -m.coef;
    }
    Expr e;
    e.terms_ = std::move(ts); // negation preserves ordering and uniqueness
    std::sort(e.terms_.begin(), e.terms_.end(), monomial_order);
    return e;
}

Expr Expr::operator-(const Expr& other) const {
    return *this + (-other);
}

Expr Expr::operator*(const Expr& other) const {
    Expr acc;
    for (const Monomial& a : terms_) {
        for (const Monomial& b : other.terms_) {
            acc = acc + mul_monomials(a, b);
        }
    }
    return acc;
}

Expr Expr::pow(int exponent) const {
    if (exponent == 0) {
        return constant(1);
    }
    if (exponent == 1) {
        return *this;
    }
    if (is_literal_zero()) {
        if (exponent < 0) {
            throw SingularEvaluation("zero raised to a negative power");
        }
        return Expr();
    }
    if (terms_.size() == 1) {
        return monomial_pow(terms_.front(), exponent);
    }
    if (exponent > 0) {
        const double est =
            std::pow(static_cast<double>(terms_.size()), static_cast<double>(exponent));
        if (exponent <= kExpandPowerCap && est <= kExpandTermCap) {
            Expr acc = constant(1);
            for (int k = 0; k < exponent; ++k) {
                acc = acc * *this;
            }
            return acc;
        }
    }
    Expr reduced;
    Monomial content = extract_content(*this, reduced);
    Expr content_pow = monomial_pow(content, exponent);
    if (reduced.terms().size() == 1) {
        return content_pow * monomial_pow(reduced.terms().front(), exponent);
    }
    Monomial am;
    am.coef = 1;
    am.factors.push_back(Factor{make_sum_atom_raw(reduced), exponent});
    return content_pow * expr_of_monomial(std::move(am));
}

Expr Expr::operator/(const Expr& other) const {
    if (other.is_literal_zero()) {
        throw SingularEvaluation("division by the literal zero expression");
    }
    return *this * other.pow(-1);
}

bool Expr::is_literal_one() const {
    return terms_.size() == 1 && terms_.front().factors.empty() && terms_.front().coef == 1;
}

std::optional<Rational> Expr::constant_value() const {
    if (terms_.empty()) {
        return Rational(0);
    }
    if (terms_.size() == 1 && terms_.front().factors.empty()) {
        return terms_.front().coef;
    }
    return std::nullopt;
}

namespace {

void collect_symbols(const Expr& e, std::vector<int>& out);

void collect_atom_symbols(const Atom& a, std::vector<int>& out) {
    switch (a.kind) {
    case Atom::Kind::Symbol:
        out.push_back(a.symbol);
        break;
    case Atom::Kind::Apply:
    case Atom::Kind::Sum:
        collect_symbols(a.expr, out);
        break;
    }
}

void collect_symbols(const Expr& e, std::vector<int>& out) {
    for (const Monomial& m : e.terms()) {
        for (const Factor& f : m.factors) {
            collect_atom_symbols(*f.atom, out);
        }
    }
}

bool atom_has_function(const Atom& a);

bool expr_has_function(const Expr& e) {
    for (const Monomial& m : e.terms()) {
        for (const Factor& f : m.factors) {
            if (atom_has_function(*f.atom)) {
                return true;
            }
        }
    }
    return false;
}

bool atom_has_function(const Atom& a) {
    switch (a.kind) {
    case Atom::Kind::Symbol:
        return false;
    case Atom::Kind::Apply:
        return true;
    case Atom::Kind::Sum:
        return expr_has_function(a.expr);
    }
    return false;
}

} // namespace

std::vector<int> Expr::symbols() const {
    std::vector<int> out;
    collect_symbols(*this, out);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

bool Expr::contains_symbol(int symbol_id) const {
    const std::vector<int> syms = symbols();
    return std::binary_search(syms.begin(), syms.end(), symbol_id);
}

bool Expr::has_function() const {
    return expr_has_function(*this);
}

Expr Expr::substitute(int symbol_id, const Expr& replacement) const {
    Expr acc;
    for (const Monomial& m : terms_) {
        Expr term = constant(m.coef);
        for (const Factor& f : m.factors) {
            Expr base;
            switch (f.atom->kind) {
            case Atom::Kind::Symbol:
                base = (f.atom->symbol == symbol_id) ? replacement : symbol(f.atom->symbol);
                break;
            case Atom::Kind::Apply:
                base = apply(f.atom->fn, f.atom->expr.substitute(symbol_id, replacement));
                break;
            case Atom::Kind::Sum:
                base = f.atom->expr.substitute(symbol_id, replacement);
                break;
            }
            term = term * base.pow(f.power);
        }
        acc = acc + term;
    }
    return acc;
}

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

namespace {

std::string print_expr(const Expr& e);

std::string print_atom(const Atom& a) {
    switch (a.kind) {
    case Atom::Kind::Symbol:
        return Symbols::name(a.symbol);
    case Atom::Kind::Apply:
        return std::string(func_name(a.fn)) + "(" + print_expr(a.expr) + ")";
    case Atom::Kind::Sum:
        return "(" + print_expr(a.expr) + ")";
    }
    return "?";
}

std::string print_powered(const Atom& a, int power) {
    std::string s = print_atom(a);
    if (power != 1) {
        s += "^" + std::to_string(power);
    }
    return s;
}

/// Renders |m| as numerator/denominator segments; the sign is handled by the
/// caller joining terms.
std::string print_abs_monomial(const Monomial& m) {
    const Rational c = m.coef < 0 ? Rational(-m.coef) : m.coef;
    std::vector<std::string> nums;
    std::vector<std::string> dens;
    if (numerator(c) != 1 || m.factors.empty()) {
        nums.push_back(numerator(c).str());
    }
    for (const Factor& f : m.factors) {
        if (f.power > 0) {
            nums.push_back(print_powered(*f.atom, f.power));
        } else {
            dens.push_back(print_powered(*f.atom, -f.power));
        }
    }
    if (nums.empty()) {
        nums.push_back("1");
    }
    std::string s = nums.front();
    for (std::size_t i = 1; i < nums.size(); ++i) {
        s += "*" + nums[i];
    }
    for (const std::string& d : dens) {
        s += "/" + d;
    }
    if (denominator(c) != 1) {
        s += "/" + denominator(c).str();
    }
    return s;
}

std::string print_expr(const Expr& e) {
    if (e.terms().empty()) {
        return "0";
    }
    std::string s;
    bool first = true;
    for (const Monomial& m : e.terms()) {
        const bool neg = m.coef < 0;
        if (first) {
            if (neg) {
                s += "-";
            }
            first = false;
        } else {
            s += neg ? " - " : " + ";
        }
        s += print_abs_monomial(m);
    }
    return s;
}

} // namespace

std::string Expr::print() const {
    return print_expr(*this);
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

bool SymbolTableView::contains(int id) const {
    return std::find(ids.begin(), ids.end(), id) != ids.end();
}

SymbolTableView SymbolTableView::of_names(const std::vector<std::string>& names) {
    SymbolTableView v;
    v.ids.reserve(names.size());
    for (const std::string& n : names) {
        v.ids.push_back(Symbols::intern(n));
    }
    return v;
}

namespace {

struct Parser {
    const std::string& text;
    const SymbolTableView& symbols;
    std::size_t pos = 0;

    void skip_ws() {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) {
            ++pos;
        }
    }

    bool peek(char c) {
        skip_ws();
        return pos < text.size() && text[pos] == c;
    }

    bool accept(char c) {
        if (peek(c)) {
            ++pos;
            return true;
        }
        return false;
    }

    [[noreturn]] void fail(const std::string& message) {
        throw ParseError(message, pos);
    }

    Expr parse() {
        Expr e = parse_sum();
        skip_ws();
        if (pos != text.size()) {
            fail("unexpected trailing input");
        }
        return e;
    }

    Expr parse_sum() {
        Expr e = parse_term();
        for (;;) {
            if (accept('+')) {
                e = e + parse_term();
            } else if (accept('-')) {
                e = e - parse_term();
            } else {
                return e;
            }
        }
    }

    Expr parse_term() {
        Expr e = parse_factor();
        for (;;) {
            if (accept('*')) {
                e = e * parse_factor();
            } else if (accept('/')) {
                e = e / parse_factor();
            } else {
                return e;
            }
        }
    }

    Expr parse_factor() {
        Expr base = parse_base();
        if (accept('^')) {
            base = base.pow(parse_integer());
        }
        return base;
    }

    int parse_integer() {
        skip_ws();
        bool neg = false;
        if (pos < text.size() && text[pos] == '-') {
            neg = true;
            ++pos;
        }
        if (pos >= text.size() || !std::isdigit(static_cast<unsigned char>(text[pos]))) {
            fail("expected integer exponent");
        }
        long v = 0;
        while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
            v = v * 10 + (text[pos] - '0');
            if (v > 1000000) {
                fail("exponent too large");
            }
            ++pos;
        }
        return static_cast<int>(neg ? -v : v);
    }

    Expr parse_base() {
        skip_ws();
        if (pos >= text.size()) {
            fail("unexpected end of input");
        }
        const char c = text[pos];
        if (c == '(') {
            ++pos;
            Expr e = parse_sum();
            if (!accept(')')) {
                fail("expected ')'");
            }
            return e;
        }
        if (c == '-') {
            // Unary minus binds looser than '^' (standard reading of -q^2).
            ++pos;
            return -parse_factor();
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            return parse_number();
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            return parse_ident();
        }
        fail(std::string("unexpected character '") + c + "'");
    }

    Expr parse_number() {
        const std::size_t start = pos;
        while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
            ++pos;
        }
        BigInt intpart = 0;
        for (std::size_t i = start; i < pos; ++i) {
            intpart = intpart * 10 + (text[i] - '0');
        }
        Rational value(intpart);
        if (pos < text.size() && text[pos] == '.') {
            ++pos;
            const std::size_t fstart = pos;
            BigInt frac = 0;
            BigInt scale = 1;
            while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
                frac = frac * 10 + (text[pos] - '0');
                scale *= 10;
                ++pos;
            }
            if (pos == fstart && start + 1 == pos) {
                fail("malformed number");
            }
            value += Rational(frac, scale);
        }
        return Expr::constant(value);
    }

    Expr parse_ident() {
        const std::size_t start = pos;
        while (pos < text.size() &&
               (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_')) {
            ++pos;
        }
        const std::string name = text.substr(start, pos - start);
        static const std::pair<const char*, Func> kFuncs[] = {
            {"exp", Func::Exp}, {"ln", Func::Ln}, {"sin", Func::Sin},
            {"cos", Func::Cos}, {"sqrt", Func::Sqrt}};
        for (const auto& [fname, fk] : kFuncs) {
            if (name == fname && peek('(')) {
                ++pos; // consume '('
                Expr arg = parse_sum();
                if (!accept(')')) {
                    fail("expected ')' after function argument");
                }
                return Expr::apply(fk, arg);
            }
        }
        const auto id = Symbols::lookup(name);
        if (!id || !symbols.contains(*id)) {
            pos = start;
            fail("undeclared symbol '" + name + "'");
        }
        return Expr::symbol(*id);
    }
};

} // namespace

Expr parse_expr(const std::string& text, const SymbolTableView& symbols) {
    Parser p{text, symbols};
    return p.parse();
}

// ---------------------------------------------------------------------------
// Differentiation
// ---------------------------------------------------------------------------

namespace {

Expr atom_as_expr(const AtomPtr& a) {
    Monomial m;
    m.coef = 1;
    m.factors.push_back(Factor{a, 1});
    return expr_of_monomial(std::move(m));
}

/// d(atom)/dv as an Expr.
Expr differentiate_atom(const Atom& a, int v) {
    switch (a.kind) {
    case Atom::Kind::Symbol:
        return a.symbol == v ? Expr::constant(1) : Expr();
    case Atom::Kind::Apply: {
        const Expr darg = differentiate(a.expr, v);
        if (darg.is_literal_zero()) {
            return Expr();
        }
        switch (a.fn) {
        case Func::Exp:
            return Expr::apply(Func::Exp, a.expr) * darg;
        case Func::Ln:
            return darg * a.expr.pow(-1);
        case Func::Sin:
            return Expr::apply(Func::Cos, a.expr) * darg;
        case Func::Cos:
            return -(Expr::apply(Func::Sin, a.expr) * darg);
        case Func::Sqrt:
            return Expr::constant(Rational(1, 2)) * darg *
                   Expr::apply(Func::Sqrt, a.expr).pow(-1);
        }
        return Expr();
    }
    case Atom::Kind::Sum:
        return differentiate(a.expr, v);
    }
    return Expr();
}

} // namespace

Expr differentiate(const Expr& e, int symbol_id) {
    Expr acc;
    for (const Monomial& m : e.terms()) {
        // Product rule across the factor list.
        for (std::size_t i = 0; i < m.factors.size(); ++i) {
            const Factor& f = m.factors[i];
            const Expr da = differentiate_atom(*f.atom, symbol_id);
            if (da.is_literal_zero()) {
                continue;
            }
            Expr term = Expr::constant(m.coef * f.power);
            term = term * atom_as_expr(f.atom).pow(f.power - 1) * da;
            for (std::size_t j = 0; j < m.factors.size(); ++j) {
                if (j == i) {
                    continue;
                }
                term = term * atom_as_expr(m.factors[j].atom).pow(m.factors[j].power);
            }
            acc = acc + term;
        }
    }
    return acc;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

double EvalPoint::value_of(int symbol_id) const {
    for (std::size_t i = 0; i < symbol_ids.size(); ++i) {
        if (symbol_ids[i] == symbol_id) {
            return values[i];
        }
    }
    throw SingularEvaluation("evaluation point does not assign symbol '" +
                             Symbols::name(symbol_id) + "'");
}

void EvalPoint::set(int symbol_id, double v) {
    for (std::size_t i = 0; i < symbol_ids.size(); ++i) {
        if (symbol_ids[i] == symbol_id) {
            values[i] = v;
            return;
        }
    }
    symbol_ids.push_back(symbol_id);
    values.push_back(v);
}

namespace {

double eval_expr(const Expr& e, const EvalPoint& p, double denom_floor, double* magnitude);

double eval_atom(const Atom& a, const EvalPoint& p, double denom_floor) {
    switch (a.kind) {
    case Atom::Kind::Symbol:
        return p.value_of(a.symbol);
    case Atom::Kind::Apply: {
        const double v = eval_expr(a.expr, p, denom_floor, nullptr);
        switch (a.fn) {
        case Func::Exp:
            return std::exp(v);
        case Func::Ln:
            if (!(v > denom_floor)) {
                throw SingularEvaluation("ln of non-positive value in " + print_expr(a.expr));
            }
            return std::log(v);
        case Func::Sin:
            return std::sin(v);
        case Func::Cos:
            return std::cos(v);
        case Func::Sqrt:
            if (v < 0.0) {
                throw SingularEvaluation("sqrt of negative value in " + print_expr(a.expr));
            }
            return std::sqrt(v);
        }
        return 0.0;
    }
    case Atom::Kind::Sum:
        return eval_expr(a.expr, p, denom_floor, nullptr);
    }
    return 0.0;
}

double eval_expr(const Expr& e, const EvalPoint& p, double denom_floor, double* magnitude) {
    double sum = 0.0;
    double mag = 0.0;
    for (const Monomial& m : e.terms()) {
        double term = to_double(m.coef);
        for (const Factor& f : m.factors) {
            const double base = eval_atom(*f.atom, p, denom_floor);
            if (f.power < 0 && std::abs(base) < denom_floor) {
                throw SingularEvaluation("denominator " + print_atom(*f.atom) +
                                         " vanishes at the evaluation point");
            }
            term *= std::pow(base, static_cast<double>(f.power));
        }
        sum += term;
        mag += std::abs(term);
    }
    if (magnitude != nullptr) {
        *magnitude = mag;
    }
    return sum;
}

} // namespace

double eval_at(const Expr& e, const EvalPoint& p) {
    return eval_expr(e, p, 1e-300, nullptr);
}

double eval_with_magnitude(const Expr& e, const EvalPoint& p, double& magnitude) {
    return eval_expr(e, p, 1e-300, &magnitude);
}

// ---------------------------------------------------------------------------
// Compiled evaluation
// ---------------------------------------------------------------------------

CompiledExpr::CompiledExpr(const Expr& e, const std::vector<int>& slot_symbols) {
    emit(e, slot_symbols);
    stack_.resize(ops_.size() + 2);
}

void CompiledExpr::emit(const Expr& e, const std::vector<int>& slots) {
    if (e.terms().empty()) {
        ops_.push_back(Op{Op::Code::Const, 0.0, 0, 0, Func::Exp});
        return;
    }
    bool first_term = true;
    for (const Monomial& m : e.terms()) {
        bool first_factor = true;
        const double c = to_double(m.coef);
        if (c != 1.0 || m.factors.empty()) {
            ops_.push_back(Op{Op::Code::Const, c, 0, 0, Func::Exp});
            first_factor = false;
        }
        for (const Factor& f : m.factors) {
            switch (f.atom->kind) {
            case Atom::Kind::Symbol: {
                int slot = -1;
                for (std::size_t i = 0; i < slots.size(); ++i) {
                    if (slots[i] == f.atom->symbol) {
                        slot = static_cast<int>(i);
                        break;
                    }
                }
                if (slot < 0) {
                    throw SingularEvaluation("compiled expression references symbol '" +
                                             Symbols::name(f.atom->symbol) +
                                             "' outside its slot table");
                }
                ops_.push_back(Op{Op::Code::Var, 0.0, slot, 0, Func::Exp});
                break;
            }
            case Atom::Kind::Apply:
                emit(f.atom->expr, slots);
                ops_.push_back(Op{Op::Code::Fn, 0.0, 0, 0, f.atom->fn});
                break;
            case Atom::Kind::Sum:
                emit(f.atom->expr, slots);
                break;
            }
            if (f.power != 1) {
                ops_.push_back(Op{Op::Code::Powi, 0.0, 0, f.power, Func::Exp});
            }
            if (!first_factor) {
                ops_.push_back(Op{Op::Code::Mul, 0.0, 0, 0, Func::Exp});
            }
            first_factor = false;
        }
        if (!first_term) {
            ops_.push_back(Op{Op::Code::Add, 0.0, 0, 0, Func::Exp});
        }
        first_term = false;
    }
}

double CompiledExpr::eval(const double* slot_values) const {
    double* sp = stack_.data();
    for (const Op& op : ops_) {
        switch (op.code) {
        case Op::Code::Const:
            *sp++ = op.constant;
            break;
        case Op::Code::Var:
            *sp++ = slot_values[op.slot];
            break;
        case Op::Code::Add:
            sp[-2] += sp[-1];
            --sp;
            break;
        case Op::Code::Mul:
            sp[-2] *= sp[-1];
            --sp;
            break;
        case Op::Code::Powi:
            sp[-1] = std::pow(sp[-1], static_cast<double>(op.power));
            break;
        case Op::Code::Fn:
            switch (op.fn) {
            case Func::Exp: sp[-1] = std::exp(sp[-1]); break;
            case Func::Ln: sp[-1] = std::log(sp[-1]); break;
            case Func::Sin: sp[-1] = std::sin(sp[-1]); break;
            case Func::Cos: sp[-1] = std::cos(sp[-1]); break;
            case Func::Sqrt: sp[-1] = std::sqrt(sp[-1]); break;
            }
            break;
        }
    }
    return sp[-1];
}

// ---------------------------------------------------------------------------
// Zero test
// ---------------------------------------------------------------------------

const char* ZeroVerdict::verdict_name() const {
    switch (verdict) {
    case Verdict::Zero: return "zero";
    case Verdict::NonZero: return "nonzero";
    case Verdict::Unknown: return "unknown";
    }
    return "?";
}

const char* ZeroVerdict::certification_name() const {
    switch (certification) {
    case Certification::Symbolic: return "symbolic";
    case Certification::Numeric: return "numeric";
    }
    return "?";
}

SamplingPolicy SamplingPolicy::over_symbols(const std::vector<int>& ids) {
    SamplingPolicy p;
    p.symbol_ids = ids;
    p.box.assign(ids.size(), std::array<double, 2>{-2.0, 2.0});
    return p;
}

namespace {

/// Deterministic uniform double in [lo, hi) from a raw 64-bit draw.
double uniform_from_bits(std::uint64_t bits, double lo, double hi) {
    const double unit = static_cast<double>(bits >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * unit;
}

struct SplitMix64 {
    std::uint64_t state;
    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
};

bool point_admissible(const SamplingPolicy& policy, const EvalPoint& pt) {
    for (const Expr& excl : policy.exclusions) {
        try {
            if (std::abs(eval_at(excl, pt)) <= policy.exclusion_floor) {
                return false;
            }
        } catch (const SingularEvaluation&) {
            return false;
        }
    }
    return true;
}

} // namespace

std::vector<EvalPoint> SamplingPolicy::sample_points() const {
    std::vector<EvalPoint> out;
    SplitMix64 rng{seed};
    for (int draw = 0; draw < max_draws && static_cast<int>(out.size()) < samples; ++draw) {
        EvalPoint pt;
        pt.symbol_ids = symbol_ids;
        pt.values.resize(symbol_ids.size());
        for (std::size_t i = 0; i < symbol_ids.size(); ++i) {
            const auto& b = i < box.size() ? box[i] : std::array<double, 2>{-2.0, 2.0};
            pt.values[i] = uniform_from_bits(rng.next(), b[0], b[1]);
        }
        if (point_admissible(*this, pt)) {
            out.push_back(std::move(pt));
        }
    }
    return out;
}

ZeroVerdict is_zero(const Expr& e, const SamplingPolicy& policy) {
    ZeroVerdict v;
    if (e.is_literal_zero()) {
        v.verdict = Verdict::Zero;
        v.certification = Certification::Symbolic;
        return v;
    }
    SplitMix64 rng{policy.seed};
    int accepted = 0;
    for (int draw = 0; draw < policy.max_draws && accepted < policy.samples; ++draw) {
        EvalPoint pt;
        pt.symbol_ids = policy.symbol_ids;
        pt.values.resize(policy.symbol_ids.size());
        for (std::size_t i = 0; i < policy.symbol_ids.size(); ++i) {
            const auto& b =
                i < policy.box.size() ? policy.box[i] : std::array<double, 2>{-2.0, 2.0};
            pt.values[i] = uniform_from_bits(rng.next(), b[0], b[1]);
        }
        if (!point_admissible(policy, pt)) {
            continue;
        }
        double magnitude = 0.0;
        double value = 0.0;
        try {
            value = eval_expr(e, pt, policy.denom_floor, &magnitude);
        } catch (const SingularEvaluation&) {
            continue; // singular sample point: rejected and redrawn
        }
        ++accepted;
        const double scale = std::max(1.0, magnitude);
        if (std::abs(value) > policy.tolerance * scale) {
            v.verdict = Verdict::NonZero;
            v.certification = Certification::Numeric;
            v.witness = pt;
            v.witness_value = value;
            return v;
        }
    }
    if (accepted < policy.samples) {
        v.verdict = Verdict::Unknown;
        v.certification = Certification::Numeric;
        return v;
    }
    v.verdict = Verdict::Zero;
    v.certification = Certification::Numeric;
    return v;
}

} // namespace eds
