/**
 * @file  specfile.hpp
 * @brief Line-oriented `.eds` system definition files: parsing with position
 *        diagnostics, validation, and realization into charts, systems, and
 *        invariant sets.
 *
 * Grammar (versioned header required on the first content line):
 *
 *     eds-spec 1
 *     name <word>                        # required, once
 *     coords <name> <name> ...           # required, once
 *     field_F <vector field text>        # repeatable, >= 1
 *     field_G <vector field text>        # repeatable, >= 1
 *     invariant_F <expression>           # optional, all-or-nothing with _G
 *     invariant_G <expression>
 *     frame_B1 <vector field over b1_*>  # optional base frames (lazily
 *     frame_B2 <vector field over b2_*>  #   validated: the base charts only
 *                                        #   exist once a projection is built)
 *     box <lo> <hi>                      # sample box for every coordinate
 *     box <coord> <lo> <hi>              # per-coordinate override
 *     exclude <expression>               # singular-locus guard, repeatable
 *     residual <expression>              # optional jet-notation residual,
 *                                        #   e.g. z_xy - exp(z)
 *     seed <uint64>                      # sampling seed
 *
 * Blank lines and lines whose first non-space character is `#` are ignored.
 * Every expression is parsed at load time; failures carry the line number.
 */
#ifndef EDS_SPECFILE_HPP
#define EDS_SPECFILE_HPP

#include "eds/darboux.hpp"

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace eds {

/// Parse or validation failure with the position in the source file.
class SpecError : public std::runtime_error {
public:
    SpecError(const std::string& origin, int line, const std::string& message);
    int line() const { return line_; }

private:
    int line_;
};

/// A validated `.eds` definition.  The raw strings are kept (they are the
/// file's contract); the realization helpers re-parse them against a fresh
/// chart so independently realized systems never share mutable state.
struct SystemSpecFile {
    std::string origin;      ///< path or "<memory>", used in diagnostics
    std::string source_text; ///< raw bytes, used for the input digest
    std::string name;
    std::vector<std::string> coordinates;
    std::vector<std::string> f_generators;
    std::vector<std::string> g_generators;
    std::vector<std::string> f_invariants;
    std::vector<std::string> g_invariants;
    std::vector<std::string> b1_frame;
    std::vector<std::string> b2_frame;
    std::array<double, 2> default_box{-2.0, 2.0};
    std::vector<std::pair<std::string, std::array<double, 2>>> box_overrides;
    std::vector<std::string> exclusions;
    std::string residual; ///< empty when absent
    std::uint64_t seed = 0x9e3779b97f4a7c15ULL;

    bool has_invariants() const { return !f_invariants.empty() || !g_invariants.empty(); }

    /// Chart with the declared coordinates, boxes, and parsed exclusions.
    ChartPtr make_chart() const;
    /// The two generator lists parsed over `chart`.
    std::vector<VectorField> make_f_fields(const ChartPtr& chart) const;
    std::vector<VectorField> make_g_fields(const ChartPtr& chart) const;
    /// Decomposable system over a freshly made chart.
    DecomposableSystem make_system() const;
    DecomposableSystem make_system(const ChartPtr& chart) const;
    InvariantSet make_invariants(const ChartPtr& chart) const;
    /// Parsed residual over the jet symbols of `chart`; empty expression
    /// (literal zero) when the spec has no residual line.
    Expr make_residual(const ChartPtr& chart) const;
};

/// Parses and validates a definition from memory.  `origin` names the source
/// in diagnostics.  Throws SpecError on any syntax, grammar, or validation
/// problem, with the offending line number.
SystemSpecFile parse_system_spec(const std::string& text, const std::string& origin);

/// Reads the file and parses it; file-system problems are reported as
/// SpecError at line 0.
SystemSpecFile load_system_spec(const std::string& path);

} // namespace eds

#endif // EDS_SPECFILE_HPP
