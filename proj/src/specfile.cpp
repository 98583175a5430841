/**
 * @file  specfile.cpp
 * @brief `.eds` definition-file parsing, validation, and realization.
 */
#include "eds/specfile.hpp"

#include "eds/solver.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <utility>

namespace eds {

namespace {

std::string position(const std::string& origin, int line) {
    return origin + ":" + std::to_string(line);
}

std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string tok;
    while (in >> tok) {
        out.push_back(tok);
    }
    return out;
}

bool is_identifier(const std::string& s) {
    if (s.empty() || (!std::isalpha(static_cast<unsigned char>(s[0])) && s[0] != '_')) {
        return false;
    }
    for (const char c : s) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') {
            return false;
        }
    }
    return true;
}

double parse_number(const std::string& token, const std::string& origin, int line,
                    const char* key) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(token, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != token.size()) {
        throw SpecError(origin, line,
                        std::string(key) + ": '" + token + "' is not a number");
    }
    return v;
}

/// One collected value with the line it came from.
struct Entry {
    std::string text;
    int line = 0;
};

/// Chart construction shared by validation and realization; `excl` supplies
/// line numbers during validation and is null on the realization path.
ChartPtr build_chart(const SystemSpecFile& spec, const std::vector<Entry>* excl) {
    auto chart = std::make_shared<Chart>(
        *Chart::make(spec.coordinates, spec.default_box));
    for (const auto& [name, range] : spec.box_overrides) {
        for (std::size_t i = 0; i < spec.coordinates.size(); ++i) {
            if (spec.coordinates[i] == name) {
                chart->box[i] = range;
            }
        }
    }
    const SymbolTableView table = chart->symbol_table();
    for (std::size_t i = 0; i < spec.exclusions.size(); ++i) {
        try {
            chart->exclusions.push_back(parse_expr(spec.exclusions[i], table));
        } catch (const ParseError& ex) {
            const int line = excl && i < excl->size() ? (*excl)[i].line : 0;
            throw SpecError(spec.origin, line,
                            std::string("exclude: ") + ex.what() + " at column " +
                                std::to_string(ex.offset() + 1));
        }
    }
    return chart;
}

} // namespace

SpecError::SpecError(const std::string& origin, int line, const std::string& message)
    : std::runtime_error(position(origin, line) + ": " + message), line_(line) {}

SystemSpecFile parse_system_spec(const std::string& text, const std::string& origin) {
    SystemSpecFile spec;
    spec.origin = origin;
    spec.source_text = text;

    std::vector<Entry> f_fields, g_fields, f_inv, g_inv, excl, b1_frame, b2_frame;
    Entry residual;
    std::vector<std::pair<std::vector<std::string>, int>> box_lines;
    bool saw_header = false, saw_name = false, saw_coords = false, saw_seed = false;
    int coords_line = 0;

    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::size_t first = raw.find_first_not_of(" \t\r");
        if (first == std::string::npos || raw[first] == '#') {
            continue;
        }
        std::size_t last = raw.find_last_not_of(" \t\r");
        const std::string line = raw.substr(first, last - first + 1);

        if (!saw_header) {
            const std::vector<std::string> toks = split_ws(line);
            if (toks.size() != 2 || toks[0] != "eds-spec") {
                throw SpecError(origin, line_no,
                                "expected the version header 'eds-spec 1' first");
            }
            if (toks[1] != "1") {
                throw SpecError(origin, line_no,
                                "unsupported spec version '" + toks[1] + "' (expected 1)");
            }
            saw_header = true;
            continue;
        }

        const std::size_t sp = line.find_first_of(" \t");
        const std::string key = line.substr(0, sp);
        std::string value;
        if (sp != std::string::npos) {
            const std::size_t vstart = line.find_first_not_of(" \t", sp);
            if (vstart != std::string::npos) {
                value = line.substr(vstart);
            }
        }
        if (value.empty()) {
            throw SpecError(origin, line_no, "key '" + key + "' has no value");
        }

        if (key == "name") {
            if (saw_name) {
                throw SpecError(origin, line_no, "duplicate key 'name'");
            }
            if (split_ws(value).size() != 1) {
                throw SpecError(origin, line_no, "name must be a single word");
            }
            spec.name = value;
            saw_name = true;
        } else if (key == "coords") {
            if (saw_coords) {
                throw SpecError(origin, line_no, "duplicate key 'coords'");
            }
            spec.coordinates = split_ws(value);
            coords_line = line_no;
            saw_coords = true;
        } else if (key == "field_F") {
            f_fields.push_back({value, line_no});
        } else if (key == "field_G") {
            g_fields.push_back({value, line_no});
        } else if (key == "invariant_F") {
            f_inv.push_back({value, line_no});
        } else if (key == "invariant_G") {
            g_inv.push_back({value, line_no});
        } else if (key == "frame_B1") {
            b1_frame.push_back({value, line_no});
        } else if (key == "frame_B2") {
            b2_frame.push_back({value, line_no});
        } else if (key == "exclude") {
            excl.push_back({value, line_no});
        } else if (key == "residual") {
            if (residual.line != 0) {
                throw SpecError(origin, line_no, "duplicate key 'residual'");
            }
            residual = {value, line_no};
        } else if (key == "box") {
            box_lines.emplace_back(split_ws(value), line_no);
        } else if (key == "seed") {
            if (saw_seed) {
                throw SpecError(origin, line_no, "duplicate key 'seed'");
            }
            try {
                std::size_t used = 0;
                spec.seed = std::stoull(value, &used);
                if (used != value.size()) {
                    throw std::invalid_argument(value);
                }
            } catch (const std::exception&) {
                throw SpecError(origin, line_no,
                                "seed: '" + value + "' is not an unsigned integer");
            }
            saw_seed = true;
        } else {
            throw SpecError(origin, line_no, "unknown key '" + key + "'");
        }
    }

    if (!saw_header) {
        throw SpecError(origin, 1, "empty file: expected the header 'eds-spec 1'");
    }
    if (!saw_name) {
        throw SpecError(origin, line_no, "missing required key 'name'");
    }
    if (!saw_coords) {
        throw SpecError(origin, line_no, "missing required key 'coords'");
    }
    for (const std::string& c : spec.coordinates) {
        if (!is_identifier(c)) {
            throw SpecError(origin, coords_line, "coords: '" + c + "' is not a valid name");
        }
        if (static_cast<int>(std::count(spec.coordinates.begin(), spec.coordinates.end(), c)) >
            1) {
            throw SpecError(origin, coords_line, "coords: duplicate coordinate '" + c + "'");
        }
    }
    if (f_fields.empty()) {
        throw SpecError(origin, line_no, "missing required key 'field_F'");
    }
    if (g_fields.empty()) {
        throw SpecError(origin, line_no, "missing required key 'field_G'");
    }
    if (f_inv.empty() != g_inv.empty()) {
        throw SpecError(origin, line_no,
                        "invariant_F and invariant_G must be supplied together");
    }
    if (b1_frame.empty() != b2_frame.empty()) {
        throw SpecError(origin, line_no, "frame_B1 and frame_B2 must be supplied together");
    }

    // Boxes.
    for (const auto& [toks, bl] : box_lines) {
        if (toks.size() == 2) {
            const double lo = parse_number(toks[0], origin, bl, "box");
            const double hi = parse_number(toks[1], origin, bl, "box");
            if (!(lo < hi)) {
                throw SpecError(origin, bl, "box: lower bound must be below upper bound");
            }
            spec.default_box = {lo, hi};
        } else if (toks.size() == 3) {
            if (std::find(spec.coordinates.begin(), spec.coordinates.end(), toks[0]) ==
                spec.coordinates.end()) {
                throw SpecError(origin, bl, "box: '" + toks[0] + "' is not a coordinate");
            }
            const double lo = parse_number(toks[1], origin, bl, "box");
            const double hi = parse_number(toks[2], origin, bl, "box");
            if (!(lo < hi)) {
                throw SpecError(origin, bl, "box: lower bound must be below upper bound");
            }
            spec.box_overrides.emplace_back(toks[0], std::array<double, 2>{lo, hi});
        } else {
            throw SpecError(origin, bl, "box: expected '<lo> <hi>' or '<coord> <lo> <hi>'");
        }
    }

    for (const Entry& e : f_fields) {
        spec.f_generators.push_back(e.text);
    }
    for (const Entry& e : g_fields) {
        spec.g_generators.push_back(e.text);
    }
    for (const Entry& e : f_inv) {
        spec.f_invariants.push_back(e.text);
    }
    for (const Entry& e : g_inv) {
        spec.g_invariants.push_back(e.text);
    }
    for (const Entry& e : b1_frame) {
        spec.b1_frame.push_back(e.text);
    }
    for (const Entry& e : b2_frame) {
        spec.b2_frame.push_back(e.text);
    }
    for (const Entry& e : excl) {
        spec.exclusions.push_back(e.text);
    }
    spec.residual = residual.text;

    // Validate every expression now so problems carry their line numbers.
    // The base-frame fields are the one exception: their chart (the base of
    // the Darboux projection) does not exist until a projection is built.
    const ChartPtr chart = build_chart(spec, &excl);
    auto check_parse = [&](const Entry& e, const char* what, bool field) {
        try {
            if (field) {
                (void)parse_vector_field(e.text, chart);
            } else {
                (void)parse_expr(e.text, chart->symbol_table());
            }
        } catch (const ParseError& ex) {
            throw SpecError(origin, e.line,
                            std::string(what) + ": " + ex.what() + " at column " +
                                std::to_string(ex.offset() + 1));
        }
    };
    for (const Entry& e : f_fields) {
        check_parse(e, "field_F", true);
    }
    for (const Entry& e : g_fields) {
        check_parse(e, "field_G", true);
    }
    for (const Entry& e : f_inv) {
        check_parse(e, "invariant_F", false);
    }
    for (const Entry& e : g_inv) {
        check_parse(e, "invariant_G", false);
    }
    if (residual.line != 0) {
        try {
            (void)parse_expr(residual.text, jet_symbol_table(chart));
        } catch (const ParseError& ex) {
            throw SpecError(origin, residual.line,
                            std::string("residual: ") + ex.what() + " at column " +
                                std::to_string(ex.offset() + 1));
        }
    }
    return spec;
}

ChartPtr SystemSpecFile::make_chart() const { return build_chart(*this, nullptr); }

std::vector<VectorField> SystemSpecFile::make_f_fields(const ChartPtr& chart) const {
    std::vector<VectorField> out;
    out.reserve(f_generators.size());
    for (const std::string& text : f_generators) {
        out.push_back(parse_vector_field(text, chart));
    }
    return out;
}

std::vector<VectorField> SystemSpecFile::make_g_fields(const ChartPtr& chart) const {
    std::vector<VectorField> out;
    out.reserve(g_generators.size());
    for (const std::string& text : g_generators) {
        out.push_back(parse_vector_field(text, chart));
    }
    return out;
}

DecomposableSystem SystemSpecFile::make_system() const { return make_system(make_chart()); }

DecomposableSystem SystemSpecFile::make_system(const ChartPtr& chart) const {
    return DecomposableSystem(chart, Distribution(chart, make_f_fields(chart), seed),
                              Distribution(chart, make_g_fields(chart), seed), name);
}

InvariantSet SystemSpecFile::make_invariants(const ChartPtr& chart) const {
    InvariantSet inv;
    const SymbolTableView table = chart->symbol_table();
    for (const std::string& text : f_invariants) {
        inv.for_f.push_back(parse_expr(text, table));
    }
    for (const std::string& text : g_invariants) {
        inv.for_g.push_back(parse_expr(text, table));
    }
    return inv;
}

Expr SystemSpecFile::make_residual(const ChartPtr& chart) const {
    if (residual.empty()) {
        return Expr();
    }
    return parse_expr(residual, jet_symbol_table(chart));
}

SystemSpecFile load_system_spec(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw SpecError(path, 0, "cannot open file");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_system_spec(buf.str(), path);
}

} // namespace eds
