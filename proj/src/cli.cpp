/**
 * @file  cli.cpp
 * @brief Command dispatch over `.eds` files: report assembly, exit-code
 *        aggregation, and artifact generation.
 */
#include "eds/cli.hpp"

#include "eds/solver.hpp"

#include "json.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <sstream>
#include <utility>

namespace eds {

namespace {

using json = nlohmann::ordered_json;

/// Local FD stencil used to measure PDE residuals independently of the
/// output grid spacing (truncation ~ h^2, ODE/rounding noise ~ 1e-8).
constexpr double kResidualStencilH = 1.25e-4;
/// Acceptance envelope for the grid reconstruction of a reciprocal frame.
constexpr double kReconstructionTol = 1e-5;

const char* status_str(CheckStatus s) {
    switch (s) {
    case CheckStatus::Ok: return "ok";
    case CheckStatus::Fail: return "fail";
    default: return "indeterminate";
    }
}

const char* verdict_str(Verdict v) {
    switch (v) {
    case Verdict::Zero: return "zero";
    case Verdict::NonZero: return "nonzero";
    default: return "unknown";
    }
}

/// Worst-status aggregator feeding the exit code.
struct Gate {
    CheckStatus worst = CheckStatus::Ok;
    void feed(CheckStatus s) {
        if (s == CheckStatus::Fail || worst == CheckStatus::Fail) {
            worst = CheckStatus::Fail;
        } else if (s == CheckStatus::Indeterminate) {
            worst = CheckStatus::Indeterminate;
        }
    }
    int exit_code() const {
        switch (worst) {
        case CheckStatus::Ok: return 0;
        case CheckStatus::Fail: return 1;
        default: return 2;
        }
    }
};

std::string timestamp_utc() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json conditions_json(const std::vector<ConditionReport>& conds) {
    json arr = json::array();
    for (const ConditionReport& c : conds) {
        json e;
        e["condition"] = c.condition;
        e["status"] = status_str(c.status);
        if (!c.detail.empty()) {
            e["detail"] = c.detail;
        }
        arr.push_back(std::move(e));
    }
    return arr;
}

json class_json(const SystemClass& cls) { return json::array({cls.s, cls.k, cls.l}); }

json envelope(const char* command, const SystemSpecFile& spec) {
    json j;
    j["tool"] = "eds";
    j["version"] = cli_version();
    j["command"] = command;
    j["input"] = {{"origin", spec.origin},
                  {"name", spec.name},
                  {"digest", input_digest(spec.source_text)}};
    j["seed"] = spec.seed;
    j["generated_at"] = timestamp_utc();
    return j;
}

void print_failures(std::ostringstream& out, const std::vector<ConditionReport>& conds) {
    for (const ConditionReport& c : conds) {
        if (c.status != CheckStatus::Ok) {
            out << "    " << c.condition << ": " << status_str(c.status);
            if (!c.detail.empty()) {
                out << " (" << c.detail << ")";
            }
            out << "\n";
        }
    }
}

Rational rational_center(const std::array<double, 2>& box) {
    return (Rational(box[0]) + Rational(box[1])) / 2;
}

RationalPoint chart_center(const ChartPtr& chart) {
    RationalPoint p;
    p.reserve(static_cast<std::size_t>(chart->dim()));
    for (int i = 0; i < chart->dim(); ++i) {
        p.emplace_back(chart->coords[static_cast<std::size_t>(i)],
                       rational_center(chart->box[static_cast<std::size_t>(i)]));
    }
    return p;
}

json fingerprint_json(const AlgebraFingerprint& fp) {
    json j;
    j["dimension"] = fp.dimension;
    j["abelian"] = fp.abelian;
    j["derived_series"] = fp.derived_series;
    j["lower_central_series"] = fp.lower_central_series;
    j["center_dim"] = fp.center_dim;
    j["killing"] = {{"rank", fp.killing_rank},
                    {"positive", fp.killing_positive},
                    {"negative", fp.killing_negative}};
    return j;
}

json presentation_json(const LieAlgebraPresentation& pres) {
    json j;
    json fields = json::array();
    for (const VectorField& x : pres.frame) {
        fields.push_back(x.print());
    }
    j["fields"] = std::move(fields);
    json structure = json::array();
    const int m = pres.dim();
    for (int i = 0; i < m; ++i) {
        for (int jj = i + 1; jj < m; ++jj) {
            for (int k = 0; k < m; ++k) {
                const Expr& c = pres.structure(k, i, jj);
                if (!c.equals(Expr())) {
                    structure.push_back({{"k", k + 1},
                                         {"i", i + 1},
                                         {"j", jj + 1},
                                         {"coefficient", c.print()}});
                }
            }
        }
    }
    j["structure"] = std::move(structure);
    j["constant_coefficients"] = pres.has_constant_coefficients();
    return j;
}

/// Counting section shared by check and invariants: count_invariants per
/// side against the needed count (rank of the opposite system).
json invariant_count_json(const DecomposableSystem& sys, Gate& gate, std::ostringstream& text) {
    json j;
    const struct {
        const char* side;
        const Distribution* dist;
        int needed;
        const char* other;
    } sides[2] = {{"F", &sys.f(), sys.g().generic_rank(), "G"},
                  {"G", &sys.g(), sys.f().generic_rank(), "F"}};
    for (const auto& s : sides) {
        json e;
        e["needed"] = s.needed;
        CheckStatus st = CheckStatus::Ok;
        try {
            const int have = count_invariants(*s.dist);
            e["count"] = have;
            if (have != s.needed) {
                st = CheckStatus::Fail;
                e["detail"] = std::string("count_invariants(") + s.side + ") = " +
                              std::to_string(have) + " but rank " + s.other + " = " +
                              std::to_string(s.needed);
            }
            text << "  invariants of " << s.side << ": " << have << " (need " << s.needed
                 << ")\n";
        } catch (const std::exception& ex) {
            st = CheckStatus::Indeterminate;
            e["detail"] = ex.what();
            text << "  invariants of " << s.side << ": indeterminate (" << ex.what() << ")\n";
        }
        e["status"] = status_str(st);
        e["certification"] = "numeric";
        gate.feed(st);
        j[s.side] = std::move(e);
    }
    return j;
}

// ---------------------------------------------------------------------------
// check
// ---------------------------------------------------------------------------

CliResult run_check(const SystemSpecFile& spec, const CliOptions&) {
    CliResult res;
    json j = envelope("check", spec);
    std::ostringstream text;
    Gate gate;

    const ChartPtr chart = spec.make_chart();
    const DecomposableSystem sys = spec.make_system(chart);
    const DecomposableReport rep = check_decomposable(sys);
    gate.feed(rep.status);

    json dec;
    dec["status"] = status_str(rep.status);
    dec["class"] = class_json(rep.cls);
    dec["certification"] = "numeric";
    dec["conditions"] = conditions_json(rep.conditions);
    j["decomposable"] = std::move(dec);
    text << "check " << spec.name << " (" << spec.origin << ")\n";
    text << "  decomposable: " << status_str(rep.status) << "  class " << rep.cls.print()
         << "\n";
    print_failures(text, rep.conditions);

    j["invariant_counts"] = invariant_count_json(sys, gate, text);

    if (spec.has_invariants()) {
        const DarbouxReport da = check_darboux(sys, spec.make_invariants(chart));
        gate.feed(da.status);
        json d;
        d["status"] = status_str(da.status);
        d["supplied"] = {{"F", da.n_f}, {"G", da.n_g}};
        d["rank_condition"] = da.rank_condition;
        d["transversality"] = da.transversality;
        d["certification"] = "numeric";
        d["conditions"] = conditions_json(da.conditions);
        j["darboux"] = std::move(d);
        text << "  darboux: " << status_str(da.status) << "\n";
        print_failures(text, da.conditions);
    } else {
        j["darboux"] = {{"status", "not-checked"},
                        {"detail", "the spec file supplies no invariants"}};
        text << "  darboux: not checked (no invariants in the spec file)\n";
    }

    res.exit_code = gate.exit_code();
    j["exit_code"] = res.exit_code;
    text << "  exit " << res.exit_code << "\n";
    res.json = j.dump(2) + "\n";
    res.text = text.str();
    return res;
}

// ---------------------------------------------------------------------------
// invariants
// ---------------------------------------------------------------------------

CliResult run_invariants(const SystemSpecFile& spec, const CliOptions&) {
    CliResult res;
    json j = envelope("invariants", spec);
    std::ostringstream text;
    Gate gate;

    const ChartPtr chart = spec.make_chart();
    const DecomposableSystem sys = spec.make_system(chart);
    text << "invariants " << spec.name << " (" << spec.origin << ")\n";
    j["counts"] = invariant_count_json(sys, gate, text);

    if (spec.has_invariants()) {
        const InvariantSet inv = spec.make_invariants(chart);
        json verified = json::array();
        const struct {
            const char* side;
            const Distribution* dist;
            const std::vector<Expr>* list;
            const std::vector<std::string>* texts;
        } sides[2] = {{"F", &sys.f(), &inv.for_f, &spec.f_invariants},
                      {"G", &sys.g(), &inv.for_g, &spec.g_invariants}};
        for (const auto& s : sides) {
            for (std::size_t i = 0; i < s.list->size(); ++i) {
                const ZeroVerdict v = verify_invariant(*s.dist, (*s.list)[i]);
                json e;
                e["side"] = s.side;
                e["expression"] = (*s.texts)[i];
                e["verdict"] = verdict_str(v.verdict);
                e["certification"] = v.certification_name();
                verified.push_back(std::move(e));
                const CheckStatus st = v.is_zero()      ? CheckStatus::Ok
                                       : v.is_nonzero() ? CheckStatus::Fail
                                                        : CheckStatus::Indeterminate;
                gate.feed(st);
                text << "  " << s.side << "-invariant " << (*s.texts)[i] << ": "
                     << verdict_str(v.verdict) << " (" << v.certification_name() << ")\n";
            }
        }
        j["verified"] = std::move(verified);
    }

    res.exit_code = gate.exit_code();
    j["exit_code"] = res.exit_code;
    text << "  exit " << res.exit_code << "\n";
    res.json = j.dump(2) + "\n";
    res.text = text.str();
    return res;
}

// ---------------------------------------------------------------------------
// symmetries
// ---------------------------------------------------------------------------

/// Gate shared by symmetries and lift: Darboux integrability must hold
/// before a projection is built.  Returns false (and finalizes the report)
/// when the pipeline must stop.
bool darboux_gate(const SystemSpecFile& spec, const DecomposableSystem& sys,
                  const InvariantSet& inv, json& j, std::ostringstream& text, Gate& gate) {
    const DarbouxReport da = check_darboux(sys, inv);
    json d;
    d["status"] = status_str(da.status);
    d["certification"] = "numeric";
    if (da.status != CheckStatus::Ok) {
        d["conditions"] = conditions_json(da.conditions);
    }
    j["darboux"] = std::move(d);
    text << "  darboux: " << status_str(da.status) << "\n";
    if (da.status != CheckStatus::Ok) {
        print_failures(text, da.conditions);
        gate.feed(da.status);
        return false;
    }
    (void)spec;
    return true;
}

CliResult run_symmetries(const SystemSpecFile& spec, const CliOptions&) {
    if (!spec.has_invariants()) {
        throw std::invalid_argument(
            "symmetries: the spec file supplies no invariants (invariant_F/invariant_G)");
    }
    CliResult res;
    json j = envelope("symmetries", spec);
    std::ostringstream text;
    Gate gate;
    text << "symmetries " << spec.name << " (" << spec.origin << ")\n";

    const ChartPtr chart = spec.make_chart();
    const DecomposableSystem sys = spec.make_system(chart);
    const InvariantSet inv = spec.make_invariants(chart);
    if (!darboux_gate(spec, sys, inv, j, text, gate)) {
        res.exit_code = gate.exit_code();
        j["exit_code"] = res.exit_code;
        text << "  exit " << res.exit_code << "\n";
        res.json = j.dump(2) + "\n";
        res.text = text.str();
        return res;
    }

    const DarbouxProjection proj = build_projection(sys, inv);
    json pj;
    {
        json b1 = json::array(), b2 = json::array();
        for (const std::string& s : spec.g_invariants) {
            b1.push_back(s);
        }
        for (const std::string& s : spec.f_invariants) {
            b2.push_back(s);
        }
        pj["b1"] = std::move(b1);
        pj["b2"] = std::move(b2);
        json fc = json::array();
        for (const int c : proj.fiber_coords) {
            fc.push_back(chart->coord_name(c));
        }
        pj["fiber_dim"] = proj.fiber_dim();
        pj["fiber_coordinates"] = std::move(fc);
    }
    j["projection"] = std::move(pj);
    text << "  projection base: (" << proj.b1->dim() << " + " << proj.b2->dim()
         << ") coordinates, fiber dimension " << proj.fiber_dim() << "\n";

    // Lift the base frames (the coordinate frames unless the file names its
    // own) and derive the tangential algebras on both sides.
    LiftedFrame lift;
    if (!spec.b1_frame.empty()) {
        BaseFrames frames;
        for (const std::string& s : spec.b1_frame) {
            frames.on_b1.push_back(parse_vector_field(s, proj.b1));
        }
        for (const std::string& s : spec.b2_frame) {
            frames.on_b2.push_back(parse_vector_field(s, proj.b2));
        }
        lift = lift_frame(proj, frames);
    } else {
        lift = lift_frame(proj);
    }

    std::optional<LieAlgebraPresentation> pres_f, pres_g;
    for (const Side side : {Side::F, Side::G}) {
        json sj;
        std::optional<AlgebraFingerprint> fp;
        try {
            LieAlgebraPresentation pres = derived_tangential_frame(proj, lift, side);
            sj = presentation_json(pres);
            try {
                if (pres.has_constant_coefficients()) {
                    fp = fingerprint(pres);
                    sj["fingerprint"] = fingerprint_json(*fp);
                    sj["fingerprint"]["certification"] = "symbolic";
                } else {
                    fp = fingerprint_at(pres, chart_center(chart));
                    sj["fingerprint"] = fingerprint_json(*fp);
                    sj["fingerprint"]["certification"] = "symbolic";
                    sj["fingerprint"]["evaluated_at"] = "sample-box center fiber";
                }
            } catch (const std::exception& ex) {
                sj["fingerprint"] = {{"status", "indeterminate"}, {"detail", ex.what()}};
                gate.feed(CheckStatus::Indeterminate);
            }
            if (side == Side::F) {
                pres_f = std::move(pres);
            } else {
                pres_g = std::move(pres);
            }
        } catch (const std::exception& ex) {
            sj["status"] = "fail";
            sj["detail"] = ex.what();
            gate.feed(CheckStatus::Fail);
        }
        if (fp) {
            text << "  derived algebra (" << side_name(side) << "): dim " << fp->dimension
                 << (fp->abelian ? ", abelian" : ", nonabelian") << "\n";
        } else {
            text << "  derived algebra (" << side_name(side) << "): unavailable\n";
        }
        j[side == Side::F ? "tangential_frame_F" : "tangential_frame_G"] = std::move(sj);
    }

    // Normalization and the induced symmetries of the full system.  Outside
    // the normalization catalog this is an honest "not implemented", not a
    // failure of the system.
    json nj;
    bool normalized = false;
    for (const auto& [pres, label] :
         {std::pair<const std::optional<LieAlgebraPresentation>*, const char*>{&pres_f, "F"},
          {&pres_g, "G"}}) {
        if (!pres->has_value() || normalized) {
            continue;
        }
        try {
            const NormalizedStructure ns = normalize_structure(**pres, proj);
            normalized = true;
            nj["status"] = "ok";
            nj["side"] = label;
            json mu = json::array();
            for (int r = 0; r < ns.mu.rows; ++r) {
                json row = json::array();
                for (int c = 0; c < ns.mu.cols; ++c) {
                    row.push_back(ns.mu.at(r, c).print());
                }
                mu.push_back(std::move(row));
            }
            nj["mu"] = std::move(mu);
            try {
                const std::vector<VectorField> syms = system_symmetries(ns.presentation, proj);
                json sj = json::array();
                for (const VectorField& x : syms) {
                    sj.push_back(x.print());
                }
                j["system_symmetries"] = std::move(sj);
                j["system_symmetries_certification"] = "numeric";
                text << "  system symmetries: " << syms.size() << " field(s)\n";
                for (const VectorField& x : syms) {
                    text << "    " << x.print() << "\n";
                }
            } catch (const std::exception& ex) {
                j["system_symmetries"] = {{"status", "indeterminate"}, {"detail", ex.what()}};
                gate.feed(CheckStatus::Indeterminate);
                text << "  system symmetries: indeterminate (" << ex.what() << ")\n";
            }
        } catch (const NotImplementedForType& ex) {
            nj["status"] = "outside-catalog";
            nj["detail"] = ex.what();
        } catch (const std::exception& ex) {
            nj["status"] = "indeterminate";
            nj["detail"] = ex.what();
        }
    }
    if (!normalized) {
        gate.feed(CheckStatus::Indeterminate);
        text << "  normalization: " << nj.value("status", std::string("unavailable")) << " ("
             << nj.value("detail", std::string()) << ")\n";
    }
    j["normalization"] = std::move(nj);

    res.exit_code = gate.exit_code();
    j["exit_code"] = res.exit_code;
    text << "  exit " << res.exit_code << "\n";
    res.json = j.dump(2) + "\n";
    res.text = text.str();
    return res;
}

// ---------------------------------------------------------------------------
// prolong
// ---------------------------------------------------------------------------

CliResult run_prolong(const SystemSpecFile& spec, const CliOptions&) {
    CliResult res;
    json j = envelope("prolong", spec);
    std::ostringstream text;
    Gate gate;
    text << "prolong " << spec.name << " (" << spec.origin << ")\n";

    const DecomposableSystem sys = spec.make_system();
    j["class"] = class_json(sys.system_class());
    try {
        const DecomposableSystem pro = prolong(sys);
        const DecomposableReport rep = check_decomposable(pro);
        gate.feed(rep.status);
        json p;
        json coords = json::array();
        for (int i = 0; i < pro.chart()->dim(); ++i) {
            coords.push_back(pro.chart()->coord_name(i));
        }
        p["coordinates"] = std::move(coords);
        p["class"] = class_json(pro.system_class());
        json fg = json::array(), gg = json::array();
        for (const VectorField& x : pro.f().generators()) {
            fg.push_back(x.print());
        }
        for (const VectorField& x : pro.g().generators()) {
            gg.push_back(x.print());
        }
        p["f_generators"] = std::move(fg);
        p["g_generators"] = std::move(gg);
        p["check"] = {{"status", status_str(rep.status)},
                      {"certification", "numeric"},
                      {"conditions", conditions_json(rep.conditions)}};
        j["prolonged"] = std::move(p);
        text << "  class " << sys.system_class().print() << " -> "
             << pro.system_class().print() << "\n";
        text << "  prolonged system decomposable: " << status_str(rep.status) << "\n";
        print_failures(text, rep.conditions);
    } catch (const std::exception& ex) {
        gate.feed(CheckStatus::Fail);
        j["prolonged"] = {{"status", "fail"}, {"detail", ex.what()}};
        text << "  prolongation failed: " << ex.what() << "\n";
    }

    res.exit_code = gate.exit_code();
    j["exit_code"] = res.exit_code;
    text << "  exit " << res.exit_code << "\n";
    res.json = j.dump(2) + "\n";
    res.text = text.str();
    return res;
}

// ---------------------------------------------------------------------------
// reciprocal
// ---------------------------------------------------------------------------

std::vector<int> reciprocal_shape(const CliOptions& opt, int dim) {
    if (!opt.grid_set) {
        return std::vector<int>(static_cast<std::size_t>(dim), dim <= 2 ? 21 : 5);
    }
    std::vector<int> shape;
    if (static_cast<int>(opt.grid.size()) == dim) {
        shape = opt.grid;
    } else if (opt.grid.size() == 1) {
        shape.assign(static_cast<std::size_t>(dim), opt.grid[0]);
    } else {
        throw std::invalid_argument(
            "reciprocal: --grid must give one extent or one per coordinate");
    }
    for (const int n : shape) {
        if (n < 2 || n % 2 == 0) {
            throw std::invalid_argument(
                "reciprocal: grid extents must be odd and at least 3 so the box "
                "center is a node");
        }
    }
    return shape;
}

CliResult run_reciprocal(const SystemSpecFile& spec, const CliOptions& opt) {
    CliResult res;
    json j = envelope("reciprocal", spec);
    std::ostringstream text;
    Gate gate;
    text << "reciprocal " << spec.name << " (" << spec.origin << ")\n";

    const ChartPtr chart = spec.make_chart();
    const int dim = chart->dim();
    const std::vector<VectorField> a_fields = spec.make_f_fields(chart);
    const std::vector<VectorField> b_fields = spec.make_g_fields(chart);
    if (static_cast<int>(a_fields.size()) != dim || static_cast<int>(b_fields.size()) != dim) {
        throw std::invalid_argument(
            "reciprocal: field_F and field_G are interpreted as two frames on the "
            "chart and must each have exactly " +
            std::to_string(dim) + " entries");
    }

    SamplingPolicy policy = chart->policy(spec.seed);
    policy.samples = opt.samples;
    policy.tolerance = opt.tol;

    std::optional<LieAlgebraPresentation> pa, pb;
    for (const auto& [fields, label] :
         {std::pair<const std::vector<VectorField>*, const char*>{&a_fields, "frame_A"},
          {&b_fields, "frame_B"}}) {
        try {
            LieAlgebraPresentation pres = structure_constants(chart, *fields, policy);
            j[label] = presentation_json(pres);
            (label[6] == 'A' ? pa : pb) = std::move(pres);
        } catch (const std::exception& ex) {
            j[label] = {{"status", "fail"}, {"detail", ex.what()}};
            gate.feed(CheckStatus::Fail);
            text << "  " << label << ": not a closed frame (" << ex.what() << ")\n";
        }
    }
    if (!pa || !pb) {
        res.exit_code = gate.exit_code();
        j["exit_code"] = res.exit_code;
        text << "  exit " << res.exit_code << "\n";
        res.json = j.dump(2) + "\n";
        res.text = text.str();
        return res;
    }

    // Structure-constant sign flip, coefficient by coefficient.
    {
        json flips = json::array();
        CheckStatus st = CheckStatus::Ok;
        bool numeric = false;
        for (int k = 0; k < dim; ++k) {
            for (int i = 0; i < dim; ++i) {
                for (int jj = i + 1; jj < dim; ++jj) {
                    const Expr& ca = pa->structure(k, i, jj);
                    const Expr& cb = pb->structure(k, i, jj);
                    if (ca.equals(Expr()) && cb.equals(Expr())) {
                        continue;
                    }
                    const ZeroVerdict v = is_zero(ca + cb, policy);
                    numeric = numeric || v.certification == Certification::Numeric;
                    if (!v.is_zero()) {
                        st = v.is_nonzero() ? CheckStatus::Fail : CheckStatus::Indeterminate;
                    }
                    flips.push_back({{"k", k + 1},
                                     {"i", i + 1},
                                     {"j", jj + 1},
                                     {"A", ca.print()},
                                     {"B", cb.print()},
                                     {"verdict", verdict_str(v.verdict)}});
                }
            }
        }
        gate.feed(st);
        j["sign_flip"] = {{"status", status_str(st)},
                          {"certification", numeric ? "numeric" : "symbolic"},
                          {"entries", std::move(flips)}};
        text << "  structure-constant sign flip: " << status_str(st) << "\n";
    }

    // Mutual centralization and anti-isomorphism at the sample points.
    {
        const std::vector<EvalPoint> points = policy.sample_points();
        const ReciprocalReport rec = check_reciprocal(*pa, *pb, points);
        const CheckStatus st = rec.ok(opt.tol) ? CheckStatus::Ok : CheckStatus::Fail;
        gate.feed(st);
        j["reciprocal_check"] = {{"status", status_str(st)},
                                 {"commute", rec.commute},
                                 {"transitive_A", rec.transitive_a},
                                 {"transitive_B", rec.transitive_b},
                                 {"anti_iso_residual", rec.anti_iso_residual},
                                 {"tolerance", opt.tol},
                                 {"certification", "numeric"},
                                 {"findings", conditions_json(rec.findings)}};
        text << "  reciprocal pair: " << status_str(st) << " (anti-isomorphism residual "
             << rec.anti_iso_residual << ")\n";
    }

    // Reconstruction of the partner frame by parallel transport on a grid.
    if (!pa->has_constant_coefficients()) {
        j["reconstruction"] = {{"status", "indeterminate"},
                               {"detail", "frame_A does not have constant structure "
                                          "constants; transport is not defined"}};
        gate.feed(CheckStatus::Indeterminate);
    } else {
        try {
            GridSpec grid;
            grid.shape = reciprocal_shape(opt, dim);
            grid.abs_tol = opt.tol;
            grid.rel_tol = opt.tol;
            std::vector<double> base(static_cast<std::size_t>(dim));
            for (int i = 0; i < dim; ++i) {
                const auto& b = chart->box[static_cast<std::size_t>(i)];
                grid.lo.push_back(b[0]);
                grid.hi.push_back(b[1]);
                base[static_cast<std::size_t>(i)] = 0.5 * (b[0] + b[1]);
            }
            const GridFrame gf = reciprocal_frame(*pa, base, grid);

            double worst = 0.0;
            std::vector<int> idx(static_cast<std::size_t>(dim), 0);
            EvalPoint p;
            p.symbol_ids = chart->coords;
            for (int n = 0; n < gf.node_count(); ++n) {
                p.values = gf.node_point(idx);
                const int node = gf.node_index(idx);
                for (int c = 0; c < dim; ++c) {
                    for (int i = 0; i < dim; ++i) {
                        const double want =
                            eval_at(b_fields[static_cast<std::size_t>(i)].coefficient(c), p);
                        const double got =
                            gf.vectors[static_cast<std::size_t>((node * dim + c) * dim + i)];
                        worst = std::max(worst, std::abs(want - got));
                    }
                }
                for (int a = dim - 1; a >= 0; --a) {
                    if (++idx[static_cast<std::size_t>(a)] <
                        gf.shape[static_cast<std::size_t>(a)]) {
                        break;
                    }
                    idx[static_cast<std::size_t>(a)] = 0;
                }
            }
            const CheckStatus st =
                worst < kReconstructionTol ? CheckStatus::Ok : CheckStatus::Fail;
            gate.feed(st);
            j["reconstruction"] = {{"status", status_str(st)},
                                   {"grid", gf.shape},
                                   {"max_coefficient_error", worst},
                                   {"max_commutator_residual", gf.max_commutator_residual},
                                   {"threshold", kReconstructionTol},
                                   {"certification", "numeric"}};
            text << "  reconstruction of frame_B: " << status_str(st)
                 << " (max coefficient error " << worst << ")\n";
        } catch (const std::exception& ex) {
            j["reconstruction"] = {{"status", "fail"}, {"detail", ex.what()}};
            gate.feed(CheckStatus::Fail);
            text << "  reconstruction failed: " << ex.what() << "\n";
        }
    }

    res.exit_code = gate.exit_code();
    j["exit_code"] = res.exit_code;
    text << "  exit " << res.exit_code << "\n";
    res.json = j.dump(2) + "\n";
    res.text = text.str();
    return res;
}

// ---------------------------------------------------------------------------
// lift
// ---------------------------------------------------------------------------

/// Newton solve for a start point over (gamma1(u0), gamma2(v0)): the fiber
/// coordinates sit at their sample-box centers and the remaining coordinates
/// are solved from the invariant equations.
std::vector<double> seed_point(const DarbouxProjection& proj,
                               const std::vector<double>& target) {
    const ChartPtr& chart = proj.sys.chart();
    const int dim = chart->dim();
    std::vector<int> free_coords;
    for (int i = 0; i < dim; ++i) {
        if (std::find(proj.fiber_coords.begin(), proj.fiber_coords.end(), i) ==
            proj.fiber_coords.end()) {
            free_coords.push_back(i);
        }
    }
    const int n = static_cast<int>(free_coords.size());
    if (n != static_cast<int>(proj.pi.components.size())) {
        throw std::runtime_error("lift: projection component count does not match the "
                                 "non-fiber coordinate count");
    }

    std::vector<CompiledExpr> pi;
    std::vector<CompiledExpr> dpi; // n x n, row-major
    for (const Expr& comp : proj.pi.components) {
        pi.emplace_back(comp, chart->coords);
        for (const int c : free_coords) {
            dpi.emplace_back(differentiate(comp, chart->coords[static_cast<std::size_t>(c)]),
                             chart->coords);
        }
    }

    std::vector<double> m(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i) {
        const auto& b = chart->box[static_cast<std::size_t>(i)];
        m[static_cast<std::size_t>(i)] = 0.5 * (b[0] + b[1]);
    }

    for (int iter = 0; iter < 80; ++iter) {
        Eigen::VectorXd f(n);
        double worst = 0.0;
        for (int c = 0; c < n; ++c) {
            f(c) = pi[static_cast<std::size_t>(c)].eval(m.data()) -
                   target[static_cast<std::size_t>(c)];
            worst = std::max(worst, std::abs(f(c)));
        }
        if (worst < 1e-12) {
            return m;
        }
        Eigen::MatrixXd jac(n, n);
        for (int c = 0; c < n; ++c) {
            for (int w = 0; w < n; ++w) {
                jac(c, w) = dpi[static_cast<std::size_t>(c * n + w)].eval(m.data());
            }
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
        lu.setThreshold(1e-10);
        if (!lu.isInvertible()) {
            throw std::runtime_error(
                "lift: could not seed the surface start point (singular "
                "projection Jacobian at the sample-box center)");
        }
        const Eigen::VectorXd dw = lu.solve(-f);
        for (int w = 0; w < n; ++w) {
            m[static_cast<std::size_t>(free_coords[static_cast<std::size_t>(w)])] += dw(w);
        }
    }
    throw std::runtime_error(
        "lift: the start-point solve did not converge from the sample-box center");
}

/// Max PDE residual over the surface nodes, each measured on a local
/// 3x3 stencil integrated at spacing kResidualStencilH (independent of the
/// output grid, so coarse output grids do not pollute the measurement).
double refined_residual(const LiftedDirections& dirs, const IntegralSurface& surf,
                        const Expr& residual, int* evaluated) {
    const double h = kResidualStencilH;
    const int dim = surf.chart->dim();
    double worst = 0.0;
    int count = 0;
    for (int iu = 0; iu < surf.nu(); ++iu) {
        for (int iv = 0; iv < surf.nv(); ++iv) {
            const std::vector<double> c(surf.node(iu, iv), surf.node(iu, iv) + dim);
            const double uc = surf.u_grid[static_cast<std::size_t>(iu)];
            const double vc = surf.v_grid[static_cast<std::size_t>(iv)];
            const IntegralSurface walk =
                integrate_surface(dirs, c, {uc, uc - h}, {vc, vc - h});
            const std::vector<double> corner(walk.node(1, 1), walk.node(1, 1) + dim);
            const IntegralSurface patch = integrate_surface(
                dirs, corner, {uc - h, uc, uc + h}, {vc - h, vc, vc + h});
            const ResidualReport rep = residual_check(patch, residual);
            worst = std::max(worst, rep.max_residual);
            count += rep.interior_nodes;
        }
    }
    if (evaluated != nullptr) {
        *evaluated = count;
    }
    return worst;
}

std::vector<std::string> split_components(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (const char ch : s) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

std::vector<double> linear_grid(double lo, double hi, int n) {
    std::vector<double> g(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        g[static_cast<std::size_t>(i)] =
            n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / (n - 1);
    }
    return g;
}

CliResult run_lift(const SystemSpecFile& spec, const CliOptions& opt) {
    if (!spec.has_invariants()) {
        throw std::invalid_argument(
            "lift: the spec file supplies no invariants (invariant_F/invariant_G)");
    }
    if (opt.gamma1.empty() || opt.gamma2.empty()) {
        throw std::invalid_argument("lift: --gamma1 and --gamma2 are required");
    }
    if (opt.out.empty()) {
        throw std::invalid_argument("lift: --out is required (CSV destination)");
    }
    if (opt.grid.size() != 2 || opt.grid[0] < 1 || opt.grid[1] < 1) {
        throw std::invalid_argument("lift: --grid must be NxM with N, M >= 1");
    }

    CliResult res;
    json j = envelope("lift", spec);
    std::ostringstream text;
    Gate gate;
    text << "lift " << spec.name << " (" << spec.origin << ")\n";

    const ChartPtr chart = spec.make_chart();
    const DecomposableSystem sys = spec.make_system(chart);
    const InvariantSet inv = spec.make_invariants(chart);
    if (!darboux_gate(spec, sys, inv, j, text, gate)) {
        res.exit_code = gate.exit_code();
        j["exit_code"] = res.exit_code;
        text << "  exit " << res.exit_code << "\n";
        res.json = j.dump(2) + "\n";
        res.text = text.str();
        return res;
    }

    try {
        const DarbouxProjection proj = build_projection(sys, inv);
        const std::array<double, 2> ur =
            opt.u_range_set ? opt.u_range : chart->box[0];
        const std::array<double, 2> vr =
            opt.v_range_set ? opt.v_range : chart->box[1];
        const Curve g1 = Curve::make("u", split_components(opt.gamma1), ur[0], ur[1]);
        const Curve g2 = Curve::make("v", split_components(opt.gamma2), vr[0], vr[1]);
        const LiftedDirections dirs = restrict_to_lift(sys, proj, g1, g2);

        std::vector<double> target = g1.value_at(ur[0]);
        const std::vector<double> t2 = g2.value_at(vr[0]);
        target.insert(target.end(), t2.begin(), t2.end());
        const std::vector<double> m0 = seed_point(proj, target);

        OdeOptions ode;
        ode.abs_tol = opt.tol;
        ode.rel_tol = opt.tol;
        const IntegralSurface surf =
            integrate_surface(dirs, m0, linear_grid(ur[0], ur[1], opt.grid[0]),
                              linear_grid(vr[0], vr[1], opt.grid[1]), ode);

        json sj;
        sj["nu"] = surf.nu();
        sj["nv"] = surf.nv();
        sj["u_range"] = {ur[0], ur[1]};
        sj["v_range"] = {vr[0], vr[1]};
        sj["path_defect"] = surf.path_defect;
        sj["projection_defect"] = surf.projection_defect;
        sj["certification"] = "numeric";
        j["surface"] = std::move(sj);
        text << "  surface: " << surf.nu() << " x " << surf.nv() << " nodes, path defect "
             << surf.path_defect << ", projection defect " << surf.projection_defect << "\n";

        json sidecar = json::parse(surf.metadata_json());
        sidecar["input"] = j["input"];

        if (!spec.residual.empty()) {
            const Expr residual = spec.make_residual(chart);
            int evaluated = 0;
            const double worst = refined_residual(dirs, surf, residual, &evaluated);
            json rj;
            rj["expression"] = spec.residual;
            rj["max_residual"] = worst;
            rj["stencil_h"] = kResidualStencilH;
            rj["nodes_evaluated"] = evaluated;
            rj["certification"] = "numeric";
            sidecar["pde_residual"] = rj;
            j["pde_residual"] = std::move(rj);
            text << "  pde residual |" << spec.residual << "|: " << worst << " at "
                 << evaluated << " nodes\n";
        }

        res.files.emplace_back(opt.out, surf.to_csv());
        res.files.emplace_back(opt.out + ".meta.json", sidecar.dump(2) + "\n");
        j["artifacts"] = {{"csv", opt.out}, {"metadata", opt.out + ".meta.json"}};
        text << "  wrote " << opt.out << " and " << opt.out << ".meta.json\n";
    } catch (const std::exception& ex) {
        gate.feed(CheckStatus::Fail);
        j["lift"] = {{"status", "fail"}, {"detail", ex.what()}};
        text << "  lift failed: " << ex.what() << "\n";
    }

    res.exit_code = gate.exit_code();
    j["exit_code"] = res.exit_code;
    text << "  exit " << res.exit_code << "\n";
    res.json = j.dump(2) + "\n";
    res.text = text.str();
    return res;
}

} // namespace

// ---------------------------------------------------------------------------
// Public entry points
// ---------------------------------------------------------------------------

const char* cli_version() { return "0.1.0"; }

std::string input_digest(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (const unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "fnv1a64:%016llx", static_cast<unsigned long long>(h));
    return buf;
}

CliResult run_command(const std::string& command, const SystemSpecFile& spec,
                      const CliOptions& options) {
    SystemSpecFile s = spec;
    if (options.seed_set) {
        s.seed = options.seed;
    }
    if (command == "check") {
        return run_check(s, options);
    }
    if (command == "invariants") {
        return run_invariants(s, options);
    }
    if (command == "symmetries") {
        return run_symmetries(s, options);
    }
    if (command == "reciprocal") {
        return run_reciprocal(s, options);
    }
    if (command == "prolong") {
        return run_prolong(s, options);
    }
    if (command == "lift") {
        return run_lift(s, options);
    }
    throw std::invalid_argument("unknown command '" + command + "'");
}

} // namespace eds
