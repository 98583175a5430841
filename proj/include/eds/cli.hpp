/**
 * @file  cli.hpp
 * @brief Batch command dispatch over `.eds` definition files: checks,
 *        invariant counting, tangential symmetries, reciprocal frames,
 *        prolongation, and surface lifting, with machine-readable reports.
 *
 * Exit-code contract (also the binary's):
 *   0  every requested check passed
 *   1  a check failed (including runtime failures of a requested construction)
 *   2  a verdict was indeterminate or a construction is outside the
 *      implemented catalog
 *   3  usage, spec-file, or flag errors (raised as exceptions from
 *      run_command; the binary maps them)
 *
 * Reports are deterministic for a fixed spec and seed except for the single
 * `generated_at` field.  Every numerically certified verdict is labeled
 * `numeric`; exact verdicts are labeled `symbolic`.
 */
#ifndef EDS_CLI_HPP
#define EDS_CLI_HPP

#include "eds/specfile.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace eds {

/// Version string reported by the tool and embedded in every report.
const char* cli_version();

/// FNV-1a 64-bit digest of the raw input bytes, as "fnv1a64:<16 hex>".
std::string input_digest(const std::string& bytes);

struct CliOptions {
    double tol = 1e-9;  ///< zero-test / ODE tolerance
    int samples = 8;    ///< zero-test sample count
    std::uint64_t seed = 0;
    bool seed_set = false; ///< when false, the spec's seed is used
    bool json = false;     ///< machine-readable stdout
    std::string out;       ///< report (or lift CSV) destination

    // lift command
    std::string gamma1; ///< comma-separated components in the parameter u
    std::string gamma2; ///< comma-separated components in the parameter v
    std::vector<int> grid{21, 21};
    bool grid_set = false;
    std::array<double, 2> u_range{0.0, 0.0};
    std::array<double, 2> v_range{0.0, 0.0};
    bool u_range_set = false;
    bool v_range_set = false;
};

struct CliResult {
    int exit_code = 0;
    std::string json; ///< full report, pretty-printed
    std::string text; ///< human-readable summary
    /// Artifacts to write: path -> bytes (CSV grid and metadata sidecar).
    std::vector<std::pair<std::string, std::string>> files;
};

/// Commands: check, invariants, symmetries, reciprocal, prolong, lift.
/// Throws std::invalid_argument for unknown commands or missing flag/spec
/// prerequisites (usage errors), never for failing mathematics - those are
/// encoded in the report and exit code.
CliResult run_command(const std::string& command, const SystemSpecFile& spec,
                      const CliOptions& options);

} // namespace eds

#endif // EDS_CLI_HPP
