/**
 * @file  eds.cpp
 * @brief Command-line front end: argument parsing, spec loading, report
 *        output, and artifact writing around eds::run_command.
 *
 * Usage:  eds <command> <file.eds> [flags]
 *
 * Commands
 *   check       decomposability, class, invariant counts, Darboux conditions
 *   invariants  count and verify the declared invariants of both sides
 *   symmetries  tangential frames on the fibers, fingerprints, normalization
 *   reciprocal  treat field_F/field_G as two frames and test reciprocality
 *   prolong     partial prolongation and a re-check of the result
 *   lift        integrate a surface over --gamma1 x --gamma2, write CSV
 *
 * Flags
 *   --tol X       zero-test / ODE tolerance            (default 1e-9)
 *   --samples N   zero-test sample count               (default 8)
 *   --seed N      override the spec file's seed
 *   --json        print the JSON report instead of the text summary
 *   --out PATH    lift: CSV destination (required; metadata sidecar at
 *                 PATH.meta.json); other commands: write the JSON report
 *                 to PATH instead of stdout
 *   --gamma1 S    lift: comma-separated components, parameter u
 *   --gamma2 S    lift: comma-separated components, parameter v
 *   --grid NxM    lift: output nodes per axis (default 21x21); a single
 *                 number is shared by every axis (reciprocal too)
 *   --u lo:hi     lift: parameter range of gamma1 (default: first box axis)
 *   --v lo:hi     lift: parameter range of gamma2 (default: second box axis)
 *
 * Exit codes:  0 ok, 1 check failed, 2 indeterminate, 3 usage/parse error.
 */
#include "eds/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace {

const char* kUsage =
    "usage: eds <command> <file.eds> [flags]\n"
    "commands: check invariants symmetries reciprocal prolong lift\n"
    "flags: --tol X --samples N --seed N --json --out PATH\n"
    "       --gamma1 S --gamma2 S --grid NxM --u lo:hi --v lo:hi\n"
    "see the project README for the .eds file grammar\n";

double parse_double(const std::string& flag, const std::string& s) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw std::invalid_argument(flag + ": expected a number, got '" + s + "'");
    }
    if (pos != s.size()) {
        throw std::invalid_argument(flag + ": expected a number, got '" + s + "'");
    }
    return v;
}

long parse_int(const std::string& flag, const std::string& s) {
    std::size_t pos = 0;
    long v = 0;
    try {
        v = std::stol(s, &pos);
    } catch (const std::exception&) {
        throw std::invalid_argument(flag + ": expected an integer, got '" + s + "'");
    }
    if (pos != s.size()) {
        throw std::invalid_argument(flag + ": expected an integer, got '" + s + "'");
    }
    return v;
}

std::vector<int> parse_grid(const std::string& s) {
    std::vector<int> shape;
    std::string cur;
    for (const char c : s + "x") {
        if (c == 'x' || c == 'X') {
            shape.push_back(static_cast<int>(parse_int("--grid", cur)));
            cur.clear();
        } else {
            cur += c;
        }
    }
    for (const int n : shape) {
        if (n < 1) {
            throw std::invalid_argument("--grid: extents must be positive");
        }
    }
    return shape;
}

std::array<double, 2> parse_range(const std::string& flag, const std::string& s) {
    const std::size_t colon = s.find(':');
    if (colon == std::string::npos) {
        throw std::invalid_argument(flag + ": expected lo:hi, got '" + s + "'");
    }
    const double lo = parse_double(flag, s.substr(0, colon));
    const double hi = parse_double(flag, s.substr(colon + 1));
    if (!(lo < hi)) {
        throw std::invalid_argument(flag + ": need lo < hi");
    }
    return {lo, hi};
}

} // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    if (!args.empty() && (args[0] == "--version" || args[0] == "-V")) {
        std::cout << "eds " << eds::cli_version() << "\n";
        return 0;
    }
    if (args.empty() || args[0] == "--help" || args[0] == "-h" || args[0] == "help") {
        std::cout << kUsage;
        return args.empty() ? 3 : 0;
    }

    try {
        if (args.size() < 2) {
            throw std::invalid_argument("missing command or spec file");
        }
        const std::string command = args[0];
        const std::string path = args[1];

        eds::CliOptions opt;
        for (std::size_t i = 2; i < args.size(); ++i) {
            const std::string& a = args[i];
            const auto need_value = [&](const char* flag) -> const std::string& {
                if (i + 1 >= args.size()) {
                    throw std::invalid_argument(std::string(flag) + ": missing value");
                }
                return args[++i];
            };
            if (a == "--tol") {
                opt.tol = parse_double(a, need_value("--tol"));
                if (!(opt.tol > 0.0)) {
                    throw std::invalid_argument("--tol: must be positive");
                }
            } else if (a == "--samples") {
                opt.samples = static_cast<int>(parse_int(a, need_value("--samples")));
                if (opt.samples < 1) {
                    throw std::invalid_argument("--samples: must be at least 1");
                }
            } else if (a == "--seed") {
                opt.seed = static_cast<std::uint64_t>(
                    std::stoull(need_value("--seed")));
                opt.seed_set = true;
            } else if (a == "--json") {
                opt.json = true;
            } else if (a == "--out") {
                opt.out = need_value("--out");
            } else if (a == "--gamma1") {
                opt.gamma1 = need_value("--gamma1");
            } else if (a == "--gamma2") {
                opt.gamma2 = need_value("--gamma2");
            } else if (a == "--grid") {
                opt.grid = parse_grid(need_value("--grid"));
                if (opt.grid.size() == 1 && command == "lift") {
                    opt.grid.push_back(opt.grid[0]);
                }
                opt.grid_set = true;
            } else if (a == "--u") {
                opt.u_range = parse_range(a, need_value("--u"));
                opt.u_range_set = true;
            } else if (a == "--v") {
                opt.v_range = parse_range(a, need_value("--v"));
                opt.v_range_set = true;
            } else {
                throw std::invalid_argument("unknown flag '" + a + "'");
            }
        }

        const eds::SystemSpecFile spec = eds::load_system_spec(path);
        const eds::CliResult res = eds::run_command(command, spec, opt);

        for (const auto& [file_path, bytes] : res.files) {
            std::ofstream f(file_path, std::ios::binary);
            if (!f) {
                std::cerr << "eds: cannot write " << file_path << "\n";
                return 3;
            }
            f << bytes;
        }

        // --out redirects the JSON report for the non-artifact commands
        // (lift claims --out for its CSV and always reports to stdout).
        if (!opt.out.empty() && command != "lift") {
            std::ofstream f(opt.out, std::ios::binary);
            if (!f) {
                std::cerr << "eds: cannot write " << opt.out << "\n";
                return 3;
            }
            f << res.json;
            std::cout << (opt.json ? res.json : res.text);
        } else {
            std::cout << (opt.json ? res.json : res.text);
        }
        return res.exit_code;
    } catch (const eds::SpecError& ex) {
        std::cerr << "eds: " << ex.what() << "\n";
        return 3;
    } catch (const eds::ParseError& ex) {
        std::cerr << "eds: " << ex.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& ex) {
        std::cerr << "eds: " << ex.what() << "\n" << kUsage;
        return 3;
    } catch (const std::exception& ex) {
        std::cerr << "eds: " << ex.what() << "\n";
        return 3;
    }
}
