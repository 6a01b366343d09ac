#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "homlab/convex_cell.hpp"
#include "homlab/field.hpp"
#include "homlab/sharp_cell.hpp"

namespace homlab {

/// Configuration problems are reported with this type; the CLI maps it to
/// exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

enum class ExperimentKind { alpha_sweep, minam_check, homog_convex, ymeasure_diag, gamma_diag };

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::alpha_sweep;
    std::string output_dir;
    int workers = 0;  // 0: hardware; HOMLAB_WORKERS overrides either way

    FieldModel field;
    MacroModulus macro = MacroModulus::constant(1.0);
    DpGrid grid{};

    std::vector<double> m_values;
    std::vector<double> q_values;
    std::vector<double> epsilons;
    std::vector<double> r_schedule;
    std::vector<std::uint64_t> seeds;

    double tolerance = 0.0;  // per-kind default filled during parsing

    // homog_convex
    double lagrangian_p = 2.0;

    // minam_check / ymeasure_diag
    int diffuse_max_iterations = 200;
    double diffuse_tol = 1e-5;

    // ymeasure_diag
    double ym_window = 2.0;
    int ym_atoms = 500;
    double ym_shift = 0.5;
    int ym_reference_seeds = 500;

    // gamma_diag
    int gamma_probes = 64;
    double gamma_probe_window = 2.0;
    double gamma_transition_eps = 1e-3;

    std::string raw;  // normalized config text, persisted with the run
};

/// Parse + validate a config document. Unknown keys anywhere are errors.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);

struct ReportRow {
    std::string experiment;
    std::string key;         // parameter tuple, e.g. "m=1;R=50"
    std::string provenance;  // where the reference value comes from
    std::string note;
    double measured = 0;
    double reference = 0;
    bool has_reference = false;
    double rel_error = 0;
    double tolerance = 0;
    bool binding = false;  // participates in the exit code
    bool pass = true;
};

struct RunResult {
    std::vector<ReportRow> rows;
    int failed_binding = 0;
    int exit_code = 0;  // 0 pass, 1 failures
};

/// Execute the configured pipeline. Completed tuples found under
/// output_dir/cells are reused; artifacts (CSV, summary.json, manifest.json)
/// are rebuilt deterministically from the cells.
RunResult run_experiment(const ExperimentConfig& cfg);

/// Aggregate a finished run directory: prints the pass/fail summary, rewrites
/// convergence tables under <dir>/tables, returns the exit code (0/1).
int report_run(const std::string& dir, std::ostream& out);

/// |measured - reference| / max(|reference|, floor).
double relative_error(double measured, double reference);

}  // namespace homlab
