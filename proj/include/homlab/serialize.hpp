#pragma once

#include <json.hpp>

#include "homlab/convex_cell.hpp"
#include "homlab/diffuse.hpp"
#include "homlab/sharp_cell.hpp"

namespace homlab {

inline void to_json(nlohmann::json& j, const SolverStats& s) {
    j = {{"grid_steps", s.grid_steps}, {"dp_nodes", s.dp_nodes}};
}

inline void to_json(nlohmann::json& j, const CellResult& r) {
    j = {{"R", r.R},
         {"energy_per_length", r.energy_per_length},
         {"jump_count", r.jump_count},
         {"min_spacing", r.min_spacing},
         {"sup_abs_u", r.sup_abs_u},
         {"boundary", r.boundary == BoundaryMode::pinned ? "pinned" : "free"},
         {"stats", r.stats}};
}

inline void to_json(nlohmann::json& j, const AlphaEstimate& e) {
    j = {{"m", e.m},
         {"model", e.model},
         {"boundary", e.boundary == BoundaryMode::pinned ? "pinned" : "free"},
         {"r_schedule", e.r_schedule},
         {"mean_energy", e.mean_energy},
         {"std_energy", e.std_energy},
         {"alpha", e.alpha},
         {"flagged", e.flagged},
         {"seeds", e.seeds}};
}

inline void to_json(nlohmann::json& j, const HomogenizedPoint& p) {
    j = {{"q", p.q},         {"R", p.R},
         {"m_R", p.m_R},     {"lambda", p.lambda},
         {"seed", p.seed},   {"mean_residual", p.mean_residual}};
}

inline void to_json(nlohmann::json& j, const StartOutcome& s) {
    j = {{"label", s.label},
         {"energy", s.energy},
         {"iterations", s.iterations},
         {"converged", s.converged},
         {"line_search_failed", s.line_search_failed}};
}

inline void to_json(nlohmann::json& j, const MinResult& r) {
    j = {{"energy", r.energy},
         {"iterations", r.iterations},
         {"gradient_rms", r.gradient_rms},
         {"converged", r.converged},
         {"best_start", r.best_start},
         {"starts", r.starts}};
}

}  // namespace homlab
