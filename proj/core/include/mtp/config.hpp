#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mtp/core.hpp"
#include "mtp/detail/dates.hpp"
#include "mtp/learners.hpp"
#include "mtp/panel.hpp"
#include "mtp/sim.hpp"

namespace mtp {

// Parsed run configuration (JSON, schema_version 1). Validation is strict:
// unknown keys anywhere are rejected, and every problem found is reported in
// one ConfigError, not just the first.
struct RunConfig {
    std::uint64_t seed = 0;

    bool has_input = false;
    std::string input_path;
    PanelSchema schema;

    detail::Date window_start;  // default 2020-06-01
    detail::Date window_end;    // default 2020-11-14
    int lead_weeks = 2;
    bool lag_current_week = false;  // lag_mode: previous-week (default) | current-week
    ConfounderMode confounder_mode = ConfounderMode::PooledTop8;
    double population_threshold = 40000.0;
    Eigen::Index min_slice_n = 50;
    int folds = 5;
    int jobs = 0;  // 0 = available parallelism

    // Shift policy per mobility index, in config order.
    std::vector<std::pair<std::string, ShiftPolicy>> policies;
    // Candidate ladders (least to most intense) for the shift diagnostic.
    std::vector<std::pair<std::string, std::vector<ShiftPolicy>>> candidate_policies;

    std::vector<LearnerSpec> outcome_learners;  // empty = default regression library
    std::vector<LearnerSpec> ratio_learners;    // empty = default binary library
    std::optional<double> truncate_density_ratio_at;

    std::string output_dir = "results";

    bool has_simulate = false;
    DgpSpec dgp = DgpSpec::default_spec();
    ShiftPolicy sim_policy = ShiftPolicy::additive(1.0);
    Eigen::Index sim_n = 1000;
    int sim_replications = 200;
    Eigen::Index sim_n_mc = 1'000'000;
    std::string sim_cell = "default";

    // Mondays of the exposure weeks inside the window, ascending.
    std::vector<detail::Date> window_weeks() const;

    SuperLearnerOptions super_learner_options() const;
};

// Structural validation only (no filesystem checks); for tests and embedding.
RunConfig parse_config(const std::string& json_text);

// Reads, parses, and additionally checks that referenced files exist.
RunConfig load_config(const std::string& path);

}  // namespace mtp
