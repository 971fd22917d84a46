#pragma once

#include <cstdint>
#include <functional>
#include <istream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mtp/core.hpp"
#include "mtp/detail/dates.hpp"
#include "mtp/learners.hpp"
#include "mtp/super_learner.hpp"
#include "mtp/tmle.hpp"

namespace mtp {

// Column mapping for the long-format daily input file.
struct PanelSchema {
    std::string county_column = "county_id";
    std::string date_column = "date";
    std::string population_column = "population";
    std::string cases_column = "cases";
    bool cases_cumulative = false;  // cumulative series are differenced per county
    std::vector<std::string> index_columns;      // mobility indices (values may be missing)
    std::vector<std::string> covariate_columns;  // time-invariant county covariates
    std::string missing_sentinel;  // extra token meaning missing; empty fields always do
    char delimiter = ',';

    void validate() const;
};

struct IngestReport {
    Eigen::Index accepted = 0;
    Eigen::Index rejected = 0;
    Eigen::Index unparseable_optionals = 0;  // optional values coerced to missing
    std::vector<std::string> messages;       // line-numbered reject reasons
};

struct DailyRow {
    std::string county;
    detail::Date date;
    double population = 0.0;
    double cases = 0.0;              // as supplied (cumulative or incident)
    std::vector<double> indices;     // NaN = missing
    std::vector<double> covariates;  // NaN = missing
};

struct PanelTable {
    PanelSchema schema;
    std::vector<DailyRow> rows;  // sorted by (county, date)
    IngestReport report;
};

// Reads and validates the daily file. Rows with unparseable required fields
// (county, date, population, cases) are rejected with a line-numbered message;
// a duplicate (county, date) key aborts with DataError. Declared index or
// covariate columns must exist in the header.
PanelTable ingest(const std::string& path, const PanelSchema& schema);
PanelTable ingest_stream(std::istream& in, const PanelSchema& schema);

struct WeeklyRow {
    std::string county;
    detail::Date week_start;  // Monday
    double population = 0.0;
    double mean_new_cases = 0.0;  // mean of daily new cases over counted days
    int day_count = 0;            // days contributing case data this week
    std::vector<double> indices;     // weekly means; NaN when no day observed
    std::vector<double> covariates;  // first observed value

    double weekly_new_cases() const { return mean_new_cases * day_count; }
};

struct WeeklyTable {
    PanelSchema schema;
    std::vector<WeeklyRow> rows;  // sorted by (county, week_start)
    Eigen::Index floored_revisions = 0;  // negative cumulative diffs clamped to 0

    const WeeklyRow* find(const std::string& county, const detail::Date& week) const;
    std::vector<detail::Date> weeks() const;      // sorted unique week starts
    std::vector<std::string> counties() const;    // sorted unique

    // New cases per 100,000 residents in the given week; nullopt when the
    // county-week is absent or has no case data.
    std::optional<double> case_rate(const std::string& county, const detail::Date& week) const;
};

// Monday-start weekly bins: simple mean of daily mobility values and of daily
// new cases (cumulative inputs are differenced first, negative revisions
// floored at zero and counted). Partial weeks keep their day count.
WeeklyTable bin_weekly(const PanelTable& daily);

// Outcome for week t: case rate at week t + lead_weeks.
std::optional<double> outcome_for(const WeeklyTable& table, const std::string& county,
                                  const detail::Date& week, int lead_weeks);
// Lagged-case confounder: case rate at t-1, or at t in current-week mode.
std::optional<double> lagged_case_rate(const WeeklyTable& table, const std::string& county,
                                       const detail::Date& week, bool current_week);

struct PopulationFilterReport {
    Eigen::Index counties_kept = 0;
    Eigen::Index counties_dropped = 0;
    double population_share_kept = 1.0;
};

// Keeps counties with population >= threshold (inclusive boundary).
WeeklyTable filter_population(const WeeklyTable& table, double threshold,
                              PopulationFilterReport* report = nullptr);

// Ranks candidate covariates by score = min(rank by |corr with exposure|,
// rank by |corr with outcome|), Pearson over rows stacked across the given
// weeks, pairwise complete cases, all ties broken by name. Returns the top_k
// names; fewer candidates than requested returns all with a warning.
std::vector<std::string> screen_covariates(const WeeklyTable& table, const std::string& index,
                                           const std::vector<detail::Date>& weeks,
                                           int lead_weeks, bool lag_current_week, int top_k,
                                           std::vector<std::string>* warnings = nullptr);

struct ShiftDiagnostic {
    std::vector<ShiftPolicy> candidates;  // as given, ordered least to most intense
    std::vector<double> max_ratios;       // estimated max density ratio per candidate
    std::size_t selected = 0;             // most intense candidate under the threshold
    bool fallback = false;                // none qualified; least intense returned
    std::vector<std::string> warnings;
};

// Density-ratio positivity diagnostic: estimates max r-hat for each candidate
// policy and selects the most intense one staying under the threshold.
ShiftDiagnostic diagnose_shift(const AnalysisFrame& frame,
                               const std::vector<ShiftPolicy>& candidates_by_intensity,
                               const std::vector<LearnerSpec>& ratio_library,
                               const SuperLearnerOptions& super_learner, std::uint64_t seed,
                               double threshold = 10.0);

enum class ConfounderMode { PooledTop8, PerWeekTop8, PerWeekTop4 };
ConfounderMode parse_confounder_mode(const std::string& s);
std::string to_string(ConfounderMode mode);

struct SliceSpec {
    detail::Date week_start;  // exposure week t (Monday)
    std::string index;
    ShiftPolicy policy;
    int lead_weeks = 2;
    ConfounderMode confounder_mode = ConfounderMode::PooledTop8;
    bool lag_current_week = false;  // confounder from week t instead of t-1
};

// Complete-case frames for one slice: adjusted carries the screened
// covariates plus the lagged-case column; unadjusted shares the identical
// exposure and outcome vectors with zero covariates.
struct SliceFrame {
    AnalysisFrame adjusted;
    AnalysisFrame unadjusted;
    Eigen::Index dropped_rows = 0;           // candidates lost to missing values
    std::vector<std::string> covariate_names;  // adjusted columns, in order
};

std::optional<SliceFrame> assemble_slice(const WeeklyTable& table, const SliceSpec& spec,
                                         const std::vector<std::string>& screened);

struct SliceResult {
    SliceSpec spec;
    bool skipped = false;
    std::string skip_reason;
    Eigen::Index n = 0;
    Eigen::Index dropped_rows = 0;
    std::vector<std::string> screened;  // adjusted covariates, lagged column included
    ShiftEstimate adjusted;
    ShiftEstimate unadjusted;
};

struct GridOptions {
    std::vector<LearnerSpec> outcome_library;  // empty = default regression library
    std::vector<LearnerSpec> ratio_library;    // empty = default binary library
    SuperLearnerOptions super_learner;
    std::optional<double> truncate_ratio_at;
    Eigen::Index min_slice_n = 50;
    int jobs = 1;
    // Called once per finished slice with a progress line (thread-safe).
    std::function<void(const std::string&)> progress;
};

struct GridResult {
    std::vector<SliceResult> slices;  // one per spec, input order
    std::vector<std::string> warnings;
};

// Runs adjusted and unadjusted estimates for every slice. Screening is done
// once per (index, lead, lag) group in pooled mode and per week otherwise.
// Results are deterministic for a given seed and independent of job count.
GridResult run_grid(const WeeklyTable& table, const std::vector<SliceSpec>& specs,
                    const GridOptions& options, std::uint64_t seed);

// Result serialization; both mirrors carry the same rows. Numbers use %.12g,
// so a rerun with the same seed is byte-identical.
std::string results_csv_string(const GridResult& grid);
std::string results_json_string(const GridResult& grid);
void write_results_csv(const GridResult& grid, const std::string& path);
void write_results_json(const GridResult& grid, const std::string& path);

}  // namespace mtp
