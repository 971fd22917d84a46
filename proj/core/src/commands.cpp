#include "mtp/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <thread>

#include "json.hpp"
#include "mtp/errors.hpp"
#include "mtp/rng.hpp"

namespace mtp {

namespace {

namespace fs = std::filesystem;

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + path);
    out << content;
    if (!out) throw DataError("error while writing file: " + path);
}

EstimatorOptions estimator_options(const RunConfig& cfg) {
    EstimatorOptions est;
    est.outcome_library = cfg.outcome_learners;
    est.outcome_super_learner = cfg.super_learner_options();
    est.density_ratio.library = cfg.ratio_learners;
    est.density_ratio.super_learner = cfg.super_learner_options();
    est.density_ratio.truncate_at = cfg.truncate_density_ratio_at;
    return est;
}

WeeklyTable load_weekly(const RunConfig& cfg, std::ostream& err) {
    const PanelTable daily = ingest(cfg.input_path, cfg.schema);
    err << "ingest: " << daily.report.accepted << " rows accepted, " << daily.report.rejected
        << " rejected";
    if (daily.report.unparseable_optionals > 0)
        err << ", " << daily.report.unparseable_optionals << " optional values coerced to missing";
    err << "\n";
    const Eigen::Index show = std::min<Eigen::Index>(
        5, static_cast<Eigen::Index>(daily.report.messages.size()));
    for (Eigen::Index i = 0; i < show; ++i) err << "  " << daily.report.messages[i] << "\n";
    if (static_cast<Eigen::Index>(daily.report.messages.size()) > show)
        err << "  ... and " << daily.report.messages.size() - show << " more\n";

    WeeklyTable weekly = bin_weekly(daily);
    if (weekly.floored_revisions > 0)
        err << "binning: " << weekly.floored_revisions
            << " negative cumulative revisions floored to zero\n";
    PopulationFilterReport pf;
    weekly = filter_population(weekly, cfg.population_threshold, &pf);
    err << "population filter (>= " << fmt_double(cfg.population_threshold) << "): "
        << pf.counties_kept << " counties kept, " << pf.counties_dropped << " dropped ("
        << fmt_double(100.0 * pf.population_share_kept) << "% of population kept)\n";
    return weekly;
}

std::string out_path(const RunConfig& cfg, const char* name) {
    return (fs::path(cfg.output_dir) / name).string();
}

void ensure_output_dir(const RunConfig& cfg) {
    std::error_code ec;
    fs::create_directories(cfg.output_dir, ec);
    if (ec) throw DataError("cannot create output directory '" + cfg.output_dir +
                            "': " + ec.message());
}

// Stacks one assembled slice per window week into a single pooled frame.
AnalysisFrame pooled_index_frame(const WeeklyTable& weekly, const RunConfig& cfg,
                                 const std::string& index,
                                 const std::vector<std::string>& screened) {
    std::vector<AnalysisFrame> parts;
    Eigen::Index total = 0;
    for (const auto& week : cfg.window_weeks()) {
        SliceSpec spec;
        spec.week_start = week;
        spec.index = index;
        spec.policy = ShiftPolicy::identity();
        spec.lead_weeks = cfg.lead_weeks;
        spec.confounder_mode = cfg.confounder_mode;
        spec.lag_current_week = cfg.lag_current_week;
        auto frame = assemble_slice(weekly, spec, screened);
        if (!frame || frame->adjusted.n() == 0) continue;
        total += frame->adjusted.n();
        parts.push_back(std::move(frame->adjusted));
    }
    if (total < 2)
        throw DataError("index '" + index + "': fewer than 2 usable rows in the window");
    AnalysisFrame out;
    const Eigen::Index p = parts.front().p();
    out.covariates.resize(total, p);
    out.exposure.resize(total);
    out.outcome.resize(total);
    Eigen::Index at = 0;
    for (const auto& part : parts) {
        for (Eigen::Index i = 0; i < part.n(); ++i)
            out.unit_ids.push_back(part.unit_ids[i]);
        out.covariates.middleRows(at, part.n()) = part.covariates;
        out.exposure.segment(at, part.n()) = part.exposure;
        out.outcome.segment(at, part.n()) = part.outcome;
        at += part.n();
    }
    return out;
}

}  // namespace

void cmd_analyze(const RunConfig& cfg, int jobs, std::ostream& err) {
    if (!cfg.has_input) throw ConfigError("analyze requires an 'input' block in the config");
    if (cfg.policies.empty())
        throw ConfigError("analyze requires a 'policies' table mapping each index to a shift");

    const WeeklyTable weekly = load_weekly(cfg, err);

    std::vector<SliceSpec> specs;
    for (const auto& week : cfg.window_weeks()) {
        for (const auto& [index, policy] : cfg.policies) {
            SliceSpec spec;
            spec.week_start = week;
            spec.index = index;
            spec.policy = policy;
            spec.lead_weeks = cfg.lead_weeks;
            spec.confounder_mode = cfg.confounder_mode;
            spec.lag_current_week = cfg.lag_current_week;
            specs.push_back(std::move(spec));
        }
    }
    err << "analysis grid: " << specs.size() << " slices (" << cfg.window_weeks().size()
        << " weeks x " << cfg.policies.size() << " indices)\n";

    GridOptions gopt;
    gopt.outcome_library = cfg.outcome_learners;
    gopt.ratio_library = cfg.ratio_learners;
    gopt.super_learner = cfg.super_learner_options();
    gopt.truncate_ratio_at = cfg.truncate_density_ratio_at;
    gopt.min_slice_n = cfg.min_slice_n;
    gopt.jobs = jobs;
    gopt.progress = [&err](const std::string& line) { err << line << "\n"; };

    const GridResult grid = run_grid(weekly, specs, gopt, cfg.seed);

    ensure_output_dir(cfg);
    write_results_csv(grid, out_path(cfg, "results.csv"));
    write_results_json(grid, out_path(cfg, "results.json"));

    Eigen::Index ok = 0, skipped = 0;
    for (const auto& s : grid.slices) (s.skipped ? skipped : ok)++;
    for (const auto& w : grid.warnings) err << "warning: " << w << "\n";
    err << "done: " << ok << " slices estimated, " << skipped << " skipped; results in "
        << cfg.output_dir << "\n";
}

void cmd_simulate(const RunConfig& cfg, int jobs, std::ostream& err) {
    if (!cfg.has_simulate) throw ConfigError("simulate requires a 'simulate' block in the config");

    ReplicationOptions ropt;
    ropt.estimator = estimator_options(cfg);
    ropt.n_mc = cfg.sim_n_mc;
    ropt.jobs = jobs;
    ropt.cell = cfg.sim_cell;
    err << "simulate: cell '" << cfg.sim_cell << "', n=" << cfg.sim_n << ", R="
        << cfg.sim_replications << "\n";
    const ReplicationReport report =
        replicate(cfg.dgp, cfg.sim_policy, cfg.sim_n, cfg.sim_replications, ropt, cfg.seed);

    ensure_output_dir(cfg);
    const std::vector<ReplicationReport> reports = {report};
    write_report_csv(reports, out_path(cfg, "replication_report.csv"));
    write_report_json(reports, out_path(cfg, "replication_report.json"));

    err << "truth=" << fmt_double(report.truth) << " bias=" << fmt_double(report.bias)
        << " sd=" << fmt_double(report.sd) << " coverage=" << fmt_double(report.coverage);
    if (report.failures > 0) err << " failures=" << report.failures;
    err << "; report in " << cfg.output_dir << "\n";
}

void cmd_diagnose_shift(const RunConfig& cfg, std::ostream& err) {
    if (!cfg.has_input)
        throw ConfigError("diagnose-shift requires an 'input' block in the config");
    if (cfg.candidate_policies.empty())
        throw ConfigError("diagnose-shift requires a 'candidate_policies' table");

    const WeeklyTable weekly = load_weekly(cfg, err);

    std::string csv = "index,candidate,policy_kind,policy_value,max_density_ratio,selected\n";
    nlohmann::json jout;
    jout["schema_version"] = 1;
    jout["indices"] = nlohmann::json::array();

    for (const auto& [index, ladder] : cfg.candidate_policies) {
        std::vector<std::string> warnings;
        const std::vector<std::string> screened = screen_covariates(
            weekly, index, cfg.window_weeks(), cfg.lead_weeks, cfg.lag_current_week, 8,
            &warnings);
        const AnalysisFrame frame = pooled_index_frame(weekly, cfg, index, screened);
        const ShiftDiagnostic diag =
            diagnose_shift(frame, ladder, cfg.ratio_learners, cfg.super_learner_options(),
                           mix_seed(cfg.seed, "diagnose:" + index));
        for (const auto& w : warnings) err << "warning: " << w << "\n";
        for (const auto& w : diag.warnings) err << "warning: " << w << "\n";

        nlohmann::json entry;
        entry["index"] = index;
        entry["fallback"] = diag.fallback;
        entry["candidates"] = nlohmann::json::array();
        for (size_t i = 0; i < ladder.size(); ++i) {
            const bool selected = i == diag.selected;
            csv += csv_escape(index);
            csv += ',' + std::to_string(i);
            csv += ',' + std::string(ladder[i].kind == ShiftPolicy::Kind::Additive
                                         ? "additive"
                                         : "multiplicative");
            csv += ',' + fmt_double(ladder[i].value);
            csv += ',' + fmt_double(diag.max_ratios[i]);
            csv += ',' + std::string(selected ? "true" : "false");
            csv += '\n';
            nlohmann::json c;
            c["policy_kind"] = ladder[i].kind == ShiftPolicy::Kind::Additive ? "additive"
                                                                             : "multiplicative";
            c["policy_value"] = ladder[i].value;
            c["max_density_ratio"] = diag.max_ratios[i];
            c["selected"] = selected;
            entry["candidates"].push_back(std::move(c));
        }
        jout["indices"].push_back(std::move(entry));
        err << "index '" << index << "': selected " << ladder[diag.selected].describe()
            << " (max density ratio " << fmt_double(diag.max_ratios[diag.selected]) << ")"
            << (diag.fallback ? " [fallback]" : "") << "\n";
    }

    ensure_output_dir(cfg);
    write_file(out_path(cfg, "shift_diagnostics.csv"), csv);
    write_file(out_path(cfg, "shift_diagnostics.json"), jout.dump(2) + "\n");
    err << "diagnostics in " << cfg.output_dir << "\n";
}

void cmd_screen(const RunConfig& cfg, std::ostream& err) {
    if (!cfg.has_input) throw ConfigError("screen requires an 'input' block in the config");

    const WeeklyTable weekly = load_weekly(cfg, err);
    const bool pooled = cfg.confounder_mode == ConfounderMode::PooledTop8;
    const int top_k = cfg.confounder_mode == ConfounderMode::PerWeekTop4 ? 4 : 8;

    std::string csv = "index,week_start,covariates\n";
    nlohmann::json jout;
    jout["schema_version"] = 1;
    jout["screened"] = nlohmann::json::array();
    std::vector<std::string> warnings;

    auto add_row = [&](const std::string& index, const std::string& scope,
                       const std::vector<std::string>& names) {
        csv += csv_escape(index) + ',' + scope + ',' + csv_escape(join(names, ";")) + '\n';
        nlohmann::json e;
        e["index"] = index;
        e["week_start"] = scope;
        e["covariates"] = names;
        jout["screened"].push_back(std::move(e));
    };

    for (const auto& index : cfg.schema.index_columns) {
        if (pooled) {
            add_row(index, "pooled",
                    screen_covariates(weekly, index, cfg.window_weeks(), cfg.lead_weeks,
                                      cfg.lag_current_week, top_k, &warnings));
        } else {
            for (const auto& week : cfg.window_weeks())
                add_row(index, detail::format_date(week),
                        screen_covariates(weekly, index, {week}, cfg.lead_weeks,
                                          cfg.lag_current_week, top_k, &warnings));
        }
    }
    for (const auto& w : warnings) err << "warning: " << w << "\n";

    ensure_output_dir(cfg);
    write_file(out_path(cfg, "screened_covariates.csv"), csv);
    write_file(out_path(cfg, "screened_covariates.json"), jout.dump(2) + "\n");
    err << "screened covariates in " << cfg.output_dir << "\n";
}

void run_command(Command cmd, const CommandOptions& options, std::ostream& err) {
    RunConfig cfg = load_config(options.config_path);
    if (options.seed_override) cfg.seed = *options.seed_override;
    if (options.output_dir_override) cfg.output_dir = *options.output_dir_override;
    if (options.jobs_override) cfg.jobs = *options.jobs_override;
    const int jobs = cfg.jobs > 0
                         ? cfg.jobs
                         : std::max(1u, std::thread::hardware_concurrency());

    // Command-specific prerequisites belong to validation, so check them
    // before honoring --validate-only.
    switch (cmd) {
        case Command::Analyze:
            if (!cfg.has_input)
                throw ConfigError("analyze requires an 'input' block in the config");
            if (cfg.policies.empty())
                throw ConfigError(
                    "analyze requires a 'policies' table mapping each index to a shift");
            break;
        case Command::Simulate:
            if (!cfg.has_simulate)
                throw ConfigError("simulate requires a 'simulate' block in the config");
            break;
        case Command::DiagnoseShift:
            if (!cfg.has_input)
                throw ConfigError("diagnose-shift requires an 'input' block in the config");
            if (cfg.candidate_policies.empty())
                throw ConfigError("diagnose-shift requires a 'candidate_policies' table");
            break;
        case Command::Screen:
            if (!cfg.has_input)
                throw ConfigError("screen requires an 'input' block in the config");
            break;
    }
    if (options.validate_only) {
        err << "config OK: " << options.config_path << "\n";
        return;
    }
    switch (cmd) {
        case Command::Analyze: cmd_analyze(cfg, jobs, err); break;
        case Command::Simulate: cmd_simulate(cfg, jobs, err); break;
        case Command::DiagnoseShift: cmd_diagnose_shift(cfg, err); break;
        case Command::Screen: cmd_screen(cfg, err); break;
    }
}

int run_command_exit_code(Command cmd, const CommandOptions& options, std::ostream& err) {
    try {
        run_command(cmd, options, err);
        return 0;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << "\n";
        return 3;
    } catch (const EstimationError& e) {
        err << "estimation error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace mtp
