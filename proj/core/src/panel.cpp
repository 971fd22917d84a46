#include "mtp/panel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "json.hpp"
#include "mtp/density_ratio.hpp"
#include "mtp/detail/csv.hpp"
#include "mtp/errors.hpp"
#include "mtp/rng.hpp"

namespace mtp {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool parse_double(const std::string& s, double* out) {
    if (s.empty()) return false;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) return false;
    *out = v;
    return true;
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

}  // namespace

void PanelSchema::validate() const {
    std::vector<std::string> problems;
    if (county_column.empty()) problems.push_back("county column name is empty");
    if (date_column.empty()) problems.push_back("date column name is empty");
    if (population_column.empty()) problems.push_back("population column name is empty");
    if (cases_column.empty()) problems.push_back("cases column name is empty");
    if (index_columns.empty()) problems.push_back("no mobility index columns declared");
    std::set<std::string> seen;
    for (const auto& lists : {index_columns, covariate_columns})
        for (const auto& c : lists)
            if (!seen.insert(c).second)
                problems.push_back("column '" + c + "' declared more than once");
    if (!problems.empty()) throw ConfigError("invalid schema: " + join(problems, "; "));
}

PanelTable ingest_stream(std::istream& in, const PanelSchema& schema) {
    schema.validate();
    const detail::CsvTable csv = detail::parse_csv(in, schema.delimiter);

    std::vector<std::string> missing_cols;
    auto col = [&](const std::string& name) {
        const int c = csv.column(name);
        if (c < 0) missing_cols.push_back(name);
        return c;
    };
    const int c_county = col(schema.county_column);
    const int c_date = col(schema.date_column);
    const int c_pop = col(schema.population_column);
    const int c_cases = col(schema.cases_column);
    std::vector<int> c_idx, c_cov;
    for (const auto& name : schema.index_columns) c_idx.push_back(col(name));
    for (const auto& name : schema.covariate_columns) c_cov.push_back(col(name));
    if (!missing_cols.empty())
        throw DataError("missing required columns: " + join(missing_cols, ", "));

    PanelTable table;
    table.schema = schema;
    auto& report = table.report;

    auto missing = [&](const std::string& v) {
        return v.empty() || (!schema.missing_sentinel.empty() && v == schema.missing_sentinel);
    };

    for (size_t r = 0; r < csv.rows.size(); ++r) {
        const auto& fields = csv.rows[r];
        const long line = csv.line_numbers[r];
        auto reject = [&](const std::string& why) {
            ++report.rejected;
            report.messages.push_back("line " + std::to_string(line) + ": " + why);
        };
        if (fields.size() != csv.header.size()) {
            reject("expected " + std::to_string(csv.header.size()) + " fields, got " +
                   std::to_string(fields.size()));
            continue;
        }
        DailyRow row;
        row.county = fields[c_county];
        if (missing(row.county)) {
            reject("missing county id");
            continue;
        }
        try {
            row.date = detail::parse_date(fields[c_date]);
        } catch (const DataError& e) {
            reject(e.what());
            continue;
        }
        if (!parse_double(fields[c_pop], &row.population) || !(row.population > 0)) {
            reject("invalid population '" + fields[c_pop] + "'");
            continue;
        }
        if (!parse_double(fields[c_cases], &row.cases) || row.cases < 0 ||
            !std::isfinite(row.cases)) {
            reject("invalid case count '" + fields[c_cases] + "'");
            continue;
        }
        auto optional_value = [&](int c) {
            if (missing(fields[c])) return kNaN;
            double v;
            if (!parse_double(fields[c], &v) || !std::isfinite(v)) {
                ++report.unparseable_optionals;
                return kNaN;
            }
            return v;
        };
        for (int c : c_idx) row.indices.push_back(optional_value(c));
        for (int c : c_cov) row.covariates.push_back(optional_value(c));
        ++report.accepted;
        table.rows.push_back(std::move(row));
    }

    std::sort(table.rows.begin(), table.rows.end(), [](const DailyRow& a, const DailyRow& b) {
        if (a.county != b.county) return a.county < b.county;
        return detail::to_days(a.date) < detail::to_days(b.date);
    });
    for (size_t i = 1; i < table.rows.size(); ++i) {
        const auto& a = table.rows[i - 1];
        const auto& b = table.rows[i];
        if (a.county == b.county && a.date == b.date)
            throw DataError("duplicate (county, date) key: (" + a.county + ", " +
                            detail::format_date(a.date) + ")");
    }
    return table;
}

PanelTable ingest(const std::string& path, const PanelSchema& schema) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open input file: " + path);
    return ingest_stream(in, schema);
}

WeeklyTable bin_weekly(const PanelTable& daily) {
    WeeklyTable out;
    out.schema = daily.schema;
    const size_t n_idx = daily.schema.index_columns.size();
    const size_t n_cov = daily.schema.covariate_columns.size();

    struct Acc {
        double population = 0.0;
        double case_sum = 0.0;
        int case_days = 0;
        std::vector<double> idx_sum, idx_cnt;
        std::vector<double> covs;
    };
    // Keyed map keeps output sorted by (county, week) whatever the input order.
    std::map<std::pair<std::string, long>, Acc> cells;

    std::string cur_county;
    double prev_cases = kNaN;
    bool have_prev = false;
    for (const auto& row : daily.rows) {
        if (row.county != cur_county) {
            cur_county = row.county;
            have_prev = false;
        }
        double new_cases = kNaN;
        if (!daily.schema.cases_cumulative) {
            new_cases = row.cases;
        } else if (have_prev) {
            double diff = row.cases - prev_cases;
            if (diff < 0) {
                diff = 0;
                ++out.floored_revisions;
            }
            new_cases = diff;
        }
        prev_cases = row.cases;
        have_prev = true;

        const detail::Date week = detail::monday_of(row.date);
        const auto key = std::make_pair(row.county,
                                        static_cast<long>(detail::to_days(week).time_since_epoch().count()));
        auto [it, inserted] = cells.try_emplace(key);
        Acc& acc = it->second;
        if (inserted) {
            acc.population = row.population;
            acc.idx_sum.assign(n_idx, 0.0);
            acc.idx_cnt.assign(n_idx, 0.0);
            acc.covs.assign(n_cov, kNaN);
        }
        if (std::isfinite(new_cases)) {
            acc.case_sum += new_cases;
            ++acc.case_days;
        }
        for (size_t j = 0; j < n_idx; ++j) {
            if (std::isfinite(row.indices[j])) {
                acc.idx_sum[j] += row.indices[j];
                acc.idx_cnt[j] += 1.0;
            }
        }
        for (size_t j = 0; j < n_cov; ++j)
            if (!std::isfinite(acc.covs[j]) && std::isfinite(row.covariates[j]))
                acc.covs[j] = row.covariates[j];
    }

    for (auto& [key, acc] : cells) {
        WeeklyRow w;
        w.county = key.first;
        w.week_start = detail::from_days(
            std::chrono::sys_days{std::chrono::days{key.second}});
        w.population = acc.population;
        w.day_count = acc.case_days;
        w.mean_new_cases = acc.case_days > 0 ? acc.case_sum / acc.case_days : 0.0;
        w.indices.resize(n_idx);
        for (size_t j = 0; j < n_idx; ++j)
            w.indices[j] = acc.idx_cnt[j] > 0 ? acc.idx_sum[j] / acc.idx_cnt[j] : kNaN;
        w.covariates = std::move(acc.covs);
        out.rows.push_back(std::move(w));
    }
    return out;
}

const WeeklyRow* WeeklyTable::find(const std::string& county, const detail::Date& week) const {
    const auto target = std::make_pair(county, detail::to_days(week));
    auto it = std::lower_bound(rows.begin(), rows.end(), target,
                               [](const WeeklyRow& r, const decltype(target)& t) {
                                   if (r.county != t.first) return r.county < t.first;
                                   return detail::to_days(r.week_start) < t.second;
                               });
    if (it == rows.end() || it->county != county || !(it->week_start == week)) return nullptr;
    return &*it;
}

std::vector<detail::Date> WeeklyTable::weeks() const {
    std::set<long> days;
    for (const auto& r : rows)
        days.insert(static_cast<long>(detail::to_days(r.week_start).time_since_epoch().count()));
    std::vector<detail::Date> out;
    for (long d : days)
        out.push_back(detail::from_days(std::chrono::sys_days{std::chrono::days{d}}));
    return out;
}

std::vector<std::string> WeeklyTable::counties() const {
    std::set<std::string> s;
    for (const auto& r : rows) s.insert(r.county);
    return {s.begin(), s.end()};
}

std::optional<double> WeeklyTable::case_rate(const std::string& county,
                                             const detail::Date& week) const {
    const WeeklyRow* r = find(county, week);
    if (!r || r->day_count == 0 || !(r->population > 0)) return std::nullopt;
    return 1e5 * r->weekly_new_cases() / r->population;
}

std::optional<double> outcome_for(const WeeklyTable& table, const std::string& county,
                                  const detail::Date& week, int lead_weeks) {
    return table.case_rate(county, detail::add_days(week, 7 * lead_weeks));
}

std::optional<double> lagged_case_rate(const WeeklyTable& table, const std::string& county,
                                       const detail::Date& week, bool current_week) {
    return table.case_rate(county, current_week ? week : detail::add_days(week, -7));
}

WeeklyTable filter_population(const WeeklyTable& table, double threshold,
                              PopulationFilterReport* report) {
    std::map<std::string, double> county_pop;
    for (const auto& r : table.rows) county_pop.emplace(r.county, r.population);

    WeeklyTable out;
    out.schema = table.schema;
    out.floored_revisions = table.floored_revisions;
    double pop_all = 0.0, pop_kept = 0.0;
    Eigen::Index kept = 0, dropped = 0;
    for (const auto& [county, pop] : county_pop) {
        pop_all += pop;
        if (pop >= threshold) {
            pop_kept += pop;
            ++kept;
        } else {
            ++dropped;
        }
    }
    for (const auto& r : table.rows)
        if (r.population >= threshold) out.rows.push_back(r);
    if (report) {
        report->counties_kept = kept;
        report->counties_dropped = dropped;
        report->population_share_kept = pop_all > 0 ? pop_kept / pop_all : 1.0;
    }
    return out;
}

namespace {

int index_position(const PanelSchema& schema, const std::string& index) {
    for (size_t j = 0; j < schema.index_columns.size(); ++j)
        if (schema.index_columns[j] == index) return static_cast<int>(j);
    throw ConfigError("unknown mobility index '" + index + "'");
}

struct CorrAcc {
    double n = 0, sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    void add(double x, double y) {
        n += 1;
        sx += x;
        sy += y;
        sxx += x * x;
        syy += y * y;
        sxy += x * y;
    }
    double abs_corr() const {
        if (n < 2) return 0.0;
        const double vx = n * sxx - sx * sx, vy = n * syy - sy * sy;
        if (!(vx > 0) || !(vy > 0)) return 0.0;
        const double r = (n * sxy - sx * sy) / std::sqrt(vx * vy);
        return std::isfinite(r) ? std::min(std::abs(r), 1.0) : 0.0;
    }
};

}  // namespace

std::vector<std::string> screen_covariates(const WeeklyTable& table, const std::string& index,
                                           const std::vector<detail::Date>& weeks,
                                           int lead_weeks, bool lag_current_week, int top_k,
                                           std::vector<std::string>* warnings) {
    (void)lag_current_week;  // the lagged column is always appended, never screened
    const auto& names = table.schema.covariate_columns;
    const int m = static_cast<int>(names.size());
    const int idx = index_position(table.schema, index);
    if (top_k <= 0) throw ConfigError("screening requires a positive covariate count");

    std::vector<CorrAcc> with_a(m), with_y(m);
    std::set<long> week_set;
    for (const auto& w : weeks)
        week_set.insert(static_cast<long>(detail::to_days(w).time_since_epoch().count()));
    for (const auto& row : table.rows) {
        if (!week_set.count(
                static_cast<long>(detail::to_days(row.week_start).time_since_epoch().count())))
            continue;
        const double a = row.indices[idx];
        const auto y = outcome_for(table, row.county, row.week_start, lead_weeks);
        for (int j = 0; j < m; ++j) {
            const double c = row.covariates[j];
            if (!std::isfinite(c)) continue;
            if (std::isfinite(a)) with_a[j].add(c, a);
            if (y) with_y[j].add(c, *y);
        }
    }

    // Rank positions under each target, ties resolved by name.
    auto ranks_for = [&](const std::vector<CorrAcc>& accs) {
        std::vector<int> order(m);
        for (int j = 0; j < m; ++j) order[j] = j;
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            const double ca = accs[a].abs_corr(), cb = accs[b].abs_corr();
            if (ca != cb) return ca > cb;
            return names[a] < names[b];
        });
        std::vector<int> rank(m);
        for (int pos = 0; pos < m; ++pos) rank[order[pos]] = pos + 1;
        return rank;
    };
    const std::vector<int> rank_a = ranks_for(with_a);
    const std::vector<int> rank_y = ranks_for(with_y);

    std::vector<int> order(m);
    for (int j = 0; j < m; ++j) order[j] = j;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const int sa = std::min(rank_a[a], rank_y[a]), sb = std::min(rank_a[b], rank_y[b]);
        if (sa != sb) return sa < sb;
        return names[a] < names[b];
    });

    if (m < top_k && warnings)
        warnings->push_back("screening for index '" + index + "': only " + std::to_string(m) +
                            " candidate covariates available, requested " +
                            std::to_string(top_k));
    std::vector<std::string> out;
    for (int pos = 0; pos < std::min(top_k, m); ++pos) out.push_back(names[order[pos]]);
    return out;
}

ShiftDiagnostic diagnose_shift(const AnalysisFrame& frame,
                               const std::vector<ShiftPolicy>& candidates_by_intensity,
                               const std::vector<LearnerSpec>& ratio_library,
                               const SuperLearnerOptions& super_learner, std::uint64_t seed,
                               double threshold) {
    if (candidates_by_intensity.empty())
        throw ConfigError("shift diagnostic needs at least one candidate policy");
    ShiftDiagnostic diag;
    diag.candidates = candidates_by_intensity;
    DensityRatioOptions opt;
    opt.library = ratio_library;
    opt.super_learner = super_learner;
    for (size_t i = 0; i < candidates_by_intensity.size(); ++i) {
        const auto& policy = candidates_by_intensity[i];
        policy.validate();
        const ShiftedExposure shifted = shift_frame(frame, policy);
        double max_r;
        try {
            max_r = estimate_density_ratio(frame, shifted.values,
                                           mix_seed(seed, static_cast<std::uint64_t>(i)), opt)
                        .max_ratio;
        } catch (const EstimationError& e) {
            max_r = std::numeric_limits<double>::infinity();
            diag.warnings.push_back("candidate " + policy.describe() + ": " + e.what());
        }
        diag.max_ratios.push_back(max_r);
    }
    bool found = false;
    for (size_t i = candidates_by_intensity.size(); i-- > 0;) {
        if (diag.max_ratios[i] < threshold) {
            diag.selected = i;
            found = true;
            break;
        }
    }
    if (!found) {
        diag.selected = 0;
        diag.fallback = true;
        diag.warnings.push_back("no candidate policy kept the maximum density ratio under " +
                                std::to_string(threshold) +
                                "; falling back to the least intense candidate");
    }
    return diag;
}

ConfounderMode parse_confounder_mode(const std::string& s) {
    if (s == "pooled-top8") return ConfounderMode::PooledTop8;
    if (s == "per-week-top8") return ConfounderMode::PerWeekTop8;
    if (s == "per-week-top4") return ConfounderMode::PerWeekTop4;
    throw ConfigError("unknown confounder mode '" + s +
                      "' (expected pooled-top8, per-week-top8 or per-week-top4)");
}

std::string to_string(ConfounderMode mode) {
    switch (mode) {
        case ConfounderMode::PooledTop8: return "pooled-top8";
        case ConfounderMode::PerWeekTop8: return "per-week-top8";
        case ConfounderMode::PerWeekTop4: return "per-week-top4";
    }
    return "?";
}

namespace {

int mode_top_k(ConfounderMode m) { return m == ConfounderMode::PerWeekTop4 ? 4 : 8; }
bool mode_pooled(ConfounderMode m) { return m == ConfounderMode::PooledTop8; }

}  // namespace

std::optional<SliceFrame> assemble_slice(const WeeklyTable& table, const SliceSpec& spec,
                                         const std::vector<std::string>& screened) {
    const int idx = index_position(table.schema, spec.index);
    std::vector<int> cov_pos;
    for (const auto& name : screened) {
        const auto& names = table.schema.covariate_columns;
        const auto it = std::find(names.begin(), names.end(), name);
        if (it == names.end())
            throw ConfigError("screened covariate '" + name + "' is not a declared column");
        cov_pos.push_back(static_cast<int>(it - names.begin()));
    }

    std::vector<const WeeklyRow*> candidates;
    for (const auto& row : table.rows)
        if (row.week_start == spec.week_start) candidates.push_back(&row);
    if (candidates.empty()) return std::nullopt;

    SliceFrame out;
    out.covariate_names = screened;
    out.covariate_names.push_back("lagged_case_rate");

    std::vector<const WeeklyRow*> kept;
    std::vector<double> a_vals, y_vals, lag_vals;
    for (const WeeklyRow* row : candidates) {
        const double a = row->indices[idx];
        if (!std::isfinite(a)) continue;
        const auto y = outcome_for(table, row->county, spec.week_start, spec.lead_weeks);
        if (!y) continue;
        const auto lag =
            lagged_case_rate(table, row->county, spec.week_start, spec.lag_current_week);
        if (!lag) continue;
        bool complete = true;
        for (int p : cov_pos)
            if (!std::isfinite(row->covariates[p])) {
                complete = false;
                break;
            }
        if (!complete) continue;
        kept.push_back(row);
        a_vals.push_back(a);
        y_vals.push_back(*y);
        lag_vals.push_back(*lag);
    }
    out.dropped_rows = static_cast<Eigen::Index>(candidates.size() - kept.size());

    const auto n = static_cast<Eigen::Index>(kept.size());
    const auto k = static_cast<Eigen::Index>(cov_pos.size());
    out.adjusted.covariates.resize(n, k + 1);
    out.adjusted.exposure.resize(n);
    out.adjusted.outcome.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        out.adjusted.unit_ids.push_back(kept[i]->county);
        out.adjusted.exposure[i] = a_vals[i];
        out.adjusted.outcome[i] = y_vals[i];
        for (Eigen::Index j = 0; j < k; ++j)
            out.adjusted.covariates(i, j) = kept[i]->covariates[cov_pos[j]];
        out.adjusted.covariates(i, k) = lag_vals[i];
    }
    out.unadjusted.unit_ids = out.adjusted.unit_ids;
    out.unadjusted.exposure = out.adjusted.exposure;
    out.unadjusted.outcome = out.adjusted.outcome;
    out.unadjusted.covariates.resize(n, 0);
    return out;
}

GridResult run_grid(const WeeklyTable& table, const std::vector<SliceSpec>& specs,
                    const GridOptions& options, std::uint64_t seed) {
    GridResult grid;
    grid.slices.resize(specs.size());

    // Pooled screening is shared across every slice of an (index, lead, lag)
    // group; compute each list once, in deterministic key order.
    using PoolKey = std::tuple<std::string, int, bool>;
    std::map<PoolKey, std::vector<detail::Date>> pool_weeks;
    for (const auto& s : specs)
        if (mode_pooled(s.confounder_mode))
            pool_weeks[{s.index, s.lead_weeks, s.lag_current_week}].push_back(s.week_start);
    std::map<PoolKey, std::vector<std::string>> pooled;
    for (auto& [key, weeks] : pool_weeks) {
        std::sort(weeks.begin(), weeks.end(), [](const detail::Date& a, const detail::Date& b) {
            return detail::to_days(a) < detail::to_days(b);
        });
        weeks.erase(std::unique(weeks.begin(), weeks.end()), weeks.end());
        pooled[key] = screen_covariates(table, std::get<0>(key), weeks, std::get<1>(key),
                                        std::get<2>(key), 8, &grid.warnings);
    }

    std::mutex progress_mutex;
    std::vector<std::vector<std::string>> slice_warnings(specs.size());

    auto run_one = [&](size_t i) {
        const SliceSpec& spec = specs[i];
        SliceResult& res = grid.slices[i];
        res.spec = spec;
        auto note_progress = [&](const std::string& line) {
            if (!options.progress) return;
            std::lock_guard<std::mutex> lock(progress_mutex);
            options.progress(line);
        };
        const std::string cell =
            detail::format_date(spec.week_start) + " " + spec.index + " " + spec.policy.describe();
        try {
            std::vector<std::string> screened;
            if (mode_pooled(spec.confounder_mode)) {
                screened = pooled.at({spec.index, spec.lead_weeks, spec.lag_current_week});
            } else {
                screened = screen_covariates(table, spec.index, {spec.week_start},
                                             spec.lead_weeks, spec.lag_current_week,
                                             mode_top_k(spec.confounder_mode),
                                             &slice_warnings[i]);
            }
            auto frame = assemble_slice(table, spec, screened);
            if (!frame) {
                res.skipped = true;
                res.skip_reason = "no rows for week " + detail::format_date(spec.week_start);
                note_progress(cell + ": skipped (" + res.skip_reason + ")");
                return;
            }
            res.n = frame->adjusted.n();
            res.dropped_rows = frame->dropped_rows;
            res.screened = frame->covariate_names;
            const Eigen::Index min_n = std::max<Eigen::Index>(options.min_slice_n, 2);
            if (res.n < min_n) {
                res.skipped = true;
                res.skip_reason = "n=" + std::to_string(res.n) + " below minimum " +
                                  std::to_string(min_n);
                note_progress(cell + ": skipped (" + res.skip_reason + ")");
                return;
            }

            EstimatorOptions est;
            est.outcome_library = options.outcome_library;
            est.outcome_super_learner = options.super_learner;
            est.density_ratio.library = options.ratio_library;
            est.density_ratio.super_learner = options.super_learner;
            est.density_ratio.truncate_at = options.truncate_ratio_at;

            const std::uint64_t slice_seed =
                mix_seed(mix_seed(seed, "slice"), detail::format_date(spec.week_start) + "|" +
                                                      spec.index + "|" + spec.policy.describe());
            res.adjusted = estimate_shift(frame->adjusted, spec.policy,
                                          mix_seed(slice_seed, "adjusted"), est);
            res.unadjusted = estimate_shift(frame->unadjusted, spec.policy,
                                            mix_seed(slice_seed, "unadjusted"), est);
            note_progress(cell + ": n=" + std::to_string(res.n) +
                          " adjusted=" + std::to_string(res.adjusted.psi_delta) +
                          " unadjusted=" + std::to_string(res.unadjusted.psi_delta));
        } catch (const std::exception& e) {
            res.skipped = true;
            res.skip_reason = e.what();
            note_progress(cell + ": failed (" + res.skip_reason + ")");
        }
    };

    const int jobs = std::max(1, options.jobs);
    if (jobs == 1 || specs.size() <= 1) {
        for (size_t i = 0; i < specs.size(); ++i) run_one(i);
    } else {
        std::vector<std::thread> workers;
        const int n_workers = std::min<int>(jobs, static_cast<int>(specs.size()));
        for (int t = 0; t < n_workers; ++t)
            workers.emplace_back([&, t] {
                for (size_t i = t; i < specs.size(); i += n_workers) run_one(i);
            });
        for (auto& w : workers) w.join();
    }

    for (auto& ws : slice_warnings)
        for (auto& w : ws) grid.warnings.push_back(std::move(w));
    return grid;
}

namespace {

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

std::string kind_name(const ShiftPolicy& p) {
    return p.kind == ShiftPolicy::Kind::Additive ? "additive" : "multiplicative";
}

void result_row(std::string& out, const SliceResult& res, const char* estimator,
                const ShiftEstimate& est, const std::string& screened) {
    out += detail::format_date(res.spec.week_start);
    out += ',' + csv_escape(res.spec.index);
    out += ',' + kind_name(res.spec.policy);
    out += ',' + fmt_double(res.spec.policy.value);
    out += ',';
    out += estimator;
    out += ',' + std::to_string(res.n);
    out += ',' + fmt_double(est.psi_delta);
    out += ',' + fmt_double(est.std_err);
    out += ',' + fmt_double(est.ci_lo);
    out += ',' + fmt_double(est.ci_hi);
    out += ',' + fmt_double(est.max_density_ratio);
    out += ',' + fmt_double(est.mean_density_ratio);
    out += ',' + std::to_string(est.truncated_shift_count);
    out += ',' + csv_escape(screened);
    out += ',' + std::to_string(res.dropped_rows);
    out += '\n';
}

}  // namespace

std::string results_csv_string(const GridResult& grid) {
    std::string out =
        "week_start,index,policy_kind,policy_value,estimator,n,psi_delta,std_err,ci_lo,ci_hi,"
        "max_density_ratio,mean_density_ratio,truncated_shift_count,screened_covariates,"
        "dropped_rows\n";
    for (const auto& res : grid.slices) {
        if (res.skipped) continue;
        result_row(out, res, "adjusted", res.adjusted, join(res.screened, ";"));
        result_row(out, res, "unadjusted", res.unadjusted, "");
    }
    return out;
}

namespace {

nlohmann::json estimate_json(const SliceResult& res, const char* estimator,
                             const ShiftEstimate& est, const std::string& screened) {
    nlohmann::json j;
    j["week_start"] = detail::format_date(res.spec.week_start);
    j["index"] = res.spec.index;
    j["policy_kind"] = kind_name(res.spec.policy);
    j["policy_value"] = res.spec.policy.value;
    j["estimator"] = estimator;
    j["n"] = res.n;
    j["psi_delta"] = est.psi_delta;
    j["std_err"] = est.std_err;
    j["ci_lo"] = est.ci_lo;
    j["ci_hi"] = est.ci_hi;
    j["max_density_ratio"] = est.max_density_ratio;
    j["mean_density_ratio"] = est.mean_density_ratio;
    j["truncated_shift_count"] = est.truncated_shift_count;
    j["screened_covariates"] = screened;
    j["dropped_rows"] = res.dropped_rows;
    return j;
}

}  // namespace

std::string results_json_string(const GridResult& grid) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["results"] = nlohmann::json::array();
    j["skipped"] = nlohmann::json::array();
    for (const auto& res : grid.slices) {
        if (res.skipped) {
            nlohmann::json s;
            s["week_start"] = detail::format_date(res.spec.week_start);
            s["index"] = res.spec.index;
            s["policy_kind"] = kind_name(res.spec.policy);
            s["policy_value"] = res.spec.policy.value;
            s["reason"] = res.skip_reason;
            j["skipped"].push_back(std::move(s));
            continue;
        }
        j["results"].push_back(estimate_json(res, "adjusted", res.adjusted,
                                             join(res.screened, ";")));
        j["results"].push_back(estimate_json(res, "unadjusted", res.unadjusted, ""));
    }
    j["warnings"] = grid.warnings;
    return j.dump(2) + "\n";
}

namespace {

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + path);
    out << content;
    if (!out) throw DataError("error while writing file: " + path);
}

}  // namespace

void write_results_csv(const GridResult& grid, const std::string& path) {
    write_file(path, results_csv_string(grid));
}

void write_results_json(const GridResult& grid, const std::string& path) {
    write_file(path, results_json_string(grid));
}

}  // namespace mtp
