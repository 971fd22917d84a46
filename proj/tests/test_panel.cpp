#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

#include "json.hpp"
#include "mtp/detail/csv.hpp"
#include "mtp/errors.hpp"
#include "mtp/panel.hpp"
#include "mtp/rng.hpp"

using namespace mtp;
using detail::Date;

namespace {

Date d(const char* iso) { return detail::parse_date(iso); }

std::string county_name(int i) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "c%02d", i);
    return buf;
}

PanelSchema basic_schema() {
    PanelSchema s;
    s.index_columns = {"m"};
    s.covariate_columns = {"c1", "c2"};
    s.missing_sentinel = "NA";
    return s;
}

DailyRow daily(const std::string& county, const char* date, double pop, double cases,
               std::vector<double> idx, std::vector<double> cov) {
    DailyRow r;
    r.county = county;
    r.date = d(date);
    r.population = pop;
    r.cases = cases;
    r.indices = std::move(idx);
    r.covariates = std::move(cov);
    return r;
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

TEST_CASE("date parsing and week arithmetic") {
    CHECK(detail::format_date(d("2020-06-03")) == "2020-06-03");
    CHECK(detail::format_date(detail::monday_of(d("2020-06-03"))) == "2020-06-01");
    CHECK(detail::format_date(detail::monday_of(d("2020-06-01"))) == "2020-06-01");  // Monday
    CHECK(detail::format_date(detail::monday_of(d("2020-06-07"))) == "2020-06-01");  // Sunday
    CHECK(detail::format_date(detail::add_days(d("2020-06-01"), 7)) == "2020-06-08");
    CHECK(detail::format_date(detail::add_days(d("2020-06-01"), -7)) == "2020-05-25");
    CHECK(detail::days_between(d("2020-06-01"), d("2020-06-15")) == 14);
    CHECK(detail::days_between(d("2020-06-15"), d("2020-06-01")) == -14);
    CHECK_THROWS_AS(detail::parse_date("2020-6-3"), DataError);
    CHECK_THROWS_AS(detail::parse_date("2020-13-01"), DataError);
    CHECK_THROWS_AS(detail::parse_date("2020-02-30"), DataError);
    CHECK_THROWS_AS(detail::parse_date("garbage"), DataError);
    CHECK_THROWS_AS(detail::parse_date(""), DataError);
}

TEST_CASE("csv parsing handles quotes and reports malformed lines") {
    std::istringstream in("a,b,c\n1,\"x,y\",3\n4,\"he said \"\"hi\"\"\",6\r\n");
    const auto t = detail::parse_csv(in);
    REQUIRE(t.header.size() == 3);
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0][1] == "x,y");
    CHECK(t.rows[1][1] == "he said \"hi\"");
    CHECK(t.rows[1][2] == "6");  // \r stripped
    CHECK(t.column("b") == 1);
    CHECK(t.column("nope") == -1);
    CHECK(t.line_numbers[1] == 3);

    std::istringstream bad("a,b\n1,\"unterminated\n");
    CHECK_THROWS_AS(detail::parse_csv(bad), DataError);
}

TEST_CASE("ingest accepts good rows and rejects bad ones with line numbers") {
    const std::string text =
        "county_id,date,population,cases,m,c1,c2\n"
        "b,2020-06-02,1000,5,1.5,2,3\n"       // out of order on purpose
        "a,2020-06-01,1000,4,NA,xx,7\n"       // missing index, junk covariate
        "a,2020-06-02,1000,notnum,1,2,3\n"    // bad cases
        "a,2020-06-03,0,4,1,2,3\n"            // bad population
        ",2020-06-04,1000,4,1,2,3\n"          // missing county
        "a,2020/06/05,1000,4,1,2,3\n"         // bad date
        "a,2020-06-06,1000,4,1,2\n"           // short row
        "a,2020-06-07,1000,-1,1,2,3\n";       // negative cases
    std::istringstream in(text);
    const auto table = ingest_stream(in, basic_schema());
    CHECK(table.report.accepted == 2);
    CHECK(table.report.rejected == 6);
    CHECK(table.report.unparseable_optionals == 1);  // the 'xx' covariate
    REQUIRE(table.report.messages.size() == 6);
    CHECK(table.report.messages[0].find("line 4") != std::string::npos);
    CHECK(table.report.messages[1].find("line 5") != std::string::npos);
    CHECK(table.report.messages[5].find("line 9") != std::string::npos);

    // sorted by (county, date) regardless of input order
    REQUIRE(table.rows.size() == 2);
    CHECK(table.rows[0].county == "a");
    CHECK(table.rows[1].county == "b");
    CHECK(std::isnan(table.rows[0].indices[0]));
    CHECK(std::isnan(table.rows[0].covariates[0]));
    CHECK(table.rows[0].covariates[1] == 7.0);
}

TEST_CASE("ingest aborts on duplicate keys and missing columns") {
    std::istringstream dup(
        "county_id,date,population,cases,m,c1,c2\n"
        "a,2020-06-01,1000,4,1,2,3\n"
        "a,2020-06-01,1000,5,1,2,3\n");
    CHECK_THROWS_AS(ingest_stream(dup, basic_schema()), DataError);

    std::istringstream short_header("county_id,date,population\n");
    try {
        ingest_stream(short_header, basic_schema());
        FAIL("expected DataError");
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("cases") != std::string::npos);  // every missing column listed
        CHECK(msg.find("m") != std::string::npos);
        CHECK(msg.find("c2") != std::string::npos);
    }
}

TEST_CASE("weekly binning of incident counts") {
    PanelTable table;
    table.schema = basic_schema();
    table.rows = {
        daily("x", "2020-06-01", 5e4, 2, {1.0}, {kNaN, 9.0}),
        daily("x", "2020-06-02", 5e4, 3, {kNaN}, {5.0, 9.0}),
        daily("x", "2020-06-03", 5e4, 4, {3.0}, {6.0, 9.0}),
    };
    const auto weekly = bin_weekly(table);
    REQUIRE(weekly.rows.size() == 1);
    const auto& w = weekly.rows[0];
    CHECK(detail::format_date(w.week_start) == "2020-06-01");
    CHECK(w.day_count == 3);
    CHECK(w.mean_new_cases == doctest::Approx(3.0));
    CHECK(w.weekly_new_cases() == doctest::Approx(9.0));
    CHECK(w.indices[0] == doctest::Approx(2.0));  // mean of observed days only
    CHECK(w.covariates[0] == 5.0);                // first observed value
    CHECK(w.covariates[1] == 9.0);
    CHECK(w.population == 5e4);
    CHECK(weekly.case_rate("x", d("2020-06-01")) == doctest::Approx(1e5 * 9.0 / 5e4));
}

TEST_CASE("cumulative series are differenced per county") {
    PanelTable table;
    table.schema = basic_schema();
    table.schema.cases_cumulative = true;
    table.rows = {
        daily("x", "2020-06-01", 1e5, 100, {1.0}, {1.0, 1.0}),
        daily("x", "2020-06-02", 1e5, 103, {1.0}, {1.0, 1.0}),
        daily("x", "2020-06-03", 1e5, 103, {1.0}, {1.0, 1.0}),
        daily("x", "2020-06-04", 1e5, 110, {1.0}, {1.0, 1.0}),
        daily("y", "2020-06-01", 1e5, 50, {1.0}, {1.0, 1.0}),
        daily("y", "2020-06-02", 1e5, 48, {1.0}, {1.0, 1.0}),   // downward revision
        daily("y", "2020-06-03", 1e5, 55, {1.0}, {1.0, 1.0}),
    };
    const auto weekly = bin_weekly(table);
    REQUIRE(weekly.rows.size() == 2);
    const auto* x = weekly.find("x", d("2020-06-01"));
    REQUIRE(x != nullptr);
    CHECK(x->day_count == 3);  // the first observed day has no previous value
    CHECK(x->weekly_new_cases() == doctest::Approx(10.0));
    const auto* y = weekly.find("y", d("2020-06-01"));
    REQUIRE(y != nullptr);
    CHECK(y->day_count == 2);
    CHECK(y->weekly_new_cases() == doctest::Approx(7.0));  // -2 floored to 0, then +7
    CHECK(weekly.floored_revisions == 1);
}

TEST_CASE("cumulative differencing across a week boundary") {
    PanelTable table;
    table.schema = basic_schema();
    table.schema.cases_cumulative = true;
    table.rows = {
        daily("x", "2020-06-07", 1e5, 100, {1.0}, {1.0, 1.0}),  // Sunday, week of 06-01
        daily("x", "2020-06-08", 1e5, 103, {1.0}, {1.0, 1.0}),  // Monday, next week
    };
    const auto weekly = bin_weekly(table);
    REQUIRE(weekly.rows.size() == 2);
    CHECK_FALSE(weekly.case_rate("x", d("2020-06-01")).has_value());  // no counted day
    CHECK(weekly.case_rate("x", d("2020-06-08")) == doctest::Approx(3.0));
}

TEST_CASE("incident binning conserves the case total") {
    PanelTable table;
    table.schema = basic_schema();
    auto rng = make_rng(91);
    std::uniform_int_distribution<int> cases_dist(0, 40);
    double total = 0.0;
    for (const char* county : {"a", "b"}) {
        for (int day = 0; day < 20; ++day) {
            const double cases = cases_dist(rng);
            total += cases;
            table.rows.push_back(daily(county,
                                       detail::format_date(detail::add_days(d("2020-06-01"), day))
                                           .c_str(),
                                       1e5, cases, {0.0}, {0.0, 0.0}));
        }
    }
    const auto weekly = bin_weekly(table);
    double weekly_total = 0.0;
    for (const auto& row : weekly.rows) weekly_total += row.weekly_new_cases();
    CHECK(weekly_total == doctest::Approx(total).epsilon(1e-12));
}

TEST_CASE("outcome and lag lookups move whole weeks") {
    PanelTable table;
    table.schema = basic_schema();
    const double rates[4] = {7, 14, 21, 28};  // weekly cases; pop 1e5 makes rate == cases
    for (int k = 0; k < 4; ++k)
        table.rows.push_back(daily("a",
                                   detail::format_date(detail::add_days(d("2020-06-01"), 7 * k))
                                       .c_str(),
                                   1e5, rates[k], {0.0}, {0.0, 0.0}));
    const auto weekly = bin_weekly(table);
    CHECK(*outcome_for(weekly, "a", d("2020-06-01"), 2) == doctest::Approx(21));
    CHECK(*outcome_for(weekly, "a", d("2020-06-08"), 1) == doctest::Approx(21));
    CHECK_FALSE(outcome_for(weekly, "a", d("2020-06-15"), 2).has_value());
    CHECK(*lagged_case_rate(weekly, "a", d("2020-06-08"), false) == doctest::Approx(7));
    CHECK(*lagged_case_rate(weekly, "a", d("2020-06-08"), true) == doctest::Approx(14));
    CHECK_FALSE(lagged_case_rate(weekly, "a", d("2020-06-01"), false).has_value());
    CHECK_FALSE(outcome_for(weekly, "zz", d("2020-06-01"), 1).has_value());
}

TEST_CASE("population filter keeps the boundary county") {
    PanelTable table;
    table.schema = basic_schema();
    const double pops[3] = {39999, 40000, 52000};
    const char* names[3] = {"p1", "p2", "p3"};
    for (int i = 0; i < 3; ++i)
        table.rows.push_back(daily(names[i], "2020-06-01", pops[i], 1, {0.0}, {0.0, 0.0}));
    const auto weekly = bin_weekly(table);
    PopulationFilterReport report;
    const auto kept = filter_population(weekly, 40000, &report);
    CHECK(report.counties_kept == 2);
    CHECK(report.counties_dropped == 1);
    CHECK(report.population_share_kept ==
          doctest::Approx((40000.0 + 52000.0) / (39999.0 + 40000.0 + 52000.0)));
    CHECK(kept.find("p1", d("2020-06-01")) == nullptr);
    CHECK(kept.find("p2", d("2020-06-01")) != nullptr);
    const auto all = filter_population(weekly, 0.0);
    CHECK(all.rows.size() == 3);
}

namespace {

// 30 counties x 4 weeks, one observed day per week, population 1e5 so the
// case rate equals the weekly count. Covariates: an exact copy of the index,
// an exact copy of next week's outcome, an identical pair, and noise.
WeeklyTable screening_table() {
    PanelTable table;
    table.schema.index_columns = {"m"};
    table.schema.covariate_columns = {"a_twin", "dup_a", "dup_b", "noise1", "noise2", "y_twin"};
    auto rng = make_rng(71);
    std::normal_distribution<double> normal;
    for (int i = 0; i < 30; ++i) {
        double cases[5];
        for (double& c : cases) c = 20.0 + 5.0 * normal(rng);
        for (int k = 0; k < 4; ++k) {
            const double a = normal(rng);
            const double dup = 0.5 * a + normal(rng);
            DailyRow r;
            r.county = county_name(i);
            r.date = detail::add_days(d("2020-06-01"), 7 * k);
            r.population = 1e5;
            r.cases = cases[k];
            r.indices = {a};
            r.covariates = {a, dup, dup, normal(rng), normal(rng), cases[k + 1]};
            table.rows.push_back(std::move(r));
        }
    }
    return bin_weekly(table);
}

}  // namespace

TEST_CASE("screening ranks exact copies of exposure and outcome first") {
    const auto weekly = screening_table();
    const auto weeks = weekly.weeks();
    REQUIRE(weeks.size() == 4);

    std::vector<std::string> warnings;
    const auto top3 = screen_covariates(weekly, "m", weeks, 1, false, 3, &warnings);
    REQUIRE(top3.size() == 3);
    CHECK(top3[0] == "a_twin");   // |corr with A| = 1, tie with y_twin broken by name
    CHECK(top3[1] == "y_twin");   // |corr with Y| = 1
    CHECK(top3[2] == "dup_a");    // identical twins ordered by name
    CHECK(warnings.empty());

    const auto all = screen_covariates(weekly, "m", weeks, 1, false, 10, &warnings);
    CHECK(all.size() == 6);  // fewer candidates than requested: return all, warn
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("6") != std::string::npos);
    size_t pos_a = 0, pos_b = 0;
    for (size_t j = 0; j < all.size(); ++j) {
        if (all[j] == "dup_a") pos_a = j;
        if (all[j] == "dup_b") pos_b = j;
    }
    CHECK(pos_a < pos_b);

    // repeated call gives the same answer; there is no RNG in screening
    CHECK(screen_covariates(weekly, "m", weeks, 1, false, 3) == top3);
    CHECK_THROWS_AS(screen_covariates(weekly, "nope", weeks, 1, false, 3), ConfigError);
    CHECK_THROWS_AS(screen_covariates(weekly, "m", weeks, 1, false, 0), ConfigError);
}

namespace {

AnalysisFrame exposure_only_frame(Eigen::Index n, double sd, std::uint64_t seed) {
    AnalysisFrame f;
    f.covariates.resize(n, 0);
    f.exposure.resize(n);
    f.outcome.resize(n);
    auto rng = make_rng(seed);
    std::normal_distribution<double> normal(0.0, sd);
    for (Eigen::Index i = 0; i < n; ++i) {
        f.exposure[i] = normal(rng);
        f.outcome[i] = 1.0;
    }
    return f;
}

std::vector<LearnerSpec> logit_library() {
    return {LearnerSpec{"logit", "logistic", Task::BinaryProbability, {}}};
}

}  // namespace

TEST_CASE("shift diagnostic picks the most intense feasible candidate") {
    const auto frame = exposure_only_frame(600, 2.0, 83);
    const std::vector<ShiftPolicy> candidates = {
        ShiftPolicy::additive(0.25), ShiftPolicy::additive(1.0), ShiftPolicy::additive(6.0)};
    const auto diag = diagnose_shift(frame, candidates, logit_library(), {}, 5);
    REQUIRE(diag.max_ratios.size() == 3);
    CHECK(diag.max_ratios[0] < diag.max_ratios[1]);
    CHECK(diag.max_ratios[1] < diag.max_ratios[2]);
    CHECK(diag.max_ratios[1] < 10.0);
    CHECK(diag.max_ratios[2] > 10.0);
    CHECK(diag.selected == 1);
    CHECK_FALSE(diag.fallback);
}

TEST_CASE("shift diagnostic falls back when nothing qualifies") {
    const auto frame = exposure_only_frame(200, 0.1, 89);
    const std::vector<ShiftPolicy> candidates = {ShiftPolicy::additive(20.0),
                                                 ShiftPolicy::additive(50.0)};
    const auto diag = diagnose_shift(frame, candidates, logit_library(), {}, 7);
    CHECK(diag.fallback);
    CHECK(diag.selected == 0);
    CHECK(std::isinf(diag.max_ratios[0]));  // classifier saturated, recorded as infinite
    CHECK(diag.warnings.size() >= 2);
    CHECK_THROWS_AS(diagnose_shift(frame, {}, logit_library(), {}, 7), ConfigError);
}

namespace {

// 8 counties x 4 weekly Mondays. County c02 is missing the index in week 1,
// county c03 has no data in week 2 (so no outcome for week 1), county c04
// never reports covariate c1.
WeeklyTable slice_table() {
    PanelTable table;
    table.schema = basic_schema();
    for (int i = 0; i < 8; ++i) {
        for (int k = 0; k < 4; ++k) {
            if (i == 3 && k == 2) continue;
            DailyRow r;
            r.county = county_name(i);
            r.date = detail::add_days(d("2020-06-01"), 7 * k);
            r.population = 1e5;
            r.cases = 10.0 + i + k;
            const double a = 0.3 * i - 0.1 * k;
            r.indices = {(i == 2 && k == 1) ? kNaN : a};
            r.covariates = {(i == 4) ? kNaN : 1.0 + 0.5 * i, 2.0 - 0.25 * i};
            table.rows.push_back(std::move(r));
        }
    }
    return bin_weekly(table);
}

}  // namespace

TEST_CASE("slice assembly drops incomplete rows and mirrors the unadjusted frame") {
    const auto weekly = slice_table();
    SliceSpec spec;
    spec.week_start = d("2020-06-08");  // week 1
    spec.index = "m";
    spec.policy = ShiftPolicy::additive(-0.5);
    spec.lead_weeks = 1;
    const auto slice = assemble_slice(weekly, spec, {"c1"});
    REQUIRE(slice.has_value());
    CHECK(slice->dropped_rows == 3);  // missing index, missing outcome, missing covariate
    REQUIRE(slice->adjusted.n() == 5);
    CHECK(slice->covariate_names == std::vector<std::string>{"c1", "lagged_case_rate"});
    CHECK(slice->adjusted.p() == 2);
    CHECK(slice->unadjusted.p() == 0);
    CHECK(slice->unadjusted.exposure == slice->adjusted.exposure);
    CHECK(slice->unadjusted.outcome == slice->adjusted.outcome);
    CHECK(slice->adjusted.unit_ids ==
          std::vector<std::string>{"c00", "c01", "c05", "c06", "c07"});
    for (Eigen::Index row = 0; row < slice->adjusted.n(); ++row) {
        const auto& county = slice->adjusted.unit_ids[row];
        CHECK(slice->adjusted.covariates(row, 1) ==
              doctest::Approx(*lagged_case_rate(weekly, county, spec.week_start, false)));
        CHECK(slice->adjusted.outcome[row] ==
              doctest::Approx(*outcome_for(weekly, county, spec.week_start, 1)));
    }

    CHECK_THROWS_AS(assemble_slice(weekly, spec, {"mystery"}), ConfigError);
    SliceSpec empty_week = spec;
    empty_week.week_start = d("2021-01-04");
    CHECK_FALSE(assemble_slice(weekly, empty_week, {"c1"}).has_value());
}

namespace {

GridOptions fast_grid_options() {
    GridOptions opt;
    opt.outcome_library = {LearnerSpec{"mean", "mean", Task::Regression, {}},
                           LearnerSpec{"ols", "linear", Task::Regression, {}}};
    opt.ratio_library = {LearnerSpec{"logit", "logistic", Task::BinaryProbability, {}}};
    opt.min_slice_n = 5;
    return opt;
}

WeeklyTable toy_weekly() {
    PanelSchema schema;
    schema.index_columns = {"mobility_work", "mobility_retail"};
    schema.covariate_columns = {"income", "density", "median_age"};
    schema.missing_sentinel = "NA";
    const auto table = ingest(std::string(MTP_TEST_DATA_DIR) + "/toy_panel.csv", schema);
    REQUIRE(table.report.accepted == 672);
    REQUIRE(table.report.rejected == 0);
    return filter_population(bin_weekly(table), 40000);
}

std::vector<SliceSpec> toy_specs(const WeeklyTable& weekly) {
    std::vector<SliceSpec> specs;
    for (const auto& week : weekly.weeks()) {
        for (const char* index : {"mobility_work", "mobility_retail"}) {
            SliceSpec s;
            s.week_start = week;
            s.index = index;
            s.policy = ShiftPolicy::additive(-2.0);
            s.lead_weeks = 2;
            specs.push_back(std::move(s));
        }
    }
    return specs;
}

}  // namespace

TEST_CASE("toy panel grid estimates ten slices and skips the edge weeks") {
    const auto weekly = toy_weekly();
    PopulationFilterReport report;
    {
        PanelSchema schema;
        schema.index_columns = {"mobility_work", "mobility_retail"};
        schema.covariate_columns = {"income", "density", "median_age"};
        schema.missing_sentinel = "NA";
        const auto raw = bin_weekly(
            ingest(std::string(MTP_TEST_DATA_DIR) + "/toy_panel.csv", schema));
        filter_population(raw, 40000, &report);
    }
    CHECK(report.counties_kept == 11);   // the 40,000 county stays
    CHECK(report.counties_dropped == 1); // the 39,999 county goes
    CHECK(weekly.counties().size() == 11);
    REQUIRE(weekly.weeks().size() == 8);

    const auto specs = toy_specs(weekly);
    REQUIRE(specs.size() == 16);
    const auto grid = run_grid(weekly, specs, fast_grid_options(), 2024);
    REQUIRE(grid.slices.size() == 16);

    int estimated = 0, skipped = 0;
    for (const auto& res : grid.slices) {
        if (res.skipped) {
            ++skipped;
            CHECK(res.skip_reason.find("below minimum") != std::string::npos);
            // the first week has no lag, the last two no outcome
            const auto w = detail::format_date(res.spec.week_start);
            CHECK((w == "2020-06-01" || w == "2020-07-13" || w == "2020-07-20"));
        } else {
            ++estimated;
            CHECK(res.n == 11);
            CHECK(res.dropped_rows == 0);
            CHECK(res.screened.back() == "lagged_case_rate");
            CHECK(res.screened.size() == 4);  // three covariates plus the lag
            CHECK(std::isfinite(res.adjusted.psi_delta));
            CHECK(std::isfinite(res.unadjusted.psi_delta));
            CHECK(res.adjusted.std_err > 0.0);
        }
    }
    CHECK(estimated == 10);
    CHECK(skipped == 6);

    const std::string csv = results_csv_string(grid);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 21);  // header + 10 slices x 2 rows
}

TEST_CASE("grid output is deterministic and independent of the job count") {
    const auto weekly = toy_weekly();
    const auto specs = toy_specs(weekly);
    auto opt = fast_grid_options();
    const auto a = run_grid(weekly, specs, opt, 99);
    const auto b = run_grid(weekly, specs, opt, 99);
    opt.jobs = 3;
    const auto c = run_grid(weekly, specs, opt, 99);
    CHECK(results_csv_string(a) == results_csv_string(b));
    CHECK(results_csv_string(a) == results_csv_string(c));
    CHECK(results_json_string(a) == results_json_string(c));

    const auto other_seed = run_grid(weekly, specs, opt, 100);
    CHECK(results_csv_string(a) != results_csv_string(other_seed));
}

TEST_CASE("result serialization quotes and formats reproducibly") {
    GridResult grid;
    SliceResult res;
    res.spec.week_start = d("2020-06-01");
    res.spec.index = "walk,transit";  // needs quoting
    res.spec.policy = ShiftPolicy::multiplicative(1.05);
    res.n = 10;
    res.dropped_rows = 1;
    res.screened = {"in,come", "den\"sity"};
    res.adjusted = ShiftEstimate(1.0 / 3.0, 0.0, 0.25);
    res.unadjusted = ShiftEstimate(0.5, 0.25, 0.125);
    SliceResult skip;
    skip.spec.week_start = d("2020-06-08");
    skip.spec.index = "walk,transit";
    skip.skipped = true;
    skip.skip_reason = "n=1 below minimum 2";
    grid.slices = {res, skip};
    grid.warnings = {"note"};

    const std::string csv = results_csv_string(grid);
    std::istringstream in(csv);
    const auto parsed = detail::parse_csv(in);
    REQUIRE(parsed.header.size() == 15);
    CHECK(parsed.header[0] == "week_start");
    CHECK(parsed.header[14] == "dropped_rows");
    REQUIRE(parsed.rows.size() == 2);  // skipped slices stay out of the csv
    CHECK(parsed.rows[0][1] == "walk,transit");
    CHECK(parsed.rows[0][2] == "multiplicative");
    CHECK(parsed.rows[0][4] == "adjusted");
    CHECK(parsed.rows[0][6] == "0.333333333333");  // %.12g
    CHECK(parsed.rows[0][13] == "in,come;den\"sity");
    CHECK(parsed.rows[1][4] == "unadjusted");
    CHECK(parsed.rows[1][13] == "");

    const auto j = nlohmann::json::parse(results_json_string(grid));
    CHECK(j["schema_version"] == 1);
    REQUIRE(j["results"].size() == 2);
    CHECK(j["results"][0]["psi_delta"].get<double>() == doctest::Approx(1.0 / 3.0));
    REQUIRE(j["skipped"].size() == 1);
    CHECK(j["skipped"][0]["reason"] == "n=1 below minimum 2");
    CHECK(j["warnings"][0] == "note");
}
