#include "mtp/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "mtp/errors.hpp"

namespace mtp {

namespace {

using nlohmann::json;

// Collects every problem before failing so a bad config is fixed in one pass.
struct Checker {
    std::vector<std::string> issues;

    void add(const std::string& where, const std::string& what) {
        issues.push_back(where.empty() ? what : where + ": " + what);
    }

    void check_keys(const json& j, const std::string& where,
                    const std::set<std::string>& allowed) {
        for (auto it = j.begin(); it != j.end(); ++it)
            if (!allowed.count(it.key())) add(where, "unknown key '" + it.key() + "'");
    }

    const json* object(const json& j, const std::string& where, const std::string& key,
                       bool required) {
        if (!j.contains(key)) {
            if (required) add(where, "missing required key '" + key + "'");
            return nullptr;
        }
        if (!j[key].is_object()) {
            add(where, "'" + key + "' must be an object");
            return nullptr;
        }
        return &j[key];
    }

    const json* array(const json& j, const std::string& where, const std::string& key) {
        if (!j.contains(key)) return nullptr;
        if (!j[key].is_array()) {
            add(where, "'" + key + "' must be an array");
            return nullptr;
        }
        return &j[key];
    }

    std::string get_string(const json& j, const std::string& where, const std::string& key,
                           const std::string& dflt, bool required = false) {
        if (!j.contains(key)) {
            if (required) add(where, "missing required key '" + key + "'");
            return dflt;
        }
        if (!j[key].is_string()) {
            add(where, "'" + key + "' must be a string");
            return dflt;
        }
        return j[key].get<std::string>();
    }

    double get_number(const json& j, const std::string& where, const std::string& key,
                      double dflt, bool required = false) {
        if (!j.contains(key)) {
            if (required) add(where, "missing required key '" + key + "'");
            return dflt;
        }
        if (!j[key].is_number()) {
            add(where, "'" + key + "' must be a number");
            return dflt;
        }
        return j[key].get<double>();
    }

    long long get_int(const json& j, const std::string& where, const std::string& key,
                      long long dflt, bool required = false) {
        if (!j.contains(key)) {
            if (required) add(where, "missing required key '" + key + "'");
            return dflt;
        }
        if (!j[key].is_number_integer()) {
            add(where, "'" + key + "' must be an integer");
            return dflt;
        }
        return j[key].get<long long>();
    }

    bool get_bool(const json& j, const std::string& where, const std::string& key, bool dflt) {
        if (!j.contains(key)) return dflt;
        if (!j[key].is_boolean()) {
            add(where, "'" + key + "' must be a boolean");
            return dflt;
        }
        return j[key].get<bool>();
    }

    std::vector<std::string> get_string_list(const json& j, const std::string& where,
                                             const std::string& key) {
        std::vector<std::string> out;
        const json* arr = array(j, where, key);
        if (!arr) return out;
        for (const auto& e : *arr) {
            if (!e.is_string()) {
                add(where, "'" + key + "' entries must be strings");
                return out;
            }
            out.push_back(e.get<std::string>());
        }
        return out;
    }

    std::vector<double> get_number_list(const json& j, const std::string& where,
                                        const std::string& key,
                                        const std::vector<double>& dflt) {
        if (!j.contains(key)) return dflt;
        std::vector<double> out;
        const json* arr = array(j, where, key);
        if (!arr) return dflt;
        for (const auto& e : *arr) {
            if (!e.is_number()) {
                add(where, "'" + key + "' entries must be numbers");
                return dflt;
            }
            out.push_back(e.get<double>());
        }
        return out;
    }

    detail::Date get_date(const json& j, const std::string& where, const std::string& key,
                          const detail::Date& dflt) {
        const std::string s = get_string(j, where, key, "");
        if (s.empty()) return dflt;
        try {
            return detail::parse_date(s);
        } catch (const DataError& e) {
            add(where, std::string("'") + key + "': " + e.what());
            return dflt;
        }
    }

    ShiftPolicy get_policy(const json& j, const std::string& where) {
        ShiftPolicy p;
        if (!j.is_object()) {
            add(where, "policy must be an object");
            return p;
        }
        check_keys(j, where, {"kind", "value", "clamp_lo", "clamp_hi"});
        const std::string kind = get_string(j, where, "kind", "", true);
        if (kind == "additive") p.kind = ShiftPolicy::Kind::Additive;
        else if (kind == "multiplicative") p.kind = ShiftPolicy::Kind::Multiplicative;
        else if (!kind.empty()) add(where, "unknown policy kind '" + kind + "'");
        p.value = get_number(j, where, "value", 0.0, true);
        if (j.contains("clamp_lo")) p.clamp_lo = get_number(j, where, "clamp_lo", 0.0);
        if (j.contains("clamp_hi")) p.clamp_hi = get_number(j, where, "clamp_hi", 0.0);
        try {
            p.validate();
        } catch (const ConfigError& e) {
            add(where, e.what());
        }
        return p;
    }

    std::vector<LearnerSpec> get_learners(const json& j, const std::string& where,
                                          const std::string& key, Task task) {
        std::vector<LearnerSpec> out;
        const json* arr = array(j, where, key);
        if (!arr) return out;
        std::set<std::string> names;
        for (size_t i = 0; i < arr->size(); ++i) {
            const std::string at = where + "." + key + "[" + std::to_string(i) + "]";
            const json& e = (*arr)[i];
            if (!e.is_object()) {
                add(at, "learner must be an object");
                continue;
            }
            check_keys(e, at, {"name", "family", "hyperparameters"});
            LearnerSpec spec;
            spec.task = task;
            spec.name = get_string(e, at, "name", "", true);
            spec.family = get_string(e, at, "family", "", true);
            if (!spec.name.empty() && !names.insert(spec.name).second)
                add(at, "duplicate learner name '" + spec.name + "'");
            if (e.contains("hyperparameters")) {
                if (!e["hyperparameters"].is_object()) {
                    add(at, "'hyperparameters' must be an object");
                } else {
                    for (auto it = e["hyperparameters"].begin();
                         it != e["hyperparameters"].end(); ++it) {
                        if (!it.value().is_number()) {
                            add(at, "hyperparameter '" + it.key() + "' must be a number");
                            continue;
                        }
                        spec.hyperparameters[it.key()] = it.value().get<double>();
                    }
                }
            }
            out.push_back(std::move(spec));
        }
        return out;
    }
};

}  // namespace

std::vector<detail::Date> RunConfig::window_weeks() const {
    std::vector<detail::Date> weeks;
    detail::Date w = detail::monday_of(window_start);
    if (detail::to_days(w) < detail::to_days(window_start)) w = detail::add_days(w, 7);
    while (detail::to_days(w) <= detail::to_days(window_end)) {
        weeks.push_back(w);
        w = detail::add_days(w, 7);
    }
    return weeks;
}

SuperLearnerOptions RunConfig::super_learner_options() const {
    SuperLearnerOptions opt;
    opt.folds = folds;
    return opt;
}

RunConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");

    Checker c;
    RunConfig cfg;
    cfg.window_start = detail::parse_date("2020-06-01");
    cfg.window_end = detail::parse_date("2020-11-14");

    c.check_keys(j, "",
                 {"schema_version", "seed", "input", "window", "lead_weeks", "lag_mode",
                  "confounder_mode", "population_threshold", "min_slice_n", "folds", "jobs",
                  "policies", "candidate_policies", "outcome_learners", "ratio_learners",
                  "truncate_density_ratio_at", "output", "simulate"});

    const long long version = c.get_int(j, "", "schema_version", 1, true);
    if (version != 1 && j.contains("schema_version") && j["schema_version"].is_number_integer())
        c.add("", "unsupported schema_version " + std::to_string(version) + " (expected 1)");

    if (!j.contains("seed")) {
        c.add("", "missing required key 'seed'");
    } else if (!j["seed"].is_number_integer() || j["seed"].get<long long>() < 0) {
        c.add("", "'seed' must be a nonnegative integer");
    } else {
        cfg.seed = j["seed"].get<std::uint64_t>();
    }

    if (const json* in = c.object(j, "", "input", false)) {
        cfg.has_input = true;
        c.check_keys(*in, "input",
                     {"path", "delimiter", "missing_sentinel", "cases_cumulative", "columns",
                      "index_columns", "covariate_columns"});
        cfg.input_path = c.get_string(*in, "input", "path", "", true);
        const std::string delim = c.get_string(*in, "input", "delimiter", ",");
        if (delim.size() != 1) c.add("input", "'delimiter' must be a single character");
        else cfg.schema.delimiter = delim[0];
        cfg.schema.missing_sentinel = c.get_string(*in, "input", "missing_sentinel", "");
        cfg.schema.cases_cumulative = c.get_bool(*in, "input", "cases_cumulative", false);
        if (const json* cols = c.object(*in, "input", "columns", false)) {
            c.check_keys(*cols, "input.columns", {"county", "date", "population", "cases"});
            cfg.schema.county_column =
                c.get_string(*cols, "input.columns", "county", cfg.schema.county_column);
            cfg.schema.date_column =
                c.get_string(*cols, "input.columns", "date", cfg.schema.date_column);
            cfg.schema.population_column = c.get_string(*cols, "input.columns", "population",
                                                        cfg.schema.population_column);
            cfg.schema.cases_column =
                c.get_string(*cols, "input.columns", "cases", cfg.schema.cases_column);
        }
        cfg.schema.index_columns = c.get_string_list(*in, "input", "index_columns");
        cfg.schema.covariate_columns = c.get_string_list(*in, "input", "covariate_columns");
        if (cfg.schema.index_columns.empty())
            c.add("input", "'index_columns' must list at least one mobility index");
        try {
            cfg.schema.validate();
        } catch (const ConfigError& e) {
            c.add("input", e.what());
        }
    }

    if (const json* w = c.object(j, "", "window", false)) {
        c.check_keys(*w, "window", {"start", "end"});
        cfg.window_start = c.get_date(*w, "window", "start", cfg.window_start);
        cfg.window_end = c.get_date(*w, "window", "end", cfg.window_end);
        if (detail::to_days(cfg.window_start) > detail::to_days(cfg.window_end))
            c.add("window", "start date is after end date");
    }

    cfg.lead_weeks = static_cast<int>(c.get_int(j, "", "lead_weeks", cfg.lead_weeks));
    if (cfg.lead_weeks < 0) c.add("", "'lead_weeks' must be nonnegative");
    const std::string lag = c.get_string(j, "", "lag_mode", "previous-week");
    if (lag == "previous-week") cfg.lag_current_week = false;
    else if (lag == "current-week") cfg.lag_current_week = true;
    else c.add("", "'lag_mode' must be previous-week or current-week");
    const std::string mode = c.get_string(j, "", "confounder_mode", "pooled-top8");
    try {
        cfg.confounder_mode = parse_confounder_mode(mode);
    } catch (const ConfigError& e) {
        c.add("", e.what());
    }
    cfg.population_threshold =
        c.get_number(j, "", "population_threshold", cfg.population_threshold);
    if (cfg.population_threshold < 0) c.add("", "'population_threshold' must be nonnegative");
    cfg.min_slice_n = c.get_int(j, "", "min_slice_n", cfg.min_slice_n);
    if (cfg.min_slice_n < 2) c.add("", "'min_slice_n' must be at least 2");
    cfg.folds = static_cast<int>(c.get_int(j, "", "folds", cfg.folds));
    if (cfg.folds < 2) c.add("", "'folds' must be at least 2");
    cfg.jobs = static_cast<int>(c.get_int(j, "", "jobs", cfg.jobs));
    if (cfg.jobs < 0) c.add("", "'jobs' must be nonnegative (0 = available parallelism)");

    if (j.contains("policies")) {
        if (!j["policies"].is_object()) {
            c.add("", "'policies' must map index names to policy objects");
        } else {
            for (auto it = j["policies"].begin(); it != j["policies"].end(); ++it)
                cfg.policies.emplace_back(it.key(),
                                          c.get_policy(it.value(), "policies." + it.key()));
        }
    }
    if (j.contains("candidate_policies")) {
        if (!j["candidate_policies"].is_object()) {
            c.add("", "'candidate_policies' must map index names to policy arrays");
        } else {
            for (auto it = j["candidate_policies"].begin(); it != j["candidate_policies"].end();
                 ++it) {
                const std::string where = "candidate_policies." + it.key();
                if (!it.value().is_array()) {
                    c.add(where, "must be an array of policies");
                    continue;
                }
                std::vector<ShiftPolicy> ladder;
                for (size_t i = 0; i < it.value().size(); ++i)
                    ladder.push_back(c.get_policy(it.value()[i],
                                                  where + "[" + std::to_string(i) + "]"));
                if (ladder.empty()) c.add(where, "must list at least one candidate");
                cfg.candidate_policies.emplace_back(it.key(), std::move(ladder));
            }
        }
    }
    if (cfg.has_input) {
        auto known_index = [&](const std::string& name) {
            return std::find(cfg.schema.index_columns.begin(), cfg.schema.index_columns.end(),
                             name) != cfg.schema.index_columns.end();
        };
        for (const auto& [name, policy] : cfg.policies)
            if (!known_index(name))
                c.add("policies", "'" + name + "' is not a declared index column");
        for (const auto& [name, ladder] : cfg.candidate_policies)
            if (!known_index(name))
                c.add("candidate_policies", "'" + name + "' is not a declared index column");
    }

    cfg.outcome_learners = c.get_learners(j, "", "outcome_learners", Task::Regression);
    cfg.ratio_learners = c.get_learners(j, "", "ratio_learners", Task::BinaryProbability);
    if (j.contains("truncate_density_ratio_at")) {
        const double t = c.get_number(j, "", "truncate_density_ratio_at", 0.0);
        if (!(t > 0)) c.add("", "'truncate_density_ratio_at' must be positive");
        else cfg.truncate_density_ratio_at = t;
    }

    if (const json* out = c.object(j, "", "output", false)) {
        c.check_keys(*out, "output", {"dir"});
        cfg.output_dir = c.get_string(*out, "output", "dir", cfg.output_dir);
    }

    if (const json* sim = c.object(j, "", "simulate", false)) {
        cfg.has_simulate = true;
        c.check_keys(*sim, "simulate",
                     {"cell", "dgp", "policy", "n", "replications", "n_mc"});
        cfg.sim_cell = c.get_string(*sim, "simulate", "cell", cfg.sim_cell);
        if (const json* dgp = c.object(*sim, "simulate", "dgp", false)) {
            c.check_keys(*dgp, "simulate.dgp",
                         {"p", "family", "exposure_coefs", "sigma_a", "intercept",
                          "exposure_coef", "w_coefs", "quadratic_coef", "interaction_coefs",
                          "sigma_y"});
            DgpSpec& d = cfg.dgp;
            d.p = static_cast<int>(c.get_int(*dgp, "simulate.dgp", "p", d.p));
            const std::string family = c.get_string(*dgp, "simulate.dgp", "family", "linear");
            if (family == "linear") d.family = DgpSpec::Family::Linear;
            else if (family == "quadratic") d.family = DgpSpec::Family::QuadraticInA;
            else if (family == "interaction") d.family = DgpSpec::Family::Interaction;
            else c.add("simulate.dgp", "unknown family '" + family + "'");
            d.exposure_coefs =
                c.get_number_list(*dgp, "simulate.dgp", "exposure_coefs", d.exposure_coefs);
            d.sigma_a = c.get_number(*dgp, "simulate.dgp", "sigma_a", d.sigma_a);
            d.intercept = c.get_number(*dgp, "simulate.dgp", "intercept", d.intercept);
            d.exposure_coef = c.get_number(*dgp, "simulate.dgp", "exposure_coef", d.exposure_coef);
            d.w_coefs = c.get_number_list(*dgp, "simulate.dgp", "w_coefs", d.w_coefs);
            d.quadratic_coef =
                c.get_number(*dgp, "simulate.dgp", "quadratic_coef", d.quadratic_coef);
            d.interaction_coefs = c.get_number_list(*dgp, "simulate.dgp", "interaction_coefs",
                                                    d.interaction_coefs);
            d.sigma_y = c.get_number(*dgp, "simulate.dgp", "sigma_y", d.sigma_y);
            if (d.family == DgpSpec::Family::Interaction && d.interaction_coefs.empty())
                d.interaction_coefs.assign(d.p, 0.0);
            try {
                d.validate();
            } catch (const ConfigError& e) {
                c.add("simulate.dgp", e.what());
            }
        }
        if (sim->contains("policy"))
            cfg.sim_policy = c.get_policy((*sim)["policy"], "simulate.policy");
        cfg.sim_n = c.get_int(*sim, "simulate", "n", cfg.sim_n);
        if (cfg.sim_n < 2) c.add("simulate", "'n' must be at least 2");
        cfg.sim_replications =
            static_cast<int>(c.get_int(*sim, "simulate", "replications", cfg.sim_replications));
        if (cfg.sim_replications < 2) c.add("simulate", "'replications' must be at least 2");
        cfg.sim_n_mc = c.get_int(*sim, "simulate", "n_mc", cfg.sim_n_mc);
        if (cfg.sim_n_mc < 2) c.add("simulate", "'n_mc' must be at least 2");
    }

    if (!c.issues.empty()) {
        std::string msg = "invalid config (" + std::to_string(c.issues.size()) + " problem" +
                          (c.issues.size() == 1 ? "" : "s") + "):";
        for (const auto& issue : c.issues) msg += "\n  - " + issue;
        throw ConfigError(msg);
    }
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    RunConfig cfg = parse_config(buf.str());
    if (cfg.has_input) {
        std::ifstream probe(cfg.input_path);
        if (!probe)
            throw ConfigError("input file does not exist or is unreadable: " + cfg.input_path);
    }
    return cfg;
}

}  // namespace mtp
