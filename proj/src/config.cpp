#include "uavsec/config.hpp"

#include "uavsec/errors.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <variant>

namespace uavsec {

using nlohmann::json;

namespace {

static_assert(std::is_same_v<std::size_t, std::uint64_t>);

using FieldPtr = std::variant<double*, std::size_t*, bool*, std::string*, std::vector<double>*,
                              std::vector<std::size_t>*>;

struct Field {
    const char* key;
    FieldPtr ptr;
};

std::vector<Field> scenario_fields(channel::ScenarioConfig& s) {
    return {{"area_side", &s.area_side},
            {"users", &s.users},
            {"antennas", &s.antennas},
            {"altitude", &s.altitude},
            {"rician_factor_db", &s.rician_factor_db},
            {"pathloss_intercept_db", &s.pathloss_intercept_db},
            {"pathloss_slope_db", &s.pathloss_slope_db},
            {"eve_distance", &s.eve_distance},
            {"power_budget", &s.power_budget},
            {"noise_power", &s.noise_power},
            {"seed", &s.seed}};
}

std::vector<Field> gnn_fields(RunConfig& c) {
    return {{"learning_rate", &c.gnn.learning_rate},
            {"epochs", &c.gnn.epochs},
            {"batch_size", &c.gnn.batch_size},
            {"steps_per_epoch", &c.gnn.steps_per_epoch},
            {"momentum", &c.gnn.momentum},
            {"max_grad_norm", &c.gnn.max_grad_norm},
            {"layers", &c.gnn_layers}};
}

std::vector<Field> sac_fields(sac::SacConfig& s) {
    return {{"learning_rate", &s.learning_rate},
            {"episodes", &s.episodes},
            {"batch_size", &s.batch_size},
            {"buffer_capacity", &s.buffer_capacity},
            {"discount", &s.discount},
            {"tau", &s.tau},
            {"initial_alpha", &s.initial_alpha},
            {"target_entropy", &s.target_entropy},
            {"warmup", &s.warmup},
            {"updates_per_step", &s.updates_per_step},
            {"hidden_width", &s.hidden_width},
            {"episode_length", &s.episode_length},
            {"step_scale", &s.step_scale},
            {"fading_draws", &s.fading_draws},
            {"optimizer", &s.optimizer},
            {"momentum", &s.momentum},
            {"log_std_min", &s.log_std_min},
            {"log_std_max", &s.log_std_max},
            {"reward_scale", &s.reward_scale},
            {"resample_topology", &s.resample_topology},
            {"freeze_fading", &s.freeze_fading}};
}

std::vector<Field> eval_fields(EvalConfig& e) {
    return {{"scenarios", &e.scenarios},
            {"user_counts", &e.user_counts},
            {"power_factors", &e.power_factors},
            {"noise_factors", &e.noise_factors},
            {"retrain_mlp", &e.retrain_mlp},
            {"cdf_users", &e.cdf_users},
            {"grid_resolution", &e.grid_resolution},
            {"topologies", &e.topologies},
            {"repeats", &e.repeats},
            {"bench_users", &e.bench_users}};
}

std::vector<Field> top_fields(RunConfig& c) {
    return {{"experiment", &c.experiment}, {"out_dir", &c.out_dir}, {"seed", &c.seed}};
}

void read_value(const json& v, const std::string& key, FieldPtr ptr) {
    auto bad = [&](const char* want) { throw ConfigError("config key '" + key + "' must be " + want); };
    std::visit(
        [&](auto* p) {
            using T = std::remove_pointer_t<decltype(p)>;
            if constexpr (std::is_same_v<T, double>) {
                if (!v.is_number()) bad("a number");
                *p = v.get<double>();
            } else if constexpr (std::is_same_v<T, std::size_t>) {
                if (!v.is_number_unsigned()) bad("a nonnegative integer");
                *p = v.get<T>();
            } else if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) bad("true or false");
                *p = v.get<bool>();
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) bad("a string");
                *p = v.get<std::string>();
            } else if constexpr (std::is_same_v<T, std::vector<double>>) {
                if (!v.is_array()) bad("an array of numbers");
                p->clear();
                for (const auto& x : v) {
                    if (!x.is_number()) bad("an array of numbers");
                    p->push_back(x.get<double>());
                }
            } else {
                if (!v.is_array()) bad("an array of nonnegative integers");
                p->clear();
                for (const auto& x : v) {
                    if (!x.is_number_unsigned()) bad("an array of nonnegative integers");
                    p->push_back(x.get<std::size_t>());
                }
            }
        },
        ptr);
}

json write_value(FieldPtr ptr) {
    return std::visit([](auto* p) { return json(*p); }, ptr);
}

void read_section(const json& obj, const std::string& prefix, const std::vector<Field>& fields,
                  const std::vector<std::string>& subsections = {}) {
    if (!obj.is_object()) throw ConfigError("config section '" + prefix + "' must be an object");
    for (const auto& [key, value] : obj.items()) {
        const std::string full = prefix.empty() ? key : prefix + "." + key;
        if (std::find(subsections.begin(), subsections.end(), key) != subsections.end()) continue;
        auto it = std::find_if(fields.begin(), fields.end(), [&](const Field& f) { return key == f.key; });
        if (it == fields.end()) throw ConfigError("unknown config key '" + full + "'");
        read_value(value, full, it->ptr);
    }
}

json write_section(const std::vector<Field>& fields) {
    json out = json::object();
    for (const auto& f : fields) out[f.key] = write_value(f.ptr);
    return out;
}

}  // namespace

void EvalConfig::validate() const {
    auto require = [](bool ok, const char* key) {
        if (!ok) throw ConfigError(std::string("invalid eval value: ") + key);
    };
    require(scenarios >= 1, "scenarios");
    require(!user_counts.empty(), "user_counts");
    for (auto k : user_counts) require(k >= 1, "user_counts");
    for (double f : power_factors) require(f > 0.0, "power_factors");
    for (double f : noise_factors) require(f > 0.0, "noise_factors");
    for (auto k : cdf_users) require(k >= 1, "cdf_users");
    require(grid_resolution >= 1, "grid_resolution");
    require(topologies >= 1, "topologies");
    require(repeats >= 1, "repeats");
    for (auto k : bench_users) require(k >= 1, "bench_users");
}

void RunConfig::validate() const {
    scenario.validate();
    gnn.validate();
    sac.validate();
    eval.validate();
    if (gnn_layers < 1) throw ConfigError("invalid gnn value: layers");
    if (out_dir.empty()) throw ConfigError("invalid value: out_dir");
}

RunConfig default_run_config() { return RunConfig{}; }

RunConfig full_run_config() {
    RunConfig c;
    c.sac.episodes = 500;
    return c;
}

RunConfig run_config_from_json_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    RunConfig c;
    read_section(doc, "", top_fields(c), {"scenario", "gnn", "sac", "eval"});
    if (doc.contains("scenario")) read_section(doc["scenario"], "scenario", scenario_fields(c.scenario));
    if (doc.contains("gnn")) read_section(doc["gnn"], "gnn", gnn_fields(c));
    if (doc.contains("sac")) read_section(doc["sac"], "sac", sac_fields(c.sac));
    if (doc.contains("eval")) read_section(doc["eval"], "eval", eval_fields(c.eval));
    c.validate();
    return c;
}

std::string run_config_to_json_text(const RunConfig& cfg) {
    RunConfig c = cfg;
    json doc = write_section(top_fields(c));
    doc["scenario"] = write_section(scenario_fields(c.scenario));
    doc["gnn"] = write_section(gnn_fields(c));
    doc["sac"] = write_section(sac_fields(c.sac));
    doc["eval"] = write_section(eval_fields(c.eval));
    return doc.dump(2);
}

RunConfig load_run_config(const std::string& path_or_name) {
    if (path_or_name == "default") return default_run_config();
    if (path_or_name == "full") return full_run_config();
    std::ifstream in(path_or_name);
    if (!in) throw ConfigError("cannot open config file " + path_or_name);
    std::stringstream ss;
    ss << in.rdbuf();
    return run_config_from_json_text(ss.str());
}

std::string config_hash(const RunConfig& cfg) {
    // the output directory does not change results
    RunConfig c = cfg;
    c.out_dir.clear();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : run_config_to_json_text(c)) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace uavsec
