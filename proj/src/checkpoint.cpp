#include "uavsec/checkpoint.hpp"

#include "uavsec/errors.hpp"

#include <json.hpp>

#include <fstream>

namespace uavsec::io {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kFormat = "uavsec-checkpoint";

json params_to_json(const ad::ParameterSet& params, const std::string& prefix = "") {
    json arr = json::array();
    for (const auto& p : params.items()) {
        arr.push_back({{"name", prefix + p.name}, {"shape", {p.value.rows(), p.value.cols()}}, {"values", p.value.flat()}});
    }
    return arr;
}

// Parameters whose name starts with prefix, in file order, prefix stripped.
ad::ParameterSet params_from_json(const json& arr, const std::string& prefix = "") {
    ad::ParameterSet out;
    for (const auto& item : arr) {
        const std::string name = item.at("name").get<std::string>();
        if (name.rfind(prefix, 0) != 0) continue;
        const auto shape = item.at("shape").get<std::vector<std::size_t>>();
        if (shape.size() != 2) throw CheckpointError("parameter " + name + " has a bad shape");
        const auto values = item.at("values").get<std::vector<double>>();
        try {
            out.add(name.substr(prefix.size()), ad::Tensor::from_flat(shape[0], shape[1], values));
        } catch (const std::exception& e) {
            throw CheckpointError("parameter " + name + ": " + e.what());
        }
    }
    return out;
}

void write_document(const json& doc, const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
    out << doc.dump(1) << "\n";
    if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
}

json read_document(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw CheckpointError("checkpoint not found: " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw CheckpointError("corrupt checkpoint " + path.string() + ": " + e.what());
    }
    if (!doc.is_object() || doc.value("format", "") != kFormat) {
        throw CheckpointError("not a checkpoint file: " + path.string());
    }
    if (!doc.contains("version") || !doc["version"].is_number_integer()) {
        throw CheckpointError("checkpoint has no version: " + path.string());
    }
    if (doc["version"].get<int>() != kCheckpointVersion) {
        throw CheckpointError("checkpoint version " + std::to_string(doc["version"].get<int>()) + " is not supported (expected " +
                              std::to_string(kCheckpointVersion) + ")");
    }
    return doc;
}

json read_typed(const fs::path& path, const std::string& type) {
    json doc = read_document(path);
    const std::string found = doc.value("type", "");
    if (found != type) {
        throw CheckpointError("checkpoint " + path.string() + " has type tag '" + found + "', expected '" + type + "'");
    }
    return doc;
}

json header(const std::string& type) { return {{"format", kFormat}, {"version", kCheckpointVersion}, {"type", type}}; }

template <typename F>
auto guarded(const fs::path& path, F&& f) {
    try {
        return f();
    } catch (const json::exception& e) {
        throw CheckpointError("corrupt checkpoint " + path.string() + ": " + e.what());
    }
}

}  // namespace

void save_gnn(const gnn::GnnModel& model, const fs::path& path) {
    json doc = header("gnn");
    doc["metadata"] = {{"format_version", kCheckpointVersion},
                       {"antennas", model.arch.antennas},
                       {"layers", model.arch.layers},
                       {"message_width", model.arch.message_width},
                       {"aggregation_width", model.arch.aggregation_width},
                       {"hidden_width", model.arch.hidden_width},
                       {"feature_scale", model.feature_scale},
                       {"seed", model.seed},
                       {"config_hash", model.config_hash}};
    doc["parameters"] = params_to_json(model.params);
    write_document(doc, path);
}

gnn::GnnModel load_gnn(const fs::path& path) {
    const json doc = read_typed(path, "gnn");
    return guarded(path, [&] {
        const json& m = doc.at("metadata");
        gnn::GnnModel model;
        model.arch.antennas = m.at("antennas").get<std::size_t>();
        model.arch.layers = m.at("layers").get<std::size_t>();
        model.arch.message_width = m.at("message_width").get<std::size_t>();
        model.arch.aggregation_width = m.at("aggregation_width").get<std::size_t>();
        model.arch.hidden_width = m.at("hidden_width").get<std::size_t>();
        model.feature_scale = m.at("feature_scale").get<double>();
        model.seed = m.at("seed").get<std::uint64_t>();
        model.config_hash = m.value("config_hash", "");
        model.params = params_from_json(doc.at("parameters"));
        gnn::GnnModel::create(model.arch, model.feature_scale, 0).params.check_compatible(model.params);
        return model;
    });
}

void save_mlp(const baselines::MlpModel& model, const fs::path& path) {
    json doc = header("mlp");
    doc["metadata"] = {{"format_version", kCheckpointVersion},
                       {"users", model.users},
                       {"antennas", model.antennas},
                       {"hidden_width", model.hidden_width},
                       {"feature_scale", model.feature_scale},
                       {"seed", model.seed},
                       {"config_hash", model.config_hash}};
    doc["parameters"] = params_to_json(model.params);
    write_document(doc, path);
}

baselines::MlpModel load_mlp(const fs::path& path) {
    const json doc = read_typed(path, "mlp");
    return guarded(path, [&] {
        const json& m = doc.at("metadata");
        baselines::MlpModel model;
        model.users = m.at("users").get<std::size_t>();
        model.antennas = m.at("antennas").get<std::size_t>();
        model.hidden_width = m.at("hidden_width").get<std::size_t>();
        model.feature_scale = m.at("feature_scale").get<double>();
        model.seed = m.at("seed").get<std::uint64_t>();
        model.config_hash = m.value("config_hash", "");
        model.params = params_from_json(doc.at("parameters"));
        return model;
    });
}

void save_sac(const sac::SacModel& model, const fs::path& path) {
    json doc = header("sac");
    doc["metadata"] = {{"format_version", kCheckpointVersion},
                       {"state_dim", model.state_dim},
                       {"hidden_width", model.hidden_width},
                       {"log_alpha", model.log_alpha},
                       {"discount", model.discount},
                       {"tau", model.tau},
                       {"log_std_min", model.log_std_min},
                       {"log_std_max", model.log_std_max}};
    json params = json::array();
    for (const auto& [prefix, set] : {std::pair<std::string, const ad::ParameterSet*>{"actor/", &model.actor},
                                      {"critic1/", &model.critic1},
                                      {"critic2/", &model.critic2},
                                      {"target1/", &model.target1},
                                      {"target2/", &model.target2}}) {
        for (auto& item : params_to_json(*set, prefix)) params.push_back(std::move(item));
    }
    doc["parameters"] = std::move(params);
    write_document(doc, path);
}

sac::SacModel load_sac(const fs::path& path) {
    const json doc = read_typed(path, "sac");
    return guarded(path, [&] {
        const json& m = doc.at("metadata");
        sac::SacModel model;
        model.state_dim = m.at("state_dim").get<std::size_t>();
        model.hidden_width = m.at("hidden_width").get<std::size_t>();
        model.log_alpha = m.at("log_alpha").get<double>();
        model.discount = m.at("discount").get<double>();
        model.tau = m.at("tau").get<double>();
        model.log_std_min = m.at("log_std_min").get<double>();
        model.log_std_max = m.at("log_std_max").get<double>();
        const json& p = doc.at("parameters");
        model.actor = params_from_json(p, "actor/");
        model.critic1 = params_from_json(p, "critic1/");
        model.critic2 = params_from_json(p, "critic2/");
        model.target1 = params_from_json(p, "target1/");
        model.target2 = params_from_json(p, "target2/");
        model.target1.check_compatible(model.critic1);
        model.target2.check_compatible(model.critic2);
        return model;
    });
}

std::string checkpoint_type(const fs::path& path) { return read_document(path).value("type", ""); }

}  // namespace uavsec::io
