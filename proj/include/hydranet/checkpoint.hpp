#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "hydranet/multigran.hpp"

namespace hydranet {

/// Plain-text checkpoint: a header with the model configuration, then one
/// `param <name> <rank> <extents...>` line and one line of row-major values
/// per parameter. Values use shortest round-trip formatting, so a reload is
/// bit-exact.
inline void save_checkpoint(std::ostream& os, const HydraNetModel& model, const TrainConfig& cfg) {
    os << "hydranet-checkpoint v1\n";
    os << "config-begin\n" << cfg.serialize() << "config-end\n";
    for (const auto& [name, t] : model.params.items()) {
        os << "param " << name << " " << t.rank();
        for (std::size_t i = 0; i < t.rank(); ++i) os << " " << t.extent(i);
        os << "\n";
        const auto& v = t.values();
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) os << ' ';
            os << format_double(v[i]);
        }
        os << "\n";
    }
}

inline void save_checkpoint_file(const std::string& path, const HydraNetModel& model,
                                 const TrainConfig& cfg) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write checkpoint '" + path + "'");
    save_checkpoint(out, model, cfg);
}

struct LoadedModel {
    HydraNetModel model;
    TrainConfig cfg;
};

/// Rebuilds a model from a checkpoint. Every parameter must be present with
/// the shape implied by the stored configuration.
inline LoadedModel load_checkpoint(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != "hydranet-checkpoint v1") {
        throw config_error("not a hydranet checkpoint (bad magic line)");
    }
    if (!std::getline(is, line) || line != "config-begin") {
        throw config_error("checkpoint is missing its config block");
    }
    std::string cfg_text;
    while (std::getline(is, line) && line != "config-end") cfg_text += line + "\n";
    TrainConfig cfg = TrainConfig::parse(cfg_text);

    LoadedModel out{HydraNetModel::init(cfg.model(), cfg.seed), cfg};
    std::size_t loaded = 0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream head(line);
        std::string tag, name;
        std::size_t rank = 0;
        head >> tag >> name >> rank;
        if (tag != "param" || head.fail()) throw config_error("bad checkpoint line '" + line + "'");
        Shape shape(rank);
        for (std::size_t i = 0; i < rank; ++i) head >> shape[i];
        if (head.fail()) throw config_error("bad shape on checkpoint parameter '" + name + "'");
        Tensor* param = out.model.params.find(name);
        if (!param) throw config_error("checkpoint has unknown parameter '" + name + "'");
        if (param->shape() != shape) {
            throw config_error("checkpoint parameter '" + name + "' has shape " + shape_str(shape) +
                               ", expected " + shape_str(param->shape()));
        }
        if (!std::getline(is, line)) throw config_error("missing values for parameter '" + name + "'");
        std::istringstream vals(line);
        auto& storage = param->mutable_values();
        for (std::size_t i = 0; i < storage.size(); ++i) {
            std::string tok;
            if (!(vals >> tok)) {
                throw config_error("parameter '" + name + "' has too few values");
            }
            storage[i] = parse_double(tok, name);
        }
        std::string extra;
        if (vals >> extra) throw config_error("parameter '" + name + "' has too many values");
        ++loaded;
    }
    if (loaded != out.model.params.items().size()) {
        throw config_error("checkpoint is missing parameters (" + std::to_string(loaded) + " of " +
                           std::to_string(out.model.params.items().size()) + ")");
    }
    return out;
}

inline LoadedModel load_checkpoint_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open checkpoint '" + path + "'");
    return load_checkpoint(in);
}

}  // namespace hydranet
