#include "dagevo/model_io.hpp"

#include <fstream>
#include <sstream>

#include "dagevo/errors.hpp"
#include "json_codec.hpp"

namespace dagevo {

namespace {

constexpr int kModelFormat = 1;

using nlohmann::json;

const json& require(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) {
        throw SchemaError(std::string("model: missing field '") + key + "'");
    }
    return j.at(key);
}

std::size_t require_size(const json& j, const char* key) {
    const json& v = require(j, key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
        throw SchemaError(std::string("model: field '") + key + "' must be a nonnegative integer");
    }
    return v.get<std::size_t>();
}

}  // namespace

std::string export_model(const Individual& ind, nn::InputShape input, nn::OutputShape output,
                         const nn::Network* network) {
    json j = detail::dag_to_json(ind.dag);
    j["model_format"] = kModelFormat;
    j["seed"] = ind.seed;
    j["fitness"] = ind.fitness ? json(*ind.fitness) : json(nullptr);
    j["input_shape"] = {{"time", input.time}, {"channels", input.channels}};
    j["output_shape"] = {{"horizon", output.horizon}, {"series", output.series}};
    json weights = json::array();
    if (network != nullptr) {
        for (const auto& p : network->parameters()) {
            const Tensor& v = p.var.value();
            weights.push_back({{"node_index", p.vertex}, {"name", p.name}, {"shape", v.shape()}, {"values", v.values()}});
        }
    }
    j["weights"] = std::move(weights);
    return j.dump(2) + "\n";
}

ModelFile import_model(const std::string& text) {
    json j;
    try {
        j = detail::parse_json_text(text);
    } catch (const ParseError& e) {
        throw SchemaError(std::string("model: ") + e.what());
    }
    if (!j.is_object()) {
        throw SchemaError("model: top level must be an object");
    }
    ModelFile model;
    try {
        model.dag = detail::dag_from_json(j);
    } catch (const ParseError& e) {
        throw SchemaError(std::string("model genome: ") + e.what());
    }
    try {
        const json& fmt = require(j, "model_format");
        if (!fmt.is_number_integer() || fmt.get<int>() != kModelFormat) {
            throw SchemaError("model: unsupported model_format");
        }
        model.seed = require_size(j, "seed");
        const json& fit = require(j, "fitness");
        if (fit.is_number()) {
            model.fitness = fit.get<double>();
        } else if (!fit.is_null()) {
            throw SchemaError("model: fitness must be a number or null");
        }
        const json& in = require(j, "input_shape");
        model.input_shape = {require_size(in, "time"), require_size(in, "channels")};
        const json& out = require(j, "output_shape");
        model.output_shape = {require_size(out, "horizon"), require_size(out, "series")};
        if (model.input_shape.time == 0 || model.input_shape.channels == 0 || model.output_shape.horizon == 0 ||
            model.output_shape.series == 0) {
            throw SchemaError("model: shapes must be positive");
        }
        const json& weights = require(j, "weights");
        if (!weights.is_array()) {
            throw SchemaError("model: weights must be an array");
        }
        for (const auto& w : weights) {
            WeightEntry entry;
            entry.node_index = require_size(w, "node_index");
            const json& name = require(w, "name");
            if (!name.is_string()) {
                throw SchemaError("model: weight name must be a string");
            }
            entry.name = name.get<std::string>();
            const json& shape = require(w, "shape");
            const json& values = require(w, "values");
            if (!shape.is_array() || !values.is_array()) {
                throw SchemaError("model: weight shape and values must be arrays");
            }
            Shape s;
            for (const auto& d : shape) {
                if (!d.is_number_unsigned()) {
                    throw SchemaError("model: weight shape entries must be nonnegative integers");
                }
                s.push_back(d.get<std::size_t>());
            }
            std::vector<double> v;
            v.reserve(values.size());
            for (const auto& x : values) {
                if (!x.is_number()) {
                    throw SchemaError("model: weight '" + entry.name + "' holds a non-numeric value");
                }
                v.push_back(x.get<double>());
            }
            if (v.size() != element_count(s)) {
                throw SchemaError("model: weight '" + entry.name + "' of node " + std::to_string(entry.node_index) +
                                  " has " + std::to_string(v.size()) + " values for shape " + shape_string(s));
            }
            entry.value = Tensor(std::move(s), std::move(v));
            model.weights.push_back(std::move(entry));
        }
    } catch (const json::exception& e) {
        throw SchemaError(std::string("model: ") + e.what());
    }
    return model;
}

void load_weights(nn::Network& network, const ModelFile& model) {
    auto& params = network.parameters();
    if (model.weights.size() != params.size()) {
        throw SchemaError("model: " + std::to_string(model.weights.size()) + " weight tensors stored, network has " +
                          std::to_string(params.size()));
    }
    for (std::size_t k = 0; k < params.size(); ++k) {
        const WeightEntry& w = model.weights[k];
        const nn::Parameter& p = params[k];
        if (w.node_index != p.vertex || w.name != p.name) {
            throw SchemaError("model: weight " + std::to_string(k) + " is (" + std::to_string(w.node_index) + ", " +
                              w.name + "), expected (" + std::to_string(p.vertex) + ", " + p.name + ")");
        }
        if (w.value.shape() != p.var.value().shape()) {
            throw SchemaError("model: weight '" + w.name + "' of node " + std::to_string(w.node_index) +
                              " has shape " + shape_string(w.value.shape()) + ", expected " +
                              shape_string(p.var.value().shape()));
        }
    }
    for (std::size_t k = 0; k < params.size(); ++k) {
        params[k].var.mutable_value() = model.weights[k].value;
    }
}

void save_model(const std::string& path, const std::string& json_text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError(path, "cannot open file for writing");
    }
    out << json_text;
    if (!out) {
        throw IoError(path, "write failed");
    }
}

ModelFile load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError(path, "cannot open file");
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return import_model(buffer.str());
}

}  // namespace dagevo
