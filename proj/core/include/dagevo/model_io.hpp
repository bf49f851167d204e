#pragma once

/// @file model_io.hpp
/// Model export: genome, training seed, fitness, I/O shapes and (optionally)
/// trained weights, as one JSON document.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dagevo/dag.hpp"
#include "dagevo/evolution.hpp"
#include "dagevo/network.hpp"
#include "dagevo/tensor.hpp"

namespace dagevo {

struct WeightEntry {
    std::size_t node_index = 0;  ///< matrix vertex; the last one is the output head
    std::string name;
    Tensor value;
};

struct ModelFile {
    Dag dag;
    std::uint64_t seed = 0;
    std::optional<double> fitness;
    nn::InputShape input_shape;
    nn::OutputShape output_shape;
    std::vector<WeightEntry> weights;  ///< empty when exported without a network

    Individual individual() const { return Individual{dag, seed, fitness, 0}; }
};

/// `network` may be null; its weights are written when given.
std::string export_model(const Individual& ind, nn::InputShape input, nn::OutputShape output,
                         const nn::Network* network = nullptr);

/// Throws SchemaError for any structural problem, including a genome that
/// fails validation or JSON that does not parse.
ModelFile import_model(const std::string& text);

/// Copies stored weights into `network`. Throws SchemaError unless names,
/// node indices and shapes match the network parameter for parameter.
void load_weights(nn::Network& network, const ModelFile& model);

void save_model(const std::string& path, const std::string& json_text);
ModelFile load_model(const std::string& path);

}  // namespace dagevo
