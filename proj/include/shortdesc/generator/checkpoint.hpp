#pragma once

// JSON checkpoints: configuration, vocabulary, type table and a tensor map
// keyed by canonical parameter names ("tokens", "article_encoder.layer0.attn.head0.wq",
// "fusion.wq", "context.type_proj.weight", "decoder.layer1.ff.up.bias", ...).
// Each tensor is {"rows", "cols", "data"} with row-major data.

#include <filesystem>
#include <memory>

#include <nlohmann/json.hpp>

#include "shortdesc/generator/train.hpp"

namespace shortdesc::generator {

nlohmann::json parameters_to_json(const nn::ParameterStore& store);
// Every parameter of store must be present with a matching shape; extra
// entries are an error too.
void parameters_from_json(nn::ParameterStore& store, const nlohmann::json& j);

nlohmann::json model_to_json(const DescriptionModel& model);
std::unique_ptr<DescriptionModel> model_from_json(const nlohmann::json& j);

void save_checkpoint(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_checkpoint(const std::filesystem::path& path);

}  // namespace shortdesc::generator
