#pragma once

// JSON round-trips for the model, training and discretisation configs,
// shared by checkpoints and experiment manifests.

#include "radardepth/sid.hpp"
#include "radardepth/tinydepth.hpp"

#include <json.hpp>

#include <stdexcept>
#include <string>

namespace radardepth::detail {

inline nlohmann::json to_json(const ModelConfig& c) {
  return {{"input_channels", c.input_channels},
          {"row_channel", c.row_channel},
          {"base_width", c.base_width},
          {"max_width", c.max_width},
          {"stages", c.stages},
          {"head", c.head == HeadKind::kRegression ? "regression" : "ordinal"},
          {"bins", c.bins}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.input_channels = j.at("input_channels").get<int>();
  c.row_channel = j.at("row_channel").get<bool>();
  c.base_width = j.at("base_width").get<int>();
  c.max_width = j.at("max_width").get<int>();
  c.stages = j.at("stages").get<int>();
  const auto head = j.at("head").get<std::string>();
  if (head != "regression" && head != "ordinal") {
    throw std::runtime_error("unknown head kind '" + head + "'");
  }
  c.head = head == "regression" ? HeadKind::kRegression : HeadKind::kOrdinal;
  c.bins = j.at("bins").get<int>();
  c.validate();
  return c;
}

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"poly_power", c.poly_power},
          {"momentum", c.momentum},           {"weight_decay", c.weight_decay},
          {"batch_size", c.batch_size},       {"epochs", c.epochs},
          {"seed", c.seed},                   {"init_head_from_targets", c.init_head_from_targets}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.learning_rate = j.at("learning_rate").get<double>();
  c.poly_power = j.at("poly_power").get<double>();
  c.momentum = j.at("momentum").get<double>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.epochs = j.at("epochs").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.init_head_from_targets = j.at("init_head_from_targets").get<bool>();
  return c;
}

inline nlohmann::json to_json(const SidConfig& c) {
  return {{"alpha", c.alpha()}, {"beta", c.beta()}, {"bins", c.bins()}};
}

inline SidConfig sid_config_from_json(const nlohmann::json& j) {
  return SidConfig(j.at("alpha").get<double>(), j.at("beta").get<double>(), j.at("bins").get<int>());
}

}  // namespace radardepth::detail
