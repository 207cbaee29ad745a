#include "netlocal/checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace netlocal::localmodel {

using nlohmann::json;

json to_json(const SamplingController& ctrl) {
  return {{"bias", ctrl.bias},
          {"bias_max", ctrl.bias_max},
          {"loss_kind", std::string(to_string(ctrl.loss_kind))},
          {"n_outcomes", ctrl.n_outcomes},
          {"n_min", ctrl.n_min},
          {"n_max", ctrl.n_max},
          {"stagnation_window", ctrl.stagnation_window},
          {"stagnation_mark", ctrl.stagnation_mark}};
}

SamplingController controller_from_json(const json& j) {
  SamplingController c;
  c.bias = j.at("bias").get<double>();
  c.bias_max = j.at("bias_max").get<double>();
  c.loss_kind = parse_loss_kind(j.at("loss_kind").get<std::string>());
  c.n_outcomes = j.at("n_outcomes").get<std::size_t>();
  c.n_min = j.at("n_min").get<std::size_t>();
  c.n_max = j.at("n_max").get<std::size_t>();
  c.stagnation_window = j.at("stagnation_window").get<int>();
  c.stagnation_mark = j.value("stagnation_mark", 0);
  return c;
}

json to_json(const TrainConfig& t) {
  return {{"max_iters", t.max_iters},
          {"patience", t.patience},
          {"stage2_euclid_iters", t.stage2_euclid_iters},
          {"learning_rate", t.learning_rate},
          {"seed", t.seed},
          {"eval_samples", t.eval_samples},
          {"smoothing_window", t.smoothing_window},
          {"restarts", t.restarts}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig t;
  t.max_iters = j.at("max_iters").get<int>();
  t.patience = j.at("patience").get<int>();
  t.stage2_euclid_iters = j.at("stage2_euclid_iters").get<int>();
  t.learning_rate = j.at("learning_rate").get<double>();
  t.seed = j.at("seed").get<std::uint64_t>();
  t.eval_samples = j.at("eval_samples").get<std::size_t>();
  t.smoothing_window = j.at("smoothing_window").get<int>();
  t.restarts = j.at("restarts").get<int>();
  return t;
}

json to_json(const TrainResult& r) {
  return {{"final_kl", r.final_kl},
          {"final_euclid", r.final_euclid},
          {"best_during_training", r.best_during_training},
          {"best_loss_kind", std::string(to_string(r.best_loss_kind))},
          {"iterations_run", r.iterations_run},
          {"stage1_iterations", r.stage1_iterations},
          {"stage2_iterations", r.stage2_iterations},
          {"end_sample_count", r.end_sample_count},
          {"end_bias", r.end_bias},
          {"seed", r.seed},
          {"restart", r.restart}};
}

TrainResult train_result_from_json(const json& j) {
  TrainResult r;
  r.final_kl = j.at("final_kl").get<double>();
  r.final_euclid = j.at("final_euclid").get<double>();
  r.best_during_training = j.at("best_during_training").get<double>();
  r.best_loss_kind = parse_loss_kind(j.at("best_loss_kind").get<std::string>());
  r.iterations_run = j.at("iterations_run").get<int>();
  r.stage1_iterations = j.value("stage1_iterations", r.iterations_run);
  r.stage2_iterations = j.value("stage2_iterations", 0);
  r.end_sample_count = j.at("end_sample_count").get<std::size_t>();
  r.end_bias = j.value("end_bias", 0.0);
  r.seed = j.at("seed").get<std::uint64_t>();
  r.restart = j.value("restart", 0);
  return r;
}

json checkpoint_to_json(const Checkpoint& ckpt) {
  json blocks = json::array();
  for (const auto& block : ckpt.net.blocks()) {
    json layers = json::array();
    for (const auto& layer : block.layers()) {
      std::vector<double> w;
      w.reserve(static_cast<std::size_t>(layer.weight.size()));
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) w.push_back(layer.weight(r, c));
      layers.push_back({{"rows", layer.weight.rows()},
                        {"cols", layer.weight.cols()},
                        {"weight", w},
                        {"bias", std::vector<double>(layer.bias.data(), layer.bias.data() + layer.bias.size())}});
    }
    blocks.push_back({{"layers", layers}});
  }
  json j = {{"format", kCheckpointFormat},
            {"version", kCheckpointVersion},
            {"config", json::parse(config_to_json(ckpt.net.config()))},
            {"width", ckpt.net.width()},
            {"depth", ckpt.net.depth()},
            {"seed", ckpt.train_config.seed},
            {"blocks", blocks},
            {"controller", to_json(ckpt.controller)},
            {"train_config", to_json(ckpt.train_config)}};
  if (ckpt.result) j["result"] = to_json(*ckpt.result);
  return j;
}

Checkpoint checkpoint_from_json(const json& j) {
  if (j.value("format", std::string()) != kCheckpointFormat) throw std::invalid_argument("not a netlocal checkpoint");
  const int version = j.at("version").get<int>();
  if (version > kCheckpointVersion)
    throw std::invalid_argument("checkpoint version " + std::to_string(version) + " is newer than supported");

  auto config = parse_config(j.at("config").dump());
  const int width = j.at("width").get<int>();
  const int depth = j.at("depth").get<int>();
  std::vector<ResponseBlock> blocks;
  const auto& jblocks = j.at("blocks");
  if (jblocks.size() != config.n_parties()) throw std::invalid_argument("checkpoint has the wrong number of blocks");
  for (std::size_t i = 0; i < config.n_parties(); ++i) {
    const auto& party = config.parties()[i];
    ResponseBlock block(static_cast<int>(party.sources.size()), width, depth, party.n_outcomes);
    const auto& jlayers = jblocks[i].at("layers");
    if (jlayers.size() != block.layers().size()) throw std::invalid_argument("checkpoint block has the wrong depth");
    for (std::size_t l = 0; l < jlayers.size(); ++l) {
      auto& layer = block.layers()[l];
      const auto w = jlayers[l].at("weight").get<std::vector<double>>();
      const auto b = jlayers[l].at("bias").get<std::vector<double>>();
      if (jlayers[l].at("rows").get<Eigen::Index>() != layer.weight.rows() ||
          jlayers[l].at("cols").get<Eigen::Index>() != layer.weight.cols() ||
          static_cast<Eigen::Index>(w.size()) != layer.weight.size() ||
          static_cast<Eigen::Index>(b.size()) != layer.bias.size())
        throw std::invalid_argument("checkpoint layer has the wrong shape");
      std::size_t k = 0;
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = w[k++];
      for (std::size_t r = 0; r < b.size(); ++r) layer.bias[static_cast<Eigen::Index>(r)] = b[r];
    }
    blocks.push_back(std::move(block));
  }

  Checkpoint ckpt{LocalModelNet(std::move(config), std::move(blocks)), controller_from_json(j.at("controller")),
                  train_config_from_json(j.at("train_config")), std::nullopt};
  if (j.contains("result")) ckpt.result = train_result_from_json(j["result"]);
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << checkpoint_to_json(ckpt).dump(1) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path.string());
  return checkpoint_from_json(json::parse(in));
}

}  // namespace netlocal::localmodel
