#include "rvt/config_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace rvt {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& where,
                const std::set<std::string>& allowed) {
  if (!j.is_object())
    throw ConfigError("config: " + where + " must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key))
      throw ConfigError("config: unknown key '" + key + "' in " + where);
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config: bad value for '" + std::string(key) +
                      "': " + e.what());
  }
}

std::array<int, 4> get_int4(const json& j, const char* key) {
  if (!j.contains(key)) return {};
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 4)
    throw ConfigError("config: '" + std::string(key) +
                      "' must be an array of four integers");
  std::array<int, 4> out{};
  for (std::size_t i = 0; i < 4; ++i) out[i] = a[i].get<int>();
  return out;
}

std::string embed_kind_name(EmbedKind k) {
  return k == EmbedKind::linear ? "linear" : "conv_stem";
}
EmbedKind embed_kind_from(const std::string& s) {
  if (s == "linear") return EmbedKind::linear;
  if (s == "conv_stem") return EmbedKind::conv_stem;
  throw ConfigError("config: unknown embed_kind '" + s + "'");
}

std::string ffn_kind_name(FfnKind k) {
  return k == FfnKind::plain ? "plain" : "conv";
}
FfnKind ffn_kind_from(const std::string& s) {
  if (s == "plain") return FfnKind::plain;
  if (s == "conv") return FfnKind::conv;
  throw ConfigError("config: unknown ffn_kind '" + s + "'");
}

std::string pos_kind_name(PosKind k) {
  switch (k) {
    case PosKind::none: return "none";
    case PosKind::learned_absolute: return "learned_absolute";
    case PosKind::sincos_absolute: return "sincos_absolute";
    case PosKind::paas: return "paas";
    case PosKind::learned_relative: return "learned_relative";
    case PosKind::input_conditioned: return "input_conditioned";
  }
  throw ConfigError("config: unknown pos_kind");
}
PosKind pos_kind_from(const std::string& s) {
  for (PosKind k : {PosKind::none, PosKind::learned_absolute,
                    PosKind::sincos_absolute, PosKind::paas,
                    PosKind::learned_relative, PosKind::input_conditioned})
    if (pos_kind_name(k) == s) return k;
  throw ConfigError("config: unknown pos_kind '" + s + "'");
}

std::string head_kind_name(HeadKind k) {
  return k == HeadKind::cls_token ? "cls_token" : "gap";
}
HeadKind head_kind_from(const std::string& s) {
  if (s == "cls_token") return HeadKind::cls_token;
  if (s == "gap") return HeadKind::gap;
  throw ConfigError("config: unknown head_kind '" + s + "'");
}

json model_to_json(const ModelConfig& cfg) {
  json stage{{"blocks", cfg.stage.blocks},
             {"channels", cfg.stage.channels},
             {"heads", cfg.stage.heads},
             {"head_dim", cfg.stage.head_dim}};
  return json{{"stage", stage},
              {"embed_kind", embed_kind_name(cfg.embed_kind)},
              {"ffn_kind", ffn_kind_name(cfg.ffn_kind)},
              {"pos_kind", pos_kind_name(cfg.pos_kind)},
              {"head_kind", head_kind_name(cfg.head_kind)},
              {"ffn_expansion", cfg.ffn_expansion},
              {"num_classes", cfg.num_classes},
              {"input_res", cfg.input_res},
              {"patch", cfg.patch},
              {"attn_window", cfg.attn_window}};
}

ModelConfig model_from_json(const json& j) {
  check_keys(j, "model",
             {"stage", "embed_kind", "ffn_kind", "pos_kind", "head_kind",
              "ffn_expansion", "num_classes", "input_res", "patch",
              "attn_window"});
  ModelConfig cfg;
  if (j.contains("stage")) {
    check_keys(j.at("stage"), "model.stage",
               {"blocks", "channels", "heads", "head_dim"});
    cfg.stage.blocks = get_int4(j.at("stage"), "blocks");
    cfg.stage.channels = get_int4(j.at("stage"), "channels");
    cfg.stage.heads = get_int4(j.at("stage"), "heads");
    cfg.stage.head_dim = get_int4(j.at("stage"), "head_dim");
  }
  cfg.embed_kind =
      embed_kind_from(get_or<std::string>(j, "embed_kind", "linear"));
  cfg.ffn_kind = ffn_kind_from(get_or<std::string>(j, "ffn_kind", "plain"));
  cfg.pos_kind = pos_kind_from(get_or<std::string>(j, "pos_kind", "none"));
  cfg.head_kind = head_kind_from(get_or<std::string>(j, "head_kind", "gap"));
  cfg.ffn_expansion = get_or(j, "ffn_expansion", 4);
  cfg.num_classes = get_or(j, "num_classes", 0);
  cfg.input_res = get_or(j, "input_res", 224);
  cfg.patch = get_or(j, "patch", 0);
  cfg.attn_window = get_or(j, "attn_window", 0);
  return cfg;
}

json aug_to_json(const AugConfig& cfg) {
  return json{{"p", cfg.p},
              {"crop_scale", cfg.crop_scale},
              {"noise_mean", cfg.noise_mean},
              {"noise_std", cfg.noise_std},
              {"patch", cfg.patch}};
}

AugConfig aug_from_json(const json& j) {
  check_keys(j, "aug", {"p", "crop_scale", "noise_mean", "noise_std", "patch"});
  AugConfig cfg;
  cfg.p = get_or(j, "p", cfg.p);
  if (j.contains("crop_scale")) {
    const auto& a = j.at("crop_scale");
    if (!a.is_array() || a.size() != 2)
      throw ConfigError("config: aug.crop_scale must be [lo, hi]");
    cfg.crop_scale = {a[0].get<double>(), a[1].get<double>()};
  }
  cfg.noise_mean = get_or(j, "noise_mean", cfg.noise_mean);
  cfg.noise_std = get_or(j, "noise_std", cfg.noise_std);
  cfg.patch = get_or(j, "patch", cfg.patch);
  return cfg;
}

json attack_to_json(const AttackConfig& cfg) {
  return json{{"epsilon", cfg.epsilon},
              {"steps", cfg.steps},
              {"step_size", cfg.step_size},
              {"random_start", cfg.random_start}};
}

AttackConfig attack_from_json(const json& j) {
  check_keys(j, "attack", {"epsilon", "steps", "step_size", "random_start"});
  AttackConfig cfg;
  cfg.epsilon = get_or(j, "epsilon", cfg.epsilon);
  cfg.steps = get_or(j, "steps", cfg.steps);
  cfg.step_size = get_or(j, "step_size", cfg.step_size);
  cfg.random_start = get_or(j, "random_start", cfg.random_start);
  return cfg;
}

json optim_to_json(const OptimConfig& cfg) {
  return json{{"kind", cfg.kind},
              {"lr", cfg.lr},
              {"weight_decay", cfg.weight_decay},
              {"epochs", cfg.epochs},
              {"batch", cfg.batch}};
}

OptimConfig optim_from_json(const json& j) {
  check_keys(j, "optimizer", {"kind", "lr", "weight_decay", "epochs", "batch"});
  OptimConfig cfg;
  cfg.kind = get_or<std::string>(j, "kind", cfg.kind);
  cfg.lr = get_or(j, "lr", cfg.lr);
  cfg.weight_decay = get_or(j, "weight_decay", cfg.weight_decay);
  cfg.epochs = get_or(j, "epochs", cfg.epochs);
  cfg.batch = get_or(j, "batch", cfg.batch);
  return cfg;
}

json parse_text(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError("config: cannot parse " + what + ": " + e.what());
  }
}

}  // namespace

std::string model_config_to_json(const ModelConfig& cfg) {
  return model_to_json(cfg).dump(2);
}

ModelConfig model_config_from_json_text(const std::string& text) {
  return model_from_json(parse_text(text, "model config"));
}

std::string run_config_to_json(const RunConfig& cfg) {
  json j{{"model", model_to_json(cfg.model)},
         {"aug", aug_to_json(cfg.aug)},
         {"attack", attack_to_json(cfg.attack)},
         {"optimizer", optim_to_json(cfg.optimizer)},
         {"seed", cfg.seed},
         {"dataset", cfg.dataset},
         {"out", cfg.out}};
  return j.dump(2);
}

RunConfig run_config_from_json_text(const std::string& text) {
  const json j = parse_text(text, "run config");
  check_keys(j, "run config",
             {"model", "aug", "attack", "optimizer", "seed", "dataset", "out"});
  RunConfig cfg;
  if (!j.contains("model"))
    throw ConfigError("config: missing required 'model' section");
  cfg.model = model_from_json(j.at("model"));
  if (j.contains("aug")) cfg.aug = aug_from_json(j.at("aug"));
  if (j.contains("attack")) cfg.attack = attack_from_json(j.at("attack"));
  if (j.contains("optimizer")) cfg.optimizer = optim_from_json(j.at("optimizer"));
  cfg.seed = get_or<std::uint64_t>(j, "seed", 0);
  cfg.dataset = get_or<std::string>(j, "dataset", "");
  cfg.out = get_or<std::string>(j, "out", ".");
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return run_config_from_json_text(buf.str());
}

}  // namespace rvt
