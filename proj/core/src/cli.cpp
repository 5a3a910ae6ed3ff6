#include "rvt/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "rvt/checkpoint.hpp"
#include "rvt/config_io.hpp"
#include "rvt/dataset.hpp"
#include "rvt/gradsuite.hpp"
#include "rvt/robustness.hpp"
#include "rvt/trainer.hpp"

namespace rvt {

namespace {

namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct CommonArgs {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

RunConfig resolve_config(const CommonArgs& args) {
  RunConfig cfg = load_run_config(args.config);
  if (args.seed_set) cfg.seed = args.seed;
  if (!args.out.empty()) cfg.out = args.out;
  return cfg;
}

Dataset load_configured_dataset(const RunConfig& cfg) {
  if (cfg.dataset.empty())
    throw ConfigError(
        "config: no dataset path set; generate one with `rvt gen-data`");
  return load_dataset(cfg.dataset);
}

Model<float> load_weights_for(const RunConfig& cfg, const std::string& path) {
  Model<float> m = load_checkpoint(path);
  if (model_config_to_json(m.cfg) != model_config_to_json(cfg.model))
    throw ConfigError(
        "checkpoint model configuration does not match the config file");
  return m;
}

EvalOptions eval_options(const RunConfig& cfg) {
  EvalOptions opts;
  opts.seed = cfg.seed;
  AttackConfig fgsm = cfg.attack;
  fgsm.steps = 1;
  opts.attacks.push_back({"fgsm", AttackSpec::Algorithm::fgsm, fgsm});
  opts.attacks.push_back({"pgd", AttackSpec::Algorithm::pgd, cfg.attack});
  return opts;
}

int cmd_train(const CommonArgs& args) {
  RunConfig cfg = resolve_config(args);
  cfg.validate();
  Dataset ds = load_configured_dataset(cfg);
  fs::create_directories(cfg.out);
  std::cout << "training on " << ds.size() << " images for "
            << cfg.optimizer.epochs << " epochs\n";
  TrainResult result = train(cfg, ds, &std::cout);
  const fs::path out_dir(cfg.out);
  save_checkpoint(result.model, (out_dir / "model.rvtw").string());
  write_text(out_dir / "train_log.csv", result.history_csv());
  write_text(out_dir / "run_config.json", run_config_to_json(cfg));
  std::cout << "checkpoint written to " << (out_dir / "model.rvtw").string()
            << "\n";
  return kExitOk;
}

int cmd_eval(const CommonArgs& args, const std::string& weights,
             const std::string& baseline_path) {
  RunConfig cfg = resolve_config(args);
  cfg.validate();
  Dataset ds = load_configured_dataset(cfg);
  Model<float> m = load_weights_for(cfg, weights);
  fs::create_directories(cfg.out);

  EvalReport report = evaluate(m, ds, eval_options(cfg));
  const EvalReport baseline =
      baseline_path.empty() ? report
                            : EvalReport::from_csv(read_text(baseline_path));
  const double mce = compute_mce(report, baseline);

  const fs::path out_dir(cfg.out);
  write_text(out_dir / "report.csv", report.to_csv());
  std::ostringstream mce_text;
  mce_text.precision(17);
  mce_text << mce << "\n";
  write_text(out_dir / "mce.txt", mce_text.str());

  std::cout << "clean error " << report.clean_err << "\n";
  for (const auto& [name, acc] : report.robust_acc)
    std::cout << name << " robust accuracy " << acc << "\n";
  std::cout << "mCE " << mce << "\n";
  return kExitOk;
}

int cmd_attack(const CommonArgs& args, const std::string& weights) {
  RunConfig cfg = resolve_config(args);
  cfg.validate();
  Dataset ds = load_configured_dataset(cfg);
  Model<float> m = load_weights_for(cfg, weights);
  fs::create_directories(cfg.out);

  EvalOptions opts = eval_options(cfg);
  opts.kinds.clear();  // attacks only
  EvalReport report = evaluate(m, ds, opts);

  std::ostringstream csv;
  csv.precision(17);
  csv << "split,kind,severity,error\n";
  csv << "clean,none,0," << report.clean_err << "\n";
  for (const auto& [name, acc] : report.robust_acc)
    csv << "attack," << name << ",0," << 1.0 - acc << "\n";
  write_text(fs::path(cfg.out) / "attack.csv", csv.str());

  std::cout << "clean error " << report.clean_err << "\n";
  for (const auto& [name, acc] : report.robust_acc)
    std::cout << name << " robust accuracy " << acc << "\n";
  return kExitOk;
}

int cmd_corrupt(const CommonArgs& args, const std::string& kind_name,
                int severity, const std::string& out_file) {
  RunConfig cfg = resolve_config(args);
  Dataset ds = load_configured_dataset(cfg);
  const CorruptionKind kind = corruption_from_name(kind_name);
  Dataset corrupted = ds;
  for (int i = 0; i < ds.size(); ++i) {
    Rng rng = Rng::stream(cfg.seed, static_cast<std::uint64_t>(i));
    Tensor<float> img = corrupt(ds.image(i), {kind, severity}, rng);
    std::uint8_t* dst = corrupted.pixels.data() +
                        static_cast<std::size_t>(i) * ds.height * ds.width * 3;
    for (int y = 0; y < ds.height; ++y)
      for (int x = 0; x < ds.width; ++x)
        for (int c = 0; c < 3; ++c)
          dst[(static_cast<std::size_t>(y) * ds.width + x) * 3 + c] =
              static_cast<std::uint8_t>(std::lround(
                  img.data()[(static_cast<std::size_t>(c) * ds.height + y) *
                             ds.width + x] * 255.0f));
  }
  save_dataset(corrupted, out_file);
  std::cout << "wrote " << corrupted.size() << " images corrupted with "
            << kind_name << " severity " << severity << " to " << out_file
            << "\n";
  return kExitOk;
}

int cmd_flops(const CommonArgs& args) {
  RunConfig cfg = resolve_config(args);
  cfg.model.validate();
  const std::int64_t macs = count_flops(cfg.model, cfg.model.input_res);
  const std::int64_t params = count_params(cfg.model);
  std::cout << "macs " << macs << "\n";
  std::cout << "params " << params << "\n";
  std::cout << "gmacs " << static_cast<double>(macs) / 1e9 << "\n";
  if (!args.out.empty()) {
    fs::create_directories(args.out);
    std::ostringstream js;
    js << "{\"macs\": " << macs << ", \"params\": " << params << "}\n";
    write_text(fs::path(args.out) / "flops.json", js.str());
  }
  return kExitOk;
}

int cmd_gradcheck() {
  GradSuiteResult result = run_gradient_suite(&std::cout);
  std::cout << (result.passed ? "gradient suite passed"
                              : "gradient suite FAILED")
            << " (" << result.entries.size() << " checks)\n";
  return result.passed ? kExitOk : kExitFailure;
}

int cmd_gen_data(std::uint64_t seed, int per_class,
                 const std::string& out_file) {
  Dataset ds = make_synthetic_dataset(seed, per_class);
  save_dataset(ds, out_file);
  std::cout << "wrote " << ds.size() << " images (" << ds.num_classes
            << " classes) to " << out_file << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"vision transformer robustness lab"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string weights, baseline, kind = "gaussian_noise", out_file;
  int severity = 3, per_class = 128;
  std::uint64_t gen_seed = 0;

  auto add_common = [&](CLI::App* sub, bool need_config) {
    auto* c = sub->add_option("--config", args.config, "run config JSON");
    if (need_config) c->required();
    sub->add_option("--out", args.out, "output directory override");
    sub->add_option("--seed", args.seed, "seed override")
        ->each([&](const std::string&) { args.seed_set = true; });
  };

  CLI::App* train_cmd = app.add_subcommand("train", "train a model");
  add_common(train_cmd, true);

  CLI::App* eval_cmd =
      app.add_subcommand("eval", "clean/corruption/attack evaluation + mCE");
  add_common(eval_cmd, true);
  eval_cmd->add_option("--weights", weights, "checkpoint to evaluate")
      ->required();
  eval_cmd->add_option("--baseline", baseline,
                       "baseline report.csv for mCE normalization");

  CLI::App* attack_cmd = app.add_subcommand("attack", "adversarial evaluation");
  add_common(attack_cmd, true);
  attack_cmd->add_option("--weights", weights, "checkpoint to attack")
      ->required();

  CLI::App* corrupt_cmd =
      app.add_subcommand("corrupt", "write a corrupted copy of the dataset");
  add_common(corrupt_cmd, true);
  corrupt_cmd->add_option("--kind", kind, "corruption kind");
  corrupt_cmd->add_option("--severity", severity, "severity 1..5");
  corrupt_cmd->add_option("--out-file", out_file, "output dataset path")
      ->required();

  CLI::App* flops_cmd =
      app.add_subcommand("flops", "analytic MAC and parameter counts");
  add_common(flops_cmd, true);

  app.add_subcommand("gradcheck", "finite-difference audit of all gradients");

  CLI::App* gen_cmd =
      app.add_subcommand("gen-data", "generate the synthetic dataset");
  gen_cmd->add_option("--seed", gen_seed, "generator seed");
  gen_cmd->add_option("--per-class", per_class, "images per class");
  gen_cmd->add_option("--out-file", out_file, "output dataset path")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(args);
    if (eval_cmd->parsed()) return cmd_eval(args, weights, baseline);
    if (attack_cmd->parsed()) return cmd_attack(args, weights);
    if (corrupt_cmd->parsed())
      return cmd_corrupt(args, kind, severity, out_file);
    if (flops_cmd->parsed()) return cmd_flops(args);
    if (gen_cmd->parsed()) return cmd_gen_data(gen_seed, per_class, out_file);
    return cmd_gradcheck();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const UnsupportedError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const FormatError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace rvt
