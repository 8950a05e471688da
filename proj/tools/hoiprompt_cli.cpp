// hoiprompt: data generation, training, evaluation, gradient audit and ablation.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "hoiprompt/gradaudit.hpp"
#include "hoiprompt/pipeline.hpp"

namespace {

using namespace hoi;

struct Options {
  std::string config_file;
  std::string data_dir;
  std::string out_dir;
  std::string checkpoint;
  std::string mode;
  std::vector<std::string> toggles;
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int precision = 0;
  bool force = false;
  double tau = 0;
  int gradcheck_seeds = 3;
  std::string inject_fault;
  std::vector<int> rows;
  std::vector<std::uint64_t> ablate_seeds = {1, 2, 3};
};

void log_line(const std::string& text) { std::cerr << text << std::endl; }

/// defaults < config file < --set < dedicated flags
RunConfig resolve(const Options& o, bool* precision_explicit = nullptr) {
  RunConfig c;
  bool explicit_precision = false;
  if (!o.config_file.empty()) {
    c = load_config_file(o.config_file, c);
    explicit_precision = read_file(o.config_file).find("precision") != std::string::npos;
  }
  if (const char* env = std::getenv("EZHOI_DATA_DIR"); env && c.data_dir.empty()) c.data_dir = env;
  for (const auto& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    c.set(kv.substr(0, eq), kv.substr(eq + 1));
    if (kv.substr(0, eq) == "precision") explicit_precision = true;
  }
  if (!o.data_dir.empty()) c.data_dir = o.data_dir;
  if (!o.out_dir.empty()) c.out_dir = o.out_dir;
  if (!o.checkpoint.empty()) c.checkpoint = o.checkpoint;
  if (!o.mode.empty()) c.set("mode", o.mode);
  if (o.seed_given) c.seed = o.seed;
  if (o.precision != 0) {
    c.set("precision", std::to_string(o.precision));
    explicit_precision = true;
  }
  for (const auto& t : o.toggles) {
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("--toggle expects name=on|off, got '" + t + "'");
    const std::string value = t.substr(eq + 1);
    if (value != "on" && value != "off") throw ConfigError("--toggle value must be on or off, got '" + value + "'");
    set_toggle(c.toggles, t.substr(0, eq), value == "on");
  }
  if (o.tau > 0) c.tau_infer = o.tau;
  c.validate();
  if (precision_explicit) *precision_explicit = explicit_precision;
  return c;
}

int cmd_gen_data(const Options& o) {
  const RunConfig c = resolve(o);
  if (c.data_dir.empty()) throw ConfigError("no output directory: pass --data or set EZHOI_DATA_DIR");
  const GenDataReport r = generate_dataset(c, c.data_dir, o.force, log_line);
  write_file_atomic((std::filesystem::path(c.data_dir) / "gen_config.txt").string(), c.dump());
  std::printf("world      %s  (%d train / %d test interactions, %d rare classes)\n", r.world_checksum.c_str(),
              r.stats.train_interactions, r.stats.test_interactions, r.stats.rare_classes);
  std::printf("encoder    %s  (pretrain top-1 %.3f, held-out %.3f)\n", r.encoder_checksum.c_str(), r.pretrain.train_accuracy,
              r.pretrain.heldout_accuracy);
  for (const auto& s : r.splits) {
    std::printf("%-10s split %s  guidance %s  (%d seen / %d unseen)\n", to_string(s.mode).c_str(), s.split_checksum.c_str(),
                s.guidance_checksum.c_str(), s.seen, s.unseen);
  }
  return 0;
}

int cmd_train(const Options& o) {
  const RunConfig c = resolve(o);
  const DatasetBundle data = load_dataset(c.data_dir, c.mode);
  const TrainOutcome t = c.precision == 64 ? run_training<double>(c, data, log_line) : run_training<float>(c, data, log_line);
  std::printf("trained %zu epochs, selected epoch %d -> %s\n", t.epochs.size(), t.best_epoch, t.checkpoint.c_str());
  return 0;
}

int cmd_eval(const Options& o) {
  RunConfig c = resolve(o);
  const DatasetBundle data = load_dataset(c.data_dir, c.mode);
  std::string ckpt = c.checkpoint;
  if (ckpt.empty()) ckpt = (std::filesystem::path(c.out_dir) / "checkpoint.bin").string();
  if (!std::filesystem::exists(ckpt)) throw DatasetError("checkpoint " + ckpt + " not found");
  const EvalReport r = c.precision == 64 ? run_evaluation<double>(c, data, ckpt, log_line)
                                         : run_evaluation<float>(c, data, ckpt, log_line);
  std::printf("mAP full %.4f  seen %.4f  unseen %.4f\n", r.map_full, r.map_seen, r.map_unseen);
  return 0;
}

int cmd_gradcheck(const Options& o) {
  bool explicit_precision = false;
  RunConfig c = resolve(o, &explicit_precision);
  if (explicit_precision && c.precision != 64) throw ConfigError("gradcheck needs 64-bit precision (--precision 64)");
  c.precision = 64;
  const DatasetBundle data = load_dataset(c.data_dir, c.mode);
  const auto encoders = load_encoder<double>(data);
  if (!o.inject_fault.empty()) {
    fault::arm(o.inject_fault);
    log_line("fault injected into backward rule '" + o.inject_fault + "'");
  }
  bool ok = true;
  for (int s = 1; s <= o.gradcheck_seeds; ++s) {
    AuditOptions opts;
    opts.seed = static_cast<std::uint64_t>(s);
    const auto checks = audit_gradients(c, encoders, data.world, data.split, data.guidance, opts);
    std::printf("seed %d\n%s", s, format_audit(checks).c_str());
    for (const auto& g : checks) ok = ok && g.passed;
  }
  fault::disarm();
  std::printf("%s\n", ok ? "all groups pass" : "gradient check FAILED");
  return ok ? 0 : 1;
}

int cmd_ablate(const Options& o) {
  const RunConfig c = resolve(o);
  const DatasetBundle data = load_dataset(c.data_dir, c.mode);
  std::vector<int> rows = o.rows;
  if (rows.empty())
    for (int r = 0; r < kAblationRows; ++r) rows.push_back(r);
  const AblationTable table = run_ablation(c, data, rows, o.ablate_seeds, log_line);
  const std::string text = table.format();
  std::filesystem::create_directories(c.out_dir);
  write_file_atomic((std::filesystem::path(c.out_dir) / "ablation.txt").string(), text);
  write_file_atomic((std::filesystem::path(c.out_dir) / "ablate_config.txt").string(), c.dump());
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& cell : table.cells)
    j.push_back({{"row", cell.row},
                 {"label", ablation_label(cell.row)},
                 {"seed", cell.seed},
                 {"map_full", cell.report.map_full},
                 {"map_unseen", cell.report.map_unseen},
                 {"map_seen", cell.report.map_seen}});
  write_file_atomic((std::filesystem::path(c.out_dir) / "ablation.json").string(), j.dump(2) + "\n");
  std::printf("%s", text.c_str());
  return 0;
}

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config_file, "key=value config file")->check(CLI::ExistingFile);
  cmd->add_option("--data", o.data_dir, "dataset directory (default $EZHOI_DATA_DIR)");
  cmd->add_option("--set", o.sets, "override a config key (key=value, repeatable)");
  cmd->add_option("--mode", o.mode, "split mode")->check(CLI::IsMember({"uv", "uo", "rfuc", "nfuc"}));
}

void add_run(CLI::App* cmd, Options& o) {
  cmd->add_option("--out", o.out_dir, "output directory");
  cmd->add_option_function<std::uint64_t>(
      "--seed", [&o](std::uint64_t s) { o.seed = s; o.seed_given = true; }, "training seed");
  cmd->add_option("--toggle", o.toggles, "feature toggle name=on|off (repeatable)");
  cmd->add_option("--precision", o.precision, "32 or 64")->check(CLI::IsMember({32, 64}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prompt-learned zero-shot human-object interaction detection on a synthetic world"};
  app.require_subcommand(1);
  Options o;

  auto* gen = app.add_subcommand("gen-data", "generate world, frozen encoder, splits and guidance fixtures");
  add_common(gen, o);
  gen->add_flag("--force", o.force, "overwrite a non-empty directory");
  gen->add_option_function<std::uint64_t>("--seed", [&o](std::uint64_t s) { o.sets.push_back("world_seed=" + std::to_string(s)); },
                                          "world seed");

  auto* train = app.add_subcommand("train", "train a model");
  add_common(train, o);
  add_run(train, o);

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test scenes");
  add_common(eval, o);
  add_run(eval, o);
  eval->add_option("--checkpoint", o.checkpoint, "checkpoint (default <out>/checkpoint.bin)");
  eval->add_option("--tau", o.tau, "inference exponent on detector confidence (default 2.8)")->check(CLI::PositiveNumber);

  auto* grad = app.add_subcommand("gradcheck", "finite-difference audit of every trainable parameter group");
  add_common(grad, o);
  add_run(grad, o);
  grad->add_option("--seeds", o.gradcheck_seeds, "number of seeds")->check(CLI::PositiveNumber);
  grad->add_option("--inject-fault", o.inject_fault)->group("");  // hidden self-test hook

  auto* ablate = app.add_subcommand("ablate", "run the cumulative feature ladder over several seeds");
  add_common(ablate, o);
  add_run(ablate, o);
  ablate->add_option("--rows", o.rows, "ladder rows to run (default all)");
  ablate->add_option("--seeds", o.ablate_seeds, "training seeds (default 1 2 3)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen) return cmd_gen_data(o);
    if (*train) return cmd_train(o);
    if (*eval) return cmd_eval(o);
    if (*grad) return cmd_gradcheck(o);
    if (*ablate) return cmd_ablate(o);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  } catch (const DatasetError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  } catch (const CheckpointError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << std::endl;
    return 1;
  }
  return 1;
}
