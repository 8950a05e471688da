#include "hoiprompt/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>

#include <json.hpp>

namespace hoi {

namespace fs = std::filesystem;

namespace {

void say(const Logger& log, const std::string& text) {
  if (log) log(text);
}

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DatasetError("cannot create directory " + dir + ": " + ec.message());
}

constexpr SplitMode kModes[] = {SplitMode::UnseenVerb, SplitMode::UnseenObject, SplitMode::RareFirst,
                                SplitMode::NonRareFirst};

std::string epoch_name(int epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch_%03d.bin", epoch);
  return buf;
}

}  // namespace

GuidanceConfig guidance_config(const RunConfig& config) {
  GuidanceConfig g;
  g.width = config.d_t;
  g.sentences = config.disparity_sentences;
  g.verb_weight = config.guidance_verb_weight;
  g.object_weight = config.guidance_object_weight;
  g.noise = config.guidance_noise;
  return g;
}

GenDataReport generate_dataset(const RunConfig& config, const std::string& root, bool force, const Logger& log) {
  config.validate();
  if (fs::exists(root) && !fs::is_directory(root)) throw DatasetError(root + " exists and is not a directory");
  if (fs::exists(root) && !fs::is_empty(root) && !force)
    throw DatasetError(root + " is not empty; pass --force to overwrite");

  GenDataReport report;
  say(log, "generating world (seed " + std::to_string(config.world.seed) + ")");
  const World world = generate_world(config.world);
  report.stats = world_stats(world);

  // every split must be feasible before anything is written
  const GuidanceConfig gcfg = guidance_config(config);
  std::vector<std::pair<SplitSpec, GuidanceEmbeddings>> splits;
  for (SplitMode mode : kModes) {
    SplitSpec split = make_split(world, mode, default_unseen_fraction(mode), config.world.seed);
    GuidanceEmbeddings guidance = build_guidance_fixtures(world, split, gcfg, config.world.seed);
    splits.emplace_back(std::move(split), std::move(guidance));
  }

  const Matrix<double> descriptions = build_guidance_fixtures(world, SplitSpec{}, gcfg, config.world.seed).descriptions;
  say(log, "pretraining frozen encoder");
  const FrozenEncoders<double> encoder = pretrain_encoders(world, config, descriptions, &report.pretrain, log);

  ensure_dir(root);
  report.world_checksum = save_world(root, world);
  write_file_atomic(join(root, "encoder.bin"), encoder.serialize());
  report.encoder_checksum = hex64(encoder.checksum());
  for (const auto& [split, guidance] : splits) {
    const std::string dir = split_dir(root, split.mode);
    ensure_dir(dir);
    SplitRecord rec;
    rec.mode = split.mode;
    rec.seen = static_cast<int>(split.seen.size());
    rec.unseen = static_cast<int>(split.unseen.size());
    rec.split_checksum = save_split(join(dir, "split.json"), split);
    rec.guidance_checksum = save_guidance(join(dir, "guidance.jsonl"), guidance);
    report.splits.push_back(rec);
  }
  return report;
}

DatasetBundle load_dataset(const std::string& root, SplitMode mode) {
  if (root.empty()) throw DatasetError("no dataset directory given (use --data or EZHOI_DATA_DIR)");
  if (!fs::is_directory(root)) throw DatasetError("dataset directory " + root + " does not exist");
  DatasetBundle data;
  data.world = load_world(root);
  data.world_checksum = world_checksum(root);
  const std::string dir = split_dir(root, mode);
  data.split = load_split(join(dir, "split.json"));
  data.guidance = load_guidance(join(dir, "guidance.jsonl"));
  if (data.split.mode != mode) throw DatasetError(dir + ": split file holds mode " + to_string(data.split.mode));
  if (data.guidance.descriptions.rows() != static_cast<Index>(data.world.classes.size()))
    throw DatasetError(dir + ": guidance covers " + std::to_string(data.guidance.descriptions.rows()) + " classes, world has " +
                       std::to_string(data.world.classes.size()));
  data.encoder_bytes = read_file(join(root, "encoder.bin"));
  return data;
}

template <typename S>
std::shared_ptr<const FrozenEncoders<S>> load_encoder(const DatasetBundle& data) {
  try {
    return std::make_shared<const FrozenEncoders<S>>(FrozenEncoders<S>::deserialize(data.encoder_bytes, "encoder.bin"));
  } catch (const DimensionError&) {
    throw;
  } catch (const std::runtime_error& e) {
    throw DatasetError(e.what());
  }
}

std::vector<Scene> validation_scenes(const World& world, const SplitSpec& split, int count) {
  std::vector<Scene> out;
  if (split.seen.empty()) return out;
  Rng root = Rng(world.config.seed).derive("validation");
  const int first_id = static_cast<int>(world.scenes.size());
  for (int i = 0; i < count; ++i) {
    Rng rng = root.derive(static_cast<std::uint64_t>(i));
    std::vector<int> ids = {split.seen[static_cast<std::size_t>(i) % split.seen.size()]};
    if (rng.bernoulli(world.config.second_pair_prob))
      ids.push_back(split.seen[static_cast<std::size_t>(rng.integer(0, static_cast<int>(split.seen.size()) - 1))]);
    const bool distractor = rng.bernoulli(world.config.distractor_prob);
    Scene s = compose_scene(world.config, world.verbs, world.classes, ids, distractor, rng);
    s.id = first_id + i;
    s.train = false;
    Rng det = rng.derive("detections");
    s.detections = oracle_detections(s, world.config, world.config.detector_noise, det);
    out.push_back(std::move(s));
  }
  return out;
}

template <typename S>
TrainOutcome run_training(const RunConfig& config, const DatasetBundle& data, const Logger& log) {
  config.validate();
  if ((config.precision == 64) != (sizeof(S) == 8)) throw ConfigError("precision setting does not match the scalar type");
  ensure_dir(config.out_dir);
  const std::string ckpt_dir = join(config.out_dir, "checkpoints");
  ensure_dir(ckpt_dir);
  write_file_atomic(join(config.out_dir, "train_config.txt"), config.dump());

  HoiModel<S> model(config, load_encoder<S>(data), data.world, data.split, data.guidance);
  Trainer<S> trainer(model, data.world, data.split);
  const std::vector<Scene> validation =
      config.patience > 0 ? validation_scenes(data.world, data.split, config.validation_scenes) : std::vector<Scene>{};
  std::vector<const Scene*> validation_ptrs;
  for (const auto& s : validation) validation_ptrs.push_back(&s);

  TrainOutcome outcome;
  std::string metrics;
  std::string best_bytes = serialize_checkpoint(model, 0);
  double best = -1;
  std::size_t logged_steps = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = trainer.train_epoch(epoch);
    const auto& history = trainer.history();
    for (; logged_steps < history.size(); ++logged_steps) {
      const auto& h = history[logged_steps];
      nlohmann::ordered_json j;
      j["type"] = "step";
      j["epoch"] = h.epoch;
      j["step"] = h.step;
      j["total"] = h.loss.total;
      j["focal"] = h.loss.focal;
      j["relation"] = h.loss.relation;
      j["clamped"] = h.loss.clamped;
      metrics += j.dump() + "\n";
    }
    const std::string bytes = serialize_checkpoint(model, epoch);
    write_file_atomic(join(ckpt_dir, epoch_name(epoch)), bytes);
    if (!validation_ptrs.empty()) {
      rec.validation_seen_map =
          evaluate(predict(model, validation_ptrs, config.tau_infer), validation_ptrs, data.world, data.split).map_seen;
    }
    nlohmann::ordered_json j;
    j["type"] = "epoch";
    j["epoch"] = epoch;
    j["total"] = rec.loss.total;
    j["focal"] = rec.loss.focal;
    j["relation"] = rec.loss.relation;
    if (rec.validation_seen_map >= 0) j["validation_seen_map"] = rec.validation_seen_map;
    metrics += j.dump() + "\n";
    write_file_atomic(join(config.out_dir, "metrics.jsonl"), metrics);
    outcome.epochs.push_back(rec);

    char line[160];
    std::snprintf(line, sizeof line, "epoch %d  loss %.5f  focal %.5f  relation %.6f", epoch, rec.loss.total,
                  rec.loss.focal, rec.loss.relation);
    std::string text = line;
    if (rec.validation_seen_map >= 0) {
      std::snprintf(line, sizeof line, "  val seen mAP %.4f", rec.validation_seen_map);
      text += line;
    }
    say(log, text);

    if (validation_ptrs.empty() || rec.validation_seen_map > best) {
      best = rec.validation_seen_map;
      outcome.best_epoch = epoch;
      best_bytes = bytes;
    } else if (epoch - outcome.best_epoch >= config.patience) {
      say(log, "validation plateau, stopping after epoch " + std::to_string(epoch) + " (best epoch " +
                   std::to_string(outcome.best_epoch) + ")");
      break;
    }
  }
  if (config.epochs == 0) write_file_atomic(join(config.out_dir, "metrics.jsonl"), metrics);
  outcome.checkpoint = join(config.out_dir, "checkpoint.bin");
  write_file_atomic(outcome.checkpoint, best_bytes);
  return outcome;
}

template <typename S>
EvalReport run_evaluation(const RunConfig& config, const DatasetBundle& data, const std::string& checkpoint,
                          const Logger& log) {
  config.validate();
  if ((config.precision == 64) != (sizeof(S) == 8)) throw ConfigError("precision setting does not match the scalar type");
  ensure_dir(config.out_dir);
  write_file_atomic(join(config.out_dir, "eval_config.txt"), config.dump());
  HoiModel<S> model(config, load_encoder<S>(data), data.world, data.split, data.guidance);
  if (!checkpoint.empty()) {
    const CheckpointInfo info = restore_checkpoint(model, read_file(checkpoint), checkpoint);
    say(log, "loaded " + checkpoint + " (epoch " + std::to_string(info.epoch) + ")");
  }
  std::vector<Prediction> preds = predict(model, data.world.test_scenes(), config.tau_infer);
  sort_predictions(preds);
  EvalReport report = evaluate(preds, data.world, data.split);
  write_file_atomic(join(config.out_dir, "preds.jsonl"), predictions_jsonl(preds));
  write_file_atomic(join(config.out_dir, "report.json"), report.to_json());
  write_file_atomic(join(config.out_dir, "report.txt"), report.table());
  return report;
}

std::string AblationTable::format() const {
  std::map<int, std::vector<const EvalReport*>> by_row;
  for (const auto& c : cells) by_row[c.row].push_back(&c.report);
  auto stats = [](const std::vector<double>& v) {
    double mean = 0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0;
    for (double x : v) var += (x - mean) * (x - mean);
    const double sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f ± %.4f", mean, sd);
    return std::string(buf);
  };
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-4s %-10s %-18s %-18s %-18s\n", "row", "config", "full", "unseen", "seen");
  out << line;
  for (const auto& [row, reports] : by_row) {
    std::vector<double> full, unseen, seen;
    for (const auto* r : reports) {
      full.push_back(r->map_full);
      unseen.push_back(r->map_unseen);
      seen.push_back(r->map_seen);
    }
    std::snprintf(line, sizeof line, "%-4d %-10s %-18s %-18s %-18s\n", row, ablation_label(row), stats(full).c_str(),
                  stats(unseen).c_str(), stats(seen).c_str());
    out << line;
  }
  return out.str();
}

AblationTable run_ablation(const RunConfig& config, const DatasetBundle& data, const std::vector<int>& rows,
                           const std::vector<std::uint64_t>& seeds, const Logger& log) {
  AblationTable table;
  for (int row : rows) {
    for (std::uint64_t seed : seeds) {
      RunConfig rc = config;
      rc.toggles = ablation_row(row);
      rc.seed = seed;
      rc.out_dir = join(config.out_dir, "row" + std::to_string(row) + "_seed" + std::to_string(seed));
      say(log, std::string("row ") + std::to_string(row) + " (" + ablation_label(row) + "), seed " + std::to_string(seed));
      EvalReport report;
      if (rc.precision == 64) {
        const auto t = run_training<double>(rc, data, log);
        report = run_evaluation<double>(rc, data, t.checkpoint, {});
      } else {
        const auto t = run_training<float>(rc, data, log);
        report = run_evaluation<float>(rc, data, t.checkpoint, {});
      }
      char line[128];
      std::snprintf(line, sizeof line, "  full %.4f  unseen %.4f  seen %.4f", report.map_full, report.map_unseen,
                    report.map_seen);
      say(log, line);
      table.cells.push_back({row, seed, std::move(report)});
    }
  }
  return table;
}

#define HOI_INSTANTIATE_PIPELINE(S)                                                                           \
  template std::shared_ptr<const FrozenEncoders<S>> load_encoder<S>(const DatasetBundle&);                    \
  template TrainOutcome run_training<S>(const RunConfig&, const DatasetBundle&, const Logger&);              \
  template EvalReport run_evaluation<S>(const RunConfig&, const DatasetBundle&, const std::string&, const Logger&);

HOI_INSTANTIATE_PIPELINE(float)
HOI_INSTANTIATE_PIPELINE(double)

}  // namespace hoi
