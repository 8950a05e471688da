#pragma once

// End-to-end runs shared by the command-line tool and the acceptance suite:
// dataset generation, loading with checksum verification, training with
// per-epoch checkpoints and early stopping, evaluation and the ablation ladder.

#include <functional>
#include <string>
#include <vector>

#include "hoiprompt/checkpoint.hpp"
#include "hoiprompt/dataset_io.hpp"
#include "hoiprompt/pretrain.hpp"
#include "hoiprompt/trainer.hpp"

namespace hoi {

using Logger = std::function<void(const std::string&)>;

GuidanceConfig guidance_config(const RunConfig& config);

struct SplitRecord {
  SplitMode mode = SplitMode::UnseenVerb;
  int seen = 0, unseen = 0;
  std::string split_checksum, guidance_checksum;
};

struct GenDataReport {
  std::string world_checksum;
  std::string encoder_checksum;
  std::vector<SplitRecord> splits;
  WorldStats stats;
  PretrainReport pretrain;
};

/// Writes world, encoder and all four splits with their guidance under `root`.
/// Refuses (DatasetError) a non-empty directory unless `force`.
GenDataReport generate_dataset(const RunConfig& config, const std::string& root, bool force, const Logger& log = {});

struct DatasetBundle {
  World world;
  SplitSpec split;
  GuidanceEmbeddings guidance;
  std::string encoder_bytes;
  std::string world_checksum;
};

/// Loads and verifies everything a run over `mode` needs.
DatasetBundle load_dataset(const std::string& root, SplitMode mode);

template <typename S>
std::shared_ptr<const FrozenEncoders<S>> load_encoder(const DatasetBundle& data);

/// Held-out scenes containing seen classes only, used for early stopping.
std::vector<Scene> validation_scenes(const World& world, const SplitSpec& split, int count);

struct EpochRecord {
  int epoch = 0;
  LossParts loss;
  double validation_seen_map = -1;  // -1 when validation is off
};

struct TrainOutcome {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  std::string checkpoint;  // path of the selected checkpoint
};

/// Trains into config.out_dir: train_config.txt, metrics.jsonl,
/// checkpoints/epoch_NNN.bin and checkpoint.bin (the selected epoch).
template <typename S>
TrainOutcome run_training(const RunConfig& config, const DatasetBundle& data, const Logger& log = {});

/// Evaluates a checkpoint (or the untrained model when `checkpoint` is empty)
/// into config.out_dir: eval_config.txt, preds.jsonl, report.json, report.txt.
template <typename S>
EvalReport run_evaluation(const RunConfig& config, const DatasetBundle& data, const std::string& checkpoint,
                          const Logger& log = {});

struct AblationCell {
  int row = 0;
  std::uint64_t seed = 0;
  EvalReport report;
};

struct AblationTable {
  std::vector<AblationCell> cells;
  std::string format() const;  // mean ± sd per row
};

/// Trains and evaluates the requested ladder rows for each seed under
/// config.out_dir/row<r>_seed<s>.
AblationTable run_ablation(const RunConfig& config, const DatasetBundle& data, const std::vector<int>& rows,
                           const std::vector<std::uint64_t>& seeds, const Logger& log = {});

}  // namespace hoi
