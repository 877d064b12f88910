#pragma once

#include <filesystem>

#include "ncd/checkpoint.hpp"
#include "ncd/config.hpp"
#include "ncd/data.hpp"
#include "ncd/eval.hpp"
#include "ncd/selftrain.hpp"

namespace ncd {

// Generator configs synthesize in memory; manifest configs load from disk.
Dataset resolve_dataset(const RunConfig& cfg);
DatasetSplit resolve_splits(const RunConfig& cfg);

struct Stage1EpochStats {
    std::size_t epoch = 0;
    double loss_ins = 0.0;
    double loss_cls = 0.0;
    double loss_pas = 0.0;
    double modal_fraction = 0.0;    // largest pseudo-label share this epoch
    double assign_entropy = 0.0;    // nats over the epoch's assignments
    double kmeans_acc = -1.0;       // -1 when not probed this epoch
};

struct Stage1Result {
    Checkpoint checkpoint;
    std::vector<Stage1EpochStats> epochs;
};

// Stage I: self-distillation (when instdis) plus online prototype category
// discrimination (when catdis; plain labelled CE otherwise).
Stage1Result run_stage1(const RunConfig& cfg, const DatasetSplit& split);

struct Stage2Result {
    Checkpoint checkpoint;
    SelfTrainResult selftrain;
};

Stage2Result run_stage2(const RunConfig& cfg, const Checkpoint& stage1_ckpt,
                        const DatasetSplit& split);

// CLI entry points. Outputs land in out_dir: metrics.jsonl, checkpoint/,
// acc.json, confusion.csv, embeddings.csv.
void cmd_synth(const RunConfig& cfg, const std::filesystem::path& out_dir);
void cmd_stage1(const RunConfig& cfg, const std::filesystem::path& out_dir);
void cmd_stage2(const RunConfig& cfg, const std::filesystem::path& checkpoint_dir,
                const std::filesystem::path& out_dir);
void cmd_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint_dir,
              const std::filesystem::path& out_dir);

} // namespace ncd
