#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ncd/augment.hpp"
#include "ncd/selftrain.hpp"

namespace ncd {

struct DatasetConfig {
    std::string kind = "gaussians"; // gaussians | glyphs | manifest
    std::size_t n_base = 5;
    std::size_t n_novel = 5;
    std::size_t dim = 32;          // gaussians
    std::size_t per_class = 200;
    double separation = 6.0;       // gaussians
    int size = 20;                 // glyphs
    double jitter = 1.0;           // glyphs
    std::string path;              // manifest
};

struct Stage1Config {
    std::size_t epochs = 20;
    std::size_t batch_size = 128;
    double base_lr = 0.0; // 0 = linear scaling rule 0.0005 * batch / 256
    double floor_lr = 0.0;
    std::size_t warmup_epochs = 2;
    double weight_decay = 0.01;
    double lambda_pas = 0.1;
    double proto_beta = 0.95;
    double bank_pas_lr = 0.1; // step size for the separation gradient on the bank
    std::string bootstrap = "each_epoch"; // each_epoch | first_epoch
    std::size_t eval_every = 5;           // epochs between k-means probes; 0 = never
};

struct DistillConfig {
    std::size_t out_dim = 256;
    double tau_s = 0.1;
    double tau_t = 0.04;
    double center_momentum = 0.9;
    double teacher_momentum = 0.996;
    int n_local = 4;
};

struct Stage2Config {
    std::size_t iterations = 2;
    std::size_t epochs_per_iter = 2;
    double lr = 0.05;
    double momentum = 0.9;
    std::size_t batch_size = 128;
};

struct ClusteringConfig {
    std::string method = "kmeans"; // kmeans | spectral
    std::size_t restarts = 10;
    std::size_t max_iters = 300;
    double sigma = 0.0; // spectral bandwidth; 0 = median heuristic
};

struct AblationConfig {
    bool instdis = true;
    bool catdis = true;
    bool pst = true;
};

struct RunConfig {
    std::uint64_t seed = 1;
    DatasetConfig dataset;
    std::string augment_domain = "vector"; // vector | natural | symbolic
    AugPreset augment;                     // resolved preset
    std::vector<std::size_t> hidden = {256, 256};
    std::size_t embed_dim = 64;
    Stage1Config stage1;
    DistillConfig distill;
    Stage2Config stage2;
    ClusteringConfig clustering;
    AblationConfig ablation;

    double resolved_base_lr() const {
        return stage1.base_lr > 0.0
                   ? stage1.base_lr
                   : 0.0005 * static_cast<double>(stage1.batch_size) / 256.0;
    }
    OfflineMethod offline_method() const {
        return clustering.method == "spectral" ? OfflineMethod::spectral
                                               : OfflineMethod::kmeans;
    }
};

// Parses and validates; throws ConfigInvalid naming the offending field.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const RunConfig& cfg);

// FNV-1a over the canonical JSON form; ties artifacts to their config.
std::string config_hash(const RunConfig& cfg);

} // namespace ncd
