#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ncd/matrix.hpp"
#include "ncd/rng.hpp"

namespace ncd {

enum class PayloadKind { vector, image };

struct PayloadShape {
    PayloadKind kind = PayloadKind::vector;
    int height = 0;
    int width = 0;
    int channels = 0;
    int dim = 0; // flattened width

    int flat_dim() const { return kind == PayloadKind::vector ? dim : height * width * channels; }
};

struct LabelledSet {
    Matrix x;
    std::vector<int> y;
};

struct UnlabelledSet {
    Matrix x; // ground truth is not reachable from here
};

// Ground-truth novel labels, handed to evaluation code only.
struct EvalChannel {
    std::vector<int> unlabelled_truth;
};

struct DatasetSplit {
    PayloadShape payload;
    std::vector<int> base_classes;
    std::vector<int> novel_classes;
    LabelledSet labelled;     // base-class training samples
    UnlabelledSet unlabelled; // novel-class training samples, labels stripped
    LabelledSet test;         // all classes
    EvalChannel eval;
};

struct Dataset {
    std::string name;
    PayloadShape payload;
    std::vector<int> base_classes;
    std::vector<int> novel_classes;
    Matrix train_x; // all training samples (base + novel)
    std::vector<int> train_y;
    Matrix test_x;
    std::vector<int> test_y;
};

// Gaussian blobs: class means drawn on a sphere of radius `separation`, unit
// isotropic covariance, 80/20 train/test per class.
Dataset synth_gaussians(std::size_t n_base, std::size_t n_novel, std::size_t dim,
                        std::size_t per_class, double separation, std::uint64_t seed);

// Stroke glyphs: each class is a random 3-5 segment template from a shared
// stroke vocabulary, rendered with per-sample width and placement jitter on a
// uniform background. Layouts are rotation-sensitive by construction.
Dataset synth_glyphs(std::size_t n_base, std::size_t n_novel, int size,
                     std::size_t per_class, std::uint64_t seed,
                     double jitter = 1.0);

void save_dataset(const std::filesystem::path& dir, const Dataset& ds);
Dataset load_dataset(const std::filesystem::path& dir);

// Splits a dataset by the given base class ids: base training samples keep
// labels, novel training samples lose them (kept in the eval channel), the
// test split covers all classes.
DatasetSplit make_splits(const Dataset& ds, const std::vector<int>& base_ids);

} // namespace ncd
