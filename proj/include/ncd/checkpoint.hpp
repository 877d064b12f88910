#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "ncd/distill.hpp"
#include "ncd/network.hpp"
#include "ncd/prototypes.hpp"

namespace ncd {

// A checkpoint directory holds one PDM1 file per parameter matrix plus a
// JSON manifest (widths, activation, counts, step, originating config hash).
struct Checkpoint {
    Network student;
    std::optional<Network> teacher;
    std::optional<DistillHead> student_head;
    std::optional<DistillHead> teacher_head;
    std::optional<PrototypeBank> bank;
    std::string config_hash;
    std::string stage; // "stage1" or "stage2"
    std::int64_t step = 0;
};

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

} // namespace ncd
