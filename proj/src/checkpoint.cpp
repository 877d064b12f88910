#include "ncd/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

#include "ncd/pdm1.hpp"

namespace ncd {
namespace {

using nlohmann::json;

void save_network(const std::filesystem::path& dir, const std::string& prefix,
                  const Network& net) {
    for (std::size_t l = 0; l < net.layer_w.size(); ++l) {
        save_pdm1(dir / (prefix + "_layer" + std::to_string(l) + "_w.pdm1"), net.layer_w[l]);
        save_pdm1(dir / (prefix + "_layer" + std::to_string(l) + "_b.pdm1"), net.layer_b[l]);
    }
    save_pdm1(dir / (prefix + "_head_w.pdm1"), net.head_w);
    save_pdm1(dir / (prefix + "_head_b.pdm1"), net.head_b);
}

Network load_network(const std::filesystem::path& dir, const std::string& prefix,
                     const std::vector<std::size_t>& widths, std::size_t num_base,
                     std::size_t num_novel) {
    Network net;
    net.widths = widths;
    net.num_base = num_base;
    net.num_novel = num_novel;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        net.layer_w.push_back(
            load_pdm1(dir / (prefix + "_layer" + std::to_string(l) + "_w.pdm1")));
        net.layer_b.push_back(
            load_pdm1(dir / (prefix + "_layer" + std::to_string(l) + "_b.pdm1")));
        if (net.layer_w[l].rows() != widths[l + 1] || net.layer_w[l].cols() != widths[l]) {
            throw Malformed("checkpoint: layer " + std::to_string(l) + " shape mismatch");
        }
    }
    net.head_w = load_pdm1(dir / (prefix + "_head_w.pdm1"));
    net.head_b = load_pdm1(dir / (prefix + "_head_b.pdm1"));
    if (net.head_w.rows() != net.num_classes() || net.head_w.cols() != net.embed_dim()) {
        throw Malformed("checkpoint: classifier head shape mismatch");
    }
    return net;
}

} // namespace

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("save_checkpoint: cannot create " + dir.string());

    json manifest;
    manifest["format"] = "ncd-checkpoint-v1";
    manifest["stage"] = ckpt.stage;
    manifest["step"] = ckpt.step;
    manifest["config_hash"] = ckpt.config_hash;
    manifest["widths"] = ckpt.student.widths;
    manifest["activation"] = "relu";
    manifest["num_base"] = ckpt.student.num_base;
    manifest["num_novel"] = ckpt.student.num_novel;
    manifest["has_teacher"] = ckpt.teacher.has_value();
    manifest["has_bank"] = ckpt.bank.has_value();
    if (ckpt.student_head) {
        manifest["distill"] = {{"out_dim", ckpt.student_head->out_dim()},
                               {"tau_s", ckpt.student_head->tau_s},
                               {"tau_t", ckpt.student_head->tau_t},
                               {"center_momentum", ckpt.student_head->center_momentum}};
    }
    if (ckpt.bank) manifest["bank_beta"] = ckpt.bank->beta;

    save_network(dir, "student", ckpt.student);
    if (ckpt.teacher) save_network(dir, "teacher", *ckpt.teacher);
    if (ckpt.student_head) {
        save_pdm1(dir / "student_proj.pdm1", ckpt.student_head->proj);
    }
    if (ckpt.teacher_head) {
        save_pdm1(dir / "teacher_proj.pdm1", ckpt.teacher_head->proj);
        save_pdm1(dir / "teacher_center.pdm1", ckpt.teacher_head->center);
    }
    if (ckpt.bank) save_pdm1(dir / "bank.pdm1", ckpt.bank->p);

    std::ofstream out(dir / "manifest.json");
    if (!out) throw IoError("save_checkpoint: cannot write manifest");
    out << manifest.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
    if (!std::filesystem::exists(dir / "manifest.json")) {
        throw CheckpointMissing("load_checkpoint: no manifest in " + dir.string());
    }
    std::ifstream in(dir / "manifest.json");
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        throw Malformed(std::string("load_checkpoint: bad manifest: ") + e.what());
    }

    Checkpoint ckpt;
    try {
        ckpt.stage = manifest.at("stage").get<std::string>();
        ckpt.step = manifest.at("step").get<std::int64_t>();
        ckpt.config_hash = manifest.at("config_hash").get<std::string>();
        const auto widths = manifest.at("widths").get<std::vector<std::size_t>>();
        const auto num_base = manifest.at("num_base").get<std::size_t>();
        const auto num_novel = manifest.at("num_novel").get<std::size_t>();
        ckpt.student = load_network(dir, "student", widths, num_base, num_novel);
        if (manifest.at("has_teacher").get<bool>()) {
            ckpt.teacher = load_network(dir, "teacher", widths, num_base, num_novel);
        }
        if (manifest.contains("distill")) {
            DistillHead head;
            head.proj = load_pdm1(dir / "student_proj.pdm1");
            head.center = Matrix(1, head.proj.rows());
            head.tau_s = manifest["distill"].at("tau_s").get<double>();
            head.tau_t = manifest["distill"].at("tau_t").get<double>();
            head.center_momentum = manifest["distill"].at("center_momentum").get<double>();
            ckpt.student_head = head;
            if (std::filesystem::exists(dir / "teacher_proj.pdm1")) {
                DistillHead teacher = head;
                teacher.proj = load_pdm1(dir / "teacher_proj.pdm1");
                teacher.center = load_pdm1(dir / "teacher_center.pdm1");
                ckpt.teacher_head = teacher;
            }
        }
        if (manifest.at("has_bank").get<bool>()) {
            PrototypeBank bank;
            bank.p = load_pdm1(dir / "bank.pdm1");
            bank.beta = manifest.at("bank_beta").get<double>();
            ckpt.bank = bank;
        }
    } catch (const json::exception& e) {
        throw Malformed(std::string("load_checkpoint: manifest field error: ") + e.what());
    }
    return ckpt;
}

} // namespace ncd
