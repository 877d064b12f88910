#include "ncd/config.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

namespace ncd {
namespace {

using nlohmann::json;

template <typename T>
T field_or(const json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigInvalid("config field '" + key + "' has the wrong type");
    }
}

void require_positive(double v, const std::string& field) {
    if (!(v > 0.0)) throw ConfigInvalid("config field '" + field + "' must be > 0");
}

void require_unit_interval(double v, const std::string& field) {
    if (v < 0.0 || v >= 1.0) {
        throw ConfigInvalid("config field '" + field + "' must be in [0, 1)");
    }
}

AugPreset resolve_preset(const std::string& domain, const json& a) {
    AugPreset p;
    if (domain == "natural") {
        p = natural_preset();
    } else if (domain == "symbolic") {
        p = symbolic_preset();
    } else if (domain == "vector") {
        p = vector_preset();
    } else {
        throw ConfigInvalid("config field 'augment.domain' must be vector, natural or symbolic");
    }
    p.theta_max_deg = field_or(a, "theta_max_deg", p.theta_max_deg);
    if (p.theta_max_deg < 0.0f || p.theta_max_deg >= 180.0f) {
        throw ConfigInvalid("config field 'augment.theta_max_deg' must be in [0, 180)");
    }
    p.global_crop_min = field_or(a, "global_crop_min", p.global_crop_min);
    p.global_crop_max = field_or(a, "global_crop_max", p.global_crop_max);
    p.local_crop_min = field_or(a, "local_crop_min", p.local_crop_min);
    p.local_crop_max = field_or(a, "local_crop_max", p.local_crop_max);
    p.p_flip = field_or(a, "p_flip", p.p_flip);
    p.brightness = field_or(a, "brightness", p.brightness);
    p.contrast = field_or(a, "contrast", p.contrast);
    p.saturation = field_or(a, "saturation", p.saturation);
    p.hue = field_or(a, "hue", p.hue);
    p.p_brightness = field_or(a, "p_brightness", p.p_brightness);
    p.p_contrast = field_or(a, "p_contrast", p.p_contrast);
    p.p_hue_sat = field_or(a, "p_hue_sat", p.p_hue_sat);
    p.p_color_drop = field_or(a, "p_color_drop", p.p_color_drop);
    p.p_blur = field_or(a, "p_blur", p.p_blur);
    p.blur_sigma_min = field_or(a, "blur_sigma_min", p.blur_sigma_min);
    p.blur_sigma_max = field_or(a, "blur_sigma_max", p.blur_sigma_max);
    p.p_solarize = field_or(a, "p_solarize", p.p_solarize);
    p.solarize_threshold = field_or(a, "solarize_threshold", p.solarize_threshold);
    p.vec_global_sigma = field_or(a, "vec_global_sigma", p.vec_global_sigma);
    p.vec_local_sigma = field_or(a, "vec_local_sigma", p.vec_local_sigma);
    p.vec_mask_frac = field_or(a, "vec_mask_frac", p.vec_mask_frac);
    return p;
}

json preset_to_json(const RunConfig& cfg) {
    const AugPreset& p = cfg.augment;
    return json{{"domain", cfg.augment_domain},
                {"theta_max_deg", p.theta_max_deg},
                {"global_crop_min", p.global_crop_min},
                {"global_crop_max", p.global_crop_max},
                {"local_crop_min", p.local_crop_min},
                {"local_crop_max", p.local_crop_max},
                {"p_flip", p.p_flip},
                {"brightness", p.brightness},
                {"contrast", p.contrast},
                {"saturation", p.saturation},
                {"hue", p.hue},
                {"p_brightness", p.p_brightness},
                {"p_contrast", p.p_contrast},
                {"p_hue_sat", p.p_hue_sat},
                {"p_color_drop", p.p_color_drop},
                {"p_blur", p.p_blur},
                {"blur_sigma_min", p.blur_sigma_min},
                {"blur_sigma_max", p.blur_sigma_max},
                {"p_solarize", p.p_solarize},
                {"solarize_threshold", p.solarize_threshold},
                {"vec_global_sigma", p.vec_global_sigma},
                {"vec_local_sigma", p.vec_local_sigma},
                {"vec_mask_frac", p.vec_mask_frac}};
}

} // namespace

RunConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigInvalid(std::string("config is not valid JSON: ") + e.what());
    }

    RunConfig cfg;
    cfg.seed = field_or<std::uint64_t>(j, "seed", 1);

    const json jd = j.value("dataset", json::object());
    cfg.dataset.kind = field_or<std::string>(jd, "kind", "gaussians");
    if (cfg.dataset.kind != "gaussians" && cfg.dataset.kind != "glyphs" &&
        cfg.dataset.kind != "manifest") {
        throw ConfigInvalid("config field 'dataset.kind' must be gaussians, glyphs or manifest");
    }
    cfg.dataset.n_base = field_or<std::size_t>(jd, "n_base", cfg.dataset.n_base);
    cfg.dataset.n_novel = field_or<std::size_t>(jd, "n_novel", cfg.dataset.n_novel);
    cfg.dataset.dim = field_or<std::size_t>(jd, "dim", cfg.dataset.dim);
    cfg.dataset.per_class = field_or<std::size_t>(jd, "per_class", cfg.dataset.per_class);
    cfg.dataset.separation = field_or<double>(jd, "separation", cfg.dataset.separation);
    cfg.dataset.size = field_or<int>(jd, "size", cfg.dataset.size);
    cfg.dataset.jitter = field_or<double>(jd, "jitter", cfg.dataset.jitter);
    cfg.dataset.path = field_or<std::string>(jd, "path", "");
    if (cfg.dataset.kind == "manifest" && cfg.dataset.path.empty()) {
        throw ConfigInvalid("config field 'dataset.path' is required for manifest datasets");
    }
    if (cfg.dataset.kind != "manifest") {
        if (cfg.dataset.n_novel < 1) {
            throw ConfigInvalid("config field 'dataset.n_novel' must be >= 1");
        }
        if (cfg.dataset.per_class < 5) {
            throw ConfigInvalid("config field 'dataset.per_class' must be >= 5");
        }
    }

    const json ja = j.value("augment", json::object());
    cfg.augment_domain = field_or<std::string>(
        ja, "domain", cfg.dataset.kind == "glyphs" ? "symbolic" : "vector");
    cfg.augment = resolve_preset(cfg.augment_domain, ja);

    const json jn = j.value("network", json::object());
    cfg.hidden = field_or<std::vector<std::size_t>>(jn, "hidden", cfg.hidden);
    cfg.embed_dim = field_or<std::size_t>(jn, "embed_dim", cfg.embed_dim);
    if (cfg.embed_dim < 2) throw ConfigInvalid("config field 'network.embed_dim' must be >= 2");
    for (std::size_t w : cfg.hidden) {
        if (w < 1) throw ConfigInvalid("config field 'network.hidden' widths must be >= 1");
    }

    const json j1 = j.value("stage1", json::object());
    cfg.stage1.epochs = field_or<std::size_t>(j1, "epochs", cfg.stage1.epochs);
    cfg.stage1.batch_size = field_or<std::size_t>(j1, "batch_size", cfg.stage1.batch_size);
    if (cfg.stage1.batch_size < 1) {
        throw ConfigInvalid("config field 'stage1.batch_size' must be >= 1");
    }
    cfg.stage1.base_lr = field_or<double>(j1, "base_lr", cfg.stage1.base_lr);
    if (cfg.stage1.base_lr < 0.0) {
        throw ConfigInvalid("config field 'stage1.base_lr' must be >= 0");
    }
    cfg.stage1.floor_lr = field_or<double>(j1, "floor_lr", cfg.stage1.floor_lr);
    cfg.stage1.warmup_epochs = field_or<std::size_t>(j1, "warmup_epochs", cfg.stage1.warmup_epochs);
    cfg.stage1.weight_decay = field_or<double>(j1, "weight_decay", cfg.stage1.weight_decay);
    cfg.stage1.lambda_pas = field_or<double>(j1, "lambda_pas", cfg.stage1.lambda_pas);
    cfg.stage1.proto_beta = field_or<double>(j1, "proto_beta", cfg.stage1.proto_beta);
    require_unit_interval(cfg.stage1.proto_beta, "stage1.proto_beta");
    cfg.stage1.bank_pas_lr = field_or<double>(j1, "bank_pas_lr", cfg.stage1.bank_pas_lr);
    if (cfg.stage1.bank_pas_lr < 0.0) {
        throw ConfigInvalid("config field 'stage1.bank_pas_lr' must be >= 0");
    }
    cfg.stage1.bootstrap = field_or<std::string>(j1, "bootstrap", cfg.stage1.bootstrap);
    if (cfg.stage1.bootstrap != "each_epoch" && cfg.stage1.bootstrap != "first_epoch") {
        throw ConfigInvalid("config field 'stage1.bootstrap' must be each_epoch or first_epoch");
    }
    cfg.stage1.eval_every = field_or<std::size_t>(j1, "eval_every", cfg.stage1.eval_every);

    const json jdst = j.value("distill", json::object());
    cfg.distill.out_dim = field_or<std::size_t>(jdst, "out_dim", cfg.distill.out_dim);
    cfg.distill.tau_s = field_or<double>(jdst, "tau_s", cfg.distill.tau_s);
    cfg.distill.tau_t = field_or<double>(jdst, "tau_t", cfg.distill.tau_t);
    require_positive(cfg.distill.tau_s, "distill.tau_s");
    require_positive(cfg.distill.tau_t, "distill.tau_t");
    if (cfg.distill.tau_t >= cfg.distill.tau_s) {
        throw ConfigInvalid("config field 'distill.tau_t' must be below 'distill.tau_s'");
    }
    cfg.distill.center_momentum = field_or<double>(jdst, "center_momentum",
                                                   cfg.distill.center_momentum);
    require_unit_interval(cfg.distill.center_momentum, "distill.center_momentum");
    cfg.distill.teacher_momentum = field_or<double>(jdst, "teacher_momentum",
                                                    cfg.distill.teacher_momentum);
    require_unit_interval(cfg.distill.teacher_momentum, "distill.teacher_momentum");
    cfg.distill.n_local = field_or<int>(jdst, "n_local", cfg.distill.n_local);
    if (cfg.distill.n_local < 1) {
        throw ConfigInvalid("config field 'distill.n_local' must be >= 1");
    }

    const json j2 = j.value("stage2", json::object());
    cfg.stage2.iterations = field_or<std::size_t>(j2, "iterations", cfg.stage2.iterations);
    cfg.stage2.epochs_per_iter = field_or<std::size_t>(j2, "epochs_per_iter",
                                                       cfg.stage2.epochs_per_iter);
    cfg.stage2.lr = field_or<double>(j2, "lr", cfg.stage2.lr);
    require_positive(cfg.stage2.lr, "stage2.lr");
    cfg.stage2.momentum = field_or<double>(j2, "momentum", cfg.stage2.momentum);
    cfg.stage2.batch_size = field_or<std::size_t>(j2, "batch_size", cfg.stage2.batch_size);
    if (cfg.stage2.batch_size < 1) {
        throw ConfigInvalid("config field 'stage2.batch_size' must be >= 1");
    }

    const json jc = j.value("clustering", json::object());
    cfg.clustering.method = field_or<std::string>(jc, "method", cfg.clustering.method);
    if (cfg.clustering.method != "kmeans" && cfg.clustering.method != "spectral") {
        throw ConfigInvalid("config field 'clustering.method' must be kmeans or spectral");
    }
    cfg.clustering.restarts = field_or<std::size_t>(jc, "restarts", cfg.clustering.restarts);
    cfg.clustering.max_iters = field_or<std::size_t>(jc, "max_iters", cfg.clustering.max_iters);
    cfg.clustering.sigma = field_or<double>(jc, "sigma", cfg.clustering.sigma);
    if (cfg.clustering.sigma < 0.0) {
        throw ConfigInvalid("config field 'clustering.sigma' must be >= 0");
    }

    const json jab = j.value("ablation", json::object());
    cfg.ablation.instdis = field_or<bool>(jab, "instdis", true);
    cfg.ablation.catdis = field_or<bool>(jab, "catdis", true);
    cfg.ablation.pst = field_or<bool>(jab, "pst", true);

    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("load_config: cannot open " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config(text);
}

std::string config_to_json(const RunConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["dataset"] = {{"kind", cfg.dataset.kind},       {"n_base", cfg.dataset.n_base},
                    {"n_novel", cfg.dataset.n_novel}, {"dim", cfg.dataset.dim},
                    {"per_class", cfg.dataset.per_class}, {"separation", cfg.dataset.separation},
                    {"size", cfg.dataset.size},       {"jitter", cfg.dataset.jitter},
                    {"path", cfg.dataset.path}};
    j["augment"] = preset_to_json(cfg);
    j["network"] = {{"hidden", cfg.hidden}, {"embed_dim", cfg.embed_dim}};
    j["stage1"] = {{"epochs", cfg.stage1.epochs},
                   {"batch_size", cfg.stage1.batch_size},
                   {"base_lr", cfg.stage1.base_lr},
                   {"floor_lr", cfg.stage1.floor_lr},
                   {"warmup_epochs", cfg.stage1.warmup_epochs},
                   {"weight_decay", cfg.stage1.weight_decay},
                   {"lambda_pas", cfg.stage1.lambda_pas},
                   {"proto_beta", cfg.stage1.proto_beta},
                   {"bank_pas_lr", cfg.stage1.bank_pas_lr},
                   {"bootstrap", cfg.stage1.bootstrap},
                   {"eval_every", cfg.stage1.eval_every}};
    j["distill"] = {{"out_dim", cfg.distill.out_dim},
                    {"tau_s", cfg.distill.tau_s},
                    {"tau_t", cfg.distill.tau_t},
                    {"center_momentum", cfg.distill.center_momentum},
                    {"teacher_momentum", cfg.distill.teacher_momentum},
                    {"n_local", cfg.distill.n_local}};
    j["stage2"] = {{"iterations", cfg.stage2.iterations},
                   {"epochs_per_iter", cfg.stage2.epochs_per_iter},
                   {"lr", cfg.stage2.lr},
                   {"momentum", cfg.stage2.momentum},
                   {"batch_size", cfg.stage2.batch_size}};
    j["clustering"] = {{"method", cfg.clustering.method},
                       {"restarts", cfg.clustering.restarts},
                       {"max_iters", cfg.clustering.max_iters},
                       {"sigma", cfg.clustering.sigma}};
    j["ablation"] = {{"instdis", cfg.ablation.instdis},
                     {"catdis", cfg.ablation.catdis},
                     {"pst", cfg.ablation.pst}};
    return j.dump(2);
}

std::string config_hash(const RunConfig& cfg) {
    const std::string canon = config_to_json(cfg);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canon) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace ncd
