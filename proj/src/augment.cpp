#include "ncd/augment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <json.hpp>

namespace ncd {
namespace {

std::string fmt1(const char* name, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s(%.4f)", name, v);
    return buf;
}

void log_entry(std::vector<std::string>* provenance, std::string entry) {
    if (provenance) provenance->push_back(std::move(entry));
}

} // namespace

AugPreset natural_preset() {
    AugPreset p;
    p.domain = Domain::natural;
    p.theta_max_deg = 0.0f;
    return p;
}

AugPreset symbolic_preset() {
    AugPreset p;
    p.domain = Domain::symbolic;
    p.p_flip = 0.0f;
    // hue/saturation are no-ops on grayscale glyphs but stay configured for
    // 3-channel symbolic inputs
    return p;
}

AugPreset vector_preset() {
    AugPreset p;
    p.domain = Domain::vector;
    return p;
}

Image restricted_rotation(const Image& img, double theta_max_deg, Rng& rng,
                          std::vector<std::string>* provenance) {
    if (theta_max_deg < 0.0 || theta_max_deg >= 180.0) {
        throw Error("restricted_rotation: theta_max must be in [0, 180)");
    }
    const double angle = rng.uniform(-theta_max_deg, theta_max_deg);
    log_entry(provenance, fmt1("rotate", angle));
    return rotate_image(img, angle, corner_median(img));
}

Image appearance_jitter(const Image& img, const AugPreset& preset, Rng& rng,
                        std::vector<std::string>* provenance) {
    Image out = img;

    if (rng.bernoulli(preset.p_brightness)) {
        const double f = rng.uniform(1.0 - preset.brightness, 1.0 + preset.brightness);
        if (f != 1.0) {
            for (float& p : out.pixels) {
                p = std::clamp(static_cast<float>(p * f), 0.0f, 1.0f);
            }
        }
        log_entry(provenance, fmt1("brightness", f));
    }

    if (rng.bernoulli(preset.p_contrast)) {
        const double f = rng.uniform(1.0 - preset.contrast, 1.0 + preset.contrast);
        if (f != 1.0) {
            double mean = 0.0;
            for (float p : out.pixels) mean += p;
            mean /= static_cast<double>(out.pixels.size());
            for (float& p : out.pixels) {
                p = std::clamp(static_cast<float>(mean + (p - mean) * f), 0.0f, 1.0f);
            }
        }
        log_entry(provenance, fmt1("contrast", f));
    }

    if (rng.bernoulli(preset.p_hue_sat)) {
        const double h = rng.uniform(-preset.hue, preset.hue);
        const double s = rng.uniform(1.0 - preset.saturation, 1.0 + preset.saturation);
        if (out.channels == 3) {
            out = adjust_hue_saturation(out, h, s);
            log_entry(provenance, fmt1("hue_sat", h));
        }
    }

    if (rng.bernoulli(preset.p_color_drop)) {
        if (out.channels == 3) {
            out = to_grayscale3(out);
            log_entry(provenance, "color_drop");
        }
    }

    if (rng.bernoulli(preset.p_blur)) {
        const double sigma = rng.uniform(preset.blur_sigma_min, preset.blur_sigma_max);
        out = gaussian_blur(out, sigma);
        log_entry(provenance, fmt1("blur", sigma));
    }

    if (rng.bernoulli(preset.p_solarize)) {
        for (float& p : out.pixels) {
            if (p >= preset.solarize_threshold) p = 1.0f - p;
        }
        log_entry(provenance, fmt1("solarize", preset.solarize_threshold));
    }

    return out;
}

Image random_resized_crop(const Image& img, double scale_min, double scale_max, int out_h,
                          int out_w, Rng& rng, std::vector<std::string>* provenance) {
    if (scale_min <= 0.0 || scale_max > 1.0 || scale_min > scale_max) {
        throw Error("random_resized_crop: scale range must lie in (0, 1]");
    }
    const double area = static_cast<double>(img.height) * img.width;
    int crop_h = img.height;
    int crop_w = img.width;
    for (int attempt = 0; attempt < 10; ++attempt) {
        const double target = area * rng.uniform(scale_min, scale_max);
        const double log_lo = std::log(3.0 / 4.0);
        const double log_hi = std::log(4.0 / 3.0);
        const double aspect = std::exp(rng.uniform(log_lo, log_hi));
        const int ch = static_cast<int>(std::lround(std::sqrt(target / aspect)));
        const int cw = static_cast<int>(std::lround(std::sqrt(target * aspect)));
        if (ch < 1 || cw < 1) {
            throw CropTooSmall("random_resized_crop: sampled window below 1x1");
        }
        if (ch <= img.height && cw <= img.width) {
            crop_h = ch;
            crop_w = cw;
            break;
        }
    }
    const int top = static_cast<int>(rng.below(static_cast<std::uint64_t>(img.height - crop_h + 1)));
    const int left = static_cast<int>(rng.below(static_cast<std::uint64_t>(img.width - crop_w + 1)));
    if (provenance) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "crop(%d,%d,%d,%d)", top, left, crop_h, crop_w);
        provenance->push_back(buf);
    }
    return crop_resize(img, top, left, crop_h, crop_w, out_h, out_w);
}

ViewSet build_view_set(const Image& img, const AugPreset& preset, int n_local, Rng& rng) {
    if (n_local < 1) throw Error("build_view_set: n_local must be >= 1");
    if (preset.domain == Domain::vector) {
        throw Error("build_view_set: vector preset needs build_vector_view_set");
    }
    ViewSet vs;
    for (int v = 0; v < 2; ++v) {
        std::vector<std::string> log;
        Image view = img;
        if (preset.domain == Domain::natural) {
            view = random_resized_crop(view, preset.global_crop_min, preset.global_crop_max,
                                       img.height, img.width, rng, &log);
            if (rng.bernoulli(preset.p_flip)) {
                view = flip_horizontal(view);
                log.emplace_back("flip");
            }
        }
        view = appearance_jitter(view, preset, rng, &log);
        vs.globals.push_back(std::move(view));
        vs.global_provenance.push_back(std::move(log));
    }
    for (int v = 0; v < n_local; ++v) {
        std::vector<std::string> log;
        Image view = img;
        if (preset.domain == Domain::natural) {
            view = random_resized_crop(view, preset.local_crop_min, preset.local_crop_max,
                                       img.height, img.width, rng, &log);
            if (rng.bernoulli(preset.p_flip)) {
                view = flip_horizontal(view);
                log.emplace_back("flip");
            }
        } else {
            view = restricted_rotation(view, preset.theta_max_deg, rng, &log);
        }
        view = appearance_jitter(view, preset, rng, &log);
        vs.locals.push_back(std::move(view));
        vs.local_provenance.push_back(std::move(log));
    }
    return vs;
}

VectorViewSet build_vector_view_set(const std::vector<float>& x, const AugPreset& preset,
                                    int n_local, Rng& rng) {
    if (n_local < 1) throw Error("build_vector_view_set: n_local must be >= 1");
    VectorViewSet vs;
    for (int v = 0; v < 2; ++v) {
        std::vector<float> view = x;
        if (preset.vec_global_sigma > 0.0f) {
            for (float& e : view) {
                e += static_cast<float>(preset.vec_global_sigma * rng.normal());
            }
        }
        vs.globals.push_back(std::move(view));
        vs.global_provenance.push_back({fmt1("noise", preset.vec_global_sigma)});
    }
    for (int v = 0; v < n_local; ++v) {
        std::vector<float> view = x;
        if (preset.vec_local_sigma > 0.0f) {
            for (float& e : view) {
                e += static_cast<float>(preset.vec_local_sigma * rng.normal());
            }
        }
        std::vector<std::string> log{fmt1("noise", preset.vec_local_sigma)};
        if (preset.vec_mask_frac > 0.0f) {
            for (float& e : view) {
                if (rng.bernoulli(preset.vec_mask_frac)) e = 0.0f;
            }
            log.push_back(fmt1("mask", preset.vec_mask_frac));
        }
        vs.locals.push_back(std::move(view));
        vs.local_provenance.push_back(std::move(log));
    }
    return vs;
}

std::string provenance_json(const ViewSet& views) {
    nlohmann::json j;
    j["globals"] = views.global_provenance;
    j["locals"] = views.local_provenance;
    return j.dump(2);
}

} // namespace ncd
