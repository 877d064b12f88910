#pragma once

#include <string>
#include <vector>

#include "ncd/image.hpp"
#include "ncd/rng.hpp"

namespace ncd {

enum class Domain { natural, symbolic, vector };

// Per-domain augmentation recipe. The symbolic preset never crops or flips;
// the natural preset never rotates.
struct AugPreset {
    Domain domain = Domain::natural;

    // symbolic geometric part
    float theta_max_deg = 25.0f;

    // natural geometric part
    float global_crop_min = 0.5f;
    float global_crop_max = 1.0f;
    float local_crop_min = 0.15f;
    float local_crop_max = 0.4f;
    float p_flip = 0.5f;

    // appearance part (both image domains)
    float brightness = 0.4f;
    float contrast = 0.4f;
    float saturation = 0.2f;
    float hue = 0.1f;
    float p_brightness = 0.8f;
    float p_contrast = 0.8f;
    float p_hue_sat = 0.8f;
    float p_color_drop = 0.2f;
    float p_blur = 0.5f;
    float blur_sigma_min = 0.1f;
    float blur_sigma_max = 1.5f;
    float p_solarize = 0.2f;
    float solarize_threshold = 0.5f;

    // vector payloads: additive noise plus coordinate masking for locals
    float vec_global_sigma = 0.1f;
    float vec_local_sigma = 0.3f;
    float vec_mask_frac = 0.25f;
};

AugPreset natural_preset();
AugPreset symbolic_preset();
AugPreset vector_preset();

// Per-image bundle of two global views plus n local views, with a transform
// log per view. Global views never carry a rotation entry.
struct ViewSet {
    std::vector<Image> globals; // exactly 2
    std::vector<Image> locals;
    std::vector<std::vector<std::string>> global_provenance;
    std::vector<std::vector<std::string>> local_provenance;
};

// Rotation by an angle drawn uniformly from [-theta_max, theta_max], filled
// with the corner-median background. theta_max == 0 is the identity.
Image restricted_rotation(const Image& img, double theta_max_deg, Rng& rng,
                          std::vector<std::string>* provenance = nullptr);

// Brightness -> contrast -> hue/sat -> color drop -> blur -> solarize, each
// applied with its preset probability.
Image appearance_jitter(const Image& img, const AugPreset& preset, Rng& rng,
                        std::vector<std::string>* provenance = nullptr);

Image random_resized_crop(const Image& img, double scale_min, double scale_max, int out_h,
                          int out_w, Rng& rng, std::vector<std::string>* provenance = nullptr);

ViewSet build_view_set(const Image& img, const AugPreset& preset, int n_local, Rng& rng);

// View construction for raw feature-vector payloads: additive Gaussian noise
// for globals, stronger noise plus random coordinate masking for locals.
struct VectorViewSet {
    std::vector<std::vector<float>> globals; // exactly 2
    std::vector<std::vector<float>> locals;
    std::vector<std::vector<std::string>> global_provenance;
    std::vector<std::vector<std::string>> local_provenance;
};

VectorViewSet build_vector_view_set(const std::vector<float>& x, const AugPreset& preset,
                                    int n_local, Rng& rng);

// Transform log as a JSON document, for audits.
std::string provenance_json(const ViewSet& views);

} // namespace ncd
