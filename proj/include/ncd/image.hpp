#pragma once

#include <vector>

#include "ncd/error.hpp"

namespace ncd {

// Grayscale (1 channel) or RGB (3 channel) image, pixels in [0, 1],
// row-major with interleaved channels.
struct Image {
    int height = 0;
    int width = 0;
    int channels = 1;
    std::vector<float> pixels;

    Image() = default;
    Image(int h, int w, int c, float fill = 0.0f)
        : height(h), width(w), channels(c),
          pixels(static_cast<std::size_t>(h) * w * c, fill) {}

    float& at(int y, int x, int c) {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    float at(int y, int x, int c) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
};

void clamp_pixels(Image& img);

// Rotation about the image center (counter-clockwise for positive angles in
// the x-right / y-down frame), bilinear resampling, out-of-bounds filled
// per channel. angle_deg == 0 is a bit-exact copy.
Image rotate_image(const Image& img, double angle_deg, const std::vector<float>& fill);

// Median of the four corner pixels, per channel.
std::vector<float> corner_median(const Image& img);

Image resize_bilinear(const Image& img, int out_h, int out_w);

// Crop window (top, left, crop_h, crop_w) resized to out_h x out_w.
// Throws CropTooSmall when the window is below 1x1 or falls outside.
Image crop_resize(const Image& img, int top, int left, int crop_h, int crop_w, int out_h,
                  int out_w);

Image flip_horizontal(const Image& img);

Image gaussian_blur(const Image& img, double sigma);

// Hue shift in turns of the full circle; saturation is multiplicative.
// No-op on single-channel images.
Image adjust_hue_saturation(const Image& img, double hue_shift, double sat_factor);

Image to_grayscale3(const Image& img); // luma replicated across channels

std::vector<float> flatten(const Image& img);
Image unflatten(const std::vector<float>& data, int h, int w, int c);

} // namespace ncd
