#include "ncd/image.hpp"

#include <algorithm>
#include <cmath>

namespace ncd {
namespace {

constexpr double kDegToRad = M_PI / 180.0;

float sample_bilinear(const Image& img, double y, double x, int c, const float* fill) {
    const int y0 = static_cast<int>(std::floor(y));
    const int x0 = static_cast<int>(std::floor(x));
    const double fy = y - y0;
    const double fx = x - x0;
    auto px = [&](int yy, int xx) -> double {
        if (yy < 0 || yy >= img.height || xx < 0 || xx >= img.width) {
            return fill ? fill[c] : 0.0;
        }
        return img.at(yy, xx, c);
    };
    const double top = px(y0, x0) * (1.0 - fx) + px(y0, x0 + 1) * fx;
    const double bot = px(y0 + 1, x0) * (1.0 - fx) + px(y0 + 1, x0 + 1) * fx;
    return static_cast<float>(top * (1.0 - fy) + bot * fy);
}

float sample_bilinear_clamped(const Image& img, double y, double x, int c) {
    y = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
    x = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
    return sample_bilinear(img, y, x, c, nullptr);
}

void rgb_to_hsv(float r, float g, float b, float& h, float& s, float& v) {
    const float mx = std::max({r, g, b});
    const float mn = std::min({r, g, b});
    const float d = mx - mn;
    v = mx;
    s = mx > 0.0f ? d / mx : 0.0f;
    if (d <= 0.0f) {
        h = 0.0f;
        return;
    }
    if (mx == r) {
        h = (g - b) / d;
    } else if (mx == g) {
        h = 2.0f + (b - r) / d;
    } else {
        h = 4.0f + (r - g) / d;
    }
    h /= 6.0f;
    if (h < 0.0f) h += 1.0f;
}

void hsv_to_rgb(float h, float s, float v, float& r, float& g, float& b) {
    h = h - std::floor(h);
    const float i = std::floor(h * 6.0f);
    const float f = h * 6.0f - i;
    const float p = v * (1.0f - s);
    const float q = v * (1.0f - f * s);
    const float t = v * (1.0f - (1.0f - f) * s);
    switch (static_cast<int>(i) % 6) {
        case 0: r = v; g = t; b = p; break;
        case 1: r = q; g = v; b = p; break;
        case 2: r = p; g = v; b = t; break;
        case 3: r = p; g = q; b = v; break;
        case 4: r = t; g = p; b = v; break;
        default: r = v; g = p; b = q; break;
    }
}

} // namespace

void clamp_pixels(Image& img) {
    for (float& p : img.pixels) p = std::clamp(p, 0.0f, 1.0f);
}

Image rotate_image(const Image& img, double angle_deg, const std::vector<float>& fill) {
    if (angle_deg == 0.0) return img;
    if (static_cast<int>(fill.size()) != img.channels) {
        throw ShapeMismatch("rotate_image: fill channel count");
    }
    const double a = angle_deg * kDegToRad;
    const double ca = std::cos(a);
    const double sa = std::sin(a);
    const double cy = 0.5 * (img.height - 1);
    const double cx = 0.5 * (img.width - 1);
    Image out(img.height, img.width, img.channels);
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            // inverse map: rotate the destination offset by -angle
            const double dx = x - cx;
            const double dy = y - cy;
            const double sx = cx + ca * dx + sa * dy;
            const double sy = cy - sa * dx + ca * dy;
            for (int c = 0; c < out.channels; ++c) {
                out.at(y, x, c) = sample_bilinear(img, sy, sx, c, fill.data());
            }
        }
    }
    clamp_pixels(out);
    return out;
}

std::vector<float> corner_median(const Image& img) {
    std::vector<float> med(img.channels);
    for (int c = 0; c < img.channels; ++c) {
        float v[4] = {img.at(0, 0, c), img.at(0, img.width - 1, c),
                      img.at(img.height - 1, 0, c), img.at(img.height - 1, img.width - 1, c)};
        std::sort(v, v + 4);
        med[c] = 0.5f * (v[1] + v[2]);
    }
    return med;
}

Image resize_bilinear(const Image& img, int out_h, int out_w) {
    if (out_h == img.height && out_w == img.width) return img;
    Image out(out_h, out_w, img.channels);
    const double sy = static_cast<double>(img.height) / out_h;
    const double sx = static_cast<double>(img.width) / out_w;
    for (int y = 0; y < out_h; ++y) {
        const double src_y = (y + 0.5) * sy - 0.5;
        for (int x = 0; x < out_w; ++x) {
            const double src_x = (x + 0.5) * sx - 0.5;
            for (int c = 0; c < img.channels; ++c) {
                out.at(y, x, c) = sample_bilinear_clamped(img, src_y, src_x, c);
            }
        }
    }
    return out;
}

Image crop_resize(const Image& img, int top, int left, int crop_h, int crop_w, int out_h,
                  int out_w) {
    if (crop_h < 1 || crop_w < 1) throw CropTooSmall("crop_resize: window below 1x1");
    if (top < 0 || left < 0 || top + crop_h > img.height || left + crop_w > img.width) {
        throw CropTooSmall("crop_resize: window outside image");
    }
    Image out(out_h, out_w, img.channels);
    const double sy = static_cast<double>(crop_h) / out_h;
    const double sx = static_cast<double>(crop_w) / out_w;
    for (int y = 0; y < out_h; ++y) {
        double src_y = top + (y + 0.5) * sy - 0.5;
        src_y = std::clamp(src_y, static_cast<double>(top), static_cast<double>(top + crop_h - 1));
        for (int x = 0; x < out_w; ++x) {
            double src_x = left + (x + 0.5) * sx - 0.5;
            src_x = std::clamp(src_x, static_cast<double>(left),
                               static_cast<double>(left + crop_w - 1));
            for (int c = 0; c < img.channels; ++c) {
                out.at(y, x, c) = sample_bilinear(img, src_y, src_x, c, nullptr);
            }
        }
    }
    return out;
}

Image flip_horizontal(const Image& img) {
    Image out(img.height, img.width, img.channels);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < img.channels; ++c) {
                out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
            }
        }
    }
    return out;
}

Image gaussian_blur(const Image& img, double sigma) {
    if (sigma <= 0.0) return img;
    const int radius = std::max(1, static_cast<int>(std::ceil(2.5 * sigma)));
    std::vector<double> kernel(2 * radius + 1);
    double ksum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        ksum += kernel[i + radius];
    }
    for (double& k : kernel) k /= ksum;

    auto clampi = [](int v, int hi) { return std::clamp(v, 0, hi - 1); };
    Image tmp(img.height, img.width, img.channels);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < img.channels; ++c) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    acc += kernel[i + radius] * img.at(y, clampi(x + i, img.width), c);
                }
                tmp.at(y, x, c) = static_cast<float>(acc);
            }
        }
    }
    Image out(img.height, img.width, img.channels);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < img.channels; ++c) {
                double acc = 0.0;
                for (int i = -radius; i <= radius; ++i) {
                    acc += kernel[i + radius] * tmp.at(clampi(y + i, img.height), x, c);
                }
                out.at(y, x, c) = static_cast<float>(acc);
            }
        }
    }
    clamp_pixels(out);
    return out;
}

Image adjust_hue_saturation(const Image& img, double hue_shift, double sat_factor) {
    if (img.channels != 3) return img;
    Image out = img;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            float h, s, v;
            rgb_to_hsv(img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2), h, s, v);
            h = static_cast<float>(h + hue_shift);
            s = std::clamp(static_cast<float>(s * sat_factor), 0.0f, 1.0f);
            hsv_to_rgb(h, s, v, out.at(y, x, 0), out.at(y, x, 1), out.at(y, x, 2));
        }
    }
    clamp_pixels(out);
    return out;
}

Image to_grayscale3(const Image& img) {
    if (img.channels != 3) return img;
    Image out = img;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const float luma = 0.299f * img.at(y, x, 0) + 0.587f * img.at(y, x, 1) +
                               0.114f * img.at(y, x, 2);
            out.at(y, x, 0) = out.at(y, x, 1) = out.at(y, x, 2) = luma;
        }
    }
    return out;
}

std::vector<float> flatten(const Image& img) { return img.pixels; }

Image unflatten(const std::vector<float>& data, int h, int w, int c) {
    if (data.size() != static_cast<std::size_t>(h) * w * c) {
        throw ShapeMismatch("unflatten: size does not match shape");
    }
    Image img(h, w, c);
    img.pixels = data;
    return img;
}

} // namespace ncd
