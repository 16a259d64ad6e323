#pragma once

#include <cstdint>
#include <vector>

#include "sqzm/raster.hpp"

namespace sqzm {

/// Plain RGB image in [0,1], row-major.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<float> rgb;

    Image() = default;
    Image(int w, int h) : width(w), height(h), rgb(static_cast<size_t>(w) * h * 3, 0.f) {}

    float* pixel(int x, int y) { return rgb.data() + (static_cast<size_t>(y) * width + x) * 3; }
    const float* pixel(int x, int y) const {
        return rgb.data() + (static_cast<size_t>(y) * width + x) * 3;
    }
};

/// Half-open pixel rectangle [x0,x1) x [y0,y1).
struct CropRect {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

    int width() const { return x1 - x0; }
    int height() const { return y1 - y0; }
};

/// Tight bounding rectangle of true mask pixels. Empty mask -> error.
CropRect mask_bbox(const std::vector<uint8_t>& mask, int width, int height);

Image crop(const Image& img, const CropRect& r);

/// crop(img, mask_bbox(mask)); both images of a comparison must be cropped
/// with the rectangle of the ground-truth mask.
Image crop_to_mask_bbox(const Image& img, const std::vector<uint8_t>& mask);

/// Mean absolute difference over pixels and channels.
double l1(const Image& a, const Image& b);

double mse(const Image& a, const Image& b);

/// 10 log10(1 / MSE); +infinity for identical images.
double psnr(const Image& a, const Image& b);

/// Mean local SSIM, 11x11 Gaussian window sigma 1.5, K1=0.01 K2=0.03,
/// dynamic range 1, valid windows only, averaged over channels. Requires
/// min(width, height) >= 11.
double ssim(const Image& a, const Image& b);

/// Deterministic synthetic backdrop used by the evaluation protocol.
Image gradient_background(int width, int height);

/// Composites a rendered frame over a background: out = rgb + (1-alpha) * bg.
Image over_background(const FrameBuffer& fb, const Image& bg);

/// Avatar segmentation mask from rendered coverage: alpha > threshold.
std::vector<uint8_t> coverage_mask(const FrameBuffer& fb, float threshold = 0.01f);

}  // namespace sqzm
