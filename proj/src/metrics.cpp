#include "sqzm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sqzm/common.hpp"

namespace sqzm {

namespace {

void check_same_dims(const Image& a, const Image& b) {
    if (a.width != b.width || a.height != b.height)
        throw ValidationError("images disagree on size: " + std::to_string(a.width) + "x" +
                              std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                              std::to_string(b.height));
}

}  // namespace

CropRect mask_bbox(const std::vector<uint8_t>& mask, int width, int height) {
    if (mask.size() != static_cast<size_t>(width) * height)
        throw ValidationError("mask size does not match image dims");
    int x0 = width, y0 = height, x1 = -1, y1 = -1;
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            if (mask[static_cast<size_t>(y) * width + x]) {
                x0 = std::min(x0, x);
                y0 = std::min(y0, y);
                x1 = std::max(x1, x);
                y1 = std::max(y1, y);
            }
    if (x1 < 0) throw ValidationError("mask has no true pixels to crop to");
    return CropRect{x0, y0, x1 + 1, y1 + 1};
}

Image crop(const Image& img, const CropRect& r) {
    if (r.x0 < 0 || r.y0 < 0 || r.x1 > img.width || r.y1 > img.height || r.width() <= 0 ||
        r.height() <= 0)
        throw ValidationError("crop rectangle outside image");
    Image out(r.width(), r.height());
    for (int y = 0; y < out.height; ++y)
        std::copy_n(img.pixel(r.x0, r.y0 + y), static_cast<size_t>(out.width) * 3,
                    out.pixel(0, y));
    return out;
}

Image crop_to_mask_bbox(const Image& img, const std::vector<uint8_t>& mask) {
    return crop(img, mask_bbox(mask, img.width, img.height));
}

double l1(const Image& a, const Image& b) {
    check_same_dims(a, b);
    double sum = 0.0;
    for (size_t i = 0; i < a.rgb.size(); ++i)
        sum += std::abs(static_cast<double>(a.rgb[i]) - static_cast<double>(b.rgb[i]));
    return sum / static_cast<double>(a.rgb.size());
}

double mse(const Image& a, const Image& b) {
    check_same_dims(a, b);
    double sum = 0.0;
    for (size_t i = 0; i < a.rgb.size(); ++i) {
        const double d = static_cast<double>(a.rgb[i]) - static_cast<double>(b.rgb[i]);
        sum += d * d;
    }
    return sum / static_cast<double>(a.rgb.size());
}

double psnr(const Image& a, const Image& b) {
    const double m = mse(a, b);
    if (m == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / m);
}

double ssim(const Image& a, const Image& b) {
    check_same_dims(a, b);
    constexpr int kWin = 11;
    constexpr double kSigma = 1.5;
    constexpr double kC1 = 0.01 * 0.01;
    constexpr double kC2 = 0.03 * 0.03;
    if (a.width < kWin || a.height < kWin)
        throw ValidationError("ssim needs images at least 11x11");

    double kernel[kWin][kWin];
    double ksum = 0.0;
    for (int i = 0; i < kWin; ++i)
        for (int j = 0; j < kWin; ++j) {
            const double di = i - (kWin - 1) / 2.0;
            const double dj = j - (kWin - 1) / 2.0;
            kernel[i][j] = std::exp(-(di * di + dj * dj) / (2.0 * kSigma * kSigma));
            ksum += kernel[i][j];
        }
    for (auto& row : kernel)
        for (double& k : row) k /= ksum;

    double total = 0.0;
    int64_t windows = 0;
    for (int y = 0; y + kWin <= a.height; ++y)
        for (int x = 0; x + kWin <= a.width; ++x) {
            for (int c = 0; c < 3; ++c) {
                double mu_a = 0, mu_b = 0, aa = 0, bb = 0, ab = 0;
                for (int i = 0; i < kWin; ++i)
                    for (int j = 0; j < kWin; ++j) {
                        const double k = kernel[i][j];
                        const double va = a.pixel(x + j, y + i)[c];
                        const double vb = b.pixel(x + j, y + i)[c];
                        mu_a += k * va;
                        mu_b += k * vb;
                        aa += k * va * va;
                        bb += k * vb * vb;
                        ab += k * va * vb;
                    }
                const double var_a = aa - mu_a * mu_a;
                const double var_b = bb - mu_b * mu_b;
                const double cov = ab - mu_a * mu_b;
                total += ((2.0 * mu_a * mu_b + kC1) * (2.0 * cov + kC2)) /
                         ((mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2));
            }
            ++windows;
        }
    return total / (3.0 * static_cast<double>(windows));
}

Image gradient_background(int width, int height) {
    Image img(width, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            float* p = img.pixel(x, y);
            const float fx = width > 1 ? static_cast<float>(x) / (width - 1) : 0.f;
            const float fy = height > 1 ? static_cast<float>(y) / (height - 1) : 0.f;
            p[0] = 0.20f + 0.35f * fx;
            p[1] = 0.25f + 0.30f * fy;
            p[2] = 0.55f - 0.25f * fx * fy;
        }
    return img;
}

Image over_background(const FrameBuffer& fb, const Image& bg) {
    if (fb.width != bg.width || fb.height != bg.height)
        throw ValidationError("frame and background disagree on size");
    Image out(fb.width, fb.height);
    for (int y = 0; y < fb.height; ++y)
        for (int x = 0; x < fb.width; ++x) {
            const float t = 1.f - fb.alpha[static_cast<size_t>(y) * fb.width + x];
            const float* src = fb.pixel(x, y);
            const float* back = bg.pixel(x, y);
            float* dst = out.pixel(x, y);
            for (int c = 0; c < 3; ++c) dst[c] = src[c] + t * back[c];
        }
    return out;
}

std::vector<uint8_t> coverage_mask(const FrameBuffer& fb, float threshold) {
    std::vector<uint8_t> mask(fb.alpha.size());
    for (size_t i = 0; i < fb.alpha.size(); ++i) mask[i] = fb.alpha[i] > threshold ? 1 : 0;
    return mask;
}

}  // namespace sqzm
