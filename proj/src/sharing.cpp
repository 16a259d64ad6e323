#include "sqzm/sharing.hpp"

#include <string>

namespace sqzm {

std::vector<double> upsample_nearest(const std::vector<double>& grid, int h, int w,
                                     int channels, int factor) {
    if (factor <= 0) throw ValidationError("upsample factor must be >= 1");
    if (grid.size() != static_cast<size_t>(h) * w * channels)
        throw ValidationError("grid size does not match dims");
    const int oh = h * factor;
    const int ow = w * factor;
    std::vector<double> out(static_cast<size_t>(oh) * ow * channels);
    for (int r = 0; r < oh; ++r) {
        const int sr = r / factor;
        for (int c = 0; c < ow; ++c) {
            const int sc = c / factor;
            const double* src = grid.data() + (static_cast<size_t>(sr) * w + sc) * channels;
            double* dst = out.data() + (static_cast<size_t>(r) * ow + c) * channels;
            for (int k = 0; k < channels; ++k) dst[k] = src[k];
        }
    }
    return out;
}

std::vector<double> apply_mask(const std::vector<double>& grid, int h, int w, int channels,
                               const std::vector<uint8_t>& mask) {
    if (grid.size() != static_cast<size_t>(h) * w * channels)
        throw ValidationError("grid size does not match dims");
    if (mask.size() != static_cast<size_t>(h) * w)
        throw ValidationError("mask size does not match dims");
    std::vector<double> out;
    out.reserve(grid.size());
    for (size_t cell = 0; cell < mask.size(); ++cell) {
        if (!mask[cell]) continue;
        const double* src = grid.data() + cell * channels;
        out.insert(out.end(), src, src + channels);
    }
    return out;
}

std::vector<uint32_t> build_lut(const std::vector<uint8_t>& mask, int h, int w, int factor) {
    if (factor <= 0) throw ValidationError("lut factor must be >= 1");
    if (h % factor != 0 || w % factor != 0)
        throw ValidationError("mask dims must be divisible by the sharing factor");
    if (mask.size() != static_cast<size_t>(h) * w)
        throw ValidationError("mask size does not match dims");
    const int cw = w / factor;
    std::vector<uint32_t> lut;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            if (!mask[static_cast<size_t>(r) * w + c]) continue;
            lut.push_back(static_cast<uint32_t>((r / factor) * cw + (c / factor)));
        }
    }
    return lut;
}

}  // namespace sqzm
