#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "sqzm/decoder.hpp"
#include "sqzm/types.hpp"

namespace sqzm {

/// LinearDecoder with the big affine layer in integer form: symmetric 8-bit
/// weights with one scale per output column, symmetric 16-bit activations
/// with one per-tensor scale calibrated from sample pose codes. Pose
/// projection and SH expansion stay in full precision (171 parameters).
struct QuantizedLinearDecoder {
    Eigen::VectorXd p_mean;
    Eigen::MatrixXd pose_basis;
    std::vector<int8_t> weights;  // column-major (d+1) x m, m = n_corr*(10+sh_d)
    std::vector<float> w_scale;   // per output column, > 0
    float act_scale = 1.f;        // pose-code quantization step
    Eigen::MatrixXd sh_expand;
    Eigen::VectorXd sh_mean;
    std::vector<uint32_t> lut;
    int n_corr = 0;
    int sh_d = 0;
    int64_t zero_scale_columns = 0;  // all-zero columns whose scale was pinned to 1

    int d() const { return static_cast<int>(pose_basis.cols()); }
    int pose_dim() const { return static_cast<int>(p_mean.size()); }
    int inner_channels() const { return kGeoChannels + sh_d; }
    int64_t cols() const { return static_cast<int64_t>(n_corr) * inner_channels(); }

    void validate() const;
};

/// Per-decode integer diagnostics.
struct QuantDecodeStats {
    int64_t saturated = 0;  // pose-code elements clipped to the int16 range
};

/// Symmetric post-training quantization: weight scale = per-column max-abs /
/// 127 (all-zero column -> scale 1, counted), activation scale = max-abs
/// pose code over the calibration set / 32767.
QuantizedLinearDecoder quantize(const LinearDecoder& ld, const std::vector<Pose>& calib);

/// Float weights W_q * w_scale reassembled into a LinearDecoder.
LinearDecoder dequantize(const QuantizedLinearDecoder& q);

/// Integer path: int16 code x int8 weights accumulated in int64, one
/// dequantization per output column.
Eigen::RowVectorXd quantized_decode_raw(const QuantizedLinearDecoder& q, const Pose& pose,
                                        QuantDecodeStats* stats = nullptr);

/// Full decode: integer stage 1, full-precision SH expansion; flat
/// n_corr x 37 correctives.
std::vector<double> quantized_decode(const QuantizedLinearDecoder& q, const Pose& pose,
                                     QuantDecodeStats* stats = nullptr);

}  // namespace sqzm
