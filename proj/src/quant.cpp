#include "sqzm/quant.hpp"

#include <algorithm>
#include <cmath>

#include "sqzm/common.hpp"

namespace sqzm {

void QuantizedLinearDecoder::validate() const {
    if (p_mean.size() <= 0) throw ValidationError("quantized decoder pose mean is empty");
    if (pose_basis.rows() != p_mean.size())
        throw ValidationError("pose basis row count does not match pose dim");
    if (n_corr < 1 || sh_d < 1 || sh_d > kShCoeffs)
        throw ValidationError("quantized decoder shape fields invalid");
    if (static_cast<int64_t>(weights.size()) != static_cast<int64_t>(d() + 1) * cols())
        throw ValidationError("quantized weight count mismatch");
    if (static_cast<int64_t>(w_scale.size()) != cols())
        throw ValidationError("weight scale count mismatch");
    for (float s : w_scale)
        if (!(s > 0.f)) throw ValidationError("weight scales must be positive");
    if (!(act_scale > 0.f)) throw ValidationError("activation scale must be positive");
    if (sh_expand.rows() != sh_d || sh_expand.cols() != kShCoeffs ||
        sh_mean.size() != kShCoeffs)
        throw ValidationError("sh expansion shape mismatch");
    for (uint32_t v : lut)
        if (v >= static_cast<uint32_t>(n_corr))
            throw ValidationError("lut entry outside corrective range");
}

QuantizedLinearDecoder quantize(const LinearDecoder& ld, const std::vector<Pose>& calib) {
    ld.validate();
    if (calib.empty()) throw ValidationError("quantization needs a non-empty calibration set");

    QuantizedLinearDecoder q;
    q.p_mean = ld.p_mean;
    q.pose_basis = ld.pose_basis;
    q.sh_expand = ld.sh_expand;
    q.sh_mean = ld.sh_mean;
    q.lut = ld.lut;
    q.n_corr = ld.n_corr;
    q.sh_d = ld.sh_d;

    const int rows = ld.d() + 1;
    const int64_t cols = q.cols();
    q.weights.resize(static_cast<size_t>(rows) * cols);
    q.w_scale.resize(static_cast<size_t>(cols));
    for (int64_t j = 0; j < cols; ++j) {
        const double maxabs = ld.corr_basis.col(j).cwiseAbs().maxCoeff();
        double scale = maxabs / 127.0;
        if (scale == 0.0) {
            scale = 1.0;
            ++q.zero_scale_columns;
        }
        const float s = static_cast<float>(scale);
        q.w_scale[static_cast<size_t>(j)] = s;
        int8_t* wcol = q.weights.data() + static_cast<size_t>(j) * rows;
        for (int i = 0; i < rows; ++i) {
            const long v = std::lround(ld.corr_basis(i, j) / static_cast<double>(s));
            wcol[i] = static_cast<int8_t>(std::clamp(v, -127l, 127l));
        }
    }

    double code_max = 0.0;
    for (const Pose& p : calib)
        code_max = std::max(code_max, pose_code(ld, p).cwiseAbs().maxCoeff());
    q.act_scale = static_cast<float>(code_max / 32767.0);
    if (!(q.act_scale > 0.f)) throw ValidationError("calibration produced a zero activation scale");
    q.validate();
    return q;
}

LinearDecoder dequantize(const QuantizedLinearDecoder& q) {
    LinearDecoder ld;
    ld.p_mean = q.p_mean;
    ld.pose_basis = q.pose_basis;
    ld.sh_expand = q.sh_expand;
    ld.sh_mean = q.sh_mean;
    ld.lut = q.lut;
    ld.n_corr = q.n_corr;
    ld.sh_d = q.sh_d;
    const int rows = q.d() + 1;
    const int64_t cols = q.cols();
    ld.corr_basis.resize(rows, cols);
    for (int64_t j = 0; j < cols; ++j) {
        const double s = static_cast<double>(q.w_scale[static_cast<size_t>(j)]);
        const int8_t* wcol = q.weights.data() + static_cast<size_t>(j) * rows;
        for (int i = 0; i < rows; ++i) ld.corr_basis(i, j) = static_cast<double>(wcol[i]) * s;
    }
    ld.validate();
    return ld;
}

Eigen::RowVectorXd quantized_decode_raw(const QuantizedLinearDecoder& q, const Pose& pose,
                                        QuantDecodeStats* stats) {
    const Eigen::VectorXd p = pose.to_vector();
    if (p.size() != q.p_mean.size()) throw ValidationError("pose dim does not match decoder");
    const int rows = q.d() + 1;
    Eigen::VectorXd code(rows);
    code[0] = 1.0;
    code.tail(q.d()) = q.pose_basis.transpose() * (p - q.p_mean);

    const double a = static_cast<double>(q.act_scale);
    std::vector<int32_t> qcode(static_cast<size_t>(rows));
    int64_t saturated = 0;
    for (int i = 0; i < rows; ++i) {
        const long long v = std::llround(code[i] / a);
        if (v > 32767 || v < -32767) ++saturated;
        qcode[static_cast<size_t>(i)] =
            static_cast<int32_t>(std::clamp(v, -32767ll, 32767ll));
    }
    if (stats) stats->saturated = saturated;

    const int64_t cols = q.cols();
    Eigen::RowVectorXd raw(cols);
    for (int64_t j = 0; j < cols; ++j) {
        const int8_t* wcol = q.weights.data() + static_cast<size_t>(j) * rows;
        int64_t acc = 0;
        for (int i = 0; i < rows; ++i)
            acc += static_cast<int64_t>(qcode[static_cast<size_t>(i)]) * wcol[i];
        raw[j] = static_cast<double>(acc) * a *
                 static_cast<double>(q.w_scale[static_cast<size_t>(j)]);
    }
    return raw;
}

std::vector<double> quantized_decode(const QuantizedLinearDecoder& q, const Pose& pose,
                                     QuantDecodeStats* stats) {
    return expand_raw(q.sh_expand, q.sh_mean, q.n_corr, q.sh_d,
                      quantized_decode_raw(q, pose, stats));
}

}  // namespace sqzm
