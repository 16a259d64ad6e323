#include "sqzm/decoder.hpp"

#include <algorithm>
#include <cmath>

#include "sqzm/common.hpp"

namespace sqzm {

namespace {

constexpr int kTeacherWidth = 256;

// Rows drawn uniform in [-1,1] then L1-normalized, so |row . x| <= max|x_i|.
Eigen::MatrixXd draw_l1_rows(Rng& r, int rows, int cols) {
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        double l1 = 0.0;
        for (int j = 0; j < cols; ++j) {
            m(i, j) = r.uniform(-1.0, 1.0);
            l1 += std::abs(m(i, j));
        }
        m.row(i) /= std::max(l1, 1e-12);
    }
    return m;
}

Eigen::VectorXd draw_uniform(Rng& r, int n, double amp) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = r.uniform(-amp, amp);
    return v;
}

double hardswish(double x) {
    return x * std::clamp(x + 3.0, 0.0, 6.0) / 6.0;
}

}  // namespace

TeacherDecoder::TeacherDecoder(int n_joints, int grid_h, int grid_w, uint64_t seed, bool linear)
    : n_joints_(n_joints),
      grid_h_(grid_h),
      grid_w_(grid_w),
      pose_dim_(4 * n_joints + 3 + kAuxDim),
      seed_(seed),
      linear_(linear) {
    if (n_joints <= 0 || grid_h <= 0 || grid_w <= 0)
        throw ValidationError("teacher decoder dims must be positive");
    Rng r(seed);
    w1_ = draw_l1_rows(r, kTeacherWidth, pose_dim_);
    b1_ = draw_uniform(r, kTeacherWidth, 0.1);
    w2_ = draw_l1_rows(r, kTeacherWidth, kTeacherWidth);
    b2_ = draw_uniform(r, kTeacherWidth, 0.1);
}

CorrectiveGrid TeacherDecoder::decode(const Pose& pose, int workers) const {
    if (static_cast<int>(pose.joints.size()) != n_joints_)
        throw ValidationError("pose joint count does not match decoder");

    Eigen::VectorXd h = w1_ * pose.to_vector() + b1_;
    if (!linear_)
        for (int i = 0; i < kTeacherWidth; ++i) h[i] = hardswish(h[i]);
    Eigen::VectorXd h2 = w2_ * h + b2_;
    if (!linear_)
        for (int i = 0; i < kTeacherWidth; ++i) h2[i] = hardswish(h2[i]);

    // L1-normalized rows bound |y| by amp * max(|h2|_inf, 1) / 1.2; the
    // hardswish range and the linear-mode bound both keep that factor <= 1.2.
    CorrectiveGrid grid(grid_h_, grid_w_);
    const int64_t n_rows = static_cast<int64_t>(grid_h_) * grid_w_ * kCorrChannels;
    parallel_for_chunks(n_rows, workers, [&](int64_t begin, int64_t end) {
        std::array<double, kTeacherWidth + 1> row;
        for (int64_t m = begin; m < end; ++m) {
            Rng r(mix64(seed_, static_cast<uint64_t>(m)));
            double l1 = 0.0;
            for (auto& v : row) {
                v = r.uniform(-1.0, 1.0);
                l1 += std::abs(v);
            }
            double y = row[kTeacherWidth];  // bias sees a constant input of 1
            for (int j = 0; j < kTeacherWidth; ++j) y += row[static_cast<size_t>(j)] * h2[j];
            const double amp = (m % kCorrChannels) < kShCoeffs ? 0.5 : 0.1;
            grid.data[static_cast<size_t>(m)] = y * amp / (1.2 * std::max(l1, 1e-12));
        }
    });
    return grid;
}

void LinearDecoder::validate() const {
    if (p_mean.size() <= 0) throw ValidationError("decoder pose mean is empty");
    if (pose_basis.rows() != p_mean.size())
        throw ValidationError("pose basis row count does not match pose dim");
    if (d() < 1) throw ValidationError("decoder needs at least one pose component");
    if (sh_d < 1 || sh_d > kShCoeffs)
        throw ValidationError("sh_d must be in [1, 27]");
    if (n_corr < 1) throw ValidationError("decoder has no correctives");
    if (corr_basis.rows() != d() + 1 ||
        corr_basis.cols() != static_cast<Eigen::Index>(n_corr) * inner_channels())
        throw ValidationError("corrective basis shape mismatch");
    if (sh_expand.rows() != sh_d || sh_expand.cols() != kShCoeffs)
        throw ValidationError("sh_expand shape mismatch");
    if (sh_mean.size() != kShCoeffs) throw ValidationError("sh_mean must have 27 entries");

    const Eigen::MatrixXd gram_p =
        pose_basis.transpose() * pose_basis - Eigen::MatrixXd::Identity(d(), d());
    if (gram_p.cwiseAbs().maxCoeff() > 1e-5)
        throw ValidationError("pose basis columns are not orthonormal");
    const Eigen::MatrixXd gram_s =
        sh_expand * sh_expand.transpose() - Eigen::MatrixXd::Identity(sh_d, sh_d);
    if (gram_s.cwiseAbs().maxCoeff() > 1e-5)
        throw ValidationError("sh_expand rows are not orthonormal");

    for (uint32_t v : lut)
        if (v >= static_cast<uint32_t>(n_corr))
            throw ValidationError("lut entry " + std::to_string(v) + " outside [0, " +
                                  std::to_string(n_corr) + ")");
    if (!p_mean.allFinite() || !pose_basis.allFinite() || !corr_basis.allFinite() ||
        !sh_expand.allFinite() || !sh_mean.allFinite())
        throw ValidationError("decoder contains non-finite values");
}

Eigen::VectorXd pose_code(const LinearDecoder& ld, const Pose& pose) {
    const Eigen::VectorXd p = pose.to_vector();
    if (p.size() != ld.p_mean.size())
        throw ValidationError("pose dim does not match decoder");
    Eigen::VectorXd code(ld.d() + 1);
    code[0] = 1.0;
    code.tail(ld.d()) = ld.pose_basis.transpose() * (p - ld.p_mean);
    return code;
}

std::vector<double> expand_raw(const Eigen::MatrixXd& sh_expand, const Eigen::VectorXd& sh_mean,
                               int n_corr, int sh_d, const Eigen::RowVectorXd& raw) {
    const int inner = kGeoChannels + sh_d;
    if (raw.size() != static_cast<Eigen::Index>(n_corr) * inner)
        throw ValidationError("raw corrective width mismatch");
    std::vector<double> out(static_cast<size_t>(n_corr) * kCorrChannels);
    for (int i = 0; i < n_corr; ++i) {
        const double* src = raw.data() + static_cast<size_t>(i) * inner;
        double* dst = out.data() + static_cast<size_t>(i) * kCorrChannels;
        for (int c = 0; c < kShCoeffs; ++c) {
            double v = sh_mean[c];
            for (int k = 0; k < sh_d; ++k) v += src[kGeoChannels + k] * sh_expand(k, c);
            dst[c] = v;
        }
        for (int g = 0; g < kGeoChannels; ++g) dst[kShCoeffs + g] = src[g];
    }
    return out;
}

std::vector<double> expand_raw(const LinearDecoder& ld, const Eigen::RowVectorXd& raw) {
    return expand_raw(ld.sh_expand, ld.sh_mean, ld.n_corr, ld.sh_d, raw);
}

Eigen::RowVectorXd linear_decode_raw(const LinearDecoder& ld, const Pose& pose) {
    return pose_code(ld, pose).transpose() * ld.corr_basis;
}

std::vector<double> linear_decode(const LinearDecoder& ld, const Pose& pose) {
    return expand_raw(ld, linear_decode_raw(ld, pose));
}

std::vector<double> gather_correctives(const std::vector<double>& corr,
                                       const std::vector<uint32_t>& lut) {
    if (corr.size() % kCorrChannels != 0)
        throw ValidationError("corrective buffer size is not a multiple of 37");
    const size_t n = corr.size() / kCorrChannels;
    std::vector<double> out(lut.size() * kCorrChannels);
    for (size_t x = 0; x < lut.size(); ++x) {
        if (lut[x] >= n)
            throw ValidationError("lut index " + std::to_string(lut[x]) +
                                  " out of range for " + std::to_string(n) + " correctives");
        std::copy_n(corr.data() + static_cast<size_t>(lut[x]) * kCorrChannels, kCorrChannels,
                    out.data() + x * kCorrChannels);
    }
    return out;
}

}  // namespace sqzm
