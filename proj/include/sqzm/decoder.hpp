#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "sqzm/types.hpp"

namespace sqzm {

/// Seeded reference decoder: pose vector -> two hidden layers (width 256,
/// hardswish) -> affine map to an h x w x 37 corrective grid. Weights are
/// deterministic functions of the seed; the final layer is materialized
/// row-by-row on demand so large grids never hold the full weight matrix.
/// Hidden and final rows are L1-normalized so outputs stay within +-0.5 on
/// SH channels and +-0.1 on geometry channels. With `linear` set the
/// activations are bypassed and the decoder is exactly affine in the pose
/// vector.
class TeacherDecoder {
public:
    TeacherDecoder(int n_joints, int grid_h, int grid_w, uint64_t seed, bool linear = false);

    int n_joints() const { return n_joints_; }
    int pose_dim() const { return pose_dim_; }
    int grid_h() const { return grid_h_; }
    int grid_w() const { return grid_w_; }
    bool linear() const { return linear_; }
    uint64_t seed() const { return seed_; }

    /// Deterministic given (seed, pose); identical for any worker count.
    CorrectiveGrid decode(const Pose& pose, int workers = 1) const;

private:
    int n_joints_;
    int grid_h_;
    int grid_w_;
    int pose_dim_;
    uint64_t seed_;
    bool linear_;
    Eigen::MatrixXd w1_, w2_;
    Eigen::VectorXd b1_, b2_;
};

/// Affine corrective decoder. Decode is two stages:
///   code = [1, (p - p_mean) . pose_basis]                 (length d+1)
///   raw  = code . corr_basis                              (n_corr x (10 + sh_d))
/// then per corrective the sh_d SH codes expand to 27 SH values through
/// sh_expand/sh_mean while the 10 geometry channels pass through. Raw channel
/// layout per corrective: [0..10) geometry (quaternion, translation,
/// log-scale), [10..10+sh_d) SH codes.
struct LinearDecoder {
    Eigen::VectorXd p_mean;      // pose_dim
    Eigen::MatrixXd pose_basis;  // pose_dim x d, orthonormal columns
    Eigen::MatrixXd corr_basis;  // (d+1) x (n_corr * (10 + sh_d))
    Eigen::MatrixXd sh_expand;   // sh_d x 27, orthonormal rows
    Eigen::VectorXd sh_mean;     // 27
    std::vector<uint32_t> lut;   // optional per-gaussian corrective index
    int n_corr = 0;
    int sh_d = 0;

    int d() const { return static_cast<int>(pose_basis.cols()); }
    int pose_dim() const { return static_cast<int>(p_mean.size()); }
    int inner_channels() const { return kGeoChannels + sh_d; }

    /// Throws ValidationError on inconsistent shapes, non-orthonormal bases,
    /// or lut entries outside [0, n_corr).
    void validate() const;
};

/// PoseCode [1, (p - p_mean) . pose_basis]; element 0 is exactly 1.
Eigen::VectorXd pose_code(const LinearDecoder& ld, const Pose& pose);

/// Stage-2 expansion of a raw (n_corr x (10+sh_d)) row vector into flat
/// n_corr x 37 correctives, layout [27 SH | 10 geometry] per row. Shared by
/// the float and quantized decode paths.
std::vector<double> expand_raw(const Eigen::MatrixXd& sh_expand, const Eigen::VectorXd& sh_mean,
                               int n_corr, int sh_d, const Eigen::RowVectorXd& raw);
std::vector<double> expand_raw(const LinearDecoder& ld, const Eigen::RowVectorXd& raw);

/// Stage-1 output code . corr_basis, n_corr x (10+sh_d) flattened.
Eigen::RowVectorXd linear_decode_raw(const LinearDecoder& ld, const Pose& pose);

/// Full decode: flat n_corr x 37 correctives for one pose.
std::vector<double> linear_decode(const LinearDecoder& ld, const Pose& pose);

/// out[x] = corr[lut[x]]; corr is flat n x 37. Out-of-range index -> error.
std::vector<double> gather_correctives(const std::vector<double>& corr,
                                       const std::vector<uint32_t>& lut);

}  // namespace sqzm
