#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sqzm/decoder.hpp"
#include "sqzm/types.hpp"

namespace sqzm {

struct PcaResult {
    Eigen::VectorXd mean;
    Eigen::MatrixXd basis;      // n x d, orthonormal columns, descending variance
    Eigen::VectorXd explained;  // variance captured per component
    bool degenerate = false;    // a kept component has (numerically) zero variance
};

/// PCA over the rows of X (F samples x n features). Basis columns are
/// sign-fixed: each column's largest-magnitude entry is positive.
/// Throws if F < 2 or d > min(F-1, n).
PcaResult pca_fit(const Eigen::MatrixXd& x, int d);

/// argmin_B |C B - Y|_F via Householder QR, matching the normal-equation
/// solution (C^T C)^-1 C^T Y on well-conditioned inputs. Rank-deficient C
/// falls back to ridge-regularized normal equations with
/// lambda = 1e-8 trace(C^T C) / cols, reported through the out-params.
Eigen::MatrixXd solve_basis(const Eigen::MatrixXd& c, const Eigen::MatrixXd& y,
                            bool* ridged = nullptr, double* lambda_out = nullptr);

struct DistillConfig {
    int d = 32;                 // pose PCA components (bias column added on top)
    int sh_d = 6;               // SH PCA components
    std::vector<uint32_t> lut;  // non-empty: coarse teacher, shared correctives
    uint64_t split_seed = 1;    // 80/20 train/holdout frame split
    int workers = 1;
};

struct DistillReport {
    std::array<double, kCorrChannels> rms_train{};
    std::array<double, kCorrChannels> rms_holdout{};  // NaN when every frame trains
    double sh_rms_holdout = 0.0;      // aggregate decode-vs-teacher RMS, SH channels
    double sh_truncation_rms = 0.0;   // holdout SH PCA reconstruction RMS
    // the two SH stats fall back to the train set when there is no holdout
    double cond_code = 0.0;           // condition number of the design matrix
    double lambda_ridge = 0.0;
    bool ridged = false;
    bool pose_pca_degenerate = false;
    bool sh_pca_degenerate = false;
    std::vector<double> pose_explained;
    std::vector<double> sh_explained;
    int n_train = 0;
    int n_holdout = 0;
};

struct DistillResult {
    LinearDecoder decoder;
    DistillReport report;
};

/// Fits a LinearDecoder to the teacher: decode every pose, take masked rows
/// (or every coarse cell when cfg.lut is set), SH-PCA the 27 SH channels down
/// to sh_d codes, pose-PCA to d components, then least-squares the bias-
/// augmented pose codes onto the 10+sh_d channel targets. Residuals are
/// reported on a seeded 80/20 frame split. `mask` must match the teacher grid
/// and is ignored when cfg.lut is set.
/// Underdetermined datasets stay legal: missing PCA directions are filled by
/// an orthonormal completion and the solve takes the flagged ridge path. A
/// single frame trains with no holdout.
DistillResult distill(const TeacherDecoder& teacher, const std::vector<Pose>& poses,
                      const std::vector<uint8_t>& mask, const DistillConfig& cfg);

/// Deterministic low-discrepancy pose sampler: per-joint rotation vectors
/// bounded by 45 degrees, root translation within +-0.1, aux in [-1,1].
std::vector<Pose> sample_poses(int n_joints, int count, uint64_t seed);

/// Report as key=value lines (channel arrays comma-separated).
std::string report_text(const DistillReport& rep);

}  // namespace sqzm
