#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sqzm/common.hpp"

namespace sqzm {

// Corrective channel layout, shared by grids and decoders:
//   [0..27)  spherical harmonics deltas (9 basis functions x 3 channels)
//   [27..31) rotation delta (additive quaternion, w x y z)
//   [31..34) translation delta
//   [34..37) log-scale delta
inline constexpr int kCorrChannels = 37;
inline constexpr int kShCoeffs = 27;
inline constexpr int kShBasis = 9;
inline constexpr int kGeoChannels = 10;
inline constexpr int kAuxDim = 32;

/// One anisotropic 3D Gaussian primitive. Scale is kept in log-space so that
/// additive correctives can never drive sigma negative.
struct Gaussian {
    Eigen::Vector3f mu = Eigen::Vector3f::Zero();
    Eigen::Vector4f rot = Eigen::Vector4f(1.f, 0.f, 0.f, 0.f);  // unit quaternion (w,x,y,z)
    Eigen::Vector3f log_scale = Eigen::Vector3f::Zero();
    float delta = 1.f;  // opacity density in [0,1]
    std::array<float, kShCoeffs> sh{};  // sh[basis*3 + channel]

    Eigen::Vector3f sigma() const {
        return Eigen::Vector3f(std::exp(log_scale.x()), std::exp(log_scale.y()),
                               std::exp(log_scale.z()));
    }
    void set_sigma(const Eigen::Vector3f& s) {
        log_scale = Eigen::Vector3f(std::log(s.x()), std::log(s.y()), std::log(s.z()));
    }

    /// World-space 3x3 covariance R diag(sigma^2) R^T.
    Eigen::Matrix3f covariance() const;
};

/// Rotation matrix of a unit quaternion (w,x,y,z).
Eigen::Matrix3f quat_to_matrix(const Eigen::Vector4f& q);

/// Quaternion (w,x,y,z) of a rotation matrix, w >= 0.
Eigen::Vector4f matrix_to_quat(const Eigen::Matrix3f& m);

/// Hamilton product a*b of (w,x,y,z) quaternions.
Eigen::Vector4f quat_mul(const Eigen::Vector4f& a, const Eigen::Vector4f& b);

/// Unit quaternion of a rotation vector (axis * angle, radians).
Eigen::Vector4f quat_from_rotvec(const Eigen::Vector3f& u);

/// Gaussians laid out over a UV grid. `gaussians[i]` lives at grid cell
/// `uv_index[i]`, the i-th true cell of `mask` in row-major order.
struct SplatSet {
    int grid_h = 0;
    int grid_w = 0;
    std::vector<uint8_t> mask;  // row-major, grid_h*grid_w
    std::vector<Gaussian> gaussians;
    std::vector<std::pair<int, int>> uv_index;  // (row, col) per gaussian

    size_t size() const { return gaussians.size(); }

    /// Rebuilds uv_index from the mask (row-major true cells).
    void rebuild_uv_index();
};

/// Skeleton joint rotations plus root translation and an opaque auxiliary
/// embedding. Flattened as [quats 4J | root_t 3 | aux 32] when fed to
/// decoders.
struct Pose {
    std::vector<Eigen::Vector4f> joints;  // unit quaternions (w,x,y,z)
    Eigen::Vector3f root_t = Eigen::Vector3f::Zero();
    std::array<float, kAuxDim> aux{};

    int vector_dim() const { return static_cast<int>(joints.size()) * 4 + 3 + kAuxDim; }
    Eigen::VectorXd to_vector() const;
    static Pose identity(int n_joints);
};

/// One rigid transform, rotation quaternion plus translation.
struct RigidTransform {
    Eigen::Vector4f rot = Eigen::Vector4f(1.f, 0.f, 0.f, 0.f);
    Eigen::Vector3f t = Eigen::Vector3f::Zero();

    Eigen::Vector3f apply(const Eigen::Vector3f& p) const {
        return quat_to_matrix(rot) * p + t;
    }
    RigidTransform inverse() const;
    RigidTransform compose(const RigidTransform& other) const;  // this ∘ other
};

/// Up to four (joint, weight) influences for one gaussian. Unused slots hold
/// joint = -1, weight = 0.
struct SkinWeights {
    std::array<int32_t, 4> joint{-1, -1, -1, -1};
    std::array<float, 4> weight{0.f, 0.f, 0.f, 0.f};
};

struct Skeleton {
    std::vector<int32_t> parent;            // -1 for root
    std::vector<RigidTransform> rest;       // rest-pose transform per joint, model space
    std::vector<SkinWeights> skin_weights;  // per gaussian

    int n_joints() const { return static_cast<int>(parent.size()); }

    /// Throws ValidationError if the parent array is not a rooted tree or a
    /// weight set is invalid.
    void validate() const;
};

/// Dense h x w x 37 grid of per-cell correction values.
struct CorrectiveGrid {
    int h = 0;
    int w = 0;
    std::vector<double> data;  // h*w*37, cell-major

    CorrectiveGrid() = default;
    CorrectiveGrid(int h_, int w_) : h(h_), w(w_), data(static_cast<size_t>(h_) * w_ * kCorrChannels, 0.0) {}

    double* cell(int r, int c) { return data.data() + (static_cast<size_t>(r) * w + c) * kCorrChannels; }
    const double* cell(int r, int c) const {
        return data.data() + (static_cast<size_t>(r) * w + c) * kCorrChannels;
    }
};

/// Pinhole camera. Maps world points by x_cam = R_c x + t_c, then
/// px = fx x/z + cx, py = fy y/z + cy.
struct Camera {
    float fx = 1.f, fy = 1.f;
    float cx = 0.f, cy = 0.f;
    Eigen::Matrix3f R_c = Eigen::Matrix3f::Identity();
    Eigen::Vector3f t_c = Eigen::Vector3f::Zero();
    int width = 0, height = 0;

    void validate() const;
};

/// Applies a 37-value corrective to a gaussian in canonical space. Opacity
/// has no corrective channel.
Gaussian apply_corrective(const Gaussian& base, const double* corr);
Gaussian apply_corrective(const Gaussian& base, const std::array<double, kCorrChannels>& corr);

/// Invariant report for a SplatSet; empty iff the set is valid.
struct ValidationReport {
    std::vector<std::string> issues;
    bool ok() const { return issues.empty(); }
};

ValidationReport validate_splatset(const SplatSet& s);

}  // namespace sqzm
