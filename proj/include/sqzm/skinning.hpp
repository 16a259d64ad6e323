#pragma once

#include <vector>

#include <Eigen/Dense>

#include "sqzm/types.hpp"

namespace sqzm {

// Linear blend skinning. Correctives are applied in canonical space first,
// then each gaussian is posed by its blended bone matrix.

/// One skinning matrix: world transform of the posed joint times the inverse
/// of its rest transform, as a 3x4 [R|t] block.
using SkinningMatrix = Eigen::Matrix<float, 3, 4>;

/// Forward kinematics: per-joint skinning matrices for a pose.
/// Identity pose (unit joint quaternions, zero root translation) yields
/// identity matrices.
std::vector<SkinningMatrix> lbs_transforms(const Skeleton& skel, const Pose& pose);

/// Poses one gaussian by the weight-blended matrix A. The position moves by
/// A, the covariance by A's linear part: the polar rotation folds into rot
/// and the symmetric stretch's diagonal (in the gaussian frame) scales sigma;
/// shear is dropped. Opacity and SH are unchanged.
Gaussian skin_gaussian(const Gaussian& g, const SkinWeights& weights,
                       const std::vector<SkinningMatrix>& xforms);

/// Relative Frobenius error of the dropped-shear covariance approximation for
/// one gaussian under the given blend: |exact - approx|_F / |exact|_F.
double skin_shear_error(const Gaussian& g, const SkinWeights& weights,
                        const std::vector<SkinningMatrix>& xforms);

/// apply_corrective then skin_gaussian, per gaussian. `correctives` holds one
/// 37-vector per gaussian (row-major, may be empty for the no-corrective
/// path). Parallel over gaussians, deterministic.
SplatSet animate(const SplatSet& s, const std::vector<double>& correctives,
                 const Skeleton& skel, const Pose& pose, int workers = 1);

}  // namespace sqzm
