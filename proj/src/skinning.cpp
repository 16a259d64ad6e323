#include "sqzm/skinning.hpp"

#include <cmath>

#include "sqzm/common.hpp"

namespace sqzm {

namespace {

// FK composes in double so rest-offset roundtrips cancel exactly and the
// identity pose yields skinning matrices that are bit-exactly [I | 0].
struct XformD {
    Eigen::Vector4d rot = Eigen::Vector4d(1.0, 0.0, 0.0, 0.0);
    Eigen::Vector3d t = Eigen::Vector3d::Zero();
};

Eigen::Vector4d quat_mul_d(const Eigen::Vector4d& a, const Eigen::Vector4d& b) {
    const double aw = a[0], ax = a[1], ay = a[2], az = a[3];
    const double bw = b[0], bx = b[1], by = b[2], bz = b[3];
    return Eigen::Vector4d(aw * bw - ax * bx - ay * by - az * bz,
                           aw * bx + ax * bw + ay * bz - az * by,
                           aw * by - ax * bz + ay * bw + az * bx,
                           aw * bz + ax * by - ay * bx + az * bw);
}

Eigen::Matrix3d quat_to_matrix_d(const Eigen::Vector4d& q) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Eigen::Matrix3d m;
    m << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
         2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return m;
}

XformD compose_d(const XformD& a, const XformD& b) {
    return {quat_mul_d(a.rot, b.rot), a.t + quat_to_matrix_d(a.rot) * b.t};
}

XformD inverse_d(const XformD& a) {
    XformD inv;
    inv.rot = Eigen::Vector4d(a.rot[0], -a.rot[1], -a.rot[2], -a.rot[3]);
    inv.t = -(quat_to_matrix_d(inv.rot) * a.t);
    return inv;
}

XformD promote(const RigidTransform& r) {
    return {r.rot.cast<double>(), r.t.cast<double>()};
}

}  // namespace

std::vector<SkinningMatrix> lbs_transforms(const Skeleton& skel, const Pose& pose) {
    skel.validate();
    const int n = skel.n_joints();
    if (static_cast<int>(pose.joints.size()) != n)
        throw ValidationError("pose joint count does not match skeleton");
    for (const auto& q : pose.joints)
        if (std::abs(q.norm() - 1.f) > 1e-5f)
            throw ValidationError("pose quaternion is not unit norm");

    // world[j] = world[parent] * local_offset[j] * rotation(pose q_j)
    std::vector<XformD> world(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j) {
        XformD posed;
        posed.rot = pose.joints[static_cast<size_t>(j)].cast<double>();
        const int p = skel.parent[static_cast<size_t>(j)];
        if (p < 0) {
            world[static_cast<size_t>(j)] =
                compose_d(promote(skel.rest[static_cast<size_t>(j)]), posed);
            world[static_cast<size_t>(j)].t += pose.root_t.cast<double>();
        } else {
            const XformD local = compose_d(inverse_d(promote(skel.rest[static_cast<size_t>(p)])),
                                           promote(skel.rest[static_cast<size_t>(j)]));
            world[static_cast<size_t>(j)] =
                compose_d(compose_d(world[static_cast<size_t>(p)], local), posed);
        }
    }

    std::vector<SkinningMatrix> out(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j) {
        const XformD skin =
            compose_d(world[static_cast<size_t>(j)],
                      inverse_d(promote(skel.rest[static_cast<size_t>(j)])));
        out[static_cast<size_t>(j)].block<3, 3>(0, 0) = quat_to_matrix_d(skin.rot).cast<float>();
        out[static_cast<size_t>(j)].col(3) = skin.t.cast<float>();
    }
    return out;
}

namespace {

SkinningMatrix blend(const SkinWeights& weights, const std::vector<SkinningMatrix>& xforms) {
    SkinningMatrix a = SkinningMatrix::Zero();
    for (int k = 0; k < 4; ++k) {
        const int j = weights.joint[static_cast<size_t>(k)];
        if (j < 0) continue;
        a += weights.weight[static_cast<size_t>(k)] * xforms[static_cast<size_t>(j)];
    }
    return a;
}

// Polar decomposition A = R * S of the blended linear part, via SVD with a
// determinant fix so R is a proper rotation.
void polar(const Eigen::Matrix3f& a, Eigen::Matrix3f& rot, Eigen::Matrix3f& stretch) {
    Eigen::JacobiSVD<Eigen::Matrix3f> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3f u = svd.matrixU();
    Eigen::Matrix3f v = svd.matrixV();
    Eigen::Vector3f sv = svd.singularValues();
    if ((u * v.transpose()).determinant() < 0.f) {
        u.col(2) = -u.col(2);
        sv[2] = -sv[2];
    }
    rot = u * v.transpose();
    stretch = v * sv.asDiagonal() * v.transpose();
}

}  // namespace

Gaussian skin_gaussian(const Gaussian& g, const SkinWeights& weights,
                       const std::vector<SkinningMatrix>& xforms) {
    const SkinningMatrix a = blend(weights, xforms);
    const Eigen::Matrix3f lin = a.block<3, 3>(0, 0);

    Gaussian out = g;
    out.mu = lin * g.mu + a.col(3);

    Eigen::Matrix3f rot, stretch;
    polar(lin, rot, stretch);
    // product of unit quaternions; not renormalized so rigid blends keep the
    // input bits
    out.rot = quat_mul(matrix_to_quat(rot), g.rot);

    // principal stretches in the gaussian's own frame, shear dropped; the
    // deviation form makes the increment exactly zero under rigid blends
    const Eigen::Matrix3f rg = quat_to_matrix(g.rot);
    const Eigen::Matrix3f dev =
        rg.transpose() * (stretch - Eigen::Matrix3f::Identity()) * rg;
    for (int i = 0; i < 3; ++i) {
        const float d = std::max(1.f + dev(i, i), 1e-12f);
        out.log_scale[i] = g.log_scale[i] + std::log(d);
    }
    return out;
}

double skin_shear_error(const Gaussian& g, const SkinWeights& weights,
                        const std::vector<SkinningMatrix>& xforms) {
    const SkinningMatrix a = blend(weights, xforms);
    const Eigen::Matrix3d lin = a.block<3, 3>(0, 0).cast<double>();
    const Eigen::Matrix3d exact = lin * g.covariance().cast<double>() * lin.transpose();
    const Eigen::Matrix3d approx = skin_gaussian(g, weights, xforms).covariance().cast<double>();
    const double denom = exact.norm();
    if (denom == 0.0) return 0.0;
    return (exact - approx).norm() / denom;
}

SplatSet animate(const SplatSet& s, const std::vector<double>& correctives,
                 const Skeleton& skel, const Pose& pose, int workers) {
    const size_t n = s.gaussians.size();
    const bool with_corr = !correctives.empty();
    if (with_corr && correctives.size() != n * kCorrChannels)
        throw ValidationError("corrective count does not match gaussian count");
    if (skel.skin_weights.size() != n)
        throw ValidationError("skin weight count does not match gaussian count");

    const std::vector<SkinningMatrix> xforms = lbs_transforms(skel, pose);

    SplatSet out = s;
    parallel_for_chunks(static_cast<int64_t>(n), workers, [&](int64_t begin, int64_t end) {
        for (int64_t i = begin; i < end; ++i) {
            const size_t u = static_cast<size_t>(i);
            Gaussian g = s.gaussians[u];
            if (with_corr) g = apply_corrective(g, correctives.data() + u * kCorrChannels);
            out.gaussians[u] = skin_gaussian(g, skel.skin_weights[u], xforms);
        }
    });
    return out;
}

}  // namespace sqzm
