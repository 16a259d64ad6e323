#include "sqzm/types.hpp"

#include <cmath>
#include <sstream>

namespace sqzm {

Eigen::Matrix3f quat_to_matrix(const Eigen::Vector4f& q) {
    const float w = q[0], x = q[1], y = q[2], z = q[3];
    Eigen::Matrix3f m;
    m << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
         2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return m;
}

Eigen::Vector4f matrix_to_quat(const Eigen::Matrix3f& m) {
    Eigen::Quaternionf q(m);
    q.normalize();
    if (q.w() < 0) q.coeffs() = -q.coeffs();
    // + 0.f canonicalizes -0 components so equal rotations compare bit-equal
    return Eigen::Vector4f(q.w() + 0.f, q.x() + 0.f, q.y() + 0.f, q.z() + 0.f);
}

Eigen::Vector4f quat_mul(const Eigen::Vector4f& a, const Eigen::Vector4f& b) {
    const float aw = a[0], ax = a[1], ay = a[2], az = a[3];
    const float bw = b[0], bx = b[1], by = b[2], bz = b[3];
    return Eigen::Vector4f(aw * bw - ax * bx - ay * by - az * bz,
                           aw * bx + ax * bw + ay * bz - az * by,
                           aw * by - ax * bz + ay * bw + az * bx,
                           aw * bz + ax * by - ay * bx + az * bw);
}

Eigen::Vector4f quat_from_rotvec(const Eigen::Vector3f& u) {
    const float theta = u.norm();
    if (theta < 1e-12f) return Eigen::Vector4f(1.f, 0.f, 0.f, 0.f);
    const float half = 0.5f * theta;
    const Eigen::Vector3f axis = u / theta;
    return Eigen::Vector4f(std::cos(half), std::sin(half) * axis.x(),
                           std::sin(half) * axis.y(), std::sin(half) * axis.z());
}

Eigen::Matrix3f Gaussian::covariance() const {
    const Eigen::Matrix3f r = quat_to_matrix(rot);
    const Eigen::Vector3f s = sigma();
    return r * s.cwiseProduct(s).asDiagonal() * r.transpose();
}

void SplatSet::rebuild_uv_index() {
    uv_index.clear();
    uv_index.reserve(gaussians.size());
    for (int r = 0; r < grid_h; ++r)
        for (int c = 0; c < grid_w; ++c)
            if (mask[static_cast<size_t>(r) * grid_w + c]) uv_index.emplace_back(r, c);
}

Eigen::VectorXd Pose::to_vector() const {
    Eigen::VectorXd v(vector_dim());
    int k = 0;
    for (const auto& q : joints)
        for (int i = 0; i < 4; ++i) v[k++] = q[i];
    for (int i = 0; i < 3; ++i) v[k++] = root_t[i];
    for (int i = 0; i < kAuxDim; ++i) v[k++] = aux[static_cast<size_t>(i)];
    return v;
}

Pose Pose::identity(int n_joints) {
    Pose p;
    p.joints.assign(static_cast<size_t>(n_joints), Eigen::Vector4f(1.f, 0.f, 0.f, 0.f));
    return p;
}

RigidTransform RigidTransform::inverse() const {
    RigidTransform inv;
    inv.rot = Eigen::Vector4f(rot[0], -rot[1], -rot[2], -rot[3]);
    inv.t = -(quat_to_matrix(inv.rot) * t);
    return inv;
}

RigidTransform RigidTransform::compose(const RigidTransform& other) const {
    RigidTransform out;
    out.rot = quat_mul(rot, other.rot);
    out.rot.normalize();
    out.t = quat_to_matrix(rot) * other.t + t;
    return out;
}

void Skeleton::validate() const {
    const int n = n_joints();
    if (n == 0) throw ValidationError("skeleton has no joints");
    int roots = 0;
    for (int j = 0; j < n; ++j) {
        const int p = parent[static_cast<size_t>(j)];
        if (p == -1) {
            ++roots;
            continue;
        }
        if (p < 0 || p >= n)
            throw ValidationError("joint " + std::to_string(j) + " has out-of-range parent");
        if (p >= j)
            throw ValidationError("joint " + std::to_string(j) +
                                  " has parent " + std::to_string(p) +
                                  "; parents must precede children");
    }
    if (roots != 1) throw ValidationError("skeleton must have exactly one root");
    if (rest.size() != static_cast<size_t>(n))
        throw ValidationError("rest transform count does not match joint count");
    for (size_t g = 0; g < skin_weights.size(); ++g) {
        const auto& sw = skin_weights[g];
        float sum = 0.f;
        for (int k = 0; k < 4; ++k) {
            if (sw.joint[static_cast<size_t>(k)] < 0) continue;
            if (sw.joint[static_cast<size_t>(k)] >= n)
                throw ValidationError("gaussian " + std::to_string(g) +
                                      " references joint out of range");
            const float w = sw.weight[static_cast<size_t>(k)];
            if (w < 0.f)
                throw ValidationError("gaussian " + std::to_string(g) + " has negative weight");
            sum += w;
        }
        if (std::abs(sum - 1.f) > 1e-6f)
            throw ValidationError("gaussian " + std::to_string(g) +
                                  " skin weights sum to " + std::to_string(sum));
    }
}

void Camera::validate() const {
    if (!(fx > 0.f) || !(fy > 0.f)) throw ValidationError("camera focal lengths must be positive");
    const Eigen::Matrix3f should_be_identity = R_c * R_c.transpose();
    if ((should_be_identity - Eigen::Matrix3f::Identity()).cwiseAbs().maxCoeff() > 1e-5f)
        throw ValidationError("camera rotation is not orthonormal");
    if (width <= 0 || height <= 0) throw ValidationError("camera image size must be positive");
}

Gaussian apply_corrective(const Gaussian& base, const double* corr) {
    for (int i = 0; i < kCorrChannels; ++i)
        if (!std::isfinite(corr[i])) throw ValidationError("corrective has non-finite values");

    Gaussian out = base;
    for (int i = 0; i < kShCoeffs; ++i) out.sh[static_cast<size_t>(i)] += static_cast<float>(corr[i]);
    Eigen::Vector4f q = base.rot;
    for (int i = 0; i < 4; ++i) q[i] += static_cast<float>(corr[27 + i]);
    const float n = q.norm();
    if (n < 1e-8f) throw ValidationError("rotation corrective cancels the base quaternion");
    out.rot = q / n;
    for (int i = 0; i < 3; ++i) out.mu[i] += static_cast<float>(corr[31 + i]);
    for (int i = 0; i < 3; ++i) out.log_scale[i] += static_cast<float>(corr[34 + i]);
    // delta intentionally untouched: opacity has no corrective
    return out;
}

Gaussian apply_corrective(const Gaussian& base, const std::array<double, kCorrChannels>& corr) {
    return apply_corrective(base, corr.data());
}

namespace {

bool finite(const Eigen::Vector3f& v) {
    return std::isfinite(v.x()) && std::isfinite(v.y()) && std::isfinite(v.z());
}

}  // namespace

ValidationReport validate_splatset(const SplatSet& s) {
    ValidationReport rep;
    auto add = [&rep](const std::string& msg) { rep.issues.push_back(msg); };

    if (s.mask.size() != static_cast<size_t>(s.grid_h) * s.grid_w)
        add("mask size does not match grid dims");
    size_t popcount = 0;
    for (uint8_t m : s.mask) popcount += m ? 1 : 0;
    if (popcount != s.gaussians.size())
        add("mask popcount " + std::to_string(popcount) + " != gaussian count " +
            std::to_string(s.gaussians.size()));
    if (s.uv_index.size() != s.gaussians.size())
        add("uv_index length != gaussian count");

    // uv_index must be the row-major enumeration of masked-true cells
    long prev = -1;
    for (size_t i = 0; i < s.uv_index.size(); ++i) {
        const auto [r, c] = s.uv_index[i];
        if (r < 0 || r >= s.grid_h || c < 0 || c >= s.grid_w) {
            add("uv_index[" + std::to_string(i) + "] out of grid");
            continue;
        }
        const long flat = static_cast<long>(r) * s.grid_w + c;
        if (flat <= prev) add("uv_index[" + std::to_string(i) + "] not row-major ascending");
        prev = flat;
        if (!s.mask[static_cast<size_t>(flat)])
            add("uv_index[" + std::to_string(i) + "] points at a masked-false cell");
    }

    for (size_t i = 0; i < s.gaussians.size(); ++i) {
        const Gaussian& g = s.gaussians[i];
        if (std::abs(g.rot.norm() - 1.f) > 1e-6f)
            add("gaussian " + std::to_string(i) + " quaternion norm " + std::to_string(g.rot.norm()));
        if (!finite(g.mu)) add("gaussian " + std::to_string(i) + " position not finite");
        if (!finite(g.log_scale)) add("gaussian " + std::to_string(i) + " scale not finite");
        if (!(g.delta >= 0.f && g.delta <= 1.f))
            add("gaussian " + std::to_string(i) + " opacity outside [0,1]");
        for (float c : g.sh)
            if (!std::isfinite(c)) {
                add("gaussian " + std::to_string(i) + " sh not finite");
                break;
            }
    }
    return rep;
}

}  // namespace sqzm
