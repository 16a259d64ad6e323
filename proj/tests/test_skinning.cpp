#include "doctest.h"

#include <cmath>
#include <cstring>

#include "sqzm/io.hpp"
#include "sqzm/skinning.hpp"

using namespace sqzm;

namespace {

// Two-bone chain along +y: root at origin, child at (0, 1, 0).
Skeleton chain2() {
    Skeleton s;
    s.parent = {-1, 0};
    s.rest.resize(2);
    s.rest[0].rot = {1.f, 0.f, 0.f, 0.f};
    s.rest[0].t = {0.f, 0.f, 0.f};
    s.rest[1].rot = {1.f, 0.f, 0.f, 0.f};
    s.rest[1].t = {0.f, 1.f, 0.f};
    return s;
}

Gaussian unit_gaussian() {
    Gaussian g;
    g.mu = {0.f, 0.f, 0.f};
    g.rot = {1.f, 0.f, 0.f, 0.f};
    g.log_scale = {0.f, 0.f, 0.f};
    g.delta = 0.5f;
    g.sh.fill(0.1f);
    return g;
}

Eigen::Vector3f apply34(const SkinningMatrix& m, const Eigen::Vector3f& p) {
    return m.leftCols<3>() * p + m.col(3);
}

}  // namespace

TEST_CASE("identity pose gives identity skinning matrices") {
    const Skeleton s = chain2();
    const auto xf = lbs_transforms(s, Pose::identity(2));
    REQUIRE(xf.size() == 2);
    for (const auto& m : xf) {
        CHECK((m.leftCols<3>() - Eigen::Matrix3f::Identity()).norm() < 1e-6f);
        CHECK(m.col(3).norm() < 1e-6f);
    }
}

TEST_CASE("fk matches a hand-worked elbow bend") {
    // Rotate the child joint 90 degrees about z. A point at the child's rest
    // location (0,1,0) stays fixed; a point at (0,2,0), one unit along the
    // bone, swings to (-1,1,0).
    const Skeleton s = chain2();
    Pose p = Pose::identity(2);
    p.joints[1] = quat_from_rotvec(Eigen::Vector3f(0.f, 0.f, 1.f) * 1.5707963f);
    const auto xf = lbs_transforms(s, p);

    CHECK(apply34(xf[0], Eigen::Vector3f(0.f, 2.f, 0.f)).isApprox(
        Eigen::Vector3f(0.f, 2.f, 0.f), 1e-5f));
    CHECK((apply34(xf[1], Eigen::Vector3f(0.f, 1.f, 0.f)) - Eigen::Vector3f(0.f, 1.f, 0.f))
              .norm() < 1e-5f);
    CHECK((apply34(xf[1], Eigen::Vector3f(0.f, 2.f, 0.f)) - Eigen::Vector3f(-1.f, 1.f, 0.f))
              .norm() < 1e-5f);
}

TEST_CASE("root rotation spins the whole chain about the root") {
    const Skeleton s = chain2();
    Pose p = Pose::identity(2);
    p.joints[0] = quat_from_rotvec(Eigen::Vector3f(0.f, 0.f, 1.f) * 1.5707963f);
    p.root_t = {0.5f, 0.f, 0.f};
    const auto xf = lbs_transforms(s, p);
    // point at (0,1,0): rotates to (-1,0,0), then +0.5 x; both joints agree
    const Eigen::Vector3f expect(-0.5f, 0.f, 0.f);
    CHECK((apply34(xf[0], Eigen::Vector3f(0.f, 1.f, 0.f)) - expect).norm() < 1e-5f);
    CHECK((apply34(xf[1], Eigen::Vector3f(0.f, 1.f, 0.f)) - expect).norm() < 1e-5f);
}

TEST_CASE("parent rotation carries children, grandchild offsets compose") {
    // Three joints in a line; bend the middle one.
    Skeleton s;
    s.parent = {-1, 0, 1};
    s.rest.resize(3);
    for (auto& r : s.rest) r.rot = {1.f, 0.f, 0.f, 0.f};
    s.rest[0].t = {0.f, 0.f, 0.f};
    s.rest[1].t = {0.f, 1.f, 0.f};
    s.rest[2].t = {0.f, 2.f, 0.f};
    Pose p = Pose::identity(3);
    p.joints[1] = quat_from_rotvec(Eigen::Vector3f(0.f, 0.f, 1.f) * 1.5707963f);
    const auto xf = lbs_transforms(s, p);
    // the grandchild's rest position (0,2,0) is 1 above the bent joint: it
    // lands at (-1,1,0), and the grandchild matrix must map it there too
    CHECK((apply34(xf[2], Eigen::Vector3f(0.f, 2.f, 0.f)) - Eigen::Vector3f(-1.f, 1.f, 0.f))
              .norm() < 1e-5f);
}

TEST_CASE("lbs_transforms validates its inputs") {
    const Skeleton s = chain2();
    CHECK_THROWS_AS(lbs_transforms(s, Pose::identity(3)), ValidationError);
    Pose bad = Pose::identity(2);
    bad.joints[0] = {0.5f, 0.f, 0.f, 0.f};  // not unit
    CHECK_THROWS_AS(lbs_transforms(s, bad), ValidationError);
}

TEST_CASE("skin_gaussian with one rigid bone rotates mean, frame, not scale") {
    const Skeleton s = chain2();
    Pose p = Pose::identity(2);
    p.joints[0] = quat_from_rotvec(Eigen::Vector3f(1.f, 0.f, 0.f) * 0.7f);
    p.root_t = {0.f, 0.2f, -0.1f};
    const auto xf = lbs_transforms(s, p);

    Gaussian g = unit_gaussian();
    g.mu = {0.1f, 0.4f, -0.2f};
    g.log_scale = {std::log(0.5f), std::log(1.5f), std::log(2.f)};
    SkinWeights w;
    w.joint = {0, -1, -1, -1};
    w.weight = {1.f, 0.f, 0.f, 0.f};

    const Gaussian out = skin_gaussian(g, w, xf);
    CHECK((out.mu - apply34(xf[0], g.mu)).norm() < 1e-5f);
    // rigid: scales unchanged, covariance conjugated exactly
    for (int i = 0; i < 3; ++i)
        CHECK(out.log_scale[i] == doctest::Approx(g.log_scale[i]).epsilon(1e-4));
    const Eigen::Matrix3f r = xf[0].leftCols<3>();
    CHECK((out.covariance() - r * g.covariance() * r.transpose()).norm() < 1e-4f);
    CHECK(skin_shear_error(g, w, xf) < 1e-6);
    CHECK(out.delta == g.delta);
    CHECK(out.sh == g.sh);
}

TEST_CASE("blended skinning matches the exact covariance when shear is small") {
    const Skeleton s = chain2();
    Pose p = Pose::identity(2);
    p.joints[1] = quat_from_rotvec(Eigen::Vector3f(0.f, 0.f, 1.f) * 0.3f);
    const auto xf = lbs_transforms(s, p);

    Gaussian g = unit_gaussian();
    g.mu = {0.05f, 1.f, 0.f};
    SkinWeights w;
    w.joint = {0, 1, -1, -1};
    w.weight = {0.5f, 0.5f, 0.f, 0.f};

    const Gaussian out = skin_gaussian(g, w, xf);
    // blended linear part
    Eigen::Matrix<float, 3, 4> blend = 0.5f * xf[0] + 0.5f * xf[1];
    CHECK((out.mu - apply34(blend, g.mu)).norm() < 1e-5f);
    const Eigen::Matrix3f exact =
        blend.leftCols<3>() * g.covariance() * blend.leftCols<3>().transpose();
    const double rel = (out.covariance() - exact).norm() / exact.norm();
    // the small-angle blend has little shear; the approximation's own error
    // estimate must agree with the measured one
    CHECK(rel < 0.05);
    CHECK(skin_shear_error(g, w, xf) == doctest::Approx(rel).epsilon(1e-3));
}

TEST_CASE("animate applies correctives before posing") {
    Skeleton s = chain2();
    SplatSet set;
    set.grid_h = 1;
    set.grid_w = 2;
    set.mask = {1, 1};
    set.gaussians.assign(2, unit_gaussian());
    set.gaussians[1].mu = {0.f, 1.f, 0.f};
    set.rebuild_uv_index();
    s.skin_weights.resize(2);
    s.skin_weights[0].joint = {0, -1, -1, -1};
    s.skin_weights[0].weight = {1.f, 0.f, 0.f, 0.f};
    s.skin_weights[1].joint = {1, -1, -1, -1};
    s.skin_weights[1].weight = {1.f, 0.f, 0.f, 0.f};

    std::vector<double> corr(2 * kCorrChannels, 0.0);
    corr[31] = 0.25;                      // translate gaussian 0 by +x
    corr[kCorrChannels + 34] = 0.5;       // scale gaussian 1 in x

    Pose p = Pose::identity(2);
    p.root_t = {0.f, 0.f, 1.f};
    const SplatSet out = animate(set, corr, s, p, 1);
    REQUIRE(out.size() == 2);
    CHECK((out.gaussians[0].mu - Eigen::Vector3f(0.25f, 0.f, 1.f)).norm() < 1e-5f);
    CHECK(out.gaussians[1].log_scale[0] == doctest::Approx(0.5f).epsilon(1e-5));
    CHECK(out.mask == set.mask);

    // empty corrective vector means the no-corrective path
    const SplatSet out2 = animate(set, {}, s, p, 1);
    CHECK((out2.gaussians[0].mu - Eigen::Vector3f(0.f, 0.f, 1.f)).norm() < 1e-6f);

    std::vector<double> bad(kCorrChannels, 0.0);  // wrong count
    CHECK_THROWS_AS(animate(set, bad, s, p, 1), ValidationError);
}

TEST_CASE("animate is bit-identical across worker counts") {
    Skeleton s = chain2();
    SplatSet set;
    set.grid_h = 4;
    set.grid_w = 4;
    set.mask.assign(16, 1);
    Rng rng(5);
    for (int i = 0; i < 16; ++i) {
        Gaussian g = unit_gaussian();
        g.mu = {static_cast<float>(rng.uniform(-1, 1)), static_cast<float>(rng.uniform(0, 2)),
                static_cast<float>(rng.uniform(-1, 1))};
        set.gaussians.push_back(g);
        SkinWeights w;
        w.joint = {static_cast<int32_t>(i % 2), static_cast<int32_t>((i + 1) % 2), -1, -1};
        const float a = static_cast<float>(rng.uniform());
        w.weight = {a, 1.f - a, 0.f, 0.f};
        s.skin_weights.push_back(w);
    }
    set.rebuild_uv_index();
    Pose p = Pose::identity(2);
    p.joints[1] = quat_from_rotvec(Eigen::Vector3f(0.3f, 0.2f, 0.9f).normalized() * 0.6f);

    const SplatSet a = animate(set, {}, s, p, 1);
    const SplatSet b = animate(set, {}, s, p, 7);
    for (size_t i = 0; i < a.gaussians.size(); ++i) {
        CHECK(a.gaussians[i].mu == b.gaussians[i].mu);
        CHECK(a.gaussians[i].rot == b.gaussians[i].rot);
        CHECK(a.gaussians[i].log_scale == b.gaussians[i].log_scale);
    }
}

// Structural guarantee, not a tolerance check: fk in double cancels the
// rest-offset roundtrip, the synthesized weights are dyadic so pairs blend to
// exactly 1, and the stretch increment is evaluated in deviation form. Any
// regression here shows up as subtle identity-pose jitter downstream.
TEST_CASE("identity pose plus zero correctives returns the input bits") {
    const Avatar av = synth_avatar(SynthConfig{6, 12, 21});
    const SplatSet out = animate(av.splats, {}, av.skeleton, Pose::identity(av.n_joints()));
    REQUIRE(out.size() == av.splats.size());
    for (size_t i = 0; i < out.size(); ++i) {
        const Gaussian& x = av.splats.gaussians[i];
        const Gaussian& y = out.gaussians[i];
        CHECK(std::memcmp(x.mu.data(), y.mu.data(), 3 * sizeof(float)) == 0);
        CHECK(std::memcmp(x.rot.data(), y.rot.data(), 4 * sizeof(float)) == 0);
        CHECK(std::memcmp(x.log_scale.data(), y.log_scale.data(), 3 * sizeof(float)) == 0);
        CHECK(x.delta == y.delta);
        CHECK(std::memcmp(x.sh.data(), y.sh.data(), x.sh.size() * sizeof(float)) == 0);
    }
}
