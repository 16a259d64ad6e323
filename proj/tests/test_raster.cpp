#include "doctest.h"

#include <cmath>

#include "sqzm/raster.hpp"

#include "sqzm/common.hpp"

using namespace sqzm;

namespace {

Camera front_camera(int w = 64, int h = 64) {
    Camera cam;
    cam.fx = cam.fy = 60.f;
    cam.cx = w / 2.f;
    cam.cy = h / 2.f;
    cam.width = w;
    cam.height = h;
    return cam;  // identity pose: looks down +z from the origin
}

Gaussian blob(const Eigen::Vector3f& mu, float sigma, float delta) {
    Gaussian g;
    g.mu = mu;
    g.rot = {1.f, 0.f, 0.f, 0.f};
    g.log_scale = {std::log(sigma), std::log(sigma), std::log(sigma)};
    g.delta = delta;
    g.sh.fill(0.f);
    return g;
}

SplatSet random_scene(uint64_t seed, int n_splats) {
    SplatSet s;
    s.grid_h = 1;
    s.grid_w = n_splats;
    s.mask.assign(static_cast<size_t>(n_splats), 1);
    Rng rng(seed);
    for (int i = 0; i < n_splats; ++i) {
        Gaussian g;
        g.mu = {static_cast<float>(rng.uniform(-0.5, 0.5)),
                static_cast<float>(rng.uniform(-0.5, 0.5)),
                static_cast<float>(rng.uniform(1.2, 3.0))};
        Eigen::Vector3f ax(static_cast<float>(rng.normal()), static_cast<float>(rng.normal()),
                           static_cast<float>(rng.normal()));
        g.rot = quat_from_rotvec(ax * 0.3f);
        for (auto& l : g.log_scale) l = std::log(static_cast<float>(rng.uniform(0.01, 0.08)));
        g.delta = static_cast<float>(rng.uniform(0.2, 0.7));
        for (auto& c : g.sh) c = static_cast<float>(rng.uniform(-0.4, 0.4));
        s.gaussians.push_back(g);
    }
    s.rebuild_uv_index();
    return s;
}

}  // namespace

TEST_CASE("camera jacobian matches finite differences of the projection") {
    const Camera cam = front_camera();
    const Eigen::Vector3f p(0.3f, -0.2f, 1.7f);
    const auto j = camera_jacobian(p, cam);
    REQUIRE(j.has_value());

    auto project = [&](const Eigen::Vector3f& q) {
        return Eigen::Vector2f(cam.fx * q.x() / q.z(), cam.fy * q.y() / q.z());
    };
    const float eps = 1e-3f;
    for (int k = 0; k < 3; ++k) {
        Eigen::Vector3f dp = Eigen::Vector3f::Zero();
        dp[k] = eps;
        const Eigen::Vector2f num = (project(p + dp) - project(p - dp)) / (2 * eps);
        CHECK(std::abs((*j)(0, k) - num[0]) < 1e-2f);
        CHECK(std::abs((*j)(1, k) - num[1]) < 1e-2f);
    }
}

TEST_CASE("camera jacobian culls points at or behind the near plane") {
    const Camera cam = front_camera();
    CHECK_FALSE(camera_jacobian(Eigen::Vector3f(0.f, 0.f, 0.005f), cam).has_value());
    CHECK_FALSE(camera_jacobian(Eigen::Vector3f(0.f, 0.f, -1.f), cam).has_value());
    CHECK(camera_jacobian(Eigen::Vector3f(0.f, 0.f, 0.05f), cam).has_value());
}

TEST_CASE("projected covariance of a centered isotropic blob is hand-computable") {
    const Camera cam = front_camera();
    const float sigma = 0.05f, z = 2.f;
    const Gaussian g = blob({0.f, 0.f, z}, sigma, 0.8f);
    const Eigen::Matrix2f cov = project_covariance(g, cam);
    // on-axis: J = diag(fx/z, fy/z, .), so var = (fx sigma / z)^2 + floor
    const float expect = std::pow(cam.fx * sigma / z, 2.f) + kCovFloorPx2;
    CHECK(cov(0, 0) == doctest::Approx(expect).epsilon(1e-4));
    CHECK(cov(1, 1) == doctest::Approx(expect).epsilon(1e-4));
    CHECK(std::abs(cov(0, 1)) < 1e-5f);
}

TEST_CASE("splat alpha: gaussian falloff, hard support cutoff, opacity clamp") {
    ProjectedQuad q;
    q.center_px = {10.f, 10.f};
    q.conic_a = 1.f;
    q.conic_b = 0.f;
    q.conic_c = 1.f;  // unit pixel covariance
    q.delta = 0.8f;

    CHECK(splat_alpha(q, {10.f, 10.f}) == doctest::Approx(0.8f));
    // one sigma out: delta * exp(-1/2)
    CHECK(splat_alpha(q, {11.f, 10.f}) == doctest::Approx(0.8 * std::exp(-0.5)).epsilon(1e-6));
    // support is cut exactly at Mahalanobis radius 3
    CHECK(splat_alpha(q, {10.f + 2.999f, 10.f}) > 0.f);
    CHECK(splat_alpha(q, {10.f + 3.001f, 10.f}) == 0.f);

    q.delta = 1.f;
    CHECK(splat_alpha(q, {10.f, 10.f}) == kAlphaClamp);
}

TEST_CASE("eval_sh constant term and clamping") {
    std::array<float, kShCoeffs> sh{};
    CHECK(eval_sh(sh, {0.f, 0.f, 1.f}) == Eigen::Vector3f(0.5f, 0.5f, 0.5f));

    sh[0] = 0.1f;  // dc, red channel: 0.5 + 0.28209479 * 0.1
    const Eigen::Vector3f c = eval_sh(sh, {0.f, 0.f, 1.f});
    CHECK(c[0] == doctest::Approx(0.5f + 0.28209479f * 0.1f).epsilon(1e-6));
    CHECK(c[1] == 0.5f);

    sh[0] = 100.f;
    CHECK(eval_sh(sh, {0.f, 0.f, 1.f})[0] == 1.f);
    sh[0] = -100.f;
    CHECK(eval_sh(sh, {0.f, 0.f, 1.f})[0] == 0.f);
}

TEST_CASE("eval_sh direction dependence is odd for the linear band") {
    std::array<float, kShCoeffs> sh{};
    sh[2 * 3 + 1] = 0.2f;  // basis 2 (linear in z), green channel
    const Eigen::Vector3f plus = eval_sh(sh, {0.f, 0.f, 1.f});
    const Eigen::Vector3f minus = eval_sh(sh, {0.f, 0.f, -1.f});
    CHECK(plus[1] - 0.5f == doctest::Approx(-(minus[1] - 0.5f)).epsilon(1e-5));
    CHECK(plus[1] != doctest::Approx(0.5f));
    // normalization: same direction, different magnitude, same color
    const Eigen::Vector3f scaled = eval_sh(sh, {0.f, 0.f, 10.f});
    CHECK(plus[1] == doctest::Approx(scaled[1]).epsilon(1e-6));
}

TEST_CASE("project_splatset culls and places centers at the pinhole pixel") {
    const Camera cam = front_camera();
    SplatSet s;
    s.grid_h = 1;
    s.grid_w = 3;
    s.mask = {1, 1, 1};
    s.gaussians.push_back(blob({0.2f, -0.1f, 2.f}, 0.03f, 0.5f));
    s.gaussians.push_back(blob({0.f, 0.f, -1.f}, 0.03f, 0.5f));   // behind camera
    s.gaussians.push_back(blob({50.f, 0.f, 2.f}, 0.03f, 0.5f));   // far offscreen
    s.rebuild_uv_index();

    const auto quads = project_splatset(s, cam);
    REQUIRE(quads.size() == 1);
    CHECK(quads[0].center_px[0] == doctest::Approx(cam.fx * 0.2f / 2.f + cam.cx).epsilon(1e-4));
    CHECK(quads[0].center_px[1] == doctest::Approx(cam.fy * -0.1f / 2.f + cam.cy).epsilon(1e-4));
    CHECK(quads[0].depth == doctest::Approx(2.f));
    CHECK(quads[0].x0 >= 0);
    CHECK(quads[0].x1 < cam.width);
}

TEST_CASE("depth_sort is stable on ties") {
    std::vector<ProjectedQuad> quads(3);
    quads[0].depth = 2.f;
    quads[0].delta = 0.1f;
    quads[1].depth = 1.f;
    quads[2].depth = 2.f;
    quads[2].delta = 0.9f;
    depth_sort(quads);
    CHECK(quads[0].depth == 1.f);
    CHECK(quads[1].delta == 0.1f);
    CHECK(quads[2].delta == 0.9f);
}

TEST_CASE("composite matches hand-computed two-layer blend and rejects unsorted") {
    // two full-screen flat quads: conic 0 means alpha = delta everywhere
    std::vector<ProjectedQuad> quads(2);
    for (auto& q : quads) {
        q.center_px = {2.f, 2.f};
        q.conic_a = q.conic_b = q.conic_c = 0.f;
        q.extent_px = 100.f;
        q.x0 = 0;
        q.x1 = 3;
        q.y0 = 0;
        q.y1 = 3;
    }
    quads[0].depth = 1.f;
    quads[0].delta = 0.6f;
    quads[0].color = {1.f, 0.f, 0.f};
    quads[1].depth = 2.f;
    quads[1].delta = 0.5f;
    quads[1].color = {0.f, 1.f, 0.f};

    const FrameBuffer fb = composite(quads, 4, 4);
    const float* px = fb.pixel(1, 2);
    CHECK(px[0] == doctest::Approx(0.6f).epsilon(1e-6));
    CHECK(px[1] == doctest::Approx(0.4f * 0.5f).epsilon(1e-6));
    CHECK(px[2] == 0.f);
    CHECK(fb.alpha[0] == doctest::Approx(0.6f + 0.4f * 0.5f).epsilon(1e-6));

    std::swap(quads[0], quads[1]);
    CHECK_THROWS_AS(composite(quads, 4, 4), ValidationError);
}

TEST_CASE("render equals the brute-force oracle on random scenes") {
    const Camera cam = front_camera();
    for (uint64_t seed : {1u, 2u, 3u}) {
        const SplatSet s = random_scene(seed, 24);
        const FrameBuffer fast = render(s, cam);
        const FrameBuffer slow = render_oracle(s, cam);
        float worst = 0.f;
        for (size_t i = 0; i < fast.rgb.size(); ++i)
            worst = std::max(worst, std::abs(fast.rgb[i] - slow.rgb[i]));
        for (size_t i = 0; i < fast.alpha.size(); ++i)
            worst = std::max(worst, std::abs(fast.alpha[i] - slow.alpha[i]));
        CHECK(worst <= 1e-5f);
    }
}

TEST_CASE("render is bit-identical for any worker count") {
    const Camera cam = front_camera();
    const SplatSet s = random_scene(7, 40);
    const FrameBuffer a = render(s, cam, {.workers = 1});
    const FrameBuffer b = render(s, cam, {.workers = 2});
    const FrameBuffer c = render(s, cam, {.workers = 8});
    CHECK(a.rgb == b.rgb);
    CHECK(a.rgb == c.rgb);
    CHECK(a.alpha == c.alpha);
}

TEST_CASE("accumulated per-pixel weight never exceeds one") {
    const Camera cam = front_camera();
    const SplatSet s = random_scene(11, 48);
    const FrameBuffer fb = render(s, cam);
    for (float a : fb.alpha) {
        CHECK(a <= 1.0 + 1e-9);
        CHECK(a >= 0.f);
    }
}

TEST_CASE("fit_camera frames the whole splat set") {
    const SplatSet s = random_scene(13, 30);
    const Camera cam = fit_camera(s, 96, 80);
    CHECK(cam.width == 96);
    CHECK(cam.height == 80);
    cam.validate();
    const auto quads = project_splatset(s, cam);
    CHECK(quads.size() == s.gaussians.size());  // nothing culled
    for (const auto& q : quads) {
        CHECK(q.center_px[0] >= 0.f);
        CHECK(q.center_px[0] <= 96.f);
        CHECK(q.center_px[1] >= 0.f);
        CHECK(q.center_px[1] <= 80.f);
    }
}

TEST_CASE("to_byte rounds and clamps") {
    CHECK(to_byte(0.f) == 0);
    CHECK(to_byte(1.f) == 255);
    CHECK(to_byte(-0.5f) == 0);
    CHECK(to_byte(2.f) == 255);
    CHECK(to_byte(0.5f) == 128);  // round(127.5)
    CHECK(to_byte(0.25f) == 64);  // round(63.75)
}
