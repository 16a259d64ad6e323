#include "sqzm/raster.hpp"

#include <algorithm>
#include <cmath>

#include "sqzm/common.hpp"

namespace sqzm {

namespace {

constexpr int kTile = 16;

// Real SH basis values for degree 0..2, 3DGS coefficient ordering.
void sh_basis(const Eigen::Vector3f& d, float* b) {
    const float x = d.x(), y = d.y(), z = d.z();
    b[0] = 0.28209479177387814f;
    b[1] = -0.4886025119029199f * y;
    b[2] = 0.4886025119029199f * z;
    b[3] = -0.4886025119029199f * x;
    b[4] = 1.0925484305920792f * x * y;
    b[5] = -1.0925484305920792f * y * z;
    b[6] = 0.31539156525252005f * (3.f * z * z - 1.f);
    b[7] = -1.0925484305920792f * x * z;
    b[8] = 0.5462742152960396f * (x * x - y * y);
}

float max_eigenvalue_2x2(float a, float b, float c) {
    const float mid = 0.5f * (a + c);
    const float disc = std::sqrt(std::max(0.f, 0.25f * (a - c) * (a - c) + b * b));
    return mid + disc;
}

}  // namespace

std::optional<Eigen::Matrix<float, 2, 3>> camera_jacobian(const Eigen::Vector3f& p_cam,
                                                          const Camera& cam,
                                                          float near_plane) {
    const float z = p_cam.z();
    if (!(z > near_plane)) return std::nullopt;
    Eigen::Matrix<float, 2, 3> j;
    j << cam.fx / z, 0.f, -cam.fx * p_cam.x() / (z * z),
         0.f, cam.fy / z, -cam.fy * p_cam.y() / (z * z);
    return j;
}

Eigen::Matrix2f project_covariance(const Gaussian& g, const Camera& cam, float near_plane) {
    const Eigen::Vector3f p_cam = cam.R_c * g.mu + cam.t_c;
    const auto j = camera_jacobian(p_cam, cam, near_plane);
    if (!j) throw ValidationError("gaussian is behind the near plane");
    const Eigen::Matrix3f cov = g.covariance();
    if (!cov.allFinite()) throw ValidationError("gaussian covariance is not finite");
    const Eigen::Matrix<float, 2, 3> jr = (*j) * cam.R_c;
    Eigen::Matrix2f proj = jr * cov * jr.transpose();
    proj(0, 1) = proj(1, 0) = 0.5f * (proj(0, 1) + proj(1, 0));  // exact symmetry
    proj(0, 0) += kCovFloorPx2;
    proj(1, 1) += kCovFloorPx2;
    return proj;
}

float splat_alpha(const ProjectedQuad& quad, const Eigen::Vector2f& p) {
    const float dx = quad.center_px.x() - p.x();
    const float dy = quad.center_px.y() - p.y();
    const float power = 0.5f * (quad.conic_a * dx * dx + quad.conic_c * dy * dy) +
                        quad.conic_b * dx * dy;
    // support ends at the same Mahalanobis radius the bounding quad uses
    if (power > 0.5f * kExtentSigmas * kExtentSigmas) return 0.f;
    if (power < 0.f) return std::min(quad.delta, kAlphaClamp);
    return std::min(quad.delta * std::exp(-power), kAlphaClamp);
}

Eigen::Vector3f eval_sh(const std::array<float, kShCoeffs>& sh, Eigen::Vector3f view_dir) {
    const float n = view_dir.norm();
    if (n > 0.f) view_dir /= n;
    float basis[kShBasis];
    sh_basis(view_dir, basis);
    Eigen::Vector3f color(0.5f, 0.5f, 0.5f);
    for (int b = 0; b < kShBasis; ++b)
        for (int ch = 0; ch < 3; ++ch)
            color[ch] += basis[b] * sh[static_cast<size_t>(b * 3 + ch)];
    return color.cwiseMax(0.f).cwiseMin(1.f);
}

std::vector<ProjectedQuad> project_splatset(const SplatSet& s, const Camera& cam,
                                            const RenderOptions& opts) {
    cam.validate();
    const int n = static_cast<int>(s.gaussians.size());
    std::vector<ProjectedQuad> quads(static_cast<size_t>(n));
    std::vector<uint8_t> keep(static_cast<size_t>(n), 0);

    parallel_for_chunks(n, opts.workers, [&](int64_t begin, int64_t end) {
        for (int64_t i = begin; i < end; ++i) {
            const Gaussian& g = s.gaussians[static_cast<size_t>(i)];
            const Eigen::Vector3f p_cam = cam.R_c * g.mu + cam.t_c;
            const auto j = camera_jacobian(p_cam, cam, opts.near_plane);
            if (!j) continue;  // culled

            const Eigen::Matrix<float, 2, 3> jr = (*j) * cam.R_c;
            Eigen::Matrix2f cov = jr * g.covariance() * jr.transpose();
            cov(0, 1) = cov(1, 0) = 0.5f * (cov(0, 1) + cov(1, 0));
            cov(0, 0) += kCovFloorPx2;
            cov(1, 1) += kCovFloorPx2;
            const float det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(0, 1);
            if (!(det > 0.f) || !cov.allFinite()) continue;

            ProjectedQuad q;
            q.center_px = Eigen::Vector2f(cam.fx * p_cam.x() / p_cam.z() + cam.cx,
                                          cam.fy * p_cam.y() / p_cam.z() + cam.cy);
            const float inv_det = 1.f / det;
            q.conic_a = cov(1, 1) * inv_det;
            q.conic_b = -cov(0, 1) * inv_det;
            q.conic_c = cov(0, 0) * inv_det;
            q.extent_px = kExtentSigmas * std::sqrt(max_eigenvalue_2x2(cov(0, 0), cov(0, 1), cov(1, 1)));
            q.depth = p_cam.z();
            q.color = eval_sh(g.sh, p_cam);
            q.delta = g.delta;
            // pixel samples sit at integer+0.5; widen by one pixel so float
            // rounding can never shave the support boundary
            q.x0 = std::max(0, static_cast<int>(std::floor(q.center_px.x() - q.extent_px - 0.5f)));
            q.x1 = std::min(cam.width - 1,
                            static_cast<int>(std::ceil(q.center_px.x() + q.extent_px - 0.5f)) + 1);
            q.y0 = std::max(0, static_cast<int>(std::floor(q.center_px.y() - q.extent_px - 0.5f)));
            q.y1 = std::min(cam.height - 1,
                            static_cast<int>(std::ceil(q.center_px.y() + q.extent_px - 0.5f)) + 1);
            if (q.x0 > q.x1 || q.y0 > q.y1) continue;  // fully offscreen

            quads[static_cast<size_t>(i)] = q;
            keep[static_cast<size_t>(i)] = 1;
        }
    });

    std::vector<ProjectedQuad> out;
    out.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        if (keep[static_cast<size_t>(i)]) out.push_back(quads[static_cast<size_t>(i)]);
    return out;
}

void depth_sort(std::vector<ProjectedQuad>& quads) {
    std::stable_sort(quads.begin(), quads.end(),
                     [](const ProjectedQuad& a, const ProjectedQuad& b) { return a.depth < b.depth; });
}

namespace {

void check_sorted(const std::vector<ProjectedQuad>& quads) {
    for (size_t i = 1; i < quads.size(); ++i)
        if (quads[i].depth < quads[i - 1].depth)
            throw ValidationError("composite requires quads sorted ascending by depth");
}

// Composites one pixel region against the given quads (already depth sorted).
// `indices` may restrict and reorder-preserve the quad subset; box checks keep
// the arithmetic sequence identical to the unrestricted loop.
void composite_region(const std::vector<ProjectedQuad>& quads, const std::vector<int>& indices,
                      FrameBuffer& fb, int x0, int y0, int x1, int y1) {
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            const Eigen::Vector2f p(static_cast<float>(x) + 0.5f, static_cast<float>(y) + 0.5f);
            float T = 1.f;
            float r = 0.f, g = 0.f, b = 0.f;
            for (int qi : indices) {
                const ProjectedQuad& q = quads[static_cast<size_t>(qi)];
                if (x < q.x0 || x > q.x1 || y < q.y0 || y > q.y1) continue;
                const float a = splat_alpha(q, p);
                if (a <= 0.f) continue;
                r += T * a * q.color.x();
                g += T * a * q.color.y();
                b += T * a * q.color.z();
                T *= 1.f - a;
                if (T < kEarlyOutT) break;
            }
            float* px = fb.pixel(x, y);
            px[0] = r;
            px[1] = g;
            px[2] = b;
            fb.alpha[static_cast<size_t>(y) * fb.width + x] = 1.f - T;
        }
    }
}

}  // namespace

FrameBuffer composite(const std::vector<ProjectedQuad>& quads, int width, int height) {
    check_sorted(quads);
    FrameBuffer fb(width, height);
    if (width <= 0 || height <= 0) return fb;
    std::vector<int> all(quads.size());
    for (size_t i = 0; i < quads.size(); ++i) all[i] = static_cast<int>(i);
    composite_region(quads, all, fb, 0, 0, width - 1, height - 1);
    return fb;
}

FrameBuffer render(const SplatSet& s, const Camera& cam, const RenderOptions& opts) {
    std::vector<ProjectedQuad> quads = project_splatset(s, cam, opts);
    depth_sort(quads);

    FrameBuffer fb(cam.width, cam.height);
    const int tiles_x = (cam.width + kTile - 1) / kTile;
    const int tiles_y = (cam.height + kTile - 1) / kTile;
    const int n_tiles = tiles_x * tiles_y;

    parallel_for_chunks(n_tiles, opts.workers, [&](int64_t begin, int64_t end) {
        std::vector<int> local;
        for (int64_t t = begin; t < end; ++t) {
            const int tx = static_cast<int>(t) % tiles_x;
            const int ty = static_cast<int>(t) / tiles_x;
            const int x0 = tx * kTile;
            const int y0 = ty * kTile;
            const int x1 = std::min(cam.width - 1, x0 + kTile - 1);
            const int y1 = std::min(cam.height - 1, y0 + kTile - 1);
            local.clear();
            for (size_t i = 0; i < quads.size(); ++i) {
                const ProjectedQuad& q = quads[i];
                if (q.x1 < x0 || q.x0 > x1 || q.y1 < y0 || q.y0 > y1) continue;
                local.push_back(static_cast<int>(i));
            }
            composite_region(quads, local, fb, x0, y0, x1, y1);
        }
    });
    return fb;
}

FrameBuffer render_oracle(const SplatSet& s, const Camera& cam, const RenderOptions& opts) {
    RenderOptions serial = opts;
    serial.workers = 1;
    std::vector<ProjectedQuad> quads = project_splatset(s, cam, serial);
    depth_sort(quads);

    FrameBuffer fb(cam.width, cam.height);
    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            const Eigen::Vector2f p(static_cast<float>(x) + 0.5f, static_cast<float>(y) + 0.5f);
            float T = 1.f;
            float r = 0.f, g = 0.f, b = 0.f;
            for (const ProjectedQuad& q : quads) {
                const float a = splat_alpha(q, p);
                r += T * a * q.color.x();
                g += T * a * q.color.y();
                b += T * a * q.color.z();
                T *= 1.f - a;
            }
            float* px = fb.pixel(x, y);
            px[0] = r;
            px[1] = g;
            px[2] = b;
            fb.alpha[static_cast<size_t>(y) * fb.width + x] = 1.f - T;
        }
    }
    return fb;
}

Camera fit_camera(const SplatSet& s, int width, int height, float vfov_deg) {
    Eigen::Vector3f lo = Eigen::Vector3f::Constant(std::numeric_limits<float>::max());
    Eigen::Vector3f hi = Eigen::Vector3f::Constant(std::numeric_limits<float>::lowest());
    for (const Gaussian& g : s.gaussians) {
        lo = lo.cwiseMin(g.mu);
        hi = hi.cwiseMax(g.mu);
    }
    if (s.gaussians.empty()) {
        lo.setZero();
        hi.setZero();
    }
    const Eigen::Vector3f center = 0.5f * (lo + hi);
    const float radius = std::max(0.25f * (hi - lo).norm(), 1e-3f) * 2.f;

    const float vfov = vfov_deg * 3.14159265358979323846f / 180.f;
    const float dist = radius / std::tan(0.5f * vfov) * 1.15f;

    const Eigen::Vector3f eye = center + Eigen::Vector3f(0.f, 0.f, -dist);
    const Eigen::Vector3f fwd = (center - eye).normalized();
    const Eigen::Vector3f up(0.f, 1.f, 0.f);
    const Eigen::Vector3f right = up.cross(fwd).normalized();
    const Eigen::Vector3f down = right.cross(fwd);

    Camera cam;
    cam.width = width;
    cam.height = height;
    cam.fy = 0.5f * static_cast<float>(height) / std::tan(0.5f * vfov);
    cam.fx = cam.fy;
    cam.cx = 0.5f * static_cast<float>(width);
    cam.cy = 0.5f * static_cast<float>(height);
    cam.R_c.row(0) = right;
    cam.R_c.row(1) = down;
    cam.R_c.row(2) = fwd;
    cam.t_c = -(cam.R_c * eye);
    return cam;
}

uint8_t to_byte(float v) {
    const float c = std::clamp(v, 0.f, 1.f);
    return static_cast<uint8_t>(std::lround(c * 255.f));
}

}  // namespace sqzm
