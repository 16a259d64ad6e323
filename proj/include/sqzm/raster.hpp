#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "sqzm/types.hpp"

namespace sqzm {

// Software splat renderer mirroring a compute/graphics split: a projection
// pass turns each gaussian into a screen-space quad, then depth-sorted
// front-to-back compositing resolves pixels. A brute-force per-pixel oracle
// shares every per-splat formula with the fast path.

/// Screen-space footprint of one projected gaussian.
struct ProjectedQuad {
    Eigen::Vector2f center_px = Eigen::Vector2f::Zero();
    float conic_a = 0.f, conic_b = 0.f, conic_c = 0.f;  // upper triangle of inv(Sigma_proj)
    float extent_px = 0.f;                              // half-size of the bounding quad
    float depth = 0.f;                                  // camera-space z
    Eigen::Vector3f color = Eigen::Vector3f::Zero();
    float delta = 0.f;
    // integer pixel bounds, inclusive, clamped to the image
    int x0 = 0, x1 = -1, y0 = 0, y1 = -1;
};

struct FrameBuffer {
    int width = 0;
    int height = 0;
    std::vector<float> rgb;    // width*height*3, row-major, [0,1]
    std::vector<float> alpha;  // width*height, [0,1]

    FrameBuffer() = default;
    FrameBuffer(int w, int h)
        : width(w), height(h), rgb(static_cast<size_t>(w) * h * 3, 0.f),
          alpha(static_cast<size_t>(w) * h, 0.f) {}

    float* pixel(int x, int y) { return rgb.data() + (static_cast<size_t>(y) * width + x) * 3; }
    const float* pixel(int x, int y) const {
        return rgb.data() + (static_cast<size_t>(y) * width + x) * 3;
    }
};

struct RenderOptions {
    int workers = 1;
    float near_plane = 0.01f;
};

/// Covariance floor added to both diagonal entries of Sigma_proj before
/// inversion; prevents sub-pixel singular conics.
inline constexpr float kCovFloorPx2 = 0.3f;
/// Per-splat opacity ceiling; one splat can never zero out transmittance.
inline constexpr float kAlphaClamp = 0.999f;
/// Front-to-back compositing stops once transmittance drops below this.
inline constexpr float kEarlyOutT = 1e-4f;
/// Quad half-size in units of sqrt(lambda_max); the opacity support is cut at
/// the same Mahalanobis radius so a quad always contains its splat's support.
inline constexpr float kExtentSigmas = 3.0f;

/// Perspective Jacobian at a camera-space point, or nullopt when the point is
/// at or behind the near plane (the splat is culled, not an error).
std::optional<Eigen::Matrix<float, 2, 3>> camera_jacobian(const Eigen::Vector3f& p_cam,
                                                          const Camera& cam,
                                                          float near_plane = 0.01f);

/// 2D covariance J R_c Sigma R_c^T J^T with the kCovFloorPx2 diagonal floor
/// already applied. Throws on non-finite covariance.
Eigen::Matrix2f project_covariance(const Gaussian& g, const Camera& cam,
                                   float near_plane = 0.01f);

/// Opacity of a quad at pixel position p. Zero outside the quad's
/// kExtentSigmas Mahalanobis radius, clamped to kAlphaClamp inside.
float splat_alpha(const ProjectedQuad& quad, const Eigen::Vector2f& p);

/// View-dependent color from degree<=2 real spherical harmonics:
/// 0.5 + sum_b basis_b(dir) * sh[b*3+ch], clamped to [0,1]. The direction is
/// normalized internally.
Eigen::Vector3f eval_sh(const std::array<float, kShCoeffs>& sh, Eigen::Vector3f view_dir);

/// Projection pass: cull behind-camera and offscreen splats, build quads in
/// splat order (not yet depth sorted).
std::vector<ProjectedQuad> project_splatset(const SplatSet& s, const Camera& cam,
                                            const RenderOptions& opts = {});

/// Stable ascending depth sort; ties keep input order.
void depth_sort(std::vector<ProjectedQuad>& quads);

/// Front-to-back compositing of depth-sorted quads with early termination.
/// Throws ValidationError if the list is not sorted.
FrameBuffer composite(const std::vector<ProjectedQuad>& quads, int width, int height);

/// Full pipeline: project -> cull -> sort -> tiled composite. Bit-identical
/// for any worker count.
FrameBuffer render(const SplatSet& s, const Camera& cam, const RenderOptions& opts = {});

/// Brute-force reference: every quad evaluated at every pixel, no bounding,
/// no early termination. Same projection and opacity formulas as render.
FrameBuffer render_oracle(const SplatSet& s, const Camera& cam, const RenderOptions& opts = {});

/// Camera at a given vertical field of view framing the splat set, looking at
/// its bounding-box center.
Camera fit_camera(const SplatSet& s, int width, int height, float vfov_deg = 50.f);

/// Linear [0,1] value to 8-bit by round(clamp(v)*255).
uint8_t to_byte(float v);

}  // namespace sqzm
