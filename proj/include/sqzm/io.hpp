#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sqzm/decoder.hpp"
#include "sqzm/metrics.hpp"
#include "sqzm/quant.hpp"
#include "sqzm/types.hpp"

namespace sqzm {

// All binary files: magic "SQZM", u32 version = 1, a file-kind fourcc, then
// fourcc + u64-length prefixed sections. Little-endian throughout; floats
// stored as raw IEEE bits, so save/load roundtrips are bit-exact.

struct Avatar {
    SplatSet splats;
    Skeleton skeleton;
    std::vector<uint32_t> lut;  // empty until built; one entry per gaussian
    uint64_t seed = 0;

    int n_joints() const { return skeleton.n_joints(); }
};

struct SynthConfig {
    int n_joints = 24;
    int grid = 64;  // square UV grid side
    uint64_t seed = 1;
};

/// Deterministic tube-limb humanoid: every UV cell belongs to one bone's
/// capsule surface, ~8% of cells are punched out, so occupancy lands near
/// 92%. Same seed, same avatar.
Avatar synth_avatar(const SynthConfig& cfg);

/// Paired reference decoder for an avatar (seeded by the avatar seed). The
/// grid is the avatar grid divided by share_factor; factor 1 is the dense
/// per-gaussian teacher.
TeacherDecoder avatar_teacher(const Avatar& a, bool linear = false, int share_factor = 1);

void save_avatar(const std::string& path, const Avatar& a);
Avatar load_avatar(const std::string& path);

void save_decoder(const std::string& path, const LinearDecoder& ld);
LinearDecoder load_decoder(const std::string& path);

void save_quantized(const std::string& path, const QuantizedLinearDecoder& q);
QuantizedLinearDecoder load_quantized(const std::string& path);

/// Text pose sequence: header "<frames> <dim>", then one whitespace-separated
/// f32 record per line. Values roundtrip exactly (printed with 9 significant
/// digits).
void save_poses(const std::string& path, const std::vector<Pose>& poses);
std::vector<Pose> load_poses(const std::string& path);

/// Binary PPM (P6) / PGM (P5), maxval 255. Floats quantize via to_byte and
/// read back as byte/255.
void write_ppm(const std::string& path, const Image& img);
Image read_ppm(const std::string& path);
void write_pgm(const std::string& path, const std::vector<uint8_t>& gray, int width, int height);
std::vector<uint8_t> read_pgm(const std::string& path, int* width, int* height);

}  // namespace sqzm
