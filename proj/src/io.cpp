#include "sqzm/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <optional>

#include "sqzm/common.hpp"

namespace sqzm {

namespace {

constexpr char kMagic[4] = {'S', 'Q', 'Z', 'M'};
constexpr uint32_t kVersion = 1;

std::string printable(const char* fourcc) {
    std::string s;
    for (int i = 0; i < 4; ++i)
        s += std::isprint(static_cast<unsigned char>(fourcc[i])) ? fourcc[i] : '?';
    return s;
}

class ByteWriter {
public:
    void u8(uint8_t v) { buf_.push_back(v); }
    void u32(uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
    void u64(uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
    void i32(int32_t v) { u32(static_cast<uint32_t>(v)); }
    void f32(float v) {
        uint32_t b;
        std::memcpy(&b, &v, 4);
        u32(b);
    }
    void f64(double v) {
        uint64_t b;
        std::memcpy(&b, &v, 8);
        u64(b);
    }
    void raw(const void* p, size_t n) {
        const uint8_t* b = static_cast<const uint8_t*>(p);
        buf_.insert(buf_.end(), b, b + n);
    }
    void fourcc(const char* s) { raw(s, 4); }

    const std::vector<uint8_t>& bytes() const { return buf_; }

private:
    std::vector<uint8_t> buf_;
};

/// Bounds-checked little-endian reader over a byte span.
class Cursor {
public:
    Cursor(const uint8_t* data, size_t size, std::string ctx)
        : p_(data), n_(size), ctx_(std::move(ctx)) {}

    size_t remaining() const { return n_ - off_; }

    void need(size_t k) const {
        if (off_ + k > n_)
            throw IoError(ctx_ + ": expected " + std::to_string(k) + " more bytes, have " +
                          std::to_string(remaining()));
    }
    void raw(void* dst, size_t n) {
        need(n);
        std::memcpy(dst, p_ + off_, n);
        off_ += n;
    }
    uint8_t u8() {
        need(1);
        return p_[off_++];
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p_[off_ + i]) << (8 * i);
        off_ += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p_[off_ + i]) << (8 * i);
        off_ += 8;
        return v;
    }
    int32_t i32() { return static_cast<int32_t>(u32()); }
    float f32() {
        const uint32_t b = u32();
        float v;
        std::memcpy(&v, &b, 4);
        return v;
    }
    double f64() {
        const uint64_t b = u64();
        double v;
        std::memcpy(&v, &b, 8);
        return v;
    }
    void expect_end() const {
        if (remaining() != 0)
            throw IoError(ctx_ + ": " + std::to_string(remaining()) + " trailing bytes");
    }

private:
    const uint8_t* p_;
    size_t n_;
    size_t off_ = 0;
    std::string ctx_;
};

struct Section {
    std::string name;
    const uint8_t* data;
    size_t size;
};

struct ParsedFile {
    std::vector<uint8_t> bytes;
    std::vector<Section> sections;

    const Section* find(const std::string& name) const {
        for (const auto& s : sections)
            if (s.name == name) return &s;
        return nullptr;
    }
    Cursor require(const std::string& name) const {
        const Section* s = find(name);
        if (!s) throw IoError("missing section " + name);
        return Cursor(s->data, s->size, "section " + name);
    }
    std::optional<Cursor> optional(const std::string& name) const {
        const Section* s = find(name);
        if (!s) return std::nullopt;
        return Cursor(s->data, s->size, "section " + name);
    }
};

std::vector<uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failed on " + path);
    return bytes;
}

void write_file(const std::string& path, const std::vector<uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed on " + path);
}

ParsedFile parse_file(const std::string& path, const char* expected_kind) {
    ParsedFile f;
    f.bytes = read_file(path);
    Cursor c(f.bytes.data(), f.bytes.size(), "file header");

    char magic[4];
    c.raw(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw IoError(path + ": bad magic '" + printable(magic) + "'");
    const uint32_t version = c.u32();
    if (version != kVersion)
        throw IoError(path + ": unsupported version " + std::to_string(version));
    char kind[4];
    c.raw(kind, 4);
    if (std::memcmp(kind, expected_kind, 4) != 0)
        throw IoError(path + ": file kind '" + printable(kind) + "', expected '" +
                      expected_kind + "'");

    size_t off = 12;
    while (c.remaining() > 0) {
        if (c.remaining() < 12)
            throw IoError(path + ": truncated section header at offset " + std::to_string(off) +
                          " (" + std::to_string(c.remaining()) + " bytes left)");
        char name[4];
        c.raw(name, 4);
        const uint64_t len = c.u64();
        const std::string sname = printable(name);
        if (len > c.remaining())
            throw IoError(path + ": section " + sname + ": header claims " +
                          std::to_string(len) + " bytes, file has " +
                          std::to_string(c.remaining()));
        if (f.find(sname)) throw IoError(path + ": duplicate section " + sname);
        f.sections.push_back(Section{sname, f.bytes.data() + off + 12,
                                     static_cast<size_t>(len)});
        std::vector<uint8_t> skip(static_cast<size_t>(len));
        c.raw(skip.data(), skip.size());
        off += 12 + static_cast<size_t>(len);
    }
    return f;
}

void emit_section(ByteWriter& out, const char* name, const ByteWriter& payload) {
    out.fourcc(name);
    out.u64(payload.bytes().size());
    out.raw(payload.bytes().data(), payload.bytes().size());
}

ByteWriter file_header(const char* kind) {
    ByteWriter out;
    out.fourcc(kMagic);
    out.u32(kVersion);
    out.fourcc(kind);
    return out;
}

std::vector<uint8_t> pack_bits(const std::vector<uint8_t>& mask) {
    std::vector<uint8_t> out((mask.size() + 7) / 8, 0);
    for (size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) out[i / 8] |= static_cast<uint8_t>(1u << (i % 8));
    return out;
}

std::vector<uint8_t> unpack_bits(Cursor& c, size_t count) {
    std::vector<uint8_t> packed((count + 7) / 8);
    c.raw(packed.data(), packed.size());
    std::vector<uint8_t> out(count);
    for (size_t i = 0; i < count; ++i) out[i] = (packed[i / 8] >> (i % 8)) & 1u;
    return out;
}

void write_matrix(ByteWriter& w, const Eigen::MatrixXd& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) w.f64(m(i, j));
}

Eigen::MatrixXd read_matrix(Cursor& c, Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = c.f64();
    return m;
}

Eigen::VectorXd read_vector(Cursor& c, Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = c.f64();
    return v;
}

void check_dim(const std::string& what, int64_t v, int64_t lo, int64_t hi) {
    if (v < lo || v > hi)
        throw IoError(what + " = " + std::to_string(v) + " outside [" + std::to_string(lo) +
                      ", " + std::to_string(hi) + "]");
}

}  // namespace

void save_avatar(const std::string& path, const Avatar& a) {
    const SplatSet& s = a.splats;
    const size_t n = s.gaussians.size();
    if (a.skeleton.skin_weights.size() != n)
        throw ValidationError("avatar skin weight count does not match gaussian count");
    if (!a.lut.empty() && a.lut.size() != n)
        throw ValidationError("avatar lut length does not match gaussian count");

    ByteWriter out = file_header("AVTR");

    ByteWriter meta;
    meta.u64(a.seed);
    meta.i32(s.grid_h);
    meta.i32(s.grid_w);
    meta.i32(a.skeleton.n_joints());
    meta.u64(n);
    emit_section(out, "META", meta);

    ByteWriter mask;
    const std::vector<uint8_t> packed = pack_bits(s.mask);
    mask.raw(packed.data(), packed.size());
    emit_section(out, "MASK", mask);

    ByteWriter gaus;
    for (const Gaussian& g : s.gaussians)
        for (int i = 0; i < 3; ++i) gaus.f32(g.mu[i]);
    for (const Gaussian& g : s.gaussians)
        for (int i = 0; i < 4; ++i) gaus.f32(g.rot[i]);
    for (const Gaussian& g : s.gaussians)
        for (int i = 0; i < 3; ++i) gaus.f32(g.log_scale[i]);
    for (const Gaussian& g : s.gaussians) gaus.f32(g.delta);
    for (const Gaussian& g : s.gaussians)
        for (float c : g.sh) gaus.f32(c);
    emit_section(out, "GAUS", gaus);

    ByteWriter skel;
    for (int32_t p : a.skeleton.parent) skel.i32(p);
    for (const RigidTransform& t : a.skeleton.rest)
        for (int i = 0; i < 4; ++i) skel.f32(t.rot[i]);
    for (const RigidTransform& t : a.skeleton.rest)
        for (int i = 0; i < 3; ++i) skel.f32(t.t[i]);
    emit_section(out, "SKEL", skel);

    ByteWriter wght;
    for (const SkinWeights& w : a.skeleton.skin_weights)
        for (int32_t j : w.joint) wght.i32(j);
    for (const SkinWeights& w : a.skeleton.skin_weights)
        for (float v : w.weight) wght.f32(v);
    emit_section(out, "WGHT", wght);

    if (!a.lut.empty()) {
        ByteWriter lut;
        for (uint32_t v : a.lut) lut.u32(v);
        emit_section(out, "LUTT", lut);
    }
    write_file(path, out.bytes());
}

Avatar load_avatar(const std::string& path) {
    const ParsedFile f = parse_file(path, "AVTR");

    Cursor meta = f.require("META");
    Avatar a;
    a.seed = meta.u64();
    const int grid_h = meta.i32();
    const int grid_w = meta.i32();
    const int n_joints = meta.i32();
    const uint64_t n64 = meta.u64();
    meta.expect_end();
    check_dim("grid_h", grid_h, 1, 1 << 16);
    check_dim("grid_w", grid_w, 1, 1 << 16);
    check_dim("n_joints", n_joints, 1, 1 << 16);
    check_dim("gaussian count", static_cast<int64_t>(n64), 0,
              static_cast<int64_t>(grid_h) * grid_w);
    const size_t n = static_cast<size_t>(n64);

    SplatSet& s = a.splats;
    s.grid_h = grid_h;
    s.grid_w = grid_w;
    Cursor mask = f.require("MASK");
    s.mask = unpack_bits(mask, static_cast<size_t>(grid_h) * grid_w);
    mask.expect_end();

    Cursor gaus = f.require("GAUS");
    s.gaussians.resize(n);
    for (Gaussian& g : s.gaussians)
        for (int i = 0; i < 3; ++i) g.mu[i] = gaus.f32();
    for (Gaussian& g : s.gaussians)
        for (int i = 0; i < 4; ++i) g.rot[i] = gaus.f32();
    for (Gaussian& g : s.gaussians)
        for (int i = 0; i < 3; ++i) g.log_scale[i] = gaus.f32();
    for (Gaussian& g : s.gaussians) g.delta = gaus.f32();
    for (Gaussian& g : s.gaussians)
        for (float& c : g.sh) c = gaus.f32();
    gaus.expect_end();

    Cursor skel = f.require("SKEL");
    a.skeleton.parent.resize(static_cast<size_t>(n_joints));
    for (int32_t& p : a.skeleton.parent) p = skel.i32();
    a.skeleton.rest.resize(static_cast<size_t>(n_joints));
    for (RigidTransform& t : a.skeleton.rest)
        for (int i = 0; i < 4; ++i) t.rot[i] = skel.f32();
    for (RigidTransform& t : a.skeleton.rest)
        for (int i = 0; i < 3; ++i) t.t[i] = skel.f32();
    skel.expect_end();

    Cursor wght = f.require("WGHT");
    a.skeleton.skin_weights.resize(n);
    for (SkinWeights& w : a.skeleton.skin_weights)
        for (int32_t& j : w.joint) j = wght.i32();
    for (SkinWeights& w : a.skeleton.skin_weights)
        for (float& v : w.weight) v = wght.f32();
    wght.expect_end();

    if (auto lut = f.optional("LUTT")) {
        if (lut->remaining() != n * 4)
            throw IoError("section LUTT: expected " + std::to_string(n * 4) + " bytes, have " +
                          std::to_string(lut->remaining()));
        a.lut.resize(n);
        for (uint32_t& v : a.lut) v = lut->u32();
    }

    s.rebuild_uv_index();
    if (s.uv_index.size() != n)
        throw IoError("mask popcount " + std::to_string(s.uv_index.size()) +
                      " does not match stored gaussian count " + std::to_string(n));
    a.skeleton.validate();
    const ValidationReport rep = validate_splatset(s);
    if (!rep.ok()) throw ValidationError("loaded avatar invalid: " + rep.issues.front());
    return a;
}

void save_decoder(const std::string& path, const LinearDecoder& ld) {
    ld.validate();
    ByteWriter out = file_header("LDEC");

    ByteWriter meta;
    meta.i32(ld.pose_dim());
    meta.i32(ld.d());
    meta.i32(ld.n_corr);
    meta.i32(ld.sh_d);
    emit_section(out, "META", meta);

    ByteWriter pmea;
    for (Eigen::Index i = 0; i < ld.p_mean.size(); ++i) pmea.f64(ld.p_mean[i]);
    emit_section(out, "PMEA", pmea);

    ByteWriter pbas;
    write_matrix(pbas, ld.pose_basis);
    emit_section(out, "PBAS", pbas);

    ByteWriter cbas;
    write_matrix(cbas, ld.corr_basis);
    emit_section(out, "CBAS", cbas);

    ByteWriter shex;
    write_matrix(shex, ld.sh_expand);
    emit_section(out, "SHEX", shex);

    ByteWriter shmn;
    for (Eigen::Index i = 0; i < ld.sh_mean.size(); ++i) shmn.f64(ld.sh_mean[i]);
    emit_section(out, "SHMN", shmn);

    if (!ld.lut.empty()) {
        ByteWriter lut;
        for (uint32_t v : ld.lut) lut.u32(v);
        emit_section(out, "LUTT", lut);
    }
    write_file(path, out.bytes());
}

LinearDecoder load_decoder(const std::string& path) {
    const ParsedFile f = parse_file(path, "LDEC");

    Cursor meta = f.require("META");
    const int pose_dim = meta.i32();
    const int d = meta.i32();
    const int n_corr = meta.i32();
    const int sh_d = meta.i32();
    meta.expect_end();
    check_dim("pose_dim", pose_dim, 1, 1 << 20);
    check_dim("d", d, 1, 1 << 20);
    check_dim("n_corr", n_corr, 1, 1 << 24);
    check_dim("sh_d", sh_d, 1, kShCoeffs);

    LinearDecoder ld;
    ld.n_corr = n_corr;
    ld.sh_d = sh_d;
    Cursor pmea = f.require("PMEA");
    ld.p_mean = read_vector(pmea, pose_dim);
    pmea.expect_end();
    Cursor pbas = f.require("PBAS");
    ld.pose_basis = read_matrix(pbas, pose_dim, d);
    pbas.expect_end();
    Cursor cbas = f.require("CBAS");
    ld.corr_basis =
        read_matrix(cbas, d + 1, static_cast<Eigen::Index>(n_corr) * (kGeoChannels + sh_d));
    cbas.expect_end();
    Cursor shex = f.require("SHEX");
    ld.sh_expand = read_matrix(shex, sh_d, kShCoeffs);
    shex.expect_end();
    Cursor shmn = f.require("SHMN");
    ld.sh_mean = read_vector(shmn, kShCoeffs);
    shmn.expect_end();
    if (auto lut = f.optional("LUTT")) {
        if (lut->remaining() % 4 != 0)
            throw IoError("section LUTT: size not a multiple of 4");
        ld.lut.resize(lut->remaining() / 4);
        for (uint32_t& v : ld.lut) v = lut->u32();
    }
    ld.validate();
    return ld;
}

void save_quantized(const std::string& path, const QuantizedLinearDecoder& q) {
    q.validate();
    ByteWriter out = file_header("QDEC");

    ByteWriter meta;
    meta.i32(q.pose_dim());
    meta.i32(q.d());
    meta.i32(q.n_corr);
    meta.i32(q.sh_d);
    meta.f32(q.act_scale);
    meta.u64(static_cast<uint64_t>(q.zero_scale_columns));
    emit_section(out, "META", meta);

    ByteWriter pmea;
    for (Eigen::Index i = 0; i < q.p_mean.size(); ++i) pmea.f64(q.p_mean[i]);
    emit_section(out, "PMEA", pmea);

    ByteWriter pbas;
    write_matrix(pbas, q.pose_basis);
    emit_section(out, "PBAS", pbas);

    ByteWriter qwts;
    qwts.raw(q.weights.data(), q.weights.size());
    emit_section(out, "QWTS", qwts);

    ByteWriter qscl;
    for (float s : q.w_scale) qscl.f32(s);
    emit_section(out, "QSCL", qscl);

    ByteWriter shex;
    write_matrix(shex, q.sh_expand);
    emit_section(out, "SHEX", shex);

    ByteWriter shmn;
    for (Eigen::Index i = 0; i < q.sh_mean.size(); ++i) shmn.f64(q.sh_mean[i]);
    emit_section(out, "SHMN", shmn);

    if (!q.lut.empty()) {
        ByteWriter lut;
        for (uint32_t v : q.lut) lut.u32(v);
        emit_section(out, "LUTT", lut);
    }
    write_file(path, out.bytes());
}

QuantizedLinearDecoder load_quantized(const std::string& path) {
    const ParsedFile f = parse_file(path, "QDEC");

    Cursor meta = f.require("META");
    const int pose_dim = meta.i32();
    const int d = meta.i32();
    const int n_corr = meta.i32();
    const int sh_d = meta.i32();
    QuantizedLinearDecoder q;
    q.act_scale = meta.f32();
    q.zero_scale_columns = static_cast<int64_t>(meta.u64());
    meta.expect_end();
    check_dim("pose_dim", pose_dim, 1, 1 << 20);
    check_dim("d", d, 1, 1 << 20);
    check_dim("n_corr", n_corr, 1, 1 << 24);
    check_dim("sh_d", sh_d, 1, kShCoeffs);

    q.n_corr = n_corr;
    q.sh_d = sh_d;
    const int64_t cols = static_cast<int64_t>(n_corr) * (kGeoChannels + sh_d);

    Cursor pmea = f.require("PMEA");
    q.p_mean = read_vector(pmea, pose_dim);
    pmea.expect_end();
    Cursor pbas = f.require("PBAS");
    q.pose_basis = read_matrix(pbas, pose_dim, d);
    pbas.expect_end();

    Cursor qwts = f.require("QWTS");
    const size_t w_count = static_cast<size_t>(d + 1) * static_cast<size_t>(cols);
    if (qwts.remaining() != w_count)
        throw IoError("section QWTS: expected " + std::to_string(w_count) + " bytes, have " +
                      std::to_string(qwts.remaining()));
    q.weights.resize(w_count);
    qwts.raw(q.weights.data(), w_count);

    Cursor qscl = f.require("QSCL");
    q.w_scale.resize(static_cast<size_t>(cols));
    for (float& s : q.w_scale) s = qscl.f32();
    qscl.expect_end();

    Cursor shex = f.require("SHEX");
    q.sh_expand = read_matrix(shex, sh_d, kShCoeffs);
    shex.expect_end();
    Cursor shmn = f.require("SHMN");
    q.sh_mean = read_vector(shmn, kShCoeffs);
    shmn.expect_end();
    if (auto lut = f.optional("LUTT")) {
        if (lut->remaining() % 4 != 0)
            throw IoError("section LUTT: size not a multiple of 4");
        q.lut.resize(lut->remaining() / 4);
        for (uint32_t& v : q.lut) v = lut->u32();
    }
    q.validate();
    return q;
}

void save_poses(const std::string& path, const std::vector<Pose>& poses) {
    if (poses.empty()) throw ValidationError("pose sequence is empty");
    const int dim = poses.front().vector_dim();
    std::string text = std::to_string(poses.size()) + " " + std::to_string(dim) + "\n";
    char buf[48];
    for (const Pose& p : poses) {
        if (p.vector_dim() != dim)
            throw ValidationError("pose sequence mixes joint counts");
        const Eigen::VectorXd v = p.to_vector();
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.9g", static_cast<float>(v[i]));
            if (i) text += ' ';
            text += buf;
        }
        text += '\n';
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << text;
    if (!out) throw IoError("write failed on " + path);
}

std::vector<Pose> load_poses(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    int64_t frames = 0, dim = 0;
    if (!(in >> frames >> dim)) throw IoError(path + ": bad pose header");
    if (frames < 1 || frames > (1 << 24)) throw IoError(path + ": bad frame count");
    if (dim < 4 + 3 + kAuxDim || (dim - 3 - kAuxDim) % 4 != 0)
        throw IoError(path + ": pose dim " + std::to_string(dim) +
                      " is not 4*joints + " + std::to_string(3 + kAuxDim));
    const int n_joints = static_cast<int>((dim - 3 - kAuxDim) / 4);

    std::vector<Pose> poses;
    poses.reserve(static_cast<size_t>(frames));
    for (int64_t fi = 0; fi < frames; ++fi) {
        Pose p;
        p.joints.resize(static_cast<size_t>(n_joints));
        auto next = [&]() {
            float v;
            if (!(in >> v))
                throw IoError(path + ": truncated at frame " + std::to_string(fi));
            return v;
        };
        for (auto& q : p.joints)
            for (int i = 0; i < 4; ++i) q[i] = next();
        for (int i = 0; i < 3; ++i) p.root_t[i] = next();
        for (int i = 0; i < kAuxDim; ++i) p.aux[static_cast<size_t>(i)] = next();
        poses.push_back(std::move(p));
    }
    return poses;
}

void write_ppm(const std::string& path, const Image& img) {
    if (img.width < 1 || img.height < 1) throw ValidationError("empty image");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    std::vector<uint8_t> row(static_cast<size_t>(img.width) * 3);
    for (int y = 0; y < img.height; ++y) {
        const float* src = img.pixel(0, y);
        for (size_t i = 0; i < row.size(); ++i) row[i] = to_byte(src[i]);
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size()));
    }
    if (!out) throw IoError("write failed on " + path);
}

namespace {

int read_pnm_int(std::istream& in, const std::string& path) {
    // skips whitespace and '#' comments, per the netpbm grammar
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (std::isspace(c)) {
            c = in.get();
        } else {
            break;
        }
    }
    if (c == EOF || !std::isdigit(c)) throw IoError(path + ": malformed header");
    int v = 0;
    while (c != EOF && std::isdigit(c)) {
        v = v * 10 + (c - '0');
        if (v > (1 << 24)) throw IoError(path + ": header value too large");
        c = in.get();
    }
    if (c != EOF) in.unget();
    return v;
}

void read_pnm_header(std::istream& in, const std::string& path, const char* tag, int* w,
                     int* h) {
    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    if (!in || m0 != tag[0] || m1 != tag[1])
        throw IoError(path + ": not a " + tag + " file");
    *w = read_pnm_int(in, path);
    *h = read_pnm_int(in, path);
    const int maxval = read_pnm_int(in, path);
    if (maxval != 255) throw IoError(path + ": only maxval 255 supported");
    in.get();  // single whitespace byte before the raster
    if (*w < 1 || *h < 1 || *w > (1 << 15) || *h > (1 << 15))
        throw IoError(path + ": bad image dims");
}

}  // namespace

Image read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    int w = 0, h = 0;
    read_pnm_header(in, path, "P6", &w, &h);
    Image img(w, h);
    std::vector<uint8_t> bytes(static_cast<size_t>(w) * h * 3);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (in.gcount() != static_cast<std::streamsize>(bytes.size()))
        throw IoError(path + ": truncated pixel data, expected " +
                      std::to_string(bytes.size()) + " bytes, have " +
                      std::to_string(in.gcount()));
    for (size_t i = 0; i < bytes.size(); ++i)
        img.rgb[i] = static_cast<float>(bytes[i]) / 255.f;
    return img;
}

void write_pgm(const std::string& path, const std::vector<uint8_t>& gray, int width,
               int height) {
    if (gray.size() != static_cast<size_t>(width) * height)
        throw ValidationError("gray buffer does not match dims");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "P5\n" << width << " " << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(gray.data()),
              static_cast<std::streamsize>(gray.size()));
    if (!out) throw IoError("write failed on " + path);
}

std::vector<uint8_t> read_pgm(const std::string& path, int* width, int* height) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    read_pnm_header(in, path, "P5", width, height);
    std::vector<uint8_t> bytes(static_cast<size_t>(*width) * *height);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (in.gcount() != static_cast<std::streamsize>(bytes.size()))
        throw IoError(path + ": truncated pixel data");
    return bytes;
}

namespace {

struct JointSpec {
    int parent;
    float x, y, z;
};

// Humanoid rest positions, y-up, parents always before children.
constexpr JointSpec kHumanoid[24] = {
    {-1, 0.00f, 0.95f, 0.00f},  // pelvis
    {0, 0.00f, 1.05f, 0.00f},   // spine
    {1, 0.00f, 1.15f, 0.00f},   // spine2
    {2, 0.00f, 1.30f, 0.00f},   // chest
    {3, 0.00f, 1.45f, 0.00f},   // neck
    {4, 0.00f, 1.62f, 0.00f},   // head
    {3, 0.10f, 1.40f, 0.00f},   // l collar
    {6, 0.28f, 1.38f, 0.00f},   // l upper arm
    {7, 0.50f, 1.36f, 0.00f},   // l forearm
    {8, 0.68f, 1.34f, 0.00f},   // l hand
    {3, -0.10f, 1.40f, 0.00f},  // r collar
    {10, -0.28f, 1.38f, 0.00f},
    {11, -0.50f, 1.36f, 0.00f},
    {12, -0.68f, 1.34f, 0.00f},
    {0, 0.09f, 0.88f, 0.00f},  // l thigh
    {14, 0.11f, 0.50f, 0.00f},
    {15, 0.12f, 0.10f, 0.00f},
    {16, 0.13f, 0.02f, 0.12f},  // l toe
    {0, -0.09f, 0.88f, 0.00f},  // r thigh
    {18, -0.11f, 0.50f, 0.00f},
    {19, -0.12f, 0.10f, 0.00f},
    {20, -0.13f, 0.02f, 0.12f},
    {9, 0.78f, 1.32f, 0.00f},   // l fingers
    {13, -0.78f, 1.32f, 0.00f},
};

}  // namespace

Avatar synth_avatar(const SynthConfig& cfg) {
    if (cfg.n_joints < 2) throw ValidationError("synthetic avatar needs at least 2 joints");
    if (cfg.grid < 2) throw ValidationError("synthetic avatar needs a grid of at least 2");
    const int nj = cfg.n_joints;
    const int gh = cfg.grid, gw = cfg.grid;

    Avatar a;
    a.seed = cfg.seed;
    Skeleton& skel = a.skeleton;
    skel.parent.resize(static_cast<size_t>(nj));
    skel.rest.resize(static_cast<size_t>(nj));
    std::vector<Eigen::Vector3f> pos(static_cast<size_t>(nj));
    for (int j = 0; j < nj; ++j) {
        if (j < 24) {
            skel.parent[static_cast<size_t>(j)] = kHumanoid[j].parent;
            pos[static_cast<size_t>(j)] =
                Eigen::Vector3f(kHumanoid[j].x, kHumanoid[j].y, kHumanoid[j].z);
        } else {
            // extra joints continue as a chain with a deterministic wiggle
            skel.parent[static_cast<size_t>(j)] = j - 1;
            Eigen::Vector3f dir(
                static_cast<float>(mix64_unit(cfg.seed, 3 * j) - 0.5),
                static_cast<float>(mix64_unit(cfg.seed, 3 * j + 1) - 0.5),
                static_cast<float>(mix64_unit(cfg.seed, 3 * j + 2) - 0.5));
            dir.normalize();
            pos[static_cast<size_t>(j)] = pos[static_cast<size_t>(j - 1)] + 0.06f * dir;
        }
        skel.rest[static_cast<size_t>(j)].rot = Eigen::Vector4f(1.f, 0.f, 0.f, 0.f);
        skel.rest[static_cast<size_t>(j)].t = pos[static_cast<size_t>(j)];
    }

    // One bone per non-root joint; bone b runs parent(b+1) -> (b+1) and owns a
    // horizontal band of UV rows.
    const int n_bones = nj - 1;
    Rng rng(cfg.seed);
    std::vector<float> radius(static_cast<size_t>(n_bones));
    std::vector<Eigen::Vector3f> base_color(static_cast<size_t>(n_bones));
    for (int b = 0; b < n_bones; ++b) {
        const int child = b + 1;
        const float base_r = child <= 5 ? 0.11f : 0.05f;
        radius[static_cast<size_t>(b)] =
            base_r * (0.85f + 0.30f * static_cast<float>(rng.uniform()));
        base_color[static_cast<size_t>(b)] =
            Eigen::Vector3f(0.35f + 0.40f * static_cast<float>(rng.uniform()),
                            0.35f + 0.40f * static_cast<float>(rng.uniform()),
                            0.35f + 0.40f * static_cast<float>(rng.uniform()));
    }
    auto band_begin = [&](int b) { return (b * gh + n_bones - 1) / n_bones; };

    SplatSet& s = a.splats;
    s.grid_h = gh;
    s.grid_w = gw;
    s.mask.assign(static_cast<size_t>(gh) * gw, 0);

    constexpr uint64_t kHole = 11, kDelta = 12, kJitter = 13, kColor = 14, kShHi = 15,
                       kThick = 16;
    for (int r = 0; r < gh; ++r) {
        const int b = std::min(r * n_bones / gh, n_bones - 1);
        const int rb0 = band_begin(b);
        const int rb1 = std::max(band_begin(b + 1), rb0 + 1);
        const int child = b + 1;
        const int par = skel.parent[static_cast<size_t>(child)];
        const Eigen::Vector3f p0 = pos[static_cast<size_t>(par)];
        const Eigen::Vector3f p1 = pos[static_cast<size_t>(child)];
        Eigen::Vector3f axis = p1 - p0;
        const float len = std::max(axis.norm(), 1e-4f);
        axis /= len;
        Eigen::Vector3f ref = std::abs(axis.z()) < 0.9f ? Eigen::Vector3f(0.f, 0.f, 1.f)
                                                        : Eigen::Vector3f(1.f, 0.f, 0.f);
        const Eigen::Vector3f n1 = axis.cross(ref).normalized();
        const Eigen::Vector3f n2 = axis.cross(n1);

        for (int c = 0; c < gw; ++c) {
            const uint64_t cell = static_cast<uint64_t>(r) * gw + c;
            if (mix64_unit(mix64(cfg.seed, kHole), cell) < 0.08) continue;
            s.mask[static_cast<size_t>(cell)] = 1;

            const float sfrac = (static_cast<float>(r - rb0) + 0.5f) / static_cast<float>(rb1 - rb0);
            const float theta =
                2.f * 3.14159265358979f * (static_cast<float>(c) + 0.5f) / static_cast<float>(gw);
            const float rad = radius[static_cast<size_t>(b)];
            const Eigen::Vector3f radial = std::cos(theta) * n1 + std::sin(theta) * n2;
            const Eigen::Vector3f tangent = -std::sin(theta) * n1 + std::cos(theta) * n2;

            Gaussian g;
            g.mu = p0 + sfrac * len * axis + rad * radial;
            for (int k = 0; k < 3; ++k)
                g.mu[k] += 0.004f * (static_cast<float>(mix64_unit(
                                         mix64(cfg.seed, kJitter + static_cast<uint64_t>(k)),
                                         cell)) -
                                     0.5f);
            Eigen::Matrix3f frame;
            frame.col(0) = tangent;
            frame.col(1) = axis;
            frame.col(2) = radial;
            g.rot = matrix_to_quat(frame);

            const float spacing_t = 2.f * 3.14159265358979f * rad / static_cast<float>(gw);
            const float spacing_a = len / static_cast<float>(rb1 - rb0);
            const float thick =
                0.004f * (1.f + static_cast<float>(mix64_unit(mix64(cfg.seed, kThick), cell)));
            g.set_sigma(Eigen::Vector3f(std::max(0.75f * spacing_t, 1e-4f),
                                        std::max(0.75f * spacing_a, 1e-4f), thick));
            g.delta =
                0.75f + 0.20f * static_cast<float>(mix64_unit(mix64(cfg.seed, kDelta), cell));

            for (int ch = 0; ch < 3; ++ch) {
                const float wobble =
                    0.08f * (static_cast<float>(mix64_unit(
                                 mix64(cfg.seed, kColor + static_cast<uint64_t>(ch)), cell)) -
                             0.5f);
                g.sh[static_cast<size_t>(ch)] =
                    (base_color[static_cast<size_t>(b)][ch] - 0.5f) / 0.28209479f + wobble;
            }
            for (int k = 3; k < kShCoeffs; ++k)
                g.sh[static_cast<size_t>(k)] =
                    0.06f * (static_cast<float>(mix64_unit(
                                 mix64(cfg.seed, kShHi + static_cast<uint64_t>(k)), cell)) -
                             0.5f);

            SkinWeights w;
            // snapped to the 1/256 grid so the pair sums to exactly 1.0f and
            // a rigid pair of bones blends to an exact rigid transform
            const float wc =
                std::round(std::clamp(0.15f + 0.80f * sfrac, 0.f, 1.f) * 256.f) / 256.f;
            w.joint = {child, par, -1, -1};
            w.weight = {wc, 1.f - wc, 0.f, 0.f};

            s.gaussians.push_back(g);
            skel.skin_weights.push_back(w);
        }
    }
    s.rebuild_uv_index();
    return a;
}

TeacherDecoder avatar_teacher(const Avatar& a, bool linear, int share_factor) {
    if (share_factor < 1) throw ValidationError("share factor must be >= 1");
    if (a.splats.grid_h % share_factor != 0 || a.splats.grid_w % share_factor != 0)
        throw ValidationError("avatar grid is not divisible by the share factor");
    return TeacherDecoder(a.n_joints(), a.splats.grid_h / share_factor,
                          a.splats.grid_w / share_factor, a.seed, linear);
}

}  // namespace sqzm
