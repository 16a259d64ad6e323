#include "sqzm/distill.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "sqzm/common.hpp"
#include "sqzm/sharing.hpp"

namespace sqzm {

PcaResult pca_fit(const Eigen::MatrixXd& x, int d) {
    const Eigen::Index f = x.rows(), n = x.cols();
    if (f < 2) throw ValidationError("pca needs at least two samples");
    const Eigen::Index d_max = std::min(f - 1, n);
    if (d < 1 || d > d_max)
        throw ValidationError("pca component count " + std::to_string(d) +
                              " outside [1, min(F-1, n) = " + std::to_string(d_max) + "]");

    PcaResult out;
    out.mean = x.colwise().mean();
    const Eigen::MatrixXd xc = x.rowwise() - out.mean.transpose();
    Eigen::BDCSVD<Eigen::MatrixXd> svd(xc, Eigen::ComputeThinV);

    out.basis = svd.matrixV().leftCols(d);
    const Eigen::VectorXd sv = svd.singularValues().head(d);
    out.explained = sv.array().square() / static_cast<double>(f - 1);
    const double top = svd.singularValues()[0];
    out.degenerate = top == 0.0 || sv[d - 1] <= top * 1e-12;

    for (int k = 0; k < d; ++k) {
        Eigen::Index imax = 0;
        out.basis.col(k).cwiseAbs().maxCoeff(&imax);
        if (out.basis(imax, k) < 0) out.basis.col(k) = -out.basis.col(k);
    }
    return out;
}

Eigen::MatrixXd solve_basis(const Eigen::MatrixXd& c, const Eigen::MatrixXd& y,
                            bool* ridged, double* lambda_out) {
    if (c.rows() != y.rows())
        throw ValidationError("design and target matrices disagree on sample count");
    if (ridged) *ridged = false;
    if (lambda_out) *lambda_out = 0.0;

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(c);
    if (c.rows() >= c.cols() && qr.rank() == c.cols()) return qr.solve(y);

    const Eigen::MatrixXd ctc = c.transpose() * c;
    const double lambda = 1e-8 * ctc.trace() / static_cast<double>(c.cols());
    if (ridged) *ridged = true;
    if (lambda_out) *lambda_out = lambda;
    if (!(lambda > 0.0)) return Eigen::MatrixXd::Zero(c.cols(), y.cols());
    const Eigen::MatrixXd reg =
        ctc + lambda * Eigen::MatrixXd::Identity(c.cols(), c.cols());
    return reg.ldlt().solve(c.transpose() * y);
}

namespace {

Eigen::VectorXd singular_values(const Eigen::MatrixXd& m) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
    return svd.singularValues();
}

// pca_fit, extended past its well-posed range: when d exceeds min(F-1, n)
// the missing directions are filled by a deterministic orthonormal
// completion (flagged degenerate, explained variance zero).
PcaResult pca_fit_completed(const Eigen::MatrixXd& x, int d) {
    const Eigen::Index n = x.cols();
    if (d > n)
        throw ValidationError("component count " + std::to_string(d) + " exceeds dimension " +
                              std::to_string(n));
    const Eigen::Index d_max = std::min(x.rows() - 1, n);
    if (d <= d_max) return pca_fit(x, d);

    PcaResult out;
    if (d_max >= 1) {
        out = pca_fit(x, static_cast<int>(d_max));
    } else {
        out.mean = x.colwise().mean();
        out.basis.resize(n, 0);
        out.explained.resize(0);
    }
    out.degenerate = true;
    Eigen::MatrixXd full(n, d);
    full.leftCols(out.basis.cols()) = out.basis;
    Eigen::Index have = out.basis.cols();
    for (Eigen::Index i = 0; i < n && have < d; ++i) {
        Eigen::VectorXd r = Eigen::VectorXd::Unit(n, i);
        r -= full.leftCols(have) * (full.leftCols(have).transpose() * r);
        const double nrm = r.norm();
        if (nrm < 1e-8) continue;
        r /= nrm;
        Eigen::Index imax = 0;
        r.cwiseAbs().maxCoeff(&imax);
        if (r[imax] < 0) r = -r;
        full.col(have++) = r;
    }
    if (have < d) throw ValidationError("could not complete an orthonormal basis");
    out.basis = std::move(full);
    Eigen::VectorXd expl = Eigen::VectorXd::Zero(d);
    expl.head(out.explained.size()) = out.explained;
    out.explained = std::move(expl);
    return out;
}

// Scrambled van der Corput radical inverse: one seeded digit permutation per
// dimension (pi(0) = 0), which keeps per-dimension stratification while
// breaking the cross-dimension correlation plain Halton has when the prime
// base exceeds the sample count.
double scrambled_radical_inverse(uint64_t index, int base, Rng& perm_rng,
                                 std::vector<uint32_t>& perm) {
    if (perm.empty()) {
        perm.resize(static_cast<size_t>(base));
        std::iota(perm.begin(), perm.end(), 0u);
        for (size_t i = perm.size() - 1; i >= 2; --i)
            std::swap(perm[i], perm[1 + perm_rng.below(i)]);  // pi(0) stays 0
    }
    double inv_base = 1.0 / base, scale = inv_base, value = 0.0;
    uint64_t i = index;
    while (i > 0) {
        value += perm[i % static_cast<uint64_t>(base)] * scale;
        scale *= inv_base;
        i /= static_cast<uint64_t>(base);
    }
    return value;
}

}  // namespace

std::vector<Pose> sample_poses(int n_joints, int count, uint64_t seed) {
    if (n_joints < 1 || count < 1)
        throw ValidationError("pose sampler needs positive joint and sample counts");
    const int dims = 3 * n_joints + 3 + kAuxDim;

    std::vector<int> bases(static_cast<size_t>(dims));
    for (int d = 0; d < dims; ++d) bases[static_cast<size_t>(d)] = halton_prime(d);
    std::vector<std::vector<uint32_t>> perms(static_cast<size_t>(dims));
    std::vector<Rng> perm_rngs;
    perm_rngs.reserve(static_cast<size_t>(dims));
    for (int d = 0; d < dims; ++d) perm_rngs.emplace_back(mix64(seed, static_cast<uint64_t>(d)));

    // max |rotation vector| = 45 degrees when all three components peak
    const double rot_amp = (3.14159265358979323846 / 4.0) / std::sqrt(3.0);

    std::vector<Pose> out;
    out.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) {
        const uint64_t index = static_cast<uint64_t>(i) + 1;
        auto draw = [&](int dim) {
            return 2.0 * scrambled_radical_inverse(index, bases[static_cast<size_t>(dim)],
                                                   perm_rngs[static_cast<size_t>(dim)],
                                                   perms[static_cast<size_t>(dim)]) -
                   1.0;  // [-1, 1)
        };
        Pose p;
        p.joints.resize(static_cast<size_t>(n_joints));
        int dim = 0;
        for (int j = 0; j < n_joints; ++j) {
            Eigen::Vector3f u;
            for (int k = 0; k < 3; ++k) u[k] = static_cast<float>(draw(dim++) * rot_amp);
            p.joints[static_cast<size_t>(j)] = quat_from_rotvec(u);
        }
        for (int k = 0; k < 3; ++k) p.root_t[k] = static_cast<float>(draw(dim++) * 0.1);
        for (int k = 0; k < kAuxDim; ++k) p.aux[static_cast<size_t>(k)] = static_cast<float>(draw(dim++));
        out.push_back(std::move(p));
    }
    return out;
}

DistillResult distill(const TeacherDecoder& teacher, const std::vector<Pose>& poses,
                      const std::vector<uint8_t>& mask, const DistillConfig& cfg) {
    const int f = static_cast<int>(poses.size());
    const bool shared = !cfg.lut.empty();
    const int gh = teacher.grid_h(), gw = teacher.grid_w();
    if (cfg.sh_d < 1 || cfg.sh_d > kShCoeffs) throw ValidationError("sh_d must be in [1, 27]");
    if (cfg.d < 1) throw ValidationError("d must be positive");
    if (cfg.d > teacher.pose_dim())
        throw ValidationError("d exceeds the pose dimension " +
                              std::to_string(teacher.pose_dim()));
    if (f < 1) throw ValidationError("distillation needs at least one frame");

    int n_corr = 0;
    if (shared) {
        n_corr = gh * gw;
    } else {
        if (mask.size() != static_cast<size_t>(gh) * gw)
            throw ValidationError("mask size does not match teacher grid");
        for (uint8_t m : mask) n_corr += m ? 1 : 0;
        if (n_corr == 0) throw ValidationError("mask selects no correctives");
    }

    // 80/20 frame split; a lone frame trains with no holdout. Underdetermined
    // fits (n_train < d+1) fall through to the flagged ridge path.
    const int n_hold = f == 1 ? 0 : std::max(1, static_cast<int>(std::lround(0.2 * f)));
    const int n_train = f - n_hold;

    std::vector<int> order(static_cast<size_t>(f));
    std::iota(order.begin(), order.end(), 0);
    Rng split_rng(cfg.split_seed);
    for (size_t i = order.size() - 1; i >= 1; --i)
        std::swap(order[i], order[split_rng.below(i + 1)]);
    const std::vector<int> train(order.begin(), order.begin() + n_train);
    const std::vector<int> hold(order.begin() + n_train, order.end());

    // Teacher targets, one flat n_corr x 37 row block per frame.
    std::vector<std::vector<double>> target(static_cast<size_t>(f));
    for (int i = 0; i < f; ++i) {
        CorrectiveGrid g = teacher.decode(poses[static_cast<size_t>(i)], cfg.workers);
        target[static_cast<size_t>(i)] =
            shared ? std::move(g.data) : apply_mask(g.data, gh, gw, kCorrChannels, mask);
    }

    // Stage-2 basis: one shared 27 -> sh_d PCA over every training SH sample.
    Eigen::MatrixXd sh_samples(static_cast<Eigen::Index>(n_train) * n_corr, kShCoeffs);
    for (int ti = 0; ti < n_train; ++ti) {
        const double* rows = target[static_cast<size_t>(train[static_cast<size_t>(ti)])].data();
        for (int i = 0; i < n_corr; ++i)
            for (int c = 0; c < kShCoeffs; ++c)
                sh_samples(static_cast<Eigen::Index>(ti) * n_corr + i, c) =
                    rows[static_cast<size_t>(i) * kCorrChannels + c];
    }
    const PcaResult sh_pca = pca_fit_completed(sh_samples, cfg.sh_d);

    Eigen::MatrixXd pose_mat(n_train, teacher.pose_dim());
    for (int ti = 0; ti < n_train; ++ti)
        pose_mat.row(ti) = poses[static_cast<size_t>(train[static_cast<size_t>(ti)])].to_vector();
    const PcaResult pose_pca = pca_fit_completed(pose_mat, cfg.d);

    Eigen::MatrixXd code(n_train, cfg.d + 1);
    code.col(0).setOnes();
    code.rightCols(cfg.d) =
        (pose_mat.rowwise() - pose_pca.mean.transpose()) * pose_pca.basis;

    const int inner = kGeoChannels + cfg.sh_d;
    Eigen::MatrixXd y(n_train, static_cast<Eigen::Index>(n_corr) * inner);
    for (int ti = 0; ti < n_train; ++ti) {
        const double* rows = target[static_cast<size_t>(train[static_cast<size_t>(ti)])].data();
        for (int i = 0; i < n_corr; ++i) {
            const double* row = rows + static_cast<size_t>(i) * kCorrChannels;
            const Eigen::Index base = static_cast<Eigen::Index>(i) * inner;
            for (int g = 0; g < kGeoChannels; ++g) y(ti, base + g) = row[kShCoeffs + g];
            for (int k = 0; k < cfg.sh_d; ++k) {
                double v = 0.0;
                for (int c = 0; c < kShCoeffs; ++c)
                    v += (row[c] - sh_pca.mean[c]) * sh_pca.basis(c, k);
                y(ti, base + kGeoChannels + k) = v;
            }
        }
    }

    DistillResult out;
    out.report.ridged = false;
    Eigen::MatrixXd b_c = solve_basis(code, y, &out.report.ridged, &out.report.lambda_ridge);

    LinearDecoder& ld = out.decoder;
    ld.p_mean = pose_pca.mean;
    ld.pose_basis = pose_pca.basis;
    ld.corr_basis = std::move(b_c);
    ld.sh_expand = sh_pca.basis.transpose();
    ld.sh_mean = sh_pca.mean;
    ld.lut = cfg.lut;
    ld.n_corr = n_corr;
    ld.sh_d = cfg.sh_d;
    ld.validate();

    DistillReport& rep = out.report;
    rep.n_train = n_train;
    rep.n_holdout = n_hold;
    rep.pose_pca_degenerate = pose_pca.degenerate;
    rep.sh_pca_degenerate = sh_pca.degenerate;
    rep.pose_explained.assign(pose_pca.explained.data(),
                              pose_pca.explained.data() + pose_pca.explained.size());
    rep.sh_explained.assign(sh_pca.explained.data(),
                            sh_pca.explained.data() + sh_pca.explained.size());
    const Eigen::VectorXd sv = singular_values(code);
    rep.cond_code = sv[sv.size() - 1] > 0.0
                        ? sv[0] / sv[sv.size() - 1]
                        : std::numeric_limits<double>::infinity();

    auto accumulate = [&](const std::vector<int>& frames,
                          std::array<double, kCorrChannels>& rms_out, bool holdout_extras) {
        std::array<double, kCorrChannels> sq{};
        double sq_trunc = 0.0;
        for (int fi : frames) {
            const std::vector<double> dec = linear_decode(ld, poses[static_cast<size_t>(fi)]);
            const double* tgt = target[static_cast<size_t>(fi)].data();
            for (int i = 0; i < n_corr; ++i)
                for (int c = 0; c < kCorrChannels; ++c) {
                    const double e = dec[static_cast<size_t>(i) * kCorrChannels + c] -
                                     tgt[static_cast<size_t>(i) * kCorrChannels + c];
                    sq[static_cast<size_t>(c)] += e * e;
                }
            if (holdout_extras) {
                for (int i = 0; i < n_corr; ++i) {
                    Eigen::VectorXd s(kShCoeffs);
                    for (int c = 0; c < kShCoeffs; ++c)
                        s[c] = tgt[static_cast<size_t>(i) * kCorrChannels + c];
                    const Eigen::VectorXd centered = s - sh_pca.mean;
                    const Eigen::VectorXd recon =
                        sh_pca.basis * (sh_pca.basis.transpose() * centered);
                    sq_trunc += (centered - recon).squaredNorm();
                }
            }
        }
        const double cnt = static_cast<double>(frames.size()) * n_corr;
        for (int c = 0; c < kCorrChannels; ++c)
            rms_out[static_cast<size_t>(c)] = std::sqrt(sq[static_cast<size_t>(c)] / cnt);
        if (holdout_extras) {
            double sh_sq = 0.0;
            for (int c = 0; c < kShCoeffs; ++c) sh_sq += sq[static_cast<size_t>(c)];
            rep.sh_rms_holdout = std::sqrt(sh_sq / (cnt * kShCoeffs));
            rep.sh_truncation_rms = std::sqrt(sq_trunc / (cnt * kShCoeffs));
        }
    };
    accumulate(train, rep.rms_train, hold.empty());
    if (!hold.empty()) {
        accumulate(hold, rep.rms_holdout, true);
    } else {
        // no holdout frames: SH stats above came from the train set and the
        // holdout residuals are explicitly not-a-number
        rep.rms_holdout.fill(std::numeric_limits<double>::quiet_NaN());
    }
    return out;
}

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string join(const double* v, size_t n) {
    std::string s;
    for (size_t i = 0; i < n; ++i) {
        if (i) s += ',';
        s += fmt(v[i]);
    }
    return s;
}

}  // namespace

std::string report_text(const DistillReport& rep) {
    std::string s;
    s += "n_train=" + std::to_string(rep.n_train) + "\n";
    s += "n_holdout=" + std::to_string(rep.n_holdout) + "\n";
    s += "ridged=" + std::string(rep.ridged ? "1" : "0") + "\n";
    s += "lambda_ridge=" + fmt(rep.lambda_ridge) + "\n";
    s += "cond_code=" + fmt(rep.cond_code) + "\n";
    s += "pose_pca_degenerate=" + std::string(rep.pose_pca_degenerate ? "1" : "0") + "\n";
    s += "sh_pca_degenerate=" + std::string(rep.sh_pca_degenerate ? "1" : "0") + "\n";
    s += "sh_rms_holdout=" + fmt(rep.sh_rms_holdout) + "\n";
    s += "sh_truncation_rms=" + fmt(rep.sh_truncation_rms) + "\n";
    s += "rms_train=" + join(rep.rms_train.data(), rep.rms_train.size()) + "\n";
    s += "rms_holdout=" + join(rep.rms_holdout.data(), rep.rms_holdout.size()) + "\n";
    s += "pose_explained=" + join(rep.pose_explained.data(), rep.pose_explained.size()) + "\n";
    s += "sh_explained=" + join(rep.sh_explained.data(), rep.sh_explained.size()) + "\n";
    return s;
}

}  // namespace sqzm
