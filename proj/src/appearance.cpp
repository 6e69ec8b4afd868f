#include "splatgeo/appearance.hpp"

#include "splatgeo/error.hpp"

#include <unsupported/Eigen/AutoDiff>

#include <algorithm>
#include <cmath>
#include <random>

namespace splatgeo {

namespace {

using Dual3 = Eigen::AutoDiffScalar<Eigen::Vector3d>;

int degree_from_count(std::size_t count) {
    for (int l = 0; l <= kMaxShDegree; ++l)
        if (static_cast<std::size_t>(sh_coeff_count(l)) == count) return l;
    throw Error(ErrorCode::InvalidArgument, "SH coefficient count is not (L+1)^2 for L <= 3");
}

Vec3 sh_raw(std::span<const Vec3> coeffs, const Vec3& dir) {
    const int degree = degree_from_count(coeffs.size());
    double basis[16];
    sh_basis(degree, dir.x(), dir.y(), dir.z(), basis);
    Vec3 c = Vec3::Zero();
    for (std::size_t i = 0; i < coeffs.size(); ++i) c += basis[i] * coeffs[i];
    return c;
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

} // namespace

Vec3 sh_eval(std::span<const Vec3> coeffs, const Vec3& dir) { return sh_raw(coeffs, dir).cwiseMax(0.0); }

void AsgBank::pack(std::span<double> out) const {
    std::size_t i = 0;
    for (const auto& lobe : lobes) {
        out[i++] = lobe.log_lambda;
        out[i++] = lobe.log_mu;
    }
    for (const auto* v : {&decoder.w1, &decoder.b1, &decoder.w2, &decoder.b2})
        for (double x : *v) out[i++] = x;
}

void AsgBank::unpack(std::span<const double> in) {
    std::size_t i = 0;
    for (auto& lobe : lobes) {
        lobe.log_lambda = in[i++];
        lobe.log_mu = in[i++];
    }
    for (auto* v : {&decoder.w1, &decoder.b1, &decoder.w2, &decoder.b2})
        for (double& x : *v) x = in[i++];
}

int decoder_input_count(int features, int pe_octaves) { return features + 2 * pe_octaves * 3 + 3 + 3; }

AsgBank make_asg_bank(int lobes, int features, int pe_octaves, int hidden, std::uint64_t seed) {
    AsgBank bank;
    bank.features = features;
    bank.pe_octaves = pe_octaves;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int k = 0; k < lobes; ++k) {
        Vec3 axis(normal(rng), normal(rng), normal(rng));
        axis.normalize();
        Vec3 helper = std::abs(axis.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
        Vec3 t = axis.cross(helper).normalized();
        Vec3 b = axis.cross(t);
        AsgLobe lobe;
        lobe.frame.col(0) = axis;
        lobe.frame.col(1) = t;
        lobe.frame.col(2) = b;
        lobe.log_lambda = std::log(4.0);
        lobe.log_mu = std::log(4.0);
        bank.lobes.push_back(lobe);
    }
    auto& dec = bank.decoder;
    dec.inputs = decoder_input_count(features, pe_octaves);
    dec.hidden = hidden;
    const double s1 = 1.0 / std::sqrt(static_cast<double>(dec.inputs));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
    dec.w1.resize(static_cast<std::size_t>(hidden) * dec.inputs);
    for (double& w : dec.w1) w = s1 * normal(rng);
    dec.b1.assign(hidden, 0.0);
    dec.w2.resize(static_cast<std::size_t>(3) * hidden);
    for (double& w : dec.w2) w = 0.1 * s2 * normal(rng);
    dec.b2.assign(3, -6.0);
    return bank;
}

Vec3 asg_query_direction(const ViewContext& view) {
    const Vec3 outgoing = -view.view_dir;
    return 2.0 * outgoing.dot(view.normal) * view.normal - outgoing;
}

double asg_lobe_response(const AsgLobe& lobe, const Vec3& query) {
    const double c = query.dot(lobe.axis());
    if (c <= 0.0) return 0.0;
    const double a = query.dot(lobe.tangent());
    const double b = query.dot(lobe.bitangent());
    return std::exp(-std::exp(lobe.log_lambda) * a * a - std::exp(lobe.log_mu) * b * b) * c;
}

std::vector<double> asg_features(const AsgBank& bank, std::span<const double> amplitudes, const ViewContext& view) {
    const Vec3 q = asg_query_direction(view);
    std::vector<double> f(bank.features, 0.0);
    for (int k = 0; k < bank.lobe_count(); ++k) {
        const double g = asg_lobe_response(bank.lobes[k], q);
        if (g == 0.0) continue;
        for (int j = 0; j < bank.features; ++j) f[j] += amplitudes[static_cast<std::size_t>(k) * bank.features + j] * g;
    }
    return f;
}

std::vector<double> positional_encoding(const Vec3& dir, int octaves) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(6) * octaves);
    for (int l = 0; l < octaves; ++l) {
        const double freq = std::ldexp(kPi, l);
        for (int c = 0; c < 3; ++c) out.push_back(std::sin(freq * dir[c]));
        for (int c = 0; c < 3; ++c) out.push_back(std::cos(freq * dir[c]));
    }
    return out;
}

std::vector<double> decoder_input(const AsgBank& bank, std::span<const double> features, const ViewContext& view) {
    std::vector<double> x(features.begin(), features.end());
    const auto enc = positional_encoding(view.view_dir, bank.pe_octaves);
    x.insert(x.end(), enc.begin(), enc.end());
    for (int c = 0; c < 3; ++c) x.push_back(view.normal[c]);
    for (int c = 0; c < 3; ++c) x.push_back(-view.view_dir[c]);
    return x;
}

Vec3 decode_specular(const SpecularDecoder& dec, std::span<const double> input) {
    std::vector<double> h(dec.hidden);
    for (int i = 0; i < dec.hidden; ++i) {
        double s = dec.b1[i];
        const double* row = &dec.w1[static_cast<std::size_t>(i) * dec.inputs];
        for (int j = 0; j < dec.inputs; ++j) s += row[j] * input[j];
        h[i] = std::tanh(s);
    }
    Vec3 out;
    for (int o = 0; o < 3; ++o) {
        double s = dec.b2[o];
        for (int i = 0; i < dec.hidden; ++i) s += dec.w2[static_cast<std::size_t>(o) * dec.hidden + i] * h[i];
        out[o] = sigmoid(s);
    }
    return out;
}

void decode_specular_backward(const SpecularDecoder& dec, std::span<const double> input, const Vec3& grad_out,
                              std::span<double> grad_input, std::span<double> grad_params) {
    std::vector<double> h(dec.hidden);
    for (int i = 0; i < dec.hidden; ++i) {
        double s = dec.b1[i];
        const double* row = &dec.w1[static_cast<std::size_t>(i) * dec.inputs];
        for (int j = 0; j < dec.inputs; ++j) s += row[j] * input[j];
        h[i] = std::tanh(s);
    }
    double grad_pre_out[3];
    for (int o = 0; o < 3; ++o) {
        double s = dec.b2[o];
        for (int i = 0; i < dec.hidden; ++i) s += dec.w2[static_cast<std::size_t>(o) * dec.hidden + i] * h[i];
        const double y = sigmoid(s);
        grad_pre_out[o] = grad_out[o] * y * (1.0 - y);
    }

    const std::size_t off_b1 = dec.w1.size();
    const std::size_t off_w2 = off_b1 + dec.b1.size();
    const std::size_t off_b2 = off_w2 + dec.w2.size();

    std::vector<double> grad_h(dec.hidden, 0.0);
    for (int o = 0; o < 3; ++o) {
        grad_params[off_b2 + o] += grad_pre_out[o];
        for (int i = 0; i < dec.hidden; ++i) {
            const std::size_t w = static_cast<std::size_t>(o) * dec.hidden + i;
            grad_params[off_w2 + w] += grad_pre_out[o] * h[i];
            grad_h[i] += dec.w2[w] * grad_pre_out[o];
        }
    }
    for (int i = 0; i < dec.hidden; ++i) {
        const double g = grad_h[i] * (1.0 - h[i] * h[i]);
        if (g == 0.0) continue;
        grad_params[off_b1 + i] += g;
        const std::size_t row = static_cast<std::size_t>(i) * dec.inputs;
        for (int j = 0; j < dec.inputs; ++j) {
            grad_params[row + j] += g * input[j];
            grad_input[j] += g * dec.w1[row + j];
        }
    }
}

Vec3 specular_color(const AsgBank& bank, std::span<const double> amplitudes, const ViewContext& view) {
    const auto f = asg_features(bank, amplitudes, view);
    const auto x = decoder_input(bank, f, view);
    return decode_specular(bank.decoder, x);
}

Vec3 full_color(std::span<const Vec3> sh, std::span<const double> amplitudes, const ViewContext& view, int stage,
                const AsgBank& bank) {
    Vec3 c = sh_eval(sh, view.view_dir);
    if (stage == 2) c += specular_color(bank, amplitudes, view);
    return c.unaryExpr(&clamp01);
}

void full_color_backward(std::span<const Vec3> sh, std::span<const double> amplitudes, const ViewContext& view,
                         int stage, const AsgBank& bank, const Vec3& grad_color, ColorGradients& grads) {
    const int degree = degree_from_count(sh.size());
    const Vec3& d = view.view_dir;

    // Diffuse part, with the basis differentiated in the view direction.
    Dual3 x(d.x(), 3, 0), y(d.y(), 3, 1), z(d.z(), 3, 2);
    Dual3 basis[16];
    sh_basis(degree, x, y, z, basis);
    Vec3 raw = Vec3::Zero();
    for (std::size_t i = 0; i < sh.size(); ++i) raw += basis[i].value() * sh[i];
    const Vec3 diffuse = raw.cwiseMax(0.0);

    Vec3 total = diffuse;
    Vec3 spec = Vec3::Zero();
    std::vector<double> features, input;
    if (stage == 2) {
        features = asg_features(bank, amplitudes, view);
        input = decoder_input(bank, features, view);
        spec = decode_specular(bank.decoder, input);
        total += spec;
    }

    // Clamp to [0, 1] passes gradient only strictly inside the interval.
    Vec3 g_total;
    for (int c = 0; c < 3; ++c) g_total[c] = (total[c] > 0.0 && total[c] < 1.0) ? grad_color[c] : 0.0;

    Vec3 g_raw;
    for (int c = 0; c < 3; ++c) g_raw[c] = raw[c] > 0.0 ? g_total[c] : 0.0;
    for (std::size_t i = 0; i < sh.size(); ++i) {
        grads.sh[i] += basis[i].value() * g_raw;
        grads.view_dir += g_raw.dot(sh[i]) * basis[i].derivatives();
    }

    if (stage != 2) return;

    std::vector<double> g_input(input.size(), 0.0);
    const std::size_t lobe_params = 2 * bank.lobes.size();
    decode_specular_backward(bank.decoder, input, g_total, g_input, grads.bank.subspan(lobe_params));

    const int nf = bank.features;
    const int pe = 6 * bank.pe_octaves;
    // Encoding of d.
    for (int l = 0; l < bank.pe_octaves; ++l) {
        const double freq = std::ldexp(kPi, l);
        for (int c = 0; c < 3; ++c) {
            const double gs = g_input[nf + 6 * l + c];
            const double gc = g_input[nf + 6 * l + 3 + c];
            grads.view_dir[c] += freq * (gs * std::cos(freq * d[c]) - gc * std::sin(freq * d[c]));
        }
    }
    for (int c = 0; c < 3; ++c) {
        grads.normal[c] += g_input[nf + pe + c];
        grads.view_dir[c] -= g_input[nf + pe + 3 + c];
    }

    // Lobe features back to amplitudes, sharpness and the query direction.
    const Vec3 q = asg_query_direction(view);
    Vec3 g_q = Vec3::Zero();
    for (int k = 0; k < bank.lobe_count(); ++k) {
        const AsgLobe& lobe = bank.lobes[k];
        const double cosv = q.dot(lobe.axis());
        if (cosv <= 0.0) continue;
        const double a = q.dot(lobe.tangent());
        const double b = q.dot(lobe.bitangent());
        const double lam = std::exp(lobe.log_lambda);
        const double mu = std::exp(lobe.log_mu);
        const double e = std::exp(-lam * a * a - mu * b * b);
        const double g = e * cosv;
        double g_resp = 0.0;
        for (int j = 0; j < nf; ++j) {
            const std::size_t idx = static_cast<std::size_t>(k) * nf + j;
            grads.amplitudes[idx] += g_input[j] * g;
            g_resp += g_input[j] * amplitudes[idx];
        }
        if (g_resp == 0.0) continue;
        grads.bank[2 * k] += g_resp * g * (-lam * a * a);
        grads.bank[2 * k + 1] += g_resp * g * (-mu * b * b);
        g_q += g_resp * (e * lobe.axis() + g * (-2.0 * lam * a * lobe.tangent() - 2.0 * mu * b * lobe.bitangent()));
    }
    // q = 2 (w.n) n - w with w = -d.
    const Vec3 w = -d;
    const Vec3& n = view.normal;
    const Vec3 g_w = 2.0 * n * n.dot(g_q) - g_q;
    grads.normal += 2.0 * w.dot(n) * g_q + 2.0 * w * n.dot(g_q);
    grads.view_dir -= g_w;
}

} // namespace splatgeo
