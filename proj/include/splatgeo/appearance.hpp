#pragma once

#include "splatgeo/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace splatgeo {

constexpr int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }

inline constexpr int kMaxShDegree = 3;

namespace sh_const {
inline constexpr double C0 = 0.28209479177387814;
inline constexpr double C1 = 0.4886025119029199;
inline constexpr double C2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                                 -1.0925484305920792, 0.5462742152960396};
inline constexpr double C3[7] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658, 0.3731763325901154,
                                 -0.4570457994644658, 1.445305721320277, -0.5900435899266435};
} // namespace sh_const

// Real spherical-harmonic basis (with Condon-Shortley phase) up to `degree`,
// evaluated at unit direction (x, y, z). Templated so callers can pass
// automatic-differentiation scalars.
template <typename T>
void sh_basis(int degree, const T& x, const T& y, const T& z, T* out) {
    using namespace sh_const;
    out[0] = T(C0);
    if (degree < 1) return;
    out[1] = -C1 * y;
    out[2] = C1 * z;
    out[3] = -C1 * x;
    if (degree < 2) return;
    const T xx = x * x, yy = y * y, zz = z * z;
    const T xy = x * y, yz = y * z, xz = x * z;
    out[4] = C2[0] * xy;
    out[5] = C2[1] * yz;
    out[6] = C2[2] * (2.0 * zz - xx - yy);
    out[7] = C2[3] * xz;
    out[8] = C2[4] * (xx - yy);
    if (degree < 3) return;
    out[9] = C3[0] * y * (3.0 * xx - yy);
    out[10] = C3[1] * xy * z;
    out[11] = C3[2] * y * (4.0 * zz - xx - yy);
    out[12] = C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
    out[13] = C3[4] * x * (4.0 * zz - xx - yy);
    out[14] = C3[5] * z * (xx - yy);
    out[15] = C3[6] * x * (xx - 3.0 * yy);
}

// Diffuse colour: SH expansion clamped at zero. `coeffs` has (L+1)^2 entries.
Vec3 sh_eval(std::span<const Vec3> coeffs, const Vec3& dir);

// One anisotropic spherical Gaussian lobe. frame columns are (axis, tangent,
// bitangent); sharpness is stored as logs so it stays positive.
struct AsgLobe {
    Mat3 frame = Mat3::Identity();
    double log_lambda = 0.0;
    double log_mu = 0.0;

    Vec3 axis() const { return frame.col(0); }
    Vec3 tangent() const { return frame.col(1); }
    Vec3 bitangent() const { return frame.col(2); }
};

// Two-layer perceptron: tanh hidden layer, logistic output. Weights are
// row-major (w1: hidden x inputs, w2: 3 x hidden).
struct SpecularDecoder {
    int inputs = 0;
    int hidden = 0;
    std::vector<double> w1, b1, w2, b2;

    std::size_t param_count() const { return w1.size() + b1.size() + w2.size() + b2.size(); }
};

// Shared specular model: lobe shapes plus the decoder. Per-Gaussian lobe
// amplitudes (lobes x features) live on the Gaussians.
struct AsgBank {
    int features = 8;
    int pe_octaves = 4;
    std::vector<AsgLobe> lobes;
    SpecularDecoder decoder;

    int lobe_count() const { return static_cast<int>(lobes.size()); }
    int amplitude_count() const { return lobe_count() * features; }
    // Trainable parameters: 2 log-sharpness values per lobe, then the decoder.
    std::size_t param_count() const { return 2 * lobes.size() + decoder.param_count(); }
    void pack(std::span<double> out) const;
    void unpack(std::span<const double> in);
};

int decoder_input_count(int features, int pe_octaves);

// Random lobe frames, unit sharpness, small random decoder weights and a
// negative output bias so a fresh bank adds almost no specular colour.
AsgBank make_asg_bank(int lobes, int features, int pe_octaves, int hidden, std::uint64_t seed);

struct ViewContext {
    Vec3 view_dir; // unit, camera -> Gaussian
    Vec3 normal;   // unit
};

// Mirror direction of the view about the normal; lobes are queried here.
Vec3 asg_query_direction(const ViewContext& view);

// exp(-lambda (q.t)^2 - mu (q.b)^2) * max(q.a, 0)
double asg_lobe_response(const AsgLobe& lobe, const Vec3& query);

// Feature vector: sum over lobes of amplitude_k * response_k(query).
std::vector<double> asg_features(const AsgBank& bank, std::span<const double> amplitudes, const ViewContext& view);

// sin/cos of 2^l * pi * d_c for l < octaves, grouped per octave.
std::vector<double> positional_encoding(const Vec3& dir, int octaves);

// Decoder input vector: [features, encoding(d), n, -d].
std::vector<double> decoder_input(const AsgBank& bank, std::span<const double> features, const ViewContext& view);

Vec3 decode_specular(const SpecularDecoder& decoder, std::span<const double> input);

Vec3 specular_color(const AsgBank& bank, std::span<const double> amplitudes, const ViewContext& view);

// Gradients produced by colour_backward. Spans must be sized by the caller
// (sh: (L+1)^2, amplitudes: lobes*features, bank: bank.param_count()); they
// are accumulated into, not overwritten.
struct ColorGradients {
    Vec3 view_dir = Vec3::Zero();
    Vec3 normal = Vec3::Zero();
    std::span<Vec3> sh;
    std::span<double> amplitudes;
    std::span<double> bank;
};

// Stage 1: clamp(sh, 0, 1). Stage 2: clamp(sh + specular, 0, 1).
Vec3 full_color(std::span<const Vec3> sh, std::span<const double> amplitudes, const ViewContext& view, int stage,
                const AsgBank& bank);

void full_color_backward(std::span<const Vec3> sh, std::span<const double> amplitudes, const ViewContext& view,
                         int stage, const AsgBank& bank, const Vec3& grad_color, ColorGradients& grads);

// Backward of decode_specular alone; accumulates input and parameter gradients.
// grad_params is laid out as [w1, b1, w2, b2].
void decode_specular_backward(const SpecularDecoder& decoder, std::span<const double> input, const Vec3& grad_out,
                              std::span<double> grad_input, std::span<double> grad_params);

} // namespace splatgeo
