#include "splatgeo/appearance.hpp"
#include "splatgeo/error.hpp"
#include "splatgeo/image_quality.hpp"
#include "splatgeo/losses.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace splatgeo;

namespace {

Image random_image(std::uint64_t seed, int w, int h, int c) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Image img(w, h, c);
    for (double& v : img.data()) v = u(rng);
    return img;
}

// Real SH with the Condon-Shortley phase, from the associated Legendre
// functions of the standard library (which omit that phase).
double real_sh(int l, int m, const Vec3& d) {
    const double theta = std::acos(std::clamp(d.z(), -1.0, 1.0));
    const double phi = std::atan2(d.y(), d.x());
    const int am = std::abs(m);
    const double k = std::sqrt((2.0 * l + 1.0) / (4.0 * std::numbers::pi) * std::tgamma(l - am + 1.0) /
                               std::tgamma(l + am + 1.0));
    const double p = std::assoc_legendre(l, am, std::cos(theta));
    const double phase = (am % 2) ? -1.0 : 1.0;
    if (m == 0) return k * p;
    if (m > 0) return phase * std::sqrt(2.0) * k * std::cos(am * phi) * p;
    return phase * std::sqrt(2.0) * k * std::sin(am * phi) * p;
}

// Direct per-pixel SSIM: explicit 2-D window sums with zero padding.
double ssim_oracle(const Image& a, const Image& b) {
    const int r = 5;
    const double s = 1.5;
    std::vector<double> k1(2 * r + 1);
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) sum += k1[i + r] = std::exp(-i * i / (2 * s * s));
    for (double& v : k1) v /= sum;
    const double c1 = 1e-4, c2 = 9e-4;
    double total = 0.0;
    for (int c = 0; c < a.channels(); ++c)
        for (int y = 0; y < a.height(); ++y)
            for (int x = 0; x < a.width(); ++x) {
                double ma = 0, mb = 0, aa = 0, bb = 0, ab = 0;
                for (int dy = -r; dy <= r; ++dy)
                    for (int dx = -r; dx <= r; ++dx) {
                        const int xx = x + dx, yy = y + dy;
                        if (xx < 0 || yy < 0 || xx >= a.width() || yy >= a.height()) continue;
                        const double w = k1[dx + r] * k1[dy + r];
                        const double va = a.at(xx, yy, c), vb = b.at(xx, yy, c);
                        ma += w * va;
                        mb += w * vb;
                        aa += w * va * va;
                        bb += w * vb * vb;
                        ab += w * va * vb;
                    }
                const double sa = aa - ma * ma, sb = bb - mb * mb, sab = ab - ma * mb;
                total += (2 * ma * mb + c1) * (2 * sab + c2) / ((ma * ma + mb * mb + c1) * (sa + sb + c2));
            }
    return total / (static_cast<double>(a.pixel_count()) * a.channels());
}

CameraView frontal_camera(int size) {
    return make_look_at_camera(Vec3::Zero(), Vec3(0, 0, 1), Vec3(0, -1, 0), size, size, size);
}

} // namespace

TEST(SphericalHarmonics, BasisMatchesLegendreConstruction) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n;
    for (int trial = 0; trial < 50; ++trial) {
        const Vec3 d = Vec3(n(rng), n(rng), n(rng)).normalized();
        double basis[16];
        sh_basis(3, d.x(), d.y(), d.z(), basis);
        for (int l = 0; l <= 3; ++l)
            for (int m = -l; m <= l; ++m) EXPECT_NEAR(basis[l * l + l + m], real_sh(l, m, d), 1e-12) << l << "," << m;
    }
}

TEST(SphericalHarmonics, DcOnlyIsViewIndependentAndClamped) {
    std::vector<Vec3> coeffs(9, Vec3::Zero());
    coeffs[0] = Vec3(0.5, -0.2, 1.0) / sh_const::C0;
    for (const Vec3& d : {Vec3(1, 0, 0), Vec3(0, 0.6, 0.8)}) {
        const Vec3 c = sh_eval(coeffs, d);
        EXPECT_NEAR(c.x(), 0.5, 1e-15);
        EXPECT_EQ(c.y(), 0.0);
        EXPECT_NEAR(c.z(), 1.0, 1e-15);
    }
}

TEST(Asg, LobeResponseOnAxisAndBehind) {
    AsgLobe lobe;
    lobe.log_lambda = std::log(3.0);
    lobe.log_mu = std::log(2.0);
    EXPECT_DOUBLE_EQ(asg_lobe_response(lobe, Vec3(1, 0, 0)), 1.0);
    EXPECT_EQ(asg_lobe_response(lobe, Vec3(-1, 0, 0)), 0.0);
    const Vec3 q = Vec3(1, 0.3, 0.2).normalized();
    EXPECT_NEAR(asg_lobe_response(lobe, q), std::exp(-3 * q.y() * q.y() - 2 * q.z() * q.z()) * q.x(), 1e-15);
}

TEST(Asg, QueryIsTheMirrorDirection) {
    const ViewContext v{Vec3(0, 0, 1), Vec3(0, 0, -1)};
    EXPECT_LT((asg_query_direction(v) - Vec3(0, 0, -1)).norm(), 1e-15);
    const ViewContext t{Vec3(1, 0, 1).normalized(), Vec3(0, 0, -1)};
    EXPECT_LT((asg_query_direction(t) - Vec3(1, 0, -1).normalized()).norm(), 1e-15);
}

TEST(Asg, PositionalEncodingLayout) {
    const Vec3 d(0.25, -0.5, 0.125);
    const auto pe = positional_encoding(d, 2);
    ASSERT_EQ(pe.size(), 12u);
    EXPECT_NEAR(pe[0], std::sin(std::numbers::pi * 0.25), 1e-15);
    EXPECT_NEAR(pe[9], std::cos(2 * std::numbers::pi * 0.25), 1e-15);
}

TEST(Appearance, StageOneIgnoresTheSpecularPath) {
    const SceneMeta meta = splatgeo::testing::small_meta(1);
    const SceneFile scene = splatgeo::testing::gradient_scene(3, 1, meta);
    const Gaussian& g = scene.gaussians[0];
    const ViewContext v{Vec3(0.1, 0.2, 1).normalized(), Vec3(0, 0, -1)};
    const Vec3 c1 = full_color(g.sh, g.asg_amplitudes, v, 1, scene.bank);
    const Vec3 diffuse = sh_eval(g.sh, v.view_dir).cwiseMin(1.0);
    EXPECT_LT((c1 - diffuse).norm(), 1e-15);
    std::vector<double> zeros(g.asg_amplitudes.size(), 0.0);
    const Vec3 c2 = full_color(g.sh, zeros, v, 2, scene.bank);
    const Vec3 spec = specular_color(scene.bank, zeros, v);
    EXPECT_LT((c2 - (sh_eval(g.sh, v.view_dir) + spec).cwiseMin(1.0).cwiseMax(0.0)).norm(), 1e-15);
}

TEST(Losses, HybridDelightBlendsByMask) {
    Image gt(2, 1, 3, 0.8), delit(2, 1, 3, 0.2), mask(2, 1, 1);
    mask.at(1, 0) = 1.0;
    const Image h = hybrid_delight(gt, delit, mask);
    EXPECT_EQ(h.at(0, 0, 1), 0.8);
    EXPECT_EQ(h.at(1, 0, 1), 0.2);
}

TEST(Losses, RgbOnConstantImages) {
    const int w = 20, h = 14;
    const double a = 0.5, b = 0.3, lambda = 0.2;
    EXPECT_EQ(rgb_loss(Image(w, h, 3, a), Image(w, h, 3, a), lambda), 0.0);
    // Window mass inside the image at each pixel; constant images then have
    // closed-form local statistics.
    const auto k = gaussian_kernel(11, 1.5);
    auto mass = [&](int p, int n) {
        double m = 0.0;
        for (int i = -5; i <= 5; ++i)
            if (p + i >= 0 && p + i < n) m += k[i + 5];
        return m;
    };
    double s = 0.0;
    const double c1 = 1e-4, c2 = 9e-4;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double W = mass(x, w) * mass(y, h);
            const double v = W * (1.0 - W);
            s += (2 * a * b * W * W + c1) * (2 * a * b * v + c2) / (((a * a + b * b) * W * W + c1) * ((a * a + b * b) * v + c2));
        }
    s /= w * h;
    const double expected = (1.0 - lambda) * 0.2 + lambda * (1.0 - s);
    EXPECT_NEAR(rgb_loss(Image(w, h, 3, a), Image(w, h, 3, b), lambda), expected, 1e-12);
    EXPECT_NEAR(l1_loss(Image(w, h, 3, a), Image(w, h, 3, b)), 0.2, 1e-12);
}

TEST(Losses, TransparencyBceMatchesElementwiseFormula) {
    Image p = random_image(8, 9, 7, 1), y(9, 7, 1);
    for (int i = 0; i < 9; i += 2) y.at(i, 3) = 1.0;
    double expected = 0.0;
    for (std::size_t i = 0; i < p.data().size(); ++i) {
        const double q = std::clamp(p.data()[i], kBceEpsilon, 1.0 - kBceEpsilon);
        expected -= y.data()[i] * std::log(q) + (1 - y.data()[i]) * std::log(1 - q);
    }
    EXPECT_NEAR(transparency_loss(p, y), expected / p.data().size(), 1e-12);
    Image exact(3, 3, 1, 1.0);
    EXPECT_LT(transparency_loss(exact, exact), 1e-5);
}

TEST(Losses, NormalPriorMasking) {
    Image n(4, 4, 3), same(4, 4, 3), perp(4, 4, 3), opposed(4, 4, 3);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) {
            n.at(x, y, 2) = -1.0;
            same.at(x, y, 2) = -3.0;
            perp.at(x, y, 0) = 1.0;
            opposed.at(x, y, 2) = 1.0;
        }
    EXPECT_NEAR(normal_prior_loss(n, same, 0.0), 0.0, 1e-15);
    EXPECT_NEAR(normal_prior_loss(n, perp, 0.0), 1.0, 1e-15);
    EXPECT_EQ(normal_prior_loss(n, opposed, 0.0), 0.0);
}

TEST(Losses, ConsistencyOfPlanes) {
    const int size = 24;
    const CameraView cam = frontal_camera(size);
    Image flat(size, size, 1, 1.5), tilted(size, size, 1), nflat(size, size, 3), ntilt(size, size, 3);
    const Vec3 plane_n = Vec3(1, 0, -1).normalized();
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const Vec3 r = cam.pixel_ray(x, y);
            tilted.at(x, y) = 1.0 / (1.0 - r.x()); // plane z = 1 + x
            nflat.at(x, y, 2) = -1.0;
            for (int c = 0; c < 3; ++c) ntilt.at(x, y, c) = plane_n[c];
        }
    EXPECT_LT(depth_normal_consistency(flat, nflat, cam), 1e-6);
    const Image nd = depth_to_normal(tilted, cam);
    for (int y = 1; y < size - 1; ++y)
        for (int x = 1; x < size - 1; ++x)
            EXPECT_LT((Vec3(nd.at(x, y, 0), nd.at(x, y, 1), nd.at(x, y, 2)) - plane_n).norm(), 1e-4);
    EXPECT_LT(depth_normal_consistency(tilted, ntilt, cam), 1e-8);
}

TEST(Losses, ConsistencySkipsHolesAndBorder) {
    const int size = 12;
    const CameraView cam = frontal_camera(size);
    Image depth(size, size, 1, 1.0), normal(size, size, 3);
    depth.at(5, 5) = 0.0;
    const Image nd = depth_to_normal(depth, cam);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const bool border = x == 0 || y == 0 || x == size - 1 || y == size - 1;
            const bool near_hole = std::abs(x - 5) + std::abs(y - 5) <= 1;
            const double len = std::abs(nd.at(x, y, 2));
            EXPECT_EQ(len, border || near_hole ? 0.0 : 1.0) << x << "," << y;
        }
    // Zero rendered normals give 1 per valid pixel, so the mean stays exactly 1.
    EXPECT_DOUBLE_EQ(depth_normal_consistency(depth, normal, cam), 1.0);
}

TEST(Losses, FlattenSumsSmallestScales) {
    SceneFile scene = make_empty_scene(splatgeo::testing::small_meta());
    Gaussian g = make_gaussian(scene.meta);
    g.log_scale = Vec3(std::log(0.3), std::log(0.2), std::log(0.5));
    scene.gaussians.push_back(g);
    EXPECT_NEAR(flatten_loss(scene), 0.2, 1e-15);
    g.log_scale = Vec3(0.0, 0.0, std::log(1e-9));
    scene.gaussians = {g, g};
    EXPECT_NEAR(flatten_loss(scene), 2e-9, 1e-20);
}

TEST(Losses, StageTotalArithmetic) {
    const LossWeights w;
    EXPECT_EQ(stage_total(1, LossParts{}, w), 0.0);
    const LossParts parts{1.0, 1.0, 1.0, 0.0, 1.0};
    EXPECT_EQ(stage_total(1, parts, w), 101.2);
    EXPECT_EQ(stage_total(2, parts, w), 101.2);
    LossParts bad = parts;
    bad.consistency = std::nan("");
    try {
        stage_total(1, bad, w);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NonfinitePart);
        EXPECT_NE(std::string(e.what()).find("consistency"), std::string::npos);
    }
}

TEST(ImageQuality, PsnrValues) {
    EXPECT_EQ(psnr(Image(8, 8, 3, 0.3), Image(8, 8, 3, 0.3)), 100.0);
    EXPECT_NEAR(psnr(Image(8, 8, 3, 0.0), Image(8, 8, 3, 0.5)), 10.0 * std::log10(4.0), 1e-12);
    EXPECT_THROW(psnr(Image(8, 8, 3), Image(8, 7, 3)), Error);
}

TEST(ImageQuality, SsimMatchesDirectFormula) {
    const Image a = random_image(1, 17, 13, 3), b = random_image(2, 17, 13, 3);
    EXPECT_NEAR(ssim(a, b), ssim_oracle(a, b), 1e-9);
    EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
}
