#include "splatgeo/image_quality.hpp"

#include <cmath>

namespace splatgeo {

std::vector<double> gaussian_kernel(int size, double sigma) {
    std::vector<double> k(size);
    const double mid = (size - 1) / 2.0;
    double sum = 0.0;
    for (int i = 0; i < size; ++i) {
        k[i] = std::exp(-(i - mid) * (i - mid) / (2.0 * sigma * sigma));
        sum += k[i];
    }
    for (double& v : k) v /= sum;
    return k;
}

Image blur(const Image& in, const std::vector<double>& kernel) {
    const int w = in.width(), h = in.height(), ch = in.channels();
    const int r = static_cast<int>(kernel.size()) / 2;
    Image tmp(w, h, ch), out(w, h, ch);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < ch; ++c) {
                double s = 0.0;
                for (int k = -r; k <= r; ++k) {
                    const int xx = x + k;
                    if (xx >= 0 && xx < w) s += kernel[k + r] * in.at(xx, y, c);
                }
                tmp.at(x, y, c) = s;
            }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < ch; ++c) {
                double s = 0.0;
                for (int k = -r; k <= r; ++k) {
                    const int yy = y + k;
                    if (yy >= 0 && yy < h) s += kernel[k + r] * tmp.at(x, yy, c);
                }
                out.at(x, y, c) = s;
            }
    return out;
}

namespace {

Image multiply(const Image& a, const Image& b) {
    Image out(a.width(), a.height(), a.channels());
    for (std::size_t i = 0; i < a.data().size(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
    return out;
}

double ssim_impl(const Image& a, const Image& b, Image* grad_a, const SsimSettings& s) {
    require_same_shape(a, b, "ssim");
    const auto kernel = gaussian_kernel(s.window, s.sigma);
    const Image mu_a = blur(a, kernel);
    const Image mu_b = blur(b, kernel);
    const Image aa = blur(multiply(a, a), kernel);
    const Image bb = blur(multiply(b, b), kernel);
    const Image ab = blur(multiply(a, b), kernel);

    const std::size_t n = a.data().size();
    const double scale = 1.0 / static_cast<double>(n);
    double total = 0.0;
    Image d_mu, d_var, d_cov;
    if (grad_a) {
        d_mu = Image(a.width(), a.height(), a.channels());
        d_var = d_mu;
        d_cov = d_mu;
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double ma = mu_a.data()[i], mb = mu_b.data()[i];
        const double va = aa.data()[i] - ma * ma;
        const double vb = bb.data()[i] - mb * mb;
        const double cov = ab.data()[i] - ma * mb;
        const double a1 = 2.0 * ma * mb + s.c1, a2 = 2.0 * cov + s.c2;
        const double b1 = ma * ma + mb * mb + s.c1, b2 = va + vb + s.c2;
        const double map = a1 * a2 / (b1 * b2);
        total += map;
        if (grad_a) {
            const double g_mu = (2.0 * mb * a2) / (b1 * b2) - map * 2.0 * ma / b1;
            const double g_var = -map / b2;
            const double g_cov = 2.0 * a1 / (b1 * b2);
            // var = E[a^2] - mu^2 and cov = E[ab] - mu_a mu_b also depend on mu_a
            d_mu.data()[i] = scale * (g_mu - 2.0 * ma * g_var - mb * g_cov);
            d_var.data()[i] = scale * g_var;
            d_cov.data()[i] = scale * g_cov;
        }
    }
    if (grad_a) {
        // The symmetric zero-padded blur is its own adjoint.
        const Image t_mu = blur(d_mu, kernel);
        const Image t_var = blur(d_var, kernel);
        const Image t_cov = blur(d_cov, kernel);
        *grad_a = Image(a.width(), a.height(), a.channels());
        for (std::size_t i = 0; i < n; ++i)
            grad_a->data()[i] = t_mu.data()[i] + 2.0 * a.data()[i] * t_var.data()[i] + b.data()[i] * t_cov.data()[i];
    }
    return total * scale;
}

} // namespace

double ssim(const Image& a, const Image& b, const SsimSettings& settings) { return ssim_impl(a, b, nullptr, settings); }

double ssim_backward(const Image& a, const Image& b, Image& grad_a, const SsimSettings& settings) {
    return ssim_impl(a, b, &grad_a, settings);
}

double psnr(const Image& a, const Image& b) {
    require_same_shape(a, b, "psnr");
    double se = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        se += d * d;
    }
    const double mse = se / static_cast<double>(a.data().size());
    if (mse < 1e-10) return 100.0;
    return 10.0 * std::log10(1.0 / mse);
}

double psnr_masked(const Image& a, const Image& b, const Image& mask) {
    require_same_shape(a, b, "psnr");
    double se = 0.0;
    std::size_t count = 0;
    for (int y = 0; y < a.height(); ++y)
        for (int x = 0; x < a.width(); ++x) {
            if (mask.at(x, y) <= 0.5) continue;
            for (int c = 0; c < a.channels(); ++c) {
                const double d = a.at(x, y, c) - b.at(x, y, c);
                se += d * d;
                ++count;
            }
        }
    if (count == 0) return 100.0;
    const double mse = se / static_cast<double>(count);
    if (mse < 1e-10) return 100.0;
    return 10.0 * std::log10(1.0 / mse);
}

} // namespace splatgeo
