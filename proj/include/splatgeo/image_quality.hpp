#pragma once

#include "splatgeo/image.hpp"

namespace splatgeo {

struct SsimSettings {
    int window = 11;
    double sigma = 1.5;
    double c1 = 0.01 * 0.01;
    double c2 = 0.03 * 0.03;
};

// Mean SSIM over pixels, computed per channel and averaged. Local statistics
// use a normalised Gaussian window with zero padding at the borders.
double ssim(const Image& a, const Image& b, const SsimSettings& settings = {});

// Same value as ssim(); also writes d ssim / d a into grad_a.
double ssim_backward(const Image& a, const Image& b, Image& grad_a, const SsimSettings& settings = {});

// 10 log10(1 / MSE), capped at 100 dB.
double psnr(const Image& a, const Image& b);

// PSNR restricted to pixels where mask > 0.5.
double psnr_masked(const Image& a, const Image& b, const Image& mask);

// 1-D normalised Gaussian kernel.
std::vector<double> gaussian_kernel(int size, double sigma);

// Separable "same" convolution with zero padding, applied per channel.
Image blur(const Image& in, const std::vector<double>& kernel);

} // namespace splatgeo
