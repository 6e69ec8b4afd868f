#include "gradient_checks.hpp"

#include <gtest/gtest.h>

using namespace splatgeo;
using namespace splatgeo::gradcheck;

namespace {

void expect_check(const CheckResult& r) {
    ::testing::Test::RecordProperty("relative_error", std::to_string(r.error));
    EXPECT_LT(r.error, r.tolerance) << r.name;
}

} // namespace

TEST(GradientCheck, ColorL1) { expect_check(color_l1()); }
TEST(GradientCheck, ColorSsimPath) { expect_check(color_ssim()); }
TEST(GradientCheck, StageTwoColorReachesBank) { expect_check(stage_two_color()); }
TEST(GradientCheck, TransparencyBce) { expect_check(transparency_bce()); }
TEST(GradientCheck, NormalPrior) { expect_check(normal_prior()); }
TEST(GradientCheck, DepthNormalConsistency) { expect_check(depth_normal()); }
TEST(GradientCheck, Flatten) { expect_check(flatten()); }
TEST(GradientCheck, StageOneTotal) { expect_check(stage_total_check(1)); }
TEST(GradientCheck, StageTwoTotal) { expect_check(stage_total_check(2)); }
TEST(GradientCheck, DecoderParameters) { expect_check(decoder_parameters()); }

TEST(Backward, DuplicatedViewsDoubleTheGradient) {
    auto p = find_problem(1, 12);
    TrainView view = make_train_view(p.cam, random_image(16, 16, 3, 31), random_image(16, 16, 3, 32),
                                     Image(16, 16, 1, 1.0), p.prior);
    LossWeights w;
    const std::size_t n = layout_for(p.scene).size();
    std::vector<double> one(n, 0.0), two(n, 0.0);
    evaluate_views(p.scene, std::span<const TrainView>(&view, 1), 1, w, p.rs, one);
    const std::vector<TrainView> both{view, view};
    evaluate_views(p.scene, both, 1, w, p.rs, two);
    for (std::size_t k = 0; k < n; ++k) ASSERT_EQ(two[k], 2.0 * one[k]) << k;
}
