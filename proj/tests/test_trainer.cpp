#include "splatgeo/error.hpp"
#include "splatgeo/gradients.hpp"
#include "splatgeo/trainer.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <random>

using namespace splatgeo;
namespace st = splatgeo::testing;

namespace {

std::vector<TrainView> random_views(std::uint64_t seed, int count, int size) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<TrainView> views;
    for (int i = 0; i < count; ++i) {
        const double a = 0.4 * i;
        const CameraView cam = st::small_camera(size, Vec3(2.0 * std::sin(a), 0.1, -2.0 * std::cos(a)));
        Image gt(size, size, 3), delit(size, size, 3), mask(size, size, 1), normal(size, size, 3);
        for (double& v : gt.data()) v = u(rng);
        for (double& v : delit.data()) v = u(rng);
        for (double& v : mask.data()) v = u(rng) < 0.3 ? 1.0 : 0.0;
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) normal.at(x, y, 2) = -1.0;
        views.push_back(make_train_view(cam, gt, delit, mask, normal));
    }
    return views;
}

TrainConfig quick_config(int iters1, int iters2) {
    TrainConfig cfg;
    cfg.iters_stage1 = iters1;
    cfg.iters_stage2 = iters2;
    cfg.render.threads = 1;
    cfg.densify_interval = 4;
    cfg.densify_threshold = 1e-6;
    return cfg;
}

} // namespace

TEST(Trainer, ZeroIterationsKeepTheInitialization) {
    const SceneFile init = st::scattered_scene(1, 40, st::small_meta());
    const auto views = random_views(2, 2, 16);
    const TrainState s = train_stage1(init, views, quick_config(0, 0));
    EXPECT_EQ(pack_params(s.scene), pack_params(init));
    EXPECT_EQ(s.iteration, 0);
}

TEST(Trainer, SingleGaussianFitsOnePixel) {
    const SceneMeta meta = st::small_meta(0);
    SceneFile scene = make_empty_scene(meta);
    Gaussian g = make_gaussian(meta);
    g.log_scale = Vec3(std::log(0.5), std::log(0.5), std::log(0.01));
    g.opacity_logit = 3.0;
    g.sh[0] = Vec3::Constant(0.5 / sh_const::C0);
    scene.gaussians.push_back(g);
    const CameraView cam = make_look_at_camera(Vec3(0, 0, -2), Vec3::Zero(), Vec3(0, -1, 0), 1.0, 1, 1);
    Image gt(1, 1, 3);
    gt.at(0, 0, 0) = 0.2;
    gt.at(0, 0, 1) = 0.6;
    gt.at(0, 0, 2) = 0.4;
    const std::vector<TrainView> views{make_train_view(cam, gt, gt, Image(1, 1, 1), Image(1, 1, 3))};
    TrainConfig cfg = quick_config(200, 0);
    cfg.densify_interval = 0;
    cfg.lr.sh_dc = 0.02;
    cfg.lr.opacity = 0.005;
    cfg.weights.lambda_t = cfg.weights.lambda_n = cfg.weights.lambda_f = 0.0;
    TrainLog log;
    train_stage1(scene, views, cfg, &log);
    ASSERT_EQ(log.rows().size(), 200u);
    EXPECT_LT(log.rows().back().parts.rgb, 1e-3);
}

TEST(Trainer, StageTwoFreezesOpacityAndTransparency) {
    const SceneFile init = st::scattered_scene(4, 60, st::small_meta());
    const auto views = random_views(5, 3, 16);
    const TrainConfig cfg = quick_config(8, 8);
    const TrainState s1 = train_stage1(init, views, cfg);
    const TrainState s2 = train_stage2(s1, views, cfg);
    ASSERT_EQ(s1.scene.size(), s2.scene.size());
    bool appearance_moved = false;
    for (std::size_t i = 0; i < s1.scene.size(); ++i) {
        EXPECT_EQ(s1.scene.gaussians[i].opacity_logit, s2.scene.gaussians[i].opacity_logit);
        EXPECT_EQ(s1.scene.gaussians[i].transparency_logit, s2.scene.gaussians[i].transparency_logit);
        appearance_moved |= s1.scene.gaussians[i].sh[0] != s2.scene.gaussians[i].sh[0];
    }
    EXPECT_TRUE(appearance_moved);
    EXPECT_NE(s1.scene.bank.decoder.b2, s2.scene.bank.decoder.b2);
}

TEST(Trainer, StageTwoWithoutStepsRendersLikeStageOne) {
    const SceneFile init = st::scattered_scene(6, 50, st::small_meta());
    const auto views = random_views(7, 2, 16);
    TrainState s1 = train_stage1(init, views, quick_config(4, 0));
    auto& dec = s1.scene.bank.decoder;
    std::fill(dec.w2.begin(), dec.w2.end(), 0.0);
    std::fill(dec.b2.begin(), dec.b2.end(), -1e3); // sigmoid output underflows to 0
    const TrainState s2 = train_stage2(s1, views, quick_config(4, 0));
    EXPECT_EQ(pack_params(s2.scene), pack_params(s1.scene));
    RenderSettings rs;
    rs.threads = 1;
    for (const TrainView& v : views) {
        const RenderBundle one = render_view(s1.scene, v.camera, 1, rs);
        const RenderBundle two = render_view(s2.scene, v.camera, 2, rs);
        EXPECT_EQ(one.color.data(), two.color.data());
    }
}

TEST(Trainer, FrozenGroupsIgnoreGradients) {
    const SceneFile scene = st::scattered_scene(6, 10, st::small_meta());
    TrainState s = make_train_state(scene, 2);
    s.frozen[static_cast<int>(ParamGroup::Opacity)] = true;
    s.frozen[static_cast<int>(ParamGroup::Transparency)] = true;
    const ParamLayout layout = layout_for(scene);
    const std::vector<double> grad(layout.size(), 1.0);
    adam_step(s, grad, TrainConfig{}, 1e-3);
    const auto before = pack_params(scene), after = pack_params(s.scene);
    for (std::size_t i = 0; i < layout.size(); ++i) {
        const ParamGroup g = layout.group_of(i);
        if (g == ParamGroup::Opacity || g == ParamGroup::Transparency)
            EXPECT_EQ(after[i], before[i]);
        else
            EXPECT_NE(after[i], before[i]) << to_string(g);
    }
}

TEST(Trainer, SameSeedSameScene) {
    const SceneFile init = st::scattered_scene(7, 50, st::small_meta());
    const auto views = random_views(8, 2, 16);
    const TrainConfig cfg = quick_config(10, 0);
    const TrainState a = train_stage1(init, views, cfg);
    const TrainState b = train_stage1(init, views, cfg);
    EXPECT_EQ(pack_params(a.scene), pack_params(b.scene));
    EXPECT_EQ(a.first_moment, b.first_moment);
}

TEST(Trainer, LossDecreasesOnItsViews) {
    const SceneFile init = st::scattered_scene(9, 60, st::small_meta());
    const auto views = random_views(10, 2, 16);
    TrainLog log;
    TrainConfig cfg = quick_config(40, 0);
    cfg.densify_interval = 0;
    train_stage1(init, views, cfg, &log);
    EXPECT_LT(log.rows().back().total, log.rows().front().total);
}

TEST(Trainer, CheckpointRoundTrip) {
    SceneFile init = st::scattered_scene(11, 20, st::small_meta());
    round_to_storage(init);
    const auto views = random_views(12, 1, 16);
    TrainConfig cfg = quick_config(3, 0);
    cfg.densify_interval = 0;
    TrainState s = train_stage1(init, views, cfg);
    round_to_storage(s.scene);
    s.frozen[static_cast<int>(ParamGroup::Opacity)] = true;
    const auto dir = std::filesystem::temp_directory_path() / "splatgeo_tests" / "ckpt";
    save_checkpoint(s, dir);
    const TrainState r = load_checkpoint(dir);
    EXPECT_EQ(pack_params(r.scene), pack_params(s.scene));
    EXPECT_EQ(r.first_moment, s.first_moment);
    EXPECT_EQ(r.second_moment, s.second_moment);
    EXPECT_EQ(r.step_count, s.step_count);
    EXPECT_EQ(r.frozen, s.frozen);
    EXPECT_EQ(r.iteration, s.iteration);
    EXPECT_EQ(r.stage, s.stage);
}

TEST(Densify, NoGradientsLeaveTheSceneUnchanged) {
    const SceneFile scene = st::scattered_scene(13, 15, st::small_meta());
    TrainState s = make_train_state(scene, 1);
    densify_and_prune(s, TrainConfig{}, 1);
    EXPECT_EQ(pack_params(s.scene), pack_params(scene));
}

TEST(Densify, CloneCopiesThePayload) {
    SceneFile scene = st::scattered_scene(14, 3, st::small_meta());
    for (auto& g : scene.gaussians) g.opacity_logit = 1.0;
    TrainState s = make_train_state(scene, 1);
    s.screen_grad_sum[1] = 1.0;
    s.screen_grad_views[1] = 1;
    TrainConfig cfg;
    cfg.split_scale = 1.0;
    densify_and_prune(s, cfg, 2);
    ASSERT_EQ(s.scene.size(), 4u);
    const Gaussian& parent = s.scene.gaussians[1];
    const Gaussian& child = s.scene.gaussians[3];
    EXPECT_EQ(parent.center, scene.gaussians[1].center);
    EXPECT_NE(child.center, parent.center);
    EXPECT_LT((child.center - parent.center).norm(), 10.0 * activate(parent).scale.maxCoeff());
    EXPECT_EQ(child.rotation, parent.rotation);
    EXPECT_EQ(child.log_scale, parent.log_scale);
    EXPECT_EQ(child.opacity_logit, parent.opacity_logit);
    EXPECT_EQ(child.sh, parent.sh);
    EXPECT_EQ(child.transparency_logit, parent.transparency_logit);
    EXPECT_EQ(child.asg_amplitudes, parent.asg_amplitudes);
    EXPECT_EQ(s.first_moment.size(), layout_for(s.scene).size());
}

TEST(Densify, PruneKeepsOneRecord) {
    SceneFile scene = st::scattered_scene(15, 8, st::small_meta());
    for (auto& g : scene.gaussians) g.opacity_logit = logit(1e-4);
    TrainState s = make_train_state(scene, 1);
    densify_and_prune(s, TrainConfig{}, 3);
    EXPECT_EQ(s.scene.size(), 1u);
}

TEST(Densify, RespectsTheCountCap) {
    const SceneFile scene = st::scattered_scene(16, 10, st::small_meta());
    TrainState s = make_train_state(scene, 1);
    for (std::size_t i = 0; i < scene.size(); ++i) {
        s.screen_grad_sum[i] = 1.0;
        s.screen_grad_views[i] = 1;
    }
    TrainConfig cfg;
    cfg.max_gaussians = 13;
    cfg.prune_opacity = 0.0;
    densify_and_prune(s, cfg, 4);
    EXPECT_EQ(s.scene.size(), 13u);
}
