// Acceptance checks. `acceptance --criterion N` runs one criterion and prints
// one line: "criterion N PASS|FAIL: <measurements>". Exit 0 on PASS, 1 on
// FAIL, 77 when the criterion cannot be measured on this machine.

#include "splatgeo/config.hpp"
#include "splatgeo/dataset.hpp"
#include "splatgeo/depth.hpp"
#include "splatgeo/error.hpp"
#include "splatgeo/image_quality.hpp"
#include "splatgeo/losses.hpp"
#include "splatgeo/mesh.hpp"
#include "splatgeo/metrics.hpp"
#include "splatgeo/parallel.hpp"
#include "splatgeo/pipeline.hpp"
#include "splatgeo/rasterizer.hpp"
#include "splatgeo/synth.hpp"
#include "splatgeo/trainer.hpp"

#include "../gradient_checks.hpp"
#include "../oracles.hpp"
#include "../test_support.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <thread>

using namespace splatgeo;
namespace fs = std::filesystem;

namespace {

constexpr int kPass = 0;
constexpr int kFail = 1;
constexpr int kUnmeasurable = 77;

fs::path g_work = fs::temp_directory_path() / "splatgeo_acceptance";

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

int report(int n, bool pass, const std::string& detail) {
    std::printf("criterion %d %s: %s\n", n, pass ? "PASS" : "FAIL", detail.c_str());
    return pass ? kPass : kFail;
}

// 1. Window search equals the exhaustive anchored-window oracle.
int criterion1() {
    std::mt19937_64 rng(101);
    WindowSearchConfig cfg;
    std::vector<std::vector<SplatFragment>> lists;
    for (int i = 0; i < 10000; ++i) lists.push_back(oracle::random_fragments(rng, 1 + rng() % 200));
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<FirstSurface> got;
    got.reserve(lists.size());
    for (const auto& f : lists) got.push_back(first_surface_depth(f, cfg));
    const double secs = seconds_since(t0);
    std::size_t mismatches = 0, found = 0;
    double max_dd = 0.0;
    for (std::size_t i = 0; i < lists.size(); ++i) {
        const auto ref = oracle::first_surface(lists[i], cfg.window, cfg.t_start, cfg.t_end);
        const FirstSurface& g = got[i];
        if (ref.found != g.found) {
            ++mismatches;
            continue;
        }
        if (!ref.found) continue;
        ++found;
        if (ref.weight != g.weight || ref.anchor != g.anchor) ++mismatches;
        max_dd = std::max(max_dd, std::abs(ref.depth - g.depth));
    }
    const bool pass = mismatches == 0 && max_dd <= 1e-12 && secs < 10.0;
    return report(1, pass,
                  fmt("10000 lists (%zu with candidates), window mismatches %zu, max |dD| %.2e (<= 1e-12), %.2f s (< 10 s)",
                      found, mismatches, max_dd, secs));
}

// 2. First-surface depth stays within the window on plate-over-wall scenes
//    while the unbiased depth shows the dilemma.
int criterion2() {
    WindowSearchConfig cfg;
    RenderSettings rs;
    double worst_first = 0.0, least_unbiased = 1e9;
    SynthSpec base;
    const double gap = base.wall_depth - base.plate_depth;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        SynthSpec spec;
        spec.seed = seed;
        const SynthResult r = generate(spec);
        const DilemmaReport rep = dilemma_report(r.scene, r.truth, cfg, rs);
        worst_first = std::max(worst_first, rep.row("first").max_abs);
        least_unbiased = std::min(least_unbiased, rep.row("unbiased").mean_abs);
    }
    const bool pass = worst_first <= cfg.window && least_unbiased >= 0.3 * gap;
    return report(2, pass,
                  fmt("20 seeds: max |D_first - d1| %.2e m (<= %.3f), min over seeds of mean |D_unbiased - d1| %.4f m "
                      "(>= %.3f)",
                      worst_first, cfg.window, least_unbiased, 0.3 * gap));
}

// 3. Nearest depth is pulled forward by floaters, first-surface depth is not.
int criterion3() {
    WindowSearchConfig cfg;
    RenderSettings rs;
    const double dt = cfg.window;
    double worst_nearest_mean = -1e9, least_nearest_max = 1e9, worst_first_mean = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        SynthSpec spec;
        spec.scenario = Scenario::FloaterField;
        spec.seed = seed;
        const SynthResult r = generate(spec);
        const DilemmaReport rep = dilemma_report(r.scene, r.truth, cfg, rs);
        worst_nearest_mean = std::max(worst_nearest_mean, rep.row("nearest").mean_signed);
        least_nearest_max = std::min(least_nearest_max, rep.row("nearest").max_abs);
        worst_first_mean = std::max(worst_first_mean, rep.row("first").mean_abs);
    }
    const bool pass = worst_nearest_mean < -5 * dt && least_nearest_max > 10 * dt && worst_first_mean <= 2 * dt;
    return report(3, pass,
                  fmt("5 seeds: nearest signed mean <= %.4f m (< %.3f), nearest max >= %.4f m (> %.3f), "
                      "first mean |err| <= %.2e m (<= %.3f)",
                      worst_nearest_mean, -5 * dt, least_nearest_max, 10 * dt, worst_first_mean, 2 * dt));
}

// 4. Compositing equals the double-loop oracle; transmittance is monotone and
//    the accumulated weight conserves.
int criterion4() {
    std::mt19937_64 rng(404);
    double max_err = 0.0, max_conservation = 0.0;
    std::size_t non_monotone = 0, mask_mismatch = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        auto f = oracle::random_fragments(rng, 1 + rng() % 200);
        const auto ref = oracle::composite(f, 1e-4, 0.5);
        const PixelOutputs out = composite(f, 1e-4, 0.5);
        max_err = std::max({max_err, (out.color - ref.color).norm(), (out.normal - ref.normal).norm(),
                            std::abs(out.depth - ref.depth), std::abs(out.distance - ref.distance),
                            std::abs(out.alpha - ref.alpha), std::abs(out.transmittance - ref.t_final)});
        if (f.size() != ref.used) ++mask_mismatch;
        if (out.mask != ref.mask) ++mask_mismatch;
        for (std::size_t i = 0; i < f.size(); ++i) {
            max_err = std::max(max_err, std::abs(f[i].transmittance - ref.transmittance[i]));
            if (i > 0 && f[i].transmittance > f[i - 1].transmittance) ++non_monotone;
        }
        max_conservation = std::max(max_conservation, std::abs(out.alpha - (1.0 - out.transmittance)));
    }
    const bool pass = max_err <= 1e-12 && max_conservation <= 1e-12 && non_monotone == 0 && mask_mismatch == 0;
    return report(4, pass,
                  fmt("10000 lists: max oracle deviation %.2e (<= 1e-12), |sum T a - (1 - T_final)| %.2e (<= 1e-12), "
                      "monotonicity violations %zu, mask/length mismatches %zu",
                      max_err, max_conservation, non_monotone, mask_mismatch));
}

// 5. Analytic gradients against central finite differences.
int criterion5() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto results = gradcheck::all_checks();
    const double secs = seconds_since(t0);
    bool pass = secs < 60.0;
    std::string detail;
    for (const auto& r : results) {
        pass = pass && r.passed();
        detail += fmt("%s %.1e (< %.0e); ", r.name.c_str(), r.error, r.tolerance);
    }
    detail += fmt("%.1f s (< 60 s)", secs);
    return report(5, pass, detail);
}

// 6. Total-loss arithmetic and the rgb loss on constant images.
int criterion6() {
    const LossParts parts{1.0, 1.0, 1.0, 0.0, 1.0};
    const double total = stage_total(1, parts, LossWeights{});
    // Constant images: the zero-padded window sees mass W inside the image, so
    // mu = W v, sigma^2 = v^2 W (1 - W), sigma_ab = a b W (1 - W).
    const int w = 24, h = 16;
    const double a = 0.7, b = 0.25, lambda = 0.2, c1 = 1e-4, c2 = 9e-4;
    const auto k = gaussian_kernel(11, 1.5);
    auto mass = [&](int p, int n) {
        double m = 0.0;
        for (int i = -5; i <= 5; ++i)
            if (p + i >= 0 && p + i < n) m += k[i + 5];
        return m;
    };
    double s = 0.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double W = mass(x, w) * mass(y, h), v = W * (1.0 - W);
            s += (2 * a * b * W * W + c1) * (2 * a * b * v + c2) / (((a * a + b * b) * W * W + c1) * ((a * a + b * b) * v + c2));
        }
    s /= w * h;
    const double expected = (1.0 - lambda) * std::abs(a - b) + lambda * (1.0 - s);
    const double got = rgb_loss(Image(w, h, 3, a), Image(w, h, 3, b), lambda);
    const double same = rgb_loss(Image(w, h, 3, a), Image(w, h, 3, a), lambda);
    const bool pass = total == 101.2 && std::abs(got - expected) < 1e-12 && same == 0.0;
    return report(6, pass,
                  fmt("total with unit parts %.17g (== 101.2), rgb(0.7 vs 0.25) %.15f vs hand %.15f, rgb(identical) %g",
                      total, got, expected, same));
}

// 7. Stage 2 never changes opacity or transparency logits.
int criterion7() {
    SynthSpec spec;
    spec.views = 3;
    spec.width = spec.height = 48;
    spec.focal = 48.0;
    const SynthResult syn = generate(spec);
    std::vector<TrainView> views;
    for (const auto& v : syn.truth.views) views.push_back(make_train_view(v.camera, v.image, v.delit, v.mask, v.normal));
    TrainConfig cfg;
    cfg.iters_stage1 = 30;
    cfg.iters_stage2 = 30;
    cfg.densify_interval = 10;
    const fs::path out = g_work / "freeze";
    fs::remove_all(out);
    run_training(syn.init, views, cfg, out, 0);
    // Stage 2 again, resumed from the stage-1 checkpoint on disk.
    run_training(syn.init, views, cfg, out / "resumed", 2, out / "stage1");
    const TrainState s1 = load_checkpoint(out / "stage1");
    std::size_t changed = 0, checked = 0, appearance_moved = 0;
    for (const fs::path& dir : {out / "stage2", out / "resumed" / "stage2"}) {
        const TrainState s2 = load_checkpoint(dir);
        if (s2.scene.size() != s1.scene.size()) return report(7, false, "stage 2 changed the Gaussian count");
        for (std::size_t i = 0; i < s1.scene.size(); ++i) {
            const Gaussian &a = s1.scene.gaussians[i], &b = s2.scene.gaussians[i];
            changed += a.opacity_logit != b.opacity_logit;
            changed += a.transparency_logit != b.transparency_logit;
            appearance_moved += a.sh[0] != b.sh[0];
            checked += 2;
        }
    }
    const bool pass = changed == 0 && appearance_moved > 0;
    return report(7, pass,
                  fmt("%zu logits compared over two stage-2 runs, %zu changed (== 0); %zu records with updated colour",
                      checked, changed, appearance_moved));
}

// 8. synth -> train -> first-surface depth -> TSDF -> mesh -> metrics.
int criterion8() {
    ToolkitConfig cfg;
    cfg.finalize();
    const fs::path out = g_work / "pipeline";
    fs::remove_all(out);
    const auto t0 = std::chrono::steady_clock::now();
    const PipelineResult r = run_pipeline(cfg, out);
    const double secs = seconds_since(t0);
    const bool pass = r.metrics.chamfer < 0.01 && r.metrics.f1 > 0.7 && secs < 900.0;
    return report(8, pass,
                  fmt("CD %.5f m (< 0.01), F1 %.4f (> 0.7; P %.4f, R %.4f), %zu Gaussians, %zu triangles, %.0f s "
                      "(< 900 s; train %.0f s)",
                      r.metrics.chamfer, r.metrics.f1, r.metrics.precision, r.metrics.recall, r.gaussians,
                      r.mesh_triangles, secs, r.seconds_train));
}

// 9. Metric oracles.
int criterion9() {
    const TriMesh sphere = make_sphere_mesh(Vec3::Zero(), 0.3, 0.02);
    const double cd_same = chamfer_distance(sphere, sphere, 100000, 1);
    const double h = 0.05;
    const TriMesh a = make_rectangle_mesh(Vec3(0, 0, 1), 0.5, 0.5, 0.05);
    const TriMesh b = make_rectangle_mesh(Vec3(0, 0, 1 + h), 0.5, 0.5, 0.05);
    const double cd_offset = chamfer_distance(a, b, 100000, 2);
    const TriMesh plate = make_rectangle_mesh(Vec3(0, 0, 1), 0.1, 0.1, 0.004);
    TriMesh moved = plate;
    for (Vec3& v : moved.vertices) v.z() += 2 * 0.005;
    const GeoMetrics f_same = f1_score(plate, plate, 0.005);
    const GeoMetrics f_moved = f1_score(moved, plate, 0.005);
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<Vec3> pts(1000);
    for (auto& p : pts) p = Vec3(u(rng), u(rng), u(rng));
    const KdTree tree(pts);
    std::size_t nn_mismatch = 0;
    for (int q = 0; q < 1000; ++q) {
        const Vec3 x(u(rng), u(rng), u(rng));
        nn_mismatch += tree.nearest_distance(x) != brute_force_nearest_distance(pts, x);
    }
    const double rel = std::abs(cd_offset - h) / h;
    const bool pass = cd_same < 1e-6 && rel <= 0.02 && f_same.f1 == 1.0 && f_moved.f1 == 0.0 && nn_mismatch == 0;
    return report(9, pass,
                  fmt("CD(identical) %.1e (< 1e-6), CD(offset %.2f) %.5f (rel. err %.4f <= 0.02), F1 identical %g (== 1), "
                      "F1 2tau-displaced %g (== 0), kd-tree vs brute force mismatches %zu/1000",
                      cd_same, h, cd_offset, rel, f_same.f1, f_moved.f1, nn_mismatch));
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(SPLATGEO_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

bool same_bundle(const RenderBundle& a, const RenderBundle& b) {
    return a.color.data() == b.color.data() && a.depth_standard.data() == b.depth_standard.data() &&
           a.normal.data() == b.normal.data() && a.distance.data() == b.distance.data() &&
           a.alpha.data() == b.alpha.data() && a.mask.data() == b.mask.data();
}

// 10. Every CLI command replays bit-identically from its manifest; record
//     permutation leaves renders bit-identical.
int criterion10() {
    const fs::path w = g_work / "determinism";
    fs::remove_all(w);
    fs::create_directories(w);
    const std::string d = (w / "data").string();
    const std::string small = "--set synth.width=48 --set synth.height=48 --set synth.focal=48 ";
    const std::string cam = d + "/cameras/view_000.json";
    auto p = [&](const char* name) { return (w / name).string(); };
    const std::vector<std::pair<std::string, std::string>> commands = {
        {small + "synth --views 3 --out " + d, d + "/manifest.json"},
        {"render --scene " + d + "/scene_gt.sgs --camera " + cam + " --stage 2 --out " + p("render"),
         p("render") + "/manifest.json"},
        {"extract-depth --scene " + d + "/scene_gt.sgs --camera " + cam + " --mode first --out " + p("first.pfm"),
         p("first.pfm") + ".manifest.json"},
        {"loss-report --scene " + d + "/scene_init.sgs --view " + cam + " --priors " + d + " --out " + p("loss.csv"),
         p("loss.csv") + ".manifest.json"},
        {"--set train.iters_stage1=15 --set train.iters_stage2=10 --set train.densify_interval=5 train --scene-init " +
             d + "/scene_init.sgs --views " + d + " --out " + p("train"),
         p("train") + "/manifest.json"},
        {"fuse --depths " + d + "/depth --cameras " + d + "/cameras --voxel 0.004 --roi-from " + d + " --out " +
             p("mesh.ply"),
         p("mesh.ply") + ".manifest.json"},
        {"eval --pred " + p("mesh.ply") + " --gt " + d + "/gt_mesh.ply --out " + p("eval.csv"),
         p("eval.csv") + ".manifest.json"},
        {"eval-img --pred " + d + "/images/view_000.png --gt " + d + "/delighted/view_000.png --out " + p("img.csv"),
         p("img.csv") + ".manifest.json"},
        {"dilemma-report --data " + d + " --out " + p("dilemma.csv"), p("dilemma.csv") + ".manifest.json"},
        {small + "--set train.iters_stage1=10 --set train.iters_stage2=5 --set synth.views=2 pipeline --out " +
             p("pipeline"),
         p("pipeline") + "/manifest.json"},
    };
    std::size_t replayed = 0;
    std::string failures;
    for (const auto& [args, manifest] : commands) {
        if (run_cli(args) != 0 || !fs::exists(manifest)) {
            failures += " run(" + manifest + ")";
            continue;
        }
        if (run_cli("--from-manifest " + manifest) != 0) failures += " replay(" + manifest + ")";
        else ++replayed;
    }

    SynthSpec spec;
    const SynthResult syn = generate(spec);
    SceneFile shuffled = syn.scene;
    std::mt19937_64 rng(10);
    std::shuffle(shuffled.gaussians.begin(), shuffled.gaussians.end(), rng);
    std::size_t identical = 0, renders = 0;
    for (const auto& v : syn.truth.views)
        for (int stage : {1, 2}) {
            ++renders;
            identical += same_bundle(render_view(syn.scene, v.camera, stage), render_view(shuffled, v.camera, stage));
        }
    const bool pass = failures.empty() && identical == renders;
    return report(10, pass,
                  fmt("%zu/%zu commands replayed with identical output hashes%s; %zu/%zu permuted-scene renders "
                      "bit-identical",
                      replayed, commands.size(), failures.empty() ? "" : (" (failed:" + failures + ")").c_str(),
                      identical, renders));
}

// 11. Rendering speed: 10,000 Gaussians at 128x128.
int criterion11() {
    SceneMeta meta; // full appearance model
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    SceneFile scene = make_empty_scene(meta, 5);
    for (int i = 0; i < 10000; ++i) {
        Gaussian g = make_gaussian(meta);
        g.center = Vec3(0.8 * u(rng), 0.8 * u(rng), 0.5 * u(rng));
        g.rotation = Vec4(1.0 + 0.5 * u(rng), u(rng), u(rng), u(rng));
        g.log_scale = Vec3(std::log(0.02 + 0.01 * u(rng)), std::log(0.02 + 0.01 * u(rng)), std::log(0.002));
        g.opacity_logit = u(rng);
        g.transparency_logit = u(rng);
        for (auto& c : g.sh) c = 0.2 * Vec3(u(rng), u(rng), u(rng));
        g.sh[0] = Vec3::Constant(0.5 / sh_const::C0);
        for (double& a : g.asg_amplitudes) a = 0.1 * u(rng);
        scene.gaussians.push_back(g);
    }
    const CameraView cam = make_look_at_camera(Vec3(0.05, -0.03, -2.0), Vec3::Zero(), Vec3(0, -1, 0), 110.0, 128, 128);
    auto time_render = [&](int threads) {
        RenderSettings rs;
        rs.threads = threads;
        render_view(scene, cam, 2, rs); // warm-up
        double best = 1e9;
        for (int rep = 0; rep < 3; ++rep) {
            const auto t0 = std::chrono::steady_clock::now();
            render_view(scene, cam, 2, rs);
            best = std::min(best, seconds_since(t0));
        }
        return best;
    };
    const double single = time_render(1);
    const unsigned cores = std::thread::hardware_concurrency();
    if (cores < 8) {
        report(11, false,
               fmt("single-threaded %.3f s (%s < 2 s); 8-worker scaling not measurable: %u hardware thread(s) "
                   "available, 8 needed",
                   single, single < 2.0 ? "meets" : "misses", cores));
        return kUnmeasurable;
    }
    const double eight = time_render(8);
    const double speedup = single / eight;
    return report(11, single < 2.0 && speedup >= 3.0,
                  fmt("single-threaded %.3f s (< 2 s), 8 workers %.3f s, speed-up %.2fx (>= 3x)", single, eight,
                      speedup));
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance checks"};
    int criterion = 0;
    std::string work;
    app.add_option("--criterion", criterion, "Criterion number (1-11)")->required()->check(CLI::Range(1, 11));
    app.add_option("--work", work, "Scratch directory");
    CLI11_PARSE(app, argc, argv);
    if (!work.empty()) g_work = work;
    fs::create_directories(g_work);
    try {
        switch (criterion) {
        case 1: return criterion1();
        case 2: return criterion2();
        case 3: return criterion3();
        case 4: return criterion4();
        case 5: return criterion5();
        case 6: return criterion6();
        case 7: return criterion7();
        case 8: return criterion8();
        case 9: return criterion9();
        case 10: return criterion10();
        default: return criterion11();
        }
    } catch (const std::exception& e) {
        return report(criterion, false, std::string("error: ") + e.what());
    }
}
