#include "splatgeo/trainer.hpp"

#include "splatgeo/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <ostream>
#include <random>
#include <string>

namespace splatgeo {

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-15;
constexpr int kGroups = static_cast<int>(ParamGroup::Count);

void normalize_rotations(SceneFile& scene) {
    for (auto& g : scene.gaussians) {
        const double n = g.rotation.norm();
        if (n > 0.0) g.rotation /= n;
    }
}

} // namespace

void TrainConfig::validate() const {
    if (iters_stage1 < 0 || iters_stage2 < 0) throw Error(ErrorCode::InvalidConfig, "iteration counts must be >= 0");
    for (double r : {lr.center, lr.center_final, lr.rotation, lr.scale, lr.opacity, lr.sh_dc, lr.sh_rest,
                     lr.transparency, lr.amplitude, lr.bank})
        if (!(r >= 0.0)) throw Error(ErrorCode::InvalidConfig, "learning rates must be >= 0");
    for (double w : {weights.lambda_r, weights.lambda_t, weights.lambda_n, weights.lambda_f})
        if (!(w >= 0.0)) throw Error(ErrorCode::InvalidConfig, "loss weights must be >= 0");
    if (weights.lambda_r > 1.0) throw Error(ErrorCode::InvalidConfig, "lambda_r must lie in [0, 1]");
    if (densify_interval < 0) throw Error(ErrorCode::InvalidConfig, "densify interval must be >= 0");
    if (max_gaussians < 1) throw Error(ErrorCode::InvalidConfig, "max_gaussians must be >= 1");
}

TrainState make_train_state(const SceneFile& scene, int stage) {
    TrainState s;
    s.scene = scene;
    const std::size_t n = layout_for(scene).size();
    s.first_moment.assign(n, 0.0);
    s.second_moment.assign(n, 0.0);
    s.step_count.assign(kGroups, 0);
    s.stage = stage;
    s.screen_grad_sum.assign(scene.size(), 0.0);
    s.screen_grad_views.assign(scene.size(), 0);
    return s;
}

TrainLog::TrainLog(std::ostream* csv) : csv_(csv) {
    if (csv_) *csv_ << "stage,iteration,rgb,transparency,normal_prior,consistency,flatten,total,gaussians\n";
}

void TrainLog::write(const TrainLogRow& row) {
    rows_.push_back(row);
    if (!csv_) return;
    *csv_ << row.stage << ',' << row.iteration << ',' << row.parts.rgb << ',' << row.parts.transparency << ','
          << row.parts.normal_prior << ',' << row.parts.consistency << ',' << row.parts.flatten << ',' << row.total
          << ',' << row.gaussians << '\n';
}

void adam_step(TrainState& state, std::span<const double> grad, const TrainConfig& cfg, double center_lr) {
    const ParamLayout layout = layout_for(state.scene);
    if (grad.size() != layout.size() || state.first_moment.size() != layout.size())
        throw Error(ErrorCode::InvalidArgument, "optimiser state does not match the scene layout");
    std::array<double, kGroups> rate{};
    rate[static_cast<int>(ParamGroup::Center)] = center_lr;
    rate[static_cast<int>(ParamGroup::Rotation)] = cfg.lr.rotation;
    rate[static_cast<int>(ParamGroup::Scale)] = cfg.lr.scale;
    rate[static_cast<int>(ParamGroup::Opacity)] = cfg.lr.opacity;
    rate[static_cast<int>(ParamGroup::Sh)] = cfg.lr.sh_rest;
    rate[static_cast<int>(ParamGroup::Transparency)] = cfg.lr.transparency;
    rate[static_cast<int>(ParamGroup::AsgAmplitude)] = cfg.lr.amplitude;
    rate[static_cast<int>(ParamGroup::Bank)] = cfg.lr.bank;

    std::array<double, kGroups> c1{}, c2{};
    for (int g = 0; g < kGroups; ++g) {
        if (state.frozen[g]) continue;
        const auto t = static_cast<double>(++state.step_count[g]);
        c1[g] = 1.0 - std::pow(kBeta1, t);
        c2[g] = 1.0 - std::pow(kBeta2, t);
    }

    std::vector<double> params = pack_params(state.scene);
    for (std::size_t k = 0; k < params.size(); ++k) {
        const ParamGroup group = layout.group_of(k);
        const int g = static_cast<int>(group);
        if (state.frozen[g]) continue;
        double lr = rate[g];
        if (group == ParamGroup::Sh && (k % layout.stride()) < ParamLayout::kSh + 3) lr = cfg.lr.sh_dc;
        double& m = state.first_moment[k];
        double& v = state.second_moment[k];
        m = kBeta1 * m + (1.0 - kBeta1) * grad[k];
        v = kBeta2 * v + (1.0 - kBeta2) * grad[k] * grad[k];
        params[k] -= lr * (m / c1[g]) / (std::sqrt(v / c2[g]) + kAdamEps);
    }
    unpack_params(params, state.scene);
}

namespace {

// Copies the per-Gaussian slice of a flat vector.
void copy_block(const std::vector<double>& src, std::size_t src_index, std::vector<double>& dst, std::size_t dst_index,
                std::size_t stride) {
    std::copy_n(src.begin() + src_index * stride, stride, dst.begin() + dst_index * stride);
}

} // namespace

void densify_and_prune(TrainState& state, const TrainConfig& cfg, std::uint64_t seed) {
    SceneFile& scene = state.scene;
    const ParamLayout old_layout = layout_for(scene);
    const std::size_t stride = old_layout.stride();
    const std::size_t n = scene.size();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    // (source index, new record) pairs in output order; source index keeps the
    // optimiser moments of the parent.
    std::vector<std::pair<std::size_t, Gaussian>> out;
    out.reserve(n);
    std::size_t budget = cfg.max_gaussians > n ? cfg.max_gaussians - n : 0;
    std::vector<std::pair<std::size_t, Gaussian>> extra;
    for (std::size_t i = 0; i < n; ++i) {
        const Gaussian& g = scene.gaussians[i];
        const int views = state.screen_grad_views.empty() ? 0 : state.screen_grad_views[i];
        const double mean_grad = views > 0 ? state.screen_grad_sum[i] / views : 0.0;
        if (!(mean_grad > cfg.densify_threshold) || budget == 0) {
            out.emplace_back(i, g);
            continue;
        }
        const ActivatedGaussian a = activate(g);
        const Mat3 r = a.rotation.toRotationMatrix();
        auto jittered = [&](const Gaussian& parent, const Vec3& scale) {
            Gaussian c = parent;
            const Vec3 z(normal(rng), normal(rng), normal(rng));
            c.center = parent.center + r * scale.cwiseProduct(z);
            return c;
        };
        if (a.scale.maxCoeff() > cfg.split_scale) {
            // Split: two smaller children replace the parent.
            Gaussian base = g;
            base.log_scale = g.log_scale.array() - std::log(1.6);
            out.emplace_back(i, jittered(base, a.scale));
            extra.emplace_back(i, jittered(base, a.scale));
        } else {
            out.emplace_back(i, g);
            extra.emplace_back(i, jittered(g, a.scale));
        }
        --budget;
    }
    for (auto& e : extra) out.push_back(std::move(e));

    // Prune transparent-to-the-point-of-invisible splats, keeping at least one.
    std::vector<std::pair<std::size_t, Gaussian>> kept;
    kept.reserve(out.size());
    for (auto& e : out)
        if (sigmoid(e.second.opacity_logit) >= cfg.prune_opacity) kept.push_back(e);
    if (kept.empty()) {
        const auto best = std::max_element(out.begin(), out.end(), [](const auto& a, const auto& b) {
            return a.second.opacity_logit < b.second.opacity_logit;
        });
        kept.push_back(*best);
    }

    std::vector<Gaussian> gaussians;
    gaussians.reserve(kept.size());
    for (auto& e : kept) gaussians.push_back(e.second);
    scene.gaussians = std::move(gaussians);
    const ParamLayout new_layout = layout_for(scene);
    std::vector<double> m(new_layout.size(), 0.0), v(new_layout.size(), 0.0);
    for (std::size_t k = 0; k < kept.size(); ++k) {
        copy_block(state.first_moment, kept[k].first, m, k, stride);
        copy_block(state.second_moment, kept[k].first, v, k, stride);
    }
    std::copy(state.first_moment.begin() + old_layout.bank_offset(), state.first_moment.end(),
              m.begin() + new_layout.bank_offset());
    std::copy(state.second_moment.begin() + old_layout.bank_offset(), state.second_moment.end(),
              v.begin() + new_layout.bank_offset());
    state.first_moment = std::move(m);
    state.second_moment = std::move(v);
    state.screen_grad_sum.assign(scene.size(), 0.0);
    state.screen_grad_views.assign(scene.size(), 0);
}

void train_stage(TrainState& state, std::span<const TrainView> views, const TrainConfig& cfg, int stage,
                 TrainLog* log) {
    cfg.validate();
    if (stage != 1 && stage != 2) throw Error(ErrorCode::InvalidArgument, "stage must be 1 or 2");
    const int iters = stage == 1 ? cfg.iters_stage1 : cfg.iters_stage2;
    if (iters == 0) return;
    if (views.empty()) throw Error(ErrorCode::InvalidArgument, "training needs at least one view");

    if (state.stage != stage) {
        state.stage = stage;
        state.step_count.assign(kGroups, 0);
        std::fill(state.first_moment.begin(), state.first_moment.end(), 0.0);
        std::fill(state.second_moment.begin(), state.second_moment.end(), 0.0);
    }
    state.frozen.fill(false);
    if (stage == 1) {
        state.frozen[static_cast<int>(ParamGroup::AsgAmplitude)] = true;
        state.frozen[static_cast<int>(ParamGroup::Bank)] = true;
    } else {
        state.frozen[static_cast<int>(ParamGroup::Opacity)] = true;
        state.frozen[static_cast<int>(ParamGroup::Transparency)] = true;
    }

    std::mt19937_64 rng(cfg.seed * 1000003ULL + static_cast<std::uint64_t>(stage));
    const int densify_until = static_cast<int>(0.8 * iters);

    for (int it = 0; it < iters; ++it) {
        const std::size_t vi = std::uniform_int_distribution<std::size_t>(0, views.size() - 1)(rng);
        const TrainView& view = views[vi];
        const ParamLayout layout = layout_for(state.scene);
        std::vector<double> grad(layout.size(), 0.0);
        std::vector<double> screen(state.scene.size(), 0.0);
        const ViewEvaluation ev = evaluate_view(state.scene, view, stage, cfg.weights, cfg.render, grad, screen);
        if (!std::isfinite(ev.total))
            throw Error(ErrorCode::Diverged, "loss became non-finite at stage " + std::to_string(stage) + " iteration " +
                                                 std::to_string(it));
        for (std::size_t k = 0; k < grad.size(); ++k) {
            if (std::isfinite(grad[k])) continue;
            throw Error(ErrorCode::NonfiniteGradient, std::string("non-finite gradient in parameter group '") +
                                                          to_string(layout.group_of(k)) + "'");
        }

        const double progress = iters > 1 ? static_cast<double>(it) / (iters - 1) : 0.0;
        const double center_lr =
            cfg.lr.center_final > 0.0 && cfg.lr.center > 0.0
                ? std::exp((1.0 - progress) * std::log(cfg.lr.center) + progress * std::log(cfg.lr.center_final))
                : cfg.lr.center;
        adam_step(state, grad, cfg, center_lr);
        normalize_rotations(state.scene);
        ++state.iteration;

        // Screen gradients in normalised device units (half the image width per unit).
        const double ndc = 0.5 * std::max(view.camera.width, view.camera.height);
        for (std::size_t i = 0; i < screen.size(); ++i) {
            if (screen[i] == 0.0) continue;
            state.screen_grad_sum[i] += screen[i] * ndc;
            state.screen_grad_views[i] += 1;
        }

        if (log) log->write({stage, it, ev.parts, ev.total, state.scene.size()});

        if (stage == 1 && cfg.densify_interval > 0 && (it + 1) % cfg.densify_interval == 0 && it + 1 < densify_until)
            densify_and_prune(state, cfg, cfg.seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(it + 1)));
    }
}

TrainState train_stage1(const SceneFile& init, std::span<const TrainView> views, const TrainConfig& cfg, TrainLog* log) {
    TrainState state = make_train_state(init, 1);
    train_stage(state, views, cfg, 1, log);
    return state;
}

TrainState train_stage2(const TrainState& stage1, std::span<const TrainView> views, const TrainConfig& cfg,
                        TrainLog* log) {
    TrainState state = stage1;
    train_stage(state, views, cfg, 2, log);
    return state;
}

namespace {

constexpr char kMomentMagic[8] = {'S', 'G', 'M', 'O', 'M', 'E', 'N', 'T'};

template <typename T>
void put(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw Error(ErrorCode::MalformedHeader, "truncated optimiser sidecar");
    return v;
}

} // namespace

void save_checkpoint(const TrainState& state, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    save_scene(state.scene, dir / "scene.sgs");
    std::ofstream out(dir / "optimizer.bin", std::ios::binary);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + (dir / "optimizer.bin").string());
    out.write(kMomentMagic, 8);
    put<std::uint32_t>(out, 1);
    put<std::int32_t>(out, state.stage);
    put<std::int32_t>(out, state.iteration);
    put<std::uint64_t>(out, state.first_moment.size());
    out.write(reinterpret_cast<const char*>(state.first_moment.data()),
              static_cast<std::streamsize>(state.first_moment.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(state.second_moment.data()),
              static_cast<std::streamsize>(state.second_moment.size() * sizeof(double)));
    put<std::uint32_t>(out, kGroups);
    for (int g = 0; g < kGroups; ++g) {
        put<std::uint64_t>(out, state.step_count.empty() ? 0 : state.step_count[g]);
        put<std::uint8_t>(out, state.frozen[g] ? 1 : 0);
    }
    if (!out) throw Error(ErrorCode::IoFailure, "failed writing optimiser sidecar");
}

TrainState load_checkpoint(const std::filesystem::path& dir) {
    TrainState state = make_train_state(load_scene(dir / "scene.sgs"), 1);
    std::ifstream in(dir / "optimizer.bin", std::ios::binary);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot read " + (dir / "optimizer.bin").string());
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMomentMagic, 8) != 0)
        throw Error(ErrorCode::MalformedHeader, "optimiser sidecar has a bad magic");
    if (get<std::uint32_t>(in) != 1) throw Error(ErrorCode::MalformedHeader, "unsupported optimiser sidecar version");
    state.stage = get<std::int32_t>(in);
    state.iteration = get<std::int32_t>(in);
    const auto n = get<std::uint64_t>(in);
    if (n != state.first_moment.size()) throw Error(ErrorCode::MalformedHeader, "optimiser sidecar size mismatch");
    in.read(reinterpret_cast<char*>(state.first_moment.data()), static_cast<std::streamsize>(n * sizeof(double)));
    in.read(reinterpret_cast<char*>(state.second_moment.data()), static_cast<std::streamsize>(n * sizeof(double)));
    const auto groups = get<std::uint32_t>(in);
    if (groups != static_cast<std::uint32_t>(kGroups)) throw Error(ErrorCode::MalformedHeader, "optimiser group count");
    for (int g = 0; g < kGroups; ++g) {
        state.step_count[g] = get<std::uint64_t>(in);
        state.frozen[g] = get<std::uint8_t>(in) != 0;
    }
    return state;
}

} // namespace splatgeo
