#pragma once

#include "splatgeo/appearance.hpp"
#include "splatgeo/types.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace splatgeo {

// One splat in its stored (optimisation) parameterisation.
struct Gaussian {
    Vec3 center = Vec3::Zero();
    Vec4 rotation{1.0, 0.0, 0.0, 0.0}; // (w, x, y, z), not necessarily unit
    Vec3 log_scale = Vec3::Zero();
    double opacity_logit = 0.0;
    std::vector<Vec3> sh;              // (L+1)^2 RGB coefficients
    double transparency_logit = 0.0;
    std::vector<double> asg_amplitudes; // lobes x features
};

struct SceneMeta {
    int sh_degree = 3;
    int asg_lobes = 16;
    int asg_features = 8;
    int pe_octaves = 4;
    int decoder_hidden = 32;
    double unit_scale = 1.0; // metres per world unit
};

struct SceneFile {
    SceneMeta meta;
    AsgBank bank;
    std::vector<Gaussian> gaussians;

    std::size_t size() const { return gaussians.size(); }
};

// Empty scene with a freshly initialised bank for the given metadata.
SceneFile make_empty_scene(const SceneMeta& meta, std::uint64_t bank_seed = 7);

// A Gaussian sized for `meta`, with zero SH/amplitudes.
Gaussian make_gaussian(const SceneMeta& meta);

// Rendering-ready view of a Gaussian. The SH and amplitude spans alias the
// source record.
struct ActivatedGaussian {
    Vec3 center;
    Eigen::Quaterniond rotation;
    Vec3 scale;
    double opacity;
    double transparency;
    std::span<const Vec3> sh;
    std::span<const double> asg_amplitudes;
};

ActivatedGaussian activate(const Gaussian& g);

// Binary container: magic, version, metadata block (including the specular
// bank), then little-endian float32 records.
SceneFile load_scene(const std::filesystem::path& path);
void save_scene(const SceneFile& scene, const std::filesystem::path& path);

// Rounds every stored value through float32 so the in-memory scene equals
// what save_scene/load_scene produce.
void round_to_storage(SceneFile& scene);

// Human-readable dump used for debugging; not read back.
void export_scene_text(const SceneFile& scene, const std::filesystem::path& path);

std::size_t floats_per_record(const SceneMeta& meta);

// Throws NonfiniteField / InvalidScale naming the offending record.
void validate_scene(const SceneFile& scene);

// Flat parameter layout used by the optimiser and the gradient code:
// per-Gaussian blocks back to back, followed by the bank parameters.
enum class ParamGroup : int { Center = 0, Rotation, Scale, Opacity, Sh, Transparency, AsgAmplitude, Bank, Count };

const char* to_string(ParamGroup group);

struct ParamLayout {
    int sh_count = 16;
    int amplitude_count = 128;
    std::size_t bank_count = 0;
    std::size_t gaussian_count = 0;

    static constexpr std::size_t kCenter = 0;
    static constexpr std::size_t kRotation = 3;
    static constexpr std::size_t kScale = 7;
    static constexpr std::size_t kOpacity = 10;
    static constexpr std::size_t kSh = 11;
    std::size_t transparency_offset() const { return kSh + 3 * static_cast<std::size_t>(sh_count); }
    std::size_t amplitude_offset() const { return transparency_offset() + 1; }
    std::size_t stride() const { return amplitude_offset() + amplitude_count; }
    std::size_t bank_offset() const { return stride() * gaussian_count; }
    std::size_t size() const { return bank_offset() + bank_count; }

    ParamGroup group_of(std::size_t flat_index) const;
};

ParamLayout layout_for(const SceneFile& scene);
std::vector<double> pack_params(const SceneFile& scene);
void unpack_params(std::span<const double> params, SceneFile& scene);

} // namespace splatgeo
