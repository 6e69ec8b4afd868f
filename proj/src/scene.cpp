#include "splatgeo/scene.hpp"

#include "splatgeo/error.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace splatgeo {

static_assert(std::endian::native == std::endian::little, "scene I/O assumes a little-endian host");

namespace {

constexpr std::array<char, 8> kMagic = {'S', 'P', 'L', 'A', 'T', 'G', 'E', 'O'};
constexpr std::uint32_t kVersion = 1;

class Writer {
public:
    template <typename T>
    void put(T v) {
        const auto* p = reinterpret_cast<const char*>(&v);
        bytes_.insert(bytes_.end(), p, p + sizeof(T));
    }
    void put_f32(double v) { put(static_cast<float>(v)); }
    std::vector<char>& bytes() { return bytes_; }

private:
    std::vector<char> bytes_;
};

class Reader {
public:
    Reader(const char* data, std::size_t size) : data_(data), size_(size) {}

    template <typename T>
    T get() {
        if (pos_ + sizeof(T) > size_) throw Error(ErrorCode::MalformedHeader, "unexpected end of scene data");
        T v;
        std::memcpy(&v, data_ + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    double get_f32() { return static_cast<double>(get<float>()); }
    std::size_t position() const { return pos_; }

private:
    const char* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

void write_meta(Writer& w, const SceneFile& scene) {
    const auto& m = scene.meta;
    w.put<std::int32_t>(m.sh_degree);
    w.put<std::int32_t>(m.asg_lobes);
    w.put<std::int32_t>(m.asg_features);
    w.put<std::int32_t>(m.pe_octaves);
    w.put<std::int32_t>(m.decoder_hidden);
    w.put_f32(m.unit_scale);
    for (const auto& lobe : scene.bank.lobes) {
        for (int c = 0; c < 3; ++c)
            for (int r = 0; r < 3; ++r) w.put_f32(lobe.frame(r, c));
        w.put_f32(lobe.log_lambda);
        w.put_f32(lobe.log_mu);
    }
    const auto& d = scene.bank.decoder;
    for (const auto* v : {&d.w1, &d.b1, &d.w2, &d.b2})
        for (double x : *v) w.put_f32(x);
}

void read_meta(Reader& r, SceneFile& scene) {
    auto& m = scene.meta;
    m.sh_degree = r.get<std::int32_t>();
    m.asg_lobes = r.get<std::int32_t>();
    m.asg_features = r.get<std::int32_t>();
    m.pe_octaves = r.get<std::int32_t>();
    m.decoder_hidden = r.get<std::int32_t>();
    m.unit_scale = r.get_f32();
    if (m.sh_degree < 0 || m.sh_degree > kMaxShDegree || m.asg_lobes < 0 || m.asg_features < 0 || m.pe_octaves < 0 ||
        m.decoder_hidden < 0 || m.asg_lobes > 4096 || m.asg_features > 4096 || m.decoder_hidden > 4096 ||
        m.pe_octaves > 32)
        throw Error(ErrorCode::MalformedHeader, "scene metadata out of range");

    auto& bank = scene.bank;
    bank.features = m.asg_features;
    bank.pe_octaves = m.pe_octaves;
    bank.lobes.assign(m.asg_lobes, AsgLobe{});
    for (auto& lobe : bank.lobes) {
        for (int c = 0; c < 3; ++c)
            for (int rr = 0; rr < 3; ++rr) lobe.frame(rr, c) = r.get_f32();
        lobe.log_lambda = r.get_f32();
        lobe.log_mu = r.get_f32();
    }
    auto& d = bank.decoder;
    d.inputs = decoder_input_count(m.asg_features, m.pe_octaves);
    d.hidden = m.decoder_hidden;
    d.w1.resize(static_cast<std::size_t>(d.hidden) * d.inputs);
    d.b1.resize(d.hidden);
    d.w2.resize(static_cast<std::size_t>(3) * d.hidden);
    d.b2.resize(3);
    for (auto* v : {&d.w1, &d.b1, &d.w2, &d.b2})
        for (double& x : *v) x = r.get_f32();
}

void put_record(Writer& w, const Gaussian& g) {
    for (int i = 0; i < 3; ++i) w.put_f32(g.center[i]);
    for (int i = 0; i < 4; ++i) w.put_f32(g.rotation[i]);
    for (int i = 0; i < 3; ++i) w.put_f32(g.log_scale[i]);
    w.put_f32(g.opacity_logit);
    for (const auto& c : g.sh)
        for (int i = 0; i < 3; ++i) w.put_f32(c[i]);
    w.put_f32(g.transparency_logit);
    for (double a : g.asg_amplitudes) w.put_f32(a);
}

} // namespace

const char* to_string(ParamGroup group) {
    switch (group) {
    case ParamGroup::Center: return "center";
    case ParamGroup::Rotation: return "rotation";
    case ParamGroup::Scale: return "log-scale";
    case ParamGroup::Opacity: return "opacity-logit";
    case ParamGroup::Sh: return "sh";
    case ParamGroup::Transparency: return "transparency-logit";
    case ParamGroup::AsgAmplitude: return "asg-amplitude";
    case ParamGroup::Bank: return "asg-bank";
    case ParamGroup::Count: break;
    }
    return "unknown";
}

std::size_t floats_per_record(const SceneMeta& meta) {
    return 3 + 4 + 3 + 1 + 3 * static_cast<std::size_t>(sh_coeff_count(meta.sh_degree)) + 1 +
           static_cast<std::size_t>(meta.asg_lobes) * meta.asg_features;
}

Gaussian make_gaussian(const SceneMeta& meta) {
    Gaussian g;
    g.sh.assign(sh_coeff_count(meta.sh_degree), Vec3::Zero());
    g.asg_amplitudes.assign(static_cast<std::size_t>(meta.asg_lobes) * meta.asg_features, 0.0);
    return g;
}

SceneFile make_empty_scene(const SceneMeta& meta, std::uint64_t bank_seed) {
    SceneFile scene;
    scene.meta = meta;
    scene.bank = make_asg_bank(meta.asg_lobes, meta.asg_features, meta.pe_octaves, meta.decoder_hidden, bank_seed);
    return scene;
}

ActivatedGaussian activate(const Gaussian& g) {
    ActivatedGaussian a;
    a.center = g.center;
    const double n = g.rotation.norm();
    a.rotation = Eigen::Quaterniond(g.rotation[0] / n, g.rotation[1] / n, g.rotation[2] / n, g.rotation[3] / n);
    a.scale = g.log_scale.array().exp();
    a.opacity = sigmoid(g.opacity_logit);
    a.transparency = sigmoid(g.transparency_logit);
    a.sh = g.sh;
    a.asg_amplitudes = g.asg_amplitudes;
    return a;
}

void validate_scene(const SceneFile& scene) {
    const auto nsh = static_cast<std::size_t>(sh_coeff_count(scene.meta.sh_degree));
    const auto namp = static_cast<std::size_t>(scene.meta.asg_lobes) * scene.meta.asg_features;
    for (std::size_t i = 0; i < scene.gaussians.size(); ++i) {
        const Gaussian& g = scene.gaussians[i];
        auto fail = [&](ErrorCode code, const char* what) {
            throw Error(code, std::string(what) + " at record " + std::to_string(i));
        };
        if (g.sh.size() != nsh || g.asg_amplitudes.size() != namp) fail(ErrorCode::MalformedHeader, "record size mismatch");
        bool finite = g.center.allFinite() && g.rotation.allFinite() && g.log_scale.allFinite() &&
                      std::isfinite(g.opacity_logit) && std::isfinite(g.transparency_logit);
        for (const auto& c : g.sh) finite = finite && c.allFinite();
        for (double a : g.asg_amplitudes) finite = finite && std::isfinite(a);
        if (!finite) fail(ErrorCode::NonfiniteField, "non-finite field");
        if (!(g.rotation.norm() > 0.0)) fail(ErrorCode::NonfiniteField, "zero-length rotation");
        for (int k = 0; k < 3; ++k)
            if (!(std::exp(g.log_scale[k]) > 0.0)) fail(ErrorCode::InvalidScale, "scale underflows to zero");
    }
}

void save_scene(const SceneFile& scene, const std::filesystem::path& path) {
    Writer w;
    for (char c : kMagic) w.put(c);
    w.put<std::uint32_t>(kVersion);
    Writer meta;
    write_meta(meta, scene);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(meta.bytes().size()));
    w.bytes().insert(w.bytes().end(), meta.bytes().begin(), meta.bytes().end());
    w.put<std::uint64_t>(scene.gaussians.size());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(floats_per_record(scene.meta)));
    for (const auto& g : scene.gaussians) put_record(w, g);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    out.flush();
    if (!out) throw Error(ErrorCode::IoFailure, "write failed " + path.string());
}

SceneFile load_scene(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
    const std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    Reader r(bytes.data(), bytes.size());

    for (char c : kMagic)
        if (r.get<char>() != c) throw Error(ErrorCode::MalformedHeader, "bad magic in " + path.string());
    if (r.get<std::uint32_t>() != kVersion) throw Error(ErrorCode::MalformedHeader, "unsupported version");

    SceneFile scene;
    const auto meta_size = r.get<std::uint32_t>();
    const std::size_t meta_start = r.position();
    read_meta(r, scene);
    if (r.position() - meta_start != meta_size) throw Error(ErrorCode::MalformedHeader, "metadata size mismatch");

    const auto count = r.get<std::uint64_t>();
    const auto stride = r.get<std::uint32_t>();
    if (stride != floats_per_record(scene.meta)) throw Error(ErrorCode::MalformedHeader, "record width mismatch");
    if (count == 0) throw Error(ErrorCode::EmptyScene, path.string() + " has no records");
    if (bytes.size() - r.position() != count * stride * sizeof(float))
        throw Error(ErrorCode::MalformedHeader, "record array size mismatch");

    const int nsh = sh_coeff_count(scene.meta.sh_degree);
    const std::size_t namp = static_cast<std::size_t>(scene.meta.asg_lobes) * scene.meta.asg_features;
    scene.gaussians.resize(count);
    for (auto& g : scene.gaussians) {
        for (int i = 0; i < 3; ++i) g.center[i] = r.get_f32();
        for (int i = 0; i < 4; ++i) g.rotation[i] = r.get_f32();
        for (int i = 0; i < 3; ++i) g.log_scale[i] = r.get_f32();
        g.opacity_logit = r.get_f32();
        g.sh.resize(nsh);
        for (auto& c : g.sh)
            for (int i = 0; i < 3; ++i) c[i] = r.get_f32();
        g.transparency_logit = r.get_f32();
        g.asg_amplitudes.resize(namp);
        for (double& a : g.asg_amplitudes) a = r.get_f32();
    }
    validate_scene(scene);
    return scene;
}

void export_scene_text(const SceneFile& scene, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
    const auto& m = scene.meta;
    out << "# splatgeo scene v" << kVersion << "\n";
    out << "sh_degree " << m.sh_degree << "\nasg_lobes " << m.asg_lobes << "\nasg_features " << m.asg_features
        << "\npe_octaves " << m.pe_octaves << "\ndecoder_hidden " << m.decoder_hidden << "\nunit_scale "
        << m.unit_scale << "\ncount " << scene.gaussians.size() << "\n";
    out << "# center(3) rotation(4) log_scale(3) opacity_logit sh(" << 3 * sh_coeff_count(m.sh_degree)
        << ") transparency_logit asg(" << m.asg_lobes * m.asg_features << ")\n";
    out << std::setprecision(9);
    for (const auto& g : scene.gaussians) {
        out << g.center.x() << ' ' << g.center.y() << ' ' << g.center.z();
        for (int i = 0; i < 4; ++i) out << ' ' << g.rotation[i];
        for (int i = 0; i < 3; ++i) out << ' ' << g.log_scale[i];
        out << ' ' << g.opacity_logit;
        for (const auto& c : g.sh) out << ' ' << c.x() << ' ' << c.y() << ' ' << c.z();
        out << ' ' << g.transparency_logit;
        for (double a : g.asg_amplitudes) out << ' ' << a;
        out << '\n';
    }
}

void round_to_storage(SceneFile& scene) {
    auto params = pack_params(scene);
    for (double& v : params) v = static_cast<double>(static_cast<float>(v));
    unpack_params(params, scene);
    scene.meta.unit_scale = static_cast<float>(scene.meta.unit_scale);
    for (auto& lobe : scene.bank.lobes) lobe.frame = lobe.frame.cast<float>().cast<double>();
}

ParamGroup ParamLayout::group_of(std::size_t flat_index) const {
    if (flat_index >= bank_offset()) return ParamGroup::Bank;
    const std::size_t k = flat_index % stride();
    if (k < kRotation) return ParamGroup::Center;
    if (k < kScale) return ParamGroup::Rotation;
    if (k < kOpacity) return ParamGroup::Scale;
    if (k < kSh) return ParamGroup::Opacity;
    if (k < transparency_offset()) return ParamGroup::Sh;
    if (k == transparency_offset()) return ParamGroup::Transparency;
    return ParamGroup::AsgAmplitude;
}

ParamLayout layout_for(const SceneFile& scene) {
    ParamLayout l;
    l.sh_count = sh_coeff_count(scene.meta.sh_degree);
    l.amplitude_count = scene.meta.asg_lobes * scene.meta.asg_features;
    l.bank_count = scene.bank.param_count();
    l.gaussian_count = scene.gaussians.size();
    return l;
}

std::vector<double> pack_params(const SceneFile& scene) {
    const ParamLayout l = layout_for(scene);
    std::vector<double> p(l.size());
    for (std::size_t i = 0; i < scene.gaussians.size(); ++i) {
        const Gaussian& g = scene.gaussians[i];
        double* b = &p[i * l.stride()];
        for (int k = 0; k < 3; ++k) b[ParamLayout::kCenter + k] = g.center[k];
        for (int k = 0; k < 4; ++k) b[ParamLayout::kRotation + k] = g.rotation[k];
        for (int k = 0; k < 3; ++k) b[ParamLayout::kScale + k] = g.log_scale[k];
        b[ParamLayout::kOpacity] = g.opacity_logit;
        for (int s = 0; s < l.sh_count; ++s)
            for (int c = 0; c < 3; ++c) b[ParamLayout::kSh + 3 * s + c] = g.sh[s][c];
        b[l.transparency_offset()] = g.transparency_logit;
        for (int a = 0; a < l.amplitude_count; ++a) b[l.amplitude_offset() + a] = g.asg_amplitudes[a];
    }
    scene.bank.pack(std::span<double>(p).subspan(l.bank_offset()));
    return p;
}

void unpack_params(std::span<const double> p, SceneFile& scene) {
    const ParamLayout l = layout_for(scene);
    if (p.size() != l.size()) throw Error(ErrorCode::InvalidArgument, "parameter vector size mismatch");
    for (std::size_t i = 0; i < scene.gaussians.size(); ++i) {
        Gaussian& g = scene.gaussians[i];
        const double* b = &p[i * l.stride()];
        for (int k = 0; k < 3; ++k) g.center[k] = b[ParamLayout::kCenter + k];
        for (int k = 0; k < 4; ++k) g.rotation[k] = b[ParamLayout::kRotation + k];
        for (int k = 0; k < 3; ++k) g.log_scale[k] = b[ParamLayout::kScale + k];
        g.opacity_logit = b[ParamLayout::kOpacity];
        for (int s = 0; s < l.sh_count; ++s)
            for (int c = 0; c < 3; ++c) g.sh[s][c] = b[ParamLayout::kSh + 3 * s + c];
        g.transparency_logit = b[l.transparency_offset()];
        for (int a = 0; a < l.amplitude_count; ++a) g.asg_amplitudes[a] = b[l.amplitude_offset() + a];
    }
    scene.bank.unpack(p.subspan(l.bank_offset()));
}

} // namespace splatgeo
