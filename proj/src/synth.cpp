#include "m3/synth.hpp"

#include <cmath>

#include <json.hpp>

#include "m3/rng.hpp"

namespace m3 {

namespace {

DensityKind parse_density(const std::string& s) {
    if (s == "uniform") return DensityKind::Uniform;
    if (s == "slab") return DensityKind::Slab;
    if (s == "radial") return DensityKind::Radial;
    throw SynthError("unknown density kind: " + s);
}

FieldKind parse_field(const std::string& s) {
    if (s == "linear") return FieldKind::Linear;
    if (s == "step") return FieldKind::StepPlane;
    if (s == "bump") return FieldKind::GaussianBump;
    if (s == "vortex") return FieldKind::Vortex;
    throw SynthError("unknown field kind: " + s);
}

// unnormalized density over the unit cube
double density_at(const SynthSpec& spec, const Vec3& p) {
    switch (spec.density) {
        case DensityKind::Uniform:
            return 1.0;
        case DensityKind::Slab:
            return p[2] < 0.5 ? spec.slab_ratio : 1.0;
        case DensityKind::Radial: {
            const double dx = p[0] - 0.5, dy = p[1] - 0.5, dz = p[2] - 0.5;
            const double d = std::sqrt(dx * dx + dy * dy + dz * dz);
            return 1.0 / (d + 0.2);
        }
    }
    return 1.0;
}

Vec3 sample_position(const SynthSpec& spec, RngStream& rng) {
    switch (spec.density) {
        case DensityKind::Uniform:
            return {rng.uniform(), rng.uniform(), rng.uniform()};
        case DensityKind::Slab: {
            // slab is the half-cube z < 0.5; point mass r/(r+1)
            const double r = spec.slab_ratio;
            const bool in_slab = rng.uniform() < r / (r + 1.0);
            const double z = in_slab ? 0.5 * rng.uniform()
                                     : 0.5 + 0.5 * rng.uniform();
            return {rng.uniform(), rng.uniform(), z};
        }
        case DensityKind::Radial: {
            // rejection against the uniform envelope; bound is density at the center
            const double bound = 1.0 / 0.2;
            for (;;) {
                Vec3 p{rng.uniform(), rng.uniform(), rng.uniform()};
                if (rng.uniform() * bound <= density_at(spec, p)) return p;
            }
        }
    }
    return {0, 0, 0};
}

}  // namespace

double eval_scalar_field(FieldKind kind, const Vec3& p) {
    switch (kind) {
        case FieldKind::Linear:
            return p[0] + p[1] + p[2];
        case FieldKind::StepPlane:
            return p[0] < 0.5 ? -1.0 : 1.0;
        case FieldKind::GaussianBump: {
            const double dx = p[0] - 0.5, dy = p[1] - 0.5, dz = p[2] - 0.5;
            const double sigma = 0.1;
            return std::exp(-(dx * dx + dy * dy + dz * dz) / (2.0 * sigma * sigma));
        }
        case FieldKind::Vortex:
            throw SynthError("vortex is a vector field");
    }
    return 0.0;
}

Vec3 eval_vector_field(FieldKind kind, const Vec3& p) {
    if (kind != FieldKind::Vortex) throw SynthError("not a vector field");
    // solid-rotation swirl around the vertical center line, damped radially
    const double dx = p[0] - 0.5, dy = p[1] - 0.5;
    const double r2 = dx * dx + dy * dy;
    const double damp = std::exp(-4.0 * r2);
    return {-dy * damp, dx * damp, 0.1 * std::sin(8.0 * p[2])};
}

SynthSpec SynthSpec::from_json(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text);
    SynthSpec spec;
    if (j.contains("density")) {
        const auto& d = j["density"];
        spec.density = parse_density(d.at("kind").get<std::string>());
        if (d.contains("ratio")) spec.slab_ratio = d["ratio"].get<double>();
        if (spec.slab_ratio <= 0.0) throw SynthError("slab ratio must be > 0");
    }
    for (const auto& f : j.value("fields", nlohmann::json::array())) {
        FieldSpec fs;
        fs.kind = parse_field(f.at("kind").get<std::string>());
        fs.name = f.value("name", std::string());
        if (fs.name.empty()) fs.name = f.at("kind").get<std::string>();
        spec.fields.push_back(fs);
    }
    return spec;
}

LabeledPointCloud generate_cloud(const SynthSpec& spec, std::uint64_t n,
                                 std::uint64_t seed) {
    if (n == 0) throw SynthError("n must be > 0");
    LabeledPointCloud cloud;
    cloud.positions.resize(n);
    for (const auto& f : spec.fields) {
        if (f.is_vector()) {
            cloud.vector_names.push_back(f.name);
            cloud.vectors.emplace_back(n);
        } else {
            cloud.scalar_names.push_back(f.name);
            cloud.scalars.emplace_back(n);
        }
    }
    cloud.geom_weights.resize(n);

    for (std::uint64_t i = 0; i < n; ++i) {
        RngStream rng(seed, i);
        const Vec3 p = sample_position(spec, rng);
        cloud.positions[i] = p;
        std::size_t si = 0, vi = 0;
        for (const auto& f : spec.fields) {
            if (f.is_vector()) {
                cloud.vectors[vi++][i] = eval_vector_field(f.kind, p);
            } else {
                cloud.scalars[si++][i] = eval_scalar_field(f.kind, p);
            }
        }
        // inverse-density weight: each point stands in for a volume share
        cloud.geom_weights[i] = 1.0 / density_at(spec, p);
    }
    return cloud;
}

}  // namespace m3
