#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "m3/cloud.hpp"

namespace m3 {

struct SynthError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class DensityKind { Uniform, Slab, Radial };
enum class FieldKind { Linear, StepPlane, GaussianBump, Vortex };

struct FieldSpec {
    FieldKind kind = FieldKind::Linear;
    std::string name;
    bool is_vector() const { return kind == FieldKind::Vortex; }
};

struct SynthSpec {
    DensityKind density = DensityKind::Uniform;
    double slab_ratio = 100.0;  // density ratio slab : far field (slab is z < 0.5)
    std::vector<FieldSpec> fields;

    static SynthSpec from_json(const std::string& json_text);
};

// Deterministic synthetic cloud over the unit cube with analytic fields and
// inverse-density geometric weights.
LabeledPointCloud generate_cloud(const SynthSpec& spec, std::uint64_t n,
                                 std::uint64_t seed);

// analytic field evaluations, exposed for closed-form oracles
double eval_scalar_field(FieldKind kind, const Vec3& p);
Vec3 eval_vector_field(FieldKind kind, const Vec3& p);

}  // namespace m3
