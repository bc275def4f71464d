#pragma once

#include <string>
#include <vector>

#include "vcmesh/model.hpp"
#include "vcmesh/sampling.hpp"

namespace vcmesh {

// Parsed `key = value` run configuration with [section] headers. Unknown
// keys are rejected.
struct RunConfig {
    // [data]
    std::string dataset_glob;
    std::string template_mesh;
    double val_fraction = 0.0;
    double test_fraction = 0.0;

    // [hierarchy]
    std::vector<LevelSpec> levels;
    uint64_t hierarchy_seed = 0;

    // [model]
    std::vector<int> channels;  // base width up to the latent width; mirrored on build
    std::vector<int> m_plan;    // empty = auto everywhere
    bool use_residual = true;
    bool normalize_basis = false;

    // [train]
    TrainConfig train;
    std::string resume;

    // [output]
    std::string out_dir;
};

RunConfig parse_config(const std::string& path);

// "s:r" or "s:r:p1,p2,..." -> a level spec
LevelSpec parse_level_spec(const std::string& text);

// '*' wildcards in the final path component; results sorted. A pattern
// without wildcards returns just that path.
std::vector<std::string> expand_glob(const std::string& pattern);

}  // namespace vcmesh
