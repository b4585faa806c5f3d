#pragma once

#include "shadowlab/excursion.hpp"
#include "shadowlab/geometry.hpp"
#include "shadowlab/io.hpp"
#include "shadowlab/kernel.hpp"
#include "shadowlab/slope.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace shadow {

/// Bisection settings for the critical level estimate used by relative levels.
struct CriticalSpec {
    double side = 16.0;
    int n_samples = 200;
    double tol = 0.01;
};

/// One campaign. Lengths are in field units unless the name says cells.
struct ExperimentConfig {
    std::string name;
    Kernel kernel = Kernel::gaussian();
    double h = 0.25;
    Connectivity connectivity = Connectivity::eight;
    SlopeOptions slope;
    int n_samples = 400;
    std::uint64_t seed = 1;

    /// Absolute levels, or offsets in bracket widths above the critical
    /// estimate when level_offsets is non-empty.
    std::vector<double> levels{1.0};
    std::vector<double> level_offsets;
    CriticalSpec critical;

    // crossing decay: lambda * (width x height) rectangles
    std::vector<double> lambdas{1.0, 1.5, 2.0, 3.0, 4.0};
    double width = 4.0;
    double height = 4.0;

    // chemical scaling and global structure
    std::vector<int> distances{32, 64, 128, 256}; ///< |z| in cells
    std::vector<double> constants{1.5, 2.0, 3.0}; ///< C sweep
    double epsilon = 0.5;
    /// Free space around the segment [0, z], as a fraction of |z|.
    double room = 0.5;

    // truncation study and Lipschitz probe
    std::vector<double> radii{4.0, 8.0, 16.0, 32.0};
    double tolerance = 0.1;
    double box = 1.0;

    // Kac-Rice sweep
    int origin_samples = 2000;
    int field_draws = 200;
    int level_count = 20;
    double bandwidth = 0.0;
    double kac_rice_box = 8.0;
    double kac_rice_h = 0.1;
};

/// Missing keys keep their defaults; wrong types throw ConfigError naming the key.
ExperimentConfig experiment_from_json(const Json& j);
Json to_json(const ExperimentConfig& cfg);

struct ExperimentResult {
    std::string name;
    Table table;  ///< every row carries the seed that produced it
    Json summary; ///< fits, critical level, pass flags
    Json config;  ///< resolved config echo
    std::uint64_t seed = 0;
    double wall_seconds = 0.0;
};

/// 1 - p(lambda) on growing rectangles and the slope of log(1 - p) in lambda.
ExperimentResult run_crossing_decay(const ExperimentConfig& cfg);
/// P(0 <-> z, d_chem >= C |z|) and quantiles of d_chem / |z| given connection.
ExperimentResult run_chemical_scaling(const ExperimentConfig& cfg);
/// Shortest open path between the |z|^epsilon balls around 0 and z.
ExperimentResult run_global_structure(const ExperimentConfig& cfg);
/// P(sup over the box of |alpha - alpha_R| >= tolerance) on coupled noise.
ExperimentResult run_truncation_study(const ExperimentConfig& cfg);
/// Largest adjacent-cell |d alpha| / h on the box against sup |Hess f| along the rays.
ExperimentResult run_lipschitz_probe(const ExperimentConfig& cfg);
/// Mean level-set length against its expectation formula over the bulk levels.
ExperimentResult run_kac_rice_sweep(const ExperimentConfig& cfg);

const std::vector<std::string>& experiment_names();
/// Dispatch on cfg.name; ConfigError for an unknown name.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Writes <name>.csv (or .json) and <name>.meta.json. Neither file holds the
/// wall clock, so reruns are byte-identical.
std::vector<std::filesystem::path> write_result(const ExperimentResult& r, const std::filesystem::path& dir,
                                                const std::string& format);

/// Two-proportion one-sided z test: is p1 > p2 at the given confidence?
bool proportion_greater(std::int64_t k1, std::int64_t n1, std::int64_t k2, std::int64_t n2,
                        double confidence = 0.95);

inline constexpr const char* tool_version = "shadowlab 0.3.0";

} // namespace shadow
