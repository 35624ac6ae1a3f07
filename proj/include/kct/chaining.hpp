#ifndef KCT_CHAINING_HPP
#define KCT_CHAINING_HPP

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "kct/errors.hpp"
#include "kct/modulus.hpp"

namespace kct {

// Dyadic chaining machinery over [0,1]^d: level-m grids, nearest-neighbor
// pairs, per-level increments K_i(t), the seminorm sup ||X(x)-X(y)|| /
// phi(|x-y|)^alpha and its chaining upper bound. Grid coordinates are stored
// as integer numerators at scale 2^-m so lattice arithmetic stays exact;
// only distances are formed in floating point.

// ---------------------------------------------------------------------------
// Grids and pairs
// ---------------------------------------------------------------------------

struct DyadicGrid {
    int d = 1;
    int m = 0;
    std::size_t points_per_axis = 0;        // 2^m + 1
    std::vector<std::int64_t> numerators;   // [point][axis], lexicographic

    std::size_t n_points() const { return numerators.size() / static_cast<std::size_t>(d); }
    std::span<const std::int64_t> point(std::size_t i) const {
        return {numerators.data() + i * static_cast<std::size_t>(d), static_cast<std::size_t>(d)};
    }
    double coordinate(std::size_t i, int axis) const {
        return std::ldexp(static_cast<double>(numerators[i * static_cast<std::size_t>(d) +
                                                          static_cast<std::size_t>(axis)]),
                          -m);
    }
};

// Full lattice {2^-m i : i in [0, 2^m]^d}, lexicographic. Throws
// BudgetExceeded when (2^m+1)^d exceeds point_budget.
DyadicGrid build_grid(int d, int m, std::size_t point_budget = (std::size_t{1} << 26));

struct NeighborPairs {
    int d = 1;
    int m = 0;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;  // indices into the grid
};

// All axis-aligned nearest-neighbor pairs {(x,y) : |x-y| = 2^-m}; the count
// is d * 2^m * (2^m+1)^(d-1), below the d * 2^((m+1)d) bound.
NeighborPairs neighbor_pairs(const DyadicGrid& grid);

// Componentwise floor(2^m x)/2^m, returned as level-m numerators. The map is
// nondecreasing in m and fixes points already on the level-m grid.
std::vector<std::int64_t> dyadic_approximation(std::span<const double> x, int m);

struct ChainSegment {
    std::vector<std::int64_t> from;  // level-(i+1) numerators
    std::vector<std::int64_t> to;
};

// Axis-by-axis walk between two level-(i+1) points that differ by at most
// one lattice step per coordinate: at most d segments, each a nearest-
// neighbor move of length 2^-(i+1). Throws NotReachable otherwise.
std::vector<ChainSegment> chain_path(std::span<const std::int64_t> a,
                                     std::span<const std::int64_t> b, int level);

// ---------------------------------------------------------------------------
// Sampled fields
// ---------------------------------------------------------------------------

enum class HNorm { Sup, L2, L1 };

struct FieldSample {
    int d = 1;
    int m_max = 0;
    int h_dim = 1;
    HNorm norm = HNorm::L2;
    std::vector<double> time_grid;  // strictly increasing, inside [0,1]
    int n_rep = 0;
    std::uint64_t master_seed = 0;
    std::string generator;
    std::vector<double> values;  // [rep][time][point][h], row-major

    std::size_t points_per_axis() const { return (std::size_t{1} << m_max) + 1; }
    std::size_t n_points() const;
    std::size_t n_times() const { return time_grid.size(); }

    const double* at(int rep, std::size_t t, std::size_t point) const {
        return values.data() +
               ((static_cast<std::size_t>(rep) * n_times() + t) * n_points() + point) *
                   static_cast<std::size_t>(h_dim);
    }
    double* at(int rep, std::size_t t, std::size_t point) {
        return const_cast<double*>(std::as_const(*this).at(rep, t, point));
    }

    // ||X_t(p) - X_t(q)||_H under the configured norm.
    double increment_norm(int rep, std::size_t t, std::size_t p, std::size_t q) const;

    void validate() const;  // finite values, sorted time grid in [0,1]

    void save(const std::string& path) const;
    static FieldSample load(const std::string& path);
};

// ---------------------------------------------------------------------------
// Level increments and bounds
// ---------------------------------------------------------------------------

struct LevelIncrementTable {
    int d = 1;
    int i_max = 0;       // levels 0..i_max
    int n_rep = 0;
    std::size_t n_times = 0;
    std::vector<double> k;  // [rep][level][time]

    std::size_t index(int rep, int level, std::size_t t) const {
        return (static_cast<std::size_t>(rep) * static_cast<std::size_t>(i_max + 1) +
                static_cast<std::size_t>(level)) *
                   n_times +
               t;
    }
    double at(int rep, int level, std::size_t t) const { return k[index(rep, level, t)]; }
    double& at(int rep, int level, std::size_t t) { return k[index(rep, level, t)]; }
};

// K_i(t) = max over Delta_i of ||X_t(x) - X_t(y)|| for a single level; the
// pairs' level must not exceed the field resolution.
std::vector<double> compute_level_increments(const FieldSample& field, const DyadicGrid& grid,
                                             const NeighborPairs& pairs);

// K_i(t) for all levels i = 0..i_max.
LevelIncrementTable compute_all_level_increments(const FieldSample& field, int i_max);

struct ProbePair {
    std::size_t a = 0;
    std::size_t b = 0;
    double distance = 0.0;
};

// All unordered pairs of distinct grid points (use on small grids).
std::vector<ProbePair> all_grid_pairs(const DyadicGrid& grid);

// Axis-aligned pairs at separation exactly 2^-k for k = 0..m_max, at most
// `budget` pairs spread evenly across scales.
std::vector<ProbePair> dyadic_scale_pairs(const DyadicGrid& grid, std::size_t budget);

struct SeminormResult {
    double alpha = 0.0;
    std::vector<double> by_rep;       // sup over times and probe pairs
    std::vector<double> by_rep_time;  // [rep][time]
    std::size_t n_times = 0;
};

// Empirical seminorm over the probe pairs; a lower bound for the continuum
// sup. Throws DivisionByZero when phi vanishes at a probed separation.
SeminormResult seminorm(const FieldSample& field, const ModulusFunction& phi, double alpha,
                        std::span<const ProbePair> probe_pairs);

enum class ChainMode { MomentGE1, MomentLT1 };

struct ChainingBound {
    double c_d = 0.0;  // 2d(d+1) * sup_m [phi(2^-m)/phi(2^-m-1)]^alpha_eff
    double alpha = 0.0;
    std::vector<double> value;  // [rep][time]
    std::size_t n_times = 0;
};

// C(d) * sum_{i<=i_max} phi(2^-i)^-alpha K_i(t) (MomentGE1), or the power-
// gamma variant with phi^-(alpha*gamma) and K_i^gamma (MomentLT1). When phi
// vanishes at a probed level the bound is reported as +inf.
ChainingBound chaining_bound(const LevelIncrementTable& table, const ModulusFunction& phi,
                             double alpha, int i_max, ChainMode mode = ChainMode::MomentGE1,
                             double gamma = 1.0);

struct PathwiseCheckResult {
    bool pass = true;
    std::size_t n_checked = 0;
    std::size_t n_violations = 0;
    // first witness
    int rep = -1;
    std::size_t time_index = 0;
    std::size_t pair_a = 0, pair_b = 0;
    double lhs = 0.0, rhs = 0.0;
};

// Exact finite-level chaining inequality: for every replication, time and
// grid pair with |x-y| <= 2^-m (m maximal), ||dX||^g <= 2d sum_{i>=m} K_i^g.
// g = 1 is the plain inequality; 0 < g < 1 the power variant.
PathwiseCheckResult pathwise_chain_check(const FieldSample& field,
                                         const LevelIncrementTable& table, double g = 1.0);

// ---------------------------------------------------------------------------
// Monte Carlo hypothesis checks
// ---------------------------------------------------------------------------

struct MomentPairStat {
    double distance = 0.0;
    double e_hat = 0.0;     // mean over replications of sup_t ||dX||^gamma
    double envelope = 0.0;  // |x-y|^d phi(|x-y|)
};

struct MomentCheckReport {
    std::vector<MomentPairStat> pairs;
    double slope_distance = 0.0;  // log e_hat against log |x-y|
    double slope_envelope = 0.0;  // log e_hat against log(|x-y|^d phi)
    double intercept_envelope = 0.0;
    double c_hat = 0.0;
    double max_ratio = 0.0;  // worst e_hat / envelope
    double ratio_spread = 0.0;
    bool consistent = false;
    bool trivial_zero = false;  // all estimates zero (e.g. constant field)
    double slope_tol = 0.0;

    nlohmann::json to_json() const;
};

// Checks the moment hypothesis E[sup_t ||dX||^gamma] <= C |x-y|^d phi(|x-y|)
// by regression over pairs sampled across dyadic scales. Consistent when the
// envelope slope is >= 1 - slope_tol and the pairwise ratios stay within a
// fixed spread. Throws InsufficientReplications below 2 replications.
MomentCheckReport moment_hypothesis_check(const FieldSample& field, double gamma,
                                          const ModulusFunction& phi, std::size_t pair_budget,
                                          double slope_tol = 0.1);

struct HolderFit {
    double epsilon_hat = 0.0;
    double c_hat = 0.0;
    double slope = 0.0;  // = d + epsilon_hat
};

// Least-squares fit of log E[sup_t ||dX||^gamma] = log C + (d+eps) log|x-y|
// over dyadic separations. Throws DegenerateFit when fewer than two distinct
// separations are available.
HolderFit holder_exponent_fit(const FieldSample& field, double gamma,
                              std::size_t pair_budget = 4096);

// ---------------------------------------------------------------------------
// Report bundle
// ---------------------------------------------------------------------------

struct ChainingReport {
    double alpha = 0.0;
    double c_d = 0.0;
    LevelIncrementTable increments;
    SeminormResult seminorm;
    ChainingBound bound;

    nlohmann::json to_json() const;
    // CSV columns: replication, level, time_index, K_value
    std::string increments_csv() const;
    // CSV columns: replication, time_index, seminorm, chain_bound
    std::string seminorm_csv() const;
};

ChainingReport make_chaining_report(const FieldSample& field, const ModulusFunction& phi,
                                    double alpha, std::span<const ProbePair> probe_pairs,
                                    ChainMode mode = ChainMode::MomentGE1, double gamma = 1.0);

}  // namespace kct

#endif  // KCT_CHAINING_HPP
