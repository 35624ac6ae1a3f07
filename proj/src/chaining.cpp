#include "kct/chaining.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "kct/io_util.hpp"
#include "kct/numeric.hpp"

namespace kct {

namespace {

std::size_t ipow(std::size_t base, int exp) {
    std::size_t r = 1;
    for (int i = 0; i < exp; ++i) r *= base;
    return r;
}

// Lexicographic index of a multi-index with `ppa` points per axis.
std::size_t lex_index(std::span<const std::int64_t> num, std::size_t ppa) {
    std::size_t idx = 0;
    for (std::int64_t n : num) idx = idx * ppa + static_cast<std::size_t>(n);
    return idx;
}

double pair_distance(std::span<const std::int64_t> a, std::span<const std::int64_t> b, int m) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double dx = std::ldexp(static_cast<double>(a[k] - b[k]), -m);
        s += dx * dx;
    }
    return std::sqrt(s);
}

}  // namespace

// ---------------------------------------------------------------------------
// Grids
// ---------------------------------------------------------------------------

DyadicGrid build_grid(int d, int m, std::size_t point_budget) {
    if (d < 1) throw ConfigError("build_grid: d must be >= 1");
    if (m < 0 || m > 56) throw ConfigError("build_grid: m out of range");
    const std::size_t ppa = (std::size_t{1} << m) + 1;
    // overflow-safe budget check
    std::size_t total = 1;
    for (int k = 0; k < d; ++k) {
        if (total > point_budget / ppa + 1) throw BudgetExceeded("build_grid: point budget");
        total *= ppa;
    }
    if (total > point_budget) throw BudgetExceeded("build_grid: point budget");

    DyadicGrid grid;
    grid.d = d;
    grid.m = m;
    grid.points_per_axis = ppa;
    grid.numerators.resize(total * static_cast<std::size_t>(d));

    std::vector<std::int64_t> idx(static_cast<std::size_t>(d), 0);
    for (std::size_t p = 0; p < total; ++p) {
        for (int k = 0; k < d; ++k)
            grid.numerators[p * static_cast<std::size_t>(d) + static_cast<std::size_t>(k)] =
                idx[static_cast<std::size_t>(k)];
        // odometer increment, last axis fastest
        for (int k = d - 1; k >= 0; --k) {
            if (++idx[static_cast<std::size_t>(k)] <= static_cast<std::int64_t>(ppa) - 1) break;
            idx[static_cast<std::size_t>(k)] = 0;
        }
    }
    return grid;
}

NeighborPairs neighbor_pairs(const DyadicGrid& grid) {
    NeighborPairs out;
    out.d = grid.d;
    out.m = grid.m;
    const std::size_t n = grid.n_points();
    const std::int64_t top = static_cast<std::int64_t>(grid.points_per_axis) - 1;
    for (std::size_t p = 0; p < n; ++p) {
        auto num = grid.point(p);
        std::size_t stride = 1;
        for (int axis = grid.d - 1; axis >= 0; --axis) {
            if (num[static_cast<std::size_t>(axis)] < top) out.pairs.emplace_back(p, p + stride);
            stride *= grid.points_per_axis;
        }
    }
    return out;
}

std::vector<std::int64_t> dyadic_approximation(std::span<const double> x, int m) {
    if (m < 0 || m > 56) throw ConfigError("dyadic_approximation: m out of range");
    std::vector<std::int64_t> num(x.size());
    const std::int64_t top = std::int64_t{1} << m;
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (!(x[k] >= 0.0) || !(x[k] <= 1.0))
            throw ConfigError("dyadic_approximation: point outside [0,1]^d");
        num[k] = std::min<std::int64_t>(
            static_cast<std::int64_t>(std::floor(std::ldexp(x[k], m))), top);
    }
    return num;
}

std::vector<ChainSegment> chain_path(std::span<const std::int64_t> a,
                                     std::span<const std::int64_t> b, int level) {
    if (a.size() != b.size()) throw NotReachable("chain_path: dimension mismatch");
    const std::int64_t top = std::int64_t{1} << level;
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (a[k] < 0 || a[k] > top || b[k] < 0 || b[k] > top)
            throw NotReachable("chain_path: point outside the level grid");
        if (std::llabs(a[k] - b[k]) > 1)
            throw NotReachable("chain_path: points differ by more than one lattice step");
    }
    std::vector<ChainSegment> path;
    std::vector<std::int64_t> cur(a.begin(), a.end());
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (cur[k] == b[k]) continue;
        std::vector<std::int64_t> next = cur;
        next[k] = b[k];
        path.push_back(ChainSegment{cur, next});
        cur = std::move(next);
    }
    return path;
}

// ---------------------------------------------------------------------------
// FieldSample
// ---------------------------------------------------------------------------

std::size_t FieldSample::n_points() const {
    return ipow(points_per_axis(), d);
}

double FieldSample::increment_norm(int rep, std::size_t t, std::size_t p, std::size_t q) const {
    const double* a = at(rep, t, p);
    const double* b = at(rep, t, q);
    switch (norm) {
        case HNorm::Sup: {
            double m = 0.0;
            for (int k = 0; k < h_dim; ++k) m = std::max(m, std::abs(a[k] - b[k]));
            return m;
        }
        case HNorm::L2: {
            double s = 0.0;
            for (int k = 0; k < h_dim; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
            return std::sqrt(s);
        }
        case HNorm::L1: {
            double s = 0.0;
            for (int k = 0; k < h_dim; ++k) s += std::abs(a[k] - b[k]);
            return s;
        }
    }
    return 0.0;
}

void FieldSample::validate() const {
    if (d < 1 || m_max < 0 || h_dim < 1 || n_rep < 1)
        throw ConfigError("FieldSample: bad dimensions");
    if (time_grid.empty()) throw ConfigError("FieldSample: empty time grid");
    double prev = -1.0;
    for (double t : time_grid) {
        if (!(t >= 0.0) || !(t <= 1.0) || !(t > prev))
            throw ConfigError("FieldSample: time grid must be strictly increasing in [0,1]");
        prev = t;
    }
    const std::size_t expect = static_cast<std::size_t>(n_rep) * n_times() * n_points() *
                               static_cast<std::size_t>(h_dim);
    if (values.size() != expect) throw ConfigError("FieldSample: value array size mismatch");
    for (double v : values)
        if (!std::isfinite(v)) throw NonFiniteResult("FieldSample: non-finite value");
}

namespace {
constexpr char kFieldMagic[8] = {'K', 'C', 'T', 'F', 'L', 'D', '1', '\n'};

void put_u64(std::ofstream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
std::uint64_t get_u64(std::ifstream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}
}  // namespace

void FieldSample::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("FieldSample::save: cannot open " + path);
    out.write(kFieldMagic, sizeof(kFieldMagic));
    put_u64(out, static_cast<std::uint64_t>(d));
    put_u64(out, static_cast<std::uint64_t>(m_max));
    put_u64(out, static_cast<std::uint64_t>(h_dim));
    put_u64(out, static_cast<std::uint64_t>(norm));
    put_u64(out, static_cast<std::uint64_t>(time_grid.size()));
    put_u64(out, static_cast<std::uint64_t>(n_rep));
    put_u64(out, master_seed);
    put_u64(out, static_cast<std::uint64_t>(generator.size()));
    out.write(generator.data(), static_cast<std::streamsize>(generator.size()));
    out.write(reinterpret_cast<const char*>(time_grid.data()),
              static_cast<std::streamsize>(time_grid.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (!out) throw ConfigError("FieldSample::save: write failed");
}

FieldSample FieldSample::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("FieldSample::load: cannot open " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kFieldMagic, sizeof(magic)) != 0)
        throw ConfigError("FieldSample::load: bad magic");
    FieldSample f;
    f.d = static_cast<int>(get_u64(in));
    f.m_max = static_cast<int>(get_u64(in));
    f.h_dim = static_cast<int>(get_u64(in));
    f.norm = static_cast<HNorm>(get_u64(in));
    const std::size_t n_times = get_u64(in);
    f.n_rep = static_cast<int>(get_u64(in));
    f.master_seed = get_u64(in);
    const std::size_t gen_len = get_u64(in);
    f.generator.resize(gen_len);
    in.read(f.generator.data(), static_cast<std::streamsize>(gen_len));
    f.time_grid.resize(n_times);
    in.read(reinterpret_cast<char*>(f.time_grid.data()),
            static_cast<std::streamsize>(n_times * sizeof(double)));
    const std::size_t n_values = static_cast<std::size_t>(f.n_rep) * n_times * f.n_points() *
                                 static_cast<std::size_t>(f.h_dim);
    f.values.resize(n_values);
    in.read(reinterpret_cast<char*>(f.values.data()),
            static_cast<std::streamsize>(n_values * sizeof(double)));
    if (!in) throw ConfigError("FieldSample::load: truncated file");
    f.validate();
    return f;
}

// ---------------------------------------------------------------------------
// Level increments
// ---------------------------------------------------------------------------

std::vector<double> compute_level_increments(const FieldSample& field, const DyadicGrid& grid,
                                             const NeighborPairs& pairs) {
    if (grid.m != pairs.m || grid.d != pairs.d || grid.d != field.d)
        throw ConfigError("compute_level_increments: grid/pair mismatch");
    if (grid.m > field.m_max)
        throw ConfigError("compute_level_increments: level exceeds field resolution");

    // Map level-m lattice points into the finest grid.
    const std::int64_t scale = std::int64_t{1} << (field.m_max - grid.m);
    const std::size_t ppa_f = field.points_per_axis();
    std::vector<std::size_t> to_field(grid.n_points());
    std::vector<std::int64_t> scaled(static_cast<std::size_t>(grid.d));
    for (std::size_t p = 0; p < grid.n_points(); ++p) {
        auto num = grid.point(p);
        for (int k = 0; k < grid.d; ++k)
            scaled[static_cast<std::size_t>(k)] = num[static_cast<std::size_t>(k)] * scale;
        to_field[p] = lex_index(scaled, ppa_f);
    }

    const std::size_t T = field.n_times();
    std::vector<double> K(static_cast<std::size_t>(field.n_rep) * T, 0.0);
    for (int rep = 0; rep < field.n_rep; ++rep) {
        for (std::size_t t = 0; t < T; ++t) {
            double m = 0.0;
            for (const auto& [a, b] : pairs.pairs)
                m = std::max(m, field.increment_norm(rep, t, to_field[a], to_field[b]));
            K[static_cast<std::size_t>(rep) * T + t] = m;
        }
    }
    return K;
}

LevelIncrementTable compute_all_level_increments(const FieldSample& field, int i_max) {
    if (i_max < 0 || i_max > field.m_max)
        throw ConfigError("compute_all_level_increments: i_max must be in [0, m_max]");
    LevelIncrementTable table;
    table.d = field.d;
    table.i_max = i_max;
    table.n_rep = field.n_rep;
    table.n_times = field.n_times();
    table.k.resize(static_cast<std::size_t>(field.n_rep) * static_cast<std::size_t>(i_max + 1) *
                   table.n_times);
    for (int lvl = 0; lvl <= i_max; ++lvl) {
        const DyadicGrid grid = build_grid(field.d, lvl);
        const NeighborPairs pairs = neighbor_pairs(grid);
        const std::vector<double> K = compute_level_increments(field, grid, pairs);
        for (int rep = 0; rep < field.n_rep; ++rep)
            for (std::size_t t = 0; t < table.n_times; ++t)
                table.at(rep, lvl, t) = K[static_cast<std::size_t>(rep) * table.n_times + t];
    }
    return table;
}

// ---------------------------------------------------------------------------
// Probe pairs
// ---------------------------------------------------------------------------

std::vector<ProbePair> all_grid_pairs(const DyadicGrid& grid) {
    const std::size_t n = grid.n_points();
    std::vector<ProbePair> out;
    out.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            out.push_back({i, j, pair_distance(grid.point(i), grid.point(j), grid.m)});
    return out;
}

std::vector<ProbePair> dyadic_scale_pairs(const DyadicGrid& grid, std::size_t budget) {
    std::vector<ProbePair> out;
    if (budget == 0) return out;
    const std::size_t per_scale = std::max<std::size_t>(1, budget / (grid.m + 1));
    const std::size_t ppa = grid.points_per_axis;
    for (int k = 0; k <= grid.m; ++k) {
        // pairs of level-k subgrid neighbors, mapped into this grid
        const std::int64_t stride_num = std::int64_t{1} << (grid.m - k);
        std::vector<ProbePair> scale_pairs;
        const std::size_t n = grid.n_points();
        for (std::size_t p = 0; p < n; ++p) {
            auto num = grid.point(p);
            bool on_subgrid = true;
            for (int ax = 0; ax < grid.d; ++ax)
                on_subgrid = on_subgrid && (num[static_cast<std::size_t>(ax)] % stride_num == 0);
            if (!on_subgrid) continue;
            std::size_t stride_idx = 1;
            for (int ax = grid.d - 1; ax >= 0; --ax) {
                if (num[static_cast<std::size_t>(ax)] + stride_num <=
                    static_cast<std::int64_t>(ppa) - 1) {
                    const std::size_t q = p + stride_idx * static_cast<std::size_t>(stride_num);
                    scale_pairs.push_back({p, q, std::ldexp(1.0, -k)});
                }
                stride_idx *= ppa;
            }
        }
        const std::size_t take = std::min(per_scale, scale_pairs.size());
        const std::size_t step = std::max<std::size_t>(1, scale_pairs.size() / take);
        for (std::size_t i = 0; i < scale_pairs.size() && out.size() < budget; i += step)
            out.push_back(scale_pairs[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Seminorm and chaining bound
// ---------------------------------------------------------------------------

SeminormResult seminorm(const FieldSample& field, const ModulusFunction& phi, double alpha,
                        std::span<const ProbePair> probe_pairs) {
    if (!(alpha > 0.0)) throw ConfigError("seminorm: alpha must be > 0");
    std::vector<double> weight(probe_pairs.size());
    for (std::size_t i = 0; i < probe_pairs.size(); ++i) {
        const double ph = phi(probe_pairs[i].distance);
        if (ph == 0.0)
            throw DivisionByZero("seminorm: phi vanishes at probed distance " +
                                 std::to_string(probe_pairs[i].distance));
        weight[i] = std::pow(ph, -alpha);
    }
    SeminormResult res;
    res.alpha = alpha;
    res.n_times = field.n_times();
    res.by_rep.assign(static_cast<std::size_t>(field.n_rep), 0.0);
    res.by_rep_time.assign(static_cast<std::size_t>(field.n_rep) * res.n_times, 0.0);
    for (int rep = 0; rep < field.n_rep; ++rep) {
        double sup_rep = 0.0;
        for (std::size_t t = 0; t < res.n_times; ++t) {
            double sup_t = 0.0;
            for (std::size_t i = 0; i < probe_pairs.size(); ++i) {
                const double v =
                    field.increment_norm(rep, t, probe_pairs[i].a, probe_pairs[i].b) * weight[i];
                sup_t = std::max(sup_t, v);
            }
            res.by_rep_time[static_cast<std::size_t>(rep) * res.n_times + t] = sup_t;
            sup_rep = std::max(sup_rep, sup_t);
        }
        res.by_rep[static_cast<std::size_t>(rep)] = sup_rep;
    }
    return res;
}

ChainingBound chaining_bound(const LevelIncrementTable& table, const ModulusFunction& phi,
                             double alpha, int i_max, ChainMode mode, double gamma) {
    if (!(alpha > 0.0)) throw ConfigError("chaining_bound: alpha must be > 0");
    if (i_max < 0 || i_max > table.i_max)
        throw ConfigError("chaining_bound: i_max exceeds tabulated levels");
    if (mode == ChainMode::MomentLT1 && !(gamma > 0.0 && gamma < 1.0))
        throw ConfigError("chaining_bound: MomentLT1 requires gamma in (0,1)");

    const double alpha_eff = (mode == ChainMode::MomentGE1) ? alpha : alpha * gamma;
    const double g = (mode == ChainMode::MomentGE1) ? 1.0 : gamma;

    ChainingBound out;
    out.alpha = alpha;
    out.n_times = table.n_times;

    // C(d) = 2d(d+1) sup_m [phi(2^-m)/phi(2^-m-1)]^alpha_eff; a vanishing
    // phi(2^-m-1) makes the prefactor +inf (reported, not guessed).
    double sup_ratio = 0.0;
    for (int m = 0; m <= i_max; ++m) {
        const double num = phi.eval_dyadic(m);
        const double den = phi.eval_dyadic(m + 1);
        if (den == 0.0) {
            sup_ratio = std::numeric_limits<double>::infinity();
            break;
        }
        sup_ratio = std::max(sup_ratio, std::pow(num / den, alpha_eff));
    }
    const int d = table.d;
    out.c_d = 2.0 * d * (d + 1) * sup_ratio;

    std::vector<double> w(static_cast<std::size_t>(i_max) + 1);
    for (int i = 0; i <= i_max; ++i) {
        const double ph = phi.eval_dyadic(i);
        w[static_cast<std::size_t>(i)] =
            (ph == 0.0) ? std::numeric_limits<double>::infinity() : std::pow(ph, -alpha_eff);
    }

    out.value.assign(static_cast<std::size_t>(table.n_rep) * table.n_times, 0.0);
    for (int rep = 0; rep < table.n_rep; ++rep) {
        for (std::size_t t = 0; t < table.n_times; ++t) {
            double s = 0.0;
            for (int i = 0; i <= i_max; ++i) {
                const double kv = table.at(rep, i, t);
                s += w[static_cast<std::size_t>(i)] * ((g == 1.0) ? kv : std::pow(kv, g));
            }
            out.value[static_cast<std::size_t>(rep) * table.n_times + t] = out.c_d * s;
        }
    }
    return out;
}

namespace {

PathwiseCheckResult pathwise_impl(const FieldSample& field, const LevelIncrementTable& table,
                                  double g) {
    if (table.i_max != field.m_max)
        throw ConfigError("pathwise_chain_check: table must cover levels 0..m_max");
    const DyadicGrid grid = build_grid(field.d, field.m_max);
    const std::vector<ProbePair> pairs = all_grid_pairs(grid);
    const std::size_t T = field.n_times();
    const int i_max = table.i_max;

    // suffix[rep][m][t] = sum_{i=m}^{i_max} K_i(t)^g
    std::vector<double> suffix(static_cast<std::size_t>(field.n_rep) *
                               static_cast<std::size_t>(i_max + 1) * T);
    for (int rep = 0; rep < field.n_rep; ++rep) {
        for (std::size_t t = 0; t < T; ++t) {
            double acc = 0.0;
            for (int i = i_max; i >= 0; --i) {
                const double kv = table.at(rep, i, t);
                acc += (g == 1.0) ? kv : std::pow(kv, g);
                suffix[(static_cast<std::size_t>(rep) * (i_max + 1) +
                        static_cast<std::size_t>(i)) *
                           T +
                       t] = acc;
            }
        }
    }

    // level of each pair: largest m with |x-y| <= 2^-m
    std::vector<int> level(pairs.size(), -1);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const double dist = pairs[i].distance;
        if (dist > 1.0) continue;  // handled by the d-step argument, not this bound
        int m = static_cast<int>(std::floor(-std::log2(dist)));
        while (std::ldexp(1.0, -m) < dist) --m;
        while (m + 1 <= i_max && std::ldexp(1.0, -(m + 1)) >= dist) ++m;
        level[i] = std::clamp(m, 0, i_max);
    }

    PathwiseCheckResult res;
    const double two_d = 2.0 * field.d;
    for (int rep = 0; rep < field.n_rep; ++rep) {
        for (std::size_t t = 0; t < T; ++t) {
            for (std::size_t i = 0; i < pairs.size(); ++i) {
                if (level[i] < 0) continue;
                const double inc = field.increment_norm(rep, t, pairs[i].a, pairs[i].b);
                const double lhs = (g == 1.0) ? inc : std::pow(inc, g);
                const double rhs =
                    two_d * suffix[(static_cast<std::size_t>(rep) * (i_max + 1) +
                                    static_cast<std::size_t>(level[i])) *
                                       T +
                                   t];
                ++res.n_checked;
                if (lhs > rhs) {
                    ++res.n_violations;
                    if (res.pass) {
                        res.rep = rep;
                        res.time_index = t;
                        res.pair_a = pairs[i].a;
                        res.pair_b = pairs[i].b;
                        res.lhs = lhs;
                        res.rhs = rhs;
                    }
                    res.pass = false;
                }
            }
        }
    }
    return res;
}

}  // namespace

PathwiseCheckResult pathwise_chain_check(const FieldSample& field,
                                         const LevelIncrementTable& table, double g) {
    if (!(g > 0.0) || g > 1.0)
        throw ConfigError("pathwise_chain_check: exponent must be in (0,1]");
    return pathwise_impl(field, table, g);
}

// ---------------------------------------------------------------------------
// Monte Carlo hypothesis checks
// ---------------------------------------------------------------------------

namespace {

// mean over replications of sup_t ||dX||^gamma for one pair
double pair_moment(const FieldSample& field, const ProbePair& pair, double gamma,
                   std::vector<double>& scratch) {
    const std::size_t T = field.n_times();
    scratch.resize(static_cast<std::size_t>(field.n_rep));
    for (int rep = 0; rep < field.n_rep; ++rep) {
        double sup = 0.0;
        for (std::size_t t = 0; t < T; ++t)
            sup = std::max(sup, field.increment_norm(rep, t, pair.a, pair.b));
        scratch[static_cast<std::size_t>(rep)] = std::pow(sup, gamma);
    }
    return mean(scratch);
}

}  // namespace

MomentCheckReport moment_hypothesis_check(const FieldSample& field, double gamma,
                                          const ModulusFunction& phi, std::size_t pair_budget,
                                          double slope_tol) {
    if (field.n_rep < 2)
        throw InsufficientReplications("moment_hypothesis_check: need >= 2 replications");
    if (!(gamma > 0.0)) throw ConfigError("moment_hypothesis_check: gamma must be > 0");

    const DyadicGrid grid = build_grid(field.d, field.m_max);
    const std::vector<ProbePair> pairs = dyadic_scale_pairs(grid, pair_budget);

    MomentCheckReport rep;
    rep.slope_tol = slope_tol;
    std::vector<double> scratch;
    for (const ProbePair& p : pairs) {
        MomentPairStat st;
        st.distance = p.distance;
        st.e_hat = pair_moment(field, p, gamma, scratch);
        st.envelope = std::pow(p.distance, field.d) * phi(p.distance);
        rep.pairs.push_back(st);
    }

    std::vector<double> lx, ly, le, ratios;
    for (const auto& st : rep.pairs) {
        if (st.e_hat <= 0.0 || st.envelope <= 0.0) continue;
        lx.push_back(std::log(st.distance));
        le.push_back(std::log(st.envelope));
        ly.push_back(std::log(st.e_hat));
        ratios.push_back(st.e_hat / st.envelope);
    }
    if (ratios.empty()) {
        rep.trivial_zero = true;
        rep.consistent = true;  // zero increments satisfy the bound vacuously
        return rep;
    }
    if (lx.size() >= 2) {
        const LinearFit fd = linear_fit(lx, ly);
        rep.slope_distance = fd.slope;
        const LinearFit fe = linear_fit(le, ly);
        rep.slope_envelope = fe.slope;
        rep.intercept_envelope = fe.intercept;
        rep.c_hat = std::exp(fe.intercept);
    }
    double lo = ratios[0], hi = ratios[0];
    for (double r : ratios) {
        lo = std::min(lo, r);
        hi = std::max(hi, r);
    }
    rep.max_ratio = hi;
    rep.ratio_spread = hi / lo;
    rep.consistent = (rep.slope_envelope >= 1.0 - slope_tol) && std::isfinite(hi) &&
                     rep.ratio_spread <= 100.0;
    return rep;
}

nlohmann::json MomentCheckReport::to_json() const {
    nlohmann::json j;
    j["slope_distance"] = slope_distance;
    j["slope_envelope"] = slope_envelope;
    j["c_hat"] = c_hat;
    j["max_ratio"] = max_ratio;
    j["ratio_spread"] = ratio_spread;
    j["consistent"] = consistent;
    j["trivial_zero"] = trivial_zero;
    j["slope_tol"] = slope_tol;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& st : pairs)
        rows.push_back({{"distance", st.distance}, {"e_hat", st.e_hat}, {"envelope", st.envelope}});
    j["pairs"] = rows;
    return j;
}

HolderFit holder_exponent_fit(const FieldSample& field, double gamma, std::size_t pair_budget) {
    if (field.n_rep < 2)
        throw InsufficientReplications("holder_exponent_fit: need >= 2 replications");
    const DyadicGrid grid = build_grid(field.d, field.m_max);
    const std::vector<ProbePair> pairs = dyadic_scale_pairs(grid, pair_budget);

    // aggregate per separation
    std::vector<double> log_r, log_e;
    std::vector<double> scratch;
    std::size_t i = 0;
    while (i < pairs.size()) {
        const double dist = pairs[i].distance;
        std::vector<double> vals;
        while (i < pairs.size() && pairs[i].distance == dist) {
            vals.push_back(pair_moment(field, pairs[i], gamma, scratch));
            ++i;
        }
        const double e_bar = mean(vals);
        if (e_bar > 0.0) {
            log_r.push_back(std::log(dist));
            log_e.push_back(std::log(e_bar));
        }
    }
    if (log_r.size() < 2) throw DegenerateFit("holder_exponent_fit: need >= 2 separations");
    const LinearFit fit = linear_fit(log_r, log_e);
    HolderFit out;
    out.slope = fit.slope;
    out.epsilon_hat = fit.slope - field.d;
    out.c_hat = std::exp(fit.intercept);
    return out;
}

// ---------------------------------------------------------------------------
// Report bundle
// ---------------------------------------------------------------------------

ChainingReport make_chaining_report(const FieldSample& field, const ModulusFunction& phi,
                                    double alpha, std::span<const ProbePair> probe_pairs,
                                    ChainMode mode, double gamma) {
    ChainingReport rep;
    rep.alpha = alpha;
    rep.increments = compute_all_level_increments(field, field.m_max);
    rep.seminorm = seminorm(field, phi, alpha, probe_pairs);
    rep.bound = chaining_bound(rep.increments, phi, alpha, field.m_max, mode, gamma);
    rep.c_d = rep.bound.c_d;
    return rep;
}

nlohmann::json ChainingReport::to_json() const {
    nlohmann::json j;
    j["alpha"] = alpha;
    j["c_d"] = c_d;
    j["n_rep"] = increments.n_rep;
    j["i_max"] = increments.i_max;
    j["seminorm_by_rep"] = seminorm.by_rep;
    nlohmann::json bounds = nlohmann::json::array();
    for (int rep = 0; rep < increments.n_rep; ++rep) {
        double sup = 0.0;
        for (std::size_t t = 0; t < bound.n_times; ++t)
            sup = std::max(sup, bound.value[static_cast<std::size_t>(rep) * bound.n_times + t]);
        bounds.push_back(sup);
    }
    j["chain_bound_by_rep"] = bounds;
    return j;
}

std::string ChainingReport::increments_csv() const {
    std::string csv = "replication,level,time_index,K_value\n";
    for (int rep = 0; rep < increments.n_rep; ++rep)
        for (int lvl = 0; lvl <= increments.i_max; ++lvl)
            for (std::size_t t = 0; t < increments.n_times; ++t)
                csv += std::to_string(rep) + "," + std::to_string(lvl) + "," + std::to_string(t) +
                       "," + fmt_double(increments.at(rep, lvl, t)) + "\n";
    return csv;
}

std::string ChainingReport::seminorm_csv() const {
    std::string csv = "replication,time_index,seminorm,chain_bound\n";
    for (int rep = 0; rep < increments.n_rep; ++rep)
        for (std::size_t t = 0; t < seminorm.n_times; ++t)
            csv += std::to_string(rep) + "," + std::to_string(t) + "," +
                   fmt_double(
                       seminorm.by_rep_time[static_cast<std::size_t>(rep) * seminorm.n_times + t]) +
                   "," +
                   fmt_double(bound.value[static_cast<std::size_t>(rep) * bound.n_times + t]) +
                   "\n";
    return csv;
}

}  // namespace kct
