#include "kct/field_gen.hpp"

#include <cmath>

#include "kct/rng.hpp"

namespace kct {

namespace {

FieldSample make_shell(int d, int m_max, std::vector<double> time_grid, int n_rep,
                       std::uint64_t seed, const char* tag) {
    FieldSample f;
    f.d = d;
    f.m_max = m_max;
    f.h_dim = 1;
    f.norm = HNorm::L2;
    f.time_grid = std::move(time_grid);
    f.n_rep = n_rep;
    f.master_seed = seed;
    f.generator = tag;
    f.values.assign(static_cast<std::size_t>(n_rep) * f.n_times() * f.n_points(), 0.0);
    return f;
}

}  // namespace

FieldSample make_linear_field(int d, int m_max, std::vector<double> time_grid, double c,
                              int n_rep) {
    FieldSample f = make_shell(d, m_max, std::move(time_grid), n_rep, 0, "linear");
    const DyadicGrid grid = build_grid(d, m_max);
    const std::size_t P = f.n_points();
    std::vector<double> coord_sum(P, 0.0);
    for (std::size_t p = 0; p < P; ++p) {
        double s = 0.0;
        for (int ax = 0; ax < d; ++ax) s += grid.coordinate(p, ax);
        coord_sum[p] = c * s;
    }
    for (int rep = 0; rep < n_rep; ++rep)
        for (std::size_t t = 0; t < f.n_times(); ++t)
            for (std::size_t p = 0; p < P; ++p) *f.at(rep, t, p) = coord_sum[p];
    f.validate();
    return f;
}

FieldSample make_constant_field(int d, int m_max, std::vector<double> time_grid, double value,
                                int n_rep) {
    FieldSample f = make_shell(d, m_max, std::move(time_grid), n_rep, 0, "constant");
    for (double& v : f.values) v = value;
    f.validate();
    return f;
}

FieldSample make_brownian_field(int m_max, std::vector<double> time_grid, int n_rep,
                                std::uint64_t master_seed) {
    FieldSample f = make_shell(1, m_max, std::move(time_grid), n_rep, master_seed, "brownian");
    const std::size_t P = f.n_points();
    const double step_sd = std::sqrt(std::ldexp(1.0, -m_max));
    std::vector<double> path(P);
    for (int rep = 0; rep < n_rep; ++rep) {
        Rng rng(derive_replication_seed(master_seed, static_cast<std::uint64_t>(rep)));
        path[0] = 0.0;
        for (std::size_t p = 1; p < P; ++p) path[p] = path[p - 1] + step_sd * rng.normal();
        for (std::size_t t = 0; t < f.n_times(); ++t)
            for (std::size_t p = 0; p < P; ++p) *f.at(rep, t, p) = path[p];
    }
    f.validate();
    return f;
}

FieldSample make_scaled_noise_field(int m_max, std::vector<double> time_grid, int n_rep,
                                    std::uint64_t master_seed) {
    FieldSample f = make_shell(1, m_max, std::move(time_grid), n_rep, master_seed, "scaled_noise");
    const std::size_t P = f.n_points();
    for (int rep = 0; rep < n_rep; ++rep) {
        Rng rng(derive_replication_seed(master_seed, static_cast<std::uint64_t>(rep)));
        const double xi = rng.normal();
        for (std::size_t t = 0; t < f.n_times(); ++t)
            for (std::size_t p = 0; p < P; ++p)
                *f.at(rep, t, p) = xi * std::ldexp(static_cast<double>(p), -m_max);
    }
    f.validate();
    return f;
}

}  // namespace kct
