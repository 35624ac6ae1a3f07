#ifndef KCT_FIELD_GEN_HPP
#define KCT_FIELD_GEN_HPP

#include <cstdint>
#include <vector>

#include "kct/chaining.hpp"

namespace kct {

// Built-in field generators. Each has a closed-form moment oracle, which is
// what makes them usable as regression targets for the hypothesis checks:
//
//   linear        X_t(x) = c * (x_1 + ... + x_d)       deterministic
//   constant      X_t(x) = v                           deterministic
//   brownian      X_t(x) = B(x), d = 1                 per-replication path,
//                                                      frozen in t
//   scaled_noise  X_t(x) = xi * x, d = 1, xi ~ N(0,1)  per replication
//
// Brownian moments: E|B(x)-B(y)|^2 = |x-y|, E|B(x)-B(y)|^4 = 3|x-y|^2.

FieldSample make_linear_field(int d, int m_max, std::vector<double> time_grid, double c,
                              int n_rep = 1);

FieldSample make_constant_field(int d, int m_max, std::vector<double> time_grid, double value,
                                int n_rep = 1);

FieldSample make_brownian_field(int m_max, std::vector<double> time_grid, int n_rep,
                                std::uint64_t master_seed);

FieldSample make_scaled_noise_field(int m_max, std::vector<double> time_grid, int n_rep,
                                    std::uint64_t master_seed);

}  // namespace kct

#endif  // KCT_FIELD_GEN_HPP
