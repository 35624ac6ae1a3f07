#ifndef KCT_KERNEL_HPP
#define KCT_KERNEL_HPP

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "kct/errors.hpp"

namespace kct {

// Heat kernel of du/dt = -(-Laplace)^(alpha/2) u, evaluated on a periodic
// grid of extent L (x_j = (j - n/2) L/n per axis). The kernel is defined
// spectrally through the multiplier exp(-t |xi|^alpha); closed forms exist at
// alpha = 2 (Gaussian) and alpha = 1 (Cauchy). The spectral route samples the
// L-periodization of the whole-space kernel, so the extent must be large
// enough that the wrapped tail mass is negligible; the evaluation reports
// total and boundary mass and refuses grids that fail the tolerance.

enum class KernelMethod { ClosedForm, SpectralInversion };

struct KernelSpec {
    double alpha = 2.0;
    int d = 1;
    double extent = 32.0;  // L
    int n = 1024;          // points per axis, power of two
    KernelMethod method = KernelMethod::SpectralInversion;
    double mass_tol = 1e-4;
    double neg_tol = 1e-8;

    void validate() const;
    double dx() const { return extent / n; }
    std::size_t grid_size() const;
    // coordinate of grid index along one axis
    double coord(std::int64_t j) const { return (static_cast<double>(j) - n / 2) * dx(); }

    nlohmann::json to_json() const;
    static KernelSpec from_json(const nlohmann::json& j);
};

struct KernelEvaluation {
    KernelSpec spec;
    double t = 0.0;
    std::vector<double> values;  // row-major over the offset grid
    double mass = 0.0;           // trapezoid integral over the torus
    double boundary_mass = 0.0;  // |x|_inf > L/4 share, the periodization proxy
    double min_value = 0.0;
    double error_estimate = 0.0;
    std::string method_tag;

    std::string to_csv() const;  // columns: x1..xd, value
};

// alpha 2^(alpha-1) pi^(-d/2) Gamma((d+alpha)/2) / Gamma((2-alpha)/2);
// the constant in the principal-value form of (-Laplace)^(alpha/2).
// Throws DomainError outside 0 < alpha < 2.
double frac_laplacian_constant(int d, double alpha);

struct PvQuadratureSpec {
    double split_radius = 0.1;  // |z| below: symmetrized second difference
    double cutoff = 50.0;       // |z| above: analytic algebraic tail
    int panel_nodes = 16;
    double rel_tol = 1e-5;  // node-doubling agreement
};

// (-Laplace)^(alpha/2) f at x for d = 1, via the principal-value integral:
// the inner region uses the symmetrized integrand 2f(x)-f(x+z)-f(x-z) (the
// singularity cancels to O(z^{2-alpha})), the outer region composite
// Gauss-Legendre, and beyond the cutoff the |z|^(-1-alpha) tail of the f(x)
// term integrates analytically. The sign convention is the positive
// operator: Laplace^(alpha/2) f = -(result). Throws QuadratureFailure when
// node doubling disagrees beyond rel_tol.
double fractional_laplacian_pv(const std::function<double(double)>& f, double x, double alpha,
                               const PvQuadratureSpec& quad = {},
                               double* error_estimate = nullptr);

// Evaluate the kernel at time t > 0. Throws MassDeficit when the grid fails
// the mass/boundary tolerance (extent too small for this t).
KernelEvaluation kernel_eval(const KernelSpec& spec, double t);

// Circular convolution (K * g) on the evaluation grid via spectral
// multiplication; g must live on the same grid. Throws GridMismatch.
std::vector<double> kernel_convolve(const KernelEvaluation& kernel, std::span<const double> g);

// Shared read-only cache keyed by (spec, t); single-writer insertion,
// concurrent readers hold stable references.
class KernelCache {
  public:
    const KernelEvaluation& get(const KernelSpec& spec, double t);

  private:
    std::mutex mutex_;
    std::map<std::string, std::unique_ptr<KernelEvaluation>> cache_;
};

}  // namespace kct

#endif  // KCT_KERNEL_HPP
