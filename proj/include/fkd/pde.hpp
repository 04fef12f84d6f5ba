#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "fkd/fk_estimate.hpp"

namespace fkd {

enum class NodeType : std::uint8_t { Interior, Gamma1Face, Gamma0Face, FarFieldFace };

// Tensor grid over a truncated box, graded toward x_d = 0 (the coefficients
// degenerate like x_d^beta there). Nodes on the bottom face that also lie on
// a side face are classified with the side face: the seam is lower
// dimensional and carries Dirichlet data.
struct Grid {
    std::vector<std::vector<double>> axes; // strictly increasing, axes[d-1][0] == 0
    std::vector<NodeType> node_types;      // flat, row-major with axis 0 slowest
    std::vector<long> strides;
    long n_nodes = 0;
    int dim = 0;

    long index(std::span<const int> idx) const {
        long k = 0;
        for (int i = 0; i < dim; ++i) k += strides[i] * idx[i];
        return k;
    }
    void unflatten(long k, std::span<int> idx) const {
        for (int i = 0; i < dim; ++i) {
            idx[i] = static_cast<int>(k / strides[i]);
            k %= strides[i];
        }
    }
    void point(std::span<const int> idx, std::span<double> x) const {
        for (int i = 0; i < dim; ++i) x[i] = axes[i][static_cast<std::size_t>(idx[i])];
    }
    double max_cell() const;
};

struct GridSpec {
    std::vector<int> nodes_per_axis;
    double grading_ratio_max = 1.2;
    double first_cell_frac = 1e-3;     // first x_d cell <= frac * extent
    std::vector<double> truncation_hi; // far bound per axis when the domain is unbounded
    std::vector<double> truncation_lo; // far lower bound (non-degenerate axes)
};

Grid build_grid(const DomainSpec& domain, const GridSpec& spec);

// Row-compressed discrete generator: interior rows approximate
//   A u = -1/2 tr(a D^2 u) - <b, Du> + c u
// with central second differences, sign-adapted 7-point cross stencils and
// drift differences that fall back to first-order upwinding wherever a
// centered stencil would break the monotone (M-matrix) sign pattern.
// Gamma0 rows in scenario A carry the degenerate equation (vanishing
// diffusion, one-sided drift, no boundary data); in scenario B they are
// Dirichlet rows like Gamma1 and far-field faces.
struct DiscreteOperator {
    std::vector<long> row_ptr;
    std::vector<long> col;
    std::vector<double> val;
    long n = 0;

    void apply(std::span<const double> u, std::span<double> out) const;
};

DiscreteOperator discretize(const DiffusionModel& model, const Grid& grid, Scenario scenario);

struct SolverOptions {
    double tol = 1e-10;
    long max_iterations = 100000;
    double omega = 1.5; // (P)SOR relaxation
    double theta = 1.0; // parabolic time scheme in [0.5, 1]
    int time_steps = 200;
    std::optional<ScalarField> far_field; // Dirichlet on truncation faces; defaults to g
};

struct PdeSolution {
    Grid grid;
    std::vector<double> values; // elliptic value / parabolic slice at t = 0
    // parabolic storage: slabs[k] at time slab_times[k], k = 0 .. time_steps
    std::vector<std::vector<double>> slabs;
    std::vector<double> slab_times;
    double residual_norm = 0.0;
    double complementarity_residual = 0.0;
    std::vector<std::uint8_t> active_set; // obstacle contact set on the final slice
    long iterations = 0;

    double value_at(std::span<const double> x) const;
    double value_at(double t, std::span<const double> x) const;
};

PdeSolution solve_elliptic(const DiffusionModel& model, const DomainSpec& domain,
                           const ProblemSpec& spec, const Grid& grid,
                           const SolverOptions& opt = {});

PdeSolution solve_parabolic(const DiffusionModel& model, const DomainSpec& domain,
                            const ProblemSpec& spec, const Grid& grid,
                            const SolverOptions& opt = {});

// Obstacle problems via projected SOR (elliptic) or a per-step projected
// solve (parabolic), to complementarity residual <= opt.tol-driven threshold.
PdeSolution solve_obstacle(const DiffusionModel& model, const DomainSpec& domain,
                           const ProblemSpec& spec, const Grid& grid,
                           const SolverOptions& opt = {});

} // namespace fkd
