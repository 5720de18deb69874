#pragma once

#include <array>
#include <memory>
#include <mutex>
#include <vector>

#include "nlw/core.hpp"

namespace nlw {

/// Uniform 4D sample box; axis order (t, x, y, z), row-major with z fastest.
struct GridSpec {
    Vec4 origin = Vec4::Zero();
    Vec4 spacing = Vec4::Constant(0.125);
    std::array<int, 4> counts{17, 17, 17, 17};

    std::size_t size() const
    {
        return static_cast<std::size_t>(counts[0]) * counts[1] * counts[2] * counts[3];
    }
    std::size_t index(int it, int ix, int iy, int iz) const
    {
        return ((static_cast<std::size_t>(it) * counts[1] + ix) * counts[2] + iy) * counts[3] + iz;
    }
    Vec4 point(int it, int ix, int iy, int iz) const
    {
        return origin + Vec4(it * spacing(0), ix * spacing(1), iy * spacing(2), iz * spacing(3));
    }
    double cell_volume() const { return spacing.prod(); }
    bool same_geometry(const GridSpec& o) const;
};

/// Spatial frequency lattice used to integrate grid functions over the mass
/// shell: p_i = j * 2 pi / (pad_i * dx_i), |j| <= pad_i / 2 - 1.
struct Lattice {
    Eigen::Vector3d dx = Eigen::Vector3d::Constant(0.125);
    std::array<int, 3> pad{64, 64, 64};

    Eigen::Vector3d dk() const
    {
        return Eigen::Vector3d(kTwoPi / (pad[0] * dx(0)), kTwoPi / (pad[1] * dx(1)),
                               kTwoPi / (pad[2] * dx(2)));
    }
    bool operator==(const Lattice& o) const { return dx == o.dx && pad == o.pad; }
};

/// Lattice nodes on a (forward or backward) mass shell. Column i of k holds
/// (sign * omega, p) for the spatial lattice index idx[i].
struct LatticeNodes {
    Lattice lattice;
    Eigen::Matrix<double, 4, Eigen::Dynamic> k;
    std::vector<std::array<int, 3>> idx;
};

/// Compactly supported (or explicitly unbounded) function sampled on a 4D
/// grid. Samples are shared and immutable; copies are cheap.
class GridFunction {
public:
    /// support_radius < 0 declares no compact support.
    GridFunction(GridSpec spec, std::vector<cplx> samples, Vec4 support_center, double support_radius);

    const GridSpec& spec() const { return data_->spec; }
    const std::vector<cplx>& samples() const { return data_->samples; }
    cplx sample(int it, int ix, int iy, int iz) const { return data_->samples[spec().index(it, ix, iy, iz)]; }
    const Vec4& support_center() const { return data_->center; }
    double support_radius() const { return data_->radius; }
    bool compact() const { return data_->radius >= 0.0; }

    /// Transform of the sampled function, sum_x dV f(x) exp(-i k.x), at any k.
    cplx ft(const Vec4& k) const;

    /// Periodic 4D discrete Fourier transform of the sample box (computed once).
    const std::vector<cplx>& dft() const;
    /// Inverse of dft(): reproduces the samples.
    std::vector<cplx> inverse_dft(const std::vector<cplx>& spectrum) const;

    /// Transform at k = (nodes.k(0) + shift(0), nodes.k(1..3) + shift(1..3)) for every node.
    Eigen::VectorXcd sample_lattice(const LatticeNodes& nodes, const Vec4& shift) const;

private:
    struct Data {
        GridSpec spec;
        std::vector<cplx> samples;
        Vec4 center;
        double radius;
        mutable std::once_flag dft_once;
        mutable std::vector<cplx> dft;
    };
    std::shared_ptr<const Data> data_;
};

/// Grid spec holding a ball of the given radius with points_per_radius samples
/// per radius along every axis.
GridSpec bump_grid(const Vec4& center, double radius, int points_per_radius = 8);

/// amplitude * exp(-1 / (1 - r^2)) with r = |x - center| / radius (Euclidean 4D),
/// identically zero for r >= 1.
GridFunction make_bump(const Vec4& center, double radius, const GridSpec& grid, double amplitude = 1.0);

/// Generic sampling of a real-space function on a grid.
template <typename F>
GridFunction sample_function(const GridSpec& grid, F&& fn, Vec4 support_center, double support_radius)
{
    std::vector<cplx> s(grid.size());
    for (int it = 0; it < grid.counts[0]; ++it)
        for (int ix = 0; ix < grid.counts[1]; ++ix)
            for (int iy = 0; iy < grid.counts[2]; ++iy)
                for (int iz = 0; iz < grid.counts[3]; ++iz)
                    s[grid.index(it, ix, iy, iz)] = fn(grid.point(it, ix, iy, iz));
    return GridFunction(grid, std::move(s), support_center, support_radius);
}

GridFunction translate(const GridFunction& f, const Vec4& x);
GridFunction star(const GridFunction& f);
GridFunction scale(const GridFunction& f, cplx s);
GridFunction add(const GridFunction& f, const GridFunction& g);
GridFunction pointwise_multiply(const GridFunction& f, const GridFunction& g);
/// exp(i phase(x)) * f(x) with a real phase field on the same grid.
GridFunction dress(const GridFunction& f, const GridFunction& phase);
/// Fourth-order central difference along axis mu (0 = t); zero outside the box.
GridFunction derivative(const GridFunction& f, int mu);

/// Spatial lattice suited to a set of grid functions: shared spacing, padded
/// so the periodic image of the combined support is well separated.
Lattice fit_lattice(const std::vector<const GridFunction*>& fns, double pad_factor = 2.0);

/// True if every pair of points of the two declared balls is space-like separated.
bool certified_spacelike(const GridFunction& f, const GridFunction& g);
/// As above, and also for every periodic image of g under the lattice period.
bool certified_spacelike(const GridFunction& f, const GridFunction& g, const Lattice& lattice);

}  // namespace nlw
