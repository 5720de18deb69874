#include "nlw/grid.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include <fftw3.h>

namespace nlw {

namespace {

std::mutex& planner_mutex()
{
    static std::mutex m;
    return m;
}

struct FftwBuffer {
    explicit FftwBuffer(std::size_t n) : n(n), ptr(static_cast<cplx*>(fftw_malloc(sizeof(cplx) * n))) {}
    ~FftwBuffer() { fftw_free(ptr); }
    FftwBuffer(const FftwBuffer&) = delete;
    FftwBuffer& operator=(const FftwBuffer&) = delete;
    fftw_complex* raw() { return reinterpret_cast<fftw_complex*>(ptr); }
    std::size_t n;
    cplx* ptr;
};

// Plans are cached per shape and sign; execution with fresh fftw_malloc'ed
// arrays is thread-safe, planning is not.
fftw_plan cached_plan(const std::vector<int>& dims, int sign)
{
    static std::map<std::pair<std::vector<int>, int>, fftw_plan> plans;
    std::lock_guard<std::mutex> lock(planner_mutex());
    auto key = std::make_pair(dims, sign);
    auto it = plans.find(key);
    if (it != plans.end())
        return it->second;
    std::size_t n = 1;
    for (int d : dims)
        n *= static_cast<std::size_t>(d);
    FftwBuffer in(n), out(n);
    fftw_plan p = fftw_plan_dft(static_cast<int>(dims.size()), dims.data(), in.raw(), out.raw(), sign,
                                FFTW_ESTIMATE);
    plans.emplace(key, p);
    return p;
}

bool fft_friendly(int n)
{
    for (int f : {2, 3, 5})
        while (n % f == 0)
            n /= f;
    return n == 1;
}

}  // namespace

bool GridSpec::same_geometry(const GridSpec& o) const
{
    return counts == o.counts && (spacing - o.spacing).cwiseAbs().maxCoeff() == 0.0;
}

GridFunction::GridFunction(GridSpec spec, std::vector<cplx> samples, Vec4 support_center, double support_radius)
{
    if (samples.size() != spec.size())
        throw DomainError("grid sample count does not match the grid spec");
    for (int a = 0; a < 4; ++a)
        if (spec.counts[a] < 1 || !(spec.spacing(a) > 0.0))
            throw DomainError("grid spec needs positive counts and spacings");
    if (support_radius >= 0.0) {
        for (int it = 0; it < spec.counts[0]; ++it)
            for (int ix = 0; ix < spec.counts[1]; ++ix)
                for (int iy = 0; iy < spec.counts[2]; ++iy)
                    for (int iz = 0; iz < spec.counts[3]; ++iz) {
                        const double r = (spec.point(it, ix, iy, iz) - support_center).norm();
                        if (r > support_radius * (1.0 + 1e-12) && samples[spec.index(it, ix, iy, iz)] != cplx(0.0))
                            throw DomainError("grid samples do not vanish outside the declared support");
                    }
    }
    auto d = std::make_shared<Data>();
    d->spec = spec;
    d->samples = std::move(samples);
    d->center = support_center;
    d->radius = support_radius;
    data_ = std::move(d);
}

cplx GridFunction::ft(const Vec4& k) const
{
    const GridSpec& g = spec();
    std::array<std::vector<cplx>, 4> ph;
    for (int a = 0; a < 4; ++a) {
        ph[a].resize(g.counts[a]);
        const double sign = a == 0 ? -1.0 : 1.0;  // exp(-i k.x), k.x = k0 t - k.x
        for (int i = 0; i < g.counts[a]; ++i)
            ph[a][i] = std::polar(1.0, sign * k(a) * (g.origin(a) + i * g.spacing(a)));
    }
    cplx acc = 0.0;
    for (int it = 0; it < g.counts[0]; ++it) {
        cplx acc_t = 0.0;
        for (int ix = 0; ix < g.counts[1]; ++ix) {
            cplx acc_x = 0.0;
            for (int iy = 0; iy < g.counts[2]; ++iy) {
                cplx acc_y = 0.0;
                const cplx* row = &samples()[g.index(it, ix, iy, 0)];
                for (int iz = 0; iz < g.counts[3]; ++iz)
                    acc_y += row[iz] * ph[3][iz];
                acc_x += acc_y * ph[2][iy];
            }
            acc_t += acc_x * ph[1][ix];
        }
        acc += acc_t * ph[0][it];
    }
    return acc * g.cell_volume();
}

const std::vector<cplx>& GridFunction::dft() const
{
    std::call_once(data_->dft_once, [this] {
        const GridSpec& g = spec();
        std::vector<int> dims(g.counts.begin(), g.counts.end());
        FftwBuffer in(g.size()), out(g.size());
        std::copy(samples().begin(), samples().end(), in.ptr);
        fftw_execute_dft(cached_plan(dims, FFTW_FORWARD), in.raw(), out.raw());
        data_->dft.assign(out.ptr, out.ptr + g.size());
    });
    return data_->dft;
}

std::vector<cplx> GridFunction::inverse_dft(const std::vector<cplx>& spectrum) const
{
    const GridSpec& g = spec();
    if (spectrum.size() != g.size())
        throw DomainError("spectrum size does not match the grid");
    std::vector<int> dims(g.counts.begin(), g.counts.end());
    FftwBuffer in(g.size()), out(g.size());
    std::copy(spectrum.begin(), spectrum.end(), in.ptr);
    fftw_execute_dft(cached_plan(dims, FFTW_BACKWARD), in.raw(), out.raw());
    std::vector<cplx> s(out.ptr, out.ptr + g.size());
    const double inv = 1.0 / static_cast<double>(g.size());
    for (auto& v : s)
        v *= inv;
    return s;
}

Eigen::VectorXcd GridFunction::sample_lattice(const LatticeNodes& nodes, const Vec4& shift) const
{
    const GridSpec& g = spec();
    const Lattice& lat = nodes.lattice;
    for (int a = 0; a < 3; ++a) {
        if (std::abs(lat.dx(a) - g.spacing(a + 1)) > 1e-14 * g.spacing(a + 1))
            throw DomainError("grid spacing does not match the shell lattice");
        if (g.counts[a + 1] > lat.pad[a])
            throw DomainError("grid box is larger than the shell lattice period");
    }
    const int nx = lat.pad[0], ny = lat.pad[1], nz = lat.pad[2];
    const std::size_t nfft = static_cast<std::size_t>(nx) * ny * nz;
    const Eigen::Index nn = nodes.k.cols();

    std::vector<std::size_t> flat(nn);
    for (Eigen::Index i = 0; i < nn; ++i) {
        const auto& j = nodes.idx[i];
        const int a = (j[0] % nx + nx) % nx, b = (j[1] % ny + ny) % ny, c = (j[2] % nz + nz) % nz;
        flat[i] = (static_cast<std::size_t>(a) * ny + b) * nz + c;
    }

    // Spatial modulation by exp(i v.(x - origin)) folds the shift into the FFT.
    std::array<std::vector<cplx>, 3> mod;
    for (int a = 0; a < 3; ++a) {
        mod[a].resize(g.counts[a + 1]);
        for (int i = 0; i < g.counts[a + 1]; ++i)
            mod[a][i] = std::polar(1.0, shift(a + 1) * i * g.spacing(a + 1));
    }

    std::vector<cplx> phase(nn), step(nn);
    for (Eigen::Index i = 0; i < nn; ++i) {
        const double k0 = nodes.k(0, i) + shift(0);
        phase[i] = std::polar(1.0, -k0 * g.origin(0));
        step[i] = std::polar(1.0, -k0 * g.spacing(0));
    }

    Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(nn);
    FftwBuffer in(nfft), out(nfft);
    fftw_plan plan = cached_plan({nx, ny, nz}, FFTW_BACKWARD);
    for (int it = 0; it < g.counts[0]; ++it) {
        std::fill(in.ptr, in.ptr + nfft, cplx(0.0));
        bool any = false;
        for (int ix = 0; ix < g.counts[1]; ++ix)
            for (int iy = 0; iy < g.counts[2]; ++iy) {
                const cplx mxy = mod[0][ix] * mod[1][iy];
                const cplx* row = &samples()[g.index(it, ix, iy, 0)];
                cplx* dst = in.ptr + (static_cast<std::size_t>(ix) * ny + iy) * nz;
                for (int iz = 0; iz < g.counts[3]; ++iz) {
                    if (row[iz] != cplx(0.0)) {
                        dst[iz] = row[iz] * mxy * mod[2][iz];
                        any = true;
                    }
                }
            }
        if (any) {
            fftw_execute_dft(plan, in.raw(), out.raw());
            for (Eigen::Index i = 0; i < nn; ++i)
                acc(i) += out.ptr[flat[i]] * phase[i];
        }
        for (Eigen::Index i = 0; i < nn; ++i)
            phase[i] *= step[i];
    }

    const double dv = g.cell_volume();
    for (Eigen::Index i = 0; i < nn; ++i) {
        double kx = 0.0;
        for (int a = 0; a < 3; ++a)
            kx += (nodes.k(a + 1, i) + shift(a + 1)) * g.origin(a + 1);
        acc(i) *= dv * std::polar(1.0, kx);
    }
    return acc;
}

GridSpec bump_grid(const Vec4& center, double radius, int points_per_radius)
{
    if (!(radius > 0.0) || points_per_radius < 1)
        throw DomainError("bump grid needs a positive radius and resolution");
    GridSpec g;
    const double h = radius / points_per_radius;
    g.spacing = Vec4::Constant(h);
    g.origin = center - Vec4::Constant(radius);
    g.counts.fill(2 * points_per_radius + 1);
    return g;
}

GridFunction make_bump(const Vec4& center, double radius, const GridSpec& grid, double amplitude)
{
    if (!(radius > 0.0))
        throw DomainError("bump radius must be positive");
    for (int a = 0; a < 4; ++a) {
        if (radius / grid.spacing(a) < 8.0 - 1e-9) {
            std::ostringstream msg;
            msg << "grid too coarse for bump: " << radius / grid.spacing(a) << " points across the radius (need 8)";
            throw DomainError(msg.str());
        }
        const double lo = grid.origin(a);
        const double hi = grid.origin(a) + (grid.counts[a] - 1) * grid.spacing(a);
        if (center(a) - radius < lo - 1e-9 * radius || center(a) + radius > hi + 1e-9 * radius)
            throw DomainError("bump support does not fit inside the grid extents");
    }
    auto profile = [&](const Vec4& x) -> cplx {
        const double r = (x - center).norm() / radius;
        if (r >= 1.0)
            return 0.0;
        return amplitude * std::exp(-1.0 / (1.0 - r * r));
    };
    return sample_function(grid, profile, center, radius);
}

GridFunction translate(const GridFunction& f, const Vec4& x)
{
    GridSpec g = f.spec();
    g.origin += x;
    return GridFunction(g, f.samples(), f.support_center() + x, f.support_radius());
}

GridFunction star(const GridFunction& f)
{
    std::vector<cplx> s = f.samples();
    for (auto& v : s)
        v = std::conj(v);
    return GridFunction(f.spec(), std::move(s), f.support_center(), f.support_radius());
}

GridFunction scale(const GridFunction& f, cplx c)
{
    std::vector<cplx> s = f.samples();
    for (auto& v : s)
        v *= c;
    return GridFunction(f.spec(), std::move(s), f.support_center(), f.support_radius());
}

namespace {

void require_same_grid(const GridFunction& f, const GridFunction& g)
{
    if (!f.spec().same_geometry(g.spec()) || (f.spec().origin - g.spec().origin).cwiseAbs().maxCoeff() != 0.0)
        throw DomainError("grid functions live on different grids");
}

// Declared support of a combination: the ball covering both (or unbounded).
std::pair<Vec4, double> union_support(const GridFunction& f, const GridFunction& g)
{
    if (!f.compact() || !g.compact())
        return {f.support_center(), -1.0};
    const double d = (f.support_center() - g.support_center()).norm();
    if (d + g.support_radius() <= f.support_radius())
        return {f.support_center(), f.support_radius()};
    if (d + f.support_radius() <= g.support_radius())
        return {g.support_center(), g.support_radius()};
    const double r = 0.5 * (d + f.support_radius() + g.support_radius());
    const Vec4 c = f.support_center() + (g.support_center() - f.support_center()) * ((r - f.support_radius()) / d);
    return {c, r};
}

}  // namespace

GridFunction add(const GridFunction& f, const GridFunction& g)
{
    require_same_grid(f, g);
    std::vector<cplx> s = f.samples();
    for (std::size_t i = 0; i < s.size(); ++i)
        s[i] += g.samples()[i];
    auto [c, r] = union_support(f, g);
    return GridFunction(f.spec(), std::move(s), c, r);
}

GridFunction pointwise_multiply(const GridFunction& f, const GridFunction& g)
{
    require_same_grid(f, g);
    std::vector<cplx> s = f.samples();
    for (std::size_t i = 0; i < s.size(); ++i)
        s[i] *= g.samples()[i];
    if (f.compact() && (!g.compact() || f.support_radius() <= g.support_radius()))
        return GridFunction(f.spec(), std::move(s), f.support_center(), f.support_radius());
    return GridFunction(f.spec(), std::move(s), g.support_center(), g.support_radius());
}

GridFunction dress(const GridFunction& f, const GridFunction& phase)
{
    require_same_grid(f, phase);
    std::vector<cplx> s = f.samples();
    for (std::size_t i = 0; i < s.size(); ++i)
        s[i] *= std::polar(1.0, phase.samples()[i].real());
    return GridFunction(f.spec(), std::move(s), f.support_center(), f.support_radius());
}

GridFunction derivative(const GridFunction& f, int mu)
{
    if (mu < 0 || mu > 3)
        throw DomainError("derivative axis must be 0..3");
    const GridSpec& g = f.spec();
    std::vector<cplx> s(g.size(), cplx(0.0));
    const double inv = 1.0 / (12.0 * g.spacing(mu));
    std::array<int, 4> i{};
    auto at = [&](std::array<int, 4> j, int off) -> cplx {
        j[mu] += off;
        if (j[mu] < 0 || j[mu] >= g.counts[mu])
            return 0.0;
        return f.samples()[g.index(j[0], j[1], j[2], j[3])];
    };
    for (i[0] = 0; i[0] < g.counts[0]; ++i[0])
        for (i[1] = 0; i[1] < g.counts[1]; ++i[1])
            for (i[2] = 0; i[2] < g.counts[2]; ++i[2])
                for (i[3] = 0; i[3] < g.counts[3]; ++i[3])
                    s[g.index(i[0], i[1], i[2], i[3])] =
                        (-at(i, 2) + 8.0 * at(i, 1) - 8.0 * at(i, -1) + at(i, -2)) * inv;
    // Central differences can leak one stencil width past the support.
    const double r = f.compact() ? f.support_radius() + 2.0 * g.spacing(mu) : -1.0;
    return GridFunction(g, std::move(s), f.support_center(), r);
}

Lattice fit_lattice(const std::vector<const GridFunction*>& fns, double pad_factor)
{
    if (fns.empty())
        throw DomainError("fit_lattice needs at least one grid function");
    Lattice lat;
    const GridSpec& g0 = fns.front()->spec();
    for (int a = 0; a < 3; ++a) {
        lat.dx(a) = g0.spacing(a + 1);
        double lo = g0.origin(a + 1), hi = lo;
        int max_count = 0;
        for (const GridFunction* f : fns) {
            const GridSpec& g = f->spec();
            if (g.spacing(a + 1) != lat.dx(a))
                throw DomainError("grid functions on one shell lattice need equal spatial spacing");
            lo = std::min(lo, g.origin(a + 1));
            hi = std::max(hi, g.origin(a + 1) + (g.counts[a + 1] - 1) * g.spacing(a + 1));
            max_count = std::max(max_count, g.counts[a + 1]);
        }
        int n = std::max(max_count, static_cast<int>(std::ceil(pad_factor * (hi - lo) / lat.dx(a))) + 1);
        n += n % 2;
        while (!fft_friendly(n))
            n += 2;
        lat.pad[a] = n;
    }
    return lat;
}

namespace {

bool balls_spacelike(const Vec4& dc, double reach)
{
    // For |w| <= reach, (dc + w) is space-like whenever |dc_spatial| - |dc_0| > sqrt(2) reach.
    return dc.tail<3>().norm() - std::abs(dc(0)) > std::sqrt(2.0) * reach;
}

}  // namespace

bool certified_spacelike(const GridFunction& f, const GridFunction& g)
{
    if (!f.compact() || !g.compact())
        return false;
    return balls_spacelike(g.support_center() - f.support_center(), f.support_radius() + g.support_radius());
}

bool certified_spacelike(const GridFunction& f, const GridFunction& g, const Lattice& lattice)
{
    if (!certified_spacelike(f, g))
        return false;
    const Eigen::Vector3d period(lattice.pad[0] * lattice.dx(0), lattice.pad[1] * lattice.dx(1),
                                 lattice.pad[2] * lattice.dx(2));
    const double reach = f.support_radius() + g.support_radius();
    for (int a = -2; a <= 2; ++a)
        for (int b = -2; b <= 2; ++b)
            for (int c = -2; c <= 2; ++c) {
                Vec4 dc = g.support_center() - f.support_center();
                dc.tail<3>() += Eigen::Vector3d(a * period(0), b * period(1), c * period(2));
                if (!balls_spacelike(dc, reach))
                    return false;
            }
    return true;
}

}  // namespace nlw
