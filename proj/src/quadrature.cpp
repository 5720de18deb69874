#include "nlw/quadrature.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <random>
#include <thread>

#include <boost/math/distributions/normal.hpp>
#include <boost/random/sobol.hpp>

namespace nlw {

std::string flag_names(unsigned flags)
{
    std::string s;
    auto add = [&s](const char* n) {
        if (!s.empty())
            s += ",";
        s += n;
    };
    if (flags & kUnconverged)
        add("unconverged");
    if (flags & kOriginExcluded)
        add("origin_excluded");
    if (flags & kTailPessimistic)
        add("tail_pessimistic");
    return s;
}

namespace {

constexpr double kShellNorm = 1.0 / (kTwoPi * kTwoPi * kTwoPi);

int odd_count(int n)
{
    if (n < 8)
        throw DomainError("shell quadrature needs at least 8 nodes per axis");
    return n % 2 == 0 ? n + 1 : n;
}

}  // namespace

ShellRule box_rule(double mass, const Eigen::Vector3d& lo, const Eigen::Vector3d& hi, int n, int sign)
{
    if (mass < 0.0)
        throw DomainError("mass must be nonnegative");
    n = odd_count(n);
    const Eigen::Vector3d h = (hi - lo) / (n - 1);
    if (!(h.minCoeff() > 0.0))
        throw DomainError("shell box must have positive extent");

    ShellRule r;
    r.mass = mass;
    r.sign = sign;
    const Eigen::Index total = static_cast<Eigen::Index>(n) * n * n;
    r.k.resize(4, total);
    r.w.resize(total);
    r.w_coarse.resize(total);
    auto tw = [n](int i) { return (i == 0 || i == n - 1) ? 0.5 : 1.0; };
    auto cw = [n](int i) { return i % 2 != 0 ? 0.0 : ((i == 0 || i == n - 1) ? 1.0 : 2.0); };
    const double cell = h.prod();
    Eigen::Index c = 0;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            for (int d = 0; d < n; ++d, ++c) {
                const double px = lo(0) + a * h(0), py = lo(1) + b * h(1), pz = lo(2) + d * h(2);
                const double om = shell_energy(px, py, pz, mass);
                r.k.col(c) << sign * om, px, py, pz;
                if (om == 0.0) {
                    r.w(c) = r.w_coarse(c) = 0.0;
                    r.origin_excluded = true;
                    continue;
                }
                const double base = cell * kShellNorm / (2.0 * om);
                r.w(c) = base * tw(a) * tw(b) * tw(d);
                r.w_coarse(c) = base * cw(a) * cw(b) * cw(d);
                const int dist = std::min({a, n - 1 - a, b, n - 1 - b, d, n - 1 - d});
                if (dist == 0)
                    r.outer.push_back(c);
                else if (dist == 1)
                    r.inner.push_back(c);
            }
    return r;
}

ShellRule lattice_rule(double mass, const Lattice& lattice, int sign)
{
    if (mass < 0.0)
        throw DomainError("mass must be nonnegative");
    std::array<int, 3> J;
    for (int a = 0; a < 3; ++a) {
        J[a] = lattice.pad[a] / 2 - 1;
        if (J[a] < 4)
            throw DomainError("shell lattice is too small");
    }
    const Eigen::Vector3d dk = lattice.dk();
    ShellRule r;
    r.mass = mass;
    r.sign = sign;
    const Eigen::Index total = static_cast<Eigen::Index>(2 * J[0] + 1) * (2 * J[1] + 1) * (2 * J[2] + 1);
    r.k.resize(4, total);
    r.w.resize(total);
    r.w_coarse.resize(total);
    LatticeNodes ln;
    ln.lattice = lattice;
    ln.idx.resize(total);
    const double cell = dk.prod();
    Eigen::Index c = 0;
    for (int a = -J[0]; a <= J[0]; ++a)
        for (int b = -J[1]; b <= J[1]; ++b)
            for (int d = -J[2]; d <= J[2]; ++d, ++c) {
                const double px = a * dk(0), py = b * dk(1), pz = d * dk(2);
                const double om = shell_energy(px, py, pz, mass);
                r.k.col(c) << sign * om, px, py, pz;
                ln.idx[c] = {a, b, d};
                if (om == 0.0) {
                    r.w(c) = r.w_coarse(c) = 0.0;
                    r.origin_excluded = true;
                    continue;
                }
                const double base = cell * kShellNorm / (2.0 * om);
                r.w(c) = base;
                const bool even = a % 2 == 0 && b % 2 == 0 && d % 2 == 0;
                r.w_coarse(c) = even ? 8.0 * base : 0.0;
                const int dist = std::min({J[0] - std::abs(a), J[1] - std::abs(b), J[2] - std::abs(d)});
                if (dist == 0)
                    r.outer.push_back(c);
                else if (dist == 1)
                    r.inner.push_back(c);
            }
    ln.k = r.k;
    r.lattice = std::move(ln);
    return r;
}

ShellRule fit_rule(const std::vector<Argument>& args, double mass, const Vec4& shift, const ShellConfig& cfg, int sign)
{
    if (args.empty())
        throw DomainError("fit_rule needs at least one argument");
    std::vector<const GridFunction*> grids;
    for (const auto& a : args)
        if (const auto* g = std::get_if<GridFunction>(&a))
            grids.push_back(g);
    if (!grids.empty())
        return lattice_rule(mass, fit_lattice(grids, cfg.lattice_pad), sign);

    Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
    Eigen::Vector3d hi = -lo;
    for (const auto& a : args)
        for (const auto& t : std::get<TestFunction>(a).terms()) {
            const Vec4 sd = t.width.inverse().diagonal().cwiseSqrt();
            for (int i = 0; i < 3; ++i) {
                lo(i) = std::min(lo(i), t.center(i + 1) - cfg.sigmas * sd(i + 1));
                hi(i) = std::max(hi(i), t.center(i + 1) + cfg.sigmas * sd(i + 1));
            }
        }
    // k = p + shift, so the p box is the k box moved by -shift.
    lo -= shift.tail<3>();
    hi -= shift.tail<3>();
    if (cfg.half_extent > 0.0) {
        const Eigen::Vector3d mid = cfg.box_center ? Eigen::Vector3d(*cfg.box_center - shift.tail<3>()) : 0.5 * (lo + hi);
        lo = mid.array() - cfg.half_extent;
        hi = mid.array() + cfg.half_extent;
    }
    return box_rule(mass, lo, hi, cfg.nodes, sign);
}

Eigen::VectorXcd sample(const Argument& a, const ShellRule& rule, const Vec4& shift)
{
    if (const auto* tf = std::get_if<TestFunction>(&a)) {
        Eigen::VectorXcd out(rule.size());
        const Nodes4 ks = rule.k.colwise() + shift;
        tf->sample_ft(ks, out);
        return out;
    }
    if (!rule.lattice)
        throw DomainError("grid functions can only be sampled on a lattice rule");
    return std::get<GridFunction>(a).sample_lattice(*rule.lattice, shift);
}

namespace {

Eigen::MatrixXd layer_sum(const ShellRule& rule, const std::vector<Eigen::Index>& layer, const Eigen::MatrixXcd& F,
                          const Eigen::MatrixXcd& G, const Eigen::VectorXd& d)
{
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(F.cols(), G.cols());
    for (Eigen::Index n : layer) {
        const double wn = rule.w(n) * (d.size() ? std::abs(d(n)) : 1.0);
        if (wn == 0.0)
            continue;
        out.noalias() += wn * F.row(n).cwiseAbs().transpose() * G.row(n).cwiseAbs();
    }
    return out;
}

// Geometric extrapolation of the two outermost layer sums.
Eigen::MatrixXd tail_bound(const ShellRule& rule, const Eigen::MatrixXd& lo, const Eigen::MatrixXd& li,
                           unsigned& flags)
{
    Eigen::MatrixXd tail(lo.rows(), lo.cols());
    const double layers = std::max<double>(1.0, std::cbrt(static_cast<double>(rule.size())) / 2.0);
    for (Eigen::Index i = 0; i < lo.size(); ++i) {
        const double o = lo(i), in = li(i);
        if (o == 0.0) {
            tail(i) = 0.0;
        } else if (in > 0.0 && o / in < 0.95) {
            const double rho = o / in;
            tail(i) = o * rho / (1.0 - rho);
        } else {
            tail(i) = o * layers;
            flags |= kTailPessimistic;
        }
    }
    return tail;
}

}  // namespace

ShellSums shell_sums(const ShellRule& rule, const Eigen::MatrixXcd& F, const Eigen::MatrixXcd& G,
                     const Eigen::VectorXd& d)
{
    if (F.rows() != rule.size() || G.rows() != rule.size() || (d.size() && d.size() != rule.size()))
        throw DomainError("sample matrices do not match the shell rule");
    ShellSums s;
    Eigen::VectorXd wf = rule.w, wc = rule.w_coarse;
    if (d.size()) {
        wf = wf.cwiseProduct(d);
        wc = wc.cwiseProduct(d);
    }
    s.fine.noalias() = F.adjoint() * (wf.asDiagonal() * G);
    s.coarse.noalias() = F.adjoint() * (wc.asDiagonal() * G);

    const Eigen::MatrixXd lo = layer_sum(rule, rule.outer, F, G, d);
    const Eigen::MatrixXd li = layer_sum(rule, rule.inner, F, G, d);
    s.tail = tail_bound(rule, lo, li, s.flags);
    if (rule.origin_excluded)
        s.flags |= kOriginExcluded;
    return s;
}

Eigen::MatrixXd shell_error(const ShellSums& s) { return (s.fine - s.coarse).cwiseAbs() + s.tail; }

GramSums shell_gram_batch(const ShellRule& rule, const Eigen::MatrixXcd& X, const Eigen::MatrixXd& D)
{
    const Eigen::Index N = rule.size(), r = X.cols(), C = D.cols();
    if (X.rows() != N || D.rows() != N)
        throw DomainError("sample matrices do not match the shell rule");
    const Eigen::MatrixXd absX = X.cwiseAbs();
    Eigen::MatrixXcd fine(r * r, C), coarse(r * r, C);
    Eigen::MatrixXd lo(r * r, C), li(r * r, C);

    auto layer = [&](const std::vector<Eigen::Index>& rows, Eigen::Index c) {
        const auto L = static_cast<Eigen::Index>(rows.size());
        Eigen::MatrixXd Y(L, r);
        Eigen::VectorXd wt(L);
        for (Eigen::Index i = 0; i < L; ++i) {
            Y.row(i) = absX.row(rows[i]);
            wt(i) = rule.w(rows[i]) * std::abs(D(rows[i], c));
        }
        const Eigen::MatrixXd S = Y.transpose() * (wt.asDiagonal() * Y);
        return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(S.data(), r * r));
    };
    for (Eigen::Index c = 0; c < C; ++c) {
        const Eigen::VectorXd wf = rule.w.cwiseProduct(D.col(c));
        const Eigen::VectorXd wc = rule.w_coarse.cwiseProduct(D.col(c));
        const Eigen::MatrixXcd F = X.adjoint() * (wf.asDiagonal() * X);
        const Eigen::MatrixXcd Q = X.adjoint() * (wc.asDiagonal() * X);
        fine.col(c) = Eigen::Map<const Eigen::VectorXcd>(F.data(), r * r);
        coarse.col(c) = Eigen::Map<const Eigen::VectorXcd>(Q.data(), r * r);
        lo.col(c) = layer(rule.outer, c);
        li.col(c) = layer(rule.inner, c);
    }

    GramSums out;
    const Eigen::MatrixXd tail = tail_bound(rule, lo, li, out.flags);
    if (rule.origin_excluded)
        out.flags |= kOriginExcluded;
    out.fine.resize(C);
    out.error.resize(C);
    for (Eigen::Index c = 0; c < C; ++c) {
        out.fine[c] = Eigen::Map<const Eigen::MatrixXcd>(fine.col(c).data(), r, r);
        const Eigen::VectorXd e = (fine.col(c) - coarse.col(c)).cwiseAbs() + tail.col(c);
        out.error[c] = Eigen::Map<const Eigen::MatrixXd>(e.data(), r, r);
    }
    return out;
}

IntegralResult shell_integral(const std::function<cplx(const Vec4&)>& weight, double mass,
                              const QuadratureConfig& cfg, const Eigen::Vector3d& center)
{
    const double K = cfg.shell.half_extent > 0.0 ? cfg.shell.half_extent : 8.0;
    const ShellRule rule = box_rule(mass, center.array() - K, center.array() + K, cfg.shell.nodes);
    Eigen::MatrixXcd W(rule.size(), 1);
    for (Eigen::Index n = 0; n < rule.size(); ++n)
        W(n, 0) = rule.w(n) == 0.0 ? cplx(0.0) : weight(rule.k.col(n));
    const Eigen::MatrixXcd one = Eigen::MatrixXcd::Ones(rule.size(), 1);
    const ShellSums s = shell_sums(rule, one, W, Eigen::VectorXd());
    IntegralResult r;
    r.value = s.fine(0, 0);
    r.error_estimate = shell_error(s)(0, 0);
    r.node_count = rule.size();
    r.flags = s.flags;
    return r;
}

IntegralResult shifted_ip(const Argument& f, const Argument& g, double mass, const Vec4& u,
                          const QuadratureConfig& cfg)
{
    const ShellRule rule = fit_rule({f, g}, mass, u, cfg.shell);
    Eigen::MatrixXcd F(rule.size(), 1), G(rule.size(), 1);
    F.col(0) = sample(f, rule, u);
    G.col(0) = sample(g, rule, u);
    const ShellSums s = shell_sums(rule, F, G, Eigen::VectorXd());
    IntegralResult r;
    r.value = s.fine(0, 0);
    r.error_estimate = shell_error(s)(0, 0);
    r.node_count = rule.size();
    r.flags = s.flags;
    return r;
}

namespace {

double radical_inverse(std::uint64_t i, int base)
{
    double inv = 1.0 / base, f = inv, r = 0.0;
    while (i > 0) {
        r += static_cast<double>(i % base) * f;
        i /= base;
        f *= inv;
    }
    return r;
}

constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53,
                           59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113, 127, 131};

}  // namespace

HiddenRule::HiddenRule(std::vector<HiddenDensity> densities, std::vector<double> envelope_sigma,
                       const HiddenConfig& cfg)
    : densities_(std::move(densities)), sigma_(std::move(envelope_sigma)), cfg_(cfg)
{
    if (densities_.empty() || densities_.size() != sigma_.size())
        throw DomainError("hidden rule needs one envelope width per hidden variable");
    for (double s : sigma_)
        if (!(s > 0.0))
            throw DomainError("hidden envelope widths must be positive");
    if (cfg_.nodes < 2 || cfg_.replicas < 1 || !(cfg_.cutoff > 0.0))
        throw DomainError("hidden sampler needs nodes >= 2, replicas >= 1 and a positive cutoff");
    replicas_ = cfg_.error_mode == ErrorMode::grid_doubling ? 1 : cfg_.replicas;
    if (cfg_.error_mode == ErrorMode::sequence_splitting && replicas_ < 2)
        throw DomainError("sequence splitting needs at least two replicas");
    points_ = (cfg_.nodes + replicas_ - 1) / replicas_;
    const int dim = 4 * dims();
    if (cfg_.sequence == Sequence::halton && dim > static_cast<int>(std::size(kPrimes)))
        throw DomainError("halton sequence supports at most 8 hidden variables");

    base_.resize(dim, points_);
    if (cfg_.sequence == Sequence::sobol) {
        boost::random::sobol eng(dim);
        for (int q = 0; q < points_; ++q)
            for (int d = 0; d < dim; ++d)
                base_(d, q) = static_cast<double>(eng() >> 11) * 0x1.0p-53;
    } else {
        for (int q = 0; q < points_; ++q)
            for (int d = 0; d < dim; ++d)
                base_(d, q) = radical_inverse(static_cast<std::uint64_t>(q) + 1, kPrimes[d]);
    }
    std::mt19937_64 rng(cfg_.seed);
    shifts_.resize(dim, replicas_);
    for (int r = 0; r < replicas_; ++r)
        for (int d = 0; d < dim; ++d)
            shifts_(d, r) = static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

HiddenSample HiddenRule::sample(int replica, int point) const
{
    static const boost::math::normal unit;
    const int m = dims();
    HiddenSample s;
    s.u.resize(4 * m);
    double log_q = 0.0;
    bool inside = true;
    for (int j = 0; j < m; ++j)
        for (int c = 0; c < 4; ++c) {
            const int d = 4 * j + c;
            double z = base_(d, point) + shifts_(d, replica);
            z -= std::floor(z);
            z = std::clamp(z, 0x1.0p-60, 1.0 - 0x1.0p-53);
            const double x = boost::math::quantile(unit, z);
            s.u(d) = sigma_[j] * x;
            if (std::abs(x) > cfg_.cutoff)
                inside = false;
            log_q += -0.5 * x * x - std::log(sigma_[j] * std::sqrt(kTwoPi));
        }
    if (!inside)
        return s;
    double hp = 1.0, hm = 1.0;
    for (int j = 0; j < m; ++j) {
        const Vec4 uj = s.u.segment<4>(4 * j);
        hp *= densities_[j](uj);
        hm *= densities_[j](-uj);
    }
    const double scale = std::exp(-log_q - 4.0 * m * std::log(kTwoPi));
    s.w_plus = hp * scale;
    s.w_minus = hm * scale;
    return s;
}

IntegralResult hidden_integral(const std::function<cplx(const Eigen::VectorXd&)>& factor_product,
                               const HiddenRule& rule, int threads)
{
    const int R = rule.replicas(), P = rule.points_per_replica();
    std::vector<cplx> rep(R, 0.0), half(R, 0.0);
    parallel_for(R, threads, [&](int r) {
        cplx acc = 0.0;
        for (int q = 0; q < P; ++q) {
            const HiddenSample s = rule.sample(r, q);
            if (s.w_plus != 0.0)
                acc += 0.5 * s.w_plus * factor_product(s.u);
            if (s.w_minus != 0.0)
                acc += 0.5 * s.w_minus * factor_product(-s.u);
            if (q == P / 2 - 1)
                half[r] = acc / static_cast<double>(P / 2);
        }
        rep[r] = acc / static_cast<double>(P);
    });
    IntegralResult out;
    cplx mean = 0.0;
    for (const cplx& v : rep)
        mean += v;
    mean /= static_cast<double>(R);
    double err = 0.0;
    if (rule.config().error_mode == ErrorMode::grid_doubling) {
        err = std::abs(rep[0] - half[0]);
    } else {
        double var = 0.0;
        for (const cplx& v : rep)
            var += std::norm(v - mean);
        err = std::sqrt(var / (R - 1) / R);
    }
    out.value = mean;
    out.error_estimate = err;
    out.node_count = 2L * R * P;
    if (err > rule.config().rel_tol * std::abs(mean))
        out.flags |= kUnconverged;
    return out;
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn)
{
    if (threads <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (int i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error)
                    error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    const int w = std::min(threads, n);
    for (int t = 0; t < w; ++t)
        pool.emplace_back(worker);
    for (auto& t : pool)
        t.join();
    if (error)
        std::rethrow_exception(error);
}

}  // namespace nlw
