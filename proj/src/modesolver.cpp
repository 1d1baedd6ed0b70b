#include "phaselab/modesolver.hpp"

#include "phaselab/errors.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <boost/math/tools/roots.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <ostream>

namespace phaselab::modesolver {

using std::numbers::pi;

void WaveguideGeometry::validate() const {
    if (!(width_nm > 0.0) || !(thickness_nm > 0.0) || !(wavelength_nm > 0.0)) {
        throw InvalidArgument("waveguide width, thickness and wavelength must be positive");
    }
    if (!(clad_index >= 1.0) || !(core_index > clad_index)) {
        throw InvalidArgument(fmt::format(
            "need core_index > clad_index >= 1 (got core {}, clad {})", core_index, clad_index));
    }
}

SlabMode symmetric_slab_even_mode(double n_core, double n_clad, double thickness_nm,
                                  double wavelength_nm, SlabPolarization pol) {
    if (!(n_core > n_clad) || !(n_clad > 0.0) || !(thickness_nm > 0.0) || !(wavelength_nm > 0.0)) {
        throw InvalidArgument("slab needs n_core > n_clad > 0 and positive dimensions");
    }
    const double k0 = 2.0 * pi / wavelength_nm;
    const double half = 0.5 * thickness_nm;
    const double v = k0 * half * std::sqrt(n_core * n_core - n_clad * n_clad);
    const double q = pol == SlabPolarization::TM ? (n_core * n_core) / (n_clad * n_clad) : 1.0;

    auto f = [&](double u) { return u * std::tan(u) - q * std::sqrt(std::max(v * v - u * u, 0.0)); };
    const double u_hi = std::min(v, std::nextafter(0.5 * pi, 0.0));
    std::uintmax_t max_iter = 200;
    const auto [lo, hi] = boost::math::tools::toms748_solve(
        f, 0.0, u_hi, f(0.0), f(u_hi), boost::math::tools::eps_tolerance<double>(52), max_iter);
    const double u = 0.5 * (lo + hi);
    const double w = std::sqrt(std::max(v * v - u * u, 0.0));

    SlabMode mode;
    mode.kappa_per_nm = u / half;
    mode.gamma_per_nm = w / half;
    mode.n_eff = std::sqrt(n_core * n_core - std::pow(mode.kappa_per_nm / k0, 2));
    return mode;
}

double membrane_index(const WaveguideGeometry& geom) {
    return symmetric_slab_even_mode(geom.core_index, geom.clad_index, geom.thickness_nm,
                                    geom.wavelength_nm, SlabPolarization::TE)
        .n_eff;
}

namespace {

// Chebyshev-Gauss-Lobatto collocation on one homogeneous segment.
struct Segment {
    std::vector<double> y;  // ascending
    Eigen::MatrixXd d1;     // d/dy
    Eigen::MatrixXd d2;     // d^2/dy^2
    Eigen::VectorXd quad;   // Clenshaw-Curtis weights
    double eps = 1.0;
};

// Ascending CGL nodes on [-1, 1]. The sine form keeps x[n-1-j] == -x[j].
std::vector<double> cgl_nodes(int m) {
    const int n = m - 1;
    std::vector<double> x(m);
    for (int j = 0; j < m; ++j) x[j] = std::sin(pi * (2.0 * j - n) / (2.0 * n));
    return x;
}

Eigen::MatrixXd cheb_diff(const std::vector<double>& x) {
    const int m = static_cast<int>(x.size());
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(m, m);
    auto c = [m](int j) { return ((j == 0 || j == m - 1) ? 2.0 : 1.0) * ((j % 2) ? -1.0 : 1.0); };
    for (int i = 0; i < m; ++i) {
        double row = 0.0;
        for (int j = 0; j < m; ++j) {
            if (i == j) continue;
            d(i, j) = c(i) / c(j) / (x[i] - x[j]);
            row += d(i, j);
        }
        d(i, i) = -row;
    }
    return d;
}

Eigen::VectorXd clenshaw_curtis(int m) {
    const int n = m - 1;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd v = Eigen::VectorXd::Ones(n - 1);
    auto theta = [n](int k) { return pi * k / n; };
    if (n % 2 == 0) {
        w(0) = w(n) = 1.0 / (n * n - 1.0);
        for (int k = 1; k < n / 2; ++k)
            for (int i = 1; i < n; ++i) v(i - 1) -= 2.0 * std::cos(2.0 * k * theta(i)) / (4.0 * k * k - 1.0);
        for (int i = 1; i < n; ++i) v(i - 1) -= std::cos(n * theta(i)) / (n * n - 1.0);
    } else {
        w(0) = w(n) = 1.0 / (n * n);
        for (int k = 1; k <= (n - 1) / 2; ++k)
            for (int i = 1; i < n; ++i) v(i - 1) -= 2.0 * std::cos(2.0 * k * theta(i)) / (4.0 * k * k - 1.0);
    }
    for (int i = 1; i < n; ++i) w(i) = 2.0 * v(i - 1) / n;
    return w;
}

Segment make_segment(const std::vector<double>& ref, double lo, double hi, double eps) {
    Segment s;
    const double scale = 2.0 / (hi - lo);
    s.y.resize(ref.size());
    for (std::size_t j = 0; j < ref.size(); ++j) s.y[j] = lo + (ref[j] + 1.0) / scale;
    s.d1 = cheb_diff(ref) * scale;
    s.d2 = s.d1 * s.d1;
    s.quad = clenshaw_curtis(static_cast<int>(ref.size())) / scale;
    s.eps = eps;
    return s;
}

double lateral_index(const WaveguideGeometry& geom, double wavelength_nm) {
    WaveguideGeometry g = geom;
    g.wavelength_nm = wavelength_nm;
    const double n_slab = membrane_index(g);
    const auto pol = geom.lateral == LateralModel::Polarized ? SlabPolarization::TM : SlabPolarization::TE;
    const SlabMode lat = symmetric_slab_even_mode(n_slab, geom.clad_index, geom.width_nm, wavelength_nm, pol);
    return lat.n_eff;
}

}  // namespace

ModeProfile solve_te0(const WaveguideGeometry& geom, const SolverOptions& opts) {
    geom.validate();
    if (opts.n_points < 64) {
        throw InvalidArgument(fmt::format("n_points must be >= 64 (got {})", opts.n_points));
    }

    const double lambda = geom.wavelength_nm;
    const double k0 = 2.0 * pi / lambda;
    const double n_slab = membrane_index(geom);
    const double n_clad = geom.clad_index;
    const auto pol = geom.lateral == LateralModel::Polarized ? SlabPolarization::TM : SlabPolarization::TE;
    const SlabMode analytic = symmetric_slab_even_mode(n_slab, n_clad, geom.width_nm, lambda, pol);

    const double a = 0.5 * geom.width_nm;
    const double outer = a + opts.window_decay_lengths / analytic.gamma_per_nm;

    // Core gets an odd node count so y = 0 is a node.
    const int n_req = static_cast<int>(opts.n_points);
    int m_core = n_req / 2;
    if (m_core % 2 == 0) ++m_core;
    const int m_clad = (n_req - m_core + 1) / 2;

    const double eps_core = n_slab * n_slab;
    const double eps_clad = n_clad * n_clad;
    const std::vector<double> ref_core = cgl_nodes(m_core);
    const std::vector<double> ref_clad = cgl_nodes(m_clad);

    Segment right = make_segment(ref_clad, a, outer, eps_clad);
    Segment core = make_segment(ref_core, -a, a, eps_core);
    for (int j = 0; j < m_core; ++j) core.y[j] = a * ref_core[j];
    Segment left = right;
    for (int j = 0; j < m_clad; ++j) left.y[j] = -right.y[m_clad - 1 - j];
    // Reflection y -> -y maps D1 to -P D1 P with P the reversal permutation.
    left.d1 = -right.d1.reverse();
    left.d2 = right.d2.reverse();
    left.quad = right.quad.reverse();

    // Flux weight on u' at the walls: 1 for the scalar model, 1/eps for the
    // polarized model where u is the continuous H field.
    auto flux_weight = [&](const Segment& s) {
        return geom.lateral == LateralModel::Polarized ? 1.0 / s.eps : 1.0;
    };

    // Unique node numbering: left (m_clad) | core (m_core, first shared) | right (first shared).
    const int n_unique = 2 * m_clad + m_core - 2;
    const int i_left_wall = m_clad - 1;
    const int i_right_wall = m_clad + m_core - 2;
    const std::array<const Segment*, 3> segs{&left, &core, &right};
    const std::array<int, 3> offset{0, m_clad - 1, m_clad + m_core - 2};

    // Free unknowns: everything except the two Dirichlet ends and the two walls.
    std::vector<int> free_of_unique(n_unique, -1);
    int n_free = 0;
    for (int i = 0; i < n_unique; ++i) {
        if (i == 0 || i == n_unique - 1 || i == i_left_wall || i == i_right_wall) continue;
        free_of_unique[i] = n_free++;
    }

    Eigen::MatrixXd op = Eigen::MatrixXd::Zero(n_free, n_unique);
    for (int s = 0; s < 3; ++s) {
        const Segment& seg = *segs[s];
        const int m = static_cast<int>(seg.y.size());
        for (int i = 1; i < m - 1; ++i) {
            const int row = free_of_unique[offset[s] + i];
            for (int j = 0; j < m; ++j) op(row, offset[s] + j) += seg.d2(i, j);
            op(row, offset[s] + i) += k0 * k0 * seg.eps;
        }
    }

    // Wall conditions: weighted u' matches on both sides.
    Eigen::MatrixXd wall = Eigen::MatrixXd::Zero(2, n_unique);
    for (int j = 0; j < m_clad; ++j) wall(0, offset[0] + j) += flux_weight(left) * left.d1(m_clad - 1, j);
    for (int j = 0; j < m_core; ++j) wall(0, offset[1] + j) -= flux_weight(core) * core.d1(0, j);
    for (int j = 0; j < m_core; ++j) wall(1, offset[1] + j) += flux_weight(core) * core.d1(m_core - 1, j);
    for (int j = 0; j < m_clad; ++j) wall(1, offset[2] + j) -= flux_weight(right) * right.d1(0, j);

    auto gather_free = [&](const Eigen::MatrixXd& full) {
        Eigen::MatrixXd out(full.rows(), n_free);
        for (int i = 0; i < n_unique; ++i)
            if (free_of_unique[i] >= 0) out.col(free_of_unique[i]) = full.col(i);
        return out;
    };
    Eigen::MatrixXd wall_walls(2, 2);
    wall_walls << wall(0, i_left_wall), wall(0, i_right_wall), wall(1, i_left_wall), wall(1, i_right_wall);
    const Eigen::MatrixXd wall_from_free = -wall_walls.fullPivLu().solve(gather_free(wall));

    Eigen::MatrixXd op_walls(n_free, 2);
    op_walls.col(0) = op.col(i_left_wall);
    op_walls.col(1) = op.col(i_right_wall);
    const Eigen::MatrixXd reduced = gather_free(op) + op_walls * wall_from_free;

    Eigen::EigenSolver<Eigen::MatrixXd> es(reduced, true);
    if (es.info() != Eigen::Success) throw GridTooCoarse("lateral eigenproblem did not converge");
    int best = -1;
    for (int i = 0; i < n_free; ++i) {
        const auto ev = es.eigenvalues()(i);
        if (std::abs(ev.imag()) > 1e-9 * std::abs(ev.real())) continue;
        if (best < 0 || ev.real() > es.eigenvalues()(best).real()) best = i;
    }
    const double beta_sq = best >= 0 ? es.eigenvalues()(best).real() : 0.0;
    if (best < 0 || !(beta_sq > k0 * k0 * eps_clad) || !(beta_sq < k0 * k0 * eps_core)) {
        throw NoBoundMode("lateral problem has no eigenvalue between the cladding and core light lines");
    }

    Eigen::VectorXcd vc = es.eigenvectors().col(best);
    Eigen::Index peak = 0;
    vc.cwiseAbs().maxCoeff(&peak);
    const Eigen::VectorXd v = (vc / vc(peak)).real();
    const double residual = (reduced * v - beta_sq * v).norm() / (beta_sq * v.norm());

    Eigen::VectorXd u = Eigen::VectorXd::Zero(n_unique);
    const Eigen::Vector2d u_walls = wall_from_free * v;
    for (int i = 0; i < n_unique; ++i)
        if (free_of_unique[i] >= 0) u(i) = v(free_of_unique[i]);
    u(i_left_wall) = u_walls(0);
    u(i_right_wall) = u_walls(1);

    // Per-segment fields, then assemble the output grid with duplicated walls.
    const double n_eff = std::sqrt(beta_sq) / k0;
    const double k = k0 * n_eff;
    ModeProfile p;
    std::vector<double> dedy;
    for (int s = 0; s < 3; ++s) {
        const Segment& seg = *segs[s];
        const int m = static_cast<int>(seg.y.size());
        Eigen::VectorXd ey(m);
        for (int j = 0; j < m; ++j) ey(j) = u(offset[s] + j);
        if (geom.lateral == LateralModel::Polarized) ey /= seg.eps;
        const Eigen::VectorXd d = seg.d1 * ey;
        if (s == 1) p.core_begin = p.grid_nm.size();
        for (int j = 0; j < m; ++j) {
            p.grid_nm.push_back(seg.y[j]);
            p.e_y.push_back(ey(j));
            dedy.push_back(d(j));
            p.eps_r.push_back(seg.eps);
        }
        if (s == 1) p.core_end = p.grid_nm.size();
    }

    // Enforce exact parity: e_y even, e_x odd.
    const std::size_t n = p.grid_nm.size();
    for (std::size_t i = 0; i < n / 2; ++i) {
        const std::size_t j = n - 1 - i;
        const double even = 0.5 * (p.e_y[i] + p.e_y[j]);
        const double odd = 0.5 * (dedy[i] - dedy[j]);
        p.e_y[i] = p.e_y[j] = even;
        dedy[i] = odd;
        dedy[j] = -odd;
    }
    const std::size_t centre = p.core_begin + static_cast<std::size_t>(m_core / 2);
    dedy[centre] = 0.0;

    const double scale = 1.0 / p.e_y[centre];
    p.e_x.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        p.e_y[i] *= scale;
        p.e_x[i] = scale * dedy[i] / k;
    }

    double total = 0.0;
    double in_core = 0.0;
    std::size_t base = 0;
    for (int s = 0; s < 3; ++s) {
        const Segment& seg = *segs[s];
        double part = 0.0;
        for (std::size_t j = 0; j < seg.y.size(); ++j) {
            const std::size_t i = base + j;
            part += seg.quad(static_cast<Eigen::Index>(j)) * seg.eps * (p.e_x[i] * p.e_x[i] + p.e_y[i] * p.e_y[i]);
        }
        total += part;
        if (s == 1) in_core = part;
        base += seg.y.size();
    }

    p.half_width_nm = a;
    p.n_eff = n_eff;
    p.k_per_nm = k;
    p.norm_N = total;
    p.slab_index = n_slab;
    p.confinement = in_core / total;
    p.eigen_residual = residual;

    const double h = 1e-4 * lambda;
    const double dn = (lateral_index(geom, lambda + h) - lateral_index(geom, lambda - h)) / (2.0 * h);
    p.group_index = analytic.n_eff - lambda * dn;

    if (p.confinement < opts.min_confinement) {
        throw NoBoundMode(fmt::format(
            "mode is not guided: only {:.3g} of its energy lies in the {} nm core", p.confinement,
            geom.width_nm));
    }
    const double rel_err = std::abs(n_eff - analytic.n_eff) / analytic.n_eff;
    if (rel_err > 1e-9 || residual > 1e-8) {
        throw GridTooCoarse(fmt::format(
            "effective index not converged with {} points (relative error {:.2e}, residual {:.2e})",
            opts.n_points, rel_err, residual));
    }
    return p;
}

namespace {

double lerp_on(const std::vector<double>& y, const std::vector<double>& f, std::size_t lo,
               std::size_t hi, double y0) {
    auto first = y.begin() + static_cast<std::ptrdiff_t>(lo);
    auto last = y.begin() + static_cast<std::ptrdiff_t>(hi);
    auto it = std::upper_bound(first, last, y0);
    if (it == first) return f[lo];
    if (it == last) return f[hi - 1];
    const std::size_t i1 = static_cast<std::size_t>(it - y.begin());
    const std::size_t i0 = i1 - 1;
    const double t = (y0 - y[i0]) / (y[i1] - y[i0]);
    return f[i0] + t * (f[i1] - f[i0]);
}

}  // namespace

ModeWeights mode_weights(const ModeProfile& profile, double y0_nm) {
    if (profile.grid_nm.empty()) throw InvalidArgument("empty mode profile");
    const double reach = profile.grid_nm.back();
    if (!(std::abs(y0_nm) <= reach)) {
        throw OutOfRange(fmt::format("offset {} nm is outside the profile window (+-{} nm)", y0_nm, reach));
    }
    std::size_t lo = 0;
    std::size_t hi = profile.grid_nm.size();
    if (std::abs(y0_nm) <= profile.half_width_nm) {
        lo = profile.core_begin;
        hi = profile.core_end;
    } else if (y0_nm > 0.0) {
        lo = profile.core_end;
    } else {
        hi = profile.core_begin;
    }
    const double ex = lerp_on(profile.grid_nm, profile.e_x, lo, hi, y0_nm);
    const double ey = lerp_on(profile.grid_nm, profile.e_y, lo, hi, y0_nm);
    return {ex * ex, ey * ey};
}

ModeProfile rescaled(const ModeProfile& profile, double factor) {
    ModeProfile out = profile;
    for (auto& v : out.e_x) v *= factor;
    for (auto& v : out.e_y) v *= factor;
    out.norm_N *= factor * factor;
    return out;
}

void write_profile_csv(std::ostream& os, const ModeProfile& profile) {
    os << "y_nm,e_x,e_y\n";
    for (std::size_t i = 0; i < profile.grid_nm.size(); ++i) {
        os << fmt::format("{:.10g},{:.12g},{:.12g}\n", profile.grid_nm[i], profile.e_x[i], profile.e_y[i]);
    }
}

}  // namespace phaselab::modesolver
