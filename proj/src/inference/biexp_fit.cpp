#include "phaselab/inference.hpp"

#include "phaselab/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace phaselab::inference {

double FitResult::value(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return params[i];
    }
    throw InvalidArgument(fmt::format("no fit parameter named '{}'", name));
}

double FitResult::sigma(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return uncertainties[i];
    }
    throw InvalidArgument(fmt::format("no fit parameter named '{}'", name));
}

bool FitResult::has_flag(std::string_view flag) const {
    return std::find(flags.begin(), flags.end(), flag) != flags.end();
}

namespace {

constexpr int kParams = 5;
enum { kAf = 0, kGf = 1, kAs = 2, kGs = 3, kBg = 4 };

// Bin integral of exp(-g t) over [a, b] and its first two g-derivatives.
struct BinTerm {
    double e, d1, d2;
};

BinTerm bin_term(double g, double a, double b) {
    const double ea = std::exp(-g * a);
    const double eb = std::exp(-g * b);
    const double e = ea * -std::expm1(-g * (b - a)) / g;
    const double n1 = -a * ea + b * eb;
    const double n2 = a * a * ea - b * b * eb;
    const double d1 = (n1 - e) / g;
    const double d2 = (n2 - 2.0 * d1) / g;
    return {e, d1, d2};
}

struct Eval {
    std::vector<double> mu;
    Eigen::MatrixXd jac;  // bins x params
    std::vector<BinTerm> fast, slow;
};

Eval evaluate(const DecayWindow& w, const BiexpParams& p) {
    const std::size_t n = w.counts.size();
    Eval ev;
    ev.mu.resize(n);
    ev.jac.resize(static_cast<Eigen::Index>(n), kParams);
    ev.fast.resize(n);
    ev.slow.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const BinTerm f = bin_term(p[kGf], w.t0[i], w.t1[i]);
        const BinTerm s = bin_term(p[kGs], w.t0[i], w.t1[i]);
        ev.fast[i] = f;
        ev.slow[i] = s;
        ev.mu[i] = p[kAf] * f.e + p[kAs] * s.e + p[kBg];
        const auto r = static_cast<Eigen::Index>(i);
        ev.jac(r, kAf) = f.e;
        ev.jac(r, kGf) = p[kAf] * f.d1;
        ev.jac(r, kAs) = s.e;
        ev.jac(r, kGs) = p[kAs] * s.d1;
        ev.jac(r, kBg) = 1.0;
    }
    return ev;
}

bool admissible(const Eval& ev, const BiexpParams& p) {
    if (!(p[kGf] > 0.0) || !(p[kGs] > 0.0)) return false;
    for (double m : ev.mu) {
        if (!(m > 0.0) || !std::isfinite(m)) return false;
    }
    return true;
}

// Poisson log-likelihood relative to the saturated model (minus half the
// deviance), which keeps the value small enough to resolve the last steps.
double loglik(const DecayWindow& w, const Eval& ev) {
    double ll = 0.0;
    for (std::size_t i = 0; i < ev.mu.size(); ++i) {
        const double n = w.counts[i];
        ll += (n > 0.0 ? n * std::log(ev.mu[i] / n) : 0.0) - (ev.mu[i] - n);
    }
    return ll;
}

Eigen::VectorXd gradient(const DecayWindow& w, const Eval& ev) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(kParams);
    for (std::size_t i = 0; i < ev.mu.size(); ++i) {
        g += (w.counts[i] / ev.mu[i] - 1.0) * ev.jac.row(static_cast<Eigen::Index>(i)).transpose();
    }
    return g;
}

Eigen::MatrixXd fisher(const Eval& ev) {
    Eigen::MatrixXd f = Eigen::MatrixXd::Zero(kParams, kParams);
    for (std::size_t i = 0; i < ev.mu.size(); ++i) {
        const auto row = ev.jac.row(static_cast<Eigen::Index>(i));
        f.noalias() += row.transpose() * row / ev.mu[i];
    }
    return f;
}

Eigen::MatrixXd hessian(const DecayWindow& w, const Eval& ev, const BiexpParams& p) {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(kParams, kParams);
    for (std::size_t i = 0; i < ev.mu.size(); ++i) {
        const auto row = ev.jac.row(static_cast<Eigen::Index>(i));
        const double n = w.counts[i];
        const double mu = ev.mu[i];
        h.noalias() -= (n / (mu * mu)) * row.transpose() * row;
        const double resid = n / mu - 1.0;
        h(kAf, kGf) += resid * ev.fast[i].d1;
        h(kGf, kAf) += resid * ev.fast[i].d1;
        h(kGf, kGf) += resid * p[kAf] * ev.fast[i].d2;
        h(kAs, kGs) += resid * ev.slow[i].d1;
        h(kGs, kAs) += resid * ev.slow[i].d1;
        h(kGs, kGs) += resid * p[kAs] * ev.slow[i].d2;
    }
    return h;
}

// Weighted log-linear regression ln n = c - g t over the selected bins.
std::optional<std::pair<double, double>> log_slope(const DecayWindow& w, std::size_t begin, std::size_t end,
                                                   const std::vector<double>& y) {
    double sw = 0, st = 0, sy = 0, stt = 0, sty = 0;
    int used = 0;
    for (std::size_t i = begin; i < end; ++i) {
        if (!(y[i] > 0.0)) continue;
        const double t = 0.5 * (w.t0[i] + w.t1[i]);
        const double ly = std::log(y[i]);
        const double wt = y[i];
        sw += wt;
        st += wt * t;
        sy += wt * ly;
        stt += wt * t * t;
        sty += wt * t * ly;
        ++used;
    }
    if (used < 3) return std::nullopt;
    const double det = sw * stt - st * st;
    if (!(std::abs(det) > 0.0)) return std::nullopt;
    const double slope = (sw * sty - st * sy) / det;
    const double icpt = (sy - slope * st) / sw;
    return std::make_pair(icpt, -slope);
}

// Amplitudes and background for fixed rates (weighted linear least squares).
void linear_amplitudes(const DecayWindow& w, BiexpParams& p) {
    Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
    Eigen::Vector3d b = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < w.counts.size(); ++i) {
        const Eigen::Vector3d x(bin_term(p[kGf], w.t0[i], w.t1[i]).e, bin_term(p[kGs], w.t0[i], w.t1[i]).e, 1.0);
        const double wt = 1.0 / std::max(w.counts[i], 1.0);
        a.noalias() += wt * x * x.transpose();
        b += wt * w.counts[i] * x;
    }
    const Eigen::Vector3d sol = a.ldlt().solve(b);
    if (sol.allFinite() && sol(0) > 0.0 && sol(1) > 0.0) {
        p[kAf] = sol(0);
        p[kAs] = sol(1);
        p[kBg] = std::max(sol(2), 0.0);
    }
}

BiexpParams initial_guess(const DecayWindow& w, const std::optional<synthlab::ExcitonModel>& init) {
    const std::size_t n = w.counts.size();
    const double span = w.t1.back();
    const double width = w.t1[0] - w.t0[0];
    BiexpParams p{};
    if (init) {
        p = {1.0, init->gamma_f, init->amp_ratio, init->gamma_s, init->background};
        linear_amplitudes(w, p);
        return p;
    }

    std::size_t tail_begin = 0;
    while (tail_begin < n && w.t0[tail_begin] < 2.0 * span / 3.0) ++tail_begin;
    const auto tail = log_slope(w, tail_begin, n, w.counts);
    double gs = 0.1;
    double as = 0.0;
    if (tail && tail->second > 1e-4 && std::isfinite(tail->second)) {
        gs = tail->second;
        as = std::exp(tail->first) / width;
    }

    std::vector<double> resid(n);
    for (std::size_t i = 0; i < n; ++i) {
        resid[i] = w.counts[i] - as * width * std::exp(-gs * 0.5 * (w.t0[i] + w.t1[i]));
    }
    std::size_t early_end = 0;
    while (early_end < n && w.t0[early_end] < span / 10.0) ++early_end;
    const auto early = log_slope(w, 0, early_end, resid);
    double gf = 10.0 * gs;
    double af = std::max(w.counts[0], 1.0) / width;
    if (early && std::isfinite(early->second) && early->second > 1.2 * gs) {
        gf = early->second;
        af = std::exp(early->first) / width;
    }
    if (!(as > 0.0)) as = 0.05 * af;
    p = {af, gf, as, gs, 0.0};
    linear_amplitudes(w, p);
    return p;
}

}  // namespace

DecayWindow fit_window(const synthlab::DecayHistogram& hist) {
    hist.validate();
    const auto peak = static_cast<std::size_t>(
        std::distance(hist.counts.begin(), std::max_element(hist.counts.begin(), hist.counts.end())));
    DecayWindow w;
    w.offset_ns = hist.bin_edges_ns[peak];
    for (std::size_t i = peak; i < hist.counts.size(); ++i) {
        w.t0.push_back(hist.bin_edges_ns[i] - w.offset_ns);
        w.t1.push_back(hist.bin_edges_ns[i + 1] - w.offset_ns);
        w.counts.push_back(hist.counts[i]);
    }
    return w;
}

std::vector<double> biexp_expected(const DecayWindow& w, const BiexpParams& p) { return evaluate(w, p).mu; }

double biexp_loglikelihood(const DecayWindow& w, const BiexpParams& p) { return loglik(w, evaluate(w, p)); }

Eigen::VectorXd biexp_gradient(const DecayWindow& w, const BiexpParams& p) { return gradient(w, evaluate(w, p)); }

Eigen::MatrixXd biexp_hessian(const DecayWindow& w, const BiexpParams& p) {
    return hessian(w, evaluate(w, p), p);
}

BiexpFit fit_biexponential(const synthlab::DecayHistogram& hist, const std::optional<synthlab::ExcitonModel>& init,
                           const BiexpOptions& opts) {
    const DecayWindow w = fit_window(hist);
    if (w.counts.size() < 8) throw NonIdentifiable("fewer than 8 bins after the histogram peak");

    BiexpParams p = initial_guess(w, init);
    Eval ev = evaluate(w, p);
    if (!admissible(ev, p)) throw NotConverged("no admissible starting point for the decay fit");
    double ll = loglik(w, ev);

    double lambda = 1e-3;
    double decrement = std::numeric_limits<double>::infinity();
    bool converged = false;
    int iter = 0;
    for (; iter < opts.max_iter; ++iter) {
        const Eigen::VectorXd g = gradient(w, ev);
        Eigen::MatrixXd curv = -hessian(w, ev, p);
        Eigen::LLT<Eigen::MatrixXd> llt(curv);
        if (llt.info() != Eigen::Success) curv = fisher(ev);
        const Eigen::MatrixXd f = fisher(ev);
        Eigen::LDLT<Eigen::MatrixXd> fl(f);
        decrement = g.dot(fl.solve(g));
        if (!std::isfinite(decrement)) break;
        if (decrement < 1e-16) {
            converged = true;
            break;
        }

        bool accepted = false;
        bool stalled = false;
        const Eigen::VectorXd diag = curv.diagonal().cwiseMax(1e-300);
        while (lambda < 1e12) {
            Eigen::MatrixXd sys = curv;
            sys.diagonal() += lambda * diag;
            const Eigen::VectorXd step = sys.ldlt().solve(g);
            BiexpParams trial = p;
            for (int k = 0; k < kParams; ++k) trial[static_cast<std::size_t>(k)] += step(k);
            Eval tev = evaluate(w, trial);
            if (step.allFinite() && admissible(tev, trial)) {
                const double tll = loglik(w, tev);
                if (tll >= ll) {
                    stalled = decrement < 1e-6 && tll - ll <= 1e-12 * std::max(1.0, std::abs(ll));
                    p = trial;
                    ev = std::move(tev);
                    ll = tll;
                    lambda = std::max(lambda / 10.0, 1e-12);
                    accepted = true;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if (!accepted || stalled) {
            // No further ascent at working precision.
            converged = decrement < 1e-6;
            ++iter;
            break;
        }
    }

    if (p[kGf] < p[kGs]) {
        std::swap(p[kAf], p[kAs]);
        std::swap(p[kGf], p[kGs]);
        ev = evaluate(w, p);
    }
    const double ratio = p[kGf] / p[kGs];
    if (!(ratio >= opts.min_rate_ratio)) {
        throw NonIdentifiable(fmt::format("fitted gamma_f / gamma_s = {:.3g} is below {}", ratio, opts.min_rate_ratio));
    }

    Eigen::MatrixXd info = -hessian(w, ev, p);
    std::vector<std::string> flags;
    Eigen::LLT<Eigen::MatrixXd> llt(info);
    if (llt.info() != Eigen::Success) {
        info = fisher(ev);
        llt.compute(info);
        flags.emplace_back("fisher_covariance");
    }
    if (llt.info() != Eigen::Success) throw NonIdentifiable("information matrix is singular at the optimum");
    const Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(kParams, kParams));

    BiexpFit out;
    out.fit.names = {"A_f", "gamma_f", "A_s", "gamma_s", "bg"};
    out.fit.params.assign(p.begin(), p.end());
    out.fit.covariance = cov;
    for (int k = 0; k < kParams; ++k) out.fit.uncertainties.push_back(std::sqrt(std::max(cov(k, k), 0.0)));
    for (int amp : {kAf, kAs}) {
        if (!(std::abs(p[static_cast<std::size_t>(amp)]) > 2.0 * out.fit.uncertainties[static_cast<std::size_t>(amp)])) {
            throw NonIdentifiable("one decay component is not resolved above noise");
        }
    }
    if (!converged) {
        throw NotConverged(fmt::format("decay fit did not converge in {} iterations", opts.max_iter));
    }

    double deviance = 0.0;
    for (std::size_t i = 0; i < ev.mu.size(); ++i) {
        const double n = w.counts[i];
        deviance += 2.0 * ((n > 0.0 ? n * std::log(n / ev.mu[i]) : 0.0) - (n - ev.mu[i]));
    }
    out.fit.goodness = deviance / std::max<double>(1.0, static_cast<double>(ev.mu.size()) - kParams);
    out.fit.gradient_norm = std::sqrt(std::max(decrement, 0.0));
    out.fit.converged = converged;
    out.fit.n_iter = iter;

    out.low_statistics = hist.total_counts < opts.low_stat_counts;
    if (out.low_statistics) flags.emplace_back("low_statistics");
    out.fit.flags = std::move(flags);

    out.gamma_f = p[kGf];
    out.gamma_s = p[kGs];
    out.gamma_f_sigma = out.fit.uncertainties[kGf];
    out.gamma_s_sigma = out.fit.uncertainties[kGs];
    out.gamma_rad = p[kGf] - p[kGs];
    out.gamma_rad_sigma = std::sqrt(std::max(cov(kGf, kGf) + cov(kGs, kGs) - 2.0 * cov(kGf, kGs), 0.0));
    out.gamma_nrad = p[kGs];
    out.gamma_nrad_sigma = out.gamma_s_sigma;
    return out;
}

}  // namespace phaselab::inference
