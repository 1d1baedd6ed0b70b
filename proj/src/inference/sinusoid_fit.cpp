#include "phaselab/inference.hpp"

#include "phaselab/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace phaselab::inference {

using std::numbers::pi;

namespace {

// Arc of the 2 phi circle covered by the samples: 2 pi minus the widest gap.
double covered_arc(std::span<const double> phases) {
    std::vector<double> ang;
    ang.reserve(phases.size());
    for (double p : phases) {
        double a = std::fmod(2.0 * p, 2.0 * pi);
        if (a < 0.0) a += 2.0 * pi;
        ang.push_back(a);
    }
    std::sort(ang.begin(), ang.end());
    double widest = ang.front() + 2.0 * pi - ang.back();
    for (std::size_t i = 1; i < ang.size(); ++i) widest = std::max(widest, ang[i] - ang[i - 1]);
    return 2.0 * pi - widest;
}

}  // namespace

double SinusoidFit::at(double phi) const { return mean * (1.0 + nu * std::cos(2.0 * phi + theta)); }

SinusoidFit fit_sinusoid(std::span<const double> phases, std::span<const double> values,
                         std::span<const double> sigmas) {
    const std::size_t n = phases.size();
    if (values.size() != n || sigmas.size() != n) throw InvalidArgument("phases, values and sigmas differ in length");
    if (n < 6) throw InsufficientPhaseSpan(fmt::format("sinusoid fit needs at least 6 points, got {}", n));
    if (covered_arc(phases) < pi - 1e-9) {
        throw InsufficientPhaseSpan("samples cover less than pi in 2 phi");
    }
    for (double s : sigmas) {
        if (!(s > 0.0) || !std::isfinite(s)) throw InvalidArgument("sinusoid fit needs positive finite sigmas");
    }

    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 3);
    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        const double w = 1.0 / sigmas[i];
        x(r, 0) = w;
        x(r, 1) = w * std::cos(2.0 * phases[i]);
        x(r, 2) = w * std::sin(2.0 * phases[i]);
        y(r) = w * values[i];
    }
    const Eigen::MatrixXd normal = x.transpose() * x;
    Eigen::LLT<Eigen::MatrixXd> llt(normal);
    if (llt.info() != Eigen::Success) throw InsufficientPhaseSpan("sinusoid design matrix is singular");
    const Eigen::VectorXd beta = x.colPivHouseholderQr().solve(y);
    const Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(3, 3));
    const double chi2 = (y - x * beta).squaredNorm();

    SinusoidFit out;
    out.fit.names = {"m", "a", "b"};
    out.fit.params = {beta(0), beta(1), beta(2)};
    out.fit.covariance = cov;
    for (int k = 0; k < 3; ++k) out.fit.uncertainties.push_back(std::sqrt(std::max(cov(k, k), 0.0)));
    out.fit.converged = true;
    out.fit.n_iter = 1;
    out.chi2_dof = n > 3 ? chi2 / static_cast<double>(n - 3) : 0.0;
    out.fit.goodness = out.chi2_dof;

    const double m = beta(0), a = beta(1), b = beta(2);
    const double amp = std::hypot(a, b);
    out.mean = m;
    out.mean_sigma = out.fit.uncertainties[0];
    if (!(std::abs(m) > 0.0)) throw InvalidArgument("sinusoid mean is zero; visibility undefined");
    out.nu = amp / std::abs(m);

    // Delta method on nu = |(a, b)| / m and theta = atan2(-b, a).
    Eigen::Vector3d dnu(-out.nu / m, 0.0, 0.0);
    if (amp <= 1e-12 * std::abs(m)) {
        out.theta_defined = false;
        out.theta = 0.0;
        out.theta_sigma = std::numeric_limits<double>::quiet_NaN();
        out.fit.flags.emplace_back("theta_undefined");
        out.nu_sigma = std::hypot(out.fit.uncertainties[1], out.fit.uncertainties[2]) / std::abs(m);
        return out;
    }
    dnu(1) = a / (amp * std::abs(m));
    dnu(2) = b / (amp * std::abs(m));
    out.nu_sigma = std::sqrt(std::max(dnu.dot(cov * dnu), 0.0));
    double th = std::atan2(-b, a);
    if (th < 0.0) th += 2.0 * pi;
    if (th >= 2.0 * pi) th -= 2.0 * pi;
    out.theta = th;
    const Eigen::Vector3d dth(0.0, b / (amp * amp), -a / (amp * amp));
    out.theta_sigma = std::sqrt(std::max(dth.dot(cov * dth), 0.0));
    return out;
}

Contrast contrast(double max, double max_sigma, double min, double min_sigma) {
    const double sum = max + min;
    if (!(sum > 0.0)) throw DegenerateRates("max + min must be positive");
    const double dmax = 2.0 * min / (sum * sum);
    const double dmin = -2.0 * max / (sum * sum);
    return {(max - min) / sum, std::hypot(dmax * max_sigma, dmin * min_sigma)};
}

double bootstrap_nu_sigma(std::span<const double> phases, std::span<const double> values,
                          std::span<const double> sigmas, int n_resamples, std::uint64_t seed) {
    if (n_resamples < 2) throw InvalidArgument("bootstrap needs at least two resamples");
    const SinusoidFit base = fit_sinusoid(phases, values, sigmas);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> resampled(values.size());
    double sum = 0.0, sum_sq = 0.0;
    for (int k = 0; k < n_resamples; ++k) {
        for (std::size_t i = 0; i < values.size(); ++i) {
            resampled[i] = base.at(phases[i]) + sigmas[i] * normal(rng);
        }
        const double nu = fit_sinusoid(phases, resampled, sigmas).nu;
        sum += nu;
        sum_sq += nu * nu;
    }
    const double mean = sum / n_resamples;
    return std::sqrt(std::max(sum_sq / n_resamples - mean * mean, 0.0) * n_resamples / (n_resamples - 1.0));
}

}  // namespace phaselab::inference
