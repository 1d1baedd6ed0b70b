#include "phaselab/synthlab.hpp"

#include "phaselab/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <ostream>
#include <random>
#include <thread>

namespace phaselab::synthlab {

PhaseCalibration PhaseCalibration::from_table(std::vector<std::pair<double, double>> table) {
    PhaseCalibration cal;
    cal.model = Model::Table;
    cal.table = std::move(table);
    if (!cal.table.empty()) {
        cal.v_min = cal.table.front().first;
        cal.v_max = cal.table.back().first;
    }
    cal.validate();
    return cal;
}

PhaseCalibration PhaseCalibration::quadratic(double coeff, double phi0, double v_min, double v_max) {
    PhaseCalibration cal;
    cal.model = Model::Quadratic;
    cal.quad_coeff = coeff;
    cal.phi0 = phi0;
    cal.v_min = v_min;
    cal.v_max = v_max;
    cal.validate();
    return cal;
}

void PhaseCalibration::validate() const {
    if (model == Model::Table) {
        if (table.size() < 2) throw InvalidArgument("calibration table needs at least two entries");
        int direction = 0;
        for (std::size_t i = 1; i < table.size(); ++i) {
            if (!(table[i].first > table[i - 1].first)) {
                throw InvalidArgument("calibration voltages must be strictly increasing");
            }
            const double dphi = table[i].second - table[i - 1].second;
            const int d = dphi > 0.0 ? 1 : (dphi < 0.0 ? -1 : 0);
            if (d != 0 && direction != 0 && d != direction) {
                throw InvalidArgument("calibration phase must be monotone");
            }
            if (d != 0) direction = d;
        }
    } else if (!(v_max > v_min) || !std::isfinite(quad_coeff) || !std::isfinite(phi0)) {
        throw InvalidArgument("quadratic calibration needs v_min < v_max and finite coefficients");
    }
}

double phase_of_voltage(const PhaseCalibration& cal, double volts) {
    const double tol = 1e-12 * std::max(1.0, std::abs(cal.v_max - cal.v_min));
    if (!(volts >= cal.v_min - tol && volts <= cal.v_max + tol)) {
        throw OutOfCalibration(fmt::format("{} V is outside the calibrated range [{}, {}] V", volts,
                                           cal.v_min, cal.v_max));
    }
    if (cal.model == PhaseCalibration::Model::Quadratic) return cal.quad_coeff * volts * volts + cal.phi0;

    const auto& t = cal.table;
    auto it = std::upper_bound(t.begin(), t.end(), volts,
                               [](double v, const auto& entry) { return v < entry.first; });
    if (it == t.begin()) return t.front().second;
    if (it == t.end()) return t.back().second;
    const auto& hi = *it;
    const auto& lo = *(it - 1);
    const double w = (volts - lo.first) / (hi.first - lo.first);
    return lo.second + w * (hi.second - lo.second);
}

std::vector<double> TimeBinning::edges() const {
    if (!(bin_ns > 0.0) || !(t_max_ns > bin_ns)) throw InvalidArgument("time binning needs 0 < bin < t_max");
    const auto n = static_cast<std::size_t>(std::llround(t_max_ns / bin_ns));
    std::vector<double> e(n + 1);
    for (std::size_t i = 0; i <= n; ++i) e[i] = bin_ns * static_cast<double>(i);
    return e;
}

void ExcitonModel::validate() const {
    // Equal rates are accepted here; the fitter flags them as non-identifiable.
    if (!(gamma_s >= 0.0) || !(gamma_f >= gamma_s) || !(gamma_f > 0.0)) {
        throw InvalidArgument(fmt::format("need gamma_f >= gamma_s >= 0 (got {}, {})", gamma_f, gamma_s));
    }
    if (!(amp_ratio >= 0.0) || !(background >= 0.0)) {
        throw InvalidArgument("amp_ratio and background must be non-negative");
    }
}

void DecayHistogram::validate() const {
    if (bin_edges_ns.size() != counts.size() + 1 || counts.empty()) {
        throw InvalidArgument("histogram needs one more edge than bins");
    }
    for (std::size_t i = 1; i < bin_edges_ns.size(); ++i) {
        if (!(bin_edges_ns[i] > bin_edges_ns[i - 1])) throw InvalidArgument("bin edges must increase");
    }
    double sum = 0.0;
    for (double c : counts) {
        if (!(c >= 0.0)) throw InvalidArgument("histogram counts must be non-negative");
        sum += c;
    }
    if (std::abs(sum - total_counts) > 1e-9 * std::max(1.0, sum)) {
        throw InvalidArgument("histogram total does not match its bins");
    }
}

namespace {

// Integral of exp(-g t) over [a, b].
double bin_integral(double g, double a, double b) {
    if (g == 0.0) return b - a;
    return std::exp(-g * a) * -std::expm1(-g * (b - a)) / g;
}

std::vector<double> gaussian_blur(const std::vector<double>& x, double sigma_bins) {
    const int half = static_cast<int>(std::ceil(6.0 * sigma_bins));
    std::vector<double> kernel(static_cast<std::size_t>(2 * half + 1));
    double norm = 0.0;
    for (int j = -half; j <= half; ++j) {
        const double v = std::exp(-0.5 * (j / sigma_bins) * (j / sigma_bins));
        kernel[static_cast<std::size_t>(j + half)] = v;
        norm += v;
    }
    for (auto& v : kernel) v /= norm;
    const int n = static_cast<int>(x.size());
    std::vector<double> out(x.size(), 0.0);
    for (int i = 0; i < n; ++i) {
        for (int j = -half; j <= half; ++j) {
            const int src = i - j;
            if (src < 0 || src >= n) continue;
            out[static_cast<std::size_t>(i)] += kernel[static_cast<std::size_t>(j + half)] * x[static_cast<std::size_t>(src)];
        }
    }
    return out;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double poisson_draw(std::mt19937_64& rng, double mean) {
    if (!(mean > 0.0)) return 0.0;
    std::poisson_distribution<long long> dist(mean);
    return static_cast<double>(dist(rng));
}

}  // namespace

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index, std::uint64_t stream) {
    return splitmix64(splitmix64(splitmix64(seed) ^ index) ^ (stream + 0x632be59bd9b4e019ULL));
}

std::vector<double> expected_decay_counts(const ExcitonModel& model, std::span<const double> edges,
                                          double signal_counts, std::optional<double> irf_sigma_ns) {
    model.validate();
    if (edges.size() < 2) throw InvalidArgument("need at least one time bin");
    std::vector<double> mu(edges.size() - 1);
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
        mu[i] = bin_integral(model.gamma_f, edges[i], edges[i + 1]) +
                model.amp_ratio * bin_integral(model.gamma_s, edges[i], edges[i + 1]);
        sum += mu[i];
    }
    for (auto& m : mu) m *= signal_counts / sum;
    if (irf_sigma_ns && *irf_sigma_ns > 0.0) {
        const double width = edges[1] - edges[0];
        mu = gaussian_blur(mu, *irf_sigma_ns / width);
    }
    for (auto& m : mu) m += model.background;
    return mu;
}

DecayHistogram generate_decay_histogram(const ExcitonModel& model, double total_counts,
                                        const TimeBinning& binning, std::optional<double> irf_sigma_ns,
                                        std::uint64_t seed, bool noiseless) {
    if (!(total_counts > 0.0)) throw InvalidArgument("total_counts must be positive");
    DecayHistogram h;
    h.bin_edges_ns = binning.edges();
    h.irf_sigma_ns = irf_sigma_ns;
    h.seed = seed;
    h.noiseless = noiseless;
    h.counts = expected_decay_counts(model, h.bin_edges_ns, total_counts, irf_sigma_ns);
    if (!noiseless) {
        std::mt19937_64 rng(seed);
        for (auto& c : h.counts) c = poisson_draw(rng, c);
    }
    h.total_counts = 0.0;
    for (double c : h.counts) h.total_counts += c;
    return h;
}

std::vector<SweepRecord> generate_sweep(const emission::EmitterScene& scene,
                                        const modesolver::ModeWeights& weights, double r_T_mag,
                                        const PhaseCalibration& cal, std::span<const double> voltages,
                                        const SweepSettings& settings, std::uint64_t seed) {
    scene.validate();
    cal.validate();
    // Surface input errors here rather than inside a worker.
    for (double v : voltages) phase_of_voltage(cal, v);
    emission::intensity(scene, weights, r_T_mag, 0.0, emission::Dipole::AveragedBoth);
    if (!(settings.histogram_counts > 0.0)) throw InvalidArgument("histogram_counts must be positive");
    settings.binning.edges();

    std::vector<SweepRecord> out(voltages.size());
    auto fill = [&](std::size_t i) {
        SweepRecord& rec = out[i];
        rec.voltage = voltages[i];
        rec.phi = phase_of_voltage(cal, rec.voltage);
        const double rel = emission::intensity(scene, weights, r_T_mag, rec.phi, emission::Dipole::AveragedBoth);
        rec.intensity_expected = settings.counts_scale * rel;
        if (settings.noiseless) {
            rec.intensity_counts = rec.intensity_expected;
        } else {
            std::mt19937_64 rng(stream_seed(seed, i, 0));
            rec.intensity_counts = poisson_draw(rng, rec.intensity_expected);
        }
        rec.gamma_rad = emission::decay_rate(scene, r_T_mag, rec.phi, emission::Dipole::AveragedBoth);
        ExcitonModel ex;
        ex.gamma_s = scene.gamma_nrad;
        ex.gamma_f = rec.gamma_rad + scene.gamma_nrad;
        ex.amp_ratio = settings.amp_ratio;
        ex.background = settings.background;
        rec.histogram = generate_decay_histogram(ex, settings.histogram_counts, settings.binning,
                                                 settings.irf_sigma_ns, stream_seed(seed, i, 1),
                                                 settings.noiseless);
    };

    const unsigned workers = std::max(1u, std::min<unsigned>(settings.threads, static_cast<unsigned>(out.size())));
    if (workers <= 1) {
        for (std::size_t i = 0; i < out.size(); ++i) fill(i);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < out.size(); i = next++) fill(i);
        });
    }
    pool.clear();
    return out;
}

void write_sweep_csv(std::ostream& os, std::span<const SweepRecord> sweep) {
    os << "voltage,phi_rad,intensity_counts\n";
    for (const auto& r : sweep) os << fmt::format("{:.10g},{:.12g},{:.12g}\n", r.voltage, r.phi, r.intensity_counts);
}

void write_histogram_csv(std::ostream& os, const DecayHistogram& hist) {
    os << "t_ns,counts\n";
    for (std::size_t i = 0; i < hist.counts.size(); ++i) {
        os << fmt::format("{:.10g},{:.12g}\n", hist.bin_edges_ns[i], hist.counts[i]);
    }
}

}  // namespace phaselab::synthlab
