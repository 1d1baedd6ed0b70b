#pragma once

#include "phaselab/emission.hpp"
#include "phaselab/modesolver.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace phaselab::synthlab {

// Voltage -> optical phase of the phase shifter.
struct PhaseCalibration {
    enum class Model { Table, Quadratic };

    Model model = Model::Quadratic;
    std::vector<std::pair<double, double>> table;  // (volts, rad), strictly increasing volts
    double quad_coeff = 0.0;                       // rad / V^2
    double phi0 = 0.0;                             // rad
    double v_min = 0.0;
    double v_max = 0.0;

    static PhaseCalibration from_table(std::vector<std::pair<double, double>> table);
    static PhaseCalibration quadratic(double coeff, double phi0, double v_min, double v_max);

    void validate() const;
};

double phase_of_voltage(const PhaseCalibration& cal, double volts);

struct TimeBinning {
    double t_max_ns = 25.0;
    double bin_ns = 0.05;

    std::vector<double> edges() const;
};

// Bright/dark exciton decay: A_f exp(-gamma_f t) + A_s exp(-gamma_s t) + background,
// with A_s / A_f = amp_ratio and background in counts per bin.
struct ExcitonModel {
    double gamma_f = 1.1;
    double gamma_s = 0.1;
    double amp_ratio = 0.05;
    double background = 0.0;

    void validate() const;
};

struct DecayHistogram {
    std::vector<double> bin_edges_ns;
    std::vector<double> counts;  // integer-valued unless noiseless
    double total_counts = 0.0;
    std::optional<double> irf_sigma_ns;
    std::uint64_t seed = 0;
    bool noiseless = false;

    std::size_t bins() const { return counts.size(); }
    void validate() const;
};

/// Expected counts per bin (exact bin integrals), with `signal_counts` in the
/// decay terms before any IRF blur and the background added per bin.
std::vector<double> expected_decay_counts(const ExcitonModel& model, std::span<const double> edges,
                                          double signal_counts, std::optional<double> irf_sigma_ns = {});

DecayHistogram generate_decay_histogram(const ExcitonModel& model, double total_counts,
                                        const TimeBinning& binning, std::optional<double> irf_sigma_ns,
                                        std::uint64_t seed, bool noiseless = false);

/// Independent seed for (seed, index, stream), so every sweep point owns its
/// random streams regardless of which thread generates it.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index, std::uint64_t stream);

struct SweepSettings {
    double counts_scale = 2.0e4;        // expected intensity counts at I/I0 = 1
    double histogram_counts = 1.0e5;
    TimeBinning binning;
    std::optional<double> irf_sigma_ns;
    double amp_ratio = 0.05;
    double background = 0.0;
    bool noiseless = false;
    unsigned threads = 1;
};

struct SweepRecord {
    double voltage = 0.0;
    double phi = 0.0;
    double intensity_expected = 0.0;
    double intensity_counts = 0.0;
    double gamma_rad = 0.0;  // Gamma(phi) that drives the fast component
    DecayHistogram histogram;
};

/// Voltage sweep of one emitter: averaged-dipole intensity with shot noise and
/// one decay histogram per point (gamma_f = Gamma(phi) + gamma_nrad,
/// gamma_s = gamma_nrad).
std::vector<SweepRecord> generate_sweep(const emission::EmitterScene& scene,
                                        const modesolver::ModeWeights& weights, double r_T_mag,
                                        const PhaseCalibration& cal, std::span<const double> voltages,
                                        const SweepSettings& settings, std::uint64_t seed);

void write_sweep_csv(std::ostream& os, std::span<const SweepRecord> sweep);
void write_histogram_csv(std::ostream& os, const DecayHistogram& hist);

}  // namespace phaselab::synthlab
