#include "phaselab/inference.hpp"

#include "phaselab/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace phaselab::inference {

using std::numbers::pi;

namespace {

struct Turn {
    std::size_t index;
    bool is_max;  // intensity maximum, i.e. psi at an even multiple of pi
};

// Extrema of the sampled fringe. Sign flips of the first difference that
// come in pairs within a few samples are noise wiggles and cancel.
std::vector<Turn> find_turns(std::span<const double> y) {
    const std::size_t n = y.size();
    std::vector<int> slope(n - 1, 0);
    int last = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double d = y[i + 1] - y[i];
        slope[i] = d > 0.0 ? 1 : (d < 0.0 ? -1 : last);
        if (slope[i] != 0) last = slope[i];
    }
    std::vector<std::size_t> flips;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (slope[i - 1] != 0 && slope[i] != 0 && slope[i - 1] != slope[i]) flips.push_back(i);
    }

    std::vector<Turn> turns;
    std::size_t k = 0;
    while (k < flips.size()) {
        std::size_t end = k + 1;
        while (end < flips.size() && flips[end] - flips[end - 1] <= 2) ++end;
        const std::size_t count = end - k;
        if (count % 2 == 1) {
            if (flips[end - 1] - flips[k] > 4) {
                throw BranchAmbiguity(fmt::format("turning point between samples {} and {} cannot be localised",
                                                  flips[k], flips[end - 1]));
            }
            const bool is_max = slope[flips[k] - 1] > 0;
            std::size_t best = flips[k];
            for (std::size_t j = flips[k]; j <= flips[end - 1]; ++j) {
                if (is_max ? y[j] > y[best] : y[j] < y[best]) best = j;
            }
            turns.push_back({best, is_max});
        }
        k = end;
    }
    return turns;
}

// Unwrapped psi = 2 phi + theta from normalised cosines, increasing in voltage.
std::vector<double> unwrap(std::span<const double> y, double i_max, double i_min, const std::vector<Turn>& turns) {
    const std::size_t n = y.size();
    std::vector<double> alpha(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double c = std::clamp((2.0 * y[i] - (i_max + i_min)) / (i_max - i_min), -1.0, 1.0);
        alpha[i] = std::acos(c);
    }
    // Branch m covers psi in [m pi, (m + 1) pi]; even branches have falling intensity.
    int m0;
    if (!turns.empty()) {
        m0 = turns.front().is_max ? 1 : 0;
    } else {
        m0 = y.back() <= y.front() ? 0 : 1;
    }
    auto on_branch = [&](std::size_t i, int m) {
        return m % 2 == 0 ? m * pi + alpha[i] : (m + 1) * pi - alpha[i];
    };

    std::vector<double> psi(n);
    std::size_t t = 0;
    int m = m0;
    for (std::size_t i = 0; i < n; ++i) {
        if (t < turns.size() && turns[t].index == i) {
            const double before = i > 0 ? on_branch(i - 1, m) : on_branch(i, m);
            const double after = i + 1 < n ? on_branch(i + 1, m + 1) : on_branch(i, m + 1);
            const double mid = 0.5 * (before + after);
            const double a = on_branch(i, m);
            const double b = on_branch(i, m + 1);
            psi[i] = std::abs(a - mid) <= std::abs(b - mid) ? a : b;
            ++m;
            ++t;
            continue;
        }
        psi[i] = on_branch(i, m);
    }
    return psi;
}

}  // namespace

PhaseMap reconstruct_phase_map(std::span<const double> voltages, std::span<const double> intensities) {
    const std::size_t n = voltages.size();
    if (intensities.size() != n) throw InvalidArgument("voltages and intensities differ in length");
    if (n < 6) throw InsufficientFringes("phase map needs at least 6 samples");
    for (std::size_t i = 1; i < n; ++i) {
        if (!(voltages[i] > voltages[i - 1])) throw InvalidArgument("voltages must be strictly increasing");
    }
    PhaseMap out;
    out.i_max = *std::max_element(intensities.begin(), intensities.end());
    out.i_min = *std::min_element(intensities.begin(), intensities.end());
    if (!(out.i_max > out.i_min)) throw InsufficientFringes("reference intensity is flat");

    const auto turns = find_turns(intensities);
    std::vector<double> psi = unwrap(intensities, out.i_max, out.i_min, turns);

    // Sampled extremes undershoot the true fringe; refit the normalisation on
    // cos(psi) and unwrap again.
    for (int iter = 0; iter < 8 && !turns.empty(); ++iter) {
        double s1 = 0, sc = 0, scc = 0, sy = 0, scy = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double c = std::cos(psi[i]);
            s1 += 1.0;
            sc += c;
            scc += c * c;
            sy += intensities[i];
            scy += c * intensities[i];
        }
        const double det = s1 * scc - sc * sc;
        if (!(det > 0.0)) break;
        const double q = (s1 * scy - sc * sy) / det;
        const double p = (sy - q * sc) / s1;
        const double hi = p + std::abs(q);
        const double lo = p - std::abs(q);
        if (!(hi > lo)) break;
        const bool settled = std::abs(hi - out.i_max) + std::abs(lo - out.i_min) < 1e-12 * (hi - lo);
        out.i_max = hi;
        out.i_min = lo;
        psi = unwrap(intensities, out.i_max, out.i_min, turns);
        if (settled) break;
    }

    out.fringes = (psi.back() - psi.front()) / (2.0 * pi);
    if (out.fringes < 0.95) {
        throw InsufficientFringes(fmt::format("reference sweep covers {:.2f} fringes", out.fringes));
    }
    if (out.fringes < 1.5) out.flags.emplace_back("below_1.5_fringes");
    if (turns.empty()) out.flags.emplace_back("two_fold_reflection");
    out.flags.emplace_back("gauge_sign_and_offset_free");
    for (const auto& t : turns) out.turning_points.push_back(t.index);

    std::vector<std::pair<double, double>> table(n);
    double running = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        running = std::max(running, 0.5 * (psi[i] - psi.front()));
        table[i] = {voltages[i], running};
    }
    out.calibration = synthlab::PhaseCalibration::from_table(std::move(table));
    return out;
}

}  // namespace phaselab::inference
