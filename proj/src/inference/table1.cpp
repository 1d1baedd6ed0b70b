#include "phaselab/inference.hpp"

#include "phaselab/errors.hpp"
#include "phaselab/io.hpp"

#include <fmt/format.h>

#include <array>
#include <cmath>

namespace phaselab::inference {

namespace {

constexpr std::array<std::string_view, 6> kHeader{"qd", "lambda_nm", "gamma_max", "gamma_min", "nu_gamma", "nu_I"};

// "0.27+-0.04", "0.27±0.04" or a bare value.
std::optional<Measured> parse_measured(std::string_view field, std::string_view source, std::size_t line) {
    for (std::string_view sep : {std::string_view("+-"), std::string_view("\xC2\xB1")}) {
        const auto pos = field.find(sep);
        if (pos != std::string_view::npos) {
            const double v = io::parse_number(field.substr(0, pos), source, line);
            const double e = io::parse_number(field.substr(pos + sep.size()), source, line);
            if (e < 0.0) throw MalformedRow(fmt::format("{}:{}: negative uncertainty", source, line));
            return Measured{v, e};
        }
    }
    return std::nullopt;
}

}  // namespace

std::vector<TableRow> read_table1(std::istream& is, double default_nu_I_sigma) {
    const auto table = io::read_csv(is, "table1", kHeader);
    std::vector<TableRow> rows;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& f = table.rows[r];
        const std::size_t line = table.line_numbers[r];
        auto measured = [&](std::size_t col, bool require_sigma) {
            if (auto m = parse_measured(f[col], table.source, line)) return *m;
            if (require_sigma) {
                throw MalformedRow(fmt::format("{}:{}: column '{}' needs value+-sigma", table.source, line, kHeader[col]));
            }
            return Measured{io::parse_number(f[col], table.source, line), -1.0};
        };
        TableRow row;
        row.qd = f[0];
        if (row.qd.empty()) throw MalformedRow(fmt::format("{}:{}: empty qd label", table.source, line));
        row.lambda_nm = io::parse_number(f[1], table.source, line);
        row.gamma_max = measured(2, true);
        row.gamma_min = measured(3, true);
        row.nu_gamma = measured(4, true);
        row.nu_I = measured(5, false);
        row.nu_I_sigma_given = row.nu_I.sigma >= 0.0;
        if (!row.nu_I_sigma_given) row.nu_I.sigma = default_nu_I_sigma;
        for (double v : {row.nu_gamma.value, row.nu_I.value}) {
            if (!(v >= 0.0 && v <= 1.0)) throw MalformedRow(fmt::format("{}:{}: visibility outside [0, 1]", table.source, line));
        }
        if (!(row.gamma_max.value >= row.gamma_min.value) || !(row.gamma_min.value >= 0.0)) {
            throw MalformedRow(fmt::format("{}:{}: need gamma_max >= gamma_min >= 0", table.source, line));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<TableReportRow> table1_report(const std::vector<TableRow>& rows, const modesolver::ModeProfile& profile,
                                          const EstimateOptions& opts) {
    std::vector<TableReportRow> out;
    out.reserve(rows.size());
    for (const auto& row : rows) {
        TableReportRow rep;
        rep.row = row;
        rep.contrast = contrast(row.gamma_max.value, row.gamma_max.sigma, row.gamma_min.value, row.gamma_min.sigma);
        rep.contrast_minus_tabulated = rep.contrast.value - row.nu_gamma.value;
        rep.within_1sigma = std::abs(rep.contrast_minus_tabulated) <= row.nu_gamma.sigma;
        rep.r_T_bound = r_T_lower_bound(row.nu_I.value);
        try {
            rep.estimate = estimate_parameters(row.nu_I, row.nu_gamma, profile, opts);
        } catch (const EmptyFeasibleSet& e) {
            rep.note = e.what();
        }
        out.push_back(std::move(rep));
    }
    return out;
}

}  // namespace phaselab::inference
