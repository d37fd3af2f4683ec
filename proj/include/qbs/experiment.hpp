#pragma once

// Experiment runner behind the qbs command-line tool: configuration parsing
// and validation, the four experiment modes, and CSV/JSON row emission.

#include <cstdint>
#include <istream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qbs/funcspace.hpp"
#include "qbs/kernel.hpp"
#include "qbs/operators.hpp"
#include "qbs/qcore.hpp"
#include "qbs/theory.hpp"

namespace qbs {

/// Malformed or refused experiment configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// --help was requested; what() holds the usage text.
class HelpRequested : public Error {
public:
    using Error::Error;
};

enum class Mode { identity, thm1, vor, rate };
enum class OutputFormat { csv, json };

inline std::string to_string(Mode m) {
    switch (m) {
        case Mode::identity: return "identity";
        case Mode::thm1: return "thm1";
        case Mode::vor: return "vor";
        case Mode::rate: return "rate";
    }
    return "?";
}

struct ExperimentConfig {
    Mode mode = Mode::identity;
    std::string function = "exp_neg";
    Real q;
    Real beta;
    Real r;
    Real R;
    std::vector<unsigned> n_list;
    std::size_t grid_M = 256;
    unsigned precision_bits = 256;
    CorrectionForm variant = CorrectionForm::as_theorem2;
    OutputFormat output = OutputFormat::csv;
    std::uint64_t seed = 0;
    /// Random interior spot-check points added in identity mode.
    std::size_t spot_points = 8;
    std::optional<std::string> out_path;
    /// Rate mode only: replace measured errors by [n]_q^slope.
    std::optional<Real> inject_slope;
};

struct ReportRow {
    unsigned n = 0;
    Real bracket_n;
    Real r;
    Real lhs;
    std::optional<Real> rhs;
    Real normalized_error;
    bool holds = false;
    bool precision_ok = false;

    bool operator==(const ReportRow&) const = default;
};

struct ExperimentResult {
    std::vector<ReportRow> rows;
    /// Present in rate mode.
    std::optional<RateReport> rate;

    [[nodiscard]] bool all_ok() const {
        return std::all_of(rows.begin(), rows.end(), [](const ReportRow& r) { return r.holds && r.precision_ok; });
    }
};

/// Decimal or "a/b" fraction at the current precision.
inline Real parse_real(const std::string& text) {
    auto parse_plain = [&](const std::string& part) {
        try {
            std::size_t used = 0;
            (void)std::stod(part, &used);
            if (used != part.size()) {
                throw std::invalid_argument(part);
            }
        } catch (const std::exception&) {
            throw ConfigError("not a number: '" + text + "'");
        }
        return Real(part);
    };
    const auto slash = text.find('/');
    if (slash == std::string::npos) {
        return parse_plain(text);
    }
    const Real den = parse_plain(text.substr(slash + 1));
    if (den == 0) {
        throw ConfigError("zero denominator in '" + text + "'");
    }
    return parse_plain(text.substr(0, slash)) / den;
}

namespace detail {

struct RawOptions {
    std::string mode;
    std::string function = "exp_neg";
    std::string q = "1";
    std::string beta = "1/2";
    std::string r = "0.6";
    std::string R = "3";
    std::vector<unsigned> n_list;
    std::size_t grid_M = 256;
    unsigned precision_bits = 256;
    std::string variant = "as_theorem2";
    std::string output = "csv";
    std::uint64_t seed = 0;
    std::size_t spot_points = 8;
    std::string out_path;
    std::string inject_slope;
};

inline void add_options(CLI::App& app, RawOptions& raw) {
    app.add_option("--mode", raw.mode, "identity | thm1 | vor | rate")->required();
    app.add_option("--function", raw.function, "exp_neg, sin, inv_shift:<c>, e_<m>, poly:<c0,c1,...>");
    app.add_option("--q", raw.q, "q >= 1 for theorem modes; decimals or a/b");
    app.add_option("--beta", raw.beta, "beta in (0, 2/3]");
    app.add_option("--r", raw.r, "circle radius");
    app.add_option("--R", raw.R, "analyticity radius of f");
    app.add_option("--n", raw.n_list, "comma-separated degrees")->delimiter(',');
    app.add_option("--grid-M", raw.grid_M, "points on the circle");
    app.add_option("--precision-bits", raw.precision_bits, "mantissa bits");
    app.add_option("--variant", raw.variant, "as_theorem2 | as_lq");
    app.add_option("--output", raw.output, "csv | json");
    app.add_option("--seed", raw.seed, "seed for spot-check points");
    app.add_option("--spot-points", raw.spot_points, "random interior points (identity mode)");
    app.add_option("--out", raw.out_path, "write rows to this file instead of stdout");
    app.add_option("--inject-slope", raw.inject_slope, "rate mode: synthetic errors [n]_q^slope");
}

/// Exponent e such that lhs * [n]_q^e is reported as normalized_error.
inline Real normalization_exponent(const ExperimentConfig& cfg) {
    const Real& b = cfg.beta;
    switch (cfg.mode) {
        case Mode::identity: return Real(0);
        case Mode::thm1: return std::min(b, Real(1 - b));
        case Mode::vor:
            switch (case_for_beta(b)) {
                case VorCase::i: return std::min(Real(2 * b), Real(1 - b));
                case VorCase::ii: return b;
                case VorCase::iii: return Real(1);
            }
            break;
        case Mode::rate: return -expected_rate_slope(case_for_beta(b), b);
    }
    return Real(0);
}

inline ExperimentConfig validate(const RawOptions& raw) {
    ExperimentConfig cfg;
    if (raw.mode == "identity") {
        cfg.mode = Mode::identity;
    } else if (raw.mode == "thm1") {
        cfg.mode = Mode::thm1;
    } else if (raw.mode == "vor") {
        cfg.mode = Mode::vor;
    } else if (raw.mode == "rate") {
        cfg.mode = Mode::rate;
    } else {
        throw ConfigError("unknown mode '" + raw.mode + "'");
    }
    if (raw.variant == "as_theorem2") {
        cfg.variant = CorrectionForm::as_theorem2;
    } else if (raw.variant == "as_lq") {
        cfg.variant = CorrectionForm::as_lq;
    } else {
        throw ConfigError("unknown variant '" + raw.variant + "'");
    }
    if (raw.output == "csv") {
        cfg.output = OutputFormat::csv;
    } else if (raw.output == "json") {
        cfg.output = OutputFormat::json;
    } else {
        throw ConfigError("unknown output format '" + raw.output + "'");
    }
    if (raw.precision_bits < min_mantissa_bits) {
        throw ConfigError("precision-bits must be at least 53");
    }
    if (raw.grid_M == 0) {
        throw ConfigError("grid-M must be positive");
    }
    cfg.function = raw.function;
    cfg.n_list = raw.n_list;
    cfg.grid_M = raw.grid_M;
    cfg.precision_bits = raw.precision_bits;
    cfg.seed = raw.seed;
    cfg.spot_points = raw.spot_points;
    if (!raw.out_path.empty()) {
        cfg.out_path = raw.out_path;
    }

    PrecisionScope scope(cfg.precision_bits);
    cfg.q = parse_real(raw.q);
    cfg.beta = parse_real(raw.beta);
    cfg.r = parse_real(raw.r);
    cfg.R = parse_real(raw.R);
    if (!raw.inject_slope.empty()) {
        if (cfg.mode != Mode::rate) {
            throw ConfigError("inject-slope applies to rate mode only");
        }
        cfg.inject_slope = parse_real(raw.inject_slope);
    }
    if (!(cfg.r > 0) || !(cfg.R > 0)) {
        throw ConfigError("r and R must be positive");
    }
    if (!(cfg.beta > 0) || cfg.beta > Real(2) / 3 + ldexp(Real(1), -60)) {
        throw ConfigError("beta must lie in (0, 2/3]");
    }
    if (!(cfg.q > 0)) {
        throw ConfigError("q must be positive");
    }

    FunctionSpec f;
    try {
        f = catalog::parse(cfg.function, cfg.R);
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }

    if (cfg.mode != Mode::identity) {
        if (!f.is_bounded()) {
            throw ConfigError("refused: " + f.name + " is unbounded on [0,∞)");
        }
        const TheoremCase tag = cfg.mode == Mode::thm1 ? TheoremCase::T1
                                : cfg.mode == Mode::vor ? voronovskaja_case(case_for_beta(cfg.beta))
                                                        : order_case(case_for_beta(cfg.beta));
        const TheoremContext hyp = make_theorem_context(tag, cfg.q, cfg.beta, cfg.r, f.radius);
        if (auto failure = hyp.first_failure()) {
            throw ConfigError("refused (" + to_string(tag) + "): " + *failure);
        }
        for (unsigned n : cfg.n_list) {
            if (n < hyp.n0) {
                throw ConfigError("refused (" + to_string(tag) + "): n = " + std::to_string(n) +
                                  " is below n0 = " + std::to_string(hyp.n0) + " (" + hyp.n0_binding + ")");
            }
        }
        if (cfg.mode == Mode::rate) {
            const VorCase c = case_for_beta(cfg.beta);
            if (f.degree && (c == VorCase::i ? *f.degree <= 1 : *f.degree == 0)) {
                throw ConfigError("refused: " + f.name + " is degenerate for the exact-order estimate");
            }
        }
    }
    if (cfg.n_list.empty()) {
        throw ConfigError("no n values given (--n)");
    }
    for (unsigned n : cfg.n_list) {
        if (n == 0) {
            throw ConfigError("n values must be positive");
        }
    }
    if (cfg.mode == Mode::rate && cfg.n_list.size() < 3) {
        throw ConfigError("rate mode needs at least 3 values of n");
    }
    return cfg;
}

template <class Parse>
ExperimentConfig parse_with(Parse&& parse) {
    CLI::App app{"q-Balazs-Szabados operator experiments", "qbs"};
    RawOptions raw;
    add_options(app, raw);
    app.set_config("--config", "", "key=value file with the same options");
    try {
        parse(app);
    } catch (const CLI::CallForHelp&) {
        throw HelpRequested(app.help());
    } catch (const CLI::ParseError& e) {
        throw ConfigError(e.what());
    }
    return validate(raw);
}

}  // namespace detail

inline ExperimentConfig parse_config(int argc, const char* const* argv) {
    return detail::parse_with([&](CLI::App& app) { app.parse(argc, argv); });
}

/// Arguments without the program name.
inline ExperimentConfig parse_config(const std::vector<std::string>& args) {
    std::vector<const char*> argv{"qbs"};
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    return parse_config(static_cast<int>(argv.size()), argv.data());
}

/// Config-file text: the same options as key=value lines.
inline ExperimentConfig parse_config_text(const std::string& text) {
    return detail::parse_with([&](CLI::App& app) {
        std::istringstream in(text);
        app.parse_from_stream(in);
    });
}

namespace detail {

/// Uniform points in the disk |z| < r from a fixed-width generator.
inline std::vector<Complex> spot_points(std::uint64_t seed, std::size_t count, const Real& r) {
    std::mt19937_64 gen(seed);
    auto unit = [&gen] { return static_cast<double>(gen() >> 11) * 0x1.0p-53; };
    std::vector<Complex> points;
    for (std::size_t j = 0; j < count; ++j) {
        const double radius = std::sqrt(unit());
        const double angle = 2 * M_PI * unit();
        points.emplace_back(r * Real(radius * std::cos(angle)), r * Real(radius * std::sin(angle)));
    }
    return points;
}

inline ReportRow identity_row(const FunctionSpec& f, const QParams& p, std::span<const Complex> points,
                              const Real& r, const NumericContext& ctx) {
    const auto direct = eval_R(f, p, points, ctx);
    const auto bridged = connection_transform(f, p, points, ctx);
    const auto fine = eval_R(f, p, points, ctx.doubled());
    ReportRow row;
    row.n = p.n();
    row.bracket_n = p.bracket_n();
    row.r = r;
    row.lhs = 0;
    row.precision_ok = true;
    for (std::size_t j = 0; j < points.size(); ++j) {
        const Real gap = abs(direct[j] - bridged[j]) / std::max(Real(1), Real(abs(direct[j])));
        row.lhs = std::max(row.lhs, gap);
        row.precision_ok = row.precision_ok && precision_agree(direct[j], fine[j], ctx);
    }
    row.rhs = ctx.agreement_tol;
    row.holds = row.lhs <= ctx.agreement_tol;
    return row;
}

}  // namespace detail

inline ExperimentResult run(const ExperimentConfig& cfg) {
    const NumericContext ctx = make_context(cfg.precision_bits);
    PrecisionScope scope(cfg.precision_bits);
    const FunctionSpec f = catalog::parse(cfg.function, cfg.R);
    const CircleGrid grid = circle_grid(cfg.r, cfg.grid_M);
    const Real exponent = detail::normalization_exponent(cfg);
    ExperimentResult result;

    auto finish = [&](ReportRow row) {
        row.normalized_error = row.lhs * pow(row.bracket_n, exponent);
        result.rows.push_back(std::move(row));
    };

    if (cfg.mode == Mode::rate) {
        const VorCase c = case_for_beta(cfg.beta);
        RateReport report;
        if (cfg.inject_slope) {
            std::vector<RatePoint> points;
            for (unsigned n : cfg.n_list) {
                const Real bracket = q_integer(n, cfg.q);
                points.push_back(RatePoint{n, bracket, pow(bracket, *cfg.inject_slope), true});
            }
            report = fit_rate(std::move(points), expected_rate_slope(c, cfg.beta));
        } else {
            report = estimate_rate(f, cfg.q, cfg.beta, grid, cfg.n_list, c, ctx);
        }
        const bool consistent = report.consistent();
        for (const auto& pt : report.errors) {
            ReportRow row;
            row.n = pt.n;
            row.bracket_n = pt.bracket_n;
            row.r = grid.radius;
            row.lhs = pt.error;
            row.holds = consistent;
            row.precision_ok = pt.precision_ok;
            finish(std::move(row));
        }
        result.rate = std::move(report);
        return result;
    }

    std::vector<Complex> points = grid.points;
    if (cfg.mode == Mode::identity) {
        const auto extra = detail::spot_points(cfg.seed, cfg.spot_points, cfg.r);
        points.insert(points.end(), extra.begin(), extra.end());
    }
    for (unsigned n : cfg.n_list) {
        const QParams p = QParams::make(cfg.q, cfg.beta, n);
        try {
            switch (cfg.mode) {
                case Mode::identity: finish(detail::identity_row(f, p, points, grid.radius, ctx)); break;
                case Mode::thm1: {
                    const BoundCheck check = check_thm1(f, p, grid, ctx);
                    finish(ReportRow{n, p.bracket_n(), grid.radius, check.lhs_sup, check.rhs, Real(0),
                                     check.holds, check.precision_ok});
                    break;
                }
                case Mode::vor: {
                    const ResidualCheck check =
                        check_vor(f, p, case_for_beta(cfg.beta), cfg.variant, grid, ctx);
                    finish(ReportRow{n, p.bracket_n(), grid.radius, check.sup_residual, check.rhs, Real(0),
                                     check.holds, check.precision_ok});
                    break;
                }
                case Mode::rate: break;
            }
        } catch (const Error& e) {
            throw Error("n = " + std::to_string(n) + ": " + e.what());
        }
    }
    return result;
}

inline const char* csv_header = "n,bracket_n,r,lhs,rhs,normalized_error,holds,precision_ok";

/// 25 significant digits in scientific notation.
inline std::string format_real(const Real& x) { return x.str(24, std::ios_base::scientific); }

inline std::string emit(const std::vector<ReportRow>& rows, OutputFormat format) {
    if (rows.empty()) {
        throw DomainError("emit: no rows");
    }
    if (format == OutputFormat::csv) {
        std::ostringstream os;
        os << csv_header << '\n';
        for (const auto& row : rows) {
            os << row.n << ',' << format_real(row.bracket_n) << ',' << format_real(row.r) << ','
               << format_real(row.lhs) << ',' << (row.rhs ? format_real(*row.rhs) : "") << ','
               << format_real(row.normalized_error) << ',' << (row.holds ? "true" : "false") << ','
               << (row.precision_ok ? "true" : "false") << '\n';
        }
        return os.str();
    }
    nlohmann::ordered_json array = nlohmann::ordered_json::array();
    for (const auto& row : rows) {
        nlohmann::ordered_json obj;
        obj["n"] = row.n;
        obj["bracket_n"] = format_real(row.bracket_n);
        obj["r"] = format_real(row.r);
        obj["lhs"] = format_real(row.lhs);
        obj["rhs"] = row.rhs ? nlohmann::ordered_json(format_real(*row.rhs)) : nlohmann::ordered_json(nullptr);
        obj["normalized_error"] = format_real(row.normalized_error);
        obj["holds"] = row.holds;
        obj["precision_ok"] = row.precision_ok;
        array.push_back(std::move(obj));
    }
    return array.dump(2) + "\n";
}

/// Reads rows back from emit() output at the current precision.
inline std::vector<ReportRow> parse_rows(const std::string& text, OutputFormat format) {
    std::vector<ReportRow> rows;
    auto flag = [](const std::string& s) {
        if (s != "true" && s != "false") {
            throw DomainError("bad boolean '" + s + "'");
        }
        return s == "true";
    };
    if (format == OutputFormat::csv) {
        std::istringstream in(text);
        std::string line;
        if (!std::getline(in, line) || line != csv_header) {
            throw DomainError("parse_rows: missing csv header");
        }
        while (std::getline(in, line)) {
            std::vector<std::string> cells;
            std::stringstream cs(line);
            std::string cell;
            while (std::getline(cs, cell, ',')) {
                cells.push_back(cell);
            }
            if (cells.size() != 8) {
                throw DomainError("parse_rows: expected 8 cells in '" + line + "'");
            }
            ReportRow row;
            row.n = static_cast<unsigned>(std::stoul(cells[0]));
            row.bracket_n = Real(cells[1]);
            row.r = Real(cells[2]);
            row.lhs = Real(cells[3]);
            if (!cells[4].empty()) {
                row.rhs = Real(cells[4]);
            }
            row.normalized_error = Real(cells[5]);
            row.holds = flag(cells[6]);
            row.precision_ok = flag(cells[7]);
            rows.push_back(std::move(row));
        }
        return rows;
    }
    const auto array = nlohmann::json::parse(text);
    for (const auto& obj : array) {
        ReportRow row;
        row.n = obj.at("n").get<unsigned>();
        row.bracket_n = Real(obj.at("bracket_n").get<std::string>());
        row.r = Real(obj.at("r").get<std::string>());
        row.lhs = Real(obj.at("lhs").get<std::string>());
        if (!obj.at("rhs").is_null()) {
            row.rhs = Real(obj.at("rhs").get<std::string>());
        }
        row.normalized_error = Real(obj.at("normalized_error").get<std::string>());
        row.holds = obj.at("holds").get<bool>();
        row.precision_ok = obj.at("precision_ok").get<bool>();
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace qbs
