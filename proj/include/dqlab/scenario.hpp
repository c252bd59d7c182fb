#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dqlab/analysis.hpp"
#include "dqlab/errors.hpp"
#include "dqlab/io.hpp"
#include "dqlab/kernel.hpp"
#include "dqlab/noise.hpp"
#include "dqlab/optimize.hpp"
#include "dqlab/probe.hpp"
#include "dqlab/spectral.hpp"
#include "dqlab/time_grid.hpp"
#include "dqlab/waveforms.hpp"

namespace dqlab {

inline constexpr const char* artifact_version = "0.1.0";

namespace scenario_detail {

using nlohmann::json;

[[noreturn]] inline void fail(const std::string& path, const std::string& what) {
    throw validation_error("scenario: " + path + ": " + what);
}

inline void require_keys(const json& obj, std::initializer_list<const char*> allowed,
                         const std::string& path) {
    if (!obj.is_object()) fail(path, "expected an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                known = true;
                break;
            }
        if (!known) fail(path, "unknown key '" + it.key() + "'");
    }
}

inline const json& require_field(const json& obj, const char* key, const std::string& path) {
    auto it = obj.find(key);
    if (it == obj.end()) fail(path, "missing required key '" + std::string(key) + "'");
    return *it;
}

inline double require_number(const json& obj, const char* key, const std::string& path) {
    const json& v = require_field(obj, key, path);
    if (!v.is_number()) fail(path + "." + key, "expected a number");
    return v.get<double>();
}

inline double optional_number(const json& obj, const char* key, double fallback,
                              const std::string& path) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    if (!it->is_number()) fail(path + "." + key, "expected a number");
    return it->get<double>();
}

inline int require_int(const json& obj, const char* key, const std::string& path) {
    const json& v = require_field(obj, key, path);
    if (!v.is_number_integer()) fail(path + "." + key, "expected an integer");
    return v.get<int>();
}

inline std::string require_string(const json& obj, const char* key, const std::string& path) {
    const json& v = require_field(obj, key, path);
    if (!v.is_string()) fail(path + "." + key, "expected a string");
    return v.get<std::string>();
}

inline std::vector<std::vector<double>> parse_csv_numbers(const std::string& text,
                                                          const std::string& origin) {
    std::vector<std::vector<double>> rows;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        std::string_view line(text.data() + pos, eol - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        pos = eol + 1;
        if (line.empty()) continue;
        std::vector<double> row;
        std::size_t start = 0;
        while (start <= line.size()) {
            std::size_t comma = line.find(',', start);
            if (comma == std::string_view::npos) comma = line.size();
            std::string_view cell = line.substr(start, comma - start);
            double value = 0.0;
            const auto res =
                std::from_chars(cell.data(), cell.data() + cell.size(), value);
            if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
                throw validation_error("scenario: " + origin + ": cannot parse '" +
                                       std::string(cell) + "' as a number");
            row.push_back(value);
            if (comma == line.size()) break;
            start = comma + 1;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

/// Named time-series forms the scenario schema supports.
struct SeriesSpec {
    std::string kind;
    double t0 = 0.0, sigma = 0.0, amplitude = 0.0, omega0 = 0.0, phase = 0.0;
    double width = 0.0, value = 0.0;
    std::vector<double> inline_values;
    std::string csv_path;
    int csv_column = 0;

    static SeriesSpec parse(const json& j, const std::string& path) {
        SeriesSpec s;
        if (!j.is_object()) fail(path, "expected an object describing a time series");
        s.kind = require_string(j, "kind", path);
        if (s.kind == "gaussian") {
            require_keys(j, {"kind", "t0", "sigma", "amplitude"}, path);
            s.t0 = require_number(j, "t0", path);
            s.sigma = require_number(j, "sigma", path);
            s.amplitude = require_number(j, "amplitude", path);
            if (!(s.sigma > 0.0)) fail(path + ".sigma", "must be positive");
        } else if (s.kind == "sine_gaussian") {
            require_keys(j, {"kind", "t0", "sigma", "omega0", "phase", "amplitude"}, path);
            s.t0 = require_number(j, "t0", path);
            s.sigma = require_number(j, "sigma", path);
            s.omega0 = require_number(j, "omega0", path);
            s.phase = optional_number(j, "phase", 0.0, path);
            s.amplitude = require_number(j, "amplitude", path);
            if (!(s.sigma > 0.0)) fail(path + ".sigma", "must be positive");
        } else if (s.kind == "raised_cosine") {
            require_keys(j, {"kind", "t0", "width", "amplitude"}, path);
            s.t0 = require_number(j, "t0", path);
            s.width = require_number(j, "width", path);
            s.amplitude = require_number(j, "amplitude", path);
            if (!(s.width > 0.0)) fail(path + ".width", "must be positive");
        } else if (s.kind == "constant") {
            require_keys(j, {"kind", "value"}, path);
            s.value = require_number(j, "value", path);
        } else if (s.kind == "inline") {
            require_keys(j, {"kind", "values"}, path);
            const json& v = require_field(j, "values", path);
            if (!v.is_array()) fail(path + ".values", "expected an array");
            for (const auto& x : v) {
                if (!x.is_number()) fail(path + ".values", "expected numbers");
                s.inline_values.push_back(x.get<double>());
            }
        } else if (s.kind == "csv") {
            require_keys(j, {"kind", "path", "column"}, path);
            s.csv_path = require_string(j, "path", path);
            s.csv_column = j.contains("column") ? require_int(j, "column", path) : 0;
            if (s.csv_column < 0) fail(path + ".column", "must be nonnegative");
        } else {
            fail(path + ".kind", "unknown time-series kind '" + s.kind + "'");
        }
        return s;
    }

    TimeSeries build(const TimeGrid& grid, const std::filesystem::path& base_dir,
                     const std::string& path) const {
        if (kind == "gaussian")
            return waveforms::sampled(waveforms::Gaussian{t0, sigma, amplitude}, grid);
        if (kind == "sine_gaussian")
            return waveforms::sampled(
                waveforms::SineGaussian{t0, sigma, omega0, phase, amplitude}, grid);
        if (kind == "raised_cosine")
            return waveforms::sampled(waveforms::RaisedCosine{t0, width, amplitude}, grid);
        if (kind == "constant") return TimeSeries::constant(grid, value);
        if (kind == "inline") {
            if (static_cast<int>(inline_values.size()) != grid.size())
                fail(path, "inline series has " + std::to_string(inline_values.size()) +
                               " samples, grid has " + std::to_string(grid.size()));
            Eigen::VectorXd v(grid.size());
            for (int i = 0; i < grid.size(); ++i) v[i] = inline_values[i];
            return TimeSeries(grid, std::move(v));
        }
        if (kind == "csv") {
            const auto rows =
                parse_csv_numbers(read_file(base_dir / csv_path), csv_path);
            if (static_cast<int>(rows.size()) != grid.size())
                fail(path, "csv series has " + std::to_string(rows.size()) +
                               " rows, grid has " + std::to_string(grid.size()));
            Eigen::VectorXd v(grid.size());
            for (int i = 0; i < grid.size(); ++i) {
                if (csv_column >= static_cast<int>(rows[i].size()))
                    fail(path, "csv column " + std::to_string(csv_column) +
                                   " missing on row " + std::to_string(i));
                v[i] = rows[i][csv_column];
            }
            return TimeSeries(grid, std::move(v));
        }
        fail(path, "unknown time-series kind");
    }
};

/// Named one-sided spectra for stationary meter noise.
struct SpectrumSpec {
    std::string kind = "zero";
    double level = 0.0;   // white
    double sigma2 = 0.0;  // lorentzian strength
    double lambda = 1.0;  // lorentzian width

    static SpectrumSpec parse(const json& j, const std::string& path) {
        SpectrumSpec s;
        if (!j.is_object()) fail(path, "expected an object describing a spectrum");
        s.kind = require_string(j, "kind", path);
        if (s.kind == "white") {
            require_keys(j, {"kind", "level"}, path);
            s.level = require_number(j, "level", path);
        } else if (s.kind == "lorentzian") {
            require_keys(j, {"kind", "sigma2", "lambda"}, path);
            s.sigma2 = require_number(j, "sigma2", path);
            s.lambda = require_number(j, "lambda", path);
            if (!(s.lambda > 0.0)) fail(path + ".lambda", "must be positive");
        } else {
            fail(path + ".kind", "unknown spectrum kind '" + s.kind + "'");
        }
        return s;
    }

    double operator()(double omega) const {
        if (kind == "white") return level;
        if (kind == "lorentzian")
            return 2.0 * lambda * sigma2 / (lambda * lambda + omega * omega);
        return 0.0;
    }

    SpectralDensity build(const TimeGrid& grid) const {
        return sample_spectrum(grid, *this);
    }
};

} // namespace scenario_detail

/// Meter noise as declared by a scenario: either delta-correlated profiles
/// or stationary spectra (kept in analytic form for the closed-form routes).
struct ScenarioMeterNoise {
    enum class Kind { memoryless, stationary };
    Kind kind = Kind::memoryless;
    std::optional<MemorylessNoise> memoryless;
    scenario_detail::SpectrumSpec sxx_spectrum;
    scenario_detail::SpectrumSpec sff_spectrum;
    scenario_detail::SpectrumSpec sxf_spectrum;
};

struct ScenarioStationaryOptimize {
    double omega = 0.0;
    std::vector<double> budgets;
};

/// Fully validated scenario: every component is built eagerly at load time
/// so that an invalid file never produces partial results.
struct Scenario {
    TimeGrid grid{0.0, 1.0, 8};
    double hbar = default_hbar;
    std::uint64_t seed = 1;
    int verify_trials = 200;
    std::string output_dir = "out";
    std::vector<std::string> tasks;

    std::optional<ProbeModel> probe;
    std::optional<TwoTimeKernel> rigidity; // built kernel; zero when absent
    std::optional<ScenarioMeterNoise> meter_noise;
    std::optional<TwoTimeKernel> thermal;
    std::optional<TimeSeries> signal;
    std::optional<TimeSeries> filter;
    std::optional<QuadratureSpec> quadrature;
    std::optional<ScenarioStationaryOptimize> stationary_optimize_config;

    std::vector<std::string> warnings;
    std::string raw_text;
    std::filesystem::path base_dir;

    TwoTimeKernel rigidity_or_zero() const {
        return rigidity ? *rigidity : TwoTimeKernel::zero(grid);
    }
};

namespace scenario_detail {

inline const std::vector<std::string>& known_tasks() {
    static const std::vector<std::string> tasks = {
        "sum_covariance",     "commutators",        "psd_check",
        "snr",                "sql_dql_curves",     "stationary_spectrum",
        "memoryless_optimize", "stationary_optimize", "quadrature_bounds"};
    return tasks;
}

inline void validate_task_requirements(const Scenario& sc) {
    const auto need = [&](bool present, const std::string& task, const char* what) {
        if (!present)
            fail("tasks", "task '" + task + "' requires " + std::string(what));
    };
    for (const auto& task : sc.tasks) {
        if (std::find(known_tasks().begin(), known_tasks().end(), task) ==
            known_tasks().end())
            fail("tasks", "unknown task '" + task + "'");
        const bool memoryless =
            sc.meter_noise &&
            sc.meter_noise->kind == ScenarioMeterNoise::Kind::memoryless;
        const bool stationary =
            sc.meter_noise &&
            sc.meter_noise->kind == ScenarioMeterNoise::Kind::stationary;
        const bool analytic_probe =
            sc.probe && sc.probe->kind != ProbeModel::Kind::custom;
        if (task == "sum_covariance") {
            need(sc.meter_noise.has_value(), task, "'meter_noise'");
            need(sc.probe.has_value(), task, "'probe'");
        } else if (task == "commutators") {
            need(sc.probe.has_value(), task, "'probe'");
        } else if (task == "psd_check") {
            need(sc.meter_noise.has_value(), task, "'meter_noise'");
        } else if (task == "snr") {
            need(sc.meter_noise.has_value(), task, "'meter_noise'");
            need(sc.probe.has_value(), task, "'probe'");
            need(sc.signal.has_value(), task, "'signal'");
            need(sc.filter.has_value(), task, "'filter'");
        } else if (task == "sql_dql_curves") {
            need(analytic_probe, task, "a 'probe' of kind free_mass or damped_oscillator");
        } else if (task == "stationary_spectrum") {
            need(stationary, task, "stationary 'meter_noise'");
            need(analytic_probe, task, "a 'probe' of kind free_mass or damped_oscillator");
            need(!sc.rigidity.has_value(), task, "'rigidity' to be absent (stationary route)");
        } else if (task == "memoryless_optimize") {
            need(memoryless, task, "memoryless 'meter_noise'");
            need(sc.probe.has_value(), task, "'probe'");
            need(sc.filter.has_value(), task, "'filter'");
        } else if (task == "stationary_optimize") {
            need(analytic_probe, task, "a 'probe' of kind free_mass or damped_oscillator");
            need(sc.stationary_optimize_config.has_value(), task,
                 "a 'stationary_optimize' section");
            need(!sc.rigidity.has_value(), task, "'rigidity' to be absent (stationary route)");
        } else if (task == "quadrature_bounds") {
            need(sc.quadrature.has_value(), task, "a 'quadrature' section");
        }
    }
}

} // namespace scenario_detail

/// Parse and fully validate a scenario document. All referenced files are
/// loaded and all components constructed; errors carry the offending key
/// path.
inline Scenario load_scenario_text(const std::string& text,
                                   const std::filesystem::path& base_dir) {
    using scenario_detail::fail;
    using scenario_detail::require_field;
    using scenario_detail::require_int;
    using scenario_detail::require_keys;
    using scenario_detail::require_number;
    using scenario_detail::require_string;
    using scenario_detail::SeriesSpec;
    using scenario_detail::SpectrumSpec;
    namespace sd = scenario_detail;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw validation_error(std::string("scenario: JSON parse error: ") + e.what());
    }

    Scenario sc;
    sc.raw_text = text;
    sc.base_dir = base_dir;

    require_keys(j,
                 {"grid", "hbar", "seed", "verify_trials", "output_dir", "probe",
                  "rigidity", "meter_noise", "thermal", "signal", "filter", "quadrature",
                  "stationary_optimize", "tasks"},
                 "$");

    {
        const nlohmann::json& g = require_field(j, "grid", "$");
        require_keys(g, {"t_start", "t_end", "n"}, "grid");
        sc.grid = TimeGrid(require_number(g, "t_start", "grid"),
                           require_number(g, "t_end", "grid"), require_int(g, "n", "grid"));
    }
    sc.hbar = sd::optional_number(j, "hbar", default_hbar, "$");
    if (!(sc.hbar > 0.0)) fail("hbar", "must be positive");
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer())
            fail("seed", "expected an integer");
        sc.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("verify_trials")) {
        sc.verify_trials = require_int(j, "verify_trials", "$");
        if (sc.verify_trials < 0) fail("verify_trials", "must be nonnegative");
    }
    if (j.contains("output_dir")) sc.output_dir = require_string(j, "output_dir", "$");

    if (j.contains("probe")) {
        const nlohmann::json& p = j["probe"];
        const std::string kind = require_string(p, "kind", "probe");
        if (kind == "free_mass") {
            require_keys(p, {"kind", "mass"}, "probe");
            sc.probe = ProbeModel::free_mass(require_number(p, "mass", "probe"));
        } else if (kind == "damped_oscillator") {
            require_keys(p, {"kind", "mass", "omega0", "gamma"}, "probe");
            sc.probe = ProbeModel::damped_oscillator(require_number(p, "mass", "probe"),
                                                     require_number(p, "omega0", "probe"),
                                                     require_number(p, "gamma", "probe"));
        } else if (kind == "custom") {
            require_keys(p, {"kind", "kernel_csv"}, "probe");
            const std::string file = require_string(p, "kernel_csv", "probe");
            const auto rows = sd::parse_csv_numbers(read_file(base_dir / file), file);
            const int n = sc.grid.size();
            if (static_cast<int>(rows.size()) != n)
                fail("probe.kernel_csv", "expected " + std::to_string(n) + " rows");
            Eigen::MatrixXd m(n, n);
            for (int r = 0; r < n; ++r) {
                if (static_cast<int>(rows[r].size()) != n)
                    fail("probe.kernel_csv", "expected " + std::to_string(n) +
                                                 " columns on row " + std::to_string(r));
                for (int c = 0; c < n; ++c) m(r, c) = rows[r][c];
            }
            sc.probe = ProbeModel::custom_kernel(TwoTimeKernel(sc.grid, std::move(m)));
        } else {
            fail("probe.kind", "unknown probe kind '" + kind + "'");
        }
    }

    if (j.contains("rigidity")) {
        const nlohmann::json& r = j["rigidity"];
        const std::string kind = require_string(r, "kind", "rigidity");
        if (kind == "none") {
            require_keys(r, {"kind"}, "rigidity");
        } else if (kind == "instantaneous") {
            require_keys(r, {"kind", "profile"}, "rigidity");
            const SeriesSpec profile =
                SeriesSpec::parse(require_field(r, "profile", "rigidity"), "rigidity.profile");
            sc.rigidity =
                rigidity_kernel(profile.build(sc.grid, base_dir, "rigidity.profile"));
        } else {
            fail("rigidity.kind", "unknown rigidity kind '" + kind + "'");
        }
    }

    if (j.contains("meter_noise")) {
        const nlohmann::json& mn = j["meter_noise"];
        const std::string kind = require_string(mn, "kind", "meter_noise");
        ScenarioMeterNoise noise;
        if (kind == "memoryless") {
            require_keys(mn, {"kind", "sxx", "sff", "sxf"}, "meter_noise");
            noise.kind = ScenarioMeterNoise::Kind::memoryless;
            const TimeSeries sxx =
                SeriesSpec::parse(require_field(mn, "sxx", "meter_noise"), "meter_noise.sxx")
                    .build(sc.grid, base_dir, "meter_noise.sxx");
            const TimeSeries sff =
                SeriesSpec::parse(require_field(mn, "sff", "meter_noise"), "meter_noise.sff")
                    .build(sc.grid, base_dir, "meter_noise.sff");
            TimeSeries sxf = TimeSeries::zero(sc.grid);
            if (mn.contains("sxf"))
                sxf = SeriesSpec::parse(mn["sxf"], "meter_noise.sxf")
                          .build(sc.grid, base_dir, "meter_noise.sxf");
            noise.memoryless = MemorylessNoise(sxx, sff, sxf);
        } else if (kind == "stationary") {
            require_keys(mn, {"kind", "sxx", "sff", "sxf"}, "meter_noise");
            noise.kind = ScenarioMeterNoise::Kind::stationary;
            noise.sxx_spectrum =
                SpectrumSpec::parse(require_field(mn, "sxx", "meter_noise"), "meter_noise.sxx");
            noise.sff_spectrum =
                SpectrumSpec::parse(require_field(mn, "sff", "meter_noise"), "meter_noise.sff");
            if (mn.contains("sxf"))
                noise.sxf_spectrum = SpectrumSpec::parse(mn["sxf"], "meter_noise.sxf");
        } else {
            fail("meter_noise.kind", "unknown meter noise kind '" + kind + "'");
        }
        sc.meter_noise = std::move(noise);
    }

    if (j.contains("thermal")) {
        const nlohmann::json& th = j["thermal"];
        const std::string kind = require_string(th, "kind", "thermal");
        if (kind == "none") {
            require_keys(th, {"kind"}, "thermal");
        } else if (kind == "white") {
            require_keys(th, {"kind", "level"}, "thermal");
            const double level = require_number(th, "level", "thermal");
            if (level < 0.0) fail("thermal.level", "must be nonnegative");
            sc.thermal = thermal_covariance_white(level, sc.grid);
        } else {
            fail("thermal.kind", "unknown thermal kind '" + kind + "'");
        }
    }

    if (j.contains("signal")) {
        sc.signal = SeriesSpec::parse(j["signal"], "signal").build(sc.grid, base_dir, "signal");
        if (auto w = window_support_warning(*sc.signal, "signal")) sc.warnings.push_back(*w);
    }
    if (j.contains("filter")) {
        sc.filter = SeriesSpec::parse(j["filter"], "filter").build(sc.grid, base_dir, "filter");
        if (auto w = window_support_warning(*sc.filter, "filter")) sc.warnings.push_back(*w);
    }

    if (j.contains("quadrature")) {
        const nlohmann::json& q = j["quadrature"];
        require_keys(q, {"omega0", "friction", "envelope_cos", "envelope_sin"}, "quadrature");
        const TimeSeries env_c =
            SeriesSpec::parse(require_field(q, "envelope_cos", "quadrature"),
                              "quadrature.envelope_cos")
                .build(sc.grid, base_dir, "quadrature.envelope_cos");
        const TimeSeries env_s =
            SeriesSpec::parse(require_field(q, "envelope_sin", "quadrature"),
                              "quadrature.envelope_sin")
                .build(sc.grid, base_dir, "quadrature.envelope_sin");
        sc.quadrature = QuadratureSpec(require_number(q, "omega0", "quadrature"), env_c,
                                       env_s, require_number(q, "friction", "quadrature"));
        for (auto& w : sc.quadrature->warnings()) sc.warnings.push_back(w);
    }

    if (j.contains("stationary_optimize")) {
        const nlohmann::json& so = j["stationary_optimize"];
        require_keys(so, {"omega", "budgets"}, "stationary_optimize");
        ScenarioStationaryOptimize cfg;
        cfg.omega = require_number(so, "omega", "stationary_optimize");
        const nlohmann::json& budgets = require_field(so, "budgets", "stationary_optimize");
        if (!budgets.is_array() || budgets.empty())
            fail("stationary_optimize.budgets", "expected a non-empty array");
        for (const auto& b : budgets) {
            if (!b.is_number()) fail("stationary_optimize.budgets", "expected numbers");
            const double v = b.get<double>();
            if (!(v > 0.0)) fail("stationary_optimize.budgets", "budgets must be positive");
            cfg.budgets.push_back(v);
        }
        sc.stationary_optimize_config = std::move(cfg);
    }

    {
        const nlohmann::json& t = require_field(j, "tasks", "$");
        if (!t.is_array()) fail("tasks", "expected an array");
        for (const auto& task : t) {
            if (!task.is_string()) fail("tasks", "expected task names");
            sc.tasks.push_back(task.get<std::string>());
        }
    }

    scenario_detail::validate_task_requirements(sc);
    return sc;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
    return load_scenario_text(read_file(path), path.has_parent_path()
                                                   ? path.parent_path()
                                                   : std::filesystem::path("."));
}

struct ResultBundle {
    std::filesystem::path directory;
    std::vector<std::string> files; // data files, in task order; excludes manifest
    std::filesystem::path manifest_path;
};

namespace scenario_detail {

inline NoiseCovariances build_covariances(const Scenario& sc) {
    const ScenarioMeterNoise& mn = *sc.meter_noise;
    if (mn.kind == ScenarioMeterNoise::Kind::memoryless) {
        NoiseCovariances cov = memoryless_covariances(*mn.memoryless);
        if (sc.rigidity)
            return NoiseCovariances(cov.bxx, cov.bff, cov.bxf, *sc.rigidity);
        return cov;
    }
    const SpectralDensity sxx = mn.sxx_spectrum.build(sc.grid);
    const SpectralDensity sff = mn.sff_spectrum.build(sc.grid);
    const SpectralDensity sxf = mn.sxf_spectrum.build(sc.grid);
    NoiseCovariances cov = stationary_covariances(sxx, sff, sxf, sc.grid);
    if (sc.rigidity) return NoiseCovariances(cov.bxx, cov.bff, cov.bxf, *sc.rigidity);
    return cov;
}

inline TwoTimeKernel scenario_chiK_kernel(const Scenario& sc) {
    const TwoTimeKernel chi_inv = sc.probe->response_kernel(sc.grid);
    return sc.rigidity ? modified_response(chi_inv, *sc.rigidity) : chi_inv;
}

inline std::string matrix_csv(const TimeGrid& grid, const Eigen::MatrixXd& m,
                              const std::string& value_prefix) {
    std::vector<std::string> header{"t"};
    for (int c = 0; c < m.cols(); ++c)
        header.push_back(value_prefix + std::to_string(c));
    CsvWriter csv(std::move(header));
    for (int r = 0; r < m.rows(); ++r) {
        std::vector<double> row;
        row.reserve(m.cols() + 1);
        row.push_back(grid.t(r));
        for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        csv.add_row(row);
    }
    return csv.str();
}

} // namespace scenario_detail

/// Execute the scenario's tasks in declared order, writing one result file
/// per task plus a manifest. Two runs of the same scenario on the same build
/// produce byte-identical data files; manifest timing fields are exempt.
inline ResultBundle run_scenario(const Scenario& sc,
                                 const std::optional<std::string>& out_override = {}) {
    namespace fs = std::filesystem;
    using nlohmann::json;
    namespace sd = scenario_detail;

    const fs::path out_dir = out_override ? fs::path(*out_override)
                                          : sc.base_dir / sc.output_dir;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw io_error("cannot create output directory " + out_dir.string());

    ResultBundle bundle;
    bundle.directory = out_dir;
    bundle.manifest_path = out_dir / "manifest.json";

    json manifest;
    manifest["artifact"] = "dqlab";
    manifest["version"] = artifact_version;
    manifest["scenario_hash"] = fnv1a_hex(sc.raw_text);
    manifest["hbar"] = sc.hbar;
    manifest["seed"] = sc.seed;
    manifest["warnings"] = sc.warnings;
    manifest["tasks"] = json::array();
    manifest["commutator_convention"] =
        "[A,B](t,t') = i*hbar*C(t,t') with C real antisymmetric; files carry C";

    const auto flush_manifest = [&]() {
        write_file(bundle.manifest_path, manifest.dump(2) + "\n");
    };

    const auto run_task = [&](const std::string& task) -> std::pair<std::string, std::string> {
        // returns (filename, content)
        if (task == "sum_covariance") {
            const NoiseCovariances cov = sd::build_covariances(sc);
            const TwoTimeKernel b_sum = sum_noise_covariance(cov, sd::scenario_chiK_kernel(sc));
            return {"sum_covariance.csv", sd::matrix_csv(sc.grid, b_sum.values(), "b")};
        }
        if (task == "commutators") {
            const TwoTimeKernel chi_inv = sc.probe->response_kernel(sc.grid);
            const TwoTimeKernel rigidity = sc.rigidity_or_zero();
            const TwoTimeKernel sum_comm = sum_noise_commutator(chi_inv, rigidity);
            const TwoTimeKernel out_comm = output_commutator(chi_inv, rigidity);
            const double scale = chi_inv.values().norm() + rigidity.values().norm() + 1e-300;
            json r;
            r["convention"] = "[A,B](t,t') = i*hbar*C(t,t') with C real antisymmetric";
            r["sum_noise_commutator_norm"] = sum_comm.values().norm();
            r["route_mismatch_relative"] = sum_noise_commutator_mismatch(chi_inv, rigidity);
            r["output_commutator_relative_norm"] = out_comm.values().norm() / scale;
            return {"commutators.json", r.dump(2) + "\n"};
        }
        if (task == "psd_check") {
            const PSDReport report = check_uncertainty_block(sd::build_covariances(sc), sc.hbar);
            json r;
            r["min_eigenvalue"] = report.min_eigenvalue;
            r["matrix_norm"] = report.matrix_norm;
            r["tolerance"] = report.tolerance;
            r["passed"] = report.passed;
            return {"psd_check.json", r.dump(2) + "\n"};
        }
        if (task == "snr") {
            const NoiseCovariances cov = sd::build_covariances(sc);
            const TwoTimeKernel b_sum = sum_noise_covariance(cov, sd::scenario_chiK_kernel(sc));
            const TwoTimeKernel b_thermal =
                sc.thermal ? *sc.thermal : thermal_covariance(sc.grid);
            const double variance_sum = filtered_variance(b_sum, *sc.filter);
            const double variance_thermal = filtered_variance(b_thermal, *sc.filter);
            const double total = variance_sum + variance_thermal;
            json r;
            if (total > 0.0) {
                const double overlap =
                    sc.filter->values().dot(sc.signal->values()) * sc.grid.dt();
                r["snr"] = overlap * overlap / total;
                r["diverged"] = false;
            } else {
                r["snr"] = nullptr;
                r["diverged"] = true; // noiseless limit: flagged, not a number
            }
            r["variance_sum"] = variance_sum;
            r["variance_thermal"] = variance_thermal;
            return {"snr.json", r.dump(2) + "\n"};
        }
        if (task == "sql_dql_curves") {
            const SpectralDensity chi = sc.probe->response_spectrum(spectral_grid(sc.grid));
            const SpectralDensity sql = sql_curve(chi, sc.hbar);
            const SpectralDensity dql = dql_curve(chi, sc.hbar);
            CsvWriter csv({"omega", "sql", "dql"});
            for (int jx = 0; jx < sql.size(); ++jx)
                csv.add_row({sql.omegas()[jx], sql[jx].real(), dql[jx].real()});
            return {"sql_dql.csv", csv.str()};
        }
        if (task == "stationary_spectrum") {
            const ScenarioMeterNoise& mn = *sc.meter_noise;
            const SpectralDensity sxx = mn.sxx_spectrum.build(sc.grid);
            const SpectralDensity sff = mn.sff_spectrum.build(sc.grid);
            const SpectralDensity sxf = mn.sxf_spectrum.build(sc.grid);
            const SpectralDensity chiK = sc.probe->response_spectrum(spectral_grid(sc.grid));
            const SpectralDensity closed = stationary_sum_spectrum(sxx, sff, sxf, chiK);

            // time-domain route: kernels from the same samples, composed and
            // read back with an edge margin against window truncation
            const NoiseCovariances cov = stationary_covariances(sxx, sff, sxf, sc.grid);
            const TwoTimeKernel chiK_kernel = toeplitz_from_spectrum(chiK, sc.grid);
            const TwoTimeKernel b_sum = sum_noise_covariance(cov, chiK_kernel);
            const SpectralDensity via_time =
                kernel_to_spectrum(b_sum, sc.grid.size() / 8, 1e-3);
            CsvWriter csv({"omega", "s_sum", "s_sum_time_route"});
            for (int jx = 0; jx < closed.size(); ++jx)
                csv.add_row({closed.omegas()[jx], closed[jx].real(), via_time[jx].real()});
            return {"stationary_spectrum.csv", csv.str()};
        }
        if (task == "memoryless_optimize") {
            const TwoTimeKernel chi_inv = sc.probe->response_kernel(sc.grid);
            const MemorylessNoise& noise = *sc.meter_noise->memoryless;
            const MemorylessOptimum opt =
                memoryless_optimize(*sc.filter, chi_inv, noise.sff, sc.hbar);
            const VerifyReport verify = memoryless_verify(opt, *sc.filter, noise.sff,
                                                          sc.verify_trials, sc.seed, sc.hbar);
            CsvWriter csv({"t", "phi", "psi", "sxf_opt", "sxx_opt"});
            for (int i = 0; i < sc.grid.size(); ++i)
                csv.add_row({sc.grid.t(i), (*sc.filter)[i], opt.psi[i], opt.sxf_opt[i],
                             opt.sxx_opt[i]});
            json r;
            r["min_variance"] = opt.min_variance;
            r["capped_points"] = opt.capped_points;
            r["degenerate"] = opt.degenerate;
            r["verify"] = {{"trials", verify.trials},
                           {"violations", verify.violations},
                           {"min_margin", verify.min_margin},
                           {"max_excess", verify.max_excess},
                           {"passed", verify.passed}};
            write_file(bundle.directory / "memoryless_optimize.json", r.dump(2) + "\n");
            bundle.files.push_back("memoryless_optimize.json");
            return {"memoryless_optimum.csv", csv.str()};
        }
        if (task == "stationary_optimize") {
            const auto& cfg = *sc.stationary_optimize_config;
            const Eigen::VectorXd omega_one =
                (Eigen::VectorXd(1) << cfg.omega).finished();
            const std::complex<double> chiK =
                sc.probe->response_spectrum(omega_one)[0];
            const std::complex<double> rigidity{0.0, 0.0};
            const double dql = sc.hbar * std::abs(chiK.imag());
            CsvWriter csv({"budget", "min_sum_spectrum", "dql", "sxx", "re_sxf", "im_sxf",
                           "iterations", "residual"});
            for (double budget : cfg.budgets) {
                const StationaryOptimum opt =
                    stationary_optimize(chiK, rigidity, budget, cfg.omega, sc.hbar);
                if (!opt.feasible)
                    throw numeric_error("stationary_optimize: infeasible budget " +
                                        format_double(budget));
                csv.add_row({budget, opt.min_sum_spectrum, dql, opt.sxx, opt.sxf.real(),
                             opt.sxf.imag(), static_cast<double>(opt.iterations),
                             opt.residual});
            }
            return {"stationary_optimize.csv", csv.str()};
        }
        if (task == "quadrature_bounds") {
            const NarrowbandBound bound = narrowband_bound(*sc.quadrature, sc.hbar);
            if (bound.degenerate)
                throw numeric_error("quadrature_bounds: degenerate (orthogonal envelopes)");
            CsvWriter csv({"omega0", "exact", "approx", "rel_error"});
            csv.add_row({sc.quadrature->omega0, bound.exact, bound.approx, bound.rel_error});
            return {"quadrature_bounds.csv", csv.str()};
        }
        throw validation_error("unknown task '" + task + "'");
    };

    for (const auto& task : sc.tasks) {
        const auto started = std::chrono::steady_clock::now();
        json entry;
        entry["name"] = task;
        try {
            auto [filename, content] = run_task(task);
            write_file(out_dir / filename, content);
            bundle.files.push_back(filename);
            entry["status"] = "ok";
            entry["file"] = filename;
        } catch (const std::exception& e) {
            entry["status"] = "failed";
            entry["error"] = e.what();
            manifest["tasks"].push_back(entry);
            flush_manifest();
            const std::string annotated = "task '" + task + "' failed: " + e.what();
            if (dynamic_cast<const io_error*>(&e)) throw io_error(annotated);
            if (dynamic_cast<const validation_error*>(&e)) throw validation_error(annotated);
            throw numeric_error(annotated);
        }
        const auto elapsed = std::chrono::duration<double>(
                                 std::chrono::steady_clock::now() - started)
                                 .count();
        entry["seconds"] = elapsed; // excluded from determinism comparisons
        manifest["tasks"].push_back(entry);
    }
    flush_manifest();
    return bundle;
}

/// Bundled demo scenarios, emitted verbatim by the CLI `demo` subcommand.
inline std::vector<std::string> demo_names() {
    return {"two_quadrature", "dql_recovery", "memoryless_qcrb"};
}

inline std::string demo_scenario_text(const std::string& name) {
    if (name == "two_quadrature") {
        return R"({
  "grid": {"t_start": 0.0, "t_end": 1.0, "n": 512},
  "probe": {"kind": "damped_oscillator", "mass": 1.0, "omega0": 100.0, "gamma": 1.0},
  "quadrature": {
    "omega0": 100.0,
    "friction": 1.0,
    "envelope_cos": {"kind": "gaussian", "t0": 0.5, "sigma": 0.065, "amplitude": 1.0},
    "envelope_sin": {"kind": "gaussian", "t0": 0.5, "sigma": 0.065, "amplitude": 1.0}
  },
  "tasks": ["quadrature_bounds", "commutators"]
}
)";
    }
    if (name == "dql_recovery") {
        return R"({
  "grid": {"t_start": 0.0, "t_end": 10.0, "n": 64},
  "probe": {"kind": "damped_oscillator", "mass": 1.0, "omega0": 1.0, "gamma": 0.1},
  "stationary_optimize": {"omega": 1.0, "budgets": [1.0, 10.0, 100.0, 1000.0]},
  "tasks": ["stationary_optimize", "sql_dql_curves"]
}
)";
    }
    if (name == "memoryless_qcrb") {
        return R"({
  "grid": {"t_start": 0.0, "t_end": 1.0, "n": 128},
  "seed": 20260809,
  "probe": {"kind": "free_mass", "mass": 1.0},
  "meter_noise": {
    "kind": "memoryless",
    "sxx": {"kind": "constant", "value": 0.5},
    "sff": {"kind": "constant", "value": 0.5},
    "sxf": {"kind": "constant", "value": 0.0}
  },
  "signal": {"kind": "sine_gaussian", "t0": 0.5, "sigma": 0.08, "omega0": 30.0, "phase": 0.0, "amplitude": 1.0},
  "filter": {"kind": "sine_gaussian", "t0": 0.5, "sigma": 0.08, "omega0": 30.0, "phase": 0.0, "amplitude": 1.0},
  "tasks": ["psd_check", "sum_covariance", "snr", "memoryless_optimize"]
}
)";
    }
    throw validation_error("unknown demo '" + name + "' (available: two_quadrature, "
                           "dql_recovery, memoryless_qcrb)");
}

} // namespace dqlab
