#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hybeam/capacity.hpp"
#include "hybeam/channel.hpp"
#include "hybeam/config.hpp"
#include "hybeam/constellation.hpp"
#include "hybeam/errors.hpp"
#include "hybeam/optimizer.hpp"
#include "hybeam/subarray.hpp"

namespace hybeam {

enum class CsiMode {
    Statistical,
    Mixed,
    Instantaneous,
    FixedSubarray,
    NoPrecoding,
    UnconstrainedBenchmark,
};

inline CsiMode parse_mode(const std::string& s) {
    if (s == "statistical") return CsiMode::Statistical;
    if (s == "mixed") return CsiMode::Mixed;
    if (s == "instantaneous") return CsiMode::Instantaneous;
    if (s == "fixed_subarray") return CsiMode::FixedSubarray;
    if (s == "no_precoding") return CsiMode::NoPrecoding;
    if (s == "unconstrained") return CsiMode::UnconstrainedBenchmark;
    throw ConfigError("unknown mode: " + s);
}

inline double snr_to_sigma2(double snr_db, double power) {
    return power / std::pow(10.0, snr_db / 10.0);
}

inline double sigma2_to_snr_db(double sigma2, double power) {
    return 10.0 * std::log10(power / sigma2);
}

struct EnergyModel {
    double p_tx = 1.0;   // watts
    double p_rf = 0.25;  // watts per RF chain
    double p_ps = 0.001; // watts per phase shifter
    int n_rf = 1;
    long n_ps = 1;
};

// bits/s/Hz per watt under the component power model.
inline double energy_efficiency(double mi, const EnergyModel& model) {
    if (mi < 0.0) throw DimensionMismatch("mutual information must be nonnegative");
    return mi / (model.p_tx + model.n_rf * model.p_rf + model.n_ps * model.p_ps);
}

struct Scenario {
    std::string name = "scenario";
    std::string outdir = "out";
    int n_r = 8, n_t = 16, n_rf = 2, n_s = 2;
    Modulation modulation = Modulation::Qpsk;
    int n_paths = 3;
    std::vector<double> snr_grid_db;
    std::string fixture_aoa, fixture_aod; // empty -> sample angles
    std::optional<double> mean_aoa;       // disengaged -> uniform mean
    double mean_aod = std::numbers::pi / 4.0;
    double spread = std::numbers::pi / 18.0;
    std::uint64_t seed = 1;
    CsiMode mode = CsiMode::Statistical;
    double power = 1.0;
    int n_channel = 300;
    int n_noise = 200;
    bool identity_digital = false; // statistical mode: keep B = sqrt(P/N_s) I
    int restarts = 8;
    AscentOptions ascent;
    int bca_max_iter = 5000;
    DigitalSolveOptions solver;
    bool emit_ascent_trace = false;
    bool emit_energy = false;
    double p_rf = 0.25, p_ps = 0.001;
    long n_ps_override = 0; // 0 -> one shifter per antenna (times n_rf when fully connected)

    long phase_shifters() const {
        if (n_ps_override > 0) return n_ps_override;
        return mode == CsiMode::UnconstrainedBenchmark ? static_cast<long>(n_t) * n_rf : n_t;
    }
};

inline Scenario scenario_from_config(const Config& cfg) {
    Scenario sc;
    sc.name = cfg.get_string("name", "scenario");
    sc.outdir = cfg.get_string("outdir", "out");
    sc.n_r = static_cast<int>(cfg.get_int("n_r"));
    sc.n_t = static_cast<int>(cfg.get_int("n_t"));
    sc.n_rf = static_cast<int>(cfg.get_int("n_rf"));
    sc.n_s = static_cast<int>(cfg.get_int("n_s"));
    sc.modulation = parse_modulation(cfg.get_string("modulation"));
    sc.n_paths = static_cast<int>(cfg.get_int("n_paths"));
    sc.snr_grid_db = cfg.get_double_list("snr_db");
    sc.mode = parse_mode(cfg.get_string("mode", "statistical"));
    sc.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 1));
    sc.power = cfg.get_double("power", 1.0);
    sc.n_channel = static_cast<int>(cfg.get_int("n_channel", 300));
    sc.n_noise = static_cast<int>(cfg.get_int("n_noise", 200));
    sc.identity_digital = cfg.get_string("digital", "optimized") == "identity";
    sc.restarts = static_cast<int>(cfg.get_int("restarts", 8));
    sc.ascent.eps = cfg.get_double("ascent_eps", 1e-4);
    sc.ascent.max_iter = static_cast<int>(cfg.get_int("ascent_max_iter", 500));
    sc.bca_max_iter = static_cast<int>(cfg.get_int("bca_max_iter", 5000));
    sc.solver.max_iter = static_cast<int>(cfg.get_int("solver_max_iter", 60));
    sc.solver.n_noise = static_cast<int>(cfg.get_int("solver_noise", 200));
    sc.emit_ascent_trace = cfg.get_bool("emit_ascent_trace", false);
    sc.emit_energy = cfg.get_bool("energy", false);
    sc.p_rf = cfg.get_double("p_rf", 0.25);
    sc.p_ps = cfg.get_double("p_ps", 0.001);
    sc.n_ps_override = cfg.get_int("n_ps", 0);
    sc.fixture_aoa = cfg.get_string("fixture_aoa", "");
    sc.fixture_aod = cfg.get_string("fixture_aod", "");
    if (cfg.has("mean_aoa")) {
        const std::string v = cfg.get_string("mean_aoa");
        if (v != "uniform") sc.mean_aoa = cfg.get_double("mean_aoa");
    }
    sc.mean_aod = cfg.get_double("mean_aod", std::numbers::pi / 4.0);
    sc.spread = cfg.get_double("angle_spread", std::numbers::pi / 18.0);

    if (sc.n_s < 1 || sc.n_rf < 1 || sc.n_t < 1 || sc.n_r < 1)
        throw ConfigError("dimensions must be positive");
    if (sc.n_s > sc.n_rf || sc.n_rf > sc.n_t)
        throw ConfigError("dimension ordering violated: need n_s <= n_rf <= n_t");
    if (sc.n_paths < 1) throw ConfigError("n_paths must be positive");
    if (sc.power <= 0.0) throw ConfigError("power must be positive");
    if (sc.n_channel < 1 || sc.n_noise < 1) throw ConfigError("Monte Carlo budgets must be positive");
    if ((sc.mode == CsiMode::FixedSubarray || sc.mode == CsiMode::NoPrecoding) &&
        sc.n_t % sc.n_rf != 0)
        throw ConfigError("fixed-subarray modes need n_rf to divide n_t");
    if (sc.mode == CsiMode::NoPrecoding && sc.n_s != sc.n_rf)
        throw ConfigError("no_precoding needs n_s == n_rf");
    return sc;
}

struct CurvePoint {
    double snr_db = 0.0;
    double value = 0.0;
    double std_error = 0.0;
};

struct ScenarioResult {
    std::filesystem::path dir;
    std::map<std::string, std::vector<CurvePoint>> curves;
    std::optional<Partition> partition;
};

namespace detail {

inline void write_curve_csv(const std::filesystem::path& path, const std::vector<CurvePoint>& rows,
                            const std::string& failure = "") {
    std::ofstream out(path);
    if (!out) throw Error("cannot write curve: " + path.string());
    out << "snr_db,value,stderr\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", r.snr_db, r.value, r.std_error);
        out << buf;
    }
    if (!failure.empty()) out << "# failed: " << failure << "\n";
}

} // namespace detail

// Angle source shared by all runners: fixture files win over the sampler.
inline PathAngles scenario_angles(const Scenario& sc, const RngStream& root) {
    if (!sc.fixture_aoa.empty() || !sc.fixture_aod.empty()) {
        if (sc.fixture_aoa.empty() || sc.fixture_aod.empty())
            throw ConfigError("both fixture_aoa and fixture_aod must be given");
        PathAngles angles;
        angles.aoa = load_angle_fixture(sc.fixture_aoa);
        angles.aod = load_angle_fixture(sc.fixture_aod);
        if (angles.aoa.size() != sc.n_paths || angles.aod.size() != sc.n_paths)
            throw ConfigError("fixture length does not match n_paths");
        return angles;
    }
    RngStream stream = root.split(1);
    return sample_path_angles(stream, sc.n_paths, sc.mean_aoa, sc.mean_aod, sc.spread);
}

struct StatisticalPipeline {
    PathAngles angles;
    StatisticalCsi csi;
    SignalSet signals;
    Partition partition;
    Eigen::MatrixXd phi0;
    Eigen::MatrixXcd fbar0;
};

// Everything before the per-SNR work for the statistical-CSI modes.
inline StatisticalPipeline prepare_statistical_pipeline(const Scenario& sc, const RngStream& root) {
    StatisticalPipeline pipe;
    pipe.angles = scenario_angles(sc, root);
    pipe.csi = build_statistical_csi(pipe.angles, sc.n_r, sc.n_t);
    pipe.signals = build_signal_set(sc.modulation, sc.n_s);
    if (sc.mode == CsiMode::FixedSubarray || sc.mode == CsiMode::NoPrecoding) {
        pipe.partition = fixed_partition(sc.n_t, sc.n_rf);
        pipe.phi0 = Eigen::MatrixXd::Zero(sc.n_t, sc.n_rf);
        pipe.fbar0 = fbar_from_phases(pipe.partition, pipe.phi0);
    } else {
        RngStream design_stream = root.split(2);
        const SubarrayDesign design =
            design_dynamic_subarray(pipe.csi.a_tx, sc.n_rf, design_stream, sc.restarts);
        pipe.partition = design.partition;
        pipe.fbar0 = design.fbar;
        pipe.phi0 = Eigen::MatrixXd::Zero(sc.n_t, sc.n_rf);
        for (int j = 0; j < pipe.partition.n_groups(); ++j)
            for (int i : pipe.partition.groups[static_cast<std::size_t>(j)])
                pipe.phi0(i, j) = std::arg(design.fbar(i, j));
    }
    return pipe;
}

inline MiEstimate average_mi_product(const RngStream& rng, const StatisticalCsi& csi,
                                     const Eigen::MatrixXcd& pbar, const SignalSet& signals,
                                     double sigma2, int n_channel, int n_noise) {
    detail::check_noise(sigma2);
    std::vector<double> values(static_cast<std::size_t>(n_channel));
    for (int c = 0; c < n_channel; ++c) {
        RngStream stream = rng.split(static_cast<std::uint64_t>(c));
        const ChannelRealization real = sample_channel(stream, csi);
        values[static_cast<std::size_t>(c)] =
            mi_monte_carlo(stream, real.h * pbar, signals, sigma2, n_noise).value;
    }
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n_channel;
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var = (n_channel > 1) ? var / (n_channel - 1) : 0.0;
    MiEstimate est;
    est.value = std::max(0.0, mean);
    est.std_error = std::sqrt(var / std::max(1, n_channel));
    est.n_noise = n_noise;
    est.n_channel = n_channel;
    return est;
}

// Runs the scenario's pipeline over the SNR grid and writes one CSV per
// curve under <outdir>/<name>/. Channel and noise streams are shared across
// grid points so curves are smooth in the Monte Carlo noise.
inline ScenarioResult run_scenario(const Scenario& sc) {
    const RngStream root(sc.seed);
    const RngStream eval_stream = root.split(1000);
    ScenarioResult result;
    result.dir = std::filesystem::path(sc.outdir) / sc.name;
    std::filesystem::create_directories(result.dir);

    auto flush = [&](const std::string& failure) {
        for (const auto& [curve, rows] : result.curves)
            detail::write_curve_csv(result.dir / (curve + ".csv"), rows, failure);
    };

    try {
        const SignalSet signals = build_signal_set(sc.modulation, sc.n_s);
        const double shift = mi_constant_shift(sc.n_r);

        if (sc.mode == CsiMode::Statistical || sc.mode == CsiMode::FixedSubarray ||
            sc.mode == CsiMode::Mixed || sc.mode == CsiMode::NoPrecoding) {
            const StatisticalPipeline pipe = prepare_statistical_pipeline(sc, root);
            result.partition = pipe.partition;
            for (std::size_t i = 0; i < sc.snr_grid_db.size(); ++i) {
                const double snr = sc.snr_grid_db[i];
                const double sigma2 = snr_to_sigma2(snr, sc.power);
                HybridPrecoder precoder;
                if (sc.mode == CsiMode::NoPrecoding) {
                    precoder = no_precoding_precoder(sc.n_t, sc.n_rf, sc.n_s, sc.power);
                } else if (sc.identity_digital) {
                    const Eigen::MatrixXcd bbar = std::sqrt(sc.power / sc.n_s) *
                                                  Eigen::MatrixXcd::Identity(sc.n_rf, sc.n_s);
                    precoder = make_hybrid_precoder(pipe.partition, pipe.phi0, bbar, sc.power);
                } else {
                    const Eigen::MatrixXcd bbar0 = right_singular_init(
                        pipe.csi.a_tx.adjoint() * pipe.fbar0, sc.n_s, sc.power);
                    const AscentReport report =
                        ascend_lower_bound(pipe.csi, pipe.partition, pipe.phi0, bbar0, signals,
                                           sigma2, sc.power, sc.ascent);
                    if (sc.emit_ascent_trace) {
                        char name[64];
                        std::snprintf(name, sizeof name, "ascent_%g.csv", snr);
                        report.write_csv((result.dir / name).string());
                    }
                    precoder = report.precoder;
                }

                if (sc.mode == CsiMode::Mixed) {
                    const MiEstimate mi =
                        mixed_csi_average(eval_stream, pipe.csi, precoder.fbar, signals, sigma2,
                                          sc.power, sc.n_channel, sc.solver, sc.n_noise);
                    result.curves["mi_mc"].push_back({snr, mi.value, mi.std_error});
                } else {
                    const MiEstimate mi = average_mi(eval_stream, pipe.csi, precoder, signals,
                                                     sigma2, sc.n_channel, sc.n_noise);
                    result.curves["mi_mc"].push_back({snr, mi.value, mi.std_error});
                    if (sc.mode == CsiMode::Statistical) {
                        const BoundValue lb = lower_bound(pipe.csi, precoder, signals, sigma2);
                        const BoundValue la = lower_bound_approx(pipe.csi, precoder, signals, sigma2);
                        result.curves["lower_bound_shifted"].push_back({snr, lb.value + shift, 0.0});
                        result.curves["lower_bound_approx_shifted"].push_back(
                            {snr, la.value + shift, 0.0});
                    }
                }
            }
        } else if (sc.mode == CsiMode::Instantaneous) {
            const PathAngles angles = scenario_angles(sc, root);
            const StatisticalCsi csi = build_statistical_csi(angles, sc.n_r, sc.n_t);
            for (double snr : sc.snr_grid_db) {
                const double sigma2 = snr_to_sigma2(snr, sc.power);
                std::vector<double> values(static_cast<std::size_t>(sc.n_channel));
                for (int c = 0; c < sc.n_channel; ++c) {
                    RngStream stream = root.split(3000 + static_cast<std::uint64_t>(c));
                    RngStream chan_stream = stream.split(0);
                    const ChannelRealization real = sample_channel(chan_stream, csi);
                    RngStream design_stream = stream.split(1);
                    const SubarrayDesign design = design_dynamic_subarray(
                        real.h.adjoint(), sc.n_rf, design_stream, sc.restarts);
                    Eigen::MatrixXd phi0 = Eigen::MatrixXd::Zero(sc.n_t, sc.n_rf);
                    for (int j = 0; j < design.partition.n_groups(); ++j)
                        for (int i : design.partition.groups[static_cast<std::size_t>(j)])
                            phi0(i, j) = std::arg(design.fbar(i, j));
                    const Eigen::MatrixXcd bbar0 =
                        right_singular_init(real.h * design.fbar, sc.n_s, sc.power);
                    const AscentReport rep =
                        ascend_instantaneous_mi(stream.split(2), real.h, design.partition, phi0,
                                                bbar0, signals, sigma2, sc.power, sc.solver);
                    values[static_cast<std::size_t>(c)] =
                        mi_monte_carlo(stream.split(3), real.h * rep.precoder.product(), signals,
                                       sigma2, sc.n_noise)
                            .value;
                }
                double mean = 0.0;
                for (double v : values) mean += v;
                mean /= sc.n_channel;
                double var = 0.0;
                for (double v : values) var += (v - mean) * (v - mean);
                var = (sc.n_channel > 1) ? var / (sc.n_channel - 1) : 0.0;
                result.curves["mi_mc"].push_back(
                    {snr, mean, std::sqrt(var / std::max(1, sc.n_channel))});
            }
        } else { // UnconstrainedBenchmark
            const PathAngles angles = scenario_angles(sc, root);
            const StatisticalCsi csi = build_statistical_csi(angles, sc.n_r, sc.n_t);
            RngStream seed_stream = root.split(2);
            const Eigen::MatrixXcd p0 = spectral_basis(csi.a_tx, sc.n_s, seed_stream);
            for (double snr : sc.snr_grid_db) {
                const double sigma2 = snr_to_sigma2(snr, sc.power);
                const UnconstrainedResult sol =
                    ascend_unconstrained(csi, p0, signals, sigma2, sc.power, sc.ascent);
                const MiEstimate mi = average_mi_product(eval_stream, csi, sol.pbar, signals, sigma2,
                                                         sc.n_channel, sc.n_noise);
                result.curves["mi_mc"].push_back({snr, mi.value, mi.std_error});
            }
        }

        if (sc.emit_energy) {
            EnergyModel model{sc.power, sc.p_rf, sc.p_ps, sc.n_rf, sc.phase_shifters()};
            std::vector<CurvePoint> eta;
            for (const auto& row : result.curves["mi_mc"]) {
                const double denom = model.p_tx + model.n_rf * model.p_rf + model.n_ps * model.p_ps;
                eta.push_back({row.snr_db, energy_efficiency(row.value, model),
                               row.std_error / denom});
            }
            result.curves["energy_efficiency"] = std::move(eta);
        }
    } catch (const std::exception& e) {
        flush(e.what());
        throw;
    }

    flush("");
    if (result.partition) {
        std::ofstream out(result.dir / "partition.txt");
        result.partition->serialize(out);
    }
    return result;
}

struct TimingRow {
    double snr_db = 0.0;
    double t_mi_mc = 0.0;
    double t_lower_bound = 0.0;
    double t_lower_bound_approx = 0.0;
};

namespace detail {

template <typename Fn>
double time_once(Fn&& fn) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Fast evaluations are repeated until the total passes a floor, then averaged.
template <typename Fn>
double time_repeated(Fn&& fn, double floor_sec = 0.02, int max_reps = 4096) {
    double total = 0.0;
    int reps = 0;
    while (total < floor_sec && reps < max_reps) {
        total += time_once(fn);
        ++reps;
    }
    return total / reps;
}

} // namespace detail

// Wall-clock comparison of the three evaluation routes on the scenario's
// statistical precoder. The Monte Carlo route must be the slowest and the
// bound approximation the fastest (not asserted for degenerate K <= 2).
inline std::vector<TimingRow> timing_report(const Scenario& sc) {
    const RngStream root(sc.seed);
    const RngStream eval_stream = root.split(1000);
    Scenario stat = sc;
    stat.mode = CsiMode::Statistical;
    const StatisticalPipeline pipe = prepare_statistical_pipeline(stat, root);
    const Eigen::MatrixXcd bbar =
        std::sqrt(sc.power / sc.n_s) * Eigen::MatrixXcd::Identity(sc.n_rf, sc.n_s);
    const HybridPrecoder precoder =
        make_hybrid_precoder(pipe.partition, pipe.phi0, bbar, sc.power);

    std::vector<TimingRow> rows;
    for (double snr : sc.snr_grid_db) {
        const double sigma2 = snr_to_sigma2(snr, sc.power);
        TimingRow row;
        row.snr_db = snr;
        row.t_mi_mc = detail::time_once([&] {
            average_mi(eval_stream, pipe.csi, precoder, pipe.signals, sigma2, sc.n_channel,
                       sc.n_noise);
        });
        row.t_lower_bound = detail::time_repeated(
            [&] { lower_bound(pipe.csi, precoder, pipe.signals, sigma2); });
        row.t_lower_bound_approx = detail::time_repeated(
            [&] { lower_bound_approx(pipe.csi, precoder, pipe.signals, sigma2); });
        if (pipe.signals.size() > 2 &&
            !(row.t_mi_mc > row.t_lower_bound && row.t_lower_bound > row.t_lower_bound_approx)) {
            throw AssertionFailure("timing order violated at snr " + std::to_string(snr));
        }
        rows.push_back(row);
    }

    const std::filesystem::path dir = std::filesystem::path(sc.outdir) / sc.name;
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / "timing.csv");
    out << "snr_db,t_mi_mc_sec,t_lower_bound_sec,t_lower_bound_approx_sec\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", r.snr_db, r.t_mi_mc,
                      r.t_lower_bound, r.t_lower_bound_approx);
        out << buf;
    }
    return rows;
}

// Final shifted objectives of the manifold ascent from random starting
// points, sorted; evaluated at the first SNR grid point.
inline std::vector<double> cdf_study(const Scenario& sc, int n_inits) {
    if (n_inits < 1) throw ConfigError("cdf study needs at least one start");
    const RngStream root(sc.seed);
    const PathAngles angles = scenario_angles(sc, root);
    const StatisticalCsi csi = build_statistical_csi(angles, sc.n_r, sc.n_t);
    const SignalSet signals = build_signal_set(sc.modulation, sc.n_s);
    const double sigma2 = snr_to_sigma2(sc.snr_grid_db.front(), sc.power);
    const double shift = mi_constant_shift(sc.n_r);

    std::vector<double> finals(static_cast<std::size_t>(n_inits));
    for (int j = 0; j < n_inits; ++j) {
        RngStream stream = root.split(7000 + static_cast<std::uint64_t>(j));
        const SubarrayDesign design = design_dynamic_subarray(csi.a_tx, sc.n_rf, stream, 1);
        Eigen::MatrixXd phi0 = Eigen::MatrixXd::Zero(sc.n_t, sc.n_rf);
        for (int jj = 0; jj < design.partition.n_groups(); ++jj)
            for (int i : design.partition.groups[static_cast<std::size_t>(jj)])
                phi0(i, jj) = std::arg(design.fbar(i, jj));
        RngStream init_stream = stream.split(99);
        Eigen::MatrixXcd bbar0(sc.n_rf, sc.n_s);
        for (int r = 0; r < sc.n_rf; ++r)
            for (int c = 0; c < sc.n_s; ++c) bbar0(r, c) = init_stream.complex_normal();
        const AscentReport report = ascend_lower_bound(csi, design.partition, phi0,
                                                       project_power_sphere(bbar0, sc.power),
                                                       signals, sigma2, sc.power, sc.ascent);
        finals[static_cast<std::size_t>(j)] = report.trace.back().objective + shift;
    }
    std::sort(finals.begin(), finals.end());

    const std::filesystem::path dir = std::filesystem::path(sc.outdir) / sc.name;
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / "cdf.csv");
    out << "objective,cumulative_probability\n";
    char buf[96];
    for (std::size_t i = 0; i < finals.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", finals[i],
                      static_cast<double>(i + 1) / finals.size());
        out << buf;
    }
    return finals;
}

} // namespace hybeam
