#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <string>

#include "hybeam/config.hpp"
#include "hybeam/experiments.hpp"
#include "hybeam/subarray.hpp"

namespace {

hybeam::Scenario load_scenario(const std::string& path) {
    return hybeam::scenario_from_config(hybeam::Config::parse_file(path));
}

int cmd_run(const std::string& config_path) {
    const hybeam::Scenario sc = load_scenario(config_path);
    const hybeam::ScenarioResult result = hybeam::run_scenario(sc);
    std::printf("wrote %zu curve(s) to %s\n", result.curves.size(), result.dir.string().c_str());
    for (const auto& [name, rows] : result.curves) {
        std::printf("  %-28s %zu point(s)\n", (name + ".csv").c_str(), rows.size());
    }
    return 0;
}

int cmd_oracle(const std::string& config_path) {
    const hybeam::Scenario sc = load_scenario(config_path);
    hybeam::RngStream root(sc.seed);
    const hybeam::PathAngles angles = hybeam::scenario_angles(sc, root);
    const hybeam::StatisticalCsi csi = hybeam::build_statistical_csi(angles, sc.n_r, sc.n_t);

    hybeam::RngStream oracle_stream = root.split(11);
    const hybeam::ExhaustiveSearchResult oracle =
        hybeam::exhaustive_partition_search(csi.a_tx, sc.n_rf, oracle_stream);
    hybeam::RngStream design_stream = root.split(2);
    const hybeam::SubarrayDesign design =
        hybeam::design_dynamic_subarray(csi.a_tx, sc.n_rf, design_stream, sc.restarts);

    const std::filesystem::path dir = std::filesystem::path(sc.outdir) / sc.name;
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "oracle_partition.txt");
        oracle.partition.serialize(out);
    }
    {
        std::ofstream out(dir / "designed_partition.txt");
        design.partition.serialize(out);
    }
    std::printf("partitions visited: %llu\n", static_cast<unsigned long long>(oracle.visited));
    std::printf("oracle gain:   %.12g\n", oracle.gain);
    std::printf("designed gain: %.12g  (ratio %.4f)\n", design.gain, design.gain / oracle.gain);
    return 0;
}

int cmd_timing(const std::string& config_path) {
    const hybeam::Scenario sc = load_scenario(config_path);
    const auto rows = hybeam::timing_report(sc);
    std::printf("%10s %14s %14s %14s\n", "snr_db", "mi_mc[s]", "bound[s]", "approx[s]");
    for (const auto& r : rows) {
        std::printf("%10.2f %14.6g %14.6g %14.6g\n", r.snr_db, r.t_mi_mc, r.t_lower_bound,
                    r.t_lower_bound_approx);
    }
    return 0;
}

int cmd_cdf(const std::string& config_path, int inits) {
    const hybeam::Scenario sc = load_scenario(config_path);
    const auto finals = hybeam::cdf_study(sc, inits);
    std::printf("%d ascent run(s): min %.6g, median %.6g, max %.6g\n", inits, finals.front(),
                finals[finals.size() / 2], finals.back());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hybrid precoding simulator for mmWave MIMO with dynamic subarrays"};
    app.require_subcommand(1);

    std::string config_path;
    int inits = 100;

    CLI::App* run = app.add_subcommand("run", "Run a scenario and write curve CSVs");
    run->add_option("config", config_path, "scenario config file")->required();

    CLI::App* oracle = app.add_subcommand("oracle", "Exhaustive subarray search vs the designed one");
    oracle->add_option("config", config_path, "scenario config file")->required();

    CLI::App* timing = app.add_subcommand("timing", "Time the three evaluation routes");
    timing->add_option("config", config_path, "scenario config file")->required();

    CLI::App* cdf = app.add_subcommand("cdf", "Final objectives from random starts");
    cdf->add_option("config", config_path, "scenario config file")->required();
    cdf->add_option("--inits", inits, "number of random starts");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path);
        if (oracle->parsed()) return cmd_oracle(config_path);
        if (timing->parsed()) return cmd_timing(config_path);
        if (cdf->parsed()) return cmd_cdf(config_path, inits);
    } catch (const hybeam::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const hybeam::FixtureMissing& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const hybeam::AssertionFailure& e) {
        std::fprintf(stderr, "assertion failure: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
