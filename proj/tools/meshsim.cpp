#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "meshsim/harness.hpp"
#include "meshsim/network.hpp"

namespace {

void print_record(const meshsim::MetricsRecord& r) {
    std::printf("seed %llu  digest %016llx\n",
                static_cast<unsigned long long>(r.seed),
                static_cast<unsigned long long>(r.trace_digest));
    std::printf("  app sent/delivered   %llu / %llu  (pdr %.4f)\n",
                static_cast<unsigned long long>(r.app_sent),
                static_cast<unsigned long long>(r.app_delivered), r.pdr);
    std::printf("  mean latency         %.3f ms (%llu samples)\n",
                r.mean_app_latency_ms,
                static_cast<unsigned long long>(r.latency_samples));
    std::printf("  mean rule RTT        %.3f ms (%llu samples)\n",
                r.mean_rule_rtt_ms,
                static_cast<unsigned long long>(r.rtt_samples));
    std::printf("  served throughput    %.3f req/s (%llu served)\n",
                r.served_throughput,
                static_cast<unsigned long long>(r.served_requests));
    std::printf("  mean energy          %.3f mJ/node\n", r.mean_energy_mJ);
    std::printf("  discovery / update   %.1f ms / %.1f ms\n",
                r.topology_discovery_ms, r.topology_update_ms);
    std::printf("  control tx           %llu  (data %llu, collisions %llu)\n",
                static_cast<unsigned long long>(r.total_control_tx),
                static_cast<unsigned long long>(r.data_tx),
                static_cast<unsigned long long>(r.collisions));
    for (const auto& [kind, count] : r.control_tx)
        std::printf("    %-12s %llu\n", kind.c_str(),
                    static_cast<unsigned long long>(count));
    for (const auto& [cause, count] : r.drops)
        if (count)
            std::printf("  drops[%s] = %llu\n", cause.c_str(),
                        static_cast<unsigned long long>(count));
}

int fail(const std::string& msg) {
    std::cerr << "error: " << msg << "\n";
    return 2;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"software-defined low-power mesh simulator"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::string out_path;
    int jobs = 0;
    std::uint64_t replay_seed = 0;
    std::string param;
    std::vector<double> values;
    std::vector<std::string> metrics = {"pdr", "mean_app_latency_ms",
                                        "mean_rule_rtt_ms", "served_throughput",
                                        "mean_energy_mJ"};

    auto* run_cmd = app.add_subcommand("run", "run a scenario batch");
    run_cmd->add_option("scenario", scenario_path, "scenario file")->required();
    run_cmd->add_option("--jobs", jobs, "parallel runs (0 = hardware)");
    run_cmd->add_option("--out", out_path, "write summary CSV here");
    run_cmd->add_option("--metrics", metrics, "metrics to summarize");

    auto* sweep_cmd = app.add_subcommand("sweep", "sweep one parameter");
    sweep_cmd->add_option("scenario", scenario_path, "scenario file")->required();
    sweep_cmd->add_option("--param", param, "swept parameter")->required();
    sweep_cmd->add_option("--values", values, "parameter values")->required();
    sweep_cmd->add_option("--jobs", jobs, "parallel runs (0 = hardware)");
    sweep_cmd->add_option("--out", out_path, "CSV output path (default stdout)");
    sweep_cmd->add_option("--metrics", metrics, "metrics to summarize");

    auto* validate_cmd = app.add_subcommand("validate", "validate a scenario");
    validate_cmd->add_option("scenario", scenario_path, "scenario file")
        ->required();

    auto* replay_cmd =
        app.add_subcommand("replay", "re-run one repetition by seed");
    replay_cmd->add_option("scenario", scenario_path, "scenario file")
        ->required();
    replay_cmd->add_option("--seed", replay_seed, "run seed")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (validate_cmd->parsed()) {
            meshsim::load_scenario(scenario_path);
            std::cout << "ok\n";
            return 0;
        }

        auto cfg = meshsim::load_scenario(scenario_path);

        if (run_cmd->parsed()) {
            auto records = meshsim::run_batch(cfg, jobs);
            for (const auto& m : metrics) {
                std::vector<double> samples;
                for (const auto& r : records) samples.push_back(r.metric(m));
                auto s = meshsim::summarize(samples);
                std::printf("%-24s %.6g  [%.6g, %.6g]  n=%zu\n", m.c_str(),
                            s.mean, s.ci_low, s.ci_high, s.n);
            }
            if (!out_path.empty()) {
                std::ofstream out(out_path);
                if (!out) return fail("cannot write " + out_path);
                out << meshsim::csv_header() << "\n";
                const char* stack =
                    cfg.stack == meshsim::StackKind::Usdn ? "usdn" : "sdnwise";
                const char* placement =
                    cfg.placement.kind == meshsim::PlacementKind::Embedded
                        ? "embedded"
                        : "external";
                for (const auto& m : metrics) {
                    std::vector<double> samples;
                    for (const auto& r : records) samples.push_back(r.metric(m));
                    auto s = meshsim::summarize(samples);
                    out.precision(10);
                    out << cfg.id << ',' << stack << ',' << placement << ",-,0,"
                        << m << ',' << s.mean << ',' << s.ci_low << ','
                        << s.ci_high << ',' << s.n << "\n";
                }
                std::ofstream manifest(out_path + ".manifest.json");
                manifest << meshsim::run_manifest_json(cfg);
            }
            return 0;
        }

        if (sweep_cmd->parsed()) {
            if (!out_path.empty()) {
                std::ofstream out(out_path);
                if (!out) return fail("cannot write " + out_path);
                meshsim::sweep(cfg, param, values, metrics, out, jobs);
                std::ofstream manifest(out_path + ".manifest.json");
                manifest << meshsim::run_manifest_json(cfg);
            } else {
                meshsim::sweep(cfg, param, values, metrics, std::cout, jobs);
            }
            return 0;
        }

        if (replay_cmd->parsed()) {
            meshsim::Network net(cfg, replay_seed);
            print_record(net.run());
            return 0;
        }
    } catch (const meshsim::ScenarioError& e) {
        return fail(e.what());
    } catch (const std::exception& e) {
        return fail(e.what());
    }
    return 0;
}
