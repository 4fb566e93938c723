#include "mcglm/commands.hpp"

#include "CLI11.hpp"

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Multivariate covariance generalized linear models"};
    app.require_subcommand(1);

    mcglm::FitArgs fit_args;
    std::string alg;
    int max_iter = -1;
    std::string data;
    auto* fit = app.add_subcommand("fit", "Fit a model and write estimates, fitted values and a trace");
    fit->add_option("--spec", fit_args.spec, "JSON model spec")->required()->check(CLI::ExistingFile);
    fit->add_option("--data", data, "CSV data file (overrides the spec)");
    fit->add_option("--out", fit_args.out, "Output directory")->required();
    fit->add_option("--threads", fit_args.threads, "Worker threads")->check(CLI::PositiveNumber);
    fit->add_option("--max-iter", max_iter, "Iteration limit")->check(CLI::NonNegativeNumber);
    fit->add_option("--alg", alg, "Algorithm")->check(CLI::IsMember({"chaser", "reciprocal"}));

    mcglm::SimulateArgs sim_args;
    auto* sim = app.add_subcommand("simulate", "Draw Gaussian replicates at a given parameter vector");
    sim->add_option("--spec", sim_args.spec, "JSON model spec")->required()->check(CLI::ExistingFile);
    sim->add_option("--data", data, "CSV data file (overrides the spec)");
    sim->add_option("--theta", sim_args.theta, "CSV of parameter,value in layout order")->required();
    sim->add_option("--n", sim_args.n, "Number of replicates")->check(CLI::PositiveNumber);
    sim->add_option("--seed", sim_args.seed, "Random seed");
    sim->add_option("--out", sim_args.out, "Output directory")->required();
    sim->add_option("--threads", sim_args.threads, "Worker threads")->check(CLI::PositiveNumber);

    mcglm::CheckArgs check_args;
    std::string corrupt;
    auto* check = app.add_subcommand("check-derivatives", "Compare analytic covariance derivatives with finite differences");
    check->add_option("--spec", check_args.spec, "JSON model spec")->required()->check(CLI::ExistingFile);
    check->add_option("--data", data, "CSV data file (overrides the spec)");
    check->add_option("--seed", check_args.seed, "Random seed for the probe point");
    check->add_option("--threads", check_args.threads, "Worker threads")->check(CLI::PositiveNumber);
    check->add_option("--corrupt-family", corrupt)->group("");

    mcglm::BuildArgs build_args;
    auto* build = app.add_subcommand("build-matrices", "Write the structure matrices as coordinate lists");
    build->add_option("--spec", build_args.spec, "JSON model spec")->required()->check(CLI::ExistingFile);
    build->add_option("--data", data, "CSV data file (overrides the spec)");
    build->add_option("--out", build_args.out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : mcglm::exit_code::input_error;
    }

    std::optional<std::filesystem::path> data_path;
    if (!data.empty()) data_path = data;

    try {
        if (*fit) {
            fit_args.data = data_path;
            if (max_iter >= 0) fit_args.max_iter = max_iter;
            if (!alg.empty()) fit_args.algorithm = mcglm::parse_algorithm(alg);
            return mcglm::cmd_fit(fit_args, std::cout, std::cerr);
        }
        if (*sim) {
            sim_args.data = data_path;
            return mcglm::cmd_simulate(sim_args, std::cout, std::cerr);
        }
        if (*check) {
            check_args.data = data_path;
            if (!corrupt.empty()) check_args.corrupt_family = corrupt;
            return mcglm::cmd_check_derivatives(check_args, std::cout, std::cerr);
        }
        if (*build) {
            build_args.data = data_path;
            return mcglm::cmd_build_matrices(build_args, std::cout, std::cerr);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return mcglm::exit_code::input_error;
    }
    return mcglm::exit_code::input_error;
}
