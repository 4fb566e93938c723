#pragma once

#include "mcglm/model.hpp"
#include "mcglm/solver.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mcglm {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int input_error = 1;
inline constexpr int not_converged = 2;
inline constexpr int not_positive_definite = 3;
inline constexpr int derivative_mismatch = 4;
}  // namespace exit_code

struct FitArgs {
    std::filesystem::path spec;
    std::optional<std::filesystem::path> data;
    std::filesystem::path out;
    int threads = 1;
    std::optional<int> max_iter;
    std::optional<Algorithm> algorithm;
};

struct SimulateArgs {
    std::filesystem::path spec;
    std::optional<std::filesystem::path> data;
    std::filesystem::path theta;
    std::filesystem::path out;
    Index n = 1;
    std::uint64_t seed = 0;
    int threads = 1;
};

struct CheckArgs {
    std::filesystem::path spec;
    std::optional<std::filesystem::path> data;
    std::uint64_t seed = 0;
    int threads = 1;
    /// Test hook: perturb the analytic derivatives of one family.
    std::optional<std::string> corrupt_family;
};

struct BuildArgs {
    std::filesystem::path spec;
    std::optional<std::filesystem::path> data;
    std::filesystem::path out;
};

[[nodiscard]] int cmd_fit(const FitArgs& args, std::ostream& out, std::ostream& err);
[[nodiscard]] int cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err);
[[nodiscard]] int cmd_check_derivatives(const CheckArgs& args, std::ostream& out, std::ostream& err);
[[nodiscard]] int cmd_build_matrices(const BuildArgs& args, std::ostream& out, std::ostream& err);

struct FamilyError {
    std::string family;  ///< rho, power, tau or beta
    Index count = 0;
    double worst = 0.0;
    std::string worst_parameter;
};

/// Compares every analytic dC/d lambda_i and dC/d beta_j at theta with a
/// four-point central difference of the assembled C.
[[nodiscard]] std::vector<FamilyError> derivative_errors(const Problem& problem, const ThetaPartition& theta,
                                                         const std::optional<std::string>& corrupt_family = std::nullopt);

}  // namespace mcglm
