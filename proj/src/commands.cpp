#include "mcglm/commands.hpp"

#include "mcglm/simulate.hpp"
#include "mcglm/spec_io.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

namespace mcglm {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr double kDerivativeTolerance = 1e-5;
constexpr int kMaxRedraws = 10;

std::string role_name(ParamRole r) {
    switch (r) {
        case ParamRole::beta: return "beta";
        case ParamRole::rho: return "rho";
        case ParamRole::power: return "power";
        case ParamRole::tau: return "tau";
    }
    return "unknown";
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
    f << content;
    if (!f) throw std::runtime_error("failed writing '" + path.string() + "'");
}

std::string fixed(double v, int width, int prec) {
    if (std::isnan(v)) return std::string(static_cast<std::size_t>(std::max(0, width - 2)), ' ') + "NA";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%*.*f", width, prec, v);
    return buf;
}

json to_json(const MatrixXd& m) {
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Index j = 0; j < m.cols(); ++j) row.push_back(std::isfinite(m(i, j)) ? json(m(i, j)) : json(nullptr));
        rows.push_back(row);
    }
    return rows;
}

json to_json(const VectorXd& v) {
    json out = json::array();
    for (Index i = 0; i < v.size(); ++i) out.push_back(std::isfinite(v(i)) ? json(v(i)) : json(nullptr));
    return out;
}

// Writes estimates, Sigma_b, fitted values, trace and the result document.
void write_fit_outputs(const fs::path& dir, const Problem& problem, const LoadedSpec& spec, const FitResult& res,
                       const SolverOptions& opts) {
    fs::create_directories(dir);
    const auto& layout = res.layout;
    const VectorXd theta = res.theta_hat.flat();
    const Index P = theta.size();
    auto se = [&](Index k) { return k < res.std_errors.size() ? res.std_errors(k) : std::nan(""); };

    {
        std::ostringstream s;
        write_csv_row(s, {"parameter", "estimate", "std_error", "z"});
        for (Index k = 0; k < P; ++k) {
            write_csv_row(s, {layout.slot(k).name, format_double(theta(k)), format_double(se(k)),
                              format_double(theta(k) / se(k))});
        }
        write_file(dir / "estimates.csv", s.str());
    }
    {
        std::ostringstream s;
        write_csv_row(s, {"response_a", "response_b", "estimate", "std_error"});
        const Index R = problem.n_responses();
        for (Index a = 0; a < R; ++a) {
            for (Index b = 0; b < R; ++b) {
                double est = a == b ? 1.0 : res.Sb(a, b);
                double err = std::nan("");
                if (a != b && !problem.model().fixed_rho) {
                    const Index col = std::min(a, b), row = std::max(a, b);
                    for (Index i = 0; i < layout.n_rho_free(); ++i) {
                        if (rho_position(i, R) == std::pair<Index, Index>{row, col}) err = se(layout.K() + i);
                    }
                }
                write_csv_row(s, {problem.response(a).name, problem.response(b).name, format_double(est),
                                  format_double(err)});
            }
        }
        write_file(dir / "sigma_b.csv", s.str());
    }
    {
        std::ostringstream s;
        write_csv_row(s, {"row", "response", "observed", "fitted"});
        for (Index r = 0; r < problem.n_responses(); ++r) {
            const auto& y = problem.data().y[static_cast<std::size_t>(r)];
            const auto& mu = res.fitted[static_cast<std::size_t>(r)];
            for (Index i = 0; i < y.size(); ++i) {
                write_csv_row(s, {std::to_string(i + 1), problem.response(r).name, format_double(y(i)),
                                  format_double(mu(i))});
            }
        }
        write_file(dir / "fitted.csv", s.str());
    }
    {
        std::ostringstream s;
        std::vector<std::string> head{"iteration", "score_norm", "step_norm", "alpha"};
        for (Index k = 0; k < P; ++k) head.push_back(layout.slot(k).name);
        write_csv_row(s, head);
        for (const auto& t : res.trace) {
            std::vector<std::string> row{std::to_string(t.iteration), format_double(t.score_norm),
                                         format_double(t.step_norm), format_double(t.alpha)};
            for (Index k = 0; k < t.theta.size(); ++k) row.push_back(format_double(t.theta(k)));
            write_csv_row(s, row);
        }
        write_file(dir / "trace.csv", s.str());
    }
    {
        json doc;
        doc["status"] = std::string(to_string(res.status));
        doc["converged"] = res.converged;
        doc["message"] = res.message;
        doc["algorithm"] = std::string(to_string(opts.algorithm));
        doc["iterations"] = res.iterations;
        doc["n_alpha_escalations"] = res.n_alpha_escalations;
        doc["n_units"] = problem.n_units();
        doc["n_observed"] = static_cast<Index>(problem.observed().size());
        doc["data"] = spec.data_path.filename().string();
        json params = json::array();
        for (Index k = 0; k < P; ++k) {
            const auto& slot = layout.slot(k);
            json p;
            p["name"] = slot.name;
            p["role"] = role_name(slot.role);
            p["response"] = problem.response(slot.response).name;
            p["estimate"] = theta(k);
            p["std_error"] = std::isfinite(se(k)) ? json(se(k)) : json(nullptr);
            p["z"] = std::isfinite(theta(k) / se(k)) ? json(theta(k) / se(k)) : json(nullptr);
            params.push_back(p);
        }
        doc["parameters"] = params;
        doc["sigma_b"] = to_json(res.Sb);
        doc["vcov"] = to_json(res.godambe.J_inv);
        doc["score"] = {{"beta", to_json(res.score_beta)}, {"lambda", to_json(res.score_lambda)}};
        write_file(dir / "result.json", doc.dump(2) + "\n");
    }
}

void print_estimates(std::ostream& out, const FitResult& res) {
    const VectorXd theta = res.theta_hat.flat();
    std::size_t w = 9;
    for (Index k = 0; k < theta.size(); ++k) w = std::max(w, res.layout.slot(k).name.size());
    out << std::left << std::setw(static_cast<int>(w)) << "parameter" << std::right << "      estimate     std.error"
        << "          z\n";
    for (Index k = 0; k < theta.size(); ++k) {
        const double se = k < res.std_errors.size() ? res.std_errors(k) : std::nan("");
        out << std::left << std::setw(static_cast<int>(w)) << res.layout.slot(k).name << std::right
            << fixed(theta(k), 14, 6) << fixed(se, 14, 6) << fixed(theta(k) / se, 11, 3) << '\n';
    }
}

Problem make_problem(const LoadedSpec& spec) { return Problem(spec.model, spec.data); }

// Input-error wrapper shared by all commands.
template <typename Body>
int guarded(std::ostream& err, Body body) {
    try {
        return body();
    } catch (const InvalidInput& e) {
        err << "error: " << e.what() << '\n';
        return exit_code::input_error;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code::input_error;
    }
}

// dC as a function of one flat theta coordinate, for finite differences.
MatrixXd assembled_C(const Problem& problem, const VectorXd& flat) {
    const ThetaPartition t = ThetaPartition::from_flat(flat, problem.layout().K());
    return assemble_covariance(problem, t, evaluate_mean(problem, t.beta), false).C;
}

ThetaPartition random_probe(const Problem& problem, const ThetaPartition& base, std::mt19937_64& rng) {
    const auto& layout = problem.layout();
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    ThetaPartition t = base;
    for (Index j = 0; j < layout.K(); ++j) t.beta(j) += 0.05 * normal(rng);
    const double rho_scale = 0.4 / std::max<Index>(1, problem.n_responses() - 1);
    for (Index i = 0; i < layout.Q(); ++i) {
        const auto& slot = layout.lambda_slots()[static_cast<std::size_t>(i)];
        switch (slot.role) {
            case ParamRole::rho:
                t.lambda(i) = rho_scale * (2.0 * unit(rng) - 1.0);
                break;
            case ParamRole::power:
                t.lambda(i) += 0.5 * unit(rng) - 0.25;
                break;
            case ParamRole::tau: {
                const double lead = base.lambda(layout.tau_offset(slot.response));
                if (slot.component == 0) {
                    t.lambda(i) = lead * (0.8 + 0.45 * unit(rng));
                } else {
                    t.lambda(i) = 0.1 * lead * (2.0 * unit(rng) - 1.0);
                }
                break;
            }
            case ParamRole::beta:
                break;
        }
    }
    return t;
}

}  // namespace

std::vector<FamilyError> derivative_errors(const Problem& problem, const ThetaPartition& theta,
                                           const std::optional<std::string>& corrupt_family) {
    const auto& layout = problem.layout();
    const MeanEvaluation mean = evaluate_mean(problem, theta.beta);
    const JointCovariance jc = assemble_covariance(problem, theta, mean, false);
    const double c_scale = jc.C.cwiseAbs().maxCoeff();
    const VectorXd flat = theta.flat();

    std::vector<FamilyError> fams{{"rho", 0, 0.0, ""}, {"power", 0, 0.0, ""}, {"tau", 0, 0.0, ""}, {"beta", 0, 0.0, ""}};
    auto family_of = [&](ParamRole r) -> FamilyError& {
        switch (r) {
            case ParamRole::rho: return fams[0];
            case ParamRole::power: return fams[1];
            case ParamRole::tau: return fams[2];
            case ParamRole::beta: break;
        }
        return fams[3];
    };

    const Index P = flat.size();
    std::vector<double> errors(static_cast<std::size_t>(P));
    parallel_for(P, [&](Index k) {
        const auto& slot = layout.slot(k);
        MatrixXd analytic = k < layout.K() ? dC_dbeta(problem, theta, mean, jc, k)
                                           : dC_dlambda(problem, theta, mean, jc, k - layout.K());
        if (analytic.size() == 0) analytic = MatrixXd::Zero(jc.C.rows(), jc.C.cols());
        if (corrupt_family && *corrupt_family == role_name(slot.role)) analytic *= 1.0 + 1e-3;
        const double h = 1e-4 * std::max(1.0, std::abs(flat(k)));
        auto at = [&](double step) {
            VectorXd f = flat;
            f(k) += step;
            return assembled_C(problem, f);
        };
        const MatrixXd fd = (at(-2 * h) - 8.0 * at(-h) + 8.0 * at(h) - at(2 * h)) / (12.0 * h);
        const double denom = std::max(fd.cwiseAbs().maxCoeff(), analytic.cwiseAbs().maxCoeff());
        const double diff = (analytic - fd).cwiseAbs().maxCoeff();
        errors[static_cast<std::size_t>(k)] = denom <= 1e-10 * c_scale ? diff / std::max(c_scale, 1e-300) : diff / denom;
    });
    for (Index k = 0; k < P; ++k) {
        FamilyError& fam = family_of(layout.slot(k).role);
        ++fam.count;
        if (errors[static_cast<std::size_t>(k)] >= fam.worst) {
            fam.worst = errors[static_cast<std::size_t>(k)];
            fam.worst_parameter = layout.slot(k).name;
        }
    }
    return fams;
}

int cmd_fit(const FitArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&]() {
        set_thread_count(args.threads);
        const LoadedSpec spec = load_spec(args.spec, args.data);
        const Problem problem = make_problem(spec);
        SolverOptions opts = spec.solver;
        if (args.max_iter) opts.max_iter = *args.max_iter;
        if (args.algorithm) opts.algorithm = *args.algorithm;
        opts.validate();
        const FitResult res = fit(problem, opts);
        write_fit_outputs(args.out, problem, spec, res, opts);
        print_estimates(out, res);
        out << "status: " << to_string(res.status) << " after " << res.iterations << " iterations";
        if (res.n_alpha_escalations > 0) out << " (" << res.n_alpha_escalations << " alpha escalations)";
        out << '\n';
        if (!res.converged) {
            err << "fit did not converge: " << res.message << '\n';
            return exit_code::not_converged;
        }
        if (!res.message.empty()) err << "warning: " << res.message << '\n';
        return exit_code::ok;
    });
}

int cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&]() {
        set_thread_count(args.threads);
        if (args.n < 1) throw InvalidInput("--n must be at least 1");
        LoadedSpec spec = load_spec(args.spec, args.data);
        for (auto& y : spec.data.y) y.setZero();  // outcomes are regenerated
        const Problem problem = make_problem(spec);
        SimSpec sim{read_theta_file(args.theta, problem.layout()), args.n, args.seed};
        std::vector<VectorXd> reps;
        try {
            reps = simulate_gaussian(problem, sim);
        } catch (const FactorizationError& e) {
            err << "error: " << e.what() << '\n';
            return exit_code::not_positive_definite;
        }
        fs::create_directories(args.out);
        const int width = std::max<int>(4, static_cast<int>(std::to_string(args.n).size()));
        const Index N = problem.n_units();
        for (Index i = 0; i < args.n; ++i) {
            CsvTable t = spec.table;
            for (Index r = 0; r < problem.n_responses(); ++r) {
                const std::size_t col = *t.find_column(spec.response_columns[static_cast<std::size_t>(r)]);
                for (Index u = 0; u < N; ++u) {
                    t.rows[static_cast<std::size_t>(u)][col] = format_double(reps[static_cast<std::size_t>(i)](r * N + u));
                }
            }
            std::ostringstream name;
            name << "replicate_" << std::setw(width) << std::setfill('0') << (i + 1) << ".csv";
            std::ostringstream s;
            write_csv(s, t);
            write_file(args.out / name.str(), s.str());
        }
        out << "wrote " << args.n << " replicate(s) to " << args.out.string() << '\n';
        return exit_code::ok;
    });
}

int cmd_check_derivatives(const CheckArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&]() {
        set_thread_count(args.threads);
        if (args.corrupt_family) {
            const auto& f = *args.corrupt_family;
            if (f != "rho" && f != "power" && f != "tau" && f != "beta") {
                throw InvalidInput("unknown derivative family '" + f + "'");
            }
        }
        const LoadedSpec spec = load_spec(args.spec, args.data);
        const Problem problem = make_problem(spec);
        ThetaPartition base;
        try {
            base = initialize(problem);
        } catch (const InvalidInput&) {
            const auto& layout = problem.layout();
            base = {VectorXd::Zero(layout.K()), VectorXd::Zero(layout.Q())};
            for (Index r = 0; r < problem.n_responses(); ++r) {
                base.lambda(layout.tau_offset(r)) = 1.0;
                if (layout.power_index(r) >= 0) base.lambda(layout.power_index(r)) = 1.5;
            }
        }
        std::mt19937_64 rng(args.seed);
        std::optional<ThetaPartition> probe;
        for (int attempt = 0; attempt < kMaxRedraws && !probe; ++attempt) {
            ThetaPartition t = random_probe(problem, base, rng);
            try {
                (void)assemble_covariance(problem, t, evaluate_mean(problem, t.beta), false);
                probe = t;
            } catch (const FactorizationError&) {
            } catch (const InvalidInput&) {
            }
        }
        if (!probe) {
            err << "error: no positive-definite probe point after " << kMaxRedraws << " draws\n";
            return exit_code::not_positive_definite;
        }
        const auto fams = derivative_errors(problem, *probe, args.corrupt_family);
        out << "family  count  worst_relative_error  worst_parameter\n";
        std::string failed;
        for (const auto& f : fams) {
            char buf[160];
            if (f.count == 0) {
                std::snprintf(buf, sizeof buf, "%-6s  %5d  %20s  %s\n", f.family.c_str(), 0, "n/a", "-");
            } else {
                std::snprintf(buf, sizeof buf, "%-6s  %5ld  %20.3e  %s\n", f.family.c_str(), static_cast<long>(f.count),
                              f.worst, f.worst_parameter.c_str());
                if (!(f.worst < kDerivativeTolerance) && failed.empty()) failed = f.family;
            }
            out << buf;
        }
        if (!failed.empty()) {
            err << "derivative family '" << failed << "' disagrees with finite differences\n";
            return exit_code::derivative_mismatch;
        }
        out << "all derivatives agree within " << kDerivativeTolerance << '\n';
        return exit_code::ok;
    });
}

int cmd_build_matrices(const BuildArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&]() {
        const LoadedSpec spec = load_spec(args.spec, args.data);
        fs::create_directories(args.out);
        for (const auto& resp : spec.model.responses) {
            for (Index d = 0; d < resp.predictor.size(); ++d) {
                std::ostringstream s;
                write_coordinate_list(s, resp.predictor[d]);
                const fs::path path = args.out / (resp.name + "_Z" + std::to_string(d) + ".txt");
                write_file(path, s.str());
                out << path.string() << '\n';
            }
        }
        return exit_code::ok;
    });
}

}  // namespace mcglm
