#include "delayctl/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "delayctl/json_io.hpp"
#include "delayctl/numerics.hpp"

namespace delayctl {

namespace {

using nlohmann::json;

struct CommonArgs {
    std::string spec_path;
    std::string out_path;
    std::string cert_path;
    std::string format = "json";
    std::string trajectories_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> trials;
    std::optional<int> horizon;
    std::optional<double> tol_fp;
    std::optional<int> max_iter;
    int d_cap = 64;
    int decay_window = 30;
    double decay_ratio = 0.05;
    bool trace = false;
    bool quiet = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--spec", args.spec_path, "problem document (JSON)")->required();
    cmd->add_option("--out", args.out_path, "write the payload to a file instead of stdout");
    cmd->add_option("--seed", args.seed, "override the document seed");
    cmd->add_option("--trials", args.trials, "override the trial count");
    cmd->add_option("--horizon", args.horizon, "override the horizon");
    cmd->add_option("--tol-fp", args.tol_fp, "fixed-point stopping tolerance");
    cmd->add_option("--max-iter", args.max_iter, "iteration cap for Riccati solves");
    cmd->add_option("--format", args.format, "payload format: json or csv")
        ->check(CLI::IsMember({"json", "csv"}));
    cmd->add_flag("--quiet", args.quiet, "suppress progress diagnostics");
}

ProblemSpec load_with_overrides(const CommonArgs& args) {
    ProblemSpec spec = load_spec_file(args.spec_path);
    if (args.seed) {
        spec.seed = *args.seed;
    }
    if (args.trials) {
        spec.trials = *args.trials;
    }
    if (args.horizon) {
        spec.horizon = *args.horizon;
    }
    if (args.tol_fp) {
        spec.tol.fp_rel = *args.tol_fp;
    }
    if (args.max_iter) {
        spec.tol.max_iter = *args.max_iter;
    }
    if (!spec.tol.valid()) {
        throw SchemaError("tolerances must be strictly positive with max_iter >= 1");
    }
    return spec;
}

void emit(const CommonArgs& args, std::ostream& out, const std::string& payload) {
    if (!args.out_path.empty()) {
        std::ofstream file(args.out_path);
        if (!file) {
            throw Error("cannot write " + args.out_path);
        }
        file << payload << '\n';
    } else {
        out << payload << '\n';
    }
}

int finish(const CommonArgs& args, std::ostream& out, const ToleranceSet& tol, json result,
           const char* status, int exit_code) {
    json envelope{{"schema", kSchemaVersion}, {"status", status}, {"tolerances", to_json(tol)}};
    envelope["result"] = std::move(result);
    emit(args, out, envelope.dump(2));
    return exit_code;
}

/// Validates the multi-delay form when present; restricted-only documents
/// check their own dimension constraints during load.
void require_valid(const ProblemSpec& spec) {
    if (!spec.system) {
        return;
    }
    const ValidationReport report = validate_system(*spec.system, spec.tol);
    if (!report.ok()) {
        std::ostringstream msg;
        msg << "system fails validation:";
        for (const ValidationIssue& issue : report.issues) {
            msg << " [" << issue.message;
            if (issue.index >= 0) {
                msg << " @" << issue.index;
            }
            msg << "]";
        }
        throw SchemaError(msg.str());
    }
}

FeedbackLaw law_for(const ProblemSpec& spec, const CommonArgs& args, bool* synthesized) {
    const std::optional<LawDocument> doc = [&]() -> std::optional<LawDocument> {
        std::ifstream in(args.spec_path);
        std::ostringstream buffer;
        buffer << in.rdbuf();
        return law_from_document(buffer.str());
    }();
    if (doc) {
        *synthesized = false;
        if (doc->direct) {
            return *doc->direct;
        }
        return realize_controller(spec.mds(), *doc->aux);
    }
    *synthesized = true;
    const DdareResult solve = spec.restricted
                                  ? solve_ddare(*spec.restricted, spec.Q, spec.R, spec.tol)
                                  : solve_ddare(spec.mds(), spec.Q, spec.R, spec.tol);
    if (!solve.converged()) {
        throw Error("no controller in the document and the Riccati solve did not converge");
    }
    return spec.restricted ? synthesize_gain(*spec.restricted, *solve.solution)
                           : synthesize_gain(spec.mds(), *solve.solution);
}

int cmd_validate(const CommonArgs& args, std::ostream& out) {
    const ProblemSpec spec = load_with_overrides(args);
    if (!spec.system) {
        return finish(args, out, spec.tol,
                      json{{"report", json{{"ok", true}, {"issues", json::array()}}},
                           {"note", "restricted-only document; load-time checks passed"}},
                      "ok", kExitOk);
    }
    const ValidationReport report = validate_system(*spec.system, spec.tol);
    return finish(args, out, spec.tol, json{{"report", to_json(report)}},
                  report.ok() ? "ok" : "invalid_input",
                  report.ok() ? kExitOk : kExitInvalidInput);
}

int cmd_reduce(const CommonArgs& args, std::ostream& out) {
    const ProblemSpec spec = load_with_overrides(args);
    require_valid(spec);
    const MultiDelaySystem& sys = spec.mds();
    const Matrix L = input_matrix_L(sys);
    const Matrix H = input_matrix_H(sys, spec.tol.inv_tol);
    const Matrix AD = mat_pow_signed(sys.A, sys.D, spec.tol.inv_tol);
    json coeffs = json::array();
    for (const Matrix& c : predictor_coefficients(sys, spec.tol.inv_tol)) {
        coeffs.push_back(matrix_to_json(c));
    }
    json result{{"L", matrix_to_json(L)},
                {"H", matrix_to_json(H)},
                {"predictor_coefficients", std::move(coeffs)},
                {"identity_residual", (L - AD * H).norm()}};
    return finish(args, out, spec.tol, std::move(result), "ok", kExitOk);
}

int cmd_solve_ddare(const CommonArgs& args, std::ostream& out) {
    const ProblemSpec spec = load_with_overrides(args);
    require_valid(spec);
    DdareOptions options;
    options.record_trace = args.trace;
    const DdareResult result = spec.restricted
                                   ? solve_ddare(*spec.restricted, spec.Q, spec.R, spec.tol, options)
                                   : solve_ddare(spec.mds(), spec.Q, spec.R, spec.tol, options);
    return finish(args, out, spec.tol, json{{"ddare", to_json(result)}},
                  result.converged() ? "ok" : "not_stabilizable",
                  result.converged() ? kExitOk : kExitNotStabilizable);
}

int cmd_synthesize(const CommonArgs& args, std::ostream& out) {
    const ProblemSpec spec = load_with_overrides(args);
    require_valid(spec);
    const DdareResult result = spec.restricted
                                   ? solve_ddare(*spec.restricted, spec.Q, spec.R, spec.tol)
                                   : solve_ddare(spec.mds(), spec.Q, spec.R, spec.tol);
    if (!result.converged()) {
        return finish(args, out, spec.tol, json{{"ddare", to_json(result)}}, "not_stabilizable",
                      kExitNotStabilizable);
    }
    const FeedbackLaw law = spec.restricted ? synthesize_gain(*spec.restricted, *result.solution)
                                            : synthesize_gain(spec.mds(), *result.solution);
    json payload{{"ddare", to_json(result)}, {"law", to_json(law)}};
    if (spec.system) {
        const Index aug = spec.system->n + spec.system->D * spec.system->m;
        if (aug <= 64) {
            payload["moment_check"] = to_json(exact_ms_check(*spec.system, law));
        }
    }
    return finish(args, out, spec.tol, std::move(payload), "ok", kExitOk);
}

int cmd_certify(const CommonArgs& args, std::ostream& out) {
    const ProblemSpec spec = load_with_overrides(args);
    require_valid(spec);
    const MultiDelaySystem& sys = spec.mds();
    const DdareResult result = solve_ddare(sys, spec.Q, spec.R, spec.tol);
    if (!result.converged()) {
        return finish(args, out, spec.tol, json{{"ddare", to_json(result)}}, "not_stabilizable",
                      kExitNotStabilizable);
    }
    const StabilizationCertificate cert =
        certificate_from_ddare(sys, spec.Q, spec.R, *result.solution);
    const VerificationReport verification = verify_certificate(sys, cert, spec.tol);
    json payload{{"certificate", to_json(cert)},
                 {"verification", to_json(verification)},
                 {"iterations", result.iterations}};
    return finish(args, out, spec.tol, std::move(payload), "ok", kExitOk);
}

StabilizationCertificate certificate_from_document(const json& doc, const ProblemSpec& spec) {
    if (doc.contains("certificate")) {
        return certificate_from_json(doc.at("certificate"));
    }
    if (doc.contains("result")) {
        return certificate_from_document(doc.at("result"), spec);
    }
    if (doc.contains("K") && doc.contains("P")) {
        return certificate_from_json(doc);
    }
    if (doc.contains("ddare") || doc.contains("solution") || doc.contains("Z")) {
        // A synthesize/solve payload: rebuild the certificate from Z.
        const json* sol = &doc;
        if (doc.contains("ddare")) {
            sol = &doc.at("ddare");
        }
        if (sol->contains("solution")) {
            sol = &sol->at("solution");
        }
        if (!sol->contains("Z")) {
            throw SchemaError("certificate document carries no Z matrix");
        }
        DdareSolution parsed;
        parsed.Z = matrix_from_json(sol->at("Z"), "Z");
        parsed.Psi = matrix_from_json(sol->at("Psi"), "Psi");
        parsed.U_RQ = matrix_from_json(sol->at("U_RQ"), "U_RQ");
        parsed.L = matrix_from_json(sol->at("L"), "L");
        return certificate_from_ddare(spec.mds(), spec.Q, spec.R, parsed);
    }
    throw SchemaError("certificate document must carry a certificate, (K, P), or a solution");
}

int cmd_verify_certificate(const CommonArgs& args, std::ostream& out) {
    const ProblemSpec spec = load_with_overrides(args);
    require_valid(spec);
    std::ifstream in(args.cert_path);
    if (!in) {
        throw ParseError("cannot open " + args.cert_path);
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(e.what());
    }
    const StabilizationCertificate cert = certificate_from_document(doc, spec);
    const VerificationReport verification = verify_certificate(spec.mds(), cert, spec.tol);
    return finish(args, out, spec.tol,
                  json{{"verification", to_json(verification)}, {"certificate", to_json(cert)}},
                  verification.valid ? "ok" : "not_stabilizable",
                  verification.valid ? kExitOk : kExitNotStabilizable);
}

int cmd_delay_margin(const CommonArgs& args, std::ostream& out) {
    const ProblemSpec spec = load_with_overrides(args);
    if (!spec.restricted) {
        throw SchemaError(
            "delay-margin needs a restricted system document ([A, C0; Bbar, Cbar]_D)");
    }
    // Near-margin probes converge slowly, so the per-delay oracle gets a
    // larger budget unless one was forced explicitly.
    ToleranceSet margin_tol = spec.tol;
    if (!args.max_iter) {
        margin_tol.max_iter = std::max(margin_tol.max_iter, 200'000);
    }
    json payload;
    DelayMarginResult margin;
    if (const auto subs = diagonal_subsystems(*spec.restricted)) {
        margin = diagonal_delay_margin(*subs);
        payload["method"] = "diagonal_closed_form";
    } else {
        MarginSearchOptions options;
        options.d_cap = args.d_cap;
        margin = general_delay_margin_search(*spec.restricted, spec.Q, spec.R, options, margin_tol);
        payload["method"] = "ddare_scan";
        payload["d_cap"] = args.d_cap;
    }
    payload["margin"] = to_json(margin);
    return finish(args, out, spec.tol, std::move(payload), "ok", kExitOk);
}

int cmd_simulate(const CommonArgs& args, std::ostream& out) {
    const ProblemSpec spec = load_with_overrides(args);
    require_valid(spec);
    bool synthesized = false;
    const FeedbackLaw law = law_for(spec, args, &synthesized);
    SimulationOptions options;
    options.record_states = !args.trajectories_path.empty();
    const SimulationResult result = simulate_closed_loop(spec, law, options);

    if (args.format == "csv") {
        std::ostringstream csv;
        csv << "t,ms,input_ms\n";
        for (std::size_t t = 0; t < result.ms.size(); ++t) {
            csv << t << ',' << result.ms[t] << ',' << result.input_ms[t] << '\n';
        }
        emit(args, out, csv.str());
        return kExitOk;
    }
    if (!args.trajectories_path.empty()) {
        std::ofstream file(args.trajectories_path);
        if (!file) {
            throw Error("cannot write " + args.trajectories_path);
        }
        file << "trial,t";
        const Index n = result.states.empty() ? 0 : result.states.front().rows();
        for (Index i = 1; i <= n; ++i) {
            file << ",x_" << i;
        }
        file << '\n';
        for (std::size_t trial = 0; trial < result.states.size(); ++trial) {
            const Matrix& traj = result.states[trial];
            for (Index t = 0; t < traj.cols(); ++t) {
                file << trial << ',' << t;
                for (Index i = 0; i < traj.rows(); ++i) {
                    file << ',' << traj(i, t);
                }
                file << '\n';
            }
        }
    }
    const int window =
        std::min(args.decay_window, static_cast<int>(result.ms.size()) - 1);
    const DecayReport decay = check_ms_decay(result.ms, std::max(1, window), args.decay_ratio);
    json payload{{"simulation", to_json(result)},
                 {"decay", to_json(decay)},
                 {"law", to_json(law)},
                 {"law_synthesized", synthesized}};
    return finish(args, out, spec.tol, std::move(payload), "ok", kExitOk);
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{
        "Synthesis, certification, delay margins, and Monte Carlo verification for "
        "discrete-time stochastic systems with input delays and multiplicative "
        "control-dependent noises"};
    app.require_subcommand(1);

    CommonArgs args;
    auto* validate = app.add_subcommand("validate", "check a problem document");
    auto* reduce = app.add_subcommand("reduce", "aggregate input matrices and predictor data");
    auto* solve = app.add_subcommand("solve-ddare", "solve the Riccati fixed point");
    auto* synthesize = app.add_subcommand("synthesize", "solve and emit the stabilizing law");
    auto* certify = app.add_subcommand("certify", "emit a Lyapunov/LMI certificate");
    auto* verify = app.add_subcommand("verify-certificate", "re-check an existing certificate");
    auto* margin = app.add_subcommand("delay-margin", "largest stabilizable delay");
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo of the closed loop");
    for (CLI::App* cmd : {validate, reduce, solve, synthesize, certify, verify, margin, simulate}) {
        add_common(cmd, args);
    }
    solve->add_flag("--trace", args.trace, "record iterate norms and the monotonicity audit");
    verify->add_option("--cert", args.cert_path, "certificate or solver payload (JSON)")
        ->required();
    margin->add_option("--d-cap", args.d_cap, "largest delay probed by the scan");
    simulate->add_option("--decay-window", args.decay_window, "tail window for the verdict");
    simulate->add_option("--decay-ratio", args.decay_ratio, "tail/global ratio for the verdict");
    simulate->add_option("--trajectories", args.trajectories_path,
                         "write per-trial states as CSV to this path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            return app.exit(e, out, err);
        }
        err << e.what() << '\n';
        out << json{{"schema", kSchemaVersion},
                    {"status", "invalid_input"},
                    {"error", e.what()}}
                   .dump()
            << '\n';
        return kExitInvalidInput;
    }

    try {
        if (*validate) {
            return cmd_validate(args, out);
        }
        if (*reduce) {
            return cmd_reduce(args, out);
        }
        if (*solve) {
            return cmd_solve_ddare(args, out);
        }
        if (*synthesize) {
            return cmd_synthesize(args, out);
        }
        if (*certify) {
            return cmd_certify(args, out);
        }
        if (*verify) {
            return cmd_verify_certificate(args, out);
        }
        if (*margin) {
            return cmd_delay_margin(args, out);
        }
        if (*simulate) {
            return cmd_simulate(args, out);
        }
        err << "no subcommand selected\n";
        return kExitInvalidInput;
    } catch (const NumericalFailure& e) {
        out << json{{"schema", kSchemaVersion}, {"status", "numerical_failure"}, {"error", e.what()}}
                   .dump()
            << '\n';
        if (!args.quiet) {
            err << "numerical failure: " << e.what() << '\n';
        }
        return kExitNumericalFailure;
    } catch (const std::exception& e) {
        out << json{{"schema", kSchemaVersion}, {"status", "invalid_input"}, {"error", e.what()}}
                   .dump()
            << '\n';
        if (!args.quiet) {
            err << "error: " << e.what() << '\n';
        }
        return kExitInvalidInput;
    }
}

}  // namespace delayctl
