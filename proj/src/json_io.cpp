#include "delayctl/json_io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace delayctl {

using nlohmann::json;

namespace {

[[noreturn]] void schema_error(const std::string& field, const std::string& what) {
    throw SchemaError(field + " " + what);
}

/// Looks up `key`; `path` (defaulting to the key) names the field in errors.
const json& require(const json& j, const std::string& key, const std::string& path = {}) {
    if (!j.contains(key)) {
        schema_error(path.empty() ? key : path, "is required");
    }
    return j.at(key);
}

double number_from(const json& j, const std::string& field) {
    if (!j.is_number()) {
        schema_error(field, "must be a number");
    }
    return j.get<double>();
}

int int_from(const json& j, const std::string& field) {
    if (!j.is_number_integer()) {
        schema_error(field, "must be an integer");
    }
    return j.get<int>();
}

std::vector<Matrix> matrix_list_from(const json& j, const std::string& field) {
    if (!j.is_array()) {
        schema_error(field, "must be an array of matrices");
    }
    std::vector<Matrix> out;
    out.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        out.push_back(matrix_from_json(j[i], field + "[" + std::to_string(i) + "]"));
    }
    return out;
}

NoiseModel noise_model_from(const json& j) {
    if (!j.is_string()) {
        schema_error("noise_model", "must be a string");
    }
    const std::string name = j.get<std::string>();
    if (name == "gaussian") {
        return NoiseModel::gaussian;
    }
    if (name == "two_point") {
        return NoiseModel::two_point;
    }
    if (name == "bernoulli_loss") {
        return NoiseModel::bernoulli_loss;
    }
    schema_error("noise_model", "must be gaussian, two_point, or bernoulli_loss");
}

}  // namespace

json matrix_to_json(const Matrix& M) {
    json rows = json::array();
    for (Index i = 0; i < M.rows(); ++i) {
        json row = json::array();
        for (Index j = 0; j < M.cols(); ++j) {
            row.push_back(M(i, j));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

json vector_to_json(const Vector& v) {
    json out = json::array();
    for (Index i = 0; i < v.size(); ++i) {
        out.push_back(v(i));
    }
    return out;
}

Matrix matrix_from_json(const json& j, const std::string& field) {
    if (!j.is_array() || j.empty()) {
        schema_error(field, "must be a non-empty row-major nested array");
    }
    // A flat numeric array is accepted as a single-column matrix.
    if (j[0].is_number()) {
        Matrix M(static_cast<Index>(j.size()), 1);
        for (std::size_t i = 0; i < j.size(); ++i) {
            M(static_cast<Index>(i), 0) = number_from(j[i], field);
        }
        return M;
    }
    const std::size_t cols = j[0].size();
    Matrix M(static_cast<Index>(j.size()), static_cast<Index>(cols));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_array() || j[i].size() != cols) {
            schema_error(field, "rows must be arrays of equal length");
        }
        for (std::size_t k = 0; k < cols; ++k) {
            M(static_cast<Index>(i), static_cast<Index>(k)) = number_from(j[i][k], field);
        }
    }
    return M;
}

Vector vector_from_json(const json& j, const std::string& field) {
    if (!j.is_array()) {
        schema_error(field, "must be an array of numbers");
    }
    Vector v(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        v(static_cast<Index>(i)) = number_from(j[i], field);
    }
    return v;
}

json to_json(const ToleranceSet& tol) {
    return json{{"fp_rel", tol.fp_rel},
                {"pd_tol", tol.pd_tol},
                {"inv_tol", tol.inv_tol},
                {"div_norm", tol.div_norm},
                {"max_iter", tol.max_iter}};
}

ToleranceSet tolerances_from_json(const json& j) {
    ToleranceSet tol;
    if (!j.is_object()) {
        schema_error("tolerances", "must be an object");
    }
    if (j.contains("fp_rel")) {
        tol.fp_rel = number_from(j.at("fp_rel"), "tolerances.fp_rel");
    }
    if (j.contains("pd_tol")) {
        tol.pd_tol = number_from(j.at("pd_tol"), "tolerances.pd_tol");
    }
    if (j.contains("inv_tol")) {
        tol.inv_tol = number_from(j.at("inv_tol"), "tolerances.inv_tol");
    }
    if (j.contains("div_norm")) {
        tol.div_norm = number_from(j.at("div_norm"), "tolerances.div_norm");
    }
    if (j.contains("max_iter")) {
        tol.max_iter = int_from(j.at("max_iter"), "tolerances.max_iter");
    }
    if (!tol.valid()) {
        schema_error("tolerances", "must be strictly positive with max_iter >= 1");
    }
    return tol;
}

ProblemSpec load_spec(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(e.what());
    }
    if (!doc.is_object()) {
        schema_error("document", "must be a JSON object");
    }
    if (doc.contains("schema") && doc.at("schema") != kSchemaVersion) {
        schema_error("schema", "must be \"v1\"");
    }

    ProblemSpec spec;
    const Matrix A = matrix_from_json(require(doc, "A"), "A");
    if (A.rows() != A.cols()) {
        schema_error("A", "must be square");
    }
    const Index n = A.rows();

    const bool has_plain = doc.contains("B") || doc.contains("C") || doc.contains("sigma2");
    const bool has_wncs = doc.contains("wncs");
    const bool has_restricted = doc.contains("restricted");
    if (has_plain + has_wncs + has_restricted != 1) {
        schema_error("document",
                     "must carry exactly one of B/C/sigma2, wncs, or restricted");
    }

    if (has_plain) {
        MultiDelaySystem sys;
        sys.A = A;
        sys.B = matrix_list_from(require(doc, "B"), "B");
        sys.C = matrix_list_from(require(doc, "C"), "C");
        const json& s2 = require(doc, "sigma2");
        if (!s2.is_array()) {
            schema_error("sigma2", "must be an array of numbers");
        }
        for (std::size_t i = 0; i < s2.size(); ++i) {
            sys.sigma2.push_back(number_from(s2[i], "sigma2"));
        }
        if (sys.B.empty()) {
            schema_error("B", "must list D+1 matrices");
        }
        sys.n = n;
        sys.m = sys.B.front().cols();
        sys.D = static_cast<int>(sys.B.size()) - 1;
        if (doc.contains("D") && int_from(doc.at("D"), "D") != sys.D) {
            schema_error("B", "length must be D+1");
        }
        if (sys.C.size() != sys.B.size()) {
            schema_error("C", "length must be D+1");
        }
        if (sys.sigma2.size() != sys.B.size()) {
            schema_error("sigma2", "length must be D+1");
        }
        spec.system = std::move(sys);
    } else if (has_wncs) {
        const json& w = doc.at("wncs");
        WncsDescription desc;
        desc.A = A;
        desc.Bplant = matrix_from_json(require(w, "Bplant", "wncs.Bplant"), "wncs.Bplant");
        const json& paths = require(w, "paths", "wncs.paths");
        if (!paths.is_array()) {
            schema_error("wncs.paths", "must be an array");
        }
        for (const json& p : paths) {
            desc.paths.push_back({int_from(require(p, "delay", "wncs.paths[].delay"), "wncs.paths[].delay"),
                                  number_from(require(p, "loss_prob", "wncs.paths[].loss_prob"),
                                              "wncs.paths[].loss_prob")});
        }
        spec.system = wncs_to_model(desc);
        std::vector<double> loss(static_cast<std::size_t>(spec.system->D) + 1, -1.0);
        for (const WncsPath& p : desc.paths) {
            loss[static_cast<std::size_t>(p.delay)] = p.loss_prob;
        }
        spec.loss_prob = std::move(loss);
        spec.noise_model = NoiseModel::bernoulli_loss;
    } else {
        const json& r = doc.at("restricted");
        RestrictedSystem sys;
        sys.A = A;
        sys.C0 = matrix_from_json(require(r, "C0", "restricted.C0"), "restricted.C0");
        sys.Bbar = matrix_from_json(require(r, "Bbar", "restricted.Bbar"), "restricted.Bbar");
        sys.Cbar = matrix_from_json(require(r, "Cbar", "restricted.Cbar"), "restricted.Cbar");
        sys.sigma0_2 = number_from(require(r, "sigma0_2", "restricted.sigma0_2"), "restricted.sigma0_2");
        sys.sigmaD_2 = number_from(require(r, "sigmaD_2", "restricted.sigmaD_2"), "restricted.sigmaD_2");
        sys.D = int_from(require(doc, "D"), "D");
        spec.restricted = sys;
        try {
            spec.system = sys.to_multi_delay();
        } catch (const DuplicateDelay&) {
            // Not embeddable at D = 0 with two active channels; restricted
            // operations still apply.
        }
    }

    const Index m = spec.system ? spec.system->m : spec.restricted->m();
    const int D = spec.system ? spec.system->D : spec.restricted->D;
    if (doc.contains("n") && int_from(doc.at("n"), "n") != n) {
        schema_error("n", "does not match A");
    }
    if (doc.contains("m") && int_from(doc.at("m"), "m") != m) {
        schema_error("m", "does not match the input matrices");
    }

    spec.Q = doc.contains("Q") ? matrix_from_json(doc.at("Q"), "Q") : Matrix::Identity(n, n);
    spec.R = doc.contains("R") ? matrix_from_json(doc.at("R"), "R") : Matrix::Identity(m, m);
    spec.x0 = doc.contains("x0") ? vector_from_json(doc.at("x0"), "x0") : Vector::Ones(n);
    if (spec.x0.size() != n) {
        schema_error("x0", "must have n entries");
    }
    if (doc.contains("u_init")) {
        const json& u = doc.at("u_init");
        if (!u.is_array()) {
            schema_error("u_init", "must be an array of input vectors");
        }
        for (std::size_t i = 0; i < u.size(); ++i) {
            spec.u_init.push_back(vector_from_json(u[i], "u_init"));
            if (spec.u_init.back().size() != m) {
                schema_error("u_init", "entries must have m components");
            }
        }
        if (static_cast<int>(spec.u_init.size()) != D) {
            schema_error("u_init", "must list D input vectors");
        }
    } else {
        spec.u_init.assign(static_cast<std::size_t>(D), Vector::Zero(m));
    }
    if (doc.contains("horizon")) {
        spec.horizon = int_from(doc.at("horizon"), "horizon");
        if (spec.horizon <= 0) {
            schema_error("horizon", "must be positive");
        }
    }
    if (doc.contains("trials")) {
        spec.trials = int_from(doc.at("trials"), "trials");
        if (spec.trials <= 0) {
            schema_error("trials", "must be positive");
        }
    }
    if (doc.contains("seed")) {
        if (!doc.at("seed").is_number_integer() && !doc.at("seed").is_number_unsigned()) {
            schema_error("seed", "must be a 64-bit integer");
        }
        spec.seed = doc.at("seed").get<std::uint64_t>();
    }
    if (doc.contains("noise_model")) {
        spec.noise_model = noise_model_from(doc.at("noise_model"));
    }
    if (doc.contains("loss_prob")) {
        const json& lp = doc.at("loss_prob");
        if (!lp.is_array()) {
            schema_error("loss_prob", "must be an array of numbers");
        }
        std::vector<double> loss;
        for (std::size_t i = 0; i < lp.size(); ++i) {
            loss.push_back(number_from(lp[i], "loss_prob"));
        }
        spec.loss_prob = std::move(loss);
    }
    if (doc.contains("tolerances")) {
        spec.tol = tolerances_from_json(doc.at("tolerances"));
    }
    return spec;
}

ProblemSpec load_spec_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open " + path);
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return load_spec(buffer.str());
}

json serialize(const ProblemSpec& spec) {
    json doc;
    doc["schema"] = kSchemaVersion;
    if (spec.restricted) {
        const RestrictedSystem& r = *spec.restricted;
        doc["A"] = matrix_to_json(r.A);
        doc["D"] = r.D;
        doc["n"] = r.n();
        doc["m"] = r.m();
        doc["restricted"] = json{{"C0", matrix_to_json(r.C0)},
                                 {"Bbar", matrix_to_json(r.Bbar)},
                                 {"Cbar", matrix_to_json(r.Cbar)},
                                 {"sigma0_2", r.sigma0_2},
                                 {"sigmaD_2", r.sigmaD_2}};
    } else {
        const MultiDelaySystem& sys = spec.mds();
        doc["A"] = matrix_to_json(sys.A);
        doc["n"] = sys.n;
        doc["m"] = sys.m;
        doc["D"] = sys.D;
        json B = json::array();
        json C = json::array();
        for (std::size_t tau = 0; tau < sys.B.size(); ++tau) {
            B.push_back(matrix_to_json(sys.B[tau]));
            C.push_back(matrix_to_json(sys.C[tau]));
        }
        doc["B"] = std::move(B);
        doc["C"] = std::move(C);
        doc["sigma2"] = sys.sigma2;
    }
    doc["Q"] = matrix_to_json(spec.Q);
    doc["R"] = matrix_to_json(spec.R);
    doc["x0"] = vector_to_json(spec.x0);
    json u_init = json::array();
    for (const Vector& u : spec.u_init) {
        u_init.push_back(vector_to_json(u));
    }
    doc["u_init"] = std::move(u_init);
    doc["horizon"] = spec.horizon;
    doc["trials"] = spec.trials;
    doc["seed"] = spec.seed;
    doc["noise_model"] = to_string(spec.noise_model);
    if (spec.loss_prob) {
        doc["loss_prob"] = *spec.loss_prob;
    }
    doc["tolerances"] = to_json(spec.tol);
    return doc;
}

std::optional<LawDocument> law_from_document(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(e.what());
    }
    if (!doc.is_object() || !doc.contains("law")) {
        return std::nullopt;
    }
    const json& law = doc.at("law");
    LawDocument out;
    if (law.contains("K")) {
        FeedbackLaw direct;
        direct.K = matrix_list_from(law.at("K"), "law.K");
        if (direct.K.empty()) {
            schema_error("law.K", "must list D+1 gain matrices");
        }
        out.direct = std::move(direct);
    } else if (law.contains("L0")) {
        AuxGain aux;
        aux.L0 = matrix_from_json(law.at("L0"), "law.L0");
        if (law.contains("Ltau")) {
            aux.Ltau = matrix_list_from(law.at("Ltau"), "law.Ltau");
        }
        out.aux = std::move(aux);
    } else {
        schema_error("law", "must carry K or L0");
    }
    return out;
}

json to_json(const ValidationReport& report) {
    json issues = json::array();
    for (const ValidationIssue& issue : report.issues) {
        json item{{"message", issue.message}};
        if (issue.index >= 0) {
            item["index"] = issue.index;
        }
        issues.push_back(std::move(item));
    }
    return json{{"ok", report.ok()}, {"issues", std::move(issues)}};
}

json to_json(const FeedbackLaw& law) {
    json gains = json::array();
    for (const Matrix& K : law.K) {
        gains.push_back(matrix_to_json(K));
    }
    return json{{"K", std::move(gains)}};
}

json to_json(const DdareSolution& sol) {
    json out{{"Z", matrix_to_json(sol.Z)},
             {"Psi", matrix_to_json(sol.Psi)},
             {"U_RQ", matrix_to_json(sol.U_RQ)},
             {"L", matrix_to_json(sol.L)},
             {"iterations", sol.iterations},
             {"final_residual", sol.final_residual}};
    if (!sol.trace.empty()) {
        out["trace"] = sol.trace;
        out["monotonicity_violations"] = sol.monotonicity_violations;
    }
    return out;
}

json to_json(const DdareResult& result) {
    json out{{"status", to_string(result.status)},
             {"iterations", result.iterations},
             {"final_norm", result.final_norm}};
    if (result.solution) {
        out["solution"] = to_json(*result.solution);
    }
    return out;
}

json to_json(const StabilizationCertificate& cert) {
    return json{{"K", matrix_to_json(cert.K)},     {"P", matrix_to_json(cert.P)},
                {"S", matrix_to_json(cert.S)},     {"Y", matrix_to_json(cert.Y)},
                {"lmi_max_eig", cert.lmi_max_eig}, {"ddli_margin", cert.ddli_margin}};
}

StabilizationCertificate certificate_from_json(const json& j) {
    StabilizationCertificate cert;
    cert.K = matrix_from_json(require(j, "K"), "K");
    cert.P = matrix_from_json(require(j, "P"), "P");
    if (j.contains("S")) {
        cert.S = matrix_from_json(j.at("S"), "S");
    } else {
        cert.S = -cert.P.inverse();
    }
    if (j.contains("Y")) {
        cert.Y = matrix_from_json(j.at("Y"), "Y");
    } else {
        cert.Y = cert.K * cert.S;
    }
    if (j.contains("lmi_max_eig")) {
        cert.lmi_max_eig = number_from(j.at("lmi_max_eig"), "lmi_max_eig");
    }
    if (j.contains("ddli_margin")) {
        cert.ddli_margin = number_from(j.at("ddli_margin"), "ddli_margin");
    }
    return cert;
}

json to_json(const VerificationReport& report) {
    return json{{"valid", report.valid},
                {"ddli_margin", report.ddli_margin},
                {"lmi_max_eig", report.lmi_max_eig},
                {"rho", report.rho},
                {"reasons", report.reasons}};
}

json to_json(const MomentReport& report) {
    return json{{"rho", report.rho},
                {"augmented_dim", report.augmented_dim},
                {"stable", report.stable}};
}

json to_json(const DelayMarginResult& result) {
    json out;
    if (std::isinf(result.d_max_real)) {
        out["d_max_real"] = "infinity";
    } else {
        out["d_max_real"] = result.d_max_real;
    }
    if (result.int_margin_unbounded) {
        out["max_stable_int_delay"] = "unbounded";
    } else if (result.max_stable_int_delay) {
        out["max_stable_int_delay"] = *result.max_stable_int_delay;
    } else {
        out["max_stable_int_delay"] = "none";
    }
    if (result.binding_index) {
        out["binding_index"] = *result.binding_index;
    }
    json table = json::array();
    for (const PerDelayEntry& entry : result.per_delay_table) {
        table.push_back(json{{"D", entry.D}, {"stabilizable", entry.stabilizable}});
    }
    out["per_delay_table"] = std::move(table);
    out["cap_reached"] = result.cap_reached;
    out["monotonicity_anomaly"] = result.monotonicity_anomaly;
    return out;
}

json to_json(const SimulationResult& result) {
    return json{{"trials", result.trials},
                {"horizon", result.horizon},
                {"seed", result.seed},
                {"aborted_trials", result.aborted_trials},
                {"ms", result.ms},
                {"input_ms", result.input_ms}};
}

json to_json(const DecayReport& report) {
    return json{{"verdict", to_string(report.verdict)},
                {"tail_ratio", report.tail_ratio},
                {"fitted_rate", report.fitted_rate}};
}

}  // namespace delayctl
