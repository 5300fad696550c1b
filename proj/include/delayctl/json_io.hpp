#pragma once

// JSON problem documents (schema "v1") and machine-readable result payloads.
// Top-level keys: n, m, D, A, B, C, sigma2, Q?, R?, x0?, u_init?, horizon?,
// trials?, seed?, noise_model?, tolerances?, wncs?, restricted?, law?.
// Exactly one plant representation may appear: the B/C/sigma2 triple, a wncs
// block (Bplant + paths, converted on load), or a restricted block. Matrices
// are row-major nested arrays of doubles.

#include <json.hpp>

#include <optional>
#include <string>

#include "delayctl/ddare.hpp"
#include "delayctl/lyapunov.hpp"
#include "delayctl/margin.hpp"
#include "delayctl/model.hpp"
#include "delayctl/reduction.hpp"
#include "delayctl/sim.hpp"

namespace delayctl {

inline constexpr const char* kSchemaVersion = "v1";

nlohmann::json matrix_to_json(const Matrix& M);
nlohmann::json vector_to_json(const Vector& v);
Matrix matrix_from_json(const nlohmann::json& j, const std::string& field);
Vector vector_from_json(const nlohmann::json& j, const std::string& field);

/// Parses a problem document. Throws ParseError for malformed JSON and
/// SchemaError naming the missing or mistyped field. Defaults: Q = I, R = I,
/// x0 = ones, u_init = zeros, tolerances as in ToleranceSet.
ProblemSpec load_spec(const std::string& text);
ProblemSpec load_spec_file(const std::string& path);

/// Explicit-form document for the spec; load_spec(serialize(s).dump()) is
/// field-wise identical to s.
nlohmann::json serialize(const ProblemSpec& spec);

/// Optional controller carried by a document: either direct gains
/// {"K": [K_0, ..., K_D]} or the auxiliary form {"L0": ..., "Ltau": [...]}
/// applied through the predictor.
struct LawDocument {
    std::optional<FeedbackLaw> direct;
    std::optional<AuxGain> aux;
};

std::optional<LawDocument> law_from_document(const std::string& text);

nlohmann::json to_json(const ToleranceSet& tol);
ToleranceSet tolerances_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ValidationReport& report);
nlohmann::json to_json(const FeedbackLaw& law);
nlohmann::json to_json(const DdareSolution& sol);
nlohmann::json to_json(const DdareResult& result);
nlohmann::json to_json(const StabilizationCertificate& cert);
StabilizationCertificate certificate_from_json(const nlohmann::json& j);
nlohmann::json to_json(const VerificationReport& report);
nlohmann::json to_json(const MomentReport& report);
nlohmann::json to_json(const DelayMarginResult& result);
nlohmann::json to_json(const SimulationResult& result);
nlohmann::json to_json(const DecayReport& report);

}  // namespace delayctl
