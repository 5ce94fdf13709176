#pragma once

#include "acbc/sdp.hpp"
#include "json.hpp"

namespace acbc::sdp {

inline constexpr int kProblemFormatVersion = 1;

/// Standard-form problem as JSON: objective, dense equalities, and blocks with
/// triplet-sparse coefficients (var = -1 for the constant term).
nlohmann::json problem_to_json(const SdpProblem& p);
SdpProblem problem_from_json(const nlohmann::json& j);

}  // namespace acbc::sdp
