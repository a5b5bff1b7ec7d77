#pragma once

#include <stdexcept>
#include <string>

namespace dlrm {

enum class errc {
  non_physical_input,
  infeasible_rating,
  unstable_step,
  index_mismatch,
  dominance_violated,
  schema_error,
  validation_error,
  singular_network,
  unbalanced_injection,
  negative_curvature,
  case_mismatch,
  numerical_failure,
};

const char* errc_name(errc c);

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
  errc code() const { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) { throw Error(code, what); }

inline const char* errc_name(errc c) {
  switch (c) {
    case errc::non_physical_input: return "NonPhysicalInput";
    case errc::infeasible_rating: return "InfeasibleRating";
    case errc::unstable_step: return "UnstableStep";
    case errc::index_mismatch: return "IndexMismatch";
    case errc::dominance_violated: return "DominanceViolated";
    case errc::schema_error: return "SchemaError";
    case errc::validation_error: return "ValidationError";
    case errc::singular_network: return "SingularNetwork";
    case errc::unbalanced_injection: return "UnbalancedInjection";
    case errc::negative_curvature: return "NegativeCurvature";
    case errc::case_mismatch: return "CaseMismatch";
    case errc::numerical_failure: return "NumericalFailure";
  }
  return "Error";
}

}  // namespace dlrm
