#pragma once
#include <stdexcept>
#include <string>
#include <string_view>

namespace kmarket {

enum class Errc {
  invalid_argument,
  invalid_taxonomy,
  invalid_profile,
  taxonomy_mismatch,
  degenerate_project,
  empty_team,
  invalid_model,
  unknown_aim,
  infinite_free_energy,
  impossible_aim,
  convergence_failure,
  no_candidates,
  infeasible_partition,
  search_too_large,
  signature_error,
  replay_error,
  empty_block,
  unknown_actor,
  malformed_record,
  missing_section,
  unsigned_cv,
  milestone_sum_mismatch,
  empty_electorate,
  missing_reasons,
  duplicate_ballot,
  unaddressed_feedback,
  insufficient_deposit,
  state_error,
  ordering_error,
  liquidity_error,
  validation_error,
  lexicon_violation,
  empty_payload,
  unsigned_contract,
  price_out_of_bounds,
  payment_error,
  parse_error,
  dangling_reference,
  undefined_gini,
  io_error,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

private:
  Errc code_;
};

}  // namespace kmarket
