#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ks {

enum class Errc {
  invalid_rep,
  invalid_id,
  duplicate_id,
  unknown_node,
  unknown_link_type,
  unknown_link,
  unknown_rule,
  duplicate_explicit_link,
  negative_weight,
  cannot_retract_derived,
  malformed_pattern,
  invalid_rule,
  cycle,
  missing_coordinate,
  unknown_category,
  unknown_dimension,
  already_placed,
  empty_subset,
  full_subset,
  dimension_name_clash,
  non_positive_input,
  malformed_tree,
  multiple_roots,
  too_few_concepts,
  unknown_concept,
  unknown_compartment,
  invalid_candidate,
  empty_type_set,
  uncategorized_problem,
  already_at_root,
  too_large,
  empty_source,
  bad_header,
  unknown_kind,
  malformed_record,
  dangling_reference,
  io,
};

constexpr std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_rep: return "InvalidRep";
    case Errc::invalid_id: return "InvalidId";
    case Errc::duplicate_id: return "DuplicateId";
    case Errc::unknown_node: return "UnknownNode";
    case Errc::unknown_link_type: return "UnknownLinkType";
    case Errc::unknown_link: return "UnknownLink";
    case Errc::unknown_rule: return "UnknownRule";
    case Errc::duplicate_explicit_link: return "DuplicateExplicitLink";
    case Errc::negative_weight: return "NegativeWeight";
    case Errc::cannot_retract_derived: return "CannotRetractDerived";
    case Errc::malformed_pattern: return "MalformedPattern";
    case Errc::invalid_rule: return "InvalidRule";
    case Errc::cycle: return "Cycle";
    case Errc::missing_coordinate: return "MissingCoordinate";
    case Errc::unknown_category: return "UnknownCategory";
    case Errc::unknown_dimension: return "UnknownDimension";
    case Errc::already_placed: return "AlreadyPlaced";
    case Errc::empty_subset: return "EmptySubset";
    case Errc::full_subset: return "FullSubset";
    case Errc::dimension_name_clash: return "DimensionNameClash";
    case Errc::non_positive_input: return "NonPositiveInput";
    case Errc::malformed_tree: return "MalformedTree";
    case Errc::multiple_roots: return "MultipleRoots";
    case Errc::too_few_concepts: return "TooFewConcepts";
    case Errc::unknown_concept: return "UnknownConcept";
    case Errc::unknown_compartment: return "UnknownCompartment";
    case Errc::invalid_candidate: return "InvalidCandidate";
    case Errc::empty_type_set: return "EmptyTypeSet";
    case Errc::uncategorized_problem: return "UncategorizedProblem";
    case Errc::already_at_root: return "AlreadyAtRoot";
    case Errc::too_large: return "TooLarge";
    case Errc::empty_source: return "EmptySource";
    case Errc::bad_header: return "BadHeader";
    case Errc::unknown_kind: return "UnknownKind";
    case Errc::malformed_record: return "MalformedRecord";
    case Errc::dangling_reference: return "DanglingReference";
    case Errc::io: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the engine. `code()` is the stable part; the
/// detail text names the offending id or describes the violation.
class Error : public std::runtime_error {
 public:
  Error(Errc code, std::string detail, std::optional<std::size_t> line = std::nullopt)
      : std::runtime_error(format(code, detail, line)),
        code_(code),
        detail_(std::move(detail)),
        line_(line) {}

  Errc code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }
  std::optional<std::size_t> line() const noexcept { return line_; }

 private:
  static std::string format(Errc code, const std::string& detail,
                            std::optional<std::size_t> line) {
    std::string out(to_string(code));
    if (line) out += "(line " + std::to_string(*line) + ")";
    if (!detail.empty()) out += ": " + detail;
    return out;
  }

  Errc code_;
  std::string detail_;
  std::optional<std::size_t> line_;
};

}  // namespace ks
