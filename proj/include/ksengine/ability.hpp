#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "ksengine/ksif.hpp"

namespace ks {

struct AbilityStep {
  std::string label;  // "base" or the increment's position, 1-based
  std::size_t answered = 0;
  std::size_t problems = 0;
  std::size_t links = 0;

  friend bool operator==(const AbilityStep&, const AbilityStep&) = default;
};

struct AbilityReport {
  std::size_t questions = 0;
  std::vector<AbilityStep> steps;
};

/// True when the pattern has at least one answer. Patterns naming ids the
/// network does not have yet are unanswered rather than errors.
inline bool answerable(const Network& net, const QueryPattern& q) {
  if (q.source && !net.has_node(*q.source)) return false;
  if (q.target && !net.has_node(*q.target)) return false;
  if (q.type && !net.has_link_type(*q.type)) return false;
  return !net.answer_query(q).empty();
}

inline AbilityStep measure_ability(const KnowledgeState& state, const std::vector<QueryPattern>& questions,
                                   std::string label) {
  AbilityStep step{std::move(label)};
  for (const auto& q : questions) step.answered += answerable(state.network(), q);
  step.problems = find_problem(state.network(), state.anomaly_rule_list()).size();
  step.links = state.network().links().size();
  return step;
}

/// Ingests each increment in turn, deriving to the fixpoint after each, and
/// counts answered questions and raised problems. Works on a copy of `state`.
inline AbilityReport ability_report(KnowledgeState state, const std::vector<std::string>& questions,
                                    const std::vector<std::string>& increments) {
  std::vector<QueryPattern> patterns;
  for (const auto& q : questions) {
    patterns.push_back(parse_query(q));
    const auto& p = patterns.back();
    if (!p.type && (!p.source || !p.target)) throw Error(Errc::malformed_pattern, "pattern must have exactly one hole");
  }
  AbilityReport report;
  report.questions = patterns.size();
  materialize(state.network());
  report.steps.push_back(measure_ability(state, patterns, "base"));
  for (std::size_t i = 0; i < increments.size(); ++i) {
    ingest(state, increments[i]);
    materialize(state.network());
    report.steps.push_back(measure_ability(state, patterns, std::to_string(i + 1)));
  }
  return report;
}

}  // namespace ks
