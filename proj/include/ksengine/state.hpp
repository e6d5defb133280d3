#pragma once

#include <map>
#include <string>

#include "ksengine/concept_space.hpp"
#include "ksengine/discovery.hpp"
#include "ksengine/network.hpp"
#include "ksengine/resource_space.hpp"

namespace ks {

/// Everything one state file holds.
struct KnowledgeState {
  ConceptSpace knowledge;  // semantic link network plus concept records
  Space space;
  Lexicon lexicon;
  std::map<std::string, Problem> problems;
  std::map<std::string, AnomalyRule> anomaly_rules;

  Network& network() noexcept { return knowledge.network(); }
  const Network& network() const noexcept { return knowledge.network(); }

  friend bool operator==(const KnowledgeState&, const KnowledgeState&) = default;

  std::vector<AnomalyRule> anomaly_rule_list() const {
    std::vector<AnomalyRule> out;
    for (const auto& [id, r] : anomaly_rules) out.push_back(r);
    return out;
  }
};

}  // namespace ks
