#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ksengine/ability.hpp"
#include "ksengine/analogy.hpp"
#include "ksengine/ksif.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kDataError = 2;
constexpr int kRejected = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ks::Error(ks::Errc::io, "cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes through a sibling temp file and a rename so readers never see a
/// half-written state.
void write_atomically(const std::string& path, const std::string& text) {
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ks::Error(ks::Errc::io, "cannot write '" + tmp.string() + "'");
    out << text;
    out.flush();
    if (!out) throw ks::Error(ks::Errc::io, "short write to '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw ks::Error(ks::Errc::io, "cannot replace '" + path + "': " + ec.message());
}

ks::KnowledgeState load_file(const std::string& path) { return ks::import_state(read_file(path)); }

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) {
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

std::set<std::string> split_set(const std::string& s) {
  auto v = split(s, ',');
  return {v.begin(), v.end()};
}

std::vector<std::string> whitespace_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string t; in >> t;) out.push_back(t);
  return out;
}

/// "dim=cat" arguments.
ks::Point parse_point(const std::vector<std::string>& args) {
  ks::Point p;
  for (const auto& a : args) {
    const auto eq = a.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == a.size()) {
      throw UsageError("coordinate '" + a + "' must look like DIM=CATEGORY");
    }
    if (!p.emplace(a.substr(0, eq), a.substr(eq + 1)).second) {
      throw UsageError("dimension '" + a.substr(0, eq) + "' given twice");
    }
  }
  return p;
}

std::string triple_text(const ks::Triple& t) {
  return std::get<0>(t) + " " + std::get<1>(t) + " " + std::get<2>(t);
}

std::string join(const std::vector<std::string>& v, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += v[i];
  }
  return out;
}

void print_problem(std::ostream& out, const ks::Problem& p) {
  out << p.id << '\t' << ks::to_string(p.kind) << '\t' << p.statement << '\n';
}

/// State file handling shared by every subcommand.
class Session {
 public:
  std::string path;

  ks::KnowledgeState& state() {
    if (!loaded_) {
      if (path.empty()) throw UsageError("no state file: pass --state or set KSENGINE_STATE");
      if (fs::exists(path)) {
        original_ = read_file(path);
        state_ = ks::import_state(original_);
      }
      loaded_ = true;
    }
    return state_;
  }

  /// Persists the state if its canonical text changed.
  void save() {
    const auto text = ks::export_state(state());
    if (text != original_ || !fs::exists(path)) write_atomically(path, text);
    original_ = text;
  }

 private:
  bool loaded_ = false;
  ks::KnowledgeState state_;
  std::string original_;
};

ks::Network materialized(const ks::Network& net) {
  ks::Network copy = net;
  ks::materialize(copy);
  return copy;
}

std::vector<ks::EventRecord> read_events(const std::string& path) {
  std::vector<ks::EventRecord> out;
  std::istringstream in(read_file(path));
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    auto fields = split(line, '\t');
    if (fields.empty()) continue;
    ks::EventRecord e;
    e.id = fields[0];
    e.entities = {fields.begin() + 1, fields.end()};
    if (!ks::is_valid_id(e.id)) throw ks::Error(ks::Errc::malformed_record, "bad record id '" + e.id + "'", line_no);
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<std::string> read_questions(const std::string& path) {
  std::vector<std::string> out;
  std::istringstream in(read_file(path));
  for (std::string line; std::getline(in, line);) {
    const auto t = ks::trim(line);
    if (t.empty() || t.front() == '#') continue;
    out.push_back(t);
  }
  return out;
}

struct NamedCandidate {
  std::string label;
  ks::Candidate candidate;
};

/// LINK, RULE and CONCEPT records of a KSIF file, each one a candidate.
std::vector<NamedCandidate> read_candidates(const std::string& path) {
  const auto doc = ks::parse_ksif(read_file(path));
  std::vector<NamedCandidate> out;
  for (const auto& rec : doc.records) {
    ks::detail::ksif::Reader rd{rec};
    ks::Candidate c;
    if (rec.kind == "LINK") {
      if (rec.fields.size() < 4) rd.fail(ks::Errc::malformed_record, "LINK candidate needs source, type and target");
      c = ks::link_candidate(rec.fields[1], rec.fields[2], rec.fields[3], path);
    } else if (rec.kind == "RULE") {
      rd.expect_fields(7);
      c.kind = ks::CandidateKind::rule;
      c.rule = ks::Rule{rd.id(0), rd.rep(1), rd.atoms(5), rd.atoms(6)};
    } else if (rec.kind == "CONCEPT") {
      rd.expect_fields(16);
      c.kind = ks::CandidateKind::concept_;
      c.concept_.id = rd.id(0);
      c.concept_.name = rec.fields[1];
      c.concept_.classes = rd.id_list(3);
    } else {
      rd.fail(ks::Errc::malformed_record, rec.kind + " records cannot be verified");
    }
    c.source = path;
    out.push_back({rec.fields.empty() ? std::string() : rec.fields[0], std::move(c)});
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge space engine: semantic link networks, resource spaces and discovery"};
  app.require_subcommand(1);
  Session session;
  app.add_option("--state", session.path, "State file (KSIF)")->envname("KSENGINE_STATE");

  std::function<int()> action;
  auto on = [&](CLI::App* sub, std::function<int()> fn) { sub->callback([&action, fn] { action = fn; }); };
  std::ostream& out = std::cout;

  // import / export ----------------------------------------------------------
  std::string import_file;
  bool import_replace = false;
  auto* imp = app.add_subcommand("import", "Add the records of a KSIF file to the state");
  imp->add_option("file", import_file)->required();
  imp->add_flag("--replace", import_replace, "Replace the state instead of adding to it");
  on(imp, [&] {
    const auto text = read_file(import_file);
    if (import_replace) {
      session.state() = ks::import_state(text);
    } else {
      ks::ingest(session.state(), text);
    }
    session.save();
    return kOk;
  });

  auto* exp = app.add_subcommand("export", "Print the canonical KSIF text of the state");
  on(exp, [&] {
    out << ks::export_state(session.state());
    return kOk;
  });

  // network --------------------------------------------------------------------
  auto* derive = app.add_subcommand("derive", "Materialize the rule fixpoint; prints the number of new links");
  on(derive, [&] {
    out << ks::materialize(session.state().network()) << '\n';
    session.save();
    return kOk;
  });

  std::string query_text;
  auto* query = app.add_subcommand("query", "Answer a single-hole pattern such as \"(a, Cite, ?)\"");
  query->add_option("pattern", query_text)->required();
  on(query, [&] {
    const auto pattern = ks::parse_query(query_text);
    const auto net = materialized(session.state().network());
    if (!pattern.type && (!pattern.source || !pattern.target)) {
      throw ks::Error(ks::Errc::malformed_pattern, "pattern must have exactly one hole");
    }
    if (!ks::answerable(net, pattern)) return kOk;
    for (const auto& v : net.answer_query(pattern)) out << v << '\n';
    return kOk;
  });

  std::string explain_id;
  auto* explain = app.add_subcommand("explain", "Print the proof tree of a link");
  explain->add_option("link", explain_id)->required();
  on(explain, [&] {
    const auto net = materialized(session.state().network());
    std::string text;
    ks::render_explanation(net, ks::explain(net, explain_id), text);
    out << text;
    return kOk;
  });

  // resource space ---------------------------------------------------------------
  std::string place_resource;
  std::vector<std::string> place_coords;
  bool place_replace = false;
  auto* place = app.add_subcommand("place", "Place a resource at DIM=CATEGORY coordinates");
  place->add_option("resource", place_resource)->required();
  place->add_option("coordinates", place_coords)->required();
  place->add_flag("--replace", place_replace, "Move an already placed resource");
  on(place, [&] {
    session.state().space.place(place_resource, parse_point(place_coords), place_replace);
    session.save();
    return kOk;
  });

  std::vector<std::string> locate_coords;
  std::string locate_mode = "exact";
  auto* locate = app.add_subcommand("locate", "List resources matching DIM=CATEGORY coordinates");
  locate->add_option("coordinates", locate_coords);
  locate->add_option("--mode", locate_mode)->check(CLI::IsMember({"exact", "subtree"}));
  on(locate, [&] {
    const auto mode = locate_mode == "exact" ? ks::LocateMode::exact : ks::LocateMode::subtree;
    for (const auto& r : ks::locate(session.state().space, parse_point(locate_coords), mode)) out << r << '\n';
    return kOk;
  });

  auto* nf = app.add_subcommand("nf-check", "Report normal-form violations of the resource space");
  on(nf, [&] {
    const auto report = ks::check_normal_forms(session.state().space);
    for (const auto& d : report.duplicate_siblings) {
      out << "NF-A\t" << d.dimension << '\t' << d.parent << '\t' << d.name << '\t' << join(d.categories, ",") << '\n';
    }
    for (const auto& [a, b] : report.dependent_dimensions) out << "NF-B\t" << a << '\t' << b << '\n';
    for (const auto& d : report.trivial_dimensions) out << "NF-C\t" << d << '\n';
    if (report.ok()) out << "ok\n";
    return kOk;
  });

  std::string split_dims, split_first, split_second;
  auto* splitc = app.add_subcommand("split", "Split the resource space; DIMS go to the first file");
  splitc->add_option("dims", split_dims, "Comma-separated dimension names")->required();
  splitc->add_option("--first", split_first, "Output file for the selected dimensions")->required();
  splitc->add_option("--second", split_second, "Output file for the remaining dimensions")->required();
  on(splitc, [&] {
    auto [a, b] = ks::split_space(session.state().space, split_set(split_dims));
    ks::KnowledgeState sa, sb;
    sa.space = std::move(a);
    sb.space = std::move(b);
    write_atomically(split_first, ks::export_state(sa));
    write_atomically(split_second, ks::export_state(sb));
    return kOk;
  });

  std::string join_file;
  auto* joinc = app.add_subcommand("join", "Join the resource space of another KSIF file into the state");
  joinc->add_option("file", join_file)->required();
  on(joinc, [&] {
    const auto other = load_file(join_file);
    auto result = ks::join_spaces(session.state().space, other.space);
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
    session.state().space = std::move(result.space);
    session.save();
    return kOk;
  });

  std::string merge_d1, merge_d2;
  auto* merge = app.add_subcommand("merge-dims", "Merge two dimensions into one of coordinate pairs");
  merge->add_option("d1", merge_d1)->required();
  merge->add_option("d2", merge_d2)->required();
  on(merge, [&] {
    session.state().space = ks::merge_dimensions(session.state().space, merge_d1, merge_d2);
    session.save();
    return kOk;
  });

  std::string cap_x;
  std::int64_t cap_n = 0;
  auto* cap = app.add_subcommand("capacity", "Whether n dimensions of n categories keep pace with x^n");
  cap->add_option("x", cap_x)->required();
  cap->add_option("n", cap_n)->required();
  on(cap, [&] {
    double x = 0;
    if (!ks::parse_real(cap_x, x)) throw UsageError("x must be a number");
    out << (ks::can_hold(x, cap_n) ? "true" : "false") << '\n';
    return kOk;
  });

  // concepts -------------------------------------------------------------------------
  std::string read_input, read_lexicon, read_goals;
  std::size_t read_radius = 3;
  auto* readc = app.add_subcommand("read", "Read whitespace-separated text (or @FILE) into the concept space");
  readc->add_option("text", read_input)->required();
  readc->add_option("--lexicon", read_lexicon, "KSIF file whose LEXEME records are used");
  readc->add_option("--goals", read_goals, "Comma-separated goal concepts");
  readc->add_option("--radius", read_radius, "Co-occurrence window");
  on(readc, [&] {
    const auto text = !read_input.empty() && read_input.front() == '@' ? read_file(read_input.substr(1)) : read_input;
    auto& st = session.state();
    const ks::Lexicon lexicon = read_lexicon.empty() ? st.lexicon : load_file(read_lexicon).lexicon;
    const auto trace = ks::read_text(st.knowledge, whitespace_tokens(text), lexicon, split_set(read_goals), read_radius);
    for (const auto& s : trace.resolved) {
      out << "resolve\t" << s.position << '\t' << s.token << '\t' << s.concept_id << '\t' << s.score << '\n';
    }
    for (auto p : trace.skipped) out << "skip\t" << p << '\n';
    for (const auto& r : trace.relations) {
      out << "relation\t" << r.position << '\t' << r.source << '\t' << r.type << '\t' << r.target << '\n';
    }
    for (auto p : trace.dangling_relation_words) out << "dangling\t" << p << '\n';
    for (const auto& c : trace.co_activations) {
      out << "co-occur\t" << c.position << '\t' << c.concept_id << '\t' << c.partner << '\n';
    }
    for (const auto& [id, n] : trace.activations) out << "activation\t" << id << '\t' << n << '\n';
    session.save();
    return kOk;
  });

  // discovery ---------------------------------------------------------------------------
  std::string verify_file, verify_mode = "literal";
  std::vector<std::string> verify_exclusions;
  auto* verify = app.add_subcommand("verify", "Verify candidate links, rules and concepts from a KSIF file");
  verify->add_option("file", verify_file)->required();
  verify->add_option("--mode", verify_mode)->check(CLI::IsMember({"literal", "consistency"}));
  verify->add_option("--exclude", verify_exclusions, "Mutually exclusive link types, T1:T2");
  on(verify, [&] {
    ks::Exclusions ex;
    for (const auto& e : verify_exclusions) {
      const auto parts = split(e, ':');
      if (parts.size() != 2) throw UsageError("exclusion '" + e + "' must look like T1:T2");
      ex.emplace_back(parts[0], parts[1]);
    }
    const auto mode = verify_mode == "literal" ? ks::VerifyMode::literal : ks::VerifyMode::consistency;
    bool all = true;
    for (const auto& [label, cand] : read_candidates(verify_file)) {
      const auto v = ks::verify_knowledge(session.state().knowledge, cand, mode, ex);
      all = all && v.accepted;
      out << label << '\t' << (v.accepted ? "accepted" : "rejected") << '\t' << ks::to_string(v.decided_by) << '\t'
          << v.reason << '\n';
    }
    return all ? kOk : kRejected;
  });

  std::string events_file;
  std::size_t min_support = 2;
  auto* co = app.add_subcommand("co-occur", "Raise relationship problems from co-occurring entities");
  co->add_option("file", events_file, "Tab-separated records: id, then entities")->required();
  co->add_option("--min-support", min_support);
  on(co, [&] {
    for (const auto& p : ks::detect_co_occurrence(read_events(events_file), min_support)) {
      print_problem(out, p);
      session.state().problems[p.id] = p;
    }
    session.save();
    return kOk;
  });

  std::string rules_file;
  auto* fp = app.add_subcommand("find-problem", "Apply anomaly rules to the state's network");
  fp->add_option("--rules", rules_file, "KSIF file with ANOMALYRULE records; the state's own rules are used too");
  on(fp, [&] {
    auto& st = session.state();
    auto rules = st.anomaly_rule_list();
    if (!rules_file.empty()) {
      for (const auto& [id, r] : load_file(rules_file).anomaly_rules) {
        if (st.anomaly_rules.count(id)) throw ks::Error(ks::Errc::duplicate_id, "anomaly rule " + id);
        rules.push_back(r);
      }
    }
    for (const auto& p : ks::find_problem(materialized(st.network()), rules)) {
      print_problem(out, p);
      st.problems[p.id] = p;
    }
    session.save();
    return kOk;
  });

  std::string solve_id, solve_types;
  auto* solve = app.add_subcommand("solve", "Trace a problem's concepts to solutions");
  solve->add_option("problem", solve_id)->required();
  solve->add_option("--solution-types", solve_types, "Comma-separated link types")->required();
  on(solve, [&] {
    auto& st = session.state();
    auto it = st.problems.find(solve_id);
    if (it == st.problems.end()) throw ks::Error(ks::Errc::unknown_concept, "no problem '" + solve_id + "'");
    for (const auto& s : ks::find_solution(materialized(st.network()), it->second, split_set(solve_types))) {
      out << s << '\n';
    }
    return kOk;
  });

  std::string rec_types;
  auto* rec = app.add_subcommand("recommend", "Rank stored problems with their solutions");
  rec->add_option("--solution-types", rec_types, "Comma-separated link types; default all");
  on(rec, [&] {
    auto& st = session.state();
    const auto net = materialized(st.network());
    std::set<std::string> types = split_set(rec_types);
    if (types.empty()) {
      for (const auto& [id, t] : net.link_types()) types.insert(id);
    }
    std::vector<std::pair<ks::Problem, std::vector<std::string>>> pairs;
    for (const auto& [id, p] : st.problems) {
      std::vector<std::string> sol;
      if (!p.concepts.empty() && std::all_of(p.concepts.begin(), p.concepts.end(),
                                             [&](const auto& c) { return net.has_node(c); })) {
        sol = ks::find_solution(net, p, types);
      }
      pairs.emplace_back(p, std::move(sol));
    }
    for (const auto& r : ks::recommend(std::move(pairs))) {
      out << r.problem.id << '\t' << r.problem.evidence.size() << '\t'
          << (r.unsolved ? std::string("unsolved") : join(r.solutions, ",")) << '\n';
    }
    return kOk;
  });

  std::string an_source, an_target, an_types;
  std::size_t an_max = ks::kDefaultMaxAnalogyNodes;
  auto* an = app.add_subcommand("analogy", "Map a solved source domain onto a target domain");
  an->add_option("--source", an_source)->required();
  an->add_option("--target", an_target)->required();
  an->add_option("--max-nodes", an_max);
  an->add_option("--solution-types", an_types, "Source link types that form the solution");
  on(an, [&] {
    const auto src = load_file(an_source);
    const auto tgt = load_file(an_target);
    const auto types = split_set(an_types);
    std::set<std::string> solution;
    for (const auto& [id, l] : src.network().links()) {
      if (types.count(l.type)) solution.insert(id);
    }
    const auto r = ks::analogize(src.network(), solution, tgt.network(), an_max);
    out << ks::to_string(r.outcome) << '\n';
    if (r.outcome == ks::AnalogyOutcome::none) return kRejected;
    for (const auto& [a, b] : r.node_map) out << "map\t" << a << '\t' << b << '\n';
    if (r.outcome == ks::AnalogyOutcome::generalized) {
      out << "level\t" << r.generalization_level << '\n';
      for (const auto& [a, b] : r.type_generalization) out << "type\t" << a << '\t' << b << '\n';
    }
    for (const auto& t : r.solution_links) out << "solution\t" << triple_text(t) << '\n';
    for (const auto& c : r.conjectures) {
      out << "conjecture\t" << ks::to_string(c.status) << '\t' << triple_text(c.link) << (c.solution ? "\tsolution" : "")
          << '\n';
    }
    for (const auto& t : r.impact) out << "impact\t" << triple_text(t) << '\n';
    return kOk;
  });

  std::string ab_questions;
  std::vector<std::string> ab_increments;
  auto* ab = app.add_subcommand("ability", "Count answered questions and raised problems per data increment");
  ab->add_option("--questions", ab_questions, "One pattern per line")->required();
  ab->add_option("--increments", ab_increments, "KSIF fragments, applied in order");
  on(ab, [&] {
    std::vector<std::string> increments;
    for (const auto& f : ab_increments) increments.push_back(read_file(f));
    const auto report = ks::ability_report(session.state(), read_questions(ab_questions), increments);
    out << "questions\t" << report.questions << '\n';
    out << "step\tanswered\tproblems\tlinks\n";
    for (const auto& s : report.steps) {
      out << s.label << '\t' << s.answered << '\t' << s.problems << '\t' << s.links << '\n';
    }
    return kOk;
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }
  try {
    return action();
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const ks::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDataError;
  }
}
