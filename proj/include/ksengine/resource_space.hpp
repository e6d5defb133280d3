#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ksengine/category_tree.hpp"
#include "ksengine/error.hpp"
#include "ksengine/ids.hpp"

namespace ks {

/// One way of classifying resources: a category tree rooted at `tree.root()`.
struct Dimension {
  std::string name;
  CategoryTree tree;

  friend bool operator==(const Dimension&, const Dimension&) = default;
};

/// Dimension name -> category id, one entry per dimension of the host space.
using Point = std::map<std::string, std::string>;

enum class LocateMode { exact, subtree };

/// Multi-dimensional classification space. Every placed resource has exactly
/// one coordinate on every dimension.
class Space {
 public:
  Space() = default;
  explicit Space(std::string name) : name_(std::move(name)) {}

  const std::string& name() const noexcept { return name_; }
  const std::vector<Dimension>& dimensions() const noexcept { return dims_; }
  const std::map<std::string, Point>& placements() const noexcept { return placements_; }

  bool has_dimension(const std::string& name) const { return find_dim(name) != nullptr; }

  const Dimension& dimension(const std::string& name) const {
    if (const Dimension* d = find_dim(name)) return *d;
    throw Error(Errc::unknown_dimension, name);
  }

  /// Owner dimension of a category id, if any.
  const Dimension* dimension_of_category(const std::string& category) const {
    for (const auto& d : dims_) {
      if (d.tree.contains(category)) return &d;
    }
    return nullptr;
  }

  /// Appends a dimension. Placed resources must then be re-placed; adding a
  /// dimension to a populated space is rejected.
  void add_dimension(Dimension dim) {
    require_id(dim.name, "dimension name");
    if (has_dimension(dim.name)) throw Error(Errc::dimension_name_clash, dim.name);
    if (dim.tree.empty()) throw Error(Errc::malformed_tree, "dimension '" + dim.name + "' has no root");
    if (!placements_.empty()) {
      throw Error(Errc::missing_coordinate, "space already holds resources without '" + dim.name + "'");
    }
    for (const auto& [id, node] : dim.tree.nodes()) {
      if (dimension_of_category(id)) throw Error(Errc::duplicate_id, id);
    }
    index_[dim.name];
    dims_.push_back(std::move(dim));
  }

  void add_category(const std::string& dim, const std::string& id, std::string name,
                    const std::string& parent) {
    if (dimension_of_category(id)) throw Error(Errc::duplicate_id, id);
    mutable_dim(dim).tree.add(id, std::move(name), parent);
  }

  void place(const std::string& resource, const Point& point, bool replace = false) {
    require_id(resource, "resource id");
    validate(point);
    auto it = placements_.find(resource);
    if (it != placements_.end()) {
      if (!replace) throw Error(Errc::already_placed, resource);
      unindex(resource, it->second);
      it->second = point;
    } else {
      placements_.emplace(resource, point);
    }
    for (const auto& [dim, cat] : point) index_[dim][cat].insert(resource);
  }

  void remove(const std::string& resource) {
    auto it = placements_.find(resource);
    if (it == placements_.end()) return;
    unindex(resource, it->second);
    placements_.erase(it);
  }

  /// Category of `resource` on `dim`.
  const std::string& project(const std::string& resource, const std::string& dim) const {
    auto it = placements_.find(resource);
    if (it == placements_.end()) throw Error(Errc::unknown_node, "resource '" + resource + "' is not placed");
    auto c = it->second.find(dim);
    if (c == it->second.end()) throw Error(Errc::unknown_dimension, dim);
    return c->second;
  }

  /// Resources matching every specified coordinate. Candidates come from the
  /// per-category index of the most selective dimension first.
  std::vector<std::string> locate(const Point& spec, LocateMode mode) const {
    std::vector<std::set<std::string>> hits;
    for (const auto& [dim, cat] : spec) {
      const Dimension& d = dimension(dim);
      if (!d.tree.contains(cat)) throw Error(Errc::unknown_category, dim + "=" + cat);
      std::set<std::string> found;
      const auto& by_cat = index_.at(dim);
      const std::vector<std::string> cats =
          mode == LocateMode::exact ? std::vector<std::string>{cat} : d.tree.subtree(cat);
      for (const auto& c : cats) {
        if (auto it = by_cat.find(c); it != by_cat.end()) found.insert(it->second.begin(), it->second.end());
      }
      hits.push_back(std::move(found));
    }
    if (hits.empty()) {
      std::vector<std::string> all;
      for (const auto& [r, p] : placements_) all.push_back(r);
      return all;
    }
    std::sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) { return a.size() < b.size(); });
    std::vector<std::string> out;
    for (const auto& r : hits.front()) {
      if (std::all_of(hits.begin() + 1, hits.end(), [&](const auto& h) { return h.count(r) != 0; })) {
        out.push_back(r);
      }
    }
    return out;
  }

  void validate(const Point& point) const {
    for (const auto& d : dims_) {
      auto it = point.find(d.name);
      if (it == point.end()) throw Error(Errc::missing_coordinate, d.name);
      if (!d.tree.contains(it->second)) throw Error(Errc::unknown_category, d.name + "=" + it->second);
    }
    for (const auto& [dim, cat] : point) {
      if (!has_dimension(dim)) throw Error(Errc::unknown_dimension, dim);
    }
  }

  friend bool operator==(const Space& a, const Space& b) {
    return a.dims_ == b.dims_ && a.placements_ == b.placements_;
  }

 private:
  const Dimension* find_dim(const std::string& name) const {
    for (const auto& d : dims_) {
      if (d.name == name) return &d;
    }
    return nullptr;
  }

  Dimension& mutable_dim(const std::string& name) {
    for (auto& d : dims_) {
      if (d.name == name) return d;
    }
    throw Error(Errc::unknown_dimension, name);
  }

  void unindex(const std::string& resource, const Point& point) {
    for (const auto& [dim, cat] : point) {
      auto& by_cat = index_[dim];
      auto it = by_cat.find(cat);
      it->second.erase(resource);
      if (it->second.empty()) by_cat.erase(it);
    }
  }

  std::string name_ = "space";
  std::vector<Dimension> dims_;
  std::map<std::string, Point> placements_;
  std::map<std::string, std::map<std::string, std::set<std::string>>> index_;
};

inline void place(Space& space, const std::string& resource, const Point& point, bool replace = false) {
  space.place(resource, point, replace);
}

inline std::vector<std::string> locate(const Space& space, const Point& spec, LocateMode mode) {
  return space.locate(spec, mode);
}

// --- normal forms ----------------------------------------------------------

struct DuplicateSiblings {
  std::string dimension;
  std::string parent;
  std::string name;
  std::vector<std::string> categories;

  friend bool operator==(const DuplicateSiblings&, const DuplicateSiblings&) = default;
};

struct NormalFormReport {
  /// NF-A: two or more children of one parent share a name.
  std::vector<DuplicateSiblings> duplicate_siblings;
  /// NF-B: (i, j) where the coordinate on i functionally determines j.
  std::vector<std::pair<std::string, std::string>> dependent_dimensions;
  /// NF-C: dimensions whose tree is only the root.
  std::vector<std::string> trivial_dimensions;

  bool ok() const noexcept {
    return duplicate_siblings.empty() && dependent_dimensions.empty() && trivial_dimensions.empty();
  }
};

inline NormalFormReport check_normal_forms(const Space& space) {
  NormalFormReport report;
  for (const auto& d : space.dimensions()) {
    std::map<std::pair<std::string, std::string>, std::vector<std::string>> by_name;
    for (const auto& [id, node] : d.tree.nodes()) {
      if (node.parent) by_name[{*node.parent, node.name}].push_back(id);
    }
    for (const auto& [key, ids] : by_name) {
      if (ids.size() > 1) report.duplicate_siblings.push_back({d.name, key.first, key.second, ids});
    }
    if (d.tree.size() == 1) report.trivial_dimensions.push_back(d.name);
  }
  if (!space.placements().empty()) {
    for (const auto& di : space.dimensions()) {
      for (const auto& dj : space.dimensions()) {
        if (di.name == dj.name) continue;
        std::map<std::string, std::set<std::string>> image;
        for (const auto& [r, p] : space.placements()) image[p.at(di.name)].insert(p.at(dj.name));
        const bool functional = std::all_of(image.begin(), image.end(),
                                            [](const auto& kv) { return kv.second.size() == 1; });
        if (functional && image.size() >= 2) report.dependent_dimensions.emplace_back(di.name, dj.name);
      }
    }
  }
  return report;
}

// --- split / join / merge --------------------------------------------------

inline std::pair<Space, Space> split_space(const Space& space, const std::set<std::string>& dims) {
  if (dims.empty()) throw Error(Errc::empty_subset, "no dimensions selected");
  for (const auto& d : dims) space.dimension(d);
  if (dims.size() == space.dimensions().size()) throw Error(Errc::full_subset, "all dimensions selected");
  Space a(space.name()), b(space.name());
  for (const auto& d : space.dimensions()) (dims.count(d.name) ? a : b).add_dimension(d);
  for (const auto& [r, p] : space.placements()) {
    Point pa, pb;
    for (const auto& [dim, cat] : p) (dims.count(dim) ? pa : pb).emplace(dim, cat);
    a.place(r, pa);
    b.place(r, pb);
  }
  return {std::move(a), std::move(b)};
}

struct JoinResult {
  Space space;
  std::vector<std::string> warnings;
};

/// Dimensions of `a` then `b`; only resources placed in both survive.
inline JoinResult join_spaces(const Space& a, const Space& b) {
  for (const auto& d : b.dimensions()) {
    if (a.has_dimension(d.name)) throw Error(Errc::dimension_name_clash, d.name);
  }
  JoinResult out{Space(a.name()), {}};
  for (const auto& d : a.dimensions()) out.space.add_dimension(d);
  for (const auto& d : b.dimensions()) out.space.add_dimension(d);
  for (const auto& [r, p] : a.placements()) {
    auto it = b.placements().find(r);
    if (it == b.placements().end()) {
      out.warnings.push_back("resource '" + r + "' only in the first space; dropped");
      continue;
    }
    Point merged = p;
    merged.insert(it->second.begin(), it->second.end());
    out.space.place(r, merged);
  }
  for (const auto& [r, p] : b.placements()) {
    if (!a.placements().count(r)) out.warnings.push_back("resource '" + r + "' only in the second space; dropped");
  }
  return out;
}

/// Replaces d1 and d2 by one dimension "d1.d2" whose leaves are the observed
/// coordinate pairs "c1.c2" under the root "d1.d2.root".
inline Space merge_dimensions(const Space& space, const std::string& d1, const std::string& d2) {
  const Dimension& first = space.dimension(d1);
  const Dimension& second = space.dimension(d2);
  if (d1 == d2) throw Error(Errc::unknown_dimension, "cannot merge '" + d1 + "' with itself");
  const std::string merged_name = d1 + "." + d2;
  if (space.has_dimension(merged_name)) throw Error(Errc::dimension_name_clash, merged_name);

  std::map<std::string, std::pair<std::string, std::string>> pairs;  // pair id -> coordinates
  for (const auto& [r, p] : space.placements()) {
    const auto& c1 = p.at(d1);
    const auto& c2 = p.at(d2);
    pairs.emplace(c1 + "." + c2, std::pair{c1, c2});
  }
  Dimension merged{merged_name, CategoryTree(merged_name + ".root", first.name + " x " + second.name)};
  for (const auto& [id, cs] : pairs) {
    merged.tree.add(id, first.tree.at(cs.first).name + " / " + second.tree.at(cs.second).name,
                    merged.tree.root());
  }

  Space out(space.name());
  for (const auto& d : space.dimensions()) {
    if (d.name == d1) {
      out.add_dimension(merged);
    } else if (d.name != d2) {
      out.add_dimension(d);
    }
  }
  for (const auto& [r, p] : space.placements()) {
    Point q;
    for (const auto& [dim, cat] : p) {
      if (dim != d1 && dim != d2) q.emplace(dim, cat);
    }
    q.emplace(merged_name, p.at(d1) + "." + p.at(d2));
    out.place(r, q);
  }
  return out;
}

// --- capacity ----------------------------------------------------------------

/// Whether n dimensions of n coordinates each keep pace with growth x^n,
/// i.e. n^n >= x^n, which holds exactly when n >= x.
inline bool can_hold(double x, std::int64_t n) {
  if (!(x > 0.0) || !std::isfinite(x)) throw Error(Errc::non_positive_input, "x = " + std::to_string(x));
  if (n < 1) throw Error(Errc::non_positive_input, "n = " + std::to_string(n));
  return static_cast<double>(n) >= x;
}

}  // namespace ks
