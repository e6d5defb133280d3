#pragma once

#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ksengine/error.hpp"
#include "ksengine/ids.hpp"

namespace ks {

struct CategoryNode {
  std::string id;
  std::string name;
  std::optional<std::string> parent;

  friend bool operator==(const CategoryNode&, const CategoryNode&) = default;
};

/// Rooted tree of categories. Sibling names are not forced unique here;
/// duplicate siblings are what the NF-A normal-form check reports.
class CategoryTree {
 public:
  CategoryTree() = default;

  CategoryTree(std::string root_id, std::string root_name) {
    require_id(root_id, "category id");
    root_ = root_id;
    nodes_.emplace(root_id, CategoryNode{root_id, std::move(root_name), std::nullopt});
    children_[root_id];
  }

  /// Builds a tree from unordered nodes; exactly one node must lack a parent.
  static CategoryTree from_nodes(const std::vector<CategoryNode>& nodes) {
    std::optional<CategoryNode> root;
    std::map<std::string, std::vector<const CategoryNode*>> by_parent;
    std::set<std::string> ids;
    for (const auto& n : nodes) {
      require_id(n.id, "category id");
      if (!ids.insert(n.id).second) throw Error(Errc::duplicate_id, n.id);
      if (!n.parent) {
        if (root) throw Error(Errc::multiple_roots, root->id + ", " + n.id);
        root = n;
      } else {
        by_parent[*n.parent].push_back(&n);
      }
    }
    if (!root) {
      if (nodes.empty()) return {};
      throw Error(Errc::malformed_tree, "no root category");
    }
    CategoryTree tree(root->id, root->name);
    std::deque<std::string> queue{root->id};
    while (!queue.empty()) {
      const std::string at = queue.front();
      queue.pop_front();
      auto it = by_parent.find(at);
      if (it == by_parent.end()) continue;
      for (const CategoryNode* child : it->second) {
        tree.add(child->id, child->name, at);
        queue.push_back(child->id);
      }
    }
    if (tree.size() != nodes.size()) {
      for (const auto& n : nodes) {
        if (!tree.contains(n.id)) {
          throw Error(Errc::malformed_tree, "category '" + n.id + "' is unreachable from the root");
        }
      }
    }
    return tree;
  }

  bool empty() const noexcept { return nodes_.empty(); }
  std::size_t size() const noexcept { return nodes_.size(); }
  const std::string& root() const noexcept { return root_; }
  bool contains(const std::string& id) const { return nodes_.count(id) != 0; }

  const CategoryNode& at(const std::string& id) const {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) throw Error(Errc::unknown_category, id);
    return it->second;
  }

  const std::map<std::string, CategoryNode>& nodes() const noexcept { return nodes_; }

  void add(const std::string& id, std::string name, const std::string& parent) {
    require_id(id, "category id");
    if (empty()) throw Error(Errc::malformed_tree, "tree has no root");
    if (!contains(parent)) throw Error(Errc::unknown_category, parent);
    if (contains(id)) throw Error(Errc::duplicate_id, id);
    nodes_.emplace(id, CategoryNode{id, std::move(name), parent});
    children_[parent].insert(id);
    children_[id];
  }

  std::vector<std::string> children(const std::string& id) const {
    auto it = children_.find(id);
    if (it == children_.end()) throw Error(Errc::unknown_category, id);
    return {it->second.begin(), it->second.end()};
  }

  const std::optional<std::string>& parent(const std::string& id) const { return at(id).parent; }

  bool is_descendant_or_self(const std::string& id, const std::string& ancestor) const {
    std::optional<std::string> cur = id;
    while (cur) {
      if (*cur == ancestor) return true;
      cur = at(*cur).parent;
    }
    return false;
  }

  /// `id` and every category beneath it, preorder with sorted children.
  std::vector<std::string> subtree(const std::string& id) const {
    std::vector<std::string> out;
    std::vector<std::string> stack{id};
    at(id);
    while (!stack.empty()) {
      std::string cur = std::move(stack.back());
      stack.pop_back();
      const auto& kids = children_.at(cur);
      for (auto it = kids.rbegin(); it != kids.rend(); ++it) stack.push_back(*it);
      out.push_back(std::move(cur));
    }
    return out;
  }

  friend bool operator==(const CategoryTree& a, const CategoryTree& b) {
    return a.root_ == b.root_ && a.nodes_ == b.nodes_;
  }

 private:
  std::string root_;
  std::map<std::string, CategoryNode> nodes_;
  std::map<std::string, std::set<std::string>> children_;
};

}  // namespace ks
