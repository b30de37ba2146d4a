#pragma once

// Dynamic R-Tree over host locations with the classic quadratic split. The
// queries implement the three candidate phases used by the spatial placement
// strategy: leaf containment, nearest-leaf MinDist (ties included), and
// concentric rings over everything the first two phases did not produce. For
// any query point the three phases partition the host set.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "edgeplace/model.hpp"

namespace edgeplace {

struct Mbr {
  double min_x = 0, min_y = 0, max_x = 0, max_y = 0;

  static Mbr of(Location p) { return {p.x, p.y, p.x, p.y}; }

  bool valid() const { return min_x <= max_x && min_y <= max_y; }

  bool contains(Location p) const {
    return p.x >= min_x && p.x <= max_x && p.y >= min_y && p.y <= max_y;
  }

  bool covers(const Mbr& o) const {
    return o.min_x >= min_x && o.max_x <= max_x && o.min_y >= min_y &&
           o.max_y <= max_y;
  }

  double area() const { return (max_x - min_x) * (max_y - min_y); }
  double margin() const { return (max_x - min_x) + (max_y - min_y); }

  void expand(const Mbr& o) {
    min_x = std::min(min_x, o.min_x);
    min_y = std::min(min_y, o.min_y);
    max_x = std::max(max_x, o.max_x);
    max_y = std::max(max_y, o.max_y);
  }

  Mbr expanded(const Mbr& o) const {
    Mbr r = *this;
    r.expand(o);
    return r;
  }

  double enlargement(const Mbr& o) const { return expanded(o).area() - area(); }

  // Euclidean distance from p to the nearest point of the rectangle; zero
  // when contained.
  double min_dist(Location p) const {
    const double dx = std::max({min_x - p.x, 0.0, p.x - max_x});
    const double dy = std::max({min_y - p.y, 0.0, p.y - max_y});
    return std::sqrt(dx * dx + dy * dy);
  }

  // Euclidean distance from p to the farthest corner of the rectangle.
  double max_dist(Location p) const {
    const double dx = std::max(std::abs(p.x - min_x), std::abs(p.x - max_x));
    const double dy = std::max(std::abs(p.y - min_y), std::abs(p.y - max_y));
    return std::sqrt(dx * dx + dy * dy);
  }

  bool operator==(const Mbr&) const = default;
};

// Work performed by a query; feeds the deterministic decision-cost model.
struct QueryStats {
  std::size_t nodes_visited = 0;
  std::size_t entries_scanned = 0;
};

class RTree {
 public:
  struct Entry {
    HostId id = 0;
    Location loc;
  };

  explicit RTree(std::uint32_t max_children = 40, std::uint32_t min_children = 20)
      : max_children_(max_children), min_children_(min_children) {
    if (max_children_ < 2 || min_children_ < 1 ||
        2 * min_children_ > max_children_ + 1)
      throw std::invalid_argument(
          "rtree fan-out must satisfy 1 <= m and 2m <= M+1");
  }

  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  std::uint32_t max_children() const { return max_children_; }
  std::uint32_t min_children() const { return min_children_; }

  void insert(HostId id, Location loc) {
    if (!ids_.insert(id).second)
      throw std::invalid_argument("duplicate host id " + std::to_string(id) +
                                  " in spatial index");
    if (!root_) root_ = std::make_unique<Node>(true);
    auto sibling = insert_into(*root_, Entry{id, loc});
    if (sibling) {
      auto new_root = std::make_unique<Node>(false);
      new_root->children.push_back(std::move(root_));
      new_root->children.push_back(std::move(sibling));
      new_root->recompute_box();
      root_ = std::move(new_root);
    }
  }

  // Phase 1: hosts of every leaf whose rectangle contains `loc`. Sorted by id.
  std::vector<HostId> mbr_nodes(Location loc, QueryStats* stats = nullptr) const {
    std::vector<HostId> out;
    if (root_ && !ids_.empty()) collect_containing(*root_, loc, out, stats);
    std::sort(out.begin(), out.end());
    return out;
  }

  // Phase 2: hosts of the non-containing leaves whose MinDist to `loc` is
  // minimal, ties included. Leaves already produced by mbr_nodes (those
  // containing `loc`) are excluded. Sorted by id.
  std::vector<HostId> nearest_mbr_nodes(Location loc,
                                        QueryStats* stats = nullptr) const {
    std::vector<HostId> out;
    if (!root_ || ids_.empty()) return out;
    double best = std::numeric_limits<double>::infinity();
    best_leaf_dist(*root_, loc, best, stats);
    if (!std::isfinite(best)) return out;  // every leaf contains loc
    collect_at_dist(*root_, loc, best, out, stats);
    std::sort(out.begin(), out.end());
    return out;
  }

  // Phase 3, ring `ring_index` (1-based): hosts at distance d from `loc` with
  // (ring_index-1)*step <= d < ring_index*step, excluding every host already
  // produced by the containment and nearest-MinDist phases. Sorted by id.
  std::vector<HostId> concentric_ring(Location loc, std::uint32_t ring_index,
                                      double step,
                                      QueryStats* stats = nullptr) const {
    if (ring_index < 1) throw std::invalid_argument("ring_index must be >= 1");
    if (!(step > 0)) throw std::invalid_argument("step must be positive");
    std::vector<HostId> out;
    if (!root_ || ids_.empty()) return out;
    const double lo = static_cast<double>(ring_index - 1) * step;
    const double hi = static_cast<double>(ring_index) * step;
    std::unordered_set<HostId> excluded;
    for (HostId h : mbr_nodes(loc, stats)) excluded.insert(h);
    for (HostId h : nearest_mbr_nodes(loc, stats)) excluded.insert(h);
    collect_ring(*root_, loc, lo, hi, excluded, out, stats);
    std::sort(out.begin(), out.end());
    return out;
  }

  template <class Fn>
  void visit_leaves(Fn&& fn) const {
    if (root_) visit_leaves_rec(*root_, fn);
  }

  // Full structural audit: fan-out bounds, box tightness and containment,
  // uniform leaf depth. Returns violations; empty means healthy.
  std::vector<std::string> audit() const {
    std::vector<std::string> issues;
    if (!root_) return issues;
    int leaf_depth = -1;
    audit_rec(*root_, true, 0, leaf_depth, issues);
    return issues;
  }

 private:
  struct Node {
    explicit Node(bool leaf) : is_leaf(leaf) {}
    bool is_leaf;
    Mbr box{};
    std::vector<Entry> entries;                   // leaf payload
    std::vector<std::unique_ptr<Node>> children;  // internal fan-out

    std::size_t fill() const {
      return is_leaf ? entries.size() : children.size();
    }

    void recompute_box() {
      if (is_leaf) {
        if (entries.empty()) {
          box = Mbr{};
          return;
        }
        box = Mbr::of(entries.front().loc);
        for (const auto& e : entries) box.expand(Mbr::of(e.loc));
      } else {
        box = children.front()->box;
        for (const auto& c : children) box.expand(c->box);
      }
    }
  };

  std::unique_ptr<Node> insert_into(Node& node, const Entry& e) {
    if (node.is_leaf) {
      node.entries.push_back(e);
      if (node.entries.size() > max_children_) {
        auto sibling = std::make_unique<Node>(true);
        split_items(node.entries, sibling->entries,
                    [](const Entry& it) { return Mbr::of(it.loc); });
        node.recompute_box();
        sibling->recompute_box();
        return sibling;
      }
      node.recompute_box();
      return nullptr;
    }
    Node& child = pick_child(node, Mbr::of(e.loc));
    auto grandchild = insert_into(child, e);
    if (grandchild) {
      node.children.push_back(std::move(grandchild));
      if (node.children.size() > max_children_) {
        auto sibling = std::make_unique<Node>(false);
        split_items(node.children, sibling->children,
                    [](const std::unique_ptr<Node>& n) { return n->box; });
        node.recompute_box();
        sibling->recompute_box();
        return sibling;
      }
    }
    node.recompute_box();
    return nullptr;
  }

  // Least enlargement, then smallest area, then first in child order.
  Node& pick_child(Node& node, const Mbr& box) const {
    Node* best = nullptr;
    double best_enl = 0, best_area = 0;
    for (const auto& ch : node.children) {
      const double enl = ch->box.enlargement(box);
      const double area = ch->box.area();
      if (!best || enl < best_enl ||
          (enl == best_enl && area < best_area)) {
        best = ch.get();
        best_enl = enl;
        best_area = area;
      }
    }
    return *best;
  }

  // Guttman's quadratic split. `items` keeps group one, `other` receives
  // group two; both end up within [min_children, max_children].
  template <class Item, class BoxOf>
  void split_items(std::vector<Item>& items, std::vector<Item>& other,
                   BoxOf box_of) const {
    const std::size_t n = items.size();
    // PickSeeds: the pair wasting the most area; the covering margin breaks
    // ties between degenerate point pairs.
    std::size_t s1 = 0, s2 = 1;
    double worst = -std::numeric_limits<double>::infinity();
    double worst_margin = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const Mbr cover = box_of(items[i]).expanded(box_of(items[j]));
        const double waste =
            cover.area() - box_of(items[i]).area() - box_of(items[j]).area();
        const double marg = cover.margin();
        if (waste > worst || (waste == worst && marg > worst_margin)) {
          worst = waste;
          worst_margin = marg;
          s1 = i;
          s2 = j;
        }
      }
    }

    std::vector<Item> pending;
    pending.reserve(n);
    std::vector<Item> g1, g2;
    for (std::size_t i = 0; i < n; ++i) {
      if (i == s1)
        g1.push_back(std::move(items[i]));
      else if (i == s2)
        g2.push_back(std::move(items[i]));
      else
        pending.push_back(std::move(items[i]));
    }
    Mbr b1 = box_of(g1.front());
    Mbr b2 = box_of(g2.front());

    while (!pending.empty()) {
      // Forced assignment once a group needs every remaining item to reach
      // the minimum fill.
      if (g1.size() + pending.size() == min_children_) {
        for (auto& it : pending) {
          b1.expand(box_of(it));
          g1.push_back(std::move(it));
        }
        pending.clear();
        break;
      }
      if (g2.size() + pending.size() == min_children_) {
        for (auto& it : pending) {
          b2.expand(box_of(it));
          g2.push_back(std::move(it));
        }
        pending.clear();
        break;
      }
      // PickNext: the item with the strongest preference.
      std::size_t pick = 0;
      double best_diff = -1;
      for (std::size_t i = 0; i < pending.size(); ++i) {
        const Mbr b = box_of(pending[i]);
        const double diff = std::abs(b1.enlargement(b) - b2.enlargement(b));
        if (diff > best_diff) {
          best_diff = diff;
          pick = i;
        }
      }
      Item it = std::move(pending[pick]);
      pending.erase(pending.begin() + static_cast<std::ptrdiff_t>(pick));
      const Mbr b = box_of(it);
      const double e1 = b1.enlargement(b), e2 = b2.enlargement(b);
      bool to_first;
      if (e1 != e2)
        to_first = e1 < e2;
      else if (b1.area() != b2.area())
        to_first = b1.area() < b2.area();
      else
        to_first = g1.size() <= g2.size();
      if (to_first) {
        b1.expand(b);
        g1.push_back(std::move(it));
      } else {
        b2.expand(b);
        g2.push_back(std::move(it));
      }
    }
    items = std::move(g1);
    other = std::move(g2);
  }

  void collect_containing(const Node& node, Location loc,
                          std::vector<HostId>& out, QueryStats* stats) const {
    bump_node(stats);
    if (!node.box.contains(loc)) return;
    if (node.is_leaf) {
      bump_entries(stats, node.entries.size());
      for (const auto& e : node.entries) out.push_back(e.id);
      return;
    }
    for (const auto& ch : node.children)
      if (ch->box.contains(loc)) collect_containing(*ch, loc, out, stats);
  }

  void best_leaf_dist(const Node& node, Location loc, double& best,
                      QueryStats* stats) const {
    bump_node(stats);
    if (node.is_leaf) {
      if (!node.box.contains(loc))
        best = std::min(best, node.box.min_dist(loc));
      return;
    }
    for (const auto& ch : node.children)
      if (ch->box.min_dist(loc) <= best) best_leaf_dist(*ch, loc, best, stats);
  }

  void collect_at_dist(const Node& node, Location loc, double target,
                       std::vector<HostId>& out, QueryStats* stats) const {
    bump_node(stats);
    if (node.is_leaf) {
      if (!node.box.contains(loc) && node.box.min_dist(loc) == target) {
        bump_entries(stats, node.entries.size());
        for (const auto& e : node.entries) out.push_back(e.id);
      }
      return;
    }
    for (const auto& ch : node.children)
      if (ch->box.min_dist(loc) <= target)
        collect_at_dist(*ch, loc, target, out, stats);
  }

  void collect_ring(const Node& node, Location loc, double lo, double hi,
                    const std::unordered_set<HostId>& excluded,
                    std::vector<HostId>& out, QueryStats* stats) const {
    bump_node(stats);
    if (node.box.min_dist(loc) >= hi || node.box.max_dist(loc) < lo) return;
    if (node.is_leaf) {
      bump_entries(stats, node.entries.size());
      for (const auto& e : node.entries) {
        const double d = distance(e.loc, loc);
        if (d >= lo && d < hi && !excluded.count(e.id)) out.push_back(e.id);
      }
      return;
    }
    for (const auto& ch : node.children)
      collect_ring(*ch, loc, lo, hi, excluded, out, stats);
  }

  template <class Fn>
  void visit_leaves_rec(const Node& node, Fn& fn) const {
    if (node.is_leaf) {
      fn(node.box, std::span<const Entry>(node.entries));
      return;
    }
    for (const auto& ch : node.children) visit_leaves_rec(*ch, fn);
  }

  void audit_rec(const Node& node, bool is_root, int depth, int& leaf_depth,
                 std::vector<std::string>& issues) const {
    const std::size_t fill = node.fill();
    if (is_root) {
      if (!node.is_leaf && fill < 2)
        issues.push_back("internal root with fewer than two children");
    } else if (fill < min_children_) {
      issues.push_back("underfull node at depth " + std::to_string(depth));
    }
    if (fill > max_children_)
      issues.push_back("overfull node at depth " + std::to_string(depth));

    if (node.is_leaf) {
      if (leaf_depth == -1)
        leaf_depth = depth;
      else if (leaf_depth != depth)
        issues.push_back("leaves at mixed depths");
      Mbr tight{};
      for (std::size_t i = 0; i < node.entries.size(); ++i) {
        const Mbr b = Mbr::of(node.entries[i].loc);
        if (i == 0)
          tight = b;
        else
          tight.expand(b);
        if (!node.box.contains(node.entries[i].loc))
          issues.push_back("entry outside its leaf box");
      }
      if (!node.entries.empty() && !(tight == node.box))
        issues.push_back("loose leaf box at depth " + std::to_string(depth));
      return;
    }
    Mbr tight = node.children.front()->box;
    for (const auto& ch : node.children) {
      tight.expand(ch->box);
      if (!node.box.covers(ch->box))
        issues.push_back("child box escapes its parent");
      audit_rec(*ch, false, depth + 1, leaf_depth, issues);
    }
    if (!(tight == node.box))
      issues.push_back("loose internal box at depth " + std::to_string(depth));
  }

  static void bump_node(QueryStats* stats) {
    if (stats) ++stats->nodes_visited;
  }
  static void bump_entries(QueryStats* stats, std::size_t n) {
    if (stats) stats->entries_scanned += n;
  }

  std::uint32_t max_children_;
  std::uint32_t min_children_;
  std::unique_ptr<Node> root_;
  std::unordered_set<HostId> ids_;
};

}  // namespace edgeplace
