#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "meshforge/mesh.hpp"
#include "meshforge/simplifier.hpp"

namespace meshforge {

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

/// Cone of directions: every unit vector within `angle` of `axis`.
struct NormalCone {
    Vec3 axis{0.0, 0.0, 1.0};
    double angle = std::numbers::pi;

    static NormalCone of_direction(const Vec3& unit) { return {unit, 0.0}; }
    bool contains(const Vec3& direction, double slack = 0.0) const;

    friend bool operator==(const NormalCone&, const NormalCone&) = default;
};

/// Smallest cone around the two, computed on the great circle through both axes.
NormalCone merge_cones(const NormalCone& a, const NormalCone& b);

struct VertexNode {
    NodeId id = 0;
    Vec3 position;
    std::array<NodeId, 2> children{kNoNode, kNoNode};
    NodeId parent = kNoNode;
    double cost = 0.0;
    double error_radius = 0.0;
    NormalCone cone;

    bool is_leaf() const { return children[0] == kNoNode; }

    friend bool operator==(const VertexNode&, const VertexNode&) = default;
};

/// Binary forest of merges: leaves are source vertices [0, leaf_count),
/// internal nodes follow in log order. Faces live at the leaves.
class VertexTree {
public:
    VertexTree() = default;

    /// Assembles a tree from stored arrays, deriving parents and roots.
    /// Throws FormatError(Structure) if the arrays do not form a forest.
    VertexTree(std::size_t leaf_count, std::vector<VertexNode> nodes, std::vector<Face> faces);

    std::size_t leaf_count() const { return leaf_count_; }
    std::size_t node_count() const { return nodes_.size(); }
    const VertexNode& node(NodeId id) const { return nodes_[id]; }
    const std::vector<VertexNode>& nodes() const { return nodes_; }
    const std::vector<NodeId>& roots() const { return roots_; }
    const std::vector<Face>& original_faces() const { return faces_; }

    /// Leaf descendants of `id` (contiguous in a depth-first leaf order).
    std::span<const NodeId> leaves_under(NodeId id) const;

    Box3 bounds() const;

    friend bool operator==(const VertexTree& a, const VertexTree& b)
    {
        return a.leaf_count_ == b.leaf_count_ && a.nodes_ == b.nodes_ && a.faces_ == b.faces_;
    }

private:
    void index();

    std::size_t leaf_count_ = 0;
    std::vector<VertexNode> nodes_;
    std::vector<Face> faces_;
    std::vector<NodeId> roots_;
    std::vector<NodeId> leaf_order_;
    std::vector<std::uint32_t> leaf_begin_;
    std::vector<std::uint32_t> leaf_end_;
};

/// Throws InconsistentLog when a record names a dead or unknown id.
VertexTree build_tree(const Mesh& mesh, const std::vector<ContractionRecord>& log);

/// All leaves active: equals cleanup(source mesh).
Mesh full_resolution(const VertexTree& tree);

/// Coarsest cut whose nodes all have cost <= max_error, ascending ids.
std::vector<NodeId> cut_at_error(const VertexTree& tree, double max_error);

/// Mesh of a cut: active nodes compacted in the given (ascending) order,
/// source faces mapped through proxies, degenerate and duplicate faces dropped.
Mesh extract_cut(const VertexTree& tree, const std::vector<NodeId>& active);

Mesh extract_at_error(const VertexTree& tree, double max_error);

// VTREE v1 binary container and its JSON twin.
std::vector<std::uint8_t> save_tree(const VertexTree& tree);
VertexTree load_tree(std::span<const std::uint8_t> bytes);
std::string save_tree_json(const VertexTree& tree);
VertexTree load_tree_json(const std::string& text);

void save_tree_file(const VertexTree& tree, const std::string& path, bool json = false);
/// Detects binary vs JSON by the leading magic.
VertexTree load_tree_file(const std::string& path);

}  // namespace meshforge
