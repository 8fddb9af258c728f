#include "meshforge/view_dependent.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

#include "meshforge/error.hpp"

namespace meshforge {

Camera Camera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up_hint, double fov_y,
                       double viewport_height, double near_plane)
{
    Camera c;
    c.eye = eye;
    c.forward = normalized(target - eye);
    c.up = normalized(up_hint - dot(up_hint, c.forward) * c.forward);
    c.fov_y = fov_y;
    c.viewport_height = viewport_height;
    c.near_plane = near_plane;
    c.validate();
    return c;
}

void Camera::validate() const
{
    constexpr double tol = 1e-9;
    if (!is_finite(eye) || std::abs(norm(forward) - 1.0) > tol || std::abs(norm(up) - 1.0) > tol
        || std::abs(dot(forward, up)) > tol) {
        throw std::invalid_argument("camera frame must be orthonormal");
    }
    if (!(fov_y > 0.0 && fov_y < std::numbers::pi)) throw std::invalid_argument("fov_y must lie in (0, pi)");
    if (!(viewport_height > 0.0) || !std::isfinite(viewport_height)) throw std::invalid_argument("viewport height must be positive");
    if (!(near_plane > 0.0) || !std::isfinite(near_plane)) throw std::invalid_argument("near plane must be positive");
}

double screen_space_error(const VertexNode& node, const Camera& camera)
{
    if (node.error_radius == 0.0) return 0.0;
    const double depth = dot(node.position - camera.eye, camera.forward);
    if (depth - node.error_radius <= camera.near_plane) return kInfinitePixels;
    const double d = std::max(camera.near_plane, depth);
    return node.error_radius * camera.viewport_height / (2.0 * std::tan(camera.fov_y / 2.0) * d);
}

bool is_silhouette(const VertexNode& node, const Camera& camera)
{
    if (node.cone.angle >= std::numbers::pi) return true;
    const Vec3 view = node.position - camera.eye;
    if (squared_norm(view) == 0.0) return true;
    const double theta = angle_between(node.cone.axis, view);
    return std::abs(theta - std::numbers::pi / 2.0) <= node.cone.angle;
}

void AdaptParams::validate() const
{
    if (!(tau >= 0.0)) throw std::invalid_argument("tau must be >= 0");
    if (!(tau_silhouette >= 0.0 && tau_silhouette <= tau)) throw std::invalid_argument("tau_silhouette must lie in [0, tau]");
    if (!(hysteresis >= 0.0 && hysteresis < 1.0)) throw std::invalid_argument("hysteresis must lie in [0, 1)");
}

double AdaptParams::merge_threshold(bool silhouette) const
{
    const double t = threshold(silhouette);
    return std::isinf(t) ? t : hysteresis * t;
}

// ---------------------------------------------------------------------------

ActiveFront ActiveFront::roots(const VertexTree& tree)
{
    return from_nodes(tree, tree.roots());
}

ActiveFront ActiveFront::leaves(const VertexTree& tree)
{
    std::vector<NodeId> ids(tree.leaf_count());
    for (NodeId i = 0; i < ids.size(); ++i) ids[i] = i;
    return from_nodes(tree, ids);
}

ActiveFront ActiveFront::from_nodes(const VertexTree& tree, const std::vector<NodeId>& nodes)
{
    ActiveFront front;
    front.proxy_.assign(tree.leaf_count(), kNoNode);
    for (NodeId id : nodes) {
        if (id >= tree.node_count()) throw std::invalid_argument("unknown node id");
        if (!front.active_.insert(id).second) throw std::invalid_argument("duplicate node id");
        for (NodeId leaf : tree.leaves_under(id)) {
            if (front.proxy_[leaf] != kNoNode) throw std::invalid_argument("nodes overlap: not a cut");
            front.proxy_[leaf] = id;
        }
    }
    if (std::find(front.proxy_.begin(), front.proxy_.end(), kNoNode) != front.proxy_.end()) {
        throw std::invalid_argument("nodes do not cover every leaf: not a cut");
    }
    return front;
}

void ActiveFront::split(const VertexTree& tree, NodeId node)
{
    const VertexNode& n = tree.node(node);
    if (n.is_leaf() || !active_.contains(node)) throw std::logic_error("split needs an active internal node");
    active_.erase(node);
    for (NodeId child : n.children) {
        active_.insert(child);
        for (NodeId leaf : tree.leaves_under(child)) proxy_[leaf] = child;
    }
}

void ActiveFront::merge(const VertexTree& tree, NodeId parent)
{
    const VertexNode& n = tree.node(parent);
    if (n.is_leaf() || !active_.contains(n.children[0]) || !active_.contains(n.children[1])) {
        throw std::logic_error("merge needs both children active");
    }
    active_.erase(n.children[0]);
    active_.erase(n.children[1]);
    active_.insert(parent);
    for (NodeId leaf : tree.leaves_under(parent)) proxy_[leaf] = parent;
}

bool ActiveFront::is_valid(const VertexTree& tree) const
{
    if (proxy_.size() != tree.leaf_count()) return false;
    for (NodeId id : active_) {
        if (id >= tree.node_count()) return false;
    }
    for (NodeId leaf = 0; leaf < tree.leaf_count(); ++leaf) {
        std::size_t hits = 0;
        NodeId found = kNoNode;
        for (NodeId id = leaf; id != kNoNode; id = tree.node(id).parent) {
            if (active_.contains(id)) {
                ++hits;
                found = id;
            }
        }
        if (hits != 1 || proxy_[leaf] != found) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------

AdaptStats adapt(ActiveFront& front, const VertexTree& tree, const Camera& camera, const AdaptParams& params)
{
    struct Op {
        bool split;
        NodeId node;  // split: the node; merge: the parent
        double error;
    };

    const std::vector<NodeId> snapshot(front.active().begin(), front.active().end());
    std::vector<Op> ops;
    std::vector<NodeId> splitting;

    for (NodeId id : snapshot) {
        const VertexNode& n = tree.node(id);
        if (n.is_leaf()) continue;
        const double err = screen_space_error(n, camera);
        if (err > params.threshold(is_silhouette(n, camera))) {
            ops.push_back({true, id, err});
            splitting.push_back(id);
        }
    }
    auto is_splitting = [&](NodeId id) { return std::binary_search(splitting.begin(), splitting.end(), id); };

    for (NodeId id : snapshot) {
        const NodeId parent_id = tree.node(id).parent;
        if (parent_id == kNoNode) continue;
        const VertexNode& parent = tree.node(parent_id);
        if (parent.children[0] != id) continue;  // visit each sibling pair once
        const NodeId sibling = parent.children[1];
        if (!front.active().contains(sibling) || is_splitting(id) || is_splitting(sibling)) continue;
        const double err = screen_space_error(parent, camera);
        if (err < params.merge_threshold(is_silhouette(parent, camera))) ops.push_back({false, parent_id, err});
    }

    AdaptStats stats;
    if (ops.size() > params.max_ops_per_frame) {
        std::stable_sort(ops.begin(), ops.end(), [](const Op& a, const Op& b) {
            if (a.error != b.error) return a.error > b.error;
            return a.node < b.node;
        });
        stats.deferred = ops.size() - params.max_ops_per_frame;
        ops.resize(params.max_ops_per_frame);
    }
    for (const Op& op : ops) {
        if (op.split) {
            front.split(tree, op.node);
            ++stats.splits;
        } else {
            front.merge(tree, op.node);
            ++stats.merges;
        }
    }
    front.advance_frame();
    return stats;
}

std::size_t adapt_to_fixpoint(ActiveFront& front, const VertexTree& tree, const Camera& camera,
                              const AdaptParams& params, std::size_t max_passes)
{
    std::size_t changed = 0;
    for (std::size_t pass = 0; pass < max_passes; ++pass) {
        const AdaptStats s = adapt(front, tree, camera, params);
        if (s.ops() == 0 && s.deferred == 0) break;
        ++changed;
    }
    return changed;
}

std::vector<RenderTriangle> render_set(const ActiveFront& front, const VertexTree& tree)
{
    struct Keyed {
        std::array<NodeId, 3> key;
        RenderTriangle tri;
    };
    std::vector<Keyed> found;
    for (const Face& f : tree.original_faces()) {
        const std::array<NodeId, 3> ids{front.proxy(f[0]), front.proxy(f[1]), front.proxy(f[2])};
        if (ids[0] == ids[1] || ids[1] == ids[2] || ids[0] == ids[2]) continue;
        Keyed k{ids, {ids, {tree.node(ids[0]).position, tree.node(ids[1]).position, tree.node(ids[2]).position}}};
        std::sort(k.key.begin(), k.key.end());
        found.push_back(k);
    }
    std::stable_sort(found.begin(), found.end(), [](const Keyed& a, const Keyed& b) { return a.key < b.key; });
    found.erase(std::unique(found.begin(), found.end(), [](const Keyed& a, const Keyed& b) { return a.key == b.key; }),
                found.end());
    std::vector<RenderTriangle> out;
    out.reserve(found.size());
    for (auto& k : found) out.push_back(k.tri);
    return out;
}

double max_active_error(const ActiveFront& front, const VertexTree& tree, const Camera& camera)
{
    double worst = 0.0;
    for (NodeId id : front.active()) {
        const VertexNode& n = tree.node(id);
        if (!n.is_leaf()) worst = std::max(worst, screen_space_error(n, camera));
    }
    return worst;
}

std::vector<FrameStats> flythrough(const VertexTree& tree, const std::vector<CameraKey>& path,
                                   const AdaptParams& params)
{
    if (path.empty()) throw std::invalid_argument("camera path is empty");
    params.validate();
    ActiveFront front = ActiveFront::roots(tree);
    std::vector<FrameStats> rows;
    rows.reserve(path.size());
    for (std::size_t i = 0; i < path.size(); ++i) {
        const Camera& camera = path[i].camera;
        const AdaptStats s = adapt(front, tree, camera, params);
        rows.push_back({i, front.size(), render_set(front, tree).size(), s.splits, s.merges,
                        max_active_error(front, tree, camera)});
    }
    return rows;
}

// ---------------------------------------------------------------------------

namespace {

Vec3 vec3_field(const nlohmann::json& obj, const char* key, std::size_t index)
{
    const auto& v = obj.at(key);
    if (!v.is_array() || v.size() != 3) {
        throw ParseError(std::string("camera ") + std::to_string(index) + ": '" + key + "' must be a 3-vector", 0);
    }
    return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

}  // namespace

std::vector<CameraKey> parse_camera_path(const std::string& json_text)
{
    std::vector<CameraKey> path;
    try {
        const auto doc = nlohmann::json::parse(json_text);
        if (!doc.is_array()) throw ParseError("camera path must be a JSON array", 0);
        for (std::size_t i = 0; i < doc.size(); ++i) {
            const auto& entry = doc[i];
            CameraKey key;
            key.time = entry.at("t").get<double>();
            Camera& c = key.camera;
            c.eye = vec3_field(entry, "eye", i);
            const Vec3 forward = vec3_field(entry, "forward", i);
            const Vec3 up = vec3_field(entry, "up", i);
            c.forward = normalized(forward);
            c.up = normalized(up - dot(up, c.forward) * c.forward);
            c.fov_y = entry.at("fov_y").get<double>();
            c.viewport_height = entry.at("viewport_height").get<double>();
            c.near_plane = entry.value("near", 0.01);
            try {
                c.validate();
            } catch (const std::invalid_argument& e) {
                throw ParseError("camera " + std::to_string(i) + ": " + e.what(), 0);
            }
            path.push_back(key);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad camera path: ") + e.what(), 0);
    }
    if (path.empty()) throw ParseError("camera path is empty", 0);
    return path;
}

std::string camera_path_to_json(const std::vector<CameraKey>& path)
{
    nlohmann::json doc = nlohmann::json::array();
    for (const auto& key : path) {
        const Camera& c = key.camera;
        doc.push_back({{"t", key.time},
                       {"eye", {c.eye.x, c.eye.y, c.eye.z}},
                       {"forward", {c.forward.x, c.forward.y, c.forward.z}},
                       {"up", {c.up.x, c.up.y, c.up.z}},
                       {"fov_y", c.fov_y},
                       {"viewport_height", c.viewport_height},
                       {"near", c.near_plane}});
    }
    return doc.dump(2);
}

void write_stats_csv(const std::vector<FrameStats>& stats, std::ostream& out)
{
    out << "frame,active,triangles,splits,merges,max_err_px\n";
    for (const auto& s : stats) {
        out << s.frame << ',' << s.active << ',' << s.triangles << ',' << s.splits << ',' << s.merges << ','
            << format_double(s.max_err_px) << '\n';
    }
}

}  // namespace meshforge
