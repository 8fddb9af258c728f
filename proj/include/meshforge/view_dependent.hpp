#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "meshforge/vertex_tree.hpp"

namespace meshforge {

struct Camera {
    Vec3 eye;
    Vec3 forward{0.0, 0.0, -1.0};
    Vec3 up{0.0, 1.0, 0.0};
    double fov_y = std::numbers::pi / 3.0;
    double viewport_height = 1080.0;
    double near_plane = 0.01;

    /// Orthonormal frame looking from `eye` at `target`.
    static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up_hint,
                          double fov_y = std::numbers::pi / 3.0, double viewport_height = 1080.0,
                          double near_plane = 0.01);

    /// Throws std::invalid_argument if the frame is not orthonormal within 1e-9
    /// or the projection parameters are out of range.
    void validate() const;
};

inline constexpr double kInfinitePixels = std::numeric_limits<double>::infinity();

/// Pixels subtended by the node's error sphere; +inf when the sphere reaches
/// the near plane.
double screen_space_error(const VertexNode& node, const Camera& camera);

/// True when the node's normal cone contains directions perpendicular to the
/// view ray through its position.
bool is_silhouette(const VertexNode& node, const Camera& camera);

struct AdaptParams {
    double tau = 1.0;             // split threshold, pixels
    double tau_silhouette = 1.0;  // <= tau
    double hysteresis = 0.5;      // merge when parent error < hysteresis * tau
    std::size_t max_ops_per_frame = std::numeric_limits<std::size_t>::max();

    void validate() const;
    double threshold(bool silhouette) const { return silhouette ? tau_silhouette : tau; }
    double merge_threshold(bool silhouette) const;
};

/// A cut through the vertex forest plus the leaf -> active ancestor map.
class ActiveFront {
public:
    static ActiveFront roots(const VertexTree& tree);
    static ActiveFront leaves(const VertexTree& tree);
    /// Throws std::invalid_argument if `nodes` is not a cut.
    static ActiveFront from_nodes(const VertexTree& tree, const std::vector<NodeId>& nodes);

    const std::set<NodeId>& active() const { return active_; }
    NodeId proxy(NodeId leaf) const { return proxy_[leaf]; }
    const std::vector<NodeId>& proxies() const { return proxy_; }
    std::uint64_t frame() const { return frame_; }
    std::size_t size() const { return active_.size(); }

    void split(const VertexTree& tree, NodeId node);
    void merge(const VertexTree& tree, NodeId parent);
    void advance_frame() { ++frame_; }

    /// Exhaustive check: one active node on every leaf's root path, and the
    /// proxy map agrees.
    bool is_valid(const VertexTree& tree) const;

private:
    std::set<NodeId> active_;
    std::vector<NodeId> proxy_;
    std::uint64_t frame_ = 0;
};

struct AdaptStats {
    std::size_t splits = 0;
    std::size_t merges = 0;
    std::size_t deferred = 0;

    std::size_t ops() const { return splits + merges; }
};

/// One pass of split/merge decisions over the current active set.
AdaptStats adapt(ActiveFront& front, const VertexTree& tree, const Camera& camera, const AdaptParams& params);

/// Repeats adapt until a pass changes nothing; returns the number of passes
/// that made changes. Stops after `max_passes` passes.
std::size_t adapt_to_fixpoint(ActiveFront& front, const VertexTree& tree, const Camera& camera,
                              const AdaptParams& params, std::size_t max_passes = 100000);

struct RenderTriangle {
    std::array<NodeId, 3> ids;
    std::array<Vec3, 3> positions;
};

/// Proxy-mapped source faces with three distinct proxies, deduplicated by
/// unordered id triple, sorted by that triple.
std::vector<RenderTriangle> render_set(const ActiveFront& front, const VertexTree& tree);

/// Largest screen error among active internal nodes (0 if none).
double max_active_error(const ActiveFront& front, const VertexTree& tree, const Camera& camera);

struct CameraKey {
    double time = 0.0;
    Camera camera;
};

struct FrameStats {
    std::size_t frame = 0;
    std::size_t active = 0;
    std::size_t triangles = 0;
    std::size_t splits = 0;
    std::size_t merges = 0;
    double max_err_px = 0.0;

    friend bool operator==(const FrameStats&, const FrameStats&) = default;
};

/// Starts from the roots-only front and runs one adapt per camera key.
std::vector<FrameStats> flythrough(const VertexTree& tree, const std::vector<CameraKey>& path,
                                   const AdaptParams& params);

/// JSON array of {t, eye, forward, up, fov_y, viewport_height[, near]}.
/// Throws ParseError.
std::vector<CameraKey> parse_camera_path(const std::string& json_text);
std::string camera_path_to_json(const std::vector<CameraKey>& path);

/// `frame,active,triangles,splits,merges,max_err_px` rows.
void write_stats_csv(const std::vector<FrameStats>& stats, std::ostream& out);

}  // namespace meshforge
