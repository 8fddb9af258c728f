#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "meshforge/mesh.hpp"
#include "meshforge/quadric.hpp"

namespace meshforge {

enum class PlacementPolicy {
    Optimal,   // quadric minimizer, subset rule when singular
    Subset,    // best of {v1, v2, midpoint}
    Midpoint,  // always the midpoint
};

struct SimplifyConfig {
    std::size_t target_faces = 0;
    /// Non-edge pairs closer than this are candidates too; 0 disables them.
    double pair_threshold = 0.0;
    PlacementPolicy placement = PlacementPolicy::Optimal;

    void validate() const;
};

Placement place(const Quadric& q, const Vec3& v1, const Vec3& v2, PlacementPolicy policy);

/// One merge event. Ids of created vertices follow the vertices of the
/// source mesh in creation order.
struct ContractionRecord {
    VertexId removed_a = 0;
    VertexId removed_b = 0;
    VertexId created = 0;
    Vec3 position;
    double cost = 0.0;
    /// Face ids (into the cleaned source face list) retired by this merge.
    std::vector<std::uint32_t> faces_removed;
    bool was_edge = false;

    friend bool operator==(const ContractionRecord&, const ContractionRecord&) = default;
};

struct CandidatePair {
    VertexId i = 0;  // i < j
    VertexId j = 0;
    double cost = 0.0;
    Vec3 target;
    std::uint32_t stamp_i = 0;
    std::uint32_t stamp_j = 0;
};

/// Canonical (i < j) candidate pairs: every mesh edge plus every non-edge
/// pair closer than `threshold`. Throws PairExplosion past 16 non-edge pairs
/// per vertex.
std::vector<std::pair<VertexId, VertexId>> select_pairs(const Mesh& mesh, const Adjacency& adjacency,
                                                        double threshold);

/// Mutable mesh under contraction. Faces are the cleaned faces of the source
/// mesh; vertex ids grow monotonically and are never reused.
class ContractionState {
public:
    explicit ContractionState(const Mesh& mesh);

    ContractionRecord contract(VertexId a, VertexId b, const Vec3& position);

    bool alive(VertexId v) const { return v < alive_.size() && alive_[v]; }
    const Vec3& position(VertexId v) const { return positions_[v]; }
    const Quadric& quadric(VertexId v) const { return quadrics_[v]; }
    std::uint32_t generation(VertexId v) const { return generation_[v]; }

    std::size_t id_count() const { return positions_.size(); }
    std::size_t source_vertex_count() const { return source_vertices_; }
    std::size_t live_vertex_count() const { return live_vertices_; }
    std::size_t live_face_count() const { return live_faces_; }

    /// Live faces in face-id order, corners in current ids.
    std::vector<Face> live_faces() const;
    /// True if some live face contains both a and b.
    bool shares_face(VertexId a, VertexId b) const;

    /// Alive vertices in id order, live faces remapped in face-id order.
    /// Coincident faces created by contraction are kept.
    Mesh to_mesh() const;

private:
    std::vector<Vec3> positions_;
    std::vector<Quadric> quadrics_;
    std::vector<char> alive_;
    std::vector<std::uint32_t> generation_;
    std::vector<Face> faces_;
    std::vector<char> face_alive_;
    std::vector<std::vector<std::uint32_t>> vertex_faces_;
    std::size_t source_vertices_ = 0;
    std::size_t live_vertices_ = 0;
    std::size_t live_faces_ = 0;
};

struct SimplifyResult {
    Mesh mesh;
    std::vector<ContractionRecord> log;
    bool target_reached = true;
    double total_cost = 0.0;
};

/// Greedy min-cost pair contraction driven by a lazy-deletion heap.
class Simplifier {
public:
    Simplifier(const Mesh& mesh, const SimplifyConfig& config);

    /// Contracts the cheapest live pair; nullopt once no live pair remains.
    std::optional<ContractionRecord> step();
    bool target_met() const { return state_.live_face_count() <= config_.target_faces; }
    SimplifyResult run();

    const ContractionState& state() const { return state_; }
    const SimplifyConfig& config() const { return config_; }

    /// Current candidate pairs with freshly evaluated costs, sorted by (i, j).
    std::vector<CandidatePair> live_pairs() const;

private:
    struct ByCost {
        bool operator()(const CandidatePair& a, const CandidatePair& b) const;
    };

    CandidatePair evaluate(VertexId i, VertexId j) const;

    SimplifyConfig config_;
    ContractionState state_;
    std::vector<std::vector<VertexId>> partners_;
    std::priority_queue<CandidatePair, std::vector<CandidatePair>, ByCost> heap_;
    std::vector<ContractionRecord> log_;
};

SimplifyResult simplify(const Mesh& mesh, const SimplifyConfig& config);

/// Applies a contraction log to `mesh` through ContractionState::contract.
Mesh replay(const Mesh& mesh, const std::vector<ContractionRecord>& log);

/// Line format: `C a b k x y z cost`; blank lines and `#` comments ignored.
void write_clog(const std::vector<ContractionRecord>& log, std::ostream& out);
std::vector<ContractionRecord> read_clog(std::istream& in);

}  // namespace meshforge
