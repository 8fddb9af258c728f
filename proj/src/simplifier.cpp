#include "meshforge/simplifier.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "meshforge/error.hpp"

namespace meshforge {

void SimplifyConfig::validate() const
{
    if (!(pair_threshold >= 0.0)) throw std::invalid_argument("pair threshold must be >= 0");
}

Placement place(const Quadric& q, const Vec3& v1, const Vec3& v2, PlacementPolicy policy)
{
    switch (policy) {
    case PlacementPolicy::Optimal:
        return placement(q, v1, v2);
    case PlacementPolicy::Subset:
        return best_of_subset(q, v1, v2);
    case PlacementPolicy::Midpoint: {
        const Vec3 mid = 0.5 * (v1 + v2);
        return {mid, q.eval(mid)};
    }
    }
    return placement(q, v1, v2);
}

// ---------------------------------------------------------------------------
// candidate pairs

namespace {

struct CellHash {
    std::size_t operator()(const std::array<std::int64_t, 3>& c) const
    {
        std::uint64_t h = 1469598103934665603ull;
        for (std::int64_t v : c) {
            h ^= static_cast<std::uint64_t>(v);
            h *= 1099511628211ull;
        }
        return h;
    }
};

}  // namespace

std::vector<std::pair<VertexId, VertexId>> select_pairs(const Mesh& mesh, const Adjacency& adjacency,
                                                        double threshold)
{
    if (!(threshold >= 0.0)) throw std::invalid_argument("pair threshold must be >= 0");
    std::vector<std::pair<VertexId, VertexId>> pairs = adjacency.edges();
    if (threshold == 0.0 || mesh.positions.size() < 2) return pairs;

    const std::size_t n = mesh.positions.size();
    const std::size_t cap = 16 * n;
    std::size_t extra = 0;
    auto consider = [&](VertexId i, VertexId j) {
        if (distance(mesh.positions[i], mesh.positions[j]) < threshold && !adjacency.has_edge(i, j)) {
            pairs.emplace_back(std::min(i, j), std::max(i, j));
            if (++extra > cap) throw PairExplosion(cap, n);
        }
    };

    const Box3 box = bounding_box(mesh);
    const Vec3 ext = box.extent();
    const double span = std::max({ext.x, ext.y, ext.z});
    if (std::isinf(threshold) || span / threshold > 1e15) {
        // Cell coordinates would overflow or the grid would be a single cell.
        for (VertexId i = 0; i < n; ++i) {
            for (VertexId j = i + 1; j < n; ++j) consider(i, j);
        }
    } else {
        auto cell_of = [&](const Vec3& p) {
            return std::array<std::int64_t, 3>{static_cast<std::int64_t>(std::floor((p.x - box.lo.x) / threshold)),
                                               static_cast<std::int64_t>(std::floor((p.y - box.lo.y) / threshold)),
                                               static_cast<std::int64_t>(std::floor((p.z - box.lo.z) / threshold))};
        };
        std::unordered_map<std::array<std::int64_t, 3>, std::vector<VertexId>, CellHash> grid;
        for (VertexId i = 0; i < n; ++i) grid[cell_of(mesh.positions[i])].push_back(i);
        for (VertexId i = 0; i < n; ++i) {
            const auto c = cell_of(mesh.positions[i]);
            for (std::int64_t dz = -1; dz <= 1; ++dz) {
                for (std::int64_t dy = -1; dy <= 1; ++dy) {
                    for (std::int64_t dx = -1; dx <= 1; ++dx) {
                        auto it = grid.find({c[0] + dx, c[1] + dy, c[2] + dz});
                        if (it == grid.end()) continue;
                        for (VertexId j : it->second) {
                            if (j > i) consider(i, j);
                        }
                    }
                }
            }
        }
    }
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    return pairs;
}

// ---------------------------------------------------------------------------
// contraction state

ContractionState::ContractionState(const Mesh& source)
{
    source.validate();
    const Mesh mesh = cleanup(source);
    const Adjacency adjacency(mesh);
    const std::size_t n = mesh.positions.size();

    positions_ = mesh.positions;
    quadrics_.resize(n);
    for (VertexId v = 0; v < n; ++v) quadrics_[v] = vertex_quadric(mesh, adjacency, v);
    alive_.assign(n, 1);
    generation_.assign(n, 0);
    faces_ = mesh.faces;
    face_alive_.assign(faces_.size(), 1);
    vertex_faces_.resize(n);
    for (VertexId v = 0; v < n; ++v) vertex_faces_[v] = adjacency.faces_of(v);
    source_vertices_ = n;
    live_vertices_ = n;
    live_faces_ = faces_.size();
}

ContractionRecord ContractionState::contract(VertexId a, VertexId b, const Vec3& position)
{
    if (!alive(a)) throw DeadVertex(a);
    if (!alive(b)) throw DeadVertex(b);
    if (a == b) throw std::invalid_argument("cannot contract a vertex with itself");

    const auto k = static_cast<VertexId>(positions_.size());
    positions_.push_back(position);
    quadrics_.push_back(quadrics_[a] + quadrics_[b]);
    alive_.push_back(1);
    generation_.push_back(0);

    ContractionRecord record;
    record.removed_a = a;
    record.removed_b = b;
    record.created = k;
    record.position = position;
    record.cost = quadrics_[k].eval(position);

    std::vector<std::uint32_t> kept;
    for (VertexId v : {a, b}) {
        for (std::uint32_t f : vertex_faces_[v]) {
            if (!face_alive_[f]) continue;
            Face& face = faces_[f];
            if (face[0] == k || face[1] == k || face[2] == k) continue;  // already rewritten via a
            for (VertexId& corner : face) {
                if (corner == a || corner == b) corner = k;
            }
            if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2]) {
                face_alive_[f] = 0;
                --live_faces_;
                record.faces_removed.push_back(f);
                record.was_edge = true;
            } else {
                kept.push_back(f);
            }
        }
    }
    std::sort(kept.begin(), kept.end());
    std::sort(record.faces_removed.begin(), record.faces_removed.end());
    vertex_faces_.push_back(std::move(kept));

    for (VertexId v : {a, b}) {
        alive_[v] = 0;
        ++generation_[v];
        vertex_faces_[v].clear();
        vertex_faces_[v].shrink_to_fit();
    }
    --live_vertices_;
    return record;
}

std::vector<Face> ContractionState::live_faces() const
{
    std::vector<Face> out;
    out.reserve(live_faces_);
    for (std::size_t f = 0; f < faces_.size(); ++f) {
        if (face_alive_[f]) out.push_back(faces_[f]);
    }
    return out;
}

bool ContractionState::shares_face(VertexId a, VertexId b) const
{
    if (!alive(a) || !alive(b)) return false;
    for (std::uint32_t f : vertex_faces_[a]) {
        if (!face_alive_[f]) continue;
        const Face& face = faces_[f];
        if (face[0] == b || face[1] == b || face[2] == b) return true;
    }
    return false;
}

Mesh ContractionState::to_mesh() const
{
    Mesh out;
    std::vector<VertexId> remap(positions_.size(), 0);
    for (VertexId v = 0; v < positions_.size(); ++v) {
        if (!alive_[v]) continue;
        remap[v] = static_cast<VertexId>(out.positions.size());
        out.positions.push_back(positions_[v]);
    }
    for (std::size_t f = 0; f < faces_.size(); ++f) {
        if (!face_alive_[f]) continue;
        const Face& face = faces_[f];
        out.faces.push_back({remap[face[0]], remap[face[1]], remap[face[2]]});
    }
    return out;
}

// ---------------------------------------------------------------------------
// greedy driver

bool Simplifier::ByCost::operator()(const CandidatePair& a, const CandidatePair& b) const
{
    // priority_queue keeps the greatest on top; invert for a min-heap.
    if (a.cost != b.cost) return a.cost > b.cost;
    if (a.i != b.i) return a.i > b.i;
    return a.j > b.j;
}

CandidatePair Simplifier::evaluate(VertexId i, VertexId j) const
{
    if (i > j) std::swap(i, j);
    const Quadric q = state_.quadric(i) + state_.quadric(j);
    const Placement p = place(q, state_.position(i), state_.position(j), config_.placement);
    return {i, j, p.cost, p.position, state_.generation(i), state_.generation(j)};
}

Simplifier::Simplifier(const Mesh& mesh, const SimplifyConfig& config) : config_(config), state_(mesh)
{
    config_.validate();
    const Mesh cleaned = cleanup(mesh);
    const Adjacency adjacency(cleaned);
    const auto pairs = select_pairs(cleaned, adjacency, config_.pair_threshold);

    partners_.resize(cleaned.positions.size());
    std::vector<CandidatePair> initial;
    initial.reserve(pairs.size());
    for (const auto& [i, j] : pairs) {
        partners_[i].push_back(j);
        partners_[j].push_back(i);
        initial.push_back(evaluate(i, j));
    }
    heap_ = decltype(heap_)(ByCost{}, std::move(initial));
}

std::optional<ContractionRecord> Simplifier::step()
{
    while (!heap_.empty()) {
        const CandidatePair top = heap_.top();
        heap_.pop();
        if (!state_.alive(top.i) || !state_.alive(top.j)) continue;
        if (top.stamp_i != state_.generation(top.i) || top.stamp_j != state_.generation(top.j)) continue;

        ContractionRecord record = state_.contract(top.i, top.j, top.target);
        const VertexId k = record.created;

        std::vector<VertexId> merged;
        for (VertexId v : {top.i, top.j}) {
            for (VertexId p : partners_[v]) {
                if (p != top.i && p != top.j && state_.alive(p)) merged.push_back(p);
            }
            partners_[v].clear();
            partners_[v].shrink_to_fit();
        }
        std::sort(merged.begin(), merged.end());
        merged.erase(std::unique(merged.begin(), merged.end()), merged.end());
        for (VertexId p : merged) {
            auto& list = partners_[p];
            std::erase_if(list, [&](VertexId x) { return !state_.alive(x); });
            list.push_back(k);
            heap_.push(evaluate(p, k));
        }
        partners_.push_back(std::move(merged));

        log_.push_back(record);
        return record;
    }
    return std::nullopt;
}

std::vector<CandidatePair> Simplifier::live_pairs() const
{
    std::vector<CandidatePair> out;
    for (VertexId a = 0; a < partners_.size(); ++a) {
        if (!state_.alive(a)) continue;
        for (VertexId b : partners_[a]) {
            if (b > a && state_.alive(b)) out.push_back(evaluate(a, b));
        }
    }
    std::sort(out.begin(), out.end(), [](const CandidatePair& x, const CandidatePair& y) {
        return std::tie(x.i, x.j) < std::tie(y.i, y.j);
    });
    out.erase(std::unique(out.begin(), out.end(),
                          [](const CandidatePair& x, const CandidatePair& y) { return x.i == y.i && x.j == y.j; }),
              out.end());
    return out;
}

SimplifyResult Simplifier::run()
{
    while (!target_met()) {
        if (!step()) break;
    }
    SimplifyResult result;
    result.mesh = state_.to_mesh();
    result.log = log_;
    result.target_reached = target_met();
    for (const auto& r : log_) result.total_cost += r.cost;
    return result;
}

SimplifyResult simplify(const Mesh& mesh, const SimplifyConfig& config)
{
    Simplifier simplifier(mesh, config);
    return simplifier.run();
}

Mesh replay(const Mesh& mesh, const std::vector<ContractionRecord>& log)
{
    ContractionState state(mesh);
    for (const auto& r : log) {
        if (r.created != state.id_count()) {
            throw InconsistentLog("record creates id " + std::to_string(r.created) + ", expected "
                                  + std::to_string(state.id_count()));
        }
        state.contract(r.removed_a, r.removed_b, r.position);
    }
    return state.to_mesh();
}

// ---------------------------------------------------------------------------
// clog text format

void write_clog(const std::vector<ContractionRecord>& log, std::ostream& out)
{
    for (const auto& r : log) {
        out << "C " << r.removed_a << ' ' << r.removed_b << ' ' << r.created << ' ' << format_double(r.position.x)
            << ' ' << format_double(r.position.y) << ' ' << format_double(r.position.z) << ' '
            << format_double(r.cost) << '\n';
    }
}

std::vector<ContractionRecord> read_clog(std::istream& in)
{
    std::vector<ContractionRecord> log;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        std::istringstream fields(line);
        std::string tag;
        if (!(fields >> tag)) continue;
        if (tag != "C") throw ParseError("expected record tag 'C'", line_no);
        std::string tokens[7];
        for (auto& t : tokens) {
            if (!(fields >> t)) throw ParseError("record needs 7 fields", line_no);
        }
        std::string trailing;
        if (fields >> trailing) throw ParseError("unexpected trailing field", line_no);

        ContractionRecord r;
        try {
            auto parse_id = [&](const std::string& s) {
                std::size_t used = 0;
                const unsigned long v = std::stoul(s, &used);
                if (used != s.size() || s[0] == '-' || v > 0xFFFFFFFEul) throw std::invalid_argument(s);
                return static_cast<VertexId>(v);
            };
            auto parse_real = [&](const std::string& s) {
                std::size_t used = 0;
                const double v = std::stod(s, &used);
                if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
                return v;
            };
            r.removed_a = parse_id(tokens[0]);
            r.removed_b = parse_id(tokens[1]);
            r.created = parse_id(tokens[2]);
            r.position = {parse_real(tokens[3]), parse_real(tokens[4]), parse_real(tokens[5])};
            r.cost = parse_real(tokens[6]);
        } catch (const std::logic_error&) {
            throw ParseError("malformed record field", line_no);
        }
        log.push_back(r);
    }
    return log;
}

}  // namespace meshforge
