#include "meshforge/vertex_tree.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <system_error>

#include <json.hpp>
#include <zlib.h>

#include "meshforge/error.hpp"
#include "meshforge/quadric.hpp"

namespace meshforge {

bool NormalCone::contains(const Vec3& direction, double slack) const
{
    if (angle >= std::numbers::pi) return true;
    return angle_between(axis, direction) <= angle + slack;
}

NormalCone merge_cones(const NormalCone& a, const NormalCone& b)
{
    constexpr double pi = std::numbers::pi;
    if (a.angle >= pi || b.angle >= pi) return {a.axis, pi};
    const double phi = angle_between(a.axis, b.axis);
    if (phi + b.angle <= a.angle) return a;
    if (phi + a.angle <= b.angle) return b;
    const double half = 0.5 * (a.angle + phi + b.angle);
    if (half >= pi) return {a.axis, pi};
    const Vec3 across = b.axis - dot(a.axis, b.axis) * a.axis;
    if (norm(across) < 1e-12) return {a.axis, pi};  // antiparallel axes: no unique great circle
    const double turn = half - a.angle;
    const Vec3 axis = normalized(std::cos(turn) * a.axis + std::sin(turn) * normalized(across));
    return {axis, half};
}

// ---------------------------------------------------------------------------

VertexTree::VertexTree(std::size_t leaf_count, std::vector<VertexNode> nodes, std::vector<Face> faces)
    : leaf_count_(leaf_count), nodes_(std::move(nodes)), faces_(std::move(faces))
{
    auto fail = [](const std::string& what) { throw FormatError(FormatError::Kind::Structure, what); };
    if (leaf_count_ > nodes_.size()) fail("leaf count exceeds node count");
    if (nodes_.size() >= kNoNode) fail("too many nodes");
    for (NodeId id = 0; id < nodes_.size(); ++id) {
        VertexNode& n = nodes_[id];
        n.id = id;
        n.parent = kNoNode;
        if (!is_finite(n.position) || !std::isfinite(n.cost) || !std::isfinite(n.error_radius) || n.cost < 0
            || n.error_radius < 0 || !(n.cone.angle >= 0 && n.cone.angle <= std::numbers::pi)
            || !is_finite(n.cone.axis)) {
            fail("node " + std::to_string(id) + " has invalid attributes");
        }
        const bool leaf = id < leaf_count_;
        if (leaf != n.is_leaf()) fail("node " + std::to_string(id) + " has the wrong child count");
        if (!leaf && (n.children[1] == kNoNode || n.children[0] == n.children[1])) {
            fail("node " + std::to_string(id) + " needs two distinct children");
        }
    }
    for (NodeId id = static_cast<NodeId>(leaf_count_); id < nodes_.size(); ++id) {
        for (NodeId c : nodes_[id].children) {
            if (c >= id) fail("child id must precede its parent");
            if (nodes_[c].parent != kNoNode) fail("node " + std::to_string(c) + " has two parents");
            nodes_[c].parent = id;
        }
    }
    for (const Face& f : faces_) {
        for (VertexId v : f) {
            if (v >= leaf_count_) fail("face corner is not a leaf");
        }
    }
    index();
}

void VertexTree::index()
{
    roots_.clear();
    for (const auto& n : nodes_) {
        if (n.parent == kNoNode) roots_.push_back(n.id);
    }
    leaf_order_.clear();
    leaf_order_.reserve(leaf_count_);
    leaf_begin_.assign(nodes_.size(), 0);
    leaf_end_.assign(nodes_.size(), 0);

    // Post-order walk: a node's leaves are the concatenation of its children's.
    std::vector<std::pair<NodeId, bool>> stack;
    for (NodeId root : roots_) {
        stack.push_back({root, false});
        while (!stack.empty()) {
            auto [id, expanded] = stack.back();
            stack.pop_back();
            const VertexNode& n = nodes_[id];
            if (n.is_leaf()) {
                leaf_begin_[id] = static_cast<std::uint32_t>(leaf_order_.size());
                leaf_order_.push_back(id);
                leaf_end_[id] = leaf_begin_[id] + 1;
            } else if (expanded) {
                leaf_begin_[id] = leaf_begin_[n.children[0]];
                leaf_end_[id] = leaf_end_[n.children[1]];
            } else {
                stack.push_back({id, true});
                stack.push_back({n.children[1], false});
                stack.push_back({n.children[0], false});
            }
        }
    }
}

std::span<const NodeId> VertexTree::leaves_under(NodeId id) const
{
    return std::span<const NodeId>(leaf_order_).subspan(leaf_begin_[id], leaf_end_[id] - leaf_begin_[id]);
}

Box3 VertexTree::bounds() const
{
    Box3 box;
    for (const auto& n : nodes_) box.extend(n.position);
    return box;
}

VertexTree build_tree(const Mesh& mesh, const std::vector<ContractionRecord>& log)
{
    mesh.validate();
    const Mesh cleaned = cleanup(mesh);
    const std::size_t leaves = cleaned.positions.size();

    std::vector<VertexNode> nodes(leaves);
    std::vector<std::vector<Vec3>> normals(leaves);
    for (const Face& f : cleaned.faces) {
        if (auto plane = try_plane_of_triangle(cleaned.positions[f[0]], cleaned.positions[f[1]],
                                               cleaned.positions[f[2]])) {
            for (VertexId v : f) normals[v].push_back(plane->normal());
        }
    }
    for (NodeId id = 0; id < leaves; ++id) {
        VertexNode& n = nodes[id];
        n.id = id;
        n.position = cleaned.positions[id];
        if (!normals[id].empty()) {
            n.cone = NormalCone::of_direction(normals[id][0]);
            for (std::size_t k = 1; k < normals[id].size(); ++k) {
                n.cone = merge_cones(n.cone, NormalCone::of_direction(normals[id][k]));
            }
        }
    }

    std::vector<char> taken(leaves + log.size(), 0);
    for (std::size_t r = 0; r < log.size(); ++r) {
        const ContractionRecord& rec = log[r];
        const NodeId id = static_cast<NodeId>(leaves + r);
        if (rec.created != id) {
            throw InconsistentLog("record " + std::to_string(r) + " creates id " + std::to_string(rec.created)
                                  + ", expected " + std::to_string(id));
        }
        for (VertexId child : {rec.removed_a, rec.removed_b}) {
            if (child >= id) throw InconsistentLog("record " + std::to_string(r) + " names unknown vertex " + std::to_string(child));
            if (taken[child]) throw InconsistentLog("record " + std::to_string(r) + " names dead vertex " + std::to_string(child));
        }
        if (rec.removed_a == rec.removed_b) throw InconsistentLog("record " + std::to_string(r) + " merges a vertex with itself");
        if (!is_finite(rec.position) || !std::isfinite(rec.cost) || rec.cost < 0) {
            throw InconsistentLog("record " + std::to_string(r) + " has a non-finite position or cost");
        }
        taken[rec.removed_a] = taken[rec.removed_b] = 1;

        VertexNode n;
        n.id = id;
        n.position = rec.position;
        n.children = {rec.removed_a, rec.removed_b};
        n.cost = rec.cost;
        const VertexNode& left = nodes[rec.removed_a];
        const VertexNode& right = nodes[rec.removed_b];
        n.error_radius = std::max(left.error_radius + distance(n.position, left.position),
                                  right.error_radius + distance(n.position, right.position));
        n.cone = merge_cones(left.cone, right.cone);
        nodes.push_back(n);
    }
    return VertexTree(leaves, std::move(nodes), cleaned.faces);
}

Mesh full_resolution(const VertexTree& tree)
{
    Mesh m;
    m.positions.reserve(tree.leaf_count());
    for (NodeId id = 0; id < tree.leaf_count(); ++id) m.positions.push_back(tree.node(id).position);
    m.faces = cleanup_faces(tree.original_faces());
    return m;
}

std::vector<NodeId> cut_at_error(const VertexTree& tree, double max_error)
{
    if (!(max_error >= 0.0)) throw std::invalid_argument("error bound must be >= 0");
    std::vector<NodeId> active;
    std::vector<NodeId> stack(tree.roots().rbegin(), tree.roots().rend());
    while (!stack.empty()) {
        const NodeId id = stack.back();
        stack.pop_back();
        const VertexNode& n = tree.node(id);
        if (n.cost <= max_error || n.is_leaf()) {
            active.push_back(id);
        } else {
            stack.push_back(n.children[1]);
            stack.push_back(n.children[0]);
        }
    }
    std::sort(active.begin(), active.end());
    return active;
}

Mesh extract_cut(const VertexTree& tree, const std::vector<NodeId>& active)
{
    constexpr VertexId unset = kNoNode;
    std::vector<VertexId> proxy(tree.leaf_count(), unset);
    Mesh m;
    for (NodeId id : active) {
        if (id >= tree.node_count()) throw std::invalid_argument("unknown node in cut");
        const auto slot = static_cast<VertexId>(m.positions.size());
        m.positions.push_back(tree.node(id).position);
        for (NodeId leaf : tree.leaves_under(id)) {
            if (proxy[leaf] != unset) throw std::invalid_argument("nodes overlap: not a cut");
            proxy[leaf] = slot;
        }
    }
    if (std::find(proxy.begin(), proxy.end(), unset) != proxy.end()) {
        throw std::invalid_argument("nodes do not cover every leaf: not a cut");
    }
    std::vector<Face> faces;
    faces.reserve(tree.original_faces().size());
    for (const Face& f : tree.original_faces()) faces.push_back({proxy[f[0]], proxy[f[1]], proxy[f[2]]});
    m.faces = cleanup_faces(faces);
    return m;
}

Mesh extract_at_error(const VertexTree& tree, double max_error)
{
    return extract_cut(tree, cut_at_error(tree, max_error));
}

// ---------------------------------------------------------------------------
// VTREE v1

namespace {

constexpr std::uint8_t kMagic[8] = {'V', 'T', 'R', 'E', 'E', 0, 0, 1};
constexpr std::size_t kVersionByte = 7;

nlohmann::json header_json(const VertexTree& tree)
{
    const Box3 box = tree.bounds();
    const Vec3 lo = box.empty() ? Vec3{} : box.lo;
    const Vec3 hi = box.empty() ? Vec3{} : box.hi;
    return {{"leaf_count", tree.leaf_count()},
            {"node_count", tree.node_count()},
            {"face_count", tree.original_faces().size()},
            {"bbox", {{"min", {lo.x, lo.y, lo.z}}, {"max", {hi.x, hi.y, hi.z}}}}};
}

class Writer {
public:
    void bytes(const void* data, std::size_t n)
    {
        const auto* p = static_cast<const std::uint8_t*>(data);
        out.insert(out.end(), p, p + n);
    }
    void u32(std::uint32_t v)
    {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v)
    {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
    }
    std::vector<std::uint8_t> out;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}
    std::uint32_t u32()
    {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(data_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    double f64()
    {
        need(8);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= std::uint64_t(data_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return std::bit_cast<double>(bits);
    }
    std::string text(std::size_t n)
    {
        need(n);
        std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    std::size_t remaining() const { return data_.size() - pos_; }

private:
    void need(std::size_t n) const
    {
        if (remaining() < n) throw FormatError(FormatError::Kind::Structure, "unexpected end of VTREE data");
    }
    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

std::uint32_t crc_of(std::span<const std::uint8_t> data)
{
    uLong crc = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed in chunks.
    std::size_t offset = 0;
    while (offset < data.size()) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(data.size() - offset, 1u << 30));
        crc = crc32(crc, data.data() + offset, chunk);
        offset += chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

std::size_t as_count(const nlohmann::json& j, const char* key)
{
    if (!j.contains(key) || !j[key].is_number_unsigned()) {
        throw FormatError(FormatError::Kind::Structure, std::string("missing or invalid '") + key + "'");
    }
    return j[key].get<std::size_t>();
}

}  // namespace

std::vector<std::uint8_t> save_tree(const VertexTree& tree)
{
    Writer w;
    w.bytes(kMagic, sizeof kMagic);
    const std::string header = header_json(tree).dump();
    w.u32(static_cast<std::uint32_t>(header.size()));
    w.bytes(header.data(), header.size());
    const auto& nodes = tree.nodes();
    for (const auto& n : nodes) {
        w.f64(n.position.x);
        w.f64(n.position.y);
        w.f64(n.position.z);
    }
    for (const auto& n : nodes) w.f64(n.cost);
    for (const auto& n : nodes) w.f64(n.error_radius);
    for (const auto& n : nodes) {
        w.f64(n.cone.axis.x);
        w.f64(n.cone.axis.y);
        w.f64(n.cone.axis.z);
        w.f64(n.cone.angle);
    }
    for (std::size_t id = tree.leaf_count(); id < nodes.size(); ++id) {
        w.u32(nodes[id].children[0]);
        w.u32(nodes[id].children[1]);
    }
    for (const Face& f : tree.original_faces()) {
        for (VertexId v : f) w.u32(v);
    }
    w.u32(crc_of(w.out));
    return std::move(w.out);
}

VertexTree load_tree(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() >= sizeof kMagic) {
        if (std::memcmp(bytes.data(), kMagic, kVersionByte) != 0) {
            throw FormatError(FormatError::Kind::Structure, "not a VTREE file (bad magic)");
        }
        if (bytes[kVersionByte] != kMagic[kVersionByte]) {
            throw FormatError(FormatError::Kind::VersionMismatch,
                              "unsupported VTREE version " + std::to_string(bytes[kVersionByte]));
        }
    }
    if (bytes.size() < sizeof kMagic + 8) throw FormatError(FormatError::Kind::ChecksumMismatch, "VTREE data truncated");
    const auto body = bytes.first(bytes.size() - 4);
    Reader tail(bytes.last(4));
    if (crc_of(body) != tail.u32()) throw FormatError(FormatError::Kind::ChecksumMismatch, "VTREE checksum mismatch");

    Reader r(body.subspan(sizeof kMagic));
    const std::uint32_t header_len = r.u32();
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(r.text(header_len));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(FormatError::Kind::Structure, std::string("bad VTREE header: ") + e.what());
    }
    const std::size_t leaf_count = as_count(header, "leaf_count");
    const std::size_t node_count = as_count(header, "node_count");
    const std::size_t face_count = as_count(header, "face_count");
    if (leaf_count > node_count) throw FormatError(FormatError::Kind::Structure, "leaf count exceeds node count");
    const std::size_t internal = node_count - leaf_count;
    const std::size_t expected = node_count * (3 + 1 + 1 + 4) * 8 + internal * 2 * 4 + face_count * 3 * 4;
    if (r.remaining() != expected) throw FormatError(FormatError::Kind::Structure, "VTREE payload size disagrees with header");

    std::vector<VertexNode> nodes(node_count);
    for (auto& n : nodes) n.position = {r.f64(), r.f64(), r.f64()};
    for (auto& n : nodes) n.cost = r.f64();
    for (auto& n : nodes) n.error_radius = r.f64();
    for (auto& n : nodes) {
        n.cone.axis = {r.f64(), r.f64(), r.f64()};
        n.cone.angle = r.f64();
    }
    for (std::size_t id = leaf_count; id < node_count; ++id) nodes[id].children = {r.u32(), r.u32()};
    std::vector<Face> faces(face_count);
    for (auto& f : faces) f = {r.u32(), r.u32(), r.u32()};
    return VertexTree(leaf_count, std::move(nodes), std::move(faces));
}

std::string save_tree_json(const VertexTree& tree)
{
    nlohmann::json doc = header_json(tree);
    doc["format"] = "VTREE";
    doc["version"] = 1;
    auto& positions = doc["positions"] = nlohmann::json::array();
    auto& costs = doc["costs"] = nlohmann::json::array();
    auto& radii = doc["radii"] = nlohmann::json::array();
    auto& cones = doc["cones"] = nlohmann::json::array();
    auto& children = doc["children"] = nlohmann::json::array();
    auto& faces = doc["faces"] = nlohmann::json::array();
    for (const auto& n : tree.nodes()) {
        positions.insert(positions.end(), {n.position.x, n.position.y, n.position.z});
        costs.push_back(n.cost);
        radii.push_back(n.error_radius);
        cones.insert(cones.end(), {n.cone.axis.x, n.cone.axis.y, n.cone.axis.z, n.cone.angle});
        if (!n.is_leaf()) children.insert(children.end(), {n.children[0], n.children[1]});
    }
    for (const Face& f : tree.original_faces()) faces.insert(faces.end(), {f[0], f[1], f[2]});
    doc["roots"] = tree.roots();
    return doc.dump();
}

VertexTree load_tree_json(const std::string& text)
{
    try {
        const auto doc = nlohmann::json::parse(text);
        if (doc.value("format", "") != "VTREE") throw FormatError(FormatError::Kind::Structure, "not a VTREE JSON export");
        if (doc.value("version", 0) != 1) throw FormatError(FormatError::Kind::VersionMismatch, "unsupported VTREE JSON version");
        const std::size_t leaf_count = as_count(doc, "leaf_count");
        const std::size_t node_count = as_count(doc, "node_count");
        const std::size_t face_count = as_count(doc, "face_count");
        const auto positions = doc.at("positions").get<std::vector<double>>();
        const auto costs = doc.at("costs").get<std::vector<double>>();
        const auto radii = doc.at("radii").get<std::vector<double>>();
        const auto cones = doc.at("cones").get<std::vector<double>>();
        const auto children = doc.at("children").get<std::vector<std::uint32_t>>();
        const auto faces_flat = doc.at("faces").get<std::vector<std::uint32_t>>();
        if (leaf_count > node_count || positions.size() != 3 * node_count || costs.size() != node_count
            || radii.size() != node_count || cones.size() != 4 * node_count
            || children.size() != 2 * (node_count - leaf_count) || faces_flat.size() != 3 * face_count) {
            throw FormatError(FormatError::Kind::Structure, "VTREE JSON arrays disagree with counts");
        }
        std::vector<VertexNode> nodes(node_count);
        for (std::size_t i = 0; i < node_count; ++i) {
            nodes[i].position = {positions[3 * i], positions[3 * i + 1], positions[3 * i + 2]};
            nodes[i].cost = costs[i];
            nodes[i].error_radius = radii[i];
            nodes[i].cone = {{cones[4 * i], cones[4 * i + 1], cones[4 * i + 2]}, cones[4 * i + 3]};
        }
        for (std::size_t i = leaf_count; i < node_count; ++i) {
            const std::size_t k = 2 * (i - leaf_count);
            nodes[i].children = {children[k], children[k + 1]};
        }
        std::vector<Face> faces(face_count);
        for (std::size_t f = 0; f < face_count; ++f) faces[f] = {faces_flat[3 * f], faces_flat[3 * f + 1], faces_flat[3 * f + 2]};
        return VertexTree(leaf_count, std::move(nodes), std::move(faces));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(FormatError::Kind::Structure, std::string("bad VTREE JSON: ") + e.what());
    }
}

void save_tree_file(const VertexTree& tree, const std::string& path, bool json)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::system_error(errno, std::generic_category(), "cannot write " + path);
    if (json) {
        out << save_tree_json(tree);
    } else {
        const auto bytes = save_tree(tree);
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    }
    if (!out) throw std::system_error(errno, std::generic_category(), "write failed: " + path);
}

VertexTree load_tree_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::system_error(errno, std::generic_category(), "cannot open " + path);
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() >= 5 && std::memcmp(bytes.data(), kMagic, 5) == 0) return load_tree(bytes);
    return load_tree_json(std::string(bytes.begin(), bytes.end()));
}

}  // namespace meshforge
