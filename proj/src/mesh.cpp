#include "meshforge/mesh.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <system_error>

#include "meshforge/error.hpp"

namespace meshforge {

void Mesh::validate() const
{
    for (std::size_t i = 0; i < positions.size(); ++i) {
        if (!is_finite(positions[i])) {
            throw InvalidMesh("vertex " + std::to_string(i) + " has a non-finite coordinate");
        }
    }
    for (std::size_t f = 0; f < faces.size(); ++f) {
        for (VertexId v : faces[f]) {
            if (v >= positions.size()) {
                throw InvalidMesh("face " + std::to_string(f) + " references missing vertex " + std::to_string(v));
            }
        }
    }
}

Adjacency::Adjacency(const Mesh& mesh) : vertex_faces_(mesh.positions.size())
{
    for (std::uint32_t f = 0; f < mesh.faces.size(); ++f) {
        const Face& face = mesh.faces[f];
        for (int k = 0; k < 3; ++k) {
            auto& list = vertex_faces_[face[k]];
            // A corner repeated within a face still lists the face once.
            if (list.empty() || list.back() != f) list.push_back(f);
            VertexId a = face[k];
            VertexId b = face[(k + 1) % 3];
            if (a == b) continue;
            edges_.emplace_back(std::min(a, b), std::max(a, b));
        }
    }
    std::sort(edges_.begin(), edges_.end());
    edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
}

bool Adjacency::has_edge(VertexId a, VertexId b) const
{
    const std::pair<VertexId, VertexId> key{std::min(a, b), std::max(a, b)};
    return std::binary_search(edges_.begin(), edges_.end(), key);
}

namespace {

std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_ws(std::string_view s)
{
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
        if (j > i) out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

double parse_double(std::string_view token, std::size_t line)
{
    double value = 0.0;
    const char* begin = token.data();
    const char* end = begin + token.size();
    if (!token.empty() && *begin == '+') ++begin;
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
        throw ParseError("malformed number '" + std::string(token) + "'", line);
    }
    return value;
}

VertexId parse_index(std::string_view token, std::size_t vertex_count, std::size_t line)
{
    // Only the position index of v/vt/vn matters.
    token = token.substr(0, token.find('/'));
    long long raw = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), raw);
    if (ec != std::errc() || ptr != token.data() + token.size() || raw == 0) {
        throw ParseError("malformed face index '" + std::string(token) + "'", line);
    }
    const long long resolved = raw > 0 ? raw - 1 : static_cast<long long>(vertex_count) + raw;
    if (resolved < 0 || resolved >= static_cast<long long>(vertex_count)) {
        throw ParseError("face index " + std::to_string(raw) + " out of range", line);
    }
    return static_cast<VertexId>(resolved);
}

}  // namespace

Mesh load_obj(std::istream& in)
{
    Mesh mesh;
    std::string raw;
    std::size_t line_no = 0;
    std::vector<VertexId> corners;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line = trim(raw);
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = trim(line.substr(0, hash));
        if (line.empty()) continue;
        const auto tokens = split_ws(line);
        if (tokens[0] == "v") {
            if (tokens.size() < 4) throw ParseError("vertex needs 3 coordinates", line_no);
            mesh.positions.push_back({parse_double(tokens[1], line_no), parse_double(tokens[2], line_no),
                                      parse_double(tokens[3], line_no)});
        } else if (tokens[0] == "f") {
            if (tokens.size() < 4) throw ParseError("face needs at least 3 corners", line_no);
            corners.clear();
            for (std::size_t k = 1; k < tokens.size(); ++k) {
                corners.push_back(parse_index(tokens[k], mesh.positions.size(), line_no));
            }
            for (std::size_t k = 1; k + 1 < corners.size(); ++k) {
                mesh.faces.push_back({corners[0], corners[k], corners[k + 1]});
            }
        }
        // vt, vn, g, o, s, usemtl, mtllib: ignored
    }
    if (in.bad()) throw Error("read error");
    return mesh;
}

Mesh load_obj_string(std::string_view text)
{
    std::istringstream in{std::string(text)};
    return load_obj(in);
}

Mesh load_obj_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw std::system_error(errno, std::generic_category(), "cannot open " + path);
    return load_obj(in);
}

std::string format_double(double value)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, ptr);
}

void save_obj(const Mesh& mesh, std::ostream& out)
{
    for (const Vec3& p : mesh.positions) {
        out << "v " << format_double(p.x) << ' ' << format_double(p.y) << ' ' << format_double(p.z) << '\n';
    }
    for (const Face& f : mesh.faces) {
        out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
    }
}

std::string save_obj_string(const Mesh& mesh)
{
    std::ostringstream out;
    save_obj(mesh, out);
    return out.str();
}

void save_obj_file(const Mesh& mesh, const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw std::system_error(errno, std::generic_category(), "cannot write " + path);
    save_obj(mesh, out);
    if (!out) throw std::system_error(errno, std::generic_category(), "write failed: " + path);
}

std::vector<Face> cleanup_faces(const std::vector<Face>& faces)
{
    std::vector<Face> out;
    out.reserve(faces.size());
    std::set<Face> seen;
    for (const Face& f : faces) {
        if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) continue;
        Face key = f;
        std::sort(key.begin(), key.end());
        if (seen.insert(key).second) out.push_back(f);
    }
    return out;
}

Mesh cleanup(const Mesh& mesh)
{
    return {mesh.positions, cleanup_faces(mesh.faces)};
}

Box3 bounding_box(const Mesh& mesh)
{
    Box3 box;
    for (const Vec3& p : mesh.positions) box.extend(p);
    return box;
}

double bounding_radius(const Mesh& mesh)
{
    if (mesh.positions.empty()) throw EmptyMesh();
    return 0.5 * norm(bounding_box(mesh).extent());
}

}  // namespace meshforge
