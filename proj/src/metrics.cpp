#include "meshforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "meshforge/error.hpp"

namespace meshforge {

namespace {

Vec3 closest_point_on_segment(const Vec3& p, const Vec3& a, const Vec3& b)
{
    const Vec3 ab = b - a;
    const double len2 = squared_norm(ab);
    if (len2 == 0.0) return a;
    const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
    return a + t * ab;
}

}  // namespace

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c)
{
    const Vec3 ab = b - a;
    const Vec3 ac = c - a;
    const Vec3 n = cross(ab, ac);
    const double scale = std::max({squared_norm(ab), squared_norm(ac), squared_norm(c - b)});
    if (norm(n) <= 1e-14 * scale || scale == 0.0) {
        // Degenerate: the closed triangle is a segment or a point.
        Vec3 best = closest_point_on_segment(p, a, b);
        for (const Vec3& q : {closest_point_on_segment(p, b, c), closest_point_on_segment(p, c, a)}) {
            if (squared_norm(q - p) < squared_norm(best - p)) best = q;
        }
        return best;
    }

    // Voronoi-region walk over vertices, edges, then the face.
    const Vec3 ap = p - a;
    const double d1 = dot(ab, ap);
    const double d2 = dot(ac, ap);
    if (d1 <= 0.0 && d2 <= 0.0) return a;

    const Vec3 bp = p - b;
    const double d3 = dot(ab, bp);
    const double d4 = dot(ac, bp);
    if (d3 >= 0.0 && d4 <= d3) return b;

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;

    const Vec3 cp = p - c;
    const double d5 = dot(ab, cp);
    const double d6 = dot(ac, cp);
    if (d6 >= 0.0 && d5 <= d6) return c;

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
    }

    // Inside the face: project onto the plane, which is exact for points already on it.
    return p - (dot(ap, n) / squared_norm(n)) * n;
}

double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c)
{
    return distance(p, closest_point_on_triangle(p, a, b, c));
}

// ---------------------------------------------------------------------------

TriangleGrid::TriangleGrid(const Mesh& mesh) : mesh_(&mesh)
{
    Box3 box;
    for (const Face& f : mesh.faces) {
        for (VertexId v : f) box.extend(mesh.positions[v]);
    }
    if (box.empty()) {
        cell_start_.assign(2, 0);
        return;
    }
    origin_ = box.lo;
    const Vec3 ext = box.extent();
    const double longest = std::max({ext.x, ext.y, ext.z});
    const double per_axis = std::max(1.0, std::cbrt(static_cast<double>(mesh.faces.size())));
    cell_ = longest > 0.0 ? longest / per_axis : 1.0;
    for (int a = 0; a < 3; ++a) {
        dims_[a] = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(ext[a] / cell_)));
    }

    auto cell_range = [&](const Face& f, std::array<std::int64_t, 3>& lo, std::array<std::int64_t, 3>& hi) {
        Box3 tb;
        for (VertexId v : f) tb.extend(mesh.positions[v]);
        for (int a = 0; a < 3; ++a) {
            lo[a] = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor((tb.lo[a] - origin_[a]) / cell_)), 0, dims_[a] - 1);
            hi[a] = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor((tb.hi[a] - origin_[a]) / cell_)), 0, dims_[a] - 1);
        }
    };

    const std::size_t cells = static_cast<std::size_t>(dims_[0] * dims_[1] * dims_[2]);
    std::vector<std::uint32_t> counts(cells + 1, 0);
    std::array<std::int64_t, 3> lo{}, hi{};
    for (const Face& f : mesh.faces) {
        cell_range(f, lo, hi);
        for (auto z = lo[2]; z <= hi[2]; ++z)
            for (auto y = lo[1]; y <= hi[1]; ++y)
                for (auto x = lo[0]; x <= hi[0]; ++x) ++counts[cell_key(x, y, z) + 1];
    }
    for (std::size_t i = 1; i <= cells; ++i) counts[i] += counts[i - 1];
    cell_start_ = counts;
    cell_faces_.resize(counts[cells]);
    std::vector<std::uint32_t> cursor(counts.begin(), counts.end() - 1);
    for (std::uint32_t fi = 0; fi < mesh.faces.size(); ++fi) {
        cell_range(mesh.faces[fi], lo, hi);
        for (auto z = lo[2]; z <= hi[2]; ++z)
            for (auto y = lo[1]; y <= hi[1]; ++y)
                for (auto x = lo[0]; x <= hi[0]; ++x) cell_faces_[cursor[cell_key(x, y, z)]++] = fi;
    }
}

double TriangleGrid::nearest_distance(const Vec3& p) const
{
    double best = std::numeric_limits<double>::infinity();
    if (cell_faces_.empty()) return best;
    const Mesh& m = *mesh_;

    std::array<std::int64_t, 3> c{};
    std::int64_t r_start = 0;
    std::int64_t r_end = 0;
    for (int a = 0; a < 3; ++a) {
        const double raw = std::floor((p[a] - origin_[a]) / cell_);
        c[a] = static_cast<std::int64_t>(std::clamp(raw, -1e15, 1e15));
        r_start = std::max({r_start, -c[a], c[a] - (dims_[a] - 1)});
        r_end = std::max({r_end, c[a], (dims_[a] - 1) - c[a]});
    }

    auto visit = [&](std::int64_t x, std::int64_t y, std::int64_t z) {
        const auto key = cell_key(x, y, z);
        for (auto k = cell_start_[key]; k < cell_start_[key + 1]; ++k) {
            const Face& f = m.faces[cell_faces_[k]];
            best = std::min(best, point_triangle_distance(p, m.positions[f[0]], m.positions[f[1]], m.positions[f[2]]));
        }
    };

    for (std::int64_t r = r_start; r <= r_end; ++r) {
        if (r >= 1 && best <= static_cast<double>(r - 1) * cell_) break;
        const std::int64_t z0 = std::max<std::int64_t>(0, c[2] - r), z1 = std::min(dims_[2] - 1, c[2] + r);
        const std::int64_t y0 = std::max<std::int64_t>(0, c[1] - r), y1 = std::min(dims_[1] - 1, c[1] + r);
        const std::int64_t x0 = std::max<std::int64_t>(0, c[0] - r), x1 = std::min(dims_[0] - 1, c[0] + r);
        for (auto z = z0; z <= z1; ++z) {
            for (auto y = y0; y <= y1; ++y) {
                const bool shell = std::abs(z - c[2]) == r || std::abs(y - c[1]) == r;
                if (shell) {
                    for (auto x = x0; x <= x1; ++x) visit(x, y, z);
                } else {
                    if (c[0] - r >= 0 && c[0] - r < dims_[0]) visit(c[0] - r, y, z);
                    if (r > 0 && c[0] + r >= 0 && c[0] + r < dims_[0]) visit(c[0] + r, y, z);
                }
            }
        }
    }
    return best;
}

// ---------------------------------------------------------------------------

namespace {

std::uint64_t splitmix(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Uniform [0, 1) from (seed, stream, index, component), order independent.
double counter_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t index, std::uint64_t component)
{
    const std::uint64_t h = splitmix(seed ^ splitmix(stream ^ splitmix(index * 4 + component)));
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double face_area(const Mesh& m, const Face& f)
{
    return 0.5 * norm(cross(m.positions[f[1]] - m.positions[f[0]], m.positions[f[2]] - m.positions[f[0]]));
}

}  // namespace

std::vector<Vec3> sample_surface(const Mesh& mesh, std::size_t count, std::uint64_t seed, std::uint64_t stream)
{
    mesh.validate();
    std::vector<double> cdf;
    cdf.reserve(mesh.faces.size());
    double total = 0.0;
    for (const Face& f : mesh.faces) {
        total += face_area(mesh, f);
        cdf.push_back(total);
    }
    if (!(total > 0.0)) throw ZeroAreaMesh();

    std::vector<Vec3> out;
    out.reserve(count);
    for (std::size_t s = 0; s < count; ++s) {
        const double pick = counter_uniform(seed, stream, s, 0) * total;
        auto it = std::upper_bound(cdf.begin(), cdf.end(), pick);
        if (it == cdf.end()) --it;
        const Face& f = mesh.faces[static_cast<std::size_t>(it - cdf.begin())];
        const double r1 = std::sqrt(counter_uniform(seed, stream, s, 1));
        const double r2 = counter_uniform(seed, stream, s, 2);
        const Vec3& a = mesh.positions[f[0]];
        const Vec3& b = mesh.positions[f[1]];
        const Vec3& c = mesh.positions[f[2]];
        out.push_back(a + (r1 * (1.0 - r2)) * (b - a) + (r1 * r2) * (c - a));
    }
    return out;
}

namespace {

struct OneWay {
    double sum = 0.0;
    double max = 0.0;
};

OneWay one_way(const Mesh& from, const Mesh& to, std::size_t samples, std::uint64_t seed, std::uint64_t stream)
{
    const TriangleGrid grid(to);
    OneWay acc;
    for (const Vec3& p : sample_surface(from, samples, seed, stream)) {
        const double d = grid.nearest_distance(p);
        acc.sum += d;
        acc.max = std::max(acc.max, d);
    }
    return acc;
}

}  // namespace

DeviationReport sampled_deviation(const Mesh& a, const Mesh& b, std::size_t samples, std::uint64_t seed,
                                  Direction direction)
{
    if (samples == 0) throw std::invalid_argument("sample count must be positive");
    b.validate();
    if (b.faces.empty()) throw ZeroAreaMesh();
    DeviationReport report;
    report.samples = samples;
    report.seed = seed;
    report.direction = direction;

    const OneWay ab = one_way(a, b, samples, seed, 0);
    if (direction == Direction::AToB) {
        report.mean = ab.sum / static_cast<double>(samples);
        report.max = ab.max;
        return report;
    }
    const OneWay ba = one_way(b, a, samples, seed, 1);
    report.mean = (ab.sum + ba.sum) / static_cast<double>(2 * samples);
    report.max = std::max(ab.max, ba.max);
    return report;
}

std::string DeviationReport::to_json() const
{
    return nlohmann::json{{"mean", mean},
                          {"max", max},
                          {"samples", samples},
                          {"seed", seed},
                          {"direction", direction == Direction::AToB ? "a_to_b" : "symmetric"}}
        .dump();
}

}  // namespace meshforge
