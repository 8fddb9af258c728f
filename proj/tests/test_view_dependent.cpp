#include <doctest.h>

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "meshforge/error.hpp"
#include "meshforge/primitives.hpp"
#include "meshforge/view_dependent.hpp"
#include "oracles.hpp"

using namespace meshforge;

namespace {

constexpr double kPi = std::numbers::pi;

VertexTree icosphere_tree()
{
    const Mesh m = make_icosphere(3);
    return build_tree(m, simplify(m, {0, 0.0, PlacementPolicy::Optimal}).log);
}

Camera front_camera(double distance_to_origin = 5.0)
{
    return Camera::look_at({0.3, 0.2, distance_to_origin}, {0, 0, 0}, {0, 1, 0}, kPi / 3, 800.0, 0.01);
}

VertexNode node_at(Vec3 position, double radius)
{
    VertexNode n;
    n.position = position;
    n.error_radius = radius;
    n.children = {0, 1};
    return n;
}

std::size_t triangles_at_fixpoint(const VertexTree& tree, const Camera& cam, const AdaptParams& p)
{
    ActiveFront front = ActiveFront::roots(tree);
    adapt_to_fixpoint(front, tree, cam, p);
    return render_set(front, tree).size();
}

}  // namespace

TEST_CASE("screen_space_error")
{
    Camera cam;
    cam.eye = {0, 0, 0};
    cam.forward = {0, 0, -1};
    cam.up = {0, 1, 0};
    cam.fov_y = kPi / 2;
    cam.viewport_height = 1000;
    cam.near_plane = 0.1;

    CHECK(screen_space_error(node_at({0, 0, -10}, 1.0), cam) == doctest::Approx(50.0));
    CHECK(screen_space_error(node_at({0, 0, -10}, 0.0), cam) == 0.0);
    CHECK(screen_space_error(node_at({0, 0, 10}, 0.0), cam) == 0.0);
    const double near = screen_space_error(node_at({3, 0, -20}, 0.5), cam);
    const double far = screen_space_error(node_at({3, 0, -40}, 0.5), cam);
    CHECK(far == doctest::Approx(near / 2));
    // Sphere reaching the near plane, or behind the eye.
    CHECK(screen_space_error(node_at({0, 0, -1}, 0.95), cam) == kInfinitePixels);
    CHECK(screen_space_error(node_at({0, 0, 5}, 1.0), cam) == kInfinitePixels);
}

TEST_CASE("is_silhouette")
{
    const Camera cam = Camera::look_at({0, 0, 10}, {0, 0, 0}, {0, 1, 0});
    VertexNode n;
    n.cone = {{1, 0, 0}, 0.0};
    CHECK(is_silhouette(n, cam));
    n.cone = {{0, 0, 1}, 0.0};
    CHECK_FALSE(is_silhouette(n, cam));
    n.cone = {{0, 0, 1}, 0.2};
    CHECK_FALSE(is_silhouette(n, cam));
    n.cone = {{0, 0, 1}, kPi};
    CHECK(is_silhouette(n, cam));
    n.cone = {normalized({1, 0, 1}), kPi / 4};
    CHECK(is_silhouette(n, cam));
}

TEST_CASE("camera validation")
{
    Camera c;
    CHECK_NOTHROW(c.validate());
    c.up = {0, 1, 1e-6};
    CHECK_THROWS(c.validate());
    c = Camera{};
    c.fov_y = kPi;
    CHECK_THROWS(c.validate());
    c = Camera{};
    c.near_plane = 0;
    CHECK_THROWS(c.validate());
}

TEST_CASE("front construction and validity")
{
    const VertexTree tree = icosphere_tree();
    CHECK(ActiveFront::roots(tree).is_valid(tree));
    CHECK(ActiveFront::leaves(tree).is_valid(tree));
    CHECK_THROWS(ActiveFront::from_nodes(tree, {0}));
    const NodeId root = tree.roots().front();
    const auto& r = tree.node(root);
    CHECK_THROWS(ActiveFront::from_nodes(tree, {root, r.children[0]}));

    ActiveFront f = ActiveFront::roots(tree);
    f.split(tree, root);
    CHECK(f.is_valid(tree));
    CHECK(f.active().contains(r.children[0]));
    CHECK_THROWS(f.split(tree, root));
    f.merge(tree, root);
    CHECK(f.is_valid(tree));
    CHECK(f.active().contains(root));
}

TEST_CASE("adapt extremes")
{
    const VertexTree tree = icosphere_tree();
    const Camera cam = front_camera();

    SUBCASE("infinite tau collapses to the roots")
    {
        ActiveFront front = ActiveFront::leaves(tree);
        const AdaptParams p{INFINITY, INFINITY, 0.0};
        while (true) {
            const auto s = adapt(front, tree, cam, p);
            CHECK(s.splits == 0);
            CHECK(front.is_valid(tree));
            if (s.ops() == 0) break;
        }
        CHECK(std::set<NodeId>(tree.roots().begin(), tree.roots().end()) == front.active());
    }
    SUBCASE("zero tau refines to the leaves")
    {
        ActiveFront front = ActiveFront::roots(tree);
        const AdaptParams p{0.0, 0.0, 0.0};
        while (true) {
            const auto s = adapt(front, tree, cam, p);
            CHECK(s.merges == 0);
            CHECK(front.is_valid(tree));
            if (s.ops() == 0) break;
        }
        CHECK(front.size() == tree.leaf_count());
        CHECK(render_set(front, tree).size() == cleanup(full_resolution(tree)).faces.size());
    }
}

TEST_CASE("adapt splits one level per pass")
{
    const VertexTree tree = icosphere_tree();
    ActiveFront front = ActiveFront::roots(tree);
    const auto s = adapt(front, tree, front_camera(), {0.0, 0.0, 0.0});
    CHECK(s.splits == tree.roots().size());  // single root splits into its two children only
    CHECK(front.size() == 2 * tree.roots().size());
    CHECK(front.frame() == 1);
}

TEST_CASE("fixpoint satisfies the split and merge criteria")
{
    const VertexTree tree = icosphere_tree();
    for (const Camera& cam : {front_camera(3.0), front_camera(8.0), Camera::look_at({2, 2, 2}, {0, 0, 0}, {0, 0, 1})}) {
        for (const AdaptParams& p : {AdaptParams{4.0, 1.0, 0.5}, AdaptParams{16.0, 16.0, 0.0}, AdaptParams{2.0, 0.5, 0.9}}) {
            ActiveFront front = ActiveFront::roots(tree);
            adapt_to_fixpoint(front, tree, cam, p);
            REQUIRE(front.is_valid(tree));
            for (NodeId id : front.active()) {
                const VertexNode& n = tree.node(id);
                if (!n.is_leaf()) CHECK(screen_space_error(n, cam) <= p.threshold(is_silhouette(n, cam)));
                if (n.parent == kNoNode) continue;
                const VertexNode& parent = tree.node(n.parent);
                if (front.active().contains(parent.children[0]) && front.active().contains(parent.children[1])) {
                    CHECK_FALSE(screen_space_error(parent, cam) < p.merge_threshold(is_silhouette(parent, cam)));
                }
            }
        }
    }
}

TEST_CASE("fixpoint triangle count is monotone in tau")
{
    const VertexTree tree = icosphere_tree();
    const Camera cam = front_camera(4.0);
    std::size_t previous = SIZE_MAX;
    for (double tau : {0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0}) {
        const std::size_t tris = triangles_at_fixpoint(tree, cam, {tau, tau, 0.0});
        CHECK(tris <= previous);
        previous = tris;
    }
}

TEST_CASE("max_ops_per_frame defers the lowest-error work")
{
    const VertexTree tree = icosphere_tree();
    const Camera cam = front_camera(3.0);
    ActiveFront reference = ActiveFront::roots(tree);
    ActiveFront limited = ActiveFront::roots(tree);
    AdaptParams p{1.0, 1.0, 0.0};
    for (int i = 0; i < 6; ++i) adapt(reference, tree, cam, p);
    const auto snapshot = std::vector<NodeId>(reference.active().begin(), reference.active().end());

    limited = ActiveFront::from_nodes(tree, snapshot);
    ActiveFront unlimited = limited;
    p.max_ops_per_frame = 3;
    const auto s = adapt(limited, tree, cam, p);
    CHECK(s.ops() == 3);
    p.max_ops_per_frame = SIZE_MAX;
    const auto full = adapt(unlimited, tree, cam, p);
    CHECK(s.deferred == full.ops() - 3);
    CHECK(limited.is_valid(tree));

    // The splits that went ahead are the highest-error candidates.
    double smallest_done = INFINITY;
    for (NodeId id : snapshot) {
        if (!limited.active().contains(id)) smallest_done = std::min(smallest_done, screen_space_error(tree.node(id), cam));
    }
    for (NodeId id : snapshot) {
        const auto& n = tree.node(id);
        if (limited.active().contains(id) && !unlimited.active().contains(id) && !n.is_leaf()) {
            CHECK(screen_space_error(n, cam) <= smallest_done);
        }
    }
}

TEST_CASE("adapt is deterministic")
{
    const VertexTree tree = icosphere_tree();
    const Camera cam = front_camera(3.5);
    ActiveFront a = ActiveFront::roots(tree), b = ActiveFront::roots(tree);
    for (int i = 0; i < 10; ++i) {
        adapt(a, tree, cam, {3.0, 1.0, 0.5});
        adapt(b, tree, cam, {3.0, 1.0, 0.5});
        CHECK(a.active() == b.active());
        CHECK(a.proxies() == b.proxies());
    }
}

TEST_CASE("render_set")
{
    const VertexTree tree = icosphere_tree();
    SUBCASE("all leaves")
    {
        const auto tris = render_set(ActiveFront::leaves(tree), tree);
        std::set<std::array<NodeId, 3>> got;
        for (const auto& t : tris) {
            auto k = t.ids;
            std::sort(k.begin(), k.end());
            got.insert(k);
        }
        std::set<std::array<NodeId, 3>> expected;
        for (Face f : cleanup(full_resolution(tree)).faces) {
            std::sort(f.begin(), f.end());
            expected.insert(f);
        }
        CHECK(got == expected);
        CHECK(tris.size() == expected.size());
    }
    SUBCASE("single root renders nothing")
    {
        const Mesh m = make_icosphere(2);
        Simplifier s(m, {0, 0.0, PlacementPolicy::Optimal});
        std::vector<ContractionRecord> log;
        while (auto r = s.step()) log.push_back(*r);
        const VertexTree single = build_tree(m, log);
        REQUIRE(single.roots().size() == 1);
        CHECK(render_set(ActiveFront::roots(single), single).empty());
        CHECK(render_set(ActiveFront::roots(tree), tree).empty());
    }
    SUBCASE("random fronts match the brute-force proxy scan")
    {
        std::mt19937_64 rng(12);
        for (int trial = 0; trial < 30; ++trial) {
            ActiveFront front = ActiveFront::roots(tree);
            std::bernoulli_distribution coin(0.8);
            for (int pass = 0; pass < 12; ++pass) {
                const std::vector<NodeId> ids(front.active().begin(), front.active().end());
                for (NodeId id : ids) {
                    if (!tree.node(id).is_leaf() && coin(rng)) front.split(tree, id);
                }
            }
            REQUIRE(front.is_valid(tree));
            const auto tris = render_set(front, tree);
            const auto expected = oracle::proxy_faces(tree, front.active());
            CHECK(tris.size() == expected.size());
            std::set<std::array<NodeId, 3>> got;
            for (const auto& t : tris) {
                auto k = t.ids;
                std::sort(k.begin(), k.end());
                got.insert(k);
                for (int c = 0; c < 3; ++c) CHECK(t.positions[c] == tree.node(t.ids[c]).position);
            }
            CHECK(got == expected);
            CHECK(std::is_sorted(tris.begin(), tris.end(), [](const RenderTriangle& a, const RenderTriangle& b) {
                auto ka = a.ids, kb = b.ids;
                std::sort(ka.begin(), ka.end());
                std::sort(kb.begin(), kb.end());
                return ka < kb;
            }));
        }
    }
}

TEST_CASE("projected leaf offsets stay within the perspective-corrected bound")
{
    // Pixel offsets between a node and its leaves, measured by projecting
    // both points. The screen error uses the node's depth; a leaf nearer the
    // camera can exceed it by the factor d / (d - r) * (1 + max view slope).
    const VertexTree tree = icosphere_tree();
    const Camera cam = Camera::look_at({0.2, -0.1, 4.0}, {0, 0, 0}, {0, 1, 0}, kPi / 3, 800.0, 0.01);
    const Vec3 right = cross(cam.forward, cam.up);
    const double focal = cam.viewport_height / (2 * std::tan(cam.fov_y / 2));
    const double slope = std::tan(cam.fov_y / 2);
    auto project = [&](const Vec3& p, double& x, double& y) {
        const Vec3 rel = p - cam.eye;
        const double z = dot(rel, cam.forward);
        x = focal * dot(rel, right) / z;
        y = focal * dot(rel, cam.up) / z;
        return z > cam.near_plane && std::abs(x) <= focal * slope && std::abs(y) <= focal * slope;
    };

    ActiveFront front = ActiveFront::roots(tree);
    adapt_to_fixpoint(front, tree, cam, {40.0, 20.0, 0.5});
    std::size_t checked = 0;
    for (NodeId id : front.active()) {
        const VertexNode& n = tree.node(id);
        if (n.is_leaf()) continue;
        double nx, ny;
        if (!project(n.position, nx, ny)) continue;
        const double depth = dot(n.position - cam.eye, cam.forward);
        const double bound = screen_space_error(n, cam) * depth / (depth - n.error_radius) * (1 + std::sqrt(2.0) * slope);
        for (NodeId leaf : tree.leaves_under(id)) {
            double lx, ly;
            if (!project(tree.node(leaf).position, lx, ly)) continue;
            CHECK(std::hypot(lx - nx, ly - ny) <= bound + 1e-6);
            ++checked;
        }
    }
    CHECK(checked > 0);
}

TEST_CASE("flythrough")
{
    const VertexTree tree = icosphere_tree();
    SUBCASE("single frame equals one adapt")
    {
        const Camera cam = front_camera();
        const AdaptParams p{2.0, 1.0, 0.5};
        const auto rows = flythrough(tree, {{0.0, cam}}, p);
        ActiveFront front = ActiveFront::roots(tree);
        const auto s = adapt(front, tree, cam, p);
        REQUIRE(rows.size() == 1);
        CHECK(rows[0].splits == s.splits);
        CHECK(rows[0].merges == s.merges);
        CHECK(rows[0].active == front.size());
        CHECK(rows[0].triangles == render_set(front, tree).size());
        CHECK(rows[0].max_err_px == max_active_error(front, tree, cam));
    }
    SUBCASE("far camera with a large tau settles")
    {
        std::vector<CameraKey> path;
        for (int i = 0; i < 20; ++i) path.push_back({double(i), front_camera(50.0)});
        const auto rows = flythrough(tree, path, {64.0, 64.0, 0.5});
        for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].triangles <= rows[i - 1].triangles);
    }
    SUBCASE("zooming in adds triangles")
    {
        std::vector<CameraKey> path;
        for (int i = 0; i <= 60; ++i) path.push_back({double(i), front_camera(30.0 - 0.45 * i)});
        const auto rows = flythrough(tree, path, {4.0, 2.0, 0.5});
        CHECK(rows.back().triangles >= rows.front().triangles);
        CHECK(rows.back().triangles > 100);
    }
    SUBCASE("empty path") { CHECK_THROWS(flythrough(tree, {}, {})); }
}

TEST_CASE("camera path JSON and stats CSV")
{
    const std::vector<CameraKey> path{{0.0, front_camera(5.0)}, {0.5, front_camera(4.0)}};
    const auto back = parse_camera_path(camera_path_to_json(path));
    REQUIRE(back.size() == 2);
    CHECK(back[1].time == 0.5);
    CHECK(distance(back[1].camera.eye, path[1].camera.eye) == 0.0);

    const auto loose = parse_camera_path(R"([{"t":0,"eye":[0,0,5],"forward":[0,0,-2],"up":[0,1,0.1],"fov_y":1.0,"viewport_height":600}])");
    CHECK_NOTHROW(loose[0].camera.validate());
    CHECK(loose[0].camera.near_plane == 0.01);

    CHECK_THROWS_AS(parse_camera_path("[]"), ParseError);
    CHECK_THROWS_AS(parse_camera_path("{"), ParseError);
    CHECK_THROWS_AS(parse_camera_path(R"([{"t":0,"eye":[0,0],"forward":[0,0,-1],"up":[0,1,0],"fov_y":1,"viewport_height":600}])"), ParseError);
    CHECK_THROWS_AS(parse_camera_path(R"([{"t":0,"eye":[0,0,1],"forward":[0,0,-1],"up":[0,0,1],"fov_y":1,"viewport_height":600}])"), ParseError);
    CHECK_THROWS_AS(parse_camera_path(R"([{"t":0,"eye":[0,0,1],"forward":[0,0,-1],"up":[0,1,0],"viewport_height":600}])"), ParseError);

    std::ostringstream csv;
    write_stats_csv({{0, 1, 0, 0, 0, 0.0}, {1, 2, 0, 1, 0, INFINITY}}, csv);
    CHECK(csv.str() == "frame,active,triangles,splits,merges,max_err_px\n0,1,0,0,0,0\n1,2,0,1,0,inf\n");
}
