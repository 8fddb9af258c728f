#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "meshforge/mesh.hpp"
#include "meshforge/metrics.hpp"
#include "meshforge/primitives.hpp"
#include "meshforge/simplifier.hpp"
#include "meshforge/vertex_tree.hpp"
#include "meshforge/view_dependent.hpp"

using namespace meshforge;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Sandbox {
    fs::path dir;

    Sandbox()
    {
        dir = fs::temp_directory_path() / ("meshforge_cli_" + std::to_string(::getpid()));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~Sandbox() { fs::remove_all(dir); }

    std::string at(const std::string& name) const { return (dir / name).string(); }

    std::string write(const std::string& name, const std::string& text) const
    {
        std::ofstream(at(name)) << text;
        return at(name);
    }

    std::string read(const std::string& name) const
    {
        std::ifstream in(at(name));
        std::ostringstream s;
        s << in.rdbuf();
        return s.str();
    }
};

struct Result {
    int code = -1;
    std::string out;
    std::string err;
};

Result run(const Sandbox& box, const std::string& args)
{
    const std::string out = box.at("stdout.txt");
    const std::string err = box.at("stderr.txt");
    const std::string cmd = std::string(MESHFORGE_CLI) + " " + args + " >" + out + " 2>" + err;
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = box.read("stdout.txt");
    r.err = box.read("stderr.txt");
    return r;
}

json summary(const Result& r)
{
    REQUIRE_FALSE(r.out.empty());
    return json::parse(r.out);
}

std::string save(const Sandbox& box, const std::string& name, const Mesh& m)
{
    save_obj_file(m, box.at(name));
    return box.at(name);
}

}  // namespace

TEST_CASE("simplify")
{
    Sandbox box;
    const std::string octa = save(box, "octa.obj", make_octahedron());

    SUBCASE("octahedron to four faces, with log and manifest")
    {
        const Result r = run(box, "simplify " + octa + " --target-faces 4 -o " + box.at("o.obj") + " --log " + box.at("o.clog"));
        REQUIRE(r.code == 0);
        const json s = summary(r);
        CHECK(s["faces_before"] == 8);
        CHECK(s["faces_after"] == 4);
        CHECK(load_obj_file(box.at("o.obj")).faces.size() == 4);

        std::ifstream clog(box.at("o.clog"));
        const auto log = read_clog(clog);
        CHECK(log.size() == s["contractions"].get<std::size_t>());
        CHECK(replay(make_octahedron(), log) == load_obj_file(box.at("o.obj")));

        const json manifest = json::parse(box.read("o.obj.manifest.json"));
        CHECK(manifest["command"] == "simplify");
        CHECK(manifest["parameters"]["target_faces"] == 4);
        CHECK(manifest["parameters"]["placement"] == "optimal");
        CHECK(manifest["outputs"].size() == 2);
        CHECK(manifest.contains("version"));
        CHECK(manifest["wall_time_s"].get<double>() >= 0.0);
    }

    SUBCASE("target at or above the input keeps the cleaned input")
    {
        Mesh noisy = make_cube();
        noisy.faces.push_back(noisy.faces[0]);
        noisy.faces.push_back({0, 0, 1});
        const std::string in = save(box, "noisy.obj", noisy);
        REQUIRE(run(box, "simplify " + in + " -n 100 -o " + box.at("same.obj")).code == 0);
        CHECK(load_obj_file(box.at("same.obj")) == cleanup(noisy));
    }

    SUBCASE("errors")
    {
        Result r = run(box, "simplify " + box.at("missing.obj") + " -n 4 -o " + box.at("x.obj"));
        CHECK(r.code == 1);
        CHECK(r.out.empty());
        CHECK_FALSE(r.err.empty());

        CHECK(run(box, "simplify " + octa + " -n 4 -o " + box.at("x.obj") + " --placement sideways").code == 2);
        CHECK(run(box, "simplify " + octa + " -n four -o " + box.at("x.obj")).code == 2);
        CHECK(run(box, "simplify " + octa + " -n 4 -t -1 -o " + box.at("x.obj")).code == 2);
        CHECK(run(box, "simplify " + octa + " -n 4").code == 2);
        const std::string broken = box.write("broken.obj", "v 0 0 0\nf 1 2 3\n");
        r = run(box, "simplify " + broken + " -n 4 -o " + box.at("x.obj"));
        CHECK(r.code == 2);
        CHECK(r.err.find("line 2") != std::string::npos);

        // A huge threshold on a dense cloud trips the pair budget.
        const std::string sphere = save(box, "sphere.obj", make_icosphere(2));
        CHECK(run(box, "simplify " + sphere + " -n 4 -t 10 -o " + box.at("x.obj")).code == 2);
    }
}

TEST_CASE("build-tree and extract")
{
    Sandbox box;
    const Mesh octa_mesh = make_octahedron();
    const std::string octa = save(box, "octa.obj", octa_mesh);

    SUBCASE("from a log")
    {
        REQUIRE(run(box, "simplify " + octa + " -n 4 -o " + box.at("o.obj") + " -l " + box.at("o.clog")).code == 0);
        const Result r = run(box, "build-tree " + octa + " --log " + box.at("o.clog") + " -o " + box.at("o.vtree"));
        REQUIRE(r.code == 0);
        const json s = summary(r);
        CHECK(s["node_count"].get<std::size_t>() == octa_mesh.positions.size() + s["records"].get<std::size_t>());
        const VertexTree tree = load_tree_file(box.at("o.vtree"));
        CHECK(tree.node_count() == s["node_count"].get<std::size_t>());
        CHECK(fs::exists(box.at("o.vtree.manifest.json")));
    }

    SUBCASE("empty log: roots are the leaves")
    {
        const std::string empty = box.write("empty.clog", "# nothing merged\n");
        const Result r = run(box, "build-tree " + octa + " --log " + empty + " -o " + box.at("e.vtree"));
        REQUIRE(r.code == 0);
        const json s = summary(r);
        CHECK(s["root_count"] == s["leaf_count"]);
        CHECK(s["node_count"] == 6);
    }

    SUBCASE("corrupted logs")
    {
        const std::string dead = box.write("dead.clog", "C 0 1 6 0 0 0 0\nC 0 2 7 0 0 0 0\n");
        CHECK(run(box, "build-tree " + octa + " --log " + dead + " -o " + box.at("d.vtree")).code == 4);
        const std::string skipped = box.write("skip.clog", "C 0 1 9 0 0 0 0\n");
        CHECK(run(box, "build-tree " + octa + " --log " + skipped + " -o " + box.at("d.vtree")).code == 4);
        const std::string garbage = box.write("garbage.clog", "not a log\n");
        CHECK(run(box, "build-tree " + octa + " --log " + garbage + " -o " + box.at("d.vtree")).code == 4);
        CHECK_FALSE(fs::exists(box.at("d.vtree")));
    }

    SUBCASE("extract at 0, a middle error, and inf")
    {
        const Mesh sphere = make_icosphere(2);
        const std::string in = save(box, "sphere.obj", sphere);
        REQUIRE(run(box, "build-tree " + in + " -o " + box.at("s.json") + " --json").code == 0);
        CHECK(box.read("s.json").find("\"VTREE\"") != std::string::npos);
        const VertexTree tree = load_tree_file(box.at("s.json"));

        REQUIRE(run(box, "extract " + box.at("s.json") + " --error 0 -o " + box.at("fine.obj")).code == 0);
        CHECK(load_obj_file(box.at("fine.obj")) == cleanup(sphere));

        const Result r = run(box, "extract " + box.at("s.json") + " --error inf -o " + box.at("coarse.obj"));
        REQUIRE(r.code == 0);
        CHECK(load_obj_file(box.at("coarse.obj")) == extract_at_error(tree, INFINITY));
        CHECK(summary(r)["faces"] == 0);

        const double mid = tree.node(tree.node_count() / 2).cost;
        REQUIRE(run(box, "extract " + box.at("s.json") + " --error " + format_double(mid) + " -o " + box.at("mid.obj"))
                    .code == 0);
        CHECK(load_obj_file(box.at("mid.obj")) == extract_at_error(tree, mid));

        CHECK(run(box, "extract " + box.at("s.json") + " --error -1 -o " + box.at("x.obj")).code == 2);
        CHECK(run(box, "extract " + box.at("missing.vtree") + " --error 0 -o " + box.at("x.obj")).code == 1);
        const std::string junk = box.write("junk.vtree", std::string("VTREE\0\0\2 nonsense", 18));
        CHECK(run(box, "extract " + junk + " --error 0 -o " + box.at("x.obj")).code == 4);
        CHECK(run(box, "extract " + in + " --error 0 -o " + box.at("x.obj")).code == 4);
    }
}

TEST_CASE("flythrough")
{
    Sandbox box;
    const Mesh sphere = make_icosphere(2);
    const std::string in = save(box, "sphere.obj", sphere);
    REQUIRE(run(box, "build-tree " + in + " -o " + box.at("s.vtree")).code == 0);
    const VertexTree tree = load_tree_file(box.at("s.vtree"));

    auto key = [](double t, double z) {
        return json{{"t", t}, {"eye", {0.1, 0.2, z}}, {"forward", {0, 0, -1}}, {"up", {0, 1, 0}}, {"fov_y", 1.0},
                    {"viewport_height", 600}};
    };

    SUBCASE("one frame is one adapt from the roots")
    {
        const std::string path = box.write("one.json", json::array({key(0, 4)}).dump());
        REQUIRE(run(box, "flythrough " + box.at("s.vtree") + " --path " + path + " --tau 3 --tau-sil 1 -o "
                             + box.at("one.csv"))
                    .code == 0);
        ActiveFront front = ActiveFront::roots(tree);
        const auto cameras = parse_camera_path(box.read("one.json"));
        const AdaptStats stats = adapt(front, tree, cameras[0].camera, {3.0, 1.0, 0.5});
        std::ostringstream expected;
        write_stats_csv({{0, front.size(), render_set(front, tree).size(), stats.splits, stats.merges,
                          max_active_error(front, tree, cameras[0].camera)}},
                        expected);
        CHECK(box.read("one.csv") == expected.str());
        CHECK(fs::exists(box.at("one.csv.manifest.json")));
    }

    SUBCASE("tau 0 converges to full detail")
    {
        json path = json::array();
        for (int i = 0; i < 40; ++i) path.push_back(key(i, 4));
        box.write("still.json", path.dump());
        const Result r = run(box, "flythrough " + box.at("s.vtree") + " --path " + box.at("still.json")
                                      + " --tau 0 --hysteresis 0 -o " + box.at("still.csv"));
        REQUIRE(r.code == 0);
        const json s = summary(r);
        CHECK(s["final_active"] == tree.leaf_count());
        CHECK(s["final_triangles"] == sphere.faces.size());
    }

    SUBCASE("zooming in grows the triangle count")
    {
        json path = json::array();
        for (int i = 0; i < 30; ++i) path.push_back(key(i, 12.0 - 0.3 * i));
        box.write("zoom.json", path.dump());
        REQUIRE(run(box, "flythrough " + box.at("s.vtree") + " --path " + box.at("zoom.json") + " --tau 4 -o "
                             + box.at("zoom.csv"))
                    .code == 0);
        std::istringstream csv(box.read("zoom.csv"));
        std::string line;
        std::getline(csv, line);
        CHECK(line == "frame,active,triangles,splits,merges,max_err_px");
        std::vector<std::size_t> triangles;
        while (std::getline(csv, line)) {
            std::istringstream row(line);
            std::string cell;
            for (int c = 0; c < 3; ++c) std::getline(row, cell, ',');
            triangles.push_back(std::stoul(cell));
        }
        REQUIRE(triangles.size() == 30);
        CHECK(triangles.back() > triangles[5]);
    }

    SUBCASE("bad inputs")
    {
        const std::string bad = box.write("bad.json", "[{\"t\": 0}]");
        CHECK(run(box, "flythrough " + box.at("s.vtree") + " --path " + bad + " -o " + box.at("x.csv")).code == 2);
        const std::string broken = box.write("broken.json", "{");
        CHECK(run(box, "flythrough " + box.at("s.vtree") + " --path " + broken + " -o " + box.at("x.csv")).code == 2);
        const std::string good = box.write("good.json", json::array({key(0, 4)}).dump());
        CHECK(run(box, "flythrough " + box.at("s.vtree") + " --path " + good + " --tau 1 --tau-sil 2 -o "
                           + box.at("x.csv"))
                  .code == 2);
        CHECK(run(box, "flythrough " + box.at("s.vtree") + " --path " + box.at("nope.json") + " -o " + box.at("x.csv"))
                  .code == 1);
    }
}

TEST_CASE("compare")
{
    Sandbox box;
    const Mesh cube = make_cube();
    const std::string a = save(box, "cube.obj", cube);

    SUBCASE("identical inputs")
    {
        const Result r = run(box, "compare " + a + " " + a + " --samples 500 --seed 1 --symmetric");
        REQUIRE(r.code == 0);
        const json s = summary(r);
        CHECK(s["mean"] == 0.0);
        CHECK(s["max"] == 0.0);
        CHECK(s["direction"] == "symmetric");
        CHECK(s["samples"] == 500);
    }

    SUBCASE("cube against a scaled cube, deterministic")
    {
        const std::string b = save(box, "big.obj", make_cube(0.55));
        const Result r1 = run(box, "compare " + a + " " + b + " --samples 2000 --seed 9");
        const Result r2 = run(box, "compare " + a + " " + b + " --samples 2000 --seed 9");
        REQUIRE(r1.code == 0);
        CHECK(r1.out == r2.out);
        const json s = summary(r1);
        CHECK(s["max"].get<double>() <= 0.05 + 1e-12);
        CHECK(s["mean"].get<double>() > 0.0);
        CHECK(s["direction"] == "a_to_b");
        CHECK_FALSE(fs::exists(box.at("big.obj.manifest.json")));

        REQUIRE(run(box, "compare " + a + " " + b + " --samples 2000 --seed 9 --manifest " + box.at("cmp.json")).code
                == 0);
        CHECK(json::parse(box.read("cmp.json"))["parameters"]["seed"] == 9);
    }

    SUBCASE("zero-area input")
    {
        const std::string flat = box.write("flat.obj", "v 0 0 0\nv 1 0 0\nv 2 0 0\nf 1 2 3\n");
        const Result r = run(box, "compare " + flat + " " + a);
        CHECK(r.code == 5);
        CHECK(r.out.empty());
    }
}

TEST_CASE("usage")
{
    Sandbox box;
    CHECK(run(box, "").code == 2);
    CHECK(run(box, "frobnicate").code == 2);
    const Result help = run(box, "--help");
    CHECK(help.code == 0);
    const Result version = run(box, "--version");
    CHECK(version.code == 0);
    CHECK_FALSE(version.out.empty());
}
