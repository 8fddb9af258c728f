#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "meshforge/error.hpp"
#include "meshforge/mesh.hpp"
#include "meshforge/metrics.hpp"
#include "meshforge/simplifier.hpp"
#include "meshforge/vertex_tree.hpp"
#include "meshforge/view_dependent.hpp"

#ifndef MESHFORGE_VERSION
#define MESHFORGE_VERSION "unknown"
#endif

namespace {

using namespace meshforge;
using nlohmann::json;

enum Exit : int {
    kOk = 0,
    kIo = 1,
    kUsage = 2,
    kUnreachable = 3,
    kBadTree = 4,
    kZeroArea = 5,
};

/// Bad flag value discovered after CLI11 parsing (exit 2).
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

double parse_real(const std::string& text, const std::string& flag)
{
    if (text == "inf" || text == "+inf" || text == "infinity") return std::numeric_limits<double>::infinity();
    std::size_t used = 0;
    double value = 0.0;
    try {
        value = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != text.size() || std::isnan(value)) {
        throw UsageError(flag + ": expected a number or 'inf', got '" + text + "'");
    }
    return value;
}

std::string read_text(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::system_error(errno, std::generic_category(), "cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

json number(double v)
{
    // JSON has no infinity; spell it like the command line does.
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

const char* placement_name(PlacementPolicy p)
{
    switch (p) {
    case PlacementPolicy::Optimal: return "optimal";
    case PlacementPolicy::Subset: return "subset";
    case PlacementPolicy::Midpoint: return "midpoint";
    }
    return "?";
}

/// Bookkeeping for the manifest written next to a command's outputs.
struct Run {
    std::string command;
    std::vector<std::string> argv;
    json inputs = json::array();
    json parameters = json::object();
    json outputs = json::array();
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    void write_manifest(const std::string& path) const
    {
        const std::chrono::duration<double> wall = std::chrono::steady_clock::now() - start;
        const json doc{{"tool", "meshforge"},
                       {"version", MESHFORGE_VERSION},
                       {"command", command},
                       {"argv", argv},
                       {"inputs", inputs},
                       {"parameters", parameters},
                       {"wall_time_s", wall.count()},
                       {"outputs", outputs}};
        std::ofstream out(path);
        out << doc.dump(2) << '\n';
        if (!out) throw std::system_error(errno, std::generic_category(), "cannot write " + path);
    }
};

void emit(const json& summary) { std::cout << summary.dump() << '\n'; }

// ---------------------------------------------------------------------------

struct SimplifyArgs {
    std::string input;
    std::size_t target_faces = 0;
    std::string pair_threshold = "0";
    std::string placement = "optimal";
    std::string output;
    std::string log;
};

SimplifyConfig config_of(const SimplifyArgs& a)
{
    SimplifyConfig cfg;
    cfg.target_faces = a.target_faces;
    cfg.pair_threshold = parse_real(a.pair_threshold, "--pair-threshold");
    cfg.placement = a.placement == "subset"     ? PlacementPolicy::Subset
                    : a.placement == "midpoint" ? PlacementPolicy::Midpoint
                                                : PlacementPolicy::Optimal;
    cfg.validate();
    return cfg;
}

void record_simplify_params(Run& run, const SimplifyConfig& cfg)
{
    run.parameters["target_faces"] = cfg.target_faces;
    run.parameters["pair_threshold"] = number(cfg.pair_threshold);
    run.parameters["placement"] = placement_name(cfg.placement);
}

void write_log_file(const std::vector<ContractionRecord>& log, const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw std::system_error(errno, std::generic_category(), "cannot write " + path);
    write_clog(log, out);
    if (!out) throw std::system_error(errno, std::generic_category(), "write failed: " + path);
}

int cmd_simplify(const SimplifyArgs& a, Run& run)
{
    const SimplifyConfig cfg = config_of(a);
    record_simplify_params(run, cfg);
    run.inputs.push_back(a.input);

    const Mesh input = load_obj_file(a.input);
    const SimplifyResult result = simplify(input, cfg);

    save_obj_file(result.mesh, a.output);
    run.outputs.push_back(a.output);
    if (!a.log.empty()) {
        write_log_file(result.log, a.log);
        run.outputs.push_back(a.log);
    }
    run.write_manifest(a.output + ".manifest.json");

    emit({{"command", "simplify"},
          {"faces_before", input.faces.size()},
          {"vertices_before", input.positions.size()},
          {"faces_after", result.mesh.faces.size()},
          {"vertices_after", result.mesh.positions.size()},
          {"contractions", result.log.size()},
          {"total_cost", result.total_cost},
          {"target_reached", result.target_reached}});
    if (!result.target_reached) {
        std::cerr << "meshforge: candidate pairs exhausted at " << result.mesh.faces.size()
                  << " faces, above the target of " << cfg.target_faces << "\n";
        return kUnreachable;
    }
    return kOk;
}

// ---------------------------------------------------------------------------

struct BuildTreeArgs {
    SimplifyArgs simplify;
    bool json_output = false;
};

int cmd_build_tree(const BuildTreeArgs& a, Run& run)
{
    run.inputs.push_back(a.simplify.input);
    const Mesh input = load_obj_file(a.simplify.input);

    std::vector<ContractionRecord> log;
    bool reached = true;
    if (!a.simplify.log.empty()) {
        run.inputs.push_back(a.simplify.log);
        run.parameters["log"] = a.simplify.log;
        std::istringstream text(read_text(a.simplify.log));
        try {
            log = read_clog(text);
        } catch (const ParseError& e) {
            throw InconsistentLog(a.simplify.log + ": " + e.what());
        }
    } else {
        const SimplifyConfig cfg = config_of(a.simplify);
        record_simplify_params(run, cfg);
        SimplifyResult result = simplify(input, cfg);
        log = std::move(result.log);
        reached = result.target_reached;
    }
    run.parameters["json"] = a.json_output;

    const VertexTree tree = build_tree(input, log);
    save_tree_file(tree, a.simplify.output, a.json_output);
    run.outputs.push_back(a.simplify.output);
    run.write_manifest(a.simplify.output + ".manifest.json");

    emit({{"command", "build-tree"},
          {"leaf_count", tree.leaf_count()},
          {"node_count", tree.node_count()},
          {"root_count", tree.roots().size()},
          {"records", log.size()},
          {"face_count", tree.original_faces().size()}});
    if (!reached) {
        std::cerr << "meshforge: candidate pairs exhausted above the target face count\n";
        return kUnreachable;
    }
    return kOk;
}

// ---------------------------------------------------------------------------

struct ExtractArgs {
    std::string input;
    std::string error = "0";
    std::string output;
};

int cmd_extract(const ExtractArgs& a, Run& run)
{
    const double eps = parse_real(a.error, "--error");
    if (!(eps >= 0.0)) throw UsageError("--error must be >= 0");
    run.inputs.push_back(a.input);
    run.parameters["error"] = number(eps);

    const VertexTree tree = load_tree_file(a.input);
    const Mesh mesh = extract_at_error(tree, eps);
    save_obj_file(mesh, a.output);
    run.outputs.push_back(a.output);
    run.write_manifest(a.output + ".manifest.json");

    emit({{"command", "extract"}, {"faces", mesh.faces.size()}, {"vertices", mesh.positions.size()}});
    return kOk;
}

// ---------------------------------------------------------------------------

struct FlythroughArgs {
    std::string input;
    std::string path;
    std::string tau = "1";
    std::string tau_silhouette;
    double hysteresis = 0.5;
    std::size_t max_ops = std::numeric_limits<std::size_t>::max();
    std::string output;
};

int cmd_flythrough(const FlythroughArgs& a, Run& run)
{
    AdaptParams params;
    params.tau = parse_real(a.tau, "--tau");
    params.tau_silhouette = a.tau_silhouette.empty() ? params.tau : parse_real(a.tau_silhouette, "--tau-sil");
    params.hysteresis = a.hysteresis;
    params.max_ops_per_frame = a.max_ops;
    params.validate();

    run.inputs.push_back(a.input);
    run.inputs.push_back(a.path);
    run.parameters["tau"] = number(params.tau);
    run.parameters["tau_silhouette"] = number(params.tau_silhouette);
    run.parameters["hysteresis"] = params.hysteresis;
    if (a.max_ops != std::numeric_limits<std::size_t>::max()) run.parameters["max_ops"] = a.max_ops;

    const VertexTree tree = load_tree_file(a.input);
    const std::vector<CameraKey> path = parse_camera_path(read_text(a.path));
    const std::vector<FrameStats> stats = flythrough(tree, path, params);

    {
        std::ofstream out(a.output);
        if (!out) throw std::system_error(errno, std::generic_category(), "cannot write " + a.output);
        write_stats_csv(stats, out);
        if (!out) throw std::system_error(errno, std::generic_category(), "write failed: " + a.output);
    }
    run.outputs.push_back(a.output);
    run.write_manifest(a.output + ".manifest.json");

    std::size_t splits = 0, merges = 0;
    for (const FrameStats& s : stats) {
        splits += s.splits;
        merges += s.merges;
    }
    emit({{"command", "flythrough"},
          {"frames", stats.size()},
          {"final_active", stats.empty() ? 0 : stats.back().active},
          {"final_triangles", stats.empty() ? 0 : stats.back().triangles},
          {"splits", splits},
          {"merges", merges}});
    return kOk;
}

// ---------------------------------------------------------------------------

struct CompareArgs {
    std::string a;
    std::string b;
    std::size_t samples = 10000;
    std::uint64_t seed = 0;
    bool symmetric = false;
    std::string manifest;
};

int cmd_compare(const CompareArgs& a, Run& run)
{
    if (a.samples == 0) throw UsageError("--samples must be positive");
    run.inputs.push_back(a.a);
    run.inputs.push_back(a.b);
    run.parameters["samples"] = a.samples;
    run.parameters["seed"] = a.seed;
    run.parameters["symmetric"] = a.symmetric;

    const Mesh ma = load_obj_file(a.a);
    const Mesh mb = load_obj_file(a.b);
    const DeviationReport report =
        sampled_deviation(ma, mb, a.samples, a.seed, a.symmetric ? Direction::Symmetric : Direction::AToB);
    if (!a.manifest.empty()) run.write_manifest(a.manifest);
    std::cout << report.to_json() << '\n';
    return kOk;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Progressive meshes: simplification, vertex trees and view-dependent refinement.", "meshforge"};
    app.set_version_flag("--version", MESHFORGE_VERSION);
    app.require_subcommand(1);

    auto add_simplify_flags = [&](CLI::App* sub, SimplifyArgs& s) {
        sub->add_option("--target-faces,-n", s.target_faces, "Stop once the face count is at most N")
            ->capture_default_str();
        sub->add_option("--pair-threshold,-t", s.pair_threshold,
                        "Also pair unconnected vertices closer than this distance (0 = edges only)")
            ->capture_default_str();
        sub->add_option("--placement,-p", s.placement, "Contracted vertex placement")
            ->check(CLI::IsMember({"optimal", "subset", "midpoint"}))
            ->capture_default_str();
    };

    SimplifyArgs simplify_args;
    auto* simplify = app.add_subcommand("simplify", "Greedy pair contraction down to a face budget");
    simplify->add_option("input", simplify_args.input, "Input OBJ")->required();
    add_simplify_flags(simplify, simplify_args);
    simplify->add_option("-o,--output", simplify_args.output, "Output OBJ")->required();
    simplify->add_option("--log,-l", simplify_args.log, "Write the contraction log here");

    BuildTreeArgs tree_args;
    auto* build = app.add_subcommand("build-tree", "Build a vertex tree from a contraction log (or simplify first)");
    build->add_option("input", tree_args.simplify.input, "Input OBJ")->required();
    auto* log_flag = build->add_option("--log,-l", tree_args.simplify.log, "Contraction log of this mesh");
    add_simplify_flags(build, tree_args.simplify);
    for (const char* name : {"--target-faces", "--pair-threshold", "--placement"}) build->get_option(name)->excludes(log_flag);
    build->add_option("-o,--output", tree_args.simplify.output, "Output VTREE")->required();
    build->add_flag("--json", tree_args.json_output, "Write the JSON export instead of binary VTREE");

    ExtractArgs extract_args;
    auto* extract = app.add_subcommand("extract", "Extract the coarsest mesh within an object-space error");
    extract->add_option("input", extract_args.input, "Input VTREE (binary or JSON)")->required();
    extract->add_option("--error,-e", extract_args.error, "Error bound, or 'inf' for the coarsest mesh")->required();
    extract->add_option("-o,--output", extract_args.output, "Output OBJ")->required();

    FlythroughArgs fly_args;
    auto* fly = app.add_subcommand("flythrough", "Replay a camera path through view-dependent refinement");
    fly->add_option("input", fly_args.input, "Input VTREE (binary or JSON)")->required();
    fly->add_option("--path", fly_args.path, "Camera path JSON")->required();
    fly->add_option("--tau", fly_args.tau, "Screen-space tolerance in pixels")->capture_default_str();
    fly->add_option("--tau-sil", fly_args.tau_silhouette, "Tolerance for silhouette nodes (default: --tau)");
    fly->add_option("--hysteresis", fly_args.hysteresis, "Merge when parent error < hysteresis * tau")
        ->capture_default_str();
    fly->add_option("--max-ops", fly_args.max_ops, "Split/merge budget per frame");
    fly->add_option("-o,--output", fly_args.output, "Output stats CSV")->required();

    CompareArgs compare_args;
    auto* compare = app.add_subcommand("compare", "Sampled surface deviation between two meshes");
    compare->add_option("a", compare_args.a, "First OBJ")->required();
    compare->add_option("b", compare_args.b, "Second OBJ")->required();
    compare->add_option("--samples,-s", compare_args.samples, "Samples per direction")->capture_default_str();
    compare->add_option("--seed", compare_args.seed, "Sampling seed")->capture_default_str();
    compare->add_flag("--symmetric", compare_args.symmetric, "Measure both directions");
    compare->add_option("--manifest", compare_args.manifest, "Write a run manifest here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    Run run;
    run.argv.assign(argv, argv + argc);
    auto fail = [](int code, const std::string& what) {
        std::cerr << "meshforge: error: " << what << '\n';
        return code;
    };
    try {
        if (*simplify) {
            run.command = "simplify";
            return cmd_simplify(simplify_args, run);
        }
        if (*build) {
            run.command = "build-tree";
            return cmd_build_tree(tree_args, run);
        }
        if (*extract) {
            run.command = "extract";
            return cmd_extract(extract_args, run);
        }
        if (*fly) {
            run.command = "flythrough";
            return cmd_flythrough(fly_args, run);
        }
        run.command = "compare";
        return cmd_compare(compare_args, run);
    } catch (const ParseError& e) {
        return fail(kUsage, e.what());
    } catch (const UsageError& e) {
        return fail(kUsage, e.what());
    } catch (const PairExplosion& e) {
        return fail(kUsage, e.what());
    } catch (const InvalidMesh& e) {
        return fail(kUsage, e.what());
    } catch (const EmptyMesh& e) {
        return fail(kUsage, e.what());
    } catch (const InconsistentLog& e) {
        return fail(kBadTree, e.what());
    } catch (const FormatError& e) {
        return fail(kBadTree, e.what());
    } catch (const ZeroAreaMesh& e) {
        return fail(kZeroArea, e.what());
    } catch (const std::system_error& e) {
        return fail(kIo, e.what());
    } catch (const std::invalid_argument& e) {
        return fail(kUsage, e.what());
    } catch (const std::exception& e) {
        return fail(kIo, e.what());
    }
}
