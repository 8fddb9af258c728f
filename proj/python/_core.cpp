#include <cstring>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "meshforge/error.hpp"
#include "meshforge/mesh.hpp"
#include "meshforge/metrics.hpp"
#include "meshforge/primitives.hpp"
#include "meshforge/simplifier.hpp"
#include "meshforge/vertex_tree.hpp"
#include "meshforge/view_dependent.hpp"

namespace py = pybind11;
using namespace meshforge;

namespace {

using Positions = py::array_t<double, py::array::c_style | py::array::forcecast>;
using Faces = py::array_t<std::uint32_t, py::array::c_style | py::array::forcecast>;

Vec3 vec(const std::array<double, 3>& a) { return {a[0], a[1], a[2]}; }
std::array<double, 3> arr(const Vec3& v) { return {v.x, v.y, v.z}; }

Mesh mesh_from_arrays(const Positions& positions, const Faces& faces)
{
    if (positions.ndim() != 2 || (positions.shape(0) > 0 && positions.shape(1) != 3)) {
        throw py::value_error("positions must have shape (n, 3)");
    }
    if (faces.ndim() != 2 || (faces.shape(0) > 0 && faces.shape(1) != 3)) {
        throw py::value_error("faces must have shape (m, 3)");
    }
    Mesh m;
    m.positions.resize(static_cast<std::size_t>(positions.shape(0)));
    const double* p = positions.data();
    for (std::size_t i = 0; i < m.positions.size(); ++i) m.positions[i] = {p[3 * i], p[3 * i + 1], p[3 * i + 2]};
    m.faces.resize(static_cast<std::size_t>(faces.shape(0)));
    if (!m.faces.empty()) std::memcpy(m.faces.data(), faces.data(), m.faces.size() * sizeof(Face));
    m.validate();
    return m;
}

py::array_t<double> positions_array(const Mesh& m)
{
    py::array_t<double> out({static_cast<py::ssize_t>(m.positions.size()), py::ssize_t{3}});
    double* p = out.mutable_data();
    for (const Vec3& v : m.positions) {
        *p++ = v.x;
        *p++ = v.y;
        *p++ = v.z;
    }
    return out;
}

py::array_t<std::uint32_t> faces_array(const std::vector<Face>& faces)
{
    py::array_t<std::uint32_t> out({static_cast<py::ssize_t>(faces.size()), py::ssize_t{3}});
    if (!faces.empty()) std::memcpy(out.mutable_data(), faces.data(), faces.size() * sizeof(Face));
    return out;
}

PlacementPolicy placement_of(const std::string& name)
{
    if (name == "optimal") return PlacementPolicy::Optimal;
    if (name == "subset") return PlacementPolicy::Subset;
    if (name == "midpoint") return PlacementPolicy::Midpoint;
    throw py::value_error("placement must be 'optimal', 'subset' or 'midpoint'");
}

Camera camera_of(const std::array<double, 3>& eye, const std::array<double, 3>& target, const std::array<double, 3>& up,
                 double fov_y, double viewport_height, double near_plane)
{
    return Camera::look_at(vec(eye), vec(target), vec(up), fov_y, viewport_height, near_plane);
}

}  // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Progressive-mesh simplification, vertex trees and view-dependent refinement.";
#ifdef MESHFORGE_VERSION
    m.attr("__version__") = MESHFORGE_VERSION;
#endif

    static py::exception<Error> base(m, "MeshforgeError", PyExc_RuntimeError);
    static py::exception<ParseError> parse_error(m, "ParseError", base.ptr());
    static py::exception<InvalidMesh> invalid_mesh(m, "InvalidMesh", base.ptr());
    static py::exception<ZeroAreaMesh> zero_area(m, "ZeroAreaMesh", base.ptr());
    static py::exception<PairExplosion> pair_explosion(m, "PairExplosion", base.ptr());
    static py::exception<InconsistentLog> inconsistent_log(m, "InconsistentLog", base.ptr());
    static py::exception<FormatError> format_error(m, "FormatError", base.ptr());
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const ParseError& e) {
            PyErr_SetString(parse_error.ptr(), e.what());
        } catch (const InvalidMesh& e) {
            PyErr_SetString(invalid_mesh.ptr(), e.what());
        } catch (const ZeroAreaMesh& e) {
            PyErr_SetString(zero_area.ptr(), e.what());
        } catch (const PairExplosion& e) {
            PyErr_SetString(pair_explosion.ptr(), e.what());
        } catch (const InconsistentLog& e) {
            PyErr_SetString(inconsistent_log.ptr(), e.what());
        } catch (const FormatError& e) {
            PyErr_SetString(format_error.ptr(), e.what());
        } catch (const Error& e) {
            PyErr_SetString(base.ptr(), e.what());
        }
    });

    py::class_<Mesh>(m, "Mesh")
        .def(py::init(&mesh_from_arrays), py::arg("positions"), py::arg("faces"))
        .def_property_readonly("positions", &positions_array)
        .def_property_readonly("faces", [](const Mesh& self) { return faces_array(self.faces); })
        .def_property_readonly("vertex_count", [](const Mesh& self) { return self.positions.size(); })
        .def_property_readonly("face_count", [](const Mesh& self) { return self.faces.size(); })
        .def("__eq__", [](const Mesh& a, const Mesh& b) { return a == b; })
        .def("__repr__", [](const Mesh& self) {
            return "<Mesh " + std::to_string(self.positions.size()) + " vertices, " + std::to_string(self.faces.size())
                   + " faces>";
        });

    m.def("load_obj", &load_obj_file, py::arg("path"));
    m.def("loads_obj", [](const std::string& text) { return load_obj_string(text); }, py::arg("text"));
    m.def("save_obj", &save_obj_file, py::arg("mesh"), py::arg("path"));
    m.def("dumps_obj", &save_obj_string, py::arg("mesh"));
    m.def("cleanup", &cleanup, py::arg("mesh"));
    m.def("bounding_radius", &bounding_radius, py::arg("mesh"));

    m.def("tetrahedron", &make_tetrahedron);
    m.def("cube", &make_cube, py::arg("half_size") = 0.5);
    m.def("octahedron", &make_octahedron, py::arg("radius") = 1.0);
    m.def("icosphere", &make_icosphere, py::arg("subdivisions"), py::arg("radius") = 1.0);
    m.def("torus", &make_torus, py::arg("rings"), py::arg("segments"), py::arg("major_radius") = 1.0,
          py::arg("minor_radius") = 0.35);

    py::class_<ContractionRecord>(m, "ContractionRecord")
        .def_readonly("removed_a", &ContractionRecord::removed_a)
        .def_readonly("removed_b", &ContractionRecord::removed_b)
        .def_readonly("created", &ContractionRecord::created)
        .def_property_readonly("position", [](const ContractionRecord& r) { return arr(r.position); })
        .def_readonly("cost", &ContractionRecord::cost)
        .def_readonly("was_edge", &ContractionRecord::was_edge)
        .def("__eq__", [](const ContractionRecord& a, const ContractionRecord& b) { return a == b; });

    py::class_<SimplifyResult>(m, "SimplifyResult")
        .def_readonly("mesh", &SimplifyResult::mesh)
        .def_readonly("log", &SimplifyResult::log)
        .def_readonly("target_reached", &SimplifyResult::target_reached)
        .def_readonly("total_cost", &SimplifyResult::total_cost);

    m.def(
        "simplify",
        [](const Mesh& mesh, std::size_t target_faces, double pair_threshold, const std::string& placement) {
            SimplifyConfig cfg;
            cfg.target_faces = target_faces;
            cfg.pair_threshold = pair_threshold;
            cfg.placement = placement_of(placement);
            cfg.validate();
            py::gil_scoped_release release;
            return simplify(mesh, cfg);
        },
        py::arg("mesh"), py::arg("target_faces"), py::arg("pair_threshold") = 0.0, py::arg("placement") = "optimal");
    m.def("replay", &replay, py::arg("mesh"), py::arg("log"));

    py::class_<VertexTree>(m, "VertexTree")
        .def_property_readonly("leaf_count", &VertexTree::leaf_count)
        .def_property_readonly("node_count", &VertexTree::node_count)
        .def_property_readonly("roots", &VertexTree::roots)
        .def_property_readonly("faces", [](const VertexTree& t) { return faces_array(t.original_faces()); })
        .def("position", [](const VertexTree& t, NodeId id) { return arr(t.node(id).position); }, py::arg("id"))
        .def("children", [](const VertexTree& t, NodeId id) -> py::object {
            const VertexNode& n = t.node(id);
            if (n.is_leaf()) return py::none();
            return py::make_tuple(n.children[0], n.children[1]);
        }, py::arg("id"))
        .def("cost", [](const VertexTree& t, NodeId id) { return t.node(id).cost; }, py::arg("id"))
        .def("error_radius", [](const VertexTree& t, NodeId id) { return t.node(id).error_radius; }, py::arg("id"))
        .def("leaves_under", [](const VertexTree& t, NodeId id) {
            const auto span = t.leaves_under(id);
            return std::vector<NodeId>(span.begin(), span.end());
        }, py::arg("id"))
        .def("to_bytes", [](const VertexTree& t) {
            const auto bytes = save_tree(t);
            return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
        })
        .def_static("from_bytes", [](const py::bytes& data) {
            const std::string raw = data;
            return load_tree({reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size()});
        }, py::arg("data"))
        .def("to_json", &save_tree_json)
        .def_static("from_json", &load_tree_json, py::arg("text"))
        .def("save", &save_tree_file, py::arg("path"), py::arg("json") = false)
        .def_static("load", &load_tree_file, py::arg("path"))
        .def("__eq__", [](const VertexTree& a, const VertexTree& b) { return a == b; });

    m.def("build_tree", &build_tree, py::arg("mesh"), py::arg("log"));
    m.def("full_resolution", &full_resolution, py::arg("tree"));
    m.def("cut_at_error", &cut_at_error, py::arg("tree"), py::arg("max_error"));
    m.def("extract_at_error", &extract_at_error, py::arg("tree"), py::arg("max_error"));

    py::class_<Camera>(m, "Camera")
        .def(py::init(&camera_of), py::arg("eye"), py::arg("target"), py::arg("up") = std::array<double, 3>{0, 1, 0},
             py::arg("fov_y") = std::numbers::pi / 3.0, py::arg("viewport_height") = 1080.0,
             py::arg("near_plane") = 0.01)
        .def_property_readonly("eye", [](const Camera& c) { return arr(c.eye); })
        .def_property_readonly("forward", [](const Camera& c) { return arr(c.forward); })
        .def_property_readonly("up", [](const Camera& c) { return arr(c.up); })
        .def_readonly("fov_y", &Camera::fov_y)
        .def_readonly("viewport_height", &Camera::viewport_height)
        .def_readonly("near_plane", &Camera::near_plane);

    py::class_<AdaptParams>(m, "AdaptParams")
        .def(py::init([](double tau, std::optional<double> tau_silhouette, double hysteresis,
                         std::optional<std::size_t> max_ops) {
                 AdaptParams p;
                 p.tau = tau;
                 p.tau_silhouette = tau_silhouette.value_or(tau);
                 p.hysteresis = hysteresis;
                 if (max_ops) p.max_ops_per_frame = *max_ops;
                 p.validate();
                 return p;
             }),
             py::arg("tau") = 1.0, py::arg("tau_silhouette") = py::none(), py::arg("hysteresis") = 0.5,
             py::arg("max_ops") = py::none())
        .def_readonly("tau", &AdaptParams::tau)
        .def_readonly("tau_silhouette", &AdaptParams::tau_silhouette)
        .def_readonly("hysteresis", &AdaptParams::hysteresis);

    py::class_<AdaptStats>(m, "AdaptStats")
        .def_readonly("splits", &AdaptStats::splits)
        .def_readonly("merges", &AdaptStats::merges)
        .def_readonly("deferred", &AdaptStats::deferred);

    py::class_<ActiveFront>(m, "ActiveFront")
        .def_static("roots", &ActiveFront::roots, py::arg("tree"))
        .def_static("leaves", &ActiveFront::leaves, py::arg("tree"))
        .def_static("from_nodes", &ActiveFront::from_nodes, py::arg("tree"), py::arg("nodes"))
        .def_property_readonly("active", [](const ActiveFront& f) {
            return std::vector<NodeId>(f.active().begin(), f.active().end());
        })
        .def("__len__", &ActiveFront::size)
        .def("is_valid", &ActiveFront::is_valid, py::arg("tree"))
        .def("adapt", [](ActiveFront& f, const VertexTree& t, const Camera& c, const AdaptParams& p) {
            return adapt(f, t, c, p);
        }, py::arg("tree"), py::arg("camera"), py::arg("params"))
        .def("adapt_to_fixpoint", [](ActiveFront& f, const VertexTree& t, const Camera& c, const AdaptParams& p) {
            return adapt_to_fixpoint(f, t, c, p);
        }, py::arg("tree"), py::arg("camera"), py::arg("params"))
        .def("triangles", [](const ActiveFront& f, const VertexTree& t) {
            std::vector<Face> ids;
            for (const RenderTriangle& tri : render_set(f, t)) ids.push_back(tri.ids);
            return faces_array(ids);
        }, py::arg("tree"));

    m.def("screen_space_error", [](const VertexTree& t, NodeId id, const Camera& c) {
        return screen_space_error(t.node(id), c);
    }, py::arg("tree"), py::arg("id"), py::arg("camera"));
    m.def("is_silhouette", [](const VertexTree& t, NodeId id, const Camera& c) {
        return is_silhouette(t.node(id), c);
    }, py::arg("tree"), py::arg("id"), py::arg("camera"));

    m.def(
        "flythrough",
        [](const VertexTree& tree, const std::string& path_json, const AdaptParams& params) {
            const auto stats = flythrough(tree, parse_camera_path(path_json), params);
            py::list rows;
            for (const FrameStats& s : stats) {
                py::dict row;
                row["frame"] = s.frame;
                row["active"] = s.active;
                row["triangles"] = s.triangles;
                row["splits"] = s.splits;
                row["merges"] = s.merges;
                row["max_err_px"] = s.max_err_px;
                rows.append(row);
            }
            return rows;
        },
        py::arg("tree"), py::arg("path_json"), py::arg("params"));

    m.def(
        "sampled_deviation",
        [](const Mesh& a, const Mesh& b, std::size_t samples, std::uint64_t seed, bool symmetric) {
            if (samples == 0) throw py::value_error("samples must be positive");
            DeviationReport r;
            {
                py::gil_scoped_release release;
                r = sampled_deviation(a, b, samples, seed, symmetric ? Direction::Symmetric : Direction::AToB);
            }
            py::dict out;
            out["mean"] = r.mean;
            out["max"] = r.max;
            out["samples"] = r.samples;
            out["seed"] = r.seed;
            out["direction"] = symmetric ? "symmetric" : "a_to_b";
            return out;
        },
        py::arg("a"), py::arg("b"), py::arg("samples") = 10000, py::arg("seed") = 0, py::arg("symmetric") = false);
}
