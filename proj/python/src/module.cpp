// SPDX-License-Identifier: Apache-2.0
#include "sargcp/error.hpp"
#include "sargcp/geodesy.hpp"
#include "sargcp/pipeline.hpp"
#include "sargcp/pta.hpp"
#include "sargcp/robust_stats.hpp"
#include "sargcp/scene_sim.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace sargcp;

namespace {

py::object to_python(const nlohmann::json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

pipeline::RunOptions options(const std::string& out_dir, unsigned threads) {
    return {out_dir, threads};
}

SlcChip chip_from(const py::array_t<std::complex<double>, py::array::c_style | py::array::forcecast>& a,
                  double line, double sample, double calibration) {
    if (a.ndim() != 2) throw DomainError("chip must be two-dimensional");
    SlcChip chip;
    chip.samples = Grid<Complex>(a.shape(0), a.shape(1));
    std::copy(a.data(), a.data() + a.size(), chip.samples.data());
    chip.origin = {line, sample};
    chip.calibration = calibration;
    return chip;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "SAR ground control point extraction";

    auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<DomainError>(m, "DomainError", error.ptr());
    py::register_exception<ConvergenceError>(m, "ConvergenceError", error.ptr());
    py::register_exception<IllConditionedError>(m, "IllConditionedError", error.ptr());
    py::register_exception<ParseError>(m, "ParseError", error.ptr());

    // Geodesy. Angles in radians, as in the C++ API.
    m.def("geodetic_to_ecef", [](double lat, double lon, double h) {
        return Eigen::Vector3d(geodetic_to_ecef({lat, lon, h}));
    }, py::arg("lat"), py::arg("lon"), py::arg("height"));
    m.def("ecef_to_geodetic", [](const Eigen::Vector3d& p) {
        const Geodetic g = ecef_to_geodetic(p);
        return py::make_tuple(g.latitude, g.longitude, g.height);
    }, py::arg("ecef"));
    m.def("geodetic_to_map", [](double lat, double lon, double h, int zone, bool north) {
        const MapGrid g = geodetic_to_map({lat, lon, h}, zone, north);
        return py::make_tuple(g.easting, g.northing);
    }, py::arg("lat"), py::arg("lon"), py::arg("height") = 0.0, py::arg("zone"), py::arg("north") = true);
    m.def("map_to_geodetic", [](double easting, double northing, int zone, bool north, double h) {
        const Geodetic g = map_to_geodetic({easting, northing, zone, north, h});
        return py::make_tuple(g.latitude, g.longitude, g.height);
    }, py::arg("easting"), py::arg("northing"), py::arg("zone"), py::arg("north") = true, py::arg("height") = 0.0);
    m.def("utm_zone_for", &utm_zone_for, py::arg("lon"));

    // Robust statistics.
    py::class_<BoxplotBounds>(m, "BoxplotBounds")
        .def_readonly("lower", &BoxplotBounds::lower)
        .def_readonly("upper", &BoxplotBounds::upper)
        .def_readonly("q1", &BoxplotBounds::q1)
        .def_readonly("q3", &BoxplotBounds::q3)
        .def_readonly("medcouple", &BoxplotBounds::medcouple)
        .def_readonly("degenerate", &BoxplotBounds::degenerate);
    m.def("medcouple", [](const std::vector<double>& x) { return medcouple(x); }, py::arg("sample"));
    m.def("adjusted_boxplot_bounds", [](const std::vector<double>& x) { return adjusted_boxplot_bounds(x); },
          py::arg("sample"));
    m.def("screen_series", [](const std::vector<double>& sigma_phi, double visibility_max) {
        NoiseSeries s;
        s.sigma_phi = sigma_phi;
        for (std::size_t i = 0; i < sigma_phi.size(); ++i) s.acquisition_ids.push_back(std::to_string(i));
        s.flags.assign(sigma_phi.size(), NoiseFlag::Kept);
        const NoiseSeries out = screen_series(s, {visibility_max});
        std::vector<std::string> flags;
        for (NoiseFlag f : out.flags) flags.emplace_back(to_string(f));
        return flags;
    }, py::arg("sigma_phi"), py::arg("visibility_max") = ScreenOptions{}.visibility_max_rad);

    // Point target analysis.
    py::class_<PtaResult>(m, "PtaResult")
        .def_property_readonly("status", [](const PtaResult& r) { return std::string(to_string(r.status)); })
        .def_property_readonly("line", [](const PtaResult& r) { return r.peak.line; })
        .def_property_readonly("sample", [](const PtaResult& r) { return r.peak.sample; })
        .def_property_readonly("scr", [](const PtaResult& r) { return r.scr.scr; })
        .def_property_readonly("sigma_phi", [](const PtaResult& r) { return r.scr.sigma_phi; });
    m.def("analyze_chip", [](const py::array_t<std::complex<double>, py::array::c_style | py::array::forcecast>& a,
                             double line, double sample, double calibration, int factor) {
        PtaOptions opts;
        opts.factor = factor;
        return analyze_chip(chip_from(a, line, sample, calibration), opts);
    }, py::arg("chip"), py::arg("origin_line") = 0.0, py::arg("origin_sample") = 0.0,
       py::arg("calibration") = 1.0, py::arg("factor") = PtaOptions{}.factor);

    // Simulation and pipeline.
    m.def("simulate", [](const std::string& preset, std::uint64_t seed, const std::string& directory) {
        return sim::write_scene(sim::build_scene(sim::preset(preset, seed)), directory);
    }, py::arg("preset"), py::arg("seed"), py::arg("directory"), "Writes a scene and returns its manifest path.");
    m.def("run_all", [](const std::string& manifest, const std::string& out_dir, unsigned threads) {
        py::list logs;
        for (const auto& log : pipeline::run_all(pipeline::load_manifest(manifest), options(out_dir, threads)))
            logs.append(to_python(log.to_json()));
        return logs;
    }, py::arg("manifest"), py::arg("out_dir"), py::arg("threads") = 1);
    m.def("run_stage", [](const std::string& stage, const std::string& manifest, const std::string& out_dir,
                          unsigned threads) {
        const pipeline::Manifest man = pipeline::load_manifest(manifest);
        const pipeline::RunOptions opts = options(out_dir, threads);
        using Fn = pipeline::StageLog (*)(const pipeline::Manifest&, const pipeline::RunOptions&);
        static const std::map<std::string, Fn> stages{
            {"detect", pipeline::run_detect}, {"pta", pipeline::run_pta},     {"screen", pipeline::run_screen},
            {"correct", pipeline::run_correct}, {"solve", pipeline::run_solve}, {"report", pipeline::run_report}};
        const auto it = stages.find(stage);
        if (it == stages.end()) throw DomainError("unknown stage '" + stage + "'");
        return to_python(it->second(man, opts).to_json());
    }, py::arg("stage"), py::arg("manifest"), py::arg("out_dir"), py::arg("threads") = 1);
}
