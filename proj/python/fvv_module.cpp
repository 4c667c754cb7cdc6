#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fvv/capture_sim.hpp"
#include "fvv/cluster.hpp"
#include "fvv/codec.hpp"
#include "fvv/hls.hpp"
#include "fvv/interp.hpp"
#include "fvv/metrics.hpp"

namespace py = pybind11;
using namespace fvv;

namespace {

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

U8Array plane_array(const Frame& f, std::size_t i) {
  const auto comps = f.components();
  const Plane& p = comps.at(i);
  U8Array out({p.height, p.width});
  std::copy(p.data.begin(), p.data.end(), out.mutable_data());
  return out;
}

Plane to_plane(const U8Array& a) {
  if (a.ndim() != 2) throw ShapeError("expected a 2-d uint8 array");
  Plane p(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  std::copy(a.data(), a.data() + a.size(), p.data.begin());
  return p;
}

py::bytes to_bytes(std::span<const std::uint8_t> b) {
  return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
}

std::vector<std::uint8_t> from_bytes(const py::bytes& b) {
  const std::string_view s = b;
  return {s.begin(), s.end()};
}

}  // namespace

PYBIND11_MODULE(_fvv, m) {
  m.doc() = "Free-viewpoint video tiles: interpolation, codec, clusters and transport streams.";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<RangeError>(m, "RangeError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<LayoutError>(m, "LayoutError", base.ptr());
  py::register_exception<ExtractionError>(m, "ExtractionError", base.ptr());
  py::register_exception<BitstreamError>(m, "BitstreamError", base.ptr());
  py::register_exception<GopAlignmentError>(m, "GopAlignmentError", base.ptr());
  py::register_exception<SequencingError>(m, "SequencingError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<TsError>(m, "TsError", base.ptr());

  py::enum_<PixelFormat>(m, "PixelFormat")
      .value("Gray8", PixelFormat::Gray8)
      .value("YUV420", PixelFormat::YUV420)
      .value("RGB8", PixelFormat::RGB8);
  py::enum_<Tier>(m, "Tier").value("Full", Tier::Full).value("Quarter", Tier::Quarter);
  py::enum_<FrameType>(m, "FrameType").value("I", FrameType::I).value("P", FrameType::P);

  py::class_<Frame>(m, "Frame")
      .def_static("filled", &Frame::filled, py::arg("width"), py::arg("height"), py::arg("format"),
                  py::arg("luma"), py::arg("timestamp") = 0)
      .def_static(
          "from_planes",
          [](PixelFormat format, const std::vector<U8Array>& planes, std::int64_t ts) {
            std::vector<Plane> comps;
            for (const auto& a : planes) comps.push_back(to_plane(a));
            return Frame::from_components(format, std::move(comps), ts);
          },
          py::arg("format"), py::arg("planes"), py::arg("timestamp") = 0)
      .def_property_readonly("width", &Frame::width)
      .def_property_readonly("height", &Frame::height)
      .def_property_readonly("format", &Frame::format)
      .def_property_readonly("timestamp", &Frame::timestamp)
      .def_property_readonly("plane_count", &Frame::plane_count)
      .def("plane", &plane_array, py::arg("index"), "Channel as a (rows, cols) uint8 array.")
      .def("luma", [](const Frame& f) { return plane_array(Frame::from_gray(f.luma()), 0); })
      .def("same_pixels", &Frame::same_pixels)
      .def("__repr__", [](const Frame& f) {
        return "<Frame " + std::to_string(f.width()) + "x" + std::to_string(f.height()) + " " +
               to_string(f.format()) + ">";
      });

  py::class_<ViewIndexModel>(m, "ViewIndexModel")
      .def(py::init<int, int>(), py::arg("camera_count"), py::arg("stages"))
      .def_property_readonly("camera_count", &ViewIndexModel::camera_count)
      .def_property_readonly("stages", &ViewIndexModel::stages)
      .def_property_readonly("step", &ViewIndexModel::step)
      .def_property_readonly("total_views", &ViewIndexModel::total_views)
      .def("global_index", &ViewIndexModel::global_index)
      .def("is_anchor", &ViewIndexModel::is_anchor);

  py::class_<SyntheticScene>(m, "SyntheticScene")
      .def_readonly("seed", &SyntheticScene::seed)
      .def_readonly("width", &SyntheticScene::width)
      .def_readonly("height", &SyntheticScene::height)
      .def_readonly("fps", &SyntheticScene::fps)
      .def("max_disparity", &SyntheticScene::max_disparity);
  m.def("make_default_scene", &make_default_scene, py::arg("seed"), py::arg("width") = 640, py::arg("height") = 360,
        py::arg("camera_count") = 12, py::arg("format") = PixelFormat::YUV420, py::arg("fps") = 30);
  m.def("render_view", &render_view, py::arg("scene"), py::arg("position"), py::arg("frame_index"),
        "Renders a camera at a fractional rig position.");

  m.def(
      "interpolate",
      [](const Frame& l, const Frame& r, bool pixel_refine) {
        InterpConfig c;
        c.pixel_refine = pixel_refine;
        py::gil_scoped_release unlocked;
        return interpolate(l, r, c);
      },
      py::arg("left"), py::arg("right"), py::arg("pixel_refine") = true);
  m.def(
      "dense_views",
      [](const Frame& l, const Frame& r, int stages) {
        py::gil_scoped_release unlocked;
        return dense_views(l, r, stages);
      },
      py::arg("left"), py::arg("right"), py::arg("stages"));

  m.def("psnr", py::overload_cast<const Frame&, const Frame&, int>(&psnr), py::arg("a"), py::arg("b"),
        py::arg("border") = 0);
  m.def("ssim", py::overload_cast<const Frame&, const Frame&, int>(&ssim), py::arg("a"), py::arg("b"),
        py::arg("border") = 0);
  m.def("lap_distance", py::overload_cast<const Frame&, const Frame&>(&lap_distance));

  m.def("quant_step", &quant_step);
  m.def(
      "encode_frame",
      [](const Frame& f, const Frame* prev, int quality) {
        auto e = encode_frame(f, prev, quality);
        std::vector<std::uint8_t> bytes;
        append_record(bytes, e.record);
        return py::make_tuple(to_bytes(bytes), e.reconstructed);
      },
      py::arg("frame"), py::arg("previous") = nullptr, py::arg("quality") = 75,
      "Returns (record bytes, reconstruction). previous is the prior reconstruction for a P-record.");
  m.def(
      "decode_record",
      [](const py::bytes& b, const Frame* prev) { return decode_record(from_bytes(b), prev); },
      py::arg("record"), py::arg("previous") = nullptr);

  py::class_<ClusterLayout>(m, "ClusterLayout")
      .def_readonly("cluster_id", &ClusterLayout::cluster_id)
      .def_readonly("anchor_index", &ClusterLayout::anchor_index)
      .def_readonly("indices", &ClusterLayout::indices)
      .def("tile_of", &ClusterLayout::tile_of)
      .def("contains", &ClusterLayout::contains);
  m.def("build_layouts", &build_layouts, py::arg("model"), py::arg("views_per_side"));
  m.def("select_cluster", &select_cluster, py::arg("view"), py::arg("model"));
  m.def(
      "lookup_json",
      [](const ViewIndexModel& model, int vps) { return to_json(build_lookup_table(model, build_layouts(model, vps))).dump(); },
      py::arg("model"), py::arg("views_per_side"));

  m.def(
      "mux_segment",
      [](const std::vector<std::vector<py::bytes>>& frames, int fps, std::uint64_t start_pts) {
        std::vector<ClusterRecord> recs;
        for (const auto& f : frames) {
          ClusterRecord r;
          for (const auto& t : f) r.tiles.push_back(from_bytes(t));
          recs.push_back(std::move(r));
        }
        return to_bytes(mux_segment(recs, {fps, start_pts}));
      },
      py::arg("frames"), py::arg("fps"), py::arg("start_pts") = 0,
      "frames is a list of per-frame tile record lists.");
  m.def(
      "demux_segment",
      [](const py::bytes& body) {
        const auto seg = demux_segment(from_bytes(body));
        py::list out;
        for (const auto& f : seg.frames) {
          py::list tiles;
          for (std::size_t k = 0; k < f.tiles.size(); ++k) tiles.append(to_bytes(f.tile(k)));
          out.append(py::make_tuple(f.pts, tiles));
        }
        return out;
      },
      py::arg("body"), "Returns a list of (pts, [tile record bytes]).");
  m.def(
      "parse_m3u8",
      [](const std::string& text) {
        const auto p = parse_m3u8(text);
        py::dict d;
        d["target_duration"] = p.target_duration;
        d["media_sequence"] = p.media_sequence;
        d["ended"] = p.ended;
        py::list entries;
        for (const auto& e : p.entries) entries.append(py::make_tuple(e.uri, e.duration));
        d["entries"] = entries;
        return d;
      },
      py::arg("text"));
}
