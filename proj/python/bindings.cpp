#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "signet/cluster/cluster.hpp"
#include "signet/core/config.hpp"
#include "signet/core/errors.hpp"
#include "signet/eval/eval.hpp"
#include "signet/extract/extract.hpp"
#include "signet/pipeline/pipeline.hpp"
#include "signet/store/index.hpp"

namespace py = pybind11;
using namespace signet;

namespace {

using FloatRows = py::array_t<float, py::array::c_style | py::array::forcecast>;

std::vector<std::vector<float>> rows_of(const FloatRows& a) {
  if (a.ndim() != 2) throw InvalidInput("expected a 2-d array of shape (n, dim)");
  const auto n = static_cast<std::size_t>(a.shape(0));
  const auto d = static_cast<std::size_t>(a.shape(1));
  std::vector<std::vector<float>> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i].assign(a.data() + i * d, a.data() + (i + 1) * d);
  return rows;
}

std::vector<float> vector_of(const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 1) throw InvalidInput("expected a 1-d array");
  return {a.data(), a.data() + a.size()};
}

py::tuple bbox_tuple(const BBox& b) { return py::make_tuple(b.x_min, b.y_min, b.x_max, b.y_max); }

py::dict summary_dict(const pipeline::RunSummary& s) {
  py::dict d;
  d["documents"] = s.documents;
  d["documents_failed"] = s.documents_failed;
  d["pages"] = s.pages;
  d["pages_gated"] = s.pages_gated;
  d["candidates"] = s.candidates;
  d["kept"] = s.kept;
  d["signatures"] = s.signatures;
  d["clusters"] = s.clusters;
  d["reused_stages"] = s.reused_stages;
  d["errors"] = s.errors;
  d["clusters_tsv"] = s.clusters_tsv;
  d["index_file"] = s.index_file;
  d["telemetry_file"] = s.telemetry_file;
  return d;
}

}  // namespace

PYBIND11_MODULE(_signet, m) {
  m.doc() = "Signature extraction, embedding and clustering";

  auto base = py::register_exception<Error>(m, "SignetError");
  py::register_exception<InvalidInput>(m, "InvalidInput", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<StartupError>(m, "StartupError", base.ptr());
  py::register_exception<SourceError>(m, "SourceError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<CorruptIndexError>(m, "CorruptIndexError", base.ptr());
  py::register_exception<DegenerateEmbedding>(m, "DegenerateEmbedding", base.ptr());

  m.attr("EMBEDDING_DIM") = kEmbeddingDim;

  m.def("rand_index", [](const std::vector<int>& pred, const std::vector<int>& truth) {
    return eval::rand_index(pred, truth);
  }, py::arg("pred"), py::arg("truth"));
  m.def("adjusted_rand_index", [](const std::vector<int>& pred, const std::vector<int>& truth) {
    return eval::adjusted_rand_index(pred, truth);
  }, py::arg("pred"), py::arg("truth"));

  m.def("roc_curve", [](const std::vector<double>& scores, const std::vector<int>& labels) {
    const auto c = eval::roc_curve(scores, labels);
    std::vector<std::tuple<double, double, double>> pts;
    for (const auto& p : c.points) pts.emplace_back(p.fpr, p.tpr, p.threshold);
    return py::make_tuple(c.auc, pts);
  }, py::arg("scores"), py::arg("labels"), "Returns (auc, [(fpr, tpr, threshold), ...]).");

  m.def("cosine_distance", [](const py::array_t<float, py::array::c_style | py::array::forcecast>& a,
                              const py::array_t<float, py::array::c_style | py::array::forcecast>& b) {
    return cluster::cosine_distance(vector_of(a), vector_of(b));
  }, py::arg("a"), py::arg("b"));

  m.def("cluster", [](const FloatRows& points, double t) {
    const auto rows = rows_of(points);
    const std::vector<std::span<const float>> spans(rows.begin(), rows.end());
    return cluster::cluster_points(spans, t);
  }, py::arg("points"), py::arg("t"), "Complete-linkage labels for the rows of `points` cut at t.");

  m.def("linkage", [](const FloatRows& points) {
    const auto rows = rows_of(points);
    const std::vector<std::span<const float>> spans(rows.begin(), rows.end());
    const auto tree = cluster::complete_linkage(cluster::distance_matrix(spans), static_cast<int>(rows.size()));
    std::vector<std::tuple<int, int, double, int>> merges;
    for (const auto& mg : tree.merges) merges.emplace_back(mg.a, mg.b, mg.height, mg.size);
    return merges;
  }, py::arg("points"), "Merges as (a, b, height, size) in the usual linkage-matrix layout.");

  m.def("connected_components", [](const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& mask) {
    if (mask.ndim() != 2) throw InvalidInput("expected a 2-d mask");
    BinaryImage b{MaskGrid(static_cast<int>(mask.shape(1)), static_cast<int>(mask.shape(0))), "", 0};
    auto cells = b.pixels.cells();
    for (std::size_t i = 0; i < cells.size(); ++i) cells[i] = mask.data()[i] != 0 ? 1 : 0;
    py::list out;
    for (const auto& r : extract::connected_components(b)) {
      std::vector<std::pair<int, int>> px;
      px.reserve(r.pixels.size());
      for (const auto& p : r.pixels) px.emplace_back(p.y, p.x);
      py::dict d;
      d["bbox"] = bbox_tuple(r.bbox);
      d["pixels"] = px;
      out.append(d);
    }
    return out;
  }, py::arg("mask"), "8-connected regions of the nonzero cells; pixels are (y, x).");

  m.def("format_signature_id", [](const std::string& doc, int page, std::tuple<int, int, int, int> box) {
    const auto [x0, y0, x1, y1] = box;
    return format_signature_id({doc, page, BBox{x0, y0, x1, y1}});
  }, py::arg("doc_id"), py::arg("page"), py::arg("bbox"));
  m.def("parse_signature_id", [](const std::string& id) -> py::object {
    const auto p = pipeline::parse_signature_id(id);
    if (!p) return py::none();
    return py::make_tuple(p->doc_id, p->page_index, bbox_tuple(p->bbox));
  }, py::arg("signature_id"));

  m.def("save_index", [](const std::vector<std::string>& ids, const FloatRows& vectors, const std::filesystem::path& path) {
    const auto rows = rows_of(vectors);
    if (rows.size() != ids.size()) throw InvalidInput("ids and vectors differ in length");
    std::vector<store::EmbeddingRecord> recs;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != static_cast<std::size_t>(kEmbeddingDim)) throw InvalidInput("vectors must be 4096-d");
      recs.push_back(store::quantize(Embedding(rows[i], ids[i])));
    }
    store::save_index(recs, path);
    return store::index_bytes(recs);
  }, py::arg("ids"), py::arg("vectors"), py::arg("path"), "Quantizes and writes an index; returns its size in bytes.");

  m.def("load_index", [](const std::filesystem::path& path) {
    const auto recs = store::load_index(path);
    std::vector<std::string> ids;
    py::array_t<float> values({static_cast<py::ssize_t>(recs.size()), static_cast<py::ssize_t>(kEmbeddingDim)});
    auto* out = values.mutable_data();
    for (std::size_t i = 0; i < recs.size(); ++i) {
      ids.push_back(recs[i].signature_id);
      const auto v = recs[i].dequantize();
      std::copy(v.begin(), v.end(), out + i * static_cast<std::size_t>(kEmbeddingDim));
    }
    return py::make_tuple(ids, values);
  }, py::arg("path"), "Returns (ids, dequantized float32 matrix).");

  m.def("search", [](const py::array_t<float, py::array::c_style | py::array::forcecast>& query,
                     const std::filesystem::path& index, double t) {
    const auto recs = store::load_index(index);
    std::vector<std::tuple<std::string, double>> hits;
    for (const auto& h : store::search(vector_of(query), recs, t)) hits.emplace_back(h.signature_id, h.distance);
    return hits;
  }, py::arg("query"), py::arg("index"), py::arg("t"), "Index entries within t of the query, nearest first.");

  m.def("load_config", [](const std::string& path) { return to_json(load_config(path)); },
        py::arg("path") = "", "Validated configuration as a JSON string (defaults for an empty path).");

  m.def("run_pipeline", [](const std::filesystem::path& source, const std::filesystem::path& workdir,
                           const std::string& config) {
    const auto cfg = load_config(config);
    pipeline::RunSummary s;
    {
      py::gil_scoped_release release;
      s = pipeline::run_pipeline(cfg, source, workdir);
    }
    return summary_dict(s);
  }, py::arg("source"), py::arg("workdir"), py::arg("config") = "");
}
