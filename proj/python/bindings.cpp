#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "owd/datagen.hpp"
#include "owd/io.hpp"
#include "owd/kmeans.hpp"
#include "owd/metrics.hpp"
#include "owd/parallel.hpp"
#include "owd/pipeline.hpp"
#include "owd/svm.hpp"
#include "owd/wta.hpp"

namespace py = pybind11;

namespace {

owd::FeatureMatrix to_matrix(const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw py::value_error("expected a 2-d float32 array");
    owd::FeatureMatrix m(a.shape(0), static_cast<std::int32_t>(a.shape(1)));
    std::copy(a.data(), a.data() + a.size(), m.data.begin());
    return m;
}

py::array_t<float> from_matrix(const owd::FeatureMatrix& m) {
    py::array_t<float> out({m.n, static_cast<std::int64_t>(m.d)});
    std::copy(m.data.begin(), m.data.end(), out.mutable_data());
    return out;
}

std::vector<std::int64_t> to_labels(const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 1) throw py::value_error("expected a 1-d int64 array");
    return {a.data(), a.data() + a.size()};
}

py::array_t<std::int64_t> from_labels(const std::vector<std::int64_t>& v) {
    return py::array_t<std::int64_t>(static_cast<py::ssize_t>(v.size()), v.data());
}

py::dict report_dict(const owd::EvalReport& r) {
    py::dict d;
    d["purity_cluster_mean"] = r.purity_cluster_mean;
    d["purity_sample_weighted"] = r.purity_sample_weighted;
    d["nmi"] = r.nmi;
    d["pct_clustered"] = r.pct_clustered;
    d["sources_discovered"] = r.sources_discovered;
    d["sources_total"] = r.sources_total;
    d["n_clusters"] = r.n_clusters;
    return d;
}

}  // namespace

PYBIND11_MODULE(_owd, m) {
    m.doc() = "Open-world source discovery over feature vectors: WTA hashing, "
              "OOD detection, overclustering with 1-NN merge and SVM refine, "
              "and the iterative pipeline tying them together.";

    py::register_exception<owd::Error>(m, "OwdError");

    m.def("set_workers", &owd::set_workers, py::arg("n"));

    py::class_<owd::WtaHasher>(m, "WtaHasher")
        .def(py::init([](std::int32_t d, std::int32_t hashes, std::int32_t window, std::uint64_t seed) {
                 return owd::new_hasher(d, hashes, window, seed);
             }),
             py::arg("d"), py::arg("hashes") = 2048, py::arg("window") = 2, py::arg("seed") = 0)
        .def_readonly("d", &owd::WtaHasher::d)
        .def_readonly("hashes", &owd::WtaHasher::hashes)
        .def_readonly("window", &owd::WtaHasher::window)
        .def("hash_batch", [](const owd::WtaHasher& h, const py::array_t<float, py::array::c_style | py::array::forcecast>& x) {
            const auto codes = owd::hash_batch(h, to_matrix(x));
            py::array_t<std::uint32_t> out({codes.n, static_cast<std::int64_t>(codes.hashes)});
            auto* dst = out.mutable_data();
            for (std::int64_t i = 0; i < codes.n; ++i)
                for (std::int32_t c = 0; c < codes.hashes; ++c) *dst++ = codes.get(i, c);
            return out;
        }, py::arg("x"), "Codes as an (n, H) uint32 array.");

    m.def("hamming_distance",
          [](const owd::WtaHasher& h, const py::array_t<float, py::array::c_style | py::array::forcecast>& a,
             const py::array_t<float, py::array::c_style | py::array::forcecast>& b) {
              const auto ca = owd::hash_batch(h, to_matrix(a));
              const auto cb = owd::hash_batch(h, to_matrix(b));
              if (ca.n != cb.n) throw py::value_error("row counts differ");
              std::vector<std::int64_t> dist(static_cast<std::size_t>(ca.n));
              for (std::int64_t i = 0; i < ca.n; ++i)
                  dist[static_cast<std::size_t>(i)] = owd::hamming(ca, i, cb, i);
              return from_labels(dist);
          },
          py::arg("hasher"), py::arg("a"), py::arg("b"),
          "Rowwise Hamming distances between the hashes of a and b.");

    m.def("kmeans",
          [](const py::array_t<float, py::array::c_style | py::array::forcecast>& x, std::int64_t k,
             std::int32_t max_iter, double tol, std::uint64_t seed) {
              owd::Rng rng(seed);
              const auto r = owd::kmeans(to_matrix(x), k, max_iter, tol, rng);
              return py::make_tuple(from_labels(r.assignment), from_matrix(r.centroids), r.objective);
          },
          py::arg("x"), py::arg("k"), py::arg("max_iter") = 300, py::arg("tol") = 1e-4,
          py::arg("seed") = 0, "Lloyd K-means with K-means++ seeding: (assignment, centroids, objective).");

    m.def("average_purity",
          [](const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& pred,
             const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& truth,
             const std::string& mode) {
              return owd::average_purity(to_labels(pred), to_labels(truth),
                                         mode == "sample-weighted" ? owd::PurityMode::sample_weighted
                                                                   : owd::PurityMode::cluster_mean);
          },
          py::arg("pred"), py::arg("truth"), py::arg("mode") = "cluster-mean");

    m.def("nmi",
          [](const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& pred,
             const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& truth) {
              return owd::nmi(to_labels(pred), to_labels(truth));
          },
          py::arg("pred"), py::arg("truth"));

    m.def("simulate",
          [](std::int64_t sources, std::int64_t seen, std::int64_t samples_per_source,
             std::int64_t labeled_per_source, std::int32_t d_content, std::int32_t d_fingerprint,
             double margin, double content_scale, double noise_scale, std::uint64_t seed) {
              owd::Rng rng(seed);
              const auto specs = owd::make_source_specs(sources, seen, d_fingerprint, margin,
                                                        content_scale, noise_scale,
                                                        samples_per_source, rng);
              owd::GenConfig gc;
              gc.d_content = d_content;
              gc.margin = margin;
              gc.labeled_per_source = labeled_per_source;
              const auto ds = owd::generate(specs, gc, rng);
              py::dict out;
              out["labeled_x"] = from_matrix(ds.labeled.features);
              out["labeled_y"] = from_labels(ds.labeled.labels);
              out["discovery_x"] = from_matrix(ds.discovery);
              out["truth"] = from_labels(ds.truth);
              return out;
          },
          py::arg("sources") = 20, py::arg("seen") = 12, py::arg("samples_per_source") = 500,
          py::arg("labeled_per_source") = 500, py::arg("d_content") = 48,
          py::arg("d_fingerprint") = 16, py::arg("margin") = 10.0, py::arg("content_scale") = 1.0,
          py::arg("noise_scale") = 1.0, py::arg("seed") = 0,
          "Synthetic open-world benchmark with planted per-source fingerprints.");

    m.def("run_pipeline",
          [](const py::array_t<float, py::array::c_style | py::array::forcecast>& labeled_x,
             const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& labeled_y,
             const py::array_t<float, py::array::c_style | py::array::forcecast>& discovery_x,
             const std::string& config_text,
             std::optional<py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>> truth) {
              owd::LabeledSet labeled;
              labeled.features = to_matrix(labeled_x);
              labeled.labels = to_labels(labeled_y);
              std::int64_t mx = -1;
              for (const auto v : labeled.labels) mx = std::max(mx, v);
              labeled.n_classes = mx + 1;

              owd::PipelineConfig cfg = owd::io::parse_config(config_text);
              std::vector<std::int64_t> truth_vec;
              if (truth) truth_vec = to_labels(*truth);

              owd::PipelineState state;
              {
                  py::gil_scoped_release release;
                  state = owd::run(labeled, to_matrix(discovery_x), cfg,
                                   truth ? &truth_vec : nullptr);
              }
              py::dict out;
              out["partition"] = from_labels(state.partition.labels);
              out["iterations"] = state.iteration;
              py::list hist;
              for (const auto& s : state.history) {
                  py::dict h;
                  h["iteration"] = s.iteration;
                  h["n_clusters"] = s.n_clusters;
                  h["clustered"] = s.clustered;
                  h["total"] = s.total;
                  h["injected"] = s.injected;
                  if (s.metrics_discovered) h["metrics_discovered"] = report_dict(*s.metrics_discovered);
                  if (s.metrics_all) h["metrics_all"] = report_dict(*s.metrics_all);
                  hist.append(h);
              }
              out["history"] = hist;
              if (!state.partition.cluster_ids().empty()) {
                  const auto full = owd::attribute_leftovers(state.refined, state.codes,
                                                             state.partition, state.hasher);
                  out["partition_attributed"] = from_labels(full.labels);
              }
              return out;
          },
          py::arg("labeled_x"), py::arg("labeled_y"), py::arg("discovery_x"),
          py::arg("config") = "", py::arg("truth") = py::none(),
          "Full pipeline run; config accepts the flat 'section.key = value' text format.");

    m.def("train_svm_decision",
          [](const py::array_t<float, py::array::c_style | py::array::forcecast>& x,
             const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& y, double c,
             double gamma, const py::array_t<float, py::array::c_style | py::array::forcecast>& queries) {
              const auto labels64 = to_labels(y);
              std::vector<int> labels(labels64.begin(), labels64.end());
              owd::SvmParams params;
              params.c = c;
              params.gamma = gamma;
              const auto model = owd::train_svm(to_matrix(x), labels, params);
              const auto q = to_matrix(queries);
              std::vector<double> decisions(static_cast<std::size_t>(q.n));
              for (std::int64_t i = 0; i < q.n; ++i)
                  decisions[static_cast<std::size_t>(i)] = model.decision(q.row(i));
              return py::array_t<double>(static_cast<py::ssize_t>(decisions.size()),
                                         decisions.data());
          },
          py::arg("x"), py::arg("y"), py::arg("c"), py::arg("gamma"), py::arg("queries"),
          "Trains a one-vs-all RBF SVM and returns decision values for the queries.");
}
