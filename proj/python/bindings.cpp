#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cdac/dataset.hpp"
#include "cdac/metrics.hpp"
#include "cdac/pipeline.hpp"
#include "cdac/refine.hpp"

namespace py = pybind11;
using namespace cdac;

namespace {

Split split_from(const std::string& s) {
    auto v = parse_split(s);
    if (!v) throw InputError("unknown split: " + s);
    return *v;
}

EmbeddedDataset make_dataset(std::vector<std::string> ids, const Matrix& x, std::vector<std::string> labels,
                             const std::vector<std::string>& split) {
    std::vector<Split> tags;
    for (const auto& s : split) tags.push_back(split_from(s));
    if (tags.empty()) tags.assign(ids.size(), Split::Train);
    return {std::move(ids), x, std::move(labels), std::move(tags)};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "CDAC+ clustering core";

    py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    py::class_<EmbeddedDataset>(m, "Dataset")
        .def(py::init(&make_dataset), py::arg("ids"), py::arg("embeddings"),
             py::arg("labels") = std::vector<std::string>{}, py::arg("split") = std::vector<std::string>{})
        .def("__len__", &EmbeddedDataset::size)
        .def_property_readonly("dim", &EmbeddedDataset::dim)
        .def_property_readonly("ids", &EmbeddedDataset::ids)
        .def_property_readonly("embeddings", &EmbeddedDataset::embeddings)
        .def_property_readonly("labels", &EmbeddedDataset::labels)
        .def_property_readonly("split", [](const EmbeddedDataset& d) {
            std::vector<std::string> out;
            for (auto s : d.split()) out.push_back(to_string(s));
            return out;
        })
        .def("classes", &EmbeddedDataset::classes)
        .def("rows_in", [](const EmbeddedDataset& d, const std::string& s) { return d.rows_in(split_from(s)); });

    m.def("load_dataset", py::overload_cast<const std::filesystem::path&>(&load_dataset), py::arg("path"));
    m.def("save_binary", &save_binary, py::arg("dataset"), py::arg("path"));
    m.def("save_tsv", &save_tsv, py::arg("dataset"), py::arg("path"));
    m.def(
        "synthetic_blobs",
        [](int classes, int per_class, int dim, double scale, double sigma, std::uint64_t seed) {
            return generate_synthetic_blobs({classes, per_class, dim, scale, sigma, seed});
        },
        py::arg("num_classes") = 8, py::arg("per_class") = 200, py::arg("dim") = 16,
        py::arg("centroid_scale") = 10.0, py::arg("noise_sigma") = 1.0, py::arg("seed") = 0);

    m.def(
        "kmeans",
        [](const Matrix& x, Index k, std::uint64_t seed, int max_iters, int restarts) {
            auto r = kmeans(x, k, seed, max_iters, restarts);
            return py::dict(py::arg("centroids") = r.centroids, py::arg("assignments") = r.assignments,
                            py::arg("inertia") = r.inertia, py::arg("iterations") = r.iterations);
        },
        py::arg("x"), py::arg("k"), py::arg("seed") = 0, py::arg("max_iters") = 300, py::arg("restarts") = 1);

    using Labels = std::vector<int>;
    m.def("nmi", [](const Labels& t, const Labels& p) { return nmi(t, p); }, py::arg("truth"), py::arg("predicted"));
    m.def("ari", [](const Labels& t, const Labels& p) { return ari(t, p); }, py::arg("truth"), py::arg("predicted"));
    m.def("acc", [](const Labels& t, const Labels& p) { return acc(t, p).acc; }, py::arg("truth"), py::arg("predicted"));
    m.def(
        "evaluate",
        [](const Labels& t, const Labels& p) {
            auto r = evaluate(t, p);
            return py::dict(py::arg("nmi") = r.nmi, py::arg("ari") = r.ari, py::arg("acc") = r.acc,
                            py::arg("alignment") = r.alignment);
        },
        py::arg("truth"), py::arg("predicted"));
    m.def(
        "hungarian",
        [](const Matrix& cost) {
            auto a = hungarian(cost);
            return py::make_tuple(a.row_to_col, a.total_cost);
        },
        py::arg("cost"));

    std::vector<std::string> names;
    for (auto v : {Variant::DAC, Variant::DAC_KM, Variant::DAC_Plus, Variant::CDAC, Variant::CDAC_KM,
                   Variant::CDAC_Plus, Variant::KM_Raw})
        names.push_back(to_string(v));
    m.attr("variants") = names;

    py::class_<RunConfig>(m, "RunConfig")
        .def(py::init<>())
        .def_property(
            "variant", [](const RunConfig& c) { return to_string(c.variant); },
            [](RunConfig& c, const std::string& s) {
                auto v = parse_variant(s);
                if (!v) throw InputError("unknown variant: " + s);
                c.variant = *v;
            })
        .def_property(
            "target", [](const RunConfig& c) { return to_string(c.target); },
            [](RunConfig& c, const std::string& s) {
                auto v = parse_target_normalization(s);
                if (!v) throw InputError("unknown target normalization: " + s);
                c.target = *v;
            })
        .def_readwrite("cluster_count", &RunConfig::cluster_count)
        .def_readwrite("cluster_multiplier", &RunConfig::cluster_multiplier)
        .def_readwrite("labeled_ratio", &RunConfig::labeled_ratio)
        .def_readwrite("unknown_class_ratio", &RunConfig::unknown_class_ratio)
        .def_readwrite("gamma", &RunConfig::gamma)
        .def_readwrite("seed", &RunConfig::seed)
        .def_readwrite("num_runs", &RunConfig::num_runs)
        .def_readwrite("learning_rate", &RunConfig::learning_rate)
        .def_readwrite("refine_learning_rate", &RunConfig::refine_learning_rate)
        .def_readwrite("batch_size", &RunConfig::batch_size)
        .def_readwrite("pairwise_epochs", &RunConfig::pairwise_epochs)
        .def_readwrite("refine_epochs", &RunConfig::refine_epochs)
        .def_readwrite("eta", &RunConfig::eta)
        .def_readwrite("delta_label", &RunConfig::delta_label)
        .def_readwrite("dropout", &RunConfig::dropout)
        .def_readwrite("kmeans_restarts", &RunConfig::kmeans_restarts)
        .def_readwrite("jobs", &RunConfig::jobs);

    py::class_<RunResult>(m, "RunResult")
        .def_readonly("run_index", &RunResult::run_index)
        .def_readonly("seed", &RunResult::seed)
        .def_readonly("clusters", &RunResult::clusters)
        .def_readonly("occupied_clusters", &RunResult::occupied_clusters)
        .def_readonly("known_classes", &RunResult::known_classes)
        .def_readonly("ids", &RunResult::eval_ids)
        .def_readonly("predictions", &RunResult::eval_predictions)
        .def_property_readonly("acc", [](const RunResult& r) { return r.test.acc; })
        .def_property_readonly("nmi", [](const RunResult& r) { return r.test.nmi; })
        .def_property_readonly("ari", [](const RunResult& r) { return r.test.ari; });

    py::class_<ClusteringReport>(m, "Report")
        .def_readonly("runs", &ClusteringReport::runs)
        .def_property_readonly("acc", [](const ClusteringReport& r) { return py::make_tuple(r.acc.mean, r.acc.std); })
        .def_property_readonly("nmi", [](const ClusteringReport& r) { return py::make_tuple(r.nmi.mean, r.nmi.std); })
        .def_property_readonly("ari", [](const ClusteringReport& r) { return py::make_tuple(r.ari.mean, r.ari.std); })
        .def("json", [](const ClusteringReport& r, const std::string& label) { return report_json(r, label); },
             py::arg("dataset_label") = "");

    m.def(
        "run_variant",
        [](const RunConfig& cfg, const EmbeddedDataset& ds) {
            py::gil_scoped_release release;
            return run_variant(cfg, ds);
        },
        py::arg("config"), py::arg("dataset"));
}
