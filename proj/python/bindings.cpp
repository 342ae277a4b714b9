#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <nlohmann/json.hpp>

#include "nsnmf/activation.hpp"
#include "nsnmf/data.hpp"
#include "nsnmf/errors.hpp"
#include "nsnmf/eval.hpp"
#include "nsnmf/experiment.hpp"
#include "nsnmf/model.hpp"
#include "nsnmf/report.hpp"

namespace py = pybind11;
using namespace nsnmf;

namespace {

py::object to_python(const nlohmann::json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json from_python(const py::object& o) {
    return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

MethodSettings settings_from(const py::dict& kwargs) {
    nlohmann::json j = nlohmann::json(MethodSettings{});
    const auto overrides = from_python(kwargs);
    for (const auto& [k, v] : overrides.items()) {
        if (!j.contains(k)) throw ConfigError("unknown setting '" + k + "'");
        j[k] = v;
    }
    return j.get<MethodSettings>();
}

// Holder so pybind11 treats the model as an opaque class rather than a std::variant.
struct Model {
    TrainedModel inner;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Multilayer non-linear semi-NMF recommender core";

    static py::exception<Error> base(m, "Error");
    static py::exception<ConfigError> config_error(m, "ConfigError", base.ptr());
    static py::exception<DataError> data_error(m, "DataError", base.ptr());
    static py::exception<IoError> io_error(m, "IoError", base.ptr());
    static py::exception<IndexError> index_error(m, "IndexError", base.ptr());
    static py::exception<DivergenceError> divergence_error(m, "DivergenceError", base.ptr());
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const ConfigError& e) {
            py::set_error(config_error, e.what());
        } catch (const IoError& e) {
            py::set_error(io_error, e.what());
        } catch (const IndexError& e) {
            py::set_error(index_error, e.what());
        } catch (const DivergenceError& e) {
            py::set_error(divergence_error, e.what());
        } catch (const DataError& e) {
            py::set_error(data_error, e.what());
        } catch (const Error& e) {
            py::set_error(base, e.what());
        }
    });

    py::class_<RatingDataset>(m, "RatingDataset")
        .def_readonly("n_users", &RatingDataset::n_users)
        .def_readonly("n_items", &RatingDataset::n_items)
        .def_readonly("scale_min", &RatingDataset::scale_min)
        .def_readonly("scale_max", &RatingDataset::scale_max)
        .def("__len__", &RatingDataset::size)
        .def("triples",
             [](const RatingDataset& ds) {
                 std::vector<std::tuple<Index, Index, double>> out;
                 out.reserve(ds.size());
                 for (const auto& t : ds.triples) out.emplace_back(t.user, t.item, t.rating);
                 return out;
             })
        .def("user_ids", [](const RatingDataset& ds) { return ds.ids->user_ids; })
        .def("item_ids", [](const RatingDataset& ds) { return ds.ids->item_ids; });

    m.def(
        "parse_ratings",
        [](const std::string& text, const std::string& format) {
            return parse_ratings(text, LoadOptions{parse_format(format), {}, {}});
        },
        py::arg("text"), py::arg("format") = "auto");
    m.def(
        "load_ratings",
        [](const std::filesystem::path& path, const std::string& format) {
            return load_ratings(path, LoadOptions{parse_format(format), {}, {}});
        },
        py::arg("path"), py::arg("format") = "auto");
    m.def("filter_activity", &filter_activity, py::arg("dataset"), py::arg("min_user_ratings"),
          py::arg("min_item_ratings"));
    m.def(
        "split",
        [](const RatingDataset& ds, double fraction, std::uint64_t seed) {
            auto plan = split(ds, fraction, seed);
            return std::pair{std::move(plan.train), std::move(plan.test)};
        },
        py::arg("dataset"), py::arg("train_fraction") = 0.8, py::arg("seed") = 42);
    m.def(
        "prepare",
        [](const std::filesystem::path& path, std::size_t min_user, std::size_t min_item, double fraction,
           std::uint64_t seed, const std::string& format) {
            auto p = prepare(path, LoadOptions{parse_format(format), {}, {}}, min_user, min_item, fraction, seed);
            return py::make_tuple(p.split.train, p.split.test, to_python(p.manifest));
        },
        py::arg("path"), py::arg("min_user_ratings") = 20, py::arg("min_item_ratings") = 0,
        py::arg("train_fraction") = 0.8, py::arg("seed") = 42, py::arg("format") = "auto");

    m.def(
        "activation", [](const std::string& kind, double x) { return apply(parse_activation(kind), x); },
        py::arg("kind"), py::arg("x"));

    py::class_<Model>(m, "Model")
        .def("predict", [](const Model& model, Index u, Index i) { return predict(model.inner, u, i); })
        .def("rmse", [](const Model& model, const RatingDataset& ds) { return evaluate_rmse(model.inner, ds); })
        .def(
            "item_features",
            [](const Model& model, bool deep) {
                return item_features(model.inner, deep ? Representation::deep : Representation::activated);
            },
            py::arg("deep") = false)
        .def("save", [](const Model& model, const std::filesystem::path& path) { save_checkpoint(model.inner, path); })
        .def("checkpoint", [](const Model& model) { return to_python(to_checkpoint(model.inner)); });

    m.def(
        "load_model", [](const std::filesystem::path& path) { return Model{load_checkpoint(path)}; },
        py::arg("path"));
    m.def("methods", [] {
        std::vector<std::string> out;
        for (auto method : all_methods()) out.emplace_back(method_name(method));
        return out;
    });
    m.def(
        "fit",
        [](const std::string& method, const RatingDataset& train, const py::kwargs& kwargs) {
            auto fit = fit_method(parse_method(method), settings_from(kwargs), train);
            py::object report = py::none();
            if (fit.report) report = to_python(nlohmann::json(*fit.report));
            return py::make_tuple(Model{std::move(fit.model)}, report);
        },
        py::arg("method"), py::arg("train"));

    m.def("rmse", [](const std::vector<std::pair<double, double>>& pairs) { return rmse(pairs); });
    m.def(
        "kmeans",
        [](const Eigen::MatrixXd& points, std::size_t k, std::uint64_t seed, std::size_t restarts,
           std::size_t max_iters) {
            return to_python(nlohmann::json(kmeans(points, k, seed, KMeansOptions{restarts, max_iters})));
        },
        py::arg("points"), py::arg("k"), py::arg("seed") = 42, py::arg("restarts") = 20, py::arg("max_iters") = 300);
    m.def(
        "wcss",
        [](const Eigen::MatrixXd& points, const std::vector<std::size_t>& assignments, bool squared) {
            return wcss(points, assignments, squared ? WcssDistance::squared : WcssDistance::euclidean);
        },
        py::arg("points"), py::arg("assignments"), py::arg("squared") = false);
    m.def(
        "wcss_svg",
        [](const std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>>& series) {
            std::vector<Curve> curves;
            for (const auto& [label, points] : series) curves.push_back({label, points});
            return wcss_svg(curves);
        },
        py::arg("series"));
    m.def("read_metrics", [](const std::filesystem::path& path) {
        const auto report = read_metrics(path);
        py::list rows;
        for (const auto& r : report.rows)
            rows.append(py::dict(py::arg("method") = r.method, py::arg("dataset") = r.dataset,
                                 py::arg("config_digest") = r.config_digest, py::arg("metric") = r.metric,
                                 py::arg("value") = r.value,
                                 py::arg("provenance") = std::string(provenance_name(r.provenance))));
        return rows;
    });
    m.def("config_digest", [](const py::object& o) { return config_digest(from_python(o)); });
}
