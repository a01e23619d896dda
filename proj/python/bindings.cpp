#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "cli.hpp"
#include "ggan/error.hpp"
#include "ggan/eval.hpp"
#include "ggan/trainer.hpp"

namespace py = pybind11;
using namespace ggan;

namespace {

py::array_t<double> to_numpy(const Tensor& t) {
    py::array_t<double> out(t.shape);
    std::copy(t.data.begin(), t.data.end(), out.mutable_data());
    return out;
}

std::vector<std::string> label_strings(const std::optional<std::vector<Phenotype>>& labels) {
    std::vector<std::string> out;
    if (labels) {
        for (auto p : *labels) out.emplace_back(to_string(p));
    }
    return out;
}

py::dict report_dict(const EvalReport& r) { return py::module_::import("json").attr("loads")(to_json(r).dump()); }

}  // namespace

PYBIND11_MODULE(_ggan, m) {
    m.doc() = "Semi-supervised GAN for SNP genotype profiles";

    // Raised with args (message, exit_code).
    static PyObject* error = PyErr_NewException("ggan._ggan.GganError", PyExc_RuntimeError, nullptr);
    m.add_object("GganError", py::handle(error));
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            PyErr_SetObject(error, py::make_tuple(e.what(), e.exit_code()).ptr());
        }
    });

    m.attr("__version__") = cli::kToolVersion;

    py::class_<GenotypeMatrix>(m, "GenotypeMatrix")
        .def_property_readonly("sample_ids", &GenotypeMatrix::sample_ids)
        .def_property_readonly("snp_ids", &GenotypeMatrix::snp_ids)
        .def_property_readonly("labels",
                               [](const GenotypeMatrix& g) -> py::object {
                                   if (!g.has_labels()) return py::none();
                                   return py::cast(label_strings(g.labels()));
                               })
        .def_property_readonly("shape", [](const GenotypeMatrix& g) { return py::make_tuple(g.n_samples(), g.n_snps()); })
        .def("genotypes",
             [](const GenotypeMatrix& g) {
                 // Alternate-allele counts; -1 marks a missing call.
                 py::array_t<int> out({g.n_samples(), g.n_snps()});
                 auto v = out.mutable_unchecked<2>();
                 for (std::size_t s = 0; s < g.n_samples(); ++s)
                     for (std::size_t j = 0; j < g.n_snps(); ++j) {
                         const auto x = g.at(s, j);
                         v(s, j) = x == Genotype::Missing ? -1 : static_cast<int>(x);
                     }
                 return out;
             })
        .def("select_snps", &GenotypeMatrix::select_snps);

    m.def("read_genotype_csv", &read_genotype_csv, py::arg("path"), py::arg("has_labels") = false);
    m.def(
        "parse_genotype_csv",
        [](const std::string& text, bool has_labels) {
            std::istringstream in(text);
            return parse_genotype_matrix(in, has_labels);
        },
        py::arg("text"), py::arg("has_labels") = false);
    m.def("write_genotype_csv", [](const GenotypeMatrix& g) {
        std::ostringstream out;
        write_genotype_csv(out, g);
        return out.str();
    });

    m.def("allele_frequencies", [](const GenotypeMatrix& g) {
        py::dict out;
        for (const auto& s : allele_frequencies(g).snps) {
            py::dict f;
            for (const auto& [allele, value] : s.freqs) f[py::str(allele)] = value;
            out[py::str(s.snp_id)] = f;
        }
        return out;
    });
    m.def(
        "afd",
        [](const GenotypeMatrix& a, const GenotypeMatrix& b) {
            std::vector<std::pair<std::string, double>> out;
            for (const auto& e : afd(allele_frequencies(a), allele_frequencies(b))) out.emplace_back(e.snp_id, e.afd);
            return out;
        },
        "Per-SNP allele frequency distance as (snp_id, afd) pairs.");
    m.def(
        "select_snps_by_afd",
        [](const std::vector<std::pair<std::string, double>>& distances, double threshold) {
            AfdMap map;
            for (const auto& [id, v] : distances) map.push_back({id, v});
            return select_snps_by_afd(map, threshold).snp_ids;
        },
        py::arg("distances"), py::arg("threshold"));

    m.def("describe_discriminator", [](std::size_t n, double dropout) { return build_discriminator(n, dropout).describe(); },
          py::arg("n_snps"), py::arg("dropout_rate") = 0.4);
    m.def("describe_generator", [](std::size_t n, std::size_t noise) { return build_generator(n, noise).describe(); },
          py::arg("n_snps"), py::arg("noise_dim") = kDefaultNoiseDim);
    m.def("parameter_counts", [](std::size_t n, std::size_t noise) {
        return py::make_tuple(init_parameters(build_discriminator(n, 0.4), 0).parameter_count(),
                              init_parameters(build_generator(n, noise), 0).parameter_count());
    }, py::arg("n_snps"), py::arg("noise_dim") = kDefaultNoiseDim);
    m.def("cross_entropy", [](const std::vector<double>& y, const std::vector<double>& p) {
        if (y.size() != p.size() || y.size() % 2 != 0) fail(ErrorKind::Usage, "expected matching (batch, 2) rows");
        return cross_entropy(Tensor({y.size() / 2, 2}, y), Tensor({p.size() / 2, 2}, p));
    });

    py::class_<TrainState>(m, "Model")
        .def_property_readonly("epoch", [](const TrainState& s) { return s.epoch; })
        .def_property_readonly("snp_ids", [](const TrainState& s) { return s.snp_ids; })
        .def_property_readonly("config", [](const TrainState& s) { return to_json(s.config).dump(); })
        .def_property_readonly("history",
                               [](const TrainState& s) {
                                   py::list out;
                                   for (const auto& r : s.history) {
                                       out.append(py::dict(py::arg("epoch") = r.epoch, py::arg("L_sup") = r.loss_supervised,
                                                           py::arg("L_unsup") = r.loss_unsupervised,
                                                           py::arg("L_gen") = r.loss_generator));
                                   }
                                   return out;
                               })
        .def("save", &save_checkpoint, py::arg("path"))
        .def(
            "generate",
            [](const TrainState& s, std::size_t count, std::uint64_t seed) {
                Rng rng(seed);
                return to_numpy(generate(s.model, sample_noise(count, s.model.noise_dim, rng, s.config.noise)).profiles);
            },
            py::arg("count"), py::arg("seed") = 0, "Clipped synthetic profiles of shape (count, n_snps, 1).")
        .def(
            "discriminate",
            [](const TrainState& s, py::array_t<double, py::array::c_style | py::array::forcecast> profiles) {
                if (profiles.ndim() != 2 || static_cast<std::size_t>(profiles.shape(1)) != s.model.n_snps) {
                    fail(ErrorKind::DataMismatch, "profiles must have shape (batch, n_snps)");
                }
                const auto batch = static_cast<std::size_t>(profiles.shape(0));
                Tensor t({batch, s.model.n_snps, 1},
                         std::vector<double>(profiles.data(), profiles.data() + profiles.size()));
                const auto d = discriminate(s.model, t);
                return py::make_tuple(to_numpy(d.label_probs), to_numpy(d.realness_probs));
            },
            "Label (DF, SD) and realness (fake, real) probabilities.")
        .def(
            "evaluate",
            [](const TrainState& s, const GenotypeMatrix& labeled_test, const std::optional<GenotypeMatrix>& unlabeled_test,
               std::uint64_t seed) {
                SnpSubset subset;
                subset.snp_ids = s.snp_ids;
                const auto labeled = make_profile_set(labeled_test, subset, s.config.missing_policy);
                ReportMetadata meta;
                meta.labeled_test_size = labeled.size();
                meta.seed = seed;
                std::optional<T1Result> t1;
                if (unlabeled_test) {
                    const auto unlabeled = make_profile_set(*unlabeled_test, subset, s.config.missing_policy);
                    Rng rng(seed);
                    t1 = t1_evaluate(s.model, labeled, unlabeled, unlabeled.size(), rng, s.config.noise);
                    meta.unlabeled_test_size = unlabeled.size();
                    meta.synthetic_count = unlabeled.size();
                }
                return report_dict(make_report("python", t1, t2_evaluate(s.model, labeled), meta));
            },
            py::arg("labeled_test"), py::arg("unlabeled_test") = std::nullopt, py::arg("seed") = 0);

    m.def(
        "train",
        [](const std::string& config_json, const GenotypeMatrix& labeled, const GenotypeMatrix& unlabeled,
           const std::vector<std::string>& snp_ids) {
            const auto config = train_config_from_json(nlohmann::json::parse(config_json));
            const auto subset = select_snps_by_list(labeled, snp_ids);
            py::gil_scoped_release release;
            return train(config, labeled, unlabeled, subset);
        },
        py::arg("config_json"), py::arg("labeled"), py::arg("unlabeled"), py::arg("snp_ids"));
    m.def("load_checkpoint", &load_checkpoint, py::arg("path"));
    m.def("default_config", [] { return to_json(TrainConfig{}).dump(); });

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            const int code = cli::run(args, out, err);
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs one ggan command; returns (exit_code, stdout, stderr).");
}
