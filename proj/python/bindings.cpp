#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "textrisk/baselines.hpp"
#include "textrisk/config.hpp"
#include "textrisk/data_model.hpp"
#include "textrisk/error.hpp"
#include "textrisk/evaluation.hpp"
#include "textrisk/experiment.hpp"
#include "textrisk/network.hpp"
#include "textrisk/stemmer.hpp"
#include "textrisk/text_pipeline.hpp"

namespace py = pybind11;
using namespace textrisk;

namespace {

// JSON crosses the boundary as text; the Python side decodes it.
std::string dump(const nlohmann::json& j) { return j.dump(); }

std::string corpus_json(const std::vector<FirmYearRecord>& records) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : records) out.push_back(record_to_json(r));
    return out.dump();
}

} // namespace

PYBIND11_MODULE(_textrisk, m) {
    m.doc() = "Native core of the textrisk package.";

    static py::exception<Error> exc(m, "TextriskError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object inst = py::reinterpret_borrow<py::object>(exc.ptr())(e.what());
            inst.attr("exit_code") = static_cast<int>(e.kind());
            PyErr_SetObject(exc.ptr(), inst.ptr());
        }
    });

    // text
    m.def("normalize", [](const std::string& s) { return normalize(s); });
    m.def("split_words", [](const std::string& s) {
        std::vector<std::string> out;
        for (const auto& w : split_words(s)) out.push_back(w.text);
        return out;
    });
    m.def("stem", [](const std::string& token, const std::string& stemmer) { return make_stemmer(stemmer)->stem(token); },
          py::arg("token"), py::arg("stemmer") = "porter");
    m.def("default_stopwords", &default_stopwords, py::arg("language") = "english");
    m.def("blockify", [](const std::vector<TokenId>& ids, int k) {
        const auto b = blockify(std::span<const TokenId>(ids), k);
        py::dict d;
        d["block_size"] = b.block_size;
        d["step"] = b.step;
        d["num_blocks"] = b.num_blocks;
        d["empty"] = b.empty;
        d["ids"] = b.ids;
        d["valid"] = std::vector<int>(b.valid.begin(), b.valid.end());
        d["offsets"] = b.offsets;
        return d;
    }, py::arg("ids"), py::arg("k"));

    py::class_<TextPreprocessor>(m, "Preprocessor")
        .def(py::init([](const std::string& stemmer, const std::string& language, std::set<std::string> stopwords,
                         std::set<std::string> entities) {
                 TextPreprocessor::Options o;
                 o.stemmer = stemmer;
                 o.language = language;
                 o.stopwords = std::move(stopwords);
                 o.entity_dictionary = std::move(entities);
                 return TextPreprocessor(std::move(o));
             }),
             py::arg("stemmer") = "porter", py::arg("language") = "english",
             py::arg("stopwords") = std::set<std::string>{}, py::arg("entities") = std::set<std::string>{})
        .def("observe", &TextPreprocessor::observe)
        .def("tokens", &TextPreprocessor::tokens)
        .def("to_json", [](const TextPreprocessor& p) { return dump(p.to_json()); });

    // evaluation
    m.def("auc", [](const std::vector<double>& s, const std::vector<double>& y) { return auc(s, y); },
          py::arg("scores"), py::arg("labels"));
    m.def("log_score", [](const std::vector<double>& p, const std::vector<double>& y) { return log_score(p, y); },
          py::arg("p_hat"), py::arg("labels"));
    m.def("paired_t_test", [](const std::vector<double>& a, const std::vector<double>& b) {
        const auto r = paired_t_test_detail(a, b);
        return py::make_tuple(r.t, r.df, r.p);
    }, py::arg("a"), py::arg("b"));

    // logit baseline
    py::class_<LogitModel>(m, "LogitModel")
        .def_readonly("coefficients", &LogitModel::coefficients)
        .def_readonly("intercept", &LogitModel::intercept)
        .def_readonly("iterations", &LogitModel::iterations)
        .def_readonly("objective_trace", &LogitModel::objective_trace)
        .def("predict", [](const LogitModel& mdl, const std::vector<std::vector<double>>& X) { return predict_logit(mdl, X); })
        .def("to_json", [](const LogitModel& mdl) { return dump(mdl.to_json()); });
    m.def("fit_logit", [](const std::vector<std::vector<double>>& X, const std::vector<double>& y, double l2, int max_iterations) {
        LogitOptions o;
        o.l2 = l2;
        o.max_iterations = max_iterations;
        return fit_logit(X, y, o);
    }, py::arg("X"), py::arg("y"), py::arg("l2") = 1e-6, py::arg("max_iterations") = 100);

    // data
    m.def("synthetic_corpus", [](std::size_t n_firms, std::uint64_t seed, double signal, double tabular, double rate) {
        auto spec = SyntheticCorpusSpec::with_default_pools();
        spec.n_firms = n_firms;
        spec.seed = seed;
        spec.signal_strength = signal;
        spec.tabular_signal_strength = tabular;
        spec.distress_rate = rate;
        return corpus_json(generate_synthetic(spec));
    }, py::arg("n_firms"), py::arg("seed") = 0, py::arg("signal_strength") = 0.9,
       py::arg("tabular_signal_strength") = 0.3, py::arg("distress_rate") = 0.1);
    m.def("read_corpus", [](const std::filesystem::path& p) { return corpus_json(read_corpus(p)); });
    m.def("write_corpus", [](const std::filesystem::path& p, const std::string& records_json) {
        std::vector<FirmYearRecord> rs;
        for (const auto& j : nlohmann::json::parse(records_json)) rs.push_back(record_from_json(j));
        write_corpus(p, rs);
    });

    // config and runs
    m.def("parse_config", [](const std::string& text) { return dump(RunConfig::parse(text).to_tree()); });
    m.def("config_text", [](const std::string& text) { return RunConfig::parse(text).to_text(); },
          py::arg("text") = "");
    m.def("run", [](const std::string& config_text, const std::string& corpus, const std::string& output_dir) {
        RunConfig cfg = RunConfig::parse(config_text);
        if (!corpus.empty()) cfg.corpus = corpus;
        if (!output_dir.empty()) cfg.output_dir = output_dir;
        py::gil_scoped_release nogil;
        Experiment ex(cfg, StageCache(StageCache::default_root(cfg)));
        std::filesystem::create_directories(cfg.output_dir);
        ex.write_resolved_config();
        ex.run_all();
        return ex.output_dir();
    }, py::arg("config_text") = "", py::arg("corpus") = "", py::arg("output_dir") = "");
    m.def("checkpoint_config", [](const std::filesystem::path& p) { return dump(load_checkpoint(p).config().to_json()); });
}
