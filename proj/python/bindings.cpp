#include "mousesim/authn.hpp"
#include "mousesim/error.hpp"
#include "mousesim/eval.hpp"
#include "mousesim/experiment.hpp"
#include "mousesim/ingest.hpp"
#include "mousesim/model.hpp"
#include "mousesim/pairs.hpp"
#include "mousesim/preprocess.hpp"
#include "mousesim/sample_store.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace mousesim;

namespace {

using EventArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

// Sessions travel as (n, 4) float64 arrays of t, x, y, button_down.
ingest::Session session_from_array(const EventArray& a) {
    if (a.ndim() != 2 || a.shape(1) != 4) throw py::value_error("events must have shape (n, 4): t, x, y, button_down");
    const auto r = a.unchecked<2>();
    ingest::Session s;
    s.reserve(static_cast<std::size_t>(r.shape(0)));
    for (py::ssize_t i = 0; i < r.shape(0); ++i) s.push_back({r(i, 0), r(i, 1), r(i, 2), r(i, 3) != 0.0});
    return s;
}

py::array_t<double> session_to_array(const ingest::Session& s) {
    py::array_t<double> out({static_cast<py::ssize_t>(s.size()), py::ssize_t{4}});
    auto w = out.mutable_unchecked<2>();
    for (std::size_t i = 0; i < s.size(); ++i) {
        const auto k = static_cast<py::ssize_t>(i);
        w(k, 0) = s[i].t;
        w(k, 1) = s[i].x;
        w(k, 2) = s[i].y;
        w(k, 3) = s[i].button_down ? 1.0 : 0.0;
    }
    return out;
}

std::vector<float> floats(const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
    return {a.data(), a.data() + a.size()};
}

using PyInstance = std::tuple<std::pair<std::string, std::size_t>, std::pair<std::string, std::size_t>, std::string>;

PyInstance to_py(const pairs::Instance& i) {
    return {{i.a.user_id, i.a.index}, {i.b.user_id, i.b.index}, i.label == pairs::Label::same ? "same" : "different"};
}

pairs::Instance from_py(const PyInstance& t) {
    const auto& [a, b, label] = t;
    if (label != "same" && label != "different") throw py::value_error("label must be 'same' or 'different'");
    return {{a.first, a.second}, {b.first, b.second}, label == "same" ? pairs::Label::same : pairs::Label::different};
}

std::vector<PyInstance> to_py(const std::vector<pairs::Instance>& v) {
    std::vector<PyInstance> out;
    for (const auto& i : v) out.push_back(to_py(i));
    return out;
}

std::vector<pairs::Instance> from_py(const std::vector<PyInstance>& v) {
    std::vector<pairs::Instance> out;
    for (const auto& i : v) out.push_back(from_py(i));
    return out;
}

eval::ScoredSet scored(const std::vector<double>& genuine, const std::vector<double>& impostor) {
    eval::ScoredSet s;
    for (double g : genuine) s.add(g, eval::ItemLabel::genuine);
    for (double i : impostor) s.add(i, eval::ItemLabel::impostor);
    return s;
}

std::vector<pairs::UserSampleCount> counts_from_py(const std::vector<std::pair<std::string, std::size_t>>& v) {
    std::vector<pairs::UserSampleCount> out;
    for (const auto& [u, n] : v) out.push_back({u, n});
    return out;
}

}  // namespace

PYBIND11_MODULE(_mousesim, m) {
    m.doc() = "Mouse-trajectory similarity: preprocessing, pairing, training, authentication and evaluation";

    static py::exception<Error> error_type(m, "MousesimError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object exc = py::reinterpret_borrow<py::object>(error_type.ptr())(e.what());
            exc.attr("code") = std::string(to_string(e.code()));
            PyErr_SetObject(error_type.ptr(), exc.ptr());
        }
    });

    // ingest
    py::class_<ingest::SynthParams>(m, "SynthParams")
        .def(py::init<>())
        .def_readwrite("mean_speed", &ingest::SynthParams::mean_speed)
        .def_readwrite("speed_jitter", &ingest::SynthParams::speed_jitter)
        .def_readwrite("pause_rate", &ingest::SynthParams::pause_rate)
        .def_readwrite("pause_len", &ingest::SynthParams::pause_len)
        .def_readwrite("curvature", &ingest::SynthParams::curvature)
        .def_readwrite("click_rate", &ingest::SynthParams::click_rate)
        .def_readwrite("sample_hz", &ingest::SynthParams::sample_hz)
        .def("validate", &ingest::SynthParams::validate);

    m.def("synth_population", &ingest::synth_population, py::arg("n_users"), py::arg("seed"));
    m.def(
        "synth_session",
        [](const ingest::SynthParams& p, std::uint64_t seed, double duration) {
            return session_to_array(ingest::normalize(ingest::synth_user(p, seed, duration), 1920.0, 1080.0));
        },
        py::arg("params"), py::arg("seed"), py::arg("duration"),
        "Synthetic session, normalized; (n, 4) array of t, x, y, button_down");
    m.def(
        "load_log",
        [](const std::filesystem::path& path, const std::string& schema, double width, double height) {
            auto log = ingest::parse_event_log_file(path, ingest::parse_schema(schema));
            return session_to_array(ingest::normalize(std::move(log.events), width, height));
        },
        py::arg("path"), py::arg("schema") = "canonical", py::arg("width") = 1920.0, py::arg("height") = 1080.0,
        "Parse and normalize one event log");

    // preprocess
    py::class_<preprocess::PreprocessConfig>(m, "PreprocessConfig")
        .def(py::init<>())
        .def_readwrite("gap_cut", &preprocess::PreprocessConfig::gap_cut)
        .def_readwrite("min_seg_points", &preprocess::PreprocessConfig::min_seg_points)
        .def_readwrite("min_move_frac", &preprocess::PreprocessConfig::min_move_frac)
        .def_readwrite("max_rows", &preprocess::PreprocessConfig::max_rows)
        .def_readwrite("min_sample_rows", &preprocess::PreprocessConfig::min_sample_rows)
        .def_readwrite("literal_filter", &preprocess::PreprocessConfig::literal_filter)
        .def("validate", &preprocess::PreprocessConfig::validate);

    py::class_<preprocess::Sample>(m, "Sample")
        .def_readonly("user_id", &preprocess::Sample::user_id)
        .def_readonly("session_id", &preprocess::Sample::session_id)
        .def_readonly("true_len", &preprocess::Sample::true_len)
        .def_readonly("segment_ids", &preprocess::Sample::segment_ids)
        .def_readonly("effective_duration", &preprocess::Sample::effective_duration)
        .def_property_readonly("rows", [](const preprocess::Sample& s) {
            py::array_t<float> out({static_cast<py::ssize_t>(s.rows.size() / 4), py::ssize_t{4}});
            std::copy(s.rows.begin(), s.rows.end(), out.mutable_data());
            return out;
        });

    m.def(
        "preprocess_session",
        [](const EventArray& events, const preprocess::PreprocessConfig& cfg, const std::string& user_id,
           std::size_t session_id) { return preprocess::preprocess_session(session_from_array(events), cfg, user_id, session_id); },
        py::arg("events"), py::arg("config") = preprocess::PreprocessConfig{}, py::arg("user_id") = "",
        py::arg("session_id") = 0);

    py::class_<SampleStore>(m, "SampleStore")
        .def(py::init<std::size_t>(), py::arg("max_rows") = 256)
        .def("add", &SampleStore::add)
        .def("add_session",
             [](SampleStore& s, const std::string& user_id, const EventArray& events,
                const preprocess::PreprocessConfig& cfg) {
                 ingest::UserRecord rec;
                 rec.user_id = user_id;
                 rec.sessions.push_back(session_from_array(events));
                 const auto samples = preprocess::preprocess_user(rec, cfg);
                 s.add_all(samples);
                 return samples.size();
             },
             py::arg("user_id"), py::arg("events"), py::arg("config") = preprocess::PreprocessConfig{},
             "Preprocess one session into the store; returns the number of samples added")
        .def("__len__", &SampleStore::size)
        .def_property_readonly("users", &SampleStore::users)
        .def_property_readonly("max_rows", &SampleStore::max_rows)
        .def("samples_of", &SampleStore::samples_of, py::return_value_policy::reference_internal)
        .def("counts", [](const SampleStore& s) {
            std::vector<std::pair<std::string, std::size_t>> out;
            for (const auto& c : s.counts()) out.emplace_back(c.user_id, c.samples);
            return out;
        })
        .def("save", [](const SampleStore& s, const std::filesystem::path& dir) { s.save(dir); })
        .def_static("load", &SampleStore::load);

    // pairs
    m.def(
        "positive_instances",
        [](const std::string& user_id, std::size_t n) { return to_py(pairs::positive_instances(user_id, n)); },
        py::arg("user_id"), py::arg("n_samples"));
    m.def(
        "build_instances",
        [](const std::vector<std::pair<std::string, std::size_t>>& counts, std::uint64_t seed) {
            return to_py(pairs::flatten(pairs::build_instances(counts_from_py(counts), seed)));
        },
        py::arg("counts"), py::arg("seed"), "Balanced instances for [(user_id, n_samples), ...]");
    m.def(
        "kfold_split",
        [](const std::vector<std::string>& users, std::size_t k, std::uint64_t seed) {
            std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> out;
            for (const auto& f : pairs::identity_kfold_split(users, k, seed).folds)
                out.emplace_back(f.train_users, f.test_users);
            return out;
        },
        py::arg("user_ids"), py::arg("k"), py::arg("seed"), "[(train_users, test_users), ...]");

    // model
    py::class_<model::ModelConfig>(m, "ModelConfig")
        .def(py::init<>())
        .def_static("fast", &model::ModelConfig::fast)
        .def_static("full", &model::ModelConfig::full)
        .def_readwrite("conv_channels", &model::ModelConfig::conv_channels)
        .def_readwrite("conv_kernel", &model::ModelConfig::conv_kernel)
        .def_readwrite("recurrent_hidden", &model::ModelConfig::recurrent_hidden)
        .def_readwrite("head_widths", &model::ModelConfig::head_widths)
        .def_readwrite("dropout", &model::ModelConfig::dropout)
        .def_readwrite("learning_rate", &model::ModelConfig::learning_rate)
        .def_readwrite("epochs", &model::ModelConfig::epochs)
        .def_readwrite("batch_size", &model::ModelConfig::batch_size)
        .def_readwrite("seed", &model::ModelConfig::seed)
        .def_readwrite("seq_len", &model::ModelConfig::seq_len)
        .def_readwrite("swap_augment", &model::ModelConfig::swap_augment)
        .def("validate", &model::ModelConfig::validate)
        .def("to_json", [](const model::ModelConfig& c) { return nlohmann::json(c).dump(); });

    py::class_<model::EmbeddingModel>(m, "EmbeddingModel")
        .def(py::init<const model::ModelConfig&>())
        .def_property_readonly("config", &model::EmbeddingModel::config)
        .def_property_readonly("embedding_dim", &model::EmbeddingModel::embedding_dim)
        .def_property("metadata", &model::EmbeddingModel::metadata, &model::EmbeddingModel::set_metadata)
        .def("embed",
             [](const model::EmbeddingModel& mdl, const py::array_t<float, py::array::c_style | py::array::forcecast>& x) {
                 return mdl.embed(floats(x));
             })
        .def("score_pair",
             [](const model::EmbeddingModel& mdl, const py::array_t<float, py::array::c_style | py::array::forcecast>& a,
                const py::array_t<float, py::array::c_style | py::array::forcecast>& b) {
                 return mdl.score_pair(floats(a), floats(b));
             })
        .def("score_instances",
             [](const model::EmbeddingModel& mdl, const std::vector<PyInstance>& inst, const SampleStore& store) {
                 return model::score_instances(mdl, from_py(inst), store);
             })
        .def("save", &model::EmbeddingModel::save)
        .def_static("load", &model::EmbeddingModel::load);

    m.def(
        "train",
        [](const model::ModelConfig& cfg, const std::vector<PyInstance>& train, const std::vector<PyInstance>& val,
           const SampleStore& store) {
            py::gil_scoped_release release;
            auto r = model::train(cfg, from_py(train), from_py(val), store);
            return std::make_pair(std::move(r.model), nlohmann::json(r.history).dump());
        },
        py::arg("config"), py::arg("train"), py::arg("val"), py::arg("store"));

    // authn
    m.def("expand_sample", &authn::expand_sample, py::arg("segment_counts"), py::arg("start"), py::arg("samp_n"));
    m.def("resolve_threshold", &authn::resolve_threshold, py::arg("name_or_value"));
    m.def("threshold_presets", [] {
        std::vector<std::pair<std::string, double>> out;
        for (const auto& p : authn::threshold_presets()) out.emplace_back(std::string(p.name), p.threshold);
        return out;
    });
    m.def(
        "detect",
        [](const model::EmbeddingModel& mdl, const EventArray& a, const EventArray& b,
           const preprocess::PreprocessConfig& cfg, double threshold, std::size_t k_pairs, std::uint64_t seed) {
            authn::ModelScorer scorer(mdl);
            return nlohmann::json(authn::detect_inconsistency(scorer, session_from_array(a), session_from_array(b), cfg,
                                                              threshold, k_pairs, seed))
                .dump();
        },
        py::arg("model"), py::arg("record_a"), py::arg("record_b"), py::arg("config") = preprocess::PreprocessConfig{},
        py::arg("threshold") = 0.5, py::arg("k_pairs") = 8, py::arg("seed") = 0);

    // eval
    m.def(
        "roc_auc", [](const std::vector<double>& g, const std::vector<double>& i) { return eval::roc_auc(scored(g, i)); },
        py::arg("genuine"), py::arg("impostor"));
    m.def(
        "far_frr",
        [](const std::vector<double>& g, const std::vector<double>& i, double threshold) {
            const auto r = eval::far_frr(scored(g, i), threshold);
            return std::make_pair(r.far, r.frr);
        },
        py::arg("genuine"), py::arg("impostor"), py::arg("threshold") = 0.5);
    m.def(
        "frr_far_curve",
        [](const std::vector<double>& g, const std::vector<double>& i) {
            std::vector<std::tuple<double, double, double>> out;
            for (const auto& p : eval::frr_far_curve(scored(g, i))) out.emplace_back(p.threshold, p.far, p.frr);
            return out;
        },
        py::arg("genuine"), py::arg("impostor"));

    // experiment
    py::class_<experiment::ExperimentConfig>(m, "ExperimentConfig")
        .def(py::init<>())
        .def_property(
            "protocol", [](const experiment::ExperimentConfig& c) { return experiment::to_string(c.protocol); },
            [](experiment::ExperimentConfig& c, const std::string& p) { c.protocol = experiment::parse_protocol(p); })
        .def_readwrite("k", &experiment::ExperimentConfig::k)
        .def_readwrite("samp_n_sweep", &experiment::ExperimentConfig::samp_n_sweep)
        .def_readwrite("threshold", &experiment::ExperimentConfig::threshold)
        .def_readwrite("val_fraction", &experiment::ExperimentConfig::val_fraction)
        .def_readwrite("validate_each_epoch", &experiment::ExperimentConfig::validate_each_epoch)
        .def_readwrite("model", &experiment::ExperimentConfig::model)
        .def_readwrite("seed", &experiment::ExperimentConfig::seed);

    m.def(
        "run_experiment",
        [](const SampleStore& store, const experiment::ExperimentConfig& cfg) {
            experiment::ExperimentResult r;
            {
                py::gil_scoped_release release;
                r = experiment::run_experiment(store, cfg);
            }
            nlohmann::json j = {{"aggregate", r.aggregate}, {"reports", r.reports}, {"runs", r.runs}};
            return j.dump();
        },
        py::arg("store"), py::arg("config"));
}
