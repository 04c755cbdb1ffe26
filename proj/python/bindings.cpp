// Copyright 2026 The pqft Authors
// SPDX-License-Identifier: Apache-2.0

// Python bindings. Structured values cross the boundary as JSON text; the
// pure-Python wrapper in pqft/__init__.py turns them into dicts.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "pqft/augmentor.hpp"
#include "pqft/corpus.hpp"
#include "pqft/decoder.hpp"
#include "pqft/error.hpp"
#include "pqft/evaluator.hpp"
#include "pqft/json_io.hpp"
#include "pqft/pipeline.hpp"
#include "pqft/synthetic.hpp"
#include "pqft/trainer.hpp"
#include "pqft/transformer.hpp"

namespace py = pybind11;
using namespace pqft;

namespace {

Label label_of(const std::string& text) {
    if (auto l = parse_label(text)) return *l;
    if (text == "invalid") return Label::Invalid;
    throw Error(ErrorKind::Contract, "unknown label '" + text + "'");
}

std::vector<Prediction> to_predictions(const std::vector<std::string>& gold, const std::vector<std::string>& predicted) {
    if (gold.size() != predicted.size()) throw Error(ErrorKind::Contract, "gold and predicted lengths differ");
    std::vector<Prediction> out(gold.size());
    for (std::size_t i = 0; i < gold.size(); ++i) {
        out[i].id = std::to_string(i);
        out[i].gold = label_of(gold[i]);
        out[i].predicted = label_of(predicted[i]);
    }
    return out;
}

std::optional<std::filesystem::path> opt_path(const std::optional<std::string>& p) {
    if (!p) return std::nullopt;
    return std::filesystem::path(*p);
}

// A base model plus an optional adapter, enough to score text from Python.
class Model {
  public:
    Model(const std::string& config_json, std::uint64_t seed) {
        ModelConfig c = Json::parse(config_json).get<ModelConfig>();
        weights_ = init_weights(c, seed);
    }
    explicit Model(const std::string& checkpoint_path) {
        Checkpoint ck = load_checkpoint(checkpoint_path);
        weights_ = std::move(ck.base);
        adapter_ = std::move(ck.adapter);
    }

    std::string config() const { return Json(weights_.config).dump(); }
    std::size_t parameter_count() const { return weights_.parameter_count(); }
    std::string weights_hash() const { return pqft::weights_hash(weights_); }

    py::array_t<float> logits(const std::vector<int>& tokens, std::size_t prefix_position) const {
        ForwardOptions opts = adapter_ ? adapter_->options() : ForwardOptions{};
        opts.prefix_position = prefix_position;
        const Tensor out = forward(weights_, tokens, opts);
        py::array_t<float> arr({out.rows(), out.cols()});
        std::copy(out.data().begin(), out.data().end(), arr.mutable_data());
        return arr;
    }

    std::string evaluate(const std::string& dataset_json, const std::string& decode_json, bool constrain) const {
        const auto records = parse_pubmedqa(dataset_json);
        EvalOptions opts;
        opts.decode = Json::parse(decode_json).get<DecodeConfig>();
        opts.constrain_to_labels = constrain;
        const ForwardOptions adapters = adapter_ ? adapter_->options() : ForwardOptions{};
        return pqft::evaluate(weights_, adapters, records, opts).report.to_json();
    }

  private:
    ModelWeights weights_;
    std::optional<AdapterState> adapter_;
};

}  // namespace

PYBIND11_MODULE(_pqft, m) {
    m.doc() = "pqft native core";

    // Deliberately leaked: the type must outlive every translator call.
    static PyObject* error_type = PyErr_NewException("pqft._pqft.Error", PyExc_RuntimeError, nullptr);
    m.attr("Error") = py::reinterpret_borrow<py::object>(error_type);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object exc = py::reinterpret_borrow<py::object>(error_type)(e.what());
            exc.attr("kind") = std::string(to_string(e.kind()));
            exc.attr("exit_code") = exit_code_for(e.kind());
            PyErr_SetObject(error_type, exc.ptr());
        }
    });

    m.def("encode", [](const std::string& text) { return ByteTokenizer::encode(text); });
    m.def("decode", [](const std::vector<int>& ids) { return py::bytes(ByteTokenizer::decode(ids)); });
    m.attr("VOCAB_SIZE") = ByteTokenizer::kVocabSize;
    m.attr("EOS_ID") = ByteTokenizer::kEos;

    m.def("synthesize", [](std::size_t n, std::uint64_t seed) { return render_pubmedqa(synthesize_pubmedqa(n, seed)); },
          py::arg("n"), py::arg("seed") = 0);
    m.def("normalize_dataset", [](const std::string& text) { return render_pubmedqa(parse_pubmedqa(text)); });

    m.def("normalize_answer", [](const std::string& s) { return normalize_answer(s); });
    m.def("hard_match_label", [](const std::string& s) { return std::string(to_string(hard_match_label(s))); });
    m.def("accuracy", [](const std::vector<std::string>& g, const std::vector<std::string>& p) {
        return accuracy(to_predictions(g, p));
    });
    m.def("macro_f1", [](const std::vector<std::string>& g, const std::vector<std::string>& p) {
        return macro_f1(to_predictions(g, p));
    });

    m.def("apply_repetition_penalty",
          [](const std::vector<float>& logits, const std::vector<int>& seen, float penalty) {
              return apply_repetition_penalty(logits, seen, penalty);
          });
    m.def("apply_temperature",
          [](const std::vector<float>& logits, float t) { return apply_temperature(logits, t); });

    m.def("lr_at", [](std::size_t step, const std::string& train_json) {
        return lr_at(step, Json::parse(train_json).get<TrainConfig>());
    });
    m.def("trainable_params", [](const std::string& model_json, const std::string& adapter_json) {
        const auto c = trainable_params(Json::parse(model_json).get<ModelConfig>(),
                                        Json::parse(adapter_json).get<AdapterConfig>());
        return py::make_tuple(c.count, c.base_total, c.ratio);
    });
    m.def("derive_seed", &derive_seed);
    m.def("normalize_question", [](const std::string& q) { return normalize_question(q); });

    py::class_<Model>(m, "Model")
        .def(py::init<const std::string&, std::uint64_t>(), py::arg("config_json"), py::arg("seed"))
        .def(py::init<const std::string&>(), py::arg("checkpoint_path"))
        .def_property_readonly("config_json", &Model::config)
        .def_property_readonly("parameter_count", &Model::parameter_count)
        .def("weights_hash", &Model::weights_hash)
        .def("logits", &Model::logits, py::arg("tokens"), py::arg("prefix_position") = 0)
        .def("evaluate", &Model::evaluate, py::arg("dataset_json"), py::arg("decode_json"), py::arg("constrain"),
             py::call_guard<py::gil_scoped_release>());

    using Overrides = std::vector<std::pair<std::string, std::string>>;
    m.def("load_config", [](const std::optional<std::string>& file, const Overrides& overrides) {
        return load_run_config(opt_path(file), overrides).to_json().dump();
    });

    // Pipeline commands take the effective configuration as JSON text (paths
    // already absolute or relative to the working directory).
    auto config_of = [](const std::string& j) { return RunConfig::from_json(Json::parse(j)); };
    m.def("run_split", [config_of](const std::string& j) { command_split(config_of(j)); },
          py::call_guard<py::gil_scoped_release>());
    m.def("run_augment", [config_of](const std::string& j) { return command_augment(config_of(j)).summary_json(); },
          py::call_guard<py::gil_scoped_release>());
    m.def("run_train", [config_of](const std::string& j) { return command_train(config_of(j)).best_step; },
          py::call_guard<py::gil_scoped_release>());
    m.def("run_eval",
          [config_of](const std::string& j, const std::optional<std::string>& checkpoint) {
              return command_eval(config_of(j), opt_path(checkpoint)).report.to_json();
          },
          py::arg("config_json"), py::arg("checkpoint") = py::none(), py::call_guard<py::gil_scoped_release>());
    m.def("run_report",
          [config_of](const std::string& j, const std::vector<std::string>& inputs) {
              return command_report(config_of(j), std::vector<std::filesystem::path>(inputs.begin(), inputs.end()));
          },
          py::arg("config_json"), py::arg("inputs") = std::vector<std::string>{});
    m.def("render_table", [](const std::vector<std::string>& reports) {
        std::vector<EvalReport> rs;
        for (const auto& r : reports) rs.push_back(EvalReport::from_json(r));
        return render_table(rs);
    });
}
