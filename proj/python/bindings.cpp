#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "mmtm/checkpoint.hpp"
#include "mmtm/dataset.hpp"
#include "mmtm/error.hpp"
#include "mmtm/eval.hpp"
#include "mmtm/expr.hpp"
#include "mmtm/pca.hpp"
#include "mmtm/pipeline.hpp"
#include "mmtm/synthetic.hpp"

namespace py = pybind11;

namespace pybind11::detail {

// Rational <-> fractions.Fraction; int and decimal strings are accepted too.
template <>
struct type_caster<mmtm::Rational> {
  PYBIND11_TYPE_CASTER(mmtm::Rational, const_name("fractions.Fraction"));

  bool load(handle src, bool) {
    if (!src) return false;
    try {
      if (py::isinstance<py::str>(src)) {
        auto r = mmtm::Rational::parse(src.cast<std::string>());
        if (!r) return false;
        value = *r;
        return true;
      }
      if (py::isinstance<py::float_>(src)) {
        value = mmtm::Rational::from_double(src.cast<double>());
        return true;
      }
      if (!py::hasattr(src, "numerator") || !py::hasattr(src, "denominator")) return false;
      value = mmtm::Rational(src.attr("numerator").cast<std::int64_t>(), src.attr("denominator").cast<std::int64_t>());
      return true;
    } catch (const py::error_already_set&) {
      PyErr_Clear();
      return false;
    } catch (const py::cast_error&) {
      return false;
    }
  }

  static handle cast(const mmtm::Rational& r, return_value_policy, handle) {
    static py::object fraction = py::module_::import("fractions").attr("Fraction");
    return fraction(r.num(), r.den()).release();
  }
};

}  // namespace pybind11::detail

namespace {

py::object json_loads(const std::string& text) { return py::module_::import("json").attr("loads")(text); }
std::string json_dumps(const py::object& obj) { return py::module_::import("json").attr("dumps")(obj).cast<std::string>(); }

mmtm::Traversal to_traversal(const std::string& tag) {
  auto t = mmtm::traversal_from_tag(tag);
  if (!t) throw mmtm::Error(mmtm::ErrorKind::UnknownTask, "unknown traversal '" + tag + "'");
  return *t;
}

py::list quarantine_list(const std::vector<mmtm::QuarantineEntry>& entries) {
  py::list out;
  for (const auto& q : entries) {
    py::dict d;
    d["line"] = q.line;
    d["id"] = q.id;
    d["kind"] = std::string(mmtm::to_string(q.kind));
    d["message"] = q.message;
    out.append(d);
  }
  return out;
}

struct Trained {
  mmtm::Model model;
  mmtm::Vocab vocab;
  std::string log_jsonl;
  bool pca_init = false;
};

}  // namespace

PYBIND11_MODULE(_mmtm, m) {
  m.doc() = "Expression-tree traversals, datasets, PCA init and the multi-decoder transformer";

  static py::exception<mmtm::Error> error_type(m, "MmtmError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const mmtm::Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error_type)(e.what());
      exc.attr("kind") = std::string(mmtm::to_string(e.kind()));
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  py::class_<mmtm::ExprTree>(m, "ExprTree")
      .def_static("placeholder", &mmtm::ExprTree::placeholder)
      .def_static("constant", &mmtm::ExprTree::constant)
      .def_static("node",
                  [](const std::string& op, const mmtm::ExprTree& l, const mmtm::ExprTree& r) {
                    auto o = mmtm::op_from_symbol(op);
                    if (!o) throw mmtm::Error(mmtm::ErrorKind::UnknownToken, "not an operator: " + op);
                    return mmtm::ExprTree::node(*o, l, r);
                  })
      .def_property_readonly("is_leaf", &mmtm::ExprTree::is_leaf)
      .def_property_readonly("node_count", &mmtm::ExprTree::node_count)
      .def_property_readonly("op_count", &mmtm::ExprTree::op_count)
      .def_property_readonly("depth", &mmtm::ExprTree::depth)
      .def("to_infix", &mmtm::ExprTree::to_infix)
      .def("__eq__", [](const mmtm::ExprTree& a, const mmtm::ExprTree& b) { return a == b; })
      .def("__repr__", [](const mmtm::ExprTree& t) { return "ExprTree(" + t.to_infix() + ")"; });

  m.def("parse_infix", &mmtm::parse_infix, py::arg("equation"), py::arg("n_quantities"));
  m.def(
      "traverse", [](const mmtm::ExprTree& t, const std::string& tag) { return mmtm::traverse(t, to_traversal(tag)); },
      py::arg("tree"), py::arg("order"), "order is 'pre', 'in' or 'post'");
  m.def("tree_from_preorder", [](const std::vector<std::string>& tokens) { return mmtm::tree_from_preorder(tokens); });
  m.def("tree_from_postorder",
        [](const std::vector<std::string>& tokens) { return mmtm::tree_from_postorder(tokens); });
  m.def("evaluate", [](const mmtm::ExprTree& t, const std::vector<mmtm::Rational>& q) { return mmtm::evaluate(t, q); });

  m.def("extract_numbers", [](const std::string& text) {
    auto r = mmtm::extract_numbers(text);
    return py::make_tuple(r.text, r.quantities);
  });
  m.def("tokenize", &mmtm::tokenize);
  m.def("answers_match", &mmtm::answers_match, py::arg("predicted"), py::arg("gold"), py::arg("rel_tol") = 1e-4);

  py::class_<mmtm::MwpRecord>(m, "MwpRecord")
      .def_readonly("id", &mmtm::MwpRecord::id)
      .def_readonly("question", &mmtm::MwpRecord::question)
      .def_readonly("masked_question", &mmtm::MwpRecord::masked_question)
      .def_readonly("equation", &mmtm::MwpRecord::equation)
      .def_readonly("answer", &mmtm::MwpRecord::answer)
      .def_readonly("quantities", &mmtm::MwpRecord::quantities)
      .def_readonly("op_count", &mmtm::MwpRecord::op_count)
      .def_property_readonly("op_types",
                             [](const mmtm::MwpRecord& r) {
                               std::vector<std::string> out;
                               for (auto op : r.op_types) out.emplace_back(1, mmtm::op_symbol(op));
                               return out;
                             })
      .def("__repr__", [](const mmtm::MwpRecord& r) { return "MwpRecord(" + r.id + ": " + r.equation + ")"; });

  m.def("make_record", [](const std::string& id, const std::string& question, const std::string& equation,
                          const mmtm::Rational& answer) {
    return mmtm::make_record(mmtm::RawRecord{id, question, equation, answer});
  });
  m.def(
      "load_corpus",
      [](const std::filesystem::path& path) {
        auto load = mmtm::load_corpus(path);
        return py::make_tuple(load.records, quarantine_list(load.quarantine));
      },
      "Returns (records, quarantine).");
  m.def("load_corpus_text", [](const std::string& text) {
    auto load = mmtm::load_corpus_text(text);
    return py::make_tuple(load.records, quarantine_list(load.quarantine));
  });
  m.def("augment", [](const std::vector<mmtm::MwpRecord>& records) {
    auto sets = mmtm::augment_labels(records);
    py::dict out;
    for (auto t : mmtm::kAllTraversals) {
      py::list rows;
      for (const auto& ex : sets[static_cast<int>(t)]) {
        py::dict d;
        d["record_id"] = ex.record_id;
        d["task"] = std::string(mmtm::traversal_tag(t));
        d["source"] = ex.source;
        d["target"] = ex.target;
        rows.append(d);
      }
      out[py::str(std::string(mmtm::traversal_tag(t)))] = rows;
    }
    return out;
  });

  py::class_<mmtm::Vocab>(m, "Vocab")
      .def_property_readonly("source", [](const mmtm::Vocab& v) { return v.source.tokens(); })
      .def_property_readonly("target", [](const mmtm::Vocab& v) { return v.target.tokens(); })
      .def_property_readonly("hash", &mmtm::Vocab::hash)
      .def("to_json", &mmtm::Vocab::to_json);
  m.def("build_vocab", &mmtm::build_vocab, py::arg("records"), py::arg("min_count") = 1);

  m.def(
      "pca_project",
      [](const mmtm::Matrix& x, int d) {
        auto r = mmtm::pca_project(x, d);
        py::dict out;
        out["projected"] = r.projected;
        out["components"] = r.components;
        out["mean"] = Eigen::VectorXd(r.mean.transpose());
        out["explained_variance"] = r.explained_variance;
        out["rank_deficient"] = r.rank_deficient;
        return out;
      },
      py::arg("matrix"), py::arg("d"));

  m.def(
      "synthetic_corpus",
      [](std::size_t n, std::uint64_t seed) {
        py::list out;
        for (const auto& r : mmtm::synthetic_corpus(n, seed)) {
          py::dict d;
          d["id"] = r.id;
          d["question"] = r.question;
          d["equation"] = r.equation;
          d["answer"] = r.answer;
          out.append(d);
        }
        return out;
      },
      py::arg("n"), py::arg("seed") = 0);

  py::class_<Trained>(m, "TrainedModel")
      .def_property_readonly("config", [](const Trained& t) { return json_loads(t.model.config.to_json()); })
      .def_property_readonly("vocab", [](const Trained& t) { return t.vocab; })
      .def_property_readonly("train_log", [](const Trained& t) { return t.log_jsonl; })
      .def_property_readonly("pca_init", [](const Trained& t) { return t.pca_init; })
      .def_property_readonly("parameter_count", [](const Trained& t) { return t.model.params.scalar_count(); })
      .def_property_readonly("decoders",
                             [](const Trained& t) {
                               std::vector<std::string> out;
                               for (auto d : t.model.decoders()) out.emplace_back(mmtm::traversal_tag(d));
                               return out;
                             })
      .def(
          "decode",
          [](const Trained& t, const mmtm::MwpRecord& r) { return mmtm::predict_answer(t.model, t.vocab, r).predicted_tokens; },
          "Greedy pre-order labels for a record.")
      .def(
          "score",
          [](const Trained& t, const std::vector<mmtm::MwpRecord>& records) {
            return json_loads(mmtm::score(t.model, t.vocab, records).to_json());
          },
          "Evaluation report as a dict.")
      .def("save", [](const Trained& t, const std::filesystem::path& path) {
        mmtm::save_checkpoint(path, t.model, t.vocab.hash());
      });

  m.def(
      "train",
      [](const std::vector<mmtm::MwpRecord>& records, const py::dict& config, const py::dict& plan, bool pretrain,
         const std::optional<std::filesystem::path>& embeddings, std::size_t min_count) {
        mmtm::PipelineOptions options;
        options.config = mmtm::ModelConfig::from_json(json_dumps(config));
        options.plan = mmtm::TrainPlan::from_json(json_dumps(plan));
        options.pretrain = pretrain;
        options.min_count = min_count;
        std::optional<mmtm::PretrainedEmbeddings> table;
        if (embeddings) table = mmtm::load_embeddings_tsv(*embeddings);
        options.embeddings = table ? &*table : nullptr;
        mmtm::PipelineResult result = [&] {
          py::gil_scoped_release release;
          return mmtm::run_pipeline(records, options);
        }();
        return Trained{std::move(result.model), std::move(result.vocab), result.log.to_jsonl(), result.pca_init};
      },
      py::arg("records"), py::arg("config") = py::dict(), py::arg("plan") = py::dict(), py::arg("pretrain") = true,
      py::arg("embeddings") = std::nullopt, py::arg("min_count") = 1,
      "Pre-train on all three traversals (unless pretrain=False), then fine-tune pre-order.");
}
