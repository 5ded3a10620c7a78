#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "mtdetect/evaluator.hpp"

namespace py = pybind11;
using namespace mtdetect;

namespace {

py::object json_loads(const std::string& text) { return py::module_::import("json").attr("loads")(text); }

TaggedParagraph paragraph_from(const std::vector<std::pair<std::string, std::string>>& tokens, const Tagset& tagset) {
  TaggedParagraph p;
  p.id = "py";
  for (const auto& [surface, tag] : tokens) {
    const auto id = tagset.find(tag);
    if (!id) throw Error("unknown tag " + tag);
    p.tokens.push_back({surface, *id});
  }
  return p;
}

FoldPlan folds_for(const FeatureSet& fs, int k, std::uint64_t seed, bool group_pairs) {
  return make_folds(fs.rows, k, seed, {group_pairs});
}

}  // namespace

PYBIND11_MODULE(_mtdetect, m) {
  m.doc() = "Machine-translation detection from word-matching coherence features";

  // Translators run newest first, so the base class goes in first.
  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<LayoutMismatch>(m, "LayoutMismatch", base);
  py::register_exception<ParseError>(m, "ParseError", base);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  py::enum_<DistanceMetric>(m, "DistanceMetric")
      .value("EUCLIDEAN", DistanceMetric::Euclidean)
      .value("COSINE", DistanceMetric::Cosine);
  py::enum_<Optimizer>(m, "Optimizer")
      .value("LINEAR", Optimizer::Linear)
      .value("SGD", Optimizer::SgdSvm)
      .value("SMO", Optimizer::SmoSvm);
  py::enum_<Statistic>(m, "Statistic")
      .value("MEAN", Statistic::MeanOnly)
      .value("VARIANCE", Statistic::VarianceOnly)
      .value("COMBINATION", Statistic::Combination);

  py::class_<Tagset>(m, "Tagset")
      .def(py::init<std::vector<std::string>>())
      .def_static("penn_treebank", &Tagset::penn_treebank, py::return_value_policy::copy)
      .def_static("from_file", &Tagset::from_file)
      .def_property_readonly("tags", &Tagset::tags)
      .def_property_readonly("hash", &Tagset::hash)
      .def("__len__", &Tagset::size);

  py::class_<FeatureLayout>(m, "FeatureLayout")
      .def(py::init<Tagset>())
      .def_property_readonly("group_count", &FeatureLayout::group_count)
      .def_property_readonly("total_len", &FeatureLayout::total_len)
      .def("index", [](const FeatureLayout& l, TagId a, TagId b) { return l.index(TagPair::of(a, b)); })
      .def("pair_name", &FeatureLayout::pair_name);

  py::class_<EmbeddingTable>(m, "EmbeddingTable")
      .def_property_readonly("dimension", &EmbeddingTable::dimension)
      .def_property_readonly("source_id", &EmbeddingTable::source_id)
      .def("__len__", &EmbeddingTable::size)
      .def("lookup", [](const EmbeddingTable& t, const std::string& token) -> std::optional<py::array_t<float>> {
        const auto v = t.lookup(token);
        if (!v) return std::nullopt;
        return py::array_t<float>(static_cast<py::ssize_t>(v->size()), v->data());
      });
  m.def("load_embeddings", &load_embeddings, py::arg("path"), py::arg("expected_dimension") = std::nullopt);

  m.def(
      "distance",
      [](DistanceMetric metric, py::array_t<float, py::array::c_style | py::array::forcecast> u,
         py::array_t<float, py::array::c_style | py::array::forcecast> v) {
        return distance(metric, VectorView(u.data(), static_cast<std::size_t>(u.size())),
                        VectorView(v.data(), static_cast<std::size_t>(v.size())));
      },
      py::arg("metric"), py::arg("u"), py::arg("v"));

  py::class_<Corpus>(m, "Corpus")
      .def("__len__", &Corpus::size)
      .def_property_readonly("ids", [](const Corpus& c) {
        std::vector<std::string> ids;
        for (const auto& p : c.paragraphs()) ids.push_back(p.id);
        return ids;
      });
  m.def(
      "load_corpus",
      [](const std::filesystem::path& path, const Tagset& tagset) {
        auto r = load_corpus(path, tagset);
        py::list rejected;
        for (const auto& x : r.rejections) rejected.append(py::make_tuple(x.id, x.line, x.reason));
        return py::make_tuple(std::move(r.corpus), rejected);
      },
      py::arg("path"), py::arg("tagset") = Tagset::penn_treebank());

  m.def(
      "match_paragraph",
      [](const std::vector<std::pair<std::string, std::string>>& tokens, const EmbeddingTable& table,
         DistanceMetric metric, const Tagset& tagset) {
        const auto g = match_paragraph(paragraph_from(tokens, tagset), table, {metric});
        std::map<std::string, std::vector<double>> out;
        for (const auto& [pair, dists] : g.groups) out[tagset.name(pair.a) + "-" + tagset.name(pair.b)] = dists;
        return out;
      },
      py::arg("tokens"), py::arg("table"), py::arg("metric") = DistanceMetric::Euclidean,
      py::arg("tagset") = Tagset::penn_treebank());

  py::class_<FeatureSet>(m, "FeatureSet")
      .def("__len__", [](const FeatureSet& fs) { return fs.rows.size(); })
      .def_property_readonly("group_count", [](const FeatureSet& fs) { return fs.header.group_count; })
      .def_property_readonly("metric", [](const FeatureSet& fs) { return fs.header.metric; })
      .def_property_readonly("ids", [](const FeatureSet& fs) {
        std::vector<std::string> ids;
        for (const auto& r : fs.rows) ids.push_back(r.paragraph_id);
        return ids;
      })
      .def_property_readonly("labels", [](const FeatureSet& fs) {
        std::vector<int> y;
        for (const auto& r : fs.rows) y.push_back(static_cast<int>(r.label));
        return y;
      })
      .def_property_readonly("values", [](const FeatureSet& fs) {
        const auto cols = fs.total_len();
        py::array_t<double> out({static_cast<py::ssize_t>(fs.rows.size()), static_cast<py::ssize_t>(cols)});
        auto w = out.mutable_unchecked<2>();
        for (std::size_t i = 0; i < fs.rows.size(); ++i)
          for (std::size_t j = 0; j < cols; ++j) w(i, j) = fs.rows[i].values[j];
        return out;
      })
      .def("save", [](const FeatureSet& fs, const std::filesystem::path& p) { save_feature_set(fs, p); });
  m.def("load_feature_set", &load_feature_set);

  m.def(
      "extract",
      [](const Corpus& corpus, const EmbeddingTable& table, DistanceMetric metric, unsigned jobs) {
        py::gil_scoped_release release;
        const FeatureLayout layout(corpus.tagset());
        const auto matches = match_corpus(corpus, table, {metric}, jobs);
        return featurize_corpus(matches, layout, corpus, metric, table.source_id());
      },
      py::arg("corpus"), py::arg("table"), py::arg("metric") = DistanceMetric::Euclidean, py::arg("jobs") = 1);

  py::class_<SvmModel>(m, "Model")
      .def_property_readonly("weights", [](const SvmModel& s) { return s.weights; })
      .def_readonly("bias", &SvmModel::bias)
      .def("save", [](const SvmModel& s, const std::filesystem::path& p) { save_model(s, p); })
      .def("score", [](const SvmModel& s, const std::vector<double>& values) { return decision_score(s, values); });
  m.def("load_model", &load_model);

  m.def(
      "train",
      [](const FeatureSet& fs, Optimizer optimizer, Statistic statistic, double C, int epochs, std::uint64_t seed) {
        Hyperparams hp;
        hp.C = C;
        hp.epochs = epochs;
        hp.seed = seed;
        py::gil_scoped_release release;
        return train(fs, optimizer, hp, statistic);
      },
      py::arg("features"), py::arg("optimizer") = Optimizer::SmoSvm, py::arg("statistic") = Statistic::Combination,
      py::arg("C") = 1.0, py::arg("epochs") = 20, py::arg("seed") = 42);

  m.def(
      "predict",
      [](const SvmModel& model, const FeatureSet& fs) {
        py::list out;
        for (const auto& p : predict(model, fs))
          out.append(py::dict(py::arg("id") = p.id, py::arg("score") = p.score,
                              py::arg("label") = std::string(label_name(p.label)), py::arg("tie") = p.tie));
        return out;
      },
      py::arg("model"), py::arg("features"));

  m.def(
      "compute_eer",
      [](const std::vector<double>& scores, const std::vector<int>& labels) {
        if (scores.size() != labels.size()) throw Error("scores and labels differ in length");
        std::vector<ScoredLabel> s;
        for (std::size_t i = 0; i < scores.size(); ++i)
          s.push_back({scores[i], labels[i] > 0 ? Label::Machine : Label::Human});
        return compute_eer(s);
      },
      py::arg("scores"), py::arg("labels"), "Labels are +1 for machine, -1 for human.");

  m.def(
      "cross_validate",
      [](const FeatureSet& fs, Optimizer optimizer, Statistic statistic, int k, std::uint64_t seed, bool group_pairs,
         unsigned jobs) {
        std::string report;
        {
          py::gil_scoped_release release;
          Hyperparams hp;
          hp.seed = seed;
          CvOptions options;
          options.statistic = statistic;
          options.jobs = jobs;
          report = cross_validate(fs, optimizer, hp, folds_for(fs, k, seed, group_pairs), options).to_json();
        }
        return json_loads(report);
      },
      py::arg("features"), py::arg("optimizer") = Optimizer::SmoSvm, py::arg("statistic") = Statistic::Combination,
      py::arg("folds") = 10, py::arg("seed") = 42, py::arg("group_pairs") = true, py::arg("jobs") = 1);

  m.def(
      "rank",
      [](const FeatureSet& fs, int k, std::uint64_t seed, std::size_t top, unsigned jobs) {
        std::string ranking;
        {
          py::gil_scoped_release release;
          Hyperparams hp;
          hp.seed = seed;
          ranking = ranking_to_json(
              rank_single_features(fs, folds_for(fs, k, seed, true), Optimizer::SmoSvm, hp, top, jobs));
        }
        return json_loads(ranking);
      },
      py::arg("features"), py::arg("folds") = 10, py::arg("seed") = 42, py::arg("top") = 5, py::arg("jobs") = 1);
}
