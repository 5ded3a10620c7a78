// mtdetect: machine-translated paragraph detection from word-matching
// coherence features.
//
// Exit codes: 0 success, 1 domain error, 2 usage or I/O error.

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "mtdetect/classifier.hpp"
#include "mtdetect/corpus.hpp"
#include "mtdetect/embeddings.hpp"
#include "mtdetect/evaluator.hpp"
#include "mtdetect/features.hpp"
#include "mtdetect/matcher.hpp"

namespace {

using nlohmann::json;
using namespace mtdetect;

constexpr int kOk = 0;
constexpr int kDomainError = 1;
constexpr int kUsageError = 2;

struct TrainFlags {
  std::string optimizer = "smo";
  std::string statistic = "combination";
  Hyperparams hp;

  void add(CLI::App* app) {
    app->add_option("--optimizer", optimizer, "linear | sgd | smo")->capture_default_str();
    app->add_option("--statistic", statistic, "mean | variance | combination")->capture_default_str();
    app->add_option("--C", hp.C, "Regularization constant")->capture_default_str();
    app->add_option("--epochs", hp.epochs, "SGD epochs")->capture_default_str();
    app->add_option("--max-iter", hp.max_iter, "SMO pair-update budget")->capture_default_str();
    app->add_option("--tolerance", hp.tolerance, "Stopping tolerance")->capture_default_str();
    app->add_option("--newton-iter", hp.newton_iter, "Newton iterations for the linear baseline")
        ->capture_default_str();
  }

  json echo() const {
    return {{"optimizer", optimizer},   {"statistic", statistic},     {"C", hp.C},
            {"epochs", hp.epochs},      {"max_iter", hp.max_iter},    {"tolerance", hp.tolerance},
            {"newton_iter", hp.newton_iter}, {"seed", hp.seed}};
  }
};

Tagset resolve_tagset(const std::string& path) {
  return path.empty() ? Tagset::penn_treebank() : Tagset::from_file(path);
}

// Writes to `path`, or stdout when empty or "-".
void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << text;
  if (!out) throw IoError("write error on '" + path + "'");
}

json rejections_json(const IngestResult& r) {
  json rej = json::array();
  for (const auto& x : r.rejections) rej.push_back({{"id", x.id}, {"line", x.line}, {"reason", x.reason}});
  const auto st = r.corpus.stats();
  return {{"records", r.records},
          {"admitted", r.corpus.size()},
          {"rejected", r.rejections.size()},
          {"rejections", std::move(rej)},
          {"stats",
           {{"human", st.human},
            {"machine", st.machine},
            {"unlabeled", st.unlabeled},
            {"mean_sentences", st.mean_sentences ? json(*st.mean_sentences) : json(nullptr)}}}};
}

unsigned default_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("mtdetect"));

  CLI::App app{"Detect machine-translated paragraphs from word-matching coherence features"};
  app.require_subcommand(1);
  app.fallthrough();
  std::uint64_t seed = 42;
  app.add_option("--seed", seed, "Seed for every random choice")->capture_default_str();
  unsigned jobs = default_jobs();
  app.add_option("--jobs,-j", jobs, "Worker threads (output does not depend on it)");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Validate a tagged corpus or tag raw text with an external tagger");
  std::string in_corpus, in_raw, tagger_cmd, in_tagset, in_out, in_report;
  bool allow_partial = false;
  auto* corpus_opt = ingest->add_option("--corpus", in_corpus, "Tagged corpus (JSON Lines)");
  auto* raw_opt = ingest->add_option("--raw", in_raw, "Raw text records {id, label, text} (JSON Lines)");
  corpus_opt->excludes(raw_opt);
  ingest->add_option("--tagger-cmd", tagger_cmd, "Tagger command: text on stdin, surface<TAB>tag lines on stdout")
      ->needs(raw_opt);
  ingest->add_option("--tagset", in_tagset, "Tagset file (default: 45-tag Penn Treebank)");
  ingest->add_option("--out,-o", in_out, "Corpus output (default stdout)");
  ingest->add_option("--report", in_report, "Rejection report (default stderr)");
  ingest->add_flag("--allow-partial", allow_partial, "Exit 0 even when records were rejected");

  // extract
  auto* extract = app.add_subcommand("extract", "Match similar words and compute coherence features");
  std::string ex_corpus, ex_embeddings, ex_metric = "euclidean", ex_tagset, ex_out, ex_diag;
  std::optional<std::size_t> ex_dim;
  bool ex_dedupe = false, ex_partial = false;
  extract->add_option("--corpus", ex_corpus, "Tagged corpus (JSON Lines)")->required();
  extract->add_option("--embeddings", ex_embeddings, "GloVe-format vectors")->required();
  extract->add_option("--metric", ex_metric, "euclidean | cosine")->capture_default_str();
  extract->add_option("--expected-dim", ex_dim, "Reject embeddings of any other dimension");
  extract->add_option("--tagset", ex_tagset, "Tagset file (default: 45-tag Penn Treebank)");
  extract->add_option("--out,-o", ex_out, "FeatureSet output (default stdout)");
  extract->add_option("--diagnostics", ex_diag, "Write the matcher diagnostics report here");
  extract->add_flag("--dedupe-symmetric", ex_dedupe, "Count mutual nearest pairs once per group");
  extract->add_flag("--allow-partial", ex_partial, "Skip corpus records that fail validation");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a classifier on a FeatureSet");
  std::string tr_features, tr_out;
  TrainFlags tr_flags;
  train_cmd->add_option("--features", tr_features, "FeatureSet file")->required();
  train_cmd->add_option("--out,-o", tr_out, "Model output (default stdout)");
  tr_flags.add(train_cmd);

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "Score a FeatureSet with a trained model");
  std::string pr_model, pr_features, pr_out;
  predict_cmd->add_option("--model", pr_model, "Model file")->required();
  predict_cmd->add_option("--features", pr_features, "FeatureSet file")->required();
  predict_cmd->add_option("--out,-o", pr_out, "Predictions JSON Lines (default stdout)");

  // crossval
  auto* cv_cmd = app.add_subcommand("crossval", "Stratified k-fold cross-validation: accuracy and EER");
  std::string cv_features, cv_out, cv_roc, cv_metric;
  int cv_folds = 10;
  bool cv_no_pairs = false;
  TrainFlags cv_flags;
  cv_cmd->add_option("--features", cv_features, "FeatureSet file")->required();
  cv_cmd->add_option("--folds,-k", cv_folds, "Fold count")->capture_default_str();
  cv_cmd->add_option("--metric", cv_metric, "Require features extracted with this metric");
  cv_cmd->add_flag("--no-group-pairs", cv_no_pairs, "Do not keep aligned pairs in one fold");
  cv_cmd->add_option("--out,-o", cv_out, "EvalReport output (default stdout)");
  cv_cmd->add_option("--roc", cv_roc, "Write threshold,fpr,fnr CSV of the pooled scores");
  cv_flags.add(cv_cmd);

  // rank
  auto* rank_cmd = app.add_subcommand("rank", "Rank POS-pair groups by single-group accuracy");
  std::string rk_features, rk_out;
  int rk_folds = 10;
  std::size_t rk_top = 5;
  bool rk_no_pairs = false;
  TrainFlags rk_flags;
  rank_cmd->add_option("--features", rk_features, "FeatureSet file")->required();
  rank_cmd->add_option("--folds,-k", rk_folds, "Fold count")->capture_default_str();
  rank_cmd->add_option("--top", rk_top, "Rows to report (0 = all)")->capture_default_str();
  rank_cmd->add_flag("--no-group-pairs", rk_no_pairs, "Do not keep aligned pairs in one fold");
  rank_cmd->add_option("--out,-o", rk_out, "Ranking output (default stdout)");
  rk_flags.add(rank_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsageError;
  }
  jobs = std::max(1u, jobs);
  tr_flags.hp.seed = cv_flags.hp.seed = rk_flags.hp.seed = seed;

  try {
    if (*ingest) {
      if (in_corpus.empty() == in_raw.empty()) {
        std::cerr << "ingest: exactly one of --corpus or --raw is required\n";
        return kUsageError;
      }
      if (!in_raw.empty() && tagger_cmd.empty()) {
        std::cerr << "ingest: --raw needs --tagger-cmd\n";
        return kUsageError;
      }
      const Tagset tagset = resolve_tagset(in_tagset);
      IngestResult r = in_corpus.empty() ? tag_with_external(in_raw, tagger_cmd, tagset, jobs)
                                         : load_corpus(in_corpus, tagset);
      std::ostringstream corpus_text;
      write_corpus(r.corpus, corpus_text);
      emit(in_out, corpus_text.str());
      json report = rejections_json(r);
      report["config"] = {{"corpus", in_corpus},     {"raw", in_raw},        {"tagger_cmd", tagger_cmd},
                          {"tagset", tagset.hash()}, {"allow_partial", allow_partial}};
      if (in_report.empty())
        std::cerr << report.dump(2) << '\n';
      else
        emit(in_report, report.dump(2) + "\n");
      return r.rejections.empty() || allow_partial ? kOk : kDomainError;
    }

    if (*extract) {
      const Tagset tagset = resolve_tagset(ex_tagset);
      const DistanceMetric metric = parse_metric(ex_metric);
      IngestResult in = load_corpus(ex_corpus, tagset);
      if (!in.rejections.empty()) {
        for (const auto& r : in.rejections) spdlog::error("record '{}' (line {}): {}", r.id, r.line, r.reason);
        if (!ex_partial) return kDomainError;
      }
      const EmbeddingTable table = load_embeddings(ex_embeddings, ex_dim);
      spdlog::info("loaded {} vectors of dimension {}", table.size(), table.dimension());
      const auto matches = match_corpus(in.corpus, table, {metric, ex_dedupe}, jobs);
      const FeatureLayout layout(tagset);
      const FeatureSet fs = featurize_corpus(matches, layout, in.corpus, metric, table.source_id());
      std::ostringstream text;
      write_feature_set(fs, text);
      emit(ex_out, text.str());
      if (!ex_diag.empty()) emit(ex_diag, match_diagnostics_json(matches) + "\n");
      return kOk;
    }

    if (*train_cmd) {
      const FeatureSet fs = load_feature_set(tr_features);
      const SvmModel m =
          train(fs, parse_optimizer(tr_flags.optimizer), tr_flags.hp, parse_statistic(tr_flags.statistic));
      emit(tr_out, model_to_json(m) + "\n");
      return kOk;
    }

    if (*predict_cmd) {
      const SvmModel m = load_model(pr_model);
      const FeatureSet fs = load_feature_set(pr_features);
      std::ostringstream out;
      for (const auto& p : predict(m, fs, jobs)) {
        json rec = {{"id", p.id}, {"score", p.score}, {"label", label_name(p.label)}};
        if (p.tie) rec["tie"] = true;
        out << rec.dump() << '\n';
      }
      emit(pr_out, out.str());
      return kOk;
    }

    if (*cv_cmd) {
      const FeatureSet fs = load_feature_set(cv_features);
      const Optimizer opt = parse_optimizer(cv_flags.optimizer);
      const Statistic stat = parse_statistic(cv_flags.statistic);
      const FoldPlan plan = make_folds(fs.rows, cv_folds, seed, {!cv_no_pairs});
      const EvalReport rep = cv_metric.empty() ? cross_validate(fs, opt, cv_flags.hp, plan, {stat, std::nullopt, jobs})
                                               : ablate(fs, stat, cv_metric, opt, cv_flags.hp, plan, jobs);
      emit(cv_out, rep.to_json() + "\n");
      if (!cv_roc.empty()) {
        std::ostringstream csv;
        csv << "threshold,fpr,fnr\n";
        csv.precision(17);
        for (const auto& p : roc_points(rep.pooled_scores)) csv << p.threshold << ',' << p.fpr << ',' << p.fnr << '\n';
        emit(cv_roc, csv.str());
      }
      return kOk;
    }

    if (*rank_cmd) {
      const FeatureSet fs = load_feature_set(rk_features);
      const FoldPlan plan = make_folds(fs.rows, rk_folds, seed, {!rk_no_pairs});
      const auto ranking = rank_single_features(fs, plan, parse_optimizer(rk_flags.optimizer), rk_flags.hp, rk_top, jobs);
      json out = {{"config", rk_flags.echo()}, {"ranking", json::parse(ranking_to_json(ranking))}};
      out["config"]["folds"] = rk_folds;
      out["config"]["top"] = rk_top;
      out["config"]["pairs_grouped"] = plan.pairs_grouped;
      emit(rk_out, out.dump(2) + "\n");
      return kOk;
    }
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDomainError;
  }
  return kUsageError;
}
