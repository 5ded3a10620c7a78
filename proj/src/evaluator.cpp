#include "mtdetect/evaluator.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <thread>

#include "json.hpp"

namespace mtdetect {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

std::vector<std::size_t> FoldPlan::test_rows(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignments.size(); ++i)
    if (assignments[i] == fold) out.push_back(i);
  return out;
}

std::vector<std::size_t> FoldPlan::train_rows(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignments.size(); ++i)
    if (assignments[i] != fold) out.push_back(i);
  return out;
}

FoldPlan make_folds(const std::vector<CoherenceVector>& rows, int k, std::uint64_t seed, const FoldOptions& options) {
  if (k < 2) throw Error("make_folds: k must be at least 2");
  std::size_t class_count[2] = {0, 0};  // human, machine
  for (const auto& r : rows) {
    if (r.label == Label::Unlabeled) throw Error("make_folds: row '" + r.paragraph_id + "' has no label");
    ++class_count[r.label == Label::Machine];
  }
  if (class_count[0] < static_cast<std::size_t>(k) || class_count[1] < static_cast<std::size_t>(k))
    throw Error("make_folds: each class needs at least k = " + std::to_string(k) + " rows (have " +
                std::to_string(class_count[0]) + " human, " + std::to_string(class_count[1]) + " machine)");

  // Units of rows that must share a fold.
  std::vector<std::vector<std::size_t>> units;
  std::map<std::string, std::size_t> unit_of_pair;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (options.group_pairs && rows[i].pair) {
      auto [it, fresh] = unit_of_pair.try_emplace(*rows[i].pair, units.size());
      if (fresh) units.emplace_back();
      units[it->second].push_back(i);
    } else {
      units.push_back({i});
    }
  }

  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.stratified = true;
  plan.assignments.assign(rows.size(), -1);
  plan.pairs_grouped = std::any_of(units.begin(), units.end(), [](const auto& u) { return u.size() > 1; });

  std::mt19937_64 rng(seed);
  seeded_shuffle(units, rng);
  std::stable_partition(units.begin(), units.end(), [](const auto& u) { return u.size() > 1; });

  std::vector<std::array<std::size_t, 2>> counts(static_cast<std::size_t>(k), {0, 0});
  for (const auto& unit : units) {
    std::size_t need[2] = {0, 0};
    for (std::size_t r : unit) ++need[rows[r].label == Label::Machine];
    int best = 0;
    auto key = [&](int f) {
      const auto& c = counts[static_cast<std::size_t>(f)];
      std::size_t worst = 0;
      for (int cls = 0; cls < 2; ++cls)
        if (need[cls]) worst = std::max(worst, c[cls] + need[cls]);
      return std::pair{worst, c[0] + c[1]};
    };
    for (int f = 1; f < k; ++f)
      if (key(f) < key(best)) best = f;
    for (std::size_t r : unit) plan.assignments[r] = best;
    counts[static_cast<std::size_t>(best)][0] += need[0];
    counts[static_cast<std::size_t>(best)][1] += need[1];
  }
  return plan;
}

std::vector<RocPoint> roc_points(std::span<const ScoredLabel> scores) {
  std::size_t humans = 0, machines = 0;
  for (const auto& s : scores) {
    if (s.label == Label::Unlabeled) throw Error("roc: unlabeled score");
    if (std::isnan(s.score)) throw Error("roc: NaN score");
    (s.label == Label::Machine ? machines : humans)++;
  }
  if (!humans || !machines) throw Error("equal error rate needs both classes");
  std::vector<ScoredLabel> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.score < b.score; });

  std::vector<RocPoint> pts;
  // Rows below the current threshold.
  std::size_t humans_below = 0, machines_below = 0;
  const double h = static_cast<double>(humans), m = static_cast<double>(machines);
  for (std::size_t i = 0; i < sorted.size();) {
    const double t = sorted[i].score;
    pts.push_back({t, static_cast<double>(humans - humans_below) / h, static_cast<double>(machines_below) / m});
    for (; i < sorted.size() && sorted[i].score == t; ++i)
      (sorted[i].label == Label::Machine ? machines_below : humans_below)++;
  }
  pts.push_back({std::numeric_limits<double>::infinity(), 0.0, 1.0});
  return pts;
}

double compute_eer(std::span<const ScoredLabel> scores) {
  const auto pts = roc_points(scores);
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const double diff = pts[k].fpr - pts[k].fnr;
    if (diff > 0) continue;
    if (diff == 0 || k == 0) return pts[k].fpr;
    const double prev = pts[k - 1].fpr - pts[k - 1].fnr;
    const double lambda = prev / (prev - diff);
    return pts[k - 1].fpr + lambda * (pts[k].fpr - pts[k - 1].fpr);
  }
  return pts.back().fpr;  // unreachable: the +inf point has diff = -1
}

namespace {

MatrixXd take_rows(const MatrixXd& x, const std::vector<std::size_t>& idx) {
  MatrixXd out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(idx[r]));
  return out;
}

// Out-of-fold decision scores for every row of x.
std::vector<double> out_of_fold_scores(const MatrixXd& x, const VectorXd& y, const FoldPlan& plan, Optimizer optimizer,
                                       const Hyperparams& hp, unsigned jobs) {
  std::vector<double> scores(static_cast<std::size_t>(x.rows()), 0.0);
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (int f; !failed.load() && (f = next.fetch_add(1)) < plan.k;) {
      try {
        const auto train_idx = plan.train_rows(f);
        const auto test_idx = plan.test_rows(f);
        const MatrixXd xtr = take_rows(x, train_idx);
        VectorXd ytr(static_cast<Eigen::Index>(train_idx.size()));
        for (std::size_t r = 0; r < train_idx.size(); ++r)
          ytr(static_cast<Eigen::Index>(r)) = y(static_cast<Eigen::Index>(train_idx[r]));
        const Standardization st = standardize_fit(xtr);
        VectorXd w = VectorXd::Zero(x.cols());
        double b;
        if (std::all_of(st.constant.begin(), st.constant.end(), [](bool c) { return c; })) {
          const double pos = (ytr.array() > 0).count();
          b = pos > static_cast<double>(ytr.size()) - pos ? 1.0 : -1.0;
        } else {
          const LinearSolution sol = train_standardized(standardize_apply(st, xtr), ytr, optimizer, hp);
          w = sol.weights;
          b = sol.bias;
        }
        for (std::size_t r : test_idx) {
          double s = 0;
          for (Eigen::Index c = 0; c < x.cols(); ++c) {
            if (w(c) == 0.0 || st.constant[c]) continue;
            s += w(c) * ((x(static_cast<Eigen::Index>(r), c) - st.mean[c]) / st.std[c]);
          }
          scores[r] = s + b;
        }
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const unsigned n = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(plan.k)));
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return scores;
}

void tally(Confusion& c, Label truth, double score) {
  const bool says_machine = score > 0;
  if (truth == Label::Machine)
    (says_machine ? c.tp : c.fn)++;
  else
    (says_machine ? c.fp : c.tn)++;
}

double accuracy_of(const Confusion& c) {
  return c.total() ? static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total()) : 0.0;
}

void check_plan(const FeatureSet& features, const FoldPlan& plan) {
  if (plan.assignments.size() != features.rows.size())
    throw Error("fold plan covers " + std::to_string(plan.assignments.size()) + " rows, features have " +
                std::to_string(features.rows.size()));
  for (int f : plan.assignments)
    if (f < 0 || f >= plan.k) throw Error("fold plan has an out-of-range assignment");
}

double cv_accuracy(const MatrixXd& x, const VectorXd& y, const std::vector<CoherenceVector>& rows,
                   const FoldPlan& plan, Optimizer optimizer, const Hyperparams& hp) {
  const auto scores = out_of_fold_scores(x, y, plan, optimizer, hp, 1);
  Confusion c;
  for (std::size_t i = 0; i < rows.size(); ++i) tally(c, rows[i].label, scores[i]);
  return accuracy_of(c);
}

}  // namespace

EvalReport cross_validate(const FeatureSet& features, Optimizer optimizer, const Hyperparams& hp, const FoldPlan& plan,
                          const CvOptions& options) {
  check_plan(features, plan);
  const auto cols = options.columns ? *options.columns : statistic_columns(options.statistic, features.header.group_count);
  const MatrixXd x = design_matrix(features.rows, cols);
  const VectorXd y = label_vector(features.rows);
  const auto scores = out_of_fold_scores(x, y, plan, optimizer, hp, options.jobs);

  EvalReport rep;
  rep.optimizer = optimizer;
  rep.statistic = options.statistic;
  rep.metric = features.header.metric;
  rep.effective_dimension = cols.size();
  rep.k = plan.k;
  rep.seed = plan.seed;
  rep.pairs_grouped = plan.pairs_grouped;
  rep.hyperparams = hp;
  rep.per_fold.resize(static_cast<std::size_t>(plan.k));
  std::vector<std::vector<ScoredLabel>> fold_scores(static_cast<std::size_t>(plan.k));
  for (std::size_t i = 0; i < features.rows.size(); ++i) {
    const auto& row = features.rows[i];
    const auto f = static_cast<std::size_t>(plan.assignments[i]);
    tally(rep.confusion, row.label, scores[i]);
    tally(rep.per_fold[f].confusion, row.label, scores[i]);
    ++rep.per_fold[f].rows;
    rep.pooled_scores.push_back({scores[i], row.label});
    rep.pooled_ids.push_back(row.paragraph_id);
    fold_scores[f].push_back({scores[i], row.label});
  }
  rep.accuracy = accuracy_of(rep.confusion);
  rep.eer = compute_eer(rep.pooled_scores);
  for (std::size_t f = 0; f < fold_scores.size(); ++f) {
    auto& fm = rep.per_fold[f];
    fm.accuracy = accuracy_of(fm.confusion);
    const bool both = fm.confusion.tp + fm.confusion.fn > 0 && fm.confusion.tn + fm.confusion.fp > 0;
    fm.eer = both ? compute_eer(fold_scores[f]) : std::numeric_limits<double>::quiet_NaN();
  }
  return rep;
}

EvalReport ablate(const FeatureSet& features, Statistic which, const std::string& metric_tag, Optimizer optimizer,
                  const Hyperparams& hp, const FoldPlan& plan, unsigned jobs) {
  if (features.header.metric != metric_tag)
    throw LayoutMismatch("features were extracted with metric '" + features.header.metric + "', not '" + metric_tag +
                         "'");
  CvOptions opt;
  opt.statistic = which;
  opt.jobs = jobs;
  return cross_validate(features, optimizer, hp, plan, opt);
}

std::vector<RankedPair> rank_single_features(const FeatureSet& features, const FoldPlan& plan, Optimizer optimizer,
                                             const Hyperparams& hp, std::size_t top, unsigned jobs) {
  check_plan(features, plan);
  const std::size_t G = features.header.group_count;
  const VectorXd y = label_vector(features.rows);
  std::optional<FeatureLayout> layout;
  if (!features.header.tags.empty()) layout.emplace(Tagset(features.header.tags));

  std::vector<RankedPair> ranked(G);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (std::size_t g; !failed.load() && (g = next.fetch_add(1)) < G;) {
      try {
        const std::size_t both[2] = {g, G + g};
        const MatrixXd x = design_matrix(features.rows, both);
        RankedPair& r = ranked[g];
        r.group = g;
        r.name = layout ? layout->pair_name(g) : "g" + std::to_string(g);
        r.mean_accuracy = cv_accuracy(x.leftCols(1), y, features.rows, plan, optimizer, hp);
        r.variance_accuracy = cv_accuracy(x.rightCols(1), y, features.rows, plan, optimizer, hp);
        r.combination_accuracy = cv_accuracy(x, y, features.rows, plan, optimizer, hp);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < std::max(1u, jobs); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.combination_accuracy > b.combination_accuracy; });
  if (top && ranked.size() > top) ranked.resize(top);
  return ranked;
}

namespace {

json nan_to_null(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

json confusion_json(const Confusion& c) { return {{"tp", c.tp}, {"tn", c.tn}, {"fp", c.fp}, {"fn", c.fn}}; }

}  // namespace

std::string EvalReport::to_json() const {
  json folds = json::array();
  for (const auto& f : per_fold)
    folds.push_back({{"rows", f.rows}, {"accuracy", f.accuracy}, {"eer", nan_to_null(f.eer)},
                     {"confusion", confusion_json(f.confusion)}});
  json j = {{"accuracy", accuracy},
            {"eer", eer},
            {"eer_mode", "pooled"},
            {"confusion", confusion_json(confusion)},
            {"per_fold", std::move(folds)},
            {"config",
             {{"optimizer", optimizer_name(optimizer)},
              {"statistic", statistic_name(statistic)},
              {"metric", metric},
              {"effective_dimension", effective_dimension},
              {"folds", k},
              {"seed", seed},
              {"pairs_grouped", pairs_grouped},
              {"hyperparams",
               {{"C", hyperparams.C},
                {"epochs", hyperparams.epochs},
                {"max_iter", hyperparams.max_iter},
                {"tolerance", hyperparams.tolerance},
                {"newton_iter", hyperparams.newton_iter},
                {"seed", hyperparams.seed}}}}}};
  return j.dump(2);
}

std::string ranking_to_json(const std::vector<RankedPair>& ranking) {
  json arr = json::array();
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    const auto& r = ranking[i];
    arr.push_back({{"rank", i + 1},
                   {"pair", r.name},
                   {"group", r.group},
                   {"mean_accuracy", r.mean_accuracy},
                   {"variance_accuracy", r.variance_accuracy},
                   {"combination_accuracy", r.combination_accuracy}});
  }
  return arr.dump(2);
}

}  // namespace mtdetect
