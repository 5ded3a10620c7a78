#include "mtdetect/classifier.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace mtdetect {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

std::string_view optimizer_name(Optimizer o) {
  switch (o) {
    case Optimizer::Linear: return "linear";
    case Optimizer::SgdSvm: return "sgd";
    case Optimizer::SmoSvm: return "smo";
  }
  return "?";
}

Optimizer parse_optimizer(std::string_view s) {
  if (s == "linear") return Optimizer::Linear;
  if (s == "sgd") return Optimizer::SgdSvm;
  if (s == "smo") return Optimizer::SmoSvm;
  throw Error("unknown optimizer '" + std::string(s) + "' (expected linear|sgd|smo)");
}

std::string_view statistic_name(Statistic s) {
  switch (s) {
    case Statistic::MeanOnly: return "mean";
    case Statistic::VarianceOnly: return "variance";
    case Statistic::Combination: return "combination";
  }
  return "?";
}

Statistic parse_statistic(std::string_view s) {
  if (s == "mean") return Statistic::MeanOnly;
  if (s == "variance") return Statistic::VarianceOnly;
  if (s == "combination") return Statistic::Combination;
  throw Error("unknown statistic '" + std::string(s) + "' (expected mean|variance|combination)");
}

std::vector<std::size_t> statistic_columns(Statistic s, std::size_t group_count) {
  std::vector<std::size_t> cols;
  const std::size_t begin = s == Statistic::VarianceOnly ? group_count : 0;
  const std::size_t end = s == Statistic::MeanOnly ? group_count : 2 * group_count;
  for (std::size_t c = begin; c < end; ++c) cols.push_back(c);
  return cols;
}

// ---------------------------------------------------------------------------
// standardization

Standardization standardize_fit(const MatrixXd& rows) {
  if (rows.rows() == 0) throw Error("standardize_fit: empty training set");
  const auto n = static_cast<double>(rows.rows());
  Standardization s;
  const auto d = static_cast<std::size_t>(rows.cols());
  s.mean.resize(d);
  s.std.resize(d);
  s.constant.resize(d);
  for (Eigen::Index j = 0; j < rows.cols(); ++j) {
    const auto col = rows.col(j);
    double sum = 0;
    for (Eigen::Index i = 0; i < rows.rows(); ++i) sum += col(i);
    const double mean = sum / n;
    double ss = 0;
    for (Eigen::Index i = 0; i < rows.rows(); ++i) ss += (col(i) - mean) * (col(i) - mean);
    const double sd = std::sqrt(ss / n);
    const bool constant = col.maxCoeff() == col.minCoeff() || sd == 0.0;
    s.mean[j] = mean;
    s.std[j] = constant ? 1.0 : sd;
    s.constant[j] = constant;
  }
  return s;
}

Standardization standardize_fit(const std::vector<CoherenceVector>& rows) {
  if (rows.empty()) throw Error("standardize_fit: empty training set");
  std::vector<std::size_t> all(rows.front().values.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return standardize_fit(design_matrix(rows, all));
}

MatrixXd standardize_apply(const Standardization& s, const MatrixXd& rows) {
  if (static_cast<std::size_t>(rows.cols()) != s.size()) throw Error("standardize_apply: width mismatch");
  MatrixXd out(rows.rows(), rows.cols());
  for (Eigen::Index j = 0; j < rows.cols(); ++j) {
    if (s.constant[j]) {
      out.col(j).setZero();
      continue;
    }
    for (Eigen::Index i = 0; i < rows.rows(); ++i) out(i, j) = (rows(i, j) - s.mean[j]) / s.std[j];
  }
  return out;
}

VectorXd label_vector(const std::vector<CoherenceVector>& rows) {
  VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].label == Label::Unlabeled) throw Error("row '" + rows[i].paragraph_id + "' has no label");
    y(static_cast<Eigen::Index>(i)) = rows[i].label == Label::Machine ? 1.0 : -1.0;
  }
  return y;
}

MatrixXd design_matrix(const std::vector<CoherenceVector>& rows, std::span<const std::size_t> columns) {
  MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& v = rows[i].values;
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (columns[c] >= v.size()) throw Error("row '" + rows[i].paragraph_id + "' is shorter than the layout");
      const double val = v[columns[c]];
      if (!std::isfinite(val))
        throw Error("non-finite feature value in row '" + rows[i].paragraph_id + "' at index " +
                    std::to_string(columns[c]));
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = val;
    }
  }
  return x;
}

// ---------------------------------------------------------------------------
// solvers

namespace {

double log1p_exp_neg(double m) {  // log(1 + exp(-m))
  return m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
}

LinearSolution train_logistic(const MatrixXd& x, const VectorXd& y, const Hyperparams& hp) {
  const Eigen::Index n = x.rows(), d = x.cols();
  MatrixXd xa(n, d + 1);
  xa.leftCols(d) = x;
  xa.col(d).setOnes();
  const double C = hp.C;

  auto objective = [&](const VectorXd& w) {
    const VectorXd m = y.cwiseProduct(xa * w);
    double loss = 0;
    for (Eigen::Index i = 0; i < n; ++i) loss += log1p_exp_neg(m(i));
    return 0.5 * w.squaredNorm() + C * loss;
  };

  VectorXd w = VectorXd::Zero(d + 1);
  VectorXd sigma(n), curvature(n);
  double f = objective(w);
  double g0_norm = -1;
  for (int it = 0; it < hp.newton_iter; ++it) {
    const VectorXd m = y.cwiseProduct(xa * w);
    for (Eigen::Index i = 0; i < n; ++i) {
      sigma(i) = 1.0 / (1.0 + std::exp(-m(i)));
      curvature(i) = sigma(i) * (1.0 - sigma(i));
    }
    const VectorXd g = w + C * (xa.transpose() * ((sigma.array() - 1.0).matrix().cwiseProduct(y)));
    const double g_norm = g.norm();
    if (g0_norm < 0) g0_norm = g_norm;
    if (g_norm <= hp.tolerance * g0_norm || g_norm == 0.0) break;

    // Conjugate gradient on H s = -g with H v = v + C X^T D X v.
    VectorXd s = VectorXd::Zero(d + 1);
    VectorXd r = -g;
    VectorXd p = r;
    double rr = r.squaredNorm();
    const int cg_max = static_cast<int>(std::min<Eigen::Index>(d + 1, 250));
    for (int k = 0; k < cg_max && std::sqrt(rr) > 0.1 * g_norm; ++k) {
      const VectorXd hp_ = p + C * (xa.transpose() * curvature.cwiseProduct(xa * p));
      const double alpha = rr / p.dot(hp_);
      s += alpha * p;
      r -= alpha * hp_;
      const double rr_new = r.squaredNorm();
      p = r + (rr_new / rr) * p;
      rr = rr_new;
    }

    const double slope = g.dot(s);
    double step = 1.0;
    double f_new = objective(w + s);
    while (f_new > f + 1e-4 * step * slope && step > 1e-12) {
      step *= 0.5;
      f_new = objective(w + step * s);
    }
    if (step <= 1e-12) break;
    w += step * s;
    f = f_new;
  }
  return {w.head(d), w(d), 0, {}};
}

LinearSolution train_pegasos(const MatrixXd& x, const VectorXd& y, const Hyperparams& hp) {
  const Eigen::Index n = x.rows(), d = x.cols();
  const double lambda = 1.0 / (hp.C * static_cast<double>(n));
  const double radius = 1.0 / std::sqrt(lambda);
  VectorXd w = VectorXd::Zero(d);
  double b = 0;
  std::mt19937_64 rng(hp.seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  double t = 0;
  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    seeded_shuffle(order, rng);
    for (Eigen::Index i : order) {
      t += 1;
      const double eta = 1.0 / (lambda * t);
      const double margin = y(i) * (w.dot(x.row(i)) + b);
      const double shrink = 1.0 - 1.0 / t;
      w *= shrink;
      b *= shrink;
      if (margin < 1.0) {
        w += (eta * y(i)) * x.row(i).transpose();
        b += eta * y(i);
      }
      const double norm = std::sqrt(w.squaredNorm() + b * b);
      if (norm > radius) {
        w *= radius / norm;
        b *= radius / norm;
      }
    }
  }
  return {w, b, 0, {}};
}

// Kernel columns of the linear kernel; the full Gram matrix is kept when it fits.
class LinearKernel {
 public:
  explicit LinearKernel(const MatrixXd& x) : x_(x) {
    const Eigen::Index n = x.rows();
    full_ = n <= 6000 && x.cols() >= 16;
    if (full_) {
      gram_.resize(n, n);
      gram_.noalias() = x * x.transpose();
      diag_ = gram_.diagonal();
    } else {
      diag_ = x.rowwise().squaredNorm();
      cache_[0].resize(n);
      cache_[1].resize(n);
    }
  }

  double diag(Eigen::Index i) const { return diag_(i); }

  /// Column i; `slot` picks which scratch buffer is used when not cached.
  const double* column(Eigen::Index i, int slot) {
    if (full_) return gram_.col(i).data();
    if (cached_[slot] != i) {
      cache_[slot].noalias() = x_ * x_.row(i).transpose();
      cached_[slot] = i;
    }
    return cache_[slot].data();
  }

 private:
  const MatrixXd& x_;
  bool full_ = false;
  MatrixXd gram_;
  VectorXd diag_;
  VectorXd cache_[2];
  Eigen::Index cached_[2] = {-1, -1};
};

LinearSolution train_smo(const MatrixXd& x, const VectorXd& y, const Hyperparams& hp, bool record) {
  constexpr double kTau = 1e-12;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const Eigen::Index n = x.rows();
  const double C = hp.C;
  LinearKernel kernel(x);
  VectorXd alpha = VectorXd::Zero(n);
  VectorXd grad = VectorXd::Constant(n, -1.0);  // Q alpha - e

  auto upper = [&](Eigen::Index t) { return alpha(t) >= C; };
  auto lower = [&](Eigen::Index t) { return alpha(t) <= 0.0; };
  auto dual = [&] {
    double f = 0;
    for (Eigen::Index t = 0; t < n; ++t) f += alpha(t) * (grad(t) - 1.0);
    return -0.5 * f;
  };

  LinearSolution sol;
  while (sol.iterations < hp.max_iter) {
    // Maximal violating i, then j by second-order gain.
    double gmax = -kInf, gmax2 = -kInf;
    Eigen::Index i = -1, j = -1;
    for (Eigen::Index t = 0; t < n; ++t) {
      if (y(t) > 0) {
        if (!upper(t) && -grad(t) >= gmax) {
          gmax = -grad(t);
          i = t;
        }
      } else if (!lower(t) && grad(t) >= gmax) {
        gmax = grad(t);
        i = t;
      }
    }
    if (i < 0) break;
    const double* ki = kernel.column(i, 0);
    double best = kInf;
    for (Eigen::Index t = 0; t < n; ++t) {
      double grad_diff, quad;
      if (y(t) > 0) {
        if (lower(t)) continue;
        gmax2 = std::max(gmax2, grad(t));
        grad_diff = gmax + grad(t);
        // Q_it = y_i y_t K_it
        quad = kernel.diag(i) + kernel.diag(t) - 2.0 * y(i) * y(i) * y(t) * ki[t];
      } else {
        if (upper(t)) continue;
        gmax2 = std::max(gmax2, -grad(t));
        grad_diff = gmax - grad(t);
        quad = kernel.diag(i) + kernel.diag(t) + 2.0 * y(i) * y(i) * y(t) * ki[t];
      }
      if (grad_diff <= 0) continue;
      const double gain = -(grad_diff * grad_diff) / (quad > 0 ? quad : kTau);
      if (gain <= best) {
        best = gain;
        j = t;
      }
    }
    if (gmax + gmax2 < hp.tolerance || j < 0) break;

    const double* kj = kernel.column(j, 1);
    ki = kernel.column(i, 0);
    const double qij = y(i) * y(j) * ki[j];
    const double qii = kernel.diag(i), qjj = kernel.diag(j);
    const double old_i = alpha(i), old_j = alpha(j);
    if (y(i) != y(j)) {
      double quad = qii + qjj + 2 * qij;
      if (quad <= 0) quad = kTau;
      const double delta = (-grad(i) - grad(j)) / quad;
      const double diff = alpha(i) - alpha(j);
      alpha(i) += delta;
      alpha(j) += delta;
      if (diff > 0) {
        if (alpha(j) < 0) {
          alpha(j) = 0;
          alpha(i) = diff;
        }
      } else if (alpha(i) < 0) {
        alpha(i) = 0;
        alpha(j) = -diff;
      }
      if (diff > 0) {
        if (alpha(i) > C) {
          alpha(i) = C;
          alpha(j) = C - diff;
        }
      } else if (alpha(j) > C) {
        alpha(j) = C;
        alpha(i) = C + diff;
      }
    } else {
      double quad = qii + qjj - 2 * qij;
      if (quad <= 0) quad = kTau;
      const double delta = (grad(i) - grad(j)) / quad;
      const double sum = alpha(i) + alpha(j);
      alpha(i) -= delta;
      alpha(j) += delta;
      if (sum > C) {
        if (alpha(i) > C) {
          alpha(i) = C;
          alpha(j) = sum - C;
        }
      } else if (alpha(j) < 0) {
        alpha(j) = 0;
        alpha(i) = sum;
      }
      if (sum > C) {
        if (alpha(j) > C) {
          alpha(j) = C;
          alpha(i) = sum - C;
        }
      } else if (alpha(i) < 0) {
        alpha(i) = 0;
        alpha(j) = sum;
      }
    }
    const double di = alpha(i) - old_i, dj = alpha(j) - old_j;
    for (Eigen::Index t = 0; t < n; ++t) grad(t) += y(t) * (y(i) * ki[t] * di + y(j) * kj[t] * dj);
    ++sol.iterations;
    if (record) sol.dual_objective.push_back(dual());
  }

  // Bias from free vectors, or the midpoint of the feasible interval.
  double ub = kInf, lb = -kInf, sum_free = 0;
  int free = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double yg = y(t) * grad(t);
    if (upper(t)) {
      if (y(t) < 0)
        ub = std::min(ub, yg);
      else
        lb = std::max(lb, yg);
    } else if (lower(t)) {
      if (y(t) > 0)
        ub = std::min(ub, yg);
      else
        lb = std::max(lb, yg);
    } else {
      ++free;
      sum_free += yg;
    }
  }
  const double rho = free > 0 ? sum_free / free : (ub + lb) / 2;
  sol.weights = x.transpose() * alpha.cwiseProduct(y);
  sol.bias = -rho;
  return sol;
}

}  // namespace

LinearSolution train_standardized(const MatrixXd& x, const VectorXd& y, Optimizer optimizer,
                                  const Hyperparams& hp, const TrainOptions& options) {
  if (x.rows() != y.size()) throw Error("train: row/label count mismatch");
  if (!(hp.C > 0)) throw Error("train: C must be positive");
  if (hp.epochs <= 0 || hp.max_iter <= 0 || hp.newton_iter <= 0 || !(hp.tolerance > 0))
    throw Error("train: iteration budgets and tolerance must be positive");
  bool pos = false, neg = false;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y(i) == 1.0)
      pos = true;
    else if (y(i) == -1.0)
      neg = true;
    else
      throw Error("train: labels must be -1 or +1");
  }
  if (!pos || !neg) throw Error("train: both classes must be present");
  switch (optimizer) {
    case Optimizer::Linear: return train_logistic(x, y, hp);
    case Optimizer::SgdSvm: return train_pegasos(x, y, hp);
    case Optimizer::SmoSvm: return train_smo(x, y, hp, options.record_dual_objective);
  }
  throw Error("train: unknown optimizer");
}

SvmModel train(const FeatureSet& features, Optimizer optimizer, const Hyperparams& hp, Statistic statistic) {
  const auto& rows = features.rows;
  const std::size_t len = features.total_len();
  const auto cols = statistic_columns(statistic, features.header.group_count);
  const VectorXd y = label_vector(rows);
  const MatrixXd x = design_matrix(rows, cols);

  SvmModel m;
  m.optimizer = optimizer;
  m.hyperparams = hp;
  m.statistic = statistic;
  m.binding = features.header;
  m.trained_rows = rows.size();
  for (Eigen::Index i = 0; i < y.size(); ++i) (y(i) > 0 ? m.trained_machine : m.trained_human)++;
  if (!m.trained_machine || !m.trained_human) throw Error("train: both classes must be present");

  const Standardization sub = standardize_fit(x);
  m.standardization.mean.assign(len, 0.0);
  m.standardization.std.assign(len, 1.0);
  m.standardization.constant.assign(len, false);
  m.weights.assign(len, 0.0);
  for (std::size_t c = 0; c < cols.size(); ++c) {
    m.standardization.mean[cols[c]] = sub.mean[c];
    m.standardization.std[cols[c]] = sub.std[c];
    m.standardization.constant[cols[c]] = sub.constant[c];
  }
  if (std::all_of(sub.constant.begin(), sub.constant.end(), [](bool b) { return b; })) {
    // Nothing to learn from: predict the majority class, humans on a tie.
    m.bias = m.trained_machine > m.trained_human ? 1.0 : -1.0;
    return m;
  }
  const LinearSolution sol = train_standardized(standardize_apply(sub, x), y, optimizer, hp);
  for (std::size_t c = 0; c < cols.size(); ++c) m.weights[cols[c]] = sol.weights(static_cast<Eigen::Index>(c));
  m.bias = sol.bias;
  return m;
}

double decision_score(const SvmModel& model, std::span<const double> values) {
  if (values.size() != model.weights.size()) throw LayoutMismatch("feature row length does not match the model");
  const auto& s = model.standardization;
  double score = 0;
  for (std::size_t j = 0; j < values.size(); ++j) {
    if (model.weights[j] == 0.0 || s.constant[j]) continue;
    score += model.weights[j] * ((values[j] - s.mean[j]) / s.std[j]);
  }
  return score + model.bias;
}

std::vector<Prediction> predict(const SvmModel& model, const FeatureSet& features, unsigned jobs) {
  if (!model.binding.compatible(features.header))
    throw LayoutMismatch("model is bound to tagset " + model.binding.tagset_hash + "/" + model.binding.metric + "/" +
                         model.binding.embedding_id + " but features use " + features.header.tagset_hash + "/" +
                         features.header.metric + "/" + features.header.embedding_id);
  const auto& rows = features.rows;
  std::vector<Prediction> out(rows.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < rows.size();) {
      const double s = decision_score(model, rows[i].values);
      out[i] = {rows[i].paragraph_id, s, s > 0 ? Label::Machine : Label::Human, s == 0.0};
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < std::max(1u, jobs); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return out;
}

// ---------------------------------------------------------------------------
// persistence

namespace {
constexpr int kModelSchema = 1;
}

std::string model_to_json(const SvmModel& m) {
  std::vector<int> constant(m.standardization.constant.begin(), m.standardization.constant.end());
  json j = {
      {"schema_version", kModelSchema},
      {"optimizer", optimizer_name(m.optimizer)},
      {"statistic", statistic_name(m.statistic)},
      {"hyperparams",
       {{"C", m.hyperparams.C},
        {"epochs", m.hyperparams.epochs},
        {"max_iter", m.hyperparams.max_iter},
        {"tolerance", m.hyperparams.tolerance},
        {"newton_iter", m.hyperparams.newton_iter},
        {"seed", m.hyperparams.seed}}},
      {"standardization", {{"mean", m.standardization.mean}, {"std", m.standardization.std}, {"constant", constant}}},
      {"weights", m.weights},
      {"bias", m.bias},
      {"tagset_hash", m.binding.tagset_hash},
      {"metric", m.binding.metric},
      {"embedding_id", m.binding.embedding_id},
      {"group_count", m.binding.group_count},
      {"tags", m.binding.tags},
      {"trained_on", {{"rows", m.trained_rows}, {"human", m.trained_human}, {"machine", m.trained_machine}}}};
  return j.dump();
}

SvmModel model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("model file is not valid JSON: ") + e.what(), 0);
  }
  SvmModel m;
  try {
    const int version = j.at("schema_version").get<int>();
    if (version != kModelSchema)
      throw ParseError("unsupported model schema_version " + std::to_string(version), 0);
    m.optimizer = parse_optimizer(j.at("optimizer").get<std::string>());
    m.statistic = parse_statistic(j.at("statistic").get<std::string>());
    const auto& h = j.at("hyperparams");
    m.hyperparams.C = h.at("C").get<double>();
    m.hyperparams.epochs = h.at("epochs").get<int>();
    m.hyperparams.max_iter = h.at("max_iter").get<std::int64_t>();
    m.hyperparams.tolerance = h.at("tolerance").get<double>();
    m.hyperparams.newton_iter = h.at("newton_iter").get<int>();
    m.hyperparams.seed = h.at("seed").get<std::uint64_t>();
    const auto& s = j.at("standardization");
    m.standardization.mean = s.at("mean").get<std::vector<double>>();
    m.standardization.std = s.at("std").get<std::vector<double>>();
    for (int c : s.at("constant").get<std::vector<int>>()) m.standardization.constant.push_back(c != 0);
    m.weights = j.at("weights").get<std::vector<double>>();
    m.bias = j.at("bias").get<double>();
    m.binding.tagset_hash = j.at("tagset_hash").get<std::string>();
    m.binding.metric = j.at("metric").get<std::string>();
    m.binding.embedding_id = j.at("embedding_id").get<std::string>();
    m.binding.group_count = j.at("group_count").get<std::size_t>();
    m.binding.tags = j.at("tags").get<std::vector<std::string>>();
    const auto& t = j.at("trained_on");
    m.trained_rows = t.at("rows").get<std::size_t>();
    m.trained_human = t.at("human").get<std::size_t>();
    m.trained_machine = t.at("machine").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("incomplete model file: ") + e.what(), 0);
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(std::string("invalid model file: ") + e.what(), 0);
  }
  const std::size_t len = 2 * m.binding.group_count;
  if (m.weights.size() != len || m.standardization.mean.size() != len || m.standardization.std.size() != len ||
      m.standardization.constant.size() != len)
    throw ParseError("model vectors do not match group_count", 0);
  return m;
}

void save_model(const SvmModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << model_to_json(model) << '\n';
  if (!out) throw IoError("write error on '" + path.string() + "'");
}

SvmModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return model_from_json(ss.str());
}

}  // namespace mtdetect
