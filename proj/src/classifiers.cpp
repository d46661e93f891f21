// Copyright 2026 The histoexpr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Base learners of the soft-voting ensemble.

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <random>

#include "histoexpr/error.hpp"
#include "histoexpr/subtype.hpp"

namespace histoexpr {

namespace {

constexpr int kClasses = static_cast<int>(kSubtypeCount);

struct Standardizer {
  Eigen::RowVectorXd mean, scale;

  void fit(const Eigen::MatrixXd& x) {
    mean = x.colwise().mean();
    scale.resize(x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double sd = std::sqrt((x.col(j).array() - mean[j]).square().mean());
      scale[j] = sd > 0.0 ? sd : 1.0;
    }
  }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
    return (x.rowwise() - mean).array().rowwise() / scale.array();
  }
};

// Row-wise softmax of logits, numerically shifted.
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (logits.row(i).array() - m).exp();
    out.row(i) = e / e.sum();
  }
  return out;
}

Eigen::MatrixXd one_hot(std::span<const int> y) {
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(y.size()), kClasses);
  for (std::size_t i = 0; i < y.size(); ++i) t(static_cast<Eigen::Index>(i), y[i]) = 1.0;
  return t;
}

void check_labels(const Eigen::MatrixXd& x, std::span<const int> y) {
  if (static_cast<std::size_t>(x.rows()) != y.size())
    throw Error(ErrorCode::LengthMismatch, "feature rows differ from label count");
  for (int v : y)
    if (v < 0 || v >= kClasses) throw Error(ErrorCode::OutOfRange, "class label outside 0..3");
}

// Multinomial logistic regression with an L2 penalty on the weights,
// minimized by gradient descent with Armijo backtracking.
class LogisticRegression final : public ProbabilisticClassifier {
 public:
  explicit LogisticRegression(const VotingConfig& c) : inv_strength_(c.lr_l2), max_iter_(c.lr_max_iterations) {}

  void fit(const Eigen::MatrixXd& x_raw, std::span<const int> y, std::uint64_t) override {
    check_labels(x_raw, y);
    scaler_.fit(x_raw);
    const Eigen::MatrixXd x = scaler_.apply(x_raw);
    const Eigen::MatrixXd t = one_hot(y);
    const double n = static_cast<double>(x.rows());
    const double lambda = 1.0 / (inv_strength_ * n);
    w_ = Eigen::MatrixXd::Zero(x.cols(), kClasses);
    b_ = Eigen::RowVectorXd::Zero(kClasses);

    auto objective = [&](const Eigen::MatrixXd& w, const Eigen::RowVectorXd& b) {
      const Eigen::MatrixXd logits = (x * w).rowwise() + b;
      double ce = 0.0;
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double m = logits.row(i).maxCoeff();
        const double lse = m + std::log((logits.row(i).array() - m).exp().sum());
        ce += lse - (logits.row(i).array() * t.row(i).array()).sum();
      }
      return ce / n + 0.5 * lambda * w.squaredNorm();
    };

    double step = 1.0;
    double f = objective(w_, b_);
    for (int it = 0; it < max_iter_; ++it) {
      const Eigen::MatrixXd p = softmax_rows((x * w_).rowwise() + b_);
      const Eigen::MatrixXd diff = (p - t) / n;
      const Eigen::MatrixXd gw = x.transpose() * diff + lambda * w_;
      const Eigen::RowVectorXd gb = diff.colwise().sum();
      const double gnorm2 = gw.squaredNorm() + gb.squaredNorm();
      if (gnorm2 < 1e-16) break;
      step = std::min(step * 2.0, 16.0);
      while (true) {
        const Eigen::MatrixXd wn = w_ - step * gw;
        const Eigen::RowVectorXd bn = b_ - step * gb;
        const double fn = objective(wn, bn);
        if (fn <= f - 1e-4 * step * gnorm2 || step < 1e-12) {
          w_ = wn;
          b_ = bn;
          f = fn;
          break;
        }
        step *= 0.5;
      }
    }
  }

  Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& x) const override {
    return softmax_rows((scaler_.apply(x) * w_).rowwise() + b_);
  }

  std::string name() const override { return "logistic_regression"; }

 private:
  double inv_strength_;
  int max_iter_;
  Standardizer scaler_;
  Eigen::MatrixXd w_;
  Eigen::RowVectorXd b_;
};

// Gaussian discriminant with a pooled covariance and empirical priors.
class LinearDiscriminant final : public ProbabilisticClassifier {
 public:
  void fit(const Eigen::MatrixXd& x, std::span<const int> y, std::uint64_t) override {
    check_labels(x, y);
    const Eigen::Index p = x.cols();
    means_ = Eigen::MatrixXd::Zero(kClasses, p);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(kClasses);
    for (std::size_t i = 0; i < y.size(); ++i) {
      means_.row(y[i]) += x.row(static_cast<Eigen::Index>(i));
      counts[y[i]] += 1.0;
    }
    log_prior_.resize(kClasses);
    for (int k = 0; k < kClasses; ++k) {
      if (counts[k] == 0.0) throw Error(ErrorCode::ClassTooSmall, "class " + std::to_string(k) + " is empty");
      means_.row(k) /= counts[k];
      log_prior_[k] = std::log(counts[k] / static_cast<double>(y.size()));
    }
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(p, p);
    for (std::size_t i = 0; i < y.size(); ++i) {
      const Eigen::RowVectorXd d = x.row(static_cast<Eigen::Index>(i)) - means_.row(y[i]);
      cov.noalias() += d.transpose() * d;
    }
    cov /= std::max(1.0, static_cast<double>(y.size()) - kClasses);
    const double ridge = 1e-6 * std::max(cov.trace() / static_cast<double>(p), 1e-12);
    cov += ridge * Eigen::MatrixXd::Identity(p, p);
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
    coef_ = ldlt.solve(means_.transpose());  // p x K
    intercept_.resize(kClasses);
    for (int k = 0; k < kClasses; ++k)
      intercept_[k] = -0.5 * means_.row(k).dot(coef_.col(k)) + log_prior_[k];
  }

  Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& x) const override {
    return softmax_rows((x * coef_).rowwise() + intercept_);
  }

  std::string name() const override { return "lda"; }

 private:
  Eigen::MatrixXd means_;
  Eigen::MatrixXd coef_;
  Eigen::RowVectorXd intercept_;
  Eigen::RowVectorXd log_prior_;
};

// One hidden ReLU layer, softmax output, Adam on minibatches.
class Mlp final : public ProbabilisticClassifier {
 public:
  explicit Mlp(const VotingConfig& c)
      : hidden_(c.mlp_hidden), epochs_(c.mlp_epochs), lr_(c.mlp_learning_rate), batch_(c.mlp_batch_size) {}

  void fit(const Eigen::MatrixXd& x_raw, std::span<const int> y, std::uint64_t seed) override {
    check_labels(x_raw, y);
    scaler_.fit(x_raw);
    const Eigen::MatrixXd x = scaler_.apply(x_raw);
    const Eigen::MatrixXd t = one_hot(y);
    const Eigen::Index p = x.cols();
    std::mt19937_64 rng(seed);
    auto uniform = [&rng](Eigen::MatrixXd& m, double bound) {
      std::uniform_real_distribution<double> u(-bound, bound);
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
    };
    w1_.resize(p, hidden_);
    w2_.resize(hidden_, kClasses);
    uniform(w1_, std::sqrt(6.0 / static_cast<double>(p)));
    uniform(w2_, std::sqrt(6.0 / static_cast<double>(hidden_ + kClasses)));
    b1_ = Eigen::RowVectorXd::Zero(hidden_);
    b2_ = Eigen::RowVectorXd::Zero(kClasses);

    struct Moment {
      Eigen::MatrixXd m, v;
    };
    auto zeros_like = [](const auto& a) { return Moment{Eigen::MatrixXd::Zero(a.rows(), a.cols()), Eigen::MatrixXd::Zero(a.rows(), a.cols())}; };
    Moment mw1 = zeros_like(w1_), mb1 = zeros_like(b1_), mw2 = zeros_like(w2_), mb2 = zeros_like(b2_);
    std::uint64_t step = 0;
    constexpr double kAlpha = 1e-4;  // L2 on weights
    auto adam = [&](auto& param, const Eigen::MatrixXd& grad, Moment& mo) {
      mo.m = 0.9 * mo.m + 0.1 * grad;
      mo.v = 0.999 * mo.v + 0.001 * grad.cwiseProduct(grad);
      const double c1 = 1.0 - std::pow(0.9, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(0.999, static_cast<double>(step));
      param.array() -= lr_ * (mo.m.array() / c1) / ((mo.v.array() / c2).sqrt() + 1e-8);
    };

    std::vector<Eigen::Index> order(static_cast<std::size_t>(x.rows()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    for (int epoch = 0; epoch < epochs_; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_)) {
        const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(batch_), order.size() - start);
        Eigen::MatrixXd bx(static_cast<Eigen::Index>(count), p), bt(static_cast<Eigen::Index>(count), kClasses);
        for (std::size_t i = 0; i < count; ++i) {
          bx.row(static_cast<Eigen::Index>(i)) = x.row(order[start + i]);
          bt.row(static_cast<Eigen::Index>(i)) = t.row(order[start + i]);
        }
        const Eigen::MatrixXd a1 = (bx * w1_).rowwise() + b1_;
        const Eigen::MatrixXd h1 = a1.cwiseMax(0.0);
        const Eigen::MatrixXd prob = softmax_rows((h1 * w2_).rowwise() + b2_);
        const double inv = 1.0 / static_cast<double>(count);
        const Eigen::MatrixXd d2 = (prob - bt) * inv;
        const Eigen::MatrixXd gw2 = h1.transpose() * d2 + kAlpha * inv * w2_;
        const Eigen::MatrixXd gb2 = d2.colwise().sum();
        const Eigen::MatrixXd d1 = (a1.array() > 0.0).select(d2 * w2_.transpose(), 0.0);
        const Eigen::MatrixXd gw1 = bx.transpose() * d1 + kAlpha * inv * w1_;
        const Eigen::MatrixXd gb1 = d1.colwise().sum();
        ++step;
        adam(w1_, gw1, mw1);
        adam(b1_, gb1, mb1);
        adam(w2_, gw2, mw2);
        adam(b2_, gb2, mb2);
      }
    }
  }

  Eigen::MatrixXd predict_proba(const Eigen::MatrixXd& x_raw) const override {
    const Eigen::MatrixXd h1 = ((scaler_.apply(x_raw) * w1_).rowwise() + b1_).cwiseMax(0.0);
    return softmax_rows((h1 * w2_).rowwise() + b2_);
  }

  std::string name() const override { return "mlp"; }

 private:
  int hidden_, epochs_;
  double lr_;
  int batch_;
  Standardizer scaler_;
  Eigen::MatrixXd w1_, w2_;
  Eigen::RowVectorXd b1_, b2_;
};

double gini(const std::array<double, kSubtypeCount>& counts, double total) {
  if (total <= 0.0) return 0.0;
  double g = 1.0;
  for (double c : counts) g -= (c / total) * (c / total);
  return g;
}

struct TreeBuilder {
  const Eigen::MatrixXd& x;
  std::span<const int> y;
  std::mt19937_64& rng;
  int mtry;
  std::vector<RandomForest::Node>& nodes;

  int build(std::vector<Eigen::Index>& rows) {
    const int id = static_cast<int>(nodes.size());
    nodes.emplace_back();
    std::array<double, kSubtypeCount> counts{};
    for (Eigen::Index r : rows) counts[static_cast<std::size_t>(y[static_cast<std::size_t>(r)])] += 1.0;
    const double total = static_cast<double>(rows.size());
    for (std::size_t k = 0; k < kSubtypeCount; ++k) nodes[static_cast<std::size_t>(id)].proba[k] = counts[k] / total;

    const double parent = gini(counts, total);
    if (parent == 0.0 || rows.size() < 2) return id;

    std::vector<int> features(static_cast<std::size_t>(x.cols()));
    std::iota(features.begin(), features.end(), 0);
    std::shuffle(features.begin(), features.end(), rng);
    features.resize(static_cast<std::size_t>(mtry));

    int best_feature = -1;
    double best_threshold = 0.0, best_impurity = parent;
    std::vector<Eigen::Index> sorted = rows;
    for (int f : features) {
      std::sort(sorted.begin(), sorted.end(), [&](Eigen::Index a, Eigen::Index b) { return x(a, f) < x(b, f); });
      std::array<double, kSubtypeCount> left{};
      for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        left[static_cast<std::size_t>(y[static_cast<std::size_t>(sorted[i])])] += 1.0;
        const double lo = x(sorted[i], f), hi = x(sorted[i + 1], f);
        if (lo == hi) continue;
        std::array<double, kSubtypeCount> right{};
        for (std::size_t k = 0; k < kSubtypeCount; ++k) right[k] = counts[k] - left[k];
        const double nl = static_cast<double>(i + 1), nr = total - nl;
        const double impurity = (nl * gini(left, nl) + nr * gini(right, nr)) / total;
        if (impurity < best_impurity) {
          best_impurity = impurity;
          best_feature = f;
          best_threshold = 0.5 * (lo + hi);
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<Eigen::Index> left_rows, right_rows;
    for (Eigen::Index r : rows) (x(r, best_feature) <= best_threshold ? left_rows : right_rows).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    const int l = build(left_rows);
    const int r = build(right_rows);
    auto& node = nodes[static_cast<std::size_t>(id)];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = l;
    node.right = r;
    return id;
  }
};

}  // namespace

std::unique_ptr<ProbabilisticClassifier> make_logistic_regression(const VotingConfig& config) {
  return std::make_unique<LogisticRegression>(config);
}

std::unique_ptr<ProbabilisticClassifier> make_lda() { return std::make_unique<LinearDiscriminant>(); }

std::unique_ptr<ProbabilisticClassifier> make_mlp(const VotingConfig& config) {
  return std::make_unique<Mlp>(config);
}

void RandomForest::fit(const Eigen::MatrixXd& x, std::span<const int> y, std::uint64_t seed) {
  check_labels(x, y);
  std::mt19937_64 rng(seed);
  const int mtry = std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(x.cols())))));
  std::uniform_int_distribution<Eigen::Index> pick(0, x.rows() - 1);
  trees_.assign(static_cast<std::size_t>(n_trees_), {});
  for (auto& tree : trees_) {
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(x.rows()));
    for (auto& r : rows) r = pick(rng);
    TreeBuilder builder{x, y, rng, mtry, tree};
    builder.build(rows);
  }
}

Eigen::MatrixXd RandomForest::predict_proba(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(x.rows(), kClasses);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (const auto& tree : trees_) {
      int node = 0;
      while (tree[static_cast<std::size_t>(node)].feature >= 0) {
        const auto& nd = tree[static_cast<std::size_t>(node)];
        node = x(i, nd.feature) <= nd.threshold ? nd.left : nd.right;
      }
      for (int k = 0; k < kClasses; ++k) out(i, k) += tree[static_cast<std::size_t>(node)].proba[static_cast<std::size_t>(k)];
    }
  }
  return out / static_cast<double>(trees_.size());
}

std::uint64_t RandomForest::structure_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& tree : trees_) {
    mix(tree.size());
    for (const auto& n : tree) {
      mix(static_cast<std::uint64_t>(static_cast<std::int64_t>(n.feature)));
      mix(std::bit_cast<std::uint64_t>(n.threshold));
      mix(static_cast<std::uint64_t>(static_cast<std::int64_t>(n.left)));
      mix(static_cast<std::uint64_t>(static_cast<std::int64_t>(n.right)));
      for (double p : n.proba) mix(std::bit_cast<std::uint64_t>(p));
    }
  }
  return h;
}

}  // namespace histoexpr
