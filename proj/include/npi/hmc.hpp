#pragma once

// No-U-turn Hamiltonian Monte Carlo (multinomial trajectory sampling with the
// generalised U-turn criterion), dual averaging step-size adaptation and
// windowed metric adaptation during warmup.
//
// The inverse metric is diagonal plus an optional low-rank correction:
//   Sigma = D^(1/2) (I + V diag(1/lambda - 1) V^T) D^(1/2)
// D holds regularised sample variances from the current window. V and lambda
// are the stiffest eigenpairs of the Hessian of -log p in D-whitened
// coordinates at the window's last state, found by randomized subspace
// iteration on finite-difference Hessian-vector products.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "npi/distributions.hpp"
#include "npi/errors.hpp"

namespace npi {

/// log p(q) with gradient written into `grad`; -inf marks a rejected point.
using LogDensityFn = std::function<double(std::span<const double> q, std::span<double> grad)>;

struct SamplerSettings {
  int warmup = 500;
  int samples = 1250;
  int max_depth = 10;
  int initial_max_depth = 7;  ///< depth cap until the first metric window closes
  double target_accept = 0.8;
  double initial_step_size = 0.1;
  double max_delta_h = 1000.0;  ///< energy error beyond which a trajectory is divergent
  int metric_rank = 0;          ///< maximum low-rank directions in the metric; 0 keeps it diagonal
  double stiffness_threshold = 4.0;  ///< whitened curvature above which a direction is corrected
  int curvature_anchors = 4;         ///< window states the curvature is averaged over
};

struct ChainResult {
  std::size_t dimension = 0;
  std::vector<double> draws;  ///< samples x dimension, unconstrained
  std::vector<std::uint8_t> divergent;
  std::vector<int> tree_depth;
  std::vector<int> n_leapfrog;
  std::vector<double> accept_stat;
  double step_size = 0.0;
  std::vector<double> inv_metric;  ///< diagonal part
  std::size_t metric_rank = 0;
  std::size_t warmup_divergences = 0;

  std::size_t n_samples() const { return dimension ? draws.size() / dimension : 0; }
  std::size_t divergences() const {
    return static_cast<std::size_t>(std::count(divergent.begin(), divergent.end(), 1));
  }
};

namespace detail {

struct PhasePoint {
  std::vector<double> q, p, g;
  std::vector<double> v;   ///< Sigma p
  std::vector<double> sg;  ///< Sigma g, so v can be advanced without another product
  double log_p = -INFINITY;
};

/// Position part of a phase point; all a trajectory needs to keep for its
/// multinomial proposal.
struct Position {
  std::vector<double> q, g, sg;
  double log_p = -INFINITY;

  void assign(const PhasePoint& z) {
    q = z.q;
    g = z.g;
    sg = z.sg;
    log_p = z.log_p;
  }
  void restore_into(PhasePoint& z) const {
    z.q = q;
    z.g = g;
    z.sg = sg;
    z.log_p = log_p;
  }
};

/// Welford running variance.
class VarianceEstimator {
 public:
  explicit VarianceEstimator(std::size_t n) : mean_(n, 0.0), m2_(n, 0.0) {}
  void add(std::span<const double> x) {
    ++count_;
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double delta = x[k] - mean_[k];
      mean_[k] += delta / static_cast<double>(count_);
      m2_[k] += delta * (x[k] - mean_[k]);
    }
  }
  std::size_t count() const { return count_; }
  std::vector<double> variance() const {
    std::vector<double> v(m2_.size());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = m2_[k] / static_cast<double>(count_ - 1);
    return v;
  }
  void restart() {
    count_ = 0;
    std::fill(mean_.begin(), mean_.end(), 0.0);
    std::fill(m2_.begin(), m2_.end(), 0.0);
  }

 private:
  std::size_t count_ = 0;
  std::vector<double> mean_, m2_;
};

/// Diagonal-plus-low-rank inverse metric.
class Metric {
 public:
  explicit Metric(std::size_t n) : diag_(n, 1.0), sqrt_diag_(n, 1.0), work_(static_cast<Eigen::Index>(n)) {}

  void set_diagonal(std::vector<double> d) {
    diag_ = std::move(d);
    for (std::size_t k = 0; k < diag_.size(); ++k) sqrt_diag_[k] = std::sqrt(diag_[k]);
    clear_low_rank();
  }
  /// `basis` has orthonormal columns; `curvature` > 0 per column.
  void set_low_rank(Eigen::MatrixXd basis, const Eigen::VectorXd& curvature) {
    basis_ = std::move(basis);
    velocity_scale_ = curvature.cwiseInverse().array() - 1.0;
    momentum_scale_ = curvature.cwiseSqrt().array() - 1.0;
  }
  void clear_low_rank() {
    basis_.resize(0, 0);
    velocity_scale_.resize(0);
    momentum_scale_.resize(0);
  }
  std::size_t rank() const { return static_cast<std::size_t>(basis_.cols()); }
  const std::vector<double>& diagonal() const { return diag_; }
  std::span<const double> sqrt_diagonal() const { return sqrt_diag_; }

  /// out = Sigma p.
  void velocity(const std::vector<double>& p, std::vector<double>& out) {
    out.resize(p.size());
    if (rank() == 0) {
      for (std::size_t k = 0; k < p.size(); ++k) out[k] = diag_[k] * p[k];
      return;
    }
    for (std::size_t k = 0; k < p.size(); ++k) work_[static_cast<Eigen::Index>(k)] = sqrt_diag_[k] * p[k];
    const Eigen::VectorXd t = velocity_scale_.cwiseProduct(basis_.transpose() * work_);
    work_.noalias() += basis_ * t;
    for (std::size_t k = 0; k < p.size(); ++k) out[k] = sqrt_diag_[k] * work_[static_cast<Eigen::Index>(k)];
  }
  /// Maps a standard normal vector to a momentum draw with covariance Sigma^-1.
  void momentum(std::vector<double>& z) {
    if (rank() == 0) {
      for (std::size_t k = 0; k < z.size(); ++k) z[k] /= sqrt_diag_[k];
      return;
    }
    const Eigen::Map<Eigen::VectorXd> zz(z.data(), static_cast<Eigen::Index>(z.size()));
    const Eigen::VectorXd t = momentum_scale_.cwiseProduct(basis_.transpose() * zz);
    work_ = zz;
    work_.noalias() += basis_ * t;
    for (std::size_t k = 0; k < z.size(); ++k) z[k] = work_[static_cast<Eigen::Index>(k)] / sqrt_diag_[k];
  }

 private:
  std::vector<double> diag_, sqrt_diag_;
  Eigen::MatrixXd basis_;
  Eigen::VectorXd velocity_scale_, momentum_scale_;
  Eigen::VectorXd work_;
};

class DualAveraging {
 public:
  void restart(double step) {
    mu_ = std::log(10.0 * step);
    counter_ = 0;
    s_bar_ = 0.0;
    x_bar_ = 0.0;
  }
  double learn(double accept_stat, double delta) {
    ++counter_;
    accept_stat = std::min(1.0, accept_stat);
    const double eta = 1.0 / (counter_ + kT0);
    s_bar_ = (1.0 - eta) * s_bar_ + eta * (delta - accept_stat);
    const double x = mu_ - s_bar_ * std::sqrt(counter_) / kGamma;
    const double x_eta = std::pow(counter_, -kKappa);
    x_bar_ = (1.0 - x_eta) * x_bar_ + x_eta * x;
    return std::exp(x);
  }
  double final_step() const { return std::exp(x_bar_); }

 private:
  static constexpr double kGamma = 0.05, kKappa = 0.75, kT0 = 10.0;
  double mu_ = 0.0, s_bar_ = 0.0, x_bar_ = 0.0, counter_ = 0.0;
};

/// Warmup schedule: fast initial buffer, doubling slow windows for the
/// metric, fast terminal buffer.
class WindowSchedule {
 public:
  explicit WindowSchedule(int warmup) : warmup_(warmup) {
    if (warmup < 20) {
      init_buffer_ = warmup;
      term_buffer_ = 0;
      window_ = 0;
      next_end_ = -1;
      return;
    }
    if (init_buffer_ + window_ + term_buffer_ > warmup) {
      init_buffer_ = static_cast<int>(0.15 * warmup);
      term_buffer_ = static_cast<int>(0.1 * warmup);
      window_ = warmup - init_buffer_ - term_buffer_;
    }
    next_end_ = init_buffer_ + window_ - 1;
  }
  bool has_windows() const { return window_ > 0; }
  bool in_window(int it) const { return window_ > 0 && it >= init_buffer_ && it < warmup_ - term_buffer_; }
  bool window_ends(int it) const { return window_ > 0 && it == next_end_ && it != warmup_; }
  void advance(int it) {
    if (next_end_ == warmup_ - term_buffer_ - 1) return;
    window_ *= 2;
    next_end_ = it + window_;
    if (next_end_ != warmup_ - term_buffer_ - 1) {
      const int boundary = next_end_ + 2 * window_;
      if (boundary >= warmup_ - term_buffer_) next_end_ = warmup_ - term_buffer_ - 1;
    }
  }

 private:
  int warmup_;
  int init_buffer_ = 75, term_buffer_ = 50, window_ = 25;
  int next_end_ = 0;
};

}  // namespace detail

class NutsSampler {
 public:
  NutsSampler(LogDensityFn target, std::size_t dimension, SamplerSettings settings, std::uint64_t seed)
      : target_(std::move(target)), dim_(dimension), settings_(settings), rng_(seed), metric_(dimension) {}

  /// Runs warmup followed by the kept draws, starting from `init`.
  ChainResult run(std::span<const double> init) {
    z_.q.assign(init.begin(), init.end());
    z_.p.assign(dim_, 0.0);
    z_.g.assign(dim_, 0.0);
    z_.v.assign(dim_, 0.0);
    z_.log_p = target_(z_.q, z_.g);
    if (!std::isfinite(z_.log_p)) throw DomainError("sampler initial point has non-finite log density");
    metric_.velocity(z_.g, z_.sg);
    scratch_.assign(static_cast<std::size_t>(std::max(settings_.max_depth, 1)) + 1, Scratch{});

    ChainResult out;
    out.dimension = dim_;
    step_ = settings_.initial_step_size;
    init_step_size();
    detail::DualAveraging averaging;
    averaging.restart(step_);
    detail::WindowSchedule schedule(settings_.warmup);
    detail::VarianceEstimator estimator(dim_);

    depth_cap_ = schedule.has_windows() ? std::min(settings_.initial_max_depth, settings_.max_depth) : settings_.max_depth;
    for (int it = 0; it < settings_.warmup; ++it) {
      const Transition tr = transition();
      out.warmup_divergences += tr.divergent ? 1 : 0;
      step_ = averaging.learn(tr.accept_stat, settings_.target_accept);
      if (schedule.in_window(it)) {
        estimator.add(z_.q);
        if (settings_.metric_rank > 0) window_states_.push_back(z_.q);
      }
      if (schedule.window_ends(it)) {
        depth_cap_ = settings_.max_depth;
        schedule.advance(it);
        auto var = estimator.variance();
        const double n = static_cast<double>(estimator.count());
        for (std::size_t k = 0; k < dim_; ++k) var[k] = (n / (n + 5.0)) * var[k] + 1e-3 * (5.0 / (n + 5.0));
        metric_.set_diagonal(std::move(var));
        if (settings_.metric_rank > 0) adapt_low_rank();
        metric_.velocity(z_.g, z_.sg);
        estimator.restart();
        window_states_.clear();
        init_step_size();
        averaging.restart(step_);
      }
    }
    if (settings_.warmup > 0) step_ = averaging.final_step();
    depth_cap_ = settings_.max_depth;

    const auto n_keep = static_cast<std::size_t>(settings_.samples);
    out.draws.reserve(n_keep * dim_);
    for (std::size_t s = 0; s < n_keep; ++s) {
      const Transition tr = transition();
      out.draws.insert(out.draws.end(), z_.q.begin(), z_.q.end());
      out.divergent.push_back(tr.divergent ? 1 : 0);
      out.tree_depth.push_back(tr.depth);
      out.n_leapfrog.push_back(tr.n_leapfrog);
      out.accept_stat.push_back(tr.accept_stat);
    }
    out.step_size = step_;
    out.inv_metric = metric_.diagonal();
    out.metric_rank = metric_.rank();
    return out;
  }

 private:
  struct Transition {
    double accept_stat = 0.0;
    int depth = 0;
    int n_leapfrog = 0;
    bool divergent = false;
  };

  /// Buffers owned by one recursion depth of build_tree.
  struct Scratch {
    std::vector<double> p_init_end, p_sharp_init_end, rho_init;
    std::vector<double> p_final_beg, p_sharp_final_beg, rho_final, rho_tmp;
    detail::Position z_propose_final;
  };

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }

  void sample_momentum(detail::PhasePoint& z) {
    std::normal_distribution<double> normal(0.0, 1.0);
    z.p.resize(dim_);
    for (std::size_t k = 0; k < dim_; ++k) z.p[k] = normal(rng_);
    metric_.momentum(z.p);
    metric_.velocity(z.p, z.v);
  }

  static double kinetic(const detail::PhasePoint& z) {
    double k = 0.0;
    for (std::size_t j = 0; j < z.p.size(); ++j) k += z.p[j] * z.v[j];
    return 0.5 * k;
  }
  static double hamiltonian(const detail::PhasePoint& z) { return -z.log_p + kinetic(z); }

  /// Sigma is linear, so Sigma p is advanced alongside p using Sigma g: one
  /// metric product per step.
  void leapfrog(detail::PhasePoint& z, double eps) {
    const double half = 0.5 * eps;
    for (std::size_t k = 0; k < dim_; ++k) {
      z.p[k] += half * z.g[k];
      z.v[k] += half * z.sg[k];
      z.q[k] += eps * z.v[k];
    }
    z.log_p = target_(z.q, z.g);
    if (!std::isfinite(z.log_p)) {
      z.log_p = -INFINITY;
      return;
    }
    metric_.velocity(z.g, z.sg);
    for (std::size_t k = 0; k < dim_; ++k) {
      z.p[k] += half * z.g[k];
      z.v[k] += half * z.sg[k];
    }
  }

  /// Stiffest directions of the whitened Hessian at the current state, by
  /// two rounds of subspace iteration on central-difference products.
  void adapt_low_rank() {
    const auto n = static_cast<Eigen::Index>(dim_);
    const Eigen::Index k = std::min<Eigen::Index>(settings_.metric_rank + 16, n);
    const auto sqrt_d = metric_.sqrt_diagonal();
    // Curvature is averaged over states spread through the second half of
    // the window so that one unusual end state cannot dominate the metric.
    std::vector<const std::vector<double>*> anchors;
    const std::size_t n_states = window_states_.size();
    const std::size_t n_anchors =
        std::min<std::size_t>(static_cast<std::size_t>(std::max(settings_.curvature_anchors, 1)), n_states);
    for (std::size_t a = 0; a < n_anchors; ++a)
      anchors.push_back(&window_states_[n_states - 1 - a * (n_states / 2) / n_anchors]);
    if (anchors.empty()) anchors.push_back(&z_.q);
    std::vector<double> qp(dim_), gp(dim_), gm(dim_);
    constexpr double h = 1e-4;
    bool ok = true;
    auto apply = [&](const Eigen::MatrixXd& in) {
      Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, in.cols());
      const double w = 1.0 / static_cast<double>(anchors.size());
      for (const auto* anchor : anchors)
        for (Eigen::Index c = 0; c < in.cols() && ok; ++c) {
          const auto& q0 = *anchor;
          for (std::size_t j = 0; j < dim_; ++j) qp[j] = q0[j] + h * sqrt_d[j] * in(static_cast<Eigen::Index>(j), c);
          const double lp = target_(qp, gp);
          for (std::size_t j = 0; j < dim_; ++j) qp[j] = q0[j] - h * sqrt_d[j] * in(static_cast<Eigen::Index>(j), c);
          const double lm = target_(qp, gm);
          ok = std::isfinite(lp) && std::isfinite(lm);
          for (std::size_t j = 0; j < dim_; ++j)
            out(static_cast<Eigen::Index>(j), c) += -w * sqrt_d[j] * (gp[j] - gm[j]) / (2.0 * h);
        }
      return out;
    };
    auto orthonormal = [&](const Eigen::MatrixXd& y) -> Eigen::MatrixXd {
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
      return qr.householderQ() * Eigen::MatrixXd::Identity(n, y.cols());
    };
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd y(n, k);
    for (Eigen::Index c = 0; c < k; ++c)
      for (Eigen::Index j = 0; j < n; ++j) y(j, c) = normal(rng_);
    Eigen::MatrixXd q = orthonormal(apply(y));
    q = orthonormal(apply(q));
    const Eigen::MatrixXd aq = apply(q);
    if (!ok || !aq.allFinite()) return;
    Eigen::MatrixXd b = q.transpose() * aq;
    b = 0.5 * (b + b.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(b);
    if (eig.info() != Eigen::Success) return;
    std::vector<Eigen::Index> keep;
    for (Eigen::Index c = k - 1; c >= 0 && static_cast<int>(keep.size()) < settings_.metric_rank; --c)
      if (eig.eigenvalues()[c] > settings_.stiffness_threshold) keep.push_back(c);
    if (keep.empty()) return;
    Eigen::MatrixXd basis(n, static_cast<Eigen::Index>(keep.size()));
    Eigen::VectorXd curvature(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t c = 0; c < keep.size(); ++c) {
      basis.col(static_cast<Eigen::Index>(c)) = q * eig.eigenvectors().col(keep[c]);
      curvature[static_cast<Eigen::Index>(c)] = eig.eigenvalues()[keep[c]];
    }
    metric_.set_low_rank(std::move(basis), curvature);
  }

  /// Heuristic doubling/halving until one leapfrog step crosses acceptance 0.8.
  void init_step_size() {
    detail::PhasePoint z = z_;
    sample_momentum(z);
    const double h0 = hamiltonian(z);
    leapfrog(z, step_);
    double delta_h = h0 - hamiltonian(z);
    if (!std::isfinite(delta_h)) delta_h = -INFINITY;
    const int direction = delta_h > std::log(0.8) ? 1 : -1;
    for (int guard = 0; guard < 100; ++guard) {
      z = z_;
      sample_momentum(z);
      const double h = hamiltonian(z);
      leapfrog(z, step_);
      double dh = h - hamiltonian(z);
      if (!std::isfinite(dh)) dh = -INFINITY;
      if (direction == 1 && !(dh > std::log(0.8))) break;
      if (direction == -1 && !(dh < std::log(0.8))) break;
      step_ = direction == 1 ? 2.0 * step_ : 0.5 * step_;
      if (step_ > 1e7 || step_ < 1e-12) break;
    }
  }

  static bool criterion(const std::vector<double>& p_sharp_minus, const std::vector<double>& p_sharp_plus,
                        const std::vector<double>& rho) {
    double a = 0.0, b = 0.0;
    for (std::size_t k = 0; k < rho.size(); ++k) {
      a += p_sharp_plus[k] * rho[k];
      b += p_sharp_minus[k] * rho[k];
    }
    return a > 0.0 && b > 0.0;
  }

  struct TreeState {
    int n_leapfrog = 0;
    double sum_metro_prob = 0.0;
    bool divergent = false;
    double h0 = 0.0;
  };

  static void add_to(std::vector<double>& acc, const std::vector<double>& v) {
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += v[k];
  }
  static void sum_into(std::vector<double>& out, const std::vector<double>& a, const std::vector<double>& b) {
    out.resize(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) out[k] = a[k] + b[k];
  }
  void zero(std::vector<double>& v) const { v.assign(dim_, 0.0); }

  bool build_tree(int depth, detail::PhasePoint& z, detail::Position& z_propose, std::vector<double>& p_sharp_beg,
                  std::vector<double>& p_sharp_end, std::vector<double>& rho, std::vector<double>& p_beg,
                  std::vector<double>& p_end, double sign, double& log_sum_weight, TreeState& st) {
    if (depth == 0) {
      leapfrog(z, sign * step_);
      ++st.n_leapfrog;
      double h = hamiltonian(z);
      if (std::isnan(h)) h = INFINITY;
      if (h - st.h0 > settings_.max_delta_h) st.divergent = true;
      log_sum_weight = log_sum_exp(log_sum_weight, st.h0 - h);
      st.sum_metro_prob += st.h0 - h > 0.0 ? 1.0 : std::exp(st.h0 - h);
      z_propose.assign(z);
      p_sharp_beg = z.v;
      p_sharp_end = p_sharp_beg;
      add_to(rho, z.p);
      p_beg = z.p;
      p_end = p_beg;
      return !st.divergent;
    }
    Scratch& s = scratch_[static_cast<std::size_t>(depth)];
    double log_sum_weight_init = -INFINITY;
    zero(s.rho_init);
    if (!build_tree(depth - 1, z, z_propose, p_sharp_beg, s.p_sharp_init_end, s.rho_init, p_beg, s.p_init_end, sign,
                    log_sum_weight_init, st))
      return false;

    double log_sum_weight_final = -INFINITY;
    zero(s.rho_final);
    if (!build_tree(depth - 1, z, s.z_propose_final, s.p_sharp_final_beg, p_sharp_end, s.rho_final, s.p_final_beg,
                    p_end, sign, log_sum_weight_final, st))
      return false;

    const double log_sum_weight_subtree = log_sum_exp(log_sum_weight_init, log_sum_weight_final);
    log_sum_weight = log_sum_exp(log_sum_weight, log_sum_weight_subtree);
    if (log_sum_weight_final > log_sum_weight_subtree) {
      std::swap(z_propose, s.z_propose_final);
    } else if (uniform() < std::exp(log_sum_weight_final - log_sum_weight_subtree)) {
      std::swap(z_propose, s.z_propose_final);
    }

    sum_into(s.rho_tmp, s.rho_init, s.rho_final);
    add_to(rho, s.rho_tmp);
    bool persist = criterion(p_sharp_beg, p_sharp_end, s.rho_tmp);
    sum_into(s.rho_tmp, s.rho_init, s.p_final_beg);
    persist = persist && criterion(p_sharp_beg, s.p_sharp_final_beg, s.rho_tmp);
    sum_into(s.rho_tmp, s.rho_final, s.p_init_end);
    persist = persist && criterion(s.p_sharp_init_end, p_sharp_end, s.rho_tmp);
    return persist;
  }

  Transition transition() {
    sample_momentum(z_);
    detail::PhasePoint& z_fwd = fwd_;
    detail::PhasePoint& z_bck = bck_;
    z_fwd = z_;
    z_bck = z_;
    detail::Position& z_sample = sample_;
    detail::Position& z_propose = propose_;
    z_sample.assign(z_);
    const std::vector<double>& p_sharp = z_.v;
    std::vector<double> p_fwd_fwd = z_.p, p_sharp_fwd_fwd = p_sharp, p_fwd_bck = z_.p, p_sharp_fwd_bck = p_sharp;
    std::vector<double> p_bck_fwd = z_.p, p_sharp_bck_fwd = p_sharp, p_bck_bck = z_.p, p_sharp_bck_bck = p_sharp;
    std::vector<double> rho = z_.p, rho_fwd, rho_bck, rho_extended;
    double log_sum_weight = 0.0;
    TreeState st;
    st.h0 = hamiltonian(z_);
    int depth = 0;

    while (depth < depth_cap_) {
      zero(rho_fwd);
      zero(rho_bck);
      bool valid = false;
      double log_sum_weight_subtree = -INFINITY;
      if (uniform() > 0.5) {
        rho_bck = rho;
        p_bck_fwd = p_fwd_bck;
        p_sharp_bck_fwd = p_sharp_fwd_bck;
        valid = build_tree(depth, z_fwd, z_propose, p_sharp_fwd_bck, p_sharp_fwd_fwd, rho_fwd, p_fwd_bck, p_fwd_fwd,
                           1.0, log_sum_weight_subtree, st);
      } else {
        rho_fwd = rho;
        p_fwd_bck = p_bck_fwd;
        p_sharp_fwd_bck = p_sharp_bck_fwd;
        valid = build_tree(depth, z_bck, z_propose, p_sharp_bck_fwd, p_sharp_bck_bck, rho_bck, p_bck_fwd, p_bck_bck,
                           -1.0, log_sum_weight_subtree, st);
      }
      if (!valid) break;
      ++depth;
      if (log_sum_weight_subtree > log_sum_weight) {
        std::swap(z_sample, z_propose);
      } else if (uniform() < std::exp(log_sum_weight_subtree - log_sum_weight)) {
        std::swap(z_sample, z_propose);
      }
      log_sum_weight = log_sum_exp(log_sum_weight, log_sum_weight_subtree);
      sum_into(rho, rho_bck, rho_fwd);
      bool persist = criterion(p_sharp_bck_bck, p_sharp_fwd_fwd, rho);
      sum_into(rho_extended, rho_bck, p_fwd_bck);
      persist = persist && criterion(p_sharp_bck_bck, p_sharp_fwd_bck, rho_extended);
      sum_into(rho_extended, rho_fwd, p_bck_fwd);
      persist = persist && criterion(p_sharp_bck_fwd, p_sharp_fwd_fwd, rho_extended);
      if (!persist) break;
    }
    z_sample.restore_into(z_);
    Transition tr;
    tr.n_leapfrog = st.n_leapfrog;
    tr.accept_stat = st.n_leapfrog > 0 ? st.sum_metro_prob / st.n_leapfrog : 0.0;
    tr.depth = depth;
    tr.divergent = st.divergent;
    return tr;
  }

  LogDensityFn target_;
  std::size_t dim_;
  SamplerSettings settings_;
  std::mt19937_64 rng_;
  detail::Metric metric_;
  detail::PhasePoint z_, fwd_, bck_;
  detail::Position sample_, propose_;
  std::vector<Scratch> scratch_;
  std::vector<std::vector<double>> window_states_;
  double step_ = 0.1;
  int depth_cap_ = 10;
};

}  // namespace npi
