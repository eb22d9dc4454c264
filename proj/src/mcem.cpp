#include "basic/mcem.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "basic/errors.hpp"
#include "basic/model.hpp"
#include "basic/numeric.hpp"

namespace basic {

MCEMSchedule MCEMSchedule::default_for(int burnin) {
  MCEMSchedule s;
  if (burnin == 50) {
    s.iterations = {5, 10, 20, 30, 50};
    return s;
  }
  for (int i : {10, 20, 40, 60, 100})
    if (i <= burnin) s.iterations.push_back(i);
  return s;
}

void MCEMSchedule::validate(int burnin) const {
  int last = 0;
  for (int i : iterations) {
    if (i <= last) throw ValidationError("MCEM schedule must be strictly increasing and positive");
    if (i > burnin) throw ValidationError("MCEM schedule entry " + std::to_string(i) + " exceeds the burn-in length");
    last = i;
  }
}

bool MCEMSchedule::contains(int iteration) const {
  return std::binary_search(iterations.begin(), iterations.end(), iteration);
}

MCEMStatistics::MCEMStatistics(int J, int T) : J_(J), T_(T) {
  if (J < 1 || T < 1) throw ValidationError("MCEM statistics need J >= 1 and T >= 1");
}

void MCEMStatistics::add(const ChangeMatrix& Z, const SegmentTable& table) {
  if (Z.J() != J_ || Z.T() != T_ || table.J() != J_ || table.T() != T_)
    throw ValidationError("sample shape does not match the statistics");
  std::vector<long> hist(J_ + 1, 0);
  for (int t = 1; t < T_; ++t) ++hist[Z.column_count(t)];
  histograms_.push_back(std::move(hist));
  const std::uint64_t width = static_cast<std::uint64_t>(T_) + 1;
  for (int j = 0; j < J_; ++j) {
    for (auto [a, b] : row_segments(Z, j)) {
      std::uint64_t key = (static_cast<std::uint64_t>(j) * width + a) * width + b;
      auto [it, fresh] = segments_.try_emplace(key);
      if (fresh) {
        it->second.row = j;
        it->second.start = a;
        it->second.end = b;
        it->second.stats = table.stats(j, a, b);
      }
      ++it->second.multiplicity;
    }
  }
}

void MCEMStatistics::merge(const MCEMStatistics& other) {
  if (other.J_ != J_ || other.T_ != T_) throw ValidationError("cannot merge statistics of different shapes");
  histograms_.insert(histograms_.end(), other.histograms_.begin(), other.histograms_.end());
  for (const auto& [key, rec] : other.segments_) {
    auto [it, fresh] = segments_.try_emplace(key, rec);
    if (!fresh) it->second.multiplicity += rec.multiplicity;
  }
}

void MCEMStatistics::clear() {
  histograms_.clear();
  segments_.clear();
}

std::vector<double> MCEMStatistics::empirical_counts() const {
  if (histograms_.empty()) throw ValidationError("no samples collected");
  std::vector<long> total(J_ + 1, 0);
  for (const auto& h : histograms_)
    for (int l = 0; l <= J_; ++l) total[l] += h[l];
  std::vector<double> mu(J_ + 1, 0.0);
  if (T_ == 1) {
    mu[0] = 1.0;  // no free positions
    return mu;
  }
  const double denom = static_cast<double>(histograms_.size()) * (T_ - 1);
  for (int l = 0; l <= J_; ++l) mu[l] = total[l] / denom;
  return mu;
}

std::vector<SegmentRecord> MCEMStatistics::segments() const {
  std::vector<SegmentRecord> out;
  out.reserve(segments_.size());
  for (const auto& [key, rec] : segments_) out.push_back(rec);
  return out;
}

MCEMStatistics collect_statistics(std::span<const ChangeMatrix> samples, const SegmentTable& table) {
  if (samples.empty()) throw ValidationError("collect_statistics needs at least one sample");
  MCEMStatistics stats(table.J(), table.T());
  for (const auto& Z : samples) stats.add(Z, table);
  return stats;
}

namespace {

double log_choose(int n, int k) { return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0); }

void check_mu_bar(std::span<const double> mu_bar, int J) {
  if (static_cast<int>(mu_bar.size()) != J + 1) throw ValidationError("count distribution must have J+1 entries");
  double total = 0.0;
  for (double m : mu_bar) {
    if (!(m >= 0.0)) throw ValidationError("count distribution entries must be nonnegative");
    total += m;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError("count distribution must sum to 1");
}

// Dictionary moments per count, each row scaled by its largest entry.
struct ScaledMoments {
  std::vector<std::vector<double>> m;  // [l][k]
  std::vector<double> log_scale;       // -inf when no atom reaches l
};

ScaledMoments scaled_moments(const ChangepointPrior& prior, int J) {
  ScaledMoments s;
  s.m.assign(J + 1, std::vector<double>(prior.size(), 0.0));
  s.log_scale.assign(J + 1, kNegInf);
  for (int l = 0; l <= J; ++l) {
    std::vector<double> lm(prior.size());
    for (std::size_t k = 0; k < prior.size(); ++k) lm[k] = log_dictionary_moment(prior, k, l, J);
    double top = *std::max_element(lm.begin(), lm.end());
    s.log_scale[l] = top;
    if (top == kNegInf) continue;
    for (std::size_t k = 0; k < prior.size(); ++k) s.m[l][k] = std::exp(lm[k] - top);
  }
  return s;
}

double divergence_from(std::span<const double> mu, const ScaledMoments& sm, std::span<const double> w, int J) {
  double kl = 0.0;
  for (int l = 0; l <= J; ++l) {
    if (mu[l] <= 0.0 || sm.log_scale[l] == kNegInf) continue;
    double d = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) d += w[k] * sm.m[l][k];
    double log_model = log_choose(J, l) + sm.log_scale[l] + std::log(d);
    kl += mu[l] * (std::log(mu[l]) - log_model);
  }
  return kl;
}

// Restricts mu_bar to reachable counts and renormalizes.
std::vector<double> reachable_part(std::span<const double> mu_bar, const ScaledMoments& sm, std::vector<int>* lost) {
  std::vector<double> mu(mu_bar.begin(), mu_bar.end());
  double kept = 0.0;
  for (std::size_t l = 0; l < mu.size(); ++l) {
    if (sm.log_scale[l] == kNegInf && mu[l] > 0.0) {
      if (lost) lost->push_back(static_cast<int>(l));
      mu[l] = 0.0;
    }
    kept += mu[l];
  }
  if (kept <= 0.0) throw ValidationError("no observed column count is reachable under the dictionary");
  for (double& m : mu) m /= kept;
  return mu;
}

}  // namespace

std::vector<double> implied_count_distribution(const ChangepointPrior& prior, int J) {
  prior.validate();
  std::vector<double> out(J + 1, 0.0);
  for (int l = 0; l <= J; ++l) {
    std::vector<double> terms;
    for (std::size_t k = 0; k < prior.size(); ++k)
      if (prior.weights[k] > 0.0) terms.push_back(std::log(prior.weights[k]) + log_dictionary_moment(prior, k, l, J));
    out[l] = std::exp(log_choose(J, l) + log_sum_exp(terms));
  }
  return out;
}

double count_divergence(std::span<const double> mu_bar, const ChangepointPrior& prior, int J) {
  check_mu_bar(mu_bar, J);
  prior.validate();
  auto sm = scaled_moments(prior, J);
  auto mu = reachable_part(mu_bar, sm, nullptr);
  return divergence_from(mu, sm, prior.weights, J);
}

WeightUpdate update_weights(std::span<const double> mu_bar, const ChangepointPrior& prior, int J, int max_iterations,
                            double tolerance) {
  check_mu_bar(mu_bar, J);
  prior.validate();
  for (double w : prior.weights)
    if (!(w > 0.0)) throw ValidationError("weight update must start from weights positive on every atom");

  WeightUpdate out;
  auto sm = scaled_moments(prior, J);
  auto mu = reachable_part(mu_bar, sm, &out.unreachable_counts);
  const std::size_t K = prior.size();
  auto kl = [&](const std::vector<double>& w) { return divergence_from(mu, sm, w, J); };
  // One multiplicative step.
  auto em = [&](const std::vector<double>& w) {
    std::vector<double> next(K, 0.0);
    for (int l = 0; l <= J; ++l) {
      if (mu[l] <= 0.0) continue;
      double d = 0.0;
      for (std::size_t k = 0; k < K; ++k) d += w[k] * sm.m[l][k];
      if (d <= 0.0) continue;
      const double r = mu[l] / d;
      for (std::size_t k = 0; k < K; ++k) next[k] += sm.m[l][k] * r;
    }
    double total = 0.0;
    for (std::size_t k = 0; k < K; ++k) total += (next[k] *= w[k]);
    for (double& x : next) x /= total;
    return next;
  };

  // Damped Newton step on the simplex over atoms with positive weight or a
  // gradient that pulls them in; the step is truncated at the boundary and
  // backtracked until the divergence drops.
  auto newton = [&](const std::vector<double>& w, double kl_w) -> std::optional<std::vector<double>> {
    std::vector<double> g(K, 0.0);
    std::vector<std::vector<double>> H(K, std::vector<double>(K, 0.0));
    for (int l = 0; l <= J; ++l) {
      if (mu[l] <= 0.0) continue;
      double d = 0.0;
      for (std::size_t k = 0; k < K; ++k) d += w[k] * sm.m[l][k];
      if (d <= 0.0) return std::nullopt;
      for (std::size_t a = 0; a < K; ++a) {
        g[a] -= mu[l] * sm.m[l][a] / d;
        for (std::size_t b = 0; b < K; ++b) H[a][b] += mu[l] * sm.m[l][a] * sm.m[l][b] / (d * d);
      }
    }
    // At the optimum g = -1 on the support and g >= -1 elsewhere.
    std::vector<std::size_t> F;
    for (std::size_t k = 0; k < K; ++k)
      if (w[k] > 0.0 || g[k] < -1.0) F.push_back(k);
    // KKT system [H + tau I, 1; 1', 0] [step; nu] = [-g; 0] on the free set.
    auto solve = [&](const std::vector<std::size_t>& F) -> std::optional<std::vector<double>> {
      const std::size_t n = F.size();
      double scale = 0.0;
      for (std::size_t k : F) scale = std::max(scale, H[k][k]);
      std::vector<std::vector<double>> A(n + 1, std::vector<double>(n + 2, 0.0));
      for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) A[a][b] = H[F[a]][F[b]];
        A[a][a] += 1e-12 * scale;
        A[a][n] = A[n][a] = 1.0;
        A[a][n + 1] = -g[F[a]];
      }
      for (std::size_t c = 0; c <= n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r <= n; ++r)
          if (std::abs(A[r][c]) > std::abs(A[piv][c])) piv = r;
        if (A[piv][c] == 0.0) return std::nullopt;
        std::swap(A[c], A[piv]);
        for (std::size_t r = 0; r <= n; ++r) {
          if (r == c) continue;
          double f = A[r][c] / A[c][c];
          if (f != 0.0)
            for (std::size_t q = c; q <= n + 1; ++q) A[r][q] -= f * A[c][q];
        }
      }
      std::vector<double> step(K, 0.0);
      for (std::size_t a = 0; a < n; ++a) step[F[a]] = A[a][n + 1] / A[a][a];
      return step;
    };
    std::optional<std::vector<double>> found;
    while (F.size() >= 2) {
      found = solve(F);
      if (!found) return std::nullopt;
      // Atoms at zero that the step would push negative leave the free set.
      std::vector<std::size_t> keep;
      for (std::size_t k : F)
        if (w[k] > 0.0 || (*found)[k] >= 0.0) keep.push_back(k);
      if (keep.size() == F.size()) break;
      F.swap(keep);
      found.reset();
    }
    if (!found) return std::nullopt;
    const std::vector<double>& step = *found;
    double slope = 0.0;
    for (std::size_t k : F) slope += g[k] * step[k];
    if (!(slope < 0.0)) return std::nullopt;
    double t = 1.0;
    for (std::size_t k : F)
      if (step[k] < 0.0) t = std::min(t, -w[k] / step[k]);
    for (int tries = 0; tries < 40; ++tries, t /= 2) {
      std::vector<double> x(K);
      double total = 0.0;
      for (std::size_t k = 0; k < K; ++k) total += (x[k] = std::max(0.0, w[k] + t * step[k]));
      for (double& v : x) v /= total;
      if (kl(x) <= kl_w + 1e-4 * t * slope) return x;
    }
    return std::nullopt;
  };

  std::vector<double> w = prior.weights;
  double current = kl(w);
  out.divergence.push_back(current);
  for (int it = 0; it < max_iterations; ++it) {
    auto next = em(w);
    double next_kl = kl(next);
    if (auto cand = newton(w, current)) {
      double c = kl(*cand);
      if (c < next_kl) next = std::move(*cand), next_kl = c;
    }
    double change = 0.0;
    for (std::size_t k = 0; k < K; ++k) change = std::max(change, std::abs(next[k] - w[k]));
    if (next_kl > current) break;  // no candidate improves, even by rounding
    w.swap(next);
    current = next_kl;
    out.iterations = it + 1;
    out.divergence.push_back(current);
    if (change < tolerance) {
      out.converged = true;
      break;
    }
  }
  out.weights = std::move(w);
  return out;
}

double eta_objective(std::span<const SegmentRecord> segments, const LikelihoodSpec& spec) {
  FamilyKernel kernel(spec);
  double total = 0.0;
  for (const auto& s : segments) total += s.multiplicity * kernel.log_marginal(s.stats);
  return total;
}

EtaUpdate update_eta(std::span<const SegmentRecord> segments, const LikelihoodSpec& spec,
                     const std::vector<bool>& free_mask, const TrustRegionOptions& options) {
  if (segments.empty()) throw ValidationError("eta update needs at least one segment");
  const Family family = spec.family();
  const int n = spec.eta_size();
  if (!free_mask.empty() && static_cast<int>(free_mask.size()) != n)
    throw ValidationError("eta mask must have one entry per hyperparameter");
  auto is_free = [&](int i) { return free_mask.empty() || free_mask[i]; };

  EtaUpdate out{spec, 0.0, 0.0, 0, false, {}};
  out.objective_before = eta_objective(segments, spec);
  out.objective_after = out.objective_before;

  // Location hyperparameters are optimized in units of the data spread.
  double wsum = 0.0, total = 0.0;
  for (const auto& s : segments) {
    wsum += static_cast<double>(s.multiplicity) * s.stats.n;
    total += static_cast<double>(s.multiplicity) * s.stats.sum;
  }
  const double grand = wsum > 0 ? total / wsum : 0.0;
  double spread = 0.0;
  for (const auto& s : segments) {
    double dm = s.stats.mean - grand;
    spread += s.multiplicity * (s.stats.ss + s.stats.n * dm * dm);
  }
  spread = wsum > 0 ? std::sqrt(spread / wsum) : 0.0;
  const double loc_scale = std::max(spread, 1e-6 * (1.0 + std::abs(grand)));

  const std::vector<double> base(spec.eta().begin(), spec.eta().end());
  std::vector<int> free;
  std::vector<double> x0, lower, upper;
  for (int i = 0; i < n; ++i) {
    if (!is_free(i)) continue;
    free.push_back(i);
    if (LikelihoodSpec::eta_positive(family, i)) {
      x0.push_back(std::log(base[i]));
      lower.push_back(std::log(1e-12));
      upper.push_back(std::log(1e12));
    } else {
      x0.push_back(base[i] / loc_scale);
      lower.push_back(-1e12 / loc_scale);
      upper.push_back(1e12 / loc_scale);
    }
  }
  if (free.empty()) return out;

  auto decode = [&](std::span<const double> x) {
    std::vector<double> eta = base;
    for (std::size_t k = 0; k < free.size(); ++k) {
      int i = free[k];
      eta[i] = LikelihoodSpec::eta_positive(family, i) ? std::exp(x[k]) : x[k] * loc_scale;
    }
    return eta;
  };
  auto objective = [&](std::span<const double> x) {
    try {
      double v = eta_objective(segments, LikelihoodSpec::from_eta(family, decode(x)));
      return std::isfinite(v) ? -v : std::numeric_limits<double>::infinity();
    } catch (const ValidationError&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  TrustRegionResult res = minimize_trust_region(objective, x0, lower, upper, options);
  out.evaluations = res.evaluations;
  out.converged = res.converged;
  const double after = -res.value;
  if (!std::isfinite(after)) {
    out.warning = "eta optimizer produced no finite objective; keeping previous hyperparameters";
    return out;
  }
  if (after < out.objective_before) return out;  // the start point was clipped to the bounds
  out.spec = LikelihoodSpec::from_eta(family, decode(res.x));
  out.objective_after = after;
  return out;
}

namespace {

struct BlockMoments {
  std::vector<double> means;
  std::vector<double> variances;  // blocks with at least two points
  std::vector<double> mean_abs;
};

BlockMoments block_moments(const DataMatrix& X, int block) {
  BlockMoments b;
  for (int j = 0; j < X.rows(); ++j) {
    auto row = X.row(j);
    for (int lo = 0; lo < X.cols(); lo += block) {
      int hi = std::min(X.cols(), lo + block);
      int n = hi - lo;
      double sum = 0.0, sabs = 0.0;
      for (int t = lo; t < hi; ++t) {
        sum += row[t];
        sabs += std::abs(row[t]);
      }
      double mean = sum / n;
      b.means.push_back(mean);
      b.mean_abs.push_back(sabs / n);
      if (n >= 2) {
        double ss = 0.0;
        for (int t = lo; t < hi; ++t) ss += (row[t] - mean) * (row[t] - mean);
        b.variances.push_back(ss / (n - 1));
      }
    }
  }
  return b;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Unbiased sample variance; 0 with fewer than two values.
double variance_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double m = mean_of(v), ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size() - 1);
}

constexpr double kCap = 1e6;
constexpr double kFloor = 1e-12;

}  // namespace

EtaInit init_eta(const DataMatrix& X, Family family) {
  if (X.rows() < 1 || X.cols() < 1) throw ValidationError("init_eta needs a nonempty data matrix");
  BlockMoments b = block_moments(X, 100);
  std::vector<std::string> warnings;
  auto warn = [&](std::string msg) { warnings.push_back(std::move(msg)); };

  const double mu0 = mean_of(b.means);
  double s2 = mean_of(b.variances);
  if (b.variances.empty()) {
    s2 = 1.0;
    warn("no block has two observations; within-block variance defaulted to 1");
  }
  if (s2 < kFloor) {
    s2 = kFloor;
    warn("within-block variance is zero; floored at 1e-12");
  }
  const double vm = variance_of(b.means);

  auto lambda_estimate = [&] {
    if (vm > 0.0 && s2 / vm < kCap) return s2 / vm;
    warn("variance of block means is zero or tiny; lambda clamped to 1e6");
    return kCap;
  };
  // Inverse-gamma shape/scale matching mean m and variance v.
  auto inverse_gamma = [&](double m, const std::vector<double>& values, const char* what) {
    m = std::max(m, kFloor);
    double v = variance_of(values);
    double a;
    if (v > 0.0 && 2.0 + m * m / v < kCap) {
      a = 2.0 + m * m / v;
    } else {
      a = kCap;
      warn(std::string("variance of block ") + what + " is zero or tiny; alpha clamped to 1e6");
    }
    return std::pair{a, m * (a - 1.0)};
  };

  EtaInit out{LikelihoodSpec::normal_mean(0, 1, 1), {}};
  switch (family) {
    case Family::NormalMean: out.spec = LikelihoodSpec::normal_mean(mu0, lambda_estimate(), s2); break;
    case Family::NormalVar: {
      auto [a, beta] = inverse_gamma(s2, b.variances, "variances");
      out.spec = LikelihoodSpec::normal_var(mu0, a, beta);
      break;
    }
    case Family::NormalMeanVar: out.spec = LikelihoodSpec::normal_meanvar(mu0, lambda_estimate(), 2.0, s2); break;
    case Family::Poisson: {
      double m = std::max(mu0, kFloor);
      double a, beta;
      if (vm > 0.0 && m * m / vm < kCap) {
        beta = m / vm;
        a = m * beta;
      } else {
        a = kCap;
        beta = a / m;
        warn("variance of block means is zero or tiny; alpha clamped to 1e6");
      }
      out.spec = LikelihoodSpec::poisson(a, beta);
      break;
    }
    case Family::Bernoulli: {
      double m = std::clamp(mu0, 1e-6, 1.0 - 1e-6);
      double c;
      if (vm > 0.0) {
        c = m * (1.0 - m) / vm - 1.0;
        if (c <= 0.0) {
          c = 2.0;
          warn("block means are overdispersed beyond a Beta fit; using alpha + beta = 2");
        }
      } else {
        c = kCap;
        warn("variance of block means is zero; alpha + beta clamped to 1e6");
      }
      c = std::min(c, kCap);
      out.spec = LikelihoodSpec::bernoulli(m * c, (1.0 - m) * c);
      break;
    }
    case Family::LaplaceScale: {
      auto [a, beta] = inverse_gamma(mean_of(b.mean_abs), b.mean_abs, "scales");
      out.spec = LikelihoodSpec::laplace_scale(a, beta);
      break;
    }
  }
  out.warnings = std::move(warnings);
  return out;
}

MCEMUpdate mcem_step(const MCEMStatistics& stats, const ChangepointPrior& prior, const LikelihoodSpec& spec,
                     const MCEMOptions& options) {
  if (stats.samples() == 0) throw ValidationError("MCEM step needs at least one sample");
  MCEMUpdate out{prior, spec, {}, 0.0, 0, 0.0, {}};
  const int J = stats.J();
  auto mu_bar = stats.empirical_counts();

  if (options.fit_weights) {
    // Atoms that reached zero weight are revived so the update can move them.
    ChangepointPrior start = prior;
    double total = 0.0;
    for (double& w : start.weights) total += (w = std::max(w, 1e-12));
    for (double& w : start.weights) w /= total;
    WeightUpdate wu = update_weights(mu_bar, start, J);
    out.prior = ChangepointPrior(prior.atoms, wu.weights);
    out.divergence = wu.divergence.back();
    out.weight_iterations = wu.iterations;
    for (int l : wu.unreachable_counts)
      out.warnings.push_back("column count " + std::to_string(l) + " is unreachable under the dictionary");
  } else {
    out.divergence = count_divergence(mu_bar, prior, J);
  }

  auto segments = stats.segments();
  if (options.fit_eta) {
    EtaUpdate eu = update_eta(segments, spec, options.eta_mask, options.optimizer);
    out.spec = eu.spec;
    out.eta_objective = eu.objective_after;
    if (!eu.warning.empty()) out.warnings.push_back(eu.warning);
  } else {
    out.eta_objective = eta_objective(segments, spec);
  }
  out.moments = build_moment_tables(out.prior, J);
  return out;
}

}  // namespace basic
