#include "basic/pipeline.hpp"

#include <memory>

#include "basic/errors.hpp"
#include "basic/model.hpp"

namespace basic {

void RunConfig::validate() const {
  if (burnin < 0 || samples < 0) throw ValidationError("iteration counts must be nonnegative");
  if (chains < 1) throw ValidationError("at least one chain is required");
  if (naive_sweeps < 1) throw ValidationError("naive sweeps per iteration must be positive");
  if (sampler.block_size < 0) throw ValidationError("block size must be nonnegative");
  if (schedule) schedule->validate(burnin);
  if (eta && static_cast<int>(eta->size()) != LikelihoodSpec::eta_size(family))
    throw ValidationError(std::string(family_name(family)) + " takes " +
                          std::to_string(LikelihoodSpec::eta_size(family)) + " hyperparameters");
}

SummaryAccumulator::SummaryAccumulator(const DataMatrix& X, const LikelihoodSpec& spec, const PriorMoments& moments)
    : table_(X, spec),
      moments_(moments),
      z_sum_(X.rows(), X.cols(), 0.0),
      q_sum_(X.cols(), 0.0),
      theta_sum_(X.rows(), X.cols(), 0.0) {}

void SummaryAccumulator::add(const ChangeMatrix& Z) {
  const int J = table_.J(), T = table_.T();
  if (Z.J() != J || Z.T() != T) throw ValidationError("sample shape does not match the data");
  for (int j = 0; j < J; ++j) {
    auto zr = Z.row(j);
    auto sr = z_sum_.row(j);
    for (int t = 0; t < T; ++t) sr[t] += zr[t];
  }
  for (int t = 1; t < T; ++t) q_sum_[t] += moments_.posterior_mean_q(Z.column_count(t));
  for (int j = 0; j < J; ++j) {
    auto tr = theta_sum_.row(j);
    for (auto [a, b] : row_segments(Z, j)) {
      double m = posterior_mean_theta(table_.spec(), table_.stats(j, a, b));
      for (int t = a; t < b; ++t) tr[t] += m;
    }
  }
  ++count_;
}

namespace {

DataMatrix scaled(const DataMatrix& sum, long count) {
  DataMatrix out = sum;
  if (count > 0)
    for (double& v : out.values()) v /= static_cast<double>(count);
  return out;
}

}  // namespace

DataMatrix SummaryAccumulator::marginal() const { return scaled(z_sum_, count_); }
DataMatrix SummaryAccumulator::theta_mean() const { return scaled(theta_sum_, count_); }

std::vector<double> SummaryAccumulator::q_mean() const {
  std::vector<double> out = q_sum_;
  if (count_ > 0)
    for (double& v : out) v /= static_cast<double>(count_);
  return out;
}

DataMatrix marginal_probabilities(std::span<const ChangeMatrix> samples) {
  if (samples.empty()) throw ValidationError("marginal probabilities need at least one sample");
  DataMatrix out(samples[0].J(), samples[0].T(), 0.0);
  for (const auto& Z : samples) {
    if (Z.J() != out.rows() || Z.T() != out.cols()) throw ValidationError("samples differ in shape");
    for (std::size_t i = 0; i < Z.values().size(); ++i) out.values()[i] += Z.values()[i];
  }
  for (double& v : out.values()) v /= static_cast<double>(samples.size());
  return out;
}

std::vector<double> posterior_mean_q(std::span<const ChangeMatrix> samples, const PriorMoments& moments) {
  if (samples.empty()) throw ValidationError("posterior mean of q needs at least one sample");
  const int T = samples[0].T();
  std::vector<double> out(T, 0.0);
  for (const auto& Z : samples) {
    if (Z.J() != moments.J) throw ValidationError("moment tables were built for a different J");
    for (int t = 1; t < T; ++t) out[t] += moments.posterior_mean_q(Z.column_count(t));
  }
  for (double& v : out) v /= static_cast<double>(samples.size());
  return out;
}

DataMatrix posterior_mean_theta_matrix(std::span<const ChangeMatrix> samples, const DataMatrix& X,
                                       const LikelihoodSpec& spec) {
  if (samples.empty()) throw ValidationError("posterior mean of theta needs at least one sample");
  DataMatrix sum(X.rows(), X.cols(), 0.0);
  SegmentTable table(X, spec);
  for (const auto& Z : samples) {
    if (Z.J() != X.rows() || Z.T() != X.cols()) throw ValidationError("sample shape does not match the data");
    for (int j = 0; j < X.rows(); ++j)
      for (auto [a, b] : row_segments(Z, j)) {
        double m = posterior_mean_theta(spec, table.stats(j, a, b));
        for (int t = a; t < b; ++t) sum(j, t) += m;
      }
  }
  return scaled(sum, static_cast<long>(samples.size()));
}

ChangeMatrix threshold_marginals(const DataMatrix& marginal) {
  ChangeMatrix Z(marginal.rows(), marginal.cols());
  for (int j = 0; j < marginal.rows(); ++j)
    for (int t = 1; t < marginal.cols(); ++t) Z(j, t) = marginal(j, t) >= 0.5 ? 1 : 0;
  return Z;
}

PosteriorSummary run(const DataMatrix& X, const RunConfig& config, const IterationObserver& observer) {
  config.validate();
  const int J = X.rows(), T = X.cols();
  if (J < 1 || T < 1) throw ValidationError("data must have at least one sequence and one position");

  PosteriorSummary out;
  out.chains = config.chains;
  if (config.prior) {
    out.prior = *config.prior;
  } else {
    if (J < 2) throw ValidationError("the default dictionary needs J >= 2; supply a dictionary for a single sequence");
    out.prior = init_weights(J);
  }
  out.prior.validate();
  if (config.eta) {
    out.spec = LikelihoodSpec::from_eta(config.family, *config.eta);
  } else {
    // Support is checked first so errors name the offending cell.
    const std::vector<double> ones(LikelihoodSpec::eta_size(config.family), 1.0);
    LikelihoodSpec probe = LikelihoodSpec::from_eta(config.family, ones);
    probe.check_data(X);
    EtaInit init = init_eta(X, config.family);
    out.spec = init.spec;
    for (auto& w : init.warnings) out.warnings.push_back("init_eta: " + w);
  }
  out.initial_prior = out.prior;
  out.initial_spec = out.spec;

  const MCEMSchedule schedule = config.schedule ? *config.schedule : MCEMSchedule::default_for(config.burnin);
  schedule.validate(config.burnin);
  const int last_update = schedule.iterations.empty() ? 0 : schedule.iterations.back();
  const bool mcem_active = config.mcem.fit_weights || config.mcem.fit_eta;

  PriorMoments moments = build_moment_tables(out.prior, J);
  auto table = std::make_unique<SegmentTable>(X, out.spec);

  ChangeMatrix start = config.initial_Z ? *config.initial_Z : ChangeMatrix(J, T);
  if (start.J() != J || start.T() != T) throw ValidationError("initial changepoint matrix has the wrong shape");
  start.validate();

  const Rng root(config.seed);
  std::vector<ChainState> states;
  std::vector<Rng> rngs;
  for (int c = 0; c < config.chains; ++c) {
    states.emplace_back(start);
    rngs.push_back(root.split(static_cast<std::uint64_t>(c)));
  }

  auto step = [&](int c) {
    if (config.kind == SamplerKind::Blocked) {
      out.swaps_accepted += mcmc_iteration(states[c], *table, moments, config.sampler, rngs[c]).swaps_accepted;
    } else {
      for (int s = 0; s < config.naive_sweeps; ++s) naive_gibbs_sweep(states[c], *table, moments, rngs[c]);
    }
  };

  MCEMStatistics window(J, T);
  for (int it = 1; it <= config.burnin; ++it) {
    for (int c = 0; c < config.chains; ++c) {
      step(c);
      if (observer) observer(Phase::BurnIn, it, c, states[c]);
      if (mcem_active && it <= last_update) window.add(states[c].Z(), *table);
    }
    if (mcem_active && schedule.contains(it)) {
      MCEMUpdate upd = mcem_step(window, out.prior, out.spec, config.mcem);
      window.clear();
      out.prior = upd.prior;
      out.spec = upd.spec;
      moments = std::move(upd.moments);
      table = std::make_unique<SegmentTable>(X, out.spec);
      for (auto& w : upd.warnings) out.warnings.push_back("mcem@" + std::to_string(it) + ": " + w);
      out.trajectory.push_back({it, out.prior.weights, std::vector<double>(out.spec.eta().begin(), out.spec.eta().end()),
                                upd.divergence, upd.eta_objective});
    }
  }

  if (config.samples > 0) {
    SummaryAccumulator acc(X, out.spec, moments);
    for (int it = 1; it <= config.samples; ++it) {
      for (int c = 0; c < config.chains; ++c) {
        step(c);
        if (observer) observer(Phase::Sampling, it, c, states[c]);
        acc.add(states[c].Z());
        if (config.keep_samples) out.samples.push_back(states[c].Z());
      }
    }
    out.samples_used = acc.count();
    out.marginal = acc.marginal();
    out.q_mean = acc.q_mean();
    out.theta_mean = acc.theta_mean();
    if (config.run_map) {
      MapResult map = map_estimate(threshold_marginals(out.marginal), *table, moments, config.map);
      if (!map.converged) out.warnings.push_back("MAP search stopped at the iteration cap");
      out.map = std::move(map);
    }
  }
  for (const auto& s : states) out.final_states.push_back(s.Z());
  return out;
}

}  // namespace basic
