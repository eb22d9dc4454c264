#include "basic/prior.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "basic/errors.hpp"
#include "basic/numeric.hpp"

namespace basic {

Atom Atom::point(double location) {
  if (!(location >= 0.0 && location <= 1.0))
    throw ValidationError("point-mass location must lie in [0, 1]");
  return Atom(Kind::PointMass, location, 0.0);
}

Atom Atom::beta(double alpha, double beta) {
  if (!(alpha > 0.0 && beta > 0.0)) throw ValidationError("Beta atom parameters must be positive");
  return Atom(Kind::Beta, alpha, beta);
}

double Atom::log_moment(double a, double b) const {
  if (kind_ == Kind::PointMass) return log_point_moment(a_, a, b);
  return log_beta_fn(a_ + a, b_ + b) - log_beta_fn(a_, b_);
}

double Atom::draw(Rng& rng) const {
  if (kind_ == Kind::PointMass) return a_;
  std::gamma_distribution<double> ga(a_, 1.0), gb(b_, 1.0);
  double x = ga(rng.engine());
  double y = gb(rng.engine());
  return x / (x + y);
}

std::string Atom::describe() const {
  std::ostringstream os;
  os.precision(17);
  if (kind_ == Kind::PointMass)
    os << "point:" << a_;
  else
    os << "beta:" << a_ << ":" << b_;
  return os.str();
}

ChangepointPrior::ChangepointPrior(std::vector<Atom> a, std::vector<double> w)
    : atoms(std::move(a)), weights(std::move(w)) {
  validate();
}

void ChangepointPrior::validate() const {
  if (atoms.empty()) throw ValidationError("changepoint prior dictionary is empty");
  if (atoms.size() != weights.size()) throw ValidationError("prior needs one weight per dictionary atom");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("prior weights must be nonnegative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw ValidationError("prior weights must sum to 1");
}

double ChangepointPrior::draw_q(Rng& rng) const {
  double u = rng.uniform();
  std::size_t k = 0;
  double acc = weights[0];
  while (u >= acc && k + 1 < weights.size()) acc += weights[++k];
  return atoms[k].draw(rng);
}

ChangepointPrior ChangepointPrior::point_masses(std::vector<double> locations, std::vector<double> weights) {
  std::vector<Atom> atoms;
  atoms.reserve(locations.size());
  for (double q : locations) atoms.push_back(Atom::point(q));
  return ChangepointPrior(std::move(atoms), std::move(weights));
}

double PriorMoments::f(int k) const { return std::exp(log_f.at(k)); }
double PriorMoments::g(int k) const { return std::exp(log_g.at(k)); }

double PriorMoments::log_c(int others) const {
  double lg = log_g[others + 1];
  if (lg == kNegInf) return kNegInf;
  return log_f[others + 1] - lg;
}

double PriorMoments::log_one_minus_c(int others) const {
  double lg = log_g[others + 1];
  if (lg == kNegInf) return 0.0;
  return log_f[others] - lg;
}

double PriorMoments::posterior_mean_q(int k) const {
  if (log_f[k] == kNegInf) throw ValidationError("prior assigns zero probability to the observed column count");
  return std::exp(log_h[k] - log_f[k]);
}

namespace {

double mixture_log_moment(const ChangepointPrior& prior, double a, double b) {
  std::vector<double> terms;
  terms.reserve(prior.size());
  for (std::size_t i = 0; i < prior.size(); ++i) {
    if (prior.weights[i] <= 0.0) continue;
    terms.push_back(std::log(prior.weights[i]) + prior.atoms[i].log_moment(a, b));
  }
  return log_sum_exp(terms);
}

}  // namespace

PriorMoments build_moment_tables(const ChangepointPrior& prior, int J) {
  prior.validate();
  if (J < 1) throw ValidationError("moment tables need J >= 1");
  PriorMoments m;
  m.J = J;
  m.log_f.resize(J + 1);
  m.log_g.assign(J + 1, kNegInf);
  m.log_h.resize(J + 1);
  for (int k = 0; k <= J; ++k) {
    m.log_f[k] = mixture_log_moment(prior, k, J - k);
    m.log_h[k] = mixture_log_moment(prior, k + 1, J - k);
    if (k >= 1) m.log_g[k] = mixture_log_moment(prior, k - 1, J - k);
  }
  m.log_f_suffix_max.assign(J + 2, kNegInf);
  for (int k = J; k >= 0; --k) m.log_f_suffix_max[k] = std::max(m.log_f[k], m.log_f_suffix_max[k + 1]);
  return m;
}

double log_dictionary_moment(const ChangepointPrior& prior, std::size_t atom, int l, int J) {
  if (atom >= prior.size()) throw ValidationError("dictionary atom index out of range");
  if (l < 0 || l > J) throw ValidationError("dictionary moment exponent out of range");
  return prior.atoms[atom].log_moment(l, J - l);
}

double dictionary_moment(const ChangepointPrior& prior, std::size_t atom, int l, int J) {
  return std::exp(log_dictionary_moment(prior, atom, l, J));
}

double log_prior_Z(const ChangeMatrix& Z, const PriorMoments& moments) {
  if (Z.J() != moments.J) throw ValidationError("moment tables were built for a different J");
  double total = 0.0;
  for (int t = 1; t < Z.T(); ++t) total += moments.log_f[Z.column_count(t)];
  return total;
}

ChangepointPrior init_weights(int J) {
  if (J < 2) throw ValidationError("default dictionary needs J >= 2");
  const int n = J / 2;
  std::vector<double> locations, weights;
  for (int k = 0; k < n; ++k) {
    locations.push_back(static_cast<double>(k) / J);
    weights.push_back(n == 1 ? 1.0 : (k == 0 ? 0.9 : 0.1 / (n - 1)));
  }
  // Renormalize away rounding in 0.1 / (n - 1).
  double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  for (double& w : weights) w /= total;
  return ChangepointPrior::point_masses(std::move(locations), std::move(weights));
}

}  // namespace basic
