#pragma once

#include <string>
#include <vector>

#include "basic/matrix.hpp"
#include "basic/rng.hpp"

namespace basic {

// One dictionary component of the changepoint-frequency prior: either a
// point mass at `location` or a Beta(alpha, beta) density on [0, 1].
class Atom {
 public:
  enum class Kind { PointMass, Beta };

  static Atom point(double location);
  static Atom beta(double alpha, double beta);

  Kind kind() const noexcept { return kind_; }
  double location() const noexcept { return a_; }
  double alpha() const noexcept { return a_; }
  double beta_param() const noexcept { return b_; }

  // log of the integral of q^a (1-q)^b against this atom.
  double log_moment(double a, double b) const;
  double draw(Rng& rng) const;
  std::string describe() const;

  bool operator==(const Atom&) const = default;

 private:
  Atom(Kind kind, double a, double b) : kind_(kind), a_(a), b_(b) {}
  Kind kind_;
  double a_;
  double b_;
};

// Mixture prior over the per-position change probability q.
struct ChangepointPrior {
  std::vector<Atom> atoms;
  std::vector<double> weights;

  ChangepointPrior() = default;
  ChangepointPrior(std::vector<Atom> atoms, std::vector<double> weights);

  std::size_t size() const noexcept { return atoms.size(); }
  // Throws ValidationError on empty dictionaries, negative weights or
  // weights not summing to one within 1e-12.
  void validate() const;
  double draw_q(Rng& rng) const;

  static ChangepointPrior point_masses(std::vector<double> locations, std::vector<double> weights);
};

// Prior moment tables over column counts, stored in log space:
//   f(k) = E[q^k (1-q)^(J-k)]        k = 0..J
//   g(k) = E[q^(k-1) (1-q)^(J-k)]    k = 1..J
//   h(k) = E[q^(k+1) (1-q)^(J-k)]    k = 0..J  (numerator of E[q | k])
struct PriorMoments {
  int J = 0;
  std::vector<double> log_f;
  std::vector<double> log_g;  // index 0 unused (-inf)
  std::vector<double> log_h;
  std::vector<double> log_f_suffix_max;  // max_{m >= k} log_f[m], size J+2

  double f(int k) const;
  double g(int k) const;

  // Conditional probability that one more sequence changes at a position
  // where `others` of the remaining J-1 sequences change. A zero g gives
  // c = 0 (the prior forbids the configuration).
  double log_c(int others) const;
  double log_one_minus_c(int others) const;

  // E[q_t | N_t = k].
  double posterior_mean_q(int k) const;
};

PriorMoments build_moment_tables(const ChangepointPrior& prior, int J);

// Integral of q^l (1-q)^(J-l) against dictionary atom `atom`.
double dictionary_moment(const ChangepointPrior& prior, std::size_t atom, int l, int J);
double log_dictionary_moment(const ChangepointPrior& prior, std::size_t atom, int l, int J);

// Sum over t >= 1 of log f(N_t); -inf when the prior forbids Z.
double log_prior_Z(const ChangeMatrix& Z, const PriorMoments& moments);

// Default dictionary: point masses at k/J for k = 0..floor(J/2)-1 with
// weight 0.9 on the zero atom and the rest spread uniformly. J = 2 and
// J = 3 give the single atom at zero.
ChangepointPrior init_weights(int J);

}  // namespace basic
