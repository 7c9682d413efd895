#pragma once

#include <span>
#include <string>
#include <vector>

namespace doe {

/// Read-only view of a diagonal Gaussian stored elsewhere (a checkpoint row,
/// an embedding table row). Variance is exp(log_var) per dimension.
struct GaussianView {
  std::span<const double> mean;
  std::span<const double> log_var;

  std::size_t dim() const { return mean.size(); }
};

/// Owning diagonal Gaussian N(mean, diag(exp(log_var))).
class DiagGaussian {
 public:
  /// Throws std::invalid_argument on empty, mismatched or non-finite input.
  DiagGaussian(std::vector<double> mean, std::vector<double> log_var);

  /// Isotropic N(mean, variance * I).
  static DiagGaussian isotropic(std::vector<double> mean, double variance);

  std::size_t dim() const { return mean_.size(); }
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& log_var() const { return log_var_; }

  GaussianView view() const { return {mean_, log_var_}; }
  operator GaussianView() const { return view(); }  // NOLINT(google-explicit-constructor)

 private:
  std::vector<double> mean_;
  std::vector<double> log_var_;
};

class DivergenceKind {
 public:
  enum class Tag { KL, ReverseKL, Renyi, NegLogELK };

  static DivergenceKind kl() { return DivergenceKind(Tag::KL, 0.0); }
  static DivergenceKind reverse_kl() { return DivergenceKind(Tag::ReverseKL, 0.0); }
  static DivergenceKind neg_log_elk() { return DivergenceKind(Tag::NegLogELK, 0.0); }
  /// Throws std::invalid_argument for alpha in {0, 1} or non-finite alpha.
  static DivergenceKind renyi(double alpha);

  /// Parses "kl", "rkl", "elk" or "renyi:<alpha>".
  static DivergenceKind parse(const std::string& text);

  Tag tag() const { return tag_; }
  double alpha() const { return alpha_; }
  std::string to_string() const;

  friend bool operator==(const DivergenceKind&, const DivergenceKind&) = default;

 private:
  DivergenceKind(Tag tag, double alpha) : tag_(tag), alpha_(alpha) {}

  Tag tag_;
  double alpha_;
};

struct PenaltyConfig {
  DivergenceKind kind = DivergenceKind::kl();
  double gamma = 0.0;
};

/// Divergence value plus its partials with respect to both Gaussians'
/// means and log-variances.
struct GradPair {
  double value = 0.0;
  std::vector<double> d_mean_f, d_logvar_f, d_mean_g, d_logvar_g;
};

/// Output buffers for the allocation-free gradient path. Each span must have
/// the inputs' dimension; results are accumulated as `scale * partial`.
struct GradSink {
  std::span<double> d_mean_f, d_logvar_f, d_mean_g, d_logvar_g;
};

/// Smallest variance produced when exponentiating a log-variance.
inline constexpr double kMinVariance = 1e-38;

double kl(GaussianView f, GaussianView g);
double renyi(double alpha, GaussianView f, GaussianView g);
double neg_log_elk(GaussianView f, GaussianView g);
double divergence(const DivergenceKind& kind, GaussianView f, GaussianView g);

GradPair divergence_with_grad(const DivergenceKind& kind, GaussianView f, GaussianView g);

/// Computes the divergence and adds `scale` times its gradient into `sink`.
/// Returns the (unscaled) divergence value.
double accumulate_divergence_grad(const DivergenceKind& kind, GaussianView f, GaussianView g,
                                  double scale, const GradSink& sink);

/// max(0, D(f || g) - gamma).
double penalty(const PenaltyConfig& cfg, GaussianView f, GaussianView g);

/// Penalty with gradient; the gradient is zero unless D(f || g) > gamma.
GradPair penalty_with_grad(const PenaltyConfig& cfg, GaussianView f, GaussianView g);

/// log det(Sigma) = sum of log-variances.
double log_det_volume(GaussianView f);

}  // namespace doe
