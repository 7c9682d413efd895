#include "doe/density.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace doe {
namespace {

double variance(double log_var) { return std::max(std::exp(log_var), kMinVariance); }

void check_dims(GaussianView f, GaussianView g) {
  if (f.mean.size() != f.log_var.size() || g.mean.size() != g.log_var.size()) {
    throw std::invalid_argument("gaussian mean and log_var lengths differ");
  }
  if (f.dim() != g.dim()) {
    throw std::invalid_argument("dimension mismatch: " + std::to_string(f.dim()) + " vs " +
                                std::to_string(g.dim()));
  }
}

void check_sink(const GradSink& sink, std::size_t d) {
  if (sink.d_mean_f.size() != d || sink.d_logvar_f.size() != d || sink.d_mean_g.size() != d ||
      sink.d_logvar_g.size() != d) {
    throw std::invalid_argument("gradient sink dimension mismatch");
  }
}

// 0.5 * sum_i [lg - lf - 1 + vf/vg + diff^2/vg]
double kl_grad(GaussianView f, GaussianView g, double scale, const GradSink* sink) {
  double total = 0.0;
  for (std::size_t i = 0; i < f.dim(); ++i) {
    const double vf = variance(f.log_var[i]);
    const double vg = variance(g.log_var[i]);
    const double diff = f.mean[i] - g.mean[i];
    const double ratio = vf / vg;
    const double quad = diff * diff / vg;
    total += 0.5 * (std::log(vg) - std::log(vf) - 1.0 + ratio + quad);
    if (sink != nullptr) {
      sink->d_mean_f[i] += scale * diff / vg;
      sink->d_mean_g[i] -= scale * diff / vg;
      sink->d_logvar_f[i] += scale * 0.5 * (ratio - 1.0);
      sink->d_logvar_g[i] += scale * 0.5 * (1.0 - ratio - quad);
    }
  }
  return total;
}

// With mix = a*vg + (1-a)*vf and c = 1/(a(a-1)):
//   D = sum_i 0.5*diff^2/mix - 0.5*c*[log mix - (1-a)*log vf - a*log vg]
double renyi_grad(double a, GaussianView f, GaussianView g, double scale, const GradSink* sink) {
  const double c = 1.0 / (a * (a - 1.0));
  double total = 0.0;
  for (std::size_t i = 0; i < f.dim(); ++i) {
    const double vf = variance(f.log_var[i]);
    const double vg = variance(g.log_var[i]);
    const double mix = a * vg + (1.0 - a) * vf;
    if (!(mix > 0.0)) {
      throw std::domain_error("renyi: nonpositive mixture variance in dimension " +
                              std::to_string(i) + " for alpha=" + std::to_string(a));
    }
    const double diff = f.mean[i] - g.mean[i];
    const double log_ratio = std::log(mix) - (1.0 - a) * std::log(vf) - a * std::log(vg);
    total += 0.5 * diff * diff / mix - 0.5 * c * log_ratio;
    if (sink != nullptr) {
      const double quad_mix = 0.5 * diff * diff / (mix * mix);
      const double dmix_f = (1.0 - a) * vf;
      const double dmix_g = a * vg;
      sink->d_mean_f[i] += scale * diff / mix;
      sink->d_mean_g[i] -= scale * diff / mix;
      sink->d_logvar_f[i] += scale * (-quad_mix * dmix_f - 0.5 * c * (dmix_f / mix - (1.0 - a)));
      sink->d_logvar_g[i] += scale * (-quad_mix * dmix_g - 0.5 * c * (dmix_g / mix - a));
    }
  }
  return total;
}

// sum_i [log(vf + vg) + log(2 pi) + diff^2/(vf + vg)]
double elk_grad(GaussianView f, GaussianView g, double scale, const GradSink* sink) {
  const double log_two_pi = std::log(2.0 * std::numbers::pi);
  double total = 0.0;
  for (std::size_t i = 0; i < f.dim(); ++i) {
    const double vf = variance(f.log_var[i]);
    const double vg = variance(g.log_var[i]);
    const double sum = vf + vg;
    const double diff = f.mean[i] - g.mean[i];
    const double quad = diff * diff / sum;
    total += std::log(sum) + log_two_pi + quad;
    if (sink != nullptr) {
      const double common = (1.0 - quad) / sum;
      sink->d_mean_f[i] += scale * 2.0 * diff / sum;
      sink->d_mean_g[i] -= scale * 2.0 * diff / sum;
      sink->d_logvar_f[i] += scale * common * vf;
      sink->d_logvar_g[i] += scale * common * vg;
    }
  }
  return total;
}

double dispatch(const DivergenceKind& kind, GaussianView f, GaussianView g, double scale,
                const GradSink* sink) {
  check_dims(f, g);
  if (sink != nullptr) check_sink(*sink, f.dim());
  switch (kind.tag()) {
    case DivergenceKind::Tag::KL:
      return kl_grad(f, g, scale, sink);
    case DivergenceKind::Tag::ReverseKL: {
      if (sink == nullptr) return kl_grad(g, f, scale, nullptr);
      const GradSink swapped{sink->d_mean_g, sink->d_logvar_g, sink->d_mean_f, sink->d_logvar_f};
      return kl_grad(g, f, scale, &swapped);
    }
    case DivergenceKind::Tag::Renyi:
      return renyi_grad(kind.alpha(), f, g, scale, sink);
    case DivergenceKind::Tag::NegLogELK:
      return elk_grad(f, g, scale, sink);
  }
  throw std::logic_error("unknown divergence kind");
}

GradPair make_grad_pair(std::size_t d) {
  GradPair out;
  out.d_mean_f.assign(d, 0.0);
  out.d_logvar_f.assign(d, 0.0);
  out.d_mean_g.assign(d, 0.0);
  out.d_logvar_g.assign(d, 0.0);
  return out;
}

GradSink sink_of(GradPair& p) { return {p.d_mean_f, p.d_logvar_f, p.d_mean_g, p.d_logvar_g}; }

}  // namespace

DiagGaussian::DiagGaussian(std::vector<double> mean, std::vector<double> log_var)
    : mean_(std::move(mean)), log_var_(std::move(log_var)) {
  if (mean_.empty()) throw std::invalid_argument("gaussian dimension must be >= 1");
  if (mean_.size() != log_var_.size()) {
    throw std::invalid_argument("gaussian mean and log_var lengths differ");
  }
  for (std::size_t i = 0; i < mean_.size(); ++i) {
    if (!std::isfinite(mean_[i]) || !std::isfinite(log_var_[i])) {
      throw std::invalid_argument("gaussian parameters must be finite");
    }
  }
}

DiagGaussian DiagGaussian::isotropic(std::vector<double> mean, double variance) {
  if (!(variance > 0.0)) throw std::invalid_argument("variance must be positive");
  std::vector<double> log_var(mean.size(), std::log(variance));
  return DiagGaussian(std::move(mean), std::move(log_var));
}

DivergenceKind DivergenceKind::renyi(double alpha) {
  if (!std::isfinite(alpha) || alpha == 0.0 || alpha == 1.0) {
    throw std::invalid_argument("renyi alpha must be finite and not in {0, 1}");
  }
  return DivergenceKind(Tag::Renyi, alpha);
}

DivergenceKind DivergenceKind::parse(const std::string& text) {
  if (text == "kl") return kl();
  if (text == "rkl" || text == "reverse-kl") return reverse_kl();
  if (text == "elk") return neg_log_elk();
  const std::string prefix = "renyi:";
  if (text.rfind(prefix, 0) == 0) {
    const std::string rest = text.substr(prefix.size());
    double alpha = 0.0;
    const auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), alpha);
    if (ec != std::errc() || ptr != rest.data() + rest.size()) {
      throw std::invalid_argument("bad renyi alpha in divergence '" + text + "'");
    }
    return renyi(alpha);
  }
  throw std::invalid_argument("unknown divergence '" + text + "' (expected kl, rkl, elk, renyi:<a>)");
}

std::string DivergenceKind::to_string() const {
  switch (tag_) {
    case Tag::KL:
      return "kl";
    case Tag::ReverseKL:
      return "rkl";
    case Tag::NegLogELK:
      return "elk";
    case Tag::Renyi: {
      char buf[64];
      const auto res = std::to_chars(buf, buf + sizeof(buf), alpha_);
      return "renyi:" + std::string(buf, res.ptr);
    }
  }
  return "?";
}

double kl(GaussianView f, GaussianView g) { return dispatch(DivergenceKind::kl(), f, g, 0.0, nullptr); }

double renyi(double alpha, GaussianView f, GaussianView g) {
  return dispatch(DivergenceKind::renyi(alpha), f, g, 0.0, nullptr);
}

double neg_log_elk(GaussianView f, GaussianView g) {
  return dispatch(DivergenceKind::neg_log_elk(), f, g, 0.0, nullptr);
}

double divergence(const DivergenceKind& kind, GaussianView f, GaussianView g) {
  return dispatch(kind, f, g, 0.0, nullptr);
}

GradPair divergence_with_grad(const DivergenceKind& kind, GaussianView f, GaussianView g) {
  check_dims(f, g);
  GradPair out = make_grad_pair(f.dim());
  const GradSink sink = sink_of(out);
  out.value = dispatch(kind, f, g, 1.0, &sink);
  return out;
}

double accumulate_divergence_grad(const DivergenceKind& kind, GaussianView f, GaussianView g,
                                  double scale, const GradSink& sink) {
  return dispatch(kind, f, g, scale, &sink);
}

double penalty(const PenaltyConfig& cfg, GaussianView f, GaussianView g) {
  return std::max(0.0, divergence(cfg.kind, f, g) - cfg.gamma);
}

GradPair penalty_with_grad(const PenaltyConfig& cfg, GaussianView f, GaussianView g) {
  GradPair out = divergence_with_grad(cfg.kind, f, g);
  if (out.value > cfg.gamma) {
    out.value -= cfg.gamma;
    return out;
  }
  GradPair flat = make_grad_pair(f.dim());
  flat.value = 0.0;
  return flat;
}

double log_det_volume(GaussianView f) {
  double total = 0.0;
  for (double l : f.log_var) total += l;
  return total;
}

}  // namespace doe
