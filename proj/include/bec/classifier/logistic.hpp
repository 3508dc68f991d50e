#pragma once

// Classification layer: logistic regression over the detection vector,
// max-combination of several classifiers, and MAP weight updates under a
// diagonal Gaussian prior centred on a baseline model.
//
// The sigmoid is the usual increasing 1 / (1 + exp(-w.d)): a larger weight
// makes its detection more incriminating. There is no intercept; the
// threshold t absorbs the offset, and h(d) = [sigmoid(w.d) >= t].

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "bec/detectors/detection.hpp"
#include "bec/util/text.hpp"

namespace bec::classifier {

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// log(1 + exp(z)) without overflow.
inline double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

struct ClassifierModel {
  std::vector<double> w;
  double t = 0.5;
  std::string version = "0";
  std::string manifest_version = "1";
  std::vector<std::string> names;  // detection type names, parallel to w

  std::size_t dimension() const { return w.size(); }

  void validate() const {
    if (!(t > 0.0 && t < 1.0)) throw std::invalid_argument("classifier threshold must lie in (0, 1)");
    if (!names.empty() && names.size() != w.size()) throw std::invalid_argument("classifier names/weights size mismatch");
    for (double v : w) {
      if (!std::isfinite(v)) throw std::invalid_argument("classifier weight is not finite");
    }
  }

  std::string name_of(TypeId id) const { return id < names.size() ? names[id] : "type_" + std::to_string(id); }

  /// Weights for every type in `manifest`; fails if dimension or version differ.
  void check_manifest(const RegistryManifest& manifest) const {
    if (manifest.version() != manifest_version || manifest.dimension() != w.size()) {
      throw std::runtime_error("classifier model " + version + " (manifest version " + manifest_version + ", m=" +
                               std::to_string(w.size()) + ") does not match manifest version " + manifest.version() +
                               " (m=" + std::to_string(manifest.dimension()) + ")");
    }
  }

  friend bool operator==(const ClassifierModel&, const ClassifierModel&) = default;
};

// Model file: one field per line, weights as "weight <id> <name> <value>".
inline std::string format_weight(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void save_model(std::ostream& out, const ClassifierModel& m) {
  out << "# bec classifier model\n";
  out << "format classifier-v1\n";
  out << "version " << m.version << "\n";
  out << "manifest_version " << m.manifest_version << "\n";
  out << "threshold " << format_weight(m.t) << "\n";
  for (std::size_t i = 0; i < m.w.size(); ++i) {
    out << "weight " << i << " " << m.name_of(i) << " " << format_weight(m.w[i]) << "\n";
  }
}

inline std::string serialize_model(const ClassifierModel& m) {
  std::ostringstream ss;
  save_model(ss, m);
  return ss.str();
}

inline ClassifierModel load_model(std::istream& in) {
  ClassifierModel m;
  m.version.clear();
  m.manifest_version.clear();
  bool have_t = false, have_format = false;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) {
    throw std::runtime_error("classifier model line " + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view l = text::trim(line);
    if (l.empty() || l[0] == '#') continue;
    std::istringstream f{std::string(l)};
    std::string key;
    f >> key;
    if (key == "format") {
      std::string v;
      f >> v;
      if (v != "classifier-v1") fail("unsupported format '" + v + "'");
      have_format = true;
    } else if (key == "version") {
      f >> m.version;
    } else if (key == "manifest_version") {
      f >> m.manifest_version;
    } else if (key == "threshold") {
      std::string v;
      f >> v;
      auto t = text::parse_double(v);
      if (!t) fail("bad threshold");
      m.t = *t;
      have_t = true;
    } else if (key == "weight") {
      std::string id_s, name, v;
      if (!(f >> id_s >> name >> v)) fail("expected 'weight <id> <name> <value>'");
      auto id = text::parse_number<std::size_t>(id_s);
      auto w = text::parse_double(v);
      if (!id || !w || *id != m.w.size()) fail("weights must be listed with dense ascending ids");
      m.w.push_back(*w);
      m.names.push_back(name);
    } else {
      fail("unknown key '" + key + "'");
    }
  }
  if (!have_format || !have_t || m.version.empty() || m.manifest_version.empty()) {
    throw std::runtime_error("classifier model is missing format, version, manifest_version or threshold");
  }
  m.validate();
  return m;
}

inline ClassifierModel load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open classifier model " + path);
  return load_model(in);
}

inline void save_model_file(const std::string& path, const ClassifierModel& m) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write classifier model " + path);
  save_model(out, m);
}

// ---------------------------------------------------------------------------

inline double score(const std::vector<double>& d, const ClassifierModel& model,
                    std::string_view vector_manifest_version = {}) {
  if (d.size() != model.w.size()) {
    std::string vv = vector_manifest_version.empty() ? std::string("unknown") : std::string(vector_manifest_version);
    throw std::invalid_argument("dimension mismatch: detection vector has " + std::to_string(d.size()) +
                                " components (manifest version " + vv + "), model expects " +
                                std::to_string(model.w.size()) + " (manifest version " + model.manifest_version + ")");
  }
  double z = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) z += model.w[i] * d[i];
  return sigmoid(z);
}

struct Contribution {
  TypeId type_id = 0;
  std::string name;
  double score = 0.0;
  double weight = 0.0;
  Metadata metadata;

  auto key() const { return std::tie(type_id, score, weight, name, metadata); }
  friend bool operator==(const Contribution&, const Contribution&) = default;
};

struct Verdict {
  int label = 0;  // 1 = BEC
  double probability = 0.5;
  std::vector<Contribution> contributing;  // exactly the nonzero detections
  std::string model_version;

  friend bool operator==(const Verdict&, const Verdict&) = default;
};

inline Verdict classify(const DetectionVector& dv, const ClassifierModel& model) {
  Verdict v;
  v.probability = score(dv.d, model);
  v.label = v.probability >= model.t ? 1 : 0;
  v.model_version = model.version;
  for (TypeId i = 0; i < dv.d.size(); ++i) {
    if (dv.d[i] == 0.0) continue;
    Contribution c{i, model.name_of(i), dv.d[i], model.w[i], {}};
    for (const auto& det : dv.detections) {
      if (det.type_id == i) c.metadata = det.metadata;
    }
    v.contributing.push_back(std::move(c));
  }
  return v;
}

inline Verdict classify(const std::vector<double>& d, const ClassifierModel& model) {
  DetectionVector dv;
  dv.d = d;
  return classify(dv, model);
}

namespace detail {

// Total order used to pick the maximizing verdict. It ignores the label:
// combine's output keeps the chosen verdict's probability, version and
// contributions but may raise its label, so a label-aware order would make
// combine non-associative.
inline bool verdict_less(const Verdict& a, const Verdict& b) {
  if (a.probability != b.probability) return a.probability < b.probability;
  if (a.model_version != b.model_version) return a.model_version < b.model_version;
  return std::lexicographical_compare(a.contributing.begin(), a.contributing.end(), b.contributing.begin(),
                                      b.contributing.end(),
                                      [](const Contribution& x, const Contribution& y) { return x.key() < y.key(); });
}

}  // namespace detail

/// h(d) = max over classifiers: label and probability are maxima, the
/// explanation comes from the verdict with the highest probability.
inline Verdict combine(const std::vector<Verdict>& verdicts) {
  if (verdicts.empty()) throw std::invalid_argument("combine needs at least one verdict");
  const Verdict* best = &verdicts.front();
  double max_p = best->probability;
  int max_label = best->label;
  for (const auto& v : verdicts) {
    if (detail::verdict_less(*best, v)) best = &v;
    max_p = std::max(max_p, v.probability);
    max_label = std::max(max_label, v.label);
  }
  Verdict out = *best;
  out.probability = max_p;
  out.label = max_label;
  return out;
}

// ---------------------------------------------------------------------------
// Bayesian update

struct PriorSpec {
  std::vector<double> w_b;
  std::vector<double> sigma_diag;

  void validate(std::size_t m) const {
    if (w_b.size() != m || sigma_diag.size() != m) {
      throw std::invalid_argument("prior dimension mismatch: expected " + std::to_string(m));
    }
    for (double s : sigma_diag) {
      if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("prior sigma entries must be positive and finite");
    }
  }
};

enum class LabelSource { review_duty, customer_fp, customer_fn };

inline std::string_view to_string(LabelSource s) {
  switch (s) {
    case LabelSource::review_duty: return "review_duty";
    case LabelSource::customer_fp: return "customer_fp";
    case LabelSource::customer_fn: return "customer_fn";
  }
  return "?";
}

inline std::optional<LabelSource> parse_label_source(std::string_view s) {
  if (s == "review_duty") return LabelSource::review_duty;
  if (s == "customer_fp") return LabelSource::customer_fp;
  if (s == "customer_fn") return LabelSource::customer_fn;
  return std::nullopt;
}

struct LabeledVector {
  std::vector<double> d;
  int y = 0;
  LabelSource source = LabelSource::review_duty;
};

/// Prior centred on `baseline`, mapped onto `manifest` by type name. Types
/// the baseline does not know start at weight 0 with the wider sigma.
inline PriorSpec make_prior(const ClassifierModel& baseline, const RegistryManifest& manifest, double sigma_default,
                            double new_detector_sigma) {
  PriorSpec p;
  for (const auto& t : manifest.types()) {
    auto it = std::find(baseline.names.begin(), baseline.names.end(), t.name);
    if (it != baseline.names.end()) {
      p.w_b.push_back(baseline.w[static_cast<std::size_t>(it - baseline.names.begin())]);
      p.sigma_diag.push_back(sigma_default);
    } else {
      p.w_b.push_back(0.0);
      p.sigma_diag.push_back(new_detector_sigma);
    }
  }
  return p;
}

struct MapConfig {
  int max_iterations = 10000;
  double gradient_tolerance = 1e-6;
  double positive_class_weight = 1.0;  // 1 = no reweighting
  std::optional<double> threshold;     // default: baseline threshold
  double baseline_threshold = 0.5;
  std::string version = "map";
  std::string manifest_version = "1";
  std::vector<std::string> names;
};

/// Negative log posterior (up to a constant) and its gradient.
struct Objective {
  const std::vector<LabeledVector>& data;
  const PriorSpec& prior;
  double positive_class_weight = 1.0;

  double value(const Eigen::VectorXd& w) const {
    double f = 0.0;
    for (const auto& s : data) {
      double z = 0.0;
      for (std::size_t j = 0; j < s.d.size(); ++j) z += w[static_cast<Eigen::Index>(j)] * s.d[j];
      // BCE(y, sigmoid(z)) = softplus(z) - y z
      double bce = softplus(z) - (s.y ? z : 0.0);
      f += (s.y ? positive_class_weight : 1.0) * bce;
    }
    for (std::size_t j = 0; j < prior.w_b.size(); ++j) {
      double r = (w[static_cast<Eigen::Index>(j)] - prior.w_b[j]) / prior.sigma_diag[j];
      f += 0.5 * r * r;
    }
    return f;
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& w) const {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(w.size());
    for (const auto& s : data) {
      double z = 0.0;
      for (std::size_t j = 0; j < s.d.size(); ++j) z += w[static_cast<Eigen::Index>(j)] * s.d[j];
      double r = (s.y ? positive_class_weight : 1.0) * (sigmoid(z) - s.y);
      for (std::size_t j = 0; j < s.d.size(); ++j) g[static_cast<Eigen::Index>(j)] += r * s.d[j];
    }
    for (std::size_t j = 0; j < prior.w_b.size(); ++j) {
      auto k = static_cast<Eigen::Index>(j);
      g[k] += (w[k] - prior.w_b[j]) / (prior.sigma_diag[j] * prior.sigma_diag[j]);
    }
    return g;
  }

  Eigen::MatrixXd hessian(const Eigen::VectorXd& w) const {
    const auto m = w.size();
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(m, m);
    Eigen::VectorXd x(m);
    for (const auto& s : data) {
      double z = 0.0;
      for (Eigen::Index j = 0; j < m; ++j) {
        x[j] = s.d[static_cast<std::size_t>(j)];
        z += w[j] * x[j];
      }
      double p = sigmoid(z);
      h.noalias() += (s.y ? positive_class_weight : 1.0) * p * (1.0 - p) * x * x.transpose();
    }
    for (Eigen::Index j = 0; j < m; ++j) {
      double sd = prior.sigma_diag[static_cast<std::size_t>(j)];
      h(j, j) += 1.0 / (sd * sd);
    }
    return h;
  }
};

class MapConvergenceError : public std::runtime_error {
 public:
  MapConvergenceError(std::vector<double> last, double grad_norm, int iterations)
      : std::runtime_error("MAP estimate did not converge after " + std::to_string(iterations) +
                           " iterations (gradient norm " + format_weight(grad_norm) + ")"),
        last_iterate(std::move(last)),
        gradient_norm(grad_norm) {}
  std::vector<double> last_iterate;
  double gradient_norm;
};

struct MapReport {
  int iterations = 0;
  double gradient_norm = 0.0;
  double objective = 0.0;
  bool stopped_at_machine_precision = false;
};

/// Minimizes the negative log posterior with damped Newton steps and an
/// Armijo backtracking line search, starting from the prior mean.
///
/// Stops when the gradient norm is below tolerance, or when the accepted step
/// no longer moves w at double precision. The second rule matters for very
/// small sigma, where the prior curvature (1/sigma^2) amplifies rounding in
/// w into gradients far above any absolute tolerance.
inline ClassifierModel map_estimate(const std::vector<LabeledVector>& data, const PriorSpec& prior,
                                    const MapConfig& config = {}, MapReport* report = nullptr) {
  if (data.empty()) throw std::invalid_argument("map_estimate: no labeled data");
  const std::size_t m = prior.w_b.size();
  prior.validate(m);
  for (const auto& s : data) {
    if (s.d.size() != m) throw std::invalid_argument("map_estimate: labeled vector dimension does not match prior");
    if (s.y != 0 && s.y != 1) throw std::invalid_argument("map_estimate: labels must be 0 or 1");
  }
  Objective obj{data, prior, config.positive_class_weight};
  Eigen::VectorXd w(static_cast<Eigen::Index>(m));
  for (std::size_t j = 0; j < m; ++j) w[static_cast<Eigen::Index>(j)] = prior.w_b[j];

  double f = obj.value(w);
  Eigen::VectorXd g = obj.gradient(w);
  int it = 0;
  bool converged = false;
  bool machine_precision = false;
  for (; it < config.max_iterations; ++it) {
    if (g.norm() <= config.gradient_tolerance) {
      converged = true;
      break;
    }
    Eigen::MatrixXd h = obj.hessian(w);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
    Eigen::VectorXd dir;
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) dir = -ldlt.solve(g);
    if (dir.size() == 0 || !dir.allFinite() || dir.dot(g) >= 0) dir = -g;
    double step = 1.0;
    const double slope = g.dot(dir);
    Eigen::VectorXd next;
    double f_next = f;
    bool accepted = false;
    for (int k = 0; k < 60; ++k) {
      next = w + step * dir;
      f_next = obj.value(next);
      if (f_next <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    const double scale = 1.0 + w.cwiseAbs().maxCoeff();
    if (!accepted || (next - w).cwiseAbs().maxCoeff() <= 1e-12 * scale) {
      if (accepted) w = next;
      g = obj.gradient(w);
      f = obj.value(w);
      converged = true;
      machine_precision = true;
      ++it;
      break;
    }
    w = next;
    f = f_next;
    g = obj.gradient(w);
  }
  if (!converged) {
    throw MapConvergenceError(std::vector<double>(w.data(), w.data() + w.size()), g.norm(), it);
  }
  if (report) {
    report->iterations = it;
    report->gradient_norm = g.norm();
    report->objective = f;
    report->stopped_at_machine_precision = machine_precision;
  }
  ClassifierModel model;
  model.w.assign(w.data(), w.data() + w.size());
  model.t = config.threshold.value_or(config.baseline_threshold);
  model.version = config.version;
  model.manifest_version = config.manifest_version;
  model.names = config.names;
  model.validate();
  return model;
}

/// Convenience: MAP update of `baseline` with the same sigma on every weight.
inline ClassifierModel map_update(const ClassifierModel& baseline, const std::vector<LabeledVector>& data, double sigma,
                                  std::string new_version, MapReport* report = nullptr) {
  PriorSpec prior{baseline.w, std::vector<double>(baseline.w.size(), sigma)};
  MapConfig config;
  config.baseline_threshold = baseline.t;
  config.version = std::move(new_version);
  config.manifest_version = baseline.manifest_version;
  config.names = baseline.names;
  return map_estimate(data, prior, config, report);
}

/// Mean binary cross-entropy of `model` on `data`.
inline double log_loss(const std::vector<LabeledVector>& data, const std::vector<double>& w) {
  if (data.empty()) return 0.0;
  double total = 0.0;
  for (const auto& s : data) {
    double z = 0.0;
    for (std::size_t j = 0; j < s.d.size(); ++j) z += w[j] * s.d[j];
    total += softplus(z) - (s.y ? z : 0.0);
  }
  return total / static_cast<double>(data.size());
}

// ---------------------------------------------------------------------------

struct WeightDelta {
  TypeId type_id = 0;
  std::string name;
  double before = 0.0;
  double after = 0.0;
  double delta = 0.0;  // after - before
};

/// Per-type weight differences b - a, largest |delta| first (ties by type id).
inline std::vector<WeightDelta> compare_weights(const ClassifierModel& a, const ClassifierModel& b) {
  if (a.manifest_version != b.manifest_version || a.w.size() != b.w.size()) {
    throw std::invalid_argument("compare_weights: models use different manifests (" + a.manifest_version + " vs " +
                                b.manifest_version + ")");
  }
  std::vector<WeightDelta> out;
  for (TypeId i = 0; i < a.w.size(); ++i) out.push_back({i, b.name_of(i), a.w[i], b.w[i], b.w[i] - a.w[i]});
  std::stable_sort(out.begin(), out.end(),
                   [](const WeightDelta& x, const WeightDelta& y) { return std::abs(x.delta) > std::abs(y.delta); });
  return out;
}

}  // namespace bec::classifier
