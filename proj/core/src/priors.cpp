#include "monocuboid/priors.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "monocuboid/error.hpp"

namespace monocuboid {

using json = nlohmann::json;

void SizePrior::validate() const {
  if (!mu.allFinite() || (mu.array() <= 0.0).any()) {
    throw InvalidInput("prior '" + class_name + "': mu must be positive");
  }
  if (!sigma.allFinite() || (sigma - sigma.transpose()).norm() > 1e-12 * (1.0 + sigma.norm())) {
    throw InvalidInput("prior '" + class_name + "': sigma must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Mat3> es(sigma);
  if (es.eigenvalues()(0) <= 0.0) {
    throw InvalidInput("prior '" + class_name + "': sigma must be positive definite");
  }
}

double median_objective(std::span<const Eigen::VectorXd> vs, const Eigen::VectorXd& m) {
  double s = 0.0;
  for (const auto& v : vs) s += (v - m).norm();
  return s;
}

Eigen::VectorXd geometric_median(std::span<const Eigen::VectorXd> vs, double tol, int max_iters) {
  if (vs.empty()) throw InvalidInput("geometric median of an empty set");
  const auto dim = vs.front().size();
  for (const auto& v : vs) {
    if (v.size() != dim) throw InvalidInput("geometric median inputs differ in dimension");
  }
  if (vs.size() == 1) return vs.front();

  Eigen::VectorXd y = Eigen::VectorXd::Zero(dim);
  for (const auto& v : vs) y += v;
  y /= static_cast<double>(vs.size());

  constexpr double kCoincide = 1e-12;
  for (int it = 0; it < max_iters; ++it) {
    Eigen::VectorXd num = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd pull = Eigen::VectorXd::Zero(dim);  // sum of unit vectors towards data
    double den = 0.0;
    int coincident = 0;
    for (const auto& v : vs) {
      const double d = (v - y).norm();
      if (d < kCoincide) {
        ++coincident;
        continue;
      }
      num += v / d;
      den += 1.0 / d;
      pull += (v - y) / d;
    }
    if (den == 0.0) return y;  // every point coincides with y

    Eigen::VectorXd next;
    if (coincident == 0) {
      next = num / den;
    } else {
      // Vardi-Zhang: y is optimal if the pull of the other points does not
      // exceed the weight sitting at y; otherwise step off the data point.
      const double r = pull.norm();
      const double eta = static_cast<double>(coincident);
      if (r <= eta) return y;
      const Eigen::VectorXd T = num / den;
      const double gamma = eta / r;
      next = (1.0 - gamma) * T + gamma * y;
    }
    const double step = (next - y).norm();
    y = std::move(next);
    if (step < tol) break;
  }
  return y;
}

SizePrior fit_prior(std::string class_name, std::span<const Vec3> dims) {
  if (dims.size() < 4) {
    throw InvalidInput("fitting a prior for '" + class_name + "' needs at least 4 samples");
  }
  std::vector<Eigen::VectorXd> samples;
  samples.reserve(dims.size());
  for (const auto& d : dims) {
    if (!d.allFinite() || (d.array() <= 0.0).any()) {
      throw InvalidInput("dimension samples must be positive and finite");
    }
    samples.emplace_back(d);
  }
  const Vec3 mu = geometric_median(samples);

  std::vector<Eigen::VectorXd> outer;
  outer.reserve(dims.size());
  for (const auto& d : dims) {
    const Vec3 e = d - mu;
    const Mat3 o = e * e.transpose();
    outer.emplace_back(Eigen::Map<const Eigen::Matrix<double, 9, 1>>(o.data()));
  }
  const Eigen::VectorXd flat = geometric_median(outer);
  Mat3 sigma = Eigen::Map<const Mat3>(flat.data()) / kOuterProductMedianScale;
  sigma = 0.5 * (sigma + sigma.transpose());

  Eigen::SelfAdjointEigenSolver<Mat3> es(sigma);
  const Vec3 floored = es.eigenvalues().cwiseMax(kCovarianceFloor);
  sigma = es.eigenvectors() * floored.asDiagonal() * es.eigenvectors().transpose();
  sigma = 0.5 * (sigma + sigma.transpose());

  SizePrior prior;
  prior.class_name = std::move(class_name);
  prior.mu = mu;
  prior.sigma = sigma;
  prior.n_samples = static_cast<int>(dims.size());
  return prior;
}

PriorTable::PriorTable(std::vector<SizePrior> classes) : classes_(std::move(classes)) {
  for (const auto& c : classes_) c.validate();
}

bool PriorTable::contains(std::string_view class_name) const {
  for (const auto& c : classes_) {
    if (c.class_name == class_name) return true;
  }
  return false;
}

SizePrior PriorTable::generic() const {
  for (const auto& c : classes_) {
    if (c.class_name == kGenericClass) return c;
  }
  if (classes_.empty()) throw InvalidInput("prior table is empty");
  std::vector<Eigen::VectorXd> mus, sigmas;
  int n = 0;
  for (const auto& c : classes_) {
    mus.emplace_back(c.mu);
    sigmas.emplace_back(Eigen::Map<const Eigen::Matrix<double, 9, 1>>(c.sigma.data()));
    n += c.n_samples;
  }
  SizePrior g;
  g.class_name = std::string(kGenericClass);
  g.mu = geometric_median(mus);
  const Eigen::VectorXd s = geometric_median(sigmas);
  Mat3 sigma = Eigen::Map<const Mat3>(s.data());
  // Spread of the class means is part of the generic uncertainty.
  for (const auto& c : classes_) {
    const Vec3 e = c.mu - g.mu;
    sigma += e * e.transpose() / static_cast<double>(classes_.size());
  }
  g.sigma = 0.5 * (sigma + sigma.transpose());
  Eigen::SelfAdjointEigenSolver<Mat3> es(g.sigma);
  const Vec3 floored = es.eigenvalues().cwiseMax(kCovarianceFloor);
  g.sigma = es.eigenvectors() * floored.asDiagonal() * es.eigenvectors().transpose();
  g.sigma = 0.5 * (g.sigma + g.sigma.transpose());
  g.n_samples = n;
  return g;
}

SizePrior PriorTable::lookup(std::string_view class_name, bool fallback) const {
  for (const auto& c : classes_) {
    if (c.class_name == class_name) return c;
  }
  if (!fallback) throw InvalidInput("unknown prototype class '" + std::string(class_name) + "'");
  return generic();
}

std::string PriorTable::to_json() const {
  json classes = json::array();
  for (const auto& c : classes_) {
    json sigma = json::array();
    for (int i = 0; i < 3; ++i) sigma.push_back({c.sigma(i, 0), c.sigma(i, 1), c.sigma(i, 2)});
    classes.push_back({{"name", c.class_name},
                       {"mu", {c.mu.x(), c.mu.y(), c.mu.z()}},
                       {"sigma", sigma},
                       {"n_samples", c.n_samples}});
  }
  json doc = {{"version", kVersion}, {"classes", classes}};
  return doc.dump(2) + "\n";
}

PriorTable PriorTable::from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidInput(std::string("prior table: ") + e.what());
  }
  try {
    if (doc.at("version").get<int>() != kVersion) {
      throw InvalidInput("prior table: unsupported version " + doc.at("version").dump());
    }
    std::vector<SizePrior> classes;
    for (const auto& c : doc.at("classes")) {
      SizePrior p;
      p.class_name = c.at("name").get<std::string>();
      const auto& mu = c.at("mu");
      if (mu.size() != 3) throw InvalidInput("prior table: mu must have 3 entries");
      for (int i = 0; i < 3; ++i) p.mu(i) = mu.at(i).get<double>();
      const auto& sigma = c.at("sigma");
      if (sigma.size() != 3) throw InvalidInput("prior table: sigma must be 3x3");
      for (int i = 0; i < 3; ++i) {
        if (sigma.at(i).size() != 3) throw InvalidInput("prior table: sigma must be 3x3");
        for (int j = 0; j < 3; ++j) p.sigma(i, j) = sigma.at(i).at(j).get<double>();
      }
      p.n_samples = c.value("n_samples", 0);
      classes.push_back(std::move(p));
    }
    return PriorTable(std::move(classes));
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("prior table: ") + e.what());
  }
}

void PriorTable::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out << to_json();
}

PriorTable PriorTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace monocuboid
