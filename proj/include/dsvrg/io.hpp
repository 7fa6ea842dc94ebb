#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <Eigen/Dense>

#include "dsvrg/cluster.hpp"
#include "dsvrg/data_alloc.hpp"
#include "dsvrg/error.hpp"
#include "dsvrg/lowerbound.hpp"
#include "dsvrg/objective.hpp"
#include "dsvrg/rng.hpp"
#include "dsvrg/svrg.hpp"

namespace dsvrg {

/// Shortest decimal string that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

template <class Int>
bool parse_int(std::string_view s, Int& out) {
  if (s.empty()) return false;
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

// ---------------------------------------------------------------- LIBSVM

/// Reads `label idx:val ...` lines with 1-based ascending indices. Blank lines
/// and `#` lines are skipped. d is the largest index seen unless `min_dim`
/// is larger.
inline Dataset parse_libsvm(std::istream& in, Index min_dim = 0, const std::string& name = "<stream>") {
  std::vector<std::vector<std::pair<Index, double>>> rows;
  std::vector<double> labels;
  Index d = min_dim;
  std::string line;
  Index lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok) || tok.front() == '#') continue;
    auto where = [&](const std::string& msg) { return name + ":" + std::to_string(lineno) + ": " + msg; };
    double label = 0.0;
    if (!parse_double(tok, label)) fail(ErrorCode::Parse, where("bad label '" + tok + "'"));
    std::vector<std::pair<Index, double>> feats;
    Index last = 0;
    while (ls >> tok) {
      if (tok.front() == '#') break;
      const auto colon = tok.find(':');
      if (colon == std::string::npos) fail(ErrorCode::Parse, where("expected idx:val, got '" + tok + "'"));
      Index idx = 0;
      double val = 0.0;
      if (!parse_int(std::string_view(tok).substr(0, colon), idx) || idx == 0)
        fail(ErrorCode::Parse, where("bad feature index in '" + tok + "'"));
      if (!parse_double(std::string_view(tok).substr(colon + 1), val))
        fail(ErrorCode::Parse, where("bad feature value in '" + tok + "'"));
      if (idx <= last) fail(ErrorCode::Parse, where("feature indices must ascend"));
      last = idx;
      feats.emplace_back(idx, val);
    }
    d = std::max(d, last);
    rows.push_back(std::move(feats));
    labels.push_back(label);
  }
  if (rows.empty()) fail(ErrorCode::EmptyDataset, name + " has no data points");
  Dataset ds;
  ds.features = RowMatrix::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
  ds.labels.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (auto [idx, val] : rows[r]) ds.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(idx - 1)) = val;
    ds.labels(static_cast<Eigen::Index>(r)) = labels[r];
  }
  return ds;
}

inline Dataset parse_libsvm(const std::filesystem::path& path, Index min_dim = 0) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  return parse_libsvm(in, min_dim, path.string());
}

/// Writes nonzero features only, shortest round-trip decimals.
inline void write_libsvm(std::ostream& os, const Dataset& ds) {
  for (Index i = 0; i < ds.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    os << format_double(ds.labels(r));
    for (Eigen::Index c = 0; c < ds.features.cols(); ++c) {
      const double v = ds.features(r, c);
      if (v != 0.0) os << ' ' << (c + 1) << ':' << format_double(v);
    }
    os << '\n';
  }
}

inline void write_libsvm(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream os(path);
  if (!os) fail(ErrorCode::Io, "cannot write " + path.string());
  write_libsvm(os, ds);
}

/// Rescales labels affinely onto [0, 1].
inline void rescale_labels_unit(Dataset& ds) {
  const double lo = ds.labels.minCoeff();
  const double hi = ds.labels.maxCoeff();
  if (hi > lo) ds.labels = (ds.labels.array() - lo) / (hi - lo);
}

// ---------------------------------------------------------------- features

/// Random Fourier features for the Gaussian kernel exp(-||a-a'||^2 / (2 bw^2)):
/// z(a) = sqrt(2/D) (cos(w_r^T a), sin(w_r^T a))_{r <= D/2}, w_r ~ N(0, I / bw^2).
inline Dataset rff_transform(const Dataset& ds, Index D, double bandwidth, std::uint64_t seed) {
  require(D >= 2 && D % 2 == 0, ErrorCode::InvalidArgument, "RFF dimension must be even and positive");
  require(bandwidth > 0.0, ErrorCode::InvalidArgument, "RFF bandwidth must be positive");
  auto rng = CounterRng::stream(seed, Stream::Features);
  std::normal_distribution<double> normal(0.0, 1.0 / bandwidth);
  const auto half = static_cast<Eigen::Index>(D / 2);
  Matrix W(ds.features.cols(), half);
  for (Eigen::Index c = 0; c < half; ++c)
    for (Eigen::Index r = 0; r < W.rows(); ++r) W(r, c) = normal(rng);
  const Matrix proj = ds.features * W;
  const double scale = std::sqrt(2.0 / static_cast<double>(D));
  Dataset out;
  out.labels = ds.labels;
  out.features.resize(ds.features.rows(), static_cast<Eigen::Index>(D));
  out.features.leftCols(half) = scale * proj.array().cos().matrix();
  out.features.rightCols(half) = scale * proj.array().sin().matrix();
  return out;
}

// ---------------------------------------------------------------- exact optima

struct RidgeSolution {
  Vector x_star;
  Matrix hessian;  // 2/N A^T A + lambda I
};

/// Minimizer of (1/N) sum (a_i^T x - b_i)^2 + (lambda/2)||x||^2.
inline RidgeSolution solve_ridge(const Dataset& ds, double lambda) {
  const double N = static_cast<double>(ds.size());
  RidgeSolution s;
  s.hessian = (2.0 / N) * (ds.features.transpose() * ds.features);
  s.hessian.diagonal().array() += lambda;
  const Vector rhs = (2.0 / N) * (ds.features.transpose() * ds.labels);
  s.x_star = s.hessian.ldlt().solve(rhs);
  return s;
}

/// Damped Newton with Armijo backtracking for the classification losses.
inline Vector solve_newton(const ErmObjective& f, double tol = 1e-13, Index max_iter = 200) {
  require(f.lambda() > 0.0, ErrorCode::StrongConvexityUnavailable, "Newton solve needs lambda > 0");
  const auto& A = f.data().features;
  const double N = static_cast<double>(f.size());
  const auto d = static_cast<Eigen::Index>(f.dim());
  Vector x = Vector::Zero(d);
  const double g0 = std::max(1.0, full_gradient(f, x).norm());
  for (Index it = 0; it < max_iter; ++it) {
    const Vector g = full_gradient(f, x);
    if (g.norm() <= tol * g0) break;
    Vector curv(static_cast<Eigen::Index>(f.size()));
    for (Index i = 0; i < f.size(); ++i) {
      const double z = f.margin(i, x);
      double c = 0.0;
      switch (f.loss()) {
        case LossKind::Square: c = 2.0; break;
        case LossKind::Logistic: {
          const double s = 1.0 / (1.0 + std::exp(-z));
          c = s * (1.0 - s);
          break;
        }
        case LossKind::SmoothHinge: c = (z > 0.0 && z < 1.0) ? 1.0 : 0.0; break;
      }
      curv(static_cast<Eigen::Index>(i)) = c;
    }
    Matrix H = A.transpose() * curv.asDiagonal() * A / N;
    H.diagonal().array() += f.lambda();
    const Vector step = H.ldlt().solve(g);
    const double fx = full_value(f, x);
    double t = 1.0;
    Vector trial = x - step;
    while (full_value(f, trial) > fx - 1e-4 * t * g.dot(step) && t > 1e-12) {
      t *= 0.5;
      trial = x - t * step;
    }
    if (trial == x) break;
    x = trial;
  }
  return x;
}

/// x* and a gap functor f(x) - f(x*) for an ERM objective.
struct ExactOptimum {
  Vector x_star;
  double f_star = 0.0;
  GapOracle gap;
};

inline ExactOptimum exact_optimum(const ErmObjective& f) {
  ExactOptimum out;
  if (f.loss() == LossKind::Square) {
    auto sol = solve_ridge(f.data(), f.lambda());
    out.x_star = sol.x_star;
    out.f_star = full_value(f, out.x_star);
    const Vector xs = sol.x_star;
    const Matrix H = std::move(sol.hessian);
    out.gap = [xs, H](const Vector& x) {
      const Vector e = x - xs;
      return 0.5 * e.dot(H * e);
    };
  } else {
    out.x_star = solve_newton(f);
    out.f_star = full_value(f, out.x_star);
    const double fs = out.f_star;
    out.gap = [&f, fs](const Vector& x) { return full_value(f, x) - fs; };
  }
  return out;
}

// ---------------------------------------------------------------- synthetic data

struct SynthRidge {
  Dataset data;
  double lambda = 0.0;
  Vector x_star;
  Matrix hessian;
};

/// Gaussian features with per-coordinate scales decaying geometrically from 1
/// to 1e-3 (so the curvature of the data term is far below lambda in the weak
/// directions), labels a^T x0 + 0.1 noise. lambda is set so that
/// estimate_constants reports exactly `kappa_target`.
inline SynthRidge synth_ridge(Index n_points, Index d, double kappa_target, std::uint64_t seed,
                              GammaConvention conv = GammaConvention::Curvature) {
  require(n_points >= 1 && d >= 1, ErrorCode::InvalidArgument, "need at least one point and one feature");
  require(kappa_target >= 1.0, ErrorCode::InvalidArgument, "kappa target must be at least 1");
  auto rng = CounterRng::stream(seed, Stream::Data);
  auto noise_rng = CounterRng::stream(seed, Stream::Noise);
  std::normal_distribution<double> normal(0.0, 1.0);
  SynthRidge out;
  const auto N = static_cast<Eigen::Index>(n_points);
  const auto D = static_cast<Eigen::Index>(d);
  Vector x0(D);
  for (Eigen::Index c = 0; c < D; ++c) x0(c) = normal(rng);
  out.data.features.resize(N, D);
  out.data.labels.resize(N);
  const bool flat = kappa_target == 1.0;
  for (Eigen::Index r = 0; r < N; ++r) {
    for (Eigen::Index c = 0; c < D; ++c) {
      const double scale = D > 1 ? std::pow(1e-3, static_cast<double>(c) / static_cast<double>(D - 1)) : 1.0;
      out.data.features(r, c) = flat ? 0.0 : scale * normal(rng);
    }
    out.data.labels(r) = out.data.features.row(r).dot(x0) + 0.1 * normal(noise_rng);
  }
  const double gamma = loss_gamma(LossKind::Square, conv);
  const double max_sq = out.data.features.rowwise().squaredNorm().maxCoeff();
  out.lambda = flat ? 1.0 : max_sq / (gamma * (kappa_target - 1.0));
  auto sol = solve_ridge(out.data, out.lambda);
  out.x_star = std::move(sol.x_star);
  out.hessian = std::move(sol.hessian);
  return out;
}

/// Unit-norm Gaussian features, labels sign(a^T w + 0.3 noise) in {-1, +1}.
inline Dataset synth_logistic(Index n_points, Index d, std::uint64_t seed) {
  require(n_points >= 1 && d >= 1, ErrorCode::InvalidArgument, "need at least one point and one feature");
  auto rng = CounterRng::stream(seed, Stream::Data);
  auto noise_rng = CounterRng::stream(seed, Stream::Noise);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto N = static_cast<Eigen::Index>(n_points);
  const auto D = static_cast<Eigen::Index>(d);
  Vector w(D);
  for (Eigen::Index c = 0; c < D; ++c) w(c) = normal(rng);
  w /= w.norm();
  Dataset ds;
  ds.features.resize(N, D);
  ds.labels.resize(N);
  for (Eigen::Index r = 0; r < N; ++r) {
    for (Eigen::Index c = 0; c < D; ++c) ds.features(r, c) = normal(rng);
    ds.features.row(r) /= ds.features.row(r).norm();
    const double z = ds.features.row(r).dot(w) * 3.0 + 0.3 * normal(noise_rng);
    ds.labels(r) = z >= 0.0 ? 1.0 : -1.0;
  }
  return ds;
}

// ---------------------------------------------------------------- config

enum class Algorithm { Dsvrg, Dasvrg, AccelGrad, SvrgOracle };

inline const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Dsvrg: return "dsvrg";
    case Algorithm::Dasvrg: return "dasvrg";
    case Algorithm::AccelGrad: return "accel_grad";
    case Algorithm::SvrgOracle: return "svrg_oracle";
  }
  return "?";
}

inline Algorithm parse_algorithm(const std::string& s) {
  if (s == "dsvrg") return Algorithm::Dsvrg;
  if (s == "dasvrg") return Algorithm::Dasvrg;
  if (s == "accel_grad") return Algorithm::AccelGrad;
  if (s == "svrg_oracle") return Algorithm::SvrgOracle;
  fail(ErrorCode::Config, "algorithms: unknown algorithm '" + s + "'");
}

/// Flat run descriptor. Zero-valued schedule fields mean "derive a default".
struct ExperimentConfig {
  std::string source = "synthetic";  // synthetic | libsvm | hard
  std::string path;
  bool rescale_labels = false;
  std::string synth = "ridge";  // ridge | logistic
  Index synth_n = 2000;
  Index synth_d = 20;
  double synth_kappa = 100.0;
  std::uint64_t data_seed = 0;
  Index rff_dim = 0;
  double rff_bandwidth = 0.0;
  std::string loss = "square";
  std::string lambda_rule = "auto";  // auto | n^-0.5 | n^-0.75 | n^-1 | explicit
  double lambda = 0.0;
  std::string gamma = "curvature";  // curvature | unit
  Index m = 10;
  Index C = 0;
  Index n_tilde = 0;
  std::vector<std::string> algorithms{"dsvrg"};
  double eta = 0.0;
  Index T = 0;
  Index K = 0;
  Index P = 0;
  double sigma = -1.0;  // negative: L / n
  bool practical = false;
  bool shortcut = false;
  std::vector<std::uint64_t> seeds{1};
  double epsilon = 1e-6;
  Index max_rounds = 100000;
  Index checkpoint_every = 1;
  std::string output = "out";
  Index hard_k = 2;
  Index hard_u = 0;
  double hard_kappa_prime = 100.0;
  double hard_mu_prime = 1.0;
  Index hard_n = 5;
  Index hard_v = 1;
};

namespace detail {
inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',' || ch == ' ') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

inline bool parse_bool(const std::string& s, bool& out) {
  if (s == "true" || s == "1" || s == "yes") return out = true, true;
  if (s == "false" || s == "0" || s == "no") return out = false, true;
  return false;
}
}  // namespace detail

/// Sets one field by name; throws Config naming the key on bad input.
inline void set_config_field(ExperimentConfig& c, const std::string& key, const std::string& value) {
  auto bad = [&]() { fail(ErrorCode::Config, key + ": invalid value '" + value + "'"); };
  auto dbl = [&](double& f) {
    if (!parse_double(value, f)) bad();
  };
  auto idx = [&](Index& f) {
    if (!parse_int(value, f)) bad();
  };
  auto u64 = [&](std::uint64_t& f) {
    if (!parse_int(value, f)) bad();
  };
  auto boolean = [&](bool& f) {
    if (!detail::parse_bool(value, f)) bad();
  };
  if (key == "source") {
    if (value != "synthetic" && value != "libsvm" && value != "hard") bad();
    c.source = value;
  } else if (key == "path") c.path = value;
  else if (key == "rescale_labels") boolean(c.rescale_labels);
  else if (key == "synth") {
    if (value != "ridge" && value != "logistic") bad();
    c.synth = value;
  } else if (key == "synth_n") idx(c.synth_n);
  else if (key == "synth_d") idx(c.synth_d);
  else if (key == "synth_kappa") dbl(c.synth_kappa);
  else if (key == "data_seed") u64(c.data_seed);
  else if (key == "rff_dim") idx(c.rff_dim);
  else if (key == "rff_bandwidth") dbl(c.rff_bandwidth);
  else if (key == "loss") {
    if (value != "square" && value != "logistic" && value != "smooth_hinge") bad();
    c.loss = value;
  } else if (key == "lambda_rule") {
    if (value != "auto" && value != "n^-0.5" && value != "n^-0.75" && value != "n^-1" && value != "explicit") bad();
    c.lambda_rule = value;
  } else if (key == "lambda") dbl(c.lambda);
  else if (key == "gamma") {
    if (value != "curvature" && value != "unit") bad();
    c.gamma = value;
  } else if (key == "m") idx(c.m);
  else if (key == "C") idx(c.C);
  else if (key == "n_tilde") idx(c.n_tilde);
  else if (key == "algorithms") {
    c.algorithms = detail::split_list(value);
    if (c.algorithms.empty()) bad();
    for (const auto& a : c.algorithms) parse_algorithm(a);
  } else if (key == "eta") dbl(c.eta);
  else if (key == "T") idx(c.T);
  else if (key == "K") idx(c.K);
  else if (key == "P") idx(c.P);
  else if (key == "sigma") dbl(c.sigma);
  else if (key == "practical") boolean(c.practical);
  else if (key == "shortcut") boolean(c.shortcut);
  else if (key == "seeds") {
    c.seeds.clear();
    for (const auto& s : detail::split_list(value)) {
      std::uint64_t v = 0;
      if (!parse_int(s, v)) bad();
      c.seeds.push_back(v);
    }
    if (c.seeds.empty()) bad();
  } else if (key == "epsilon") dbl(c.epsilon);
  else if (key == "max_rounds") idx(c.max_rounds);
  else if (key == "checkpoint_every") idx(c.checkpoint_every);
  else if (key == "output") c.output = value;
  else if (key == "hard_k") idx(c.hard_k);
  else if (key == "hard_u") idx(c.hard_u);
  else if (key == "hard_kappa_prime") dbl(c.hard_kappa_prime);
  else if (key == "hard_mu_prime") dbl(c.hard_mu_prime);
  else if (key == "hard_n") idx(c.hard_n);
  else if (key == "hard_v") idx(c.hard_v);
  else fail(ErrorCode::Config, key + ": unknown key");
}

inline void validate_config(const ExperimentConfig& c) {
  auto need = [](bool ok, const std::string& key, const std::string& why) {
    if (!ok) fail(ErrorCode::Config, key + ": " + why);
  };
  need(c.m >= 1, "m", "must be positive");
  need(c.source != "libsvm" || !c.path.empty(), "path", "required for libsvm source");
  need(c.rff_dim == 0 || c.rff_bandwidth > 0.0, "rff_bandwidth", "required when rff_dim is set");
  need(c.rff_dim % 2 == 0, "rff_dim", "must be even");
  need(c.lambda_rule != "explicit" || c.lambda > 0.0, "lambda", "explicit rule needs lambda > 0");
  need(c.epsilon > 0.0, "epsilon", "must be positive");
  need(c.checkpoint_every >= 1, "checkpoint_every", "must be positive");
  need(c.eta >= 0.0, "eta", "must be nonnegative");
  need(!c.seeds.empty(), "seeds", "at least one seed");
  need(c.synth_kappa >= 1.0, "synth_kappa", "must be at least 1");
  need(c.hard_k >= 2, "hard_k", "must be at least 2");
  need(c.hard_kappa_prime >= 1.0, "hard_kappa_prime", "must be at least 1");
}

inline ExperimentConfig parse_config(std::istream& in, const std::string& name = "<config>") {
  ExperimentConfig c;
  std::string line;
  Index lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorCode::Config, name + ":" + std::to_string(lineno) + ": expected 'key = value'");
    set_config_field(c, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  validate_config(c);
  return c;
}

inline ExperimentConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  return parse_config(in, path.string());
}

inline void write_config(std::ostream& os, const ExperimentConfig& c) {
  auto join = [](const auto& v) {
    std::string s;
    for (const auto& x : v) {
      if (!s.empty()) s += ',';
      if constexpr (std::is_same_v<std::decay_t<decltype(x)>, std::string>) s += x;
      else s += std::to_string(x);
    }
    return s;
  };
  auto b = [](bool v) { return v ? "true" : "false"; };
  os << "source = " << c.source << "\n"
     << "path = " << c.path << "\n"
     << "rescale_labels = " << b(c.rescale_labels) << "\n"
     << "synth = " << c.synth << "\n"
     << "synth_n = " << c.synth_n << "\n"
     << "synth_d = " << c.synth_d << "\n"
     << "synth_kappa = " << format_double(c.synth_kappa) << "\n"
     << "data_seed = " << c.data_seed << "\n"
     << "rff_dim = " << c.rff_dim << "\n"
     << "rff_bandwidth = " << format_double(c.rff_bandwidth) << "\n"
     << "loss = " << c.loss << "\n"
     << "lambda_rule = " << c.lambda_rule << "\n"
     << "lambda = " << format_double(c.lambda) << "\n"
     << "gamma = " << c.gamma << "\n"
     << "m = " << c.m << "\n"
     << "C = " << c.C << "\n"
     << "n_tilde = " << c.n_tilde << "\n"
     << "algorithms = " << join(c.algorithms) << "\n"
     << "eta = " << format_double(c.eta) << "\n"
     << "T = " << c.T << "\n"
     << "K = " << c.K << "\n"
     << "P = " << c.P << "\n"
     << "sigma = " << format_double(c.sigma) << "\n"
     << "practical = " << b(c.practical) << "\n"
     << "shortcut = " << b(c.shortcut) << "\n"
     << "seeds = " << join(c.seeds) << "\n"
     << "epsilon = " << format_double(c.epsilon) << "\n"
     << "max_rounds = " << c.max_rounds << "\n"
     << "checkpoint_every = " << c.checkpoint_every << "\n"
     << "output = " << c.output << "\n"
     << "hard_k = " << c.hard_k << "\n"
     << "hard_u = " << c.hard_u << "\n"
     << "hard_kappa_prime = " << format_double(c.hard_kappa_prime) << "\n"
     << "hard_mu_prime = " << format_double(c.hard_mu_prime) << "\n"
     << "hard_n = " << c.hard_n << "\n"
     << "hard_v = " << c.hard_v << "\n";
}

inline std::string config_to_string(const ExperimentConfig& c) {
  std::ostringstream os;
  write_config(os, c);
  return os.str();
}

/// lambda for the named presets, or NaN for "auto".
inline double lambda_from_rule(const std::string& rule, Index N, double explicit_value) {
  const double n = static_cast<double>(N);
  if (rule == "n^-0.5") return 1.0 / std::sqrt(n);
  if (rule == "n^-0.75") return std::pow(n, -0.75);
  if (rule == "n^-1") return 1.0 / n;
  if (rule == "explicit") return explicit_value;
  return std::numeric_limits<double>::quiet_NaN();
}

// ---------------------------------------------------------------- CSV / plot

inline constexpr const char* kCsvHeader = "algo,seed,stage,rounds,vectors,runtime,gap";

inline void write_csv_rows(std::ostream& os, const std::string& algo, std::uint64_t seed,
                           const std::vector<Checkpoint>& trace, Index every = 1) {
  for (std::size_t r = 0; r < trace.size(); ++r) {
    const auto& c = trace[r];
    if (c.stage % every != 0 && r + 1 != trace.size()) continue;
    os << algo << ',' << seed << ',' << c.stage << ',' << c.rounds << ',' << c.vectors << ',' << c.runtime << ','
       << format_double(c.gap) << '\n';
  }
}

/// gnuplot script drawing log10(gap) against rounds and against runtime.
inline std::string plot_script(const std::vector<std::string>& csv_files, const std::string& stem) {
  std::ostringstream os;
  os << "set datafile separator ','\n"
     << "set key top right\n"
     << "set ylabel 'log10(f(x) - f(x*))'\n"
     << "set terminal pngcairo size 900,600\n";
  auto series = [&](int col) {
    std::string s;
    for (std::size_t i = 0; i < csv_files.size(); ++i) {
      if (i) s += ", \\\n     ";
      s += "'" + csv_files[i] + "' every ::1 using " + std::to_string(col) +
           ":(log10($7)) with linespoints title '" + std::filesystem::path(csv_files[i]).stem().string() + "'";
    }
    return s;
  };
  os << "set output '" << stem << "_rounds.png'\nset xlabel 'rounds of communication'\nplot " << series(4) << "\n";
  os << "set output '" << stem << "_runtime.png'\nset xlabel 'parallel runtime (gradient evaluations)'\nplot "
     << series(6) << "\n";
  return os.str();
}

// ---------------------------------------------------------------- experiments

struct RunRecord {
  std::string algo;
  std::uint64_t seed = 0;
  RunResult result;
  std::string csv_path;
};

struct ExperimentReport {
  double lambda = 0.0;
  SmoothnessInfo info;
  Index N = 0;
  Index d = 0;
  std::vector<RunRecord> runs;
  std::string plot_path;
  std::vector<std::string> warnings;
};

namespace detail {

inline Index auto_stages(double rate, double gap0, double eps) {
  if (gap0 <= eps) return 1;
  return std::max<Index>(1, stages_needed(rate, gap0, eps));
}

/// Runs one algorithm on a finite sum with a resolved plan.
/// Shrinks an auto-derived count so that `per_unit * count <= max_q`.
inline void fit_budget(Index& count, Index per_unit, Index max_q, const char* name, std::vector<std::string>& warnings) {
  if (per_unit == 0 || per_unit * count <= max_q) return;
  const Index fit = std::max<Index>(1, max_q / per_unit);
  warnings.push_back(std::string(name) + " capped from " + std::to_string(count) + " to " + std::to_string(fit) +
                     " to fit the sample capacity");
  count = fit;
}

template <FiniteSum F>
RunResult run_one(const F& f, const SmoothnessInfo& info, const ExperimentConfig& c, Algorithm algo,
                  std::uint64_t seed, const GapOracle& gap, const std::function<AllocationPlan(Index)>& make_plan,
                  std::vector<std::string>& warnings, Index max_q = std::numeric_limits<Index>::max()) {
  const Vector x0 = Vector::Zero(static_cast<Eigen::Index>(f.dim()));
  const double gap0 = gap(x0);
  const Index N = f.size();
  const Index n = (N + c.m - 1) / c.m;
  RunOptions opt{gap, c.epsilon, c.max_rounds};
  switch (algo) {
    case Algorithm::Dsvrg: {
      SvrgConfig cfg;
      if (c.practical) {
        cfg.eta = c.eta > 0.0 ? c.eta : 1.0 / info.L;
        cfg.T = c.T > 0 ? c.T : std::min<Index>(10000, n);
        cfg.K = c.K > 0 ? c.K : std::max<Index>(1, N / cfg.T);
      } else {
        cfg = theory_config(info, 0);
        if (c.eta > 0.0) cfg.eta = c.eta;
        if (c.T > 0) cfg.T = c.T;
        cfg.K = c.K > 0 ? c.K : auto_stages(8.0 / 9.0, gap0, c.epsilon);
        cfg.validate(info);
      }
      if (c.K == 0) fit_budget(cfg.K, cfg.T, max_q, "K", warnings);
      AllocationPlan plan = make_plan(cfg.T * cfg.K);
      Cluster cl(plan);
      return dsvrg_run(f, cl, cfg, x0, opt);
    }
    case Algorithm::Dasvrg: {
      DasvrgConfig cfg = default_dasvrg_schedule(info.L, info.mu, n, gap0, c.epsilon);
      if (c.sigma >= 0.0) cfg.sigma = c.sigma;
      if (c.practical) {
        cfg.eta = 1.0 / info.L;
        cfg.K = 1;
        cfg.T = std::min<Index>(10000, n);
        cfg.P = std::max<Index>(1, N / cfg.T);
      }
      if (c.eta > 0.0) cfg.eta = c.eta;
      if (c.T > 0) cfg.T = c.T;
      if (c.K > 0) cfg.K = c.K;
      if (c.P > 0) cfg.P = c.P;
      if (c.K == 0) fit_budget(cfg.K, cfg.T, max_q, "K", warnings);
      if (c.P == 0) fit_budget(cfg.P, cfg.T * cfg.K, max_q, "P", warnings);
      AllocationPlan plan = make_plan(cfg.T * cfg.K * cfg.P);
      Cluster cl(plan);
      return dasvrg_run(f, cl, cfg, info.mu, x0, opt);
    }
    case Algorithm::AccelGrad: {
      AllocationPlan plan = make_plan(0);
      Cluster cl(plan);
      AccelGradOptions ao;
      ao.epsilon = 0.0;
      ao.max_rounds = c.max_rounds;
      ao.gap = gap;
      ao.target_gap = c.epsilon;
      return accel_grad_run(f, cl, info, x0, ao);
    }
    case Algorithm::SvrgOracle: {
      SvrgConfig cfg = c.practical ? SvrgConfig{1.0 / info.L, std::min<Index>(10000, N), 1, false} : theory_config(info, 0);
      if (c.eta > 0.0) cfg.eta = c.eta;
      if (c.T > 0) cfg.T = c.T;
      cfg.K = c.K > 0 ? c.K : auto_stages(8.0 / 9.0, gap0, c.epsilon);
      const auto trace = svrg_single_machine(f, x0, cfg, seed);
      RunResult r;
      r.references = trace;
      r.x = trace.back();
      for (Index s = 0; s < trace.size(); ++s) {
        const double g = gap(trace[s]);
        r.ledger.gap_trace.push_back({s, 0, 0, s * (N + cfg.T), g});
        if (g <= c.epsilon) {
          r.reached_target = true;
          break;
        }
      }
      return r;
    }
  }
  return {};
}

}  // namespace detail

/// Loads or generates the data, resolves lambda, L, mu and x*, runs every
/// (algorithm, seed), writes one CSV per run and a gnuplot script.
inline ExperimentReport run_experiment(const ExperimentConfig& c, std::ostream* log = nullptr) {
  validate_config(c);
  ExperimentReport rep;
  auto warn = [&](const std::string& w) {
    rep.warnings.push_back(w);
    if (log) *log << "warning: " << w << "\n";
  };
  if (c.practical) warn("practical mode: eta = 1/L exceeds the 1/(4L) step bound; convergence guarantees void");
  if (c.shortcut) warn("shortcut mode: R_j = S_j, samples are not i.i.d. and the gradient estimate is biased");

  const std::filesystem::path outdir(c.output);
  std::error_code ec;
  std::filesystem::create_directories(outdir, ec);
  if (ec) fail(ErrorCode::Io, "cannot create " + outdir.string() + ": " + ec.message());

  std::vector<std::string> csvs;
  auto emit = [&](const std::string& algo, std::uint64_t seed, RunResult res) {
    const auto file = outdir / (algo + "_seed" + std::to_string(seed) + ".csv");
    std::ofstream os(file);
    if (!os) fail(ErrorCode::Io, "cannot write " + file.string());
    os << "# lambda=" << format_double(rep.lambda) << " L=" << format_double(rep.info.L)
       << " mu=" << format_double(rep.info.mu) << " N=" << rep.N << " d=" << rep.d << "\n";
    os << kCsvHeader << "\n";
    write_csv_rows(os, algo, seed, res.ledger.gap_trace, c.checkpoint_every);
    csvs.push_back(file.string());
    rep.runs.push_back({algo, seed, std::move(res), file.string()});
  };

  if (c.source == "hard") {
    HardParams p;
    p.k = c.hard_k;
    p.kappa_prime = c.hard_kappa_prime;
    p.mu_prime = c.hard_mu_prime;
    p.n = c.hard_n;
    p.v = c.hard_v;
    p.u = c.hard_u > 0 ? c.hard_u : default_repetitions(p.kappa_prime, p.k);
    p.validate();
    HardInstance f(p);
    rep.info = {p.L(), p.mu(), p.kappa()};
    rep.N = p.N();
    rep.d = p.d();
    const GapOracle gap = [&f](const Vector& x) { return f.gap(x); };
    for (const auto& a : c.algorithms)
      for (auto seed : c.seeds) {
        auto make_plan = [&](Index Q) {
          const Index nt = c.n_tilde > 0 ? c.n_tilde : std::max<Index>(1, (Q + p.m() - 1) / p.m());
          return adversarial_plan(p, nt, seed);
        };
        emit(a, seed, detail::run_one(f, rep.info, c, parse_algorithm(a), seed, gap, make_plan, rep.warnings));
      }
  } else {
    Dataset data;
    double lambda = std::numeric_limits<double>::quiet_NaN();
    const GammaConvention conv = c.gamma == "unit" ? GammaConvention::Unit : GammaConvention::Curvature;
    if (c.source == "libsvm") {
      data = parse_libsvm(std::filesystem::path(c.path));
    } else if (c.synth == "ridge") {
      auto s = synth_ridge(c.synth_n, c.synth_d, c.synth_kappa, c.data_seed, conv);
      data = std::move(s.data);
      lambda = s.lambda;
    } else {
      data = synth_logistic(c.synth_n, c.synth_d, c.data_seed);
    }
    if (c.rescale_labels) rescale_labels_unit(data);
    if (c.rff_dim > 0) data = rff_transform(data, c.rff_dim, c.rff_bandwidth, c.data_seed);
    const double preset = lambda_from_rule(c.lambda_rule, data.size(), c.lambda);
    if (!std::isnan(preset)) lambda = preset;
    if (std::isnan(lambda)) lambda = 1.0 / std::sqrt(static_cast<double>(data.size()));
    rep.lambda = lambda;
    ErmObjective f(parse_loss(c.loss), std::move(data), lambda);
    rep.info = estimate_constants(f, loss_gamma(f.loss(), conv));
    rep.N = f.size();
    rep.d = f.dim();
    if (c.m > f.size()) fail(ErrorCode::Config, "m: exceeds the number of data points");
    const ExactOptimum opt = exact_optimum(f);
    // largest Q an unconstrained capacity admits: C = N - 1
    const Index n = (f.size() + c.m - 1) / c.m;
    Index max_q = std::numeric_limits<Index>::max();
    if (c.shortcut) max_q = f.size();
    else if (c.C == 0 && c.n_tilde == 0) max_q = f.size() > n + 1 ? (f.size() - 1 - n) * c.m : 0;
    for (const auto& a : c.algorithms)
      for (auto seed : c.seeds) {
        auto make_plan = [&](Index Q) {
          if (c.shortcut || Q == 0) return allocate_shortcut(f.size(), c.m, seed);
          CapacityConfig cap = c.C > 0 ? CapacityConfig::make(f.size(), c.m, c.C)
                                       : CapacityConfig::with_spare(f.size(), c.m,
                                                                    c.n_tilde > 0 ? c.n_tilde : (Q + c.m - 1) / c.m);
          return allocate(f.size(), c.m, Q, cap, seed);
        };
        const auto before = rep.warnings.size();
        emit(a, seed,
             detail::run_one(f, rep.info, c, parse_algorithm(a), seed, opt.gap, make_plan, rep.warnings, max_q));
        if (log)
          for (auto w = before; w < rep.warnings.size(); ++w) *log << "warning: " << rep.warnings[w] << "\n";
      }
  }

  rep.plot_path = (outdir / "plot.gp").string();
  std::ofstream gp(rep.plot_path);
  if (!gp) fail(ErrorCode::Io, "cannot write " + rep.plot_path);
  gp << plot_script(csvs, (outdir / "gap").string());
  return rep;
}

}  // namespace dsvrg
