#include "ctfilter/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <set>

#include "ctfilter/families.hpp"

namespace ctf {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ConfigError(where + ": " + what);
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) fail(where, "expected an object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      fail(where, "unknown key '" + key + "'");
    }
  }
}

const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) fail(where, std::string("missing key '") + key + "'");
  return j.at(key);
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  return j.get<double>();
}

double number_or(const json& j, const char* key, double def, const std::string& where) {
  return j.contains(key) ? number(j.at(key), where + "." + key) : def;
}

int integer_or(const json& j, const char* key, int def, const std::string& where) {
  if (!j.contains(key)) return def;
  const auto& v = j.at(key);
  if (!v.is_number_integer()) fail(where + "." + key, "expected an integer");
  return v.get<int>();
}

std::string string_or(const json& j, const char* key, const std::string& def, const std::string& where) {
  if (!j.contains(key)) return def;
  if (!j.at(key).is_string()) fail(where + "." + key, "expected a string");
  return j.at(key).get<std::string>();
}

Vec parse_vec(const json& j, const std::string& where) {
  if (j.is_number()) return Vec::Constant(1, j.get<double>());
  if (!j.is_array() || j.empty()) fail(where, "expected a number or a non-empty array of numbers");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(j[i], where);
  return v;
}

/// Number (1 x 1) or nested arrays (one array per row).
Mat parse_mat(const json& j, const std::string& where) {
  if (j.is_number()) return Mat::Constant(1, 1, j.get<double>());
  if (!j.is_array() || j.empty() || !j[0].is_array()) fail(where, "expected a number or an array of rows");
  const auto rows = j.size();
  const auto cols = j[0].size();
  if (cols == 0) fail(where, "empty row");
  Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) fail(where, "rows have different lengths");
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = number(j[r][c], where);
    }
  }
  return m;
}

/// One row per output component. A flat array is accepted for scalar inputs.
Mat parse_rows(const json& j, int in_dim, const std::string& where) {
  if (in_dim == 1 && (j.is_number() || (j.is_array() && !j.empty() && j[0].is_number()))) {
    return parse_vec(j, where);
  }
  return parse_mat(j, where);
}

/// One column per output component. A flat array is accepted for scalar inputs.
Mat parse_columns(const json& j, int in_dim, const std::string& where) {
  if (in_dim == 1 && (j.is_number() || (j.is_array() && !j.empty() && j[0].is_number()))) {
    return parse_vec(j, where).transpose();
  }
  return parse_mat(j, where);
}

Mat symmetric_sqrt(const Mat& cov, const std::string& where) {
  if (!cov.isApprox(cov.transpose(), 1e-12)) fail(where, "covariance must be symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> es(cov);
  if (es.eigenvalues().minCoeff() < -1e-12) fail(where, "covariance must be positive semidefinite");
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

Scheme parse_scheme(const std::string& s, const std::string& where) {
  if (s == "euler") return Scheme::euler;
  if (s == "split") return Scheme::split;
  fail(where, "scheme must be 'euler' or 'split'");
}

InitialDistribution parse_initial(const json& j, int dim, const std::string& where) {
  check_keys(j, {"mean", "cov", "point"}, where);
  if (j.contains("point")) {
    const Vec x = parse_vec(j.at("point"), where + ".point");
    if (x.size() != dim) fail(where, "point has the wrong dimension");
    return InitialDistribution::point(x);
  }
  const Vec mean = parse_vec(require(j, "mean", where), where + ".mean");
  const Mat cov = parse_mat(require(j, "cov", where), where + ".cov");
  if (mean.size() != dim || cov.rows() != dim || cov.cols() != dim) fail(where, "mean/cov have the wrong dimension");
  symmetric_sqrt(cov, where + ".cov");
  return InitialDistribution::gaussian(mean, cov);
}

Vec parse_probs(const json& j, int n, const std::string& where) {
  const Vec p = parse_vec(j, where);
  if (p.size() != n) fail(where, "initial distribution has the wrong length");
  if ((p.array() < 0.0).any() || std::abs(p.sum() - 1.0) > 1e-12) fail(where, "not a probability vector");
  return p;
}

// ---------------------------------------------------------------------------
// Observation models of a jump-diffusion

void parse_jd_observation(const json& j, Scenario& s, const std::string& where) {
  const std::string type = string_or(j, "type", "", where);
  const int n = s.model.dim;
  if (type == "gaussian") {
    check_keys(j, {"type", "h", "noise_cov"}, where);
    auto h = make_family(require(j, "h", where), n);
    const Mat R = parse_mat(require(j, "noise_cov", where), where + ".noise_cov");
    if (R.rows() != h->out_dim() || R.cols() != h->out_dim()) fail(where, "noise_cov must be l x l");
    try {
      s.gaussian_obs = std::make_shared<GaussianObsModel>(std::move(h), R);
    } catch (const Error& e) {
      fail(where, e.what());
    }
    s.obs = ObsKind::gaussian;
  } else if (type == "point_process") {
    check_keys(j, {"type", "rate", "reference_rate"}, where);
    auto rate = make_family(require(j, "rate", where), n);
    const double ref = number_or(j, "reference_rate", 1.0, where);
    try {
      s.pp_obs = std::make_shared<PointProcessObsModel>(std::move(rate), ref);
    } catch (const Error& e) {
      fail(where, e.what());
    }
    s.obs = ObsKind::point_process;
  } else {
    fail(where, "observation type must be 'gaussian' or 'point_process'");
  }
}

// ---------------------------------------------------------------------------
// Scenario kinds

void load_hmm_binary(const json& m, Scenario& s) {
  const std::string w = "model";
  check_keys(m, {"alpha", "beta", "delta", "initial"}, w);
  const double alpha = number(require(m, "alpha", w), w + ".alpha");
  const double beta = number(require(m, "beta", w), w + ".beta");
  const double delta = number(require(m, "delta", w), w + ".delta");
  for (double v : {alpha, beta, delta}) {
    if (!(v >= 0.0 && v <= 1.0)) fail(w, "alpha, beta and delta must lie in [0, 1]");
  }
  s.signal = SignalKind::discrete_hmm;
  s.obs = ObsKind::discrete;
  s.hmm = DiscreteHMMModel::binary(alpha, beta, delta);
  if (m.contains("initial")) s.hmm.initial_dist = parse_probs(m.at("initial"), 2, w + ".initial");
}

void load_piet_clicks(const json& m, Scenario& s) {
  const std::string w = "model";
  check_keys(m, {"hazard", "r_plus", "r_minus", "initial"}, w);
  const double a = number(require(m, "hazard", w), w + ".hazard");
  const double rp = number(require(m, "r_plus", w), w + ".r_plus");
  const double rm = number(require(m, "r_minus", w), w + ".r_minus");
  if (!(a >= 0.0)) fail(w, "hazard must be >= 0");
  if (!(rp > 0.0 && rm > 0.0)) fail(w, "click rates must be positive");
  s.signal = SignalKind::markov_chain;
  s.obs = ObsKind::point_process;
  s.chain = MarkovChainModel::symmetric_two_state(a);
  if (m.contains("initial")) s.chain.initial_dist = parse_probs(m.at("initial"), 2, w + ".initial");
  s.rates = Mat{{rp, rm}, {rm, rp}};
}

void load_double_well(const json& m, Scenario& s) {
  const std::string w = "model";
  check_keys(m, {"a", "sigma_x", "initial", "observation"}, w);
  const double a = number_or(m, "a", 4.0, w);
  const double q = number_or(m, "sigma_x", 2.0, w);
  if (!(a > 0.0) || !(q >= 0.0)) fail(w, "need a > 0 and sigma_x >= 0");
  s.signal = SignalKind::jump_diffusion;
  s.model.dim = 1;
  s.model.drift = std::make_shared<DoubleWellDrift>(1, a);
  s.model.diffusion = make_constant_matrix(1, Mat::Constant(1, 1, std::sqrt(q)));
  s.model.initial = m.contains("initial") ? parse_initial(m.at("initial"), 1, w + ".initial")
                                          : InitialDistribution::gaussian(Vec::Zero(1), Mat::Identity(1, 1));
  const json obs = m.contains("observation")
                       ? m.at("observation")
                       : json{{"type", "gaussian"}, {"h", {{"family", "linear"}, {"A", 1.0}}}, {"noise_cov", 0.1}};
  parse_jd_observation(obs, s, w + ".observation");
}

void load_linear_gaussian(const json& m, Scenario& s) {
  const std::string w = "model";
  check_keys(m, {"A", "B", "Sigma_x", "Sigma_y", "initial"}, w);
  const Mat A = parse_mat(require(m, "A", w), w + ".A");
  const Mat B = parse_mat(require(m, "B", w), w + ".B");
  const Mat Q = parse_mat(require(m, "Sigma_x", w), w + ".Sigma_x");
  const Mat R = parse_mat(require(m, "Sigma_y", w), w + ".Sigma_y");
  const auto n = A.rows();
  if (A.cols() != n || B.cols() != n || Q.rows() != n || Q.cols() != n || R.rows() != B.rows() ||
      R.cols() != B.rows()) {
    fail(w, "A (n x n), B (l x n), Sigma_x (n x n) and Sigma_y (l x l) do not fit together");
  }
  s.signal = SignalKind::jump_diffusion;
  s.model.dim = static_cast<int>(n);
  s.model.drift = std::make_shared<LinearFn>(A, Vec::Zero(n));
  s.model.diffusion = make_constant_matrix(s.model.dim, symmetric_sqrt(Q, w + ".Sigma_x"));
  s.model.initial = m.contains("initial")
                        ? parse_initial(m.at("initial"), s.model.dim, w + ".initial")
                        : InitialDistribution::gaussian(Vec::Zero(n), Mat::Identity(n, n));
  try {
    s.gaussian_obs = std::make_shared<GaussianObsModel>(std::make_shared<LinearFn>(B, Vec::Zero(B.rows())), R);
  } catch (const Error& e) {
    fail(w, e.what());
  }
  s.obs = ObsKind::gaussian;
}

void load_custom(const json& m, Scenario& s) {
  const std::string w = "model";
  check_keys(m, {"signal", "observation"}, w);
  const json& sig = require(m, "signal", w);
  const json& obs = require(m, "observation", w);
  const std::string ws = w + ".signal", wo = w + ".observation";
  const std::string type = string_or(sig, "type", "", ws);
  if (type == "markov_chain") {
    check_keys(sig, {"type", "generator", "initial"}, ws);
    s.signal = SignalKind::markov_chain;
    s.chain.generator = parse_mat(require(sig, "generator", ws), ws + ".generator");
    const int n = s.chain.n_states();
    s.chain.initial_dist = sig.contains("initial") ? parse_probs(sig.at("initial"), n, ws + ".initial")
                                                   : Vec::Constant(n, 1.0 / n);
    const std::string otype = string_or(obs, "type", "", wo);
    if (otype == "gaussian") {
      check_keys(obs, {"type", "h_matrix", "noise_cov"}, wo);
      s.obs = ObsKind::gaussian;
      s.h_matrix = parse_mat(require(obs, "h_matrix", wo), wo + ".h_matrix");
      s.noise_cov = parse_mat(require(obs, "noise_cov", wo), wo + ".noise_cov");
      if (s.h_matrix.cols() != n) fail(wo, "h_matrix must have one column per state");
      if (s.noise_cov.rows() != s.h_matrix.rows() || s.noise_cov.cols() != s.h_matrix.rows()) {
        fail(wo, "noise_cov must be l x l");
      }
      Eigen::LLT<Mat> llt(s.noise_cov);
      if (llt.info() != Eigen::Success) fail(wo, "noise_cov must be positive definite");
    } else if (otype == "point_process") {
      check_keys(obs, {"type", "rates"}, wo);
      s.obs = ObsKind::point_process;
      s.rates = parse_mat(require(obs, "rates", wo), wo + ".rates");
      if (s.rates.cols() != n) fail(wo, "rates must have one column per state");
      if ((s.rates.array() < 0.0).any()) fail(wo, "rates must be >= 0");
    } else {
      fail(wo, "observation type must be 'gaussian' or 'point_process'");
    }
    return;
  }
  if (type != "jump_diffusion") fail(ws, "signal type must be 'markov_chain' or 'jump_diffusion'");
  check_keys(sig, {"type", "dim", "drift", "diffusion", "jumps", "initial"}, ws);
  s.signal = SignalKind::jump_diffusion;
  const int n = integer_or(sig, "dim", 1, ws);
  if (n < 1) fail(ws, "dim must be >= 1");
  s.model.dim = n;
  s.model.drift = make_family(require(sig, "drift", ws), n);
  if (s.model.drift->out_dim() != n) fail(ws + ".drift", "drift must map R^n to R^n");
  const Mat G = parse_mat(require(sig, "diffusion", ws), ws + ".diffusion");
  if (G.rows() != n) fail(ws + ".diffusion", "diffusion must have n rows");
  s.model.diffusion = make_constant_matrix(n, G);
  if (sig.contains("jumps")) {
    const json& jj = sig.at("jumps");
    const std::string wj = ws + ".jumps";
    check_keys(jj, {"amplitude", "rate"}, wj);
    const Mat J = parse_mat(require(jj, "amplitude", wj), wj + ".amplitude");
    auto rate = make_family(require(jj, "rate", wj), n);
    if (J.rows() != n || J.cols() != rate->out_dim()) fail(wj, "amplitude must be n x k for k rate channels");
    s.model.jump_amplitude = make_constant_matrix(n, J);
    s.model.jump_rate = std::move(rate);
  }
  s.model.initial = sig.contains("initial") ? parse_initial(sig.at("initial"), n, ws + ".initial")
                                            : InitialDistribution::gaussian(Vec::Zero(n), Mat::Identity(n, n));
  parse_jd_observation(obs, s, wo);
}

// ---------------------------------------------------------------------------
// Filters

const std::vector<NamedEntry>& filter_table() {
  static const std::vector<NamedEntry> table{
      {"hmm", "discrete-time HMM forward filter (hmm_binary)"},
      {"wonham", "Wonham filter: finite-state chain, Gaussian observations"},
      {"pp_finite_state", "finite-state point-process filter; option scheme: euler|split"},
      {"log_odds", "two-state log-odds filter; option scheme: euler|split"},
      {"kbf", "Kalman-Bucy filter (linear drift and observations)"},
      {"ekbf", "extended Kalman-Bucy filter (Gaussian observations)"},
      {"pp_ekbf", "point-process EKBF"},
      {"adf", "Gaussian assumed density filter for point processes; options closure, quad_order"},
      {"bpf", "bootstrap particle filter; options particles, resample"},
      {"fbpf", "constant-gain feedback particle filter; option particles"},
      {"grid", "1-D Kushner / point-process Kushner grid solver; options xmin, xmax, cells, update, substeps"},
  };
  return table;
}

bool compatible(const std::string& type, const Scenario& s, std::string& why) {
  const bool jd = s.signal == SignalKind::jump_diffusion;
  const bool chain = s.signal == SignalKind::markov_chain;
  const bool gauss = s.obs == ObsKind::gaussian;
  const bool pp = s.obs == ObsKind::point_process;
  if (type == "hmm") {
    why = "needs a discrete-time HMM";
    return s.signal == SignalKind::discrete_hmm;
  }
  if (type == "wonham") {
    why = "needs a Markov chain with Gaussian observations";
    return chain && gauss;
  }
  if (type == "pp_finite_state") {
    why = "needs a Markov chain with point-process observations";
    return chain && pp;
  }
  if (type == "log_odds") {
    why = "needs a two-state chain with strictly positive point-process rates";
    return chain && pp && s.chain.n_states() == 2 && (s.rates.array() > 0.0).all();
  }
  if (type == "kbf") {
    why = "needs linear drift and observation functions without offsets and no jumps";
    if (!jd || !gauss || s.model.has_jumps()) return false;
    const auto* f = dynamic_cast<const LinearFn*>(s.model.drift.get());
    const auto* h = dynamic_cast<const LinearFn*>(s.gaussian_obs->h_ptr().get());
    return f && h && f->offset().isZero(0.0) && h->offset().isZero(0.0);
  }
  if (type == "ekbf" || type == "fbpf") {
    why = "needs a jump-free diffusion with Gaussian observations";
    return jd && gauss && !s.model.has_jumps();
  }
  if (type == "pp_ekbf" || type == "adf") {
    why = "needs a jump-free diffusion with point-process observations";
    return jd && pp && !s.model.has_jumps();
  }
  if (type == "bpf") {
    why = "needs a jump-diffusion signal";
    return jd;
  }
  if (type == "grid") {
    why = "needs a one-dimensional jump-diffusion";
    return jd && s.model.dim == 1;
  }
  why = "unknown filter type";
  return false;
}

FilterSpec parse_filter(const json& j, const Scenario& s, const std::string& where) {
  if (j.is_string()) return parse_filter(json{{"type", j}}, s, where);
  FilterSpec f;
  f.type = string_or(j, "type", "", where);
  if (std::none_of(filter_table().begin(), filter_table().end(), [&](const NamedEntry& e) { return e.name == f.type; })) {
    fail(where, "unknown filter type '" + f.type + "'");
  }
  f.label = string_or(j, "label", f.type, where);
  std::string why;
  if (!compatible(f.type, s, why)) fail(where, "filter '" + f.type + "' " + why);

  if (f.type == "pp_finite_state" || f.type == "log_odds") {
    check_keys(j, {"type", "label", "scheme"}, where);
    f.scheme = parse_scheme(string_or(j, "scheme", "euler", where), where + ".scheme");
  } else if (f.type == "bpf" || f.type == "fbpf") {
    if (f.type == "bpf") {
      check_keys(j, {"type", "label", "particles", "resample"}, where);
    } else {
      check_keys(j, {"type", "label", "particles"}, where);
    }
    f.particles = integer_or(j, "particles", 1000, where);
    if (f.particles < 2) fail(where, "particles must be >= 2");
    if (f.type == "bpf") {
      f.resample = ResampleSpec{};
      if (j.contains("resample")) {
        const json& r = j.at("resample");
        if (r.is_string() && r.get<std::string>() == "none") {
          f.resample.reset();
        } else {
          check_keys(r, {"scheme", "ess_threshold"}, where + ".resample");
          const std::string scheme = string_or(r, "scheme", "systematic", where + ".resample");
          if (scheme == "systematic") {
            f.resample->scheme = ResampleSpec::Scheme::systematic;
          } else if (scheme == "multinomial") {
            f.resample->scheme = ResampleSpec::Scheme::multinomial;
          } else {
            fail(where + ".resample", "scheme must be 'systematic' or 'multinomial'");
          }
          f.resample->ess_threshold = number_or(r, "ess_threshold", 0.5, where + ".resample");
          try {
            f.resample->validate();
          } catch (const Error& e) {
            fail(where + ".resample", e.what());
          }
        }
      }
    }
  } else if (f.type == "adf") {
    check_keys(j, {"type", "label", "closure", "quad_order"}, where);
    const std::string c = string_or(j, "closure", "analytic", where);
    if (c == "analytic") {
      f.closure.method = GaussianClosureSpec::Method::analytic;
    } else if (c == "gauss_hermite") {
      f.closure.method = GaussianClosureSpec::Method::gauss_hermite;
    } else {
      fail(where, "closure must be 'analytic' or 'gauss_hermite'");
    }
    f.closure.quad_order = integer_or(j, "quad_order", 21, where);
    try {
      GaussianClosureSpec probe = f.closure;
      probe.method = GaussianClosureSpec::Method::gauss_hermite;
      probe.validate();
    } catch (const Error& e) {
      fail(where, e.what());
    }
  } else if (f.type == "grid") {
    check_keys(j, {"type", "label", "xmin", "xmax", "cells", "update", "substeps"}, where);
    f.xmin = number(require(j, "xmin", where), where + ".xmin");
    f.xmax = number(require(j, "xmax", where), where + ".xmax");
    f.cells = integer_or(j, "cells", 500, where);
    if (!(f.xmax > f.xmin) || f.cells < 3) fail(where, "need xmax > xmin and cells >= 3");
    const std::string u = string_or(j, "update", "exponential", where);
    if (u == "exponential") {
      f.grid.update = ObsUpdate::exponential;
    } else if (u == "linearized") {
      f.grid.update = ObsUpdate::linearized;
    } else {
      fail(where, "update must be 'exponential' or 'linearized'");
    }
    f.grid.substeps = integer_or(j, "substeps", 0, where);
    if (f.grid.substeps < 0) fail(where, "substeps must be >= 0");
  } else {
    check_keys(j, {"type", "label"}, where);
  }
  return f;
}

std::vector<FilterSpec> default_filters(const Scenario& s) {
  switch (s.kind) {
    case ScenarioKind::hmm_binary:
      return {parse_filter("hmm", s, "filters")};
    case ScenarioKind::piet_clicks:
      return {parse_filter(json{{"type", "pp_finite_state"}, {"scheme", "split"}}, s, "filters"),
              parse_filter(json{{"type", "log_odds"}, {"scheme", "split"}}, s, "filters")};
    case ScenarioKind::linear_gaussian:
      return {parse_filter("kbf", s, "filters")};
    default:
      break;
  }
  if (s.signal == SignalKind::markov_chain) {
    return {parse_filter(s.obs == ObsKind::gaussian ? "wonham" : "pp_finite_state", s, "filters")};
  }
  return {parse_filter("bpf", s, "filters")};
}

// ---------------------------------------------------------------------------
// Validation of rates against the time step

std::vector<Vec> probe_points(const Scenario& s) {
  std::vector<Vec> probes;
  const auto& init = s.model.initial;
  const int n = s.model.dim;
  Vec mean = Vec::Zero(n);
  Vec sd = Vec::Ones(n);
  if (init.is_gaussian()) {
    mean = init.mean();
    sd = init.cov().diagonal().cwiseMax(0.0).cwiseSqrt().cwiseMax(1.0);
  }
  probes.push_back(mean);
  for (int i = 0; i < n; ++i) {
    for (double k = -4.0; k <= 4.0; k += 0.25) {
      Vec x = mean;
      x(i) += k * sd(i);
      probes.push_back(x);
    }
  }
  for (const auto& f : s.filters) {
    if (f.type != "grid") continue;
    for (int i = 0; i <= 40; ++i) probes.push_back(Vec::Constant(1, f.xmin + (f.xmax - f.xmin) * i / 40.0));
  }
  return probes;
}

void check_rates(const Scenario& s) {
  const double dt = s.grid.dt;
  auto check = [&](double rate, const std::string& what) {
    if (rate * dt > 0.1) {
      fail("grid.dt", what + " times dt is " + std::to_string(rate * dt) + " > 0.1; reduce dt");
    }
  };
  if (s.signal == SignalKind::markov_chain) {
    check((-s.chain.generator.diagonal()).maxCoeff(), "largest exit rate of the chain");
    if (s.obs == ObsKind::point_process) check(s.rates.maxCoeff(), "largest click rate");
  }
  if (s.signal != SignalKind::jump_diffusion) return;
  const auto probes = probe_points(s);
  try {
    s.model.validate(probes);
    if (s.pp_obs) s.pp_obs->validate(probes);
  } catch (const Error& e) {
    fail("model", e.what());
  }
  for (const auto& x : probes) {
    if (s.model.has_jumps()) check((*s.model.jump_rate)(x).maxCoeff(), "largest jump rate");
    if (s.pp_obs) check(s.pp_obs->rate()(x).maxCoeff(), "largest observation rate");
  }
}

}  // namespace

std::string to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::hmm_binary: return "hmm_binary";
    case ScenarioKind::piet_clicks: return "piet_clicks";
    case ScenarioKind::double_well: return "double_well";
    case ScenarioKind::linear_gaussian: return "linear_gaussian";
    case ScenarioKind::custom: return "custom";
  }
  return "custom";
}

VectorFnPtr make_family(const json& spec, int in_dim) {
  const std::string w = "family";
  if (!spec.is_object()) fail(w, "expected an object with a 'family' key");
  const std::string name = string_or(spec, "family", "", w);
  const std::string where = "family '" + name + "'";
  try {
    if (name == "linear") {
      check_keys(spec, {"family", "A", "b"}, where);
      const Mat A = parse_mat(require(spec, "A", where), where + ".A");
      if (A.cols() != in_dim) fail(where, "A must have " + std::to_string(in_dim) + " columns");
      const Vec b = spec.contains("b") ? parse_vec(spec.at("b"), where + ".b") : Vec::Zero(A.rows());
      if (b.size() != A.rows()) fail(where, "b must have one entry per row of A");
      return std::make_shared<LinearFn>(A, b);
    }
    if (name == "constant") {
      check_keys(spec, {"family", "value"}, where);
      return LinearFn::constant(in_dim, parse_vec(require(spec, "value", where), where + ".value"));
    }
    if (name == "double_well") {
      check_keys(spec, {"family", "a"}, where);
      return std::make_shared<DoubleWellDrift>(in_dim, number_or(spec, "a", 4.0, where));
    }
    if (name == "exponential") {
      check_keys(spec, {"family", "gains", "slopes"}, where);
      const Vec g = parse_vec(require(spec, "gains", where), where + ".gains");
      const Mat B = parse_rows(require(spec, "slopes", where), in_dim, where + ".slopes");
      if (B.cols() != in_dim || B.rows() != g.size()) fail(where, "slopes must be k x n for k gains");
      return std::make_shared<ExponentialRate>(g, B);
    }
    if (name == "gaussian_bump") {
      check_keys(spec, {"family", "gains", "centers", "widths"}, where);
      const Vec g = parse_vec(require(spec, "gains", where), where + ".gains");
      const Mat C = parse_columns(require(spec, "centers", where), in_dim, where + ".centers");
      const Vec s = parse_vec(require(spec, "widths", where), where + ".widths");
      if (C.rows() != in_dim || C.cols() != g.size() || s.size() != g.size()) {
        fail(where, "centers must be n x k and widths length k for k gains");
      }
      return std::make_shared<GaussianBumpRate>(g, C, s);
    }
    if (name == "softplus") {
      check_keys(spec, {"family", "gains", "slopes", "offsets"}, where);
      const Vec g = parse_vec(require(spec, "gains", where), where + ".gains");
      const Mat B = parse_rows(require(spec, "slopes", where), in_dim, where + ".slopes");
      const Vec c = spec.contains("offsets") ? parse_vec(spec.at("offsets"), where + ".offsets") : Vec::Zero(g.size());
      if (B.cols() != in_dim || B.rows() != g.size() || c.size() != g.size()) {
        fail(where, "slopes must be k x n and offsets length k for k gains");
      }
      return std::make_shared<SoftplusRate>(g, B, c);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    fail(where, e.what());
  }
  fail(w, "unknown family '" + name + "'");
}

Scenario load_scenario(const json& doc) {
  try {
    check_keys(doc, {"scenario", "name", "seed", "n_trials", "grid", "model", "filters", "output_dir",
                     "runtime_budget_s", "output"},
               "config");
    Scenario s;
    s.source = doc;
    const std::string kind = string_or(doc, "scenario", "", "config");
    if (kind == "hmm_binary") {
      s.kind = ScenarioKind::hmm_binary;
    } else if (kind == "piet_clicks") {
      s.kind = ScenarioKind::piet_clicks;
    } else if (kind == "double_well") {
      s.kind = ScenarioKind::double_well;
    } else if (kind == "linear_gaussian") {
      s.kind = ScenarioKind::linear_gaussian;
    } else if (kind == "custom") {
      s.kind = ScenarioKind::custom;
    } else {
      fail("config.scenario", "unknown scenario '" + kind + "'");
    }
    s.name = string_or(doc, "name", kind, "config");
    if (doc.contains("seed")) {
      const json& seed = doc.at("seed");
      if (!seed.is_number_integer() || (!seed.is_number_unsigned() && seed.get<std::int64_t>() < 0)) {
        fail("config.seed", "expected a non-negative integer");
      }
      s.seed = doc.at("seed").get<std::uint64_t>();
    }
    s.n_trials = integer_or(doc, "n_trials", 1, "config");
    if (s.n_trials < 1) fail("config.n_trials", "must be >= 1");
    s.output_dir = string_or(doc, "output_dir", "out/" + s.name, "config");
    s.runtime_budget_s = number_or(doc, "runtime_budget_s", 0.0, "config");

    const json& g = require(doc, "grid", "config");
    if (s.kind == ScenarioKind::hmm_binary) {
      check_keys(g, {"steps"}, "grid");
      s.grid = TimeGrid{0.0, 1.0, integer_or(g, "steps", 0, "grid")};
    } else {
      check_keys(g, {"t0", "dt", "horizon"}, "grid");
      const double t0 = number_or(g, "t0", 0.0, "grid");
      const double dt = number(require(g, "dt", "grid"), "grid.dt");
      const double horizon = number(require(g, "horizon", "grid"), "grid.horizon");
      if (!(dt > 0.0) || !(horizon >= dt)) fail("grid", "need dt > 0 and horizon >= dt");
      s.grid = TimeGrid::over(horizon, dt, t0);
    }
    try {
      s.grid.validate();
    } catch (const Error& e) {
      fail("grid", e.what());
    }

    const json& m = require(doc, "model", "config");
    switch (s.kind) {
      case ScenarioKind::hmm_binary: load_hmm_binary(m, s); break;
      case ScenarioKind::piet_clicks: load_piet_clicks(m, s); break;
      case ScenarioKind::double_well: load_double_well(m, s); break;
      case ScenarioKind::linear_gaussian: load_linear_gaussian(m, s); break;
      case ScenarioKind::custom: load_custom(m, s); break;
    }
    try {
      if (s.signal == SignalKind::discrete_hmm) s.hmm.validate();
      if (s.signal == SignalKind::markov_chain) s.chain.validate();
    } catch (const Error& e) {
      fail("model", e.what());
    }

    if (doc.contains("filters")) {
      const json& fl = doc.at("filters");
      if (!fl.is_array() || fl.empty()) fail("filters", "expected a non-empty array");
      for (std::size_t i = 0; i < fl.size(); ++i) {
        s.filters.push_back(parse_filter(fl[i], s, "filters[" + std::to_string(i) + "]"));
      }
    } else {
      s.filters = default_filters(s);
    }
    std::set<std::string> labels;
    for (const auto& f : s.filters) {
      if (!labels.insert(f.label).second) fail("filters", "duplicate label '" + f.label + "'");
      if (f.label.empty() || f.label.find_first_of("/\\ ") != std::string::npos || f.label == "path") {
        fail("filters", "label '" + f.label + "' cannot be used as a file name");
      }
    }

    if (doc.contains("output")) {
      const json& o = doc.at("output");
      check_keys(o, {"stride", "paths", "trajectories", "oracle_bins", "oracle_every", "oracle_range"}, "output");
      s.output.stride = integer_or(o, "stride", 1, "output");
      if (o.contains("paths")) s.output.paths = o.at("paths").get<bool>();
      if (o.contains("trajectories")) s.output.trajectories = o.at("trajectories").get<bool>();
      s.output.oracle_bins = integer_or(o, "oracle_bins", 50, "output");
      s.output.oracle_every = integer_or(o, "oracle_every", 100, "output");
      if (o.contains("oracle_range")) {
        const Vec r = parse_vec(o.at("oracle_range"), "output.oracle_range");
        if (r.size() != 2 || !(r(1) > r(0))) fail("output.oracle_range", "expected [lo, hi] with hi > lo");
        s.output.oracle_range = std::make_pair(r(0), r(1));
      }
      if (s.output.stride < 1 || s.output.oracle_bins < 1 || s.output.oracle_every < 1) {
        fail("output", "stride, oracle_bins and oracle_every must be >= 1");
      }
    }
    check_rates(s);
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

Scenario load_scenario_file(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw ConfigError("cannot open " + file.string());
  json doc;
  try {
    doc = json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError(file.string() + ": " + e.what());
  }
  return load_scenario(doc);
}

std::vector<NamedEntry> scenario_kinds() {
  return {
      {"hmm_binary", "two-state discrete-time HMM observed through a binary symmetric channel"},
      {"piet_clicks", "two-state chain switching at a hazard rate, observed through two click streams"},
      {"double_well", "1-D diffusion in a double-well potential; Gaussian or point-process observations"},
      {"linear_gaussian", "linear SDE with linear Gaussian observations"},
      {"custom", "any Markov chain or jump-diffusion built from registered families"},
  };
}

std::vector<NamedEntry> family_kinds() {
  return {
      {"linear", "A x + b"},
      {"constant", "state-independent value"},
      {"double_well", "-a x (x^2 - 1) per coordinate"},
      {"exponential", "c_k exp(beta_k^T x)"},
      {"gaussian_bump", "g_k exp(-|x - m_k|^2 / (2 s_k^2))"},
      {"softplus", "g_k log(1 + exp(beta_k^T x + c_k))"},
  };
}

std::vector<NamedEntry> filter_kinds() { return filter_table(); }

}  // namespace ctf
