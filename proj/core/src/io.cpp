#include "ctfilter/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

namespace ctf {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

CsvWriter::CsvWriter(std::ostream& os, const std::vector<std::string>& header) : os_(os) {
  for (std::size_t i = 0; i < header.size(); ++i) os_ << (i ? "," : "") << header[i];
  os_ << '\n';
}

void CsvWriter::sep() {
  if (!first_) os_ << ',';
  first_ = false;
}

CsvWriter& CsvWriter::operator<<(double v) {
  sep();
  os_ << format_double(v);
  return *this;
}

CsvWriter& CsvWriter::operator<<(int v) {
  sep();
  os_ << v;
  return *this;
}

CsvWriter& CsvWriter::operator<<(const std::string& v) {
  sep();
  os_ << v;
  return *this;
}

void CsvWriter::end_row() {
  os_ << '\n';
  first_ = true;
}

std::ofstream open_output(const std::filesystem::path& file) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream os(file, std::ios::binary);
  if (!os) throw Error("cannot open " + file.string() + " for writing");
  return os;
}

void write_path_csv(const PathRecord& path, std::ostream& os) {
  std::vector<std::string> header{"t"};
  if (path.is_finite_state()) {
    header.emplace_back("x");
  } else {
    for (Eigen::Index i = 0; i < path.states.cols(); ++i) header.push_back("x_" + std::to_string(i));
  }
  for (Eigen::Index i = 0; i < path.dY.cols(); ++i) header.push_back("dY_" + std::to_string(i));
  for (Eigen::Index i = 0; i < path.dN.cols(); ++i) header.push_back("dN_" + std::to_string(i));
  CsvWriter csv(os, header);
  for (int k = 0; k < path.grid.n_steps; ++k) {
    csv << path.grid.time(k + 1);
    if (path.is_finite_state()) {
      csv << path.labels[k];
    } else {
      for (Eigen::Index i = 0; i < path.states.cols(); ++i) csv << path.states(k, i);
    }
    for (Eigen::Index i = 0; i < path.dY.cols(); ++i) csv << path.dY(k, i);
    for (Eigen::Index i = 0; i < path.dN.cols(); ++i) csv << path.dN(k, i);
    csv.end_row();
  }
}

void write_path_csv(const PathRecord& path, const std::filesystem::path& file) {
  auto os = open_output(file);
  write_path_csv(path, os);
}

namespace {

template <class M>
nlohmann::json matrix_to_json(const M& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

template <class M>
M matrix_from_json(const nlohmann::json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
  M m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    check_dim(static_cast<Eigen::Index>(j[r].size()) == cols, "path JSON: ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[r][c].get<typename M::Scalar>();
  }
  return m;
}

}  // namespace

nlohmann::json path_to_json(const PathRecord& path) {
  nlohmann::json j;
  j["grid"] = {{"t0", path.grid.t0}, {"dt", path.grid.dt}, {"n_steps", path.grid.n_steps}};
  j["seed"] = path.seed;
  if (path.is_finite_state()) {
    j["initial_label"] = path.initial_label;
    j["labels"] = path.labels;
  } else {
    j["initial_state"] = std::vector<double>(path.initial_state.data(),
                                             path.initial_state.data() + path.initial_state.size());
    j["states"] = matrix_to_json(path.states);
  }
  if (path.dY.size() > 0) j["dY"] = matrix_to_json(path.dY);
  if (path.dN.size() > 0) j["dN"] = matrix_to_json(path.dN);
  return j;
}

PathRecord path_from_json(const nlohmann::json& j) {
  PathRecord p;
  const auto& g = j.at("grid");
  p.grid = TimeGrid{g.at("t0").get<double>(), g.at("dt").get<double>(), g.at("n_steps").get<int>()};
  p.grid.validate();
  p.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("labels")) {
    p.initial_label = j.at("initial_label").get<int>();
    p.labels = j.at("labels").get<std::vector<int>>();
    check_dim(static_cast<int>(p.labels.size()) == p.grid.n_steps, "path JSON: labels length");
  } else {
    const auto x0 = j.at("initial_state").get<std::vector<double>>();
    p.initial_state = Eigen::Map<const Vec>(x0.data(), static_cast<Eigen::Index>(x0.size()));
    p.states = matrix_from_json<Mat>(j.at("states"));
    check_dim(p.states.rows() == p.grid.n_steps, "path JSON: states length");
  }
  if (j.contains("dY")) p.dY = matrix_from_json<Mat>(j["dY"]);
  if (j.contains("dN")) p.dN = matrix_from_json<IntMat>(j["dN"]);
  check_dim(p.dY.size() == 0 || p.dY.rows() == p.grid.n_steps, "path JSON: dY length");
  check_dim(p.dN.size() == 0 || p.dN.rows() == p.grid.n_steps, "path JSON: dN length");
  return p;
}

void write_json(const nlohmann::json& j, const std::filesystem::path& file) {
  auto os = open_output(file);
  os << j.dump(2) << '\n';
}

nlohmann::json read_json(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw Error("cannot open " + file.string());
  return nlohmann::json::parse(is);
}

}  // namespace ctf
