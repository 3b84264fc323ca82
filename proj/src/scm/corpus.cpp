#include <fstream>
#include <stdexcept>

#include "prim/core/json_util.hpp"
#include "prim/scm/episode.hpp"

namespace prim::scm {
namespace {

Json matrix_rows(const Eigen::MatrixXd& m) {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
  return flat;
}

Eigen::MatrixXd matrix_from(const Json& j, std::size_t rows, std::size_t cols) {
  const auto flat = j.get<std::vector<double>>();
  if (flat.size() != rows * cols) throw std::invalid_argument("corpus: matrix size mismatch");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = flat[r * cols + c];
  return m;
}

}  // namespace

void write_corpus_header(std::ostream& os) {
  os << Json{{"schema", kCorpusSchema}, {"version", kCorpusVersion}}.dump() << '\n';
}

void write_episode(std::ostream& os, const Episode& e) {
  Json stats = Json::array();
  for (const auto& s : e.norm_stats) stats.push_back({s.mean, s.std});
  Json j = {{"k_real", e.k_real},   {"k_max", e.k_max},
            {"n_obs", e.n_obs()},   {"n_int", e.n_int()},
            {"obs", matrix_rows(e.obs)}, {"int", matrix_rows(e.intv)},
            {"mask", e.mask},       {"targets", e.targets},
            {"family", e.family},   {"seed", e.seed},
            {"query", e.query},     {"kind", e.kind},
            {"time_node", e.time_node}, {"norm_stats", stats}};
  os << j.dump() << '\n';
}

std::vector<Episode> read_corpus(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::invalid_argument("corpus: empty input");
  const Json header = Json::parse(line);
  if (header.value("schema", "") != kCorpusSchema)
    throw std::invalid_argument("corpus: unknown schema header");
  if (header.value("version", -1) != kCorpusVersion)
    throw std::invalid_argument("corpus: unsupported version " + header.value("version", Json(-1)).dump());
  std::vector<Episode> out;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const Json j = Json::parse(line);
      Episode e;
      e.k_real = j.at("k_real").get<std::size_t>();
      e.k_max = j.at("k_max").get<std::size_t>();
      const auto n_obs = j.at("n_obs").get<std::size_t>();
      const auto n_int = j.at("n_int").get<std::size_t>();
      e.obs = matrix_from(j.at("obs"), n_obs, e.k_max);
      e.intv = matrix_from(j.at("int"), n_int, e.k_max);
      e.mask = j.at("mask").get<std::vector<std::uint8_t>>();
      e.targets = j.at("targets").get<std::vector<std::size_t>>();
      e.family = j.value("family", "");
      e.seed = j.value("seed", std::uint64_t{0});
      e.query = j.value("query", std::size_t{0});
      e.kind = j.value("kind", "");
      e.time_node = j.value("time_node", false);
      e.pad_mask.assign(e.k_max, 0);
      for (std::size_t c = e.k_real; c < e.k_max; ++c) e.pad_mask[c] = 1;
      if (j.contains("norm_stats"))
        for (const auto& s : j["norm_stats"]) e.norm_stats.push_back({s.at(0).get<double>(), s.at(1).get<double>()});
      validate_episode(e);
      out.push_back(std::move(e));
    } catch (const std::exception& ex) {
      throw std::invalid_argument("corpus line " + std::to_string(lineno) + ": " + ex.what());
    }
  }
  return out;
}

std::vector<Episode> read_corpus_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus " + path);
  return read_corpus(in);
}

}  // namespace prim::scm
