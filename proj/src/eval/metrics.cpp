#include "prim/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace prim::eval {

namespace {

bool contains(const std::vector<std::size_t>& v, std::size_t x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

bool same(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double parse_double(const std::string& s) {
  if (s == "nan" || s == "NaN") return std::numeric_limits<double>::quiet_NaN();
  // strtod, unlike stod, accepts subnormal values
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw std::invalid_argument("metrics csv: bad number '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

double recall_at_k(const RankedResult& ranking, const std::vector<std::size_t>& truth, std::size_t k) {
  if (k == 0) throw std::invalid_argument("recall_at_k: k must be >= 1");
  const std::size_t n = std::min(k, ranking.order.size());
  for (std::size_t i = 0; i < n; ++i)
    if (contains(truth, ranking.order[i])) return 1.0;
  return 0.0;
}

double recall_at_k(const RankedResult& ranking, std::size_t target, std::size_t k) {
  return recall_at_k(ranking, std::vector<std::size_t>{target}, k);
}

double map_at_k(const RankedResult& ranking, const std::vector<std::size_t>& truth, std::size_t k) {
  if (truth.empty()) throw std::invalid_argument("map_at_k: empty truth set");
  if (k == 0) throw std::invalid_argument("map_at_k: k must be >= 1");
  const std::size_t n = std::min(k, ranking.order.size());
  double hits = 0.0, sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!contains(truth, ranking.order[i])) continue;
    hits += 1.0;
    sum += hits / static_cast<double>(i + 1);
  }
  return sum / static_cast<double>(std::min(truth.size(), k));
}

std::pair<double, double> bootstrap_ci(const std::vector<double>& values, Rng& rng, std::size_t resamples,
                                       double level) {
  if (values.empty()) throw std::invalid_argument("bootstrap_ci: no values");
  if (resamples == 0 || !(level > 0.0 && level < 1.0)) throw std::invalid_argument("bootstrap_ci: bad settings");
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  if (*mn == *mx) return {*mn, *mn};
  const std::size_t n = values.size();
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);

  std::vector<double> means(resamples);
  for (auto& m : means) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += values[uniform_index(rng, n)];
    m = s / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  // linear interpolation between order statistics
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(resamples - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, resamples - 1);
    return means[lo] + (pos - static_cast<double>(lo)) * (means[hi] - means[lo]);
  };
  const double a = (1.0 - level) / 2.0;
  return {std::min(quantile(a), mean), std::max(quantile(1.0 - a), mean)};
}

bool MetricsRow::available() const { return !std::isnan(mean); }

bool MetricsRow::operator==(const MetricsRow& o) const {
  return method == o.method && scenario == o.scenario && n_obs == o.n_obs && n_int == o.n_int &&
         metric == o.metric && same(mean, o.mean) && same(ci_low, o.ci_low) && same(ci_high, o.ci_high);
}

const MetricsRow& MetricsTable::find(const std::string& method, std::size_t n_obs, std::size_t n_int,
                                     const std::string& metric) const {
  for (const auto& r : rows)
    if (r.method == method && r.n_obs == n_obs && r.n_int == n_int && r.metric == metric) return r;
  throw std::out_of_range("metrics: no row for " + method + "/" + metric);
}

std::string to_csv(const MetricsTable& t) {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const auto& r : t.rows) {
    for (const auto* s : {&r.method, &r.scenario, &r.metric})
      if (s->find_first_of(",\n") != std::string::npos)
        throw std::invalid_argument("metrics csv: field contains a separator: " + *s);
    out += r.method + "," + r.scenario + "," + std::to_string(r.n_obs) + "," + std::to_string(r.n_int) + "," +
           r.metric + "," + fmt(r.mean) + "," + fmt(r.ci_low) + "," + fmt(r.ci_high) + "\n";
  }
  return out;
}

MetricsTable table_from_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != kCsvHeader) throw std::invalid_argument("metrics csv: bad header");
  MetricsTable t;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 8) throw std::invalid_argument("metrics csv: expected 8 fields: " + line);
    MetricsRow r;
    r.method = f[0];
    r.scenario = f[1];
    r.n_obs = std::stoull(f[2]);
    r.n_int = std::stoull(f[3]);
    r.metric = f[4];
    r.mean = parse_double(f[5]);
    r.ci_low = parse_double(f[6]);
    r.ci_high = parse_double(f[7]);
    t.rows.push_back(std::move(r));
  }
  return t;
}

Json to_json(const MetricsTable& t) {
  Json rows = Json::array();
  for (const auto& r : t.rows) {
    Json j = {{"method", r.method}, {"scenario", r.scenario}, {"n_obs", r.n_obs},
              {"n_int", r.n_int},   {"metric", r.metric},     {"available", r.available()}};
    j["mean"] = r.available() ? Json(r.mean) : Json(nullptr);
    j["ci_low"] = r.available() ? Json(r.ci_low) : Json(nullptr);
    j["ci_high"] = r.available() ? Json(r.ci_high) : Json(nullptr);
    rows.push_back(std::move(j));
  }
  return Json{{"rows", std::move(rows)}};
}

}  // namespace prim::eval
