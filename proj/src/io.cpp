#include "ddinfer/io.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <sstream>

namespace ddinfer {

namespace {

using json = nlohmann::json;

double parse_cell(std::string_view s, std::size_t line) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw Error(ErrorKind::Parse, "dataset line " + std::to_string(line) + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view s) {
  std::vector<std::string_view> out;
  while (true) {
    const auto comma = s.find(',');
    out.push_back(s.substr(0, comma));
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

}  // namespace

std::filesystem::path meta_path(const std::filesystem::path& dataset) {
  return std::filesystem::path(dataset.string() + ".meta.json");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write " + path.string());
  out << text;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::InvalidArgument, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_dataset(const std::filesystem::path& path, const EmpiricalMeasure& m, const std::string& generator) {
  const Eigen::Index n = m.edges();
  std::string out;
  for (Eigen::Index e = 0; e < n; ++e) out += "eps_" + std::to_string(e + 1) + ",";
  for (Eigen::Index e = 0; e < n; ++e) out += "sigma_" + std::to_string(e + 1) + ",";
  out += "weight\n";
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    for (Eigen::Index r = 0; r < 2 * n; ++r) {
      out += format_double(m.points(r, c));
      out += ',';
    }
    out += format_double(m.weights[c]);
    out += '\n';
  }
  write_text(path, out);

  json meta;
  meta["edges"] = n;
  meta["points"] = m.size();
  if (!generator.empty()) meta["generator"] = generator;
  if (m.meta) {
    meta["eps_h"] = m.meta->eps_h;
    meta["delta_h"] = m.meta->delta_h;
    meta["c_star"] = m.meta->c_star;
    meta["truncation_radius"] = m.meta->truncation_radius;
  }
  if (m.partition) {
    const GridPartition& p = *m.partition;
    json grids = json::array();
    for (const EdgeGrid& g : p.edges()) {
      grids.push_back({{"eps", g.eps}, {"origin", g.origin}, {"lo", g.lo}, {"hi", g.hi}});
    }
    std::vector<double> center(p.center_t().data(), p.center_t().data() + p.center_t().size());
    std::vector<double> coeffs(p.coeffs().data(), p.coeffs().data() + p.coeffs().size());
    meta["partition"] = {{"radius", p.radius()}, {"center_t", center}, {"coeffs", coeffs}, {"grids", grids}};
  }
  write_text(meta_path(path), meta.dump(2) + "\n");
}

EmpiricalMeasure read_dataset(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::InvalidArgument, "dataset " + path.string() + " is empty");
  const auto header = split(line);
  const std::size_t cols = header.size();
  if (cols < 3 || (cols - 1) % 2 != 0 || header.back() != "weight") {
    throw Error(ErrorKind::Parse, "dataset header must be eps_1..,sigma_1..,weight");
  }
  const auto n = static_cast<Eigen::Index>((cols - 1) / 2);
  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != cols) {
      throw Error(ErrorKind::Parse, "dataset line " + std::to_string(lineno) + ": expected " + std::to_string(cols) +
                                        " columns");
    }
    for (const auto c : cells) values.push_back(parse_cell(c, lineno));
    ++rows;
  }
  if (rows == 0) throw Error(ErrorKind::InvalidArgument, "dataset " + path.string() + " has no atoms");
  Mat pts(2 * n, static_cast<Eigen::Index>(rows));
  Vec w(static_cast<Eigen::Index>(rows));
  for (std::size_t r = 0; r < rows; ++r) {
    for (Eigen::Index k = 0; k < 2 * n; ++k) pts(k, static_cast<Eigen::Index>(r)) = values[r * cols + static_cast<std::size_t>(k)];
    w[static_cast<Eigen::Index>(r)] = values[r * cols + cols - 1];
  }
  EmpiricalMeasure m = make_empirical(std::move(pts), std::move(w));

  const auto mp = meta_path(path);
  if (std::filesystem::exists(mp)) {
    json meta;
    try {
      meta = json::parse(read_text(mp));
    } catch (const json::parse_error& err) {
      throw Error(ErrorKind::Parse, "malformed dataset metadata " + mp.string() + ": " + err.what());
    }
    if (meta.contains("eps_h")) {
      EmpiricalMeta md;
      md.eps_h = meta.value("eps_h", 0.0);
      md.delta_h = meta.value("delta_h", 0.0);
      md.c_star = meta.value("c_star", 1.0);
      md.truncation_radius = meta.value("truncation_radius", 0.0);
      m.meta = md;
    }
    if (meta.contains("partition")) {
      const json& p = meta["partition"];
      std::vector<EdgeGrid> grids;
      for (const json& g : p["grids"]) {
        EdgeGrid eg;
        eg.eps = g["eps"].get<double>();
        eg.origin = g["origin"].get<double>();
        eg.lo = g["lo"].get<std::array<long, 2>>();
        eg.hi = g["hi"].get<std::array<long, 2>>();
        grids.push_back(eg);
      }
      const auto center = p["center_t"].get<std::vector<double>>();
      const auto coeffs = p["coeffs"].get<std::vector<double>>();
      GridPartition part(std::move(grids), p["radius"].get<double>(),
                         Eigen::Map<const Vec>(center.data(), static_cast<Eigen::Index>(center.size())),
                         Eigen::Map<const Vec>(coeffs.data(), static_cast<Eigen::Index>(coeffs.size())));
      require(part.size() == m.size(), ErrorKind::Parse, "dataset metadata partition does not match the atom count");
      m.partition = std::move(part);
      if (m.meta && m.meta->delta_h == 0.0) m.reference_mass = m.weights;
    }
  }
  return m;
}

}  // namespace ddinfer
