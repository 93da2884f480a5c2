#include "ddinfer/qoi.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <vector>

namespace ddinfer {

namespace {

double parse_number(std::string_view s, const std::string& context) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw Error(ErrorKind::Parse, "quantity of interest '" + context + "': bad number '" + std::string(s) + "'");
  }
  return v;
}

std::vector<double> parse_list(std::string_view s, const std::string& context) {
  std::vector<double> out;
  while (true) {
    const auto comma = s.find(',');
    out.push_back(parse_number(s.substr(0, comma), context));
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

Eigen::Index parse_edge(std::string_view body, const std::string& context) {
  if (body.size() < 3 || body.front() != '[' || body.back() != ']') {
    throw Error(ErrorKind::Parse, "quantity of interest '" + context + "': expected an index in brackets");
  }
  const std::string_view digits = body.substr(1, body.size() - 2);
  long e = 0;
  const auto res = std::from_chars(digits.data(), digits.data() + digits.size(), e);
  if (res.ec != std::errc() || res.ptr != digits.data() + digits.size() || e < 1) {
    throw Error(ErrorKind::Parse, "quantity of interest '" + context + "': edge index must be a positive integer");
  }
  return static_cast<Eigen::Index>(e - 1);
}

}  // namespace

QuantityOfInterest QuantityOfInterest::one() { return QuantityOfInterest(); }

QuantityOfInterest QuantityOfInterest::sigma(Eigen::Index edge) {
  require(edge >= 0, ErrorKind::InvalidArgument, "edge index must be nonnegative");
  QuantityOfInterest q;
  q.kind_ = QoiKind::Sigma;
  q.index_ = edge;
  q.name_ = "sigma[" + std::to_string(edge + 1) + "]";
  return q;
}

QuantityOfInterest QuantityOfInterest::eps(Eigen::Index edge) {
  require(edge >= 0, ErrorKind::InvalidArgument, "edge index must be nonnegative");
  QuantityOfInterest q;
  q.kind_ = QoiKind::Eps;
  q.index_ = edge;
  q.name_ = "eps[" + std::to_string(edge + 1) + "]";
  return q;
}

QuantityOfInterest QuantityOfInterest::gap() {
  QuantityOfInterest q;
  q.kind_ = QoiKind::Gap;
  q.name_ = "gap";
  return q;
}

QuantityOfInterest QuantityOfInterest::z_norm() {
  QuantityOfInterest q;
  q.kind_ = QoiKind::ZNorm;
  q.name_ = "znorm";
  return q;
}

QuantityOfInterest QuantityOfInterest::affine(Vec w, double c) {
  require(w.size() >= 4 && w.size() % 4 == 0, ErrorKind::DimensionMismatch,
          "affine quantity needs 4N coefficients over [y; z]");
  QuantityOfInterest q;
  q.kind_ = QoiKind::Affine;
  q.coeffs_.resize(w.size() + 1);
  q.coeffs_ << w, c;
  q.name_ = "affine";
  return q;
}

QuantityOfInterest QuantityOfInterest::quadratic(Mat m, Vec w, double c) {
  require(m.rows() == m.cols() && m.rows() == w.size() && w.size() % 4 == 0 && w.size() >= 4,
          ErrorKind::DimensionMismatch, "quadratic quantity needs a 4N x 4N matrix and 4N coefficients");
  require((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + m.cwiseAbs().maxCoeff()),
          ErrorKind::InvalidArgument, "quadratic quantity matrix must be symmetric");
  QuantityOfInterest q;
  q.kind_ = QoiKind::Quadratic;
  q.matrix_ = std::move(m);
  q.coeffs_ = std::move(w);
  q.constant_ = c;
  q.name_ = "quadratic";
  return q;
}

QuantityOfInterest QuantityOfInterest::clipped(QuantityOfInterest inner, double lo, double hi) {
  require(lo <= hi, ErrorKind::InvalidArgument, "clip bounds must satisfy lo <= hi");
  QuantityOfInterest q;
  q.kind_ = QoiKind::Clipped;
  q.lo_ = lo;
  q.hi_ = hi;
  q.name_ = "clip[" + format_double(lo) + "," + format_double(hi) + "]:" + inner.name();
  q.inner_ = std::make_shared<const QuantityOfInterest>(std::move(inner));
  return q;
}

bool QuantityOfInterest::bounded() const {
  switch (kind_) {
    case QoiKind::One:
    case QoiKind::Clipped:
      return true;
    default:
      return false;
  }
}

std::optional<QuantityOfInterest::AffineForm> QuantityOfInterest::affine_form(Eigen::Index edges) const {
  const Eigen::Index m = 4 * edges;
  AffineForm f{Vec::Zero(m), 0.0};
  switch (kind_) {
    case QoiKind::One:
      f.c = 1.0;
      return f;
    case QoiKind::Sigma:
    case QoiKind::Eps:
      require(index_ < edges, ErrorKind::DimensionMismatch,
              "quantity " + name_ + " refers to a missing edge (network has " + std::to_string(edges) + ")");
      f.w[2 * edges + (kind_ == QoiKind::Sigma ? edges : 0) + index_] = 1.0;
      return f;
    case QoiKind::Affine: {
      const Eigen::Index raw = coeffs_.size();
      // programmatic forms always carry the constant; parsed ones may not
      if (raw == m) {
        f.w = coeffs_;
      } else if (raw == m + 1) {
        f.w = coeffs_.head(m);
        f.c = coeffs_[m];
      } else {
        throw Error(ErrorKind::DimensionMismatch, "affine quantity has " + std::to_string(raw) +
                                                      " coefficients; expected " + std::to_string(m) + " or " +
                                                      std::to_string(m + 1));
      }
      return f;
    }
    default:
      return std::nullopt;
  }
}

std::optional<QuantityOfInterest::QuadraticForm> QuantityOfInterest::quadratic_form(Eigen::Index edges) const {
  if (kind_ == QoiKind::Quadratic) {
    require(coeffs_.size() == 4 * edges, ErrorKind::DimensionMismatch, "quadratic quantity size mismatch");
    return QuadraticForm{matrix_, coeffs_, constant_};
  }
  if (auto a = affine_form(edges)) {
    return QuadraticForm{Mat::Zero(4 * edges, 4 * edges), a->w, a->c};
  }
  return std::nullopt;
}

double QuantityOfInterest::operator()(const Vec& y, const Vec& z, const EnergyMetric& metric) const {
  const Eigen::Index n = metric.edges();
  check_same_edges(y.size(), 2 * n, "quantity of interest y");
  check_same_edges(z.size(), 2 * n, "quantity of interest z");
  switch (kind_) {
    case QoiKind::One:
      return 1.0;
    case QoiKind::Gap:
      return metric.norm(y - z);
    case QoiKind::ZNorm:
      return metric.norm(z);
    case QoiKind::Clipped:
      return std::clamp((*inner_)(y, z, metric), lo_, hi_);
    case QoiKind::Sigma:
      require(index_ < n, ErrorKind::DimensionMismatch, "quantity " + name_ + " refers to a missing edge");
      return z[n + index_];
    case QoiKind::Eps:
      require(index_ < n, ErrorKind::DimensionMismatch, "quantity " + name_ + " refers to a missing edge");
      return z[index_];
    case QoiKind::Affine: {
      const AffineForm f = *affine_form(n);
      return f.w.head(2 * n).dot(y) + f.w.tail(2 * n).dot(z) + f.c;
    }
    case QoiKind::Quadratic: {
      Vec x(4 * n);
      x << y, z;
      return x.dot(matrix_ * x) + coeffs_.dot(x) + constant_;
    }
  }
  return 0.0;
}

QuantityOfInterest parse_qoi(const std::string& text) {
  std::string_view s = text;
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  if (s == "one") return QuantityOfInterest::one();
  if (s == "gap") return QuantityOfInterest::gap();
  if (s == "znorm") return QuantityOfInterest::z_norm();
  if (s.starts_with("sigma")) return QuantityOfInterest::sigma(parse_edge(s.substr(5), text));
  if (s.starts_with("eps")) return QuantityOfInterest::eps(parse_edge(s.substr(3), text));
  if (s.starts_with("affine:")) {
    const std::vector<double> v = parse_list(s.substr(7), text);
    // keep the raw list; its length is resolved against N on evaluation
    QuantityOfInterest tmp = QuantityOfInterest::affine(Vec::Zero(4), 0.0);
    tmp.coeffs_ = Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
    tmp.name_ = std::string(s);
    return tmp;
  }
  if (s.starts_with("clip[")) {
    const auto close = s.find("]:");
    if (close == std::string_view::npos) {
      throw Error(ErrorKind::Parse, "quantity of interest '" + text + "': expected clip[lo,hi]:<qoi>");
    }
    const std::vector<double> b = parse_list(s.substr(5, close - 5), text);
    if (b.size() != 2) throw Error(ErrorKind::Parse, "quantity of interest '" + text + "': clip needs two bounds");
    if (!(b[0] <= b[1])) throw Error(ErrorKind::Parse, "quantity of interest '" + text + "': clip needs lo <= hi");
    return QuantityOfInterest::clipped(parse_qoi(std::string(s.substr(close + 2))), b[0], b[1]);
  }
  throw Error(ErrorKind::Parse, "unknown quantity of interest '" + text +
                                    "' (expected one, sigma[e], eps[e], gap, znorm, affine:..., clip[lo,hi]:...)");
}

}  // namespace ddinfer
