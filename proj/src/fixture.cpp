#include "wkb/fixture.hpp"

#include <fstream>
#include "json.hpp"
#include <sstream>

namespace wkb {

namespace {

using json = nlohmann::json;

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

MatR to_mat(const json& j, const std::string& key) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) throw fixture_error("FixtureError", key + " must be a nested array");
  const std::size_t rows = j.size(), cols = j[0].size();
  MatR m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (!j[i].is_array() || j[i].size() != cols) throw fixture_error("FixtureError", key + " has ragged rows");
    for (std::size_t k = 0; k < cols; ++k) {
      if (!j[i][k].is_number()) throw fixture_error("FixtureError", key + " has a non-numeric entry");
      m(i, k) = j[i][k].get<double>();
    }
  }
  return m;
}

json from_mat(const MatR& m) {
  json j = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    j.push_back(row);
  }
  return j;
}

}  // namespace

Fixture parse_fixture(const std::string& text, int circle_samples) {
  std::istringstream in(text);
  std::string line;
  std::map<std::string, json> kv;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw fixture_error("FixtureError", "line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    try {
      kv[key] = json::parse(val);
    } catch (const json::exception&) {
      kv[key] = val;
    }
  }
  for (const char* k : {"B1", "B2", "B", "M"})
    if (!kv.count(k)) throw fixture_error("FixtureError", std::string("missing key ") + k);

  const std::string id = kv.count("id") ? (kv["id"].is_string() ? kv["id"].get<std::string>() : kv["id"].dump()) : "";
  Fixture f;
  f.sys = build_system(to_mat(kv["B1"], "B1"), to_mat(kv["B2"], "B2"), to_mat(kv["B"], "B"), to_mat(kv["M"], "M"),
                       circle_samples, 1e-8, id);
  if (kv.count("N") && kv["N"].get<int>() != f.sys.N) throw fixture_error("FixtureError", "declared N does not match");
  if (kv.count("p") && kv["p"].get<int>() != f.sys.p) throw fixture_error("FixtureError", "declared p does not match B2");
  if (kv.count("beta_l")) {
    const json& b = kv["beta_l"];
    if (!b.is_array() || b.size() != 2) throw fixture_error("FixtureError", "beta_l must have two entries");
    f.beta_l = Eigen::Vector2d(b[0].get<double>(), b[1].get<double>()).normalized();
  }
  if (kv.count("real")) f.real = kv["real"].get<bool>();
  for (auto& [k, v] : kv)
    if (k != "B1" && k != "B2" && k != "B" && k != "M" && k != "beta_l" && k != "N" && k != "p" && k != "id" && k != "real")
      f.extra[k] = v.is_string() ? v.get<std::string>() : v.dump();
  return f;
}

Fixture load_fixture(const std::string& path, int circle_samples) {
  std::ifstream in(path);
  if (!in) throw fixture_error("FixtureError", "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_fixture(ss.str(), circle_samples);
}

std::string format_fixture(const Fixture& f) {
  std::ostringstream os;
  os.precision(17);
  os << "id = \"" << f.sys.id << "\"\n";
  os << "N = " << f.sys.N << "\np = " << f.sys.p << "\n";
  os << "B1 = " << from_mat(f.sys.B1).dump() << "\n";
  os << "B2 = " << from_mat(f.sys.B2).dump() << "\n";
  os << "B = " << from_mat(f.sys.B).dump() << "\n";
  os << "M = " << from_mat(f.sys.M).dump() << "\n";
  if (f.beta_l) os << "beta_l = [" << (*f.beta_l)(0) << ", " << (*f.beta_l)(1) << "]\n";
  os << "real = " << (f.real ? "true" : "false") << "\n";
  return os.str();
}

Fixture euler_fixture(double v, double u, double c, const std::string& id) {
  MatR B1(3, 3), B2(3, 3), B(2, 3), M(3, 3);
  B1 << 0, -v, 0, -c * c / v, 0, 0, 0, 0, 0;
  B2 << u, 0, -v, 0, u, 0, -c * c / v, 0, u;
  B << 0, v, 0, u, 0, v;
  M << 1, 0, 0, 0, 1, -c / u, 0, 0, 0;
  Fixture f;
  f.beta_l = Eigen::Vector2d(c, 1.0).normalized();
  f.sys = build_system(B1, B2, B, M, 720, 1e-8, id);
  // Ker B = r2 + r3 at beta_l. Its mirror image under x1 -> -x1 is not in E^s(beta_l),
  // so Delta vanishes only at +-beta_l.
  const ModeDecomposition d = decompose(f.sys, Frequency{(*f.beta_l)(0), 0.0, (*f.beta_l)(1)});
  const Eigen::Vector3d k = (d.r.col(1) + d.r.col(2)).real();
  Eigen::JacobiSVD<MatR> svd(k.transpose(), Eigen::ComputeFullV);
  B.row(0) = svd.matrixV().col(1).transpose();
  B.row(1) = svd.matrixV().col(2).transpose();
  f.sys = build_system(B1, B2, B, M, 720, 1e-8, id);
  return f;
}

Fixture euler_ulc_fixture(double v, double u, double c, const std::string& id) {
  Fixture f = euler_fixture(v, u, c, id);
  // Symmetrizer S0 = diag(c^2/v^2, 1, 1); Ker B = negative eigendirection of S0 B2.
  MatR S0 = MatR::Identity(3, 3);
  S0(0, 0) = c * c / (v * v);
  Eigen::SelfAdjointEigenSolver<MatR> es(S0 * f.sys.B2);
  const Eigen::Vector3d kneg = es.eigenvectors().col(0);
  Eigen::JacobiSVD<MatR> svd(kneg.transpose(), Eigen::ComputeFullV);
  MatR B(2, 3);
  B.row(0) = svd.matrixV().col(1).transpose();
  B.row(1) = svd.matrixV().col(2).transpose();
  f.sys = build_system(f.sys.B1, f.sys.B2, B, f.sys.M, 720, 1e-8, id);
  return f;
}

Fixture random_fixture(std::mt19937_64& rng, int p, const std::string& id) {
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_real_distribution<double> ang(0.0, 2.0 * 3.14159265358979323846);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    MatR G1(3, 3), Q(3, 3), Mr(3, 3), Br(p, 3);
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 3; ++k) {
        G1(i, k) = n01(rng);
        Q(i, k) = n01(rng);
        Mr(i, k) = n01(rng);
      }
    for (int i = 0; i < p; ++i)
      for (int k = 0; k < 3; ++k) Br(i, k) = n01(rng);
    const MatR B1 = 0.5 * (G1 + G1.transpose());
    Eigen::HouseholderQR<MatR> qr(Q);
    const MatR O = qr.householderQ();
    Eigen::Vector3d lam;
    for (int i = 0; i < 3; ++i) lam(i) = (i < p ? 1.0 : -1.0) * (0.5 + std::abs(n01(rng)));
    const MatR B2 = O * lam.asDiagonal() * O.transpose();
    HyperbolicSystem sys;
    try {
      sys = build_system(B1, B2, Br, Mr, 720, 1e-3, id);
    } catch (const Error&) {
      continue;
    }
    for (int tries = 0; tries < 200; ++tries) {
      const double th = ang(rng);
      const Frequency z{std::cos(th), 0.0, std::sin(th)};
      if (region_tag(sys, z) != "hyperbolic") continue;
      ModeDecomposition d;
      try {
        d = decompose(sys, z);
      } catch (const Error&) {
        continue;
      }
      if (d.n_in != p) continue;
      double gap = INFINITY;
      for (int i = 0; i < 3; ++i)
        for (int k = i + 1; k < 3; ++k) gap = std::min(gap, std::abs(d.omega(i) - d.omega(k)));
      if (gap < 0.05 * d.omega.cwiseAbs().maxCoeff()) continue;
      const Eigen::Vector3d r3 = d.r.col(2).real();
      const MatR M = Mr - (Mr * r3) * r3.transpose() / r3.squaredNorm();
      Fixture f;
      f.sys = build_system(B1, B2, Br, M, 720, 1e-3, id);
      f.beta_l = Eigen::Vector2d(z.sigma, z.eta);
      return f;
    }
  }
  throw compute_error("FixtureError", "could not draw a strictly hyperbolic fixture");
}

}  // namespace wkb
