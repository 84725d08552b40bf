#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>

namespace wkb {

using cplx = std::complex<double>;
using MatR = Eigen::MatrixXd;
using VecR = Eigen::VectorXd;
using MatC = Eigen::MatrixXcd;
using VecC = Eigen::VectorXcd;
using Mat3c = Eigen::Matrix3cd;
using Vec3c = Eigen::Vector3cd;
using Vec2c = Eigen::Vector2cd;

inline constexpr cplx I{0.0, 1.0};

// Exit-code classes used by the CLI.
enum class ErrorClass { Config = 2, Fixture = 3, Computation = 4 };

class Error : public std::runtime_error {
 public:
  Error(ErrorClass c, std::string kind, const std::string& msg)
      : std::runtime_error(kind + ": " + msg), cls_(c), kind_(std::move(kind)) {}
  ErrorClass cls() const { return cls_; }
  const std::string& kind() const { return kind_; }

 private:
  ErrorClass cls_;
  std::string kind_;
};

inline Error config_error(const std::string& msg) { return Error(ErrorClass::Config, "ConfigError", msg); }
inline Error fixture_error(const std::string& kind, const std::string& msg) {
  return Error(ErrorClass::Fixture, kind, msg);
}
inline Error compute_error(const std::string& kind, const std::string& msg) {
  return Error(ErrorClass::Computation, kind, msg);
}

}  // namespace wkb
