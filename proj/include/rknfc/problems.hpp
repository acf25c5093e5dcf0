#pragma once

// Benchmark problems: perturbed Kepler and Hénon–Heiles, plus a name registry.

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "error.hpp"
#include "solver.hpp"

namespace rknfc {

struct ProblemSpec {
  std::string name;
  SecondOrderIVP ivp;
  std::map<std::string, double> reference_values;
};

/// q'' = −q/r³ − (2ε+ε²) q/r⁵ with q(0) = (1,0), q'(0) = (0, 1+ε).
/// Exact solution q(t) = (cos((1+ε)t), sin((1+ε)t)).
inline ProblemSpec perturbed_kepler(double epsilon = 1e-3, double t_end = 50.0) {
  if (!(epsilon >= 0.0)) throw InvalidArgument("perturbed_kepler: epsilon must be >= 0");
  const double kappa = 2.0 * epsilon + epsilon * epsilon;
  const double omega = 1.0 + epsilon;

  ProblemSpec p;
  p.name = "kepler";
  SecondOrderIVP& ivp = p.ivp;
  ivp.dim = 2;
  ivp.force = [kappa](const Vector& q) -> Vector {
    const double r2 = q.squaredNorm();
    if (r2 == 0.0) throw ForceDomainError("kepler: force evaluated at r = 0");
    const double r = std::sqrt(r2);
    const double r3 = r2 * r;
    return -(1.0 / r3 + kappa / (r3 * r2)) * q;
  };
  ivp.jacobian = [kappa](const Vector& q) -> Matrix {
    const double r2 = q.squaredNorm();
    if (r2 == 0.0) throw ForceDomainError("kepler: jacobian evaluated at r = 0");
    const double r = std::sqrt(r2);
    const double r5 = r2 * r2 * r;
    const double a = 1.0 / (r2 * r) + kappa / r5;
    const double da = 3.0 / r5 + 5.0 * kappa / (r5 * r2);
    return -a * Matrix::Identity(2, 2) + da * q * q.transpose();
  };
  ivp.q0 = Vector{{1.0, 0.0}};
  ivp.q0_prime = Vector{{0.0, omega}};
  ivp.t0 = 0.0;
  ivp.t_end = t_end;
  ivp.exact = [omega](double t) {
    const double s = std::sin(omega * t);
    const double c = std::cos(omega * t);
    return PhaseState{Vector{{c, s}}, Vector{{-omega * s, omega * c}}};
  };
  ivp.invariants.push_back({"hamiltonian", [kappa](const Vector& q, const Vector& qp) {
                              const double r = q.norm();
                              return 0.5 * qp.squaredNorm() - 1.0 / r -
                                     kappa / (3.0 * r * r * r);
                            }});
  ivp.invariants.push_back({"angular_momentum", [](const Vector& q, const Vector& qp) {
                              return q[0] * qp[1] - q[1] * qp[0];
                            }});
  p.reference_values["hamiltonian"] = 0.5 * omega * omega - 1.0 - kappa / 3.0;
  p.reference_values["angular_momentum"] = omega;
  return p;
}

/// q₁'' = −q₁ − 2q₁q₂, q₂'' = −q₂ − q₁² + q₂², q(0) = (√(11/96), 0),
/// q'(0) = (0, 1/4). No closed-form solution.
inline ProblemSpec henon_heiles(double t_end = 50.0) {
  ProblemSpec p;
  p.name = "henon-heiles";
  SecondOrderIVP& ivp = p.ivp;
  ivp.dim = 2;
  ivp.force = [](const Vector& q) -> Vector {
    return Vector{{-q[0] - 2.0 * q[0] * q[1], -q[1] - q[0] * q[0] + q[1] * q[1]}};
  };
  ivp.jacobian = [](const Vector& q) -> Matrix {
    return Matrix{{-1.0 - 2.0 * q[1], -2.0 * q[0]}, {-2.0 * q[0], -1.0 + 2.0 * q[1]}};
  };
  ivp.q0 = Vector{{std::sqrt(11.0 / 96.0), 0.0}};
  ivp.q0_prime = Vector{{0.0, 0.25}};
  ivp.t0 = 0.0;
  ivp.t_end = t_end;
  ivp.invariants.push_back({"hamiltonian", [](const Vector& q, const Vector& qp) {
                              return 0.5 * qp.squaredNorm() + 0.5 * q.squaredNorm() +
                                     q[0] * q[0] * q[1] - q[1] * q[1] * q[1] / 3.0;
                            }});
  p.reference_values["hamiltonian"] = 17.0 / 192.0;
  return p;
}

/// Problems addressable by name. Factories take the end time.
class ProblemRegistry {
public:
  using Factory = std::function<ProblemSpec(double t_end)>;

  ProblemRegistry() {
    add("kepler", [](double t_end) { return perturbed_kepler(1e-3, t_end); });
    add("henon-heiles", [](double t_end) { return henon_heiles(t_end); });
  }

  void add(const std::string& name, Factory factory) { factories_[name] = std::move(factory); }

  bool contains(const std::string& name) const { return factories_.count(name) != 0; }

  ProblemSpec make(const std::string& name, double t_end) const {
    const auto it = factories_.find(name);
    if (it == factories_.end()) throw InvalidArgument("unknown problem '" + name + "'");
    return it->second(t_end);
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [name, _] : factories_) out.push_back(name);
    return out;
  }

private:
  std::map<std::string, Factory> factories_;
};

}  // namespace rknfc
