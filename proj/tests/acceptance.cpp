// Acceptance checks. Prints one PASS/FAIL line per criterion, with the
// offending values for failures, and exits non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "rknfc/bench.hpp"
#include "rknfc/coeffs.hpp"
#include "rknfc/dirkn.hpp"
#include "rknfc/problems.hpp"
#include "rknfc/solver.hpp"

using namespace rknfc;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      notes.push_back(what);
    }
  }
};

int failures = 0;

template <class F>
void criterion(int id, const char* title, F&& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome out;
  try {
    body(out);
  } catch (const std::exception& e) {
    out.check(false, std::string("exception: ") + e.what());
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%s criterion %d: %s (%.2f s)\n", out.pass ? "PASS" : "FAIL", id, title, secs);
  for (const auto& n : out.notes) std::printf("    %s\n", n.c_str());
  std::fflush(stdout);
  if (!out.pass) ++failures;
}

std::string fmt(const char* spec, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, spec, a, b, c);
  return buf;
}

double lsq_slope(const std::vector<double>& hs, const std::vector<double>& errs) {
  double mx = 0, my = 0;
  const double n = static_cast<double>(hs.size());
  for (std::size_t i = 0; i < hs.size(); ++i) {
    mx += std::log(hs[i]) / n;
    my += std::log(errs[i]) / n;
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < hs.size(); ++i) {
    sxy += (std::log(hs[i]) - mx) * (std::log(errs[i]) - my);
    sxx += (std::log(hs[i]) - mx) * (std::log(hs[i]) - mx);
  }
  return sxy / sxx;
}

double spectrum_distance(const Matrix& a, const Matrix& b) {
  const auto ea = sorted_eigenvalues(a);
  const auto eb = sorted_eigenvalues(b);
  double worst = 0.0;
  for (std::size_t i = 0; i < ea.size(); ++i) worst = std::max(worst, std::abs(ea[i] - eb[i]));
  return worst;
}

bool same_bits(const Vector& a, const Vector& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

// Reference cells: (t, h) -> {solution, invariant...} for the two methods.
struct ReferenceRow {
  Method method;
  double t, h;
  std::vector<double> values;
};

const std::vector<ReferenceRow> kKeplerReference = {
    {Method::RknTfcB, 50, 0.4, {-2.149, -9.248, -9.069}},
    {Method::RknTfcF, 50, 0.4, {0.300, -3.143, -4.126}},
    {Method::RknTfcB, 50, 0.2, {-3.354, -11.700, -11.524}},
    {Method::RknTfcF, 50, 0.2, {-0.196, -4.930, -5.558}},
    {Method::RknTfcB, 50, 0.1, {-4.558, -14.002, -13.875}},
    {Method::RknTfcF, 50, 0.1, {-0.711, -6.432, -7.038}},
    {Method::RknTfcB, 100, 0.4, {-1.879, -8.658, -8.479}},
    {Method::RknTfcF, 100, 0.4, {-0.255, -2.785, -3.822}},
    {Method::RknTfcB, 100, 0.2, {-3.085, -11.109, -10.932}},
    {Method::RknTfcF, 100, 0.2, {0.129, -4.413, -5.255}},
    {Method::RknTfcB, 100, 0.1, {-4.289, -13.461, -13.331}},
    {Method::RknTfcF, 100, 0.1, {-0.484, -5.900, -6.736}},
};

const std::vector<ReferenceRow> kHenonHeilesReference = {
    {Method::RknTfcB, 50, 0.1, {-5.806, -8.915}},
    {Method::RknTfcF, 50, 0.1, {-2.145, -5.170}},
    {Method::RknTfcB, 50, 0.05, {-7.010, -10.121}},
    {Method::RknTfcF, 50, 0.05, {-2.754, -6.005}},
    {Method::RknTfcB, 50, 0.025, {-8.214, -11.325}},
    {Method::RknTfcF, 50, 0.025, {-3.359, -6.711}},
    {Method::RknTfcB, 100, 0.1, {-5.301, -7.900}},
    {Method::RknTfcF, 100, 0.1, {-1.654, -4.338}},
    {Method::RknTfcB, 100, 0.05, {-6.504, -9.105}},
    {Method::RknTfcF, 100, 0.05, {-2.253, -4.927}},
    {Method::RknTfcB, 100, 0.025, {-7.708, -10.309}},
    {Method::RknTfcF, 100, 0.025, {-2.854, -5.528}},
};

std::vector<RunReport> run_rows(const std::string& problem, const std::vector<ReferenceRow>& rows) {
  std::vector<std::future<RunReport>> futs;
  for (const auto& row : rows) {
    ExperimentPlan p;
    p.problem = problem;
    p.method = row.method;
    p.t_end = row.t;
    p.h = row.h;
    p.repetitions = 1;
    futs.push_back(std::async(std::launch::async, [p] { return run(p); }));
  }
  std::vector<RunReport> out;
  for (auto& f : futs) out.push_back(f.get());
  return out;
}

void compare_table(Outcome& out, const std::vector<ReferenceRow>& reference,
                   const std::vector<RunReport>& reports, const std::vector<std::string>& labels) {
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const ReferenceRow& row = reference[i];
    const RunReport& rep = reports[i];
    const std::string cell = std::string(to_string(row.method)) + fmt(" (%g,%g)", row.t, row.h);
    if (rep.status != RunStatus::Ok) {
      out.check(false, cell + ": run failed: " + rep.message);
      continue;
    }
    std::vector<double> got{rep.log10_solution_error.value_or(NAN)};
    for (const auto& [_, v] : rep.log10_invariant_errors) got.push_back(v);
    for (std::size_t c = 0; c < row.values.size(); ++c) {
      const double diff = std::abs(got[c] - row.values[c]);
      out.check(diff <= 0.5, cell + " " + labels[c] +
                                 fmt(": computed %.3f, reference %.3f", got[c], row.values[c]));
    }
  }
}

}  // namespace

int main() {
  criterion(1, "rho^2 for r = 2..7 matches the reference values to 4 significant digits", [](Outcome& out) {
    const double reference[] = {6.455e-2, 3.205e-2, 1.872e-2, 1.555e-2, 8.465e-3, 6.214e-3};
    for (int r = 2; r <= 7; ++r) {
      const double v = rho_squared(r);
      char a[32], b[32];
      std::snprintf(a, sizeof a, "%.3e", v);
      std::snprintf(b, sizeof b, "%.3e", reference[r - 2]);
      out.check(std::string(a) == b, fmt("r=%g: computed %.6e, reference %.4g", r, v, reference[r - 2]));
    }
  });

  criterion(2, "factorization, determinant recursion and silent-stage spectra", [](Outcome& out) {
    const std::pair<int, int> shapes[] = {{4, 2}, {5, 3}, {6, 3}, {8, 5}};
    for (auto [k, r] : shapes) {
      const MethodCoefficients m = build_coefficients(k, r);
      const double res = (m.A_bar - m.P_ext * m.Xhat * m.P.transpose() * m.Omega).cwiseAbs().maxCoeff();
      out.check(res <= 1e-13, fmt("factorization residual %.3e at (k,r)=(%g,%g)", res, k, r));
      std::vector<bool> pick(k, false);
      std::fill(pick.begin(), pick.begin() + r, true);
      int tested = 0;
      do {
        std::vector<int> idx;
        for (int i = 0; i < k; ++i) {
          if (pick[i]) idx.push_back(i);
        }
        const double dist = spectrum_distance(silent_stage_split(m, idx).C_tilde, m.X);
        out.check(dist <= 1e-10, fmt("spectrum mismatch %.3e at (k,r)=(%g,%g)", dist, k, r));
        ++tested;
      } while (std::prev_permutation(pick.begin(), pick.end()) && tested < 10);
      out.check(tested >= 3, "fewer than 3 partitions tested");
    }
    for (int r = 2; r <= 8; ++r) {
      const double rec = det_recursion(r);
      const double rel = std::abs(build_X(r).determinant() - rec) / std::abs(rec);
      out.check(rel <= 1e-12, fmt("determinant relative error %.3e at r=%g", rel, r));
    }
  });

  criterion(3, "order-4 convergence on Kepler [0,5], blended", [](Outcome& out) {
    const MethodCoefficients m = build_coefficients(4, 2);
    const ProblemSpec kep = perturbed_kepler(1e-3, 5.0);
    SolverConfig cfg;
    const std::vector<double> hs{0.1, 0.05, 0.025};
    std::vector<double> errs;
    for (double h : hs) errs.push_back(*integrate(kep.ivp, h, m, cfg, {false}).endpoint_error);
    const double p = lsq_slope(hs, errs);
    out.check(p >= 3.7 && p <= 4.3, fmt("slope %.3f", p));
    out.notes.push_back(fmt("observed slope %.3f", p));
  });

  criterion(4, "Kepler grid, collocation rows within 0.5 log10 units", [](Outcome& out) {
    const auto reports = run_rows("kepler", kKeplerReference);
    compare_table(out, kKeplerReference, reports, {"solution", "hamiltonian", "angular momentum"});
  });

  criterion(5, "Henon-Heiles grid, collocation rows within 0.5 log10 units (h/64 reference)", [](Outcome& out) {
    const auto reports = run_rows("henon-heiles", kHenonHeilesReference);
    compare_table(out, kHenonHeilesReference, reports, {"solution", "hamiltonian"});
  });

  criterion(6, "blended needs fewer outer iterations than fixed point on the Kepler grid",
            [](Outcome& out) {
              const auto reports = run_rows("kepler", kKeplerReference);
              for (std::size_t i = 0; i + 1 < reports.size(); i += 2) {
                const RunReport& b = reports[i];
                const RunReport& f = reports[i + 1];
                const long long nb = b.total_outer_iterations;
                const long long nf = f.total_outer_iterations;
                const std::string cell = fmt("(%g,%g)", b.plan.t_end, b.plan.h);
                out.check(nb < nf, cell + fmt(": blended %g vs fixed point %g", nb, nf));
                if (b.plan.t_end == 50 && b.plan.h == 0.4) {
                  const double ratio = static_cast<double>(nf) / static_cast<double>(nb);
                  out.check(ratio > 10.0, cell + fmt(": fixed point / blended ratio %.3f", ratio));
                }
              }
            });

  criterion(7, "single-inner equals outer-inner with one inner sweep, bitwise", [](Outcome& out) {
    const MethodCoefficients m = build_coefficients(4, 2);
    const Matrix core = newton_core_matrix(m);
    SolverConfig single;
    single.iteration.scheme = IterationScheme::BlendedSingleInner;
    SolverConfig oi = single;
    oi.iteration.scheme = IterationScheme::BlendedOuterInner;
    oi.iteration.inner_iter = 1;
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    int mismatches = 0;
    for (const ProblemSpec& p : {perturbed_kepler(), henon_heiles()}) {
      for (int n = 0; n < 100; ++n) {
        Vector q = p.ivp.q0 + 0.2 * Vector{{u(rng), u(rng)}};
        Vector qp = p.ivp.q0_prime + 0.2 * Vector{{u(rng), u(rng)}};
        const double h = 0.05 + 0.35 * (u(rng) + 1.0) / 2.0;
        const StepOutput a = step(p.ivp, q, qp, h, m, core, single);
        const StepOutput b = step(p.ivp, q, qp, h, m, core, oi);
        if (!same_bits(a.gamma, b.gamma) || !same_bits(a.q1, b.q1) ||
            !same_bits(a.q1_prime, b.q1_prime)) {
          ++mismatches;
        }
      }
    }
    out.check(mismatches == 0, fmt("%g of 200 steps differ", mismatches));
  });

  criterion(8, "simplified Newton needs one correction per step on affine f, d = 3", [](Outcome& out) {
    const MethodCoefficients m = build_coefficients(4, 2);
    std::mt19937 rng(8);
    std::normal_distribution<double> n01;
    Matrix B(3, 3);
    for (auto& x : B.reshaped()) x = n01(rng);
    const Matrix A = -(B * B.transpose() + 0.5 * Matrix::Identity(3, 3));
    const Vector g{{n01(rng), n01(rng), n01(rng)}};
    SecondOrderIVP ivp;
    ivp.dim = 3;
    ivp.force = [A, g](const Vector& q) -> Vector { return A * q + g; };
    ivp.jacobian = [A](const Vector&) -> Matrix { return A; };
    ivp.q0 = Vector{{n01(rng), n01(rng), n01(rng)}};
    ivp.q0_prime = Vector{{n01(rng), n01(rng), n01(rng)}};
    ivp.t_end = 5.0;
    SolverConfig cfg;
    cfg.iteration.scheme = IterationScheme::SimplifiedNewton;
    cfg.iteration.tol = 1e-12;
    Vector q = ivp.q0, qp = ivp.q0_prime;
    for (int n = 0; n < 50; ++n) {
      const StepOutput s = step(ivp, q, qp, 0.1, m, cfg);
      out.check(s.stats.converged && s.stats.corrections == 1,
                fmt("step %g: %g corrections", n, s.stats.corrections));
      q = s.q1;
      qp = s.q1_prime;
    }
  });

  criterion(9, "DIRKN stepper: free motion, order slope, tableau validation", [](Outcome& out) {
    const DIRKNTableau t = load_dirkn_tableau(std::string(RKNFC_DATA_DIR) + "/dirkn_crouzeix3_order4.txt");
    IterationConfig cfg;
    cfg.scheme = IterationScheme::FixedPoint;
    SecondOrderIVP ivp;
    ivp.dim = 1;
    ivp.force = [](const Vector& q) -> Vector { return Vector::Zero(q.size()); };
    ivp.q0 = Vector{{0.3}};
    ivp.q0_prime = Vector{{-1.2}};
    ivp.t_end = 1.0;
    const StepOutput free = dirkn_step(t, ivp, ivp.q0, ivp.q0_prime, 0.25, cfg);
    out.check(std::abs(free.q1[0] - (0.3 - 0.25 * 1.2)) <= 1e-15 && free.q1_prime == ivp.q0_prime,
              "free motion not reproduced");

    ivp.force = [](const Vector& q) -> Vector { return -q; };
    ivp.q0 = Vector{{1.0}};
    ivp.q0_prime = Vector{{0.0}};
    ivp.t_end = 5.0;
    ivp.exact = [](double s) { return PhaseState{Vector{{std::cos(s)}}, Vector{{-std::sin(s)}}}; };
    const std::vector<double> hs{0.1, 0.05, 0.025};
    std::vector<double> errs;
    for (double h : hs) errs.push_back(*dirkn_integrate(t, ivp, h, cfg, {false}).endpoint_error);
    const double p = lsq_slope(hs, errs);
    out.check(p >= 3.7 && p <= 4.3, fmt("order slope %.3f", p));

    std::istringstream wrong("1 3\n0.5\n0.25\n0.5\n1\n");
    bool rejected = false;
    try {
      parse_dirkn_tableau(wrong);
    } catch (const InvalidArgument&) {
      rejected = true;
    }
    out.check(rejected, "tableau violating its declared order was accepted");
  });

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
