#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "adia/spectral.hpp"
#include "oracle.hpp"

using namespace adia;

namespace {

const ModelParams unit{1.0, 1.0, 1.0};

LatticeSpec periodic(int d, int L) { return {d, L, Boundary::Periodic, 0}; }
LatticeSpec open(int d, int L, std::int64_t marked) { return {d, L, Boundary::Open, marked}; }

// Secular function F(E) = (s mu / N) sum_j m_j / (lambda_j - E), evaluated
// independently from the dispersion table.
double secular_f(const DispersionTable& t, const ModelParams& p, double s, double e) {
  double acc = 0.0;
  for (const auto& l : t.levels) acc += static_cast<double>(l.multiplicity) / (-(1.0 - s) * p.t * l.eps - e);
  return s * p.mu / static_cast<double>(t.site_count) * acc;
}

double secular_df(const DispersionTable& t, const ModelParams& p, double s, double e) {
  double acc = 0.0;
  for (const auto& l : t.levels) {
    const double d = -(1.0 - s) * p.t * l.eps - e;
    acc += static_cast<double>(l.multiplicity) / (d * d);
  }
  return s * p.mu / static_cast<double>(t.site_count) * acc;
}

}  // namespace

TEST(SolvePeriodic, GroundEnergyAtStartIsMinusTwoDT) {
  for (int L : {3, 8, 17}) {
    const auto pk = solve_periodic(build_dispersion(periodic(3, L)), unit, 0.0);
    EXPECT_EQ(pk.e0, -6.0);
  }
  const auto pk = solve_periodic(build_dispersion(periodic(2, 5)), ModelParams{0.7, 1.3, 1.0}, 0.0);
  EXPECT_DOUBLE_EQ(pk.e0, -4.0 * 0.7);
  EXPECT_NEAR(pk.e1, -0.7 * 2.0 * (1.0 + std::cos(2.0 * std::numbers::pi / 5.0)), 1e-14);
}

TEST(SolvePeriodic, EndpointAtOne) {
  for (auto [d, L] : {std::pair{1, 3}, std::pair{2, 6}, std::pair{3, 9}}) {
    const auto pk = solve_periodic(build_dispersion(periodic(d, L)), unit, 1.0);
    EXPECT_EQ(pk.e0, -1.0);
    EXPECT_EQ(pk.e1, 0.0);
  }
}

TEST(SolvePeriodic, NineSiteTorusAgainstDenseOracle) {
  const auto table = build_dispersion(periodic(2, 3));
  const auto sp = coupled_spectrum(table);
  const auto pk = solve_periodic(sp, unit, 0.5);
  const auto ref = oracle::lowest_pair(oracle::adjacency(2, 3, true), 0, 1.0, 1.0, 0.5, false);
  EXPECT_NEAR(pk.e0, ref.e0, 1e-10);
  EXPECT_NEAR(pk.e1, ref.e1, 1e-10);
  EXPECT_NEAR(matrix_element(pk, sp, unit, 0.5), ref.v01, 1e-8);
}

TEST(SolvePeriodic, OracleEquivalenceSweep) {
  double worst = 0.0;
  for (int d = 1; d <= 3; ++d)
    for (int L = 3; L <= 8; ++L) {
      const auto a = oracle::adjacency(d, L, true);
      const auto sp = coupled_spectrum(build_dispersion(periodic(d, L)));
      for (int k = 1; k <= 9; ++k) {
        const double s = 0.1 * k;
        const auto pk = solve_periodic(sp, unit, s);
        const auto ref = oracle::lowest_pair(a, 0, 1.0, 1.0, s, false);
        worst = std::max({worst, std::abs(pk.e0 - ref.e0), std::abs(pk.e1 - ref.e1),
                          std::abs(matrix_element(pk, sp, unit, s) - ref.v01)});
      }
    }
  EXPECT_LE(worst, 1e-9);
}

TEST(SolvePeriodic, MarkedSiteDoesNotMatter) {
  const auto a = oracle::adjacency(2, 5, true);
  const auto sp = coupled_spectrum(build_dispersion(periodic(2, 5)));
  const ModelParams p{1.0, 0.8, 1.0};
  for (double s : {0.2, 0.55, 0.9}) {
    const double v = matrix_element(solve_periodic(sp, p, s), sp, p, s);
    for (std::int64_t m : {0, 7, 18, 24}) {
      const auto ref = oracle::lowest_pair(a, m, 1.0, 0.8, s, false);
      EXPECT_NEAR(v, ref.v01, 1e-10) << "marked " << m;
    }
  }
}

TEST(SolvePeriodic, ConstantShiftLeavesGapAndMatrixElementUnchanged) {
  // Adding -s mu / 2 to H moves both levels together.
  const auto a = oracle::adjacency(2, 4, true);
  for (double s : {0.3, 0.6}) {
    Eigen::MatrixXd h = oracle::hamiltonian(a, 0, 1.0, 1.0, s);
    Eigen::MatrixXd shifted = h - 0.5 * s * Eigen::MatrixXd::Identity(h.rows(), h.cols());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> e1(h), e2(shifted);
    EXPECT_NEAR(e1.eigenvalues()(1) - e1.eigenvalues()(0), e2.eigenvalues()(1) - e2.eigenvalues()(0), 1e-13);
    const auto pk = solve_periodic(build_dispersion(periodic(2, 4)), unit, s);
    EXPECT_NEAR(pk.gap, e2.eigenvalues()(1) - e2.eigenvalues()(0), 1e-12);
  }
}

// Random instances: interlacing, secular residual, normalisation, gap
// positivity and the norm bound on V01.
TEST(SolvePeriodic, InvariantsOnRandomInstances) {
  std::mt19937_64 rng(20240611);
  std::uniform_int_distribution<int> dim(1, 4), size(3, 40);
  std::uniform_real_distribution<double> unit_interval(0.0, 1.0), scale(0.2, 5.0);
  for (int trial = 0; trial < 400; ++trial) {
    const int d = dim(rng);
    const int L = d == 4 ? std::min(size(rng), 12) : size(rng);
    const ModelParams p{scale(rng), scale(rng), 1.0};
    double s = unit_interval(rng);
    if (trial % 10 == 0) s = 1e-6 * unit_interval(rng);
    if (trial % 10 == 1) s = 1.0 - 1e-6 * unit_interval(rng);
    if (s <= 0.0 || s >= 1.0) continue;
    SCOPED_TRACE(::testing::Message() << "d=" << d << " L=" << L << " s=" << s << " t=" << p.t << " mu=" << p.mu);
    const auto table = build_dispersion(periodic(d, L));
    const auto sp = coupled_spectrum(table);
    const auto pk = solve_periodic(sp, p, s);

    const double lmin = -(1.0 - s) * p.t * 2.0 * d;
    const double lsecond = -(1.0 - s) * p.t * table.levels[1].eps;
    EXPECT_LT(pk.e0, lmin);
    EXPECT_LE(lmin, pk.e1);
    EXPECT_LT(pk.e1, lsecond);
    EXPECT_GT(pk.gap, 0.0);

    // Evaluated at absolute E, F carries rounding of order eps |E| F'.
    for (double e : {pk.e0, pk.e1}) {
      const double f = secular_f(table, p, s, e);
      const double scaled = std::abs(f - 1.0) / std::max(1.0, std::abs(e) * secular_df(table, p, s, e));
      EXPECT_LE(scaled, 1e-12);
    }
    EXPECT_LE(pk.residual, 1e-12);

    double n0 = 0.0, n1 = 0.0;
    for (std::size_t j = 0; j < pk.ground_levels.size(); ++j) {
      n0 += pk.ground_levels[j] * pk.ground_levels[j];
      n1 += pk.excited_levels[j] * pk.excited_levels[j];
    }
    EXPECT_NEAR(n0, 1.0, 1e-10);
    EXPECT_NEAR(n1, 1.0, 1e-10);
    EXPECT_LE(matrix_element(pk, sp, p, s), p.mu + 2.0 * d * p.t);
  }
}

TEST(SolvePeriodic, ResolventWeightsMatchTheFormula) {
  // c_j ~ sqrt(m_j / N) / (lambda_j - E)
  const auto table = build_dispersion(periodic(3, 7));
  const auto pk = solve_periodic(table, unit, 0.4);
  double norm = 0.0;
  std::vector<double> c;
  for (const auto& l : table.levels) {
    c.push_back(std::sqrt(static_cast<double>(l.multiplicity) / 343.0) / (-(0.6) * l.eps - pk.e0));
    norm += c.back() * c.back();
  }
  for (std::size_t j = 0; j < c.size(); ++j) EXPECT_NEAR(pk.ground_levels[j], c[j] / std::sqrt(norm), 1e-12);
}

TEST(SolvePeriodic, RejectsBadInput) {
  const auto table = build_dispersion(periodic(2, 4));
  EXPECT_THROW(solve_periodic(table, unit, -0.1), ValidationError);
  EXPECT_THROW(solve_periodic(table, unit, 1.5), ValidationError);
  EXPECT_THROW(solve_periodic(table, ModelParams{1.0, 0.0, 1.0}, 0.5), ValidationError);
}

TEST(MatrixElement, RejectsPacketFromAnotherS) {
  const auto sp = coupled_spectrum(build_dispersion(periodic(2, 4)));
  const auto pk = solve_periodic(sp, unit, 0.4);
  EXPECT_THROW(matrix_element(pk, sp, unit, 0.5), ValidationError);
  const auto spec = open(2, 4, 0);
  const auto adj = build_open_adjacency(spec);
  const auto ok = solve_open(adj, unit, 0.4, 0);
  EXPECT_THROW(matrix_element(ok, adj, 0, unit, 0.41), ValidationError);
  EXPECT_THROW(matrix_element(pk, adj, 0, unit, 0.4), ValidationError);
}

TEST(MatrixElement, EndpointLimitsAreContinuous) {
  const auto sp = coupled_spectrum(build_dispersion(periodic(3, 6)));
  for (double s : {0.0, 1.0}) {
    const double edge = matrix_element(solve_periodic(sp, unit, s), sp, unit, s);
    const double near = s == 0.0 ? 1e-7 : 1.0 - 1e-7;
    const double inner = matrix_element(solve_periodic(sp, unit, near), sp, unit, near);
    EXPECT_NEAR(edge, inner, 1e-5) << "s=" << s;
  }
}

TEST(SolveOpen, TwoSiteChainAtStart) {
  const auto pk = solve_open(build_open_adjacency(open(1, 2, 0)), unit, 0.0, 0);
  EXPECT_NEAR(pk.e0, -1.0, 1e-14);
}

TEST(SolveOpen, ThreeSiteChainAtEnd) {
  for (auto m : {OpenMethod::Dense, OpenMethod::Lanczos}) {
    OpenSolveOptions o;
    o.method = m;
    const auto pk = solve_open(build_open_adjacency(open(1, 3, 0)), unit, 1.0, 0, o);
    EXPECT_NEAR(pk.e0, -1.0, 1e-14);
    EXPECT_NEAR(pk.e1, 0.0, 1e-14);
  }
}

TEST(SolveOpen, FourByFourAgainstDenseOracle) {
  const auto spec = open(2, 4, 5);
  const auto adj = build_open_adjacency(spec);
  const auto ref = oracle::lowest_pair(oracle::adjacency(2, 4, false), 5, 1.0, 1.0, 0.6);
  for (auto m : {OpenMethod::Dense, OpenMethod::Lanczos, OpenMethod::Sine}) {
    OpenSolveOptions o;
    o.method = m;
    const auto pk = solve_open(spec, unit, 0.6, o);
    EXPECT_NEAR(pk.e0, ref.e0, 1e-10);
    EXPECT_NEAR(pk.e1, ref.e1, 1e-10);
    EXPECT_NEAR(std::abs(pk.ground_vector.dot(ref.ground)), 1.0, 1e-10);
    EXPECT_NEAR(std::abs(pk.excited_vector.dot(ref.excited)), 1.0, 1e-10);
    EXPECT_NEAR(matrix_element(pk, adj, 5, unit, 0.6), ref.v01, 1e-9);
  }
}

TEST(SolveOpen, SymmetricMarkedSiteSkipsDecoupledStates) {
  // Centre of a 5x5 grid: states odd under a reflection never see the
  // marked site, so E1 is the next state with weight on it.
  const auto spec = open(2, 5, 12);
  const auto a = oracle::adjacency(2, 5, false);
  for (double s : {0.05, 0.3, 0.7, 0.95}) {
    const auto ref = oracle::lowest_pair(a, 12, 1.0, 1.0, s);
    const auto plain = oracle::lowest_pair(a, 12, 1.0, 1.0, s, false);
    EXPECT_LE(plain.e1, ref.e1);
    if (s < 0.9) {
      EXPECT_LT(plain.e1, ref.e1 - 1e-3);
    }
    for (auto m : {OpenMethod::Dense, OpenMethod::Lanczos, OpenMethod::Sine}) {
      OpenSolveOptions o;
      o.method = m;
      const auto pk = solve_open(spec, unit, s, o);
      EXPECT_NEAR(pk.e0, ref.e0, 1e-10);
      EXPECT_NEAR(pk.e1, ref.e1, 1e-10);
    }
  }
}

TEST(SolveOpen, MethodsAgreeAcrossOrbitsAndS) {
  for (auto [d, L] : {std::pair{1, 7}, std::pair{2, 6}, std::pair{3, 4}}) {
    const auto base = open(d, L, 0);
    const auto adj = build_open_adjacency(base);
    for (auto rep : marked_site_representatives(base)) {
      auto spec = base;
      spec.marked_site = rep;
      for (double s : {0.0, 0.15, 0.5, 0.8, 1.0}) {
        SCOPED_TRACE(::testing::Message() << "d=" << d << " L=" << L << " site=" << rep << " s=" << s);
        OpenSolveOptions dense, lanczos, sine;
        dense.method = OpenMethod::Dense;
        lanczos.method = OpenMethod::Lanczos;
        sine.method = OpenMethod::Sine;
        const auto a = solve_open(spec, unit, s, dense);
        const auto b = solve_open(spec, unit, s, lanczos);
        const auto c = solve_open(spec, unit, s, sine);
        EXPECT_NEAR(a.e0, c.e0, 1e-10);
        EXPECT_NEAR(a.e1, c.e1, 1e-10);
        EXPECT_NEAR(b.e0, c.e0, 1e-10);
        EXPECT_NEAR(b.e1, c.e1, 1e-10);
        const double va = matrix_element(a, adj, rep, unit, s);
        const double vb = matrix_element(b, adj, rep, unit, s);
        const double vc = matrix_element(c, adj, rep, unit, s);
        EXPECT_NEAR(va, vc, 1e-9);
        EXPECT_NEAR(vb, vc, 1e-9);
        EXPECT_NEAR(std::abs(a.ground_vector.dot(c.ground_vector)), 1.0, 1e-9);
        EXPECT_NEAR(std::abs(b.excited_vector.dot(c.excited_vector)), 1.0, 1e-9);
        const auto sp = open_coupled_spectrum(spec);
        const auto r = solve_open(spec, unit, s, sine_options());
        EXPECT_NEAR(matrix_element(r, sp, unit, s), vc, 1e-12);
      }
    }
  }
}

TEST(SolveOpen, DenseTraceIdentity) {
  const auto spec = open(2, 6, 8);
  const auto adj = build_open_adjacency(spec);
  OpenSolveOptions o;
  o.method = OpenMethod::Dense;
  for (double s : {0.2, 0.5, 0.9}) {
    const auto pk = solve_open(adj, unit, s, 8, o);
    EXPECT_LE(pk.trace_residual, 1e-8 * 36);
  }
}

TEST(SolveOpen, AutoSwitchesToLanczosAboveThreshold) {
  const auto spec = open(3, 17, 0);  // 4913 sites
  const auto adj = build_open_adjacency(spec);
  const auto pk = solve_open(adj, unit, 0.3, 0);
  EXPECT_GT(pk.iterations, 0);
  const auto ref = solve_open(spec, unit, 0.3, sine_options());
  EXPECT_NEAR(pk.e0, ref.e0, 1e-10);
  EXPECT_NEAR(pk.e1, ref.e1, 1e-10);
}

TEST(SolveOpen, RejectsBadInput) {
  const auto adj = build_open_adjacency(open(2, 3, 0));
  EXPECT_THROW(solve_open(adj, unit, 0.5, 9), ValidationError);
  EXPECT_THROW(solve_open(adj, unit, 1.2, 0), ValidationError);
  OpenSolveOptions sine;
  sine.method = OpenMethod::Sine;
  EXPECT_THROW(solve_open(adj, unit, 0.5, 0, sine), ValidationError);
  EXPECT_THROW(solve_open(periodic(2, 3), unit, 0.5), ValidationError);
}

TEST(Degeneracy, FlagThreshold) {
  EXPECT_TRUE(is_degenerate(1e-14, -1.0));
  EXPECT_FALSE(is_degenerate(1e-12, -1.0));
  EXPECT_TRUE(is_degenerate(5e-13, -10.0));
  EXPECT_FALSE(is_degenerate(2e-12, -10.0));
  EigenpairPacket pk;
  pk.gap = 0.0;
  pk.degenerate = true;
  const auto pt = make_point(pk, 0.3);
  EXPECT_TRUE(pt.degenerate);
  EXPECT_TRUE(std::isnan(pt.integrand));
}

TEST(Grover, ClosedForms) {
  for (std::int64_t n : {2, 4, 64, 1000}) {
    const auto g = grover_reference(n, 0.5);
    EXPECT_NEAR(g.gap, 1.0 / std::sqrt(static_cast<double>(n)), 1e-15);
  }
  EXPECT_EQ(grover_reference(2, 0.0).gap, 1.0);
  EXPECT_THROW(grover_reference(1, 0.5), ValidationError);
  EXPECT_THROW(grover_reference(4, 1.5), ValidationError);
}

TEST(Grover, MatchesDenseTwoLevelModel) {
  // H = -(1-s)|+><+| - s|0><0| on N sites.
  const int n = 12;
  Eigen::VectorXd plus = Eigen::VectorXd::Constant(n, 1.0 / std::sqrt(n));
  for (double s : {0.1, 0.4, 0.5, 0.77}) {
    Eigen::MatrixXd h = -(1.0 - s) * plus * plus.transpose();
    h(0, 0) -= s;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    Eigen::MatrixXd dh = plus * plus.transpose();
    dh(0, 0) -= 1.0;
    const double v = std::abs(es.eigenvectors().col(0).dot(dh * es.eigenvectors().col(1)));
    const auto g = grover_reference(n, s);
    EXPECT_NEAR(g.gap, es.eigenvalues()(1) - es.eigenvalues()(0), 1e-12);
    EXPECT_NEAR(g.v01, v, 1e-12);
    const auto pt = grover_source(n)(s);
    EXPECT_NEAR(pt.e0, es.eigenvalues()(0), 1e-12);
    EXPECT_NEAR(pt.e1, es.eigenvalues()(1), 1e-12);
  }
}

TEST(Sources, PeriodicAndOpenSourcesAgreeWithSolvers) {
  const auto per = periodic_source(periodic(3, 5), unit);
  const auto sp = coupled_spectrum(build_dispersion(periodic(3, 5)));
  const auto pk = solve_periodic(sp, unit, 0.33);
  const auto pt = per(0.33);
  EXPECT_EQ(pt.e0, pk.e0);
  EXPECT_EQ(pt.v01, matrix_element(pk, sp, unit, 0.33));
  EXPECT_EQ(pt.integrand, pt.v01 / (pt.gap * pt.gap));

  const auto spec = open(2, 5, 6);
  OpenSolveOptions dense;
  dense.method = OpenMethod::Dense;
  const auto a = open_source(spec, unit)(0.42);
  const auto b = open_source(spec, unit, dense)(0.42);
  EXPECT_NEAR(a.gap, b.gap, 1e-11);
  EXPECT_NEAR(a.v01, b.v01, 1e-9);
}
