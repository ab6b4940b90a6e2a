#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "past/errors.hpp"
#include "past/optimizer.hpp"

using namespace past;

namespace {

// Closed forms of the reference cost table, written out term by term.
struct Reference {
  double c_r, c_a, s_t, n_t, beta, f3, f4, fsk3, x;

  double q1_st() const { return (c_r * s_t * n_t + 1048576 * c_a) / (10 * beta); }
  double q1_kt() const { return (c_r * s_t * n_t + 16384 * c_a) / (16384 * beta); }
  double q2_st() const { return q1_st(); }
  double q2_kt() const { return q1_kt(); }
  double q3_st() const { return ((c_r + f3) * s_t * n_t + 1048576 * c_a) / (10 * beta); }
  double q3_kt() const { return ((c_r + f3) * s_t * n_t + 16384 * c_a) / (10 * beta); }
  double q3_ktst() const {
    return (c_r * s_t * n_t + 16384 * c_a) / (16384 * beta) + (c_r + fsk3) * s_t * n_t * x / (10485760 * beta) +
           x * c_a / (10 * beta);
  }
  double q4_st() const { return ((c_r + f4) * s_t * n_t + 1048576 * c_a) / (10 * beta); }
  double q4_kt() const { return (c_r * s_t * n_t + 16384 * c_a) / (10 * beta); }
};

CostParams random_params(std::mt19937_64& rng) {
  auto logu = [&](double lo, double hi) {
    return std::exp(std::uniform_real_distribution<double>(std::log(lo), std::log(hi))(rng));
  };
  CostParams cp = CostParams::reference();
  cp.s_e = logu(1, 1000);
  cp.r_e = logu(1, 1e6);
  cp.tru = logu(1, 1e5);
  cp.c_r = logu(1e-9, 1e-3);
  cp.c_a = logu(1e-6, 1);
  cp.beta = std::uniform_real_distribution<double>(0.05, 1.0)(rng);
  cp.f3 = logu(1e-9, 1e-3);
  cp.f4 = logu(1e-9, 1e-3);
  cp.fsk3 = logu(1e-12, 1e-6);
  return cp;
}

void expect_rel(double got, double want) { EXPECT_LE(std::fabs(got - want), 1e-9 * std::fabs(want)) << got << " vs " << want; }

}  // namespace

TEST(CostModel, TruCount) {
  EXPECT_EQ(n_t(5, 5, {3600}), 1);
  EXPECT_EQ(n_t(0, 86400, {86400}), 2);
  EXPECT_EQ(n_t(1, 2 * 86400, {86400}), 2);
  EXPECT_THROW(n_t(2, 1, {10}), DomainError);
}

TEST(CostModel, ReproducesReferenceTable) {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 200; ++i) {
    const auto cp = random_params(rng);
    const std::int64_t nt = 1 + static_cast<std::int64_t>(rng() % 400);
    const double x = static_cast<double>(1 + rng() % 5000);
    const Reference r{cp.c_r, cp.c_a, cp.s_t(), static_cast<double>(nt), cp.beta, cp.f3, cp.f4, cp.fsk3, x};
    expect_rel(estimate(QueryKind::Q1, PlanKind::ST, cp, nt).total_cost, r.q1_st());
    expect_rel(estimate(QueryKind::Q1, PlanKind::KT, cp, nt).total_cost, r.q1_kt());
    expect_rel(estimate(QueryKind::Q2, PlanKind::ST, cp, nt).total_cost, r.q2_st());
    expect_rel(estimate(QueryKind::Q2, PlanKind::KT, cp, nt).total_cost, r.q2_kt());
    expect_rel(estimate(QueryKind::Q3, PlanKind::ST, cp, nt).total_cost, r.q3_st());
    expect_rel(estimate(QueryKind::Q3, PlanKind::KT, cp, nt).total_cost, r.q3_kt());
    expect_rel(estimate(QueryKind::Q3, PlanKind::KTST, cp, nt, x).total_cost, r.q3_ktst());
    expect_rel(estimate(QueryKind::Q4, PlanKind::ST, cp, nt).total_cost, r.q4_st());
    expect_rel(estimate(QueryKind::Q4, PlanKind::KT, cp, nt).total_cost, r.q4_kt());
  }
}

TEST(CostModel, WorkedExample) {
  CostParams cp = CostParams::reference();
  cp.c_r = 1e-6;  // per byte, i.e. 1 per MB
  cp.c_a = 0.001;
  cp.s_e = 1;
  cp.r_e = 100e6;
  cp.tru = 1;  // S_T = 100 MB
  const double kt = estimate(QueryKind::Q1, PlanKind::KT, cp, 1).total_cost;
  const double st = estimate(QueryKind::Q1, PlanKind::ST, cp, 1).total_cost;
  EXPECT_NEAR(kt, 0.0071, 5e-5);
  EXPECT_NEAR(st, 114.9, 0.05);
}

TEST(CostModel, StagesSumAndBreakdownsAddUp) {
  const auto cp = CostParams::reference();
  const auto e = estimate(QueryKind::Q3, PlanKind::KTST, cp, 3, 50.0);
  ASSERT_EQ(e.stages.size(), 2u);
  EXPECT_DOUBLE_EQ(e.total_cost, e.stages[0].total + e.stages[1].total);
  for (const auto& s : e.stages) {
    EXPECT_DOUBLE_EQ(s.total, (s.read + s.invoke + s.shuffle) / (cp.beta * s.p));
  }
}

TEST(CostModel, MonotoneInTimeSizeAndReadCost) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 100; ++i) {
    auto cp = random_params(rng);
    for (auto q : {QueryKind::Q1, QueryKind::Q2, QueryKind::Q3, QueryKind::Q4}) {
      for (auto p : supported_plans(q)) {
        const double base = estimate(q, p, cp, 5, 40.0).total_cost;
        EXPECT_LE(base, estimate(q, p, cp, 6, 40.0).total_cost);
        auto bigger = cp;
        bigger.s_e *= 1.5;
        EXPECT_LE(base, estimate(q, p, bigger, 5, 40.0).total_cost);
        bigger = cp;
        bigger.c_r *= 1.5;
        EXPECT_LE(base, estimate(q, p, bigger, 5, 40.0).total_cost);
      }
    }
  }
}

TEST(CostModel, TraceLookupAlwaysFavoursSlots) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 500; ++i) {
    auto cp = random_params(rng);
    cp.n_kt = static_cast<double>(1 + rng() % 100000);
    cp.n_st = cp.n_kt + static_cast<double>(1 + rng() % 1000000);
    cp.n_workers = static_cast<double>(1 + rng() % 64);
    const std::int64_t nt = 1 + static_cast<std::int64_t>(rng() % 100);
    EXPECT_LT(estimate(QueryKind::Q1, PlanKind::KT, cp, nt).total_cost,
              estimate(QueryKind::Q1, PlanKind::ST, cp, nt).total_cost);
  }
}

TEST(CostModel, InvalidCombinations) {
  const auto cp = CostParams::reference();
  EXPECT_THROW(estimate(QueryKind::Q1, PlanKind::KTST, cp, 1, 10.0), DomainError);
  EXPECT_THROW(estimate(QueryKind::Q3, PlanKind::KTST, cp, 1), DomainError);
  auto bad = cp;
  bad.beta = 1.5;
  EXPECT_THROW(estimate(QueryKind::Q1, PlanKind::KT, bad, 1), DomainError);
}

TEST(PlanSelection, ReferenceComparison) {
  const auto cp = CostParams::reference();
  for (std::int64_t nt : {1, 7, 30}) {
    EXPECT_EQ(select_plan(QueryKind::Q1, cp, nt), PlanKind::KT);
    EXPECT_EQ(select_plan(QueryKind::Q2, cp, nt), PlanKind::KT);
    EXPECT_EQ(select_plan(QueryKind::Q4, cp, nt), PlanKind::KT);
    EXPECT_EQ(select_plan(QueryKind::Q3, cp, nt, 200.0), PlanKind::KTST);
    const double ktst = estimate(QueryKind::Q3, PlanKind::KTST, cp, nt, 200.0).total_cost;
    const double kt = estimate(QueryKind::Q3, PlanKind::KT, cp, nt).total_cost;
    const double st = estimate(QueryKind::Q3, PlanKind::ST, cp, nt).total_cost;
    EXPECT_LT(ktst, kt);
    EXPECT_LT(kt, st);
  }
  EXPECT_EQ(select_plan(QueryKind::Q3, cp, 1), PlanKind::KT);  // composite needs x
}

TEST(PlanSelection, IsTheArgminOfEstimates) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 300; ++i) {
    const auto cp = random_params(rng);
    const std::int64_t nt = 1 + static_cast<std::int64_t>(rng() % 50);
    const double x = static_cast<double>(rng() % 2000000);
    for (auto q : {QueryKind::Q1, QueryKind::Q2, QueryKind::Q3, QueryKind::Q4}) {
      const auto chosen = select_plan(q, cp, nt, x);
      const double c = estimate(q, chosen, cp, nt, x).total_cost;
      for (auto p : supported_plans(q)) EXPECT_LE(c, estimate(q, p, cp, nt, x).total_cost);
    }
  }
}

TEST(PlanSelection, TiesPreferSlots) {
  // One worker and equal region / slot counts make ST and KT cost the same for Q4.
  CostParams cp = CostParams::reference();
  cp.n_st = cp.n_kt = 64;
  cp.n_workers = 1;
  cp.f4 = 0;
  EXPECT_EQ(estimate(QueryKind::Q4, PlanKind::ST, cp, 3).total_cost,
            estimate(QueryKind::Q4, PlanKind::KT, cp, 3).total_cost);
  EXPECT_EQ(select_plan(QueryKind::Q4, cp, 3), PlanKind::KT);
}

TEST(Profile, RoundTripsAndRejectsUnknownKeys) {
  std::mt19937_64 rng(10);
  const auto cp = random_params(rng);
  std::stringstream ss;
  write_profile(ss, cp);
  const auto back = read_profile(ss);
  EXPECT_EQ(back.c_r, cp.c_r);
  EXPECT_EQ(back.c_a, cp.c_a);
  EXPECT_EQ(back.beta, cp.beta);
  EXPECT_EQ(back.fsk3, cp.fsk3);
  EXPECT_EQ(back.s_t(), cp.s_t());
  std::istringstream bad("c_r = 1\nbogus = 2\n");
  EXPECT_THROW(read_profile(bad), DomainError);
  std::istringstream partial("beta = 0.5\n");
  EXPECT_EQ(read_profile(partial, cp).beta, 0.5);
}

TEST(Calibration, RecoversLinearTimings) {
  const double c_r = 2e-9, c_a = 3e-5;
  std::vector<CalibrationSample> samples;
  std::mt19937_64 rng(11);
  for (int i = 0; i < 40; ++i) {
    CalibrationSample s;
    s.query = i % 2 ? QueryKind::Q3 : QueryKind::Q1;
    s.plan = i % 3 ? PlanKind::ST : PlanKind::KTST;
    s.stats.store.bytes_read = 1000 + rng() % 10'000'000;
    s.stats.store.invocations = 1 + rng() % 20000;
    s.stats.bytes_shuffled = s.stats.store.bytes_read / (s.plan == PlanKind::ST ? 2 : 50);
    s.stats.seconds = c_r * s.stats.store.bytes_read + c_a * s.stats.store.invocations;
    samples.push_back(s);
  }
  const auto cp = calibrate(samples, CostParams::reference());
  EXPECT_NEAR(cp.c_r, c_r, 1e-6 * c_r);
  EXPECT_NEAR(cp.c_a, c_a, 1e-6 * c_a);
  EXPECT_NEAR(cp.f3, c_r * 0.5, 0.01 * c_r);
  EXPECT_LT(cp.fsk3, cp.f3);
  EXPECT_EQ(cp.f4, CostParams::reference().f4);  // no Q4 samples
}
