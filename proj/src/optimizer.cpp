#include "past/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "past/config.hpp"
#include "past/errors.hpp"
#include "past/io.hpp"

namespace past {

void CostParams::validate() const {
  for (double v : {s_e, r_e, tru, c_r, c_a, beta, n_st, n_kt, n_workers}) {
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("cost parameters must be positive and finite");
  }
  for (double v : {f3, f4, fsk3}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("network factors must be non-negative");
  }
  if (beta > 1.0) throw DomainError("beta must lie in (0, 1]");
}

CostParams CostParams::reference() { return CostParams{}; }

CostParams CostParams::for_plan(const ClusterPlan& plan) {
  CostParams cp;
  cp.tru = static_cast<double>(plan.time().tru_seconds);
  cp.n_st = plan.grid().region_count();
  cp.n_kt = static_cast<double>(std::uint64_t{1} << plan.slot_bits());
  cp.n_workers = plan.workers();
  return cp;
}

CostParams CostParams::for_store(const ClusterPlan& plan, const std::vector<BlockStore*>& stores) {
  CostParams cp = for_plan(plan);
  std::uint64_t bytes = 0, edges = 0;
  TimeRangeIndex lo = 0, hi = -1;
  for (auto* s : stores) {
    bytes += s->stored_bytes(Method::SpatioTemporal, Table::Primary);
    edges += s->stored_edges(Method::SpatioTemporal, Table::Primary);
    for (const auto& k : s->keys(Method::SpatioTemporal, Table::Primary)) {
      if (hi < lo) {
        lo = hi = k.time_range;
      } else {
        lo = std::min(lo, k.time_range);
        hi = std::max(hi, k.time_range);
      }
    }
  }
  if (edges > 0) {
    cp.s_e = static_cast<double>(bytes) / static_cast<double>(edges);
    cp.r_e = static_cast<double>(edges) / (static_cast<double>(hi - lo + 1) * cp.tru);
  }
  return cp;
}

namespace {

struct Field {
  const char* key;
  double CostParams::*member;
};

constexpr Field kFields[] = {
    {"S_e", &CostParams::s_e},   {"R_e", &CostParams::r_e},       {"TRU", &CostParams::tru},
    {"c_r", &CostParams::c_r},   {"c_a", &CostParams::c_a},       {"beta", &CostParams::beta},
    {"f_3", &CostParams::f3},    {"f_4", &CostParams::f4},        {"f_sk3", &CostParams::fsk3},
    {"N_st", &CostParams::n_st}, {"N_kt", &CostParams::n_kt},     {"p", &CostParams::n_workers},
};

}  // namespace

void write_profile(std::ostream& out, const CostParams& cp) {
  out << "# cost model calibration profile\n";
  for (const auto& f : kFields) out << f.key << " = " << io::format_double(cp.*(f.member)) << '\n';
}

CostParams read_profile(std::istream& in, CostParams base) {
  for (const auto& [k, v] : config::parse(in)) {
    const auto* it = std::find_if(std::begin(kFields), std::end(kFields), [&](const Field& f) { return k == f.key; });
    if (it == std::end(kFields)) throw DomainError("unknown cost profile key '" + k + "'");
    base.*(it->member) = config::to_double(k, v);
  }
  base.validate();
  return base;
}

namespace {

std::int64_t ceil_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a > 0) == (b > 0))) ++q;
  return q;
}

CostTerm term(const CostParams& cp, double n_t, double p, double f, double n_q, double p_q) {
  CostTerm t;
  t.p = p;
  t.f = f;
  t.n_q = n_q;
  t.p_q = p_q;
  const double data = cp.s_t() * n_t * p_q;
  t.read = cp.c_r * data;
  t.invoke = cp.c_a * n_q;
  t.shuffle = f * data;
  t.total = (t.read + t.invoke + t.shuffle) / (cp.beta * p);
  return t;
}

double parallelism(QueryKind q, PlanKind plan, const CostParams& cp) {
  if (plan == PlanKind::KT && q == QueryKind::Q1) return 1;
  if (plan == PlanKind::KT && q == QueryKind::Q2) return std::min(2.0, cp.n_workers);
  return cp.n_workers;
}

}  // namespace

std::int64_t n_t(Timestamp t_s, Timestamp t_e, const TimeDiscretization& d) {
  d.validate();
  if (t_s > t_e) throw DomainError("n_t needs t_s <= t_e");
  return ceil_div(t_e, d.tru_seconds) - ceil_div(t_s, d.tru_seconds) + 1;
}

CostEstimate estimate(QueryKind q, PlanKind plan, const CostParams& cp, std::int64_t nt, std::optional<double> x) {
  cp.validate();
  if (nt < 1) throw DomainError("N_t must be at least 1");
  if (!plan_supported(q, plan)) throw DomainError("the composite plan applies to Q3 only");
  const double n = static_cast<double>(nt);
  const double p = parallelism(q, plan, cp);
  CostEstimate e;
  e.query = q;
  e.plan = plan;
  switch (plan) {
    case PlanKind::ST: {
      const double f = q == QueryKind::Q3 ? cp.f3 : q == QueryKind::Q4 ? cp.f4 : 0.0;
      e.stages.push_back(term(cp, n, p, f, cp.n_st, 1.0));
      break;
    }
    case PlanKind::KT:
      if (q == QueryKind::Q1) {
        e.stages.push_back(term(cp, n, p, 0.0, 1, 1.0 / cp.n_kt));
      } else if (q == QueryKind::Q2) {
        e.stages.push_back(term(cp, n, p, 0.0, 2, 2.0 / cp.n_kt));
      } else {
        e.stages.push_back(term(cp, n, p, q == QueryKind::Q3 ? cp.f3 : 0.0, cp.n_kt, 1.0));
      }
      break;
    case PlanKind::KTST:
      if (!x) throw DomainError("the composite plan needs the region count x");
      if (!(*x >= 0.0)) throw DomainError("x must be non-negative");
      e.stages.push_back(term(cp, n, 1, 0.0, 1, 1.0 / cp.n_kt));
      e.stages.push_back(term(cp, n, cp.n_workers, cp.fsk3, *x, *x / cp.n_st));
      break;
  }
  for (const auto& s : e.stages) e.total_cost += s.total;
  return e;
}

CostEstimate estimate(QueryKind q, PlanKind plan, const CostParams& cp, Timestamp t_s, Timestamp t_e,
                      const TimeDiscretization& d, std::optional<double> x) {
  return estimate(q, plan, cp, n_t(t_s, t_e, d), x);
}

PlanKind select_plan(QueryKind q, const CostParams& cp, std::int64_t nt, std::optional<double> x) {
  std::vector<PlanKind> order{PlanKind::KT};
  if (q == QueryKind::Q3 && x) order.push_back(PlanKind::KTST);
  order.push_back(PlanKind::ST);
  PlanKind best = order.front();
  double best_cost = estimate(q, best, cp, nt, x).total_cost;
  for (std::size_t i = 1; i < order.size(); ++i) {
    const double c = estimate(q, order[i], cp, nt, x).total_cost;
    if (c < best_cost) {
      best = order[i];
      best_cost = c;
    }
  }
  return best;
}

double measured_cost(const QueryStats& s, const CostParams& cp) {
  const double p = parallelism(s.query, s.plan, cp);
  return (cp.c_r * static_cast<double>(s.store.bytes_read) + cp.c_a * static_cast<double>(s.store.invocations) +
          cp.c_r * static_cast<double>(s.bytes_shuffled)) /
         (cp.beta * p);
}

CostParams calibrate(const std::vector<CalibrationSample>& samples, CostParams base) {
  // Normal equations for y = a * bytes + b * invocations.
  double sxx = 0, sxy = 0, syy = 0, sxt = 0, syt = 0;
  for (const auto& s : samples) {
    const double x = static_cast<double>(s.stats.store.bytes_read);
    const double y = static_cast<double>(s.stats.store.invocations);
    const double t = s.stats.seconds;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
    sxt += x * t;
    syt += y * t;
  }
  constexpr double kFloor = 1e-15;
  const double det = sxx * syy - sxy * sxy;
  if (samples.size() >= 2 && std::fabs(det) > 1e-12 * sxx * syy) {
    double a = (sxt * syy - syt * sxy) / det;
    double b = (syt * sxx - sxt * sxy) / det;
    // A negative coefficient means the other term explains the timings alone.
    if (a <= 0) {
      a = kFloor;
      b = syy > 0 ? std::max(kFloor, syt / syy) : base.c_a;
    } else if (b <= 0) {
      b = kFloor;
      a = sxx > 0 ? std::max(kFloor, sxt / sxx) : base.c_r;
    }
    base.c_r = a;
    base.c_a = b;
  }

  auto ratio = [&](QueryKind q, PlanKind p) -> std::optional<double> {
    double read = 0, moved = 0;
    for (const auto& s : samples) {
      if (s.query == q && s.plan == p) {
        read += static_cast<double>(s.stats.store.bytes_read);
        moved += static_cast<double>(s.stats.bytes_shuffled);
      }
    }
    if (read <= 0) return std::nullopt;
    return moved / read;
  };
  if (auto r = ratio(QueryKind::Q3, PlanKind::ST)) base.f3 = base.c_r * *r;
  if (auto r = ratio(QueryKind::Q4, PlanKind::ST)) base.f4 = base.c_r * *r;
  if (auto r = ratio(QueryKind::Q3, PlanKind::KTST)) base.fsk3 = base.c_r * *r;
  base.validate();
  return base;
}

}  // namespace past
