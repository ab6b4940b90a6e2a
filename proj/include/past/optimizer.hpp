#pragma once

// Cost model for choosing between the spatio-temporal and key-temporal
// partitions (and their combination for Q3).
//
//   Cost = [(c_r + f) * S_T * N_t * P_q + c_a * N_q] / (beta * p)
//
// with S_T = S_e * R_e * TRU the bytes one TRU of data occupies, N_t the TRUs a
// query's range covers, N_q the regions or slots it invokes the backend for,
// P_q the fraction of the partition it reads, and p its parallelism.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "past/cluster_plan.hpp"
#include "past/query.hpp"
#include "past/storage.hpp"

namespace past {

struct CostParams {
  double s_e = 24.0;       // bytes per edge
  double r_e = 1000.0;     // edges ingested per second
  double tru = 86400.0;    // seconds
  double c_r = 1e-6;       // per byte read
  double c_a = 1e-3;       // per backend invocation
  double beta = 1.0;       // parallelism penalty, (0, 1]
  double f3 = 5e-6;        // per byte: Q3 full-scan join shuffle
  double f4 = 5e-6;        // per byte: Q4 spatio-temporal regroup
  double fsk3 = 5e-8;      // per byte: Q3 composite plan
  double n_st = 1048576;   // regions
  double n_kt = 16384;     // slots
  double n_workers = 10;   // parallelism ceiling

  double s_t() const { return s_e * r_e * tru; }
  void validate() const;

  // Reference setting: 1024 x 1024 regions, 2^14 slots, 10 workers, daily TRU.
  static CostParams reference();
  // Region / slot / worker counts and TRU taken from a cluster plan.
  static CostParams for_plan(const ClusterPlan& plan);
  // Additionally measures S_e and R_e from the stored spatio-temporal primaries.
  static CostParams for_store(const ClusterPlan& plan, const std::vector<BlockStore*>& stores);
};

void write_profile(std::ostream& out, const CostParams& cp);
// Starts from `base` and overrides every key present. DomainError on unknown keys.
CostParams read_profile(std::istream& in, CostParams base = {});

struct CostTerm {
  double p = 1;     // parallelism
  double f = 0;     // network factor
  double n_q = 1;   // invocations
  double p_q = 1;   // fraction of the partition read
  double read = 0;
  double invoke = 0;
  double shuffle = 0;
  double total = 0;  // (read + invoke + shuffle) / (beta * p)
};

struct CostEstimate {
  QueryKind query = QueryKind::Q1;
  PlanKind plan = PlanKind::ST;
  std::vector<CostTerm> stages;  // two for the composite plan, one otherwise
  double total_cost = 0;
};

// ceil(t_e / TRU) - ceil(t_s / TRU) + 1.
std::int64_t n_t(Timestamp t_s, Timestamp t_e, const TimeDiscretization& d);

// DomainError for KT+ST outside Q3, or KT+ST without x.
CostEstimate estimate(QueryKind q, PlanKind plan, const CostParams& cp, std::int64_t n_t,
                      std::optional<double> x = std::nullopt);
CostEstimate estimate(QueryKind q, PlanKind plan, const CostParams& cp, Timestamp t_s, Timestamp t_e,
                      const TimeDiscretization& d, std::optional<double> x = std::nullopt);

// Argmin of estimate; ties go to KT, then KT+ST, then ST. KT+ST is only a
// candidate for Q3 when x is known.
PlanKind select_plan(QueryKind q, const CostParams& cp, std::int64_t n_t, std::optional<double> x = std::nullopt);

// The same cost formula evaluated on what a run actually did: bytes read in
// place of S_T * N_t * P_q, invocations in place of N_q, and bytes shuffled
// charged at the read rate in place of f * data size.
double measured_cost(const QueryStats& s, const CostParams& cp);

struct CalibrationSample {
  QueryKind query = QueryKind::Q1;
  PlanKind plan = PlanKind::ST;
  QueryStats stats;
};

// Least-squares fit of seconds ~ c_r * bytes_read + c_a * invocations over the
// samples (coefficients floored at a tiny positive value); each f is then c_r
// times the measured shuffled/read byte ratio of its plan family. Families
// with no sample keep their value from `base`.
CostParams calibrate(const std::vector<CalibrationSample>& samples, CostParams base);

}  // namespace past
