#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "past/cli.hpp"
#include "past/cluster_plan.hpp"
#include "past/errors.hpp"
#include "past/io.hpp"
#include "past/optimizer.hpp"
#include "past/partition.hpp"
#include "past/query.hpp"
#include "past/run_config.hpp"

namespace py = pybind11;
using namespace past;

namespace {

namespace fs = std::filesystem;

py::dict stats_dict(const QueryStats& s) {
  py::dict d;
  d["query"] = std::string(to_string(s.query));
  d["plan"] = std::string(to_string(s.plan));
  d["bytes_read"] = s.store.bytes_read;
  d["blocks_read"] = s.store.blocks_read;
  d["invocations"] = s.store.invocations;
  d["bytes_shuffled"] = s.bytes_shuffled;
  d["regions_scanned"] = s.regions_scanned;
  d["pair_checks"] = s.pair_checks;
  d["dist_evals"] = s.dist_evals;
  d["seconds"] = s.seconds;
  return d;
}

CostParams params_from(const std::optional<py::dict>& overrides) {
  CostParams cp = CostParams::reference();
  if (!overrides) return cp;
  std::ostringstream text;
  for (const auto& [k, v] : *overrides) text << py::str(k).cast<std::string>() << " = " << py::str(v).cast<std::string>() << '\n';
  std::istringstream in(text.str());
  return read_profile(in, cp);
}

// Read-only handle on an ingested data directory.
class Store {
 public:
  explicit Store(const fs::path& data_dir) {
    const fs::path dir = data_dir / "store";
    if (!fs::is_regular_file(dir / "plan.snapshot")) throw NotFoundError("no ingested store under " + dir.string());
    if (fs::is_regular_file(dir / "run.conf")) rc_.apply(config::parse_file(dir / "run.conf"));
    auto catalog = std::make_shared<LocationCatalog>(io::read_locations(dir / "locations.txt"));
    std::ifstream snap(dir / "plan.snapshot");
    std::stringstream text;
    text << snap.rdbuf();
    plan_ = std::make_shared<ClusterPlan>(ClusterPlan::from_snapshot(text.str(), catalog));
    cluster_ = std::make_unique<Cluster>(plan_, dir, rc_.worker_options());
  }

  QueryEngine engine(std::optional<bool> filters) const {
    auto o = rc_.query_options();
    if (filters) o.filters = *filters;
    return QueryEngine(plan_, cluster_->stores(), o);
  }

  std::uint32_t workers() const { return plan_->workers(); }
  std::string snapshot() const { return plan_->snapshot(); }
  const py::dict& last_stats() const { return last_; }

  std::vector<std::tuple<ObjectId, Timestamp, LocationId>> q1(ObjectId o, Timestamp ts, Timestamp te,
                                                               const std::string& plan) {
    QueryStats st;
    std::vector<std::tuple<ObjectId, Timestamp, LocationId>> out;
    for (const auto& e : engine({}).q1_trace(o, ts, te, parse_plan_kind(plan), &st)) {
      out.emplace_back(e.object_id, e.timestamp, e.location_id);
    }
    last_ = stats_dict(st);
    return out;
  }

  std::uint64_t q2(ObjectId a, ObjectId b, Timestamp ts, Timestamp te, const std::string& plan) {
    QueryStats st;
    const auto n = engine({}).q2_similarity(a, b, ts, te, parse_plan_kind(plan), &st);
    last_ = stats_dict(st);
    return n;
  }

  std::vector<std::pair<ObjectId, std::uint64_t>> q3(ObjectId o, Timestamp ts, Timestamp te, const std::string& plan,
                                                     std::optional<bool> filters) {
    QueryStats st;
    std::vector<std::pair<ObjectId, std::uint64_t>> out;
    for (const auto& r : engine(filters).q3_similar_objects(o, ts, te, parse_plan_kind(plan), &st)) {
      out.emplace_back(r.object_id, r.score);
    }
    last_ = stats_dict(st);
    return out;
  }

  std::vector<ObjectId> q4(Timestamp ts, Timestamp te, const std::string& plan) {
    QueryStats st;
    auto out = engine({}).q4_clones(ts, te, parse_plan_kind(plan), &st);
    last_ = stats_dict(st);
    return out;
  }

  py::dict stored_bytes() const {
    py::list st, kt, extra;
    for (auto* s : cluster_->stores()) {
      st.append(s->stored_bytes(Method::SpatioTemporal, Table::Primary) +
                s->stored_bytes(Method::SpatioTemporal, Table::Replica));
      kt.append(s->stored_bytes(Method::KeyTemporal, Table::Primary));
      extra.append(s->stored_bytes(Method::KeyTemporal, Table::Replica));
    }
    py::dict d;
    d["st"] = st;
    d["kt"] = kt;
    d["kt_extra"] = extra;
    return d;
  }

 private:
  RunConfig rc_;
  std::shared_ptr<const ClusterPlan> plan_;
  std::unique_ptr<Cluster> cluster_;
  py::dict last_;
};

}  // namespace

PYBIND11_MODULE(_past, m) {
  m.doc() = "Spatio-temporal graph store bindings";

  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<LookupError>(m, "LookupError", PyExc_KeyError);
  py::register_exception<StoreError>(m, "StoreError", PyExc_OSError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "past");
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs one CLI command in-process; returns (exit_code, stdout, stderr).");

  m.def("z_encode", &z_encode, py::arg("col"), py::arg("row"));
  m.def("slot_of", &slot_of, py::arg("object_id"), py::arg("slot_bits"));
  m.def("sf_lower_bound", &sf_lower_bound, py::arg("b"), py::arg("a"), py::arg("d"));
  m.def(
      "b_range",
      [](double eps1, double eps2, double alpha, double d, double a) {
        const auto r = b_range({eps1, eps2, alpha, d, a});
        return py::make_tuple(r.b_min, r.b_max);
      },
      py::arg("epsilon1"), py::arg("epsilon2"), py::arg("alpha"), py::arg("distance"), py::arg("region_width"));
  m.def(
      "candidate_time_ranges",
      [](TimeRangeIndex tr, double th_time, std::int64_t tru) { return candidate_time_ranges(tr, th_time, {tru}); },
      py::arg("tr"), py::arg("th_time"), py::arg("tru"));
  m.def(
      "estimate",
      [](const std::string& q, const std::string& plan, std::int64_t n_t, std::optional<double> x,
         std::optional<py::dict> params) {
        return estimate(parse_query_kind(q), parse_plan_kind(plan), params_from(params), n_t, x).total_cost;
      },
      py::arg("query"), py::arg("plan"), py::arg("n_t"), py::arg("x") = py::none(), py::arg("params") = py::none(),
      "Estimated cost; params overrides cost-profile keys (S_e, c_r, N_st, ...).");
  m.def(
      "select_plan",
      [](const std::string& q, std::int64_t n_t, std::optional<double> x, std::optional<py::dict> params) {
        return std::string(to_string(select_plan(parse_query_kind(q), params_from(params), n_t, x)));
      },
      py::arg("query"), py::arg("n_t"), py::arg("x") = py::none(), py::arg("params") = py::none());

  py::class_<Store>(m, "Store")
      .def(py::init<const fs::path&>(), py::arg("data_dir"))
      .def_property_readonly("workers", &Store::workers)
      .def_property_readonly("last_stats", &Store::last_stats)
      .def("snapshot", &Store::snapshot)
      .def("stored_bytes", &Store::stored_bytes)
      .def("q1", &Store::q1, py::arg("object_id"), py::arg("t_start"), py::arg("t_end"), py::arg("plan") = "kt")
      .def("q2", &Store::q2, py::arg("object1"), py::arg("object2"), py::arg("t_start"), py::arg("t_end"),
           py::arg("plan") = "kt")
      .def("q3", &Store::q3, py::arg("object_id"), py::arg("t_start"), py::arg("t_end"), py::arg("plan") = "ktst",
           py::arg("filters") = py::none())
      .def("q4", &Store::q4, py::arg("t_start"), py::arg("t_end"), py::arg("plan") = "kt");
}
