#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "past/cli.hpp"
#include "test_support.hpp"

using namespace past;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "past");
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::vector<std::vector<std::string>> csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) break;  // first table only
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

// Column name -> value for every data row of the first table.
std::vector<std::map<std::string, std::string>> records(const std::string& text) {
  const auto rows = csv(text);
  std::vector<std::map<std::string, std::string>> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    std::map<std::string, std::string> m;
    for (std::size_t c = 0; c < rows[0].size() && c < rows[i].size(); ++c) m[rows[0][c]] = rows[i][c];
    out.push_back(m);
  }
  return out;
}

std::map<std::string, std::string> second_table(const std::string& text) {
  std::map<std::string, std::string> m;
  const auto split = text.find("\n\n");
  std::istringstream in(text.substr(split + 2));
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    m[line.substr(0, comma)] = line.substr(comma + 1);
  }
  return m;
}

std::map<std::string, std::uintmax_t> file_sizes(const fs::path& root) {
  std::map<std::string, std::uintmax_t> m;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) m[e.path().string()] = e.file_size();
  }
  return m;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    data_ = dir_.path() / "data";
    const fs::path conf = dir_.path() / "small.conf";
    std::ofstream(conf) << "# desk-sized dataset\n"
                           "n_locations = 1500\nn_objects = 250\nn_areas = 12\narea_radius = 120\n"
                           "period_days = 21\nvisits_per_period = 6\nn_clones = 4\n"
                           "grid_cols = 32\ngrid_rows = 32\nworkers = 3\nslot_bits = 6\n";
    ASSERT_EQ(cli({"gen", "--out-dir", data_.string(), "--config", conf.string(), "--seed", "5"}).code, kExitOk);
    const auto ing = cli({"ingest", "-d", data_.string()});
    ASSERT_EQ(ing.code, kExitOk) << ing.err;
  }

  past::testing::TempDir dir_{"cli"};
  fs::path data_;
};

}  // namespace

TEST_F(CliTest, GenWritesEveryFile) {
  for (const char* f : {"locations.txt", "edges.txt", "ground_truth.txt", "run.conf"}) {
    EXPECT_TRUE(fs::is_regular_file(data_ / f)) << f;
  }
  for (const char* f : {"plan.snapshot", "locations.txt", "run.conf", "rounds.jsonl"}) {
    EXPECT_TRUE(fs::is_regular_file(data_ / "store" / f)) << f;
  }
}

TEST_F(CliTest, VerifyPassesOnFreshStoreAndLeavesInputsAlone) {
  const auto before = file_sizes(data_);
  const auto r = cli({"verify", "-d", data_.string(), "--objects", "6"});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  const auto rows = records(r.out);
  ASSERT_FALSE(rows.empty());
  for (const auto& row : rows) EXPECT_EQ(row.at("status"), "ok");
  EXPECT_EQ(file_sizes(data_), before);
}

TEST_F(CliTest, VerifyOnEmptyRange) {
  const auto r = cli({"verify", "-d", data_.string(), "--from", "1", "--to", "2"});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  for (const auto& row : records(r.out)) {
    if (row.at("query") != "Q2") EXPECT_EQ(row.at("expected_rows"), "0");
  }
}

TEST_F(CliTest, VerifyLocatesACorruptedBlock) {
  const fs::path blk = data_ / "store" / "worker-0" / "primary-B.blk";
  ASSERT_TRUE(fs::is_regular_file(blk));
  const auto size = fs::file_size(blk);
  {
    std::fstream f(blk, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(static_cast<std::streamoff>(size / 2));
    const std::string junk(64, '\xff');
    f.write(junk.data(), static_cast<std::streamsize>(junk.size()));
  }
  const auto r = cli({"verify", "-d", data_.string(), "--q", "1,4", "--objects", "250"});
  EXPECT_EQ(r.code, kExitMismatch);
  EXPECT_NE(r.err.find("MISMATCH"), std::string::npos);
  EXPECT_NE(r.err.find("plan=kt"), std::string::npos);
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(cli({"verify", "-d", (dir_.path() / "nowhere").string()}).code, kExitUsage);
  EXPECT_EQ(cli({"stats", "-d", (dir_.path() / "nowhere").string()}).code, kExitUsage);
  EXPECT_EQ(cli({"gen", "-d", data_.string(), "--set", "no_such_key=1"}).code, kExitUsage);
  EXPECT_EQ(cli({"query", "-d", data_.string(), "--q", "1", "--from", "0", "--to", "10"}).code, kExitUsage);
  EXPECT_EQ(cli({"query", "-d", data_.string(), "--q", "1", "--object", "1", "--from", "0", "--to", "10", "--plan",
                 "ktst"})
                .code,
            kExitUsage);
  EXPECT_EQ(cli({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(cli({}).code, kExitUsage);
}

TEST_F(CliTest, QueryWritesHeaderNamingQueryAndPlan) {
  const fs::path out = dir_.path() / "q4.csv";
  const auto r = cli({"query", "-d", data_.string(), "--q", "4", "--from", "0", "--to", "100000000", "--plan", "auto",
                      "--out", out.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::ifstream in(out);
  std::stringstream ss;
  ss << in.rdbuf();
  const auto rows = csv(ss.str());
  ASSERT_GE(rows.size(), 2u);
  EXPECT_EQ(rows[0][0], "query");
  EXPECT_EQ(rows[0][1], "plan");
  EXPECT_EQ(rows[1][0], "Q4");
  EXPECT_EQ(rows[1][1], "kt");  // the planner's choice at this scale
  // Every injected clone is reported.
  std::set<std::string> found;
  for (std::size_t i = 1; i < rows.size(); ++i) found.insert(rows[i][2]);
  std::ifstream gt(data_ / "ground_truth.txt");
  std::string line;
  std::size_t clones = 0;
  while (std::getline(gt, line)) {
    if (line.rfind("clone ", 0) != 0) continue;
    ++clones;
    EXPECT_TRUE(found.count(line.substr(6))) << line;
  }
  EXPECT_EQ(clones, 4u);
}

TEST_F(CliTest, BenchOrderingsAndDeterminism) {
  const auto a = cli({"bench", "-d", data_.string(), "--objects", "4"});
  ASSERT_EQ(a.code, kExitOk) << a.err;
  const auto b = cli({"bench", "-d", data_.string(), "--objects", "4"});
  const auto ra = records(a.out), rb = records(b.out);
  ASSERT_EQ(ra.size(), rb.size());
  for (std::size_t i = 0; i < ra.size(); ++i) {
    for (const auto& [k, v] : ra[i]) {
      if (k != "wall_seconds") EXPECT_EQ(v, rb[i].at(k)) << k;
    }
  }
  auto find = [&](const std::string& q, const std::string& plan, const std::string& filters) {
    for (const auto& r : ra) {
      if (r.at("query") == q && r.at("plan") == plan && r.at("filters") == filters) return r;
    }
    ADD_FAILURE() << q << ' ' << plan << ' ' << filters;
    return std::map<std::string, std::string>{};
  };
  EXPECT_LT(std::stoull(find("Q1", "kt", "on").at("bytes_read")), std::stoull(find("Q1", "st", "on").at("bytes_read")));
  for (const char* plan : {"st", "kt", "ktst"}) {
    const auto on = find("Q3", plan, "on"), off = find("Q3", plan, "off");
    EXPECT_EQ(on.at("result_hash"), off.at("result_hash")) << plan;
    EXPECT_LT(std::stoull(on.at("dist_evals")), std::stoull(off.at("dist_evals"))) << plan;
  }
  EXPECT_NE(a.out.find("modeled_edges_per_second"), std::string::npos);
}

TEST_F(CliTest, CalibrationWritesAProfileTheQueryCommandReads) {
  const fs::path prof = dir_.path() / "profile.txt";
  ASSERT_EQ(cli({"bench", "-d", data_.string(), "--objects", "2", "--q", "1,3", "--calibrate", prof.string()}).code,
            kExitOk);
  ASSERT_TRUE(fs::is_regular_file(prof));
  const auto r = cli({"query", "-d", data_.string(), "--q", "3", "--object", "1000000001", "--from", "0", "--to",
                      "100000000", "--profile", prof.string()});
  EXPECT_EQ(r.code, kExitOk) << r.err;
}

TEST_F(CliTest, StatsReportsReplicaRatioAndBalance) {
  const auto r = cli({"stats", "-d", data_.string()});
  ASSERT_EQ(r.code, kExitOk);
  EXPECT_EQ(records(r.out).size(), 3u);
  const auto summary = second_table(r.out);
  const double ratio = std::stod(summary.at("st_over_kt"));
  EXPECT_GT(ratio, 1.8);
  EXPECT_LT(ratio, 2.2);
}

TEST_F(CliTest, SingleWorkerStoresTwiceAsMuchSpatioTemporally) {
  ASSERT_EQ(cli({"ingest", "-d", data_.string(), "--workers", "1"}).code, kExitOk);
  const auto r = cli({"stats", "-d", data_.string()});
  ASSERT_EQ(records(r.out).size(), 1u);
  const double ratio = std::stod(second_table(r.out).at("st_over_kt"));
  EXPECT_NEAR(ratio, 2.0, 0.2);
}

TEST_F(CliTest, SocketTransportMatchesDeterministicStore) {
  const auto det = cli({"stats", "-d", data_.string()});
  const auto ing = cli({"ingest", "-d", data_.string(), "--transport", "socket"});
  ASSERT_EQ(ing.code, kExitOk) << ing.err;
  EXPECT_EQ(cli({"verify", "-d", data_.string(), "--objects", "3"}).code, kExitOk);
  const auto sock = cli({"stats", "-d", data_.string()});
  // Edge counts per worker agree; byte counts may differ with block boundaries.
  const auto a = records(det.out), b = records(sock.out);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].at("st_edges"), b[i].at("st_edges"));
    EXPECT_EQ(a[i].at("kt_edges"), b[i].at("kt_edges"));
  }
}

TEST_F(CliTest, PlanDumpPrintsTheSnapshot) {
  const auto r = cli({"plan-dump", "-d", data_.string()});
  ASSERT_EQ(r.code, kExitOk);
  std::ifstream in(data_ / "store" / "plan.snapshot");
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(r.out, ss.str());
}
