#pragma once

// The `past` command line: gen, ingest, query, verify, bench, stats and
// plan-dump. Every table goes out as CSV with a header row.
//
// Data directory layout:
//   DATA/run.conf  locations.txt  edges.txt  ground_truth.txt   (gen)
//   DATA/store/    plan.snapshot  locations.txt  run.conf
//                  rounds.jsonl   worker-<i>/                   (ingest)

#include <iosfwd>
#include <string>
#include <vector>

namespace past {

enum ExitCode : int { kExitOk = 0, kExitMismatch = 1, kExitUsage = 2 };

// args[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace past
