#pragma once

#include <exception>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace ynetr::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kConfigError = 2, kIoError = 3, kNumericError = 4 };

// args excludes the program name. Errors are reported on `err` as a single
// line "error: <Class>: <message>" and mapped to an exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int exit_code_for(const std::exception& e);

struct DatasetEntry {
    std::string name;
    std::filesystem::path image;
    std::filesystem::path label;  // empty when absent
};

// `<name>.image.vvol` files of a directory (sorted by name) with their
// `<name>.label.vvol` partners.
std::vector<DatasetEntry> list_dataset(const std::filesystem::path& dir, bool require_labels);

struct SummaryRow {
    std::string variant;
    std::string loss;
    double dice = 0.0;
    std::filesystem::path run;
};

// One row per run directory (config.json + eval.csv), sorted by Dice
// descending, ties by variant name.
std::vector<SummaryRow> collect_summary(const std::vector<std::filesystem::path>& runs);

}  // namespace ynetr::cli
