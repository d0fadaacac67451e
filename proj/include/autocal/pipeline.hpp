#pragma once

#include <iosfwd>
#include <string>

#include "autocal/run_config.hpp"

namespace autocal {

// Pipeline stages. Each reads what earlier stages left in config.output and
// writes its own subdirectory there; progress lines go to `log`.
//
//   config.json                   resolved settings
//   design.csv                    sample
//   data/                         toy ensemble and observations (toy runs)
//   surrogate/                    fit: model/, selection.csv, cv_scores.csv, variance_curve.csv
//   calibration/<MODE>.json       calibrate, with <MODE>_parameters.csv and scale tables
//   runs/<name>.f64               stacked outputs at references and estimates
//   mcmc/                         draws, summary.csv, pair plots
//   diagnostics/                  Taylor statistics and diagrams, R^2 maps, RMSE changes

void cmd_sample(const RunConfig& config, std::ostream& log);
void cmd_fit(const RunConfig& config, std::ostream& log);
void cmd_calibrate(const RunConfig& config, std::ostream& log);
void cmd_mcmc(const RunConfig& config, std::ostream& log);
void cmd_diagnose(const RunConfig& config, std::ostream& log);
/// sample, fit, calibrate, mcmc and diagnose in sequence.
void cmd_all(const RunConfig& config, std::ostream& log);

/// Runs one subcommand by name and maps failures to exit codes: 0 success,
/// 2 bad input or missing files, 3 numerical failure.
int run_command(const std::string& command, const RunConfig& config, std::ostream& log, std::ostream& err);

}  // namespace autocal
