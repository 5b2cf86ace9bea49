#pragma once

#include "common.hpp"

namespace randinf::cli {

int cmd_design(const Options& opt);
int cmd_analyze(const Options& opt);
int cmd_frt(const Options& opt);
int cmd_simulate(const Options& opt);
int cmd_diagnose(const Options& opt);

}  // namespace randinf::cli
