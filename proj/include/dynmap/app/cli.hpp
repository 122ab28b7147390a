// Copyright Contributors to the dynmap Project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <dynmap/hyper/config.hpp>

#include <json.hpp>

#include <filesystem>
#include <iosfwd>

namespace dynmap::app {

/// Runs the command line: synth, train, render, build-occ, bench, serve and
/// export. Returns the process exit status.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Model section of a training config: {"shrink": k, "layout": ..., "seed": ...}
/// or a complete model config. Frames and bounds come from the dataset.
hyper::ModelConfig model_config_for(const nlohmann::json& section, int frames, const SceneBounds& bounds);

} // namespace dynmap::app
