// Copyright (c) mnverify contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mnv/bpt.hpp"
#include "mnv/verify.hpp"

#include <json.hpp>

#include <string>

// Machine-readable reports. Every document carries `schema_version`; the
// JSON schemas under schemas/ describe the layout.
namespace mnv::report {

inline constexpr int schema_version = 1;

nlohmann::json stats_to_json(const verify::Stats& s);
nlohmann::json verdict_to_json(const verify::Verdict& v);
nlohmann::json config_to_json(const verify::Config& c);
/// Inverse of config_to_json. Missing keys keep their defaults; unknown keys
/// and bad values throw std::invalid_argument.
verify::Config config_from_json(const nlohmann::json& j);
nlohmann::json trace_to_json(const bpt::BoundsTrace& trace, const SystemSpec& spec);

/// Full report of one verification query.
nlohmann::json verification_report(const SystemSpec& spec, const std::string& formula, const verify::Config& cfg,
                                   const verify::Verdict& v);

/// The same document with wall-clock fields removed, for comparisons.
nlohmann::json without_timing(nlohmann::json doc);

/// Process exit code of a verdict: 0 True, 1 False, 2 Unknown.
int exit_code(ltl::Verdict3 v);

} // namespace mnv::report
