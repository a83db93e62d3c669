// Copyright (c) mnverify contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mnv/model.hpp"

#include <json.hpp>

#include <stdexcept>
#include <string>

namespace mnv {

class ModelFormatError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Parses the JSON model document. Structural problems (missing keys, wrong
/// types, inconsistent box bounds) raise ModelFormatError naming the location;
/// dimension consistency is left to validate_system.
SystemSpec system_from_json(const nlohmann::json& doc);
nlohmann::json system_to_json(const SystemSpec& spec);

SystemSpec load_system(const std::string& path);
void save_system(const SystemSpec& spec, const std::string& path);

nlohmann::json box_to_json(const Box& b);
Box box_from_json(const nlohmann::json& j, const std::string& where = "box");
nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j, const std::string& where = "matrix");

nlohmann::json path_to_json(const Path& path);
Path path_from_json(const nlohmann::json& j);

} // namespace mnv
