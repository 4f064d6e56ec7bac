#pragma once

#include "hamlearn/operators.hpp"
#include "hamlearn/states.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace hamlearn {

inline constexpr const char* kBasisSchema = "hamlearn.basis/1";
inline constexpr const char* kModelSchema = "hamlearn.model/1";

nlohmann::json term_to_json(const PauliTerm& term);
PauliTerm term_from_json(const nlohmann::json& j);

/// {"schema": "hamlearn.basis/1", "L": .., "k": .., "terms": [{"term": "x0 z1", "c": 0.25}, ...]}
nlohmann::json basis_to_json(const OperatorBasis& basis);
OperatorBasis basis_from_json(const nlohmann::json& j);

nlohmann::json model_to_json(const HamiltonianModel& model);
HamiltonianModel model_from_json(const nlohmann::json& j);

/// Throws LoadError naming both versions when `j["schema"]` differs from `expected`.
void require_schema(const nlohmann::json& j, const std::string& expected);

std::string read_file(const std::filesystem::path& path);

/// Writes through a temporary sibling file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

/// Hex SHA-256 of a byte string / file.
std::string sha256_hex(const std::string& bytes);
std::string file_sha256(const std::filesystem::path& path);

}  // namespace hamlearn
