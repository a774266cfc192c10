#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "quasiphase/fock.hpp"

namespace quasiphase {

using Json = nlohmann::json;

/// Serializes JSON with every floating-point number printed to 17 significant
/// digits, so equal inputs give byte-identical files and doubles round-trip.
std::string dump_json(const Json& value, int indent = 2);

/// {"dim": N, "re": [[...]], "im": [[...]], "label": "..."}, row-major.
/// A registered closed-form P adds "closed_form_p": {"nbar", "re", "im"}.
Json operator_to_json(const TruncatedOperator& op);
TruncatedOperator operator_from_json(const Json& j);

TruncatedOperator load_operator(const std::filesystem::path& path);
void save_operator(const TruncatedOperator& op, const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over the target.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

} // namespace quasiphase
