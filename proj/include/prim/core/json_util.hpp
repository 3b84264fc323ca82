#pragma once

#include <json.hpp>
#include <string>

namespace prim {

using Json = nlohmann::json;

Json read_json_file(const std::string& path);
std::string read_text_file(const std::string& path);
/// Writes via a temporary file and rename so readers never see partial output.
void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace prim
