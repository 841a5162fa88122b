#pragma once

// Model artifact: one JSON header line (format tag, p, q, b, solver and the
// hyper-parameters used) followed by W as a CSV block of p rows.

#include <rmr/linalg.hpp>
#include <rmr/sample.hpp>

#include <json.hpp>

#include <filesystem>
#include <string>
#include <string_view>

namespace rmr {

inline constexpr std::string_view kModelFormat = "rmr-model/1";

struct ModelFile {
    RmrModel<double> model;
    std::string solver = "rmr";
    nlohmann::json hyper = nlohmann::json::object();
};

std::string format_model(const ModelFile &file);
/// Throws ParseError on a malformed header or W block, ContractViolation if
/// the block does not have the declared shape.
ModelFile parse_model(std::string_view text);

void write_model(const std::filesystem::path &path, const ModelFile &file);
ModelFile read_model(const std::filesystem::path &path);

} // namespace rmr
