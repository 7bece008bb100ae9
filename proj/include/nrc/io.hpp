#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

namespace nrc::io {

using nlohmann::json;

/// One JSON document per line. Throws MissingInput when the file is absent.
std::vector<json> read_jsonl(const std::string& path);
void write_jsonl(const std::string& path, const std::vector<json>& rows);

json read_json(const std::string& path);
void write_json(const std::string& path, const json& doc);

/// Rejects documents whose "schema" field differs from `expected`.
void require_schema(const json& doc, std::string_view expected);

json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const json& j);

/// Minimal CSV table: header plus string cells.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column index by name; throws SchemaMismatch if missing.
    std::size_t column(std::string_view name) const;
};

CsvTable read_csv(const std::string& path);
void write_csv(const std::string& path, const CsvTable& table);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

/// Stable 64-bit FNV-1a hash, used for config fingerprints in manifests.
std::uint64_t fnv1a(std::string_view bytes);

}  // namespace nrc::io
