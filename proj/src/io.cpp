#include "nrc/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "nrc/error.hpp"

namespace nrc::io {

namespace {

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::MissingInput, "cannot open input file: " + path);
    return in;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot open output file: " + path);
    return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

}  // namespace

std::vector<json> read_jsonl(const std::string& path) {
    auto in = open_input(path);
    std::vector<json> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            rows.push_back(json::parse(line));
        } catch (const json::parse_error& e) {
            fail(ErrorKind::SchemaMismatch,
                 path + ":" + std::to_string(lineno) + ": malformed JSON: " + e.what());
        }
    }
    return rows;
}

void write_jsonl(const std::string& path, const std::vector<json>& rows) {
    auto out = open_output(path);
    for (const auto& row : rows) out << row.dump() << '\n';
    if (!out) fail(ErrorKind::Io, "write failed: " + path);
}

json read_json(const std::string& path) {
    auto in = open_input(path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        fail(ErrorKind::SchemaMismatch, path + ": malformed JSON: " + e.what());
    }
}

void write_json(const std::string& path, const json& doc) {
    auto out = open_output(path);
    out << doc.dump(2) << '\n';
    if (!out) fail(ErrorKind::Io, "write failed: " + path);
}

void require_schema(const json& doc, std::string_view expected) {
    if (!doc.is_object() || !doc.contains("schema"))
        fail(ErrorKind::SchemaMismatch, "document has no schema field (expected " +
                                            std::string(expected) + ")");
    const auto& got = doc.at("schema");
    if (!got.is_string() || got.get<std::string>() != expected)
        fail(ErrorKind::SchemaMismatch,
             "schema mismatch: expected " + std::string(expected) + ", got " + got.dump());
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    std::vector<double> data(m.data(), m.data() + m.size());
    return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Eigen::MatrixXd matrix_from_json(const json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols)
        fail(ErrorKind::SchemaMismatch, "matrix payload size does not match its shape");
    return Eigen::Map<const Eigen::MatrixXd>(data.data(), rows, cols);
}

std::size_t CsvTable::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    fail(ErrorKind::SchemaMismatch, "CSV is missing column: " + std::string(name));
}

CsvTable read_csv(const std::string& path) {
    auto in = open_input(path);
    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) fail(ErrorKind::SchemaMismatch, "empty CSV: " + path);
    table.header = split_csv_line(line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != table.header.size())
            fail(ErrorKind::SchemaMismatch, "CSV row width mismatch in " + path);
        table.rows.push_back(std::move(cells));
    }
    return table;
}

void write_csv(const std::string& path, const CsvTable& table) {
    auto out = open_output(path);
    auto write_row = [&out](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out << ',';
            out << cells[i];
        }
        out << '\n';
    };
    write_row(table.header);
    for (const auto& row : table.rows) write_row(row);
    if (!out) fail(ErrorKind::Io, "write failed: " + path);
}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace nrc::io
