/**
 * @file io.hpp
 * @brief Binary array container, CSV rows and JSON helpers shared by the tools.
 *
 * Container layout (little-endian):
 *   "KFLWBIN1"                         8-byte magic
 *   u32 count
 *   count x { u32 name_len, name bytes, u8 dtype (1 = float64, 2 = complex128),
 *             u8 rank, u64 dims[rank], payload in column-major order }
 * A complex128 element is the pair (re, im).
 */
#pragma once

#include "kerrflow/hilbert.hpp"

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace kerrflow {

enum class DType : std::uint8_t { Float64 = 1, Complex128 = 2 };

struct NamedArray {
    std::string name;
    DType dtype = DType::Float64;
    std::vector<std::uint64_t> dims;
    std::vector<double> real;   // Float64 payload
    std::vector<cplx> complex;  // Complex128 payload
};

class BinaryContainer {
public:
    void add(const std::string& name, const std::vector<double>& v);
    void add(const std::string& name, const std::vector<cplx>& v);
    void add(const std::string& name, const CMat& m);
    void add(const std::string& name, const Eigen::MatrixXd& m);
    const std::vector<NamedArray>& arrays() const { return arrays_; }
    /// Writes to `path` through a temporary file and a rename.
    void write(const std::string& path) const;
    static BinaryContainer read(const std::string& path);
    const NamedArray& get(const std::string& name) const;

private:
    std::vector<NamedArray> arrays_;
};

/// Shortest round-trip decimal form ("nan", "inf", "-inf" for non-finite values).
std::string format_double(double v);

/// Appends rows to a CSV file, flushing after each row so finished rows survive later failures.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header);
    CsvWriter& operator<<(double v);
    CsvWriter& operator<<(long long v);
    CsvWriter& operator<<(int v) { return *this << static_cast<long long>(v); }
    CsvWriter& operator<<(const std::string& v);
    CsvWriter& operator<<(const char* v) { return *this << std::string(v); }
    void end_row();

private:
    void sep();
    std::ofstream out_;
    bool first_ = true;
};

/// Writes `j` with two-space indentation and a trailing newline, via a temporary file.
void write_json(const std::string& path, const nlohmann::json& j);

nlohmann::json to_json(const ModelParams& p);
nlohmann::json to_json(const ScaledParams& p);
nlohmann::json to_json(const DensityChecks& c);

} // namespace kerrflow
