#include "kerrflow/io.hpp"

#include "kerrflow/errors.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>

namespace kerrflow {

namespace {

constexpr char kMagic[8] = {'K', 'F', 'L', 'W', 'B', 'I', 'N', '1'};

template <class T>
void put(std::ofstream& o, T v) {
    o.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get_value(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw config_error("truncated binary container");
    return v;
}

} // namespace

void BinaryContainer::add(const std::string& name, const std::vector<double>& v) {
    arrays_.push_back({name, DType::Float64, {v.size()}, v, {}});
}

void BinaryContainer::add(const std::string& name, const std::vector<cplx>& v) {
    arrays_.push_back({name, DType::Complex128, {v.size()}, {}, v});
}

void BinaryContainer::add(const std::string& name, const CMat& m) {
    NamedArray a{name, DType::Complex128, {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())},
                 {}, std::vector<cplx>(m.data(), m.data() + m.size())};
    arrays_.push_back(std::move(a));
}

void BinaryContainer::add(const std::string& name, const Eigen::MatrixXd& m) {
    NamedArray a{name, DType::Float64, {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())},
                 std::vector<double>(m.data(), m.data() + m.size()), {}};
    arrays_.push_back(std::move(a));
}

void BinaryContainer::write(const std::string& path) const {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream o(tmp, std::ios::binary | std::ios::trunc);
        if (!o) throw config_error("cannot open " + tmp + " for writing");
        o.write(kMagic, sizeof(kMagic));
        put<std::uint32_t>(o, static_cast<std::uint32_t>(arrays_.size()));
        for (const auto& a : arrays_) {
            put<std::uint32_t>(o, static_cast<std::uint32_t>(a.name.size()));
            o.write(a.name.data(), static_cast<std::streamsize>(a.name.size()));
            put<std::uint8_t>(o, static_cast<std::uint8_t>(a.dtype));
            put<std::uint8_t>(o, static_cast<std::uint8_t>(a.dims.size()));
            for (auto d : a.dims) put<std::uint64_t>(o, d);
            if (a.dtype == DType::Float64)
                o.write(reinterpret_cast<const char*>(a.real.data()),
                        static_cast<std::streamsize>(a.real.size() * sizeof(double)));
            else
                o.write(reinterpret_cast<const char*>(a.complex.data()),
                        static_cast<std::streamsize>(a.complex.size() * sizeof(cplx)));
        }
        if (!o) throw config_error("write failed for " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

BinaryContainer BinaryContainer::read(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("cannot open " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw config_error(path + " is not a container file");
    BinaryContainer c;
    const auto count = get_value<std::uint32_t>(in);
    for (std::uint32_t i = 0; i < count; ++i) {
        NamedArray a;
        a.name.resize(get_value<std::uint32_t>(in));
        in.read(a.name.data(), static_cast<std::streamsize>(a.name.size()));
        a.dtype = static_cast<DType>(get_value<std::uint8_t>(in));
        const auto rank = get_value<std::uint8_t>(in);
        std::uint64_t total = 1;
        for (int r = 0; r < rank; ++r) {
            a.dims.push_back(get_value<std::uint64_t>(in));
            total *= a.dims.back();
        }
        if (a.dtype == DType::Float64) {
            a.real.resize(total);
            in.read(reinterpret_cast<char*>(a.real.data()), static_cast<std::streamsize>(total * sizeof(double)));
        } else if (a.dtype == DType::Complex128) {
            a.complex.resize(total);
            in.read(reinterpret_cast<char*>(a.complex.data()), static_cast<std::streamsize>(total * sizeof(cplx)));
        } else {
            throw config_error("unknown dtype in " + path);
        }
        if (!in) throw config_error("truncated binary container " + path);
        c.arrays_.push_back(std::move(a));
    }
    return c;
}

const NamedArray& BinaryContainer::get(const std::string& name) const {
    for (const auto& a : arrays_)
        if (a.name == name) return a;
    throw config_error("no array named " + name);
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : out_(path, std::ios::trunc) {
    if (!out_) throw config_error("cannot open " + path + " for writing");
    for (const auto& h : header) *this << h;
    end_row();
}

void CsvWriter::sep() {
    if (!first_) out_ << ',';
    first_ = false;
}

CsvWriter& CsvWriter::operator<<(double v) {
    sep();
    out_ << format_double(v);
    return *this;
}

CsvWriter& CsvWriter::operator<<(long long v) {
    sep();
    out_ << v;
    return *this;
}

CsvWriter& CsvWriter::operator<<(const std::string& v) {
    sep();
    if (v.find_first_of(",\"\n") != std::string::npos) {
        out_ << '"';
        for (char ch : v) out_ << (ch == '"' ? "\"\"" : std::string(1, ch));
        out_ << '"';
    } else {
        out_ << v;
    }
    return *this;
}

void CsvWriter::end_row() {
    out_ << '\n';
    out_.flush();
    first_ = true;
    if (!out_) throw config_error("CSV write failed");
}

void write_json(const std::string& path, const nlohmann::json& j) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream o(tmp, std::ios::trunc);
        if (!o) throw config_error("cannot open " + tmp + " for writing");
        o << j.dump(2) << '\n';
        if (!o) throw config_error("write failed for " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

nlohmann::json to_json(const ModelParams& p) {
    return {{"delta", p.delta}, {"u", p.u}, {"g", p.g}, {"f", p.f}, {"phi", p.phi}, {"kappa", p.kappa}};
}

nlohmann::json to_json(const ScaledParams& p) {
    return {{"delta", p.delta}, {"u", p.tilde_u}, {"g", p.g}, {"f", p.tilde_f},
            {"phi", p.phi},     {"kappa", p.kappa}, {"aleph", p.aleph}};
}

nlohmann::json to_json(const DensityChecks& c) {
    return {{"hermiticity", c.hermiticity}, {"trace_error", c.trace_error}, {"min_eigenvalue", c.min_eigenvalue},
            {"tail", c.tail}, {"residual", c.residual}};
}

} // namespace kerrflow
