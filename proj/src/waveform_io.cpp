#include "rofsim/waveform_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace rofsim {

namespace {

void put_f64(std::string& out, double v) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
}

double get_f64(const unsigned char* p) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= std::uint64_t(p[b]) << (8 * b);
    return std::bit_cast<double>(bits);
}

std::string format_double(double v) {
    std::ostringstream s;
    s << std::setprecision(17) << v;
    return s.str();
}

}  // namespace

std::filesystem::path sidecar_path(const std::filesystem::path& data_path) {
    return std::filesystem::path(data_path.string() + ".hdr");
}

void write_file_atomically(const std::filesystem::path& path, const std::string& contents) {
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw Error("cannot open " + tmp.string() + " for writing");
        f.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!f) throw Error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

void export_waveform(const std::filesystem::path& path, const Buffer& buf) {
    buf.validate();
    std::string data;
    data.reserve(static_cast<std::size_t>(buf.length() * buf.modes() * 16));
    for (Eigen::Index i = 0; i < buf.length(); ++i)
        for (Eigen::Index m = 0; m < buf.modes(); ++m) {
            put_f64(data, buf.samples(i, m).real());
            put_f64(data, buf.samples(i, m).imag());
        }
    std::ostringstream hdr;
    hdr << "format=iq_f64_le\n"
        << "sample_rate=" << format_double(buf.sample_rate) << "\n"
        << "center_frequency=" << format_double(buf.center_frequency) << "\n"
        << "domain_tag=" << to_string(buf.domain) << "\n"
        << "modes=" << buf.modes() << "\n"
        << "samples=" << buf.length() << "\n";
    write_file_atomically(path, data);
    write_file_atomically(sidecar_path(path), hdr.str());
}

Buffer import_waveform(const std::filesystem::path& path) {
    std::ifstream h(sidecar_path(path));
    if (!h) throw Error("missing sidecar header " + sidecar_path(path).string());
    std::map<std::string, std::string> kv;
    std::string line;
    int line_no = 0;
    while (std::getline(h, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(sidecar_path(path).string() + ":" + std::to_string(line_no) + ": expected key=value");
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    for (const char* key : {"sample_rate", "center_frequency", "domain_tag"})
        if (!kv.count(key)) throw Error("sidecar header lacks '" + std::string(key) + "'");
    if (kv.count("format") && kv["format"] != "iq_f64_le") throw Error("unsupported format " + kv["format"]);

    Domain domain;
    if (kv["domain_tag"] == "optical")
        domain = Domain::optical;
    else if (kv["domain_tag"] == "electrical")
        domain = Domain::electrical;
    else
        throw Error("unknown domain_tag '" + kv["domain_tag"] + "'");
    const Eigen::Index modes = kv.count("modes") ? std::stol(kv["modes"]) : 1;

    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    const std::size_t per_sample = static_cast<std::size_t>(16 * modes);
    if (bytes.size() % per_sample != 0) throw Error("truncated waveform file " + path.string());
    const auto n = static_cast<Eigen::Index>(bytes.size() / per_sample);
    if (kv.count("samples") && std::stol(kv["samples"]) != n)
        throw Error("sample count mismatch between header and data");

    Buffer buf = Buffer::zeros(n, modes, std::stod(kv["sample_rate"]), std::stod(kv["center_frequency"]), domain);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index m = 0; m < modes; ++m) {
            buf.samples(i, m) = {get_f64(p), get_f64(p + 8)};
            p += 16;
        }
    buf.validate();
    return buf;
}

}  // namespace rofsim
