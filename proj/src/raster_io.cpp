#include "stratus/raster_io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace stratus {

namespace {

std::string header_line(const RasterGeometry& g, const std::string& stamp) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%d %d %.17g %.17g %.17g %d %s\n", g.width_px, g.height_px,
                  g.cell_size_km, g.origin_x_km, g.origin_y_km, g.y_axis_flipped ? 1 : 0,
                  stamp.c_str());
    return buf;
}

RasterGeometry parse_header(std::istream& in, std::string& stamp) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("grid file: missing header");
    std::istringstream h(line);
    RasterGeometry g;
    int flip = 0;
    if (!(h >> g.width_px >> g.height_px >> g.cell_size_km >> g.origin_x_km >> g.origin_y_km >> flip >> stamp))
        throw std::runtime_error("grid file: malformed header: " + line);
    g.y_axis_flipped = flip != 0;
    g.validate();
    return g;
}

void put_f32_le(std::string& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    out.push_back(char(bits & 0xff));
    out.push_back(char((bits >> 8) & 0xff));
    out.push_back(char((bits >> 16) & 0xff));
    out.push_back(char((bits >> 24) & 0xff));
}

float get_f32_le(const unsigned char* p) {
    std::uint32_t bits = std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
                         (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

} // namespace

void write_raster(const std::string& path, const Raster& r, UtcTime timestamp) {
    r.check_shape();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << header_line(r.geometry, timestamp.iso());
    std::string body;
    body.reserve(r.values.size() * 4);
    for (float v : r.values) put_f32_le(body, v);
    out.write(body.data(), std::streamsize(body.size()));
    if (!out) throw std::runtime_error("short write: " + path);
}

Raster read_raster(const std::string& path, UtcTime* timestamp_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::string stamp;
    RasterGeometry g = parse_header(in, stamp);
    Raster r(g);
    std::vector<unsigned char> body(g.cells() * 4);
    in.read(reinterpret_cast<char*>(body.data()), std::streamsize(body.size()));
    if (std::size_t(in.gcount()) != body.size()) throw std::runtime_error("grid file truncated: " + path);
    for (std::size_t i = 0; i < g.cells(); ++i) r.values[i] = get_f32_le(&body[i * 4]);
    if (timestamp_out) *timestamp_out = UtcTime::parse_iso(stamp);
    return r;
}

void write_mask(const std::string& path, const Mask& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << header_line(m.geometry, "-");
    std::string body(m.valid.size(), '\0');
    for (std::size_t i = 0; i < m.valid.size(); ++i) body[i] = m.valid[i] ? 1 : 0;
    out.write(body.data(), std::streamsize(body.size()));
    if (!out) throw std::runtime_error("short write: " + path);
}

Mask read_mask(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::string stamp;
    RasterGeometry g = parse_header(in, stamp);
    Mask m(g);
    std::vector<char> body(g.cells());
    in.read(body.data(), std::streamsize(body.size()));
    if (std::size_t(in.gcount()) != body.size()) throw std::runtime_error("mask file truncated: " + path);
    for (std::size_t i = 0; i < g.cells(); ++i) m.valid[i] = body[i] ? 1 : 0;
    m.recount();
    return m;
}

} // namespace stratus
