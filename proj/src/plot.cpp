#include "forecastad/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace forecastad {

namespace {

void atomic_write(const std::filesystem::path& path, const std::string& bytes) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error(tmp.string() + ": cannot open for writing");
        os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!os) throw std::runtime_error(tmp.string() + ": write failed");
    }
    std::filesystem::rename(tmp, path);
}

constexpr int kWidth = 720, kHeight = 440;
constexpr int kMarginL = 60, kMarginR = 20, kMarginT = 40, kMarginB = 40;

const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                               "#9467bd", "#8c564b", "#7f7f7f"};

struct Range {
    double lo = 0.0, hi = 1.0;
    void expand(double v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
};

double map_x(double v, const Range& r) {
    const double span = r.hi > r.lo ? r.hi - r.lo : 1.0;
    return kMarginL + (v - r.lo) / span * (kWidth - kMarginL - kMarginR);
}

double map_y(double v, const Range& r) {
    const double span = r.hi > r.lo ? r.hi - r.lo : 1.0;
    return kHeight - kMarginB - (v - r.lo) / span * (kHeight - kMarginT - kMarginB);
}

void svg_header(std::ostringstream& os, const std::string& title) {
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
       << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
       << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" "
       << "font-family=\"sans-serif\" font-size=\"16\">" << title << "</text>\n";
}

void svg_axes(std::ostringstream& os, const Range& xr, const Range& yr) {
    os << "<line x1=\"" << kMarginL << "\" y1=\"" << kHeight - kMarginB << "\" x2=\""
       << kWidth - kMarginR << "\" y2=\"" << kHeight - kMarginB
       << "\" stroke=\"black\"/>\n<line x1=\"" << kMarginL << "\" y1=\"" << kMarginT
       << "\" x2=\"" << kMarginL << "\" y2=\"" << kHeight - kMarginB << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double fx = xr.lo + (xr.hi - xr.lo) * i / 4.0;
        const double fy = yr.lo + (yr.hi - yr.lo) * i / 4.0;
        os << "<text x=\"" << map_x(fx, xr) << "\" y=\"" << kHeight - kMarginB + 16
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << fx
           << "</text>\n";
        os << "<text x=\"" << kMarginL - 6 << "\" y=\"" << map_y(fy, yr) + 4
           << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << fy
           << "</text>\n";
    }
}

}  // namespace

void write_svg_line_chart(const std::filesystem::path& path, const std::string& title,
                          const std::vector<Series>& series) {
    if (series.empty()) throw std::invalid_argument("write_svg_line_chart: no series");
    Range xr{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    Range yr = xr;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size() || s.x.empty())
            throw std::invalid_argument("write_svg_line_chart: bad series " + s.name);
        for (double v : s.x) xr.expand(v);
        for (double v : s.y) yr.expand(v);
    }
    std::ostringstream os;
    svg_header(os, title);
    svg_axes(os, xr, yr);
    for (size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* color = kColors[si % std::size(kColors)];
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (size_t i = 0; i < s.x.size(); ++i)
            os << map_x(s.x[i], xr) << "," << map_y(s.y[i], yr) << " ";
        os << "\"/>\n";
        os << "<text x=\"" << kWidth - kMarginR - 4 << "\" y=\"" << kMarginT + 14 * (si + 1)
           << "\" text-anchor=\"end\" fill=\"" << color
           << "\" font-family=\"sans-serif\" font-size=\"11\">" << s.name << "</text>\n";
    }
    os << "</svg>\n";
    atomic_write(path, os.str());
}

void write_svg_histogram(const std::filesystem::path& path, const std::string& title,
                         const std::vector<double>& values, int bins) {
    if (values.empty() || bins < 1) throw std::invalid_argument("write_svg_histogram: bad input");
    Range xr{*std::min_element(values.begin(), values.end()),
             *std::max_element(values.begin(), values.end())};
    if (xr.hi == xr.lo) xr.hi = xr.lo + 1.0;
    std::vector<int> counts(bins, 0);
    for (double v : values) {
        int b = static_cast<int>((v - xr.lo) / (xr.hi - xr.lo) * bins);
        counts[std::clamp(b, 0, bins - 1)]++;
    }
    Range yr{0.0, static_cast<double>(*std::max_element(counts.begin(), counts.end()))};
    std::ostringstream os;
    svg_header(os, title);
    svg_axes(os, xr, yr);
    const double bw = (xr.hi - xr.lo) / bins;
    for (int b = 0; b < bins; ++b) {
        const double x0 = map_x(xr.lo + b * bw, xr);
        const double x1 = map_x(xr.lo + (b + 1) * bw, xr);
        const double y = map_y(counts[b], yr);
        os << "<rect x=\"" << x0 << "\" y=\"" << y << "\" width=\"" << x1 - x0 - 1
           << "\" height=\"" << (kHeight - kMarginB) - y
           << "\" fill=\"#1f77b4\" stroke=\"white\"/>\n";
    }
    os << "</svg>\n";
    atomic_write(path, os.str());
}

namespace {

uint32_t crc32_update(uint32_t crc, const uint8_t* data, size_t len) {
    static uint32_t table[256];
    static bool init = false;
    if (!init) {
        for (uint32_t i = 0; i < 256; ++i) {
            uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
            table[i] = c;
        }
        init = true;
    }
    crc ^= 0xffffffffu;
    for (size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xff] ^ (crc >> 8);
    return crc ^ 0xffffffffu;
}

void push_u32(std::string& out, uint32_t v) {
    out.push_back(static_cast<char>(v >> 24));
    out.push_back(static_cast<char>(v >> 16));
    out.push_back(static_cast<char>(v >> 8));
    out.push_back(static_cast<char>(v));
}

void push_chunk(std::string& out, const char type[4], const std::string& data) {
    push_u32(out, static_cast<uint32_t>(data.size()));
    std::string body(type, 4);
    body += data;
    out += body;
    push_u32(out, crc32_update(0, reinterpret_cast<const uint8_t*>(body.data()), body.size()));
}

}  // namespace

void write_png_grayscale(const std::filesystem::path& path, const std::vector<double>& pixels,
                         int height, int width) {
    if (height <= 0 || width <= 0 ||
        pixels.size() != static_cast<size_t>(height) * static_cast<size_t>(width))
        throw std::invalid_argument("write_png_grayscale: bad dimensions");

    // raw scanlines with leading filter byte 0
    std::string raw;
    raw.reserve(static_cast<size_t>(height) * (width + 1));
    for (int r = 0; r < height; ++r) {
        raw.push_back('\0');
        for (int c = 0; c < width; ++c) {
            const double v = std::clamp(pixels[static_cast<size_t>(r) * width + c], 0.0, 1.0);
            raw.push_back(static_cast<char>(std::lround(v * 255.0)));
        }
    }

    // zlib stream of stored deflate blocks
    std::string z;
    z.push_back(0x78);
    z.push_back(0x01);
    size_t off = 0;
    while (off < raw.size()) {
        const size_t n = std::min<size_t>(65535, raw.size() - off);
        const bool last = off + n == raw.size();
        z.push_back(last ? 1 : 0);
        z.push_back(static_cast<char>(n & 0xff));
        z.push_back(static_cast<char>(n >> 8));
        z.push_back(static_cast<char>(~n & 0xff));
        z.push_back(static_cast<char>((~n >> 8) & 0xff));
        z.append(raw, off, n);
        off += n;
    }
    uint32_t a = 1, b = 0;
    for (unsigned char ch : raw) {
        a = (a + ch) % 65521;
        b = (b + a) % 65521;
    }
    push_u32(z, (b << 16) | a);

    std::string png("\x89PNG\r\n\x1a\n", 8);
    std::string ihdr;
    push_u32(ihdr, static_cast<uint32_t>(width));
    push_u32(ihdr, static_cast<uint32_t>(height));
    ihdr.push_back(8);   // bit depth
    ihdr.push_back(0);   // grayscale
    ihdr.push_back(0);   // deflate
    ihdr.push_back(0);   // filter method
    ihdr.push_back(0);   // no interlace
    push_chunk(png, "IHDR", ihdr);
    push_chunk(png, "IDAT", z);
    push_chunk(png, "IEND", "");
    atomic_write(path, png);
}

}  // namespace forecastad
