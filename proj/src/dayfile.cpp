#include "forecastad/dayfile.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>

namespace forecastad {

namespace {

// The on-disk format is little-endian; all supported targets are too.
static_assert(std::endian::native == std::endian::little, "big-endian hosts unsupported");

template <typename T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

[[noreturn]] void io_fail(const std::filesystem::path& path, const std::string& what) {
    throw std::runtime_error(path.string() + ": " + what);
}

}  // namespace

void write_day_file(const std::filesystem::path& path, const DaySequence& day) {
    day.validate();
    int h = 0, w = 0;
    if (!day.empty()) {
        h = day.samples.front().frame.height;
        w = day.samples.front().frame.width;
    }
    for (const auto& s : day.samples)
        if (s.frame.height != h || s.frame.width != w)
            io_fail(path, "inconsistent frame dimensions within day " + day.day_id);

    // Write to a temp file and rename, so readers never see partial output.
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) io_fail(tmp, "cannot open for writing");
        os.write("FCAD", 4);
        put<uint16_t>(os, kDayFileVersion);
        put<uint16_t>(os, static_cast<uint16_t>(h));
        put<uint16_t>(os, static_cast<uint16_t>(w));
        put<uint32_t>(os, static_cast<uint32_t>(day.size()));
        for (const auto& s : day.samples) {
            put<double>(os, s.t);
            put<int8_t>(os, static_cast<int8_t>(s.y));
            put<int8_t>(os, static_cast<int8_t>(s.segment));
            put<uint8_t>(os, static_cast<uint8_t>(s.anomaly_kind));
            os.write(reinterpret_cast<const char*>(s.frame.pixels.data()),
                     static_cast<std::streamsize>(s.frame.pixels.size() * sizeof(float)));
        }
        if (!os) io_fail(tmp, "write failed");
    }
    std::filesystem::rename(tmp, path);
}

DaySequence read_day_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) io_fail(path, "cannot open for reading");
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "FCAD", 4) != 0) io_fail(path, "bad magic, not a day file");
    const auto version = get<uint16_t>(is);
    if (version != kDayFileVersion)
        io_fail(path, "unsupported format version " + std::to_string(version));
    const int h = get<uint16_t>(is);
    const int w = get<uint16_t>(is);
    const uint32_t count = get<uint32_t>(is);

    DaySequence day;
    day.day_id = path.stem().string();
    day.samples.resize(count);
    for (auto& s : day.samples) {
        s.t = get<double>(is);
        s.y = static_cast<Label>(get<int8_t>(is));
        s.segment = static_cast<Segment>(get<int8_t>(is));
        s.anomaly_kind = static_cast<AnomalyKind>(get<uint8_t>(is));
        s.day_id = day.day_id;
        s.frame = ThermalFrame(h, w);
        is.read(reinterpret_cast<char*>(s.frame.pixels.data()),
                static_cast<std::streamsize>(s.frame.pixels.size() * sizeof(float)));
    }
    if (!is) io_fail(path, "truncated day file");
    return day;
}

void write_manifest(const std::filesystem::path& path, const Manifest& manifest) {
    nlohmann::json j;
    j["train"] = manifest.train;
    j["validation"] = manifest.validation;
    j["test"] = manifest.test;
    j["setup"] = to_string(manifest.setup);
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::trunc);
        if (!os) io_fail(tmp, "cannot open for writing");
        os << j.dump(2) << "\n";
    }
    std::filesystem::rename(tmp, path);
}

Manifest read_manifest(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) io_fail(path, "cannot open manifest");
    nlohmann::json j;
    is >> j;
    Manifest m;
    m.train = j.at("train").get<std::vector<std::string>>();
    m.validation = j.at("validation").get<std::vector<std::string>>();
    m.test = j.at("test").get<std::vector<std::string>>();
    m.setup = setup_tag_from_string(j.at("setup").get<std::string>());
    return m;
}

DatasetSplit load_split(const std::filesystem::path& manifest_path) {
    const auto m = read_manifest(manifest_path);
    const auto dir = manifest_path.parent_path();
    DatasetSplit split;
    split.setup = m.setup;
    for (const auto& f : m.train) split.train.push_back(read_day_file(dir / f));
    for (const auto& f : m.validation) split.validation.push_back(read_day_file(dir / f));
    for (const auto& f : m.test) split.test.push_back(read_day_file(dir / f));
    return split;
}

}  // namespace forecastad
