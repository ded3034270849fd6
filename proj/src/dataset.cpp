#include "fstack/dataset.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>

#include "fstack/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "on-disk formats are little-endian; big-endian hosts unsupported");

namespace fstack {

namespace {

using json = nlohmann::json;

constexpr char kDepthMagic[4] = {'F', 'D', 'P', 'T'};
constexpr std::uint32_t kDepthVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
}

std::uint32_t read_u32(std::istream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
}

json load_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw FormatError("bad JSON in " + path.string() + ": " + e.what());
    }
    return j;
}

void write_json_file(const json& j, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << j.dump(2) << '\n';
}

}  // namespace

void save_depth(const DepthMap& d, const std::filesystem::path& path) {
    validate(d);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out.write(kDepthMagic, 4);
    write_u32(out, kDepthVersion);
    write_u32(out, static_cast<std::uint32_t>(d.width));
    write_u32(out, static_cast<std::uint32_t>(d.height));
    out.write(reinterpret_cast<const char*>(d.data.data()),
              static_cast<std::streamsize>(d.data.size() * sizeof(float)));
    if (!out) throw IoError("short write: " + path.string());
}

DepthMap load_depth(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kDepthMagic, 4) != 0) {
        throw FormatError("bad depth file magic: " + path.string());
    }
    const std::uint32_t version = read_u32(in);
    if (version != kDepthVersion) {
        throw FormatError("unsupported depth file version: " + path.string());
    }
    const std::uint32_t w = read_u32(in);
    const std::uint32_t h = read_u32(in);
    if (!in || w == 0 || h == 0 || w > 1u << 20 || h > 1u << 20) {
        throw FormatError("bad depth file header: " + path.string());
    }
    DepthMap d = DepthMap::create(static_cast<int>(w), static_cast<int>(h), 0.0f);
    in.read(reinterpret_cast<char*>(d.data.data()),
            static_cast<std::streamsize>(d.data.size() * sizeof(float)));
    if (!in) throw FormatError("truncated depth file: " + path.string());
    validate(d);
    return d;
}

void save_stack(const StackExample& example, const std::filesystem::path& dir) {
    validate(example.stack);
    if (!example.focus_distances_m.empty() &&
        example.focus_distances_m.size() != example.stack.slices.size()) {
        throw ShapeError("focus_distances_m length must match slice count");
    }
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory: " + dir.string());

    for (std::size_t k = 0; k < example.stack.slices.size(); ++k) {
        save_png(example.stack.slices[k],
                 dir / ("slice_" + std::to_string(k) + ".png"));
    }
    save_depth(example.stack.depth_label, dir / "depth.fdpt");

    json meta;
    meta["n_slices"] = example.stack.slices.size();
    meta["width"] = example.stack.slices.front().width;
    meta["height"] = example.stack.slices.front().height;
    meta["focus_settings"] = example.stack.focus_settings;
    if (!example.focus_distances_m.empty()) {
        meta["focus_distances_m"] = example.focus_distances_m;
    }
    write_json_file(meta, dir / "meta.json");
}

StackExample load_stack(const std::filesystem::path& dir) {
    const json meta = load_json_file(dir / "meta.json");
    StackExample ex;
    std::size_t n = 0;
    int w = 0;
    int h = 0;
    try {
        n = meta.at("n_slices").get<std::size_t>();
        w = meta.at("width").get<int>();
        h = meta.at("height").get<int>();
        ex.stack.focus_settings = meta.at("focus_settings").get<std::vector<float>>();
        if (meta.contains("focus_distances_m")) {
            ex.focus_distances_m =
                meta["focus_distances_m"].get<std::vector<float>>();
        }
    } catch (const json::exception& e) {
        throw FormatError("bad meta.json in " + dir.string() + ": " + e.what());
    }
    if (n == 0 || ex.stack.focus_settings.size() != n) {
        throw FormatError("meta.json slice bookkeeping is inconsistent: " +
                          dir.string());
    }
    for (std::size_t i = 1; i < ex.stack.focus_settings.size(); ++i) {
        if (!(ex.stack.focus_settings[i] > ex.stack.focus_settings[i - 1])) {
            throw FormatError("focus_settings not strictly increasing: " +
                              dir.string());
        }
    }
    ex.stack.slices.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        const auto slice_path = dir / ("slice_" + std::to_string(k) + ".png");
        if (!std::filesystem::exists(slice_path)) {
            throw FormatError("corrupt dataset: missing slice " +
                              std::to_string(k) + " in " + dir.string());
        }
        Image img = load_png(slice_path);
        if (img.width != w || img.height != h) {
            throw FormatError("slice " + std::to_string(k) +
                              " dimensions disagree with meta.json in " +
                              dir.string());
        }
        ex.stack.slices.push_back(std::move(img));
    }
    ex.stack.depth_label = load_depth(dir / "depth.fdpt");
    validate(ex.stack);
    return ex;
}

void save_manifest(const DatasetManifest& manifest,
                   const std::filesystem::path& root) {
    json j;
    j["format_version"] = manifest.format_version;
    json entries = json::array();
    for (const ManifestEntry& e : manifest.examples) {
        entries.push_back({{"id", e.id},
                           {"scene_id", e.scene_id},
                           {"n_slices", e.n_slices},
                           {"width", e.width},
                           {"height", e.height},
                           {"label_width", e.label_width},
                           {"label_height", e.label_height}});
    }
    j["examples"] = std::move(entries);
    write_json_file(j, root / "manifest.json");
}

DatasetManifest load_manifest(const std::filesystem::path& root) {
    const json j = load_json_file(root / "manifest.json");
    DatasetManifest m;
    try {
        m.format_version = j.at("format_version").get<int>();
        for (const json& e : j.at("examples")) {
            ManifestEntry entry;
            entry.id = e.at("id").get<std::string>();
            entry.scene_id = e.at("scene_id").get<std::string>();
            entry.n_slices = e.at("n_slices").get<int>();
            entry.width = e.at("width").get<int>();
            entry.height = e.at("height").get<int>();
            entry.label_width = e.at("label_width").get<int>();
            entry.label_height = e.at("label_height").get<int>();
            m.examples.push_back(std::move(entry));
        }
    } catch (const json::exception& e) {
        throw FormatError("bad manifest.json: " + std::string(e.what()));
    }
    if (m.format_version != 1) {
        throw FormatError("unsupported manifest format_version");
    }
    for (const ManifestEntry& e : m.examples) {
        const auto dir = root / e.id;
        for (int k = 0; k < e.n_slices; ++k) {
            const auto p = dir / ("slice_" + std::to_string(k) + ".png");
            if (!std::filesystem::exists(p)) {
                throw FormatError("corrupt dataset: missing slice " +
                                  std::to_string(k) + " in " + dir.string());
            }
        }
        if (!std::filesystem::exists(dir / "depth.fdpt") ||
            !std::filesystem::exists(dir / "meta.json")) {
            throw FormatError("corrupt dataset: missing files in " + dir.string());
        }
        if (e.n_slices != m.examples.front().n_slices ||
            e.width != m.examples.front().width ||
            e.height != m.examples.front().height ||
            e.label_width != m.examples.front().label_width ||
            e.label_height != m.examples.front().label_height) {
            throw FormatError("manifest examples disagree on N or dimensions");
        }
    }
    return m;
}

namespace {

std::uint64_t fnv1a_update(std::uint64_t h, const void* bytes, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t fnv1a_file(std::uint64_t h, const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    char buf[1 << 14];
    while (in) {
        in.read(buf, sizeof(buf));
        h = fnv1a_update(h, buf, static_cast<std::size_t>(in.gcount()));
    }
    return h;
}

}  // namespace

std::uint64_t dataset_checksum(const DatasetManifest& manifest,
                               const std::filesystem::path& root) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const ManifestEntry& e : manifest.examples) {
        h = fnv1a_update(h, e.id.data(), e.id.size());
        const auto dir = root / e.id;
        for (int k = 0; k < e.n_slices; ++k) {
            h = fnv1a_file(h, dir / ("slice_" + std::to_string(k) + ".png"));
        }
        h = fnv1a_file(h, dir / "depth.fdpt");
        h = fnv1a_file(h, dir / "meta.json");
    }
    return h;
}

}  // namespace fstack
