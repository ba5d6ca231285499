#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sobd/base.hpp"
#include "sobd/image.hpp"
#include "sobd/png_io.hpp"

namespace sobd {

enum class Split { train, test };

inline const char* to_string(Split s) { return s == Split::train ? "train" : "test"; }

struct ManifestEntry {
    std::string image_path;
    std::string segmentation_path;
    std::vector<int> class_labels;  // sorted, unique
    Split split = Split::train;
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;

    std::vector<int> split_indices(Split s) const {
        std::vector<int> out;
        for (int i = 0; i < static_cast<int>(entries.size()); ++i)
            if (entries[i].split == s) out.push_back(i);
        return out;
    }

    // Distinct class ids over train entries, ascending.
    std::vector<int> train_classes() const {
        std::set<int> ids;
        for (const auto& e : entries)
            if (e.split == Split::train)
                for (int c : e.class_labels) ids.insert(c);
        return {ids.begin(), ids.end()};
    }
};

inline bool operator==(const ManifestEntry& a, const ManifestEntry& b) {
    return a.image_path == b.image_path && a.segmentation_path == b.segmentation_path &&
           a.class_labels == b.class_labels && a.split == b.split;
}

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace detail

// Manifest format: one entry per line,
//   <image_path>\t<seg_path>\t<comma-separated class ids>\t<train|test>
// '#' starts a comment line. Paths are resolved relative to the manifest's
// directory when not absolute.
inline DatasetManifest load_manifest(const std::string& path, const WarnSink& sink = {}) {
    std::ifstream in(path);
    require(in.good(), "cannot open manifest: ", path);
    const std::filesystem::path base = std::filesystem::path(path).parent_path();

    DatasetManifest manifest;
    std::set<std::string> seen_images;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;

        const auto fields = detail::split_fields(line, '\t');
        require(fields.size() == 4, "manifest parse error at ", path, ":", line_no,
                ": expected 4 tab-separated fields, got ", fields.size());

        ManifestEntry entry;
        auto resolve = [&](const std::string& p) {
            std::filesystem::path fp(p);
            return fp.is_absolute() ? fp.string() : (base / fp).string();
        };
        entry.image_path = resolve(fields[0]);
        entry.segmentation_path = resolve(fields[1]);

        if (!fields[2].empty()) {
            for (const auto& tok : detail::split_fields(fields[2], ',')) {
                try {
                    entry.class_labels.push_back(std::stoi(tok));
                } catch (const std::exception&) {
                    fail("manifest parse error at ", path, ":", line_no, ": bad class id '", tok, "'");
                }
            }
            std::sort(entry.class_labels.begin(), entry.class_labels.end());
            entry.class_labels.erase(
                std::unique(entry.class_labels.begin(), entry.class_labels.end()),
                entry.class_labels.end());
        }

        if (fields[3] == "train")
            entry.split = Split::train;
        else if (fields[3] == "test")
            entry.split = Split::test;
        else
            fail("manifest parse error at ", path, ":", line_no, ": split must be train|test, got '",
                 fields[3], "'");

        require(entry.split != Split::train || !entry.class_labels.empty(),
                "manifest parse error at ", path, ":", line_no, ": train entry has no class labels");
        require(seen_images.insert(entry.image_path).second, "manifest parse error at ", path, ":",
                line_no, ": duplicate image path ", entry.image_path);
        require(std::filesystem::exists(entry.image_path), "manifest entry at ", path, ":", line_no,
                ": missing image file ", entry.image_path);
        require(std::filesystem::exists(entry.segmentation_path), "manifest entry at ", path, ":",
                line_no, ": missing segmentation file ", entry.segmentation_path);
        manifest.entries.push_back(std::move(entry));
    }
    if (manifest.entries.empty()) warn(sink, "manifest " + path + " contains no entries");
    return manifest;
}

inline std::string serialize_manifest(const DatasetManifest& manifest) {
    std::ostringstream os;
    for (const auto& e : manifest.entries) {
        os << e.image_path << '\t' << e.segmentation_path << '\t';
        for (std::size_t i = 0; i < e.class_labels.size(); ++i) {
            if (i) os << ',';
            os << e.class_labels[i];
        }
        os << '\t' << to_string(e.split) << '\n';
    }
    return os.str();
}

inline void save_manifest(const std::string& path, const DatasetManifest& manifest) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "cannot write manifest: ", path);
    out << serialize_manifest(manifest);
    require(out.good(), "failed writing manifest: ", path);
}

// Loads the segmentation PNG plus its `<segment_id> <class_id>` sidecar
// (same path with a .txt extension appended).
inline LabeledSegmentation load_segmentation(const std::string& seg_path) {
    int w = 0, h = 0;
    const auto ids = read_gray16_png(seg_path, w, h, Gray16Widen::keep_value);
    LabeledSegmentation seg(w, h);
    seg.segments.assign(ids.begin(), ids.end());

    const std::string sidecar = seg_path + ".txt";
    std::ifstream in(sidecar);
    require(in.good(), "missing segment-class sidecar: ", sidecar);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        long segment = 0, cls = 0;
        require(static_cast<bool>(ls >> segment >> cls), "bad sidecar line in ", sidecar, ": '", line, "'");
        require(segment > 0 && segment <= 0xffff && cls > 0 && cls <= 0xffff,
                "sidecar ids out of range in ", sidecar, ": '", line, "'");
        seg.map_segment_to_class(static_cast<std::uint16_t>(segment), static_cast<std::uint16_t>(cls));
    }
    seg.validate();
    return seg;
}

inline void save_segmentation(const std::string& seg_path, const LabeledSegmentation& seg) {
    write_gray16_png(seg_path, seg.width, seg.height, seg.segments.data());
    std::ofstream out(seg_path + ".txt", std::ios::binary);
    require(out.good(), "cannot write sidecar for ", seg_path);
    for (std::size_t id = 1; id < seg.segment_class.size(); ++id)
        if (seg.segment_class[id] != 0) out << id << ' ' << seg.segment_class[id] << '\n';
    require(out.good(), "failed writing sidecar for ", seg_path);
}

// Image loader used by training/prediction ingestion; rejects rasters the
// patch geometry cannot handle.
inline Image load_image_checked(const std::string& path) {
    Image img = read_image_png(path);
    require(img.width >= kMinForestImageSide && img.height >= kMinForestImageSide,
            "image too small for 32x32 patches (", img.width, "x", img.height, "): ", path);
    return img;
}

}  // namespace sobd
