#pragma once

// Partitioning the training corpus into situations: one per class, k-means
// subclusters within each class, or class-agnostic k-means over all images.

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <vector>

#include "sobd/base.hpp"
#include "sobd/fisher.hpp"
#include "sobd/kmeans.hpp"
#include "sobd/manifest.hpp"
#include "sobd/random.hpp"

namespace sobd {

enum class SituationKind { monolithic, class_specific, subclass, agnostic };

inline const char* to_string(SituationKind k) {
    switch (k) {
        case SituationKind::monolithic: return "monolithic";
        case SituationKind::class_specific: return "class";
        case SituationKind::subclass: return "subclass";
        case SituationKind::agnostic: return "agnostic";
    }
    return "?";
}

inline SituationKind parse_situation_kind(const std::string& s) {
    if (s == "monolithic") return SituationKind::monolithic;
    if (s == "class") return SituationKind::class_specific;
    if (s == "subclass") return SituationKind::subclass;
    if (s == "agnostic") return SituationKind::agnostic;
    fail("unknown situation kind '", s, "' (monolithic|class|subclass|agnostic)");
}

struct Situation {
    int id = 0;
    SituationKind kind = SituationKind::monolithic;
    int class_id = -1;               // class/subclass kinds only
    std::vector<int> member_images;  // manifest entry indices, ascending
    std::vector<float> centroid;     // k-means kinds only (normalized space)
};

struct SituationPartition {
    SituationKind kind = SituationKind::monolithic;
    std::vector<Situation> situations;

    int k() const { return static_cast<int>(situations.size()); }
};

namespace detail {

// Canonical order: class id, then centroid lexicographic, then member list.
// Ids are reassigned to match.
inline void canonicalize(SituationPartition& p) {
    std::sort(p.situations.begin(), p.situations.end(),
              [](const Situation& a, const Situation& b) {
                  if (a.class_id != b.class_id) return a.class_id < b.class_id;
                  if (a.centroid != b.centroid) return a.centroid < b.centroid;
                  return a.member_images < b.member_images;
              });
    for (int i = 0; i < static_cast<int>(p.situations.size()); ++i) p.situations[i].id = i;
}

// Rows of the entry descriptors for the given indices, each L2-normalized
// (Euclidean distance on unit vectors ranks like cosine similarity).
inline MatrixD normalized_rows(const MatrixF& descriptors, const std::vector<int>& indices) {
    MatrixD out(indices.size(), descriptors.cols, 0.0);
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const float* src = descriptors.row(indices[r]);
        double norm = 0.0;
        for (std::size_t j = 0; j < descriptors.cols; ++j)
            norm += static_cast<double>(src[j]) * src[j];
        norm = std::sqrt(norm);
        const double inv = norm < 1e-12 ? 0.0 : 1.0 / norm;
        double* dst = out.row(r);
        for (std::size_t j = 0; j < descriptors.cols; ++j) dst[j] = src[j] * inv;
    }
    return out;
}

inline std::vector<float> cluster_centroid(const MatrixD& points,
                                           const std::vector<std::size_t>& rows) {
    std::vector<float> c(points.cols, 0.0f);
    if (rows.empty()) return c;
    std::vector<double> acc(points.cols, 0.0);
    for (std::size_t r : rows) {
        const double* x = points.row(r);
        for (std::size_t j = 0; j < points.cols; ++j) acc[j] += x[j];
    }
    for (std::size_t j = 0; j < points.cols; ++j)
        c[j] = static_cast<float>(acc[j] / static_cast<double>(rows.size()));
    return c;
}

}  // namespace detail

// One situation holding every training image.
inline SituationPartition build_monolithic_situations(const DatasetManifest& manifest) {
    SituationPartition p;
    p.kind = SituationKind::monolithic;
    Situation s;
    s.kind = SituationKind::monolithic;
    s.member_images = manifest.split_indices(Split::train);
    require(!s.member_images.empty(), "build_monolithic_situations: no training images");
    p.situations.push_back(std::move(s));
    detail::canonicalize(p);
    return p;
}

// One situation per distinct class id; multi-label images join each of their
// classes' situations.
inline SituationPartition build_class_situations(const DatasetManifest& manifest) {
    SituationPartition p;
    p.kind = SituationKind::class_specific;
    std::map<int, std::vector<int>> members;
    for (int i : manifest.split_indices(Split::train))
        for (int c : manifest.entries[i].class_labels) members[c].push_back(i);
    require(!members.empty(), "build_class_situations: no labeled training images");
    for (auto& [cls, images] : members) {
        Situation s;
        s.kind = SituationKind::class_specific;
        s.class_id = cls;
        s.member_images = std::move(images);
        p.situations.push_back(std::move(s));
    }
    detail::canonicalize(p);
    return p;
}

// Per class, k-means over that class's descriptors with k capped at the
// class size; descriptors indexed by manifest entry.
inline SituationPartition build_subclass_situations(const DatasetManifest& manifest,
                                                    const MatrixF& descriptors,
                                                    int subclasses_per_class,
                                                    std::uint64_t seed) {
    require(subclasses_per_class > 0, "build_subclass_situations: need >= 1 subclass per class");
    require(descriptors.rows == manifest.entries.size(),
            "build_subclass_situations: descriptor row count != manifest entries");
    SituationPartition p;
    p.kind = SituationKind::subclass;

    std::map<int, std::vector<int>> class_members;
    for (int i : manifest.split_indices(Split::train))
        for (int c : manifest.entries[i].class_labels) class_members[c].push_back(i);
    require(!class_members.empty(), "build_subclass_situations: no labeled training images");

    for (const auto& [cls, images] : class_members) {
        const int k = std::min<int>(subclasses_per_class, static_cast<int>(images.size()));
        const MatrixD points = detail::normalized_rows(descriptors, images);
        KMeansResult km = kmeans(points, k, derive_seed(seed, cls));
        std::vector<std::vector<std::size_t>> rows(k);
        for (std::size_t r = 0; r < points.rows; ++r)
            rows[km.assignment[r]].push_back(r);
        for (int c = 0; c < k; ++c) {
            Situation s;
            s.kind = SituationKind::subclass;
            s.class_id = cls;
            for (std::size_t r : rows[c]) s.member_images.push_back(images[r]);
            std::sort(s.member_images.begin(), s.member_images.end());
            s.centroid = detail::cluster_centroid(points, rows[c]);
            p.situations.push_back(std::move(s));
        }
    }
    detail::canonicalize(p);
    return p;
}

// Single k-means over every training image, labels ignored.
inline SituationPartition build_agnostic_situations(const DatasetManifest& manifest,
                                                    const MatrixF& descriptors, int k,
                                                    std::uint64_t seed) {
    require(descriptors.rows == manifest.entries.size(),
            "build_agnostic_situations: descriptor row count != manifest entries");
    const std::vector<int> train = manifest.split_indices(Split::train);
    require(!train.empty(), "build_agnostic_situations: no training images");
    require(k >= 1 && k <= static_cast<int>(train.size()),
            "build_agnostic_situations: need 1 <= k <= train size, got k=", k);

    const MatrixD points = detail::normalized_rows(descriptors, train);
    KMeansResult km = kmeans(points, k, derive_seed(seed, 0x61676eULL));

    SituationPartition p;
    p.kind = SituationKind::agnostic;
    std::vector<std::vector<std::size_t>> rows(k);
    for (std::size_t r = 0; r < points.rows; ++r) rows[km.assignment[r]].push_back(r);
    for (int c = 0; c < k; ++c) {
        Situation s;
        s.kind = SituationKind::agnostic;
        for (std::size_t r : rows[c]) s.member_images.push_back(train[r]);
        std::sort(s.member_images.begin(), s.member_images.end());
        s.centroid = detail::cluster_centroid(points, rows[c]);
        p.situations.push_back(std::move(s));
    }
    detail::canonicalize(p);
    return p;
}

// Forest training needs a handful of images per situation. Situations below
// min_size are folded into the nearest (same-class for subclass kind)
// centroid's situation; class-kind situations are never merged, only
// reported. Unmergeable leftovers stay, with a warning.
inline SituationPartition merge_small_situations(SituationPartition p,
                                                 const MatrixF& descriptors, int min_size = 3,
                                                 const WarnSink& sink = {}) {
    if (p.kind == SituationKind::monolithic || p.kind == SituationKind::class_specific) {
        for (const Situation& s : p.situations)
            if (static_cast<int>(s.member_images.size()) < min_size)
                warn(sink, str_cat("situation ", s.id, " (", to_string(s.kind), ", class ",
                                   s.class_id, ") has only ", s.member_images.size(),
                                   " images; kept as-is"));
        return p;
    }

    auto mergeable = [&](const Situation& from, const Situation& into) {
        if (&from == &into) return false;
        if (p.kind == SituationKind::subclass && from.class_id != into.class_id) return false;
        return true;
    };

    bool merged_any = true;
    while (merged_any) {
        merged_any = false;
        // Smallest situation first; ties by id for determinism.
        int victim = -1;
        for (int i = 0; i < p.k(); ++i) {
            const auto& s = p.situations[i];
            if (static_cast<int>(s.member_images.size()) >= min_size) continue;
            if (victim < 0 ||
                s.member_images.size() < p.situations[victim].member_images.size())
                victim = i;
        }
        if (victim < 0) break;

        int target = -1;
        double best_d = 0.0;
        for (int i = 0; i < p.k(); ++i) {
            if (!mergeable(p.situations[victim], p.situations[i])) continue;
            const auto& a = p.situations[victim].centroid;
            const auto& b = p.situations[i].centroid;
            double d = 0.0;
            for (std::size_t j = 0; j < a.size(); ++j) {
                const double z = static_cast<double>(a[j]) - b[j];
                d += z * z;
            }
            if (target < 0 || d < best_d) {
                target = i;
                best_d = d;
            }
        }
        if (target < 0) {
            warn(sink, str_cat("situation ", p.situations[victim].id, " has only ",
                               p.situations[victim].member_images.size(),
                               " images and no merge target; kept as-is"));
            break;
        }

        Situation& into = p.situations[target];
        Situation& from = p.situations[victim];
        warn(sink, str_cat("merging situation ", from.id, " (", from.member_images.size(),
                           " images) into situation ", into.id));
        into.member_images.insert(into.member_images.end(), from.member_images.begin(),
                                  from.member_images.end());
        std::sort(into.member_images.begin(), into.member_images.end());
        into.member_images.erase(
            std::unique(into.member_images.begin(), into.member_images.end()),
            into.member_images.end());
        into.centroid = detail::cluster_centroid(
            detail::normalized_rows(descriptors, into.member_images),
            [&] {
                std::vector<std::size_t> all(into.member_images.size());
                for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
                return all;
            }());
        p.situations.erase(p.situations.begin() + victim);
        merged_any = true;
    }
    detail::canonicalize(p);
    return p;
}

// Text export: one line per situation, tab separated.
inline std::string serialize_partition(const SituationPartition& p) {
    std::ostringstream os;
    for (const Situation& s : p.situations) {
        os << s.id << '\t' << to_string(s.kind) << '\t';
        if (s.class_id >= 0)
            os << s.class_id;
        else
            os << '-';
        os << '\t';
        for (std::size_t i = 0; i < s.member_images.size(); ++i) {
            if (i) os << ',';
            os << s.member_images[i];
        }
        os << '\n';
    }
    return os.str();
}

// Parses the text form. Centroids are not part of the text representation;
// they live in the model container.
inline SituationPartition parse_partition(const std::string& text) {
    SituationPartition p;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        const auto fields = detail::split_fields(line, '\t');
        require(fields.size() == 4, "partition parse error at line ", line_no,
                ": expected 4 tab-separated fields");
        Situation s;
        try {
            s.id = std::stoi(fields[0]);
        } catch (const std::exception&) {
            fail("partition parse error at line ", line_no, ": bad id '", fields[0], "'");
        }
        s.kind = parse_situation_kind(fields[1]);
        if (fields[2] != "-") {
            try {
                s.class_id = std::stoi(fields[2]);
            } catch (const std::exception&) {
                fail("partition parse error at line ", line_no, ": bad class id '", fields[2],
                     "'");
            }
        }
        for (const auto& tok : detail::split_fields(fields[3], ',')) {
            if (tok.empty()) continue;
            try {
                s.member_images.push_back(std::stoi(tok));
            } catch (const std::exception&) {
                fail("partition parse error at line ", line_no, ": bad entry index '", tok, "'");
            }
        }
        require(!s.member_images.empty(), "partition parse error at line ", line_no,
                ": situation has no members");
        p.situations.push_back(std::move(s));
    }
    require(!p.situations.empty(), "partition text has no situations");
    p.kind = p.situations.front().kind;
    for (const Situation& s : p.situations)
        require(s.kind == p.kind, "partition mixes situation kinds");
    return p;
}

// Structural checks shared by tests and the pipeline.
inline void validate_partition(const SituationPartition& p, const DatasetManifest& manifest) {
    require(!p.situations.empty(), "partition: no situations");
    const std::vector<int> train = manifest.split_indices(Split::train);
    for (const Situation& s : p.situations) {
        require(!s.member_images.empty(), "partition: situation ", s.id, " has no members");
        require(s.kind == p.kind, "partition: situation ", s.id, " kind mismatch");
        for (int m : s.member_images)
            require(m >= 0 && m < static_cast<int>(manifest.entries.size()) &&
                        manifest.entries[m].split == Split::train,
                    "partition: situation ", s.id, " references non-train entry ", m);
    }
    if (p.kind == SituationKind::subclass || p.kind == SituationKind::agnostic ||
        p.kind == SituationKind::monolithic) {
        // Exact partition of the train split (per class for subclass kind).
        std::map<std::pair<int, int>, std::size_t> cover;  // (entry, class) -> count
        for (const Situation& s : p.situations)
            for (int m : s.member_images) ++cover[{m, s.class_id}];
        for (int t : train) {
            if (p.kind == SituationKind::subclass) {
                for (int c : manifest.entries[t].class_labels)
                    require(cover[{t, c}] == 1, "partition: entry ", t, " class ", c,
                            " covered ", cover[{t, c}], " times");
            } else {
                require(cover[{t, -1}] == 1, "partition: entry ", t, " covered ",
                        cover[{t, -1}], " times");
            }
        }
    }
}

}  // namespace sobd
