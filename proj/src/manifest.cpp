#include "raterlab/manifest.hpp"

#include <algorithm>
#include <set>

#include "json.hpp"
#include "raterlab/error.hpp"
#include "raterlab/io.hpp"

namespace raterlab {

namespace fs = std::filesystem;
using nlohmann::json;

DatasetManifest::DatasetManifest(std::vector<ManifestSubject> subjects, fs::path base_dir,
                                 std::vector<RaterRecord> raters)
    : subjects_(std::move(subjects)), base_dir_(std::move(base_dir)), raters_(std::move(raters)) {
    validate();
}

void DatasetManifest::validate() {
    auto& centers = center_by_rater_;
    centers.clear();
    std::set<std::string> seen_subjects;
    for (const auto& s : subjects_) {
        if (!seen_subjects.insert(s.subject_id).second) throw Error("manifest: duplicate subject " + s.subject_id);
        if (s.entries.empty()) throw Error("manifest: subject " + s.subject_id + " has no entries");
        std::set<std::string> raters;
        for (const auto& e : s.entries) {
            if (e.rater_id.empty()) throw Error("manifest: empty rater_id in subject " + s.subject_id);
            if (!raters.insert(e.rater_id).second)
                throw Error("manifest: rater " + e.rater_id + " appears twice for subject " + s.subject_id);
            auto [it, fresh] = centers.emplace(e.rater_id, e.center_id);
            if (!fresh && it->second != e.center_id)
                throw Error("manifest: rater " + e.rater_id + " is assigned to centers " + it->second + " and " +
                            e.center_id);
        }
    }
    for (const auto& r : raters_) {
        auto it = centers.find(r.rater_id);
        if (it != centers.end() && it->second != r.center_id)
            throw Error("manifest: rater record for " + r.rater_id + " disagrees on center");
    }
}

DatasetManifest DatasetManifest::load(const fs::path& path) {
    if (!fs::exists(path)) throw IoError("missing manifest: " + path.string());
    try {
        const json j = json::parse(read_file(path));
        std::vector<ManifestSubject> subjects;
        for (const auto& js : j.at("subjects")) {
            ManifestSubject s;
            s.subject_id = js.at("subject_id").get<std::string>();
            for (const auto& je : js.at("entries"))
                s.entries.push_back({je.at("rater_id").get<std::string>(), je.at("center_id").get<std::string>(),
                                     je.at("mask_path").get<std::string>()});
            if (js.contains("image_path")) s.image_path = js.at("image_path").get<std::string>();
            if (js.contains("truth_path")) s.truth_path = js.at("truth_path").get<std::string>();
            subjects.push_back(std::move(s));
        }
        std::vector<RaterRecord> raters;
        if (j.contains("raters")) {
            for (const auto& jr : j.at("raters")) {
                RaterRecord r;
                r.rater_id = jr.at("rater_id").get<std::string>();
                r.center_id = jr.at("center_id").get<std::string>();
                r.center_style = jr.value("center_style", 0.0);
                r.rater_offset = jr.value("rater_offset", 0.0);
                r.jitter_sigma = jr.value("jitter_sigma", 0.0);
                r.flip_rate = jr.value("flip_rate", 0.0);
                raters.push_back(std::move(r));
            }
        }
        return DatasetManifest(std::move(subjects), path.parent_path(), std::move(raters));
    } catch (const json::exception& e) {
        throw IoError("malformed manifest " + path.string() + ": " + e.what());
    }
}

void DatasetManifest::save(const fs::path& path) const {
    json j;
    j["subjects"] = json::array();
    for (const auto& s : subjects_) {
        json js;
        js["subject_id"] = s.subject_id;
        js["entries"] = json::array();
        for (const auto& e : s.entries)
            js["entries"].push_back({{"rater_id", e.rater_id}, {"center_id", e.center_id}, {"mask_path", e.mask_path}});
        if (s.image_path) js["image_path"] = *s.image_path;
        if (s.truth_path) js["truth_path"] = *s.truth_path;
        j["subjects"].push_back(std::move(js));
    }
    if (!raters_.empty()) {
        j["raters"] = json::array();
        for (const auto& r : raters_)
            j["raters"].push_back({{"rater_id", r.rater_id},
                                   {"center_id", r.center_id},
                                   {"center_style", r.center_style},
                                   {"rater_offset", r.rater_offset},
                                   {"jitter_sigma", r.jitter_sigma},
                                   {"flip_rate", r.flip_rate}});
    }
    write_file_atomic(path, j.dump(2) + "\n");
}

const ManifestSubject& DatasetManifest::subject(const std::string& subject_id) const {
    for (const auto& s : subjects_)
        if (s.subject_id == subject_id) return s;
    throw Error("manifest: unknown subject " + subject_id);
}

std::vector<std::string> DatasetManifest::rater_ids() const {
    std::vector<std::string> out;
    for (const auto& [r, c] : center_by_rater_) out.push_back(r);
    return out;
}

std::vector<std::string> DatasetManifest::center_ids() const {
    std::set<std::string> s;
    for (const auto& [r, c] : center_by_rater_) s.insert(c);
    return {s.begin(), s.end()};
}

const std::string& DatasetManifest::center_of(const std::string& rater_id) const {
    auto it = center_by_rater_.find(rater_id);
    if (it == center_by_rater_.end()) throw Error("manifest: unknown rater " + rater_id);
    return it->second;
}

std::vector<std::string> DatasetManifest::raters_in_center(const std::string& center_id) const {
    std::vector<std::string> out;
    for (const auto& [r, c] : center_by_rater_)
        if (c == center_id) out.push_back(r);
    return out;
}

fs::path DatasetManifest::resolve(const std::string& relative) const {
    const fs::path p(relative);
    return p.is_absolute() ? p : base_dir_ / p;
}

}  // namespace raterlab
