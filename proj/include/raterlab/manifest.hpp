#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "raterlab/volume.hpp"

namespace raterlab {

struct ManifestEntry {
    std::string rater_id;
    std::string center_id;
    std::string mask_path;  // relative to the manifest file
};

struct ManifestSubject {
    std::string subject_id;
    std::vector<ManifestEntry> entries;
    // Optional companions written by the simulator: predictor input and the
    // generating truth.
    std::optional<std::string> image_path;
    std::optional<std::string> truth_path;
};

/// Generation parameters of a simulated rater, carried through the manifest
/// so synthetic predictors can be matched to raters.
struct RaterRecord {
    std::string rater_id;
    std::string center_id;
    double center_style = 0.0;
    double rater_offset = 0.0;
    double jitter_sigma = 0.0;
    double flip_rate = 0.0;
};

/// Subjects x raters x centers with file references.
/// Invariants: (subject, rater) pairs unique, each rater belongs to exactly
/// one center, every subject has at least one entry.
class DatasetManifest {
public:
    DatasetManifest() = default;
    DatasetManifest(std::vector<ManifestSubject> subjects, std::filesystem::path base_dir,
                    std::vector<RaterRecord> raters = {});

    static DatasetManifest load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    const std::vector<ManifestSubject>& subjects() const { return subjects_; }
    const std::vector<RaterRecord>& rater_records() const { return raters_; }
    const std::filesystem::path& base_dir() const { return base_dir_; }

    const ManifestSubject& subject(const std::string& subject_id) const;
    /// Sorted unique rater ids.
    std::vector<std::string> rater_ids() const;
    /// Sorted unique center ids.
    std::vector<std::string> center_ids() const;
    const std::string& center_of(const std::string& rater_id) const;
    std::vector<std::string> raters_in_center(const std::string& center_id) const;

    std::filesystem::path resolve(const std::string& relative) const;

private:
    void validate();

    std::vector<ManifestSubject> subjects_;
    std::filesystem::path base_dir_;
    std::vector<RaterRecord> raters_;
    std::map<std::string, std::string> center_by_rater_;
};

using RaterFilter = std::function<bool(const std::string& rater_id, const std::string& center_id)>;

}  // namespace raterlab
