#ifndef EMREDUCE_DATASETS_HPP
#define EMREDUCE_DATASETS_HPP

#include <optional>
#include <string>
#include <vector>

namespace emreduce {

// Metadata for the public scenes commonly used with this tooling. Only the
// numbers ship here; the cubes themselves must be downloaded and converted
// separately. hysime_estimate is a display-only external reference.
struct DatasetInfo {
    std::string key;
    std::string display_name;
    int width;
    int height;
    int bands;
    int m_ref;            // reference endmember count from the literature
    int hysime_estimate;  // external set-size estimate, for annotation only
};

inline const std::vector<DatasetInfo>& dataset_registry() {
    static const std::vector<DatasetInfo> registry = {
        {"salinas-a", "Salinas-A", 86, 83, 204, 6, 18},
        {"pavia-university", "Pavia University", 610, 340, 103, 9, 60},
        {"cuprite", "Cuprite", 250, 191, 188, 12, 18},
        {"kennedy-space-center", "Kennedy Space Center", 512, 614, 176, 13, 2},
        {"indian-pines", "Indian Pines", 145, 145, 200, 16, 18},
    };
    return registry;
}

inline std::optional<DatasetInfo> find_dataset(const std::string& key) {
    for (const auto& d : dataset_registry())
        if (d.key == key || d.display_name == key) return d;
    return std::nullopt;
}

}  // namespace emreduce

#endif
