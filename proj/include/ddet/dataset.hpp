#ifndef DDET_DATASET_HPP
#define DDET_DATASET_HPP

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ddet/image_ops.hpp"
#include "ddet/ppm.hpp"
#include "ddet/sdd.hpp"

namespace ddet {

// On-disk layout under a dataset root:
//   classes.txt                          one label per line (line = class id);
//                                        absent -> the six SDD labels
//   frames/<video-id>/<frame-index>.ppm
//   annotations/<video-id>/annotations.txt
struct Dataset {
    std::vector<std::string> class_names;
    std::vector<Sample> samples;  // images normalized to [-1,1]
};

inline std::vector<std::string> load_class_names(const std::string& root) {
    std::ifstream cs(root + "/classes.txt");
    if (!cs) return sdd_class_names();
    std::vector<std::string> names;
    std::string line;
    while (std::getline(cs, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (!line.empty()) names.push_back(line);
    }
    if (names.empty()) throw std::runtime_error("classes.txt is empty: " + root);
    return names;
}

inline LabelMap label_map_from(const std::vector<std::string>& names) {
    LabelMap m;
    for (std::size_t i = 0; i < names.size(); ++i) m.emplace(names[i], static_cast<int>(i));
    return m;
}

// Loads every annotated frame of one video. `include_lost` keeps lost=1
// objects as targets; by default they are dropped from training and eval GT.
inline Dataset load_dataset(const std::string& root, const std::string& video,
                            bool include_lost = false) {
    namespace fs = std::filesystem;
    Dataset ds;
    ds.class_names = load_class_names(root);
    LabelMap labels = label_map_from(ds.class_names);

    std::string ann_path = root + "/annotations/" + video + "/annotations.txt";
    std::ifstream as(ann_path);
    if (!as) throw std::runtime_error("cannot open annotations: " + ann_path);
    std::map<std::size_t, GroundTruthFrame> frames = parse_sdd_annotations(as, labels);

    std::string frame_dir = root + "/frames/" + video;
    if (!fs::is_directory(frame_dir))
        throw std::runtime_error("missing frame directory: " + frame_dir);

    // every .ppm in the frame directory, sorted by frame index
    std::vector<std::size_t> indices;
    for (const auto& e : fs::directory_iterator(frame_dir)) {
        if (e.path().extension() != ".ppm") continue;
        indices.push_back(std::stoul(e.path().stem().string()));
    }
    std::sort(indices.begin(), indices.end());

    for (std::size_t fi : indices) {
        Sample s;
        s.source_id = video + "/" + std::to_string(fi);
        Tensorf raw = load_ppm_file(frame_dir + "/" + std::to_string(fi) + ".ppm");
        s.image = normalize_image(raw);
        auto it = frames.find(fi);
        if (it != frames.end()) {
            s.gt.frame_index = fi;
            double W = static_cast<double>(s.width()), H = static_cast<double>(s.height());
            for (const AnnotatedObject& o : it->second.objects) {
                if (o.lost && !include_lost) continue;
                AnnotatedObject clipped = o;
                clipped.box = o.box.clipped(W, H);
                s.gt.objects.push_back(clipped);
            }
        } else {
            s.gt.frame_index = fi;
        }
        ds.samples.push_back(std::move(s));
    }
    if (ds.samples.empty()) throw std::runtime_error("no frames found in " + frame_dir);
    return ds;
}

}  // namespace ddet

#endif
