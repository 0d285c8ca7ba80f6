#ifndef DDET_SDD_HPP
#define DDET_SDD_HPP

#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ddet/box.hpp"

namespace ddet {

struct AnnotatedObject {
    Box box;
    int class_id = 0;
    int track_id = 0;
    bool lost = false;
    bool occluded = false;
    bool generated = false;
};

struct GroundTruthFrame {
    std::size_t frame_index = 0;
    std::vector<AnnotatedObject> objects;
};

using LabelMap = std::map<std::string, int>;

// Raw SDD label strings -> the six category ids.
inline LabelMap sdd_label_map() {
    return {{"Pedestrian", 0}, {"Biker", 1}, {"Skater", 2},
            {"Car", 3},        {"Bus", 4},   {"Cart", 5}};
}

inline std::vector<std::string> sdd_class_names() {
    return {"Pedestrian", "Biker", "Skater", "Car", "Bus", "Cart"};
}

inline std::string known_labels(const LabelMap& labels) {
    std::string s;
    for (const auto& [k, v] : labels) {
        if (!s.empty()) s += ", ";
        s += k;
    }
    return s;
}

// Line grammar (space-separated):
//   track_id xmin ymin xmax ymax frame lost occluded generated "label"
// Nine integers then one double-quoted label. Objects are grouped by frame.
inline std::map<std::size_t, GroundTruthFrame> parse_sdd_annotations(std::istream& is,
                                                                     const LabelMap& labels) {
    std::map<std::size_t, GroundTruthFrame> frames;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ls(line);
        long long f[9];
        for (int i = 0; i < 9; ++i) {
            std::string tok;
            if (!(ls >> tok))
                throw std::runtime_error("line " + std::to_string(lineno) +
                                         ": expected 9 integer fields before the label");
            std::size_t used = 0;
            try {
                f[i] = std::stoll(tok, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != tok.size())
                throw std::runtime_error("line " + std::to_string(lineno) + ": field " +
                                         std::to_string(i + 1) + " ('" + tok +
                                         "') is not an integer");
        }
        std::string rest;
        std::getline(ls, rest);
        std::size_t q1 = rest.find('"');
        std::size_t q2 = rest.rfind('"');
        if (q1 == std::string::npos || q2 == q1)
            throw std::runtime_error("line " + std::to_string(lineno) +
                                     ": label must be double-quoted");
        std::string after = rest.substr(q2 + 1);
        if (after.find_first_not_of(" \t\r") != std::string::npos)
            throw std::runtime_error("line " + std::to_string(lineno) +
                                     ": unexpected trailing content after label");
        std::string label = rest.substr(q1 + 1, q2 - q1 - 1);
        auto it = labels.find(label);
        if (it == labels.end())
            throw std::runtime_error("line " + std::to_string(lineno) + ": unknown label \"" +
                                     label + "\" (known: " + known_labels(labels) + ")");
        AnnotatedObject obj;
        obj.track_id = static_cast<int>(f[0]);
        obj.box = {static_cast<double>(f[1]), static_cast<double>(f[2]),
                   static_cast<double>(f[3]), static_cast<double>(f[4])};
        if (!obj.box.valid())
            throw std::runtime_error("line " + std::to_string(lineno) +
                                     ": box has negative extent");
        std::size_t frame = static_cast<std::size_t>(f[5]);
        obj.lost = f[6] != 0;
        obj.occluded = f[7] != 0;
        obj.generated = f[8] != 0;
        obj.class_id = it->second;
        GroundTruthFrame& gf = frames[frame];
        gf.frame_index = frame;
        gf.objects.push_back(obj);
    }
    return frames;
}

// Canonical serialized form: frames ascending, objects in stored order.
inline void serialize_sdd_annotations(std::ostream& os,
                                      const std::map<std::size_t, GroundTruthFrame>& frames,
                                      const std::vector<std::string>& class_names) {
    for (const auto& [fi, frame] : frames)
        for (const AnnotatedObject& o : frame.objects)
            os << o.track_id << ' ' << static_cast<long long>(o.box.x1) << ' '
               << static_cast<long long>(o.box.y1) << ' ' << static_cast<long long>(o.box.x2)
               << ' ' << static_cast<long long>(o.box.y2) << ' ' << fi << ' ' << (o.lost ? 1 : 0)
               << ' ' << (o.occluded ? 1 : 0) << ' ' << (o.generated ? 1 : 0) << " \""
               << class_names.at(static_cast<std::size_t>(o.class_id)) << "\"\n";
}

}  // namespace ddet

#endif
