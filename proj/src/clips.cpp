// Copyright Contributors to the EgoGS Project
// SPDX-License-Identifier: Apache-2.0

#include "egogs/clips.hpp"

#include "egogs/error.hpp"

#include <string>

namespace egogs {

ClipPartition partition_clips(int num_frames, const std::vector<Interaction> &interactions) {
    if (num_frames < 0) throw Error(ErrorKind::InvalidAnnotation, "negative frame count");
    int prev_offset = -1;
    for (const auto &it : interactions) {
        const std::string range = "(" + std::to_string(it.onset) + ", " + std::to_string(it.offset) + ")";
        if (it.onset > it.offset) throw Error(ErrorKind::InvalidAnnotation, "interaction " + range + " ends before it starts");
        if (it.onset < 0 || it.offset >= num_frames)
            throw Error(ErrorKind::InvalidAnnotation, "interaction " + range + " outside [0, " +
                                                          std::to_string(num_frames - 1) + "]");
        if (it.onset <= prev_offset)
            throw Error(ErrorKind::InvalidAnnotation, "interaction " + range + " overlaps or precedes the previous one");
        prev_offset = it.offset;
    }
    ClipPartition p;
    p.num_frames = num_frames;
    int cursor = 0;
    auto add = [&](ClipKind kind, int first, int last) {
        if (first > last) return;
        p.clips.push_back({static_cast<int>(p.clips.size()), kind, first, last});
    };
    for (const auto &it : interactions) {
        add(ClipKind::Static, cursor, it.onset - 1);
        add(ClipKind::Dynamic, it.onset, it.offset);
        cursor = it.offset + 1;
    }
    add(ClipKind::Static, cursor, num_frames - 1);
    return p;
}

int ClipPartition::clip_index(int frame) const {
    for (std::size_t i = 0; i < clips.size(); ++i)
        if (clips[i].contains(frame)) return static_cast<int>(i);
    throw Error(ErrorKind::OutOfRange, "frame " + std::to_string(frame) + " outside the clip partition");
}

std::vector<int> ClipPartition::dynamic_clip_indices() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < clips.size(); ++i)
        if (clips[i].kind == ClipKind::Dynamic) out.push_back(static_cast<int>(i));
    return out;
}

} // namespace egogs
