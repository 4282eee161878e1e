// Copyright Contributors to the EgoGS Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

namespace egogs {

/// Inclusive frame range of one hand-object interaction.
struct Interaction {
    int onset = 0;
    int offset = 0;
    bool operator==(const Interaction &) const = default;
};

enum class ClipKind { Static, Dynamic };

struct Clip {
    int clip_id = 0;
    ClipKind kind = ClipKind::Static;
    int first = 0; // inclusive
    int last = 0;  // inclusive
    int size() const { return last - first + 1; }
    bool contains(int frame) const { return frame >= first && frame <= last; }
    bool operator==(const Clip &) const = default;
};

/// Ordered clips covering [0, num_frames) without gaps or overlap.
struct ClipPartition {
    int num_frames = 0;
    std::vector<Clip> clips;

    /// Index into `clips` of the clip holding `frame`; throws Error(OutOfRange).
    int clip_index(int frame) const;
    const Clip &clip_of(int frame) const { return clips[clip_index(frame)]; }
    std::vector<int> dynamic_clip_indices() const;
};

/// Dynamic clips are the interactions; static clips fill the remaining ranges.
/// Throws Error(InvalidAnnotation) on unsorted, overlapping or out-of-range intervals.
ClipPartition partition_clips(int num_frames, const std::vector<Interaction> &interactions);

} // namespace egogs
