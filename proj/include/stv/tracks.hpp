#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <utility>
#include <vector>

namespace stv {

/// Axis-aligned box in normalized image coordinates: center (cx, cy) and
/// size (w, h), all nominally in [0, 1].
struct Box {
  double cx = 0, cy = 0, w = 0, h = 0;

  double left() const { return cx - w / 2; }
  double right() const { return cx + w / 2; }
  double top() const { return cy - h / 2; }
  double bottom() const { return cy + h / 2; }
};

double iou(const Box& a, const Box& b);

/// Clips the box extents to [0,1]² and re-centers it.
Box clamp_to_unit(const Box& b);

struct TrackEntry {
  int frame = 0;
  Box box;
  double confidence = 1.0;
};

/// Identity → time-ordered boxes. Frames within a track are strictly
/// increasing, which also rules out two boxes per (track, frame).
class TrackSet {
 public:
  /// Throws Error("track_order") if `frame` is not past the track's last frame.
  void add(int id, const TrackEntry& entry);
  void add(int id, int frame, const Box& box, double confidence = 1.0) { add(id, TrackEntry{frame, box, confidence}); }

  const std::map<int, std::vector<TrackEntry>>& tracks() const { return tracks_; }
  bool empty() const { return tracks_.empty(); }
  std::size_t box_count() const;

  /// (id, entry) pairs present at `frame`, ordered by id.
  std::vector<std::pair<int, TrackEntry>> at_frame(int frame) const;

  /// Sorted list of every frame index that carries at least one box.
  std::vector<int> frames() const;

  bool operator==(const TrackSet& other) const;

 private:
  std::map<int, std::vector<TrackEntry>> tracks_;
};

/// Writes `frame,id,x,y,w,h,conf` rows in MOT convention: frames 1-indexed,
/// (x, y) the top-left corner, all lengths in pixels of a width×height image.
/// Rows are ordered by frame, then id.
void write_mot_csv(std::ostream& out, const TrackSet& tracks, double width, double height, int frame_offset = 0,
                   int id_offset = 0, bool header = true);

/// Parses the rows produced by write_mot_csv back into a TrackSet.
TrackSet read_mot_csv(std::istream& in, double width, double height);

}  // namespace stv
