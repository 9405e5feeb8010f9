#include "stv/tracks.hpp"

#include <algorithm>
#include <iomanip>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>

#include "stv/error.hpp"

namespace stv {

double iou(const Box& a, const Box& b) {
  const double ix = std::max(0.0, std::min(a.right(), b.right()) - std::max(a.left(), b.left()));
  const double iy = std::max(0.0, std::min(a.bottom(), b.bottom()) - std::max(a.top(), b.top()));
  const double inter = ix * iy;
  // Areas from the same edges as the overlap, so identical boxes give exactly 1.
  const double area_a = (a.right() - a.left()) * (a.bottom() - a.top());
  const double area_b = (b.right() - b.left()) * (b.bottom() - b.top());
  const double uni = area_a + area_b - inter;
  return uni > 0 ? std::min(1.0, inter / uni) : 0.0;
}

Box clamp_to_unit(const Box& b) {
  const double l = std::clamp(b.left(), 0.0, 1.0), r = std::clamp(b.right(), 0.0, 1.0);
  const double t = std::clamp(b.top(), 0.0, 1.0), d = std::clamp(b.bottom(), 0.0, 1.0);
  return Box{(l + r) / 2, (t + d) / 2, r - l, d - t};
}

void TrackSet::add(int id, const TrackEntry& entry) {
  auto& list = tracks_[id];
  if (!list.empty() && entry.frame <= list.back().frame) {
    throw Error("track_order", "track " + std::to_string(id) + ": frame " + std::to_string(entry.frame) +
                                   " not after frame " + std::to_string(list.back().frame));
  }
  list.push_back(entry);
}

std::size_t TrackSet::box_count() const {
  std::size_t n = 0;
  for (const auto& [id, list] : tracks_) n += list.size();
  return n;
}

std::vector<std::pair<int, TrackEntry>> TrackSet::at_frame(int frame) const {
  std::vector<std::pair<int, TrackEntry>> out;
  for (const auto& [id, list] : tracks_) {
    auto it = std::lower_bound(list.begin(), list.end(), frame,
                               [](const TrackEntry& e, int f) { return e.frame < f; });
    if (it != list.end() && it->frame == frame) out.emplace_back(id, *it);
  }
  return out;
}

std::vector<int> TrackSet::frames() const {
  std::set<int> all;
  for (const auto& [id, list] : tracks_)
    for (const auto& e : list) all.insert(e.frame);
  return {all.begin(), all.end()};
}

bool TrackSet::operator==(const TrackSet& other) const {
  if (tracks_.size() != other.tracks_.size()) return false;
  for (const auto& [id, list] : tracks_) {
    auto it = other.tracks_.find(id);
    if (it == other.tracks_.end() || it->second.size() != list.size()) return false;
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto& a = list[i];
      const auto& b = it->second[i];
      if (a.frame != b.frame || a.box.cx != b.box.cx || a.box.cy != b.box.cy || a.box.w != b.box.w ||
          a.box.h != b.box.h || a.confidence != b.confidence) {
        return false;
      }
    }
  }
  return true;
}

void write_mot_csv(std::ostream& out, const TrackSet& tracks, double width, double height, int frame_offset,
                   int id_offset, bool header) {
  if (header) out << "frame,id,x,y,w,h,conf\n";
  std::ostringstream row;
  row << std::setprecision(9);
  for (int f : tracks.frames()) {
    for (const auto& [id, e] : tracks.at_frame(f)) {
      row.str("");
      row << (f + frame_offset + 1) << ',' << (id + id_offset) << ',' << e.box.left() * width << ','
          << e.box.top() * height << ',' << e.box.w * width << ',' << e.box.h * height << ',' << e.confidence << '\n';
      out << row.str();
    }
  }
}

TrackSet read_mot_csv(std::istream& in, double width, double height) {
  TrackSet tracks;
  std::vector<std::pair<int, std::pair<int, TrackEntry>>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.rfind("frame", 0) == 0) continue;
    std::istringstream fields(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(fields, cell, ',')) {
      try {
        v.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw Error("parse", "MOT csv line " + std::to_string(line_no) + ": bad number '" + cell + "'");
      }
    }
    if (v.size() < 7) throw Error("parse", "MOT csv line " + std::to_string(line_no) + ": expected 7 fields");
    const double w = v[4] / width, h = v[5] / height;
    TrackEntry e{static_cast<int>(v[0]) - 1, Box{v[2] / width + w / 2, v[3] / height + h / 2, w, h}, v[6]};
    rows.push_back({e.frame, {static_cast<int>(v[1]), e}});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [frame, item] : rows) tracks.add(item.first, item.second);
  return tracks;
}

}  // namespace stv
