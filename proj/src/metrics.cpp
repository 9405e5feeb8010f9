#include "stv/metrics.hpp"

#include <map>
#include <set>

#include "stv/assignment.hpp"
#include "stv/error.hpp"

namespace stv {

double top1_accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
  if (predictions.size() != labels.size()) throw Error("shape_mismatch", "prediction and label counts differ");
  if (labels.empty()) throw Error("bad_argument", "top-1 accuracy of an empty list");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

namespace {

void finish(MotResult& r) {
  r.mota = 1.0 - static_cast<double>(r.fp + r.fn + r.idsw) / static_cast<double>(r.gt_boxes);
  r.motp_defined = r.matches > 0;
  r.motp = r.motp_defined ? r.iou_sum / static_cast<double>(r.matches) : 0.0;
}

}  // namespace

MotResult clear_mot(const TrackSet& gt, const TrackSet& pred, double iou_gate) {
  if (gt.empty()) throw Error("bad_argument", "clear_mot needs non-empty ground truth");
  if (!(iou_gate > 0.0 && iou_gate < 1.0)) throw Error("bad_argument", "IoU gate must lie in (0,1)");
  std::set<int> frames;
  for (int f : gt.frames()) frames.insert(f);
  for (int f : pred.frames()) frames.insert(f);

  MotResult r;
  std::map<int, int> last;  // gt id -> pred id of its latest match
  for (int f : frames) {
    const auto g = gt.at_frame(f);
    const auto p = pred.at_frame(f);
    std::vector<int> match_of(g.size(), -1);
    std::vector<bool> used(p.size(), false);

    for (std::size_t i = 0; i < g.size(); ++i) {
      auto it = last.find(g[i].first);
      if (it == last.end()) continue;
      for (std::size_t j = 0; j < p.size(); ++j) {
        if (used[j] || p[j].first != it->second) continue;
        if (iou(g[i].second.box, p[j].second.box) >= iou_gate) {
          match_of[i] = static_cast<int>(j);
          used[j] = true;
        }
      }
    }

    std::vector<std::size_t> rows, cols;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (match_of[i] < 0) rows.push_back(i);
    for (std::size_t j = 0; j < p.size(); ++j)
      if (!used[j]) cols.push_back(j);
    CostMatrix cost(rows.size(), cols.size());
    for (std::size_t a = 0; a < rows.size(); ++a) {
      for (std::size_t b = 0; b < cols.size(); ++b) {
        const double overlap = iou(g[rows[a]].second.box, p[cols[b]].second.box);
        cost.at(a, b) = 1.0 - overlap;
        cost.feasible[a * cost.cols + b] = overlap >= iou_gate;
      }
    }
    for (const auto& [a, b] : match(cost)) match_of[rows[a]] = static_cast<int>(cols[b]);

    std::size_t matched = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (match_of[i] < 0) continue;
      const auto& hit = p[static_cast<std::size_t>(match_of[i])];
      auto it = last.find(g[i].first);
      if (it != last.end() && it->second != hit.first) ++r.idsw;
      last[g[i].first] = hit.first;
      r.iou_sum += iou(g[i].second.box, hit.second.box);
      ++matched;
    }
    r.matches += matched;
    r.fp += p.size() - matched;
    r.fn += g.size() - matched;
    r.gt_boxes += g.size();
  }
  finish(r);
  return r;
}

MotResult combine(const std::vector<MotResult>& parts) {
  MotResult r;
  for (const auto& p : parts) {
    r.fp += p.fp;
    r.fn += p.fn;
    r.idsw += p.idsw;
    r.matches += p.matches;
    r.gt_boxes += p.gt_boxes;
    r.iou_sum += p.iou_sum;
  }
  if (r.gt_boxes == 0) throw Error("bad_argument", "no ground truth boxes to combine");
  finish(r);
  return r;
}

}  // namespace stv
