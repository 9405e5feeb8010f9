#pragma once

#include <cstddef>
#include <vector>

#include "stv/tracks.hpp"

namespace stv {

double top1_accuracy(const std::vector<int>& predictions, const std::vector<int>& labels);

struct MotResult {
  double mota = 0.0;
  double motp = 0.0;
  bool motp_defined = false;  // false when nothing matched; motp is then 0
  std::size_t fp = 0, fn = 0, idsw = 0, matches = 0, gt_boxes = 0;
  double iou_sum = 0.0;
};

/// CLEAR-MOT accounting. Per frame, a ground-truth object keeps its last
/// matched prediction if that prediction is present with IoU >= gate; the
/// rest are matched by maximum-cardinality, maximum-total-IoU assignment
/// among pairs with IoU >= gate. A match whose prediction id differs from the
/// object's previous match counts as an identity switch.
MotResult clear_mot(const TrackSet& gt, const TrackSet& pred, double iou_gate = 0.5);

/// Sums the counts of several sequences and recomputes MOTA and MOTP.
MotResult combine(const std::vector<MotResult>& parts);

}  // namespace stv
