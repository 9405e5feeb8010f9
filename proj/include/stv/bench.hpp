#pragma once

#include <iosfwd>
#include <vector>

#include "stv/model.hpp"

namespace stv {

struct Throughput {
  TemporalMode mode = TemporalMode::parallel;
  std::size_t threads = 1;
  std::size_t frames = 0;
  std::vector<double> fps;  // one sample per measured iteration
  double median = 0.0;
  double iqr = 0.0;
};

/// Forward-only inference of the action model on `clip`, timed with a
/// monotonic clock. Sequential mode streams the clip one frame at a time on
/// the calling thread; parallel mode hands a pool of `threads` workers to the
/// encoder, the matmuls and the chunked scan.
Throughput measure_throughput(const ModelSpec& spec, const ParamMap<float>& params, const VideoClip& clip,
                              TemporalMode mode, std::size_t threads, int warmup, int measured);

/// Quartiles by linear interpolation between order statistics.
double quantile(std::vector<double> values, double q);

void write_bench_csv(std::ostream& out, const std::vector<Throughput>& rows, bool header = true);

}  // namespace stv
