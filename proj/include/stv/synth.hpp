#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stv/tensor.hpp"
#include "stv/tracks.hpp"

namespace stv {

/// T×H×W×C frames with pixel values in [0,1] plus optional ground truth.
struct VideoClip {
  Tensor<float> frames;
  std::optional<int> label;
  std::optional<TrackSet> tracks;
  std::uint64_t seed = 0;

  std::size_t length() const { return frames.dim(0); }
  std::size_t height() const { return frames.dim(1); }
  std::size_t width() const { return frames.dim(2); }
  std::size_t channels() const { return frames.dim(3); }
};

struct ClipSpec {
  std::size_t frames = 8;
  std::size_t height = 16;
  std::size_t width = 16;
  std::size_t channels = 1;
  double square = 4.0;  // side of the square in pixels
  double noise = 0.0;   // additive uniform noise amplitude, in [0, 0.5)
  double speed = 1.0;   // pixels per frame
};

/// The four motion classes of the action task.
enum class Motion : int { move_right = 0, move_down = 1, grow = 2, shrink = 3 };
inline constexpr int kMotionClasses = 4;
std::string motion_name(int class_id);

/// Number of distinct object intensities; object identities are drawn from
/// [0, kIntensityLevels) and double as track ids.
inline constexpr int kIntensityLevels = 8;
double intensity_level(int identity);

/// A bright square on a dark background performing one motion class.
VideoClip gen_action_clip(int class_id, const ClipSpec& spec, std::uint64_t seed);

/// `n_objects` distinct-intensity squares moving at constant velocity and
/// reflecting off the borders, with their exact boxes as ground truth.
VideoClip gen_tracking_clip(int n_objects, const ClipSpec& spec, std::uint64_t seed);

/// Appends `clips` to a binary stream of STVC records.
void write_clips(std::ostream& out, const std::vector<VideoClip>& clips);
std::vector<VideoClip> read_clips(std::istream& in);

void save_clips(const std::string& path, const std::vector<VideoClip>& clips);
std::vector<VideoClip> load_clips(const std::string& path);

}  // namespace stv
