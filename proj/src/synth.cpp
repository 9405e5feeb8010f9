#include "stv/synth.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <numeric>

#include "stv/binary_io.hpp"
#include "stv/rng.hpp"

namespace stv {

namespace {

constexpr char kClipMagic[4] = {'S', 'T', 'V', 'C'};
constexpr std::uint16_t kClipVersion = 1;

enum SectionTag : std::uint8_t { kEnd = 0x00, kLabel = 0x01, kTracks = 0x02, kSeed = 0x03 };

double overlap(double a0, double a1, double b0, double b1) { return std::max(0.0, std::min(a1, b1) - std::max(a0, b0)); }

// Composites an axis-aligned rectangle over the frame with per-pixel area
// coverage, so sub-pixel positions render exactly.
void paint_rect(Tensor<float>& frames, std::size_t t, double x0, double y0, double w, double h, double value) {
  const std::size_t H = frames.dim(1), W = frames.dim(2), C = frames.dim(3);
  const std::size_t ylo = static_cast<std::size_t>(std::max(0.0, std::floor(y0)));
  const std::size_t yhi = std::min(H, static_cast<std::size_t>(std::max(0.0, std::ceil(y0 + h))));
  const std::size_t xlo = static_cast<std::size_t>(std::max(0.0, std::floor(x0)));
  const std::size_t xhi = std::min(W, static_cast<std::size_t>(std::max(0.0, std::ceil(x0 + w))));
  for (std::size_t y = ylo; y < yhi; ++y) {
    const double cy = overlap(double(y), double(y) + 1, y0, y0 + h);
    for (std::size_t x = xlo; x < xhi; ++x) {
      const double cov = cy * overlap(double(x), double(x) + 1, x0, x0 + w);
      if (cov <= 0) continue;
      for (std::size_t c = 0; c < C; ++c) {
        float& px = frames[((t * H + y) * W + x) * C + c];
        px = static_cast<float>(px * (1.0 - cov) + value * cov);
      }
    }
  }
}

void add_noise(Tensor<float>& frames, double level, Xorshift64Star& rng) {
  if (level <= 0) return;
  for (auto& v : frames.data()) v = static_cast<float>(std::clamp(v + rng.uniform(-level, level), 0.0, 1.0));
}

void check_spec(const ClipSpec& spec) {
  if (spec.frames == 0 || spec.height == 0 || spec.width == 0 || spec.channels == 0) {
    throw Error("bad_argument", "clip dimensions must be >= 1");
  }
  if (!(spec.noise >= 0 && spec.noise < 0.5)) throw Error("bad_argument", "noise level must be in [0, 0.5)");
  if (!(spec.square > 0) || spec.square * 1.5 > double(std::min(spec.height, spec.width))) {
    throw Error("bad_argument", "square side does not fit the frame");
  }
}

}  // namespace

std::string motion_name(int class_id) {
  static const std::array<const char*, kMotionClasses> names = {"move-right", "move-down", "grow", "shrink"};
  if (class_id < 0 || class_id >= kMotionClasses) throw Error("bad_argument", "invalid class id");
  return names[static_cast<std::size_t>(class_id)];
}

double intensity_level(int identity) { return 0.3 + 0.1 * identity; }

VideoClip gen_action_clip(int class_id, const ClipSpec& spec, std::uint64_t seed) {
  if (class_id < 0 || class_id >= kMotionClasses) {
    throw Error("bad_argument", "invalid class id " + std::to_string(class_id));
  }
  check_spec(spec);
  Xorshift64Star rng(seed);
  const double H = double(spec.height), W = double(spec.width), s = spec.square;
  const double steps = double(spec.frames > 1 ? spec.frames - 1 : 1);
  const double intensity = rng.uniform(0.8, 1.0);
  VideoClip clip{Tensor<float>(Shape{spec.frames, spec.height, spec.width, spec.channels}), class_id, std::nullopt, seed};

  const auto motion = static_cast<Motion>(class_id);
  if (motion == Motion::move_right || motion == Motion::move_down) {
    const double along = motion == Motion::move_right ? W : H;
    const double across = motion == Motion::move_right ? H : W;
    double v = spec.speed * rng.uniform(0.75, 1.25);
    if (s + v * steps > along) v = (along - s) / steps;
    const double start = rng.uniform(0, along - s - v * steps);
    const double lateral = rng.uniform(0, across - s);
    for (std::size_t t = 0; t < spec.frames; ++t) {
      const double pos = start + v * double(t);
      if (motion == Motion::move_right) {
        paint_rect(clip.frames, t, pos, lateral, s, s, intensity);
      } else {
        paint_rect(clip.frames, t, lateral, pos, s, s, intensity);
      }
    }
  } else {
    const double small = 0.5 * s, large = 1.5 * s;
    const double cx = rng.uniform(large / 2, W - large / 2);
    const double cy = rng.uniform(large / 2, H - large / 2);
    for (std::size_t t = 0; t < spec.frames; ++t) {
      const double f = spec.frames > 1 ? double(t) / steps : 0.0;
      const double side = motion == Motion::grow ? small + (large - small) * f : large - (large - small) * f;
      paint_rect(clip.frames, t, cx - side / 2, cy - side / 2, side, side, intensity);
    }
  }
  add_noise(clip.frames, spec.noise, rng);
  return clip;
}

VideoClip gen_tracking_clip(int n_objects, const ClipSpec& spec, std::uint64_t seed) {
  if (n_objects < 1 || n_objects > kIntensityLevels) {
    throw Error("bad_argument", "n_objects must be in 1.." + std::to_string(kIntensityLevels));
  }
  check_spec(spec);
  Xorshift64Star rng(seed);
  const double H = double(spec.height), W = double(spec.width), s = spec.square;

  std::array<int, kIntensityLevels> ids;
  std::iota(ids.begin(), ids.end(), 0);
  for (int i = kIntensityLevels - 1; i > 0; --i) {
    std::swap(ids[static_cast<std::size_t>(i)], ids[rng.below(static_cast<std::uint64_t>(i + 1))]);
  }

  struct Mover {
    int id;
    double x, y, vx, vy;
  };
  std::vector<Mover> movers;
  for (int k = 0; k < n_objects; ++k) {
    Mover m{ids[static_cast<std::size_t>(k)], rng.uniform(0, W - s), rng.uniform(0, H - s), 0, 0};
    m.vx = rng.uniform(-spec.speed, spec.speed);
    m.vy = rng.uniform(-spec.speed, spec.speed);
    movers.push_back(m);
  }

  auto reflect = [](double& p, double& v, double limit) {
    if (p < 0) {
      p = -p;
      v = -v;
    } else if (p > limit) {
      p = 2 * limit - p;
      v = -v;
    }
    p = std::clamp(p, 0.0, limit);
  };

  VideoClip clip{Tensor<float>(Shape{spec.frames, spec.height, spec.width, spec.channels}), std::nullopt, TrackSet{},
                 seed};
  for (std::size_t t = 0; t < spec.frames; ++t) {
    for (auto& m : movers) {
      if (t > 0) {
        m.x += m.vx;
        m.y += m.vy;
        reflect(m.x, m.vx, W - s);
        reflect(m.y, m.vy, H - s);
      }
      paint_rect(clip.frames, t, m.x, m.y, s, s, intensity_level(m.id));
      clip.tracks->add(m.id, static_cast<int>(t), Box{(m.x + s / 2) / W, (m.y + s / 2) / H, s / W, s / H});
    }
  }
  add_noise(clip.frames, spec.noise, rng);
  return clip;
}

void write_clips(std::ostream& out, const std::vector<VideoClip>& clips) {
  ByteWriter w(out);
  for (const auto& clip : clips) {
    w.bytes(std::string(kClipMagic, 4));
    w.u16(kClipVersion);
    for (std::size_t axis = 0; axis < 4; ++axis) w.u32(static_cast<std::uint32_t>(clip.frames.dim(axis)));
    for (float v : clip.frames.data()) w.f32(v);
    w.u8(kSeed);
    w.u64(clip.seed);
    if (clip.label) {
      w.u8(kLabel);
      w.u32(static_cast<std::uint32_t>(*clip.label));
    }
    if (clip.tracks) {
      w.u8(kTracks);
      w.u32(static_cast<std::uint32_t>(clip.tracks->tracks().size()));
      for (const auto& [id, entries] : clip.tracks->tracks()) {
        w.u32(static_cast<std::uint32_t>(id));
        w.u32(static_cast<std::uint32_t>(entries.size()));
        for (const auto& e : entries) {
          w.u32(static_cast<std::uint32_t>(e.frame));
          w.f32(static_cast<float>(e.box.cx));
          w.f32(static_cast<float>(e.box.cy));
          w.f32(static_cast<float>(e.box.w));
          w.f32(static_cast<float>(e.box.h));
          w.f32(static_cast<float>(e.confidence));
        }
      }
    }
    w.u8(kEnd);
  }
}

std::vector<VideoClip> read_clips(std::istream& in) {
  ByteReader r(in);
  std::vector<VideoClip> clips;
  while (!r.at_end()) {
    r.section("magic");
    if (r.bytes(4) != std::string(kClipMagic, 4)) throw Error("bad_magic", "not an STVC clip record");
    r.section("version");
    const std::uint16_t version = r.u16();
    if (version != kClipVersion) {
      throw Error("version_mismatch", "clip version " + std::to_string(version) + ", expected " +
                                          std::to_string(kClipVersion));
    }
    r.section("dimensions");
    Shape shape(4);
    for (auto& d : shape) d = r.u32();
    if (shape_numel(shape) == 0 || shape_numel(shape) > (1u << 28)) throw Error("corrupt", "implausible clip dimensions");
    r.section("pixels");
    std::vector<float> pixels(shape_numel(shape));
    for (auto& v : pixels) v = r.f32();
    VideoClip clip{Tensor<float>(shape, std::move(pixels)), std::nullopt, std::nullopt, 0};
    for (;;) {
      r.section("section tag");
      const std::uint8_t tag = r.u8();
      if (tag == kEnd) break;
      if (tag == kSeed) {
        r.section("seed");
        clip.seed = r.u64();
      } else if (tag == kLabel) {
        r.section("label");
        clip.label = static_cast<int>(r.u32());
      } else if (tag == kTracks) {
        r.section("tracks");
        TrackSet tracks;
        const std::uint32_t count = r.u32();
        for (std::uint32_t k = 0; k < count; ++k) {
          const int id = static_cast<int>(r.u32());
          const std::uint32_t entries = r.u32();
          for (std::uint32_t e = 0; e < entries; ++e) {
            TrackEntry entry;
            entry.frame = static_cast<int>(r.u32());
            entry.box.cx = r.f32();
            entry.box.cy = r.f32();
            entry.box.w = r.f32();
            entry.box.h = r.f32();
            entry.confidence = r.f32();
            tracks.add(id, entry);
          }
        }
        clip.tracks = std::move(tracks);
      } else {
        throw Error("corrupt", "unknown clip section tag " + std::to_string(tag));
      }
    }
    clips.push_back(std::move(clip));
  }
  return clips;
}

void save_clips(const std::string& path, const std::vector<VideoClip>& clips) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io", "cannot write " + path);
  write_clips(out, clips);
}

std::vector<VideoClip> load_clips(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot read " + path);
  return read_clips(in);
}

}  // namespace stv
