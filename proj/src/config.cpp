#include "stv/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace stv {

namespace pt = boost::property_tree;

ClipSpec RunConfig::clip_spec() const {
  ClipSpec c;
  c.frames = model.frames;
  c.height = model.height;
  c.width = model.width;
  c.channels = model.channels;
  c.square = data.square;
  c.noise = data.noise;
  c.speed = data.speed;
  return c;
}

RunConfig default_config(Task task) {
  RunConfig c;
  c.model.task = task;
  for (auto& l : c.model.layers) l.activation = Activation::silu;
  if (task == Task::tracking) {
    c.model.height = c.model.width = 32;
    c.model.features = 16;
    c.model.layers = {ConvLayerSpec{3, 2, 1, 8, Activation::silu}, ConvLayerSpec{3, 2, 1, 16, Activation::silu},
                      ConvLayerSpec{3, 1, 1, 16, Activation::silu}};
    c.optimizer.batch_size = 8;
    c.data.clips = 2000;
    c.checkpoint = "tracking.stvk";
    c.metrics = "tracking_metrics.csv";
  } else {
    c.data.clips = 8000;
    c.checkpoint = "action.stvk";
    c.metrics = "action_metrics.csv";
  }
  return c;
}

std::vector<ConvLayerSpec> parse_layers(const std::string& text) {
  std::vector<ConvLayerSpec> layers;
  std::stringstream all(text);
  std::string item;
  while (std::getline(all, item, ',')) {
    const auto first = item.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    item = item.substr(first, item.find_last_not_of(" \t") - first + 1);
    std::stringstream parts(item);
    std::string field;
    std::vector<std::string> f;
    while (std::getline(parts, field, ':')) f.push_back(field);
    if (f.size() != 5) throw Error("config", "layer '" + item + "' is not kernel:stride:padding:channels:activation");
    auto number = [&](const std::string& s) {
      std::size_t v = 0;
      const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || end != s.data() + s.size() || s.empty())
        throw Error("config", "layer '" + item + "' has a non-numeric field");
      return v;
    };
    ConvLayerSpec l;
    l.kernel = number(f[0]);
    l.stride = number(f[1]);
    l.padding = number(f[2]);
    l.channels = number(f[3]);
    l.activation = parse_activation(f[4]);
    layers.push_back(l);
  }
  if (layers.empty()) throw Error("config", "encoder needs at least one layer");
  return layers;
}

std::string format_layers(const std::vector<ConvLayerSpec>& layers) {
  std::string out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (i) out += ", ";
    out += std::to_string(l.kernel) + ":" + std::to_string(l.stride) + ":" + std::to_string(l.padding) + ":" +
           std::to_string(l.channels) + ":" + activation_name(l.activation);
  }
  return out;
}

namespace {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  auto res = std::from_chars(text.data(), end, value);
  if (res.ec != std::errc() || res.ptr != end) throw Error("config", "key '" + key + "' has invalid value '" + text + "'");
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw Error("config", "key '" + key + "' expects true or false, got '" + text + "'");
}

// One accessor pair per key, shared by the parser and the formatter.
struct Field {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
};

using Key = const std::string&;

template <typename T, typename Ref>
Field number_field(Ref ref) {
  return Field{[ref](const RunConfig& c) { return std::to_string(ref(c)); },
               [ref](RunConfig& c, Key key, Key v) { ref(c) = parse_number<T>(key, v); }};
}

template <typename Ref>
Field real_field(Ref ref) {
  return Field{[ref](const RunConfig& c) { return format_double(ref(c)); },
               [ref](RunConfig& c, Key key, Key v) { ref(c) = parse_number<double>(key, v); }};
}

template <typename Ref>
Field text_field(Ref ref) {
  return Field{[ref](const RunConfig& c) { return ref(c); }, [ref](RunConfig& c, Key, Key v) { ref(c) = v; }};
}

std::vector<std::pair<std::string, Field>> fields() {
  using C = RunConfig;
  using K = Key;
  auto size = [](auto ref) { return number_field<std::size_t>(ref); };
  auto integer = [](auto ref) { return number_field<int>(ref); };
  auto real = [](auto ref) { return real_field(ref); };
  auto text = [](auto ref) { return text_field(ref); };
  return {
      {"run.task", Field{[](const C& c) { return task_name(c.model.task); }, [](C&, K, K) {}}},
      {"run.seed", Field{[](const C& c) { return std::to_string(c.seed); },
                         [](C& c, K key, K v) { c.seed = parse_number<std::uint64_t>(key, v); }}},
      {"run.threads", size([](auto& c) -> auto& { return c.threads; })},
      {"run.epochs", integer([](auto& c) -> auto& { return c.epochs; })},
      {"run.checkpoint", text([](auto& c) -> auto& { return c.checkpoint; })},
      {"run.metrics", text([](auto& c) -> auto& { return c.metrics; })},
      {"model.frames", size([](auto& c) -> auto& { return c.model.frames; })},
      {"model.height", size([](auto& c) -> auto& { return c.model.height; })},
      {"model.width", size([](auto& c) -> auto& { return c.model.width; })},
      {"model.channels", size([](auto& c) -> auto& { return c.model.channels; })},
      {"model.features", size([](auto& c) -> auto& { return c.model.features; })},
      {"model.classes", size([](auto& c) -> auto& { return c.model.classes; })},
      {"model.embedding", size([](auto& c) -> auto& { return c.model.embedding; })},
      {"encoder.layers", Field{[](const C& c) { return format_layers(c.model.layers); },
                               [](C& c, K, K v) { c.model.layers = parse_layers(v); }}},
      {"temporal.mode", Field{[](const C& c) { return temporal_mode_name(c.model.temporal_mode); },
                              [](C& c, K, K v) { c.model.temporal_mode = parse_temporal_mode(v); }}},
      {"temporal.chunk", size([](auto& c) -> auto& { return c.model.chunk; })},
      {"attention.ablate", Field{[](const C& c) { return std::string(c.model.ablate_attention ? "true" : "false"); },
                                 [](C& c, K key, K v) { c.model.ablate_attention = parse_bool(key, v); }}},
      {"optimizer.learning_rate", real([](auto& c) -> auto& { return c.optimizer.schedule.initial; })},
      {"optimizer.decay_every", integer([](auto& c) -> auto& { return c.optimizer.schedule.every; })},
      {"optimizer.decay_factor", real([](auto& c) -> auto& { return c.optimizer.schedule.factor; })},
      {"optimizer.batch_size", size([](auto& c) -> auto& { return c.optimizer.batch_size; })},
      {"data.clips", size([](auto& c) -> auto& { return c.data.clips; })},
      {"data.noise", real([](auto& c) -> auto& { return c.data.noise; })},
      {"data.square", real([](auto& c) -> auto& { return c.data.square; })},
      {"data.speed", real([](auto& c) -> auto& { return c.data.speed; })},
      {"data.objects", integer([](auto& c) -> auto& { return c.data.objects; })},
      {"tracking.detect_threshold", real([](auto& c) -> auto& { return c.tracking.tracker.detect_threshold; })},
      {"tracking.iou_gate", real([](auto& c) -> auto& { return c.tracking.tracker.association.iou_gate; })},
      {"tracking.embedding_gate",
       real([](auto& c) -> auto& { return c.tracking.tracker.association.embedding_gate; })},
      {"tracking.lambda", real([](auto& c) -> auto& { return c.tracking.tracker.association.lambda; })},
      {"tracking.max_age", integer([](auto& c) -> auto& { return c.tracking.tracker.association.max_age; })},
      {"tracking.eval_iou", real([](auto& c) -> auto& { return c.tracking.eval_iou; })},
  };
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error("parse", std::string("config: ") + e.what());
  }
  Task task = Task::action;
  if (auto run = tree.get_child_optional("run")) {
    if (auto t = run->get_optional<std::string>("task")) task = parse_task(*t);
  }
  RunConfig config = default_config(task);
  const auto table = fields();
  std::map<std::string, const Field*> by_key;
  for (const auto& [key, field] : table) by_key[key] = &field;
  for (const auto& [section, keys] : tree) {
    if (keys.empty() && !keys.data().empty()) throw Error("config", "key '" + section + "' outside any section");
    for (const auto& [key, value] : keys) {
      const std::string full = section + "." + key;
      auto it = by_key.find(full);
      if (it == by_key.end()) throw Error("config", "unknown key '" + key + "' in section [" + section + "]");
      it->second->set(config, full, value.data());
    }
  }
  validate_config(config);
  return config;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string format_config(const RunConfig& config) {
  std::string out, section;
  for (const auto& [key, field] : fields()) {
    const auto dot = key.find('.');
    const std::string s = key.substr(0, dot);
    if (s != section) {
      if (!section.empty()) out += "\n";
      out += "[" + s + "]\n";
      section = s;
    }
    out += key.substr(dot + 1) + " = " + field.get(config) + "\n";
  }
  return out;
}

std::uint64_t config_hash(const RunConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : format_config(config)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t hash) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, hash >>= 4) s[static_cast<std::size_t>(i)] = digits[hash & 0xf];
  return s;
}

void validate_config(const RunConfig& c) {
  const auto& m = c.model;
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw Error("config", std::string(name) + " must be at least 1");
  };
  positive(m.frames, "model.frames");
  positive(m.height, "model.height");
  positive(m.width, "model.width");
  positive(m.channels, "model.channels");
  positive(m.features, "model.features");
  positive(m.classes, "model.classes");
  positive(m.embedding, "model.embedding");
  positive(c.optimizer.batch_size, "optimizer.batch_size");
  positive(c.threads, "run.threads");
  for (const auto& l : m.layers) {
    positive(l.kernel, "layer kernel");
    positive(l.stride, "layer stride");
    positive(l.channels, "layer channels");
  }
  try {
    (void)m.grid();
  } catch (const Error& e) {
    throw Error("config", std::string("encoder does not fit the frame: ") + e.what());
  }
  if (!(c.optimizer.schedule.initial > 0)) throw Error("config", "optimizer.learning_rate must be positive");
  if (!(c.optimizer.schedule.factor > 0 && c.optimizer.schedule.factor <= 1)) {
    throw Error("config", "optimizer.decay_factor must lie in (0,1]");
  }
  if (c.epochs < 0) throw Error("config", "run.epochs must be non-negative");
  if (!(c.data.noise >= 0 && c.data.noise < 0.5)) throw Error("config", "data.noise must lie in [0, 0.5)");
  if (m.task == Task::action && m.classes > static_cast<std::size_t>(kMotionClasses)) {
    throw Error("config", "model.classes exceeds the " + std::to_string(kMotionClasses) + " motion classes");
  }
  if (m.task == Task::tracking) {
    if (m.embedding < static_cast<std::size_t>(kIntensityLevels)) {
      throw Error("config", "model.embedding must be at least " + std::to_string(kIntensityLevels));
    }
    if (c.data.objects < 1 || c.data.objects > kIntensityLevels) {
      throw Error("config", "data.objects must lie in [1, " + std::to_string(kIntensityLevels) + "]");
    }
  }
  const double eval_iou = c.tracking.eval_iou;
  if (!(eval_iou > 0 && eval_iou < 1)) throw Error("config", "tracking.eval_iou must lie in (0,1)");
}

}  // namespace stv
