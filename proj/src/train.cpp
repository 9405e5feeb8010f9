#include "stv/train.hpp"

#include <charconv>
#include <cmath>
#include <numeric>
#include <ostream>

#include "stv/rng.hpp"
#include "stv/worker_pool.hpp"

namespace stv {

namespace {

constexpr std::uint64_t kShuffleStream = 1ULL << 41;

}  // namespace

std::vector<VideoClip> generate_clips(Task task, std::size_t count, const ClipSpec& spec, int objects,
                                      std::size_t classes, std::uint64_t seed, WorkerPool* pool) {
  std::vector<VideoClip> clips(count);
  parallel_for(pool, count, [&](std::size_t i) {
    const std::uint64_t s = derive_seed(seed, i);
    clips[i] = task == Task::action ? gen_action_clip(static_cast<int>(i % classes), spec, s)
                                    : gen_tracking_clip(objects, spec, s);
  });
  return clips;
}

Dataset make_dataset(const RunConfig& config, WorkerPool* pool) {
  auto clips = generate_clips(config.model.task, config.data.clips, config.clip_spec(), config.data.objects,
                              config.model.classes, config.seed, pool);
  Dataset d;
  for (std::size_t i = 0; i < clips.size(); ++i) (i % 5 == 4 ? d.val : d.train).push_back(std::move(clips[i]));
  return d;
}

Evaluation evaluate(const RunConfig& config, const ParamMap<float>& params, const std::vector<VideoClip>& clips,
                    WorkerPool* pool) {
  const ModelSpec& spec = config.model;
  validate_params(spec, params);
  Evaluation out;
  out.clips = clips.size();
  if (clips.empty()) return out;
  std::vector<double> losses(clips.size());
  std::vector<int> predictions(clips.size()), labels(clips.size());
  std::vector<MotResult> mot(clips.size());
  parallel_for(pool, clips.size(), [&](std::size_t i) {
    const auto& clip = clips[i];
    const auto model = bind_model(spec, bind_params(params, false));
    const Tensor<float> frames = clip_frames<float>(clip);
    if (spec.task == Task::action) {
      if (!clip.label) throw Error("bad_argument", "clip " + std::to_string(i) + " has no label");
      const auto logits = action_forward(spec, model, frames).logits;
      const auto& z = logits.value().data();
      predictions[i] = static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
      labels[i] = *clip.label;
      losses[i] = ad::cross_entropy(logits, static_cast<std::size_t>(*clip.label)).value().item();
    } else {
      if (!clip.tracks) throw Error("bad_argument", "clip " + std::to_string(i) + " has no ground truth tracks");
      losses[i] = clip_loss(spec, model, clip).value().item();
      mot[i] = clear_mot(*clip.tracks, track_clip(spec, params, clip, config.tracking.tracker),
                         config.tracking.eval_iou);
    }
  });
  out.loss = std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(clips.size());
  if (spec.task == Task::action) {
    out.top1 = top1_accuracy(predictions, labels);
  } else {
    out.mot = combine(mot);
  }
  return out;
}

TrainResult train(const RunConfig& config, std::ostream* log) {
  validate_config(config);
  const ModelSpec& spec = config.model;
  WorkerPool pool(config.threads);
  const Dataset data = make_dataset(config, &pool);
  if (data.train.empty()) throw Error("config", "no training clips; raise data.clips");

  TrainResult result;
  result.checkpoint.config = config;
  ParamMap<float>& params = result.checkpoint.params;
  params = init_params<float>(spec, derive_seed(config.seed, kInitStream));
  AdamState<float>& adam = result.checkpoint.optimizer;

  const std::size_t n = data.train.size();
  const std::size_t batch = config.optimizer.batch_size;
  std::vector<std::size_t> order(n);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = lr_schedule(config.optimizer.schedule, epoch);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Xorshift64Star rng(derive_seed(config.seed, kShuffleStream + static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    double epoch_loss = 0.0;
    for (std::size_t start = 0, b = 0; start < n; start += batch, ++b) {
      const auto where = [&] { return "epoch " + std::to_string(epoch) + " batch " + std::to_string(b); };
      const std::size_t size = std::min(batch, n - start);
      std::vector<ad::Gradients<float>> grads(size);
      std::vector<double> losses(size);
      try {
        pool.parallel_for(size, [&](std::size_t k) {
          const auto model = bind_model(spec, bind_params(params, true));
          const auto loss = clip_loss(spec, model, data.train[order[start + k]]);
          losses[k] = loss.value().item();
          if (std::isfinite(losses[k])) grads[k] = ad::backward(loss);
        });
      } catch (const Error& e) {
        // Diverged parameters surface as non-finite activations.
        if (e.code() == "non_finite") throw Error("non_finite_loss", "loss is not finite at " + where() + " (" + e.what() + ")");
        throw;
      }
      ParamMap<float> total;
      double batch_loss = 0.0;
      for (std::size_t k = 0; k < size; ++k) {
        if (!std::isfinite(losses[k])) {
          throw Error("non_finite_loss", "loss is not finite at " + where());
        }
        batch_loss += losses[k];
        for (auto& [name, g] : grads[k]) {
          auto [it, fresh] = total.try_emplace(name, std::move(g));
          if (!fresh)
            for (std::size_t i = 0; i < it->second.size(); ++i) it->second[i] += g[i];
        }
      }
      const float inv = 1.0f / static_cast<float>(size);
      for (auto& [name, g] : total)
        for (auto& v : g.data()) v *= inv;
      try {
        adam_step(params, total, adam, lr);
      } catch (const Error& e) {
        if (e.code() == "non_finite") throw Error("non_finite_loss", "gradient is not finite at " + where() + " (" + e.what() + ")");
        throw;
      }
      epoch_loss += batch_loss;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = epoch_loss / static_cast<double>(n);
    rec.val = evaluate(config, params, data.val, &pool);
    result.history.push_back(rec);
    if (log) {
      *log << "epoch " << epoch << " lr " << format_value(lr) << " train_loss " << format_value(rec.train_loss)
           << " val_loss " << format_value(rec.val.loss);
      if (spec.task == Task::action) {
        *log << " val_top1 " << format_value(rec.val.top1);
      } else {
        *log << " val_mota " << format_value(rec.val.mot.mota) << " val_motp " << format_value(rec.val.mot.motp);
      }
      *log << std::endl;
    }
  }
  result.checkpoint.epoch = static_cast<std::uint32_t>(config.epochs);
  return result;
}

GradcheckReport model_gradcheck(const RunConfig& config, std::uint64_t seed, double eps) {
  validate_config(config);
  const ModelSpec& spec = config.model;
  const auto point = init_params<double>(spec, derive_seed(seed, kInitStream));
  const std::uint64_t clip_seed = derive_seed(seed, 0);
  const VideoClip clip =
      spec.task == Task::action
          ? gen_action_clip(static_cast<int>(seed % spec.classes), config.clip_spec(), clip_seed)
          : gen_tracking_clip(config.data.objects, config.clip_spec(), clip_seed);
  ScalarFn<double> loss = [&](const VarMap<double>& vars) { return clip_loss(spec, bind_model(spec, vars), clip); };
  return gradcheck<double>(loss, point, eps);
}

std::map<std::string, double> group_errors(const GradcheckReport& report) {
  std::map<std::string, double> groups;
  for (const auto& [name, err] : report.per_param) {
    auto& g = groups[param_group(name)];
    g = std::max(g, err);
  }
  return groups;
}

std::string format_value(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_evaluation_csv(std::ostream& out, const RunConfig& config, const Evaluation& eval, bool header,
                          const std::string& prefix) {
  const std::string tail = "," + hash_hex(config_hash(config)) + "," + std::to_string(config.seed) + "\n";
  if (header) out << "metric,value,config_hash,seed\n";
  auto row = [&](const std::string& name, double v) { out << prefix << name << ',' << format_value(v) << tail; };
  row("val_loss", eval.loss);
  if (config.model.task == Task::action) {
    row("val_top1", eval.top1);
  } else {
    row("val_mota", eval.mot.mota);
    row("val_motp", eval.mot.motp);
    row("val_motp_defined", eval.mot.motp_defined ? 1.0 : 0.0);
    row("val_fp", static_cast<double>(eval.mot.fp));
    row("val_fn", static_cast<double>(eval.mot.fn));
    row("val_idsw", static_cast<double>(eval.mot.idsw));
    row("val_matches", static_cast<double>(eval.mot.matches));
    row("val_gt_boxes", static_cast<double>(eval.mot.gt_boxes));
  }
  row("val_clips", static_cast<double>(eval.clips));
}

void write_metrics_csv(std::ostream& out, const RunConfig& config, const std::vector<EpochRecord>& history) {
  const std::string tail = "," + hash_hex(config_hash(config)) + "," + std::to_string(config.seed) + "\n";
  out << "metric,value,config_hash,seed\n";
  for (const auto& rec : history) {
    const std::string p = "epoch" + std::to_string(rec.epoch) + ".";
    out << p << "lr," << format_value(rec.lr) << tail;
    out << p << "train_loss," << format_value(rec.train_loss) << tail;
    write_evaluation_csv(out, config, rec.val, false, p);
  }
  if (!history.empty()) write_evaluation_csv(out, config, history.back().val, false);
}

}  // namespace stv
