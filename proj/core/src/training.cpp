// Copyright 2026 The AAD-DCE Authors
// SPDX-License-Identifier: Apache-2.0

#include "aad/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "aad/batch.hpp"
#include "aad/error.hpp"
#include "aad/ops.hpp"
#include "aad/rng.hpp"

namespace aad::train {

std::string_view to_string(AdcMode m) { return m == AdcMode::real ? "real" : "mean_fill"; }

AdcMode adc_mode_from_string(std::string_view s) {
  if (s == "real") return AdcMode::real;
  if (s == "mean_fill") return AdcMode::mean_fill;
  throw Error(ErrorCode::InvalidConfig, "unknown adc mode '" + std::string(s) + "'");
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, "train: " + what); };
  if (!(lr > 0) || !std::isfinite(lr)) fail("lr must be > 0");
  if (!(beta1 >= 0 && beta1 < beta2 && beta2 < 1)) fail("need 0 <= beta1 < beta2 < 1");
  if (!(lambda_l1 >= 0) || !std::isfinite(lambda_l1)) fail("lambda_l1 must be >= 0");
  if (epochs < 1) fail("epochs must be >= 1");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (infer_refinements < 0) fail("infer_refinements must be >= 0");
  generator.validate();
  ad.validate();
  if (generator.in_channels != 3) fail("generator.in_channels must be 3 (T2W, ADC, T1-pre)");
  if (generator.out_channels != 1) fail("generator.out_channels must be 1");
  if (ad.in_channels != generator.out_channels) fail("ad.in_channels must equal generator.out_channels");
}

void TrainConfig::check_geometry(const data::Geometry& g) const {
  try {
    generator.check_geometry(g.h, g.w);
    ad.check_input(g.h, g.w);
    ad.check_input(g.roi_h, g.roi_w);
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigGeometryMismatch, std::string(e.what()));
  }
}

nlohmann::json to_json(const TrainConfig& cfg) {
  return {{"target_phase", std::string(data::to_string(cfg.target_phase))},
          {"lr", cfg.lr},
          {"beta1", cfg.beta1},
          {"beta2", cfg.beta2},
          {"epochs", cfg.epochs},
          {"batch_size", cfg.batch_size},
          {"lambda_l1", cfg.lambda_l1},
          {"ensemble", std::string(agg::to_string(cfg.ensemble))},
          {"seed", cfg.seed},
          {"generator", gen::to_json(cfg.generator)},
          {"ad", ad::to_json(cfg.ad)},
          {"infer_refinements", cfg.infer_refinements},
          {"adc", std::string(to_string(cfg.adc))},
          {"shuffle", cfg.shuffle}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    if (j.contains("target_phase")) c.target_phase = data::phase_from_string(j.at("target_phase").get<std::string>());
    c.lr = j.value("lr", c.lr);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lambda_l1 = j.value("lambda_l1", c.lambda_l1);
    if (j.contains("ensemble")) c.ensemble = agg::ensemble_from_string(j.at("ensemble").get<std::string>());
    c.seed = j.value("seed", c.seed);
    if (j.contains("generator")) c.generator = gen::generator_config_from_json(j.at("generator"));
    if (j.contains("ad")) c.ad = ad::ad_config_from_json(j.at("ad"));
    c.infer_refinements = j.value("infer_refinements", c.infer_refinements);
    if (j.contains("adc")) c.adc = adc_mode_from_string(j.at("adc").get<std::string>());
    c.shuffle = j.value("shuffle", c.shuffle);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

TrainState TrainState::initialize(const TrainConfig& cfg) {
  cfg.validate();
  TrainState s;
  s.gen = gen::build_generator(cfg.generator, mix_seed(cfg.seed, 10));
  s.aad = agg::build_aad(cfg.ad, mix_seed(cfg.seed, 11));
  s.gen_opt = nn::AdamState::for_params(s.gen);
  s.aad_opt = nn::AdamState::for_params(s.aad.params);
  return s;
}

data::ImageTensor rhp_infuse(const data::ImageTensor& x, const ad::AttentionMap& m) {
  if (x.height != m.height || x.width != m.width) {
    throw Error(ErrorCode::ShapeMismatch, "rhp_infuse: image " + std::to_string(x.height) + "x" +
                                              std::to_string(x.width) + " vs map " + std::to_string(m.height) + "x" +
                                              std::to_string(m.width));
  }
  data::ImageTensor out = x;
  const std::size_t plane = x.plane();
  for (int c = 0; c < x.channels; ++c) {
    for (std::size_t i = 0; i < plane; ++i) out.values[c * plane + i] = (m.values[i] + 1.0f) * x.values[c * plane + i];
  }
  return out;
}

namespace {

double clamp_score(double s) { return std::clamp(s, kScoreClamp, 1.0 - kScoreClamp); }

double mean_of(std::span<const double> v, auto f) {
  if (v.empty()) throw Error(ErrorCode::ShapeMismatch, "empty score batch");
  double s = 0.0;
  for (double x : v) s += f(clamp_score(x));
  return s / static_cast<double>(v.size());
}

}  // namespace

double d_loss(std::span<const double> scores_real, std::span<const double> scores_fake) {
  return -mean_of(scores_real, [](double s) { return std::log(s); }) -
         mean_of(scores_fake, [](double s) { return std::log1p(-s); });
}

GLoss g_loss(std::span<const double> scores_fake, std::span<const data::ImageTensor> y_hat,
             std::span<const data::ImageTensor> y, double lambda_l1) {
  if (y_hat.size() != y.size() || y.empty()) throw Error(ErrorCode::ShapeMismatch, "g_loss: batch sizes differ");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t n = 0; n < y.size(); ++n) {
    if (y[n].values.size() != y_hat[n].values.size() || y[n].channels != y_hat[n].channels ||
        y[n].height != y_hat[n].height) {
      throw Error(ErrorCode::ShapeMismatch, "g_loss: y and y_hat shapes differ");
    }
    for (std::size_t i = 0; i < y[n].values.size(); ++i) {
      sum += std::abs(static_cast<double>(y[n].values[i]) - y_hat[n].values[i]);
    }
    count += y[n].values.size();
  }
  GLoss l;
  l.adv = -mean_of(scores_fake, [](double s) { return std::log(s); });
  l.l1 = sum / static_cast<double>(count);
  l.total = l.adv + lambda_l1 * l.l1;
  return l;
}

data::ImageTensor prepare_input(const data::ImageTensor& x, const TrainConfig& cfg) {
  if (x.channels != cfg.generator.in_channels) {
    throw Error(ErrorCode::ShapeMismatch, "input has " + std::to_string(x.channels) + " channels, generator expects " +
                                              std::to_string(cfg.generator.in_channels));
  }
  return cfg.adc == AdcMode::mean_fill ? data::mean_fill_channel(x, data::kADC) : x;
}

template <typename T>
DLossVars d_loss_graph(nn::Graph<T>& g, const ad::AdConfig& cfg, const nn::ParamSet<T>& aad_params, nn::Var y_real,
                       nn::Var y_fake, std::span<const data::RoiRect> rois, bool trainable) {
  const T lo = static_cast<T>(kScoreClamp);
  const T hi = static_cast<T>(1.0 - kScoreClamp);
  DLossVars v;
  v.real = agg::aad_graph(g, cfg, aad_params, y_real, rois, trainable);
  v.fake = agg::aad_graph(g, cfg, aad_params, y_fake, rois, trainable);
  v.loss = nn::add(g, nn::scale(g, nn::mean_log_clamped(g, v.real.score, lo, hi), T(-1)),
                   nn::scale(g, nn::mean_log1m_clamped(g, v.fake.score, lo, hi), T(-1)));
  return v;
}

template <typename T>
GLossVars g_loss_graph(nn::Graph<T>& g, const ad::AdConfig& cfg, const nn::ParamSet<T>& aad_params, nn::Var y_hat,
                       nn::Var y, std::span<const data::RoiRect> rois, T lambda_l1, bool aad_trainable) {
  const T lo = static_cast<T>(kScoreClamp);
  const T hi = static_cast<T>(1.0 - kScoreClamp);
  GLossVars v;
  v.scored = agg::aad_graph(g, cfg, aad_params, y_hat, rois, aad_trainable);
  v.adv = nn::scale(g, nn::mean_log_clamped(g, v.scored.score, lo, hi), T(-1));
  v.l1 = nn::mean_abs_diff(g, y_hat, y);
  v.total = nn::add(g, v.adv, nn::scale(g, v.l1, lambda_l1));
  return v;
}

template DLossVars d_loss_graph<float>(nn::Graph<float>&, const ad::AdConfig&, const nn::ParamSet<float>&, nn::Var,
                                       nn::Var, std::span<const data::RoiRect>, bool);
template DLossVars d_loss_graph<double>(nn::Graph<double>&, const ad::AdConfig&, const nn::ParamSet<double>&,
                                        nn::Var, nn::Var, std::span<const data::RoiRect>, bool);
template GLossVars g_loss_graph<float>(nn::Graph<float>&, const ad::AdConfig&, const nn::ParamSet<float>&, nn::Var,
                                       nn::Var, std::span<const data::RoiRect>, float, bool);
template GLossVars g_loss_graph<double>(nn::Graph<double>&, const ad::AdConfig&, const nn::ParamSet<double>&,
                                        nn::Var, nn::Var, std::span<const data::RoiRect>, double, bool);

StepStats train_step(TrainState& state, std::span<const data::MultimodalSample* const> batch, const TrainConfig& cfg) {
  if (batch.empty()) throw Error(ErrorCode::ShapeMismatch, "train_step: empty batch");
  const int H = batch[0]->x.height;
  const int W = batch[0]->x.width;
  const int N = static_cast<int>(batch.size());

  std::vector<data::ImageTensor> inputs;
  std::vector<const data::ImageTensor*> targets;
  std::vector<data::RoiRect> rois;
  inputs.reserve(N);
  for (const data::MultimodalSample* s : batch) {
    if (s->x.height != H || s->x.width != W) throw Error(ErrorCode::ShapeMismatch, "train_step: mixed geometry");
    const auto hit = state.cache.find(s->id);
    const data::ImageTensor x = prepare_input(s->x, cfg);
    inputs.push_back(hit == state.cache.end() ? x : rhp_infuse(x, hit->second));
    targets.push_back(&s->target(cfg.target_phase));
    rois.push_back(s->roi);
  }
  std::vector<const data::ImageTensor*> input_ptrs;
  for (const auto& x : inputs) input_ptrs.push_back(&x);
  const nn::Tensor<float> y_batch = to_batch(targets);
  const std::span<const data::RoiRect> roi_span(rois);

  nn::Graph<float> gg;
  const nn::Var y_hat = gen::generator_graph(gg, cfg.generator, state.gen, gg.constant(to_batch(input_ptrs)), true);
  const nn::Tensor<float>& y_hat_value = gg.value(y_hat);
  if (y_hat_value.shape() != y_batch.shape()) {
    throw Error(ErrorCode::ShapeMismatch, "generator output " + nn::shape_string(y_hat_value.shape()) +
                                              " vs target " + nn::shape_string(y_batch.shape()));
  }

  StepStats st;
  st.step = state.step;

  {
    nn::Graph<float> gd;
    const DLossVars dl = d_loss_graph(gd, cfg.ad, state.aad.params, gd.constant(y_batch), gd.constant(y_hat_value),
                                      roi_span, true);
    const nn::Var loss = dl.loss;
    st.d_loss = gd.value(loss)[0];
    if (!std::isfinite(st.d_loss)) {
      throw Error(ErrorCode::NonFiniteLoss, "d_loss = " + std::to_string(st.d_loss) + " at step " +
                                                std::to_string(state.step));
    }
    gd.backward(loss);
    const nn::ParamSet<float> grads = gd.param_grads(state.aad.params);

    double mx_sum = 0.0;
    for (int n = 0; n < N; ++n) {
      const ad::AttentionMap mg = agg::mean_attention(from_batch(gd.value(dl.fake.att_global), n));
      const ad::AttentionMap ml = agg::mean_attention(from_batch(gd.value(dl.fake.att_local), n));
      ad::AttentionMap mx = agg::aggregate_attention(mg, ml, rois[n], H, W, cfg.ensemble);
      mx_sum += mx.mean();
      state.cache[batch[n]->id] = std::move(mx);
    }
    st.mean_mx = mx_sum / N;

    nn::adam_step(state.aad.params, grads, state.aad_opt, {cfg.lr, cfg.beta1, cfg.beta2});
  }

  const float lambda = static_cast<float>(cfg.lambda_l1);
  const GLossVars gl = g_loss_graph(gg, cfg.ad, state.aad.params, y_hat, gg.constant(y_batch), roi_span, lambda, false);
  const nn::Var total = gl.total;
  const float adv_v = gg.value(gl.adv)[0];
  const float l1_v = gg.value(gl.l1)[0];
  const float total_v = gg.value(total)[0];
  if (!std::isfinite(total_v) || !std::isfinite(adv_v) || !std::isfinite(l1_v)) {
    throw Error(ErrorCode::NonFiniteLoss, "g_loss = " + std::to_string(total_v) + " (adv " + std::to_string(adv_v) +
                                              ", l1 " + std::to_string(l1_v) + ") at step " +
                                              std::to_string(state.step));
  }
  if (total_v != adv_v + lambda * l1_v) {
    throw std::logic_error("g_loss total differs from adv + lambda * l1");
  }
  gg.backward(total);
  nn::adam_step(state.gen, gg.param_grads(state.gen), state.gen_opt, {cfg.lr, cfg.beta1, cfg.beta2});

  st.g_adv = adv_v;
  st.g_l1 = l1_v;
  st.g_total = total_v;
  ++state.step;
  return st;
}

std::string format_stats_line(const StepStats& s) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%lld\t%.9g\t%.9g\t%.9g\t%.9g", static_cast<long long>(s.step), s.d_loss, s.g_adv,
                s.g_l1, s.mean_mx);
  return buf;
}

namespace {

struct EpochAccum {
  int epoch = 0;
  std::int64_t n = 0;
  double d_loss = 0, g_adv = 0, g_l1 = 0, mean_mx = 0;

  void add(const StepStats& s) {
    ++n;
    d_loss += s.d_loss;
    g_adv += s.g_adv;
    g_l1 += s.g_l1;
    mean_mx += s.mean_mx;
  }
  nlohmann::json sums() const {
    return {{"epoch", epoch}, {"n", n}, {"d_loss", d_loss}, {"g_adv", g_adv}, {"g_l1", g_l1}, {"mean_mx", mean_mx}};
  }
  nlohmann::json means() const {
    const double k = n > 0 ? static_cast<double>(n) : 1.0;
    return {{"epoch", epoch}, {"steps", n},          {"d_loss", d_loss / k},
            {"g_adv", g_adv / k}, {"g_l1", g_l1 / k}, {"mean_mx", mean_mx / k}};
  }
  static EpochAccum from_sums(const nlohmann::json& j) {
    EpochAccum a;
    a.epoch = j.at("epoch").get<int>();
    a.n = j.at("n").get<std::int64_t>();
    a.d_loss = j.at("d_loss").get<double>();
    a.g_adv = j.at("g_adv").get<double>();
    a.g_l1 = j.at("g_l1").get<double>();
    a.mean_mx = j.at("mean_mx").get<double>();
    return a;
  }
};

data::Geometry dataset_geometry(const std::vector<data::MultimodalSample>& dataset) {
  const auto& s0 = dataset.front();
  data::Geometry g{s0.x.height, s0.x.width, s0.roi.height, s0.roi.width};
  for (const auto& s : dataset) {
    if (s.x.height != g.h || s.x.width != g.w || s.roi.height != g.roi_h || s.roi.width != g.roi_w) {
      throw Error(ErrorCode::ConfigGeometryMismatch, "sample " + s.id + " differs in geometry from " + s0.id);
    }
  }
  return g;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const std::vector<data::MultimodalSample>& dataset,
                  const TrainOptions& options) {
  cfg.validate();
  if (dataset.empty()) throw Error(ErrorCode::EmptyDataset, "train: no samples");
  cfg.check_geometry(dataset_geometry(dataset));

  std::map<std::string, const data::MultimodalSample*, std::less<>> by_id;
  std::vector<std::string> ids;
  for (const auto& s : dataset) {
    if (!by_id.emplace(s.id, &s).second) throw Error(ErrorCode::InvalidConfig, "duplicate sample id " + s.id);
    ids.push_back(s.id);
  }

  TrainResult result;
  Checkpoint& ck = result.checkpoint;
  ck.config = cfg;
  nlohmann::json history = nlohmann::json::array();
  EpochAccum accum;
  if (options.resume) {
    if (to_json(options.resume->config) != to_json(cfg)) {
      throw Error(ErrorCode::InvalidConfig, "resume checkpoint was trained with a different config");
    }
    ck.state = options.resume->state;
    const nlohmann::json& m = options.resume->metrics;
    if (m.contains("epochs")) history = m.at("epochs");
    if (m.contains("partial")) accum = EpochAccum::from_sums(m.at("partial"));
  } else {
    ck.state = TrainState::initialize(cfg);
  }
  TrainState& state = ck.state;

  const std::int64_t per_epoch = (static_cast<std::int64_t>(ids.size()) + cfg.batch_size - 1) / cfg.batch_size;
  const std::uint64_t batch_seed = mix_seed(cfg.seed, 20);

  std::ofstream log;
  if (!options.out_dir.empty()) {
    std::filesystem::create_directories(options.out_dir);
    const auto log_path = options.out_dir / "stats.log";
    const bool fresh = !options.resume || !std::filesystem::exists(log_path);
    log.open(log_path, fresh ? std::ios::trunc : std::ios::app);
    if (!log) throw Error(ErrorCode::IoFailure, "cannot open " + log_path.string());
    if (fresh) log << "# config " << to_json(cfg).dump() << "\n# step\td_loss\tg_adv\tg_l1\tmean_mx\n";
  }

  auto snapshot = [&] {
    ck.metrics = {{"steps", state.step}, {"epochs", history}, {"partial", accum.sums()}};
  };
  auto save = [&](const std::string& name) {
    if (options.out_dir.empty()) return;
    snapshot();
    save_checkpoint(ck, options.out_dir / name);
  };

  bool stopped = false;
  for (auto epoch = static_cast<int>(state.step / per_epoch); epoch < cfg.epochs && !stopped; ++epoch) {
    const auto batches = data::make_batches(ids, cfg.batch_size, batch_seed, epoch, cfg.shuffle);
    if (accum.epoch != epoch) accum = EpochAccum{epoch};
    for (auto b = static_cast<std::size_t>(state.step % per_epoch); b < batches.size(); ++b) {
      if (options.max_steps >= 0 && state.step >= options.max_steps) {
        stopped = true;
        break;
      }
      std::vector<const data::MultimodalSample*> members;
      for (const auto& id : batches[b]) members.push_back(by_id.at(id));
      const StepStats st = train_step(state, members, cfg);
      accum.add(st);
      result.stats.push_back(st);
      if (log) log << format_stats_line(st) << '\n';
      if (options.on_step) options.on_step(st);
    }
    if (stopped) break;
    history.push_back(accum.means());
    accum = EpochAccum{epoch + 1};
    if (options.checkpoint_every > 0 && (epoch + 1) % options.checkpoint_every == 0 && epoch + 1 < cfg.epochs) {
      char name[48];
      std::snprintf(name, sizeof name, "checkpoint_epoch%04d.aadc", epoch + 1);
      save(name);
    }
  }
  snapshot();
  save("checkpoint.aadc");
  return result;
}

InferResult infer(const Checkpoint& ckpt, const data::ImageTensor& x, const data::RoiRect& roi, int k,
                  const InferOptions& options) {
  if (k < 0) throw Error(ErrorCode::InvalidConfig, "k must be >= 0");
  const TrainConfig& cfg = ckpt.config;
  if (!roi.inside(x.height, x.width)) {
    throw Error(ErrorCode::RoiOutOfBounds, "roi " + roi.str() + " outside " + std::to_string(x.height) + "x" +
                                               std::to_string(x.width));
  }
  const data::ImageTensor input = prepare_input(x, cfg);
  InferResult r;
  r.m_x = ad::AttentionMap(x.height, x.width);
  r.prediction = gen::generator_forward(cfg.generator, ckpt.state.gen, input);
  for (int t = 1; t <= k; ++t) {
    if (options.zero_attention) {
      r.m_x = ad::AttentionMap(x.height, x.width);
    } else {
      const agg::AadOutput o = agg::aad_forward(ckpt.state.aad, r.prediction, roi);
      r.m_x = agg::aggregate_attention(o.m_global, o.m_local, roi, x.height, x.width, cfg.ensemble);
    }
    r.prediction = gen::generator_forward(cfg.generator, ckpt.state.gen, rhp_infuse(input, r.m_x));
  }
  return r;
}

}  // namespace aad::train
