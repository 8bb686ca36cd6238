// Copyright 2026 The AAD-DCE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aad/adam.hpp"
#include "aad/aggregation.hpp"
#include "aad/attention_discriminator.hpp"
#include "aad/data.hpp"
#include "aad/generator.hpp"

namespace aad::train {

/// How the ADC input channel is presented to the generator.
enum class AdcMode { real, mean_fill };

std::string_view to_string(AdcMode m);
AdcMode adc_mode_from_string(std::string_view s);

struct TrainConfig {
  data::Phase target_phase = data::Phase::early;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  int epochs = 30;
  int batch_size = 4;
  double lambda_l1 = 10.0;
  agg::EnsembleMode ensemble = agg::EnsembleMode::embed;
  std::uint64_t seed = 0;
  gen::GeneratorConfig generator;
  ad::AdConfig ad;
  int infer_refinements = 1;
  AdcMode adc = AdcMode::real;
  bool shuffle = true;

  /// Throws InvalidConfig.
  void validate() const;
  /// Throws ConfigGeometryMismatch when the networks cannot consume this geometry.
  void check_geometry(const data::Geometry& g) const;

  bool operator==(const TrainConfig&) const = default;
};

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

/// Latest aggregated map per sample id. A missing entry means the zero map.
using AttentionCache = std::map<std::string, ad::AttentionMap>;

struct TrainState {
  gen::GeneratorParams gen;
  agg::AadModel aad;
  nn::AdamState gen_opt;
  nn::AdamState aad_opt;
  AttentionCache cache;
  std::int64_t step = 0;

  static TrainState initialize(const TrainConfig& cfg);
};

struct StepStats {
  std::int64_t step = 0;
  double d_loss = 0;
  double g_adv = 0;
  double g_l1 = 0;
  double g_total = 0;
  double mean_mx = 0;  // mean of the freshly aggregated maps
};

/// Scores are clamped to [kScoreClamp, 1 − kScoreClamp] before logs.
inline constexpr double kScoreClamp = 1e-7;

/// x'[c,i,j] = (m[i,j] + 1)·x[c,i,j].
data::ImageTensor rhp_infuse(const data::ImageTensor& x, const ad::AttentionMap& m);

/// −mean(log s_real) − mean(log(1 − s_fake)).
double d_loss(std::span<const double> scores_real, std::span<const double> scores_fake);

struct GLoss {
  double total = 0;
  double adv = 0;
  double l1 = 0;
};

/// adv = −mean(log s_fake) (non-saturating); l1 = mean |y − ŷ|; total = adv + λ·l1.
GLoss g_loss(std::span<const double> scores_fake, std::span<const data::ImageTensor> y_hat,
             std::span<const data::ImageTensor> y, double lambda_l1);

/// Graph form of d_loss over a real and a fake batch.
struct DLossVars {
  nn::Var loss;
  agg::AadVars real;
  agg::AadVars fake;
};

template <typename T>
DLossVars d_loss_graph(nn::Graph<T>& g, const ad::AdConfig& cfg, const nn::ParamSet<T>& aad_params, nn::Var y_real,
                       nn::Var y_fake, std::span<const data::RoiRect> rois, bool trainable);

/// Graph form of g_loss; the discriminator is evaluated with the given trainability.
struct GLossVars {
  nn::Var total;
  nn::Var adv;
  nn::Var l1;
  agg::AadVars scored;
};

template <typename T>
GLossVars g_loss_graph(nn::Graph<T>& g, const ad::AdConfig& cfg, const nn::ParamSet<T>& aad_params, nn::Var y_hat,
                       nn::Var y, std::span<const data::RoiRect> rois, T lambda_l1, bool aad_trainable);

/// Generator input for a sample under the config's ADC mode.
data::ImageTensor prepare_input(const data::ImageTensor& x, const TrainConfig& cfg);

/// One alternating update: D on real vs detached fake, cache refresh from the
/// fake pass, then G against the updated D. Throws NonFiniteLoss.
StepStats train_step(TrainState& state, std::span<const data::MultimodalSample* const> batch, const TrainConfig& cfg);

struct Checkpoint {
  TrainConfig config;
  TrainState state;
  nlohmann::json metrics = nlohmann::json::object();
};

// AADC container: "AADC", u32 version = 1, u32 length + canonical JSON header,
// u32 entry count, then (u32 name length, name, u32 ndim, u32 dims, f32
// payload) per entry; little-endian.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
/// Canonical JSON header written into the container.
nlohmann::json checkpoint_header(const Checkpoint& ckpt);

struct TrainOptions {
  std::filesystem::path out_dir;  // empty: nothing written
  int checkpoint_every = 0;       // epochs; 0 writes only the final checkpoint
  std::function<void(const StepStats&)> on_step;
  const Checkpoint* resume = nullptr;
  std::int64_t max_steps = -1;    // stop after this many total steps
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<StepStats> stats;
};

/// Runs epochs × batches train steps over the dataset.
TrainResult train(const TrainConfig& cfg, const std::vector<data::MultimodalSample>& dataset,
                  const TrainOptions& options = {});

/// "step d_loss g_adv g_l1 mean_mx", tab separated, fixed precision.
std::string format_stats_line(const StepStats& s);

struct InferOptions {
  bool zero_attention = false;  // force every discriminator map to zero
};

struct InferResult {
  data::ImageTensor prediction;
  ad::AttentionMap m_x;  // map used for the returned prediction
};

/// ŷ0 = G(x); for t = 1..k, M_x from the discriminator on ŷ_{t−1} and ŷ_t = G(rhp(x, M_x)).
InferResult infer(const Checkpoint& ckpt, const data::ImageTensor& x, const data::RoiRect& roi, int k,
                  const InferOptions& options = {});

}  // namespace aad::train
