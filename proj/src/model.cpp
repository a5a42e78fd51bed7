#include "hsmgnn/model.hpp"

#include <cmath>

#include "hsmgnn/error.hpp"
#include "hsmgnn/ops.hpp"
#include "hsmgnn/random.hpp"

namespace hsmgnn {

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::kComplete: return "complete";
    case Variant::kNoScs: return "no-scs";
    case Variant::kNoAdb: return "no-adb";
    case Variant::kNoFgcn: return "no-fgcn";
  }
  return "complete";
}

Variant parse_variant(std::string_view name) {
  for (Variant v : {Variant::kComplete, Variant::kNoScs, Variant::kNoAdb, Variant::kNoFgcn}) {
    if (variant_name(v) == name) return v;
  }
  throw ConfigError("unknown ablation variant '" + std::string(name) +
                    "' (expected complete, no-scs, no-adb or no-fgcn)");
}

void ModelConfig::validate() const {
  if (num_sensors == 0) throw ConfigError("num_sensors must be positive");
  if (channels == 0) throw ConfigError("channels must be positive");
  scs::validate(scs, series_length);
  if (memory_dim == 0 || ndv_hidden == 0) throw ConfigError("memory_dim and ndv_hidden must be positive");
  fusion::validate(fusion);
}

ModelConfig ablate(Variant variant, ModelConfig base) {
  base.variant = variant;
  return base;
}

namespace {

bool uses_spd(Variant v) { return v != Variant::kNoScs; }
bool uses_bank(Variant v) { return v == Variant::kComplete || v == Variant::kNoFgcn; }
bool uses_euclid(Variant v) { return v != Variant::kNoFgcn; }

Tensor init_uniform(Rng& rng, Shape shape, std::size_t fan_in) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> data(shape_numel(shape));
  for (double& v : data) v = rng.uniform(-bound, bound);
  return Tensor::from_data(std::move(shape), std::move(data));
}

void add_affine(ParameterSet& params, Rng& rng, const std::string& name, std::size_t in,
                std::size_t out) {
  params.add(name + ".weight", init_uniform(rng, {in, out}, in));
  params.add(name + ".bias", init_uniform(rng, {out}, in));
}

adb::Affine affine(const ParameterSet& params, const std::string& name) {
  return {params.at(name + ".weight"), params.at(name + ".bias")};
}

}  // namespace

HsmgnnModel::HsmgnnModel(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  Rng rng(seed);
  const auto& sc = config_.scs;
  const std::size_t n = config_.graph_nodes();
  const std::size_t blocks = scs::block_count(sc, config_.series_length);
  const std::size_t m = scs::window_count(sc);
  const std::size_t d = sc.feature_blocks;
  const std::size_t k = sc.kernel_size;
  const Variant v = config_.variant;
  const auto& fc = config_.fusion;

  params_.add("scs.conv1.weight", init_uniform(rng, {sc.cnn_hidden, blocks, k}, blocks * k));
  params_.add("scs.conv1.bias", init_uniform(rng, {sc.cnn_hidden}, blocks * k));
  params_.add("scs.conv2.weight", init_uniform(rng, {d, sc.cnn_hidden, k}, sc.cnn_hidden * k));
  params_.add("scs.conv2.bias", init_uniform(rng, {d}, sc.cnn_hidden * k));

  if (uses_bank(v)) {
    const std::size_t mq = config_.memory_dim;
    params_.add("adb.memory", init_uniform(rng, {n, mq}, n));
    add_affine(params_, rng, "adb.ndv.hidden", mq * mq * m, config_.ndv_hidden);
    add_affine(params_, rng, "adb.ndv.output", config_.ndv_hidden, n);
  }

  const std::size_t spd_raw = uses_spd(v) ? n * m : sc.patch_length;
  add_affine(params_, rng, "fusion.spd_proj", spd_raw, fc.proj_spd);
  std::size_t fused = d * n * fc.proj_spd;
  if (uses_euclid(v)) {
    add_affine(params_, rng, "fusion.euclid_proj", sc.patch_length, fc.proj_euclid);
    fused += d * n * fc.proj_euclid;
  }

  std::size_t in = fused;
  for (std::size_t i = 0; i < fc.mlp_widths.size(); ++i) {
    add_affine(params_, rng, "head.fc" + std::to_string(i + 1), in, fc.mlp_widths[i]);
    in = fc.mlp_widths[i];
  }
  add_affine(params_, rng, "head.fc" + std::to_string(fc.mlp_widths.size() + 1), in,
             fc.output_width());
}

bool HsmgnnModel::has_distance_bank() const { return params_.contains("adb.memory"); }

scs::TemporalCnnWeights HsmgnnModel::cnn_weights() const {
  return {params_.at("scs.conv1.weight"), params_.at("scs.conv1.bias"),
          params_.at("scs.conv2.weight"), params_.at("scs.conv2.bias")};
}

adb::DistanceBank HsmgnnModel::distance_bank() const {
  return {params_.at("adb.memory"), affine(params_, "adb.ndv.hidden"),
          affine(params_, "adb.ndv.output")};
}

Tensor HsmgnnModel::forward(const Tensor& batch) const { return trace(batch).output; }

ForwardTrace HsmgnnModel::trace(const Tensor& batch) const {
  const auto& cfg = config_;
  if (batch.rank() != 4 || batch.dim(1) != cfg.num_sensors || batch.dim(2) != cfg.series_length ||
      batch.dim(3) != cfg.channels) {
    throw ShapeError("model input " + shape_to_string(batch.shape()) + " does not match [Bx" +
                     std::to_string(cfg.num_sensors) + "x" + std::to_string(cfg.series_length) +
                     "x" + std::to_string(cfg.channels) + "]");
  }
  const Variant v = cfg.variant;
  const auto& fc = cfg.fusion;
  const std::size_t window = scs::cross_window_length(cfg.scs);

  ForwardTrace tr;
  tr.features = scs::temporal_cnn(scs::block_partition(batch, cfg.scs), cnn_weights());

  std::vector<Tensor> spd_outputs;
  std::vector<Tensor> euclid_outputs;
  adb::DistanceBank bank;
  if (uses_bank(v)) bank = distance_bank();
  for (std::size_t d = 0; d < cfg.scs.feature_blocks; ++d) {
    Tensor p_d = scs::feature_block(tr.features, d);
    if (uses_spd(v)) {
      Tensor u_d = scs::window_covariance(p_d, window, cfg.scs.spd_jitter);
      adb::AdjacencyMatrix a_d;
      if (uses_bank(v)) {
        adb::AdbOutput out = adb::forward(u_d, bank);
        tr.alpha.push_back(out.alpha);
        a_d = out.refined;
      } else {
        a_d = adb::base_adjacency(u_d);
      }
      const Shape& s = u_d.shape();
      Tensor nodes = ops::reshape(u_d, {s[0], s[1], s[2] * s[3]});
      spd_outputs.push_back(fusion::multihop_conv(nodes, a_d, fc.hops_spd));
      tr.spd_blocks.push_back(u_d);
      tr.spd_adjacency.push_back(a_d);
    } else {
      adb::AdjacencyMatrix a_d = fusion::euclidean_adjacency(p_d);
      spd_outputs.push_back(fusion::multihop_conv(p_d, a_d, fc.hops_spd));
      tr.spd_adjacency.push_back(a_d);
    }
    if (uses_euclid(v)) {
      adb::AdjacencyMatrix a_e = fusion::euclidean_adjacency(p_d);
      euclid_outputs.push_back(fusion::multihop_conv(p_d, a_e, fc.hops_euclid));
    }
  }

  tr.spd_branch = fusion::branch_features(spd_outputs, affine(params_, "fusion.spd_proj"));
  if (uses_euclid(v)) {
    tr.euclid_branch =
        fusion::branch_features(euclid_outputs, affine(params_, "fusion.euclid_proj"));
  }

  fusion::MlpHead head;
  for (std::size_t i = 1; i <= fc.mlp_widths.size() + 1; ++i) {
    head.layers.push_back(affine(params_, "head.fc" + std::to_string(i)));
  }
  tr.output = fusion::fuse_and_predict(tr.spd_branch, tr.euclid_branch, head, fc);
  return tr;
}

}  // namespace hsmgnn
