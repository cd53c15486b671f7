// kws/model.cc

// Copyright 2026  The KWS Engine Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "kws/model.h"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

namespace kws {

namespace {

using nlohmann::json;

template <typename Real>
TensorT<Real> kaiming_uniform(Rng& rng, Shape shape, int fan_in) {
  TensorT<Real> t = TensorT<Real>::zeros(std::move(shape));
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (auto& v : t.vec())
    v = static_cast<Real>(rng.uniform(-bound, bound));
  t.set_requires_grad(true);
  return t;
}

}  // namespace

ModelConfig mn45_config(int num_classes, bool with_simam, int num_branches) {
  ModelConfig cfg;
  cfg.num_classes = num_classes;
  cfg.with_simam = with_simam;
  cfg.num_branches = num_branches;
  const int strides[7] = {1, 2, 2, 2, 1, 2, 1};
  for (int s : strides) cfg.blocks.push_back(BlockSpec{6, 45, s, 45});
  return cfg;
}

// --- SimAM ------------------------------------------------------------------

template <typename Real>
TensorT<Real> simam(TapeT<Real>* tape, const TensorT<Real>& x, Real lambda) {
  KWS_CHECK(x.defined(), "simam: undefined input");
  KWS_CHECK(lambda > Real(0), "simam: lambda must be positive, got " << lambda);
  KWS_CHECK_SHAPE(x.ndim() == 3 || x.ndim() == 4,
                  "simam input must be CxHxW or NxCxHxW, got "
                      << shape_str(x.shape()));
  const bool batched = x.ndim() == 4;
  const int n = batched ? x.dim(0) : 1;
  const int c = batched ? x.dim(1) : x.dim(0);
  const int h = batched ? x.dim(2) : x.dim(1);
  const int w = batched ? x.dim(3) : x.dim(2);
  const int64_t plane = static_cast<int64_t>(h) * w;
  KWS_CHECK(plane >= 1, "simam: empty spatial extent");

  // Channel statistics cached for the backward closure.
  auto mean = std::make_shared<std::vector<Real>>(static_cast<size_t>(n) * c);
  auto var = std::make_shared<std::vector<Real>>(static_cast<size_t>(n) * c);

  TensorT<Real> out = TensorT<Real>::zeros(x.shape());
  for (int i = 0; i < n; ++i) {
    for (int ch = 0; ch < c; ++ch) {
      const Real* xp = x.data() + (static_cast<int64_t>(i) * c + ch) * plane;
      Real* op = out.data() + (static_cast<int64_t>(i) * c + ch) * plane;
      double s = 0.0, s2 = 0.0;
      for (int64_t j = 0; j < plane; ++j) {
        const double v = static_cast<double>(xp[j]);
        s += v;
        s2 += v * v;
      }
      const double mu = s / static_cast<double>(plane);
      const double v2 =
          std::max(s2 / static_cast<double>(plane) - mu * mu, 0.0);
      (*mean)[static_cast<size_t>(i) * c + ch] = static_cast<Real>(mu);
      (*var)[static_cast<size_t>(i) * c + ch] = static_cast<Real>(v2);
      const Real muc = static_cast<Real>(mu), vc = static_cast<Real>(v2);
      const Real ne = Real(4) * (vc + lambda);
      for (int64_t j = 0; j < plane; ++j) {
        const Real d = xp[j] - muc;
        const Real e_inv = (d * d + Real(2) * vc + Real(2) * lambda) / ne;
        const Real wgt = Real(1) / (Real(1) + std::exp(-e_inv));
        op[j] = wgt * xp[j];
      }
    }
  }

  if (tape != nullptr && x.requires_grad()) {
    out.set_requires_grad(true);
    TensorT<Real> xh = x, oh = out;
    tape->record(out, [=]() mutable {
      const Real* grad_out = oh.grad_vec().data();
      Real* dx = xh.grad();
      for (int i = 0; i < n; ++i) {
        for (int ch = 0; ch < c; ++ch) {
          const int64_t base = (static_cast<int64_t>(i) * c + ch) * plane;
          const Real* xp = xh.data() + base;
          const Real* gp = grad_out + base;
          Real* dp = dx + base;
          const Real muc = (*mean)[static_cast<size_t>(i) * c + ch];
          const Real vc = (*var)[static_cast<size_t>(i) * c + ch];
          const Real ne = Real(4) * (vc + lambda);
          // q_j = g_j * x_j * w_j * (1 - w_j); the mean/variance coupling
          // enters through the channel sums S1, S2, S3.
          double s1 = 0.0, s2 = 0.0, s3 = 0.0;
          for (int64_t j = 0; j < plane; ++j) {
            const Real d = xp[j] - muc;
            const Real e_inv = (d * d + Real(2) * vc + Real(2) * lambda) / ne;
            const Real wgt = Real(1) / (Real(1) + std::exp(-e_inv));
            const double q = static_cast<double>(gp[j]) * xp[j] * wgt *
                             (Real(1) - wgt);
            s1 += q;
            s2 += q * static_cast<double>(d);
            s3 += q * static_cast<double>(e_inv);
          }
          const double inv_m = 1.0 / static_cast<double>(plane);
          const double inv_ne = 1.0 / static_cast<double>(ne);
          for (int64_t j = 0; j < plane; ++j) {
            const Real d = xp[j] - muc;
            const Real e_inv = (d * d + Real(2) * vc + Real(2) * lambda) / ne;
            const Real wgt = Real(1) / (Real(1) + std::exp(-e_inv));
            const double q = static_cast<double>(gp[j]) * xp[j] * wgt *
                             (Real(1) - wgt);
            const double coupled =
                (2.0 * static_cast<double>(d) * q - 2.0 * s2 * inv_m +
                 static_cast<double>(d) * (4.0 * s1 - 8.0 * s3) * inv_m) *
                inv_ne;
            dp[j] += static_cast<Real>(static_cast<double>(gp[j]) * wgt +
                                       coupled);
          }
        }
      }
    });
  }
  return out;
}

// --- ModelT -----------------------------------------------------------------

template <typename Real>
ModelT<Real>::ModelT(const ModelConfig& cfg, uint64_t init_seed)
    : cfg_(cfg),
      stem_bn_(cfg.stem_channels, cfg.num_branches),
      feat_bn_(cfg.feature_channels, cfg.num_branches) {
  KWS_CHECK(cfg.num_classes >= 1, "model needs at least one class");
  KWS_CHECK(cfg.num_branches >= 1, "model needs at least one branch");
  KWS_CHECK(cfg.stem_channels >= 1 && cfg.feature_channels >= 1,
            "channel widths must be positive");

  Rng rng(init_seed);
  stem_ = kaiming_uniform<Real>(rng, {cfg.stem_channels, 1, 3, 3}, 9);

  int in_ch = cfg.stem_channels;
  for (const BlockSpec& spec : cfg_.blocks) {
    KWS_CHECK(spec.t >= 1, "expansion factor must be >= 1, got " << spec.t);
    KWS_CHECK(spec.s == 1 || spec.s == 2, "stride must be 1 or 2, got " << spec.s);
    KWS_CHECK(spec.m == in_ch, "block expects " << spec.m
                                                << " input channels but gets "
                                                << in_ch);
    const int mid = spec.t * spec.m;
    Bottleneck block{
        kaiming_uniform<Real>(rng, {mid, spec.m, 1, 1}, spec.m),
        kaiming_uniform<Real>(rng, {mid, 3, 3}, 9),
        kaiming_uniform<Real>(rng, {spec.n, mid, 1, 1}, mid),
        BranchSetT<Real>(mid, cfg.num_branches),
        BranchSetT<Real>(mid, cfg.num_branches),
        BranchSetT<Real>(spec.n, cfg.num_branches),
        spec};
    blocks_.push_back(std::move(block));
    in_ch = spec.n;
  }

  feat_conv_ =
      kaiming_uniform<Real>(rng, {cfg.feature_channels, in_ch, 1, 1}, in_ch);
  head_ = kaiming_uniform<Real>(
      rng, {cfg.num_classes, cfg.feature_channels, 1, 1}, cfg.feature_channels);
}

template <typename Real>
TensorT<Real> ModelT<Real>::forward(TapeT<Real>* tape, const TensorT<Real>& x,
                                    int branch, BnMode mode,
                                    ActivationTraceT<Real>* trace) {
  KWS_CHECK(x.defined(), "model forward: undefined input");
  KWS_CHECK_SHAPE(x.ndim() == 3 || x.ndim() == 4,
                  "model input must be 1xHxW or Nx1xHxW, got "
                      << shape_str(x.shape()));
  TensorT<Real> h = x;
  if (h.ndim() == 3) h = reshape(tape, h, {1, h.dim(0), h.dim(1), h.dim(2)});
  KWS_CHECK_SHAPE(h.dim(1) == 1, "model input must have one channel, got "
                                     << h.dim(1));
  const int batch = h.dim(0);
  auto tap = [&](const std::string& name, const TensorT<Real>& t) {
    if (trace != nullptr) trace->taps.emplace_back(name, t);
  };

  h = conv2d(tape, h, stem_, 2, {1, 1});
  h = stem_bn_.forward(tape, h, branch, mode);
  h = relu6(tape, h);
  tap("layer0.out", h);

  for (size_t i = 0; i < blocks_.size(); ++i) {
    Bottleneck& block = blocks_[i];
    const std::string prefix = "layer" + std::to_string(i + 1);
    TensorT<Real> in = h;
    TensorT<Real> e = conv2d(tape, h, block.expand, 1, {0, 0});
    e = block.bn1.forward(tape, e, branch, mode);
    e = relu6(tape, e);
    tap(prefix + ".expand", e);
    TensorT<Real> d = depthwise_conv2d(tape, e, block.dw, block.spec.s, {1, 1});
    tap(prefix + ".dw", d);
    if (cfg_.with_simam)
      d = simam(tape, d, static_cast<Real>(cfg_.simam_lambda));
    tap(prefix + ".post_attn", d);
    d = block.bn2.forward(tape, d, branch, mode);
    d = relu6(tape, d);
    TensorT<Real> p = conv2d(tape, d, block.project, 1, {0, 0});
    p = block.bn3.forward(tape, p, branch, mode);
    h = block.spec.residual() ? add(tape, p, in) : p;
    tap(prefix + ".out", h);
  }

  h = conv2d(tape, h, feat_conv_, 1, {0, 0});
  h = feat_bn_.forward(tape, h, branch, mode);
  h = relu6(tape, h);
  h = global_avg_pool(tape, h);
  h = conv2d(tape, h, head_, 1, {0, 0});
  return reshape(tape, h, {batch, cfg_.num_classes});
}

template <typename Real>
std::vector<TensorT<Real>> ModelT<Real>::conv_weights() {
  std::vector<TensorT<Real>> out{stem_};
  for (auto& b : blocks_) {
    out.push_back(b.expand);
    out.push_back(b.dw);
    out.push_back(b.project);
  }
  out.push_back(feat_conv_);
  out.push_back(head_);
  return out;
}

template <typename Real>
std::vector<TensorT<Real>> ModelT<Real>::parameters() {
  std::vector<TensorT<Real>> out = conv_weights();
  auto append = [&out](BranchSetT<Real>& bn) {
    for (auto& p : bn.trainable_params()) out.push_back(p);
  };
  append(stem_bn_);
  for (auto& b : blocks_) {
    append(b.bn1);
    append(b.bn2);
    append(b.bn3);
  }
  append(feat_bn_);
  return out;
}

template <typename Real>
BranchSetT<Real>& ModelT<Real>::block_bn(int block, int which) {
  KWS_CHECK(block >= 0 && block < static_cast<int>(blocks_.size()),
            "block index out of range");
  switch (which) {
    case 1: return blocks_[static_cast<size_t>(block)].bn1;
    case 2: return blocks_[static_cast<size_t>(block)].bn2;
    case 3: return blocks_[static_cast<size_t>(block)].bn3;
    default: throw ContractError("block_bn: which must be 1, 2, or 3");
  }
}

namespace {

// Visits every BranchSet with its stable name prefix.
template <typename Real, typename Fn>
void for_each_bn(ModelT<Real>& model, size_t num_blocks, Fn&& fn) {
  fn("layer0.bn", model.stem_bn());
  for (size_t i = 0; i < num_blocks; ++i) {
    const std::string prefix = "layer" + std::to_string(i + 1);
    fn(prefix + ".bn1", model.block_bn(static_cast<int>(i), 1));
    fn(prefix + ".bn2", model.block_bn(static_cast<int>(i), 2));
    fn(prefix + ".bn3", model.block_bn(static_cast<int>(i), 3));
  }
  fn("layer" + std::to_string(num_blocks + 1) + ".bn", model.feature_bn());
}

}  // namespace

template <typename Real>
std::vector<TensorT<Real>> ModelT<Real>::branch_affine_params(int branch) {
  std::vector<TensorT<Real>> out;
  for_each_bn(*this, blocks_.size(),
              [&out, branch](const std::string&, BranchSetT<Real>& bn) {
                out.push_back(bn.gamma(branch));
                out.push_back(bn.beta(branch));
              });
  return out;
}

template <typename Real>
std::vector<std::pair<std::string, TensorT<Real>>> ModelT<Real>::named_tensors() {
  std::vector<std::pair<std::string, TensorT<Real>>> out;
  const size_t nb = blocks_.size();
  out.emplace_back("layer0.conv", stem_);
  for (size_t i = 0; i < nb; ++i) {
    const std::string prefix = "layer" + std::to_string(i + 1);
    out.emplace_back(prefix + ".expand", blocks_[i].expand);
    out.emplace_back(prefix + ".dw", blocks_[i].dw);
    out.emplace_back(prefix + ".project", blocks_[i].project);
  }
  out.emplace_back("layer" + std::to_string(nb + 1) + ".conv", feat_conv_);
  out.emplace_back("layer" + std::to_string(nb + 2) + ".conv", head_);
  for_each_bn(*this, nb, [&out](const std::string& prefix, BranchSetT<Real>& bn) {
    for (int k = 0; k < bn.num_branches(); ++k) {
      const std::string b = prefix + ".branch" + std::to_string(k);
      out.emplace_back(b + ".gamma", bn.gamma(k));
      out.emplace_back(b + ".beta", bn.beta(k));
      out.emplace_back(b + ".running_mean", bn.running_mean(k));
      out.emplace_back(b + ".running_var", bn.running_var(k));
    }
  });
  return out;
}

template <typename Real>
std::vector<std::pair<std::string, int64_t>> ModelT<Real>::bn_update_counts()
    const {
  std::vector<std::pair<std::string, int64_t>> out;
  auto& self = const_cast<ModelT<Real>&>(*this);
  for_each_bn(self, blocks_.size(),
              [&out](const std::string& prefix, BranchSetT<Real>& bn) {
                for (int k = 0; k < bn.num_branches(); ++k)
                  out.emplace_back(prefix + ".branch" + std::to_string(k),
                                   bn.update_count(k));
              });
  return out;
}

template <typename Real>
void ModelT<Real>::set_bn_update_count(const std::string& name, int64_t count) {
  bool found = false;
  for_each_bn(*this, blocks_.size(),
              [&](const std::string& prefix, BranchSetT<Real>& bn) {
                for (int k = 0; k < bn.num_branches(); ++k) {
                  if (prefix + ".branch" + std::to_string(k) == name) {
                    bn.set_update_count(k, count);
                    found = true;
                  }
                }
              });
  if (!found)
    throw IntegrityError("unknown update-count entry '" + name + "'");
}

template <typename Real>
std::vector<int64_t> ModelT<Real>::conv_param_counts() const {
  std::vector<int64_t> out{stem_.numel()};
  for (const auto& b : blocks_)
    out.push_back(b.expand.numel() + b.dw.numel() + b.project.numel());
  out.push_back(feat_conv_.numel());
  out.push_back(head_.numel());
  return out;
}

template <typename Real>
int64_t ModelT<Real>::num_conv_params() const {
  int64_t total = 0;
  for (int64_t v : conv_param_counts()) total += v;
  return total;
}

template <typename Real>
void ModelT<Real>::set_requires_grad_params(bool requires_grad) {
  for (auto& p : parameters()) p.set_requires_grad(requires_grad);
}

// --- Checkpoint -------------------------------------------------------------

namespace {

constexpr uint32_t kCheckpointVersion = 1;

void push_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 24) & 0xff));
}

void push_string(std::vector<uint8_t>& out, const std::string& s) {
  push_u32(out, static_cast<uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

json config_to_json(const ModelConfig& cfg) {
  json blocks = json::array();
  for (const auto& b : cfg.blocks)
    blocks.push_back({{"t", b.t}, {"n", b.n}, {"s", b.s}, {"m", b.m}});
  return json{{"blocks", blocks},
              {"num_classes", cfg.num_classes},
              {"with_simam", cfg.with_simam},
              {"simam_lambda", cfg.simam_lambda},
              {"num_branches", cfg.num_branches},
              {"stem_channels", cfg.stem_channels},
              {"feature_channels", cfg.feature_channels}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig cfg;
  try {
    cfg.num_classes = j.at("num_classes").get<int>();
    cfg.with_simam = j.at("with_simam").get<bool>();
    cfg.simam_lambda = j.at("simam_lambda").get<float>();
    cfg.num_branches = j.at("num_branches").get<int>();
    cfg.stem_channels = j.at("stem_channels").get<int>();
    cfg.feature_channels = j.at("feature_channels").get<int>();
    for (const auto& b : j.at("blocks")) {
      BlockSpec spec;
      spec.t = b.at("t").get<int>();
      spec.n = b.at("n").get<int>();
      spec.s = b.at("s").get<int>();
      spec.m = b.at("m").get<int>();
      cfg.blocks.push_back(spec);
    }
  } catch (const json::exception& e) {
    throw IntegrityError(std::string("malformed checkpoint config: ") +
                         e.what());
  }
  return cfg;
}

class ByteReader {
 public:
  explicit ByteReader(const std::vector<uint8_t>& bytes) : bytes_(bytes) {}

  uint32_t read_u32() {
    need(4);
    uint32_t v = static_cast<uint32_t>(bytes_[pos_]) |
                 (static_cast<uint32_t>(bytes_[pos_ + 1]) << 8) |
                 (static_cast<uint32_t>(bytes_[pos_ + 2]) << 16) |
                 (static_cast<uint32_t>(bytes_[pos_ + 3]) << 24);
    pos_ += 4;
    return v;
  }

  int64_t read_i64() {
    need(8);
    uint64_t v = 0;
    for (int i = 7; i >= 0; --i)
      v = (v << 8) | bytes_[pos_ + static_cast<size_t>(i)];
    pos_ += 8;
    return static_cast<int64_t>(v);
  }

  std::string read_string() {
    const uint32_t len = read_u32();
    need(len);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), len);
    pos_ += len;
    return s;
  }

  std::vector<float> read_floats(size_t count) {
    need(count * 4);
    std::vector<float> out(count);
    std::memcpy(out.data(), bytes_.data() + pos_, count * 4);
    pos_ += count * 4;
    return out;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(size_t n) {
    if (pos_ + n > bytes_.size())
      throw IntegrityError("truncated checkpoint");
  }
  const std::vector<uint8_t>& bytes_;
  size_t pos_ = 0;
};

}  // namespace

std::vector<uint8_t> encode_checkpoint(ModelT<float>& model) {
  std::vector<uint8_t> out;
  out.insert(out.end(), {'K', 'W', 'S', 'C'});
  push_u32(out, kCheckpointVersion);
  push_string(out, config_to_json(model.config()).dump());

  const auto named = model.named_tensors();
  push_u32(out, static_cast<uint32_t>(named.size()));
  for (const auto& [name, tensor] : named) {
    push_string(out, name);
    push_u32(out, static_cast<uint32_t>(tensor.ndim()));
    for (int d : tensor.shape()) push_u32(out, static_cast<uint32_t>(d));
    const size_t begin = out.size();
    out.resize(begin + static_cast<size_t>(tensor.numel()) * 4);
    std::memcpy(out.data() + begin, tensor.data(),
                static_cast<size_t>(tensor.numel()) * 4);
  }

  const auto counts = model.bn_update_counts();
  push_u32(out, static_cast<uint32_t>(counts.size()));
  for (const auto& [name, count] : counts) {
    push_string(out, name);
    for (int i = 0; i < 8; ++i)
      out.push_back(static_cast<uint8_t>(
          (static_cast<uint64_t>(count) >> (8 * i)) & 0xff));
  }
  return out;
}

ModelT<float> decode_checkpoint(const std::vector<uint8_t>& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), "KWSC", 4) != 0)
    throw FormatError("not a checkpoint file");
  const uint32_t version = static_cast<uint32_t>(bytes[4]) |
                           (static_cast<uint32_t>(bytes[5]) << 8) |
                           (static_cast<uint32_t>(bytes[6]) << 16) |
                           (static_cast<uint32_t>(bytes[7]) << 24);
  if (version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " +
                      std::to_string(version));

  ByteReader reader(bytes);
  reader.read_u32();  // magic, validated above
  reader.read_u32();  // version
  json cfg_json;
  try {
    cfg_json = json::parse(reader.read_string());
  } catch (const json::exception& e) {
    throw IntegrityError(std::string("unparsable checkpoint config: ") +
                         e.what());
  }
  ModelT<float> model(config_from_json(cfg_json), 0);

  std::map<std::string, std::pair<Shape, std::vector<float>>> table;
  const uint32_t num_tensors = reader.read_u32();
  for (uint32_t i = 0; i < num_tensors; ++i) {
    const std::string name = reader.read_string();
    const uint32_t ndim = reader.read_u32();
    if (ndim > 8) throw IntegrityError("implausible tensor rank");
    Shape shape;
    int64_t numel = 1;
    for (uint32_t d = 0; d < ndim; ++d) {
      shape.push_back(static_cast<int>(reader.read_u32()));
      numel *= shape.back();
    }
    table[name] = {shape, reader.read_floats(static_cast<size_t>(numel))};
  }

  for (auto& [name, tensor] : model.named_tensors()) {
    auto it = table.find(name);
    if (it == table.end())
      throw IntegrityError("checkpoint is missing tensor '" + name + "'");
    if (it->second.first != tensor.shape())
      throw IntegrityError("checkpoint tensor '" + name + "' has shape " +
                           shape_str(it->second.first) + ", expected " +
                           shape_str(tensor.shape()));
    tensor.vec() = it->second.second;
    table.erase(it);
  }
  if (!table.empty())
    throw IntegrityError("checkpoint has unexpected tensor '" +
                         table.begin()->first + "'");

  const uint32_t num_counts = reader.read_u32();
  for (uint32_t i = 0; i < num_counts; ++i) {
    const std::string name = reader.read_string();
    model.set_bn_update_count(name, reader.read_i64());
  }
  if (!reader.done()) throw IntegrityError("trailing bytes after checkpoint");
  return model;
}

void save_checkpoint(ModelT<float>& model, const std::string& path) {
  const std::vector<uint8_t> bytes = encode_checkpoint(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path);
}

ModelT<float> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

// --- explicit instantiations ------------------------------------------------

template class ModelT<float>;
template class ModelT<double>;
template TensorT<float> simam(TapeT<float>*, const TensorT<float>&, float);
template TensorT<double> simam(TapeT<double>*, const TensorT<double>&, double);

}  // namespace kws
