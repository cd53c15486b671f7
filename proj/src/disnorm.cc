// kws/disnorm.cc

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

#include "kws/disnorm.h"

#include <cmath>

namespace kws {

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kNone: return "none";
    case Strategy::kAT: return "at";
    case Strategy::kDAT: return "dat";
    case Strategy::kFG_DAT: return "fg_dat";
    case Strategy::kDA_DAT: return "da_dat";
  }
  throw ContractError("unreachable strategy value");
}

Strategy parse_strategy(const std::string& name) {
  if (name == "none") return Strategy::kNone;
  if (name == "at") return Strategy::kAT;
  if (name == "dat") return Strategy::kDAT;
  if (name == "fg_dat") return Strategy::kFG_DAT;
  if (name == "da_dat") return Strategy::kDA_DAT;
  throw ConfigError("unknown strategy '" + name +
                    "' (expected none|at|dat|fg_dat|da_dat)");
}

int BranchPlan::original_branch(int datasource) const {
  KWS_CHECK(datasource >= 0 && datasource < num_datasources,
            "datasource index " << datasource << " out of range [0,"
                                << num_datasources << ")");
  if (strategy == Strategy::kDA_DAT) return datasource;
  return 0;
}

int BranchPlan::adversary_branch(int datasource, int level) const {
  KWS_CHECK(datasource >= 0 && datasource < num_datasources,
            "datasource index " << datasource << " out of range [0,"
                                << num_datasources << ")");
  KWS_CHECK(level >= 0 && level < num_levels,
            "level index " << level << " out of range [0," << num_levels
                           << ")");
  switch (strategy) {
    case Strategy::kNone:
    case Strategy::kAT:
      return 0;
    case Strategy::kDAT:
      return 1;
    case Strategy::kFG_DAT:
      return 1 + level;
    case Strategy::kDA_DAT:
      return num_datasources + datasource;
  }
  throw ContractError("unreachable strategy value");
}

BranchPlan make_branch_plan(Strategy strategy, int num_datasources,
                            int num_levels) {
  KWS_CHECK(num_datasources >= 1,
            "num_datasources must be positive, got " << num_datasources);
  KWS_CHECK(num_levels >= 1, "num_levels must be positive, got " << num_levels);

  BranchPlan plan;
  plan.strategy = strategy;
  plan.num_datasources = num_datasources;
  plan.num_levels = num_levels;

  auto clean = [] {
    DatasourceTag t;
    t.kind = DatasourceTag::Kind::kClean;
    return t;
  };
  auto adversarial = [](int parent, int level) {
    DatasourceTag t;
    t.kind = DatasourceTag::Kind::kAdversarial;
    t.parent_id = parent;
    t.level_index = level;
    return t;
  };

  switch (strategy) {
    case Strategy::kNone:
    case Strategy::kAT:
      plan.branches = {clean()};
      break;
    case Strategy::kDAT:
      plan.branches = {clean(), adversarial(0, 0)};
      break;
    case Strategy::kFG_DAT: {
      plan.branches = {clean()};
      for (int l = 0; l < num_levels; ++l)
        plan.branches.push_back(adversarial(0, l));
      break;
    }
    case Strategy::kDA_DAT: {
      plan.branches = {clean()};
      for (int d = 1; d < num_datasources; ++d) {
        DatasourceTag t;
        t.kind = DatasourceTag::Kind::kAugmented;
        t.source_index = d;
        plan.branches.push_back(t);
      }
      for (int d = 0; d < num_datasources; ++d)
        plan.branches.push_back(adversarial(d, 0));
      break;
    }
  }
  for (size_t i = 0; i < plan.branches.size(); ++i)
    plan.branches[i].id = static_cast<int>(i);
  return plan;
}

template <typename Real>
BranchSetT<Real>::BranchSetT(int num_channels, int num_branches, Real momentum,
                             Real epsilon)
    : channels_(num_channels), momentum_(momentum), epsilon_(epsilon) {
  KWS_CHECK(num_channels >= 1, "BranchSet needs at least one channel");
  KWS_CHECK(num_branches >= 1, "BranchSet needs at least one branch");
  KWS_CHECK(momentum > Real(0) && momentum <= Real(1),
            "BranchSet momentum must be in (0, 1]");
  KWS_CHECK(epsilon > Real(0), "BranchSet epsilon must be positive");
  for (int k = 0; k < num_branches; ++k) {
    gamma_.push_back(TensorT<Real>::full({num_channels}, Real(1)));
    beta_.push_back(TensorT<Real>::zeros({num_channels}));
    running_mean_.push_back(TensorT<Real>::zeros({num_channels}));
    running_var_.push_back(TensorT<Real>::full({num_channels}, Real(1)));
    gamma_.back().set_requires_grad(true);
    beta_.back().set_requires_grad(true);
    update_count_.push_back(0);
  }
}

template <typename Real>
size_t BranchSetT<Real>::check_branch(int branch) const {
  if (branch < 0 || branch >= num_branches())
    throw RoutingError("branch " + std::to_string(branch) +
                       " out of range, BranchSet has " +
                       std::to_string(num_branches()) + " branches");
  return static_cast<size_t>(branch);
}

template <typename Real>
std::vector<TensorT<Real>> BranchSetT<Real>::trainable_params() {
  std::vector<TensorT<Real>> out;
  for (size_t k = 0; k < gamma_.size(); ++k) {
    out.push_back(gamma_[k]);
    out.push_back(beta_[k]);
  }
  return out;
}

template <typename Real>
TensorT<Real> BranchSetT<Real>::forward(TapeT<Real>* tape,
                                        const TensorT<Real>& x, int branch,
                                        BnMode mode) {
  const size_t kb = check_branch(branch);
  KWS_CHECK(x.defined(), "bn_forward: undefined input");
  KWS_CHECK_SHAPE(x.ndim() == 3 || x.ndim() == 4,
                  "bn_forward input must be CxHxW or NxCxHxW, got "
                      << shape_str(x.shape()));
  const bool batched = x.ndim() == 4;
  const int n = batched ? x.dim(0) : 1;
  const int c = batched ? x.dim(1) : x.dim(0);
  const int h = batched ? x.dim(2) : x.dim(1);
  const int w = batched ? x.dim(3) : x.dim(2);
  KWS_CHECK_SHAPE(c == channels_, "bn_forward: input has "
                                      << c << " channels, BranchSet has "
                                      << channels_);
  const int64_t plane = static_cast<int64_t>(h) * w;
  const int64_t per_example = static_cast<int64_t>(c) * plane;
  const int64_t m = static_cast<int64_t>(n) * plane;
  KWS_CHECK(m >= 1, "bn_forward: empty batch");

  // Eval reads branch 0 regardless of the routed branch.
  const size_t kread = (mode == BnMode::kEval) ? 0 : kb;
  const TensorT<Real>& g = gamma_[kread];
  const TensorT<Real>& b = beta_[kread];

  std::vector<Real> mean(static_cast<size_t>(c)), invstd(static_cast<size_t>(c));
  if (mode == BnMode::kEval) {
    for (int ch = 0; ch < c; ++ch) {
      mean[static_cast<size_t>(ch)] = running_mean_[0].data()[ch];
      invstd[static_cast<size_t>(ch)] =
          Real(1) / std::sqrt(running_var_[0].data()[ch] + epsilon_);
    }
  } else {
    // Batch statistics per channel over N*H*W, population variance.
    // Accumulate in double so float batches stay stable.
    for (int ch = 0; ch < c; ++ch) {
      double s = 0.0, s2 = 0.0;
      for (int i = 0; i < n; ++i) {
        const Real* p = x.data() + i * per_example + ch * plane;
        for (int64_t j = 0; j < plane; ++j) {
          const double v = static_cast<double>(p[j]);
          s += v;
          s2 += v * v;
        }
      }
      const double mu = s / static_cast<double>(m);
      const double var = std::max(s2 / static_cast<double>(m) - mu * mu, 0.0);
      mean[static_cast<size_t>(ch)] = static_cast<Real>(mu);
      invstd[static_cast<size_t>(ch)] =
          Real(1) / std::sqrt(static_cast<Real>(var) + epsilon_);
      if (mode == BnMode::kTrain) {
        Real* rm = running_mean_[kb].data();
        Real* rv = running_var_[kb].data();
        rm[ch] = (Real(1) - momentum_) * rm[ch] +
                 momentum_ * static_cast<Real>(mu);
        rv[ch] = (Real(1) - momentum_) * rv[ch] +
                 momentum_ * static_cast<Real>(var);
      }
    }
    if (mode == BnMode::kTrain) ++update_count_[kb];
  }

  TensorT<Real> out = TensorT<Real>::zeros(x.shape());
  for (int i = 0; i < n; ++i) {
    for (int ch = 0; ch < c; ++ch) {
      const Real* xp = x.data() + i * per_example + ch * plane;
      Real* op = out.data() + i * per_example + ch * plane;
      const Real mu = mean[static_cast<size_t>(ch)];
      const Real is = invstd[static_cast<size_t>(ch)];
      const Real gc = g.data()[ch], bc = b.data()[ch];
      for (int64_t j = 0; j < plane; ++j)
        op[j] = gc * ((xp[j] - mu) * is) + bc;
    }
  }

  const bool need = tape != nullptr && (x.requires_grad() ||
                                        g.requires_grad() || b.requires_grad());
  if (!need) return out;
  out.set_requires_grad(true);

  TensorT<Real> xh = x, gh = g, bh = b, oh = out;
  const bool batch_stats = mode != BnMode::kEval;
  tape->record(out, [=]() mutable {
    const Real* grad_out = oh.grad_vec().data();
    const bool need_dx = xh.requires_grad();
    const bool need_dg = gh.requires_grad();
    const bool need_db = bh.requires_grad();
    Real* dx = need_dx ? xh.grad() : nullptr;
    Real* dg = need_dg ? gh.grad() : nullptr;
    Real* db = need_db ? bh.grad() : nullptr;
    for (int ch = 0; ch < c; ++ch) {
      const Real mu = mean[static_cast<size_t>(ch)];
      const Real is = invstd[static_cast<size_t>(ch)];
      const Real gc = gh.data()[ch];
      double sum_g = 0.0, sum_gx = 0.0;
      for (int i = 0; i < n; ++i) {
        const Real* xp = xh.data() + i * per_example + ch * plane;
        const Real* gp = grad_out + i * per_example + ch * plane;
        for (int64_t j = 0; j < plane; ++j) {
          sum_g += static_cast<double>(gp[j]);
          sum_gx += static_cast<double>(gp[j]) *
                    static_cast<double>((xp[j] - mu) * is);
        }
      }
      if (need_dg) dg[ch] += static_cast<Real>(sum_gx);
      if (need_db) db[ch] += static_cast<Real>(sum_g);
      if (!need_dx) continue;
      if (batch_stats) {
        // d/dx of batch-statistics normalization: the mean and variance terms
        // feed back into every element of the channel.
        const Real mean_g = static_cast<Real>(sum_g / static_cast<double>(m));
        const Real mean_gx = static_cast<Real>(sum_gx / static_cast<double>(m));
        for (int i = 0; i < n; ++i) {
          const Real* xp = xh.data() + i * per_example + ch * plane;
          const Real* gp = grad_out + i * per_example + ch * plane;
          Real* dp = dx + i * per_example + ch * plane;
          for (int64_t j = 0; j < plane; ++j) {
            const Real xhat = (xp[j] - mu) * is;
            dp[j] += gc * is * (gp[j] - mean_g - xhat * mean_gx);
          }
        }
      } else {
        // Eval statistics are constants, so the map is affine.
        for (int i = 0; i < n; ++i) {
          const Real* gp = grad_out + i * per_example + ch * plane;
          Real* dp = dx + i * per_example + ch * plane;
          for (int64_t j = 0; j < plane; ++j) dp[j] += gc * is * gp[j];
        }
      }
    }
  });
  return out;
}

template class BranchSetT<float>;
template class BranchSetT<double>;

}  // namespace kws
