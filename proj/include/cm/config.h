// include/cm/config.h

// Copyright 2026  cmbench authors

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

#ifndef CM_CONFIG_H_
#define CM_CONFIG_H_

#include <string>
#include <vector>

#include "cm/backend.h"
#include "cm/data.h"
#include "cm/eval.h"
#include "cm/frontend.h"
#include "cm/train.h"

namespace cm {

// Everything a training run depends on. File layout (TOML):
//
//   [data]     train_protocol, dev_protocol, format
//   [frontend] kind, manifest, project, proj_dim, frames_per_second
//   [lfcc]     frame_len_ms, frame_shift_ms, fft_size, n_filters, n_ceps, include_deltas
//   [model]    backend
//   [train]    preset, lr0, halve_every, batch_size, max_epochs, patience, seed,
//              beta1, beta2, epsilon, clip_norm, max_segment_s, desk_scale
//   [eval]     c1, c2
//
// The preset is applied first, explicit [train] keys then override it.
// Unknown sections or keys are rejected with kConfig.
struct RunConfig {
  std::string train_protocol;
  std::string dev_protocol;
  std::string format = "tsv";
  FrontendConfig frontend;
  nn::BackendKind backend = nn::BackendKind::kGF;
  std::string preset = "lfcc";
  TrainConfig train;
  TdcfParams tdcf;

  void Validate() const;
  // Fully-resolved TOML; paths are absolute. Parsing it back yields an
  // identical configuration.
  std::string ToToml() const;
};

// `overrides` are "section.key=value" strings applied on top of the text
// before interpretation; values use TOML syntax, bare words are strings.
// Relative paths resolve against base_dir.
RunConfig ParseRunConfig(const std::string &text, const std::string &base_dir,
                         const std::vector<std::string> &overrides = {});
RunConfig LoadRunConfig(const std::string &path, const std::vector<std::string> &overrides = {});

}  // namespace cm

#endif  // CM_CONFIG_H_
