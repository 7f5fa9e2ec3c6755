// src/config.cc

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

#include "cm/config.h"

#include <charconv>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "cm/binio.h"
#include "cm/error.h"

namespace cm {

namespace fs = std::filesystem;

namespace {

const std::map<std::string, std::set<std::string>> kKeys = {
    {"data", {"train_protocol", "dev_protocol", "format"}},
    {"frontend", {"kind", "manifest", "project", "proj_dim", "frames_per_second"}},
    {"lfcc", {"frame_len_ms", "frame_shift_ms", "fft_size", "n_filters", "n_ceps", "include_deltas"}},
    {"model", {"backend"}},
    {"train",
     {"preset", "lr0", "halve_every", "batch_size", "max_epochs", "patience", "seed", "beta1", "beta2", "epsilon",
      "clip_norm", "max_segment_s", "desk_scale"}},
    {"eval", {"c1", "c2"}},
};

// " at file:line:col", or nothing for keys that came from overrides.
std::string Describe(const toml::source_region &src) {
  if (src.begin.line == 0) return "";
  std::ostringstream os;
  os << " at ";
  if (src.path) os << *src.path << ":";
  os << src.begin.line << ":" << src.begin.column;
  return os.str();
}

// Typed access to [section] key; absent keys leave `out` untouched.
class Reader {
 public:
  explicit Reader(const toml::table &t) : t_(t) {}

  const toml::node *Node(const char *section, const char *key) const {
    const toml::node *sec = t_.get(section);
    return sec ? sec->as_table()->get(key) : nullptr;
  }

  void Get(const char *section, const char *key, std::string &out) const {
    if (const toml::node *n = Node(section, key)) {
      if (!n->is_string()) Bad(section, key, "a string");
      out = n->as_string()->get();
    }
  }
  void Get(const char *section, const char *key, double &out) const {
    if (const toml::node *n = Node(section, key)) {
      if (n->is_floating_point()) out = n->as_floating_point()->get();
      else if (n->is_integer()) out = double(n->as_integer()->get());
      else Bad(section, key, "a number");
    }
  }
  void Get(const char *section, const char *key, int &out) const {
    if (const toml::node *n = Node(section, key)) {
      if (!n->is_integer()) Bad(section, key, "an integer");
      const int64_t v = n->as_integer()->get();
      if (v < INT32_MIN || v > INT32_MAX) Bad(section, key, "a 32-bit integer");
      out = int(v);
    }
  }
  void Get(const char *section, const char *key, uint64_t &out) const {
    if (const toml::node *n = Node(section, key)) {
      if (!n->is_integer() || n->as_integer()->get() < 0) Bad(section, key, "a non-negative integer");
      out = uint64_t(n->as_integer()->get());
    }
  }
  void Get(const char *section, const char *key, bool &out) const {
    if (const toml::node *n = Node(section, key)) {
      if (!n->is_boolean()) Bad(section, key, "true or false");
      out = n->as_boolean()->get();
    }
  }

 private:
  [[noreturn]] static void Bad(const char *section, const char *key, const char *what) {
    Fail(ErrorKind::kConfig, std::string(section) + "." + key + " must be " + what);
  }
  const toml::table &t_;
};

void CheckKeys(const toml::table &t) {
  for (const auto &[section, node] : t) {
    auto it = kKeys.find(std::string(section.str()));
    if (it == kKeys.end())
      Fail(ErrorKind::kConfig,
           "unknown config section [" + std::string(section.str()) + "]" + Describe(section.source()));
    if (!node.is_table())
      Fail(ErrorKind::kConfig, "config entry '" + std::string(section.str()) + "' must be a [section]");
    for (const auto &[key, value] : *node.as_table())
      if (!it->second.count(std::string(key.str())))
        Fail(ErrorKind::kConfig,
             "unknown config key " + it->first + "." + std::string(key.str()) + Describe(key.source()));
  }
}

void ApplyOverride(toml::table &t, const std::string &item) {
  const size_t eq = item.find('=');
  const size_t dot = item.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq || dot == 0 || dot + 1 == eq)
    Fail(ErrorKind::kConfig, "bad override '" + item + "' (expected section.key=value)");
  const std::string section = item.substr(0, dot);
  const std::string key = item.substr(dot + 1, eq - dot - 1);
  const std::string value = item.substr(eq + 1);
  if (!t.contains(section)) t.insert(section, toml::table{});
  toml::table *sec = t.get(section)->as_table();
  if (!sec) Fail(ErrorKind::kConfig, "override target '" + section + "' is not a section");
  try {
    toml::table parsed = toml::parse("v = " + value);
    sec->insert_or_assign(key, std::move(*parsed.get("v")));
  } catch (const toml::parse_error &) {
    sec->insert_or_assign(key, value);  // bare word: a string
  }
}

std::string ResolvePath(const std::string &path, const std::string &base_dir) {
  if (path.empty()) return path;
  fs::path p(path);
  if (p.is_relative()) p = fs::path(base_dir) / p;
  return fs::absolute(p).lexically_normal().string();
}

}  // namespace

void RunConfig::Validate() const {
  if (train_protocol.empty()) Fail(ErrorKind::kConfig, "data.train_protocol is required");
  if (dev_protocol.empty()) Fail(ErrorKind::kConfig, "data.dev_protocol is required");
  ParseProtocolFormat(format);
  TrainPreset(preset);
  train.Validate();
  tdcf.Validate();
  frontend.lfcc.Validate(16000);
  if (frontend.kind != FrontendKind::kLfcc && frontend.manifest.empty())
    Fail(ErrorKind::kConfig, std::string("front end '") + FrontendName(frontend.kind) + "' needs frontend.manifest");
}

RunConfig ParseRunConfig(const std::string &text, const std::string &base_dir,
                         const std::vector<std::string> &overrides) {
  toml::table t;
  try {
    t = toml::parse(text);
  } catch (const toml::parse_error &e) {
    Fail(ErrorKind::kConfig, "config syntax error" + Describe(e.source()) + ": " + std::string(e.description()));
  }
  for (const std::string &o : overrides) ApplyOverride(t, o);
  CheckKeys(t);
  const Reader r(t);

  RunConfig c;
  r.Get("data", "train_protocol", c.train_protocol);
  r.Get("data", "dev_protocol", c.dev_protocol);
  r.Get("data", "format", c.format);
  c.train_protocol = ResolvePath(c.train_protocol, base_dir);
  c.dev_protocol = ResolvePath(c.dev_protocol, base_dir);

  std::string kind = FrontendName(c.frontend.kind);
  r.Get("frontend", "kind", kind);
  c.frontend.kind = ParseFrontend(kind);
  r.Get("frontend", "manifest", c.frontend.manifest);
  c.frontend.manifest = ResolvePath(c.frontend.manifest, base_dir);
  r.Get("frontend", "project", c.frontend.project);
  r.Get("frontend", "proj_dim", c.frontend.proj_dim);
  r.Get("frontend", "frames_per_second", c.frontend.frames_per_second);

  LfccConfig &l = c.frontend.lfcc;
  r.Get("lfcc", "frame_len_ms", l.frame_len_ms);
  r.Get("lfcc", "frame_shift_ms", l.frame_shift_ms);
  r.Get("lfcc", "fft_size", l.fft_size);
  r.Get("lfcc", "n_filters", l.n_filters);
  r.Get("lfcc", "n_ceps", l.n_ceps);
  r.Get("lfcc", "include_deltas", l.include_deltas);

  std::string backend = nn::BackendName(c.backend);
  r.Get("model", "backend", backend);
  c.backend = nn::ParseBackend(backend);

  r.Get("train", "preset", c.preset);
  c.train = TrainPreset(c.preset);
  TrainConfig &tc = c.train;
  r.Get("train", "lr0", tc.lr0);
  r.Get("train", "halve_every", tc.halve_every);
  r.Get("train", "batch_size", tc.batch_size);
  r.Get("train", "max_epochs", tc.max_epochs);
  r.Get("train", "patience", tc.patience);
  r.Get("train", "seed", tc.seed);
  r.Get("train", "beta1", tc.beta1);
  r.Get("train", "beta2", tc.beta2);
  r.Get("train", "epsilon", tc.epsilon);
  r.Get("train", "clip_norm", tc.clip_norm);
  r.Get("train", "max_segment_s", tc.max_segment_s);
  r.Get("train", "desk_scale", tc.desk_scale);

  r.Get("eval", "c1", c.tdcf.c1);
  r.Get("eval", "c2", c.tdcf.c2);
  return c;
}

RunConfig LoadRunConfig(const std::string &path, const std::vector<std::string> &overrides) {
  const std::vector<uint8_t> bytes = ReadFileBytes(path);
  const fs::path dir = fs::absolute(fs::path(path)).parent_path();
  return ParseRunConfig(std::string(bytes.begin(), bytes.end()), dir.string(), overrides);
}

std::string RunConfig::ToToml() const {
  // Written by hand so keys keep their documented order and floats use the
  // shortest representation that reads back exactly.
  std::ostringstream os;
  auto section = [&](const char *name) { os << (os.tellp() > 0 ? "\n[" : "[") << name << "]\n"; };
  auto str = [&](const char *key, const std::string &v) { os << key << " = " << toml::value<std::string>(v) << '\n'; };
  auto num = [&](const char *key, double v) {
    char buf[64];
    std::string s(buf, std::to_chars(buf, buf + sizeof(buf), v).ptr);
    if (s.find_first_of(".eni") == std::string::npos) s += ".0";
    os << key << " = " << s << '\n';
  };
  auto integer = [&](const char *key, int64_t v) { os << key << " = " << v << '\n'; };
  auto boolean = [&](const char *key, bool v) { os << key << " = " << (v ? "true" : "false") << '\n'; };

  section("data");
  str("train_protocol", train_protocol);
  str("dev_protocol", dev_protocol);
  str("format", format);
  section("frontend");
  str("kind", FrontendName(frontend.kind));
  str("manifest", frontend.manifest);
  boolean("project", frontend.project);
  integer("proj_dim", frontend.proj_dim);
  num("frames_per_second", frontend.frames_per_second);
  const LfccConfig &l = frontend.lfcc;
  section("lfcc");
  num("frame_len_ms", l.frame_len_ms);
  num("frame_shift_ms", l.frame_shift_ms);
  integer("fft_size", l.fft_size);
  integer("n_filters", l.n_filters);
  integer("n_ceps", l.n_ceps);
  boolean("include_deltas", l.include_deltas);
  section("model");
  str("backend", nn::BackendName(backend));
  section("train");
  str("preset", preset);
  num("lr0", train.lr0);
  integer("halve_every", train.halve_every);
  integer("batch_size", train.batch_size);
  integer("max_epochs", train.max_epochs);
  integer("patience", train.patience);
  integer("seed", int64_t(train.seed));
  num("beta1", train.beta1);
  num("beta2", train.beta2);
  num("epsilon", train.epsilon);
  num("clip_norm", train.clip_norm);
  num("max_segment_s", train.max_segment_s);
  boolean("desk_scale", train.desk_scale);
  section("eval");
  num("c1", tdcf.c1);
  num("c2", tdcf.c2);
  return os.str();
}

}  // namespace cm
