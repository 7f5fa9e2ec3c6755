// src/cli.cc

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

#include "cm/cli.h"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include "cm/binio.h"
#include "cm/config.h"
#include "cm/data.h"
#include "cm/eval.h"
#include "cm/frontend.h"
#include "cm/log.h"
#include "cm/parallel.h"
#include "cm/probe.h"
#include "cm/stats.h"
#include "cm/train.h"

namespace cm {

namespace fs = std::filesystem;

int ExitCodeFor(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kKindMismatch:
    case ErrorKind::kUnsupportedFrontend:
    case ErrorKind::kVersion:
      return kExitCompatibility;
    case ErrorKind::kNumeric:
      return kExitNumeric;
    case ErrorKind::kContract:
      return kExitInternal;
    default:
      return kExitConfig;
  }
}

namespace {

std::string Fixed6(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

void WriteText(const fs::path &path, const std::string &text) {
  WriteFileBytes(path, std::span<const uint8_t>(reinterpret_cast<const uint8_t *>(text.data()), text.size()));
}

void MakeDirs(const fs::path &dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) Fail(ErrorKind::kIo, "cannot create directory " + dir.string() + ": " + ec.message());
}

// Front-end selection shared by eval and probe. A run config supplies the
// defaults; explicit flags win.
struct FrontendFlags {
  std::string config;
  std::vector<std::string> sets;
  std::string kind;
  std::string manifest;
  bool no_project = false;
  std::optional<int> proj_dim;
  std::optional<double> fps;

  void Add(CLI::App *app) {
    app->add_option("--config", config, "Run config supplying [frontend], [lfcc] and [eval] defaults");
    app->add_option("--set", sets, "Config override section.key=value (repeatable)");
    app->add_option("--frontend", kind, "lfcc, external or external_weighted");
    app->add_option("--manifest", manifest, "Feature manifest for external front ends");
    app->add_flag("--no-project", no_project, "External front ends: feed stored features to the back end directly");
    app->add_option("--proj-dim", proj_dim, "Projection width");
    app->add_option("--fps", fps, "Frame rate of stored features");
  }

  RunConfig Resolve() const {
    RunConfig c = config.empty() ? ParseRunConfig("", fs::current_path().string(), sets)
                                 : LoadRunConfig(config, sets);
    if (!kind.empty()) c.frontend.kind = ParseFrontend(kind);
    if (!manifest.empty()) c.frontend.manifest = manifest;
    if (no_project) c.frontend.project = false;
    if (proj_dim) c.frontend.proj_dim = *proj_dim;
    if (fps) c.frontend.frames_per_second = *fps;
    return c;
  }
};

// Checkpoint plus the front end it is evaluated through.
struct LoadedModel {
  Checkpoint ckpt;
  std::unique_ptr<Frontend> frontend;
};

LoadedModel LoadModel(const std::string &path, const RunConfig &rc, const std::string &backend_flag) {
  LoadedModel m;
  m.ckpt = LoadCheckpoint(path);
  m.frontend = MakeFrontend(rc.frontend);
  const nn::BackendKind backend =
      backend_flag.empty() ? m.ckpt.params.spec.backend : nn::ParseBackend(backend_flag);
  CheckCompatible(m.ckpt, m.frontend->Spec(backend));
  return m;
}

std::string EvalSummaryCsv(const ScoreSet &scores, const ProtocolSet &set, const TdcfParams &tdcf) {
  const EerResult e = ComputeEer(scores, set);
  const double t = MinTdcf(scores, set, tdcf);
  return "eer,threshold,min_tdcf,n_bonafide,n_spoof\n" + Fixed6(e.eer) + "," + Fixed6(e.threshold) + "," +
         Fixed6(t) + "," + std::to_string(e.n_bonafide) + "," + std::to_string(e.n_spoof) + "\n";
}

// ---- train ----

struct TrainArgs {
  std::string config;
  std::vector<std::string> sets;
  std::string out;
  int rounds = 1;
  std::optional<uint64_t> seed;
  int jobs = 1;
};

int CmdTrain(const TrainArgs &a, std::ostream &out) {
  RunConfig rc = LoadRunConfig(a.config, a.sets);
  if (a.seed) rc.train.seed = *a.seed;
  rc.Validate();
  const std::vector<uint64_t> seeds = RoundSeeds(rc.train.seed, a.rounds);
  const ProtocolFormat fmt = ParseProtocolFormat(rc.format);
  const ProtocolSet train_set = ParseProtocol(rc.train_protocol, fmt);
  const ProtocolSet dev_set = ParseProtocol(rc.dev_protocol, fmt);
  train_set.CheckUnique();
  dev_set.CheckUnique();
  const std::unique_ptr<Frontend> frontend = MakeFrontend(rc.frontend);
  const nn::ModelSpec spec = frontend->Spec(rc.backend);

  // Everything above validates inputs; outputs appear only past this point.
  const TrainData data = PrepareTrainData(*frontend, train_set, dev_set, rc.train, a.jobs);
  const fs::path root(a.out);
  MakeDirs(root);
  WriteText(root / "config.resolved.toml", rc.ToToml());

  std::string summary = "round,seed,best_epoch,best_dev_loss,dev_eer\n";
  for (size_t i = 0; i < seeds.size(); ++i) {
    RunConfig round_cfg = rc;
    round_cfg.train.seed = seeds[i];
    const fs::path dir = root / ("round_" + std::to_string(i));
    MakeDirs(dir);
    WriteText(dir / "config.resolved.toml", round_cfg.ToToml());
    CM_LOG << "round " << i << ": seed " << seeds[i] << ", " << data.train.size() << " segments, "
           << data.dev.size() << " dev trials";
    std::string epochs = EpochCsvHeader() + "\n";
    TrainResult r = Train(round_cfg.train, spec, data, [&](const EpochLog &e) {
      epochs += EpochCsvRow(e) + "\n";
      CM_LOG << "round " << i << " epoch " << e.epoch << ": train " << e.train_loss << ", dev " << e.dev_loss;
    });
    r.best.frontend = FrontendName(rc.frontend.kind);
    SaveCheckpoint(r.best, (dir / "model.cmck").string());
    WriteText(dir / "epochs.csv", epochs);
    const ScoreSet dev_scores = ScoreTrials(r.best.params, *frontend, dev_set, a.jobs);
    WriteScores(dev_scores, (dir / "dev.scores").string());
    summary += std::to_string(i) + "," + std::to_string(seeds[i]) + "," + std::to_string(r.best.epoch) + "," +
               Fixed6(r.best.best_dev_loss) + "," + Fixed6(ComputeEer(dev_scores, dev_set).eer) + "\n";
  }
  WriteText(root / "rounds.csv", summary);
  out << summary;
  return kExitOk;
}

// ---- eval ----

struct EvalArgs {
  FrontendFlags fe;
  std::string checkpoint, protocol, format = "tsv", backend, by, out;
  std::optional<double> c1, c2;
  int jobs = 1;
};

int CmdEval(const EvalArgs &a, std::ostream &out) {
  RunConfig rc = a.fe.Resolve();
  if (a.c1) rc.tdcf.c1 = *a.c1;
  if (a.c2) rc.tdcf.c2 = *a.c2;
  rc.tdcf.Validate();
  const DecomposeBy by = a.by.empty() ? DecomposeBy::kAttack : ParseDecomposeBy(a.by);
  const ProtocolSet set = ParseProtocol(a.protocol, ParseProtocolFormat(a.format));
  set.CheckUnique();
  const LoadedModel m = LoadModel(a.checkpoint, rc, a.backend);

  const ScoreSet scores = ScoreTrials(m.ckpt.params, *m.frontend, set, a.jobs);
  if (!a.out.empty()) WriteScores(scores, a.out);
  std::string report = EvalSummaryCsv(scores, set, rc.tdcf);
  if (!a.by.empty()) report += "\n" + DecomposeCsv(DecomposeEer(scores, set, by), by);
  out << report;
  return kExitOk;
}

// ---- probe ----

struct ProbeArgs {
  FrontendFlags fe;
  std::string checkpoint, protocol, format = "tsv", backend, bands = "default", out;
  std::optional<size_t> subset;
  uint64_t seed = 0;
  int order = 10, bins = 50, jobs = 1;
};

int CmdProbe(const ProbeArgs &a, std::ostream &out) {
  const RunConfig rc = a.fe.Resolve();
  ProbeConfig pc;
  pc.bands = ParseBands(a.bands);
  pc.order = a.order;
  pc.subset_size = a.subset;
  pc.seed = a.seed;
  pc.hist_bins = a.bins;
  pc.jobs = a.jobs;
  const ProtocolSet set = ParseProtocol(a.protocol, ParseProtocolFormat(a.format));
  set.CheckUnique();
  const LoadedModel m = LoadModel(a.checkpoint, rc, a.backend);
  const ProbeReport report = RunProbe(m.ckpt.params, *m.frontend, set, pc);
  report.Write(a.out);
  out << report.SummaryCsv();
  return kExitOk;
}

// ---- stats ----

struct StatsArgs {
  std::vector<std::string> scores;
  std::string protocol, format = "tsv", labels, out;
  double alpha = 0.05;
};

int CmdStats(const StatsArgs &a, std::ostream &out) {
  std::vector<std::string> labels;
  if (!a.labels.empty()) {
    std::stringstream ss(a.labels);
    for (std::string item; std::getline(ss, item, ',');) labels.push_back(item);
    if (labels.size() != a.scores.size())
      Fail(ErrorKind::kConfig, "--labels names " + std::to_string(labels.size()) + " systems for " +
                                   std::to_string(a.scores.size()) + " score files");
  } else {
    for (const std::string &p : a.scores) labels.push_back(fs::path(p).stem().string());
  }
  const ProtocolSet set = ParseProtocol(a.protocol, ParseProtocolFormat(a.format));
  set.CheckUnique();
  std::vector<std::pair<std::string, ScoreSet>> systems;
  std::string eers = "system,eer,threshold\n";
  for (size_t i = 0; i < a.scores.size(); ++i) {
    systems.emplace_back(labels[i], ReadScores(a.scores[i]));
    const EerResult e = ComputeEer(systems.back().second, set);
    eers += labels[i] + "," + Fixed6(e.eer) + "," + Fixed6(e.threshold) + "\n";
  }
  const SignificanceMatrix m = BuildMatrix(systems, set, a.alpha);
  if (!a.out.empty()) WriteText(a.out, m.ToCsv());
  out << eers << "\n" << m.ToCsv();
  return kExitOk;
}

// ---- synth ----

struct SynthArgs {
  std::string out, band = "2800-3200";
  SyntheticConfig cfg;
};

int CmdSynth(SynthArgs a, std::ostream &out) {
  const std::vector<Band> band = ParseBands(a.band);
  if (band.size() != 1) Fail(ErrorKind::kConfig, "--band takes a single low-high range");
  a.cfg.band_low_hz = band[0].low_hz;
  a.cfg.band_high_hz = band[0].high_hz;
  const ProtocolSet set = GenerateSyntheticDataset(a.cfg, a.out);
  out << "trials,bonafide,spoof\n"
      << set.size() << "," << set.Count(Label::kBonafide) << "," << set.Count(Label::kSpoof) << "\n";
  return kExitOk;
}

// ---- lfcc ----

struct LfccArgs {
  std::vector<std::string> wavs;
  std::string protocol, format = "tsv", out, config;
  std::vector<std::string> sets;
  int jobs = 1;
};

int CmdLfcc(const LfccArgs &a, std::ostream &out) {
  if (a.wavs.empty() && a.protocol.empty()) Fail(ErrorKind::kConfig, "give WAV files and/or --protocol");
  RunConfig rc = a.config.empty() ? ParseRunConfig("", fs::current_path().string(), a.sets)
                                  : LoadRunConfig(a.config, a.sets);
  rc.frontend.kind = FrontendKind::kLfcc;
  const std::unique_ptr<Frontend> fe = MakeFrontend(rc.frontend);

  // (trial id, job) in output order; ids must be unique.
  struct Job {
    std::string id;
    std::function<nn::Tensor<float>()> features;
  };
  std::vector<Job> jobs;
  ProtocolSet set;
  if (!a.protocol.empty()) {
    set = ParseProtocol(a.protocol, ParseProtocolFormat(a.format));
    for (const TrialRecord &r : set.records)
      jobs.push_back({r.trial_id, [&set, &fe, r] { return fe->TrialFeatures(set, r); }});
  }
  for (const std::string &w : a.wavs)
    jobs.push_back({fs::path(w).stem().string(), [&fe, w] { return fe->WaveFeatures(ReadWav(w)); }});
  std::map<std::string, int> seen;
  for (const Job &j : jobs)
    if (seen[j.id]++) Fail(ErrorKind::kDuplicate, "trial id '" + j.id + "' appears twice");

  const fs::path dir(a.out);
  MakeDirs(dir);
  std::vector<std::pair<std::string, std::string>> rows(jobs.size());
  ParallelFor(jobs.size(), a.jobs, [&](size_t i) {
    const std::string file = jobs[i].id + ".cmf";
    WriteFeatures(dir / file, MultiLayerFeatures::FromTensor(jobs[i].features()));
    rows[i] = {jobs[i].id, file};
  });
  FeatureManifest::Write((dir / "manifest.tsv").string(), rows);
  out << "files,dim\n" << rows.size() << "," << rc.frontend.lfcc.OutputDim() << "\n";
  return kExitOk;
}

void AddEvalInputs(CLI::App *app, std::string &checkpoint, std::string &protocol, std::string &format,
                   std::string &backend) {
  app->add_option("--checkpoint", checkpoint, "Model checkpoint (.cmck)")->required();
  app->add_option("--protocol", protocol, "Trial protocol")->required();
  app->add_option("--format", format, "Protocol format: tsv or asvspoof_la")->capture_default_str();
  app->add_option("--backend", backend, "Expected back end (GF, LGF, LLGF); must match the checkpoint");
}

}  // namespace

int RunCli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  CLI::App app{"Speech anti-spoofing countermeasure workbench"};
  app.name("cm");
  app.require_subcommand(1);

  TrainArgs ta;
  CLI::App *train = app.add_subcommand("train", "Train one model per round");
  train->add_option("--config", ta.config, "Run config (TOML)")->required();
  train->add_option("--set", ta.sets, "Config override section.key=value (repeatable)");
  train->add_option("--out", ta.out, "Output directory")->required();
  train->add_option("--rounds", ta.rounds, "Rounds; round i uses seed + i")->capture_default_str();
  train->add_option("--seed", ta.seed, "Overrides train.seed");
  train->add_option("--jobs", ta.jobs, "Feature extraction / scoring threads")->capture_default_str();

  EvalArgs ea;
  CLI::App *eval = app.add_subcommand("eval", "Score a protocol and report EER and min t-DCF");
  AddEvalInputs(eval, ea.checkpoint, ea.protocol, ea.format, ea.backend);
  ea.fe.Add(eval);
  eval->add_option("--by", ea.by, "Decompose EER by attack or codec");
  eval->add_option("--out", ea.out, "Score file to write");
  eval->add_option("--c1", ea.c1, "Weighted miss cost");
  eval->add_option("--c2", ea.c2, "Weighted false-alarm cost");
  eval->add_option("--jobs", ea.jobs, "Scoring threads")->capture_default_str();

  ProbeArgs pa;
  CLI::App *probe = app.add_subcommand("probe", "Re-score with band-stop filtered audio");
  AddEvalInputs(probe, pa.checkpoint, pa.protocol, pa.format, pa.backend);
  pa.fe.Add(probe);
  probe->add_option("--bands", pa.bands, "'default', 'none' or low-high list in Hz")->capture_default_str();
  probe->add_option("--order", pa.order, "Butterworth order")->capture_default_str();
  probe->add_option("--subset", pa.subset, "Class-stratified trial subset size");
  probe->add_option("--seed", pa.seed, "Subset seed")->capture_default_str();
  probe->add_option("--bins", pa.bins, "Histogram bins")->capture_default_str();
  probe->add_option("--out", pa.out, "Report directory")->required();
  probe->add_option("--jobs", pa.jobs, "Scoring threads")->capture_default_str();

  StatsArgs sa;
  CLI::App *stats = app.add_subcommand("stats", "Pairwise EER significance with Holm correction");
  stats->add_option("scores", sa.scores, "Score files")->required();
  stats->add_option("--protocol", sa.protocol, "Trial protocol")->required();
  stats->add_option("--format", sa.format, "Protocol format")->capture_default_str();
  stats->add_option("--alpha", sa.alpha, "Family-wise level")->capture_default_str();
  stats->add_option("--labels", sa.labels, "Comma-separated system names");
  stats->add_option("--out", sa.out, "Matrix CSV to write");

  SynthArgs ya;
  CLI::App *synth = app.add_subcommand("synth", "Generate the synthetic corpus");
  synth->add_option("--out", ya.out, "Output directory")->required();
  synth->add_option("--seed", ya.cfg.seed, "Corpus seed")->capture_default_str();
  synth->add_option("--n-per-class", ya.cfg.n_per_class, "Trials per class")->capture_default_str();
  synth->add_option("--band", ya.band, "Artifact band low-high in Hz")->capture_default_str();
  synth->add_option("--artifact-db", ya.cfg.artifact_db, "Artifact level re. the base signal")
      ->capture_default_str();
  synth->add_option("--min-dur", ya.cfg.min_dur_s, "Shortest trial, seconds")->capture_default_str();
  synth->add_option("--max-dur", ya.cfg.max_dur_s, "Longest trial, seconds")->capture_default_str();

  LfccArgs la;
  CLI::App *lfcc = app.add_subcommand("lfcc", "Dump LFCC features as CMFEAT files plus a manifest");
  lfcc->add_option("wavs", la.wavs, "WAV files (trial id = file stem)");
  lfcc->add_option("--protocol", la.protocol, "Protocol whose trials to extract");
  lfcc->add_option("--format", la.format, "Protocol format")->capture_default_str();
  lfcc->add_option("--out", la.out, "Output directory")->required();
  lfcc->add_option("--config", la.config, "Run config supplying [lfcc]");
  lfcc->add_option("--set", la.sets, "Config override section.key=value (repeatable)");
  lfcc->add_option("--jobs", la.jobs, "Extraction threads")->capture_default_str();

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*train) return CmdTrain(ta, out);
    if (*eval) return CmdEval(ea, out);
    if (*probe) return CmdProbe(pa, out);
    if (*stats) return CmdStats(sa, out);
    if (*synth) return CmdSynth(ya, out);
    if (*lfcc) return CmdLfcc(la, out);
  } catch (const Error &e) {
    err << "cm: " << ErrorKindName(e.kind()) << ": " << e.what() << '\n';
    return ExitCodeFor(e.kind());
  } catch (const std::exception &e) {
    err << "cm: internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitConfig;
}

}  // namespace cm
