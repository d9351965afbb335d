// Copyright 2026 The unilog Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "unilog/binary_io.hpp"
#include "unilog/cli.hpp"
#include "unilog/compression.hpp"
#include "unilog/tasks.hpp"
#include "unilog/tokenizer.hpp"

namespace unilog::cli {

namespace fs = std::filesystem;
using tokenizer::SpecialIds;

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string general(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string join(const std::vector<std::string>& v, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += v[i];
  }
  return out;
}

// Flags shared by every command that reads log data.
struct DataFlags {
  SourceOptions source;
  std::string scheme = "per_line";
  std::size_t window = 1;
  std::size_t stride = 1;
};

void add_synth_flags(CLI::App* sub, DataFlags& f) {
  sub->add_option("--synth-lines", f.source.synthetic.n_lines, "Synthetic corpus: number of lines");
  sub->add_option("--synth-templates", f.source.synthetic.n_templates, "Synthetic corpus: normal templates");
  sub->add_option("--synth-anomaly-rate", f.source.synthetic.anomaly_rate, "Synthetic corpus: anomalous fraction");
  sub->add_option("--synth-seed", f.source.synthetic.rng_seed, "Synthetic corpus: generator seed");
}

void add_data_flags(CLI::App* sub, DataFlags& f, bool with_windows = true) {
  sub->add_option("inputs", f.source.inputs, "Log files or dataset directories (default: synthetic corpus)");
  sub->add_option("--exclude-dataset", f.source.exclude_datasets,
                  "Skip inputs whose dataset name (directory name or file stem) matches; repeatable");
  sub->add_option("--labels", f.source.labels_path, "CSV of key,label rows");
  sub->add_option("--summaries", f.source.summaries_path, "CSV of line,summary rows");
  sub->add_option("--label-scheme", f.scheme, "Label keys are line indices or block ids")
      ->check(CLI::IsMember({"per_line", "per_block"}));
  sub->add_option("--block-pattern", f.source.block_pattern, "Regular expression extracting block ids");
  add_synth_flags(sub, f);
  if (with_windows) {
    sub->add_option("--window", f.window, "Lines per sequence")->check(CLI::PositiveNumber);
    sub->add_option("--stride", f.stride, "Lines between sequence starts")->check(CLI::PositiveNumber);
  }
}

Corpus load(DataFlags& f) {
  f.source.scheme = f.scheme == "per_block" ? ingest::LabelScheme::kPerBlock : ingest::LabelScheme::kPerLine;
  return load_corpus(f.source);
}

// Windows, or one window per block id when labels are keyed by block.
std::vector<Window> windows_of(const Corpus& corpus, const DataFlags& f) {
  if (f.source.scheme != ingest::LabelScheme::kPerBlock) return make_windows(corpus, f.window, f.stride);
  std::vector<Window> out;
  for (const Source& src : corpus.sources) {
    for (auto& [key, recs] : ingest::group_by_key(src.records, f.source.block_pattern)) {
      out.push_back({key, std::move(recs)});
    }
  }
  return out;
}

bool label_of(const Window& w, const Corpus& corpus, const DataFlags& f) {
  if (f.source.scheme != ingest::LabelScheme::kPerBlock) return window_label(w, corpus);
  if (!corpus.labels) throw UsageError("this command needs labels (--labels)");
  auto it = corpus.labels->find(w.key);
  if (it == corpus.labels->end()) throw DataError("no label for block " + w.key);
  return it->second;
}

std::vector<std::string> dataset_names(const Corpus& corpus) {
  std::vector<std::string> names;
  for (const Source& s : corpus.sources) {
    if (std::find(names.begin(), names.end(), s.dataset) == names.end()) names.push_back(s.dataset);
  }
  return names;
}

// Flags for commands that update weights.
struct TrainFlags {
  training::TrainConfig cfg;
  std::uint64_t steps = 2048;
  std::string metrics_path;
};

void add_train_flags(CLI::App* sub, TrainFlags& f) {
  f.cfg.batch_size = 32;
  sub->add_option("--steps", f.steps, "Optimizer steps")->check(CLI::PositiveNumber);
  sub->add_option("--batch-size", f.cfg.batch_size, "Sequences per step")->check(CLI::PositiveNumber);
  sub->add_option("--lr", f.cfg.lr, "Initial learning rate (decays to 1% over the run)")
      ->check(CLI::PositiveNumber);
  sub->add_option("--weight-decay", f.cfg.adamw.weight_decay, "Decoupled weight decay");
  sub->add_option("--mask-budget", f.cfg.mask_budget, "Fraction of tokens to mask");
  sub->add_option("--seed", f.cfg.seed, "Seed for initialization, batch order, masking and dropout");
  sub->add_option("--metrics", f.metrics_path, "Write step<TAB>loss<TAB>lr lines to this file");
}

constexpr std::string_view kTableKey = "tokenizer.unigram_table";

std::string active_table_hash() { return to_hex(tokenizer::UnigramTable::active().content_hash()); }

// Loads a checkpoint that will tokenize text, refusing one trained with a
// different unigram table than the active one.
model::Checkpoint load_tokenizing_checkpoint(const std::string& path) {
  model::Checkpoint ckpt = model::load_checkpoint(path);
  auto it = ckpt.provenance.find(std::string(kTableKey));
  if (it != ckpt.provenance.end() && it->second != active_table_hash()) {
    throw UsageError(path + " was trained with a different unigram table; pass the same --unigram-table");
  }
  return ckpt;
}

// Records the effective flag values of `sub` in the checkpoint, leaving out
// file locations so identical runs give identical checkpoints.
void record_flags(const CLI::App* sub, model::Checkpoint& ckpt, const std::string& prefix) {
  static const std::set<std::string> kSkip = {"--out", "--metrics", "--ckpt", "--help", "--config"};
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string name = opt->get_name(false, true);
    std::string key = opt->get_single_name();
    if (kSkip.count("--" + key) || kSkip.count(name) || key == "help") continue;
    std::string value = opt->count() > 0 ? join(opt->results(), " ") : opt->get_default_str();
    ckpt.provenance[prefix + key] = value;
  }
}

training::StepCallback progress(std::ostream& err, std::ofstream* metrics, std::uint64_t total) {
  return [&err, metrics, total](std::uint64_t step, double loss, double lr) {
    if (metrics && *metrics) *metrics << step << '\t' << general(loss) << '\t' << general(lr) << '\n';
    if (step % 256 == 0 || step == total) {
      err << "step " << step << "/" << total << " loss " << general(loss) << '\n';
    }
  };
}

std::unique_ptr<std::ofstream> open_metrics(const std::string& path) {
  if (path.empty()) return nullptr;
  auto f = std::make_unique<std::ofstream>(path);
  if (!*f) throw DataError("cannot write metrics file " + path);
  return f;
}

TaskKind task_of(const std::string& name) {
  auto t = tokenizer::parse_task(name);
  if (!t) throw UsageError("unknown task " + name);
  return *t;
}

void write_text(const std::string& path, const std::string& text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text(const std::string& path) {
  const Bytes b = read_file(resolve_data_path(path));
  return std::string(b.begin(), b.end());
}

// --- commands -------------------------------------------------------------------------

struct SynthCmd {
  DataFlags data;
  std::string out = "synthetic";
};

int run_synth(SynthCmd& c, std::ostream& out) {
  const ingest::SyntheticCorpus syn = ingest::generate_synthetic_corpus(c.data.source.synthetic);
  fs::create_directories(c.out);
  write_text((fs::path(c.out) / "synthetic.log").string(), syn.text());
  std::string labels = "line,label\n";
  std::string summaries = "line,summary\n";
  for (const auto& r : syn.records) {
    labels += std::to_string(r.line_index) + (syn.anomalous.at(r.line_index) ? ",Anomaly\n" : ",Normal\n");
    summaries += std::to_string(r.line_index) + "," + join(syn.summaries.at(r.line_index), " ") + "\n";
  }
  write_text((fs::path(c.out) / "labels.csv").string(), labels);
  write_text((fs::path(c.out) / "summaries.csv").string(), summaries);
  std::size_t bad = 0;
  for (const auto& [line, a] : syn.anomalous) bad += a;
  out << "lines=" << syn.records.size() << "\nanomalous=" << bad << "\ndirectory=" << c.out << "\n";
  return kExitOk;
}

tokenizer::Vocabulary vocab_from(const Corpus& corpus, std::size_t min_count, std::size_t* tokens = nullptr) {
  std::vector<std::vector<std::string>> toks;
  std::size_t n = 0;
  for (const Source& s : corpus.sources) {
    for (const auto& r : s.records) {
      toks.push_back(tokenizer::tokenize(r.raw_text));
      n += toks.back().size();
    }
  }
  if (tokens) *tokens = n;
  return tokenizer::build_vocab(toks, min_count);
}

struct PrepareCmd {
  DataFlags data;
  std::size_t min_count = 1;
  std::string out = "vocab.txt";
};

int run_prepare(PrepareCmd& c, std::ostream& out) {
  const Corpus corpus = load(c.data);
  std::size_t lines = 0;
  for (const Source& s : corpus.sources) lines += s.records.size();
  std::size_t tokens = 0;
  const tokenizer::Vocabulary vocab = vocab_from(corpus, c.min_count, &tokens);
  vocab.save(c.out);
  out << "datasets=" << join(dataset_names(corpus), ",") << "\nlines=" << lines << "\ntokens=" << tokens
      << "\nvocab_size=" << vocab.size() << "\nvocab=" << c.out << "\n";
  return kExitOk;
}

struct PretrainCmd {
  DataFlags data;
  TrainFlags train;
  model::ModelConfig model;
  std::string objective = "unilog";
  std::string vocab_path;
  std::size_t min_count = 1;
  std::string out = "unilog.ulog";
};

int run_pretrain(PretrainCmd& c, const CLI::App* sub, std::ostream& out, std::ostream& err) {
  const Corpus corpus = load(c.data);
  tokenizer::Vocabulary vocab =
      c.vocab_path.empty() ? vocab_from(corpus, c.min_count) : tokenizer::Vocabulary::load(c.vocab_path);
  std::vector<std::vector<TokenId>> seqs;
  for (const Window& w : windows_of(corpus, c.data)) seqs.push_back(window_ids(vocab, w));
  c.model.vocab_size = static_cast<int>(vocab.size());
  c.model.validate();
  model::Checkpoint ckpt = training::new_checkpoint(c.model, std::move(vocab), c.train.cfg.seed);
  c.train.cfg.pretrain_steps = c.train.steps;
  auto metrics = open_metrics(c.train.metrics_path);
  const auto objective = *training::parse_objective(c.objective);
  const auto result = training::pretrain(ckpt, seqs, objective, c.train.cfg,
                                         progress(err, metrics.get(), c.train.steps));
  record_flags(sub, ckpt, "pretrain.flag.");
  ckpt.provenance[std::string(kTableKey)] = active_table_hash();
  ckpt.provenance["pretrain.datasets"] = join(dataset_names(corpus), ",");
  model::save_checkpoint(ckpt, c.out);
  out << "sequences=" << seqs.size() << "\nvocab_size=" << ckpt.config.vocab_size
      << "\nfinal_loss=" << general(result.losses.back()) << "\ncheckpoint=" << c.out << "\n";
  return kExitOk;
}

struct FinetuneCmd {
  DataFlags data;
  TrainFlags train;
  std::string ckpt;
  std::string task;
  std::size_t chunk = 0;
  std::string out;
};

std::vector<training::TaskSample> task_dataset(TaskKind task, const Corpus& corpus, const DataFlags& f,
                                               const tokenizer::Vocabulary& vocab, std::size_t chunk) {
  std::vector<training::TaskSample> data;
  if (task == TaskKind::kCompression) {
    for (const Source& s : corpus.sources) {
      const std::vector<TokenId> ids = window_ids(vocab, Window{"", s.records});
      for (std::size_t i = 0; i < ids.size(); i += chunk) {
        data.push_back({std::vector<TokenId>(ids.begin() + static_cast<std::ptrdiff_t>(i),
                                             ids.begin() + static_cast<std::ptrdiff_t>(std::min(ids.size(), i + chunk))),
                        0,
                        {}});
      }
    }
    return data;
  }
  for (const Window& w : windows_of(corpus, f)) {
    training::TaskSample s;
    s.ids = window_ids(vocab, w);
    switch (task) {
      case TaskKind::kAnomaly:
        // Reconstruction is learned from normal sequences only.
        if (corpus.labels && label_of(w, corpus, f)) continue;
        break;
      case TaskKind::kFailure:
        s.label = label_of(w, corpus, f) ? 1 : 0;
        break;
      case TaskKind::kSummarization: {
        if (!corpus.summaries) throw UsageError("summarization needs --summaries");
        s.summary = vocab.encode(window_summary(w, *corpus.summaries));
        if (s.summary.empty()) continue;
        break;
      }
      case TaskKind::kCompression:
        break;
    }
    data.push_back(std::move(s));
  }
  return data;
}

int run_finetune(FinetuneCmd& c, const CLI::App* sub, std::ostream& out, std::ostream& err) {
  const TaskKind task = task_of(c.task);
  model::Checkpoint ckpt = load_tokenizing_checkpoint(c.ckpt);
  const Corpus corpus = load(c.data);
  const std::size_t chunk = c.chunk ? c.chunk : static_cast<std::size_t>(ckpt.config.max_len);
  const auto dataset = task_dataset(task, corpus, c.data, ckpt.vocab, chunk);
  c.train.cfg.finetune_steps = c.train.steps;
  auto metrics = open_metrics(c.train.metrics_path);
  const auto result = training::finetune(ckpt, task, dataset, c.train.cfg, progress(err, metrics.get(), c.train.steps));
  const std::string prefix = "finetune." + c.task;
  record_flags(sub, ckpt, prefix + ".flag.");
  ckpt.provenance[prefix + ".datasets"] = join(dataset_names(corpus), ",");
  const std::string path = c.out.empty() ? c.task + ".ulog" : c.out;
  model::save_checkpoint(ckpt, path);
  out << "examples=" << dataset.size() << "\nfinal_loss=" << general(result.losses.back()) << "\ncheckpoint=" << path
      << "\n";
  return kExitOk;
}

// Writes per-window records to `path` (or `out`) and, when ground truth is
// known, prints the evaluation report.
struct InferCmd {
  DataFlags data;
  std::string ckpt;
  std::string out;
  std::string report;
  double threshold = tasks::kDefaultAnomalyThreshold;
  double cutoff = 0.5;
  std::size_t max_out = 16;
};

void emit(const std::string& records, const std::string& path, std::ostream& out) {
  if (path.empty()) out << records;
  else write_text(path, records);
}

void emit_report(const std::string& report, const std::string& path, std::ostream& out) {
  out << report;
  if (!path.empty()) write_text(path, report);
}

int run_detect(InferCmd& c, std::ostream& out) {
  model::Checkpoint ckpt = load_tokenizing_checkpoint(c.ckpt);
  const Corpus corpus = load(c.data);
  const auto windows = windows_of(corpus, c.data);
  std::vector<std::vector<TokenId>> seqs;
  for (const Window& w : windows) seqs.push_back(window_ids(ckpt.vocab, w));
  const auto verdicts = tasks::detect_anomalies(ckpt, seqs, c.threshold);
  std::string records = "key,score,label\n";
  std::vector<bool> pred;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    records += windows[i].key + "," + general(verdicts[i].score) + "," +
               (verdicts[i].anomalous ? "Anomaly" : "Normal") + "\n";
    pred.push_back(verdicts[i].anomalous);
  }
  emit(records, c.out, out);
  if (corpus.labels) {
    std::vector<bool> truth;
    for (const Window& w : windows) truth.push_back(label_of(w, corpus, c.data));
    emit_report(tasks::report_kv(tasks::precision_recall_f1(pred, truth)), c.report, out);
  }
  return kExitOk;
}

int run_predict(InferCmd& c, std::ostream& out) {
  model::Checkpoint ckpt = load_tokenizing_checkpoint(c.ckpt);
  const Corpus corpus = load(c.data);
  const auto windows = windows_of(corpus, c.data);
  std::vector<std::vector<TokenId>> seqs;
  for (const Window& w : windows) seqs.push_back(window_ids(ckpt.vocab, w));
  const auto probs = tasks::predict_failures(ckpt, seqs);
  std::string records = "key,probability,label\n";
  std::vector<bool> pred;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const bool fail = probs[i] >= c.cutoff;
    records += windows[i].key + "," + general(probs[i]) + "," + (fail ? "Failure" : "Normal") + "\n";
    pred.push_back(fail);
  }
  emit(records, c.out, out);
  if (corpus.labels) {
    std::vector<bool> truth;
    for (const Window& w : windows) truth.push_back(label_of(w, corpus, c.data));
    emit_report(tasks::report_kv(tasks::precision_recall_f1(pred, truth)), c.report, out);
  }
  return kExitOk;
}

int run_summarize(InferCmd& c, std::ostream& out) {
  model::Checkpoint ckpt = load_tokenizing_checkpoint(c.ckpt);
  const Corpus corpus = load(c.data);
  const auto windows = windows_of(corpus, c.data);
  std::string records = "key,summary\n";
  std::vector<std::vector<std::string>> pred;
  std::vector<std::vector<std::string>> truth;
  for (const Window& w : windows) {
    const auto ids = tasks::summarize(ckpt, window_ids(ckpt.vocab, w), c.max_out);
    pred.push_back(ckpt.vocab.decode(ids));
    records += w.key + "," + join(pred.back(), " ") + "\n";
    if (corpus.summaries) truth.push_back(window_summary(w, *corpus.summaries));
  }
  emit(records, c.out, out);
  if (corpus.summaries) emit_report(tasks::report_kv(tasks::token_f1(pred, truth)), c.report, out);
  return kExitOk;
}

struct CodecCmd {
  std::string ckpt;
  std::string input;
  std::string out;
  int context = 0;
};

int run_compress(CodecCmd& c, std::ostream& out) {
  const model::Checkpoint ckpt = load_tokenizing_checkpoint(c.ckpt);
  const std::string path = c.out.empty() ? c.input + ".ulzc" : c.out;
  const Bytes data = read_file(resolve_data_path(c.input));
  compression::CompressStats stats;
  write_file(path, compression::compress_bytes(ckpt, data, &stats, c.context));
  out << "original_bytes=" << stats.original_bytes << "\ncompressed_bytes=" << stats.blob_bytes
      << "\ntokens=" << stats.token_count << "\npayload_bits=" << stats.payload_bits
      << "\nresidual_bytes=" << stats.residual_bytes << "\n";
  if (stats.original_bytes > 0) {
    out << "compression_rate=" << fixed(100.0 * tasks::compression_rate(stats.blob_bytes, stats.original_bytes), 2)
        << "%\n";
  }
  out << "output=" << path << "\n";
  return kExitOk;
}

int run_decompress(CodecCmd& c, std::ostream& out) {
  const model::Checkpoint ckpt = model::load_checkpoint(c.ckpt);
  const Bytes blob = read_file(resolve_data_path(c.input));
  const Bytes text = compression::decompress_bytes(ckpt, blob);
  write_file(c.out, text);
  out << "bytes=" << text.size() << "\noutput=" << c.out << "\n";
  return kExitOk;
}

struct EvalCmd {
  std::string task;
  std::string pred;
  std::string truth;
  std::string original;
  std::string compressed;
  std::string report;
};

int run_eval(EvalCmd& c, std::ostream& out) {
  const TaskKind task = task_of(c.task);
  std::string report;
  if (task == TaskKind::kCompression) {
    if (c.original.empty() || c.compressed.empty()) throw UsageError("eval --task compression needs --original and --compressed");
    const auto orig = fs::file_size(resolve_data_path(c.original));
    const auto comp = fs::file_size(resolve_data_path(c.compressed));
    const double rate = tasks::compression_rate(comp, orig);
    out << "Compression rate " << fixed(100.0 * rate, 1) << "%\n";
    report = "original_bytes=" + std::to_string(orig) + "\ncompressed_bytes=" + std::to_string(comp) +
             "\ncompression_rate=" + fixed(100.0 * rate, 4) + "%\n";
  } else {
    if (c.pred.empty() || c.truth.empty()) throw UsageError("eval needs --pred and --truth");
    tasks::MetricsReport r;
    if (task == TaskKind::kSummarization) {
      const SummaryMap pred = parse_summaries(read_text(c.pred));
      const SummaryMap truth = parse_summaries(read_text(c.truth));
      std::vector<std::vector<std::string>> p;
      std::vector<std::vector<std::string>> t;
      for (const auto& [key, toks] : truth) {
        auto it = pred.find(key);
        if (it == pred.end()) throw DataError("no prediction for key " + key);
        p.push_back(it->second);
        t.push_back(toks);
      }
      r = tasks::token_f1(p, t);
    } else {
      // Prediction files may carry a score column before the label.
      std::string pred_text;
      std::istringstream in(read_text(c.pred));
      for (std::string line; std::getline(in, line);) {
        const auto first = line.find(',');
        const auto last = line.rfind(',');
        pred_text += first == last ? line : line.substr(0, first) + line.substr(last);
        pred_text += '\n';
      }
      const auto pred = ingest::parse_labels(pred_text, ingest::LabelScheme::kPerBlock);
      const auto truth = ingest::load_labels(resolve_data_path(c.truth), ingest::LabelScheme::kPerBlock);
      std::vector<bool> p;
      std::vector<bool> t;
      for (const auto& [key, label] : truth) {
        auto it = pred.find(key);
        if (it == pred.end()) throw DataError("no prediction for key " + key);
        p.push_back(it->second);
        t.push_back(label);
      }
      r = tasks::precision_recall_f1(p, t);
    }
    out << "F1 " << fixed(r.f1, 2) << " (precision " << fixed(r.precision, 2) << ", recall " << fixed(r.recall, 2)
        << ")\n";
    report = tasks::report_kv(r);
  }
  emit_report(report, c.report, out);
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"unilog: one pretrained log model for anomaly detection, failure prediction, summarization and "
               "compression"};
  app.name("unilog");
  app.option_defaults()->always_capture_default();
  app.set_config("--config", "", "Read flags from a TOML/INI file (command-line flags take precedence)");
  app.require_subcommand(1);
  app.set_version_flag("--version", "unilog 1.0.0");
  std::string unigram_table;
  app.add_option("--unigram-table", unigram_table,
                 "Word list for splitting fused words, one word per line, most frequent first (default: built in)");

  SynthCmd synth;
  auto* s_synth = app.add_subcommand("synth", "Write the seeded synthetic corpus with labels and summaries");
  add_synth_flags(s_synth, synth.data);
  s_synth->add_option("-o,--out", synth.out, "Output directory");

  PrepareCmd prepare;
  auto* s_prepare = app.add_subcommand("prepare", "Tokenize logs and build the vocabulary");
  add_data_flags(s_prepare, prepare.data, false);
  s_prepare->add_option("--min-count", prepare.min_count, "Drop tokens seen fewer times");
  s_prepare->add_option("-o,--out", prepare.out, "Vocabulary file");

  PretrainCmd pretrain;
  auto* s_pretrain = app.add_subcommand("pretrain", "Pretrain the shared transformer");
  add_data_flags(s_pretrain, pretrain.data);
  add_train_flags(s_pretrain, pretrain.train);
  pretrain.model.d_model = 64;
  pretrain.model.d_head = 16;
  pretrain.model.d_ffn = 256;
  s_pretrain->add_option("--objective", pretrain.objective, "Pretraining objective")
      ->check(CLI::IsMember({"unilog", "bert", "prefix"}));
  s_pretrain->add_option("--vocab", pretrain.vocab_path, "Vocabulary from `prepare` (default: built from inputs)");
  s_pretrain->add_option("--min-count", pretrain.min_count, "Vocabulary cutoff when building from inputs");
  s_pretrain->add_option("--blocks", pretrain.model.n_blocks, "Encoder and decoder blocks");
  s_pretrain->add_option("--heads", pretrain.model.n_heads, "Attention heads");
  s_pretrain->add_option("--d-head", pretrain.model.d_head, "Width of each head");
  s_pretrain->add_option("--d-model", pretrain.model.d_model, "Model width");
  s_pretrain->add_option("--d-ffn", pretrain.model.d_ffn, "Feed-forward width");
  s_pretrain->add_option("--dropout", pretrain.model.dropout, "Dropout rate");
  s_pretrain->add_option("--max-len", pretrain.model.max_len, "Maximum sequence length");
  s_pretrain->add_option("--rel-buckets", pretrain.model.n_rel_buckets, "Relative position buckets");
  s_pretrain->add_option("-o,--out", pretrain.out, "Checkpoint to write");

  FinetuneCmd finetune;
  auto* s_finetune = app.add_subcommand("finetune", "Finetune a pretrained checkpoint for one task");
  s_finetune->add_option("--ckpt", finetune.ckpt, "Pretrained checkpoint")->required();
  s_finetune->add_option("--task", finetune.task, "Task to finetune")
      ->required()
      ->check(CLI::IsMember({"anomaly", "failure", "summarization", "compression"}));
  add_data_flags(s_finetune, finetune.data);
  add_train_flags(s_finetune, finetune.train);
  s_finetune->add_option("--chunk", finetune.chunk, "Compression: tokens per training chunk (0 = max length)");
  s_finetune->add_option("-o,--out", finetune.out, "Checkpoint to write (default: <task>.ulog)");

  InferCmd detect;
  auto* s_detect = app.add_subcommand("detect", "Score sequences for anomalies");
  s_detect->add_option("--ckpt", detect.ckpt, "Anomaly checkpoint")->required();
  add_data_flags(s_detect, detect.data);
  s_detect->add_option("--threshold", detect.threshold, "Reconstruction loss above which a sequence is anomalous");
  s_detect->add_option("-o,--out", detect.out, "Write key,score,label rows here instead of stdout");
  s_detect->add_option("--report", detect.report, "Write the key=value evaluation report here");

  InferCmd predict;
  auto* s_predict = app.add_subcommand("predict", "Predict failures");
  s_predict->add_option("--ckpt", predict.ckpt, "Failure checkpoint")->required();
  add_data_flags(s_predict, predict.data);
  s_predict->add_option("--cutoff", predict.cutoff, "Failure probability at or above which a failure is declared");
  s_predict->add_option("-o,--out", predict.out, "Write key,probability,label rows here instead of stdout");
  s_predict->add_option("--report", predict.report, "Write the key=value evaluation report here");

  InferCmd summarize;
  auto* s_summarize = app.add_subcommand("summarize", "Summarize sequences");
  s_summarize->add_option("--ckpt", summarize.ckpt, "Summarization checkpoint")->required();
  add_data_flags(s_summarize, summarize.data);
  s_summarize->add_option("--max-out", summarize.max_out, "Longest summary in tokens")->check(CLI::PositiveNumber);
  s_summarize->add_option("-o,--out", summarize.out, "Write key,summary rows here instead of stdout");
  s_summarize->add_option("--report", summarize.report, "Write the key=value evaluation report here");

  CodecCmd compress;
  auto* s_compress = app.add_subcommand("compress", "Losslessly compress a log file");
  s_compress->add_option("--ckpt", compress.ckpt, "Compression checkpoint")->required();
  s_compress->add_option("input", compress.input, "Log file")->required();
  s_compress->add_option("-o,--out", compress.out, "Blob to write (default: <input>.ulzc)");
  s_compress->add_option("--context", compress.context, "Decoder context window in tokens (0: the model's max length)")
      ->check(CLI::NonNegativeNumber);

  CodecCmd decompress;
  auto* s_decompress = app.add_subcommand("decompress", "Restore a log file from a blob");
  s_decompress->add_option("--ckpt", decompress.ckpt, "Checkpoint the blob was written with")->required();
  s_decompress->add_option("input", decompress.input, "Blob")->required();
  s_decompress->add_option("-o,--out", decompress.out, "File to write")->required();

  EvalCmd eval;
  auto* s_eval = app.add_subcommand("eval", "Score predictions against ground truth");
  s_eval->add_option("--task", eval.task, "Task the predictions belong to")
      ->required()
      ->check(CLI::IsMember({"anomaly", "failure", "summarization", "compression"}));
  s_eval->add_option("--pred", eval.pred, "Predictions CSV (key,label or key,summary)");
  s_eval->add_option("--truth", eval.truth, "Ground truth CSV");
  s_eval->add_option("--original", eval.original, "Compression: original file");
  s_eval->add_option("--compressed", eval.compressed, "Compression: compressed file");
  s_eval->add_option("--report", eval.report, "Write the key=value report here");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    tokenizer::UnigramTable::set_active(unigram_table.empty()
                                            ? std::nullopt
                                            : std::optional(tokenizer::UnigramTable::load(resolve_data_path(unigram_table))));
    if (s_synth->parsed()) return run_synth(synth, out);
    if (s_prepare->parsed()) return run_prepare(prepare, out);
    if (s_pretrain->parsed()) return run_pretrain(pretrain, s_pretrain, out, err);
    if (s_finetune->parsed()) return run_finetune(finetune, s_finetune, out, err);
    if (s_detect->parsed()) return run_detect(detect, out);
    if (s_predict->parsed()) return run_predict(predict, out);
    if (s_summarize->parsed()) return run_summarize(summarize, out);
    if (s_compress->parsed()) return run_compress(compress, out);
    if (s_decompress->parsed()) return run_decompress(decompress, out);
    if (s_eval->parsed()) return run_eval(eval, out);
  } catch (const UsageError& e) {
    err << "unilog: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "unilog: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace unilog::cli
