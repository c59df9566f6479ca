// c2p: command-line driver for the detection pipeline.
//
//   synth    write a synthetic two-class image set
//   scan     dataset directory -> manifest JSONL
//   caption  manifest -> caption cache JSONL
//   train    manifest + captions -> checkpoint directory
//   merge    fold adapters into the image tower of a checkpoint
//   eval     checkpoint + manifest -> metrics report
//   analyze  wordfreq | clusters | project | logits

#include <iostream>
#include <memory>
#include <optional>

#include "CLI11.hpp"
#include "c2p/c2p.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace c2p;

namespace {

/// Raw flag values; only flags actually given on the command line override
/// the run config.
struct Flags {
  std::string config;
  std::string root, layout, split, manifest, captions, checkpoint, provider, out, backend;
  std::vector<std::string> classes;
  std::string prompt_real, prompt_fake;
  std::uint64_t seed = 0;
  double alpha = 0, lr = 0, lora_alpha = 0, lora_dropout = 0;
  int lora_r = 0, batch_size = 0, epochs = 0;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "run-config JSON; flags override its values");
  cmd->add_option("--out", f.out, "output file or directory");
  cmd->add_option("--seed", f.seed, "seed for the backbone and the run");
  cmd->add_option("--backend", f.backend, "toy | pretrained")->check(CLI::IsMember({"toy", "pretrained"}));
}

void add_data(CLI::App* cmd, Flags& f) {
  cmd->add_option("--root", f.root, "dataset root directory");
  cmd->add_option("--layout", f.layout, "universal_fake_detect | genimage | flat");
  cmd->add_option("--split", f.split, "train | val | test");
  cmd->add_option("--classes", f.classes, "comma-separated class filter")->delimiter(',');
  cmd->add_option("--manifest", f.manifest, "manifest JSONL");
}

void add_prompts(CLI::App* cmd, Flags& f) {
  cmd->add_option("--prompt-real", f.prompt_real, "prompt prepended to real captions");
  cmd->add_option("--prompt-fake", f.prompt_fake, "prompt prepended to fake captions");
}

void add_training(CLI::App* cmd, Flags& f) {
  cmd->add_option("--captions", f.captions, "caption cache JSONL");
  cmd->add_option("--alpha", f.alpha, "weight of the classification loss");
  cmd->add_option("--lora-r", f.lora_r, "adapter rank");
  cmd->add_option("--lora-alpha", f.lora_alpha, "adapter scaling numerator");
  cmd->add_option("--lora-dropout", f.lora_dropout, "dropout on the adapter input");
  cmd->add_option("--lr", f.lr, "learning rate");
  cmd->add_option("--batch-size", f.batch_size, "batch size");
  cmd->add_option("--epochs", f.epochs, "number of epochs");
}

cli::RunConfig effective_config(const CLI::App* cmd, const Flags& f) {
  cli::RunConfig c = f.config.empty() ? cli::RunConfig{} : cli::load_run_config(f.config);
  auto given = [&](const char* name) { return cmd->get_option_no_throw(name) && cmd->count(name) > 0; };
  if (given("--root")) c.root = f.root;
  if (given("--layout")) c.layout = f.layout;
  if (given("--split")) c.split = f.split;
  if (given("--classes")) c.classes = f.classes;
  if (given("--manifest")) c.manifest = f.manifest;
  if (given("--captions")) c.captions = f.captions;
  if (given("--checkpoint")) c.checkpoint = f.checkpoint;
  if (given("--provider")) c.provider = f.provider;
  if (given("--out")) c.out = f.out;
  if (given("--prompt-real")) c.prompts.p_real = f.prompt_real;
  if (given("--prompt-fake")) c.prompts.p_fake = f.prompt_fake;
  if (given("--backend"))
    c.backend.mode = f.backend == "pretrained" ? nn::BackendMode::PretrainedViTL14 : nn::BackendMode::ToyDeterministic;
  if (given("--seed")) {
    c.train.seed = f.seed;
    c.backend.seed = f.seed;
  }
  if (given("--alpha")) c.train.alpha = f.alpha;
  if (given("--lr")) c.train.learning_rate = f.lr;
  if (given("--batch-size")) c.train.batch_size = f.batch_size;
  if (given("--epochs")) c.train.epochs = f.epochs;
  if (given("--lora-r")) c.adapter.rank = f.lora_r;
  if (given("--lora-alpha")) c.adapter.alpha = f.lora_alpha;
  if (given("--lora-dropout")) c.adapter.dropout = f.lora_dropout;
  cli::validate(c);
  return c;
}

std::string need(const std::string& value, const char* flag) {
  require(!value.empty(), ErrorKind::InvalidInput, std::string("missing ") + flag);
  return value;
}

data::DatasetManifest load_manifest(const cli::RunConfig& c) {
  return data::read_manifest_jsonl(need(c.manifest, "--manifest"));
}

void emit(const json& result) { std::cout << result.dump(2) << '\n'; }

std::unique_ptr<caption::CaptionProvider> make_provider(const cli::RunConfig& c) {
  if (c.provider == "stub") return std::make_unique<caption::StubCaptionProvider>(c.train.seed);
  if (c.provider == "fixed") return std::make_unique<caption::FixedCaptionProvider>();
  if (c.provider.rfind("command:", 0) == 0)
    return std::make_unique<caption::ExternalCommandProvider>(c.provider.substr(8));
  fail(ErrorKind::InvalidInput, "unknown caption provider '" + c.provider + "' (stub, fixed, command:<cmd>)");
}

// ---------------------------------------------------------------- commands

struct SynthFlags {
  int size = 32, n_real = 64, n_fake = 64;
  double amplitude = 40.0;
};

int cmd_synth(const cli::RunConfig& c, const SynthFlags& s) {
  const fs::path out = need(c.out, "--out");
  data::write_synthetic_dataset(out, {s.size, s.n_real, s.n_fake, s.amplitude, c.train.seed});
  train::stamp_output_dir(out, c);
  emit({{"out", out.string()}, {"n_real", s.n_real}, {"n_fake", s.n_fake}, {"size", s.size}});
  return 0;
}

int cmd_scan(const cli::RunConfig& c) {
  const fs::path out = need(c.out, "--out");
  auto manifest = data::scan_dataset(need(c.root, "--root"), data::parse_layout(c.layout),
                                     data::parse_split(c.split),
                                     c.classes.empty() ? std::nullopt : std::optional(c.classes));
  for (const auto& s : manifest.skipped) std::cerr << "warning: skipped " << s.path << ": " << s.reason << '\n';
  data::write_manifest_jsonl(manifest, out);
  cli::stamp_output_file(out, c);
  json counts = json::object();
  for (const auto& [subset, n] : manifest.label_counts()) counts[subset] = {{"real", n.first}, {"fake", n.second}};
  emit({{"out", out.string()}, {"records", manifest.records.size()}, {"skipped", manifest.skipped.size()},
        {"subsets", counts}});
  return 0;
}

int cmd_caption(cli::RunConfig c) {
  if (c.out.empty() && !cli::cache_dir().empty()) c.out = (cli::cache_dir() / "captions.jsonl").string();
  const fs::path out = need(c.out, "--out (or C2P_CACHE_DIR)");
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  const auto manifest = load_manifest(c);
  auto provider = make_provider(c);
  auto cache = caption::CaptionCache::load(out);
  const std::size_t before = cache.size();
  caption::CacheWriter writer(out);
  caption::generate_captions(manifest, *provider, c.preprocess, cache, &writer);
  for (const auto& f : cache.flagged) std::cerr << "warning: no caption for " << f.image_id << ": " << f.reason << '\n';
  cli::stamp_output_file(out, c);
  emit({{"out", out.string()}, {"provider", provider->name()}, {"cached", before},
        {"generated", cache.size() - before}, {"flagged", cache.flagged.size()}});
  return 0;
}

int cmd_train(const cli::RunConfig& c) {
  const fs::path out = need(c.out, "--out");
  const auto manifest = load_manifest(c);
  const auto captions = caption::CaptionCache::load(need(c.captions, "--captions"));
  require(!captions.empty(), ErrorKind::NotFound, "caption cache " + c.captions + " is empty or missing");
  nn::Backend backend(c.backend);

  train::FitHooks hooks;
  hooks.diagnostics_dir = out;
  hooks.warnings = &std::cerr;
  auto result = train::fit(manifest, captions, c.prompts, backend.image, backend.text, c.adapter, c.train,
                           c.preprocess, hooks);

  train::Checkpoint ck{c.backend,
                       c.adapter,
                       c.preprocess,
                       c.train,
                       result.adapters,
                       result.classifier,
                       result.curve,
                       nn::checksum(backend.text.parameters()),
                       nn::checksum(backend.image.parameters()),
                       c};
  ck.save(out);
  json summary{{"out", out.string()}, {"steps", result.curve.size()}, {"skipped", result.skipped.size()}};
  if (!result.curve.empty()) summary["final"] = result.curve.back();
  emit(summary);
  return 0;
}

int cmd_merge(const cli::RunConfig& c) {
  const fs::path dir = need(c.checkpoint, "--checkpoint");
  auto ck = train::load_checkpoint(dir);
  const nn::ImageTower base = nn::make_image_tower(ck.backend);
  require(nn::checksum(base.parameters()) == ck.frozen_image_checksum, ErrorKind::VersionError,
          "rebuilt backbone does not match the one this checkpoint was trained on; retrain with this build");
  const auto merged = train::export_merged(dir, nn::merge_adapters(base, ck.adapters));
  emit({{"out", (dir / train::kMergedFile).string()},
        {"parameters", merged.parameter_count()},
        {"backbone_parameters", base.parameter_count()}});
  return 0;
}

eval::Predictions predictions_for(const cli::RunConfig& c, bool merged) {
  const auto model = eval::load_detection_model(need(c.checkpoint, "--checkpoint"), merged);
  auto preds = eval::predict(load_manifest(c), model);
  for (const auto& f : preds.flagged) std::cerr << "warning: excluded " << f.image_id << ": " << f.reason << '\n';
  return preds;
}

int cmd_eval(const cli::RunConfig& c, bool merged, const std::string& results_path) {
  const fs::path out = need(c.out, "--out");
  const auto preds = predictions_for(c, merged);
  const auto report = eval::evaluate(preds, c.threshold);
  json j = report;
  j["merged"] = merged;
  train::write_text(out, j.dump(2) + "\n");
  cli::stamp_output_file(out, c);
  if (!results_path.empty()) eval::write_results_jsonl(preds.results, results_path);
  emit(j);
  return 0;
}

struct AnalyzeFlags {
  std::string which;
  int k = 2;
  std::size_t top_k = 15;
  int bins = 50;
  bool merged = false;
};

std::vector<analysis::DetectionFeature> detection_features(const cli::RunConfig& c, bool merged) {
  const auto model = eval::load_detection_model(need(c.checkpoint, "--checkpoint"), merged);
  std::vector<analysis::DetectionFeature> out;
  for (const auto& rec : load_manifest(c).records) {
    try {
      const auto v = model.feature(data::preprocess_image(data::load_image(rec.path), model.preprocess));
      out.push_back(analysis::detection_feature(v, model.classifier, rec.image_id, rec.label));
    } catch (const Error& e) {
      std::cerr << "warning: excluded " << rec.image_id << ": " << e.what() << '\n';
    }
  }
  require(!out.empty(), ErrorKind::EmptyDataset, "no readable images to analyze");
  return out;
}

nn::Matrix stack(const std::vector<analysis::DetectionFeature>& fs) {
  nn::Matrix x(static_cast<Eigen::Index>(fs.size()), fs.front().vector.size());
  for (std::size_t i = 0; i < fs.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = fs[i].vector;
  return x;
}

int cmd_analyze(const cli::RunConfig& c, const AnalyzeFlags& a) {
  const fs::path out = need(c.out, "--out");
  json result{{"which", a.which}};
  if (a.which == "wordfreq") {
    std::vector<std::string> texts;
    if (!c.captions.empty()) {
      result["source"] = "captions";
      for (const auto& e : caption::enhance_all(caption::CaptionCache::load(c.captions), c.prompts))
        texts.push_back(e.text);
    } else {
      result["source"] = "decoded_detection_features";
      const auto feats = detection_features(c, a.merged);
      // word vectors sized to the features so the greedy decoder can pick words
      double mean_norm = 0.0;
      for (const auto& f : feats) mean_norm += f.vector.norm() / static_cast<double>(feats.size());
      const analysis::StubFeatureDecoder decoder(static_cast<int>(feats.front().vector.size()), c.train.seed, 6,
                                                 mean_norm > 0.0 ? mean_norm / 2.0 : 1.0);
      json decoded = json::array();
      for (const auto& f : feats) {
        texts.push_back(analysis::decode_feature_to_text(f.vector, decoder));
        decoded.push_back({{"image_id", f.image_id}, {"label", f.label}, {"text", texts.back()}});
      }
      result["decoded"] = decoded;
    }
    result["table"] = analysis::word_frequency(texts, a.top_k);
  } else if (a.which == "clusters") {
    const auto feats = detection_features(c, a.merged);
    const auto km = analysis::kmeans(stack(feats), a.k, c.train.seed);
    json items = json::array();
    for (std::size_t i = 0; i < feats.size(); ++i)
      items.push_back({{"image_id", feats[i].image_id}, {"label", feats[i].label}, {"cluster", km.assignments[i]}});
    std::vector<std::vector<double>> centers;
    for (Eigen::Index r = 0; r < km.centers.rows(); ++r)
      centers.emplace_back(km.centers.row(r).data(), km.centers.row(r).data() + km.centers.cols());
    result.update({{"k", a.k}, {"assignments", items}, {"centers", centers}, {"objective", km.objective},
                   {"iterations", km.iterations}, {"converged", km.converged}});
  } else if (a.which == "project") {
    const auto feats = detection_features(c, a.merged);
    const auto y = analysis::project_2d(stack(feats), *analysis::make_projection("pca"), c.train.seed);
    json points = json::array();
    for (std::size_t i = 0; i < feats.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      points.push_back({{"image_id", feats[i].image_id}, {"label", feats[i].label}, {"x", y(r, 0)}, {"y", y(r, 1)}});
    }
    result.update({{"method", "pca"}, {"points", points}});
  } else if (a.which == "logits") {
    json hist = json::object();
    for (const auto& [subset, h] : eval::export_logit_distribution(predictions_for(c, a.merged).results, a.bins))
      hist[subset] = h;
    result["histograms"] = hist;
  } else {
    fail(ErrorKind::InvalidInput, "unknown analysis '" + a.which + "'");
  }
  train::write_text(out, result.dump(2) + "\n");
  cli::stamp_output_file(out, c);
  std::cout << out.string() << '\n';
  return 0;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NotFound:
    case ErrorKind::EmptyDataset:
      return 2;
    case ErrorKind::VersionError:
      return 3;
    default:
      return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AI-generated image detection via prompt-enhanced contrastive fine-tuning"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);
  Flags f;

  auto* synth = app.add_subcommand("synth", "write a synthetic real/fake image set");
  SynthFlags sf;
  add_common(synth, f);
  synth->add_option("--size", sf.size, "image side length");
  synth->add_option("--n-real", sf.n_real, "number of real images");
  synth->add_option("--n-fake", sf.n_fake, "number of fake images");
  synth->add_option("--amplitude", sf.amplitude, "strength of the fake-class artifact");

  auto* scan = app.add_subcommand("scan", "index a dataset directory into a manifest");
  add_common(scan, f);
  add_data(scan, f);

  auto* cap = app.add_subcommand("caption", "caption every image of a manifest");
  add_common(cap, f);
  add_data(cap, f);
  cap->add_option("--provider", f.provider, "stub | fixed | command:<shell command>");

  auto* trn = app.add_subcommand("train", "fine-tune adapters and the classifier");
  add_common(trn, f);
  add_data(trn, f);
  add_prompts(trn, f);
  add_training(trn, f);

  auto* mrg = app.add_subcommand("merge", "fold trained adapters into the image tower");
  add_common(mrg, f);
  mrg->add_option("--checkpoint", f.checkpoint, "checkpoint directory")->required();

  bool eval_merged = false;
  std::string results_path;
  auto* evl = app.add_subcommand("eval", "score a manifest and report AP / accuracy");
  add_common(evl, f);
  add_data(evl, f);
  evl->add_option("--checkpoint", f.checkpoint, "checkpoint directory");
  evl->add_flag("--merged", eval_merged, "use the merged export instead of adapters");
  evl->add_option("--results", results_path, "also write per-image results JSONL here");

  AnalyzeFlags af;
  auto* ana = app.add_subcommand("analyze", "interpretability analyses");
  add_common(ana, f);
  add_data(ana, f);
  add_prompts(ana, f);
  ana->add_option("--checkpoint", f.checkpoint, "checkpoint directory");
  ana->add_option("--captions", f.captions, "caption cache; wordfreq counts enhanced captions when given");
  ana->add_option("--which", af.which, "analysis to run")
      ->required()
      ->check(CLI::IsMember({"wordfreq", "clusters", "project", "logits"}));
  ana->add_option("--k", af.k, "number of clusters");
  ana->add_option("--top-k", af.top_k, "rows of the word table");
  ana->add_option("--bins", af.bins, "histogram bins");
  ana->add_flag("--merged", af.merged, "use the merged export instead of adapters");

  CLI11_PARSE(app, argc, argv);

  try {
    const CLI::App* cmd = app.get_subcommands().front();
    const cli::RunConfig c = effective_config(cmd, f);
    if (cmd == synth) return cmd_synth(c, sf);
    if (cmd == scan) return cmd_scan(c);
    if (cmd == cap) return cmd_caption(c);
    if (cmd == trn) return cmd_train(c);
    if (cmd == mrg) return cmd_merge(c);
    if (cmd == evl) return cmd_eval(c, eval_merged, results_path);
    if (cmd == ana) return cmd_analyze(c, af);
  } catch (const Error& e) {
    std::cerr << "c2p: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "c2p: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
