// Experiment driver: trains classifiers, runs the attack, and emits the
// detection, infeasibility and continuity-bias tables as CSV.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "wharm/experiment.hpp"

namespace fs = std::filesystem;
using namespace wharm;

namespace {

constexpr int kConfigExit = 1;
constexpr int kRuntimeExit = 2;

struct CommonArgs {
  std::string config;
  std::optional<std::string> data_dir;
  std::optional<std::string> output_dir;
  std::optional<std::uint64_t> seed;
  std::optional<double> radius;
  std::optional<std::size_t> steps;
  std::optional<double> step_size;
  std::optional<int> target;
  std::optional<bool> aware_extra;
};

void add_common(CLI::App* sub, CommonArgs& args, bool attack_flags) {
  sub->add_option("-c,--config", args.config, "experiment config (JSON)")->required();
  sub->add_option("--data-dir", args.data_dir, "override the dataset directory");
  sub->add_option("--output-dir", args.output_dir, "override the output directory");
  sub->add_option("--seed", args.seed, "override the root seed");
  if (!attack_flags) return;
  sub->add_option("--radius", args.radius, "l-infinity attack radius");
  sub->add_option("--steps", args.steps, "PGD iterations");
  sub->add_option("--step-size", args.step_size, "PGD step size");
  sub->add_option("--target", args.target, "target label (omit for untargeted)");
  sub->add_option("--aware-extra", args.aware_extra, "attacker sees the zero-class logit (true/false)");
}

ExperimentConfig resolve_config(const CommonArgs& args) {
  ExperimentConfig cfg = ExperimentConfig::load(args.config);
  if (args.data_dir) cfg.data_dir = *args.data_dir;
  if (args.output_dir) cfg.output_dir = *args.output_dir;
  if (args.seed) cfg.seed = *args.seed;
  if (args.radius) cfg.attack.radius = *args.radius;
  if (args.steps) cfg.attack.steps = *args.steps;
  if (args.step_size) cfg.attack.step_size = *args.step_size;
  if (args.target) cfg.attack.target = *args.target;
  if (args.aware_extra) cfg.attack.aware_extra = *args.aware_extra;
  cfg.validate();
  fs::create_directories(cfg.output_dir);
  return cfg;
}

fs::path checkpoint_path(const ExperimentConfig& cfg, const std::optional<std::string>& given) {
  return given ? fs::path(*given) : cfg.output_dir / "h.ckpt";
}

Classifier load_model(const ExperimentConfig& cfg, const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string() + " (run `wharm train` first)");
  std::string kind;
  in >> kind;
  in.seekg(0);
  return load_checkpoint(make_bank(cfg, parse_feature_kind(kind)), in);
}

struct Pools {
  Partition partition;
  TestPools test;
};

// Loads the partition and test pools written by `wharm partition`, or builds
// them when absent so each table command can also run on its own.
Pools partition_and_pools(const ExperimentConfig& cfg, const Classifier& h, const Datasets& data,
                          const fs::path& dir) {
  Pools p;
  if (fs::exists(dir / "s_adv.set") && fs::exists(dir / "test_adv.set")) {
    p.partition = load_partition(dir);
    p.test.benign = load_set(dir / "test_nat.set");
    p.test.adversarial = load_set(dir / "test_adv.set");
    return p;
  }
  AttackConfig ac = cfg.attack;
  ac.target.reset();
  ac.seed = cfg.derived_seed("partition");
  p.partition = build_partition(h, data.train, ac);
  p.test = build_test_pools(cfg, h, data.test);
  persist_partition(p.partition, dir);
  persist_set(p.test.benign, dir / "test_nat.set");
  persist_set(p.test.adversarial, dir / "test_adv.set");
  return p;
}

int cmd_train(const CommonArgs& args, const std::string& kind_text, const std::optional<std::string>& out) {
  const ExperimentConfig cfg = resolve_config(args);
  const FeatureKind kind = parse_feature_kind(kind_text);
  const Datasets data = load_datasets(cfg);
  auto bank = make_bank(cfg, kind);
  std::cerr << "bank: " << bank->size() << " " << to_string(kind) << " features, training on " << data.train.size()
            << " samples\n";
  TrainResult result = kind == FeatureKind::Holomorphic
                           ? train_holomorphic(cfg, bank, data.train, cfg.derived_seed("train-h"))
                           : [&] {
                               TrainConfig tc = cfg.train;
                               tc.seed = cfg.derived_seed("train-h-order");
                               return train(Classifier::random(bank, 10, cfg.derived_seed("train-h")), data.train, tc);
                             }();
  const fs::path ckpt = checkpoint_path(cfg, out);
  save_checkpoint(result.classifier, ckpt);
  write_trace_csv(result.steps, cfg.output_dir / "train_trace.csv");
  std::ofstream summary(cfg.output_dir / "train.csv");
  summary << "kind,features,train_samples,test_samples,train_accuracy,test_accuracy,final_epoch_loss\n";
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s,%zu,%zu,%zu,%.6f,%.6f,%.6f\n", to_string(kind).c_str(), bank->size(),
                data.train.size(), data.test.size(), accuracy(result.classifier, data.train),
                accuracy(result.classifier, data.test), result.epoch_loss.back());
  summary << buf;
  summary << "# dataset=" << cfg.dataset << "\n# config_hash=" << cfg.config_hash << "\n# seed=" << cfg.seed
          << "\n# library_version=" << kLibraryVersion << "\n";
  std::cout << buf;
  return 0;
}

int cmd_attack(const CommonArgs& args, const std::optional<std::string>& ckpt, std::size_t count) {
  ExperimentConfig cfg = resolve_config(args);
  const Classifier h = load_model(cfg, checkpoint_path(cfg, ckpt));
  const Datasets data = load_datasets(cfg);
  const LabeledSet pool = data.test.subset(sample_rows(data.test.size(), std::min(count, data.test.size()),
                                                       cfg.derived_seed("attack-pool")));
  AttackConfig ac = cfg.attack;
  ac.seed = cfg.derived_seed("attack");
  const bool holo = h.kind() == FeatureKind::Holomorphic && h.has_zero_class();
  LabeledSet adv(pool.image_rows(), pool.image_cols());
  std::size_t attempted = 0, fooled = 0, inside = 0;
  double max_dev = 0.0;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (ac.target && pool.label(i) == *ac.target) continue;
    ++attempted;
    const auto x = pgd(h, pool.image(i), pool.label(i), ac, i);
    const auto img = pool.image(i);
    for (std::size_t p = 0; p < x.size(); ++p) max_dev = std::max(max_dev, std::abs(x[p] - img[p]));
    const std::size_t pred = predict(h, x);
    if (ac.target ? pred == std::size_t(*ac.target) : pred != std::size_t(pool.label(i))) ++fooled;
    if (holo && in_polyhedron(h, x)) ++inside;
    adv.push_back(x, pool.label(i), Origin::Adversarial);
  }
  adv.provenance["attack"] = describe(ac);
  persist_set(adv, cfg.output_dir / "attack.set");
  std::ofstream out(cfg.output_dir / "attack.csv");
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6f\n", attempted, attempted ? double(fooled) / attempted : 0.0,
                attempted ? double(inside) / attempted : 0.0, max_dev);
  out << "attempted,success_rate,inside_polyhedron_rate,max_linf_deviation\n" << buf;
  out << "# attack=" << describe(ac) << "\n# dataset=" << cfg.dataset << "\n# config_hash=" << cfg.config_hash
      << "\n# seed=" << cfg.seed << "\n# library_version=" << kLibraryVersion << "\n";
  std::cout << buf;
  return 0;
}

int cmd_detect(const CommonArgs& args, const std::optional<std::string>& ckpt) {
  const ExperimentConfig cfg = resolve_config(args);
  const Classifier h = load_model(cfg, checkpoint_path(cfg, ckpt));
  const Datasets data = load_datasets(cfg);
  const auto rows = run_detection_table(cfg, h, data.test);
  write_detection_csv(cfg, rows, cfg.output_dir / "detection.csv");
  for (const auto& r : rows) {
    std::printf("%-10s aware P=%.3f R=%.3f F1=%.3f | unaware P=%.3f R=%.3f F1=%.3f\n",
                r.target ? std::to_string(*r.target).c_str() : "untargeted", r.aware.precision, r.aware.recall,
                r.aware.f1, r.unaware.precision, r.unaware.recall, r.unaware.f1);
  }
  return 0;
}

int cmd_partition(const CommonArgs& args, const std::optional<std::string>& ckpt) {
  const ExperimentConfig cfg = resolve_config(args);
  const Classifier h = load_model(cfg, checkpoint_path(cfg, ckpt));
  const Datasets data = load_datasets(cfg);
  const fs::path dir = cfg.output_dir / "partition";
  fs::remove_all(dir);
  const Pools p = partition_and_pools(cfg, h, data, dir);
  std::printf("s_nat=%zu s_adv=%zu test_nat=%zu test_adv=%zu\n", p.partition.s_nat.size(), p.partition.s_adv.size(),
              p.test.benign.size(), p.test.adversarial.size());
  return 0;
}

int cmd_infeasibility(const CommonArgs& args, const std::optional<std::string>& ckpt) {
  const ExperimentConfig cfg = resolve_config(args);
  const Classifier h = load_model(cfg, checkpoint_path(cfg, ckpt));
  const Datasets data = load_datasets(cfg);
  const Pools p = partition_and_pools(cfg, h, data, cfg.output_dir / "partition");
  const auto result = run_infeasibility(cfg, h, p.partition, p.test);
  write_infeasibility_csv(cfg, result.rows, cfg.output_dir / "infeasibility.csv");
  for (const auto& r : result.rows) std::printf("%s adversarial=%.3f benign=%.3f\n", r.name.c_str(), r.adversarial, r.benign);
  return 0;
}

int cmd_bias(const CommonArgs& args, const std::optional<std::string>& ckpt) {
  const ExperimentConfig cfg = resolve_config(args);
  const Classifier h = load_model(cfg, checkpoint_path(cfg, ckpt));
  const Datasets data = load_datasets(cfg);
  const Pools p = partition_and_pools(cfg, h, data, cfg.output_dir / "partition");
  const auto tables = run_bias_tables(cfg, p.partition, p.test);
  write_bias_csv(cfg, tables, cfg.output_dir / "bias.csv");
  std::printf("critical=%.4f continuous T=%.4f (%s) discontinuous T=%.4f (%s)\n", tables.discontinuous.critical,
              tables.continuous.statistic, to_string(tables.continuous.decision).c_str(),
              tables.discontinuous.statistic, to_string(tables.discontinuous.decision).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wharm: holomorphic classifiers, analytic-polyhedron detection and continuity-bias tests"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kLibraryVersion));

  CommonArgs args;
  std::optional<std::string> ckpt;
  std::string kind = "holomorphic";
  std::size_t count = 100;
  int nu = 19;
  double p = 0.99;

  auto* train_cmd = app.add_subcommand("train", "train a classifier and write its checkpoint");
  add_common(train_cmd, args, false);
  train_cmd->add_option("--kind", kind, "holomorphic or cosine");
  train_cmd->add_option("--out", ckpt, "checkpoint path (default <output_dir>/h.ckpt)");

  auto* attack_cmd = app.add_subcommand("attack", "attack a seeded test pool with reflective PGD");
  add_common(attack_cmd, args, true);
  attack_cmd->add_option("--checkpoint", ckpt, "checkpoint path");
  attack_cmd->add_option("--count", count, "number of test samples to attack");

  struct TableCmd {
    const char* name;
    const char* help;
    int (*run)(const CommonArgs&, const std::optional<std::string>&);
  };
  const TableCmd tables[] = {
      {"detect", "detection table over untargeted and targeted attacks", cmd_detect},
      {"partition", "split the training set into natural and in-polyhedron adversarial samples", cmd_partition},
      {"infeasibility", "accuracy of h, f and g on benign and adversarial test pools", cmd_infeasibility},
      {"bias-test", "continuity-bias t-test for classification and regression targets", cmd_bias},
  };
  std::vector<std::pair<CLI::App*, const TableCmd*>> table_cmds;
  for (const auto& t : tables) {
    auto* sub = app.add_subcommand(t.name, t.help);
    add_common(sub, args, true);
    sub->add_option("--checkpoint", ckpt, "checkpoint path (default <output_dir>/h.ckpt)");
    table_cmds.emplace_back(sub, &t);
  }

  auto* quantile_cmd = app.add_subcommand("quantile", "print the Student-t quantile");
  quantile_cmd->add_option("--nu", nu, "degrees of freedom");
  quantile_cmd->add_option("--p", p, "probability");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigExit;
  }

  try {
    if (*quantile_cmd) {
      std::printf("%.10f\n", t_inverse_cdf(nu, p));
      return 0;
    }
    if (*train_cmd) return cmd_train(args, kind, ckpt);
    if (*attack_cmd) return cmd_attack(args, ckpt, count);
    for (const auto& [sub, t] : table_cmds) {
      if (*sub) return t->run(args, ckpt);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigExit;
  } catch (const StatsError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeExit;
  }
  return kRuntimeExit;
}
